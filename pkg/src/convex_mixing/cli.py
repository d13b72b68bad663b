"""Command-line surface: configs in, CSV/JSON artifacts out.

Every stochastic command takes an explicit --seed (never defaulted from
the clock: artifacts must be replayable), and identical configs produce
byte-identical artifacts.  Artifact files echo the full configuration
in their headers, carry a schema version, and are written UTF-8 with LF
line endings and shortest-roundtrip float formatting.

Verdicts are data: only `verify` maps a FAIL verdict to a nonzero exit
status.  Config problems exit with status 2 and a message naming the
offending field.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from .bounds import (BOUND_KINDS, DEFAULT_TOL, evaluate_bound_curve,
                     survival_F, write_bound_curves_csv)
from .coupling import (DriftEnvelopeError, ou_drift, run_coupling_replicates,
                       simulate_coupling_time, write_outcomes_csv)
from .geometry import ConvexBody, antipodal_points, parse_domain_spec
from .oracle1d import Heat1D, exit_time_survival_mc, write_tightness_csv
from .stats import (hitprob_experiment, hitprob_report_json,
                    run_pair_verification, run_z_domination,
                    verification_report_json, z_domination_json)

SCHEMA_VERSION = "1"


class ConfigError(ValueError):
    """A named-field configuration error; maps to exit status 2."""

    def __init__(self, fieldname, reason):
        self.fieldname = fieldname
        self.reason = reason
        super().__init__(f"{fieldname}: {reason}")


# ---------------------------------------------------------------------------
# Flag parsing helpers

def parse_t_grid(text):
    """Parse 'start:stop:count[:linear|log]' into an ascending grid."""
    parts = str(text).split(":")
    if len(parts) not in (3, 4):
        raise ConfigError("t", "expected start:stop:count[:linear|log]")
    try:
        start = float(parts[0])
        stop = float(parts[1])
        count = int(parts[2])
    except ValueError:
        raise ConfigError("t", f"could not parse numbers in {text!r}") from None
    spacing = parts[3] if len(parts) == 4 else "linear"
    if spacing not in ("linear", "log"):
        raise ConfigError("t", f"spacing must be linear or log, got {spacing!r}")
    if count < 1:
        raise ConfigError("t", "count must be >= 1")
    if not start > 0:
        raise ConfigError("t", "start must be positive")
    if count == 1:
        return np.array([start])
    if not stop > start:
        raise ConfigError("t", "stop must exceed start")
    if spacing == "log":
        return np.geomspace(start, stop, count)
    return np.linspace(start, stop, count)


def _parse_coords(text, fieldname):
    try:
        return np.array([float(p) for p in str(text).split(",")])
    except ValueError:
        raise ConfigError(fieldname,
                          f"expected comma-separated floats, got {text!r}") from None


def resolve_point(text, body: ConvexBody, fieldname):
    """Resolve a single-point flag: 'center' or explicit coordinates."""
    if text is None:
        raise ConfigError(fieldname, "required for this command")
    if text == "center":
        return body.center()
    if text == "antipodal":
        raise ConfigError(fieldname,
                          "antipodal names a pair; give coordinates here")
    p = _parse_coords(text, fieldname)
    if p.size != body.dimension:
        raise ConfigError(fieldname,
                          f"expected {body.dimension} coordinates, got {p.size}")
    if not body.contains(p):
        raise ConfigError(fieldname, "point lies outside the domain")
    return p


def resolve_pair(x_text, y_text, body: ConvexBody):
    """Resolve --x/--y for pair experiments.

    'antipodal' on either flag selects the diameter-realizing pair;
    'center' resolves against the domain; otherwise coordinates.
    """
    if x_text == "antipodal" or y_text == "antipodal":
        p, q = antipodal_points(body)
        x = p if x_text in (None, "antipodal") else resolve_point(x_text, body, "x")
        y = q if y_text in (None, "antipodal") else resolve_point(y_text, body, "y")
    else:
        x = resolve_point(x_text, body, "x")
        y = resolve_point(y_text, body, "y")
    if np.array_equal(x, y):
        raise ConfigError("y", "x and y must be distinct")
    return x, y


def parse_drift(text):
    if text is None or text == "none":
        return None
    if text.startswith("ou:"):
        try:
            theta = float(text[3:])
        except ValueError:
            raise ConfigError("drift", f"bad theta in {text!r}") from None
        if not theta >= 0:
            raise ConfigError("drift", "theta must be nonnegative")
        return ou_drift(theta)
    raise ConfigError("drift", f"unknown drift spec {text!r}; use none or ou:THETA")


def resolve_threads(value):
    """--threads flag, falling back to CONVEX_MIXING_THREADS."""
    if value is None:
        env = os.environ.get("CONVEX_MIXING_THREADS")
        if env is None or env == "":
            return None
        try:
            value = int(env)
        except ValueError:
            raise ConfigError(
                "threads",
                f"CONVEX_MIXING_THREADS={env!r} is not an integer") from None
    if value < 1:
        raise ConfigError("threads", "must be >= 1")
    return value


def _check_seed(seed):
    if seed is None:
        raise ConfigError("seed", "required for stochastic commands")
    if not 0 <= seed < 1 << 64:
        raise ConfigError("seed", "must fit in 64 bits")
    return int(seed)


def _positive(value, fieldname):
    if value is None or not value > 0:
        raise ConfigError(fieldname, "must be positive")
    return value


def _body_from(cfg):
    if cfg.domain_spec is None:
        raise ConfigError("domain", "required for this command")
    try:
        return parse_domain_spec(cfg.domain_spec)
    except (ValueError, OSError) as exc:
        raise ConfigError("domain", str(exc)) from None


def _fmt_value(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, np.ndarray):
        return ",".join(repr(float(c)) for c in v)
    return str(v)


def _echo_lines(command, pairs):
    """Deterministic '# key=value' preamble: schema, command, sorted keys."""
    lines = [f"schema_version={SCHEMA_VERSION}", f"command={command}"]
    for key in sorted(pairs):
        if pairs[key] is not None:
            lines.append(f"{key}={_fmt_value(pairs[key])}")
    return lines


def _json_params(command, pairs):
    out = {"command": command}
    for key, v in pairs.items():
        if v is None:
            continue
        if isinstance(v, np.ndarray):
            out[key] = [float(c) for c in v]
        elif isinstance(v, float):
            out[key] = float(v)
        elif isinstance(v, (int, np.integer)):
            out[key] = int(v)
        else:
            out[key] = str(v)
    return out


def _write_text(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


# ---------------------------------------------------------------------------
# Run configuration

@dataclass(frozen=True)
class RunConfig:
    """A validated command invocation.

    Command-specific flags that are not part of the shared surface
    (bound kinds, drift spec, target sets, ...) ride in `extra`.
    """

    command: str
    domain_spec: str | None = None
    t_grid: np.ndarray | None = None
    t_spec: str | None = None
    seed: int | None = None
    replicates: int | None = None
    h: float | None = None
    epsilon_couple: float | None = None
    t_max: float | None = None
    alpha: float = 0.01
    tolerance: float = DEFAULT_TOL
    threads: int | None = None
    output: str | None = None
    fmt: str = "csv"
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.command not in _COMMANDS:
            raise ConfigError("command", f"unknown command {self.command!r}")
        if self.replicates is not None and self.replicates < 1:
            raise ConfigError("replicates", "must be >= 1")
        if self.h is not None and not self.h > 0:
            raise ConfigError("h", "must be positive")
        if self.epsilon_couple is not None and not self.epsilon_couple > 0:
            raise ConfigError("epsilon-couple", "must be positive")
        if self.t_max is not None and not self.t_max > 0:
            raise ConfigError("t-max", "must be positive")
        if not 0.0 < self.alpha < 0.5:
            raise ConfigError("alpha", "must lie in (0, 0.5)")
        if not self.tolerance > 0:
            raise ConfigError("tol", "must be positive")
        if self.seed is not None and not 0 <= self.seed < 1 << 64:
            raise ConfigError("seed", "must fit in 64 bits")
        if self.fmt not in ("csv", "json"):
            raise ConfigError("format", f"unknown format {self.fmt!r}")


def _default_h(d):
    return 1e-4 * d * d


def _default_grid(d):
    return np.linspace(0.1 * d * d, 1.5 * d * d, 12)


# ---------------------------------------------------------------------------
# Commands

def _cmd_bounds(cfg: RunConfig):
    kinds_text = cfg.extra.get("kinds")
    if not kinds_text:
        raise ConfigError("kinds", "required; comma-separated bound kinds")
    kinds = [k.strip() for k in str(kinds_text).split(",") if k.strip()]
    for k in kinds:
        if k not in BOUND_KINDS:
            raise ConfigError(
                "kinds", f"unknown kind {k!r}; choose from {', '.join(BOUND_KINDS)}")

    body = None
    if cfg.domain_spec is not None:
        body = _body_from(cfg)
        d = body.diameter
    elif cfg.extra.get("d") is not None:
        d = _positive(cfg.extra["d"], "d")
    else:
        raise ConfigError("d", "give --d or --domain")

    t_grid = cfg.t_grid if cfg.t_grid is not None else _default_grid(d)
    dist_xy = cfg.extra.get("dist_xy")
    c = cfg.extra.get("c", 1.0)
    rng = None
    x = None
    n_samples = None
    if "F_pair" in kinds and dist_xy is None:
        raise ConfigError("dist-xy", "required for F_pair")
    if "F_stationary_avg" in kinds:
        if body is None:
            raise ConfigError("domain", "F_stationary_avg needs --domain")
        rng = np.random.default_rng(_check_seed(cfg.seed))
        x = resolve_point(cfg.extra.get("x") or "center", body, "x")
        n_samples = cfg.extra.get("samples", 2000)

    curves = [evaluate_bound_curve(
        k, d, t_grid, dist_xy=dist_xy, c=c, body=body, x=x,
        n_samples=n_samples, rng=rng, tol=cfg.tolerance) for k in kinds]
    echo = _echo_lines("bounds", {
        "d": float(d), "t": cfg.t_spec, "kinds": ",".join(kinds),
        "dist_xy": dist_xy, "c": c if "bebendorf_rate" in kinds else None,
        "seed": cfg.seed, "samples": n_samples, "tol": cfg.tolerance,
        "domain": cfg.domain_spec, "x": x})
    out = cfg.output or "bounds.csv"
    write_bound_curves_csv(curves, out, preamble=echo)
    print(f"wrote {len(kinds)} bound curve(s) on {t_grid.size} times -> {out}")
    return 0


def _resolve_pair_run(cfg):
    body = _body_from(cfg)
    d = body.diameter
    x, y = resolve_pair(cfg.extra.get("x"), cfg.extra.get("y"), body)
    h = cfg.h if cfg.h is not None else _default_h(d)
    seed = _check_seed(cfg.seed)
    threads = resolve_threads(cfg.threads)
    return body, d, x, y, h, seed, threads


def _cmd_simulate(cfg: RunConfig):
    body, d, x, y, h, seed, threads = _resolve_pair_run(cfg)
    n = cfg.replicates or 1000
    t_max = cfg.t_max if cfg.t_max is not None else 8.0 * d * d
    drift = parse_drift(cfg.extra.get("drift"))
    if drift is not None:
        drift.audit_envelope(body)
    outcomes = run_coupling_replicates(
        body, x, y, n, h=h, epsilon_couple=cfg.epsilon_couple, t_max=t_max,
        rng=seed, drift=drift, threads=threads)
    eps = outcomes[0].epsilon_couple
    echo = _echo_lines("simulate", {
        "domain": cfg.domain_spec, "x": x, "y": y, "replicates": n,
        "h": float(h), "epsilon_couple": float(eps), "t_max": float(t_max),
        "seed": seed, "drift": drift.label if drift is not None else None})
    out = cfg.output or "outcomes.csv"
    write_outcomes_csv(outcomes, out, preamble=echo)
    trace_path = cfg.extra.get("trace")
    if trace_path:
        simulate_coupling_time(body, x, y, drift, h=h,
                               epsilon_couple=cfg.epsilon_couple, t_max=t_max,
                               rng=seed, replicate=0, trace_path=trace_path)
    n_coupled = sum(not o.censored for o in outcomes)
    print(f"{n_coupled}/{n} replicates coupled by t={t_max:g} -> {out}")
    return 0


def _cmd_verify(cfg: RunConfig):
    body, d, x, y, h, seed, threads = _resolve_pair_run(cfg)
    n = cfg.replicates or 10_000
    t_grid = cfg.t_grid if cfg.t_grid is not None else _default_grid(d)
    pv = run_pair_verification(
        body, x, y, n_replicates=n, h=h, t_grid=t_grid, t_max=cfg.t_max,
        alpha=cfg.alpha, rng=seed, epsilon_couple=cfg.epsilon_couple,
        threads=threads, experiment_id="pair")
    params = _json_params("verify", {
        "domain": cfg.domain_spec, "x": x, "y": y, "replicates": n,
        "h": float(h), "epsilon_couple": float(pv.epsilon_couple),
        "t_max": cfg.t_max, "alpha": cfg.alpha, "t": cfg.t_spec})
    out = cfg.output or "report.json"
    _write_text(out, verification_report_json(pv.report, params=params,
                                              seed=seed))
    rep = pv.report
    print(f"verdict={rep.verdict} sensitivity={rep.sensitivity_verdict} "
          f"min_margin={rep.margin.min():.6f} -> {out}")
    return 0 if (rep.verdict, rep.sensitivity_verdict) == ("PASS", "PASS") else 1


def _cmd_drift(cfg: RunConfig):
    body, d, x, y, h, seed, threads = _resolve_pair_run(cfg)
    drift = parse_drift(cfg.extra.get("drift"))
    if drift is None:
        raise ConfigError("drift", "required; use ou:THETA")
    try:
        drift.audit_envelope(body)
    except DriftEnvelopeError as exc:
        raise ConfigError("drift", str(exc)) from None
    n = cfg.replicates or 10_000
    t_grid = cfg.t_grid if cfg.t_grid is not None else _default_grid(d)
    report, outcomes, _ = run_z_domination(
        body, x, y, drift, n_replicates=n, h=h, t_grid=t_grid,
        t_max=cfg.t_max, alpha=cfg.alpha, rng=seed,
        epsilon_couple=cfg.epsilon_couple, threads=threads)
    params = _json_params("drift", {
        "domain": cfg.domain_spec, "x": x, "y": y, "drift": drift.label,
        "replicates": n, "h": float(h),
        "epsilon_couple": float(report.epsilon_couple), "t_max": cfg.t_max,
        "alpha": cfg.alpha, "t": cfg.t_spec})
    out = cfg.output or "drift_report.json"
    _write_text(out, z_domination_json(report, params=params, seed=seed))
    print(f"verdict={report.verdict} sensitivity={report.sensitivity_verdict} "
          f"min_margin={report.margin.min():.6f} -> {out}")
    return 0


def _cmd_oracle1d(cfg: RunConfig):
    tightness = cfg.extra.get("tightness", False)
    exit_mc = cfg.extra.get("exit_mc", False)
    if tightness == exit_mc:
        raise ConfigError("tightness", "pick exactly one of --tightness/--exit-mc")
    d = _positive(cfg.extra.get("d"), "d")
    t_grid = cfg.t_grid if cfg.t_grid is not None else np.geomspace(
        0.25 * d * d, 2.0 * d * d, 4)

    if tightness:
        heat = Heat1D(d, tol=cfg.tolerance)
        x = cfg.extra.get("x", 0.0)
        if not 0.0 <= x <= d:
            raise ConfigError("x", "must lie in [0, d]")
        echo = _echo_lines("oracle1d", {
            "mode": "tightness", "d": float(d), "x": float(x),
            "t": cfg.t_spec, "tol": cfg.tolerance})
        out = cfg.output or "tightness.csv"
        write_tightness_csv(heat, t_grid, out, x=x, preamble=echo)
        print(f"tightness sweep on {t_grid.size} times -> {out}")
        return 0

    seed = _check_seed(cfg.seed)
    k = cfg.extra.get("k", 0.0)
    if not abs(k) < d:
        raise ConfigError("k", "must satisfy |k| < d")
    n = cfg.replicates or 20_000
    h = cfg.h if cfg.h is not None else _default_h(d)
    curve = exit_time_survival_mc(d, k, t_grid, n, h, seed, alpha=cfg.alpha)
    exact = np.array([survival_F(d, float(t), k, tol=cfg.tolerance).value
                      for t in t_grid])
    echo = _echo_lines("oracle1d", {
        "mode": "exit_mc", "d": float(d), "k": float(k), "t": cfg.t_spec,
        "replicates": n, "h": float(h), "alpha": cfg.alpha, "seed": seed,
        "tol": cfg.tolerance})
    lines = ["# " + e for e in echo]
    lines.append("t,empirical,exact,band,pass")
    for i, t in enumerate(t_grid):
        ok = abs(curve.survival[i] - exact[i]) <= curve.band_halfwidth
        lines.append(",".join([repr(float(t)), repr(float(curve.survival[i])),
                               repr(float(exact[i])),
                               repr(float(curve.band_halfwidth)),
                               str(int(ok))]))
    out = cfg.output or "oracle_mc.csv"
    _write_text(out, "\n".join(lines) + "\n")
    worst = np.abs(curve.survival - exact).max()
    print(f"exit-time MC vs series: max gap {worst:.5f} "
          f"(band {curve.band_halfwidth:.5f}) -> {out}")
    return 0


def _cmd_hitprob(cfg: RunConfig):
    body = _body_from(cfg)
    d = body.diameter
    try:
        set_a = parse_domain_spec(cfg.extra["set_a"])
        set_b = parse_domain_spec(cfg.extra["set_b"])
    except KeyError as exc:
        raise ConfigError(f"set-{str(exc.args[0])[-1]}", "required") from None
    except (ValueError, OSError) as exc:
        raise ConfigError("set-a/set-b", str(exc)) from None
    x = resolve_point(cfg.extra.get("x"), body, "x")
    t_free = cfg.extra.get("t_free")
    t_free = _positive(t_free if t_free is not None else 0.5 * d * d, "t-free")
    n = cfg.replicates or 20_000
    h = cfg.h if cfg.h is not None else _default_h(d)
    seed = _check_seed(cfg.seed)
    report = hitprob_experiment(
        body, set_a, set_b, x, t_free, n, h, seed,
        t_cap=cfg.extra.get("t_cap"),
        n_bound_samples=cfg.extra.get("bound_samples", 2000))
    params = _json_params("hitprob", {
        "domain": cfg.domain_spec, "set_a": cfg.extra["set_a"],
        "set_b": cfg.extra["set_b"], "x": x, "t_free": float(t_free),
        "replicates": n, "h": float(h), "t_cap": cfg.extra.get("t_cap")})
    out = cfg.output or "hitprob.json"
    _write_text(out, hitprob_report_json(report, params=params, seed=seed))
    print(f"u(x)={report.u_estimate:.4f}+-{report.u_stderr:.4f} "
          f"stationary={report.stationary_average_estimate:.4f} "
          f"tv_bound_avg={report.bound_at_t_free_avg:.5f} -> {out}")
    return 0


_COMMANDS = {
    "bounds": _cmd_bounds,
    "simulate": _cmd_simulate,
    "verify": _cmd_verify,
    "drift": _cmd_drift,
    "oracle1d": _cmd_oracle1d,
    "hitprob": _cmd_hitprob,
}


def run(config: RunConfig):
    """Execute a validated config; returns the process exit status."""
    return _COMMANDS[config.command](config)


# ---------------------------------------------------------------------------
# Argument parsing

def _build_parser():
    p = argparse.ArgumentParser(
        prog="convex-mixing",
        description="Ergodicity bounds for reflected Brownian motion in "
                    "convex bodies: exact evaluators, coupling simulations, "
                    "and verification reports.")
    sub = p.add_subparsers(dest="command", required=True)

    def shared(sp, seed_required=False):
        sp.add_argument("--t", help="time grid start:stop:count[:linear|log]")
        sp.add_argument("--seed", type=int, required=seed_required,
                        help="master seed (required for stochastic commands)")
        sp.add_argument("--out", help="artifact path")
        sp.add_argument("--tol", type=float, default=DEFAULT_TOL,
                        help="series truncation tolerance")

    def pair_flags(sp):
        sp.add_argument("--domain", required=True,
                        help="domain spec: JSON file path or inline JSON")
        sp.add_argument("--x", help="start point: coords, center, antipodal")
        sp.add_argument("--y", help="second start point")
        sp.add_argument("--replicates", type=int)
        sp.add_argument("--h", type=float, help="Euler step size")
        sp.add_argument("--epsilon-couple", type=float,
                        help="coupling threshold (default 0.5*sqrt(h))")
        sp.add_argument("--t-max", type=float, help="censoring horizon")
        sp.add_argument("--alpha", type=float, default=0.01,
                        help="confidence band level")
        sp.add_argument("--threads", type=int,
                        help="worker cap (env CONVEX_MIXING_THREADS)")

    sp = sub.add_parser("bounds", help="evaluate closed-form bound curves")
    sp.add_argument("--d", type=float, help="domain diameter")
    sp.add_argument("--domain", help="domain spec (alternative to --d)")
    sp.add_argument("--kinds", required=True,
                    help="comma-separated: " + ",".join(BOUND_KINDS))
    sp.add_argument("--dist-xy", type=float, help="start separation for F_pair")
    sp.add_argument("--c", type=float, default=1.0,
                    help="prefactor for bebendorf_rate envelope")
    sp.add_argument("--x", help="reference point for F_stationary_avg")
    sp.add_argument("--samples", type=int, default=2000,
                    help="MC samples for F_stationary_avg")
    shared(sp)

    sp = sub.add_parser("simulate", help="run mirror-coupling replicates")
    pair_flags(sp)
    sp.add_argument("--drift", help="drift spec: none or ou:THETA")
    sp.add_argument("--trace", help="write a step trace of replicate 0 here")
    shared(sp, seed_required=True)

    sp = sub.add_parser("verify",
                        help="coupling run + bound check + sensitivity re-run")
    pair_flags(sp)
    shared(sp, seed_required=True)

    sp = sub.add_parser("drift",
                        help="check drift coupling against its comparison process")
    pair_flags(sp)
    sp.add_argument("--drift", required=True, help="drift spec ou:THETA")
    shared(sp, seed_required=True)

    sp = sub.add_parser("oracle1d", help="interval exact solutions and checks")
    sp.add_argument("--tightness", action="store_true",
                    help="factor-of-2 sandwich sweep (exact quadrature)")
    sp.add_argument("--exit-mc", action="store_true",
                    help="bridge-corrected exit-time MC vs the series")
    sp.add_argument("--d", type=float, required=True, help="interval length")
    sp.add_argument("--x", type=float, default=0.0,
                    help="tightness start point in [0, d]")
    sp.add_argument("--k", type=float, default=0.0,
                    help="exit-mc start offset in (-d, d)")
    sp.add_argument("--replicates", type=int)
    sp.add_argument("--h", type=float)
    sp.add_argument("--alpha", type=float, default=0.01)
    shared(sp)

    sp = sub.add_parser("hitprob",
                        help="which-set-first probabilities vs the mixing bound")
    sp.add_argument("--domain", required=True)
    sp.add_argument("--set-a", required=True, help="target set A spec")
    sp.add_argument("--set-b", required=True, help="target set B spec")
    sp.add_argument("--x", required=True, help="start point: coords or center")
    sp.add_argument("--t-free", type=float, help="free-running time")
    sp.add_argument("--t-cap", type=float, help="censoring horizon")
    sp.add_argument("--replicates", type=int)
    sp.add_argument("--h", type=float)
    sp.add_argument("--bound-samples", type=int, default=2000)
    shared(sp, seed_required=True)

    return p


_EXTRA_KEYS = {
    "bounds": ("d", "kinds", "dist_xy", "c", "x", "samples"),
    "simulate": ("x", "y", "drift", "trace"),
    "verify": ("x", "y"),
    "drift": ("x", "y", "drift"),
    "oracle1d": ("tightness", "exit_mc", "d", "x", "k"),
    "hitprob": ("x", "set_a", "set_b", "t_free", "t_cap", "bound_samples"),
}


def config_from_args(ns) -> RunConfig:
    extra = {k: getattr(ns, k) for k in _EXTRA_KEYS[ns.command]
             if getattr(ns, k, None) is not None}
    t_spec = getattr(ns, "t", None)
    fmt = "json" if ns.command in ("verify", "drift", "hitprob") else "csv"
    return RunConfig(
        command=ns.command,
        domain_spec=getattr(ns, "domain", None),
        t_grid=parse_t_grid(t_spec) if t_spec is not None else None,
        t_spec=t_spec,
        seed=getattr(ns, "seed", None),
        replicates=getattr(ns, "replicates", None),
        h=getattr(ns, "h", None),
        epsilon_couple=getattr(ns, "epsilon_couple", None),
        t_max=getattr(ns, "t_max", None),
        alpha=getattr(ns, "alpha", 0.01),
        tolerance=getattr(ns, "tol", DEFAULT_TOL),
        threads=getattr(ns, "threads", None),
        output=getattr(ns, "out", None),
        fmt=fmt,
        extra=extra,
    )


def main(argv=None):
    ns = _build_parser().parse_args(argv)
    try:
        return run(config_from_args(ns))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, DriftEnvelopeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
