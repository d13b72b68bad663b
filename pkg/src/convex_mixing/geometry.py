"""Bounded open convex domains and their geometric services.

Four kinds of body are supported: intervals, axis-aligned boxes, balls,
and polytopes given as finite intersections of half-spaces
{x : <a_i, x> <= b_i}.  Every other module consumes bodies only through
the operations here: membership, Euclidean projection, supporting
normals (inward convention), diameter, and uniform sampling.

All point-wise operations accept either a single vector of shape (n,)
or a batch of shape (m, n) and return results of matching shape; the
simulation engines rely on the batched forms.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

# Boundary-activity tolerance is relative to the body scale (diameter).
TOL_BOUNDARY_REL = 1e-8
# Polytope nearest-point iteration: budget and displacement tolerance.
PROJECTION_BUDGET = 10_000
PROJECTION_TOL = 1e-12
# Rejection sampling falls back to hit-and-run below this acceptance.
REJECTION_MIN_ACCEPTANCE = 1e-3


class ProjectionConvergenceError(RuntimeError):
    """Polytope projection failed to converge within the iteration budget."""


@dataclass(frozen=True)
class UniformSample:
    """One uniform draw from a body, tagged with the sampler used."""

    point: np.ndarray
    method: str  # exact | rejection | hit_and_run


def _rows(point, dimension):
    p = np.asarray(point, dtype=float)
    single = p.ndim == 1
    rows = np.atleast_2d(p)
    if rows.ndim != 2 or rows.shape[1] != dimension:
        raise ValueError(
            f"point has dimension {p.shape[-1] if p.ndim else 0}, body has {dimension}"
        )
    return rows, single


class ConvexBody:
    """Base class; concrete kinds fill in the per-row primitives."""

    kind: str
    dimension: int

    # -- public, shape-polymorphic API ------------------------------------

    def contains(self, point):
        """Membership in the closure, exact analytic test per kind."""
        rows, single = _rows(point, self.dimension)
        res = self._contains_rows(rows)
        return bool(res[0]) if single else res

    def project(self, point):
        """Euclidean nearest point of the closure; identity on members."""
        rows, single = _rows(point, self.dimension)
        res = self._project_rows(rows)
        return res[0] if single else res

    def supporting_normal(self, boundary_point, tol_boundary=None):
        """Inward unit normal of a supporting hyperplane at a boundary point.

        At edges and corners the normalized sum of active-face inward
        normals is returned; any normal-cone element would do, the
        symmetric choice is deterministic.

        Raises ValueError if the point is farther than `tol_boundary`
        (default 1e-8 * diameter) from the boundary.
        """
        p = np.asarray(boundary_point, dtype=float)
        if p.shape != (self.dimension,):
            raise ValueError(f"boundary point must have shape ({self.dimension},)")
        if tol_boundary is None:
            tol_boundary = TOL_BOUNDARY_REL * self.diameter
        return self._normal_at(p, tol_boundary)

    def sample_uniform(self, rng) -> UniformSample:
        """One uniform draw from the body; `rng` is a numpy Generator."""
        pts, method = self.sample_uniform_many(1, rng)
        return UniformSample(point=pts[0], method=method)

    def sample_uniform_many(self, n, rng):
        """n uniform draws, shape (n, dimension); returns (points, method)."""
        raise NotImplementedError

    def bounding_box(self):
        """(lo, hi) arrays of the axis-aligned enclosing box."""
        return self._lo.copy(), self._hi.copy()

    @property
    def diameter(self) -> float:
        return self._diameter

    def center(self):
        """A canonical interior point (used by CLI shorthands)."""
        return 0.5 * (self._lo + self._hi)

    # -- per-kind hooks ----------------------------------------------------

    def _contains_rows(self, rows):
        raise NotImplementedError

    def _project_rows(self, rows):
        raise NotImplementedError

    def _normal_at(self, p, tol):
        raise NotImplementedError


class Box(ConvexBody):
    """Axis-aligned box [lo_1, hi_1] x ... x [lo_n, hi_n]."""

    kind = "box"

    def __init__(self, lo, hi):
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if lo.ndim != 1 or lo.shape != hi.shape:
            raise ValueError("lo and hi must be vectors of equal length")
        if not (np.isfinite(lo).all() and np.isfinite(hi).all()):
            raise ValueError("box corners must be finite")
        if not np.all(lo < hi):
            raise ValueError("box must satisfy lo < hi componentwise (nonempty interior)")
        self._lo, self._hi = lo, hi
        self.dimension = lo.size
        self._diameter = float(np.linalg.norm(hi - lo))

    def _contains_rows(self, rows):
        return np.all((rows >= self._lo) & (rows <= self._hi), axis=1)

    def _project_rows(self, rows):
        return np.clip(rows, self._lo, self._hi)

    def _normal_at(self, p, tol):
        at_lo = p - self._lo <= tol
        at_hi = self._hi - p <= tol
        if not (at_lo.any() or at_hi.any()):
            raise ValueError("point is not within tolerance of the boundary")
        n = at_lo.astype(float) - at_hi.astype(float)
        norm = np.linalg.norm(n)
        if norm == 0.0:
            # opposite faces both active only for a degenerate direction
            raise ValueError("active faces cancel; no well-defined normal")
        return n / norm

    def sample_uniform_many(self, n, rng):
        u = rng.random((n, self.dimension))
        return self._lo + u * (self._hi - self._lo), "exact"


class Interval(Box):
    """Interval [lo, hi] on the line; a 1-dimensional box with scalar ends."""

    kind = "interval"

    def __init__(self, lo, hi):
        super().__init__([float(lo)], [float(hi)])
        self.lo = float(lo)
        self.hi = float(hi)


class Ball(ConvexBody):
    """Euclidean ball of given center and radius."""

    kind = "ball"

    def __init__(self, center, radius):
        center = np.atleast_1d(np.asarray(center, dtype=float))
        radius = float(radius)
        if center.ndim != 1 or not np.isfinite(center).all():
            raise ValueError("center must be a finite vector")
        if not (np.isfinite(radius) and radius > 0):
            raise ValueError("radius must be positive")
        self.center_point = center
        self.radius = radius
        self.dimension = center.size
        self._diameter = 2.0 * radius
        self._lo = center - radius
        self._hi = center + radius

    def center(self):
        return self.center_point.copy()

    def _contains_rows(self, rows):
        v = rows - self.center_point
        return np.einsum("ij,ij->i", v, v) <= self.radius**2

    def _shrink_into(self, rows):
        # radial rescale can overshoot by a few ulps; nudge radially inward
        # until membership holds for the returned representation (the
        # center+v roundtrip matters, so test the actual output array).
        # The shrink factor grows so a too-small nudge cannot stall.
        out = np.array(rows, dtype=float)
        eps = 2.0**-52
        for _ in range(32):
            bad = ~self._contains_rows(out)
            if not bad.any():
                return out
            out[bad] = self.center_point + (
                out[bad] - self.center_point) * (1.0 - eps)
            eps *= 2.0
        raise ProjectionConvergenceError(
            "could not nudge projected points into the ball")

    def _project_rows(self, rows):
        v = rows - self.center_point
        dist = np.linalg.norm(v, axis=1)
        out = dist > self.radius
        if not out.any():
            return rows.copy()
        res = rows.copy()
        res[out] = self._shrink_into(
            self.center_point + v[out] * (self.radius / dist[out])[:, None]
        )
        return res

    def _normal_at(self, p, tol):
        v = p - self.center_point
        dist = np.linalg.norm(v)
        if abs(dist - self.radius) > tol:
            raise ValueError("point is not within tolerance of the boundary")
        return -v / dist

    def sample_uniform_many(self, n, rng):
        dirs = rng.standard_normal((n, self.dimension))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        radii = self.radius * rng.random(n) ** (1.0 / self.dimension)
        return self._shrink_into(self.center_point + radii[:, None] * dirs), "exact"


class Polytope(ConvexBody):
    """Intersection of half-spaces {x : <a_i, x> <= b_i}.

    Must be bounded with nonempty interior (checked at construction via
    the Chebyshev-center LP).  The diameter is computed from the vertex
    enumeration when scipy can produce it, otherwise it must be supplied;
    a supplied over-estimate is sound because every bound consuming d is
    monotone in it.
    """

    kind = "polytope"

    def __init__(self, a, b, diameter=None, bounding_box=None,
                 hit_and_run_burn_in=256):
        a = np.asarray(a, dtype=float)
        b = np.atleast_1d(np.asarray(b, dtype=float))
        if a.ndim != 2 or a.shape[0] != b.size:
            raise ValueError("need a of shape (m, n) and b of shape (m,)")
        if not (np.isfinite(a).all() and np.isfinite(b).all()):
            raise ValueError("half-space data must be finite")
        norms = np.linalg.norm(a, axis=1)
        if np.any(norms == 0.0):
            raise ValueError("half-space normal vectors must be nonzero")
        self.a = a
        self.b = b
        self._a_norms = norms
        self._a_sq = norms**2
        self.dimension = a.shape[1]
        self.hit_and_run_burn_in = int(hit_and_run_burn_in)

        self._chebyshev = self._chebyshev_center()
        if bounding_box is not None:
            lo = np.asarray(bounding_box[0], dtype=float)
            hi = np.asarray(bounding_box[1], dtype=float)
            if lo.shape != (self.dimension,) or hi.shape != (self.dimension,):
                raise ValueError("bounding_box lo/hi must match the dimension")
        else:
            lo, hi = self._bounding_box_lp()
        self._lo, self._hi = lo, hi

        vertex_diam = self._vertex_diameter()
        if diameter is not None:
            diameter = float(diameter)
            if diameter <= 0:
                raise ValueError("diameter must be positive")
            diag = float(np.linalg.norm(hi - lo))
            if diameter > diag * (1 + 1e-9):
                raise ValueError("diameter exceeds the bounding-box diagonal")
            if vertex_diam is not None and diameter < vertex_diam * (1 - 1e-9):
                raise ValueError("diameter is below the max vertex distance")
            self._diameter = diameter
        elif vertex_diam is not None:
            self._diameter = vertex_diam
        else:
            raise ValueError(
                "vertex enumeration failed; supply the diameter explicitly"
            )

    # construction helpers

    def _chebyshev_center(self):
        from scipy.optimize import linprog

        # max r  s.t.  <a_i, x> + r |a_i| <= b_i,  r >= 0
        m, n = self.a.shape
        c = np.zeros(n + 1)
        c[-1] = -1.0
        a_ub = np.hstack([self.a, self._a_norms[:, None]])
        res = linprog(c, A_ub=a_ub, b_ub=self.b,
                      bounds=[(None, None)] * n + [(0, None)],
                      method="highs")
        if not res.success:
            raise ValueError("polytope is unbounded or infeasible")
        if res.x[-1] <= 0:
            raise ValueError("polytope has empty interior")
        self._inradius = float(res.x[-1])
        return res.x[:n].copy()

    def _bounding_box_lp(self):
        from scipy.optimize import linprog

        n = self.dimension
        lo = np.empty(n)
        hi = np.empty(n)
        for i in range(n):
            c = np.zeros(n)
            for sign, target in ((1.0, lo), (-1.0, hi)):
                c[i] = sign
                res = linprog(c, A_ub=self.a, b_ub=self.b,
                              bounds=[(None, None)] * n, method="highs")
                if not res.success:
                    raise ValueError("polytope is unbounded; cannot bound coordinates")
                target[i] = sign * res.fun
            c[i] = 0.0
        return lo, hi

    def _vertex_diameter(self):
        try:
            from scipy.spatial import HalfspaceIntersection

            hs = np.hstack([self.a, -self.b[:, None]])
            inter = HalfspaceIntersection(hs, self._chebyshev)
            verts = inter.intersections
            if verts.shape[0] < 2 or not np.isfinite(verts).all():
                return None
            diffs = verts[:, None, :] - verts[None, :, :]
            self.vertices = verts
            return float(np.sqrt((diffs**2).sum(axis=2).max()))
        except Exception:
            self.vertices = None
            return None

    def center(self):
        return self._chebyshev.copy()

    # core services

    def _violations(self, rows):
        return rows @ self.a.T - self.b

    def _contains_rows(self, rows):
        return np.all(self._violations(rows) <= 0.0, axis=1)

    def _project_rows(self, rows):
        g = self._violations(rows)
        need = np.any(g > 0.0, axis=1)
        if not need.any():
            return rows.copy()
        res = rows.copy()
        res[need] = self._dykstra(rows[need])
        return res

    def _dykstra(self, pts):
        """Nearest points of the polytope for each row of pts.

        Cyclic projections with Dykstra's correction terms; per-face
        projection is exact, so the scheme is robust at the face counts
        in scope.  Every operation is rowwise and each row stops against
        its own displacement, so a row's result is bit-identical no
        matter what else shares the batch.  A final sweep nudges any
        round-off stragglers strictly inside so the tolerance-free
        membership test holds.
        """
        m = self.a.shape[0]
        x = pts.copy()
        corr = np.zeros((m,) + pts.shape)
        scale = max(self.diameter, 1.0)
        active = np.arange(pts.shape[0])
        cycles = 0
        while active.size:
            if cycles >= PROJECTION_BUDGET:
                raise ProjectionConvergenceError(
                    f"no convergence within {PROJECTION_BUDGET} cycles "
                    f"({active.size} rows still moving)"
                )
            x_prev = x[active].copy()
            for i in range(m):
                y = x[active] + corr[i, active]
                g = (y @ self.a[i] - self.b[i]) / self._a_sq[i]
                step = np.maximum(g, 0.0)
                moved = y - step[:, None] * self.a[i]
                x[active] = moved
                corr[i, active] = y - moved
            disp = np.abs(x[active] - x_prev).max(axis=1)
            active = active[disp > PROJECTION_TOL * scale]
            cycles += 1
        # round-off cleanup: push barely-violating rows just inside,
        # each along its own worst face
        slack = 1e-13 * np.maximum(1.0, np.abs(self.b)) / self._a_norms
        for _ in range(64):
            g = self._violations(x)
            bad = np.any(g > 0.0, axis=1)
            if not bad.any():
                return x
            rows = np.where(bad)[0]
            faces = np.argmax(g[rows], axis=1)
            push = (g[rows, faces] / self._a_sq[faces]
                    + slack[faces] / self._a_norms[faces])
            x[rows] -= push[:, None] * self.a[faces]
        raise ProjectionConvergenceError("feasibility cleanup did not terminate")

    def _normal_at(self, p, tol):
        g = (p @ self.a.T - self.b) / self._a_norms  # signed distance past each face
        active = np.abs(g) <= tol
        if not active.any():
            raise ValueError("point is not within tolerance of the boundary")
        n = -(self.a[active] / self._a_norms[active, None]).sum(axis=0)
        norm = np.linalg.norm(n)
        if norm == 0.0:
            raise ValueError("active faces cancel; no well-defined normal")
        return n / norm

    def sample_uniform_many(self, n, rng):
        lo, hi = self._lo, self._hi
        out = np.empty((n, self.dimension))
        got = 0
        proposed = 0
        accepted = 0
        while got < n:
            chunk = max(4 * (n - got), 1024)
            cand = lo + rng.random((chunk, self.dimension)) * (hi - lo)
            keep = cand[self._contains_rows(cand)]
            proposed += chunk
            accepted += keep.shape[0]
            take = min(keep.shape[0], n - got)
            out[got:got + take] = keep[:take]
            got += take
            if proposed >= 100_000 and accepted / proposed < REJECTION_MIN_ACCEPTANCE:
                if self.hit_and_run_burn_in <= 0:
                    raise RuntimeError(
                        "rejection acceptance below 1e-3 and hit-and-run disabled"
                    )
                return self._hit_and_run(n, rng), "hit_and_run"
        return out, "rejection"

    def _hit_and_run(self, n, rng):
        """Hit-and-run chain from the Chebyshev center; approximate sampler."""
        x = self._chebyshev.copy()
        out = np.empty((n, self.dimension))
        total = self.hit_and_run_burn_in + n
        for step in range(total):
            u = rng.standard_normal(self.dimension)
            u /= np.linalg.norm(u)
            au = self.a @ u
            gap = self.b - self.a @ x
            with np.errstate(divide="ignore"):
                tt = np.where(au != 0.0, gap / au, np.inf)
            t_hi = tt[au > 0].min(initial=np.inf)
            t_lo = -(-tt[au < 0]).min(initial=np.inf)
            if not (np.isfinite(t_lo) and np.isfinite(t_hi)):
                raise RuntimeError("unbounded chord in hit-and-run (body unbounded?)")
            x = x + (t_lo + (t_hi - t_lo) * rng.random()) * u
            if step >= self.hit_and_run_burn_in:
                out[step - self.hit_and_run_burn_in] = x
        return out


def antipodal_points(body: ConvexBody):
    """A pair of points of the body realizing (or certifying) its diameter.

    Used by CLI shorthands to start coupling runs at maximal separation.
    """
    if isinstance(body, Ball):
        e = np.zeros(body.dimension)
        e[0] = body.radius
        return body.center_point - e, body.center_point + e
    if isinstance(body, Box):  # covers Interval
        return body._lo.copy(), body._hi.copy()
    if isinstance(body, Polytope):
        if getattr(body, "vertices", None) is None:
            raise ValueError("polytope has no vertex enumeration; pass explicit starts")
        verts = body.vertices
        diffs = verts[:, None, :] - verts[None, :, :]
        d2 = (diffs**2).sum(axis=2)
        i, j = np.unravel_index(int(np.argmax(d2)), d2.shape)
        # vertex enumeration carries roundoff that can land an ulp outside;
        # project so the pair is usable as simulation starts
        return body.project(verts[i]), body.project(verts[j])
    raise TypeError(f"unsupported body type {type(body).__name__}")


# ---------------------------------------------------------------------------
# Domain-spec documents

def _need(obj, field, path):
    if field not in obj:
        raise ValueError(f"{path}{field}: missing required field")
    return obj[field]


def _as_number(value, path):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError(f"{path}: expected a number, got {type(value).__name__}")
    return float(value)


def _as_vector(value, path):
    if not isinstance(value, (list, tuple)):
        raise ValueError(f"{path}: expected an array of numbers")
    return np.array([_as_number(v, f"{path}[{i}]") for i, v in enumerate(value)])


def parse_domain_spec(spec) -> ConvexBody:
    """Build a ConvexBody from a domain-spec document.

    Accepts a dict, a JSON string, or a path to a JSON file.  Errors name
    the offending field path, e.g. "halfspaces[2].a: expected an array".
    """
    if isinstance(spec, (str, bytes)):
        text = str(spec)
        if text.lstrip().startswith("{"):
            obj = json.loads(text)
        else:
            with open(text, encoding="utf-8") as fh:
                obj = json.load(fh)
    else:
        obj = spec
    if not isinstance(obj, dict):
        raise ValueError(": domain spec must be a JSON object")

    kind = _need(obj, "kind", "")
    if kind == "interval":
        lo = _as_number(_need(obj, "lo", ""), "lo")
        hi = _as_number(_need(obj, "hi", ""), "hi")
        return Interval(lo, hi)
    if kind == "box":
        lo = _as_vector(_need(obj, "lo", ""), "lo")
        hi = _as_vector(_need(obj, "hi", ""), "hi")
        if lo.size != hi.size:
            raise ValueError("hi: length differs from lo")
        return Box(lo, hi)
    if kind == "ball":
        center = _as_vector(_need(obj, "center", ""), "center")
        radius = _as_number(_need(obj, "radius", ""), "radius")
        return Ball(center, radius)
    if kind == "polytope":
        hs = _need(obj, "halfspaces", "")
        if not isinstance(hs, list) or not hs:
            raise ValueError("halfspaces: expected a nonempty array")
        a_rows, b_vals = [], []
        for i, item in enumerate(hs):
            if not isinstance(item, dict):
                raise ValueError(f"halfspaces[{i}]: expected an object with a, b")
            a_rows.append(_as_vector(_need(item, "a", f"halfspaces[{i}]."),
                                     f"halfspaces[{i}].a"))
            b_vals.append(_as_number(_need(item, "b", f"halfspaces[{i}]."),
                                     f"halfspaces[{i}].b"))
        if len({v.size for v in a_rows}) != 1:
            raise ValueError("halfspaces: inconsistent vector lengths in a")
        diameter = obj.get("diameter")
        if diameter is not None:
            diameter = _as_number(diameter, "diameter")
        bbox = None
        if "bounding_box" in obj:
            bb = obj["bounding_box"]
            if not isinstance(bb, dict):
                raise ValueError("bounding_box: expected an object with lo, hi")
            bbox = (_as_vector(_need(bb, "lo", "bounding_box."), "bounding_box.lo"),
                    _as_vector(_need(bb, "hi", "bounding_box."), "bounding_box.hi"))
        return Polytope(np.vstack(a_rows), np.array(b_vals),
                        diameter=diameter, bounding_box=bbox)
    raise ValueError(f"kind: unknown body kind {kind!r}")
