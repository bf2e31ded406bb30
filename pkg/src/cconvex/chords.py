"""c-chords: the cost-geometry analogue of the chord of a convex function.

The chord through two lifted points (x0, u0), (x1, u1) is the supremum of
all c-affine functions lying below both points.  Only c-affine functions
passing through one endpoint matter, which reduces the sup to two
constrained families indexed by y; we scan a Y lattice under the endpoint
constraint and refine the best feasible candidate in the continuous
variable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .convexity import CAffine, _golden_section, lip_estimate, pairwise_cost
from .costs import CostModel
from .errors import TouchingNotFound
from .gridfn import GridFunction, default_shape

FEASIBILITY_TOL = 1e-9      # slack on the endpoint inequality; exact-equality
                            # feasibility sets have measure zero on lattices


@dataclass(frozen=True)
class LiftedPoint:
    x: np.ndarray
    u: float

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "u", float(self.u))


def default_y_lattice(model: CostModel, shape=None) -> GridFunction:
    shape = default_shape(model.dimension) if shape is None else shape
    Y = model.domain.Y
    return GridFunction("Y", Y.lo, Y.hi, np.zeros(shape))


class ChordSolver:
    """Shared lattice state for repeated chord evaluations on one model.

    ``extra_y`` rows extend the lattice scan with known support candidates
    (the sup runs over all of Y, so extra points only tighten the lower
    bound); refinement windows around them use the lattice spacing.
    """

    def __init__(self, model: CostModel, y_shape=None, extra_y=None):
        self.model = model
        self.ygrid = default_y_lattice(model, y_shape)
        nodes = self.ygrid.nodes()
        if extra_y is not None and len(extra_y):
            nodes = np.concatenate([nodes, np.atleast_2d(np.asarray(extra_y, dtype=float))])
        self.y_nodes = nodes

    def _endpoint_rows(self, X0: LiftedPoint, X1: LiftedPoint):
        pts = np.stack([X0.x, X1.x])
        C = pairwise_cost(self.model, pts, self.y_nodes)
        return C[0], C[1]

    def _branch_data(self, X0, X1):
        """Feasible masks and intercepts h_i(y) = u_i + c(x_i, y) per branch."""
        c0, c1 = self._endpoint_rows(X0, X1)
        h = (X0.u + c0, X1.u + c1)
        feas = (-c1 + h[0] <= X1.u + FEASIBILITY_TOL,
                -c0 + h[1] <= X0.u + FEASIBILITY_TOL)
        return h, feas

    def lattice_values(self, X0: LiftedPoint, X1: LiftedPoint, x_pts: np.ndarray,
                       return_argmax: bool = False):
        """Chord values at many probe points via the Y-lattice sup."""
        x_pts = np.atleast_2d(np.asarray(x_pts, dtype=float))
        h, feas = self._branch_data(X0, X1)
        best = np.full(len(x_pts), -np.inf)
        arg_branch = np.zeros(len(x_pts), dtype=int)
        arg_node = np.zeros(len(x_pts), dtype=int)
        chunk = max(1, int(2**22 // max(1, len(self.y_nodes))))
        for s in range(0, len(x_pts), chunk):
            Cx = pairwise_cost(self.model, x_pts[s:s + chunk], self.y_nodes)
            for i in (0, 1):
                if not np.any(feas[i]):
                    continue
                vals = -Cx[:, feas[i]] + h[i][feas[i]][None, :]
                idx = np.argmax(vals, axis=1)
                v = vals[np.arange(len(vals)), idx]
                upd = v > best[s:s + chunk]
                best[s:s + chunk][upd] = v[upd]
                if return_argmax:
                    node_ids = np.flatnonzero(feas[i])[idx]
                    arg_branch[s:s + chunk][upd] = i
                    arg_node[s:s + chunk][upd] = node_ids[upd]
        if return_argmax:
            return best, arg_branch, arg_node
        return best

    def refine_at(self, X0: LiftedPoint, X1: LiftedPoint, x, lattice_hint=None):
        """Constrained continuous refinement of the y-sup at one probe point."""
        x = np.asarray(x, dtype=float)
        if lattice_hint is None:
            val, br, node = self.lattice_values(X0, X1, x[None, :], return_argmax=True)
            val, br, node = float(val[0]), int(br[0]), int(node[0])
        else:
            val, br, node = lattice_hint
        anchor, other = (X0, X1) if br == 0 else (X1, X0)

        def obj(ypt):
            c_anchor = float(self.model.cost(anchor.x, ypt))
            c_other = float(self.model.cost(other.x, ypt))
            hh = anchor.u + c_anchor
            if -c_other + hh > other.u + FEASIBILITY_TOL:
                return -np.inf
            return float(-self.model.cost(x, ypt) + hh)

        ypt = self.y_nodes[node].copy()
        best = val
        h = self.ygrid.spacing
        for axis in range(self.ygrid.dimension):
            lo = max(self.ygrid.lo[axis], ypt[axis] - h[axis])
            hi = min(self.ygrid.hi[axis], ypt[axis] + h[axis])

            def along(v, axis=axis):
                q = ypt.copy()
                q[axis] = v
                return obj(q)

            v, fv = _golden_section(along, lo, hi, maximize=True)
            if fv > best:
                ypt[axis] = v
                best = fv
        return best

    def eval(self, X0: LiftedPoint, X1: LiftedPoint, x, refine: bool = True) -> float:
        val, br, node = self.lattice_values(X0, X1, np.atleast_2d(x), return_argmax=True)
        if not refine:
            return float(val[0])
        return float(self.refine_at(X0, X1, np.asarray(x, dtype=float),
                                    lattice_hint=(float(val[0]), int(br[0]), int(node[0]))))


def chord_eval(model: CostModel, X0: LiftedPoint, X1: LiftedPoint, x,
               y_shape=None, refine: bool = True) -> float:
    return ChordSolver(model, y_shape).eval(X0, X1, x, refine=refine)


@dataclass
class ConnectResult:
    u0p: float
    u1p: float
    touching: CAffine
    residuals: tuple


def connect(model: CostModel, X0: LiftedPoint, X1: LiftedPoint, y_shape=None,
            solver: ChordSolver = None, residual_tol: float = 1e-6) -> ConnectResult:
    """Lower the endpoints onto the chord, then find a c-affine through both.

    The touching pair solves -c(x_i, y) + h = u_i' via the one-parameter
    family h(y) = u0' + c(x0, y) and a root of
    g(y) = -c(x1, y) + h(y) - u1' along lattice edges (first root in scan
    order; the touching c-affine need not be unique).
    """
    solver = ChordSolver(model, y_shape) if solver is None else solver
    u0p = solver.eval(X0, X1, X0.x)
    u1p = solver.eval(X0, X1, X1.x)
    X0p, X1p = LiftedPoint(X0.x, u0p), LiftedPoint(X1.x, u1p)

    y_nodes = solver.y_nodes
    c0 = model.cost(np.repeat(X0.x[None, :], len(y_nodes), axis=0), y_nodes)
    c1 = model.cost(np.repeat(X1.x[None, :], len(y_nodes), axis=0), y_nodes)
    g = (-c1 + (u0p + c0)) - u1p

    def g_at(ypt):
        return float(-model.cost(X1.x, ypt) + u0p + model.cost(X0.x, ypt) - u1p)

    shape = solver.ygrid.shape
    n_lat = int(np.prod(shape))
    scale = max(1.0, float(np.max(np.abs(g))))
    atol = 1e-9 * scale
    ynode = None
    # scan lattice edges axis by axis for a strict sign change, deterministic
    # order; tangential roots (g touching zero from one side, the generic
    # case when the chord had to lower an endpoint) are handled below
    gv = g[:n_lat].reshape(shape)
    for axis in range(len(shape)):
        a = np.swapaxes(gv, 0, axis)
        crossing = ((a[1:] > atol) & (a[:-1] < -atol)) | ((a[1:] < -atol) & (a[:-1] > atol))
        if not np.any(crossing):
            continue
        lo_idx = np.argwhere(crossing)[0]
        hi_idx = lo_idx.copy()
        hi_idx[0] += 1

        def unswap(ix):
            out = list(ix)
            out[0], out[axis] = ix[axis], ix[0]
            return np.array(out)

        grid = solver.ygrid
        ya = grid.node_point(unswap(lo_idx))
        yb = grid.node_point(unswap(hi_idx))
        fa = g_at(ya)
        if fa * g_at(yb) > 0:
            continue
        for _ in range(80):
            ym = 0.5 * (ya + yb)
            fm = g_at(ym)
            if fa * fm <= 0:
                yb = ym
            else:
                ya, fa = ym, fm
        ynode = 0.5 * (ya + yb)
        break

    if ynode is None:
        # tangential root: minimise |g| by coordinate golden-section from the
        # best lattice node (the chord's own sup witness sits there)
        flat = int(np.argmin(np.abs(g)))
        ypt = y_nodes[flat].copy()
        best = abs(g_at(ypt))
        h = solver.ygrid.spacing
        for _ in range(6):
            for axis in range(solver.ygrid.dimension):
                lo = max(solver.ygrid.lo[axis], ypt[axis] - h[axis])
                hi = min(solver.ygrid.hi[axis], ypt[axis] + h[axis])

                def along(v, axis=axis):
                    q = ypt.copy()
                    q[axis] = v
                    return abs(g_at(q))

                v, fv = _golden_section(along, lo, hi, maximize=False)
                if fv < best:
                    ypt[axis] = v
                    best = fv
            if best <= 1e-14 * scale:
                break
        if best > residual_tol:
            raise TouchingNotFound(
                f"touching c-affine residual {best:.3g} exceeds {residual_tol:.3g}")
        ynode = ypt

    h_val = u0p + float(model.cost(X0.x, ynode))
    touching = CAffine(y=ynode, h=h_val)
    r0 = abs(-float(model.cost(X0.x, ynode)) + h_val - u0p)
    r1 = abs(-float(model.cost(X1.x, ynode)) + h_val - u1p)
    if max(r0, r1) > residual_tol:
        raise TouchingNotFound(f"endpoint residuals ({r0:.3g}, {r1:.3g}) exceed {residual_tol:.3g}")
    return ConnectResult(u0p=u0p, u1p=u1p, touching=touching, residuals=(r0, r1))


@dataclass
class AltConvexityReport:
    holds: bool
    worst: tuple          # (x0, x1, x, gap)
    worst_gap: float
    pairs_checked: int
    tolerance: float


def alt_tolerance(model: CostModel, phi: GridFunction) -> float:
    return 1e-3 * lip_estimate(model) * float(np.max(phi.spacing))


def is_alternative_c_convex(model: CostModel, phi: GridFunction, pair_budget: int = 100,
                            seed: int = 0, tolerance: float = None, y_shape=None,
                            refine_top: int = None, extra_pairs=None,
                            extra_y=None) -> AltConvexityReport:
    """Sampled test of phi(x) <= F_{X0 X1}(x) over lifted lattice pairs.

    Lattice chord values under-estimate the true sup, so apparent gaps are
    refined in the continuous variable before they may fail the test; known
    support candidates can be supplied through ``extra_y``.
    """
    if np.any(phi.minus_inf):
        raise ValueError("alternative c-convexity requires a finite function")
    tol = alt_tolerance(model, phi) if tolerance is None else tolerance
    solver = ChordSolver(model, y_shape, extra_y=extra_y)
    nodes = phi.nodes()
    vals = phi.flat_values()
    rng = np.random.default_rng(seed)
    n_nodes = len(nodes)

    pairs = [tuple(rng.choice(n_nodes, size=2, replace=False)) for _ in range(pair_budget)]
    if extra_pairs is not None:
        pairs.extend(tuple(p) for p in extra_pairs)

    worst_gap = -np.inf
    worst = None
    candidates = []
    for (i0, i1) in pairs:
        X0 = LiftedPoint(nodes[i0], vals[i0])
        X1 = LiftedPoint(nodes[i1], vals[i1])
        F = solver.lattice_values(X0, X1, nodes, return_argmax=True)
        Fv, br, nd = F
        gaps = vals - Fv
        k = int(np.argmax(gaps))
        if gaps[k] > worst_gap:
            worst_gap = float(gaps[k])
            worst = (X0, X1, k, (float(Fv[k]), int(br[k]), int(nd[k])))
        if gaps[k] > tol:
            candidates.append((float(gaps[k]), X0, X1, k, (float(Fv[k]), int(br[k]), int(nd[k]))))

    # tighten the apparent offenders with continuous refinement; lattice
    # chord values understate the sup, so unrefined gaps must never decide
    candidates.sort(key=lambda t: -t[0])
    top = len(candidates) if refine_top is None else refine_top
    refined_case = worst
    if candidates:
        refined_worst = -np.inf
        for gap, X0, X1, k, hint in candidates[:top]:
            F_ref = solver.refine_at(X0, X1, nodes[k], lattice_hint=hint)
            g_ref = float(vals[k] - F_ref)
            if g_ref > refined_worst:
                refined_worst = g_ref
                refined_case = (X0, X1, k, hint)
        if len(candidates) > top:
            refined_worst = max(refined_worst, candidates[top][0])
    else:
        X0, X1, k, hint = worst
        refined_worst = float(vals[k] - solver.refine_at(X0, X1, nodes[k], lattice_hint=hint))

    X0, X1, k, _ = refined_case
    report_worst = (X0.x, X1.x, nodes[k], refined_worst)
    return AltConvexityReport(holds=refined_worst <= tol, worst=report_worst,
                              worst_gap=refined_worst, pairs_checked=len(pairs),
                              tolerance=tol)


def segment_identity_check(model: CostModel, X0: LiftedPoint, X1: LiftedPoint,
                           touching: CAffine, t_grid=None, y_shape=None,
                           solver: ChordSolver = None) -> float:
    """Max deviation |F(x_t) - (-c(x_t, y) + h)| along the c-segment w.r.t.
    the touching y; vanishes under quasi-convex costs."""
    from .geometry import c_segment

    t_grid = np.linspace(0.0, 1.0, 33) if t_grid is None else np.asarray(t_grid, dtype=float)
    solver = ChordSolver(model, y_shape) if solver is None else solver
    seg = c_segment(model, touching.y, X0.x, X1.x, t_grid)
    dev = 0.0
    for xt in seg:
        F = solver.eval(X0, X1, xt)
        aff = float(-model.cost(xt, touching.y) + touching.h)
        dev = max(dev, abs(F - aff))
    return dev
