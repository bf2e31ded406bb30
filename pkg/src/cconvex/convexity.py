"""c-affine functions, c-transforms, envelopes, subdifferentials and sections.

The transform pair is computed on lattices.  By default the sup/inf runs
over the opposite lattice only, which makes the double transform an exact
discrete conjugacy: the envelope of a transform output reproduces it to
machine precision, so the nodewise envelope gap is a clean c-convexity
certificate.  An optional coordinate golden-section refinement pass in the
continuous variable removes the downward bias of the lattice sup where value
accuracy against continuum quantities matters; it is kept out of the
certification path because its O(h^2) wobble swamps the certificate
tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .costs import CostModel, estimate_constants
from .errors import AllMinusInfinity
from .gridfn import GridFunction, default_shape

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class CAffine:
    """x -> -c(x, y) + h."""
    y: np.ndarray
    h: float


def c_affine_eval(model: CostModel, f: CAffine, x):
    x = np.asarray(x, dtype=float)
    y = np.broadcast_to(np.asarray(f.y, dtype=float), x.shape)
    return -model.cost(x, y) + f.h


def lip_estimate(model: CostModel) -> float:
    """Cached low-budget Lipschitz estimate used for default tolerances."""
    if model._lip_cache is None:
        model._lip_cache = estimate_constants(model, sample_budget=200, seed=20_000).lip_c
    return model._lip_cache


def pairwise_cost(model: CostModel, A: np.ndarray, B: np.ndarray,
                  chunk: int = 512) -> np.ndarray:
    """Cost matrix c(A[i], B[j]) computed in row chunks."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    out = np.empty((len(A), len(B)))
    for s in range(0, len(A), chunk):
        blockA = A[s:s + chunk]
        xx = np.repeat(blockA, len(B), axis=0)
        yy = np.tile(B, (len(blockA), 1))
        out[s:s + chunk] = model.cost(xx, yy).reshape(len(blockA), len(B))
    return out


def _golden_section(fn, lo, hi, maximize, iters=40):
    a, b = lo, hi
    c1 = b - GOLDEN * (b - a)
    c2 = a + GOLDEN * (b - a)
    f1, f2 = fn(c1), fn(c2)
    better = (lambda u, v: u >= v) if maximize else (lambda u, v: u <= v)
    for _ in range(iters):
        if better(f1, f2):
            b, c2, f2 = c2, c1, f1
            c1 = b - GOLDEN * (b - a)
            f1 = fn(c1)
        else:
            a, c1, f1 = c1, c2, f2
            c2 = a + GOLDEN * (b - a)
            f2 = fn(c2)
    return (c1, f1) if better(f1, f2) else (c2, f2)


def _refine_around_node(objective, grid: GridFunction, flat_idx: int, maximize: bool):
    """One coordinate golden-section pass within +-1 cell of a lattice node."""
    idx = np.array(grid.node_index(flat_idx))
    pt = grid.node_point(idx).copy()
    best = objective(pt)
    h = grid.spacing
    for axis in range(grid.dimension):
        lo = max(grid.lo[axis], pt[axis] - h[axis])
        hi = min(grid.hi[axis], pt[axis] + h[axis])

        def along(v, axis=axis):
            q = pt.copy()
            q[axis] = v
            return objective(q)

        v, fv = _golden_section(along, lo, hi, maximize)
        if (fv > best) if maximize else (fv < best):
            pt[axis] = v
            best = fv
    return pt, best


def _batch_golden(objective, lo, hi, maximize, iters=22):
    """Row-parallel golden-section search; objective maps (N,) -> (N,)."""
    a, b = lo.copy(), hi.copy()
    c1 = b - GOLDEN * (b - a)
    c2 = a + GOLDEN * (b - a)
    f1, f2 = objective(c1), objective(c2)
    for _ in range(iters):
        take1 = (f1 >= f2) if maximize else (f1 <= f2)
        # keep [a, c2] when the left probe wins, [c1, b] otherwise; the
        # surviving probe is reused, one fresh evaluation per row
        a = np.where(take1, a, c1)
        b = np.where(take1, c2, b)
        width = b - a
        c1_new = np.where(take1, b - GOLDEN * width, c2)
        c2_new = np.where(take1, c1, a + GOLDEN * width)
        f1_old, f2_old = f1, f2
        fresh = objective(np.where(take1, c1_new, c2_new))
        f1 = np.where(take1, fresh, f2_old)
        f2 = np.where(take1, f1_old, fresh)
        c1, c2 = c1_new, c2_new
    take1 = (f1 >= f2) if maximize else (f1 <= f2)
    return np.where(take1, c1, c2), np.where(take1, f1, f2)


def _refine_batch(model, source, out_nodes, best_idx, best_val, maximize):
    """One coordinate golden-section pass in the continuous source variable,
    vectorised across all output nodes."""
    src_pts = source.nodes()[best_idx].copy()
    h = source.spacing
    n = source.dimension

    def objective(pts):
        vals = source(pts)
        if maximize:
            return -model.cost(out_nodes, pts) + vals
        return model.cost(pts, out_nodes) + vals

    cur_val = best_val.copy()
    for axis in range(n):
        lo = np.maximum(source.lo[axis], src_pts[:, axis] - h[axis])
        hi = np.minimum(source.hi[axis], src_pts[:, axis] + h[axis])

        def along(v):
            q = src_pts.copy()
            q[:, axis] = v
            return objective(q)

        v, fv = _batch_golden(along, lo, hi, maximize)
        improve = (fv > cur_val) if maximize else (fv < cur_val)
        improve &= np.isfinite(fv)
        src_pts[improve, axis] = v[improve]
        cur_val[improve] = fv[improve]
    return cur_val


def _transform(model, source: GridFunction, out_domain: str, out_box, out_shape,
               direction: str, refine: bool) -> GridFunction:
    """direction 'sup': phi(x) = sup_y -c(x,y) + psi(y)  (source on Y)
    direction 'inf': psi(y) = inf_x  c(x,y) + phi(x)      (source on X)."""
    if np.all(source.minus_inf):
        raise AllMinusInfinity("potential is -inf everywhere")
    target = GridFunction(out_domain, out_box.lo, out_box.hi, np.zeros(out_shape))
    out_nodes = target.nodes()
    src_nodes = source.nodes()
    src_vals = source.flat_values()
    mask = source.minus_inf.ravel()
    maximize = direction == "sup"

    best_idx = np.zeros(len(out_nodes), dtype=int)
    best_val = np.zeros(len(out_nodes))
    chunk = max(1, int(2**22 // max(1, len(src_nodes))))
    for s in range(0, len(out_nodes), chunk):
        blk = out_nodes[s:s + chunk]
        if direction == "sup":
            scores = -pairwise_cost(model, blk, src_nodes) + src_vals[None, :]
        else:
            scores = pairwise_cost(model, src_nodes, blk).T + src_vals[None, :]
        if np.any(mask):
            scores[:, mask] = -np.inf if maximize else np.inf
        idx = np.argmax(scores, axis=1) if maximize else np.argmin(scores, axis=1)
        best_idx[s:s + chunk] = idx
        best_val[s:s + chunk] = scores[np.arange(len(blk)), idx]

    if refine:
        if np.any(mask):
            # refinement interpolates the source; only rows whose best-node
            # neighbourhood is fully supported can move (for the others the
            # lattice value already is the sup over the supported set)
            rows = []
            for k in range(len(out_nodes)):
                nb = np.array(source.node_index(best_idx[k]))
                lo = np.maximum(nb - 1, 0)
                hi = np.minimum(nb + 1, np.array(source.shape) - 1)
                sl = tuple(slice(a, b + 1) for a, b in zip(lo, hi))
                if not np.any(source.minus_inf[sl]):
                    rows.append(k)
            rows = np.array(rows, dtype=int)
        else:
            rows = np.arange(len(out_nodes))
        if rows.size:
            best_val[rows] = _refine_batch(model, source, out_nodes[rows],
                                           best_idx[rows], best_val[rows], maximize)

    target.values = best_val.reshape(out_shape)
    return target


def c_transform(model: CostModel, psi: GridFunction, shape=None, refine: bool = False,
                out_box=None) -> GridFunction:
    """phi(x) = sup_y { -c(x, y) + psi(y) } sampled on the X lattice."""
    out_box = model.domain.X if out_box is None else out_box
    shape = default_shape(model.dimension) if shape is None else shape
    return _transform(model, psi, "X", out_box, shape, "sup", refine)


def reverse_transform(model: CostModel, phi: GridFunction, shape=None,
                      refine: bool = False, out_box=None) -> GridFunction:
    """psi(y) = inf_x { c(x, y) + phi(x) } sampled on the Y lattice."""
    out_box = model.domain.Y if out_box is None else out_box
    shape = default_shape(model.dimension) if shape is None else shape
    return _transform(model, phi, "Y", out_box, shape, "inf", refine)


def c_convexity_tolerance(model: CostModel, phi: GridFunction) -> float:
    return 1e-4 * lip_estimate(model) * float(np.max(phi.spacing))


@dataclass
class EnvelopeReport:
    envelope: GridFunction
    max_gap: float
    is_c_convex: bool


def c_envelope(model: CostModel, phi: GridFunction, refine: bool = False,
               tolerance: float = None, y_shape=None) -> EnvelopeReport:
    """Double transform envelope; is_c_convex iff the nodewise gap stays
    below the tolerance calibrated to the lattice resolution."""
    if np.any(phi.minus_inf):
        raise ValueError("envelope requires a finite potential")
    tol = c_convexity_tolerance(model, phi) if tolerance is None else tolerance
    psi = reverse_transform(model, phi, shape=y_shape, refine=refine)
    env = c_transform(model, psi, shape=phi.shape, refine=refine, out_box=phi.box)
    gap = float(np.max(phi.values - env.values))
    return EnvelopeReport(envelope=env, max_gap=gap, is_c_convex=gap <= tol)


def c_subdifferential(model: CostModel, phi: GridFunction, x0, tolerance: float = 1e-6,
                      top_k: int = 6, y_shape=None, refine_passes: int = 3):
    """Supporting y's of phi at x0 with their support residuals.

    A candidate y is valid iff max_x [-c(x,y) + c(x0,y) + phi(x0) - phi(x)]
    stays below the tolerance; the returned list keeps only valid candidates
    (an empty list certifies that no sampled c-affine supports phi at x0).
    """
    x0 = np.asarray(x0, dtype=float)
    y_shape = default_shape(model.dimension) if y_shape is None else y_shape
    ygrid = GridFunction("Y", model.domain.Y.lo, model.domain.Y.hi, np.zeros(y_shape))
    y_nodes = ygrid.nodes()
    x_nodes = phi.nodes()
    phi_vals = phi.flat_values()
    phi_x0 = float(phi(x0))

    # residual(y) = max over X nodes of the support defect at x0
    cx0 = model.cost(np.repeat(x0[None, :], len(y_nodes), axis=0), y_nodes)
    residuals = np.empty(len(y_nodes))
    chunk = max(1, int(2**22 // max(1, len(x_nodes))))
    for s in range(0, len(y_nodes), chunk):
        C = pairwise_cost(model, x_nodes, y_nodes[s:s + chunk])   # (Nx, chunk)
        defect = (-C + cx0[None, s:s + chunk] + phi_x0) - phi_vals[:, None]
        residuals[s:s + chunk] = np.max(defect, axis=0)

    order = np.argsort(residuals)[: max(top_k, 1)]
    out = []
    seen = []
    for flat in order:
        def res_at(ypt):
            cy = model.cost(x_nodes, np.broadcast_to(ypt, x_nodes.shape))
            return float(np.max(-cy + model.cost(x0, ypt) + phi_x0 - phi_vals))

        ypt = y_nodes[flat].copy()
        best = residuals[flat]
        for _ in range(refine_passes):
            idx_arr = np.clip(((ypt - ygrid.lo) / ygrid.spacing).round().astype(int),
                              0, np.array(y_shape) - 1)
            flat_near = int(np.ravel_multi_index(tuple(idx_arr), y_shape))
            ypt, best = _refine_around_node(res_at, ygrid, flat_near, maximize=False)
        if best <= tolerance:
            if not any(np.linalg.norm(ypt - s) < 1e-9 for s in seen):
                seen.append(ypt)
                out.append((ypt, float(best)))
    out.sort(key=lambda t: t[1])
    return out


@dataclass
class SectionSample:
    member_nodes: np.ndarray      # flat indices with phi <= f
    boundary_nodes: np.ndarray    # flat indices where neighbours disagree (or ties)


@dataclass
class SectionReport:
    section: SectionSample
    is_c_convex_wrt: bool
    interior_strictness_violations: int
    midpoint_violation: float


TIE_TOL = 1e-9


def section_analysis(model: CostModel, phi: GridFunction, f: CAffine,
                     y_convexity_probe, eq_tol: float = None, probe_budget: int = 200,
                     seed: int = 0) -> SectionReport:
    """Extract the sublevel section {phi <= f} and test its c-convexity.

    Nodes with |phi - f| below the tie tolerance are classified boundary:
    equality points belong to the section boundary, so ties must never count
    as interior.
    """
    from .geometry import c_exp
    from .errors import NoConvergence, TargetOutsideImage

    f_vals = (-model.cost(phi.nodes(), np.broadcast_to(np.asarray(f.y, dtype=float),
                                                       phi.nodes().shape)) + f.h).reshape(phi.shape)
    diff = phi.values - f_vals
    member = diff <= TIE_TOL
    tie = np.abs(diff) <= TIE_TOL

    disagree = np.zeros(phi.shape, dtype=bool)
    for axis in range(phi.dimension):
        a = np.swapaxes(member, 0, axis)
        d = a[1:] != a[:-1]
        flag = np.zeros_like(a)
        flag[1:] |= d
        flag[:-1] |= d
        disagree |= np.swapaxes(flag, 0, axis)
    boundary = disagree | tie

    scale = max(1.0, float(np.max(np.abs(phi.values))))
    eq_tol = 1e-7 * scale if eq_tol is None else eq_tol
    equality = np.abs(diff) <= eq_tol
    violations = int(np.count_nonzero(equality & member & ~boundary))

    member_flat = np.flatnonzero(member.ravel())
    rng = np.random.default_rng(seed)
    worst = 0.0
    y_probe = np.asarray(y_convexity_probe, dtype=float)
    nodes = phi.nodes()
    mid_tol = max(10 * eq_tol, 1e-6 * scale)
    if len(member_flat) >= 2:
        for _ in range(probe_budget):
            i, j = rng.choice(member_flat, size=2, replace=True)
            xa, xb = nodes[i], nodes[j]
            pa = -model.grad_y(xa, y_probe)
            pb = -model.grad_y(xb, y_probe)
            try:
                xm = c_exp(model, y_probe, "y", 0.5 * (pa + pb),
                           initial_guess=0.5 * (xa + xb))
            except (TargetOutsideImage, NoConvergence):
                worst = max(worst, float("inf"))
                continue
            fm = float(-model.cost(xm, f.y) + f.h)
            worst = max(worst, float(phi(xm)) - fm)
    return SectionReport(
        section=SectionSample(member_nodes=member_flat,
                              boundary_nodes=np.flatnonzero(boundary.ravel())),
        is_c_convex_wrt=worst <= mid_tol,
        interior_strictness_violations=violations,
        midpoint_violation=worst,
    )
