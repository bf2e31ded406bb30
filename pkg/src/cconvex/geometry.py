"""Dual coordinates, c-exponential maps, c-segments and cone utilities.

The maps p = -D_y c(., y) and q = -D_x c(x, .) straighten c-segments: a
c-segment is the image of a straight segment in p- (or q-) space under the
corresponding inverse map, which we invert numerically with a damped Newton
iteration using the mixed Hessian as Jacobian.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .costs import ConstantEstimates, CostModel
from .errors import NoConvergence, NoFeasibleRadius, TargetOutsideImage

MAX_NEWTON_ITERS = 100
NEWTON_TOL = 1e-11


@dataclass
class DualCoords:
    p: np.ndarray  # -D_y c(x, y), straightening coordinate focused at y
    q: np.ndarray  # -D_x c(x, y), straightening coordinate focused at x


def dual_coordinates(model: CostModel, x, y) -> DualCoords:
    return DualCoords(p=-np.asarray(model.grad_y(x, y), dtype=float),
                      q=-np.asarray(model.grad_x(x, y), dtype=float))


def _solve_domain(model, focus_kind):
    # solving for the point in the domain opposite to the focus
    return model.domain.X if focus_kind == "y" else model.domain.Y


def _inflation(model):
    dom = model.domain
    pad = 0.05 * dom.diameter
    if dom.separation > 0:
        pad = min(pad, 0.45 * dom.separation)
    return pad


class _InflatedBox:
    def __init__(self, box, pad):
        self.lo = box.lo - pad
        self.hi = box.hi + pad

    def project(self, pts):
        return np.clip(pts, self.lo, self.hi)


class _InflatedBall:
    def __init__(self, ball, pad):
        self.center = ball.center
        self.radius = ball.radius + pad

    def project(self, pts):
        d = pts - self.center
        r = np.linalg.norm(d, axis=-1, keepdims=True)
        fac = np.minimum(1.0, self.radius / np.maximum(r, 1e-300))
        return self.center + d * fac


def _inflate(dom, pad):
    from .domains import Box
    return _InflatedBox(dom, pad) if isinstance(dom, Box) else _InflatedBall(dom, pad)


def c_exp_batch(model: CostModel, focus, focus_kind: str, targets: np.ndarray,
                initial_guess=None, max_iters: int = MAX_NEWTON_ITERS,
                tol: float = None, strict: bool = True):
    """Vectorised c-exponential: invert the dual-coordinate map at many targets.

    focus_kind 'y' solves -D_y c(x, focus) = target for x in X,
    focus_kind 'x' solves -D_x c(focus, y) = target for y in Y.
    Iterates are projected into a slightly inflated domain (kept clear of the
    diagonal on separated pairs); membership in the true domain is checked a
    posteriori so targets outside the dual image surface as errors.

    With ``strict=False`` returns (points, ok_mask) instead of raising, which
    lets cone sampling treat out-of-image targets as data.
    """
    if focus_kind not in ("x", "y"):
        raise ValueError("focus_kind must be 'x' or 'y'")
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    dom = _solve_domain(model, focus_kind)
    shell = _inflate(dom, _inflation(model))
    focus = np.asarray(focus, dtype=float)
    scale = max(1.0, float(np.max(np.abs(targets))))
    tol = (NEWTON_TOL * scale) if tol is None else tol

    if initial_guess is None:
        pts = np.broadcast_to(dom.center if hasattr(dom, "center") else dom.project(focus),
                              targets.shape).copy()
    else:
        pts = np.atleast_2d(np.asarray(initial_guess, dtype=float)).copy()
        if pts.shape[0] == 1 and targets.shape[0] > 1:
            pts = np.repeat(pts, targets.shape[0], axis=0)

    def residual(z):
        if focus_kind == "y":
            foc = np.broadcast_to(focus, z.shape)
            return -model.grad_y(z, foc) - targets
        foc = np.broadcast_to(focus, z.shape)
        return -model.grad_x(foc, z) - targets

    def jacobian(z):
        foc = np.broadcast_to(focus, z.shape)
        if focus_kind == "y":
            return -np.swapaxes(model.mixed_hessian(z, foc), -1, -2)
        return -model.mixed_hessian(foc, z)

    res = residual(pts)
    nrm = np.linalg.norm(res, axis=1)
    for _ in range(max_iters):
        active = nrm > tol
        if not np.any(active):
            break
        J = jacobian(pts[active])
        step = np.linalg.solve(J, -res[active][..., None])[..., 0]
        sub = pts[active]
        sub_nrm = nrm[active]
        t = np.ones(len(sub))
        best = sub.copy()
        best_nrm = sub_nrm.copy()
        for _ in range(40):
            cand = shell.project(sub + t[:, None] * step)
            cand_res = residual_rows(model, focus, focus_kind, cand, targets[active])
            cand_nrm = np.linalg.norm(cand_res, axis=1)
            improve = cand_nrm < best_nrm
            best[improve] = cand[improve]
            best_nrm[improve] = cand_nrm[improve]
            still = cand_nrm >= sub_nrm
            if not np.any(still):
                break
            t[still] *= 0.5
        pts[active] = best
        nrm[active] = best_nrm
        res = residual(pts)
        nrm = np.linalg.norm(res, axis=1)

    membership_tol = 1e-7 * max(1.0, model.domain.diameter)
    if not strict:
        ok = nrm <= tol
        ok &= np.array([dom.contains(pt, tol=membership_tol) for pt in pts])
        return pts, ok
    if np.any(nrm > tol):
        worst = float(np.max(nrm))
        stuck = pts[nrm > tol]
        on_edge = any(not dom.contains(pt, tol=-1e-9) for pt in stuck)
        if on_edge:
            raise TargetOutsideImage(f"residual {worst:.3g} with iterate pinned at the boundary")
        raise NoConvergence(f"Newton residual {worst:.3g} after {max_iters} iterations")
    for pt in pts:
        if not dom.contains(pt, tol=membership_tol):
            raise TargetOutsideImage("converged point lies outside the opposite domain")
    return pts


def residual_rows(model, focus, focus_kind, pts, targets):
    foc = np.broadcast_to(np.asarray(focus, dtype=float), pts.shape)
    if focus_kind == "y":
        return -model.grad_y(pts, foc) - targets
    return -model.grad_x(foc, pts) - targets


def c_exp(model: CostModel, focus, focus_kind: str, target, initial_guess=None,
          max_iters: int = MAX_NEWTON_ITERS) -> np.ndarray:
    """Single-point c-exponential map; see c_exp_batch."""
    guess = None if initial_guess is None else np.atleast_2d(initial_guess)
    return c_exp_batch(model, focus, focus_kind, np.atleast_2d(target),
                       initial_guess=guess, max_iters=max_iters)[0]


def c_segment(model: CostModel, y, x0, x1, ts) -> np.ndarray:
    """Points of the c-segment w.r.t. y from x0 to x1 at parameters ts."""
    p0 = -np.asarray(model.grad_y(x0, y), dtype=float)
    p1 = -np.asarray(model.grad_y(x1, y), dtype=float)
    ts = np.asarray(ts, dtype=float)
    targets = (1.0 - ts)[:, None] * p0 + ts[:, None] * p1
    # warm start along the segment: seed every solve from the x0 endpoint
    guess = np.repeat(np.asarray(x0, dtype=float)[None, :], len(ts), axis=0)
    return c_exp_batch(model, y, "y", targets, initial_guess=guess)


def segment_csv(ts, points) -> str:
    """Segment samples as CSV rows (t, x_1..x_n)."""
    ts = np.asarray(ts, dtype=float)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    header = "t," + ",".join(f"x{i + 1}" for i in range(points.shape[1]))
    rows = [header]
    for t, pt in zip(ts, points):
        rows.append(",".join("%.17g" % v for v in [t, *pt]))
    return "\n".join(rows) + "\n"


@dataclass
class DomainConvexityReport:
    holds: bool
    worst_midpoint_violation: float
    checked: int


def check_domain_c_convexity(model: CostModel, check_budget: int = 200,
                             seed: int = 0, tol: float = None) -> DomainConvexityReport:
    """Midpoint sampling check that [X]_y and [Y]_x are convex.

    Statistical, not a proof: for sampled y and pairs in the dual image, the
    midpoint must map back inside the domain.
    """
    rng = np.random.default_rng(seed)
    tol = 1e-7 * model.domain.diameter if tol is None else tol
    worst = 0.0
    checked = 0
    X, Y = model.domain.X, model.domain.Y
    for direction in ("y", "x"):
        for _ in range(check_budget // 2):
            if direction == "y":
                focus = Y.sample(rng)
                a, b = X.sample(rng), X.sample(rng)
                pa = -model.grad_y(a, focus)
                pb = -model.grad_y(b, focus)
                dom = X
            else:
                focus = X.sample(rng)
                a, b = Y.sample(rng), Y.sample(rng)
                pa = -model.grad_x(focus, a)
                pb = -model.grad_x(focus, b)
                dom = Y
            mid = 0.5 * (pa + pb)
            try:
                pt = c_exp(model, focus, direction, mid, initial_guess=0.5 * (a + b))
                violation = max(0.0, -dom.boundary_distance(pt))
            except TargetOutsideImage:
                violation = tol * 10  # midpoint demonstrably left the domain
            except NoConvergence:
                continue
            worst = max(worst, violation)
            checked += 1
    return DomainConvexityReport(holds=worst <= tol, worst_midpoint_violation=worst,
                                 checked=checked)


# -- cones -------------------------------------------------------------------


@dataclass(frozen=True)
class Cone:
    """Closed cone with apex, axis, opening angle and (possibly inf) radius."""

    apex: np.ndarray
    axis: np.ndarray
    opening: float
    radius: float = math.inf

    def contains(self, v, tol: float = 0.0) -> bool:
        v = np.asarray(v, dtype=float)
        d = v - np.asarray(self.apex, dtype=float)
        nd = np.linalg.norm(d)
        if nd > self.radius + tol:
            return False
        ax = np.asarray(self.axis, dtype=float)
        return float(np.dot(d, ax)) >= math.cos(self.opening) * nd * float(np.linalg.norm(ax)) - tol


def _support_points(S):
    """Finite description of S for linear-inequality tests: vertices or ball."""
    from .domains import Ball, Box
    if isinstance(S, Box):
        return ("points", S.vertices())
    if isinstance(S, Ball):
        return ("ball", (S.center, S.radius))
    return ("points", np.atleast_2d(np.asarray(S, dtype=float)))


def dual_cone_contains(S, v, tol: float = 1e-12) -> bool:
    """Test v in K*(S) = {v : <v, s> >= 0 for all s in S}."""
    v = np.asarray(v, dtype=float)
    kind, data = _support_points(S)
    if kind == "ball":
        center, radius = data
        return float(np.dot(v, center)) - radius * float(np.linalg.norm(v)) >= -tol
    return bool(np.all(data @ v >= -tol))


def normal_cone_contains(S, p, v, tol: float = 1e-12) -> bool:
    """Test v in N(S; p) = -K*(S - p), the outward normal cone at p."""
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    kind, data = _support_points(S)
    if kind == "ball":
        center, radius = data
        return float(np.dot(v, center - p)) + radius * float(np.linalg.norm(v)) <= tol
    return bool(np.all((data - p) @ v <= tol))


def cone_radius(theta: float, l0: float, l1: float, consts: ConstantEstimates,
                grid_size: int = 96) -> float:
    """Largest grid radius rho with 2*beta*L^2*rho + beta^2*l1*omega(L*rho)
    <= (l0/alpha)*cos(theta).

    The modulus table is read with the conservative upper step, so the
    certified radius errs low.
    """
    if not (0.0 < theta < math.pi / 2):
        raise ValueError("theta must lie in (0, pi/2)")
    if not (0.0 < l0 <= l1):
        raise ValueError("need 0 < l0 <= l1")
    rhs = (l0 / consts.alpha) * math.cos(theta)
    hi = consts.omega_table[-1][0] / consts.L
    lo = min(consts.omega_table[0][0] / consts.L, rhs / (4.0 * consts.beta * consts.L**2))
    best = None
    for rho in np.geomspace(max(lo, 1e-300), hi, grid_size):
        lhs = 2.0 * consts.beta * consts.L**2 * rho + consts.beta**2 * l1 * consts.omega(consts.L * rho)
        if lhs <= rhs:
            best = float(rho)
    if best is None:
        raise NoFeasibleRadius("no grid radius satisfies the cone inequality")
    return best


def mu_theta(theta: float, consts: ConstantEstimates) -> float:
    """rho_theta / (L * alpha) with rho_theta the largest tabulated scale
    whose modulus stays below cos(theta) / (4 * alpha * beta^2)."""
    if not (0.0 < theta < math.pi / 2):
        raise ValueError("theta must lie in (0, pi/2)")
    cap = math.cos(theta) / (4.0 * consts.alpha * consts.beta**2)
    best = None
    for rho, w in consts.omega_table:
        if w <= cap:
            best = rho
    if best is None:
        raise NoFeasibleRadius("modulus table too coarse for the requested angle")
    return best / (consts.L * consts.alpha)


def cone_toolkit(operation: str, **kwargs):
    """String-dispatched facade over the cone utilities."""
    ops = {
        "membership": lambda: Cone(kwargs["apex"], kwargs["axis"], kwargs["opening"],
                                   kwargs.get("radius", math.inf)).contains(
                                       kwargs["v"], kwargs.get("tol", 0.0)),
        "dual_cone_contains": lambda: dual_cone_contains(kwargs["S"], kwargs["v"],
                                                         kwargs.get("tol", 1e-12)),
        "normal_cone_contains": lambda: normal_cone_contains(kwargs["S"], kwargs["p"], kwargs["v"],
                                                             kwargs.get("tol", 1e-12)),
        "cone_radius": lambda: cone_radius(kwargs["theta"], kwargs["l0"], kwargs["l1"],
                                           kwargs["consts"], kwargs.get("grid_size", 96)),
        "mu_theta": lambda: mu_theta(kwargs["theta"], kwargs["consts"]),
    }
    if operation not in ops:
        raise ValueError(f"unknown cone operation {operation!r}")
    return ops[operation]()
