"""Constructive pipeline: from a quasi-convexity violation to a function that
is alternative c-convex but not c-convex.

The construction walks the violation profile C(p) = -c(x(p), y1) + c(x(p), y0)
along the p-segment to a level-crossing pair (w0, w1) with equal heights and
opposite slope signs, certifies a double cone inside the section between the
two c-affine functions, then builds Phi as a supremum of tilted c-affine
families anchored at z0 = x(w0) and z1 = x(w1) plus the crossing c-affine,
and finally caps Phi with -c(., y0) + epsilon inside a small p-ball around
w1.  The cap creates a flat spot whose supporting c-affine would be forced
back to y0 by the twist condition, contradicting the strict dip at z0, so
the capped function cannot be c-convex; alternative c-convexity is verified
empirically.

The proof's explicit constant chain is numerically vacuous at realistic
scales, so the cap parameters (r, delta, epsilon) are found by a geometric
decreasing search with the verifier as the oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .chords import is_alternative_c_convex
from .convexity import CAffine, c_envelope, c_subdifferential
from .costs import ConstantEstimates, CostModel, estimate_constants
from .errors import (CapEmpty, NoConvergence, NoViolationFound, RefinementFailed,
                     TargetOutsideImage, TiltOutOfDomain)
from .geometry import c_exp, c_exp_batch, mu_theta
from .gridfn import GridFunction, default_shape
from .mtw import _ascend_violation, _loeper_margin

COS_THETA_FLOOR = 7.0 / 8.0


@dataclass
class ViolationSeed:
    """Interior violation with the crossing level set midway through the gap."""

    x0: np.ndarray
    x1: np.ndarray
    y0: np.ndarray
    y1: np.ndarray
    h1p: float
    t0: float
    margin: float

    def inequality_margins(self, model: CostModel) -> tuple:
        """The two strict endpoint inequalities and the strict segment
        inequality, all positive for a valid seed."""
        from .geometry import c_segment
        end = [float(model.cost(xi, self.y1) - self.h1p - model.cost(xi, self.y0))
               for xi in (self.x0, self.x1)]
        xt = c_segment(model, self.y0, self.x0, self.x1, [self.t0])[0]
        seg = float(-model.cost(xt, self.y1) + self.h1p + model.cost(xt, self.y0))
        return end[0], end[1], seg


@dataclass
class StructuredViolation:
    z0: np.ndarray
    z1: np.ndarray
    y0: np.ndarray
    y1: np.ndarray
    h1: float
    w0: np.ndarray
    w1: np.ndarray
    theta: float
    rho: float

    @property
    def xi(self) -> np.ndarray:
        return self.w1 - self.w0

    def condition1_residuals(self, model: CostModel) -> tuple:
        return tuple(abs(float(-model.cost(z, self.y0))
                         - float(-model.cost(z, self.y1) + self.h1))
                     for z in (self.z0, self.z1))

    def condition2_margins(self, model: CostModel) -> tuple:
        out = []
        for z, direction in ((self.z0, self.xi), (self.z1, -self.xi)):
            M = -model.mixed_hessian(z, self.y0)
            rhs = -model.grad_x(z, self.y1) + model.grad_x(z, self.y0)
            v = np.linalg.solve(M, rhs)
            out.append(float(np.dot(v, direction)))
        return tuple(out)

    def condition3_check(self, model: CostModel, samples: int = 160,
                         tol: float = 1e-9, seed: int = 0) -> float:
        """Smallest sampled value of f1 - f0 over the double cone intersected
        with the dual image; nonnegative (within tol) when condition 3 holds."""
        pts = np.array(_double_cone_samples(self, samples, seed))
        heights = _section_heights(model, self, pts)
        finite = heights[np.isfinite(heights)]
        return float(np.min(finite)) if finite.size else math.inf

    def to_dict(self):
        return {"z0": self.z0.tolist(), "z1": self.z1.tolist(),
                "y0": self.y0.tolist(), "y1": self.y1.tolist(), "h1": self.h1,
                "w0": self.w0.tolist(), "w1": self.w1.tolist(),
                "theta": self.theta, "rho": self.rho}


def _section_heights(model, sv, P):
    """f1(x(p)) - f0(x(p)) with f0 = -c(., y0), f1 = -c(., y1) + h1 for a
    batch of p's; NaN where p falls outside the dual image of X."""
    P = np.atleast_2d(np.asarray(P, dtype=float))
    pts, ok = c_exp_batch(model, sv.y0, "y", P, strict=False)
    out = np.full(len(P), np.nan)
    if np.any(ok):
        x = pts[ok]
        y1b = np.broadcast_to(sv.y1, x.shape)
        y0b = np.broadcast_to(sv.y0, x.shape)
        out[ok] = -model.cost(x, y1b) + sv.h1 + model.cost(x, y0b)
    return out


def _rotate_2d(v, ang):
    c, s = math.cos(ang), math.sin(ang)
    return np.array([c * v[0] - s * v[1], s * v[0] + c * v[1]])


def _cone_directions(axis: np.ndarray, half_angle: float, count: int,
                     rng: np.random.Generator = None) -> np.ndarray:
    """Unit directions within the closed cone of the given half angle."""
    axis = np.asarray(axis, dtype=float)
    n = axis.size
    ax = axis / np.linalg.norm(axis)
    if n == 2:
        angles = np.linspace(-half_angle, half_angle, count)
        return np.array([_rotate_2d(ax, a) for a in angles])
    rng = np.random.default_rng(0) if rng is None else rng
    out = [ax]
    while len(out) < count:
        v = rng.normal(size=n)
        v /= np.linalg.norm(v)
        if np.dot(v, ax) >= math.cos(half_angle):
            out.append(v)
    return np.array(out)


def _double_cone_samples(sv: StructuredViolation, samples: int, seed: int = 0):
    """Points of (K^rho_{theta,xi}+w0) u (K^rho_{theta,-xi}+w1), cone-wise."""
    xi = sv.xi
    per_cone = max(4, samples // 2)
    n_dirs = max(3, int(math.sqrt(per_cone)))
    n_radii = max(3, per_cone // n_dirs)
    rng = np.random.default_rng(seed)
    pts = []
    for apex, ax in ((sv.w0, xi), (sv.w1, -xi)):
        dirs = _cone_directions(ax, sv.theta, n_dirs, rng)
        for d in dirs:
            for rr in np.linspace(sv.rho / n_radii, sv.rho, n_radii):
                pts.append(apex + rr * d)
    return pts


# -- stage 1: find an interior violation --------------------------------------


def find_violation(model: CostModel, budget: int = 2000, seed: int = 0,
                   interior_margin: float = None, certificate=None,
                   violation_floor: float = 1e-7) -> ViolationSeed:
    """Locate a violation with all four base points strictly interior and the
    crossing level placed midway through the violation gap, making both
    endpoint inequalities and the segment inequality strict."""
    X, Y = model.domain.X, model.domain.Y
    if interior_margin is None:
        interior_margin = 0.04 * min(np.min(X.hi - X.lo) if hasattr(X, "hi") else X.radius,
                                     np.min(Y.hi - Y.lo) if hasattr(Y, "hi") else Y.radius)

    if certificate is not None:
        # nudge hand-fed points inward, then re-verify
        xin = X.inset(interior_margin)
        yin = Y.inset(interior_margin)
        cand = (xin.project(certificate.x0), xin.project(certificate.x1),
                yin.project(certificate.y0), yin.project(certificate.y1),
                float(certificate.t))
        margin = float(_loeper_margin(model, *cand[:4], np.array([cand[4]]))[0])
        cand, margin = _ascend_violation(model, cand, margin, inset=interior_margin)
    else:
        report = _interior_loeper_search(model, budget, seed, interior_margin)
        cand, margin = report

    if cand is None or margin <= violation_floor:
        raise NoViolationFound(
            f"no interior violation above {violation_floor:g} at budget {budget}")

    x0, x1, y0, y1, t0 = cand
    lam = -max(float(-model.cost(x0, y1) + model.cost(x0, y0)),
               float(-model.cost(x1, y1) + model.cost(x1, y0)))
    from .geometry import c_segment
    xt = c_segment(model, y0, x0, x1, [t0])[0]
    peak = float(-model.cost(xt, y1) + model.cost(xt, y0))
    h1p = lam - 0.5 * (peak + lam)
    seed_out = ViolationSeed(x0=x0, x1=x1, y0=y0, y1=y1, h1p=h1p, t0=t0, margin=margin)
    m0, m1, ms = seed_out.inequality_margins(model)
    if min(m0, m1, ms) <= 0:
        raise NoViolationFound("crossing-level inequalities failed to come out strict")
    return seed_out


def _interior_loeper_search(model, budget, seed, inset):
    """check_loeper-style sampling constrained to inset domains."""
    rng = np.random.default_rng(seed)
    X, Y = model.domain.X.inset(inset), model.domain.Y.inset(inset)
    ts = np.linspace(0.0, 1.0, 17)[1:-1]
    top = []
    for _ in range(budget):
        x0, x1 = X.sample(rng), X.sample(rng)
        y0, y = Y.sample(rng), Y.sample(rng)
        margins = _loeper_margin(model, x0, x1, y0, y, ts)
        if np.all(np.isneginf(margins)):
            continue
        k = int(np.nanargmax(margins))
        top.append((float(margins[k]), (x0, x1, y0, y, float(ts[k]))))
    top.sort(key=lambda t: -t[0])
    best_margin, cand = (top[0][0], top[0][1]) if top else (-np.inf, None)
    for raw, lead in top[:5]:
        lead2, m2 = _ascend_violation(model, lead, raw, inset=inset)
        if m2 > best_margin:
            best_margin, cand = m2, lead2
    return cand, best_margin


# -- stage 2: refine to the structured form -----------------------------------


def locate_level_crossing(profile: Callable, t0: float, level: float,
                          fine: int = 400, slope_floor: float = 1e-10,
                          prominence: float = 0.25):
    """Find tau < sigma bracketing the hump of the profile above the level.

    ``profile`` maps an array of parameters in [0, 1] to an array of values.
    tau sits where the profile has climbed a ``prominence`` fraction of the
    way from the level toward the peak (with strictly positive slope), the
    level is reset to profile(tau), and sigma is the first return to that
    level.  Returns (tau, sigma, new_level_value).
    """
    def at(t):
        return float(profile(np.array([t]))[0])

    if at(t0) <= level:
        raise RefinementFailed(1, "profile not above the level at t0")
    # walk down from t0 to the entry crossing
    ts = np.linspace(0.0, t0, fine)
    vals = profile(ts)
    above = vals > level
    if above[0]:
        lo = 0.0
    else:
        j = len(above) - 1
        while j > 0 and above[j - 1]:
            j -= 1
        a, b = ts[j - 1], ts[j]
        for _ in range(80):
            mid = 0.5 * (a + b)
            if at(mid) > level:
                b = mid
            else:
                a = mid
        lo = b

    peak_v = max(float(np.max(vals)), at(t0))
    peak_t = float(ts[np.argmax(vals)]) if float(np.max(vals)) >= at(t0) else t0
    target = level + prominence * (peak_v - level)
    cands = np.linspace(lo + 1e-6, peak_t, fine)
    cvals = profile(cands)
    dvals = (profile(np.minimum(cands + 1e-7, 1.0))
             - profile(np.maximum(cands - 1e-7, 0.0))) / 2e-7
    rising = dvals > slope_floor
    hits = np.flatnonzero((cvals >= target) & rising)
    if hits.size == 0:
        hits = np.flatnonzero((cvals > level) & rising)
    if hits.size == 0:
        raise RefinementFailed(2, "no strictly increasing point above the level")
    tau = float(cands[hits[0]])
    new_level = at(tau)

    # first return to the new level after tau
    scan = np.linspace(tau + 1e-6, 1.0, fine)
    svals = profile(scan)
    below = np.flatnonzero(svals <= new_level)
    if below.size == 0:
        raise RefinementFailed(1, "profile never returns to the level")
    a, b = tau, float(scan[below[0]])
    for _ in range(80):
        mid = 0.5 * (a + b)
        if at(mid) > new_level:
            a = mid
        else:
            b = mid
    sigma = float(b)
    return tau, sigma, float(new_level)


def refine_violation(model: CostModel, raw: ViolationSeed, cos_theta_grid=None,
                     rho_grid_size: int = 10, cone_samples: int = 160,
                     prominence: float = 0.25, seed: int = 0) -> StructuredViolation:
    """Walk the p-segment to the level-crossing pair and certify the double
    cone (largest angle with cos(theta) above 7/8 that admits a radius
    covering the segment)."""
    p0 = -np.asarray(model.grad_y(raw.x0, raw.y0), dtype=float)
    p1 = -np.asarray(model.grad_y(raw.x1, raw.y0), dtype=float)

    def profile(ts):
        ts = np.asarray(ts, dtype=float)
        P = (1.0 - ts)[:, None] * p0 + ts[:, None] * p1
        guess = np.repeat(raw.x0[None, :], len(P), axis=0)
        xs = c_exp_batch(model, raw.y0, "y", P, initial_guess=guess)
        return (-model.cost(xs, np.broadcast_to(raw.y1, xs.shape))
                + model.cost(xs, np.broadcast_to(raw.y0, xs.shape)))

    tau, sigma, level = locate_level_crossing(profile, raw.t0, -raw.h1p,
                                              prominence=prominence)
    h1 = -level
    w0 = (1.0 - tau) * p0 + tau * p1
    w1 = (1.0 - sigma) * p0 + sigma * p1
    z0 = c_exp(model, raw.y0, "y", w0)
    z1 = c_exp(model, raw.y0, "y", w1)
    sv = StructuredViolation(z0=z0, z1=z1, y0=raw.y0, y1=raw.y1, h1=h1,
                             w0=w0, w1=w1, theta=0.0, rho=0.0)

    res = sv.condition1_residuals(model)
    if max(res) > 1e-8:
        raise RefinementFailed(1, f"level-equality residuals {res}")
    margins = sv.condition2_margins(model)
    if min(margins) <= 0:
        raise RefinementFailed(2, f"directional margins {margins} (degenerate branch)")

    nrm = float(np.linalg.norm(sv.xi))
    if cos_theta_grid is None:
        cos_theta_grid = [0.88, 0.9, 0.93, 0.96, 0.98, 0.99, 0.995, 0.999,
                          0.9995, 0.9999, 0.99995, 0.99999]
    chosen = None
    for cos_t in cos_theta_grid:     # ascending cos = descending angle
        theta = math.acos(cos_t)
        best_rho = None
        for rho in np.geomspace(0.501 * nrm, 2.0 * nrm, rho_grid_size):
            trial = replace(sv, theta=theta, rho=float(rho))
            if trial.condition3_check(model, samples=cone_samples, seed=seed) >= -1e-9:
                best_rho = float(rho)
        if best_rho is not None:
            chosen = (theta, best_rho)
            break
    if chosen is None:
        raise RefinementFailed(3, "no double cone with cos(theta) > 7/8 fits the section")
    theta, rho = chosen
    if math.cos(theta) <= COS_THETA_FLOOR:
        raise RefinementFailed(3, "certified angle fell below the cosine floor")
    return replace(sv, theta=theta, rho=rho)


# -- stage 3: build the candidate function ------------------------------------


@dataclass
class CounterexampleParams:
    r: float                       # tilt radius in p-units
    delta: float                   # flat-cap radius in p-units
    epsilon: float                 # lift height in cost units
    cone_direction_count: int = 32
    mu_bound: float = math.nan     # mu(pi/2 - theta/4), recorded for cross-checks
    eps_delta_bound: float = math.nan

    def validate(self):
        if self.epsilon <= 0 or self.delta <= 0 or self.r <= 0:
            raise ValueError("epsilon, delta, r must be positive")


@dataclass
class PhiEpsilon:
    """The built candidate: a sup of c-affine pieces plus the capped region."""

    grid: GridFunction
    affines: list                  # CAffine pieces of Phi
    sv: StructuredViolation
    params: CounterexampleParams
    cap_flat: np.ndarray           # flat node indices realising the cap equality

    def evaluate(self, model: CostModel, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        vals = _phi_raw(model, self.affines, pts)
        pvals = -model.grad_y(pts, np.broadcast_to(self.sv.y0, pts.shape))
        in_cap = np.linalg.norm(pvals - self.sv.w1, axis=1) <= self.params.delta
        f0e = -model.cost(pts, np.broadcast_to(self.sv.y0, pts.shape)) + self.params.epsilon
        return np.where(in_cap, np.maximum(vals, f0e), vals)


def _phi_raw(model, affines, pts):
    vals = np.full(len(pts), -np.inf)
    for f in affines:
        yb = np.broadcast_to(f.y, pts.shape)
        vals = np.maximum(vals, -model.cost(pts, yb) + f.h)
    return vals


def tilt_family(model: CostModel, sv: StructuredViolation, r: float,
                count: int, seed: int = 0) -> list:
    """The tilted c-affine families anchored at z0 and z1.

    Tilt vectors are sampled from the closed cones of half angle
    (pi - theta)/2 around -xi (at z0) and +xi (at z1), at full and half
    radius; each realises a y-point via the c-exponential focused at the
    anchor, giving a c-affine passing through (z_i, -c(z_i, y0)).
    """
    xi = sv.xi
    half = (math.pi - sv.theta) / 2.0
    rng = np.random.default_rng(seed)
    out = []
    for z, axis in ((sv.z0, -xi), (sv.z1, xi)):
        q0 = -np.asarray(model.grad_x(z, sv.y0), dtype=float)
        M = -model.mixed_hessian(z, sv.y0)
        dirs = _cone_directions(axis, half, count, rng)
        for scale in (r, 0.5 * r):
            for d in dirs:
                v = scale * d
                target = q0 + M @ v
                try:
                    y_v = c_exp(model, z, "x", target)
                except (TargetOutsideImage, NoConvergence) as exc:
                    raise TiltOutOfDomain(
                        f"tilt radius {scale:g} leaves Y at anchor {z}") from exc
                h = float(model.cost(z, y_v)) - float(model.cost(z, sv.y0))
                out.append(CAffine(y=y_v, h=h))
    return out


def estimate_eps_delta(model: CostModel, sv: StructuredViolation, delta: float,
                       samples: int = 200, seed: int = 0) -> float:
    """inf of f1 - f0 over the double cone minus the two delta-balls; the cap
    height must stay below this to keep the capped region inside the section."""
    pts = np.array([p for p in _double_cone_samples(sv, samples, seed)
                    if np.linalg.norm(p - sv.w0) > delta and np.linalg.norm(p - sv.w1) > delta])
    if pts.size == 0:
        return math.inf
    heights = _section_heights(model, sv, pts)
    finite = heights[np.isfinite(heights)]
    return float(np.min(finite)) if finite.size else math.inf


@dataclass
class CapPlan:
    delta: float
    epsilon: float
    cap_nodes: int
    interior_nodes: int
    ring_min: float
    depth_min: float


def _ring_excess_min(model, sv, affines, delta, n_dirs=48):
    """Smallest Phi - f0 over the cap-ball boundary inside the dual image;
    the cap height must stay below it or the capped function tears."""
    if model.dimension == 2:
        angs = np.linspace(0.0, 2.0 * math.pi, n_dirs, endpoint=False)
        dirs = np.stack([np.cos(angs), np.sin(angs)], axis=1)
    else:
        rng = np.random.default_rng(1)
        dirs = rng.normal(size=(n_dirs, model.dimension))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    ring = sv.w1 + delta * dirs
    xs, ok = c_exp_batch(model, sv.y0, "y", ring, strict=False)
    if not np.any(ok):
        return math.nan
    xr = xs[ok]
    excess = _phi_raw(model, affines, xr) + model.cost(xr, np.broadcast_to(sv.y0, xr.shape))
    return float(np.min(excess))


def plan_cap(model: CostModel, sv: StructuredViolation, affines: list,
             grid: GridFunction, delta_grid=None, safety: float = 0.9):
    """Measure the excess field Phi - f0 on the lattice and pick (delta,
    epsilon) pairs that keep the cap continuous (ring minimum above epsilon),
    non-empty (a lattice node strictly below epsilon inside the ball, with an
    all-neighbours cap patch when available), and deep (an uncapped node at
    excess <= epsilon/2 so the envelope gap survives)."""
    nodes = grid.nodes()
    excess = (_phi_raw(model, affines, nodes)
              + model.cost(nodes, np.broadcast_to(sv.y0, nodes.shape)))
    pvals = -model.grad_y(nodes, np.broadcast_to(sv.y0, nodes.shape))
    dist1 = np.linalg.norm(pvals - sv.w1, axis=1)
    if delta_grid is None:
        delta_grid = sv.rho * np.array([0.45, 0.3, 0.2, 0.12, 0.08])
    plans = []
    shape = grid.shape
    for delta in delta_grid:
        ring = _ring_excess_min(model, sv, affines, delta)
        if not np.isfinite(ring) or ring <= 0:
            continue
        in_ball = dist1 <= delta
        if not np.any(in_ball):
            continue
        eps_hi = safety * ring
        ball_vals = np.sort(excess[in_ball])
        # candidate heights: just under the ring, and just above successive
        # node layers so the cap gains nodes as the search descends
        eps_cands = [eps_hi]
        eps_cands += [min(eps_hi, v * 1.5) for v in ball_vals[:6] if v * 1.5 < eps_hi]
        for eps in sorted(set(eps_cands), reverse=True):
            if eps <= 0:
                continue
            cap = in_ball & (excess < eps)
            if not np.any(cap):
                continue
            # deep nodes certify interior points of the continuum flat set
            deep = cap & (excess < 0.75 * eps)
            depth = float(np.min(excess[~cap])) if np.any(~cap) else math.inf
            plans.append(CapPlan(delta=float(delta), epsilon=float(eps),
                                 cap_nodes=int(np.count_nonzero(cap)),
                                 interior_nodes=int(np.count_nonzero(deep)),
                                 ring_min=ring, depth_min=depth))
    # prefer plans with an interior cap patch, then more cap nodes, then depth
    plans.sort(key=lambda p: (-(p.interior_nodes > 0), -(p.cap_nodes > 1),
                              -(p.depth_min <= p.epsilon / 2), -p.epsilon))
    return plans


def build_phi_epsilon(model: CostModel, sv: StructuredViolation,
                      params: CounterexampleParams, shape=None,
                      consts: ConstantEstimates = None, seed: int = 0,
                      enforce_mu: bool = False) -> PhiEpsilon:
    """Assemble phi_epsilon on the X lattice.

    With ``enforce_mu`` the tilt radius is checked against mu(pi/2 - theta/4);
    the production search leaves it off because the sampled modulus makes the
    bound vacuously small, and relies on the verification oracle instead.
    """
    params.validate()
    if params.delta >= sv.rho:
        raise ValueError("cap radius delta must stay below the cone radius rho")
    if enforce_mu and consts is not None:
        theta_tilde = math.pi / 2.0 - sv.theta / 4.0
        bound = mu_theta(theta_tilde, consts)
        if params.r > bound:
            raise ValueError(f"tilt radius {params.r:g} exceeds mu(theta~) = {bound:g}")

    affines = [CAffine(y=sv.y0.copy(), h=0.0), CAffine(y=sv.y1.copy(), h=sv.h1)]
    affines.extend(tilt_family(model, sv, params.r, params.cone_direction_count, seed))

    shape = default_shape(model.dimension) if shape is None else shape
    X = model.domain.X
    grid = GridFunction("X", X.lo, X.hi, np.zeros(shape))
    nodes = grid.nodes()
    phi_vals = _phi_raw(model, affines, nodes)

    pvals = -model.grad_y(nodes, np.broadcast_to(sv.y0, nodes.shape))
    in_cap_ball = np.linalg.norm(pvals - sv.w1, axis=1) <= params.delta
    f0 = -model.cost(nodes, np.broadcast_to(sv.y0, nodes.shape))
    capped = np.where(in_cap_ball, np.maximum(phi_vals, f0 + params.epsilon), phi_vals)
    flat = np.flatnonzero(in_cap_ball & (phi_vals < f0 + params.epsilon))
    if flat.size == 0:
        raise CapEmpty("no lattice node realises the flat-cap equality")
    grid.values = capped.reshape(shape)
    return PhiEpsilon(grid=grid, affines=affines, sv=sv, params=params, cap_flat=flat)


# -- stage 4: verification ------------------------------------------------------


@dataclass
class VerificationReport:
    alt_holds: bool
    alt_worst_gap: float
    c_convex_gap: float
    subdiff_empty_at: Optional[np.ndarray]
    verdict: bool
    pairs_checked: int = 0
    subdiff_tolerance: float = 1e-6


def interior_cap_nodes(model: CostModel, phi: PhiEpsilon,
                       margin_floor: float = 0.0) -> list:
    """Cap nodes certified interior to the continuum flat set.

    A node with Phi < f0 + epsilon - m stays in the flat set on a ball of
    radius m / Lip(Phi - f0), so a strictly positive margin certifies an
    interior point regardless of how thinly the lattice samples the set.
    Returns (flat_index, margin, radius) sorted by decreasing margin.
    """
    grid = phi.grid
    nodes = grid.nodes()[phi.cap_flat]
    sv = phi.sv
    excess = (_phi_raw(model, phi.affines, nodes)
              + model.cost(nodes, np.broadcast_to(sv.y0, nodes.shape)))
    margins = phi.params.epsilon - excess
    # crude but certified local slope bound for Phi - f0
    lip = 2.0 * float(np.max(np.linalg.norm(
        model.grad_x(nodes, np.broadcast_to(sv.y0, nodes.shape)), axis=1))) + 1.0
    out = [(int(f), float(m), float(m / lip))
           for f, m in zip(phi.cap_flat, margins) if m > margin_floor]
    out.sort(key=lambda t: -t[1])
    return out


def cap_zoom_grid(model: CostModel, phi: PhiEpsilon, inflate: float = 6.0,
                  shape=None) -> GridFunction:
    """Auxiliary lattice zoomed onto the flat cap, sampled from the exact
    evaluator.  The full-domain lattice cannot resolve the cap transversally
    (the flat set is a thin band), so the supporting-function test runs on
    this sub-box at the same node budget."""
    grid = phi.grid
    cap_pts = grid.nodes()[phi.cap_flat]
    lo = cap_pts.min(axis=0)
    hi = cap_pts.max(axis=0)
    center = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    half = np.maximum(half * inflate, 4.0 * grid.spacing)
    X = model.domain.X
    zlo = np.maximum(X.lo, center - half)
    zhi = np.minimum(X.hi, center + half)
    shape = grid.shape if shape is None else shape
    zoom = GridFunction("X", zlo, zhi, np.zeros(shape))
    zoom.values = phi.evaluate(model, zoom.nodes()).reshape(shape)
    return zoom


def _zoom_cap_interior(model: CostModel, phi: PhiEpsilon, zoom: GridFunction):
    """Flat-cap nodes of the zoom lattice whose lattice neighbours are all in
    the cap (the zoom resolution makes this meaningful)."""
    nodes = zoom.nodes()
    sv = phi.sv
    f0e = (-model.cost(nodes, np.broadcast_to(sv.y0, nodes.shape))
           + phi.params.epsilon)
    flat = np.isclose(zoom.flat_values(), f0e, rtol=0.0, atol=1e-12)
    pv = -model.grad_y(nodes, np.broadcast_to(sv.y0, nodes.shape))
    flat &= np.linalg.norm(pv - sv.w1, axis=1) <= phi.params.delta
    mask = flat.reshape(zoom.shape)
    interior = mask.copy()
    for axis in range(len(zoom.shape)):
        m = np.swapaxes(mask, 0, axis)
        inner = np.swapaxes(interior, 0, axis)
        inner[0] = False
        inner[-1] = False
        inner[1:-1] &= m[2:] & m[:-2]
        interior = np.swapaxes(inner, 0, axis)
    return np.flatnonzero(interior.ravel()), np.flatnonzero(flat)


def verify_counterexample(model: CostModel, phi: PhiEpsilon, budget: int = 400,
                          seed: int = 0, alt_tolerance: float = None,
                          envelope_tolerance: float = None,
                          subdiff_tolerance: float = 1e-6,
                          y_shape=None) -> VerificationReport:
    """Check the three claims: alternative c-convexity at the sampled budget,
    an envelope gap of at least epsilon/2, and an empty c-subdifferential at
    an interior flat-cap node (tested on the cap-zoomed lattice)."""
    grid = phi.grid
    nodes_total = int(np.prod(grid.shape))
    rng = np.random.default_rng(seed)

    # pair sampling stresses the cap region against the dip at z0
    cap = phi.cap_flat
    caps = rng.choice(cap, size=min(len(cap), max(8, budget // 8)), replace=True)
    others = rng.choice(nodes_total, size=len(caps), replace=True)
    extra = list(zip(caps.tolist(), others.tolist()))
    # anchor pairs near the two apex points
    p_nodes = -model.grad_y(grid.nodes(), np.broadcast_to(phi.sv.y0, grid.nodes().shape))
    near0 = int(np.argmin(np.linalg.norm(p_nodes - phi.sv.w0, axis=1)))
    near1 = int(np.argmin(np.linalg.norm(p_nodes - phi.sv.w1, axis=1)))
    extra.extend((near0, int(c)) for c in caps[:16].tolist())
    extra.append((near0, near1))

    # the construction knows its own support points; feeding them to the
    # solver removes the lattice under-resolution of the tilt-family sup
    alt = is_alternative_c_convex(model, grid, pair_budget=budget, seed=seed,
                                  tolerance=alt_tolerance, y_shape=y_shape,
                                  extra_pairs=extra,
                                  extra_y=[f.y for f in phi.affines])

    env = c_envelope(model, grid, tolerance=envelope_tolerance, y_shape=y_shape)

    subdiff_at = None
    zoom = cap_zoom_grid(model, phi)
    interior, _flat = _zoom_cap_interior(model, phi, zoom)
    for flat_idx in interior[:4].tolist():
        x_node = zoom.nodes()[flat_idx]
        support = c_subdifferential(model, zoom, x_node, tolerance=subdiff_tolerance,
                                    y_shape=y_shape)
        if not support:
            subdiff_at = x_node
            break

    verdict = bool(alt.holds and env.max_gap >= phi.params.epsilon / 2.0)
    return VerificationReport(alt_holds=alt.holds, alt_worst_gap=alt.worst_gap,
                              c_convex_gap=env.max_gap, subdiff_empty_at=subdiff_at,
                              verdict=verdict, pairs_checked=alt.pairs_checked,
                              subdiff_tolerance=subdiff_tolerance)


# -- driver ---------------------------------------------------------------------


@dataclass
class PipelineResult:
    seed_violation: ViolationSeed
    structured: StructuredViolation
    params: Optional[CounterexampleParams]
    phi: Optional[PhiEpsilon]
    report: Optional[VerificationReport]
    attempts: list = field(default_factory=list)

    @property
    def verdict(self) -> bool:
        return bool(self.report is not None and self.report.verdict)


def run_pipeline(model: CostModel, budget: int = 2000, seed: int = 0, shape=None,
                 consts: ConstantEstimates = None, max_attempts: int = 12,
                 verify_budget: int = 300, y_shape=None) -> PipelineResult:
    """find -> refine -> decreasing parameter search with the verifier as
    oracle (halve epsilon, then delta, then the tilt radius)."""
    raw = find_violation(model, budget=budget, seed=seed)
    sv = None
    last_exc = None
    for prominence in (0.25, 0.12, 0.05):
        try:
            sv = refine_violation(model, raw, seed=seed, prominence=prominence)
            break
        except RefinementFailed as exc:
            last_exc = exc
    if sv is None:
        raise last_exc
    if consts is None:
        consts = estimate_constants(model, sample_budget=300, seed=seed)

    # tilt radius from the local domain clearance; the worst-case constant
    # chain is far too conservative to seed the search
    l_clear = min(model.domain.Y.boundary_distance(sv.y0),
                  model.domain.Y.boundary_distance(sv.y1))
    cond = max(float(np.linalg.cond(-model.mixed_hessian(z, sv.y0)))
               for z in (sv.z0, sv.z1))
    r0 = max(1e-9, 0.8 * l_clear / cond)
    theta_tilde = math.pi / 2.0 - sv.theta / 4.0
    try:
        mu_bound = mu_theta(theta_tilde, consts)
    except Exception:
        mu_bound = math.nan

    shape = default_shape(model.dimension) if shape is None else shape
    X = model.domain.X
    grid = GridFunction("X", X.lo, X.hi, np.zeros(shape))

    attempts = []
    params = None
    phi = None
    report = None
    r = r0
    for _ in range(max_attempts):
        try:
            affines = [CAffine(y=sv.y0.copy(), h=0.0), CAffine(y=sv.y1.copy(), h=sv.h1)]
            affines.extend(tilt_family(model, sv, r, 32, seed))
        except TiltOutOfDomain as exc:
            attempts.append((CounterexampleParams(r=r, delta=math.nan, epsilon=math.nan),
                             f"tilt: {exc}"))
            r *= 0.5
            continue
        plans = plan_cap(model, sv, affines, grid)
        if not plans:
            r *= 0.5
            continue
        for plan in plans[:6]:
            eps_cap = estimate_eps_delta(model, sv, plan.delta, seed=seed)
            cand = CounterexampleParams(r=r, delta=plan.delta, epsilon=plan.epsilon,
                                        mu_bound=mu_bound, eps_delta_bound=eps_cap)
            try:
                phi_c = build_phi_epsilon(model, sv, cand, shape=shape, consts=consts,
                                          seed=seed)
            except (CapEmpty, TiltOutOfDomain, ValueError) as exc:
                attempts.append((cand, f"build: {exc}"))
                continue
            rep = verify_counterexample(model, phi_c, budget=verify_budget,
                                        seed=seed, y_shape=y_shape)
            attempts.append((cand, f"verify: alt={rep.alt_holds} "
                                   f"gap={rep.c_convex_gap:.3g} eps/2={cand.epsilon/2:.3g} "
                                   f"subdiff={'empty' if rep.subdiff_empty_at is not None else 'found'} "
                                   f"verdict={rep.verdict}"))
            if rep.verdict:
                return PipelineResult(seed_violation=raw, structured=sv, params=cand,
                                      phi=phi_c, report=rep, attempts=attempts)
            params, phi, report = cand, phi_c, rep
        r *= 0.5
    return PipelineResult(seed_violation=raw, structured=sv, params=params, phi=phi,
                          report=report, attempts=attempts)
