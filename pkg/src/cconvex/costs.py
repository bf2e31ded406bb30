"""Cost functions with derivative bundles and universal-constant estimation.

Built-in costs span the regimes the analysis cares about: the quadratic and
bilinear costs have identically vanishing curvature tensor, sqrt(1+|x-y|^2)
satisfies the sign condition, and |x-y|^p with p > 2 violates it.

Derivative conventions follow the cost-geometry literature: indices before
the comma differentiate in x, after the comma in y, so ``c_ij_p`` holds
d^3 c / dx_i dx_j dy_p and ``c_ij_st`` holds d^4 c / dx_i dx_j dy_s dy_t.
All first/second-order evaluators accept a single point pair or batches of
shape (N, n).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .domains import Box, DomainPair
from .errors import DegenerateHessian, DiagonalSingularity, StencilOutOfDomain

# relative FD steps per derivative order, scaled by the pair diameter
DEFAULT_FD_STEPS = {1: 1e-6, 2: 1e-4, 3: 1e-3, 4: 2.5e-3}
DEFAULT_COND_CAP = 1e12


def _as_batch(x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return x[None, :], True
    return x, False


class CostModel:
    """Base cost model: analytic derivatives where registered, FD fallback.

    Subclasses override ``cost`` (vectorised over leading batch axes) and the
    analytic derivative hooks up to ``analytic_order``.
    """

    name = "cost"
    analytic_order = 0
    diagonal_singular = False

    def __init__(self, domain: DomainPair, fd_steps=None, cond_cap=DEFAULT_COND_CAP):
        self.domain = domain
        self.fd_steps = dict(DEFAULT_FD_STEPS)
        if fd_steps:
            self.fd_steps.update(fd_steps)
        self.cond_cap = cond_cap
        self._lip_cache = None

    @property
    def dimension(self) -> int:
        return self.domain.dimension

    def fd_step(self, order: int) -> float:
        return self.fd_steps[order] * self.domain.diameter

    # -- evaluation ------------------------------------------------------

    def cost(self, x, y):
        raise NotImplementedError

    def grad_x(self, x, y):
        if self.analytic_order >= 1:
            return self._grad_x(x, y)
        return fd_grad_x(self, x, y, self.fd_step(1))

    def grad_y(self, x, y):
        if self.analytic_order >= 1:
            return self._grad_y(x, y)
        return fd_grad_y(self, x, y, self.fd_step(1))

    def mixed_hessian(self, x, y):
        """D^2_{xy} c, entry (i, j) = d^2 c / dx_i dy_j."""
        if self.analytic_order >= 2:
            return self._mixed_hessian(x, y)
        return fd_mixed_hessian(self, x, y, self.fd_step(2))

    def tensor_xxy(self, x, y):
        """c_{ij,p}: two x-derivatives, one y-derivative."""
        if self.analytic_order >= 3:
            return self._tensor_xxy(x, y)
        return fd_tensor_xxy(self, x, y, self.fd_step(3))

    def tensor_xyy(self, x, y):
        """c_{q,st}: one x-derivative, two y-derivatives."""
        if self.analytic_order >= 3:
            return self._tensor_xyy(x, y)
        return fd_tensor_xyy(self, x, y, self.fd_step(3))

    def tensor_xxyy(self, x, y):
        """c_{ij,st}: two x-derivatives, two y-derivatives."""
        if self.analytic_order >= 4:
            return self._tensor_xxyy(x, y)
        return fd_tensor_xxyy(self, x, y, self.fd_step(4))

    def swapped(self) -> "SwappedCost":
        """The role-swapped cost c~(y, x) = c(x, y)."""
        return SwappedCost(self)

    def check_diagonal(self, x, y):
        if not self.diagonal_singular:
            return
        x, _ = _as_batch(x)
        y, _ = _as_batch(y)
        r = np.linalg.norm(x - y, axis=-1)
        if np.any(r < 1e-12 * max(1.0, self.domain.diameter)):
            raise DiagonalSingularity(f"{self.name} cost derivative bundle at x = y")


class RadialCost(CostModel):
    """Cost of the form c(x, y) = G(|x - y|).

    The derivative tensors of g(d) = G(|d|) are assembled from four scalar
    profiles: B = G'/r, A = (G'' - G'/r)/r^2, C3 = A'/r, C4 = C3'/r.  Each
    y-derivative of c flips one sign relative to the pure d-derivatives.
    """

    analytic_order = 4

    def _coeffs(self, r):
        """Return (A, B, C3, C4) at radius r (vectorised)."""
        raise NotImplementedError

    def profile(self, r):
        """G(r), vectorised."""
        raise NotImplementedError

    def cost(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return self.profile(np.linalg.norm(x - y, axis=-1))

    def _grad_x(self, x, y):
        x, single = _as_batch(x)
        y, _ = _as_batch(y)
        d = x - y
        r = np.linalg.norm(d, axis=-1)
        _, B, _, _ = self._coeffs(r)
        g = B[:, None] * d
        return g[0] if single else g

    def _grad_y(self, x, y):
        return -self._grad_x(x, y)

    def _mixed_hessian(self, x, y):
        x, single = _as_batch(x)
        y, _ = _as_batch(y)
        d = x - y
        r = np.linalg.norm(d, axis=-1)
        A, B, _, _ = self._coeffs(r)
        eye = np.eye(d.shape[1])
        h = -(A[:, None, None] * d[:, :, None] * d[:, None, :] + B[:, None, None] * eye)
        return h[0] if single else h

    def _tensor_xxy(self, x, y):
        return -self._g3(x, y)

    def _tensor_xyy(self, x, y):
        return self._g3(x, y)

    def _g3(self, x, y):
        self.check_diagonal(x, y)
        d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
        r = float(np.linalg.norm(d))
        A, _, C3, _ = self._coeffs(np.array([r]))
        A, C3 = float(A[0]), float(C3[0])
        eye = np.eye(d.size)
        sym = (np.einsum("ij,k->ijk", eye, d) + np.einsum("ik,j->ijk", eye, d)
               + np.einsum("jk,i->ijk", eye, d))
        return C3 * np.einsum("i,j,k->ijk", d, d, d) + A * sym

    def _tensor_xxyy(self, x, y):
        self.check_diagonal(x, y)
        d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
        r = float(np.linalg.norm(d))
        A, _, C3, C4 = self._coeffs(np.array([r]))
        A, C3, C4 = float(A[0]), float(C3[0]), float(C4[0])
        eye = np.eye(d.size)
        dd = np.einsum("i,j->ij", d, d)
        sym_dd = (np.einsum("ij,kl->ijkl", eye, dd) + np.einsum("ik,jl->ijkl", eye, dd)
                  + np.einsum("il,jk->ijkl", eye, dd) + np.einsum("jk,il->ijkl", eye, dd)
                  + np.einsum("jl,ik->ijkl", eye, dd) + np.einsum("kl,ij->ijkl", eye, dd))
        sym_ee = (np.einsum("ij,kl->ijkl", eye, eye) + np.einsum("ik,jl->ijkl", eye, eye)
                  + np.einsum("il,jk->ijkl", eye, eye))
        return (C4 * np.einsum("i,j,k,l->ijkl", d, d, d, d) + C3 * sym_dd + A * sym_ee)


class QuadraticCost(RadialCost):
    """c(x, y) = |x - y|^2 / 2; all third and fourth derivatives vanish."""

    name = "quadratic"

    def profile(self, r):
        return 0.5 * r**2

    def _coeffs(self, r):
        z = np.zeros_like(r)
        return z, np.ones_like(r), z, z


class PowerCost(RadialCost):
    """c(x, y) = |x - y|^p with p > 2 (default 4)."""

    diagonal_singular = True

    def __init__(self, domain, p=4.0, **kw):
        super().__init__(domain, **kw)
        if p <= 2:
            raise ValueError("power cost requires p > 2")
        self.p = float(p)
        self.name = "power"

    def profile(self, r):
        return r**self.p

    def _coeffs(self, r):
        p = self.p
        r = np.maximum(r, 1e-300)
        B = p * r**(p - 2)
        A = p * (p - 2) * r**(p - 4)
        c3 = p * (p - 2) * (p - 4)
        C3 = c3 * r**(p - 6) if c3 != 0.0 else np.zeros_like(r)
        c4 = c3 * (p - 6)
        C4 = c4 * r**(p - 8) if c4 != 0.0 else np.zeros_like(r)
        return A, B, C3, C4


class LogCost(RadialCost):
    """c(x, y) = -log |x - y|."""

    name = "log"
    diagonal_singular = True

    def profile(self, r):
        return -np.log(r)

    def cost(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        r = np.linalg.norm(x - y, axis=-1)
        if np.any(r < 1e-300):
            raise DiagonalSingularity("log cost evaluated at x = y")
        return -np.log(r)

    def _coeffs(self, r):
        return 2.0 / r**4, -1.0 / r**2, -8.0 / r**6, 48.0 / r**8


class SqrtCost(RadialCost):
    """c(x, y) = sqrt(1 + |x - y|^2)."""

    name = "sqrt"

    def profile(self, r):
        return np.sqrt(1.0 + r**2)

    def _coeffs(self, r):
        s = 1.0 + r**2
        return -s**-1.5, s**-0.5, 3.0 * s**-2.5, -15.0 * s**-3.5


class BilinearCost(CostModel):
    """c(x, y) = -<x, y>; the mixed Hessian is constantly -I."""

    name = "bilinear"
    analytic_order = 4

    def cost(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return -np.sum(x * y, axis=-1)

    def _grad_x(self, x, y):
        return -np.asarray(y, dtype=float).copy()

    def _grad_y(self, x, y):
        return -np.asarray(x, dtype=float).copy()

    def _mixed_hessian(self, x, y):
        x, single = _as_batch(x)
        eye = -np.eye(x.shape[1])
        h = np.broadcast_to(eye, (x.shape[0],) + eye.shape).copy()
        return h[0] if single else h

    def _tensor_xxy(self, x, y):
        n = self.dimension
        return np.zeros((n, n, n))

    _tensor_xyy = _tensor_xxy

    def _tensor_xxyy(self, x, y):
        n = self.dimension
        return np.zeros((n, n, n, n))


class SwappedCost(CostModel):
    """View of a base cost with the roles of x and y exchanged."""

    def __init__(self, base: CostModel):
        super().__init__(DomainPair(base.domain.Y, base.domain.X, base.domain.separation),
                         fd_steps=base.fd_steps, cond_cap=base.cond_cap)
        self.base = base
        self.name = base.name + "-swapped"
        self.analytic_order = base.analytic_order
        self.diagonal_singular = base.diagonal_singular

    def cost(self, x, y):
        return self.base.cost(y, x)

    def grad_x(self, x, y):
        return self.base.grad_y(y, x)

    def grad_y(self, x, y):
        return self.base.grad_x(y, x)

    def mixed_hessian(self, x, y):
        h = self.base.mixed_hessian(y, x)
        return np.swapaxes(h, -1, -2)

    def tensor_xxy(self, x, y):
        # d^3 c~ / dx_i dx_j dy_p = d^3 c / dy_i dy_j dx_p = c_{p,ij}
        return np.transpose(self.base.tensor_xyy(y, x), (1, 2, 0))

    def tensor_xyy(self, x, y):
        return np.transpose(self.base.tensor_xxy(y, x), (2, 0, 1))

    def tensor_xxyy(self, x, y):
        return np.transpose(self.base.tensor_xxyy(y, x), (2, 3, 0, 1))


# -- finite differences (also the independent oracle route) ---------------


def _check_stencil(model: CostModel, x, y, reach: float):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    # box stencils stay inside iff the inf-ball of the reach does
    for pt, dom in ((x, model.domain.X), (y, model.domain.Y)):
        if isinstance(dom, Box):
            if np.any(pt - reach < dom.lo - 1e-12) or np.any(pt + reach > dom.hi + 1e-12):
                raise StencilOutOfDomain(f"FD stencil of reach {reach} exits the domain")
        else:
            if dom.boundary_distance(pt) < reach * math.sqrt(len(pt)):
                raise StencilOutOfDomain(f"FD stencil of reach {reach} exits the domain")


def fd_grad_x(model, x, y, h, check=False):
    if check:
        _check_stencil(model, x, y, h)
    x = np.asarray(x, dtype=float)
    n = x.size
    g = np.zeros(n)
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        g[i] = (model.cost(x + e, y) - model.cost(x - e, y)) / (2 * h)
    return g


def fd_grad_y(model, x, y, h, check=False):
    if check:
        _check_stencil(model, x, y, h)
    y = np.asarray(y, dtype=float)
    n = y.size
    g = np.zeros(n)
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        g[j] = (model.cost(x, y + e) - model.cost(x, y - e)) / (2 * h)
    return g


def fd_mixed_hessian(model, x, y, h, check=False):
    if check:
        _check_stencil(model, x, y, h)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.size
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            ei = np.zeros(n); ei[i] = h
            ej = np.zeros(n); ej[j] = h
            out[i, j] = (model.cost(x + ei, y + ej) - model.cost(x + ei, y - ej)
                         - model.cost(x - ei, y + ej) + model.cost(x - ei, y - ej)) / (4 * h * h)
    return out


def _fd_hess_xx(model, y, h):
    def hess(x):
        n = x.size
        out = np.zeros((n, n))
        for i in range(n):
            for j in range(n):
                ei = np.zeros(n); ei[i] = h
                ej = np.zeros(n); ej[j] = h
                if i == j:
                    out[i, j] = (model.cost(x + ei, y) - 2 * model.cost(x, y)
                                 + model.cost(x - ei, y)) / (h * h)
                else:
                    out[i, j] = (model.cost(x + ei + ej, y) - model.cost(x + ei - ej, y)
                                 - model.cost(x - ei + ej, y) + model.cost(x - ei - ej, y)) / (4 * h * h)
        return out
    return hess


def _fd_hess_yy(model, x, h):
    def hess(y):
        n = y.size
        out = np.zeros((n, n))
        for s in range(n):
            for t in range(n):
                es = np.zeros(n); es[s] = h
                et = np.zeros(n); et[t] = h
                if s == t:
                    out[s, t] = (model.cost(x, y + es) - 2 * model.cost(x, y)
                                 + model.cost(x, y - es)) / (h * h)
                else:
                    out[s, t] = (model.cost(x, y + es + et) - model.cost(x, y + es - et)
                                 - model.cost(x, y - es + et) + model.cost(x, y - es - et)) / (4 * h * h)
        return out
    return hess


def fd_tensor_xxy(model, x, y, h, check=False):
    if check:
        _check_stencil(model, x, y, 2 * h)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.size
    out = np.zeros((n, n, n))
    for p in range(n):
        ep = np.zeros(n); ep[p] = h
        up = _fd_hess_xx(model, y + ep, h)(x)
        dn = _fd_hess_xx(model, y - ep, h)(x)
        out[:, :, p] = (up - dn) / (2 * h)
    return out


def fd_tensor_xyy(model, x, y, h, check=False):
    if check:
        _check_stencil(model, x, y, 2 * h)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.size
    out = np.zeros((n, n, n))
    for q in range(n):
        eq = np.zeros(n); eq[q] = h
        up = _fd_hess_yy(model, x + eq, h)(y)
        dn = _fd_hess_yy(model, x - eq, h)(y)
        out[q, :, :] = (up - dn) / (2 * h)
    return out


def fd_tensor_xxyy(model, x, y, hx, hy=None, check=False):
    """Nested central differences: the x-Hessian stencil of the y-Hessian."""
    hy = hx if hy is None else hy
    if check:
        _check_stencil(model, x, y, 2 * max(hx, hy))
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.size
    out = np.zeros((n, n, n, n))
    d2yy = _fd_hess_yy  # inner stencil in y at shifted x
    for i in range(n):
        for j in range(n):
            ei = np.zeros(n); ei[i] = hx
            ej = np.zeros(n); ej[j] = hx
            if i == j:
                block = (d2yy(model, x + ei, hy)(y) - 2 * d2yy(model, x, hy)(y)
                         + d2yy(model, x - ei, hy)(y)) / (hx * hx)
            else:
                block = (d2yy(model, x + ei + ej, hy)(y) - d2yy(model, x + ei - ej, hy)(y)
                         - d2yy(model, x - ei + ej, hy)(y) + d2yy(model, x - ei - ej, hy)(y)) / (4 * hx * hx)
            out[i, j, :, :] = block
    return out


# -- derivative bundles ----------------------------------------------------


@dataclass
class EvalBundle:
    c: float
    grad_x: np.ndarray
    grad_y: np.ndarray
    mixed_hessian: np.ndarray
    mixed_hessian_inverse: np.ndarray


@dataclass
class MTWBundle:
    c_ij_p: np.ndarray
    c_q_st: np.ndarray
    c_ij_st: np.ndarray
    c_inv: np.ndarray


def _invert_hessian(model: CostModel, m: np.ndarray) -> np.ndarray:
    cond = np.linalg.cond(m)
    if not np.isfinite(cond) or cond > model.cond_cap:
        raise DegenerateHessian(f"mixed Hessian condition number {cond:.3g} exceeds cap")
    return np.linalg.inv(m)


def eval_bundle(model: CostModel, x, y) -> EvalBundle:
    if not model.domain.contains(x, y, tol=1e-9 * model.domain.diameter):
        raise ValueError("(x, y) outside the declared domain pair")
    model.check_diagonal(x, y)
    m = model.mixed_hessian(x, y)
    return EvalBundle(
        c=float(model.cost(x, y)),
        grad_x=np.asarray(model.grad_x(x, y), dtype=float),
        grad_y=np.asarray(model.grad_y(x, y), dtype=float),
        mixed_hessian=m,
        mixed_hessian_inverse=_invert_hessian(model, m),
    )


def mtw_derivative_bundle(model: CostModel, x, y) -> MTWBundle:
    model.check_diagonal(x, y)
    if model.analytic_order < 4:
        # nested FD stencils must stay inside the pair
        _check_stencil(model, x, y, 2 * model.fd_step(4))
    m = model.mixed_hessian(x, y)
    return MTWBundle(
        c_ij_p=model.tensor_xxy(x, y),
        c_q_st=model.tensor_xyy(x, y),
        c_ij_st=model.tensor_xxyy(x, y),
        c_inv=_invert_hessian(model, m),
    )


# -- universal constants ----------------------------------------------------


@dataclass
class ConstantEstimates:
    """Sampled estimates of the universal constants of the cost geometry."""

    lip_c: float
    alpha: float
    beta: float
    L: float
    omega_table: list  # [(rho, omega)], non-decreasing in both columns

    def omega(self, rho: float) -> float:
        """Conservative (upper-step) read of the modulus table."""
        if rho <= 0:
            return 0.0
        for r, w in self.omega_table:
            if rho <= r:
                return w
        return self.omega_table[-1][1]

    def to_json(self) -> str:
        return json.dumps({
            "lip_c": self.lip_c, "alpha": self.alpha, "beta": self.beta,
            "L": self.L, "omega_table": [[r, w] for r, w in self.omega_table],
        }, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ConstantEstimates":
        d = json.loads(text)
        return cls(lip_c=d["lip_c"], alpha=d["alpha"], beta=d["beta"], L=d["L"],
                   omega_table=[(r, w) for r, w in d["omega_table"]])


def estimate_constants(model: CostModel, sample_budget: int = 400, seed: int = 0,
                       safety: float = 1.1) -> ConstantEstimates:
    """Sample-based estimates, inflated by the safety factor.

    Sampled suprema under-estimate true suprema; the safety factor compensates.
    Deterministic given the seed.
    """
    if sample_budget < 100:
        raise ValueError("sample_budget must be at least 100")
    rng = np.random.default_rng(seed)
    X, Y = model.domain.X, model.domain.Y
    xs = X.sample(rng, sample_budget)
    ys = Y.sample(rng, sample_budget)

    gx = model.grad_x(xs, ys)
    gy = model.grad_y(xs, ys)
    lip = float(np.max(np.linalg.norm(np.concatenate([gx, gy], axis=1), axis=1)))

    M = model.mixed_hessian(xs, ys)
    Minv = np.linalg.inv(M)
    nM = np.linalg.norm(M, axis=(1, 2))
    nMinv = np.linalg.norm(Minv, axis=(1, 2))
    alpha = max(float(np.max(nM)), 1.0 / float(np.min(nMinv)))
    beta = max(1.0 / float(np.min(nM)), float(np.max(nMinv)))

    # bi-Lipschitz constant of the dual-coordinate maps, both directions
    xs2 = X.sample(rng, sample_budget)
    ratios_x = (np.linalg.norm(model.grad_y(xs, ys) - model.grad_y(xs2, ys), axis=1)
                / np.linalg.norm(xs - xs2, axis=1))
    ys2 = Y.sample(rng, sample_budget)
    ratios_y = (np.linalg.norm(model.grad_x(xs, ys) - model.grad_x(xs, ys2), axis=1)
                / np.linalg.norm(ys - ys2, axis=1))
    ratios = np.concatenate([ratios_x, ratios_y])
    ratios = ratios[ratios > 0]
    L = max(float(np.max(ratios)), 1.0 / float(np.min(ratios)))

    # modulus of continuity of the mixed Hessian at geometric distance scales
    diam = model.domain.diameter
    scales = np.geomspace(1e-4 * diam, diam, 14)
    per_pair = max(8, sample_budget // len(scales))
    table = []
    running = 0.0
    for rho in scales:
        base_x = X.sample(rng, per_pair)
        base_y = Y.sample(rng, per_pair)
        dx = rng.normal(size=(per_pair, model.dimension))
        dy = rng.normal(size=(per_pair, model.dimension))
        nrm = np.sqrt(np.linalg.norm(dx, axis=1)**2 + np.linalg.norm(dy, axis=1)**2)
        scale = rho * rng.uniform(0.2, 1.0, per_pair) / nrm
        x1 = np.array([X.project(base_x[k] + scale[k] * dx[k]) for k in range(per_pair)])
        y1 = np.array([Y.project(base_y[k] + scale[k] * dy[k]) for k in range(per_pair)])
        m0 = model.mixed_hessian(base_x, base_y)
        m1 = model.mixed_hessian(x1, y1)
        w = float(np.max(np.linalg.norm(m1 - m0, axis=(1, 2))))
        running = max(running, w)
        table.append((float(rho), running * safety))

    return ConstantEstimates(lip_c=lip * safety, alpha=alpha * safety,
                             beta=beta * safety, L=L * safety, omega_table=table)


# -- construction -----------------------------------------------------------

_COST_CLASSES = {
    "quadratic": QuadraticCost,
    "bilinear": BilinearCost,
    "power": PowerCost,
    "log": LogCost,
    "sqrt": SqrtCost,
}

SEPARATED_COSTS = ("power", "log")


def default_domain(name: str, dimension: int = 2) -> DomainPair:
    if name in SEPARATED_COSTS:
        return DomainPair(Box(np.zeros(dimension), np.ones(dimension)),
                          Box(2.0 * np.ones(dimension), 3.0 * np.ones(dimension)))
    return DomainPair(Box(-np.ones(dimension), np.ones(dimension)),
                      Box(-np.ones(dimension), np.ones(dimension)))


def make_cost(name: str, domain: DomainPair = None, dimension: int = 2,
              p: float = 4.0, fd_steps=None, allow_diagonal: bool = False) -> CostModel:
    """Build a named cost on its domain pair.

    Power and log costs require a separated pair (their C^2 theory fails on
    the diagonal); pass ``allow_diagonal=True`` for evaluation-only workflows
    such as chord sweeps on overlapping truncations.
    """
    if name not in _COST_CLASSES:
        raise ValueError(f"unknown cost {name!r}; choose from {sorted(_COST_CLASSES)}")
    if domain is None:
        domain = default_domain(name, dimension)
    if name in SEPARATED_COSTS and domain.separation <= 0 and not allow_diagonal:
        raise ValueError(f"{name} cost requires a separated domain pair")
    kwargs = {"fd_steps": fd_steps}
    if name == "power":
        kwargs["p"] = p
    return _COST_CLASSES[name](domain, **kwargs)
