"""Compact domains (boxes and balls) and domain pairs.

Membership, boundary distance and Euclidean projection are exact for both
shapes.  Boundary distance is signed: positive inside, negative outside.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Box:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lo", np.asarray(self.lo, dtype=float))
        object.__setattr__(self, "hi", np.asarray(self.hi, dtype=float))
        if np.any(self.hi <= self.lo):
            raise ValueError("box must have non-empty interior")

    @property
    def dimension(self) -> int:
        return self.lo.size

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.hi - self.lo))

    def contains(self, p, tol: float = 0.0):
        p = np.asarray(p, dtype=float)
        return bool(np.all(p >= self.lo - tol) and np.all(p <= self.hi + tol))

    def project(self, p) -> np.ndarray:
        return np.clip(np.asarray(p, dtype=float), self.lo, self.hi)

    def boundary_distance(self, p) -> float:
        p = np.asarray(p, dtype=float)
        if self.contains(p):
            return float(min(np.min(p - self.lo), np.min(self.hi - p)))
        return -float(np.linalg.norm(p - self.project(p)))

    def sample(self, rng: np.random.Generator, size=None) -> np.ndarray:
        if size is None:
            return rng.uniform(self.lo, self.hi)
        return rng.uniform(self.lo, self.hi, size=(size, self.dimension))

    def inset(self, margin: float) -> "Box":
        return Box(self.lo + margin, self.hi - margin)

    def vertices(self) -> np.ndarray:
        n = self.dimension
        out = np.zeros((2**n, n))
        for k in range(2**n):
            for i in range(n):
                out[k, i] = self.hi[i] if (k >> i) & 1 else self.lo[i]
        return out


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if self.radius <= 0:
            raise ValueError("ball must have positive radius")

    @property
    def dimension(self) -> int:
        return self.center.size

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius

    def contains(self, p, tol: float = 0.0):
        return bool(np.linalg.norm(np.asarray(p, dtype=float) - self.center) <= self.radius + tol)

    def project(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        d = p - self.center
        r = np.linalg.norm(d)
        if r <= self.radius:
            return p
        return self.center + d * (self.radius / r)

    def boundary_distance(self, p) -> float:
        return float(self.radius - np.linalg.norm(np.asarray(p, dtype=float) - self.center))

    def sample(self, rng: np.random.Generator, size=None) -> np.ndarray:
        # rejection from the bounding box; acceptance >= 0.5 in 2D
        single = size is None
        need = 1 if single else size
        out = np.empty((need, self.dimension))
        got = 0
        while got < need:
            cand = rng.uniform(self.center - self.radius, self.center + self.radius,
                               size=(2 * (need - got) + 8, self.dimension))
            keep = cand[np.linalg.norm(cand - self.center, axis=1) <= self.radius]
            take = min(need - got, len(keep))
            out[got:got + take] = keep[:take]
            got += take
        return out[0] if single else out

    def inset(self, margin: float) -> "Ball":
        return Ball(self.center, self.radius - margin)


def _separation(a, b) -> float:
    """Exact Euclidean distance between two boxes/balls."""
    if isinstance(a, Box) and isinstance(b, Box):
        gap = np.maximum(0.0, np.maximum(a.lo - b.hi, b.lo - a.hi))
        return float(np.linalg.norm(gap))
    if isinstance(a, Ball) and isinstance(b, Ball):
        return max(0.0, float(np.linalg.norm(a.center - b.center)) - a.radius - b.radius)
    ball, box = (a, b) if isinstance(a, Ball) else (b, a)
    return max(0.0, float(np.linalg.norm(ball.center - box.project(ball.center))) - ball.radius)


@dataclass(frozen=True)
class DomainPair:
    """Compact source/target pair X, Y with their exact separation."""

    X: object
    Y: object
    separation: float = field(default=None)

    def __post_init__(self):
        if self.X.dimension != self.Y.dimension:
            raise ValueError("X and Y must share a dimension")
        if self.separation is None:
            object.__setattr__(self, "separation", _separation(self.X, self.Y))

    @property
    def dimension(self) -> int:
        return self.X.dimension

    @property
    def diameter(self) -> float:
        # Euclidean diameter of the product X x Y
        return float(np.hypot(self.X.diameter, self.Y.diameter))

    def contains(self, x, y, tol: float = 0.0):
        return self.X.contains(x, tol) and self.Y.contains(y, tol)
