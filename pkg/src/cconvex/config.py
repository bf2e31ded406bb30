"""Flat dotted-key run configuration.

The format is diff-friendly lines ``key = value`` with ``#`` comments; keys
are validated against a fixed schema and unknown keys are rejected by name.
A fully-defaulted configuration is valid for every built-in cost.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .costs import SEPARATED_COSTS, default_domain, make_cost
from .domains import Box, DomainPair
from .errors import ConfigError

_SCHEMA = {
    "cost.name": str,
    "cost.p": float,
    "domain.dimension": int,
    "domain.x_min": float,
    "domain.x_max": float,
    "domain.y_min": float,
    "domain.y_max": float,
    "lattice.x_nodes": int,
    "lattice.y_nodes": int,
    "budget.mtw": int,
    "budget.loeper": int,
    "budget.qqconv": int,
    "budget.chord_probe": int,
    "budget.alt_pairs": int,
    "budget.counterexample": int,
    "budget.constants": int,
    "budget.verify": int,
    "seed": int,
    "budget_scale": float,
    "output_dir": str,
    "t_grid_size": int,
    "tolerance.certify": float,
    "tolerance.alt": float,
    "tolerance.envelope": float,
    "tolerance.subdiff": float,
    "chord.x0": str,
    "chord.x1": str,
    "chord.u0": float,
    "chord.u1": float,
    "input.grid": str,
    "fd_step.order1": float,
    "fd_step.order2": float,
    "fd_step.order3": float,
    "fd_step.order4": float,
}

_DEFAULTS = {
    "cost.name": "quadratic",
    "cost.p": 4.0,
    "domain.dimension": 2,
    "lattice.x_nodes": 64,
    "lattice.y_nodes": 64,
    "budget.mtw": 1000,
    "budget.loeper": 2000,
    "budget.qqconv": 1000,
    "budget.chord_probe": 8,
    "budget.alt_pairs": 60,
    "budget.counterexample": 800,
    "budget.constants": 300,
    "budget.verify": 100,
    "seed": 0,
    "budget_scale": 1.0,
    "output_dir": "out",
    "t_grid_size": 17,
}


def parse_config_text(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _SCHEMA:
            raise ConfigError(f"unknown configuration key {key!r} (line {lineno})")
        caster = _SCHEMA[key]
        try:
            out[key] = caster(value) if caster is not str else value
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {value!r}") from exc
    return out


@dataclass
class RunConfig:
    values: dict = field(default_factory=dict)

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        return cls(values=parse_config_text(text))

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_text(fh.read())

    def get(self, key: str, default=None):
        if key in self.values:
            return self.values[key]
        if key in _DEFAULTS:
            return _DEFAULTS[key]
        return default

    def override(self, key: str, value):
        if key not in _SCHEMA:
            raise ConfigError(f"unknown configuration key {key!r}")
        self.values[key] = _SCHEMA[key](value) if _SCHEMA[key] is not str else value

    def budget(self, name: str) -> int:
        scale = float(self.get("budget_scale"))
        return max(1, int(round(self.get(f"budget.{name}") * scale)))

    def echo(self) -> dict:
        merged = dict(_DEFAULTS)
        merged.update(self.values)
        # the output location is not an analysis parameter; keeping it out of
        # the echo keeps reports byte-identical across working directories
        merged.pop("output_dir", None)
        return {k: merged[k] for k in sorted(merged)}

    def domain_pair(self) -> DomainPair:
        name = self.get("cost.name")
        dim = int(self.get("domain.dimension"))
        explicit = [k for k in ("domain.x_min", "domain.x_max", "domain.y_min",
                                "domain.y_max") if k in self.values]
        if not explicit:
            return default_domain(name, dim)
        if len(explicit) != 4:
            raise ConfigError("domain bounds must be given all together or not at all")
        xb = Box(np.full(dim, self.get("domain.x_min")), np.full(dim, self.get("domain.x_max")))
        yb = Box(np.full(dim, self.get("domain.y_min")), np.full(dim, self.get("domain.y_max")))
        return DomainPair(xb, yb)

    def build_model(self):
        name = self.get("cost.name")
        if name in SEPARATED_COSTS:
            pair = self.domain_pair()
            if pair.separation <= 0:
                raise ConfigError(f"{name} cost requires separated domains")
        fd_steps = {}
        for order in (1, 2, 3, 4):
            value = self.get(f"fd_step.order{order}")
            if value is not None:
                fd_steps[order] = float(value)
        return make_cost(name, self.domain_pair(), dimension=int(self.get("domain.dimension")),
                         p=float(self.get("cost.p")), fd_steps=fd_steps or None)

    def lattice_shape(self):
        dim = int(self.get("domain.dimension"))
        n = int(self.get("lattice.x_nodes"))
        return (n,) if dim == 1 else (n,) * dim

    def y_lattice_shape(self):
        dim = int(self.get("domain.dimension"))
        n = int(self.get("lattice.y_nodes"))
        return (n,) if dim == 1 else (n,) * dim

    def point(self, key: str, dim: int) -> np.ndarray:
        raw = self.get(key)
        if raw is None:
            raise ConfigError(f"missing required key {key!r}")
        try:
            vals = [float(v) for v in str(raw).replace(",", " ").split()]
        except ValueError as exc:
            raise ConfigError(f"bad point value for {key!r}: {raw!r}") from exc
        if len(vals) != dim:
            raise ConfigError(f"{key!r} must have {dim} coordinates")
        return np.array(vals)
