"""Run configuration: file loading and the experiment parameters shared by modules."""

from __future__ import annotations

import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .potential import ConfigError

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

SCHEMA_VERSION = 1


def read_config(path) -> dict:
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".toml":
        return tomllib.loads(text)
    return json.loads(text)


@dataclass
class GridConfig:
    """Reference grid for test functions: cube of side ``box`` with ``npts`` points per axis."""

    box: float = 3.0
    npts: int = 48


@dataclass
class QuadratureConfig:
    n_cheb: int = 48  # Chebyshev nodes per line for symbol integrals
    n_pair: int = 16  # Gauss-Legendre nodes per axis for pairings
    line_chunk: int = 64


@dataclass
class ExperimentConfig:
    lam: float = 1.0
    chi_halfwidth: float | None = 0.2  # None: chi == 1 on (0, inf)
    chi_shoulder: float = 0.1
    delta: float = 2.0
    epsilon: float | None = None  # default (1 + delta) / 2
    n: int = 3
    grid: GridConfig = field(default_factory=GridConfig)
    quad: QuadratureConfig = field(default_factory=QuadratureConfig)

    def __post_init__(self):
        if isinstance(self.grid, dict):
            self.grid = GridConfig(**self.grid)
        if isinstance(self.quad, dict):
            self.quad = QuadratureConfig(**self.quad)
        if self.epsilon is None:
            self.epsilon = 0.5 * (1.0 + self.delta)
        if not self.lam > 0:
            raise ConfigError("lambda must be positive")
        if self.n != 3:
            raise ConfigError("only dimension n = 3 is supported")
        if not 0 < self.epsilon < 1 + self.delta:
            raise ConfigError("epsilon must satisfy 0 < epsilon < 1 + delta")
        if self.chi_halfwidth is not None:
            if self.chi_halfwidth <= 0 or self.chi_shoulder < 0:
                raise ConfigError("chi window half-width must be positive and shoulder non-negative")
            if self.lam - self.chi_halfwidth - self.chi_shoulder <= 0:
                raise ConfigError("chi must be supported in (0, inf): lambda - halfwidth - shoulder must be positive")

    def check_delta(self, rho1: float) -> None:
        if not self.delta > 1.0 / (rho1 - 1.0):
            raise ConfigError(
                f"delta must exceed 1/(rho_1 - 1) = {1.0 / (rho1 - 1.0):g}, got delta = {self.delta:g}"
            )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        return cls(**d)
