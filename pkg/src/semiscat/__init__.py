"""Semiclassical scattering by potentials with homogeneous asymptotics: forward expansion and layer-stripping inversion."""

from importlib import resources

from .config import ExperimentConfig
from .flow import certify_nontrapping, integrate_flow
from .lattice import generate_lattice
from .potential import AngularProfile, ConfigError, HomogeneousTerm, PotentialExpansion, load_potential
from .xray import Ray, assemble_xray_operator, xray_full_line, xray_half_line

__version__ = "0.1.0"


def example_path(name: str):
    """Path of a bundled example config: ``two_layer``, ``repulsive`` or ``well``."""
    return resources.files(__name__).joinpath("data", f"{name}.json")


__all__ = [
    "AngularProfile",
    "ConfigError",
    "ExperimentConfig",
    "HomogeneousTerm",
    "PotentialExpansion",
    "Ray",
    "assemble_xray_operator",
    "certify_nontrapping",
    "example_path",
    "generate_lattice",
    "integrate_flow",
    "load_potential",
    "xray_full_line",
    "xray_half_line",
]
