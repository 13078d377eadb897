"""Variational integrators and discrete optimal control on spheres and Lie groups."""

from . import baselines, clag, config, dmech, dmoc, geom, models, shooting
from .errors import GeomechError

__version__ = "0.1.0"

__all__ = [
    "GeomechError",
    "baselines",
    "clag",
    "dmech",
    "dmoc",
    "geom",
    "models",
    "shooting",
    "__version__",
]
