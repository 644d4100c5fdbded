"""Numerical laboratory for the wave CMC equation ``(-d_t^2 + Delta) u = 2 u_x ^ u_y``.

Submodules: ``spectral`` (grids, fields, Sobolev norms), ``nullforms``,
``duhamel`` (Picard solver and oracle), ``bilinear`` (Q12 kernel and
constant), ``selfsimilar`` (self-similar profiles) and ``harness`` (CLI runs).
"""
__version__ = "0.1.0"

from .spectral import CauchyData, Grid, VectorField, sobolev_norm  # noqa: E402
from .nullforms import cmc_nonlinearity, null_form  # noqa: E402
from .duhamel import make_schedule, picard_solve, leapfrog_oracle  # noqa: E402

__all__ = ["CauchyData", "Grid", "VectorField", "sobolev_norm", "cmc_nonlinearity", "null_form",
           "make_schedule", "picard_solve", "leapfrog_oracle", "__version__"]
