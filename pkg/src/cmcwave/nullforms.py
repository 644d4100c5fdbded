"""Classical null forms and the CMC nonlinearity ``2 u_x ^ u_y``.

Products are evaluated pseudo-spectrally: inputs are truncated with the
two-thirds rule, derivatives are taken in Fourier space, the product is
formed on the grid and the result is truncated again.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import Grid, VectorField, fft2, ifft2

_AXES = {1: "x", 2: "y"}


@dataclass(frozen=True)
class NullFormKind:
    """``Q00``, ``Qij`` (i != j) or ``Q0j`` with indices in {1, 2}."""

    tag: str
    i: int | None = None
    j: int | None = None

    def __post_init__(self):
        if self.tag == "Q00":
            return
        if self.tag == "Qij":
            if self.i not in (1, 2) or self.j not in (1, 2):
                raise ValueError("Qij indices must be in {1, 2}")
            if self.i == self.j:
                raise ValueError("Qij requires i != j")
        elif self.tag == "Q0j":
            if self.j not in (1, 2):
                raise ValueError("Q0j index must be in {1, 2}")
        else:
            raise ValueError(f"unknown null form {self.tag!r}")

    @classmethod
    def parse(cls, name: str) -> "NullFormKind":
        """``'Q00'``, ``'Q12'``, ``'Q21'``, ``'Q01'``, ``'Q02'``."""
        if len(name) != 3 or name[0] != "Q" or not name[1:].isdigit():
            raise ValueError(f"cannot parse null form {name!r}")
        a, b = int(name[1]), int(name[2])
        if a == 0 and b == 0:
            return cls("Q00")
        if a == 0:
            return cls("Q0j", j=b)
        return cls("Qij", i=a, j=b)

    @property
    def needs_time_derivative(self) -> bool:
        return self.tag in ("Q00", "Q0j")


def _truncated_hat(grid: Grid, f: np.ndarray) -> np.ndarray:
    return fft2(f) * grid.dealias_mask


def _grid_derivative(grid: Grid, hat: np.ndarray, axis: str) -> np.ndarray:
    return ifft2(hat * grid.derivative_multiplier(axis)).real


def null_form(kind: NullFormKind | str, grid: Grid, u: np.ndarray, v: np.ndarray,
              u_t: np.ndarray | None = None, v_t: np.ndarray | None = None) -> np.ndarray:
    """Evaluate a null form of two real scalar fields on ``grid``.

    ``u``, ``v`` (and ``u_t``, ``v_t`` for Q00/Q0j) are physical arrays of
    shape ``(n, n)``.  Returns the dealiased physical result.
    """
    if isinstance(kind, str):
        kind = NullFormKind.parse(kind)
    shape = (grid.n, grid.n)
    for name, a in (("u", u), ("v", v), ("u_t", u_t), ("v_t", v_t)):
        if a is not None and np.shape(a) != shape:
            raise ValueError(f"{name} has shape {np.shape(a)}, grid expects {shape}")
    if kind.needs_time_derivative and (u_t is None or v_t is None):
        raise ValueError(f"{kind.tag} needs u_t and v_t")

    uh, vh = _truncated_hat(grid, u), _truncated_hat(grid, v)
    if kind.tag == "Qij":
        ai, aj = _AXES[kind.i], _AXES[kind.j]
        out = (_grid_derivative(grid, uh, ai) * _grid_derivative(grid, vh, aj)
               - _grid_derivative(grid, uh, aj) * _grid_derivative(grid, vh, ai))
    else:
        ut = ifft2(_truncated_hat(grid, u_t)).real
        vt = ifft2(_truncated_hat(grid, v_t)).real
        if kind.tag == "Q00":
            out = -ut * vt
            for ax in ("x", "y"):
                out = out + _grid_derivative(grid, uh, ax) * _grid_derivative(grid, vh, ax)
        else:
            aj = _AXES[kind.j]
            out = ut * _grid_derivative(grid, vh, aj) - _grid_derivative(grid, uh, aj) * vt
    return ifft2(fft2(out) * grid.dealias_mask).real


def wedge_hat(grid: Grid, hat: np.ndarray) -> np.ndarray:
    """Spectral ``2 u_x ^ u_y`` for stacked spectral fields of shape ``(..., 3, n, n)``.

    This is the hot path used by the solvers; it works on any number of
    leading (time) axes at once.
    """
    h = hat * grid.dealias_mask
    ux = ifft2(h * grid.derivative_multiplier("x")).real
    uy = ifft2(h * grid.derivative_multiplier("y")).real
    w = 2.0 * np.cross(ux, uy, axis=-3)
    return fft2(w) * grid.dealias_mask


def cmc_nonlinearity(u: VectorField) -> VectorField:
    """``2 u_x ^ u_y`` via the cross product, dealiased; same representation as ``u``."""
    out = VectorField.from_spectral(u.grid, wedge_hat(u.grid, u.spectral))
    return out if u.representation == "spectral" else out.to_physical()


def cmc_nonlinearity_q12(u: VectorField) -> VectorField:
    """Same quantity through ``(2Q12(u2,u3), 2Q12(u3,u1), 2Q12(u1,u2))``."""
    p = u.physical
    g = u.grid
    comps = [2 * null_form("Q12", g, p[b], p[c]) for b, c in ((1, 2), (2, 0), (0, 1))]
    out = VectorField(g, np.stack(comps))
    return out if u.representation == "physical" else out.to_spectral()
