"""Periodic-grid fields, Fourier multipliers and homogeneous Sobolev norms.

The plane is replaced by a periodic box of side ``L`` with the data kept
well inside it.  Arrays are indexed ``[component, ix, iy]`` with
``x = ix * L / n``; the spectral representation is the unnormalised
``scipy.fft.fft2`` over the last two axes.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy.fft as sfft

PHYSICAL = "physical"
SPECTRAL = "spectral"
COMPONENTS = ("u1", "u2", "u3")
DEFAULT_BOX_LENGTH = 2 * np.pi * 8


class ZeroModeError(ValueError):
    """Raised when a negative power of the Laplacian meets a nonzero mean."""


def fft2(a: np.ndarray) -> np.ndarray:
    return sfft.fft2(a, axes=(-2, -1))


def ifft2(a: np.ndarray) -> np.ndarray:
    return sfft.ifft2(a, axes=(-2, -1))


def fsum_rows(a: np.ndarray) -> np.ndarray:
    """Compensated sum over all but the leading axis."""
    a = np.asarray(a, dtype=float)
    flat = a.reshape(a.shape[0], -1)
    return np.array([math.fsum(row) for row in flat])


@dataclass(frozen=True)
class Grid:
    """An ``n x n`` periodic grid on the box ``[0, L)^2``."""

    n: int
    box_length: float = DEFAULT_BOX_LENGTH

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 8 or self.n % 2:
            raise ValueError(f"n must be an even integer >= 8, got {self.n}")
        if not self.box_length > 0:
            raise ValueError(f"box_length must be positive, got {self.box_length}")

    @property
    def dx(self) -> float:
        return self.box_length / self.n

    @cached_property
    def indices(self) -> np.ndarray:
        """Integer mode numbers in FFT order, ``{0..n/2-1, -n/2..-1}``."""
        return np.fft.fftfreq(self.n, 1.0 / self.n).astype(int)

    @cached_property
    def kx(self) -> np.ndarray:
        k = 2 * np.pi / self.box_length * self.indices
        return np.broadcast_to(k[:, None], (self.n, self.n))

    @cached_property
    def ky(self) -> np.ndarray:
        k = 2 * np.pi / self.box_length * self.indices
        return np.broadcast_to(k[None, :], (self.n, self.n))

    @cached_property
    def kmag(self) -> np.ndarray:
        return np.hypot(self.kx, self.ky)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """Two-thirds rule: keep modes with ``|k_x|, |k_y| < n/3``."""
        keep = np.abs(self.indices) < self.n / 3
        return keep[:, None] & keep[None, :]

    @cached_property
    def kmax_retained(self) -> float:
        """Largest ``|xi|`` among modes kept by the dealiasing mask."""
        return float(self.kmag[self.dealias_mask].max())

    @cached_property
    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        x = np.arange(self.n) * self.dx
        return np.meshgrid(x, x, indexing="ij")

    def derivative_multiplier(self, axis: str) -> np.ndarray:
        """``i xi_axis`` with the Nyquist row/column zeroed."""
        if axis == "x":
            k, idx = self.kx, self.indices[:, None]
        elif axis == "y":
            k, idx = self.ky, self.indices[None, :]
        else:
            raise ValueError(f"axis must be 'x' or 'y', got {axis!r}")
        return np.where(idx == -self.n // 2, 0.0, 1j * k)

    def power_multiplier(self, s: float) -> np.ndarray:
        """``|xi|^s`` with the zero mode sent to 0 unless ``s == 0``."""
        if s == 0:
            return np.ones((self.n, self.n))
        k = self.kmag.copy()
        k[0, 0] = 1.0
        m = k ** s
        m[0, 0] = 0.0
        return m

    def norm_weight(self) -> float:
        """Parseval factor turning ``sum |F_k|^2`` into the box L2 integral."""
        return self.box_length**2 / float(self.n) ** 4


@dataclass(frozen=True, eq=False)
class VectorField:
    """Three scalar fields on a common grid, physical or spectral."""

    grid: Grid
    data: np.ndarray
    representation: str = PHYSICAL

    def __post_init__(self):
        data = np.asarray(self.data)
        shape = (3, self.grid.n, self.grid.n)
        if data.shape != shape:
            raise ValueError(f"expected data of shape {shape}, got {data.shape}")
        if self.representation == PHYSICAL:
            if np.iscomplexobj(data):
                if np.abs(data.imag).max(initial=0.0) > 1e-10 * max(1.0, np.abs(data).max()):
                    raise ValueError("physical representation must be real-valued")
                data = data.real
            data = data.astype(float, copy=True)
        elif self.representation == SPECTRAL:
            data = data.astype(complex, copy=True)
        else:
            raise ValueError(f"unknown representation {self.representation!r}")
        data.flags.writeable = False
        object.__setattr__(self, "data", data)

    @classmethod
    def zeros(cls, grid: Grid) -> "VectorField":
        return cls(grid, np.zeros((3, grid.n, grid.n)))

    @classmethod
    def from_function(cls, grid: Grid, func: Callable) -> "VectorField":
        """Sample ``func(x, y) -> (f1, f2, f3)`` on the grid."""
        x, y = grid.coords
        comps = func(x, y)
        return cls(grid, np.stack([np.broadcast_to(c, x.shape) for c in comps]))

    @classmethod
    def from_spectral(cls, grid: Grid, hat: np.ndarray) -> "VectorField":
        return cls(grid, hat, SPECTRAL)

    @property
    def physical(self) -> np.ndarray:
        if self.representation == PHYSICAL:
            return self.data
        return ifft2(self.data).real

    @property
    def spectral(self) -> np.ndarray:
        if self.representation == SPECTRAL:
            return self.data
        return fft2(self.data)

    def to_physical(self) -> "VectorField":
        return self if self.representation == PHYSICAL else VectorField(self.grid, self.physical)

    def to_spectral(self) -> "VectorField":
        return self if self.representation == SPECTRAL else VectorField(self.grid, self.spectral, SPECTRAL)

    def _like(self, hat: np.ndarray) -> "VectorField":
        out = VectorField(self.grid, hat, SPECTRAL)
        return out if self.representation == SPECTRAL else out.to_physical()

    def apply_multiplier(self, m: np.ndarray) -> "VectorField":
        return self._like(self.spectral * m)

    def mean(self) -> np.ndarray:
        """Box average of each component."""
        return self.spectral[:, 0, 0].real / self.grid.n**2

    def _check(self, other: "VectorField"):
        if other.grid != self.grid:
            raise ValueError("fields live on different grids")

    def __add__(self, other: "VectorField") -> "VectorField":
        self._check(other)
        if self.representation == other.representation:
            return VectorField(self.grid, self.data + other.data, self.representation)
        return self._like(self.spectral + other.spectral)

    def __sub__(self, other: "VectorField") -> "VectorField":
        return self + (-1.0) * other

    def __mul__(self, c: float) -> "VectorField":
        return VectorField(self.grid, self.data * c, self.representation)

    __rmul__ = __mul__

    def __neg__(self) -> "VectorField":
        return self * -1.0


def fractional_laplacian(f: VectorField, s: float) -> VectorField:
    """Multiply every mode by ``|xi|^s``.

    The zero mode goes to zero for ``s != 0``.  For ``s < 0`` the field
    must be mean-free, otherwise :class:`ZeroModeError` is raised.
    """
    if s < 0:
        hat = f.spectral
        scale = max(1.0, float(np.abs(hat).max())) * f.grid.n**2
        if np.abs(hat[:, 0, 0]).max() > 1e-12 * scale:
            raise ZeroModeError("non-invertible zero mode: negative power of a field with nonzero mean")
    return f.apply_multiplier(f.grid.power_multiplier(s))


def sobolev_norm_sq_hat(grid: Grid, hat: np.ndarray, s: float) -> np.ndarray:
    """Squared Hdot^s norms of stacked spectral fields.

    ``hat`` has shape ``(..., n, n)``; all leading axes but the first are
    summed (compensated).  Returns one value per leading index.
    """
    w = grid.power_multiplier(2 * s) * grid.norm_weight()
    dens = np.abs(hat) ** 2 * w
    if dens.ndim == 2:
        dens = dens[None]
    return fsum_rows(dens)


def sobolev_norm(f: VectorField, s: float) -> float:
    """Homogeneous ``Hdot^s`` norm over the box, ``(sum |xi|^{2s} |f_hat|^2)^{1/2}``."""
    if s < 0:
        fractional_laplacian(f, s)  # zero-mode guard
    return float(np.sqrt(sobolev_norm_sq_hat(f.grid, f.spectral[None], s)[0]))


def l2_norm_physical(f: VectorField) -> float:
    """L2 norm by the physical-space rectangle rule (exact for trig polynomials)."""
    v = f.physical
    return math.sqrt(math.fsum((v * v).ravel()) * f.grid.dx**2)


def cos_multiplier(grid: Grid, t: float) -> np.ndarray:
    return np.cos(t * grid.kmag)


def sinc_multiplier(grid: Grid, t: float) -> np.ndarray:
    """``sin(t|xi|)/|xi|`` with the limit ``t`` at the zero mode."""
    k = grid.kmag
    safe = np.where(k == 0, 1.0, k)
    return np.where(k == 0, t, np.sin(t * k) / safe)


def half_wave_cos(f: VectorField, t: float) -> VectorField:
    """Apply ``cos(t sqrt(-Delta))``."""
    return f.apply_multiplier(cos_multiplier(f.grid, t))


def half_wave_sinc(f: VectorField, t: float) -> VectorField:
    """Apply ``sin(t sqrt(-Delta)) / sqrt(-Delta)``; the mean grows like ``t``."""
    return f.apply_multiplier(sinc_multiplier(f.grid, t))


def partial_derivative(f: VectorField, axis: str) -> VectorField:
    """Spectral derivative along ``'x'`` or ``'y'``."""
    return f.apply_multiplier(f.grid.derivative_multiplier(axis))


def dealias(f: VectorField) -> VectorField:
    return f.apply_multiplier(f.grid.dealias_mask)


@dataclass(frozen=True)
class CauchyData:
    """Mean-free initial data ``(u0, u1)`` plus the means split off at ingestion.

    ``size_bound`` is the ``K`` with ``|u0|_{3/2} + |u1|_{1/2} <= K``.
    """

    u0: VectorField
    u1: VectorField
    size_bound: float
    mean0: np.ndarray = field(default_factory=lambda: np.zeros(3))
    mean1: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        if self.u0.grid != self.u1.grid:
            raise ValueError("u0 and u1 must share a grid")
        for f in (self.u0, self.u1):
            hat = f.spectral
            if np.abs(hat[:, 0, 0]).max() > 1e-12 * max(1.0, np.abs(hat).max()):
                raise ValueError("CauchyData fields must be mean-free; use CauchyData.ingest")
        if self.size_bound < 0:
            raise ValueError("size_bound must be nonnegative")
        if self.norm() > self.size_bound * (1 + 1e-12) + 1e-300:
            raise ValueError(f"data norm {self.norm():.6g} exceeds size bound {self.size_bound:.6g}")

    @classmethod
    def ingest(cls, u0: VectorField, u1: VectorField, size_bound: float | None = None) -> "CauchyData":
        """Project both fields to mean zero, keeping the removed means."""
        m0, m1 = u0.mean(), u1.mean()
        h0, h1 = u0.spectral.copy(), u1.spectral.copy()
        h0[:, 0, 0] = 0
        h1[:, 0, 0] = 0
        f0, f1 = VectorField.from_spectral(u0.grid, h0), VectorField.from_spectral(u1.grid, h1)
        norm = sobolev_norm(f0, 1.5) + sobolev_norm(f1, 0.5)
        return cls(f0, f1, norm if size_bound is None else size_bound, m0, m1)

    @classmethod
    def zeros(cls, grid: Grid) -> "CauchyData":
        z = VectorField.from_spectral(grid, np.zeros((3, grid.n, grid.n), complex))
        return cls(z, z, 0.0)

    @property
    def grid(self) -> Grid:
        return self.u0.grid

    def norm(self) -> float:
        return sobolev_norm(self.u0, 1.5) + sobolev_norm(self.u1, 0.5)

    def spectral_with_means(self) -> tuple[np.ndarray, np.ndarray]:
        """Spectral ``(u0, u1)`` with the stored means put back in the zero mode."""
        n2 = self.grid.n**2
        h0, h1 = self.u0.spectral.copy(), self.u1.spectral.copy()
        h0[:, 0, 0] = np.asarray(self.mean0) * n2
        h1[:, 0, 0] = np.asarray(self.mean1) * n2
        return h0, h1

    def __add__(self, other: "CauchyData") -> "CauchyData":
        u0, u1 = self.u0 + other.u0, self.u1 + other.u1
        bound = sobolev_norm(u0, 1.5) + sobolev_norm(u1, 0.5)
        return CauchyData(u0, u1, max(bound, self.size_bound), self.mean0 + other.mean0, self.mean1 + other.mean1)

    def scaled(self, c: float) -> "CauchyData":
        return CauchyData(self.u0 * c, self.u1 * c, abs(c) * self.size_bound, self.mean0 * c, self.mean1 * c)


# -- serialization -----------------------------------------------------------

def save_field(f: VectorField, path: str | Path) -> tuple[Path, Path]:
    """Write ``<path>.bin`` (row-major float64) and a ``<path>.json`` sidecar.

    Spectral fields are stored with a trailing ``(re, im)`` axis.
    """
    path = Path(path)
    bin_path, meta_path = path.with_suffix(".bin"), path.with_suffix(".json")
    if f.representation == SPECTRAL:
        arr = np.stack([f.data.real, f.data.imag], axis=-1)
    else:
        arr = f.data
    np.ascontiguousarray(arr, dtype="<f8").tofile(bin_path)
    meta = {
        "n": f.grid.n,
        "box_length": f.grid.box_length,
        "representation": f.representation,
        "component_order": list(COMPONENTS),
        "shape": list(arr.shape),
        "dtype": "float64",
        "byte_order": "little",
        "layout": "row-major [component, ix, iy" + (", re/im]" if f.representation == SPECTRAL else "]"),
    }
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True))
    return bin_path, meta_path


def load_field(path: str | Path) -> VectorField:
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    arr = np.fromfile(path.with_suffix(".bin"), dtype="<f8").reshape(meta["shape"])
    grid = Grid(meta["n"], meta["box_length"])
    if meta["representation"] == SPECTRAL:
        return VectorField(grid, arr[..., 0] + 1j * arr[..., 1], SPECTRAL)
    return VectorField(grid, arr)


def field_to_csv(f: VectorField, path: str | Path, max_n: int = 64) -> Path:
    """CSV with columns ``x, y, u1, u2, u3``; small grids only."""
    if f.grid.n > max_n:
        raise ValueError(f"CSV export limited to n <= {max_n}")
    x, y = f.grid.coords
    v = f.physical
    table = np.column_stack([x.ravel(), y.ravel()] + [v[i].ravel() for i in range(3)])
    path = Path(path)
    np.savetxt(path, table, delimiter=",", header="x,y,u1,u2,u3", comments="", fmt="%.17g")
    return path


# -- smooth random data ------------------------------------------------------

def gaussian_bumps(grid: Grid, rng: np.random.Generator, n_bumps: int = 3,
                   widths: Sequence[float] = (2.5, 3.0), center_radius: float = 3.0) -> VectorField:
    """Sum of isotropic Gaussian bumps near the box centre, random per component.

    Defaults keep the boundary tail below 1e-10 for the default box and the
    spectrum resolved at ``n = 64``.
    """
    x, y = grid.coords
    c0 = grid.box_length / 2
    out = np.zeros((3, grid.n, grid.n))
    for comp in range(3):
        for _ in range(n_bumps):
            r = center_radius * np.sqrt(rng.uniform())
            phi = rng.uniform(0, 2 * np.pi)
            cx, cy = c0 + r * np.cos(phi), c0 + r * np.sin(phi)
            w = rng.uniform(*widths)
            amp = rng.normal()
            out[comp] += amp * np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2 * w**2))
    return VectorField(grid, out)


def random_cauchy_data(grid: Grid, rng: np.random.Generator, size: float, split: float = 0.5,
                       **bump_kwargs) -> CauchyData:
    """Mean-free, dealiased bump data with ``|u0|_{3/2} = split*size``, ``|u1|_{1/2} = (1-split)*size``."""
    fields = []
    for target, s in ((split * size, 1.5), ((1 - split) * size, 0.5)):
        f = dealias(gaussian_bumps(grid, rng, **bump_kwargs)).to_spectral()
        hat = f.spectral.copy()
        hat[:, 0, 0] = 0
        f = VectorField.from_spectral(grid, hat)
        nrm = sobolev_norm(f, s)
        fields.append(f * (target / nrm) if nrm > 0 else f)
    return CauchyData(fields[0], fields[1], size * (1 + 1e-12))
