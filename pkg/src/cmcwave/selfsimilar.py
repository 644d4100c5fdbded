"""Self-similar profiles ``u(x, y, t) = v(x/t, y/t)`` inside the light cone.

With ``rho = |(x, y)|/t`` and polar angle ``theta`` the equation for ``v``
reads

    rho sqrt(1-rho^2) d_rho(rho sqrt(1-rho^2) v_rho) + v_thth = 2 rho v_rho ^ v_th,

and the substitution ``sigma = rho / (1 + sqrt(1 - rho^2))`` turns its
left side into ``sigma^2`` times the flat polar Laplacian.

Profiles live on a tensor grid: Chebyshev-Lobatto nodes in the radial
variable (``rho`` or ``sigma``) and equispaced angles with spectral
differentiation.  Arrays are laid out ``[component, radial, angle]``.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.interpolate import BarycentricInterpolator
from scipy.sparse.linalg import LinearOperator, cg

from .streams import stream

log = logging.getLogger(__name__)

PARAMETRIZATIONS = ("rho", "sigma")
MIN_RADIAL_NODES = 16


def _check_unit(x, name):
    x = np.asarray(x, float)
    if np.any(x < 0) or np.any(x > 1) or not np.all(np.isfinite(x)):
        raise ValueError(f"{name} must lie in [0, 1]")
    return x


def sigma_of_rho(rho):
    rho = _check_unit(rho, "rho")
    return rho / (1 + np.sqrt((1 - rho) * (1 + rho)))


def rho_of_sigma(sigma):
    sigma = _check_unit(sigma, "sigma")
    return 2 * sigma / (1 + sigma * sigma)


def chebyshev(n: int, a: float = 0.0, b: float = 1.0):
    """Ascending Chebyshev-Lobatto nodes on ``[a, b]`` and the differentiation matrix."""
    k = np.arange(n)
    x = np.cos(np.pi * k / (n - 1))
    c = np.where((k == 0) | (k == n - 1), 2.0, 1.0) * (-1.0) ** k
    dx = x[:, None] - x[None, :]
    D = np.outer(c, 1 / c) / (dx + np.eye(n))
    D -= np.diag(D.sum(axis=1))
    # x runs from 1 down to -1; r = a + (b - a)(1 - x)/2 ascends
    r = a + (b - a) * (1 - x) / 2
    return r, D * (-2.0 / (b - a))


def clenshaw_curtis(n: int, a: float = 0.0, b: float = 1.0) -> np.ndarray:
    """Clenshaw-Curtis weights for the nodes returned by :func:`chebyshev`."""
    N = n - 1
    theta = np.pi * np.arange(n) / N
    w = np.zeros(n)
    v = np.ones(N - 1)
    inner = slice(1, N)
    if N % 2 == 0:
        w[0] = w[N] = 1.0 / (N * N - 1)
        for k in range(1, N // 2):
            v -= 2 * np.cos(2 * k * theta[inner]) / (4 * k * k - 1)
        v -= np.cos(N * theta[inner]) / (N * N - 1)
    else:
        w[0] = w[N] = 1.0 / (N * N)
        for k in range(1, (N - 1) // 2 + 1):
            v -= 2 * np.cos(2 * k * theta[inner]) / (4 * k * k - 1)
    w[inner] = 2 * v / N
    return w * (b - a) / 2


@dataclass(frozen=True)
class PolarGrid:
    """``nr`` Chebyshev-Lobatto radial nodes on ``[r_min, r_max]`` times ``ntheta`` angles.

    The radial variable is ``rho`` or ``sigma`` according to ``parametrization``.
    """

    nr: int
    ntheta: int
    r_min: float = 0.0
    r_max: float = 1.0
    parametrization: str = "rho"

    def __post_init__(self):
        if self.parametrization not in PARAMETRIZATIONS:
            raise ValueError(f"parametrization must be one of {PARAMETRIZATIONS}")
        if self.nr < 4 or self.ntheta < 4 or self.ntheta % 2:
            raise ValueError("need nr >= 4 and an even ntheta >= 4")
        if not 0.0 <= self.r_min < self.r_max <= 1.0:
            raise ValueError("need 0 <= r_min < r_max <= 1")

    @cached_property
    def _cheb(self):
        return chebyshev(self.nr, self.r_min, self.r_max)

    @property
    def r(self) -> np.ndarray:
        return self._cheb[0]

    @property
    def D(self) -> np.ndarray:
        return self._cheb[1]

    @cached_property
    def D2(self) -> np.ndarray:
        return self.D @ self.D

    @cached_property
    def weights(self) -> np.ndarray:
        return clenshaw_curtis(self.nr, self.r_min, self.r_max)

    @cached_property
    def theta(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.ntheta) / self.ntheta

    @property
    def dtheta(self) -> float:
        return 2 * np.pi / self.ntheta

    @cached_property
    def modes(self) -> np.ndarray:
        return np.arange(self.ntheta // 2 + 1)

    @cached_property
    def _d1(self) -> np.ndarray:
        m = 1j * self.modes.astype(float)
        m[-1] = 0.0  # Nyquist mode of a first derivative
        return m

    @cached_property
    def rho(self) -> np.ndarray:
        return self.r if self.parametrization == "rho" else rho_of_sigma(self.r)

    @cached_property
    def sigma(self) -> np.ndarray:
        return self.r if self.parametrization == "sigma" else sigma_of_rho(self.r)

    @property
    def has_pole(self) -> bool:
        return self.r_min == 0.0

    @property
    def reaches_boundary(self) -> bool:
        return self.r_max == 1.0

    def with_parametrization(self, target: str) -> "PolarGrid":
        if target == self.parametrization:
            return self
        conv = sigma_of_rho if target == "sigma" else rho_of_sigma
        return PolarGrid(self.nr, self.ntheta, float(conv(self.r_min)), float(conv(self.r_max)), target)

    # differentiation along the last two axes of (..., nr, ntheta) arrays
    def d_r(self, v):
        return np.einsum("ij,...jk->...ik", self.D, v)

    def d_rr(self, v):
        return np.einsum("ij,...jk->...ik", self.D2, v)

    def d_theta(self, v):
        return np.fft.irfft(np.fft.rfft(v, axis=-1) * self._d1, n=self.ntheta, axis=-1)

    def d_thetatheta(self, v):
        return np.fft.irfft(np.fft.rfft(v, axis=-1) * (-self.modes.astype(float) ** 2), n=self.ntheta, axis=-1)

    def area_sum(self, f) -> float:
        """``int int f dr dtheta`` (coordinate measure, no Jacobian)."""
        return float(math.fsum((self.weights[:, None] * f).ravel()) * self.dtheta)


@dataclass(frozen=True, eq=False)
class SelfSimilarProfile:
    """Values of ``v`` (shape ``(3, nr, ntheta)``) on a :class:`PolarGrid`."""

    grid: PolarGrid
    values: np.ndarray

    def __post_init__(self):
        g = self.grid
        v = np.array(self.values, dtype=float)
        if v.shape != (3, g.nr, g.ntheta):
            raise ValueError(f"values must have shape {(3, g.nr, g.ntheta)}, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("profile values must be finite")
        if g.has_pole:
            spread = np.ptp(v[:, 0, :], axis=-1).max()
            if spread > 1e-10 * (1 + np.abs(v).max()):
                raise ValueError(f"profile is not single valued at the pole (spread {spread:.2e})")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, grid: PolarGrid, c=(0.0, 0.0, 0.0)) -> "SelfSimilarProfile":
        return cls(grid, np.broadcast_to(np.asarray(c, float)[:, None, None], (3, grid.nr, grid.ntheta)))

    @classmethod
    def from_cartesian(cls, grid: PolarGrid, func: Callable) -> "SelfSimilarProfile":
        """Sample ``func(X, Y)`` with ``(X, Y) = rho (cos theta, sin theta)`` on the unit disc."""
        rho = grid.rho[:, None]
        X, Y = rho * np.cos(grid.theta), rho * np.sin(grid.theta)
        return cls(grid, np.asarray(func(X, Y), float))

    @classmethod
    def from_polar(cls, grid: PolarGrid, func: Callable) -> "SelfSimilarProfile":
        """Sample ``func(r, theta)`` in the grid's own radial variable.

        At a pole the row is replaced by its angular mean.
        """
        R, TH = np.meshgrid(grid.r, grid.theta, indexing="ij")
        v = np.array(np.broadcast_to(func(R, TH), (3, grid.nr, grid.ntheta)), dtype=float)
        if grid.has_pole:
            v[:, 0, :] = v[:, 0, :].mean(axis=-1, keepdims=True)
        return cls(grid, v)

    @property
    def parametrization(self) -> str:
        return self.grid.parametrization

    def interpolate(self, r_eval) -> np.ndarray:
        """Values at radial points ``r_eval`` (grid variable), shape ``(3, len, ntheta)``."""
        return BarycentricInterpolator(self.grid.r, self.values, axis=1)(np.atleast_1d(r_eval))

    def to_parametrization(self, target: str) -> "SelfSimilarProfile":
        """Re-sample on the Chebyshev grid of the other radial variable."""
        g = self.grid.with_parametrization(target)
        if g is self.grid:
            return self
        back = rho_of_sigma if target == "sigma" else sigma_of_rho
        r_src = np.clip(back(g.r), self.grid.r_min, self.grid.r_max)
        v = self.interpolate(r_src)
        if g.has_pole:
            v[:, 0, :] = v[:, 0, :].mean(axis=-1, keepdims=True)
        return SelfSimilarProfile(g, v)

    def normalized(self) -> "SelfSimilarProfile":
        """Subtract the angular average on the outer radial row."""
        mean = self.values[:, -1, :].mean(axis=-1)
        return SelfSimilarProfile(self.grid, self.values - mean[:, None, None])

    def gradient_norm(self) -> float:
        """``(int int |v_r|^2 + |v_theta|^2 dr dtheta)^{1/2}`` in the grid's coordinates."""
        g = self.grid
        vr, vt = g.d_r(self.values), g.d_theta(self.values)
        return math.sqrt(max(g.area_sum((vr**2).sum(0) + (vt**2).sum(0)), 0.0))

    def deviation_norm(self) -> float:
        g = self.grid
        area = g.area_sum(np.ones((g.nr, g.ntheta)))
        mean = np.array([g.area_sum(c) for c in self.values]) / area
        return math.sqrt(max(g.area_sum(((self.values - mean[:, None, None]) ** 2).sum(0)), 0.0))


# -- frame ---------------------------------------------------------------------

@dataclass(frozen=True)
class FrameCoefficients:
    """Metric of Minkowski space in ``(tau, rho, theta)`` at fixed ``tau``."""

    tau: float
    g_tautau: float = field(default=-1.0, init=False)

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("tau must be positive")

    def _interior(self, rho):
        rho = np.asarray(rho, float)
        if np.any(rho <= 0) or np.any(rho >= 1):
            raise ValueError("frame coefficients need 0 < rho < 1")
        return rho

    def g_rhorho(self, rho):
        rho = self._interior(rho)
        return self.tau**2 / (1 - rho * rho) ** 2

    def g_thetatheta(self, rho):
        rho = self._interior(rho)
        return self.tau**2 * rho * rho / (1 - rho * rho)

    def volume(self, rho):
        rho = self._interior(rho)
        return self.tau**2 * rho / (1 - rho * rho) ** 1.5

    def wave_operator(self, v: SelfSimilarProfile) -> np.ndarray:
        """Laplace-Beltrami wave operator applied to the tau-independent ``v``.

        ``(1/vol) [d_rho(vol g^{rho rho} v_rho) + vol g^{th th} v_thth]``;
        needs a rho grid strictly inside ``(0, 1)``.
        """
        g = v.grid
        if g.parametrization != "rho":
            raise ValueError("wave_operator expects the rho parametrization")
        rho = g.rho
        vol = self.volume(rho)
        flux = (vol / self.g_rhorho(rho))[:, None] * g.d_r(v.values)
        ang = (vol / self.g_thetatheta(rho))[:, None] * g.d_thetatheta(v.values)
        return (g.d_r(flux) + ang) / vol[:, None]


# -- reduced equation ----------------------------------------------------------

def _require_rho(v: SelfSimilarProfile):
    if v.parametrization != "rho":
        raise ValueError("expected a profile in the rho parametrization")
    if v.grid.nr < MIN_RADIAL_NODES:
        raise ValueError(f"grid too coarse: need at least {MIN_RADIAL_NODES} radial nodes")


def reduced_lhs(v: SelfSimilarProfile) -> np.ndarray:
    """``rho^2(1-rho^2) v_rr + rho(1-2rho^2) v_r + v_thth``."""
    _require_rho(v)
    g = v.grid
    rho = g.rho[:, None]
    return rho**2 * (1 - rho**2) * g.d_rr(v.values) + rho * (1 - 2 * rho**2) * g.d_r(v.values) \
        + g.d_thetatheta(v.values)


def reduced_residual(v: SelfSimilarProfile) -> np.ndarray:
    """Left side minus ``2 rho v_rho ^ v_theta`` at every node, shape ``(3, nr, ntheta)``."""
    g = v.grid
    wedge = np.cross(g.d_r(v.values), g.d_theta(v.values), axis=0)
    return reduced_lhs(v) - 2 * g.rho[:, None] * wedge


def sigma_residual(v: SelfSimilarProfile) -> np.ndarray:
    """Residual of the flat-Laplacian form in sigma.

    ``v_ss + v_s/s + v_thth/s^2 - 2/(s sqrt(1-rho^2)) v_s ^ v_th``; only
    defined strictly inside ``0 < sigma < 1`` (the coefficient blows up at
    both ends), so the grid must be an annulus.
    """
    g = v.grid
    if g.parametrization != "sigma":
        raise ValueError("expected a profile in the sigma parametrization")
    if g.has_pole or g.reaches_boundary:
        raise ValueError("sigma form is only evaluated on annuli inside 0 < sigma < 1")
    s = g.r[:, None]
    rho = g.rho[:, None]
    vs, vt = g.d_r(v.values), g.d_theta(v.values)
    lap = g.d_rr(v.values) + vs / s + g.d_thetatheta(v.values) / s**2
    return lap - 2 / (s * np.sqrt((1 - rho) * (1 + rho))) * np.cross(vs, vt, axis=0)


def identity_integral(v: SelfSimilarProfile, rho) -> np.ndarray | float:
    """``int_0^{2 pi} rho^2(1-rho^2)|v_rho|^2 - |v_theta|^2 dtheta`` at the given radii.

    For a sigma profile the first term is evaluated as ``sigma^2 |v_sigma|^2``.
    """
    scalar = np.ndim(rho) == 0
    g = v.grid
    rho = _check_unit(np.atleast_1d(rho), "rho")
    r = rho if g.parametrization == "rho" else sigma_of_rho(rho)
    if np.any(r < g.r_min - 1e-14) or np.any(r > g.r_max + 1e-14):
        raise ValueError("radius outside the profile's grid")
    vals = v.interpolate(r)
    dr = BarycentricInterpolator(g.r, g.d_r(v.values), axis=1)(r)
    if g.parametrization == "rho":
        radial = (rho**2 * (1 - rho**2))[:, None] * (dr**2).sum(0)
    else:
        radial = (r**2)[:, None] * (dr**2).sum(0)
    ang = (g.d_theta(vals) ** 2).sum(0)
    out = np.array([math.fsum(row) * g.dtheta for row in radial - ang])
    return float(out[0]) if scalar else out


def identity_table(v: SelfSimilarProfile, rhos) -> list[dict]:
    return [{"rho": float(r), "identity": float(i)} for r, i in zip(rhos, identity_integral(v, np.asarray(rhos)))]


def pohozaev_boundary_integral(v: SelfSimilarProfile, route: str = "interior", tol: float = 1e-8) -> float:
    """Boundary energy ``int_0^{2pi} 1/2 |v_sigma|^2 dtheta`` at ``sigma = 1``.

    ``route='interior'`` integrates ``v_sigma . (sigma^2 Lap v)`` over the
    disc (the divergence form), ``route='boundary'`` takes the trace
    directly.  The profile is first normalized by its boundary average and
    rejected if ``|v_theta| > tol`` on ``sigma = 1``.
    """
    g = v.grid
    if g.parametrization != "sigma" or not (g.has_pole and g.reaches_boundary):
        raise ValueError("expected a sigma profile on the full disc 0 <= sigma <= 1")
    w = v.normalized().values
    vt_edge = g.d_theta(w[:, -1, :])
    scale = max(1.0, float(np.abs(w).max()))
    if np.abs(vt_edge).max() > tol * scale:
        raise ValueError(f"v_theta does not vanish on sigma = 1 (max {np.abs(vt_edge).max():.2e})")
    vs = g.d_r(w)
    if route == "boundary":
        return 0.5 * math.fsum((vs[:, -1, :] ** 2).sum(0)) * g.dtheta
    if route != "interior":
        raise ValueError("route must be 'interior' or 'boundary'")
    s = g.r[:, None]
    s2lap = s * s * g.d_rr(w) + s * vs + g.d_thetatheta(w)
    return g.area_sum((vs * s2lap).sum(0))


# -- metric audit ----------------------------------------------------------------

_FD6 = np.array([1 / 90, -3 / 20, 3 / 2, -49 / 18, 3 / 2, -3 / 20, 1 / 90])


def direct_wave_operator(func: Callable, t, x, y, h: float) -> np.ndarray:
    """``(-d_t^2 + d_x^2 + d_y^2) func(x/t, y/t)`` by sixth-order central differences."""
    u = lambda tt, xx, yy: np.asarray(func(xx / tt, yy / tt), float)
    out = 0.0
    for k, c in zip(range(-3, 4), _FD6):
        out = out - c * u(t + k * h, x, y) + c * u(t, x + k * h, y) + c * u(t, x, y + k * h)
    return out / (h * h)


def metric_audit(func: Callable, grid: PolarGrid, tau: float = 1.0, h: float = 5e-3) -> dict:
    """Compare three evaluations of the wave operator on ``u = v(x/t, y/t)``.

    ``frame``: Laplace-Beltrami form with the metric coefficients;
    ``reduced``: ``(1-rho^2)/(tau^2 rho^2)`` times :func:`reduced_lhs`;
    ``direct``: finite differences in ``(t, x, y)``.
    """
    v = SelfSimilarProfile.from_cartesian(grid, func)
    frame = FrameCoefficients(tau).wave_operator(v)
    rho = grid.rho[:, None]
    reduced = (1 - rho**2) / (tau**2 * rho**2) * reduced_lhs(v)
    t = tau / np.sqrt(1 - rho**2) * np.ones_like(grid.theta)
    x, y = t * rho * np.cos(grid.theta), t * rho * np.sin(grid.theta)
    direct = direct_wave_operator(func, t, x, y, h)
    scale = max(1.0, float(np.abs(direct).max()))
    return {"frame_vs_direct": float(np.abs(frame - direct).max() / scale),
            "reduced_vs_direct": float(np.abs(reduced - direct).max() / scale),
            "frame_vs_reduced": float(np.abs(frame - reduced).max() / scale),
            "scale": scale, "tau": tau, "h": h}


def random_cartesian(rng: np.random.Generator, kmax: int = 2, amplitude: float = 0.5) -> Callable:
    """Random trigonometric polynomial ``R^2 -> R^3`` with frequencies in ``[-kmax, kmax]^2``."""
    ks = [(a, b) for a in range(-kmax, kmax + 1) for b in range(-kmax, kmax + 1) if (a, b) != (0, 0)]
    k = np.array(ks, float)
    decay = 1 / (1 + (k**2).sum(1))
    coef = rng.normal(size=(3, len(ks))) * decay * amplitude
    phase = rng.uniform(0, 2 * np.pi, size=(3, len(ks)))

    def func(X, Y):
        X, Y = np.asarray(X, float), np.asarray(Y, float)
        arg = k[:, 0, None] * X.ravel() + k[:, 1, None] * Y.ravel()
        out = np.stack([(coef[c][:, None] * np.cos(arg + phase[c][:, None])).sum(0) for c in range(3)])
        return out.reshape((3,) + X.shape)

    return func


# -- falsification search ----------------------------------------------------------

class _Problem:
    """Residual map ``F(v)`` for the search, its Jacobian and adjoint.

    ``F`` stacks the reduced residual at every node, ``sqrt(mu)`` times
    ``v_theta`` on the rows ``rho = 0`` and ``rho = 1``, and ``sqrt(mu)``
    times the angular identity integral at every radial node.
    """

    def __init__(self, grid: PolarGrid, penalty: float):
        self.g = grid
        rho = grid.rho
        self.rho = rho[:, None]
        self.a2 = (rho**2 * (1 - rho**2))[:, None]
        self.a1 = (rho * (1 - 2 * rho**2))[:, None]
        self.c = rho**2 * (1 - rho**2)
        self.sq = math.sqrt(penalty)
        self.shape = (3, grid.nr, grid.ntheta)
        self.size = int(np.prod(self.shape))
        nb = 3 * grid.ntheta
        self.nF = self.size + 2 * nb + grid.nr
        self._eig = self._mode_blocks()

    def residual(self, v):
        g = self.g
        vr, vt = g.d_r(v), g.d_theta(v)
        R = self.a2 * g.d_rr(v) + self.a1 * vr + g.d_thetatheta(v) - 2 * self.rho * np.cross(vr, vt, axis=0)
        ident = ((self.c[:, None] * vr**2 - vt**2).sum(0)).sum(-1) * g.dtheta
        return R, np.concatenate([R.ravel(), self.sq * vt[:, 0, :].ravel(), self.sq * vt[:, -1, :].ravel(),
                                  self.sq * ident])

    def linearize(self, v):
        g = self.g
        self.vr, self.vt = g.d_r(v), g.d_theta(v)

    def jvp(self, p):
        g = self.g
        p = p.reshape(self.shape)
        pr, pt = g.d_r(p), g.d_theta(p)
        R = self.a2 * g.d_rr(p) + self.a1 * pr + g.d_thetatheta(p) \
            - 2 * self.rho * (np.cross(pr, self.vt, axis=0) + np.cross(self.vr, pt, axis=0))
        ident = 2 * ((self.c[:, None] * self.vr * pr - self.vt * pt).sum(0)).sum(-1) * g.dtheta
        return np.concatenate([R.ravel(), self.sq * pt[:, 0, :].ravel(), self.sq * pt[:, -1, :].ravel(),
                               self.sq * ident])

    def vjp(self, q):
        g = self.g
        n = self.size
        nb = 3 * g.ntheta
        R = q[:n].reshape(self.shape)
        qb0 = q[n:n + nb].reshape(3, g.ntheta) * self.sq
        qb1 = q[n + nb:n + 2 * nb].reshape(3, g.ntheta) * self.sq
        s = q[n + 2 * nb:] * self.sq
        DT, D2T = g.D.T, g.D2.T
        radial = self.a1 * R - 2 * self.rho * np.cross(self.vt, R, axis=0) \
            + 2 * g.dtheta * (self.c * s)[:, None] * self.vr
        out = np.einsum("ij,...jk->...ik", D2T, self.a2 * R) + np.einsum("ij,...jk->...ik", DT, radial)
        ang = -2 * self.rho * np.cross(R, self.vr, axis=0) - 2 * g.dtheta * s[:, None] * self.vt
        edge = np.zeros(self.shape)
        edge[:, 0, :] += qb0
        edge[:, -1, :] += qb1
        out = out + g.d_thetatheta(R) - g.d_theta(ang + edge)
        return out.ravel()

    def _mode_blocks(self):
        g = self.g
        eye = np.eye(g.nr)
        blocks = []
        for m in g.modes:
            L = self.a2 * g.D2 + self.a1 * g.D - float(m * m) * eye
            B = L.T @ L
            if m < g.ntheta // 2:
                B[0, 0] += self.sq**2 * m * m
                B[-1, -1] += self.sq**2 * m * m
            blocks.append(np.linalg.eigh(B))
        return blocks

    def preconditioner(self, lam: float) -> LinearOperator:
        g = self.g
        inv = [(V, 1.0 / (w + lam)) for w, V in self._eig]

        def apply(r):
            c = np.fft.rfft(r.reshape(self.shape), axis=-1)
            out = np.empty_like(c)
            for m, (V, d) in enumerate(inv):
                out[:, :, m] = (V @ (d[:, None] * (V.T @ c[:, :, m].T))).T
            return np.fft.irfft(out, n=g.ntheta, axis=-1).ravel()

        return LinearOperator((self.size, self.size), matvec=apply, dtype=float)


@dataclass
class SearchResult:
    seed: int
    residual: float
    objective: float
    gradient_norm: float
    threshold: float
    converged: bool
    classification: str
    iterations: int
    accepted: int
    objective_history: list
    profile: SelfSimilarProfile = field(repr=False)

    def as_dict(self) -> dict:
        return {"seed": self.seed, "residual": self.residual, "objective": self.objective,
                "gradient_norm": self.gradient_norm, "threshold": self.threshold,
                "converged": self.converged, "classification": self.classification,
                "iterations": self.iterations, "accepted": self.accepted}


def profile_search(seed: int, grid: PolarGrid, max_iter: int = 200, tol: float = 1e-6,
                   residual_tol: float = 1e-8, penalty: float = 1.0, amplitude: float = 0.5,
                   kmax: int = 2, initial: SelfSimilarProfile | None = None,
                   stop_residual: float = 1e-12, patience: int = 10, stall_ratio: float = 0.9,
                   cg_maxiter: int = 300) -> SearchResult:
    """Levenberg-Marquardt descent on ``|F(v)|^2 / 2`` from a random smooth profile.

    A run is converged when the sup of the reduced residual is at most
    ``residual_tol``; a converged run is ``trivial`` when its gradient norm
    is at most ``tol`` times the initial deviation ``|v0 - mean(v0)|``
    (``tol`` itself if the start is constant).  Damping starts at 1e-3 and
    is divided by 10 on accepted steps, multiplied by 10 on rejected ones.
    The inner solve is preconditioned CG (linear part inverted mode by
    mode in theta) with an inexact-Newton tolerance.  The run stops early
    once the residual reaches ``stop_residual``, after ``patience``
    consecutive rejections, or when ``patience`` accepted steps shrink the
    objective by less than the factor ``stall_ratio`` (slow descent of this
    kind is typically a bubble concentrating at the pole).
    """
    if grid.parametrization != "rho" or not (grid.has_pole and grid.reaches_boundary):
        raise ValueError("profile_search needs a rho grid on the full disc")
    if initial is None:
        initial = SelfSimilarProfile.from_cartesian(grid, random_cartesian(stream(seed), kmax, amplitude))
    prob = _Problem(grid, penalty)
    v = np.array(initial.values)
    scale = initial.deviation_norm()
    threshold = tol * scale if scale > 0 else tol
    R, F = prob.residual(v)
    obj = 0.5 * float(F @ F)
    history = [obj]
    lam, it, accepted, rejected = 1e-3, 0, 0, 0
    while it < max_iter and np.abs(R).max() > stop_residual and rejected < patience:
        if len(history) > patience and history[-1] > stall_ratio * history[-1 - patience]:
            break
        it += 1
        prob.linearize(v)
        rhs = -prob.vjp(F)
        A = LinearOperator((prob.size, prob.size), dtype=float,
                           matvec=lambda p, lam=lam: prob.vjp(prob.jvp(p)) + lam * p)
        rtol = min(1e-2, max(1e-10, math.sqrt(obj)))
        step, _ = cg(A, rhs, rtol=rtol, maxiter=cg_maxiter, M=prob.preconditioner(lam))
        trial = v + step.reshape(prob.shape)
        trial[:, 0, :] = trial[:, 0, :].mean(axis=-1, keepdims=True)
        Rt, Ft = prob.residual(trial)
        obj_t = 0.5 * float(Ft @ Ft)
        if np.isfinite(obj_t) and obj_t < obj:
            v, R, F, obj = trial, Rt, Ft, obj_t
            lam = max(lam / 10, 1e-15)
            accepted += 1
            rejected = 0
            history.append(obj)
        else:
            lam *= 10
            rejected += 1
    profile = SelfSimilarProfile(grid, v)
    res = float(np.abs(R).max())
    grad = profile.gradient_norm()
    converged = res <= residual_tol
    if not converged:
        cls = "not-converged"
    else:
        cls = "trivial" if grad <= threshold else "nontrivial"
    log.info("seed %d: residual %.2e, |grad v| %.2e, %s after %d iterations", seed, res, grad, cls, it)
    return SearchResult(seed, res, obj, grad, threshold, converged, cls, it, accepted, history, profile)


# -- persistence ----------------------------------------------------------------------

def save_profile(v: SelfSimilarProfile, stem: str | Path) -> tuple[Path, Path]:
    """Little-endian float64 ``.bin`` in ``(component, radial, angle)`` order plus a ``.json`` sidecar."""
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    data, meta = stem.with_suffix(".bin"), stem.with_suffix(".json")
    np.ascontiguousarray(v.values, dtype="<f8").tofile(data)
    g = v.grid
    meta.write_text(json.dumps({
        "nr": g.nr, "ntheta": g.ntheta, "r_min": g.r_min, "r_max": g.r_max,
        "parametrization": g.parametrization, "radial_nodes": "chebyshev-lobatto ascending",
        "theta_nodes": "2*pi*j/ntheta", "shape": [3, g.nr, g.ntheta], "dtype": "float64",
        "byte_order": "little", "layout": "row-major [component, radial, angle]",
    }, indent=2, sort_keys=True))
    return data, meta


def load_profile(stem: str | Path) -> SelfSimilarProfile:
    stem = Path(stem)
    meta = json.loads(stem.with_suffix(".json").read_text())
    g = PolarGrid(meta["nr"], meta["ntheta"], meta["r_min"], meta["r_max"], meta["parametrization"])
    data = np.fromfile(stem.with_suffix(".bin"), dtype="<f8").reshape(meta["shape"])
    return SelfSimilarProfile(g, data)
