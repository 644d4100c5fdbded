"""Fourier-side checks of the Q12 bilinear estimate for half-wave evolutions.

Frequencies ``xi`` are arrays with a trailing axis of length 2, ``tau`` is
the time frequency, and ``omega`` a unit vector on the circle.  For
``tau > |xi|`` the radial value

    rho = (tau^2 - |xi|^2) / (2 (tau - xi . omega))

solves ``|xi - rho omega| + rho = tau``.  The kernel quotient

    rho^2 (xi x omega)^2 / (tau^2 - |xi|^2)^2 * d tau / d rho

collapses to ``(xi x omega)^2 / (2 (tau^2 - 2 tau xi.omega + |xi|^2))`` and
never exceeds 1/2.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .spectral import Grid, fft2, ifft2, sobolev_norm_sq_hat
from .streams import stream

SIGN_PAIRS = ((1, 1), (-1, -1), (1, -1), (-1, 1))
QUOTIENT_BOUND = 0.5


def _sign_name(pair) -> str:
    return "(" + ",".join("+" if s > 0 else "-" for s in pair) + ")"


def _parts(xi, tau, omega):
    xi = np.asarray(xi, float)
    omega = np.asarray(omega, float)
    tau = np.asarray(tau, float)
    dot = xi[..., 0] * omega[..., 0] + xi[..., 1] * omega[..., 1]
    cross = xi[..., 0] * omega[..., 1] - xi[..., 1] * omega[..., 0]
    xi2 = xi[..., 0] ** 2 + xi[..., 1] ** 2
    return xi, tau, omega, dot, cross, xi2


def _gap(tau, xi2, dot, cross):
    """``tau - xi.omega`` without cancellation for unit omega.

    For ``xi.omega > 0`` it equals ``(tau - |xi|) + (xi x omega)^2 / (|xi| + xi.omega)``,
    a sum of nonnegative terms on the domain.
    """
    r = np.sqrt(xi2)
    pos = dot > 0
    safe = np.where(pos, r + dot, 1.0)
    return np.where(pos, (tau - r) + cross * cross / safe, tau - dot)


def _rho_formula(tau, xi2, dot, cross):
    # (tau - |xi|)(tau + |xi|) avoids the cancellation in tau^2 - |xi|^2 near the cone
    r = np.sqrt(xi2)
    return (tau - r) * (tau + r) / (2 * _gap(tau, xi2, dot, cross))


def _check_domain(tau, xi2, strict: bool):
    xinorm = np.sqrt(xi2)
    bad = tau <= xinorm if strict else tau < xinorm
    if np.any(bad):
        raise ValueError("domain error: need tau %s |xi|" % (">" if strict else ">="))


def rho_of(xi, tau, omega):
    """Radial value of the change of variables; requires ``tau >= |xi|``."""
    xi, tau, omega, dot, cross, xi2 = _parts(xi, tau, omega)
    _check_domain(tau, xi2, strict=False)
    if np.any(_gap(tau, xi2, dot, cross) <= 0):
        raise ValueError("degenerate denominator: tau = |xi| with omega parallel to xi")
    return _rho_formula(tau, xi2, dot, cross)


def jacobian(xi, tau, omega):
    """``d rho / d tau = (tau^2 - 2 tau xi.omega + |xi|^2) / (2 (tau - xi.omega)^2)``.

    The numerator is evaluated as ``(tau - xi.omega)^2 + (xi x omega)^2``,
    the same quantity without cancellation when omega is nearly parallel
    to xi and tau is close to |xi|.
    """
    xi, tau, omega, dot, cross, xi2 = _parts(xi, tau, omega)
    _check_domain(tau, xi2, strict=True)
    g = _gap(tau, xi2, dot, cross)
    return (g * g + cross * cross) / (2 * g * g)


def kernel_quotient(xi, tau, omega, check: bool = True, atol: float = 1e-10):
    """Simplified kernel quotient; with ``check`` it is compared to the unsimplified product.

    The denominator ``tau^2 - 2 tau xi.omega + |xi|^2`` is evaluated as
    ``(tau - xi.omega)^2 + (xi x omega)^2``: the expanded form cancels to
    zero for omega nearly parallel to xi and tau close to |xi|, and the
    sum of squares also makes ``q <= 1/2`` hold exactly in floating point.
    """
    xi, tau, omega, dot, cross, xi2 = _parts(xi, tau, omega)
    _check_domain(tau, xi2, strict=True)
    g = _gap(tau, xi2, dot, cross)
    denom = g * g + cross * cross
    q = cross * cross / (2 * denom)
    if check:
        rho = _rho_formula(tau, xi2, dot, cross)
        if np.any(rho <= 0):
            raise ValueError("domain error: rho must be positive")
        drho = denom / (2 * g * g)
        r = np.sqrt(xi2)
        raw = rho * rho * cross * cross / ((tau - r) * (tau + r)) ** 2 / drho
        err = np.max(np.abs(raw - q), initial=0.0)
        if err > atol:
            raise ArithmeticError(f"simplified and unsimplified quotients differ by {err:.3e}")
    return q


def denominator_identity_error(xi, tau, omega):
    """``|tau^2 - 2 tau xi.omega + |xi|^2 - ((tau - xi.omega)^2 + (xi x omega)^2)|`` relative to ``tau^2``."""
    xi, tau, omega, dot, cross, xi2 = _parts(xi, tau, omega)
    lhs = tau * tau - 2 * tau * dot + xi2
    rhs = (tau - dot) ** 2 + cross * cross
    return np.abs(lhs - rhs) / np.maximum(tau * tau, 1e-300)


@dataclass(frozen=True)
class KernelSample:
    xi: tuple
    tau: float
    omega: tuple
    rho: float
    drho_dtau: float
    quotient: float

    @classmethod
    def at(cls, xi, tau, omega) -> "KernelSample":
        return cls(tuple(map(float, xi)), float(tau), tuple(map(float, omega)),
                   float(rho_of(xi, tau, omega)), float(jacobian(xi, tau, omega)),
                   float(kernel_quotient(xi, tau, omega)))

    def identity_error(self) -> float:
        d = np.asarray(self.xi) - self.rho * np.asarray(self.omega)
        return abs(float(np.hypot(*d)) + self.rho - self.tau)


# -- scans -------------------------------------------------------------------

def random_samples(rng: np.random.Generator, count: int, xi_range=(1e-2, 1e1), gap_exp=(-6.0, 1.0)):
    """Random ``(xi, tau, omega)`` with ``tau/|xi| - 1`` log-uniform in ``10**gap_exp``."""
    r = 10 ** rng.uniform(np.log10(xi_range[0]), np.log10(xi_range[1]), count)
    a = rng.uniform(0, 2 * np.pi, count)
    xi = np.stack([r * np.cos(a), r * np.sin(a)], axis=-1)
    tau = r * (1 + 10 ** rng.uniform(*gap_exp, count))
    b = rng.uniform(0, 2 * np.pi, count)
    omega = np.stack([np.cos(b), np.sin(b)], axis=-1)
    return xi, tau, omega


def lattice_samples(m: int = 64, xi_range=(1e-2, 1e1), gap_exp=(-6.0, 1.0)):
    """Deterministic ``m^3`` lattice in ``(|xi|, tau/|xi|, angle between xi and omega)``."""
    r = np.geomspace(*xi_range, m)
    ratio = 1 + np.geomspace(10 ** gap_exp[0], 10 ** gap_exp[1], m)
    ang = np.linspace(0, 2 * np.pi, m, endpoint=False)
    R, Q, A = np.meshgrid(r, ratio, ang, indexing="ij")
    R, Q, A = R.ravel(), Q.ravel(), A.ravel()
    xi = np.stack([R, np.zeros_like(R)], axis=-1)
    omega = np.stack([np.cos(A), np.sin(A)], axis=-1)
    return xi, R * Q, omega


def scan_kernel(xi, tau, omega, fd_step: float = 1e-5, fd_clearance: float = 0.02) -> dict:
    """Bound, change-of-variables and Jacobian checks over a batch of samples.

    rho is homogeneous of degree one, so the central difference uses
    ``h = fd_step * tau`` (the step 1e-5 in units where tau = 1).  Its
    truncation error is about ``(h / (tau - xi.omega))^2`` since rho(tau)
    has a pole at ``tau = xi.omega``; the difference check is therefore
    applied only where ``tau - xi.omega >= fd_clearance * tau`` and the
    number of checked samples is reported.
    """
    xi, tau, omega, dot, cross, xi2 = _parts(xi, tau, omega)
    q = kernel_quotient(xi, tau, omega)
    rho = rho_of(xi, tau, omega)
    d = xi - rho[..., None] * omega
    ident = np.abs(np.hypot(d[..., 0], d[..., 1]) + rho - tau)
    jac = jacobian(xi, tau, omega)
    h = fd_step * tau
    far = _gap(tau, xi2, dot, cross) >= fd_clearance * tau
    fd = (_rho_formula(tau + h, xi2, dot, cross) - _rho_formula(tau - h, xi2, dot, cross)) / (2 * h)
    jac_rel = np.abs(fd - jac)[far] / jac[far]
    i = int(np.argmax(q))
    return {
        "count": int(q.size),
        "max_quotient": float(q.max()),
        "violations": int(np.count_nonzero(q > QUOTIENT_BOUND + 1e-12)),
        "argmax": {"xi": xi[i].tolist(), "tau": float(tau[i]), "omega": omega[i].tolist()},
        "max_identity_error": float(ident.max()),
        "jacobian_fd_checked": int(far.sum()),
        "max_jacobian_rel_error": float(jac_rel.max(initial=0.0)),
        "min_jacobian": float(jac.min()),
        "max_denominator_identity_error": float(denominator_identity_error(xi, tau, omega).max()),
    }


def extremes(xi, tau, omega, top: int = 20) -> list[dict]:
    """The ``top`` largest quotients, for the CSV report."""
    q = kernel_quotient(xi, tau, omega, check=False)
    idx = np.argsort(q)[::-1][:top]
    return [{"sample": int(i), "xi1": float(xi[i, 0]), "xi2": float(xi[i, 1]), "tau": float(tau[i]),
             "omega1": float(omega[i, 0]), "omega2": float(omega[i, 1]), "quotient": float(q[i])}
            for i in idx]


# -- convolution density -----------------------------------------------------

def convolution_density(f_hat: Callable, g_hat: Callable, xi, tau: float, n_quad: int = 512) -> complex:
    """Space-time transform of ``phi_+ psi_+`` at ``(xi, tau)``.

    Convention: the transform of ``e^{it|D|}/|D| f`` is ``f_hat(xi)/|xi| delta(tau - |xi|)``,
    so the product's transform is the density
    ``2/(tau^2-|xi|^2) * int_{S^1} f_hat(xi - rho w) g_hat(rho w) rho dw``,
    integrated with the periodic trapezoid rule on ``n_quad`` nodes.
    ``f_hat`` and ``g_hat`` are callables of two coordinate arrays.
    """
    xi = np.asarray(xi, float)
    xinorm = float(np.hypot(*xi))
    if tau <= xinorm:
        return 0.0 + 0.0j
    th = 2 * np.pi * np.arange(n_quad) / n_quad
    om = np.stack([np.cos(th), np.sin(th)], axis=-1)
    cross = xi[0] * om[:, 1] - xi[1] * om[:, 0]
    rho = _rho_formula(tau, xinorm**2, om @ xi, cross)
    a1, a2 = xi[0] - rho * om[:, 0], xi[1] - rho * om[:, 1]
    vals = f_hat(a1, a2) * g_hat(rho * om[:, 0], rho * om[:, 1]) * rho
    return complex(2.0 / (tau * tau - xinorm**2) * vals.sum() * (2 * np.pi / n_quad))


def lattice_density(f_hat: Callable, g_hat: Callable, xi, tau: float, spacing: float = 0.01,
                    width: float = 0.02, extent: float = 4.0) -> complex:
    """Independent estimate of the same density from a frequency lattice.

    Sums ``f_hat(xi-eta)/|xi-eta| * g_hat(eta)/|eta|`` over a square lattice
    of ``eta`` and replaces ``delta(tau - |xi-eta| - |eta|)`` by a Gaussian of
    standard deviation ``width``; this is the Gaussian-windowed time
    transform of the grid product evaluated mode by mode.
    """
    xi = np.asarray(xi, float)
    e = np.arange(-extent, extent + spacing / 2, spacing)
    e1, e2 = np.meshgrid(e, e, indexing="ij")
    r = np.hypot(e1, e2)
    s = np.hypot(xi[0] - e1, xi[1] - e2)
    ok = (r > 0) & (s > 0)
    F = np.zeros_like(r, dtype=complex)
    F[ok] = f_hat(xi[0] - e1[ok], xi[1] - e2[ok]) / s[ok] * g_hat(e1[ok], e2[ok]) / r[ok]
    kern = np.exp(-0.5 * ((s + r - tau) / width) ** 2) / (np.sqrt(2 * np.pi) * width)
    return complex((F * kern).sum() * spacing**2)


# -- empirical bilinear constant ---------------------------------------------

@dataclass(frozen=True)
class BumpProfile:
    """Real profile whose transform is a sum of Gaussian bumps at ``+-c``.

    ``evaluate(k1, k2)`` gives the continuum transform; the physical
    profile is centred at ``shift``.
    """

    centers: np.ndarray
    widths: np.ndarray
    amps: np.ndarray

    @classmethod
    def random(cls, rng: np.random.Generator, bumps: int = 2, radius=(0.9, 1.4), width=(0.25, 0.3)):
        r = rng.uniform(*radius, bumps)
        a = rng.uniform(0, 2 * np.pi, bumps)
        c = np.stack([r * np.cos(a), r * np.sin(a)], axis=-1)
        return cls(c, rng.uniform(*width, bumps), rng.normal(size=bumps))

    def evaluate(self, k1, k2):
        k1, k2 = np.asarray(k1, float), np.asarray(k2, float)
        out = np.zeros(np.broadcast(k1, k2).shape)
        for (c1, c2), w, a in zip(self.centers, self.widths, self.amps):
            for sgn in (1, -1):
                out = out + a * np.exp(-((k1 - sgn * c1) ** 2 + (k2 - sgn * c2) ** 2) / (2 * w * w))
        return out

    def on_grid(self, grid: Grid) -> np.ndarray:
        """Unnormalised-FFT coefficients of the profile centred in the box, mean removed."""
        x0 = grid.box_length / 2
        hat = self.evaluate(grid.kx, grid.ky) * np.exp(-1j * (grid.kx + grid.ky) * x0)
        hat = hat * (grid.n**2 / grid.box_length**2)
        hat = hat * grid.dealias_mask
        hat[0, 0] = 0.0
        return hat


def bilinear_ratio(grid: Grid, f_hat: np.ndarray, g_hat: np.ndarray, T_w: float, dt: float,
                   signs=(1, 1), chunk: int = 32) -> float:
    """``|(-Delta)^{1/4} Q12(phi, psi)|_{L^2([0,T_w] x box)} / (|f|_{1/2} |g|_{1/2})``.

    A profile that vanishes identically gives ratio 0.  A nonzero profile
    with zero norm (only its mean survives) is rejected.
    """
    if not np.any(f_hat) or not np.any(g_hat):
        return 0.0
    nf = np.sqrt(sobolev_norm_sq_hat(grid, f_hat[None], 0.5)[0])
    ng = np.sqrt(sobolev_norm_sq_hat(grid, g_hat[None], 0.5)[0])
    if nf == 0 or ng == 0:
        raise ValueError("f and g must have nonzero Hdot^{1/2} norm")
    if T_w <= 0 or dt <= 0:
        raise ValueError("T_w and dt must be positive")
    k = grid.kmag
    inv = np.where(k == 0, 0.0, 1.0 / np.where(k == 0, 1.0, k))
    dx, dy = grid.derivative_multiplier("x"), grid.derivative_multiplier("y")
    M = max(1, int(np.ceil(T_w / dt)))
    times = np.linspace(0.0, T_w, M + 1)
    half = grid.power_multiplier(0.5)
    sq = np.empty(M + 1)
    for start in range(0, M + 1, chunk):
        t = times[start:start + chunk, None, None]
        phi = np.exp(signs[0] * 1j * t * k) * (inv * f_hat)
        psi = np.exp(signs[1] * 1j * t * k) * (inv * g_hat)
        q = ifft2(phi * dx) * ifft2(psi * dy) - ifft2(phi * dy) * ifft2(psi * dx)
        qh = fft2(q) * grid.dealias_mask * half
        sq[start:start + chunk] = sobolev_norm_sq_hat(grid, qh, 0.0)
    w = np.full(M + 1, T_w / M)
    w[[0, -1]] *= 0.5
    return float(np.sqrt(max(np.dot(w, sq), 0.0)) / (nf * ng))


def estimate_constant(trials: int, grid: Grid, T_w: float, seed: int, dt: float = 0.1,
                      sign_pairs=SIGN_PAIRS) -> dict:
    """Empirical ratio distribution over random bump pairs, for every sign pair.

    The window ``[0, T_w]`` only sees part of the time axis, so each ratio
    (and the max, the empirical C) is a lower bound for the true constant.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    ratios = {_sign_name(p): [] for p in sign_pairs}
    for i in range(trials):
        rng = stream(seed, i)
        f = BumpProfile.random(rng).on_grid(grid)
        g = BumpProfile.random(rng).on_grid(grid)
        for p in sign_pairs:
            ratios[_sign_name(p)].append(bilinear_ratio(grid, f, g, T_w, dt, p))
    stats = {}
    for name, vals in ratios.items():
        v = np.asarray(vals)
        stats[name] = {"max": float(v.max()), "mean": float(v.mean()),
                       "q05": float(np.quantile(v, 0.05)), "q50": float(np.quantile(v, 0.5)),
                       "q95": float(np.quantile(v, 0.95)), "ratios": v.tolist()}
    return {"trials": trials, "n": grid.n, "box_length": grid.box_length, "T_w": T_w, "dt": dt,
            "seed": seed, "lower_bound": True, "C": max(v["max"] for v in stats.values()),
            "C_plus_plus": stats["(+,+)"]["max"] if "(+,+)" in stats else None, "per_sign": stats}
