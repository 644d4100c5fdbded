"""Picard iteration for the CMC wave equation and an independent integrator.

Sign convention: the equation is ``(-d_t^2 + Delta) u = 2 u_x ^ u_y``, i.e.
``u_tt - Delta u = G`` with source ``G = -2 u_x ^ u_y``.  The Duhamel
routines here take the source ``G``; for a source ``G`` the solution is
``cos(t|D|) u0 + sinc(t) u1 + int_0^t sin((t-s)|D|)/|D| G(s) ds``.

Time norms are discrete surrogates on the uniform nodes: ``C^0`` is the
max over nodes, ``L^1`` and ``L^2`` use the trapezoidal rule.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .nullforms import wedge_hat
from .spectral import (CauchyData, Grid, VectorField, cos_multiplier, ifft2, sinc_multiplier,
                       sobolev_norm_sq_hat)

log = logging.getLogger(__name__)

# Max ratio over all sign pairs from bilinear.estimate_constant (64 trials, n=128,
# T_w=16, seed 2024; attained by (+,+)); the schedule default applies a safety factor 2.
EMPIRICAL_BILINEAR_CONSTANT = 0.2206
DEFAULT_C = 2 * EMPIRICAL_BILINEAR_CONSTANT


class CFLError(ValueError):
    pass


class DivergenceError(RuntimeError):
    pass


# -- schedule ----------------------------------------------------------------

@dataclass(frozen=True)
class IterationSchedule:
    K: float
    C: float
    A: float
    T: float
    B: float
    checks: dict

    @property
    def valid(self) -> bool:
        """True when every smallness condition on ``T`` holds."""
        return all(self.checks.values())

    def as_dict(self) -> dict:
        return {"K": self.K, "C": self.C, "A": self.A, "T": self.T, "B": self.B,
                "checks": dict(self.checks), "valid": self.valid}


def schedule_checks(K: float, C: float, A: float, T: float, rtol: float = 1e-12) -> dict:
    s = math.sqrt(T)
    return {
        "4sqrtT<=1/2": 4 * s <= 0.5 * (1 + rtol),
        "2sqrtT*A<=K": 2 * s * A <= K * (1 + rtol),
        "2C*sqrtT*(K+2sqrtT*A)<=1/4": 2 * C * s * (K + 2 * s * A) <= 0.25 * (1 + rtol),
    }


def make_schedule(K: float, C: float, T: float | None = None) -> IterationSchedule:
    """Constants of the contraction argument for data of size ``K``.

    ``A = max(2K, 4CK^2)`` and ``T`` is the largest time meeting the three
    smallness conditions, unless ``T`` is given (research mode, where the
    checks may fail).  ``B = max(4, 4C(K + 2 sqrt(T) A))``.
    """
    if not K > 0:
        raise ValueError(f"K must be positive, got {K}")
    if not C > 0:
        raise ValueError(f"C must be positive, got {C}")
    A = max(2 * K, 4 * C * K * K)
    if T is None:
        s1 = 1.0 / 8.0
        s2 = K / (2 * A)
        # positive root of 4CA s^2 + 2CK s - 1/4 = 0, cancellation-free form
        s3 = 0.5 / (2 * C * K + math.sqrt(4 * C * C * K * K + 4 * C * A))
        T = min(s1, s2, s3) ** 2
    elif not T > 0:
        raise ValueError(f"T must be positive, got {T}")
    B = max(4.0, 4 * C * (K + 2 * math.sqrt(T) * A))
    return IterationSchedule(K, C, A, T, B, schedule_checks(K, C, A, T))


# -- space-time fields and norms ---------------------------------------------

@dataclass
class SpaceTimeField:
    """Spectral snapshots ``u(t_j)``, ``u_t(t_j)`` on ``M+1`` uniform nodes of ``[0, T]``."""

    grid: Grid
    T: float
    u_hat: np.ndarray
    ut_hat: np.ndarray | None = None
    residual: float | None = None

    def __post_init__(self):
        n = self.grid.n
        if self.u_hat.ndim != 4 or self.u_hat.shape[1:] != (3, n, n):
            raise ValueError(f"u_hat must have shape (M+1, 3, {n}, {n})")
        if self.ut_hat is not None and self.ut_hat.shape != self.u_hat.shape:
            raise ValueError("ut_hat must match u_hat")

    @property
    def M(self) -> int:
        return self.u_hat.shape[0] - 1

    @property
    def dt(self) -> float:
        return self.T / self.M if self.M else 0.0

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.M + 1)

    def snapshot(self, j: int) -> VectorField:
        return VectorField.from_spectral(self.grid, self.u_hat[j])

    def velocity(self, j: int) -> VectorField:
        if self.ut_hat is None:
            raise ValueError("no time derivative stored")
        return VectorField.from_spectral(self.grid, self.ut_hat[j])


def node_norms(grid: Grid, hat: np.ndarray, s: float) -> np.ndarray:
    """``Hdot^s`` norm at every time node of a ``(M+1, 3, n, n)`` array."""
    return np.sqrt(sobolev_norm_sq_hat(grid, hat, s))


def time_l1(values: np.ndarray, dt: float) -> float:
    if len(values) < 2:
        return 0.0
    return float(dt * (math.fsum(values) - 0.5 * (values[0] + values[-1])))


def time_l2(values: np.ndarray, dt: float) -> float:
    return math.sqrt(max(time_l1(np.asarray(values) ** 2, dt), 0.0))


def energy_norm(grid: Grid, u_hat: np.ndarray, ut_hat: np.ndarray) -> float:
    """``|u|_{C^0 Hdot^{3/2}} + |u_t|_{C^0 Hdot^{1/2}}`` over the nodes."""
    return float(node_norms(grid, u_hat, 1.5).max() + node_norms(grid, ut_hat, 0.5).max())


def forcing_l1_half(grid: Grid, g_hat: np.ndarray, dt: float) -> float:
    """``|G|_{L^1 Hdot^{1/2}}``."""
    return time_l1(node_norms(grid, g_hat, 0.5), dt)


def forcing_l2_half(grid: Grid, g_hat: np.ndarray, dt: float) -> float:
    """``|G|_{L^2 Hdot^{1/2}}``."""
    return time_l2(node_norms(grid, g_hat, 0.5), dt)


# -- linear forced solve -----------------------------------------------------

def free_evolution(data: CauchyData, times: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Exact free wave at each time, means included (they evolve affinely)."""
    grid = data.grid
    h0, h1 = data.spectral_with_means()
    k = grid.kmag
    u = np.empty((len(times), 3, grid.n, grid.n), complex)
    ut = np.empty_like(u)
    for j, t in enumerate(times):
        c, sn = cos_multiplier(grid, t), sinc_multiplier(grid, t)
        u[j] = c * h0 + sn * h1
        ut[j] = -(k * k) * sn * h0 + c * h1
    return u, ut


def _duhamel_increments(grid: Grid, g_hat: np.ndarray, dt: float, upto: int | None = None):
    """Yield ``(w, w_t)`` at nodes ``0..upto`` for the zero-data forced problem.

    Between nodes the state is carried by the exact propagator; the forcing
    integral over each step uses the trapezoidal rule.
    """
    k = grid.kmag
    c, sn = cos_multiplier(grid, dt), sinc_multiplier(grid, dt)
    ksn = -(k * k) * sn
    w = np.zeros(g_hat.shape[1:], complex)
    wt = np.zeros_like(w)
    last = g_hat.shape[0] - 1 if upto is None else upto
    yield w, wt
    for j in range(last):
        w, wt = (c * w + sn * wt + 0.5 * dt * sn * g_hat[j],
                 ksn * w + c * wt + 0.5 * dt * (c * g_hat[j] + g_hat[j + 1]))
        yield w, wt


def duhamel_solve(data: CauchyData, g_hat: np.ndarray, T: float) -> tuple[np.ndarray, np.ndarray]:
    """Solve ``u_tt - Delta u = G`` on all ``M+1`` nodes given spectral ``G`` there."""
    M = g_hat.shape[0] - 1
    times = np.linspace(0.0, T, M + 1)
    u, ut = free_evolution(data, times)
    if M == 0:
        return u, ut
    for j, (w, wt) in enumerate(_duhamel_increments(data.grid, g_hat, T / M)):
        u[j] += w
        ut[j] += wt
    return u, ut


def duhamel_step(data: CauchyData, forcing: SpaceTimeField, t_index: int) -> tuple[VectorField, VectorField]:
    """``(u, u_t)`` at node ``t_index`` for source ``forcing`` (stored in ``forcing.u_hat``)."""
    M = forcing.M
    if not 0 <= t_index <= M:
        raise IndexError(f"t_index {t_index} outside 0..{M}")
    t = forcing.times[t_index]
    u, ut = free_evolution(data, np.array([t]))
    for w, wt in _duhamel_increments(data.grid, forcing.u_hat, forcing.dt, upto=t_index):
        pass
    g = data.grid
    return VectorField.from_spectral(g, u[0] + w), VectorField.from_spectral(g, ut[0] + wt)


def cmc_source(grid: Grid, u_hat: np.ndarray) -> np.ndarray:
    """``G = -2 u_x ^ u_y`` at every node."""
    return -wedge_hat(grid, u_hat)


# -- Picard iteration --------------------------------------------------------

@dataclass
class ContractionLedger:
    """Per-iteration records; entry ``k`` compares ``u^(k+1)`` with ``u^(k)``."""

    diff_norm: list = field(default_factory=list)
    wedge_norm: list = field(default_factory=list)
    wedge_diff_norm: list = field(default_factory=list)
    converged: bool = False
    diverged: bool = False
    residual: float | None = None
    guarantees_void: bool = False

    def __len__(self):
        return len(self.diff_norm)

    def record(self, diff: float, wedge: float, wedge_diff: float):
        for v in (diff, wedge, wedge_diff):
            if not v >= 0:
                raise ValueError(f"ledger values must be nonnegative, got {v}")
        self.diff_norm.append(diff)
        self.wedge_norm.append(wedge)
        self.wedge_diff_norm.append(wedge_diff)

    def ratios(self) -> np.ndarray:
        """``diff(k+1) / diff(k)`` for ``k >= 1``."""
        d = np.asarray(self.diff_norm)
        if len(d) < 3:
            return np.array([])
        return d[2:] / d[1:-1]

    def rows(self) -> list[tuple]:
        return list(zip(range(len(self)), self.diff_norm, self.wedge_norm, self.wedge_diff_norm))

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("k,diff_norm,wedge_norm,wedge_diff_norm\n")
            for row in self.rows():
                fh.write("%d,%.17g,%.17g,%.17g\n" % row)


def integral_equation_residual(data: CauchyData, sol: SpaceTimeField) -> float:
    """Energy-norm distance between ``u`` and the Duhamel map applied to ``u``."""
    u, ut = duhamel_solve(data, cmc_source(data.grid, sol.u_hat), sol.T)
    return energy_norm(data.grid, sol.u_hat - u, sol.ut_hat - ut)


def picard_solve(data: CauchyData, schedule: IterationSchedule, M: int = 64, k_max: int = 30,
                 tol: float = 1e-10, T: float | None = None) -> tuple[SpaceTimeField, ContractionLedger]:
    """Iterate ``u^(0) = 0``, ``u^(k+1) = Duhamel(data, -2 u^(k)_x ^ u^(k)_y)``.

    Stops when the energy-norm difference of successive iterates drops to
    ``tol`` or after ``k_max`` iterations; three consecutive growths of the
    difference mark the run as diverged.  ``T`` defaults to ``schedule.T``.
    """
    grid = data.grid
    T = schedule.T if T is None else T
    dt = T / M
    ledger = ContractionLedger()
    ledger.guarantees_void = (not schedule.valid) or data.norm() > schedule.K * (1 + 1e-12) or T > schedule.T * (1 + 1e-12)
    if ledger.guarantees_void:
        log.warning("schedule conditions violated; running in research mode")

    shape = (M + 1, 3, grid.n, grid.n)
    u_prev = np.zeros(shape, complex)
    ut_prev = np.zeros(shape, complex)
    w_prev = np.zeros(shape, complex)  # 2 u_x ^ u_y of the previous iterate
    growth = 0
    for k in range(k_max):
        u_next, ut_next = duhamel_solve(data, -w_prev, T)
        w_next = wedge_hat(grid, u_next)
        diff = energy_norm(grid, u_next - u_prev, ut_next - ut_prev)
        ledger.record(diff,
                      0.5 * forcing_l2_half(grid, w_next, dt),
                      0.5 * forcing_l2_half(grid, w_next - w_prev, dt))
        log.debug("picard k=%d diff=%.3e", k, diff)
        u_prev, ut_prev, w_prev = u_next, ut_next, w_next
        if diff <= tol:
            ledger.converged = True
            break
        if k >= 1 and diff > ledger.diff_norm[-2]:
            growth += 1
            if growth >= 3:
                ledger.diverged = True
                log.warning("picard iteration diverging at k=%d", k)
                break
        else:
            growth = 0

    sol = SpaceTimeField(grid, T, u_prev, ut_prev)
    sol.residual = integral_equation_residual(data, sol)
    ledger.residual = sol.residual
    return sol, ledger


# -- independent integrator --------------------------------------------------

def leapfrog_oracle(data: CauchyData, T: float, dt: float, M: int | None = None,
                    nonlinear: bool = True) -> SpaceTimeField:
    """Flow / kick / flow integration of ``u_tt = Delta u - 2 u_x ^ u_y``.

    Each step advances the free wave exactly for ``dt/2``, applies the full
    nonlinear kick, and advances another ``dt/2`` (position Verlet).  The
    dealiased force is the gradient of the cubic potential, so the map is
    symplectic and second order; its midpoint treatment of the forcing makes
    it independent of the trapezoidal Duhamel quadrature.  Snapshots are
    emitted on ``M+1`` uniform nodes (default: every step); ``dt`` must
    divide ``T / M`` and satisfy ``dt * |xi|_max <= 1``.
    """
    grid = data.grid
    if not dt > 0:
        raise ValueError("dt must be positive")
    if dt * grid.kmax_retained > 1 + 1e-12:
        raise CFLError(f"dt*|xi|_max = {dt * grid.kmax_retained:.3g} exceeds 1")
    if M is None:
        M = max(1, int(round(T / dt)))
    per_node = (T / M) / dt
    steps = int(round(per_node))
    if steps < 1 or abs(per_node - steps) > 1e-9 * max(1.0, per_node):
        raise ValueError(f"dt={dt} does not divide the node spacing {T / M}")
    h = T / (M * steps)

    k = grid.kmag
    c, sn = cos_multiplier(grid, h / 2), sinc_multiplier(grid, h / 2)
    ksn = -(k * k) * sn
    u, v = data.spectral_with_means()

    out_u = np.empty((M + 1, 3, grid.n, grid.n), complex)
    out_v = np.empty_like(out_u)
    out_u[0], out_v[0] = u, v
    for j in range(1, M + 1):
        for _ in range(steps):
            u, v = c * u + sn * v, ksn * u + c * v
            if nonlinear:
                v = v + h * cmc_source(grid, u)
            u, v = c * u + sn * v, ksn * u + c * v
        out_u[j], out_v[j] = u, v
    return SpaceTimeField(grid, T, out_u, out_v)


def energy_functional(u: VectorField, u_t: VectorField) -> float:
    """``int 1/2 (|u_t|^2 + |grad u|^2) + 2/3 u . (u_x ^ u_y)`` over the box."""
    if u.grid != u_t.grid:
        raise ValueError("fields live on different grids")
    grid = u.grid
    quad = sobolev_norm_sq_hat(grid, u_t.spectral[None], 0.0)[0] + sobolev_norm_sq_hat(grid, u.spectral[None], 1.0)[0]
    uh = u.spectral * grid.dealias_mask
    w2 = wedge_hat(grid, uh)  # 2 u_x ^ u_y, dealiased
    up = ifft2(uh).real
    wp = ifft2(w2).real
    cubic = math.fsum((up * wp).ravel()) * grid.dx**2 / 3.0
    return 0.5 * quad + cubic


def energy_trajectory(sol: SpaceTimeField) -> np.ndarray:
    return np.array([energy_functional(sol.snapshot(j), sol.velocity(j)) for j in range(sol.M + 1)])


# -- experiments -------------------------------------------------------------

def energy_estimate_check(data: CauchyData, g_hat: np.ndarray, T: float) -> dict:
    """Both sides of the linear energy inequality for one forced problem."""
    grid = data.grid
    M = g_hat.shape[0] - 1
    u, ut = duhamel_solve(data, g_hat, T)
    lhs = energy_norm(grid, u, ut)
    rhs = data.norm() + forcing_l1_half(grid, g_hat, T / M)
    return {"lhs": lhs, "rhs": rhs, "ratio": lhs / rhs if rhs > 0 else 0.0,
            "holds": lhs <= 2 * rhs * 1.05}


def continuity_experiment(data: CauchyData, perturbation: CauchyData, eps: float,
                          schedule: IterationSchedule, M: int = 64, k_max: int = 30,
                          tol: float = 1e-13) -> dict:
    """Solve from ``data`` and from ``data + eps * perturbation/|perturbation|``.

    Reports the energy-norm distance of the two solutions against ``B eps``.
    """
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    pnorm = perturbation.norm()
    if eps > 0 and pnorm == 0:
        raise ValueError("zero perturbation with eps > 0")
    pert = perturbation.scaled(eps / pnorm) if eps > 0 else perturbation.scaled(0.0)
    other = data + pert
    u, lu = picard_solve(data, schedule, M, k_max, tol)
    v, lv = picard_solve(other, schedule, M, k_max, tol)
    if lu.diverged or lv.diverged:
        raise DivergenceError("a Picard solve diverged in the continuity experiment")
    diff = energy_norm(data.grid, u.u_hat - v.u_hat, u.ut_hat - v.ut_hat)
    bound = schedule.B * eps
    within_K = data.norm() <= schedule.K * (1 + 1e-12) and other.norm() <= schedule.K * (1 + 1e-12)
    return {
        "eps": eps,
        "data_distance": pert.norm(),
        "difference": diff,
        "B": schedule.B,
        "B_eps": bound,
        "ratio": diff / bound if bound > 0 else 0.0,
        "holds": diff <= 1.05 * bound,
        "within_K": within_K,
        "iterations": (len(lu), len(lv)),
    }
