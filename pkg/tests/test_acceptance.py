"""Acceptance criteria, one test and one printed PASS/FAIL line each.

Run alone with ``pytest tests/test_acceptance.py -v`` (about six minutes,
dominated by criteria 8 and 10), or as a script.
"""
import math
import time

import numpy as np
import pytest

from cmcwave import bilinear, duhamel, selfsimilar
from cmcwave.spectral import Grid, random_cauchy_data
from cmcwave.streams import stream

SEED = 2024


@pytest.fixture
def emit(capsys):
    def _emit(number: int, title: str, ok: bool, detail: str):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number:2d} {title}: {detail}")
    return _emit


@pytest.fixture(scope="module")
def kernel_scans():
    t0 = time.perf_counter()
    rand = bilinear.scan_kernel(*bilinear.random_samples(stream(SEED), 1_000_000))
    lat = bilinear.scan_kernel(*bilinear.lattice_samples(64))
    return rand, lat, time.perf_counter() - t0


def test_c01_kernel_bound(kernel_scans, emit):
    rand, lat, elapsed = kernel_scans
    qmax = max(rand["max_quotient"], lat["max_quotient"])
    ok = qmax <= 0.5 + 1e-12 and rand["violations"] == lat["violations"] == 0 and elapsed <= 60
    emit(1, "kernel quotient <= 1/2", ok,
         f"max {qmax:.10f} over {rand['count']} random + {lat['count']} lattice samples, "
         f"{rand['violations'] + lat['violations']} violations, {elapsed:.1f} s (limit 60 s)")
    assert ok


def test_c02_change_of_variables(kernel_scans, emit):
    rand, lat, _ = kernel_scans
    ident = max(rand["max_identity_error"], lat["max_identity_error"])
    jac = max(rand["max_jacobian_rel_error"], lat["max_jacobian_rel_error"])
    checked = rand["jacobian_fd_checked"] + lat["jacobian_fd_checked"]
    total = rand["count"] + lat["count"]
    ok = ident <= 1e-10 and jac <= 1e-6 and min(rand["min_jacobian"], lat["min_jacobian"]) > 0
    emit(2, "change of variables", ok,
         f"max ||xi - rho w| + rho - tau| = {ident:.2e} (<= 1e-10); jacobian vs central difference "
         f"rel {jac:.2e} (<= 1e-6) on {checked}/{total} samples with tau - xi.w >= 0.02 tau")
    assert ok


def test_c03_energy_estimate(emit):
    grid = Grid(64)
    rng = stream(SEED, 3)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(20):
        data = random_cauchy_data(grid, rng, rng.uniform(0.05, 2.0))
        T = rng.uniform(0.1, 2.0)
        om = rng.uniform(0, 3, size=3)
        t = np.linspace(0, T, 65)
        shape = random_cauchy_data(grid, rng, 1.0)
        amp = rng.uniform(0.1, 3.0)
        g = amp * np.cos(om[None, :, None, None] * t[:, None, None, None]) * shape.u1.spectral[None]
        r = duhamel.energy_estimate_check(data, g, T)
        worst = max(worst, r["lhs"] / (2 * r["rhs"]))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1.05 and elapsed <= 120
    emit(3, "linear energy estimate", ok,
         f"max LHS / (2 RHS) = {worst:.4f} over 20 forced problems (<= 1.05), {elapsed:.1f} s (limit 120 s)")
    assert ok


@pytest.mark.parametrize("K", [0.05, 0.1, 0.2])
def test_c04_picard_contraction(K, emit):
    grid = Grid(64)
    sched = duhamel.make_schedule(K, duhamel.DEFAULT_C)
    data = random_cauchy_data(grid, stream(SEED, 4), K)
    t0 = time.perf_counter()
    sol, led = duhamel.picard_solve(data, sched, M=64, k_max=30, tol=1e-10)
    elapsed = time.perf_counter() - t0
    ratio = float(led.ratios().max())
    wedge = max(led.wedge_norm) / sched.A
    ok = (sched.valid and led.converged and ratio <= 0.6 and wedge <= 1.05 and sol.residual <= 1e-8
          and len(led) <= 30 and elapsed <= 300)
    emit(4, f"Picard contraction K={K}", ok,
         f"max diff ratio {ratio:.4f} (<= 0.6), max wedge/A {wedge:.3e} (<= 1.05), residual "
         f"{sol.residual:.2e} (<= 1e-8) after {len(led)} iterations (<= 30), {elapsed:.1f} s (limit 300 s)")
    assert ok


def test_c05_oracle_equivalence(emit):
    grid = Grid(64)
    K = 0.1
    sched = duhamel.make_schedule(K, duhamel.DEFAULT_C)
    data = random_cauchy_data(grid, stream(SEED, 5), K)
    Ms = (16, 32, 64)
    errs = []
    for M in Ms:
        sol, _ = duhamel.picard_solve(data, sched, M=M, k_max=60, tol=1e-14)
        ref = duhamel.leapfrog_oracle(data, sched.T, sched.T / M)
        errs.append(float(duhamel.node_norms(grid, sol.u_hat - ref.u_hat, 1.5).max()))
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(len(Ms) - 1)]
    bound = [e / (10 * (sched.T / M) ** 2 * data.norm()) for e, M in zip(errs, Ms)]
    ok = max(bound) <= 1 and min(orders) >= 1.9
    emit(5, "Picard limit vs leapfrog oracle", ok,
         f"C0 H^3/2 differences {', '.join(f'{e:.2e}' for e in errs)} at M={Ms}; "
         f"max diff / (10 dt^2 |data|) = {max(bound):.2e} (<= 1); orders {', '.join(f'{o:.3f}' for o in orders)} (>= 1.9)")
    assert ok


def test_c06_continuous_dependence(emit):
    grid = Grid(64)
    K = 0.1
    sched = duhamel.make_schedule(K, duhamel.DEFAULT_C)
    rng = stream(SEED, 6)
    data = random_cauchy_data(grid, rng, K - 1e-2)
    pert = random_cauchy_data(grid, rng, 1.0)
    rows = [duhamel.continuity_experiment(data, pert, eps, sched, M=64, k_max=60) for eps in (1e-2, 1e-3)]
    ok = all(r["ratio"] <= 1.05 and r["within_K"] for r in rows)
    emit(6, "continuous dependence", ok,
         "; ".join(f"eps={r['eps']:g}: |u-v| = {r['difference']:.3e}, B eps = {r['B_eps']:.3e}, "
                   f"ratio {r['ratio']:.4f} (<= 1.05)" for r in rows))
    assert ok


def test_c07_energy_conservation(emit):
    # K = 0.2 over T = 1, far longer than the contraction horizon of the schedule
    grid = Grid(128)
    data = random_cauchy_data(grid, stream(SEED, 7), 0.2)
    T = 1.0
    M = math.ceil(T * grid.kmax_retained / 0.5)
    sol = duhamel.leapfrog_oracle(data, T, T / M, M=M)
    E = duhamel.energy_trajectory(sol)
    drift = float(np.abs(E - E[0]).max() / abs(E[0]))
    ok = drift <= 1e-6
    emit(7, "energy conservation (leapfrog)", ok,
         f"relative drift {drift:.2e} (<= 1e-6) at n=128, dt*|xi|max = {T / M * grid.kmax_retained:.3f}, "
         f"{M} steps over [0, {T:g}], K=0.2")
    assert ok


@pytest.mark.slow
def test_c08_bilinear_constant(emit):
    t0 = time.perf_counter()
    base = bilinear.estimate_constant(64, Grid(64), 8.0, SEED)
    fine = bilinear.estimate_constant(64, Grid(128), 16.0, SEED)
    elapsed = time.perf_counter() - t0
    change = abs(fine["C"] - base["C"]) / base["C"]
    finite = all(np.isfinite(s["max"]) for r in (base, fine) for s in r["per_sign"].values())
    # regression against the frozen value used for the default C of the solver
    frozen = abs(fine["C"] - duhamel.EMPIRICAL_BILINEAR_CONSTANT) <= 5e-4
    ok = change <= 0.10 and finite and frozen
    signs = ", ".join(f"{k} {v['max']:.4f}" for k, v in fine["per_sign"].items())
    emit(8, "bilinear constant stability", ok,
         f"C = {base['C']:.5f} (n=64, T_w=8) -> {fine['C']:.5f} (n=128, T_w=16), change {change:.2%} (<= 10%); "
         f"sign variants finite: {signs}; frozen {duhamel.EMPIRICAL_BILINEAR_CONSTANT}; {elapsed:.0f} s")
    assert ok


def _annulus_solution(m):
    a = np.array([1.0, -2.0, 0.5])

    def func(X, Y):
        s = selfsimilar.sigma_of_rho(np.hypot(X, Y))
        th = np.arctan2(Y, X)
        return 0.2 * a[:, None, None] * ((s**m + s**-m) * np.cos(m * th) + 0.3 * np.log(s))
    return func


def test_c09_selfsimilar_identities(emit):
    lo, hi = 0.3, 0.95
    grid = selfsimilar.PolarGrid(48, 32, lo, hi)
    parts, ok = [], True
    for m in (1, 2):
        v = selfsimilar.SelfSimilarProfile.from_cartesian(grid, _annulus_solution(m))
        res = float(np.abs(selfsimilar.reduced_residual(v)).max())
        spread = float(np.ptp(selfsimilar.identity_integral(v, np.linspace(lo, hi, 40))))
        ok &= res <= 1e-8 and spread <= 1e-6
        parts.append(f"m={m}: residual {res:.1e} (<= 1e-8), spread {spread:.1e} (<= 1e-6)")
    test = selfsimilar.SelfSimilarProfile.from_cartesian(
        selfsimilar.PolarGrid(32, 32), lambda X, Y: np.stack([X, Y, 0 * X]))
    err = abs(selfsimilar.identity_integral(test, 0.5) + np.pi / 8)
    ok &= err <= 1e-8
    parts.append(f"(rho cos, rho sin, 0) at rho=1/2: |I + pi/8| = {err:.1e} (<= 1e-8)")
    emit(9, "self-similar identities", ok, "; ".join(parts))
    assert ok


@pytest.mark.slow
def test_c10_falsification_suite(emit):
    grid = selfsimilar.PolarGrid(64, 64)
    t0 = time.perf_counter()
    runs = [selfsimilar.profile_search(seed, grid) for seed in range(32)]
    elapsed = time.perf_counter() - t0
    counts = {c: sum(r.classification == c for r in runs) for c in ("trivial", "nontrivial", "not-converged")}
    ok = counts["nontrivial"] == 0 and elapsed <= 900
    emit(10, "falsification suite", ok,
         f"32 seeds at 64x64: {counts['trivial']} trivial, {counts['nontrivial']} nontrivial (== 0), "
         f"{counts['not-converged']} not converged; {elapsed:.0f} s (limit 900 s)")
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
