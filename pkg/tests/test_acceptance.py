"""Acceptance gate: ten end-to-end criteria, one pass/fail line each.

Every test prints ``criterion NN PASS|FAIL — <what was measured>`` before
asserting, so a ``pytest -s`` run shows the full scoreboard.  Seeds are
pinned; every simulation here is byte-for-byte reproducible, so the
statistical margins observed at pin time are locked in.
"""

import math
import time

import numpy as np
import pytest

from duospin import kernel
from duospin.critical import (
    CubicSdeParams,
    critical_params,
    cubic_stationary_moments,
    null_direction_residual,
    run_homogeneous_critical,
    run_inhomogeneous_critical,
    sde_oracle,
)
from duospin.equilibria import (
    equilibrium_moments,
    jacobian_at_neutral,
    phase_diagram_scan,
)
from duospin.fluctuations import (
    FluctuationModel,
    clt_experiment,
    diffusion_sq,
    drift_a1,
    drift_a2,
    propagate_clt,
)
from duospin.limit import flow_comparison, integrate, mkv_rhs
from duospin.model import (
    CELL_SPINS,
    MOMENT_PATTERNS,
    ModelParams,
    MomentVector,
    cell_index,
    moments_to_cell_probs,
)
from duospin.oracle import (
    two_site_initial_distribution,
    two_site_state_index,
    two_site_transient,
)
from duospin.simulate import SimState, simulate, step

SEED = 20260818


def _report(num: int, ok: bool, detail: str) -> None:
    print(f"criterion {num:02d} {'PASS' if ok else 'FAIL'} — {detail}")


# ---------------------------------------------------------------------------
# 1. Exactness against the two-site matrix-exponential law
# ---------------------------------------------------------------------------


def test_criterion_01_two_site_exactness():
    params = ModelParams(1.0, 1.0, 0.2, n=2)
    law4 = [0.25] * 4
    eta = (1, -1)
    replicas = 100_000
    t0 = time.monotonic()
    counts = np.zeros(16, dtype=np.int64)
    for r in range(replicas):
        rec = simulate(params, law4, 1.0, 1.0, (SEED, 1, r),
                       eta_mode="fixed-array", eta=eta)
        counts[two_site_state_index(rec.moments[-1])] += 1
    elapsed = time.monotonic() - t0
    empirical = counts / replicas
    exact = two_site_transient(params, eta, two_site_initial_distribution(law4), 1.0)
    stderr = np.sqrt(exact * (1.0 - exact) / replicas)
    z = np.abs(empirical - exact) / stderr
    ok = bool(np.max(z) < 3.0) and elapsed < 60.0
    _report(1, ok, f"two-site law max |z| = {np.max(z):.3f} over 16 states "
                   f"(< 3), {elapsed:.1f}s (< 60s)")
    assert np.max(z) < 3.0
    assert elapsed < 60.0


# ---------------------------------------------------------------------------
# 2. Law of large numbers with a CLT-calibrated envelope
# ---------------------------------------------------------------------------


def test_criterion_02_law_of_large_numbers():
    params = ModelParams(1.0, 1.0, 0.2, n=10_000)
    zeros = np.zeros(7)
    t0 = time.monotonic()
    path = integrate(zeros, params, 10.0)
    model = FluctuationModel(params, MomentVector(*zeros))
    grid = np.linspace(0.0, 10.0, 201)
    cond_cov = propagate_clt(model, path, 0.0, times=grid)
    response = propagate_clt(model, path, 1.0, times=grid)
    # per-component variance envelope: conditional covariance plus the
    # squared mean response to a unit environment imbalance (Var r(0) = 1)
    var_max = (np.max(np.einsum("tcc->tc", cond_cov.covs), axis=0)
               + np.max(response.means**2, axis=0))
    bound = np.concatenate([[5.0 / math.sqrt(params.n)],
                            5.0 * np.sqrt(var_max / params.n)])
    seeds_ok = 0
    worst = 0.0
    for s in range(10):
        rec = simulate(params, [0.25] * 4, 10.0, 0.1, (SEED, 2, s))
        sups = flow_comparison(rec, path)
        worst = max(worst, float(np.max(sups / bound)))
        seeds_ok += bool(np.all(sups <= bound))
    elapsed = time.monotonic() - t0
    ok = seeds_ok >= 9 and elapsed < 300.0
    _report(2, ok, f"sup|empirical - ODE| within 5-sigma envelope for "
                   f"{seeds_ok}/10 seeds (need >= 9), worst ratio {worst:.2f}, "
                   f"{elapsed:.1f}s (< 300s)")
    assert seeds_ok >= 9
    assert elapsed < 300.0


# ---------------------------------------------------------------------------
# 3. Phase structure on a 50x50 grid
# ---------------------------------------------------------------------------


def test_criterion_03_phase_structure():
    beta = 1.0
    tol = 1e-10
    t0 = time.monotonic()
    pd = phase_diagram_scan(beta, (0.5, 4.0), (0.0, 0.6), 50)
    elapsed = time.monotonic() - t0
    thb = math.tanh(beta)
    gammas = np.linspace(0.5, 4.0, 50)
    hs = np.linspace(0.0, 0.6, 50)
    mismatches = 0
    lambda_mismatches = 0
    for i, g in enumerate(gammas):
        for j, h in enumerate(hs):
            resid = g * thb - math.cosh(g * h) ** 2
            phase = int(pd.phase[i, j])
            lam1 = float(pd.lambda1[i, j])
            if resid > tol:
                mismatches += phase != 1
                lambda_mismatches += not lam1 > 0
            elif resid < -tol:
                mismatches += phase not in (0, 2)
                lambda_mismatches += not lam1 < 0
    n_phase2 = int(np.sum(pd.phase == 2))
    ok = (mismatches == 0 and lambda_mismatches == 0 and n_phase2 > 0
          and not pd.failures and elapsed < 60.0)
    _report(3, ok, f"2500-point grid: {mismatches} phase mismatches, "
                   f"{lambda_mismatches} eigenvalue-sign mismatches, "
                   f"{n_phase2} bistable points (> 0), "
                   f"{len(pd.failures)} failures, {elapsed:.1f}s (< 60s)")
    assert mismatches == 0
    assert lambda_mismatches == 0
    assert n_phase2 > 0
    assert not pd.failures
    assert elapsed < 60.0


# ---------------------------------------------------------------------------
# 4. Closed-form spectrum of the neutral linearization
# ---------------------------------------------------------------------------


def test_criterion_04_eigenvalue_closed_forms():
    rng = np.random.default_rng(SEED + 4)
    worst = 0.0
    for _ in range(100):
        params = ModelParams(rng.uniform(0.3, 2.0), rng.uniform(0.3, 4.0),
                             rng.uniform(0.0, 0.8))
        nj = jacobian_at_neutral(params)
        gap = np.max(np.abs(np.sort(nj.closed_form.real)
                            - np.sort(nj.numerical.real)))
        gap = max(gap, float(np.max(np.abs(nj.numerical.imag))))
        worst = max(worst, float(gap))
    boundary_worst = 0.0
    for beta, h in [(1.0, 0.3), (0.7, 0.1), (1.2, 0.15), (1.0, 0.0)]:
        p = critical_params(beta, h)
        boundary_worst = max(boundary_worst, abs(jacobian_at_neutral(p).leading))
    ok = worst < 1e-9 and boundary_worst < 1e-10
    _report(4, ok, f"closed vs numerical spectrum max gap {worst:.2e} "
                   f"(< 1e-9) over 100 draws; |lambda_1| at boundary "
                   f"{boundary_worst:.2e} (< 1e-10)")
    assert worst < 1e-9
    assert boundary_worst < 1e-10


# ---------------------------------------------------------------------------
# 5. Finite-difference consistency of the fluctuation drift
# ---------------------------------------------------------------------------


def _random_dynamic_state(rng) -> np.ndarray:
    while True:
        p = rng.dirichlet(np.ones(8))
        m = MOMENT_PATTERNS.astype(float) @ p
        m[0] = 0.0
        probs = (1.0 + MOMENT_PATTERNS.T.astype(float) @ m) / 8.0
        if probs.min() > 1e-6:
            return m


def test_criterion_05_jacobian_consistency():
    rng = np.random.default_rng(SEED + 5)
    eps = 1e-5
    worst_a2 = 0.0
    worst_a1 = 0.0
    for _ in range(100):
        m = _random_dynamic_state(rng)
        params = ModelParams(rng.uniform(0.3, 2.0), rng.uniform(0.3, 3.0),
                             rng.uniform(0.0, 1.0))
        a2 = 2.0 * drift_a2(m, params)
        fd = np.empty((6, 6))
        for c in range(6):
            up, dn = m.copy(), m.copy()
            up[1 + c] += eps
            dn[1 + c] -= eps
            fd[:, c] = (mkv_rhs(up, params)[1:] - mkv_rhs(dn, params)[1:]) / (2 * eps)
        scale = max(1.0, float(np.max(np.abs(a2))))
        worst_a2 = max(worst_a2, float(np.max(np.abs(fd - a2))) / scale)

        a1 = 2.0 * drift_a1(m, params)
        up, dn = m.copy(), m.copy()
        up[0] += eps
        dn[0] -= eps
        fd1 = (mkv_rhs(up, params)[1:] - mkv_rhs(dn, params)[1:]) / (2 * eps)
        scale1 = max(1.0, float(np.max(np.abs(a1))))
        worst_a1 = max(worst_a1, float(np.max(np.abs(fd1 - a1))) / scale1)
    ok = worst_a2 < 1e-6 and worst_a1 < 1e-6
    _report(5, ok, f"finite-difference vs constructed drift over 100 states: "
                   f"state-Jacobian gap {worst_a2:.2e}, environment-derivative "
                   f"gap {worst_a1:.2e} (both < 1e-6 relative)")
    assert worst_a2 < 1e-6
    assert worst_a1 < 1e-6


# ---------------------------------------------------------------------------
# 6. Event-level quadratic variation matches the diffusion matrix
# ---------------------------------------------------------------------------


def test_criterion_06_diffusion_matrix():
    params = ModelParams(1.0, 1.0, 0.2, n=10_000)
    n = params.n
    m_star = equilibrium_moments(0.0, params)
    p8 = moments_to_cell_probs(m_star)
    cells = np.floor(n * p8).astype(np.int64)
    order = np.argsort(-(n * p8 - cells))
    cells[order[: n - cells.sum()]] += 1

    state = SimState(cells, 0.0, kernel.seed_rng_state(
        np.random.SeedSequence((SEED, 6))))
    t0 = time.monotonic()
    counts = np.zeros((8, 2), dtype=np.int64)
    for _ in range(1_000_000):
        state, ev = step(state, params)
        counts[cell_index(*ev.cell), 0 if ev.kind == "sigma" else 1] += 1
    elapsed = time.monotonic() - t0

    qv = np.zeros((6, 6))
    for c, (i, j, k) in enumerate(CELL_SPINS):
        v_sig = np.array([i, 0, i * j, i * k, 0, i * j * k], dtype=float)
        v_om = np.array([0, j, i * j, 0, j * k, i * j * k], dtype=float)
        qv += (counts[c, 0] * np.outer(v_sig, v_sig)
               + counts[c, 1] * np.outer(v_om, v_om))
    dd_hat = 4.0 * qv / (n * state.time)
    dd = diffusion_sq(m_star, params)
    mask = np.abs(dd) > 0.01
    rel = float(np.max(np.abs(dd_hat - dd)[mask] / np.abs(dd)[mask]))
    ok = rel < 0.05 and elapsed < 120.0
    _report(6, ok, f"10^6-event quadratic variation vs diffusion matrix: "
                   f"max relative gap {rel:.4f} (< 0.05) on {int(mask.sum())} "
                   f"significant entries, {elapsed:.1f}s (< 120s)")
    assert rel < 0.05
    assert elapsed < 120.0


# ---------------------------------------------------------------------------
# 7. CLT covariance and marginal normality
# ---------------------------------------------------------------------------


def test_criterion_07_clt_covariance():
    params = ModelParams(1.0, 1.0, 0.2, n=10_000)
    t0 = time.monotonic()
    report = clt_experiment(params, MomentVector(*np.zeros(7)), 2.0, 1000,
                            (SEED, 7))
    elapsed = time.monotonic() - t0
    ok = (report.frobenius_rel <= 0.10 and report.normality_ok()
          and elapsed < 1800.0)
    _report(7, ok, f"1000-replica covariance vs propagated law: relative "
                   f"Frobenius {report.frobenius_rel:.4f} (<= 0.10), "
                   f"normality stats {report.anderson_stat_sigma:.3f}/"
                   f"{report.anderson_stat_omega:.3f} vs 1% critical "
                   f"{report.anderson_crit_1pct:.3f}, {elapsed:.1f}s (< 1800s)")
    assert report.frobenius_rel <= 0.10
    assert report.normality_ok()
    assert elapsed < 1800.0


# ---------------------------------------------------------------------------
# 8. Inhomogeneous critical scaling (quarter-power clock)
# ---------------------------------------------------------------------------


def test_criterion_08_inhomogeneous_critical():
    t0 = time.monotonic()
    res = run_inhomogeneous_critical(1.0, 0.3, base_seed=SEED)
    elapsed = time.monotonic() - t0
    corr = res.summary[16000]["slope_correlation"]
    z_med = [res.summary[n]["median_sup_zbar"] for n in (1000, 4000, 16000)]
    v_med = [res.summary[n]["median_sup_vbar"] for n in (1000, 4000, 16000)]
    z_dec = z_med[0] > z_med[1] > z_med[2]
    v_dec = v_med[0] > v_med[1] > v_med[2]
    ok = corr > 0.9 and z_dec and v_dec and elapsed < 7200.0
    _report(8, ok, f"slope correlation {corr:.4f} at N=16000 (> 0.9, 200 "
                   f"replicas); collapse medians decrease "
                   f"{z_med[0]:.3f}>{z_med[1]:.3f}>{z_med[2]:.3f} and "
                   f"{v_med[0]:.3f}>{v_med[1]:.3f}>{v_med[2]:.3f}, "
                   f"{elapsed:.0f}s (< 7200s)")
    assert corr > 0.9
    assert z_dec and v_dec
    assert elapsed < 7200.0


# ---------------------------------------------------------------------------
# 9. Homogeneous critical law (half-power clock, cubic diffusion)
# ---------------------------------------------------------------------------


def test_criterion_09_homogeneous_critical():
    t0 = time.monotonic()
    sde = CubicSdeParams.from_beta(1.0)
    q2, q4 = cubic_stationary_moments(sde)
    long_run = sde_oracle(sde, 3.0, 0.005, 100_000, seed=(SEED, 9))
    e2, e4 = long_run.moments()
    oracle_gap = max(abs(e2 / q2 - 1.0), abs(e4 / q4 - 1.0))

    res = run_homogeneous_critical(1.0, base_seed=SEED)
    elapsed = time.monotonic() - t0
    s = res.summary[4000]
    gap_m2 = abs(s["theta_m2"] / s["oracle_m2"] - 1.0)
    gap_m4 = abs(s["theta_m4"] / s["oracle_m4"] - 1.0)
    kurt_hi = s["excess_kurtosis"] + 3.0 * s["excess_kurtosis_se"]
    ok = (oracle_gap < 0.02 and gap_m2 <= 0.15 and gap_m4 <= 0.15
          and kurt_hi < 0.0 and elapsed < 7200.0)
    _report(9, ok, f"chain vs SDE oracle at N=4000: second/fourth-moment "
                   f"gaps {gap_m2:.3f}/{gap_m4:.3f} (<= 0.15); oracle vs "
                   f"quadrature gap {oracle_gap:.4f} (< 0.02); excess "
                   f"kurtosis {s['excess_kurtosis']:.3f} + 3se = "
                   f"{kurt_hi:.3f} (< 0), {elapsed:.0f}s (< 7200s)")
    assert oracle_gap < 0.02
    assert gap_m2 <= 0.15
    assert gap_m4 <= 0.15
    assert kurt_hi < 0.0
    assert elapsed < 7200.0


# ---------------------------------------------------------------------------
# 10. Null-direction identity (no simulation)
# ---------------------------------------------------------------------------


def test_criterion_10_null_direction_identity():
    worst = 0.0
    for beta, h in [(1.0, 0.3), (1.0, 0.0), (0.8, 0.2)]:
        worst = max(worst, null_direction_residual(critical_params(beta, h)))
    ok = worst < 1e-10
    _report(10, ok, f"leading-coordinate row annihilates the critical "
                    f"linear drift: max residual {worst:.2e} (< 1e-10)")
    assert worst < 1e-10
