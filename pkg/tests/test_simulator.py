"""Event-driven simulator: exactness, determinism, seeding, file formats.

The load-bearing checks are oracle-based:

* the 16-state matrix-exponential law for N = 2 with a fixed environment
  (independent linear-algebra route through ``duospin.oracle``);
* a chi-squared test of the per-event channel distribution against the
  analytic rates at a frozen state;
* near-independent-flip relaxation at vanishing couplings.
"""

import math
import os

import numpy as np
import pytest
from scipy.stats import chisquare

from duospin.kernel import sample_channels_frozen
from duospin.model import (
    CELL_SPINS,
    CellCounts,
    ModelParams,
    SpinConfig,
    cells_from_config,
    flip_rate_omega,
    flip_rate_sigma,
)
from duospin.oracle import (
    TWO_SITE_STATES,
    reference_simulate,
    total_variation,
    two_site_generator,
    two_site_initial_distribution,
    two_site_state_index,
    two_site_transient,
)
from duospin.simulate import (
    SimulationCapError,
    init_state,
    read_trajectory_csv,
    run_replicas,
    simulate,
    step,
    total_rate,
    write_trajectory_csv,
)

PARAMS = ModelParams(1.0, 1.0, 0.2, 100)


# ---------------------------------------------------------------------------
# Initialization
# ---------------------------------------------------------------------------


def test_init_state_counts_and_modes():
    p = PARAMS.with_n(1000)
    law4 = np.array([0.1, 0.2, 0.3, 0.4])
    st = init_state(p, law4, seed=1)
    assert st.cells.n == 1000 and st.time == 0.0

    st_zero = init_state(p, law4, seed=1, eta_mode="zero")
    cells = st_zero.cells.as_array()
    assert cells[0::2].sum() == 0  # eta = -1 cells empty

    eta = np.array([1] * 600 + [-1] * 400)
    st_fix = init_state(p, law4, seed=1, eta_mode="fixed-array", eta=eta)
    cells = st_fix.cells.as_array()
    assert cells[1::2].sum() == 600 and cells[0::2].sum() == 400

    law8 = np.full(8, 0.125)
    st_joint = init_state(p, law8, seed=1)
    assert st_joint.cells.n == 1000

    with pytest.raises(ValueError):
        init_state(p, law4, seed=1, eta_mode="fixed-array")
    with pytest.raises(ValueError):
        init_state(p, np.array([0.5, 0.6, 0.0, 0.0]), seed=1)
    with pytest.raises(ValueError):
        init_state(p, law4, seed=1, eta_mode="bogus")


def test_eta_marginal_is_frozen():
    rec = simulate(PARAMS, np.full(4, 0.25), 2.0, 0.1, seed=5)
    m_eta = rec.moments[:, 0]
    assert np.all(m_eta == m_eta[0])


# ---------------------------------------------------------------------------
# Determinism and seeding
# ---------------------------------------------------------------------------


def test_same_seed_bitwise_identical():
    a = simulate(PARAMS, np.full(4, 0.25), 1.0, 0.1, seed=123)
    b = simulate(PARAMS, np.full(4, 0.25), 1.0, 0.1, seed=123)
    np.testing.assert_array_equal(a.moments, b.moments)
    assert a.n_events == b.n_events


def test_different_seed_differs():
    a = simulate(PARAMS, np.full(4, 0.25), 1.0, 0.1, seed=123)
    b = simulate(PARAMS, np.full(4, 0.25), 1.0, 0.1, seed=124)
    assert not np.array_equal(a.moments, b.moments)


def test_run_replicas_thread_count_invariance():
    kw = dict(eta_mode="iid-symmetric")
    seq = run_replicas(PARAMS, np.full(4, 0.25), 0.5, 0.1, 6, 42, threads=1, **kw)
    par = run_replicas(PARAMS, np.full(4, 0.25), 0.5, 0.1, 6, 42, threads=3, **kw)
    for a, b in zip(seq, par):
        np.testing.assert_array_equal(a.moments, b.moments)
        assert a.seed == b.seed


def test_run_replicas_tuple_base_seed_namespacing():
    a = run_replicas(PARAMS, np.full(4, 0.25), 0.3, 0.1, 2, (7, 0))
    b = run_replicas(PARAMS, np.full(4, 0.25), 0.3, 0.1, 2, (7, 1))
    assert not np.array_equal(a[0].moments, b[0].moments)


# ---------------------------------------------------------------------------
# step() versus the batched kernel loop
# ---------------------------------------------------------------------------


def test_step_replays_batched_run_exactly():
    """Single-stepping must consume the identical RNG stream as run_chain."""
    p = PARAMS.with_n(50)
    t_end, dt = 1.5, 0.25
    rec = simulate(p, np.full(4, 0.25), t_end, dt, seed=77)

    state = init_state(p, np.full(4, 0.25), seed=77)  # step() works in place
    sample_times = rec.sample_times
    manual = np.empty_like(rec.moments)
    si = 0
    while si < len(sample_times):
        pre = state.moments().as_array()
        _, ev = step(state, p)
        while si < len(sample_times) and sample_times[si] < ev.time:
            manual[si] = pre
            si += 1
    np.testing.assert_array_equal(manual, rec.moments)


def test_step_returns_consistent_event():
    from duospin.model import cell_index

    state = init_state(PARAMS, np.full(4, 0.25), seed=3)
    before = state.cells.as_array()  # .cells snapshots; safe across step()
    _, ev = step(state, PARAMS)
    after = state.cells.as_array()
    assert state.time == ev.time > 0
    diff = after - before
    assert diff.sum() == 0 and np.abs(diff).sum() == 2
    src = int(np.flatnonzero(diff == -1)[0])
    dst = int(np.flatnonzero(diff == +1)[0])
    assert src == cell_index(*ev.cell)
    assert dst == (src ^ (4 if ev.kind == "sigma" else 2))


# ---------------------------------------------------------------------------
# Rates: two independent routes and the channel law
# ---------------------------------------------------------------------------


def test_total_rate_routes_agree():
    rng = np.random.default_rng(0)
    n = 40
    cfg = SpinConfig(
        rng.choice([-1, 1], n), rng.choice([-1, 1], n), rng.choice([-1, 1], n)
    )
    cells = cells_from_config(cfg)
    r_sites = total_rate(cfg, PARAMS)
    r_cells = total_rate(cells, PARAMS)
    assert r_sites == pytest.approx(r_cells, rel=1e-12)
    # independent recomputation
    m = float(np.mean(cfg.sigma))
    expected = sum(
        math.exp(-PARAMS.beta * s * o) + math.exp(-PARAMS.gamma * o * (m + PARAMS.h * e))
        for s, o, e in zip(cfg.sigma, cfg.omega, cfg.eta)
    )
    assert r_sites == pytest.approx(expected, rel=1e-12)


def test_channel_distribution_chisquared():
    """Frozen-state channel draws follow rate_c / total_rate."""
    from duospin.kernel import seed_rng_state

    p = ModelParams(0.8, 1.2, 0.3, 64)
    counts = CellCounts.from_array(np.array([3, 9, 7, 5, 11, 8, 13, 8]))
    draws = 200_000
    rng = seed_rng_state(np.random.SeedSequence(11))
    hist = sample_channels_frozen(
        counts.as_array(), counts.n, p.beta, p.gamma, p.h, draws, rng
    )
    assert hist.sum() == draws

    m = float(
        sum(c * i for c, (i, j, k) in zip(counts.as_array(), CELL_SPINS)) / counts.n
    )
    expected = np.empty(16)
    for c, (i, j, k) in enumerate(CELL_SPINS):
        expected[c] = counts.as_array()[c] * flip_rate_sigma(i, j, p)
        expected[8 + c] = counts.as_array()[c] * flip_rate_omega(j, k, m, p)
    expected *= draws / expected.sum()
    stat, pval = chisquare(hist, expected)
    assert pval > 1e-3, f"channel law rejected: p={pval}"


# ---------------------------------------------------------------------------
# Matrix-exponential oracle (N = 2, fixed environment)
# ---------------------------------------------------------------------------


def test_two_site_generator_is_a_generator():
    q = two_site_generator(ModelParams(1.1, 0.6, 0.4, 2), np.array([1, -1]))
    assert q.shape == (16, 16)
    np.testing.assert_allclose(q.sum(axis=1), 0.0, atol=1e-12)
    off = q - np.diag(np.diag(q))
    assert np.all(off >= 0)


def test_two_site_state_index_roundtrip():
    p = ModelParams(1.0, 1.0, 0.2, 2)
    eta = np.array([1, -1])
    for idx, (q1, q2) in enumerate(TWO_SITE_STATES):
        cfg = SpinConfig(
            np.array([q1[0], q2[0]]), np.array([q1[1], q2[1]]), eta
        )
        from duospin.model import moments_from_cells

        m = moments_from_cells(cells_from_config(cfg)).as_array()
        assert two_site_state_index(m) == idx


def test_simulator_matches_matrix_exponential():
    p = ModelParams(1.0, 1.0, 0.2, 2)
    eta = np.array([1, -1], dtype=np.int64)
    law4 = np.array([0.4, 0.1, 0.2, 0.3])
    t_end = 0.8
    replicas = 20_000
    counts = np.zeros(16, dtype=np.int64)
    for r in range(replicas):
        rec = simulate(p, law4, t_end, t_end, (99, r), eta_mode="fixed-array", eta=eta)
        counts[two_site_state_index(rec.moments[-1])] += 1
    empirical = counts / replicas
    exact = two_site_transient(p, eta, two_site_initial_distribution(law4), t_end)
    stderr = np.sqrt(exact * (1 - exact) / replicas)
    z = np.abs(empirical - exact) / np.maximum(stderr, 1e-12)
    assert np.max(z) < 4.0, f"max z-score {np.max(z):.2f}"
    assert total_variation(empirical, exact) < 0.02


def test_reference_simulator_agrees_with_fast_kernel():
    """Naive per-site reference and the cell kernel sample the same law."""
    p = ModelParams(0.9, 1.1, 0.25, 4)
    eta = np.array([1, -1, 1, -1], dtype=np.int64)
    law4 = np.full(4, 0.25)
    t_end = 0.5
    reps = 4000
    m_fast = np.empty(reps)
    m_ref = np.empty(reps)
    rng = np.random.default_rng(123)
    for r in range(reps):
        rec = simulate(p, law4, t_end, t_end, (5, r), eta_mode="fixed-array", eta=eta)
        m_fast[r] = rec.moments[-1][1]
        sig = rng.choice([-1, 1], 4)
        om = rng.choice([-1, 1], 4)
        cfg = SpinConfig(sig, om, eta)
        out = reference_simulate(p, cfg, t_end, rng)
        m_ref[r] = np.mean(out.sigma)
    # same mean magnetization within joint MC error
    se = math.sqrt(np.var(m_fast) / reps + np.var(m_ref) / reps)
    assert abs(m_fast.mean() - m_ref.mean()) < 4 * se


# ---------------------------------------------------------------------------
# Near-independent-flip relaxation at vanishing couplings
# ---------------------------------------------------------------------------


def test_telegraph_relaxation_at_tiny_couplings():
    """At beta, gamma ~ 0 each spin flips at rate ~1 independently, so
    magnetizations relax like exp(-2t)."""
    p = ModelParams(1e-9, 1e-9, 0.0, 20_000)
    law4 = np.array([0.0, 0.0, 0.5, 0.5])  # sigma all +1, omega symmetric
    rec = simulate(p, law4, 1.0, 0.5, seed=8)
    for t, m in zip(rec.sample_times, rec.moments):
        assert abs(m[1] - math.exp(-2 * t)) < 5.0 / math.sqrt(p.n)


# ---------------------------------------------------------------------------
# Files, caps, failure paths
# ---------------------------------------------------------------------------


def test_trajectory_csv_roundtrip(tmp_path):
    rec = simulate(PARAMS, np.full(4, 0.25), 1.0, 0.25, seed=6)
    path = os.path.join(tmp_path, "traj.csv")
    write_trajectory_csv(rec, path)
    times, moments, meta = read_trajectory_csv(path)
    np.testing.assert_array_equal(times, rec.sample_times)
    np.testing.assert_array_equal(moments, rec.moments)
    assert meta["params"]["beta"] == PARAMS.beta
    assert meta["n_events"] == rec.n_events


def test_event_cap_aborts_with_diagnostics():
    with pytest.raises(SimulationCapError) as err:
        simulate(PARAMS.with_n(1000), np.full(4, 0.25), 50.0, 1.0, seed=1,
                 max_events=10)
    assert "10" in str(err.value)


def test_run_replicas_reports_failed_indices():
    from duospin.simulate import ReplicaFailure

    with pytest.raises(ReplicaFailure) as err:
        run_replicas(PARAMS.with_n(1000), np.full(4, 0.25), 50.0, 1.0, 3, 1,
                     max_events=10)
    assert "replica 0" in str(err.value)
