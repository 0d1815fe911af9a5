"""Fluctuation ingredients: linear drift, diffusion matrix, initial
covariance, Lyapunov propagation.

Oracles: finite differences of the moment drift for A2 and A1; a
first-principles cell sum for the diffusion matrix; an 8-atom brute-force
single-site covariance for the initial covariance; and
``scipy.linalg.solve_continuous_lyapunov`` for the stationary covariance.
"""

import math

import numpy as np
import pytest
from scipy.linalg import solve_continuous_lyapunov

from duospin.equilibria import equilibrium_moments, jacobian_at_neutral
from duospin.fluctuations import (
    FLUCTUATION_COMPONENTS,
    FluctuationModel,
    clt_experiment,
    diffusion_sq,
    drift_a1,
    drift_a2,
    empirical_fluctuations,
    init_covariance,
    propagate_clt,
    write_covariance_csv,
)
from duospin.limit import integrate, mkv_rhs
from duospin.model import (
    CELL_SPINS,
    ModelParams,
    MomentVector,
    flip_rate_omega,
    flip_rate_sigma,
    moments_to_cell_probs,
)
from duospin.simulate import init_state, simulate

PARAMS = ModelParams(1.0, 1.0, 0.2)


def _random_dynamic_state(rng) -> np.ndarray:
    """A realizable moment vector with zero environment mean."""
    while True:
        p = rng.dirichlet(np.ones(8))
        from duospin.model import MOMENT_PATTERNS

        m = MOMENT_PATTERNS.astype(float) @ p
        # project the environment moment to zero, keep realizability
        m[0] = 0.0
        probs = (1.0 + MOMENT_PATTERNS.T.astype(float) @ m) / 8.0
        if probs.min() > 1e-6:
            return m


# ---------------------------------------------------------------------------
# A2 and A1 against finite differences of the drift
# ---------------------------------------------------------------------------


def test_a2_is_half_jacobian_of_rhs():
    rng = np.random.default_rng(7)
    for _ in range(100):
        m = _random_dynamic_state(rng)
        beta = rng.uniform(0.3, 2.0)
        gamma = rng.uniform(0.3, 3.0)
        h = rng.uniform(0.0, 1.0)
        params = ModelParams(beta, gamma, h)
        a2 = drift_a2(m, params)
        eps = 1e-6
        fd = np.empty((6, 6))
        for col in range(6):
            up = m.copy()
            dn = m.copy()
            up[1 + col] += eps
            dn[1 + col] -= eps
            fd[:, col] = (mkv_rhs(up, params)[1:] - mkv_rhs(dn, params)[1:]) / (2 * eps)
        np.testing.assert_allclose(
            2.0 * a2, fd, atol=1e-6 * max(1.0, np.abs(2 * a2).max())
        )


def test_a1_is_half_environment_derivative_of_rhs():
    rng = np.random.default_rng(8)
    for _ in range(100):
        m = _random_dynamic_state(rng)
        params = ModelParams(rng.uniform(0.3, 2.0), rng.uniform(0.3, 3.0),
                             rng.uniform(0.0, 1.0))
        a1 = drift_a1(m, params)
        eps = 1e-6
        up = m.copy()
        dn = m.copy()
        up[0] += eps
        dn[0] -= eps
        fd = (mkv_rhs(up, params)[1:] - mkv_rhs(dn, params)[1:]) / (2 * eps)
        np.testing.assert_allclose(2.0 * a1, fd, atol=1e-6)


def test_a2_equals_neutral_jacobian_at_stationary_state():
    params = ModelParams(1.0, 2.0, 0.3)
    m_star = equilibrium_moments(0.0, params)
    a2 = drift_a2(m_star, params)
    jac = jacobian_at_neutral(params)
    np.testing.assert_allclose(2.0 * a2, jac.matrix, atol=1e-12)


# ---------------------------------------------------------------------------
# Diffusion matrix
# ---------------------------------------------------------------------------


def brute_force_diffusion(m_arr, params):
    """Sum of rate-weighted outer products of the moment jumps, assembled
    directly from the flip-rate primitives."""
    probs = moments_to_cell_probs(np.asarray(m_arr, dtype=float))
    m_sigma = float(m_arr[1])
    out = np.zeros((6, 6))
    for c, (i, j, k) in enumerate(CELL_SPINS):
        # jumps of (sigma, omega, sigma_omega, sigma_eta, omega_eta,
        # sigma_omega_eta) under a sigma-flip and an omega-flip of this cell
        d_sig = np.array([-2 * i, 0, -2 * i * j, -2 * i * k, 0, -2 * i * j * k], float)
        d_om = np.array([0, -2 * j, -2 * i * j, 0, -2 * j * k, -2 * i * j * k], float)
        out += probs[c] * flip_rate_sigma(i, j, params) * np.outer(d_sig, d_sig)
        out += probs[c] * flip_rate_omega(j, k, m_sigma, params) * np.outer(d_om, d_om)
    return out


def test_diffusion_matches_brute_force():
    rng = np.random.default_rng(9)
    for _ in range(50):
        m = _random_dynamic_state(rng)
        params = ModelParams(rng.uniform(0.3, 2.0), rng.uniform(0.3, 3.0),
                             rng.uniform(0.0, 1.0))
        d = diffusion_sq(m, params)
        np.testing.assert_allclose(d, brute_force_diffusion(m, params), atol=1e-12)
        np.testing.assert_allclose(d, d.T, atol=1e-14)
        assert np.linalg.eigvalsh(d).min() > -1e-12


def test_diffusion_at_vanishing_couplings():
    """As beta, gamma -> 0 all rates -> 1 and the diffusion matrix tends to
    4 diag(1, 1, 2, 1, 1, 2) at the uniform symmetric state."""
    params = ModelParams(1e-9, 1e-9, 0.0)
    d = diffusion_sq(MomentVector.zero(), params)
    np.testing.assert_allclose(d, 4.0 * np.diag([1, 1, 2, 1, 1, 2.0]), atol=1e-7)


# ---------------------------------------------------------------------------
# Initial covariance
# ---------------------------------------------------------------------------


def brute_force_init_cov(lambda_moments):
    """Single-site covariance of the seven spin products, from the 8-atom
    law implied by the moments."""
    probs = moments_to_cell_probs(lambda_moments)
    feats = np.array(
        [
            [k, i, j, i * j, i * k, j * k, i * j * k]
            for (i, j, k) in CELL_SPINS
        ],
        dtype=float,
    )
    mean = probs @ feats
    cov = (feats - mean).T @ np.diag(probs) @ (feats - mean)
    return cov


def test_init_covariance_matches_brute_force():
    rng = np.random.default_rng(10)
    for _ in range(50):
        m = np.zeros(7)
        m[1], m[2], m[3] = rng.uniform(-0.5, 0.5, 3)
        try:
            lam = MomentVector.from_array(m)
        except ValueError:
            continue
        cov = init_covariance(lam)
        np.testing.assert_allclose(cov, brute_force_init_cov(lam), atol=1e-12)


def test_init_covariance_identity_for_symmetric_law():
    cov = init_covariance(MomentVector.zero())
    np.testing.assert_allclose(cov, np.eye(7), atol=1e-14)


def test_init_covariance_rejects_environment_moments():
    with pytest.raises(ValueError):
        init_covariance(MomentVector.from_array([0.2, 0, 0, 0, 0, 0, 0]))
    with pytest.raises(ValueError):
        init_covariance(MomentVector.from_array([0, 0, 0, 0, 0.1, 0, 0]))


# ---------------------------------------------------------------------------
# Lyapunov propagation
# ---------------------------------------------------------------------------


def test_propagated_covariance_reaches_lyapunov_fixed_point():
    params = PARAMS
    m_star = equilibrium_moments(0.0, params)
    a2x2 = 2.0 * drift_a2(m_star, params)
    ddt = diffusion_sq(m_star, params)
    sigma_inf = solve_continuous_lyapunov(a2x2, -ddt)
    # residual of the algebraic equation
    res = a2x2 @ sigma_inf + sigma_inf @ a2x2.T + ddt
    assert np.max(np.abs(res)) < 1e-8

    lam = MomentVector.zero()
    model = FluctuationModel(params, lam)
    path = integrate(MomentVector.from_array(m_star), params, 40.0)
    prop = propagate_clt(model, path, 0.0, times=np.array([0.0, 40.0]))
    np.testing.assert_allclose(prop.covs[-1], sigma_inf, atol=1e-6)


def test_propagation_mean_linear_in_realization():
    lam = MomentVector.from_array([0, 0.3, 0.1, 0.2, 0, 0, 0])
    model = FluctuationModel(PARAMS, lam)
    m0 = MomentVector.from_array(np.concatenate([[0.0], lam.as_array()[1:]]))
    path = integrate(m0, PARAMS, 3.0)
    p1 = propagate_clt(model, path, 1.0)
    p2 = propagate_clt(model, path, 2.0)
    np.testing.assert_allclose(p2.means, 2.0 * p1.means, atol=1e-8)
    np.testing.assert_allclose(p2.covs, p1.covs, atol=1e-9)


def test_propagation_initial_condition_conditions_on_r():
    lam = MomentVector.from_array([0, 0.3, 0.1, 0.2, 0, 0, 0])
    model = FluctuationModel(PARAMS, lam)
    m0 = MomentVector.from_array(np.concatenate([[0.0], lam.as_array()[1:]]))
    path = integrate(m0, PARAMS, 1.0)
    prop = propagate_clt(model, path, 1.5, times=np.array([0.0]))
    cross = model.init_cov[1:, 0]
    np.testing.assert_allclose(prop.means[0], 1.5 * cross, atol=1e-14)
    np.testing.assert_allclose(
        prop.covs[0], model.init_cov[1:, 1:] - np.outer(cross, cross), atol=1e-14
    )


def test_null_direction_variance_grows_linearly_at_criticality():
    """On the continuous boundary the left null vector of the linear drift
    turns the Lyapunov equation into straight-line variance growth."""
    from duospin.critical import critical_params, critical_transform

    params = critical_params(1.0, 0.3)
    t_mat, center = critical_transform(params)
    a1_left = t_mat[0]
    m_star = equilibrium_moments(0.0, params)
    model = FluctuationModel(params, MomentVector.zero())
    path = integrate(MomentVector.from_array(m_star), params, 10.0)
    times = np.array([0.0, 2.5, 5.0, 10.0])
    prop = propagate_clt(model, path, 0.0, times=times)
    rate = a1_left @ diffusion_sq(m_star, params) @ a1_left
    var = np.array([a1_left @ c @ a1_left for c in prop.covs])
    np.testing.assert_allclose(var - var[0], rate * times, rtol=1e-6, atol=1e-6)
    # ... while a stable direction saturates
    stable = np.array([0.0, 0.0, 1.0, 0.0, 0.0, 0.0])
    sv = np.array([stable @ c @ stable for c in prop.covs])
    assert abs(sv[-1] - sv[-2]) < 0.05 * abs(sv[-1] - sv[0] + 1e-30) + 1e-6


# ---------------------------------------------------------------------------
# Empirical fluctuations
# ---------------------------------------------------------------------------


def test_environment_imbalance_variance_is_unit():
    """sqrt(N) m_eta over iid symmetric draws has variance ~ 1."""
    params = PARAMS.with_n(10_000)
    vals = np.empty(4000)
    for s in range(vals.size):
        st = init_state(params, np.full(4, 0.25), (1234, s))
        vals[s] = math.sqrt(params.n) * st.moments().as_array()[0]
    v = vals.var()
    assert 0.9 < v < 1.1, v


def test_empirical_fluctuations_scaling_and_r():
    params = PARAMS.with_n(400)
    rec = simulate(params, np.full(4, 0.25), 1.0, 0.5, seed=3)
    path = integrate(MomentVector.zero(), params, 1.0)
    fl = empirical_fluctuations(rec, path)
    assert fl.scaling == "sqrtN-CLT"
    scale = math.sqrt(params.n)
    np.testing.assert_allclose(
        fl.values, scale * (rec.moments - path.at(rec.sample_times)), atol=1e-12
    )
    assert fl.r == pytest.approx(scale * rec.moments[0, 0])


def test_clt_experiment_smoke_and_report_fields(tmp_path):
    params = PARAMS.with_n(2000)
    lam = MomentVector.zero()
    report = clt_experiment(params, lam, 1.0, 60, 55)
    assert report.sigma_theory.shape == (6, 6)
    assert report.residual_cov.shape == (6, 6)
    assert math.isfinite(report.frobenius_rel)
    d = report.as_dict()
    assert set(d["components"]) == set(FLUCTUATION_COMPONENTS)
    # propagation serialization smoke
    model = FluctuationModel(params, lam)
    path = integrate(MomentVector.zero(), params, 1.0)
    prop = propagate_clt(model, path, 0.0, times=np.array([0.0, 1.0]))
    write_covariance_csv(prop, str(tmp_path / "cov.csv"))
    header = (tmp_path / "cov.csv").read_text().splitlines()[0]
    assert header.startswith("t,cov_m_sigma_m_sigma,")
