"""Gaussian fluctuation theory around the limiting flow.

The centered, sqrt(N)-scaled moment deviations converge to a linear
diffusion.  Writing the six dynamic components in moment order
(sigma, omega, sigma_omega, sigma_eta, omega_eta, sigma_omega_eta) and
``r = sqrt(N) * m_eta`` for the (constant-in-time) environment imbalance,
the limit solves

``d f = 2 r A1(m(t)) dt + 2 A2(m(t)) f dt + D(m(t)) dB``

along the limiting moment path ``m(t)``:

* ``A1`` is half the partial derivative of the flow in ``m_eta`` — the
  environment-drift direction;
* ``A2`` is half the Jacobian of the flow in the six dynamic moments;
* ``D D^T`` is the jump-rate-weighted sum of flip-increment outer products
  (the quadratic variation rate of the scaled moment process).

Only ``D D^T`` is well defined (any square root works); this module never
factors it.  The initial covariance of the seven scaled deviations is the
exact single-site covariance of the product initial law, computed in
:func:`init_covariance`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
from scipy.integrate import solve_ivp

from .limit import OdePath, integrate, mkv_rhs
from .model import (
    CELL_SPINS,
    MOMENT_NAMES,
    ModelParams,
    MomentVector,
    moments_to_cell_probs,
    _probs_from_moment_array,
)
from .simulate import TrajectoryRecord, run_replicas

__all__ = [
    "FluctuationModel",
    "FluctuationPath",
    "CltPropagation",
    "CltReport",
    "drift_a1",
    "drift_a2",
    "diffusion_sq",
    "init_covariance",
    "propagate_clt",
    "empirical_fluctuations",
    "clt_experiment",
    "write_covariance_csv",
]

#: Names of the six dynamic fluctuation components (deviations of these
#: moments from the limiting path, scaled by sqrt(N)).
FLUCTUATION_COMPONENTS = MOMENT_NAMES[1:]

_PSD_TOL = -1e-12


def _moment_array(m) -> np.ndarray:
    if isinstance(m, MomentVector):
        return m.as_array()
    arr = np.asarray(m, dtype=np.float64)
    if arr.shape != (7,):
        raise ValueError(f"need a 7-moment vector, got shape {arr.shape}")
    return arr


def drift_a1(m, params: ModelParams) -> np.ndarray:
    """Environment-drift vector A1: half the flow's m_eta-derivative.

    Depends on the state only through ``m_sigma``.
    """
    arr = _moment_array(m)
    g = params.gamma
    CH = math.cosh(g * params.h)
    SH = math.sinh(g * params.h)
    c1 = math.cosh(g * arr[1])
    s1 = math.sinh(g * arr[1])
    return np.array([0.0, SH * c1, 0.0, 0.0, CH * s1, math.sinh(params.beta)])


def drift_a2(m, params: ModelParams) -> np.ndarray:
    """Linear-drift matrix A2: half the Jacobian of the six-moment flow.

    Evaluated with the environment balanced (the ``m_eta`` component of
    ``m`` is ignored; the Jacobian is taken at ``m_eta = 0``).
    """
    arr = _moment_array(m)
    _e, s, o, so, se, oe, soe = (float(x) for x in arr)
    g = params.gamma
    chb = math.cosh(params.beta)
    shb = math.sinh(params.beta)
    CH = math.cosh(g * params.h)
    SH = math.sinh(g * params.h)
    c1 = math.cosh(g * s)
    s1 = math.sinh(g * s)
    a2 = np.zeros((6, 6))
    # row sigma
    a2[0, 0] = -chb
    a2[0, 1] = shb
    # row omega
    a2[1, 0] = g * (CH * c1 - o * CH * s1 - oe * SH * c1)
    a2[1, 1] = -CH * c1
    a2[1, 4] = -SH * s1
    # row sigma_omega
    a2[2, 0] = CH * s1 + g * (s * CH * c1 - so * CH * s1 + se * SH * s1 - soe * SH * c1)
    a2[2, 2] = -(chb + CH * c1)
    a2[2, 3] = SH * c1
    a2[2, 5] = -SH * s1
    # row sigma_eta
    a2[3, 3] = -chb
    a2[3, 4] = shb
    # row omega_eta
    a2[4, 0] = g * (SH * s1 - o * SH * c1 - oe * CH * s1)
    a2[4, 1] = -SH * s1
    a2[4, 4] = -CH * c1
    # row sigma_omega_eta
    a2[5, 0] = SH * c1 + g * (s * SH * s1 - so * SH * c1 + se * CH * c1 - soe * CH * s1)
    a2[5, 2] = -SH * s1
    a2[5, 3] = CH * s1
    a2[5, 5] = -(chb + CH * c1)
    return a2


#: Fluctuation jump vectors: flipping one site's sigma (resp. omega) moves
#: the six scaled moments by -2i(1, 0, j, k, 0, jk)/sqrt(N) (resp.
#: -2j(0, 1, i, 0, k, ik)/sqrt(N)).
_JUMP_SIGMA = np.array(
    [[-2.0 * i, 0.0, -2.0 * i * j, -2.0 * i * k, 0.0, -2.0 * i * j * k]
     for (i, j, k) in CELL_SPINS]
)
_JUMP_OMEGA = np.array(
    [[0.0, -2.0 * j, -2.0 * j * i, 0.0, -2.0 * j * k, -2.0 * j * i * k]
     for (i, j, k) in CELL_SPINS]
)
_JUMP_SIGMA.setflags(write=False)
_JUMP_OMEGA.setflags(write=False)


def diffusion_sq(m, params: ModelParams) -> np.ndarray:
    """Quadratic-variation rate D D^T of the scaled moment fluctuations.

    Sum over the eight cells of (cell probability) x (flip rate) x (jump
    outer product), for both flip types.  Raises if the assembled matrix
    fails positive semidefiniteness beyond -1e-12 (an internal-consistency
    error: the construction is PSD by design).
    """
    arr = _moment_array(m)
    if isinstance(m, MomentVector):
        probs = moments_to_cell_probs(m)
    else:
        probs = _probs_from_moment_array(arr)
        if probs.min() < _PSD_TOL:
            raise ValueError(
                f"moments imply a negative cell probability ({probs.min():.3e})"
            )
        probs = np.clip(probs, 0.0, None)
    m_sigma = arr[1]
    g = params.gamma
    out = np.zeros((6, 6))
    for c, (i, j, k) in enumerate(CELL_SPINS):
        p = probs[c]
        if p == 0.0:
            continue
        r_sig = math.exp(-params.beta * i * j)
        r_om = math.exp(-g * j * (m_sigma + params.h * k))
        out += (p * r_sig) * np.outer(_JUMP_SIGMA[c], _JUMP_SIGMA[c])
        out += (p * r_om) * np.outer(_JUMP_OMEGA[c], _JUMP_OMEGA[c])
    lead = float(np.min(np.linalg.eigvalsh(out)))
    if lead < _PSD_TOL * max(1.0, float(np.max(np.abs(out)))):
        raise RuntimeError(
            f"assembled diffusion matrix lost positive semidefiniteness "
            f"(min eigenvalue {lead:.3e}); this indicates an internal bug"
        )
    return out


# ---------------------------------------------------------------------------
# Initial covariance
# ---------------------------------------------------------------------------

# The seven product statistics as spin subsets, in MOMENT_NAMES order.
_STAT_SETS = (
    frozenset("e"),
    frozenset("s"),
    frozenset("o"),
    frozenset("so"),
    frozenset("se"),
    frozenset("oe"),
    frozenset("soe"),
)


def init_covariance(lambda_moments: MomentVector) -> np.ndarray:
    """Exact single-site covariance of the seven product statistics.

    ``lambda_moments`` describes the product initial law: (sigma, omega)
    drawn from a law with moments (m_sigma, m_omega, m_sigma_omega) =
    (a, b, c), independent symmetric environment — so all eta-moments must
    be zero.  Spins square to one, hence
    ``Cov(X_S, X_T) = m(S xor T) - m(S) m(T)``
    where m() of any set containing eta vanishes and m({}) = 1.  By the
    CLT for iid sites this is the covariance of the sqrt(N)-scaled moment
    deviations at time zero (and Var r = 1 in the first slot).
    """
    vals = lambda_moments.as_array()
    if np.max(np.abs(vals[[0, 4, 5, 6]])) > 1e-12:
        raise ValueError(
            "lambda_moments must have zero eta-moments (product initial law "
            "with a symmetric environment)"
        )
    a, b, c = vals[1], vals[2], vals[3]
    lookup = {
        frozenset(): 1.0,
        frozenset("s"): a,
        frozenset("o"): b,
        frozenset("so"): c,
    }

    def mom(stat: frozenset) -> float:
        if "e" in stat:
            return 0.0
        return lookup[stat]

    cov = np.empty((7, 7))
    for p, sp in enumerate(_STAT_SETS):
        for q, sq in enumerate(_STAT_SETS):
            cov[p, q] = mom(sp ^ sq) - mom(sp) * mom(sq)
    lead = float(np.min(np.linalg.eigvalsh(cov)))
    if lead < _PSD_TOL:
        raise RuntimeError(
            f"initial covariance lost positive semidefiniteness "
            f"(min eigenvalue {lead:.3e}); this indicates an internal bug"
        )
    return cov


# ---------------------------------------------------------------------------
# Model container and propagation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FluctuationModel:
    """Fluctuation ingredients bound to one parameter set and initial law."""

    params: ModelParams
    lambda_moments: MomentVector
    init_cov: np.ndarray = None  # filled in __post_init__

    def __post_init__(self) -> None:
        cov = init_covariance(self.lambda_moments)
        cov.setflags(write=False)
        object.__setattr__(self, "init_cov", cov)

    def a1(self, m) -> np.ndarray:
        return drift_a1(m, self.params)

    def a2(self, m) -> np.ndarray:
        return drift_a2(m, self.params)

    def diffusion_sq(self, m) -> np.ndarray:
        return diffusion_sq(m, self.params)


@dataclass(frozen=True)
class CltPropagation:
    """Mean and covariance of the six dynamic fluctuations along a path."""

    times: np.ndarray
    means: np.ndarray   # (T, 6)
    covs: np.ndarray    # (T, 6, 6)
    h_realization: float

    def __post_init__(self) -> None:
        for name in ("times", "means", "covs"):
            arr = np.asarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


def propagate_clt(
    model: FluctuationModel,
    path: OdePath,
    h_realization: float,
    times: Optional[np.ndarray] = None,
) -> CltPropagation:
    """Propagate the fluctuation mean and covariance along a moment path.

    Solves, with coefficients frozen to the path ``m(t)``,

    ``mean' = 2 A2 mean + 2 h_realization A1``,
    ``cov'  = 2 A2 cov + cov (2 A2)^T + D D^T``.

    The initial condition conditions on the realized environment imbalance
    ``r(0) = h_realization``: mean(0) is the regression of the six initial
    deviations on r(0) (the cross row of the initial covariance times
    h_realization) and cov(0) is the conditional block
    ``C_xx - C_xr C_rx`` (Var r = 1).  For a (sigma, omega)-symmetric
    initial law both corrections vanish.

    ``times`` defaults to the path's own step grid.
    """
    if (model.params.beta, model.params.gamma, model.params.h) != (
        path.params.beta,
        path.params.gamma,
        path.params.h,
    ):
        raise ValueError("model and path were built for different parameters")
    eval_times = path.times if times is None else np.asarray(times, dtype=np.float64)
    cross = model.init_cov[1:, 0]
    mean0 = h_realization * cross
    cov0 = model.init_cov[1:, 1:] - np.outer(cross, cross)

    def rhs(t, y):
        m = path.at(float(t))
        a2x2 = 2.0 * drift_a2(m, model.params)
        mean = y[:6]
        cov = y[6:].reshape(6, 6)
        dmean = a2x2 @ mean + 2.0 * h_realization * drift_a1(m, model.params)
        dcov = a2x2 @ cov + cov @ a2x2.T + diffusion_sq(m, model.params)
        return np.concatenate([dmean, dcov.ravel()])

    y0 = np.concatenate([mean0, cov0.ravel()])
    t_end = float(eval_times[-1])
    if t_end == 0.0:
        return CltPropagation(
            times=eval_times,
            means=mean0[None, :],
            covs=cov0[None, :, :],
            h_realization=h_realization,
        )
    sol = solve_ivp(
        rhs,
        (0.0, t_end),
        y0,
        method="RK45",
        rtol=1e-8,
        atol=1e-10,
        t_eval=eval_times,
    )
    if not sol.success:
        raise RuntimeError(f"fluctuation propagation failed: {sol.message}")
    means = sol.y[:6].T
    covs = sol.y[6:].T.reshape(-1, 6, 6)
    covs = 0.5 * (covs + np.transpose(covs, (0, 2, 1)))  # enforce symmetry
    return CltPropagation(
        times=sol.t, means=means, covs=covs, h_realization=h_realization
    )


@dataclass(frozen=True)
class FluctuationPath:
    """Scaled deviations of one finite-N trajectory from the limiting path.

    ``values[:, 0]`` is ``r = sqrt(N) m_eta`` (constant along the path);
    columns 1..6 are ``sqrt(N) (empirical - ODE)`` for the six dynamic
    moments.  ``scaling`` records the clock/space convention.
    """

    times: np.ndarray
    values: np.ndarray
    scaling: str   # "sqrtN-CLT" | "quarterN-critical"
    params: ModelParams

    def __post_init__(self) -> None:
        for name in ("times", "values"):
            arr = np.asarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.scaling not in ("sqrtN-CLT", "quarterN-critical"):
            raise ValueError(f"unknown scaling {self.scaling!r}")
        r = self.values[:, 0]
        if np.max(np.abs(r - r[0])) > 1e-9 * max(1.0, abs(float(r[0]))):
            raise ValueError("environment component r must be constant in time")

    @property
    def r(self) -> float:
        return float(self.values[0, 0])


def empirical_fluctuations(record: TrajectoryRecord, path: OdePath) -> FluctuationPath:
    """sqrt(N)-scaled deviations of a trajectory from its limiting path.

    The first column is ``sqrt(N) (m_eta - path m_eta)`` — equal to
    ``sqrt(N) m_eta`` for the usual balanced-limit path — and stays constant
    because the environment is frozen.
    """
    rp, pp = record.params, path.params
    if (rp.beta, rp.gamma, rp.h) != (pp.beta, pp.gamma, pp.h):
        raise ValueError("record and path were built for different parameters")
    ode_vals = path.at(record.sample_times)
    scale = math.sqrt(rp.n)
    values = scale * (record.moments - ode_vals)
    return FluctuationPath(
        times=record.sample_times,
        values=values,
        scaling="sqrtN-CLT",
        params=rp,
    )


@dataclass(frozen=True)
class CltReport:
    """Empirical-versus-propagated covariance comparison at one horizon.

    ``sigma_theory`` is the propagated conditional covariance at ``t_end``;
    ``residual_cov`` the pooled sample covariance of the per-replica
    residuals after subtracting each replica's environment response
    ``r0 * psi(t_end)``.  ``anderson_*`` are Anderson-Darling normality
    statistics for the first two residual components with their 1%
    critical value (statistic below critical = not rejected).
    """

    params: ModelParams
    t_end: float
    n_replicas: int
    base_seed: object
    sigma_theory: np.ndarray
    residual_cov: np.ndarray
    psi: np.ndarray
    frobenius_rel: float
    anderson_stat_sigma: float
    anderson_stat_omega: float
    anderson_crit_1pct: float

    def __post_init__(self) -> None:
        for name in ("sigma_theory", "residual_cov", "psi"):
            arr = np.asarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def normality_ok(self) -> bool:
        return (
            self.anderson_stat_sigma < self.anderson_crit_1pct
            and self.anderson_stat_omega < self.anderson_crit_1pct
        )

    def as_dict(self) -> dict:
        return {
            "beta": self.params.beta,
            "gamma": self.params.gamma,
            "h": self.params.h,
            "n": self.params.n,
            "t_end": self.t_end,
            "n_replicas": self.n_replicas,
            "frobenius_rel": self.frobenius_rel,
            "anderson_stat_sigma": self.anderson_stat_sigma,
            "anderson_stat_omega": self.anderson_stat_omega,
            "anderson_crit_1pct": self.anderson_crit_1pct,
            "normality_ok": self.normality_ok(),
            "sigma_theory": self.sigma_theory.tolist(),
            "residual_cov": self.residual_cov.tolist(),
            "psi": self.psi.tolist(),
            "components": list(FLUCTUATION_COMPONENTS),
        }


def clt_experiment(
    params: ModelParams,
    lambda_moments: MomentVector,
    t_end: float,
    n_replicas: int,
    base_seed,
    *,
    threads: int = 1,
) -> CltReport:
    """Finite-N covariance check against the propagated fluctuation law.

    Replicas start from the product law with pair moments ``lambda_moments``
    (sigma/omega block; environment moments must be zero) and an independent
    symmetric environment.  At ``t_end`` each replica's scaled deviation
    from the limiting path is reduced by its environment response
    ``r0 * psi(t_end)``, where ``psi`` solves the conditional-mean equation
    with unit realization; the pooled residual covariance is then compared
    to the propagated conditional covariance in relative Frobenius
    distance, and the first two residual components are tested for
    normality (Anderson-Darling).
    """
    from scipy.stats import anderson

    model = FluctuationModel(params, lambda_moments)
    lam = lambda_moments.as_array()
    law4 = np.array(
        [
            (1.0 + i * lam[1] + j * lam[2] + i * j * lam[3]) / 4.0
            for (i, j) in ((-1, -1), (-1, 1), (1, -1), (1, 1))
        ]
    )
    m0 = MomentVector.from_array(np.concatenate([[0.0], lam[1:]]))
    path = integrate(m0, params, t_end)
    eval_times = np.array([0.0, t_end])
    prop_cov = propagate_clt(model, path, 0.0, times=eval_times)
    prop_psi = propagate_clt(model, path, 1.0, times=eval_times)
    sigma = prop_cov.covs[-1]
    psi = prop_psi.means[-1]

    records = run_replicas(
        params, law4, t_end, t_end, n_replicas, base_seed, threads=threads
    )
    ode_end = path.at(t_end)[1:]
    scale = math.sqrt(params.n)
    resid = np.empty((n_replicas, 6))
    for idx, rec in enumerate(records):
        r0 = scale * rec.moments[0, 0]
        resid[idx] = scale * (rec.moments[-1][1:] - ode_end) - r0 * psi
    s_emp = np.cov(resid, rowvar=False)
    frob = float(
        np.linalg.norm(s_emp - sigma) / np.linalg.norm(sigma)
    )
    ad_sigma = anderson(resid[:, 0], dist="norm")
    ad_omega = anderson(resid[:, 1], dist="norm")
    crit = float(ad_sigma.critical_values[-1])  # 1% significance level
    return CltReport(
        params=params,
        t_end=t_end,
        n_replicas=n_replicas,
        base_seed=base_seed,
        sigma_theory=sigma,
        residual_cov=s_emp,
        psi=psi,
        frobenius_rel=frob,
        anderson_stat_sigma=float(ad_sigma.statistic),
        anderson_stat_omega=float(ad_omega.statistic),
        anderson_crit_1pct=crit,
    )


def write_covariance_csv(propagation: CltPropagation, path: str) -> None:
    """Covariance path as CSV: one row per time, 6x6 flattened row-major.

    A JSON sidecar (same basename) records the component ordering and
    layout so the 36 columns are self-describing.
    """
    names = [
        f"cov_{a}_{b}"
        for a in FLUCTUATION_COMPONENTS
        for b in FLUCTUATION_COMPONENTS
    ]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t," + ",".join(names) + "\n")
        for t, cov in zip(propagation.times, propagation.covs):
            fh.write(
                "%.17g," % t + ",".join("%.17g" % v for v in cov.ravel()) + "\n"
            )
    base = path[: path.rfind(".")] if "." in path else path
    meta = {
        "components": list(FLUCTUATION_COMPONENTS),
        "layout": "row-major",
        "h_realization": propagation.h_realization,
    }
    with open(base + ".json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
