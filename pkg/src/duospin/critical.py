"""Critical-scaling experiments on the continuous transition line.

On the boundary ``gamma tanh(beta) = cosh(gamma h)^2`` the linear drift of
the fluctuation process acquires a null direction and the ordinary CLT
picture degenerates.  Two regimes are covered:

* **Inhomogeneous** (h > 0): on the dilated clock ``t -> N^{1/4} t`` and
  with amplitudes scaled by ``N^{1/4}``, five of the six transformed
  coordinates collapse to zero while the null-direction coordinate ``xbar``
  converges to a straight line with random slope
  ``2 * r * sinh(beta) * sinh(gamma h)``, where ``r = sqrt(N) m_eta`` is the
  realized environment imbalance.  :func:`run_inhomogeneous_critical`
  measures fitted-versus-predicted slopes and the collapse suprema.

* **Homogeneous** (h = 0, ``gamma = 1/tanh(beta)``): the environment drift
  is absent and the interesting clock is ``t -> N^{1/2} t``.  The combination
  ``theta = N^{1/4} (m_sigma + sinh(beta) m_omega)`` converges to the
  non-Gaussian diffusion ``d theta = -a theta^3 dt + b dB`` with
  ``a = 2 cosh(beta)^3 / (3 sinh(beta)^2 (cosh(beta) + 1)^3)`` and
  ``b = 2 cosh(beta)``, while the complementary combinations collapse.
  :func:`run_homogeneous_critical` compares the empirical moments of theta
  against an Euler-Maruyama integration of that one-dimensional SDE
  (:func:`sde_oracle`), itself validated against quartic-Gibbs quadrature.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import quad

from .equilibria import equilibrium_moments, jacobian_at_neutral
from .fluctuations import drift_a2
from .model import ModelParams, MomentVector, moments_to_cell_probs
from .simulate import run_replicas

__all__ = [
    "CriticalCoordinates",
    "CubicSdeParams",
    "SdeOracleResult",
    "InhomogeneousCriticalResult",
    "HomogeneousCriticalResult",
    "critical_params",
    "critical_transform",
    "critical_coords",
    "critical_coords_path",
    "null_direction_residual",
    "sde_oracle",
    "cubic_stationary_moments",
    "run_inhomogeneous_critical",
    "run_homogeneous_critical",
    "write_inhomogeneous_csv",
    "write_homogeneous_csv",
    "write_summary_json",
]

#: Criticality gate: |gamma tanh(beta) - cosh(gamma h)^2| must be below this
#: for the transformed coordinates to be meaningful.
CRITICALITY_TOL = 1e-10

INHOMOGENEOUS_N_DEFAULT = (1_000, 4_000, 16_000)
HOMOGENEOUS_N_DEFAULT = (1_000, 4_000)


def criticality_residual(params: ModelParams) -> float:
    """Signed distance from the continuous boundary in the slope criterion."""
    return params.gamma * math.tanh(params.beta) - math.cosh(
        params.gamma * params.h
    ) ** 2


def critical_params(
    beta: float, h: float, gamma_max: float = 64.0
) -> Optional[ModelParams]:
    """The coupling gamma placing (beta, h) on the continuous boundary.

    Solves ``gamma tanh(beta) = cosh(gamma h)^2`` by scanning upward from
    ``1/tanh(beta)`` for the first sign change and bisecting; the first
    crossing is the branch on the second-order segment.  Returns None when
    no crossing exists below ``gamma_max`` (h beyond the tricritical reach).
    For h = 0 the answer ``1/tanh(beta)`` is exact.
    """
    thb = math.tanh(beta)
    if h == 0.0:
        return ModelParams(beta, 1.0 / thb, 0.0)

    def g(gamma: float) -> float:
        return math.cosh(gamma * h) ** 2 / thb - gamma

    lo = 1.0 / thb
    step = 0.01 * lo
    hi = lo + step
    while g(hi) > 0.0:
        lo = hi
        hi += step
        if hi > gamma_max:
            return None
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if g(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    gamma_star = 0.5 * (lo + hi)
    params = ModelParams(beta, gamma_star, h)
    if abs(criticality_residual(params)) > 1e-12 * max(1.0, gamma_star * thb):
        raise RuntimeError(
            f"bisection failed to pin the boundary at beta={beta}, h={h}: "
            f"residual {criticality_residual(params):.3e}"
        )
    return params


def critical_transform(params: ModelParams) -> Tuple[np.ndarray, np.ndarray]:
    """Transform matrix and centering for the critical coordinates.

    Returns ``(T, center)`` such that the six transformed coordinates are
    ``T @ (m6 - center)``, where ``m6`` are the dynamic moments in order
    (sigma, omega, sigma_omega, sigma_eta, omega_eta, sigma_omega_eta).  The
    first row of ``T`` is the null direction of the critical linear drift
    (it annihilates ``2 A2`` from the left at the stationary point); the
    centering is the balanced stationary state on the boundary.
    """
    res = criticality_residual(params)
    if abs(res) > CRITICALITY_TOL:
        raise ValueError(
            f"parameters are off the continuous boundary (residual {res:.3e}); "
            "use critical_params() to place them on it"
        )
    b, g, h = params.beta, params.gamma, params.h
    chb, shb, thb = math.cosh(b), math.sinh(b), math.tanh(b)
    CH, SH, thgh = math.cosh(g * h), math.sinh(g * h), math.tanh(g * h)
    t_mat = np.array(
        [
            [CH, shb, 0.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, CH - chb, shb, 0.0],
            [0.0, 0.0, 0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0, -thgh, thb * thgh, 0.0],
            [2 * chb * SH * (chb + 2 * CH), -2 * shb * SH * (chb + 2 * CH),
             0.0, 0.0, 0.0, 0.0],
            [0.0, -thb * SH * (chb + 2 * CH), 0.0, 0.0, 0.0, (chb + CH) ** 2],
        ]
    )
    center = equilibrium_moments(0.0, params)[1:]
    return t_mat, center


@dataclass(frozen=True)
class CriticalCoordinates:
    """Transformed critical coordinates of one moment vector.

    ``r`` is scaled by ``sqrt(N)``; the six coordinates by ``N^{1/4}``.
    """

    r: float
    xbar: float
    ybar: float
    zbar: float
    ubar: float
    vbar: float
    wbar: float

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.r, self.xbar, self.ybar, self.zbar, self.ubar, self.vbar,
             self.wbar]
        )


def critical_coords(
    m: Union[MomentVector, np.ndarray], n: int, params: ModelParams
) -> CriticalCoordinates:
    """Critical coordinates of a single moment vector at population n."""
    arr = m.as_array() if isinstance(m, MomentVector) else np.asarray(m, float)
    vals = critical_coords_path(arr[None, :], n, params)[0]
    return CriticalCoordinates(*vals)


def critical_coords_path(
    moments: np.ndarray, n: int, params: ModelParams
) -> np.ndarray:
    """Vectorized critical coordinates: (T, 7) moments -> (T, 7) coords.

    Columns: r (sqrt(N)-scaled environment imbalance) then xbar..wbar
    (N^{1/4}-scaled transformed deviations from the boundary stationary
    state).
    """
    t_mat, center = critical_transform(params)
    moments = np.asarray(moments, dtype=np.float64)
    out = np.empty_like(moments)
    out[:, 0] = math.sqrt(n) * moments[:, 0]
    out[:, 1:] = float(n) ** 0.25 * (moments[:, 1:] - center) @ t_mat.T
    return out


def null_direction_residual(params: ModelParams) -> float:
    """Max-norm of (left null vector) @ (2 A2) at the boundary state.

    Should vanish (to rounding) exactly on the continuous boundary: the
    xbar row of the critical transform is a left null vector of the linear
    drift at the balanced stationary point.
    """
    t_mat, center = critical_transform(params)
    a1_left = t_mat[0]
    m7 = equilibrium_moments(0.0, params)
    return float(np.max(np.abs(a1_left @ (2.0 * drift_a2(m7, params)))))


# ---------------------------------------------------------------------------
# The limiting cubic SDE (homogeneous case) and its oracle
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CubicSdeParams:
    """Coefficients of the scalar limit SDE  d theta = -a theta^3 dt + b dB."""

    drift_coeff: float   # a >= 0
    noise_coeff: float   # b > 0

    def __post_init__(self) -> None:
        if not (self.drift_coeff >= 0 and math.isfinite(self.drift_coeff)):
            raise ValueError(f"drift_coeff must be >= 0, got {self.drift_coeff}")
        if not (self.noise_coeff > 0 and math.isfinite(self.noise_coeff)):
            raise ValueError(f"noise_coeff must be > 0, got {self.noise_coeff}")

    @classmethod
    def from_beta(cls, beta: float) -> "CubicSdeParams":
        chb = math.cosh(beta)
        shb = math.sinh(beta)
        a = 2.0 * chb ** 3 / (3.0 * shb ** 2 * (chb + 1.0) ** 3)
        return cls(a, 2.0 * chb)


@dataclass(frozen=True)
class SdeOracleResult:
    """Terminal values of the Euler-Maruyama ensemble (NaN where aborted)."""

    thetas: np.ndarray
    aborted: Tuple[int, ...]
    t_end: float
    dt: float

    def __post_init__(self) -> None:
        arr = np.asarray(self.thetas)
        arr.setflags(write=False)
        object.__setattr__(self, "thetas", arr)

    def moments(self) -> Tuple[float, float]:
        """(second, fourth) moment over the surviving replicas."""
        ok = self.thetas[np.isfinite(self.thetas)]
        return float(np.mean(ok ** 2)), float(np.mean(ok ** 4))


def sde_oracle(
    sde: CubicSdeParams,
    t_end: float,
    dt: float,
    replicas: int,
    seed: int,
    theta0: float = 0.0,
) -> SdeOracleResult:
    """Euler-Maruyama ensemble for the scalar cubic SDE.

    Requires ``dt <= 1e-3 * b^2 / a`` when a > 0 (step small against the
    relaxation scale).  A path passing |theta| > 1e3 is frozen and reported
    in ``aborted`` (its terminal value is NaN); the noise stream does not
    depend on aborts, so results are reproducible draw-for-draw.
    """
    a, b = sde.drift_coeff, sde.noise_coeff
    if a > 0 and dt > 1e-3 * b * b / a:
        raise ValueError(
            f"dt = {dt} too coarse: need dt <= {1e-3 * b * b / a:.3e} "
            f"(1e-3 * noise^2 / drift)"
        )
    if t_end <= 0 or dt <= 0:
        raise ValueError("t_end and dt must be positive")
    n_steps = int(round(t_end / dt))
    rng = np.random.default_rng(seed)
    theta = np.full(replicas, float(theta0))
    alive = np.ones(replicas, dtype=bool)
    scale = b * math.sqrt(dt)
    for _ in range(n_steps):
        noise = rng.standard_normal(replicas)
        theta[alive] += -a * theta[alive] ** 3 * dt + scale * noise[alive]
        blew = alive & (np.abs(theta) > 1e3)
        if blew.any():
            theta[blew] = np.nan
            alive &= ~blew
    return SdeOracleResult(
        thetas=theta,
        aborted=tuple(int(i) for i in np.flatnonzero(~alive)),
        t_end=t_end,
        dt=dt,
    )


def cubic_stationary_moments(sde: CubicSdeParams) -> Tuple[float, float]:
    """Stationary (second, fourth) moments by quadrature.

    The stationary density of ``d theta = -a theta^3 dt + b dB`` is
    proportional to ``exp(-a x^4 / (2 b^2))``; moments follow by numerical
    integration (requires a > 0).
    """
    a, b = sde.drift_coeff, sde.noise_coeff
    if a <= 0:
        raise ValueError("stationary law requires a positive drift_coeff")
    kappa = a / (2.0 * b * b)
    z = quad(lambda x: math.exp(-kappa * x ** 4), 0, np.inf)[0]
    m2 = quad(lambda x: x ** 2 * math.exp(-kappa * x ** 4), 0, np.inf)[0] / z
    m4 = quad(lambda x: x ** 4 * math.exp(-kappa * x ** 4), 0, np.inf)[0] / z
    return m2, m4


# ---------------------------------------------------------------------------
# Experiment runners
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InhomogeneousCriticalResult:
    """Slope statistics and collapse suprema per population size.

    ``rows[n]`` has one record per replica with columns
    (replica, r0, fitted_slope, predicted_slope, sup_ybar, sup_zbar,
    sup_ubar, sup_vbar, sup_wbar); ``summary[n]`` holds the slope
    correlation and the median suprema.
    """

    beta: float
    h: float
    gamma: float
    t_end: float
    sample_dt: float
    replicas: int
    base_seed: int
    n_values: Tuple[int, ...]
    rows: Dict[int, np.ndarray]
    summary: Dict[int, Dict[str, float]]


@dataclass(frozen=True)
class HomogeneousCriticalResult:
    """Terminal theta statistics and collapse suprema per population size.

    ``rows[n]`` columns: (replica, theta_end, sup_xi, sup_zeta);
    ``summary[n]`` holds moments, excess kurtosis with its standard error,
    and the Euler-Maruyama oracle moments for comparison.
    """

    beta: float
    gamma: float
    t_end: float
    sample_dt: float
    replicas: int
    base_seed: int
    n_values: Tuple[int, ...]
    rows: Dict[int, np.ndarray]
    summary: Dict[int, Dict[str, float]]
    oracle: SdeOracleResult


def _origin_slope(x: np.ndarray, y: np.ndarray) -> float:
    """Least-squares slope of a line through the origin."""
    return float(np.dot(x, y) / np.dot(x, x))


def run_inhomogeneous_critical(
    beta: float,
    h: float,
    n_values: Sequence[int] = INHOMOGENEOUS_N_DEFAULT,
    t_end: float = 6.0,
    replicas: int = 200,
    base_seed: int = 0,
    sample_dt: float = 0.02,
    threads: int = 1,
) -> InhomogeneousCriticalResult:
    """Null-direction drift experiment on the dilated clock (h > 0).

    Starts every replica from iid cells at the boundary stationary state,
    runs to physical time ``N^{1/4} t_end``, transforms to critical
    coordinates on the rescaled clock, and fits the xbar slope by least
    squares through the origin — the limiting line starts at 0, and the
    anchored fit is markedly less noise-sensitive than a free-intercept
    fit over the windows where the linear description holds.  The
    predicted slope is ``2 r0 sinh(beta) sinh(gamma h)`` with ``r0`` the
    replica's realized environment imbalance.  Collapse is reported as
    per-replica suprema of |ybar| .. |wbar| over the whole window.
    """
    base = critical_params(beta, h)
    if base is None:
        raise ValueError(f"no continuous boundary at beta={beta}, h={h}")
    shb = math.sinh(beta)
    SH = math.sinh(base.gamma * h)
    rows: Dict[int, np.ndarray] = {}
    summary: Dict[int, Dict[str, float]] = {}
    for n_idx, n in enumerate(n_values):
        params = base.with_n(int(n))
        dilation = float(n) ** 0.25
        target = equilibrium_moments(0.0, params)
        p8 = moments_to_cell_probs(MomentVector.from_array(target))
        records = run_replicas(
            params,
            p8,
            t_end * dilation,
            sample_dt * dilation,
            replicas,
            (base_seed, n_idx),
            threads=threads,
        )
        tau = records[0].sample_times / dilation
        out = np.empty((replicas, 9))
        for rep, rec in enumerate(records):
            coords = critical_coords_path(rec.moments, params.n, params)
            r0 = coords[0, 0]
            fitted = _origin_slope(tau, coords[:, 1])
            sups = np.max(np.abs(coords[:, 2:]), axis=0)
            out[rep] = (rep, r0, fitted, 2.0 * r0 * shb * SH, *sups)
        rows[int(n)] = out
        corr = float(np.corrcoef(out[:, 2], out[:, 3])[0, 1])
        summary[int(n)] = {
            "slope_correlation": corr,
            "median_sup_ybar": float(np.median(out[:, 4])),
            "median_sup_zbar": float(np.median(out[:, 5])),
            "median_sup_ubar": float(np.median(out[:, 6])),
            "median_sup_vbar": float(np.median(out[:, 7])),
            "median_sup_wbar": float(np.median(out[:, 8])),
            "mean_abs_slope_error": float(np.mean(np.abs(out[:, 2] - out[:, 3]))),
        }
    return InhomogeneousCriticalResult(
        beta=beta,
        h=h,
        gamma=base.gamma,
        t_end=t_end,
        sample_dt=sample_dt,
        replicas=replicas,
        base_seed=base_seed,
        n_values=tuple(int(n) for n in n_values),
        rows=rows,
        summary=summary,
    )


def run_homogeneous_critical(
    beta: float,
    n_values: Sequence[int] = HOMOGENEOUS_N_DEFAULT,
    t_end: float = 1.5,
    replicas: int = 600,
    base_seed: int = 0,
    sample_dt: float = 0.05,
    threads: int = 1,
    oracle_dt: float = 0.005,
    oracle_replicas: int = 200_000,
) -> HomogeneousCriticalResult:
    """Cubic-diffusion experiment at h = 0 on the N^{1/2} clock.

    Starts from the boundary stationary law (sigma and omega unbiased,
    their product correlated), runs to physical time ``N^{1/2} t_end``, and
    tracks ``theta = N^{1/4}(m_sigma + sinh(beta) m_omega)`` plus the two
    collapsing combinations ``xi`` and ``zeta``.  Terminal theta moments
    are compared against the Euler-Maruyama oracle of the limit SDE run to
    the same horizon.
    """
    thb = math.tanh(beta)
    shb = math.sinh(beta)
    chb = math.cosh(beta)
    gamma = 1.0 / thb
    zeta_center = shb / (chb + 1.0)
    law4 = np.array(
        [
            (1.0 + zeta_center) / 4.0,
            (1.0 - zeta_center) / 4.0,
            (1.0 - zeta_center) / 4.0,
            (1.0 + zeta_center) / 4.0,
        ]
    )
    sde = CubicSdeParams.from_beta(beta)
    oracle_seed = int(np.random.SeedSequence((base_seed, 104729)).generate_state(1)[0])
    oracle = sde_oracle(sde, t_end, oracle_dt, oracle_replicas, seed=oracle_seed)
    o2, o4 = oracle.moments()

    rows: Dict[int, np.ndarray] = {}
    summary: Dict[int, Dict[str, float]] = {}
    for n_idx, n in enumerate(n_values):
        params = ModelParams(beta, gamma, 0.0, int(n))
        dilation = math.sqrt(float(n))
        records = run_replicas(
            params,
            law4,
            t_end * dilation,
            sample_dt * dilation,
            replicas,
            (base_seed, n_idx),
            eta_mode="zero",
            threads=threads,
        )
        quarter = float(n) ** 0.25
        out = np.empty((replicas, 4))
        for rep, rec in enumerate(records):
            m_sig = rec.moments[:, 1]
            m_om = rec.moments[:, 2]
            m_so = rec.moments[:, 3]
            theta = quarter * (m_sig + shb * m_om)
            xi = quarter * (m_sig - thb * m_om)
            zeta = quarter * (m_so - zeta_center)
            out[rep] = (rep, theta[-1], np.max(np.abs(xi)), np.max(np.abs(zeta)))
        rows[int(n)] = out
        theta_end = out[:, 1]
        m2 = float(np.mean(theta_end ** 2))
        m4 = float(np.mean(theta_end ** 4))
        kurt, kurt_se = _excess_kurtosis(theta_end)
        summary[int(n)] = {
            "theta_m2": m2,
            "theta_m4": m4,
            "oracle_m2": o2,
            "oracle_m4": o4,
            "excess_kurtosis": kurt,
            "excess_kurtosis_se": kurt_se,
            "median_sup_xi": float(np.median(out[:, 2])),
            "median_sup_zeta": float(np.median(out[:, 3])),
        }
    return HomogeneousCriticalResult(
        beta=beta,
        gamma=gamma,
        t_end=t_end,
        sample_dt=sample_dt,
        replicas=replicas,
        base_seed=base_seed,
        n_values=tuple(int(n) for n in n_values),
        rows=rows,
        summary=summary,
        oracle=oracle,
    )


def _excess_kurtosis(x: np.ndarray) -> Tuple[float, float]:
    """Excess kurtosis m4/m2^2 - 3 (zero-mean moments) with a delta-method
    standard error estimated from the replica spread."""
    m2 = float(np.mean(x ** 2))
    m4 = float(np.mean(x ** 4))
    g = m4 / m2 ** 2 - 3.0
    grad = np.array([1.0 / m2 ** 2, -2.0 * m4 / m2 ** 3])
    samples = np.stack([x ** 4, x ** 2])
    cov = np.cov(samples) / x.shape[0]
    var = float(grad @ cov @ grad)
    return g, math.sqrt(max(var, 0.0))


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def write_inhomogeneous_csv(
    result: InhomogeneousCriticalResult, n: int, path: str
) -> None:
    """Per-replica rows for one population size."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            "replica,r0,fitted_slope,predicted_slope,"
            "sup_ybar,sup_zbar,sup_ubar,sup_vbar,sup_wbar\n"
        )
        for row in result.rows[int(n)]:
            fh.write(
                "%d," % int(row[0])
                + ",".join("%.17g" % v for v in row[1:])
                + "\n"
            )


def write_homogeneous_csv(
    result: HomogeneousCriticalResult, n: int, path: str
) -> None:
    """Per-replica rows for one population size."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("replica,theta_end,sup_xi,sup_zeta\n")
        for row in result.rows[int(n)]:
            fh.write(
                "%d," % int(row[0])
                + ",".join("%.17g" % v for v in row[1:])
                + "\n"
            )


def write_summary_json(
    result: Union[InhomogeneousCriticalResult, HomogeneousCriticalResult],
    path: str,
) -> None:
    """Cross-N summary (correlations, medians, moment comparisons)."""
    payload = {
        "beta": result.beta,
        "gamma": result.gamma,
        "t_end": result.t_end,
        "sample_dt": result.sample_dt,
        "replicas": result.replicas,
        "base_seed": result.base_seed,
        "n_values": list(result.n_values),
        "summary": {str(n): result.summary[n] for n in result.n_values},
    }
    if isinstance(result, InhomogeneousCriticalResult):
        payload["h"] = result.h
    else:
        payload["oracle"] = {
            "t_end": result.oracle.t_end,
            "dt": result.oracle.dt,
            "n_paths": int(result.oracle.thetas.shape[0]),
            "n_aborted": len(result.oracle.aborted),
        }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
