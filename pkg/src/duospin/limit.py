"""Infinite-population limit: the closed ODE system for the seven moments.

In the large-N limit the empirical moments converge to the solution of a
closed 7-dimensional ODE.  With the shorthand

``chb = cosh(beta)``, ``shb = sinh(beta)``, ``CH = cosh(gamma h)``,
``SH = sinh(gamma h)``, ``c1 = cosh(gamma m_sigma)``,
``s1 = sinh(gamma m_sigma)``,

the flow is (ordering as in MOMENT_NAMES):

* ``d m_eta            = 0``  (frozen environment)
* ``d m_sigma          = -2 m_sigma chb + 2 m_omega shb``
* ``d m_omega          = -2 m_omega CH c1 - 2 m_omega_eta SH s1 + 2 CH s1
  + 2 m_eta SH c1``
* ``d m_sigma_omega    = 2 m_sigma CH s1 - 2 m_sigma_omega (chb + CH c1)
  + 2 m_sigma_eta SH c1 - 2 m_sigma_omega_eta SH s1 + 2 shb``
* ``d m_sigma_eta      = -2 m_sigma_eta chb + 2 m_omega_eta shb``
* ``d m_omega_eta      = -2 m_omega SH s1 - 2 m_omega_eta CH c1 + 2 SH c1
  + 2 m_eta CH s1``
* ``d m_sigma_omega_eta = 2 m_sigma SH c1 - 2 m_sigma_omega SH s1
  + 2 m_sigma_eta CH s1 - 2 m_sigma_omega_eta (chb + CH c1) + 2 m_eta shb``

The ``m_eta``-proportional terms are the exact conditional drift of the
finite-N chain given the environment; for a balanced environment
(``m_eta = 0``, the almost-sure limit) they vanish.  They are kept so the
partial derivative of the flow in ``m_eta`` is available to the fluctuation
theory (see :mod:`duospin.fluctuations`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.integrate import solve_ivp

from .model import ModelParams, MomentVector
from .simulate import TrajectoryRecord

__all__ = [
    "OdePath",
    "OdeIntegrationError",
    "mkv_rhs",
    "integrate",
    "flow_comparison",
]

_TOL_RANGE_MSG = "tolerances must lie in (0, 1e-2]"


class OdeIntegrationError(RuntimeError):
    """Raised when the moment ODE integration fails to reach t_end."""


def mkv_rhs(m, params: ModelParams) -> np.ndarray:
    """Right-hand side of the limiting moment ODE at moment vector ``m``.

    ``m`` is a MomentVector or a raw length-7 array in MOMENT_NAMES order.
    The first component (``m_eta``) has derivative identically 0.
    """
    if isinstance(m, MomentVector):
        m = m.as_array()
    e, s, o, so, se, oe, soe = (float(x) for x in m)
    chb = math.cosh(params.beta)
    shb = math.sinh(params.beta)
    gh = params.gamma * params.h
    CH = math.cosh(gh)
    SH = math.sinh(gh)
    c1 = math.cosh(params.gamma * s)
    s1 = math.sinh(params.gamma * s)
    return np.array(
        [
            0.0,
            -2.0 * s * chb + 2.0 * o * shb,
            -2.0 * o * CH * c1 - 2.0 * oe * SH * s1 + 2.0 * CH * s1
            + 2.0 * e * SH * c1,
            2.0 * s * CH * s1 - 2.0 * so * (chb + CH * c1)
            + 2.0 * se * SH * c1 - 2.0 * soe * SH * s1 + 2.0 * shb,
            -2.0 * se * chb + 2.0 * oe * shb,
            -2.0 * o * SH * s1 - 2.0 * oe * CH * c1 + 2.0 * SH * c1
            + 2.0 * e * CH * s1,
            2.0 * s * SH * c1 - 2.0 * so * SH * s1 + 2.0 * se * CH * s1
            - 2.0 * soe * (chb + CH * c1) + 2.0 * e * shb,
        ]
    )


@dataclass(frozen=True)
class OdePath:
    """Dense solution of the moment ODE on [0, t_end].

    ``states[i]`` is the full 7-moment vector at ``times[i]`` (the solver's
    accepted steps); ``at(t)`` interpolates anywhere inside the time span.
    ``m_eta`` is carried as the frozen first component.
    """

    times: np.ndarray
    states: np.ndarray
    params: ModelParams
    rel_tol: float
    abs_tol: float
    _dense: object = None

    def __post_init__(self) -> None:
        for name in ("times", "states"):
            arr = np.asarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    @property
    def m_eta(self) -> float:
        return float(self.states[0, 0])

    def at(self, t) -> np.ndarray:
        """Interpolated moment vectors, shape (len(t), 7) (or (7,) scalar t)."""
        t_arr = np.atleast_1d(np.asarray(t, dtype=np.float64))
        if t_arr.min() < self.times[0] - 1e-12 or t_arr.max() > self.t_end + 1e-12:
            raise ValueError(
                f"requested times outside [{self.times[0]}, {self.t_end}]"
            )
        if self._dense is None:  # degenerate t_end = 0 path
            out = np.tile(self.states[0], (t_arr.shape[0], 1))
        else:
            out = np.empty((t_arr.shape[0], 7), dtype=np.float64)
            out[:, 0] = self.m_eta
            out[:, 1:] = self._dense(np.clip(t_arr, self.times[0], self.t_end)).T
        return out[0] if np.isscalar(t) or np.asarray(t).ndim == 0 else out


def integrate(
    m0: Union[MomentVector, np.ndarray],
    params: ModelParams,
    t_end: float,
    rel_tol: float = 1e-10,
    abs_tol: float = 1e-12,
) -> OdePath:
    """Integrate the moment ODE from ``m0`` over [0, t_end].

    ``m_eta`` stays frozen (it is a parameter of the reduced 6-dim system,
    not an integrated variable).  Raises :class:`OdeIntegrationError` with
    the failing time if the solver cannot reach ``t_end``; raises
    ``ValueError`` for out-of-range tolerances or a state escaping
    ``[-1, 1]^7`` beyond rounding.
    """
    if not (0.0 < rel_tol <= 1e-2) or not (0.0 < abs_tol <= 1e-2):
        raise ValueError(_TOL_RANGE_MSG)
    if t_end < 0 or not math.isfinite(t_end):
        raise ValueError(f"t_end must be finite and >= 0, got {t_end}")
    if isinstance(m0, MomentVector):
        m0 = m0.as_array()
    m0 = np.asarray(m0, dtype=np.float64)
    if m0.shape != (7,):
        raise ValueError(f"m0 must have 7 components, got shape {m0.shape}")
    m_eta = float(m0[0])

    if t_end == 0.0:
        return OdePath(
            times=np.array([0.0]),
            states=m0[None, :].copy(),
            params=params,
            rel_tol=rel_tol,
            abs_tol=abs_tol,
        )

    def rhs(_t, y):
        full = np.empty(7)
        full[0] = m_eta
        full[1:] = y
        return mkv_rhs(full, params)[1:]

    sol = solve_ivp(
        rhs,
        (0.0, t_end),
        m0[1:],
        method="RK45",
        rtol=rel_tol,
        atol=abs_tol,
        dense_output=True,
    )
    if not sol.success:
        raise OdeIntegrationError(
            f"moment ODE integration stalled at t = {sol.t[-1]:.6g} "
            f"(t_end = {t_end:.6g}): {sol.message}"
        )
    states = np.empty((sol.t.shape[0], 7), dtype=np.float64)
    states[:, 0] = m_eta
    states[:, 1:] = sol.y.T
    overshoot = float(np.max(np.abs(states)))
    if overshoot > 1.0 + 1e-8:
        raise OdeIntegrationError(
            f"moment ODE state escaped [-1, 1] (max |m| = {overshoot:.3e})"
        )
    return OdePath(
        times=sol.t,
        states=states,
        params=params,
        rel_tol=rel_tol,
        abs_tol=abs_tol,
        _dense=sol.sol,
    )


def flow_comparison(record: TrajectoryRecord, path: OdePath) -> np.ndarray:
    """Per-component sup distance between a trajectory and an ODE path.

    Interpolates the ODE path to the trajectory's sample times and returns
    the seven sup-norms ``max_t |empirical - ODE|`` in MOMENT_NAMES order.
    Refuses records and paths built for different (beta, gamma, h) —
    population size is allowed to differ, since the path is the N-free limit.
    """
    rp, pp = record.params, path.params
    if (rp.beta, rp.gamma, rp.h) != (pp.beta, pp.gamma, pp.h):
        raise ValueError(
            f"mismatched params: record has (beta, gamma, h) = "
            f"{(rp.beta, rp.gamma, rp.h)}, path has {(pp.beta, pp.gamma, pp.h)}"
        )
    ode_vals = path.at(record.sample_times)
    return np.max(np.abs(record.moments - ode_vals), axis=0)
