"""Independent reference routes for validating the event-driven simulator.

Nothing here shares code with the production kernel: rates are written out
inline, states are enumerated explicitly, and the transient law of the
two-site chain comes from a dense matrix exponential.  These are the slow,
obviously-correct counterparts used by the test suite.
"""

from __future__ import annotations

import math
from typing import Sequence, Tuple

import numpy as np
from scipy.linalg import expm

from .model import ModelParams, SpinConfig

__all__ = [
    "TWO_SITE_STATES",
    "two_site_generator",
    "two_site_transient",
    "two_site_state_index",
    "two_site_initial_distribution",
    "reference_simulate",
    "total_variation",
]

# Per-site (sigma, omega) states in lexicographic order (-1 before +1);
# a two-site state is (q1, q2) with index 4 * q1 + q2.
_SITE_STATES = ((-1, -1), (-1, 1), (1, -1), (1, 1))
TWO_SITE_STATES = tuple(
    (_SITE_STATES[q1], _SITE_STATES[q2]) for q1 in range(4) for q2 in range(4)
)


def two_site_generator(params: ModelParams, eta: Tuple[int, int]) -> np.ndarray:
    """Exact 16x16 generator of the N = 2 chain with a fixed environment.

    Row s, column s' holds the rate s -> s'; diagonal entries make rows sum
    to zero.  Rates are written from the model definition directly.
    """
    beta, gamma, h = params.beta, params.gamma, params.h
    q_mat = np.zeros((16, 16))
    for s, ((s1, o1), (s2, o2)) in enumerate(TWO_SITE_STATES):
        m = 0.5 * (s1 + s2)
        jumps = (
            # (target state tuple, rate)
            (((-s1, o1), (s2, o2)), math.exp(-beta * s1 * o1)),
            (((s1, o1), (-s2, o2)), math.exp(-beta * s2 * o2)),
            (((s1, -o1), (s2, o2)), math.exp(-gamma * o1 * (m + h * eta[0]))),
            (((s1, o1), (s2, -o2)), math.exp(-gamma * o2 * (m + h * eta[1]))),
        )
        for target, rate in jumps:
            t = TWO_SITE_STATES.index(target)
            q_mat[s, t] += rate
    np.fill_diagonal(q_mat, q_mat.diagonal() - q_mat.sum(axis=1))
    return q_mat


def two_site_transient(
    params: ModelParams, eta: Tuple[int, int], p0: np.ndarray, t: float
) -> np.ndarray:
    """Distribution over the 16 two-site states at time ``t``: p0 expm(Qt)."""
    return np.asarray(p0, dtype=np.float64) @ expm(two_site_generator(params, eta) * t)


def two_site_initial_distribution(law4: Sequence[float]) -> np.ndarray:
    """Product initial law over the 16 states from 4 per-site probabilities."""
    law = np.asarray(law4, dtype=np.float64)
    return np.outer(law, law).ravel()


def two_site_state_index(moments: np.ndarray) -> int:
    """Recover the two-site state from the seven moments, for eta = (+1, -1).

    With that environment, ``sigma_1 = m_sigma + m_sigma_eta`` and
    ``sigma_2 = m_sigma - m_sigma_eta`` (same for omega), so the moments
    identify the microscopic state exactly.
    """
    m = np.asarray(moments, dtype=np.float64)
    s1 = int(round(m[1] + m[4]))
    s2 = int(round(m[1] - m[4]))
    o1 = int(round(m[2] + m[5]))
    o2 = int(round(m[2] - m[5]))
    for val in (s1, s2, o1, o2):
        if val not in (-1, 1):
            raise ValueError(f"moments {m} do not encode a two-site state")
    q1 = _SITE_STATES.index((s1, o1))
    q2 = _SITE_STATES.index((s2, o2))
    return 4 * q1 + q2


def reference_simulate(
    params: ModelParams,
    config: SpinConfig,
    t_end: float,
    rng: np.random.Generator,
) -> SpinConfig:
    """Naive per-site Gillespie simulation (O(n) per event); returns the
    configuration at ``t_end``.

    Recomputes every site's two flip rates from scratch at each event — the
    plain transcription of the model definition, used as a slow cross-check.
    """
    sigma = np.array(config.sigma)
    omega = np.array(config.omega)
    eta = np.array(config.eta)
    n = sigma.shape[0]
    t = 0.0
    while True:
        m = float(np.sum(sigma)) / n
        rates = np.concatenate(
            [
                np.exp(-params.beta * sigma * omega),
                np.exp(-params.gamma * omega * (m + params.h * eta)),
            ]
        )
        total = float(rates.sum())
        t += rng.exponential(1.0 / total)
        if t > t_end:
            return SpinConfig(sigma, omega, eta)
        pick = rng.choice(2 * n, p=rates / total)
        if pick < n:
            sigma[pick] = -sigma[pick]
        else:
            omega[pick - n] = -omega[pick - n]


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    """Total variation distance between two distributions."""
    return 0.5 * float(np.sum(np.abs(np.asarray(p) - np.asarray(q))))
