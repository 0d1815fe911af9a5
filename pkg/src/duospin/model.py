"""Core state types and elementary operations.

The model is a mean-field system of ``n`` sites.  Site ``j`` carries two
dynamic spins ``sigma_j, omega_j`` in ``{-1, +1}`` and one frozen environment
spin ``eta_j`` in ``{-1, +1}``.  The dynamics is a continuous-time Markov
chain with single-spin-flip transitions:

* ``sigma_j`` flips at rate ``exp(-beta * sigma_j * omega_j)``,
* ``omega_j`` flips at rate ``exp(-gamma * omega_j * (m_sigma + h * eta_j))``,

where ``m_sigma`` is the empirical mean of ``sigma`` over all ``n`` sites
(including site ``j`` itself), evaluated before the flip.  The environment
``eta`` never changes after initialization.

Because every rate depends on the configuration only through ``m_sigma`` and
the site's own spins, the occupation counts of the eight joint spin states
("cells") form a sufficient statistic for the dynamics.  Everything downstream
(simulation, moment equations, fluctuation theory) works with either the cell
counts or the seven mixed moments

``(m_eta, m_sigma, m_omega, m_sigma_omega, m_sigma_eta, m_omega_eta,
m_sigma_omega_eta)``,

which are an invertible linear transform of the cell frequencies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

__all__ = [
    "CELL_SPINS",
    "MOMENT_NAMES",
    "MOMENT_PATTERNS",
    "FRECHET_TOL",
    "ModelParams",
    "SpinConfig",
    "CellCounts",
    "MomentVector",
    "cell_index",
    "flip_rate_sigma",
    "flip_rate_omega",
    "cells_from_config",
    "moments_from_cells",
    "moments_to_cell_probs",
]

# ---------------------------------------------------------------------------
# Canonical orderings
# ---------------------------------------------------------------------------

#: Cell ordering: lexicographic in (sigma, omega, eta), with -1 before +1.
#: The cell index of spins (i, j, k) is
#: ``4 * (i + 1) // 2 + 2 * (j + 1) // 2 + (k + 1) // 2``.
CELL_SPINS: Tuple[Tuple[int, int, int], ...] = tuple(
    (i, j, k) for i in (-1, 1) for j in (-1, 1) for k in (-1, 1)
)

#: Moment ordering used everywhere in this package.
MOMENT_NAMES: Tuple[str, ...] = (
    "m_eta",
    "m_sigma",
    "m_omega",
    "m_sigma_omega",
    "m_sigma_eta",
    "m_omega_eta",
    "m_sigma_omega_eta",
)

# Per-cell spin values, one entry per cell in CELL_SPINS order.
CELL_I = np.array([s[0] for s in CELL_SPINS], dtype=np.int64)
CELL_J = np.array([s[1] for s in CELL_SPINS], dtype=np.int64)
CELL_K = np.array([s[2] for s in CELL_SPINS], dtype=np.int64)

#: Walsh patterns: row s, column c holds the product of spins entering moment
#: s evaluated at cell c.  Moments are ``m[s] = sum_c p[c] * pattern[s, c]``
#: and cell probabilities invert as
#: ``p[c] = (1 + sum_s m[s] * pattern[s, c]) / 8``.
_MOMENT_PATTERNS_INT = np.stack(
    [
        CELL_K,
        CELL_I,
        CELL_J,
        CELL_I * CELL_J,
        CELL_I * CELL_K,
        CELL_J * CELL_K,
        CELL_I * CELL_J * CELL_K,
    ]
)
MOMENT_PATTERNS = _MOMENT_PATTERNS_INT.astype(np.float64)

for _arr in (CELL_I, CELL_J, CELL_K, _MOMENT_PATTERNS_INT, MOMENT_PATTERNS):
    _arr.setflags(write=False)

#: Tolerance for the realizability (non-negative cell probability) check.
FRECHET_TOL = 1e-12


def cell_index(sigma: int, omega: int, eta: int) -> int:
    """Index of the cell holding sites with spins (sigma, omega, eta)."""
    if sigma not in (-1, 1) or omega not in (-1, 1) or eta not in (-1, 1):
        raise ValueError(f"spins must be +-1, got {(sigma, omega, eta)}")
    return 4 * (sigma + 1) // 2 + 2 * (omega + 1) // 2 + (eta + 1) // 2


# ---------------------------------------------------------------------------
# Parameters and configurations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModelParams:
    """Model parameters.

    Parameters
    ----------
    beta : float
        Spin-to-opinion alignment strength, must be > 0.  Enters the sigma
        flip rate ``exp(-beta * sigma * omega)``.
    gamma : float
        Opinion-to-field response strength, must be > 0.  Enters the omega
        flip rate ``exp(-gamma * omega * (m_sigma + h * eta))``.
    h : float
        Environment coupling, must be >= 0.
    n : int
        Number of sites, must be >= 1.  Analysis routines that do not touch a
        finite population ignore it; the default keeps them easy to call.
    """

    beta: float
    gamma: float
    h: float
    n: int = 1

    def __post_init__(self) -> None:
        if not (math.isfinite(self.beta) and self.beta > 0):
            raise ValueError(f"beta must be finite and > 0, got {self.beta!r}")
        if not (math.isfinite(self.gamma) and self.gamma > 0):
            raise ValueError(f"gamma must be finite and > 0, got {self.gamma!r}")
        if not (math.isfinite(self.h) and self.h >= 0):
            raise ValueError(f"h must be finite and >= 0, got {self.h!r}")
        if not (isinstance(self.n, (int, np.integer)) and self.n >= 1):
            raise ValueError(f"n must be an integer >= 1, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))

    def with_n(self, n: int) -> "ModelParams":
        """Same parameters with a different population size."""
        return ModelParams(self.beta, self.gamma, self.h, n)


def _frozen_spin_array(values, name: str, n: int) -> np.ndarray:
    arr = np.asarray(values, dtype=np.int64).copy()
    if arr.shape != (n,):
        raise ValueError(f"{name} must have shape ({n},), got {arr.shape}")
    if not np.all(np.abs(arr) == 1):
        raise ValueError(f"{name} entries must be +-1")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SpinConfig:
    """A full microscopic configuration: per-site spins (sigma, omega, eta).

    Arrays are stored read-only; ``eta`` never changes over the lifetime of a
    realization.
    """

    sigma: np.ndarray
    omega: np.ndarray
    eta: np.ndarray

    def __post_init__(self) -> None:
        n = len(np.asarray(self.sigma))
        object.__setattr__(self, "sigma", _frozen_spin_array(self.sigma, "sigma", n))
        object.__setattr__(self, "omega", _frozen_spin_array(self.omega, "omega", n))
        object.__setattr__(self, "eta", _frozen_spin_array(self.eta, "eta", n))

    @property
    def n(self) -> int:
        return self.sigma.shape[0]

    @property
    def m_sigma(self) -> float:
        return float(np.sum(self.sigma)) / self.n


@dataclass(frozen=True)
class CellCounts:
    """Occupation counts of the eight (sigma, omega, eta) cells.

    ``counts[c]`` is the number of sites whose spins equal ``CELL_SPINS[c]``.
    Counts are non-negative integers summing to the population size.
    """

    counts: Tuple[int, ...]

    def __post_init__(self) -> None:
        counts = tuple(int(c) for c in self.counts)
        if len(counts) != 8:
            raise ValueError(f"need 8 cell counts, got {len(counts)}")
        if any(c < 0 for c in counts):
            raise ValueError(f"cell counts must be non-negative, got {counts}")
        if sum(counts) < 1:
            raise ValueError("cell counts must sum to at least 1")
        object.__setattr__(self, "counts", counts)

    @property
    def n(self) -> int:
        return sum(self.counts)

    def count(self, sigma: int, omega: int, eta: int) -> int:
        return self.counts[cell_index(sigma, omega, eta)]

    def as_array(self) -> np.ndarray:
        return np.array(self.counts, dtype=np.int64)

    @classmethod
    def from_array(cls, arr) -> "CellCounts":
        return cls(tuple(int(c) for c in np.asarray(arr)))


@dataclass(frozen=True)
class MomentVector:
    """The seven mixed moments of a single-site law on {-1,+1}^3.

    Ordering: ``(m_eta, m_sigma, m_omega, m_sigma_omega, m_sigma_eta,
    m_omega_eta, m_sigma_omega_eta)``.  Construction validates that every
    component lies in [-1, 1] and that the implied eight cell probabilities
    are non-negative (realizability, tolerance ``FRECHET_TOL``).
    """

    m_eta: float
    m_sigma: float
    m_omega: float
    m_sigma_omega: float
    m_sigma_eta: float
    m_omega_eta: float
    m_sigma_omega_eta: float

    def __post_init__(self) -> None:
        vals = self.as_array()
        if not np.all(np.isfinite(vals)):
            raise ValueError(f"moments must be finite, got {vals}")
        if np.any(np.abs(vals) > 1.0 + FRECHET_TOL):
            raise ValueError(f"moments must lie in [-1, 1], got {vals}")
        probs = _probs_from_moment_array(vals)
        pmin = float(probs.min())
        if pmin < -FRECHET_TOL:
            raise ValueError(
                "moment vector is not realizable as a probability law: "
                f"minimal implied cell probability {pmin:.3e}"
            )

    def as_array(self) -> np.ndarray:
        return np.array(
            [
                self.m_eta,
                self.m_sigma,
                self.m_omega,
                self.m_sigma_omega,
                self.m_sigma_eta,
                self.m_omega_eta,
                self.m_sigma_omega_eta,
            ],
            dtype=np.float64,
        )

    @classmethod
    def from_array(cls, arr) -> "MomentVector":
        arr = np.asarray(arr, dtype=np.float64)
        if arr.shape != (7,):
            raise ValueError(f"need 7 moments, got shape {arr.shape}")
        return cls(*(float(x) for x in arr))

    @classmethod
    def zero(cls) -> "MomentVector":
        return cls(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)


# ---------------------------------------------------------------------------
# Elementary operations
# ---------------------------------------------------------------------------


def flip_rate_sigma(sigma_j: int, omega_j: int, params: ModelParams) -> float:
    """Flip rate of a site's sigma spin: ``exp(-beta * sigma_j * omega_j)``."""
    if sigma_j not in (-1, 1) or omega_j not in (-1, 1):
        raise ValueError(f"spins must be +-1, got {(sigma_j, omega_j)}")
    return math.exp(-params.beta * sigma_j * omega_j)


def flip_rate_omega(
    omega_j: int, eta_j: int, m_sigma: float, params: ModelParams
) -> float:
    """Flip rate of a site's omega spin.

    ``exp(-gamma * omega_j * (m_sigma + h * eta_j))`` with ``m_sigma`` the
    pre-flip empirical sigma mean over the whole population (the flipping
    site included).
    """
    if omega_j not in (-1, 1) or eta_j not in (-1, 1):
        raise ValueError(f"spins must be +-1, got {(omega_j, eta_j)}")
    if not (-1.0 - 1e-12 <= m_sigma <= 1.0 + 1e-12):
        raise ValueError(f"m_sigma must lie in [-1, 1], got {m_sigma}")
    return math.exp(-params.gamma * omega_j * (m_sigma + params.h * eta_j))


def cells_from_config(config: SpinConfig) -> CellCounts:
    """Tally a configuration into the eight cells."""
    idx = (
        2 * (config.sigma + 1) + (config.omega + 1) + (config.eta + 1) // 2
    )
    counts = np.bincount(idx, minlength=8)
    return CellCounts.from_array(counts)


def moments_from_cells(cells: CellCounts) -> MomentVector:
    """Empirical moments of a cell-count state (exact rationals over n)."""
    counts = cells.as_array()
    sums = _MOMENT_PATTERNS_INT @ counts
    return MomentVector.from_array(sums / float(cells.n))


def _probs_from_moment_array(m: np.ndarray) -> np.ndarray:
    """Cell probabilities implied by a raw 7-moment array (no validation)."""
    return (1.0 + MOMENT_PATTERNS.T @ m) / 8.0


def moments_to_cell_probs(moments) -> np.ndarray:
    """Cell probabilities of the unique law with the given moments.

    Accepts a :class:`MomentVector` or a raw 7-array.  Raises ``ValueError``
    if any implied probability is below ``-FRECHET_TOL`` (inconsistent
    moments are flagged, never silently clamped).  Probabilities within the
    tolerance band ``[-FRECHET_TOL, 0)`` are set to zero and the vector is
    renormalized; the result always sums to 1 up to float rounding.
    """
    arr = (
        moments.as_array()
        if isinstance(moments, MomentVector)
        else np.asarray(moments, dtype=np.float64)
    )
    if arr.shape != (7,):
        raise ValueError(f"expected 7 moments, got shape {arr.shape}")
    probs = _probs_from_moment_array(arr)
    pmin = float(probs.min())
    if pmin < -FRECHET_TOL:
        raise ValueError(
            f"moments imply a negative cell probability ({pmin:.3e})"
        )
    if pmin < 0.0:
        probs = np.clip(probs, 0.0, None)
        probs = probs / probs.sum()
    return probs
