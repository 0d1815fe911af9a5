"""Exact finite-population simulation of the two-spin flip dynamics.

States are kept as cell counts (see :mod:`duospin.model`); the jitted kernel
in :mod:`duospin.kernel` advances them one event at a time.  Public entry
points:

* :func:`init_state` — draw an initial state from a product initial law,
* :func:`step` — one event (useful for unit-level checks),
* :func:`simulate` — one trajectory with scheduled moment samples,
* :func:`run_replicas` — independent replicas with derived seeds,
* :func:`write_trajectory_csv` / :func:`read_trajectory_csv` — file format.

Seeding: every random stream is derived from a ``numpy.random.SeedSequence``.
A plain integer seed (or tuple of integers) is used as the entropy; the
sequence is split once into (a) a counter-based Philox generator for the
initial multinomial cell draw and (b) the four uint64 words of the in-kernel
xoshiro256++ stream.  Replica ``r`` of a batch with base seed ``s`` uses
entropy ``(s, r)``, so any replica can be reproduced in isolation and results
never depend on scheduling or thread count.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from . import kernel
from .model import (
    CELL_SPINS,
    MOMENT_NAMES,
    CellCounts,
    ModelParams,
    MomentVector,
    SpinConfig,
    cells_from_config,
    flip_rate_omega,
    flip_rate_sigma,
    moments_from_cells,
)

__all__ = [
    "SimState",
    "Event",
    "TrajectoryRecord",
    "SimulationCapError",
    "ReplicaFailure",
    "ETA_MODES",
    "init_state",
    "total_rate",
    "step",
    "simulate",
    "run_replicas",
    "write_trajectory_csv",
    "read_trajectory_csv",
]

SeedLike = Union[int, Sequence[int], np.random.SeedSequence]

#: Supported environment initializations.  "iid-symmetric" draws each eta_j
#: as a fair coin; "fixed-array" uses a caller-supplied +-1 array; "zero"
#: sets eta_j = +1 everywhere (only sensible for h = 0, where the dynamics do
#: not see eta at all); "joint" is implied by an 8-component initial law.
ETA_MODES = ("iid-symmetric", "fixed-array", "zero", "joint")

#: Ordering of 4-component initial laws on (sigma, omega):
#: [(-1,-1), (-1,+1), (+1,-1), (+1,+1)].
LAW4_STATES = ((-1, -1), (-1, 1), (1, -1), (1, 1))


class SimulationCapError(RuntimeError):
    """Raised when a run exhausts its event budget before finishing."""


class ReplicaFailure(RuntimeError):
    """Raised when one or more replicas of a batch fail."""


class SimState:
    """Mutable simulation state: cell counts, clock, and RNG stream.

    Single-threaded by design — do not share one instance across threads
    while stepping.  ``m_sigma`` is recomputed from the integer spin sum on
    access, so it is exact at all times (no incremental float drift).
    """

    __slots__ = ("_cells", "time", "_rng")

    def __init__(self, cells: np.ndarray, time: float, rng: np.ndarray):
        cells = np.asarray(cells, dtype=np.int64)
        if cells.shape != (8,) or cells.min() < 0 or cells.sum() < 1:
            raise ValueError(f"invalid cell counts {cells}")
        self._cells = cells.copy()
        self.time = float(time)
        self._rng = np.asarray(rng, dtype=np.uint64).copy()

    @property
    def cells(self) -> CellCounts:
        """Immutable snapshot of the current cell counts."""
        return CellCounts.from_array(self._cells)

    @property
    def cells_array(self) -> np.ndarray:
        """The live int64[8] count array (mutated by :func:`step`)."""
        return self._cells

    @property
    def rng_state(self) -> np.ndarray:
        """The live uint64[4] xoshiro256++ state."""
        return self._rng

    @property
    def n(self) -> int:
        return int(self._cells.sum())

    @property
    def m_sigma(self) -> float:
        ssum = int(np.sum(self._cells[4:]) - np.sum(self._cells[:4]))
        return ssum / self.n

    def moments(self) -> MomentVector:
        return moments_from_cells(self.cells)


class Event(NamedTuple):
    """One executed flip: its channel, kind, source cell spins, and time."""

    channel: int
    kind: str            # "sigma" or "omega"
    cell: Tuple[int, int, int]  # spins of the flipped site before the flip
    time: float          # clock value right after the event


@dataclass(frozen=True)
class TrajectoryRecord:
    """Sampled moment path of one realization.

    ``moments[i]`` holds the seven moments (MOMENT_NAMES order) at
    ``sample_times[i]``; paths are right-continuous, so a sample picks up the
    state reached by the last event at or before its time.
    """

    sample_times: np.ndarray
    moments: np.ndarray
    seed: object
    params: ModelParams
    n_events: int
    eta_mode: str
    channel_counts: np.ndarray

    def __post_init__(self) -> None:
        for name in ("sample_times", "moments", "channel_counts"):
            arr = np.asarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.moments.shape != (self.sample_times.shape[0], 7):
            raise ValueError("moments must have shape (len(sample_times), 7)")
        if np.any(np.diff(self.sample_times) <= 0):
            raise ValueError("sample times must be strictly increasing")

    def moment(self, name: str) -> np.ndarray:
        """Column of one moment by name (see MOMENT_NAMES)."""
        return self.moments[:, MOMENT_NAMES.index(name)]

    def final_moments(self) -> MomentVector:
        return MomentVector.from_array(self.moments[-1])


# ---------------------------------------------------------------------------
# Initialization
# ---------------------------------------------------------------------------


def _as_seed_sequence(seed: SeedLike) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def _validated_law(initial_law, size: int, what: str) -> np.ndarray:
    law = np.asarray(initial_law, dtype=np.float64)
    if law.shape != (size,):
        raise ValueError(f"{what} must have {size} entries, got shape {law.shape}")
    if law.min() < 0 or not np.isfinite(law).all():
        raise ValueError(f"{what} entries must be finite and non-negative")
    s = law.sum()
    if abs(s - 1.0) > 1e-9:
        raise ValueError(f"{what} must sum to 1, got {s!r}")
    return law / s


def init_state(
    params: ModelParams,
    initial_law,
    seed: SeedLike,
    *,
    eta_mode: str = "iid-symmetric",
    eta: Optional[Sequence[int]] = None,
) -> SimState:
    """Draw an initial state: sites iid from the initial law.

    ``initial_law`` is either 4 probabilities on (sigma, omega) in LAW4_STATES
    order — combined with the environment according to ``eta_mode`` — or 8
    probabilities on (sigma, omega, eta) in CELL_SPINS order (joint draw;
    ``eta_mode`` must then be "joint" or left at its default, which is
    overridden).  The environment is drawn once here and never changes.
    """
    law = np.asarray(initial_law, dtype=np.float64)
    ss = _as_seed_sequence(seed)
    init_ss, kern_ss = ss.spawn(2)
    gen = np.random.Generator(np.random.Philox(init_ss))
    n = params.n

    if law.shape == (8,):
        p8 = _validated_law(law, 8, "joint initial law")
        counts = gen.multinomial(n, p8)
    else:
        law4 = _validated_law(law, 4, "initial law on (sigma, omega)")
        counts = np.zeros(8, dtype=np.int64)
        if eta_mode == "iid-symmetric":
            p8 = np.repeat(law4, 2) / 2.0       # cell 2q + e, e in {0, 1}
            counts = gen.multinomial(n, p8)
        elif eta_mode == "zero":
            counts[1::2] = gen.multinomial(n, law4)   # every eta_j = +1
        elif eta_mode == "fixed-array":
            if eta is None:
                raise ValueError("eta_mode='fixed-array' requires an eta array")
            eta_arr = np.asarray(eta, dtype=np.int64)
            if eta_arr.shape != (n,) or not np.all(np.abs(eta_arr) == 1):
                raise ValueError(f"eta must be a +-1 array of shape ({n},)")
            n_plus = int(np.sum(eta_arr == 1))
            counts[1::2] = gen.multinomial(n_plus, law4)
            counts[0::2] = gen.multinomial(n - n_plus, law4)
        else:
            raise ValueError(f"unknown eta_mode {eta_mode!r}; use one of {ETA_MODES}")

    return SimState(counts, 0.0, kernel.seed_rng_state(kern_ss))


# ---------------------------------------------------------------------------
# Rates and stepping
# ---------------------------------------------------------------------------


def total_rate(state: Union[SimState, CellCounts, SpinConfig], params: ModelParams) -> float:
    """Total event rate of the current state (sum over all sites and flips)."""
    if isinstance(state, SimState):
        counts = state.cells_array
    elif isinstance(state, CellCounts):
        counts = state.as_array()
    elif isinstance(state, SpinConfig):
        counts = cells_from_config(state).as_array()
    else:
        raise TypeError(f"expected SimState, CellCounts or SpinConfig, got {type(state)}")
    n = int(counts.sum())
    m = float(np.sum(counts[4:]) - np.sum(counts[:4])) / n
    total = 0.0
    for c, (i, j, k) in enumerate(CELL_SPINS):
        nc = int(counts[c])
        if nc == 0:
            continue
        total += nc * (
            flip_rate_sigma(i, j, params)
            + flip_rate_omega(j, k, m, params)
        )
    return total


def step(state: SimState, params: ModelParams) -> Tuple[SimState, Event]:
    """Execute one event in place; returns the same state plus the event.

    Uses exactly the same draws in the same order as the batch kernel, so a
    loop of ``step`` calls reproduces :func:`simulate` bitwise.
    """
    counts = state.cells_array
    wbuf = np.empty(16, dtype=np.float64)
    dt, ch = kernel.draw_event(
        counts,
        state.n,
        math.exp(-params.beta),
        math.exp(params.beta),
        params.gamma,
        params.h,
        state.rng_state,
        wbuf,
    )
    kernel.apply_channel(counts, int(ch))
    state.time += float(dt)
    kind = "sigma" if ch < 8 else "omega"
    return state, Event(int(ch), kind, CELL_SPINS[int(ch) & 7], state.time)


# ---------------------------------------------------------------------------
# Full trajectories
# ---------------------------------------------------------------------------


def _default_event_cap(params: ModelParams, t_end: float) -> int:
    # Upper bound on the mean total rate: every site flips both spins at
    # most at rate exp(beta) + exp(gamma * (1 + h)).  Four times that budget
    # plus slack is unreachable for a healthy run.
    per_site = math.exp(params.beta) + math.exp(params.gamma * (1.0 + params.h))
    return int(4.0 * t_end * params.n * per_site) + 100_000


def simulate(
    params: ModelParams,
    initial_law,
    t_end: float,
    sample_dt: float,
    seed: SeedLike,
    *,
    eta_mode: str = "iid-symmetric",
    eta: Optional[Sequence[int]] = None,
    max_events: Optional[int] = None,
) -> TrajectoryRecord:
    """Simulate one realization, sampling moments every ``sample_dt``.

    Sample times are ``0, sample_dt, 2*sample_dt, ...`` up to and including
    ``t_end`` (when it is a multiple); ``t_end = 0`` records just the initial
    state.  Runs exceeding the event cap (default: generous rate-bound budget,
    see source) raise :class:`SimulationCapError` with diagnostics.
    """
    if t_end < 0 or not math.isfinite(t_end):
        raise ValueError(f"t_end must be finite and >= 0, got {t_end}")
    if sample_dt <= 0 or not math.isfinite(sample_dt):
        raise ValueError(f"sample_dt must be finite and > 0, got {sample_dt}")

    state = init_state(params, initial_law, seed, eta_mode=eta_mode, eta=eta)
    law = np.asarray(initial_law, dtype=np.float64)
    mode = "joint" if law.shape == (8,) else eta_mode

    sample_times = np.arange(0.0, t_end + 0.5 * sample_dt, sample_dt)
    out = np.empty((sample_times.shape[0], 7), dtype=np.float64)
    channel_counts = np.zeros(16, dtype=np.int64)
    cap = _default_event_cap(params, t_end) if max_events is None else int(max_events)

    status, n_events, t_final, n_rec = kernel.run_chain(
        state.cells_array,
        params.n,
        params.beta,
        params.gamma,
        params.h,
        0.0,
        sample_times,
        state.rng_state,
        cap,
        out,
        channel_counts,
    )
    if status != 0:
        raise SimulationCapError(
            f"event cap {cap} reached at t = {t_final:.6g} after {n_events} "
            f"events ({n_rec}/{len(sample_times)} samples recorded, "
            f"t_end = {t_end:.6g}); raise max_events or shorten the run"
        )
    return TrajectoryRecord(
        sample_times=sample_times,
        moments=out,
        seed=seed if not isinstance(seed, np.random.SeedSequence) else seed.entropy,
        params=params,
        n_events=int(n_events),
        eta_mode=mode,
        channel_counts=channel_counts,
    )


def run_replicas(
    params: ModelParams,
    initial_law,
    t_end: float,
    sample_dt: float,
    n_replicas: int,
    base_seed,
    *,
    eta_mode: str = "iid-symmetric",
    threads: int = 1,
    max_events: Optional[int] = None,
) -> List[TrajectoryRecord]:
    """Independent replicas; replica ``r`` uses seed entropy (*base_seed, r).

    ``base_seed`` may be an int or a tuple of ints (batch namespacing).
    Results are ordered by replica index and bitwise independent of
    ``threads``.  Any replica failure aborts the batch with a
    :class:`ReplicaFailure` naming the failed indices.
    """
    if n_replicas < 1:
        raise ValueError(f"n_replicas must be >= 1, got {n_replicas}")
    base = tuple(base_seed) if isinstance(base_seed, (tuple, list)) else (base_seed,)

    def job(r: int) -> TrajectoryRecord:
        return simulate(
            params,
            initial_law,
            t_end,
            sample_dt,
            (*base, r),
            eta_mode=eta_mode,
            max_events=max_events,
        )

    results: List[Optional[TrajectoryRecord]] = [None] * n_replicas
    failures: List[Tuple[int, Exception]] = []
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = {pool.submit(job, r): r for r in range(n_replicas)}
            for fut, r in futures.items():
                try:
                    results[r] = fut.result()
                except Exception as exc:  # noqa: BLE001 - reported below
                    failures.append((r, exc))
    else:
        for r in range(n_replicas):
            try:
                results[r] = job(r)
            except Exception as exc:  # noqa: BLE001 - reported below
                failures.append((r, exc))
    if failures:
        detail = "; ".join(f"replica {r}: {exc}" for r, exc in sorted(failures))
        raise ReplicaFailure(detail)
    return results  # type: ignore[return-value]


# ---------------------------------------------------------------------------
# File format
# ---------------------------------------------------------------------------

_CSV_HEADER = "t," + ",".join(MOMENT_NAMES)


def _sidecar_path(path: str) -> str:
    base, _ext = os.path.splitext(path)
    return base + ".json"


def write_trajectory_csv(record: TrajectoryRecord, path: str) -> None:
    """Write a trajectory as CSV (17 significant digits) plus a JSON sidecar.

    The sidecar (same basename, ``.json``) carries params, seed, population
    size, event count and environment mode.
    """
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_CSV_HEADER + "\n")
        for t, row in zip(record.sample_times, record.moments):
            fh.write("%.17g," % t + ",".join("%.17g" % x for x in row) + "\n")
    meta = {
        "params": {
            "beta": record.params.beta,
            "gamma": record.params.gamma,
            "h": record.params.h,
            "n": record.params.n,
        },
        "seed": _jsonable_seed(record.seed),
        "n_events": record.n_events,
        "eta_mode": record.eta_mode,
        "channel_counts": [int(c) for c in record.channel_counts],
    }
    with open(_sidecar_path(path), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _jsonable_seed(seed) -> object:
    if isinstance(seed, (int, np.integer)):
        return int(seed)
    if isinstance(seed, (tuple, list)):
        return [int(s) for s in seed]
    return repr(seed)


def read_trajectory_csv(path: str):
    """Read back a trajectory CSV; returns (times, moments, metadata dict).

    Metadata comes from the JSON sidecar when present, else an empty dict.
    """
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
    if header != _CSV_HEADER:
        raise ValueError(f"unexpected trajectory CSV header: {header!r}")
    meta = {}
    sidecar = _sidecar_path(path)
    if os.path.exists(sidecar):
        with open(sidecar, "r", encoding="utf-8") as fh:
            meta = json.load(fh)
    return data[:, 0], data[:, 1:], meta
