"""Jitted event loop over the 8-cell sufficient statistic.

Each event costs O(1): rates depend on the configuration only through the
cell counts and the integer sigma sum, so one event needs four exp() calls
for the omega rates (the two sigma rates are precomputed), a 16-way discrete
choice, and two integer updates.

Event channels are numbered 0..15: channel ``c`` (0..7) flips the sigma spin
of a site in cell ``c`` (cell ``c`` -> cell ``c ^ 4``), channel ``8 + c``
flips the omega spin (cell ``c`` -> cell ``c ^ 2``).  Per event the generator
draws exactly two uniforms from the in-state xoshiro256++ stream, in fixed
order: waiting time first, channel second.  This makes single-step and batch
execution bitwise identical.

Uniforms are mapped to (0, 1] (never 0), so ``-log(u)`` is always finite.
"""

from __future__ import annotations

import numpy as np
from numba import njit, uint64

from .model import CELL_I, CELL_J, CELL_K

__all__ = [
    "seed_rng_state",
    "draw_event",
    "apply_channel",
    "run_chain",
    "run_events",
    "sample_channels_frozen",
    "next_uniform",
]

_U64_1 = np.uint64(1)
_TWO_M53 = 1.1102230246251565e-16  # 2 ** -53


def seed_rng_state(seed_seq: np.random.SeedSequence) -> np.ndarray:
    """Derive a xoshiro256++ state (four nonzero-ish uint64 words)."""
    state = seed_seq.generate_state(4, dtype=np.uint64)
    if not state.any():  # all-zero state is the one invalid seed
        state[0] = _U64_1
    return state


@njit(uint64(uint64, uint64), cache=True, nogil=True, inline="always")
def _rotl(x, k):
    return (x << k) | (x >> (np.uint64(64) - k))


@njit(cache=True, nogil=True, inline="always")
def _next_u64(rng):
    # xoshiro256++ step; rng is a uint64[4] array mutated in place.
    result = _rotl(rng[0] + rng[3], np.uint64(23)) + rng[0]
    t = rng[1] << np.uint64(17)
    rng[2] ^= rng[0]
    rng[3] ^= rng[1]
    rng[1] ^= rng[2]
    rng[0] ^= rng[3]
    rng[2] ^= t
    rng[3] = _rotl(rng[3], np.uint64(45))
    return result


@njit(cache=True, nogil=True, inline="always")
def next_uniform(rng):
    """Uniform draw in (0, 1] from the 53 high bits of the next word."""
    return (np.float64(_next_u64(rng) >> np.uint64(11)) + 1.0) * _TWO_M53


@njit(cache=True, nogil=True)
def draw_event(counts, n, exp_mb, exp_pb, gamma, h, rng, wbuf):
    """Draw (waiting time, channel) from the current state; no mutation.

    ``exp_mb`` / ``exp_pb`` are exp(-beta) / exp(+beta).  ``wbuf`` is a
    float64[16] scratch array for the channel weights.
    """
    ssig = 0
    for c in range(8):
        ssig += CELL_I[c] * counts[c]
    m = ssig / n
    total = 0.0
    for c in range(8):
        r = exp_mb if CELL_I[c] == CELL_J[c] else exp_pb
        w = counts[c] * r
        wbuf[c] = w
        total += w
    rpp = np.exp(-gamma * (m + h))  # omega=+1, eta=+1
    rpm = np.exp(-gamma * (m - h))  # omega=+1, eta=-1
    rmp = np.exp(gamma * (m + h))   # omega=-1, eta=+1
    rmm = np.exp(gamma * (m - h))   # omega=-1, eta=-1
    for c in range(8):
        if CELL_J[c] == 1:
            r = rpp if CELL_K[c] == 1 else rpm
        else:
            r = rmp if CELL_K[c] == 1 else rmm
        w = counts[c] * r
        wbuf[8 + c] = w
        total += w
    dt = -np.log(next_uniform(rng)) / total
    v = next_uniform(rng) * total
    acc = 0.0
    ch = -1
    for c in range(16):
        acc += wbuf[c]
        if v <= acc:
            ch = c
            break
    if ch < 0:
        # float rounding spilled past the last bin: take the last active one
        for c in range(15, -1, -1):
            if wbuf[c] > 0.0:
                ch = c
                break
    return dt, ch


@njit(cache=True, nogil=True, inline="always")
def apply_channel(counts, ch):
    """Apply the flip encoded by channel ``ch`` to the cell counts."""
    c = ch & 7
    counts[c] -= 1
    if ch < 8:
        counts[c ^ 4] += 1
    else:
        counts[c ^ 2] += 1


@njit(cache=True, nogil=True, inline="always")
def _record_moments(out, row, counts, n):
    s_e = 0
    s_s = 0
    s_o = 0
    s_so = 0
    s_se = 0
    s_oe = 0
    s_soe = 0
    for c in range(8):
        nc = counts[c]
        i = CELL_I[c]
        j = CELL_J[c]
        k = CELL_K[c]
        s_e += k * nc
        s_s += i * nc
        s_o += j * nc
        s_so += i * j * nc
        s_se += i * k * nc
        s_oe += j * k * nc
        s_soe += i * j * k * nc
    inv = 1.0 / n
    out[row, 0] = s_e * inv
    out[row, 1] = s_s * inv
    out[row, 2] = s_o * inv
    out[row, 3] = s_so * inv
    out[row, 4] = s_se * inv
    out[row, 5] = s_oe * inv
    out[row, 6] = s_soe * inv


@njit(cache=True, nogil=True)
def run_chain(
    counts,
    n,
    beta,
    gamma,
    h,
    t0,
    sample_times,
    rng,
    max_events,
    out_moments,
    channel_counts,
):
    """Advance the chain until all sample times are recorded.

    The recorded value at sample time ``s`` is the state reached by the last
    event at or before ``s`` (right-continuous paths: an event exactly at
    ``s`` is included).  Mutates ``counts``, ``rng``, ``out_moments`` and
    ``channel_counts`` in place.

    Returns ``(status, n_events, t_final, n_recorded)`` where status 0 means
    all samples recorded and status 1 means the event cap was hit first.
    """
    exp_mb = np.exp(-beta)
    exp_pb = np.exp(beta)
    wbuf = np.empty(16, np.float64)
    t = t0
    si = 0
    n_ev = 0
    nsamp = sample_times.shape[0]
    while si < nsamp:
        dt, ch = draw_event(counts, n, exp_mb, exp_pb, gamma, h, rng, wbuf)
        t_next = t + dt
        while si < nsamp and sample_times[si] < t_next:
            _record_moments(out_moments, si, counts, n)
            si += 1
        if si >= nsamp:
            break
        if n_ev >= max_events:
            return 1, n_ev, t, si
        apply_channel(counts, ch)
        channel_counts[ch] += 1
        n_ev += 1
        t = t_next
    return 0, n_ev, t, si


@njit(cache=True, nogil=True)
def run_events(counts, n, beta, gamma, h, n_events, rng, channel_counts):
    """Run exactly ``n_events`` events; returns elapsed time.

    Mutates ``counts``, ``rng`` and ``channel_counts`` in place.
    """
    exp_mb = np.exp(-beta)
    exp_pb = np.exp(beta)
    wbuf = np.empty(16, np.float64)
    t = 0.0
    for _ in range(n_events):
        dt, ch = draw_event(counts, n, exp_mb, exp_pb, gamma, h, rng, wbuf)
        apply_channel(counts, ch)
        channel_counts[ch] += 1
        t += dt
    return t


@njit(cache=True, nogil=True)
def sample_channels_frozen(counts, n, beta, gamma, h, n_draws, rng):
    """Histogram of channel draws with the state held fixed (no flips)."""
    exp_mb = np.exp(-beta)
    exp_pb = np.exp(beta)
    wbuf = np.empty(16, np.float64)
    hist = np.zeros(16, np.int64)
    for _ in range(n_draws):
        _dt, ch = draw_event(counts, n, exp_mb, exp_pb, gamma, h, rng, wbuf)
        hist[ch] += 1
    return hist
