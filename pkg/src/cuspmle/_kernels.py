"""Hot numeric kernels with numba-compiled and pure-numpy implementations.

Two kernels dominate the Monte Carlo experiments:

  * ``simulate_events`` -- thinning simulation of a whole dataset of
    replicates in one call, with per-replicate counter-based random
    streams (SplitMix64 in counter mode keyed by (seed, replicate)).
    Candidate counts come from Poisson inversion against a shared
    cumulative table, candidate times are scaled raw uniforms, so both
    implementations consume identical streams and produce bit-identical
    event times.

  * ``event_loglik`` -- the event-sum part of the pseudo log-likelihood,
    sum over events t in (theta, theta+delta) of
    log(S ((t-theta)/delta)^kappa + lam0) plus a plateau count term,
    evaluated on a whole grid of theta values against one pooled sorted
    event array.

The numba path is selected by default when numba imports; set the
environment variable ``CUSPMLE_DISABLE_NUMBA=1`` to force the numpy
fallback.  ``benchmarks/bench_kernels.py`` times both paths.
"""

from __future__ import annotations

import math
import os

import numpy as np

__all__ = [
    "USE_NUMBA",
    "backend_name",
    "simulate_events",
    "event_loglik",
    "poisson_cum_table",
    "stream_origin",
    "stream_uniforms",
]

_FLAG = os.environ.get("CUSPMLE_DISABLE_NUMBA", "").strip().lower()
_DISABLED = _FLAG in ("1", "true", "yes", "on")

# SplitMix64 finalizer constants plus two odd increments: one advances the
# counter within a stream, the other separates stream origins.
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_GAMMA2 = np.uint64(0xD1B54A32D192ED03)
_INV53 = 1.0 / 9007199254740992.0  # 2^-53

_MAX_CHUNK_MEAN = 32.0


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"


def poisson_cum_table(mean: float) -> np.ndarray:
    """Cumulative Poisson(mean) probabilities, grown until they reach 1.0.

    Shared by both kernel paths so that count draws by inversion agree
    bit-for-bit.  Callers keep mean <= 32 by chunking.
    """
    if mean < 0.0:
        raise ValueError(f"mean must be nonnegative, got {mean}")
    p = math.exp(-mean)
    cum = p
    out = [cum]
    k = 0
    while cum < 1.0 and p > 0.0 and k < 2000:
        k += 1
        p *= mean / k
        cum += p
        out.append(cum)
    return np.asarray(out, dtype=np.float64)


def _split_mean(mean: float) -> tuple[int, float]:
    """Number of Poisson chunks and per-chunk mean keeping inversion tables short."""
    chunks = max(1, math.ceil(mean / _MAX_CHUNK_MEAN))
    return chunks, mean / chunks


# ---------------------------------------------------------------------------
# pure-numpy reference implementations
# ---------------------------------------------------------------------------

def _mix64_np(z):
    # uint64 wraparound is the point here
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
        return z ^ (z >> np.uint64(31))


def stream_origin(seed: int, index: int) -> np.uint64:
    """Origin of the counter stream for replicate ``index`` under ``seed``."""
    with np.errstate(over="ignore"):
        s = _mix64_np(np.uint64(seed & 0xFFFFFFFFFFFFFFFF))
        return _mix64_np(s ^ (np.uint64(index + 1) * _GAMMA2))


def stream_uniforms(origin: np.uint64, start: int, count: int) -> np.ndarray:
    """Uniforms at counter positions start .. start+count-1 (1-based counters)."""
    with np.errstate(over="ignore"):
        idx = np.arange(start, start + count, dtype=np.uint64)
        bits = _mix64_np(origin + idx * _GAMMA)
    return (bits >> np.uint64(11)).astype(np.float64) * _INV53


def _simulate_events_np(seed, n, tau, lam_max, s_real, lam0, kappa, delta, theta0, cum, chunks):
    inv_delta = 1.0 / delta
    cand_counts = np.empty(n, dtype=np.int64)
    for j in range(n):
        origin = stream_origin(seed, j)
        u = stream_uniforms(origin, 1, chunks)
        cand_counts[j] = int(np.searchsorted(cum, u, side="right").sum())
    total = int(cand_counts.sum())
    events = np.empty(total, dtype=np.float64)
    counts = np.empty(n, dtype=np.int64)
    cursor = 0
    for j in range(n):
        origin = stream_origin(seed, j)
        k = int(cand_counts[j])
        t = stream_uniforms(origin, chunks + 1, k) * tau
        u2 = stream_uniforms(origin, chunks + 1 + k, k)
        front = np.clip((t - theta0) * inv_delta, 0.0, 1.0) ** kappa
        acc = t[u2 * lam_max < s_real * front + lam0]
        m = acc.shape[0]
        events[cursor:cursor + m] = np.sort(acc)
        counts[j] = m
        cursor += m
    return events[:cursor].copy(), counts


def _event_loglik_np(events, thetas, s, lam0, kappa, delta, log_plateau):
    n_ev = events.shape[0]
    out = np.empty(thetas.shape[0], dtype=np.float64)
    inv_delta = 1.0 / delta
    for i, th in enumerate(thetas):
        i1 = np.searchsorted(events, th, side="right")
        i2 = np.searchsorted(events, th + delta, side="left")
        seg = events[i1:i2]
        out[i] = np.log(s * ((seg - th) * inv_delta) ** kappa + lam0).sum() + (n_ev - i2) * log_plateau
    return out


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

USE_NUMBA = False
if not _DISABLED:
    try:
        from numba import njit

        @njit(cache=True, nogil=True)
        def _mix64_nb(z):
            z = (z ^ (z >> np.uint64(30))) * _M1
            z = (z ^ (z >> np.uint64(27))) * _M2
            return z ^ (z >> np.uint64(31))

        @njit(cache=True, nogil=True)
        def _origin_nb(seed, index):
            s = _mix64_nb(np.uint64(seed))
            return _mix64_nb(s ^ (np.uint64(index + 1) * _GAMMA2))

        @njit(cache=True, nogil=True)
        def _uniform_nb(origin, i):
            bits = _mix64_nb(origin + np.uint64(i) * _GAMMA)
            return np.float64(bits >> np.uint64(11)) * _INV53

        @njit(cache=True, nogil=True)
        def _simulate_events_nb(seed, n, tau, lam_max, s_real, lam0, kappa, delta, theta0, cum, chunks):
            inv_delta = 1.0 / delta
            cand_counts = np.empty(n, dtype=np.int64)
            total = 0
            for j in range(n):
                origin = _origin_nb(seed, j)
                k = 0
                for c in range(chunks):
                    u = _uniform_nb(origin, 1 + c)
                    k += np.searchsorted(cum, u, side="right")
                cand_counts[j] = k
                total += k
            events = np.empty(total, dtype=np.float64)
            counts = np.empty(n, dtype=np.int64)
            cursor = 0
            for j in range(n):
                origin = _origin_nb(seed, j)
                k = cand_counts[j]
                m = 0
                for i in range(k):
                    t = _uniform_nb(origin, chunks + 1 + i) * tau
                    u2 = _uniform_nb(origin, chunks + 1 + k + i)
                    x = (t - theta0) * inv_delta
                    if x <= 0.0:
                        front = 0.0
                    elif x >= 1.0:
                        front = 1.0
                    else:
                        front = x**kappa
                    if u2 * lam_max < s_real * front + lam0:
                        events[cursor + m] = t
                        m += 1
                events[cursor:cursor + m] = np.sort(events[cursor:cursor + m])
                counts[j] = m
                cursor += m
            return events[:cursor].copy(), counts

        @njit(cache=True, nogil=True)
        def _event_loglik_nb(events, thetas, s, lam0, kappa, delta, log_plateau):
            n_ev = events.shape[0]
            out = np.empty(thetas.shape[0], dtype=np.float64)
            inv_delta = 1.0 / delta
            for i in range(thetas.shape[0]):
                th = thetas[i]
                i1 = np.searchsorted(events, th, side="right")
                i2 = np.searchsorted(events, th + delta, side="left")
                acc = 0.0
                for k in range(i1, i2):
                    acc += np.log(s * ((events[k] - th) * inv_delta) ** kappa + lam0)
                out[i] = acc + (n_ev - i2) * log_plateau
            return out

        USE_NUMBA = True
    except ImportError:
        USE_NUMBA = False


def simulate_events(seed, n, tau, lam_max, s_real, lam0, kappa, delta, theta0):
    """Thin a whole dataset: events of all replicates packed flat, plus counts.

    Returns (events, counts) where events is the concatenation of each
    replicate's sorted accepted times and counts[j] is replicate j's count.
    """
    chunks, chunk_mean = _split_mean(lam_max * tau)
    cum = poisson_cum_table(chunk_mean)
    fn = _simulate_events_nb if USE_NUMBA else _simulate_events_np
    return fn(
        np.uint64(seed & 0xFFFFFFFFFFFFFFFF), n, float(tau), float(lam_max),
        float(s_real), float(lam0), float(kappa), float(delta), float(theta0),
        cum, chunks,
    )


def event_loglik(events, thetas, s, lam0, kappa, delta):
    """Event-sum term of the pseudo log-likelihood over a theta grid.

    events must be sorted ascending (pooled across replicates); events at
    exactly theta are excluded, events at or past theta+delta contribute
    log(s + lam0) each.
    """
    fn = _event_loglik_nb if USE_NUMBA else _event_loglik_np
    return fn(
        np.ascontiguousarray(events, dtype=np.float64),
        np.ascontiguousarray(thetas, dtype=np.float64),
        float(s), float(lam0), float(kappa), float(delta), math.log(s + lam0),
    )
