"""Exact and sampled laws of S = ||sum_n eps_n x_n|| and their statistics."""

from __future__ import annotations

import enum
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError, InputError
from .spaces import CoefficientFamily

__all__ = [
    "Kind",
    "DistSummary",
    "enumerate_exact",
    "sample_mc",
    "sign_sum_chunks",
    "signs_of_pattern",
    "tail",
    "rearrangement",
    "moment",
    "weak_lp_rv",
    "orlicz_norm",
    "median",
    "DEFAULT_EXACT_MAX_N",
]

log = logging.getLogger(__name__)

DEFAULT_EXACT_MAX_N = 24
CHUNK_BITS = 16
MC_BLOCK = 1 << 14
DRIFT_TOL = 1e-9
# values closer than this (relative to sum ||x_n||) are one atom
ATOM_MERGE_RTOL = 1e-12


class Kind(str, enum.Enum):
    EXACT = "EXACT"
    EMPIRICAL = "EMPIRICAL"


@dataclass(frozen=True, eq=False)
class DistSummary:
    """A finitely supported law on [0, inf) stored as integer tallies.

    ``probs`` = ``counts / total``; for EXACT summaries ``total`` is
    2^(N-1) so every probability is a dyadic rational.
    """

    kind: Kind
    values: np.ndarray
    counts: np.ndarray
    total: int
    samples: int | None = None
    seed: int | None = None
    max_drift: float = 0.0
    _cum: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_cum", np.cumsum(self.counts))
        if self._cum.size and int(self._cum[-1]) != self.total:
            raise InputError("atom counts do not sum to total")

    @property
    def probs(self) -> np.ndarray:
        return self.counts / self.total

    @property
    def cumulative(self) -> np.ndarray:
        return self._cum / self.total

    @property
    def mean(self) -> float:
        return float(np.dot(self.probs, self.values))

    @property
    def max_value(self) -> float:
        return float(self.values[-1])

    def tail_counts(self) -> np.ndarray:
        """Number of outcomes strictly above each atom."""
        return self.total - self._cum

    def to_rows(self):
        return zip(self.values.tolist(), self.probs.tolist(), self.cumulative.tolist())

    @classmethod
    def from_atoms(cls, values, probs, kind=Kind.EXACT) -> "DistSummary":
        """Build a summary from (value, probability) pairs with dyadic or rational weights."""
        values = np.asarray(values, dtype=float)
        probs = np.asarray(probs, dtype=float)
        if values.shape != probs.shape or np.any(probs <= 0) or np.any(values < 0):
            raise InputError("atoms need positive probabilities and nonnegative values")
        order = np.argsort(values, kind="stable")
        # smallest power-of-two denominator that makes every weight integral
        for bits in range(0, 53):
            scaled = probs * 2.0**bits
            if np.all(scaled == np.round(scaled)):
                break
        else:
            raise InputError("atom probabilities must be dyadic")
        counts = np.round(scaled).astype(np.int64)
        if counts.sum() != 2**bits:
            raise InputError("atom probabilities must sum to 1")
        return cls(kind, values[order], counts[order], 2**bits)


def _merge_atoms(values: np.ndarray, scale: float):
    v = np.sort(values, kind="stable")
    if v.size == 0:
        return v, np.zeros(0, dtype=np.int64)
    tol = ATOM_MERGE_RTOL * max(scale, np.finfo(float).tiny)
    breaks = np.flatnonzero(np.diff(v) > tol) + 1
    starts = np.concatenate([[0], breaks])
    ends = np.concatenate([breaks, [v.size]])
    reps = v[(starts + ends - 1) // 2]
    return reps, (ends - starts).astype(np.int64)


def _gray(i):
    return i ^ (i >> 1)


def signs_of_pattern(index: int, N: int) -> np.ndarray:
    """Sign vector visited at step ``index`` of the Gray-code walk (eps_1 = +1)."""
    g = _gray(int(index))
    bits = (g >> np.arange(N - 1)) & 1
    return np.concatenate([[1.0], 1.0 - 2.0 * bits])


def _chunk_sums(X: np.ndarray, start: int, length: int):
    """Running sums for Gray steps ``start .. start+length-1``.

    Returns ``(sums, drift)`` where drift compares the incrementally
    updated last sum with a fresh evaluation.
    """
    N, m = X.shape
    sums = np.empty((length, m))
    sums[0] = signs_of_pattern(start, N) @ X
    if length == 1:
        return sums, 0.0
    i = np.arange(start + 1, start + length, dtype=np.int64)
    low = i & -i
    bit = np.frexp(low.astype(float))[1] - 1
    newbit = (_gray(i) >> bit) & 1
    delta = np.where(newbit == 1, -2.0, 2.0)[:, None] * X[1 + bit]
    np.cumsum(delta, axis=0, out=sums[1:])
    sums[1:] += sums[0]
    fresh = signs_of_pattern(start + length - 1, N) @ X
    drift = float(np.abs(fresh - sums[-1]).max())
    return sums, drift


def sign_sum_chunks(fam: CoefficientFamily):
    """Yield ``(start, sums)`` covering all 2^(N-1) patterns with eps_1 = +1.

    Each chunk of 2^16 consecutive Gray steps starts from a freshly
    computed sum, so rounding drift never accumulates across chunks.
    """
    X = fam.coeffs
    total = 1 << (fam.N - 1)
    step = 1 << CHUNK_BITS
    for start in range(0, total, step):
        sums, _ = _chunk_sums(X, start, min(step, total - start))
        yield start, sums


def _scale(fam: CoefficientFamily) -> float:
    return float(fam.space.norm(fam.coeffs, axis=1).sum())


def _check_drift(drift: float, scale: float):
    if scale > 0 and drift > DRIFT_TOL * scale:
        raise ArithmeticError(f"Gray-code running sum drifted by {drift:.3e} (scale {scale:.3e})")


def _map(fn, items, workers):
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def enumerate_exact(fam: CoefficientFamily, workers: int = 1, max_n: int = DEFAULT_EXACT_MAX_N) -> DistSummary:
    """Exact law of ||X|| by walking every sign pattern in Gray-code order.

    Only patterns with eps_1 = +1 are visited since ||X(eps)|| = ||X(-eps)||.
    The pattern space is split into fixed 2^16-step chunks, so the output
    does not depend on ``workers``.
    """
    N = fam.N
    if N > max_n:
        raise CapacityError(f"exact enumeration needs N <= {max_n} (got N={N}); use Monte Carlo sampling")
    if max_n > DEFAULT_EXACT_MAX_N and N > DEFAULT_EXACT_MAX_N:
        log.warning("exact enumeration with N=%d visits 2^%d patterns", N, N - 1)
    X = fam.coeffs
    space = fam.space
    total = 1 << (N - 1)
    step = 1 << CHUNK_BITS
    starts = list(range(0, total, step))
    scale = _scale(fam)

    def run(start):
        sums, drift = _chunk_sums(X, start, min(step, total - start))
        return space.norm(sums, axis=1), drift

    parts = _map(run, starts, workers)
    values = np.concatenate([p[0] for p in parts])
    drift = max(p[1] for p in parts)
    _check_drift(drift, scale)
    reps, counts = _merge_atoms(values, scale)
    return DistSummary(Kind.EXACT, reps, counts, total, max_drift=drift)


def _mc_block(X, seed: int, block: int, length: int) -> np.ndarray:
    N = X.shape[0]
    words = -(-N // 64)
    bg = np.random.Philox(key=seed, counter=[0, 0, 0, block])
    raw = bg.random_raw(length * words).reshape(length, words)
    bits = (raw[:, :, None] >> np.arange(64, dtype=np.uint64)) & np.uint64(1)
    bits = bits.reshape(length, words * 64)[:, :N]
    signs = 1.0 - 2.0 * bits.astype(float)
    return signs @ X


def sample_mc(fam: CoefficientFamily, samples: int, seed: int = 0, workers: int = 1) -> DistSummary:
    """Empirical law of ||X|| from ``samples`` independent sign vectors.

    Sample k draws its bits from a Philox stream keyed by ``seed`` in
    block k // 2^14, which makes the result independent of ``workers``.
    """
    if not isinstance(samples, (int, np.integer)) or samples < 1:
        raise InputError(f"samples must be a positive integer, got {samples!r}")
    if seed < 0:
        raise InputError("seed must be nonnegative")
    X = fam.coeffs
    space = fam.space
    blocks = [(b, min(MC_BLOCK, samples - b * MC_BLOCK)) for b in range(-(-samples // MC_BLOCK))]

    def run(item):
        b, length = item
        return space.norm(_mc_block(X, int(seed), b, length), axis=1)

    values = np.concatenate(_map(run, blocks, workers))
    reps, counts = _merge_atoms(values, _scale(fam))
    return DistSummary(Kind.EMPIRICAL, reps, counts, int(samples), samples=int(samples), seed=int(seed))


def tail(d: DistSummary, s: float) -> float:
    """P(S > s)."""
    idx = int(np.searchsorted(d.values, s, side="right"))
    if idx == 0:
        return 1.0
    return float(d.total - d._cum[idx - 1]) / d.total


def tail_many(d: DistSummary, s) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    idx = np.searchsorted(d.values, s, side="right")
    cum = np.concatenate([[0], d._cum])
    return (d.total - cum[idx]) / d.total


def below(d: DistSummary, s: float) -> float:
    """P(S < s)."""
    idx = int(np.searchsorted(d.values, s, side="left"))
    return 0.0 if idx == 0 else float(d._cum[idx - 1]) / d.total


def rearrangement(d: DistSummary, t: float) -> float:
    """S*(t) = inf { s > 0 : P(S > s) <= t } for 0 < t < 1."""
    t = float(t)
    if not 0 < t < 1:
        raise InputError(f"rearrangement needs 0 < t < 1, got {t}")
    tails = d.tail_counts()
    # tails is nonincreasing; first atom whose strict tail fits under t
    idx = int(np.argmax(tails <= t * d.total))
    return float(d.values[idx])


def moment(d: DistSummary, p: float) -> float:
    """(E S^p)^(1/p)."""
    p = float(p)
    if not p > 0:
        raise InputError(f"moment order must be positive, got {p}")
    w = d.probs
    v = d.values
    if p <= 64:
        return float(np.dot(w, v**p) ** (1.0 / p))
    pos = v > 0
    if not np.any(pos):
        return 0.0
    logs = np.log(w[pos]) + p * np.log(v[pos])
    top = logs.max()
    return float(math.exp((top + math.log(np.exp(logs - top).sum())) / p))


def weak_lp_rv(d: DistSummary, p: float) -> float:
    """sup_{0<t<1} t^(1/p) S*(t).

    S* equals atom v_i on [P(S > v_i), P(S >= v_i)), and t^(1/p) grows,
    so the supremum is max_i P(S >= v_i)^(1/p) v_i.
    """
    p = float(p)
    if not p > 0:
        raise InputError(f"weak-Lp exponent must be positive, got {p}")
    at_least = (d.total - np.concatenate([[0], d._cum[:-1]])) / d.total
    return float((at_least ** (1.0 / p) * d.values).max())


def _expected_psi(d: DistSummary, q: float, c: float) -> float:
    with np.errstate(over="ignore"):
        return float(np.dot(d.probs, np.expm1((d.values / c) ** q)))


def orlicz_norm(d: DistSummary, q: float, rtol: float = 1e-10) -> float:
    """Luxemburg norm for Psi_q(x) = exp(x^q) - 1, by bisection on c."""
    q = float(q)
    if not q > 0:
        raise InputError(f"Orlicz exponent q must be positive, got {q}")
    top = d.max_value
    if top == 0:
        return 0.0
    w_min = float(d.counts.min()) / d.total
    k = 1 + math.ceil(math.log2(1.0 / w_min))
    lo = top / (k * math.log(2.0)) ** (1.0 / q)
    hi = top / math.log(2.0) ** (1.0 / q)
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if _expected_psi(d, q, mid) <= 1.0:
            hi = mid
        else:
            lo = mid
    return hi


def median(d: DistSummary) -> float:
    """Lower median inf { s : P(S <= s) >= 1/2 }."""
    idx = int(np.argmax(2 * d._cum >= d.total))
    return float(d.values[idx])
