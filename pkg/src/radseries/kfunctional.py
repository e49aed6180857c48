"""The K-functional of the couple (l1, l2) for finite scalar sequences.

K(a, t) = inf { ||a1||_1 + t ||a2||_2 : a = a1 + a2 }.

The minimiser keeps a2 = clip(a, rho) and puts the excess into a1, with
the threshold rho fixed by t * rho = ||clip(a, rho)||_2.  Dividing by rho
gives the monotone equation sum_n min(1, a_n^2 / rho^2) = t^2, which is
solved by bisection on [0, max |a_n|].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError

__all__ = [
    "KValue",
    "ScalingWitness",
    "k12_exact",
    "k12_batch",
    "k12_holmstedt",
    "k12_scaling_bound",
    "decreasing_rearrangement",
]

BISECT_MAX_ITER = 200
BISECT_REL_WIDTH = 1e-12


@dataclass(frozen=True)
class KValue:
    t: float
    value: float
    l1_part: np.ndarray
    l2_part: np.ndarray
    rho: float
    # maximiser of <a, c> over ||c||_inf <= 1, ||c||_2 <= t
    dual: np.ndarray

    @property
    def optimal_split(self):
        return self.l1_part, self.l2_part

    def objective(self) -> float:
        return float(np.abs(self.l1_part).sum() + self.t * np.sqrt((self.l2_part**2).sum()))


@dataclass(frozen=True)
class ScalingWitness:
    s: float
    t: float
    k_s: float
    k_t: float
    margin: float

    @property
    def holds(self) -> bool:
        return self.margin >= -1e-9


def _as_seq(a) -> np.ndarray:
    a = np.asarray(a, dtype=float).ravel()
    if not np.all(np.isfinite(a)):
        raise InputError("sequence entries must be finite")
    return a


def _check_t(t) -> float:
    t = float(t)
    if not t >= 0 or math.isnan(t):
        raise InputError(f"t must be nonnegative, got {t}")
    return t


def decreasing_rearrangement(a) -> np.ndarray:
    """|a_n| sorted in decreasing order."""
    return np.sort(np.abs(_as_seq(a)))[::-1]


def _solve_rho(absA, t):
    """Threshold rho per row of ``absA`` (rows strictly in the mixed regime)."""
    t2 = np.asarray(t, dtype=float) ** 2
    lo = np.zeros(absA.shape[0])
    hi = absA.max(axis=1)
    sq = absA * absA
    for _ in range(BISECT_MAX_ITER):
        mid = 0.5 * (lo + hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            phi = np.minimum(1.0, sq / (mid * mid)[:, None]).sum(axis=1) - t2
        above = phi > 0
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
        if np.all(hi - lo <= BISECT_REL_WIDTH * hi):
            break
    rho = 0.5 * (lo + hi)
    # polish: closed form on the active set identified by bisection
    clipped = absA > rho[:, None]
    k = clipped.sum(axis=1)
    rest = np.where(clipped, 0.0, sq).sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        exact = np.sqrt(rest / (t2 - k))
    slack = 4 * BISECT_REL_WIDTH * hi
    ok = np.isfinite(exact) & (exact >= lo - slack) & (exact <= hi + slack)
    return np.where(ok, exact, rho)


def k12_batch(A, t):
    """K-functional for every row of ``A``.

    ``t`` is a scalar or one value per row.  Returns ``(values, rho)``;
    the optimal l2 part of row i is ``clip(A[i], -rho[i], rho[i])``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = A.shape[0]
    t = np.broadcast_to(np.asarray(t, dtype=float), (B,)).copy()
    if np.any(~(t >= 0)):
        raise InputError("t must be nonnegative")
    if A.shape[1] == 0:
        return np.zeros(B), np.zeros(B)
    absA = np.abs(A)
    l1 = absA.sum(axis=1)
    l2 = np.sqrt((absA * absA).sum(axis=1))
    amax = absA.max(axis=1)
    nnz = (absA > 0).sum(axis=1)

    values = np.empty(B)
    rho = np.empty(B)
    zero = amax == 0
    tzero = (t == 0) & ~zero
    with np.errstate(divide="ignore", invalid="ignore"):
        pure_l2 = ~zero & ~tzero & (t * amax <= l2)
        pure_l1 = ~zero & ~tzero & ~pure_l2 & (t * t >= nnz)
    mixed = ~(zero | tzero | pure_l2 | pure_l1)

    values[zero] = 0.0
    rho[zero] = 0.0
    values[tzero] = 0.0
    rho[tzero] = amax[tzero]
    values[pure_l2] = t[pure_l2] * l2[pure_l2]
    with np.errstate(over="ignore"):
        rho[pure_l2] = l2[pure_l2] / t[pure_l2]
    values[pure_l1] = l1[pure_l1]
    rho[pure_l1] = 0.0
    if np.any(mixed):
        am = absA[mixed]
        tm = t[mixed]
        r = _solve_rho(am, tm)
        excess = np.maximum(am - r[:, None], 0.0).sum(axis=1)
        kept = np.sqrt((np.minimum(am, r[:, None]) ** 2).sum(axis=1))
        values[mixed] = excess + tm * kept
        rho[mixed] = r
    return values, rho


def k12_exact(a, t) -> KValue:
    """Exact K(a, t) for the couple (l1, l2) with a realising split."""
    a = _as_seq(a)
    t = _check_t(t)
    if a.size == 0:
        empty = np.zeros(0)
        return KValue(t, 0.0, empty, empty, 0.0, empty)
    values, rho = k12_batch(a[None, :], t)
    value, r = float(values[0]), float(rho[0])
    if value == 0.0:
        # t == 0 or a == 0: all mass in the l2 part
        return KValue(t, 0.0, np.zeros_like(a), a.copy(), r, np.zeros_like(a))
    l2_part = np.clip(a, -r, r)
    l1_part = a - l2_part
    if r == 0.0:
        dual = np.sign(a)
    elif r >= np.abs(a).max():
        dual = t * a / np.sqrt((a * a).sum())  # pure l2 regime
    else:
        dual = np.clip(a / r, -1.0, 1.0)
    return KValue(t, value, l1_part, l2_part, r, dual)


def k12_holmstedt(a, t) -> float:
    """Two-term surrogate: top floor(t^2) entries in l1, the rest in l2."""
    t = _check_t(t)
    s = decreasing_rearrangement(a)
    k = min(int(math.floor(t * t)), s.size)
    return float(s[:k].sum() + t * np.sqrt((s[k:] ** 2).sum()))


def k12_scaling_bound(a, s, t) -> ScalingWitness:
    """Margin of K(a, s) <= max(1, s/t) K(a, t)."""
    s, t = float(s), float(t)
    if not (s > 0 and t > 0):
        raise InputError(f"s and t must be positive, got s={s}, t={t}")
    ks = k12_exact(a, s).value
    kt = k12_exact(a, t).value
    rhs = max(1.0, s / t) * kt
    return ScalingWitness(s, t, ks, kt, rhs - ks)
