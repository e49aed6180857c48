"""Weak-l_p norms and K^w_{1,2} as suprema over the dual unit ball.

The objectives x* -> ||(x*(x_n))||_p and x* -> K((x*(x_n)), t) are convex,
so their suprema over the dual ball sit at extreme points.  Where that set
is finite (l_inf^m, l_1^m, scalars) the result is EXACT; on the strictly
convex l2/lp duals a multi-start ascent gives a LOWER_BOUND.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass

import numpy as np

from .distribution import DEFAULT_EXACT_MAX_N, sign_sum_chunks, signs_of_pattern
from .errors import CapacityError, UnsupportedError
from .kfunctional import k12_batch, k12_exact
from .spaces import MAX_L1_VERTEX_DIM, CoefficientFamily, DualFunctional, Family

__all__ = [
    "Exactness",
    "WeakValue",
    "KProfile",
    "Lemma2Split",
    "weak_lp_norm",
    "kw12",
    "kw_profile",
    "lemma2_split",
    "power_iteration",
]

log = logging.getLogger(__name__)

ASCENT_RESTARTS = 64
ASCENT_STEPS = 500
ASCENT_DECAY = 0.95
VERTEX_CHUNK = 1 << 14


class Exactness(str, enum.Enum):
    EXACT = "EXACT"
    LOWER_BOUND = "LOWER_BOUND"


@dataclass(frozen=True)
class WeakValue:
    value: float
    exactness: Exactness
    witness: DualFunctional

    def __float__(self):
        return self.value

    @property
    def exact(self) -> bool:
        return self.exactness is Exactness.EXACT


def _lp(y, p, axis=-1):
    a = np.abs(y)
    if math.isinf(p):
        return a.max(axis=axis)
    if p == 1:
        return a.sum(axis=axis)
    return (a**p).sum(axis=axis) ** (1.0 / p)


def _norming_functional(space, y) -> np.ndarray:
    """x* with dual norm 1 and x*(y) = ||y|| (zero if y = 0)."""
    ny = float(space.norm(y))
    if ny == 0:
        return np.zeros_like(y)
    p = space.exponent
    if math.isinf(p):
        j = int(np.argmax(np.abs(y)))
        v = np.zeros_like(y)
        v[j] = np.sign(y[j])
        return v
    if p == 1:
        return np.sign(y)
    return np.sign(y) * (np.abs(y) / ny) ** (p - 1)


def _as_witness(space, v) -> DualFunctional:
    return DualFunctional.of(space, v)


def power_iteration(X, tol=1e-10, max_iter=20000):
    """Largest singular value of ``X`` and its right singular vector.

    Iterates on the Gram matrix X^T X; the Rayleigh quotient never
    overestimates, so an early stop errs low.
    """
    X = np.asarray(X, dtype=float)
    m = X.shape[1]
    scale = float(np.abs(X).max()) if X.size else 0.0
    if scale == 0:
        v = np.zeros(m)
        v[0] = 1.0
        return 0.0, v
    G = (X / scale).T @ (X / scale)  # normalised to keep the Gram matrix out of subnormals
    v = G.sum(axis=0) + np.linspace(1.0, 2.0, m) * np.abs(G).max()
    v /= np.linalg.norm(v)
    lam = float(v @ G @ v)
    for _ in range(max_iter):
        w = G @ v
        nw = np.linalg.norm(w)
        if nw == 0:
            break
        v = w / nw
        new = float(v @ G @ v)
        if abs(new - lam) <= tol * abs(new):
            lam = new
            break
        lam = new
    return scale * math.sqrt(max(lam, 0.0)), v


def _ascent(fam: CoefficientFamily, value_and_grad, seed: int):
    """Multi-start ascent over the dual unit sphere; returns (x*, values).

    ``value_and_grad(S)`` maps rows of S to (objective, gradient) pairs.
    """
    q = fam.space.dual_exponent
    rng = np.random.default_rng(seed)
    _, top = power_iteration(fam.coeffs)
    starts = np.vstack([top, rng.standard_normal((ASCENT_RESTARTS - 1, fam.dim))])
    x = starts / _lp(starts, q)[:, None]
    best_val = np.full(x.shape[0], -np.inf)
    best_x = x.copy()
    eta = 0.5
    for _ in range(ASCENT_STEPS + 1):
        vals, g = value_and_grad(x)
        better = vals > best_val
        best_val[better] = vals[better]
        best_x[better] = x[better]
        gn = np.linalg.norm(g, axis=1)
        gn[gn == 0] = 1.0
        x = x + eta * (np.linalg.norm(x, axis=1) / gn)[:, None] * g
        nx = _lp(x, q)
        nx[nx == 0] = 1.0
        x = x / nx[:, None]
        eta *= ASCENT_DECAY
    i = int(np.argmax(best_val))
    return best_x[i], best_val


def _max_sign_sum(fam: CoefficientFamily):
    best, arg = -1.0, 0
    for start, sums in sign_sum_chunks(fam):
        norms = fam.space.norm(sums, axis=1)
        i = int(np.argmax(norms))
        if norms[i] > best:
            best, arg = float(norms[i]), start + i
    y = signs_of_pattern(arg, fam.N) @ fam.coeffs
    return _norming_functional(fam.space, y)


def _vertex_chunks(m: int):
    """All sign vertices with first entry +1, in chunks."""
    half = 1 << (m - 1)
    for start in range(0, half, VERTEX_CHUNK):
        idx = np.arange(start, min(half, start + VERTEX_CHUNK), dtype=np.int64)[:, None]
        bits = (idx >> np.arange(m - 1)) & 1
        yield np.hstack([np.ones((idx.shape[0], 1)), 1.0 - 2.0 * bits])


def _best_vertex(fam: CoefficientFamily, score):
    best, best_v = -1.0, None
    for V in _vertex_chunks(fam.dim):
        vals = score(V @ fam.coeffs.T)
        i = int(np.argmax(vals))
        if vals[i] > best:
            best, best_v = float(vals[i]), V[i].copy()
    return best, best_v


def weak_lp_norm(fam: CoefficientFamily, p: float = 2.0, *, require_exact: bool = False, seed: int = 0) -> WeakValue:
    """sup over ||x*|| <= 1 of ||(x*(x_n))_n||_p."""
    p = float(p)
    if not p >= 1:
        raise UnsupportedError(f"weak-l_p norm needs p >= 1, got {p}")
    space, X = fam.space, fam.coeffs
    m = fam.dim

    def exact(v):
        v = np.asarray(v, dtype=float)
        return WeakValue(float(_lp(X @ v, p)), Exactness.EXACT, _as_witness(space, v))

    if m == 1:
        return exact(np.ones(1))
    if space.family is Family.LINF:
        j = int(np.argmax(_lp(X, p, axis=0)))
        return exact(np.eye(m)[j])
    signs_ok = p == 1 and fam.N <= DEFAULT_EXACT_MAX_N
    if space.family is Family.L1 and m <= MAX_L1_VERTEX_DIM and not (signs_ok and fam.N < m):
        _, v = _best_vertex(fam, lambda Y: _lp(Y, p))
        return exact(v)
    if signs_ok:
        # sup_x* sum |x*(x_n)| = max over signs of ||sum eps_n x_n||
        return exact(_norming_functional(space, _max_sign_sum(fam)))
    if space.family is Family.L2 and p == 2:
        _, v = power_iteration(X)
        return exact(v)
    if require_exact:
        raise CapacityError(f"no exact weak-l_{p:g} evaluation for {space.describe()} with N={fam.N}")
    if space.family is Family.L1:
        return _sampled_vertices(fam, lambda Y: _lp(Y, p), seed)

    def value_and_grad(S):
        Y = S @ X.T
        nY = _lp(Y, p)
        safe = np.where(nY == 0, 1.0, nY)
        return nY, (np.sign(Y) * (np.abs(Y) / safe[:, None]) ** (p - 1)) @ X

    v, _ = _ascent(fam, value_and_grad, seed)
    return WeakValue(float(_lp(X @ v, p)), Exactness.LOWER_BOUND, _as_witness(space, v))


def _sampled_vertices(fam, score, seed, count=1 << 16):
    rng = np.random.default_rng(seed)
    V = 1.0 - 2.0 * rng.integers(0, 2, size=(count, fam.dim))
    vals = score(V @ fam.coeffs.T)
    i = int(np.argmax(vals))
    return WeakValue(float(vals[i]), Exactness.LOWER_BOUND, _as_witness(fam.space, V[i]))


def _k_value_and_dual(Y, t):
    """K(a, t) and its gradient in a (the dual maximiser) for each row of Y."""
    vals, rho = k12_batch(Y, t)
    with np.errstate(divide="ignore", invalid="ignore"):
        c = np.where(rho[:, None] > 0, np.clip(Y / rho[:, None], -1.0, 1.0), np.sign(Y))
    return vals, c


def kw12(fam: CoefficientFamily, t: float, *, require_exact: bool = False, seed: int = 0) -> WeakValue:
    """K^w_{1,2}((x_n), t) = sup over ||x*|| <= 1 of K((x*(x_n)), t)."""
    t = float(t)
    if not t >= 0:
        raise UnsupportedError(f"t must be nonnegative, got {t}")
    space, X = fam.space, fam.coeffs
    m = fam.dim

    def exact(v):
        v = np.asarray(v, dtype=float)
        return WeakValue(k12_exact(X @ v, t).value, Exactness.EXACT, _as_witness(space, v))

    if m == 1:
        return exact(np.ones(1))
    if space.family is Family.LINF:
        vals, _ = k12_batch(X.T, t)
        return exact(np.eye(m)[int(np.argmax(vals))])
    if space.family is Family.L1 and m <= MAX_L1_VERTEX_DIM:
        _, v = _best_vertex(fam, lambda Y: k12_batch(Y, t)[0])
        return exact(v)
    if require_exact:
        raise CapacityError(f"no exact K^w evaluation for {space.describe()}")
    if space.family is Family.L1:
        return _sampled_vertices(fam, lambda Y: k12_batch(Y, t)[0], seed)
    if t == 0:
        return WeakValue(0.0, Exactness.EXACT, _as_witness(space, np.zeros(m)))

    def value_and_grad(S):
        vals, c = _k_value_and_dual(S @ X.T, t)
        return vals, c @ X

    v, _ = _ascent(fam, value_and_grad, seed)
    return WeakValue(k12_exact(X @ v, t).value, Exactness.LOWER_BOUND, _as_witness(space, v))


@dataclass(frozen=True)
class KProfile:
    family: CoefficientFamily
    grid: np.ndarray
    values: np.ndarray
    exactness: list
    witnesses: np.ndarray
    lipschitz_bound: float

    @property
    def exact(self) -> bool:
        return all(e is Exactness.EXACT for e in self.exactness)

    def __call__(self, t: float) -> float:
        i = np.flatnonzero(np.isclose(self.grid, t, rtol=0, atol=1e-15))
        if i.size == 0:
            raise KeyError(f"t={t} is not on the profile grid")
        return float(self.values[i[0]])

    def rows(self):
        for t, v, e, w in zip(self.grid, self.values, self.exactness, self.witnesses):
            yield float(t), float(v), e.value, w


def kw_profile(fam: CoefficientFamily, grid, *, seed: int = 0) -> KProfile:
    """K^w on a strictly increasing grid, with witnesses and l^w_2 as Lipschitz bound."""
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or np.any(grid < 0) or np.any(np.diff(grid) <= 0):
        raise UnsupportedError("t-grid must be strictly increasing and nonnegative")
    X = fam.coeffs
    space = fam.space
    lip = weak_lp_norm(fam, 2.0, seed=seed)
    points = [kw12(fam, t, seed=seed + i) for i, t in enumerate(grid)]
    values = np.array([pt.value for pt in points])
    flags = [pt.exactness for pt in points]
    W = np.array([pt.witness.vector for pt in points]).reshape(len(points), fam.dim)
    lb = float(lip.value)

    loose = [i for i, f in enumerate(flags) if f is Exactness.LOWER_BOUND]
    if loose:
        # re-score every witness at every loose point: monotone in t by construction
        W0 = W.copy()
        images = W0 @ X.T
        lb = max(lb, float(np.sqrt((images**2).sum(axis=1)).max()))
        for i in loose:
            cand, _ = k12_batch(images, grid[i])
            j = int(np.argmax(cand))
            if cand[j] > values[i]:
                values[i] = cand[j]
                W[i] = W0[j]

    d = np.diff(values)
    if np.any(d < -1e-9):
        log.warning("K^w profile not monotone (min step %.3e)", d.min())
    if np.any(d > lb * np.diff(grid) + 1e-9):
        log.warning("K^w profile exceeds its Lipschitz bound %.6g", lb)
    return KProfile(fam, grid, values, flags, W, lb)


@dataclass(frozen=True)
class Lemma2Split:
    t: float
    l1_part: np.ndarray
    l2_part: np.ndarray
    weak_l1: float
    weak_l2: float
    kw: float

    @property
    def bound(self) -> float:
        return self.weak_l1 + self.t * self.weak_l2

    @property
    def margin(self) -> float:
        """2 K^w - bound; nonnegative when the certificate holds."""
        return 2.0 * self.kw - self.bound


def lemma2_split(fam: CoefficientFamily, t: float) -> Lemma2Split:
    """Coordinatewise optimal splitting of an l_inf^m family.

    Column j of the l2 part is clip(x_{., j}, rho_j); the weak norms of the
    parts are maxima of column norms.
    """
    if fam.space.family is not Family.LINF and fam.dim != 1:
        raise UnsupportedError("the coordinatewise split needs an l_inf space")
    X = fam.coeffs
    vals, rho = k12_batch(X.T, t)
    l2_part = np.clip(X, -rho[None, :], rho[None, :])
    l1_part = X - l2_part
    weak_l1 = float(np.abs(l1_part).sum(axis=0).max())
    weak_l2 = float(np.sqrt((l2_part**2).sum(axis=0)).max())
    return Lemma2Split(float(t), l1_part, l2_part, weak_l1, weak_l2, float(vals.max()))
