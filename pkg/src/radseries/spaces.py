"""Finite-dimensional l_p^m spaces, coefficient families and the dual pairing."""

from __future__ import annotations

import csv
import enum
import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CapacityError, InputError

__all__ = [
    "Family",
    "SpaceSpec",
    "CoefficientFamily",
    "DualFunctional",
    "SphereDescriptor",
    "norm",
    "apply_dual",
    "dual_extreme_points",
    "parse_space",
]

MAX_L1_VERTEX_DIM = 20


class Family(str, enum.Enum):
    L1 = "L1"
    L2 = "L2"
    LINF = "LINF"
    LP = "LP"


def _lp_norm(v, p, axis=-1):
    a = np.abs(np.asarray(v, dtype=float))
    if a.shape[axis] == 0:
        return np.sum(a, axis=axis)
    if p == 1:
        return a.sum(axis=axis)
    if p == 2:
        return np.sqrt((a * a).sum(axis=axis))
    big = a.max(axis=axis, keepdims=True)
    if math.isinf(p):
        return np.squeeze(big, axis=axis)
    # scale by the largest entry so large p cannot overflow
    safe = np.where(big > 0, big, 1.0)
    r = ((a / safe) ** p).sum(axis=axis) ** (1.0 / p)
    return r * np.squeeze(big, axis=axis)


def conjugate_exponent(p):
    if p == 1:
        return math.inf
    if math.isinf(p):
        return 1.0
    return p / (p - 1.0)


@dataclass(frozen=True)
class SpaceSpec:
    """An l_p^m space: ``family`` tag, ``dim`` = m and ``p`` (LP only)."""

    family: Family
    dim: int
    p: float | None = None

    def __post_init__(self):
        fam = Family(self.family.upper() if isinstance(self.family, str) else self.family)
        object.__setattr__(self, "family", fam)
        if not isinstance(self.dim, (int, np.integer)) or isinstance(self.dim, bool) or self.dim < 1:
            raise InputError(f"space dim must be a positive integer, got {self.dim!r}")
        object.__setattr__(self, "dim", int(self.dim))
        if fam is Family.LP:
            if self.p is None:
                raise InputError("LP space requires an exponent p")
            p = float(self.p)
            if not (p > 1 and math.isfinite(p)):
                raise InputError(f"LP exponent must satisfy 1 < p < inf, got {p}")
            object.__setattr__(self, "p", p)
        elif self.p is not None:
            canonical = {Family.L1: 1.0, Family.L2: 2.0, Family.LINF: math.inf}[fam]
            if float(self.p) != canonical:
                raise InputError(f"{fam.value} space has fixed exponent {canonical}, got p={self.p}")
            object.__setattr__(self, "p", None)

    @property
    def exponent(self) -> float:
        return {Family.L1: 1.0, Family.L2: 2.0, Family.LINF: math.inf}.get(self.family, self.p)

    @property
    def dual_exponent(self) -> float:
        return conjugate_exponent(self.exponent)

    @property
    def has_finite_dual_vertices(self) -> bool:
        return self.family is Family.LINF or (self.family is Family.L1 and self.dim <= MAX_L1_VERTEX_DIM) or self.dim == 1

    def norm(self, v, axis=-1):
        return _lp_norm(v, self.exponent, axis=axis)

    def dual_norm(self, v, axis=-1):
        return _lp_norm(v, self.dual_exponent, axis=axis)

    def describe(self) -> str:
        if self.family is Family.LP:
            return f"lp:{self.p:g}:{self.dim}"
        return f"{self.family.value.lower()}:{self.dim}"

    def to_json(self) -> dict:
        out = {"family": self.family.value, "dim": self.dim}
        if self.family is Family.LP:
            out["p"] = self.p
        return out


def parse_space(text: str, dim: int | None = None) -> SpaceSpec:
    """Parse ``linf``, ``linf:3``, ``lp:3`` or ``lp:3:4`` (family[:p][:dim])."""
    parts = [s for s in text.strip().split(":") if s]
    if not parts:
        raise InputError("empty space spec")
    fam = parts[0].upper()
    if fam not in Family.__members__:
        raise InputError(f"unknown space family {parts[0]!r}; expected l1, l2, linf or lp")
    rest = parts[1:]
    p = None
    try:
        if fam == "LP":
            if not rest:
                raise InputError("lp space spec needs an exponent, e.g. lp:3")
            p = float(rest.pop(0))
        if rest:
            declared = int(rest.pop(0))
            if dim is not None and declared != dim:
                raise InputError(f"space spec dim {declared} does not match coefficient columns {dim}")
            dim = declared
    except ValueError as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(f"cannot parse space spec {text!r}: {exc}") from None
    if rest:
        raise InputError(f"trailing fields in space spec {text!r}")
    if dim is None:
        raise InputError(f"space spec {text!r} has no dimension and none could be inferred")
    return SpaceSpec(Family(fam), dim, p)


@dataclass(frozen=True)
class CoefficientFamily:
    """N coefficient vectors in ``space``; row n of ``coeffs`` is x_n."""

    space: SpaceSpec
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.ndim == 1:
            c = c.reshape(-1, 1) if self.space.dim == 1 else c.reshape(1, -1)
        if c.ndim != 2:
            raise InputError(f"coefficients must be an N x m matrix, got shape {c.shape}")
        if c.shape[0] < 1:
            raise InputError("coefficient family needs at least one vector")
        if c.shape[1] != self.space.dim:
            raise InputError(f"coefficient columns ({c.shape[1]}) != space dim ({self.space.dim})")
        if not np.all(np.isfinite(c)):
            raise InputError("coefficients must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def N(self) -> int:
        return self.coeffs.shape[0]

    @property
    def dim(self) -> int:
        return self.coeffs.shape[1]

    @property
    def is_scalar(self) -> bool:
        return self.dim == 1

    @classmethod
    def scalar(cls, a) -> "CoefficientFamily":
        """Scalar sequence (a_n) as a family in the one-dimensional space."""
        a = np.asarray(a, dtype=float).reshape(-1, 1)
        return cls(SpaceSpec(Family.LINF, 1), a)

    @classmethod
    def from_csv(cls, path, space: SpaceSpec | str | None = None) -> "CoefficientFamily":
        """Load rows x_n from a CSV whose header is ``j1,...,jm``."""
        path = Path(path)
        if not path.exists():
            raise InputError(f"coefficient file not found: {path}")
        with path.open(newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
        if not rows:
            raise InputError(f"{path}: empty coefficient file")
        header, body = [h.strip() for h in rows[0]], rows[1:]
        expected = [f"j{i + 1}" for i in range(len(header))]
        if header != expected:
            raise InputError(f"{path}: header must be {','.join(expected)}, got {','.join(header)}")
        try:
            data = np.array([[float(x) for x in r] for r in body], dtype=float)
        except ValueError as exc:
            raise InputError(f"{path}: non-numeric entry ({exc})") from None
        if data.ndim != 2 or data.shape[1] != len(header):
            raise InputError(f"{path}: ragged rows")
        if space is None:
            space = SpaceSpec(Family.LINF, len(header))
        elif isinstance(space, str):
            space = parse_space(space, dim=len(header))
        return cls(space, data)

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"j{i + 1}" for i in range(self.dim)])
            for row in self.coeffs:
                w.writerow([repr(float(x)) for x in row])

    def scaled(self, alpha: float) -> "CoefficientFamily":
        return CoefficientFamily(self.space, alpha * self.coeffs)

    def instance_hash(self) -> str:
        h = hashlib.sha256()
        h.update(self.space.describe().encode())
        h.update(np.ascontiguousarray(self.coeffs, dtype="<f8").tobytes())
        return h.hexdigest()[:16]


@dataclass(frozen=True)
class DualFunctional:
    """A functional x* on ``space`` with its dual norm recorded."""

    vector: np.ndarray
    certified_norm: float

    @classmethod
    def of(cls, space: SpaceSpec, vector) -> "DualFunctional":
        v = np.asarray(vector, dtype=float)
        if v.shape != (space.dim,):
            raise InputError(f"functional length {v.shape} != space dim {space.dim}")
        return cls(v, float(space.dual_norm(v)))


@dataclass(frozen=True)
class SphereDescriptor:
    """Unit sphere of l_q^m: a dual ball with no finite extreme-point set."""

    exponent: float
    dim: int


def norm(space: SpaceSpec, v) -> float:
    v = np.asarray(v, dtype=float)
    if v.shape != (space.dim,):
        raise InputError(f"vector length {v.shape} != space dim {space.dim}")
    return float(space.norm(v))


def apply_dual(xstar: DualFunctional, fam: CoefficientFamily) -> np.ndarray:
    """The scalar sequence (x*(x_n))_n."""
    v = np.asarray(xstar.vector, dtype=float)
    if v.shape != (fam.dim,):
        raise InputError(f"functional length {v.shape} != space dim {fam.dim}")
    return fam.coeffs @ v


def sign_vertices(m: int, half: bool = False) -> np.ndarray:
    """All vectors in {-1, +1}^m; with ``half`` only those with first entry +1."""
    if half:
        if m == 1:
            return np.ones((1, 1))
        tail = sign_vertices(m - 1)
        return np.hstack([np.ones((tail.shape[0], 1)), tail])
    idx = np.arange(2**m, dtype=np.int64)[:, None]
    bits = (idx >> np.arange(m - 1, -1, -1)) & 1
    return 1.0 - 2.0 * bits


def dual_extreme_points(space: SpaceSpec):
    """Extreme points of the dual unit ball, or a sphere descriptor.

    LINF gives the 2m signed coordinate functionals; L1 gives the 2^m
    sign vectors (capped at m <= 20).  L2/LP duals are strictly convex,
    so a :class:`SphereDescriptor` is returned instead.
    """
    m = space.dim
    if space.family is Family.LINF:
        eye = np.eye(m)
        return np.vstack([eye, -eye])
    if space.family is Family.L1:
        if m > MAX_L1_VERTEX_DIM:
            raise CapacityError(f"L1 dual vertices: 2^{m} exceeds cap 2^{MAX_L1_VERTEX_DIM}")
        return sign_vertices(m)
    return SphereDescriptor(space.dual_exponent, m)
