"""Deterministic instance suite shared by the acceptance criteria."""

import numpy as np

from radseries.spaces import CoefficientFamily, Family, SpaceSpec

SUITE_SEED = 20240607


def _coefficients(rng, N, m):
    kind = rng.integers(0, 6)
    if kind == 0:
        X = rng.standard_normal((N, m))
    elif kind == 1:
        X = rng.uniform(-1, 1, (N, m))
    elif kind == 2:  # geometric decay down the sequence
        X = rng.standard_normal((N, m)) * (0.7 ** np.arange(N))[:, None]
    elif kind == 3:  # sparse
        X = rng.standard_normal((N, m)) * (rng.random((N, m)) < 0.3)
        X[0, rng.integers(0, m)] = 1.0
    elif kind == 4:  # heavy tailed
        X = rng.standard_t(1.5, (N, m))
    else:  # flat +-1 entries
        X = rng.choice([-1.0, 1.0], (N, m))
    return X * rng.uniform(0.1, 10)


def instance_suite():
    """105 families: 40 scalar, 35 in l_inf^m (m <= 8), 30 in l_1^m (m <= 6); N <= 20."""
    rng = np.random.default_rng(SUITE_SEED)
    out = []
    for i in range(40):
        N = int(rng.integers(1, 21)) if i % 4 else 20
        out.append(CoefficientFamily(SpaceSpec(Family.LINF, 1), _coefficients(rng, N, 1)))
    for i in range(35):
        N, m = int(rng.integers(1, 21)) if i % 4 else 20, int(rng.integers(2, 9))
        out.append(CoefficientFamily(SpaceSpec(Family.LINF, m), _coefficients(rng, N, m)))
    for i in range(30):
        N, m = int(rng.integers(1, 21)) if i % 4 else 20, int(rng.integers(2, 7))
        out.append(CoefficientFamily(SpaceSpec(Family.L1, m), _coefficients(rng, N, m)))
    return out


def label(fam):
    return f"{fam.space.describe()} N={fam.N} {fam.instance_hash()}"
