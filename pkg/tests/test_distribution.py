import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import naive_law
from radseries import distribution as D
from radseries.distribution import DistSummary, Kind, enumerate_exact, sample_mc
from radseries.errors import CapacityError, InputError
from radseries.spaces import CoefficientFamily, Family, SpaceSpec

TWO = DistSummary.from_atoms([0, 2], [0.5, 0.5])


def scalar(a):
    return CoefficientFamily.scalar(a)


def atoms(d):
    return dict(zip(d.values.tolist(), (Fraction(int(c), d.total) for c in d.counts)))


def expand(d):
    return np.repeat(d.values, d.counts)


def ks_distance(d1, d2):
    # CDFs read just right of each atom so one value summed in two orders counts once
    eps = 1e-9 * max(d1.max_value, d2.max_value, 1e-300)
    grid = np.union1d(d1.values, d2.values) + eps
    return float(np.abs(D.tail_many(d1, grid) - D.tail_many(d2, grid)).max())


def random_family(rng, space, N):
    return CoefficientFamily(space, rng.standard_normal((N, space.dim)) * rng.uniform(0.1, 3))


# --- enumeration -----------------------------------------------------------


def test_two_coins():
    d = enumerate_exact(scalar([1, 1]))
    assert atoms(d) == {0.0: Fraction(1, 2), 2.0: Fraction(1, 2)}
    assert d.mean == 1.0 and d.kind is Kind.EXACT


def test_identity_linf_is_constant():
    d = enumerate_exact(CoefficientFamily(SpaceSpec(Family.LINF, 2), [[1, 0], [0, 1]]))
    assert atoms(d) == {1.0: Fraction(1)}
    assert d.mean == 1.0 and D.moment(d, 2) ** 2 - d.mean**2 == 0


def test_three_coins():
    d = enumerate_exact(scalar([1, 1, 1]))
    assert atoms(d) == {1.0: Fraction(3, 4), 3.0: Fraction(1, 4)}
    assert d.mean == 1.5


@pytest.mark.parametrize(
    "space",
    [SpaceSpec(Family.LINF, 3), SpaceSpec(Family.L1, 2), SpaceSpec(Family.L2, 3), SpaceSpec(Family.LP, 2, 3.0), SpaceSpec(Family.LINF, 1)],
    ids=lambda s: s.describe(),
)
@pytest.mark.parametrize("N", [1, 5, 12, 16])
def test_gray_code_matches_naive_recomputation(space, N):
    fam = random_family(np.random.default_rng(N), space, N)
    d = enumerate_exact(fam)
    naive = naive_law(fam.coeffs, space.norm) if N <= 12 else None
    signs = 1.0 - 2.0 * ((np.arange(2**N)[:, None] >> np.arange(N)) & 1)
    brute = np.sort(space.norm(signs @ fam.coeffs, axis=1))
    ours = np.sort(np.repeat(expand(d), 2))
    assert np.allclose(ours, brute, rtol=1e-9, atol=1e-12)
    if naive is not None:
        assert sum(naive.values()) == 1
        assert len(naive) >= d.values.size


def test_exact_probabilities_are_dyadic():
    d = enumerate_exact(random_family(np.random.default_rng(0), SpaceSpec(Family.L2, 2), 14))
    assert d.total == 2**13
    assert d.counts.sum() == d.total and np.all(d.counts > 0)
    assert np.all(np.diff(d.values) > 0)
    assert math.isclose(d.probs.sum(), 1.0, abs_tol=1e-12)
    assert d.max_drift <= 1e-9 * np.abs(d.values).max()


def test_capacity_error_points_to_sampling():
    fam = scalar(np.ones(25))
    with pytest.raises(CapacityError, match="Monte Carlo"):
        enumerate_exact(fam)


def test_worker_count_does_not_change_output():
    fam = random_family(np.random.default_rng(1), SpaceSpec(Family.LINF, 3), 19)
    d1, d4 = enumerate_exact(fam, workers=1), enumerate_exact(fam, workers=4)
    assert np.array_equal(d1.values, d4.values) and np.array_equal(d1.counts, d4.counts)


@given(st.lists(st.floats(-10, 10, allow_nan=False), min_size=1, max_size=14))
def test_scalar_orthogonality(a):
    d = enumerate_exact(scalar(a))
    assert D.moment(d, 2) ** 2 == pytest.approx(sum(x * x for x in a), rel=1e-12, abs=1e-12)


# --- Monte Carlo -----------------------------------------------------------


def test_mc_constant_norm():
    fam = CoefficientFamily(SpaceSpec(Family.LINF, 3), np.eye(3))
    d = sample_mc(fam, 5000, seed=3)
    assert d.values.tolist() == [1.0] and d.kind is Kind.EMPIRICAL


def test_mc_two_coins():
    d = sample_mc(scalar([1, 1]), 10**6, seed=0)
    assert D.tail(d, 1) == pytest.approx(0.5, abs=0.002)


def test_mc_partition_invariance():
    fam = random_family(np.random.default_rng(2), SpaceSpec(Family.L1, 3), 70)
    d1 = sample_mc(fam, 100_000, seed=11, workers=1)
    d8 = sample_mc(fam, 100_000, seed=11, workers=8)
    assert np.array_equal(d1.values, d8.values) and np.array_equal(d1.counts, d8.counts)
    assert not np.array_equal(sample_mc(fam, 1000, seed=12).values, sample_mc(fam, 1000, seed=11).values)


@pytest.mark.parametrize(
    "space, N",
    [(SpaceSpec(Family.LINF, 1), 10), (SpaceSpec(Family.LINF, 4), 8), (SpaceSpec(Family.L2, 3), 10)],
    ids=["scalar", "linf", "l2"],
)
def test_mc_agrees_with_exact(space, N):
    fam = random_family(np.random.default_rng(N + space.dim), space, N)
    samples = 10**6
    assert ks_distance(sample_mc(fam, samples, seed=5), enumerate_exact(fam)) <= 4 / math.sqrt(samples)


def test_mc_input_validation():
    with pytest.raises(InputError):
        sample_mc(scalar([1]), 0)


# --- statistics --------------------------------------------------------------


def test_rearrangement_examples():
    assert D.rearrangement(TWO, 0.25) == 2
    assert D.rearrangement(TWO, 0.75) == 0
    c = DistSummary.from_atoms([1.7], [1.0])
    assert all(D.rearrangement(c, t) == 1.7 for t in (0.01, 0.5, 0.99))
    for t in (0, 1, -0.5):
        with pytest.raises(InputError):
            D.rearrangement(TWO, t)


def test_tail_examples():
    assert D.tail(TWO, 1) == 0.5
    assert D.tail(TWO, -1) == 1.0
    assert D.tail(TWO, 2) == 0.0 and D.tail(TWO, 3) == 0.0
    assert D.below(TWO, 2) == 0.5 and D.below(TWO, 0) == 0.0
    assert D.tail_many(TWO, [-1, 0, 1, 2]).tolist() == [1.0, 0.5, 0.5, 0.0]


def test_moment_examples():
    assert D.moment(TWO, 1) == 1.0
    assert D.moment(TWO, 2) == pytest.approx(math.sqrt(2), rel=1e-15)
    c = DistSummary.from_atoms([2.5], [1.0])
    assert all(D.moment(c, p) == pytest.approx(2.5, rel=1e-14) for p in (1, 3, 100, 1000))
    assert D.moment(enumerate_exact(scalar([1, 1, 1])), 2) == pytest.approx(math.sqrt(3), rel=1e-15)


def test_high_moments_against_multiprecision():
    d = DistSummary.from_atoms([0.5, 3.0, 40.0], [0.5, 0.25, 0.25])
    mpmath.mp.dps = 50
    for p in (65, 200, 500):
        ref = (sum(mpmath.mpf(w) * mpmath.mpf(v) ** p for v, w in zip(d.values, d.probs))) ** (mpmath.mpf(1) / p)
        assert D.moment(d, p) == pytest.approx(float(ref), rel=1e-12)


def test_weak_lp_examples():
    assert D.weak_lp_rv(DistSummary.from_atoms([3.0], [1.0]), 2) == 3.0
    assert D.weak_lp_rv(TWO, 1) == 1.0


def test_orlicz_examples():
    one = DistSummary.from_atoms([1.0], [1.0])
    assert D.orlicz_norm(one, 2) == pytest.approx(1 / math.sqrt(math.log(2)), rel=1e-9)
    assert D.orlicz_norm(one, 2) == pytest.approx(1.20112, abs=1e-5)
    for q in (0.5, 1, 3, 7):
        c0 = DistSummary.from_atoms([4.0], [1.0])
        assert D.orlicz_norm(c0, q) == pytest.approx(4 / math.log(2) ** (1 / q), rel=1e-9)
    assert D.orlicz_norm(TWO, 1) == pytest.approx(2 / math.log(3), rel=1e-9)
    assert D.orlicz_norm(DistSummary.from_atoms([0.0], [1.0]), 2) == 0
    with pytest.raises(InputError):
        D.orlicz_norm(TWO, 0)


def test_orlicz_is_the_smallest_feasible_scale():
    d = enumerate_exact(scalar(np.random.default_rng(3).uniform(0, 1, 12)))
    for q in (1.0, 2.5, 6.0):
        c = D.orlicz_norm(d, q)
        psi = lambda s: float(np.dot(d.probs, np.expm1((d.values / s) ** q)))
        assert psi(c) <= 1 + 1e-12
        assert psi(c * (1 - 1e-8)) > 1


def test_median_examples():
    assert D.median(TWO) == 0
    assert D.median(DistSummary.from_atoms([5.0], [1.0])) == 5
    assert D.median(DistSummary.from_atoms([1, 2, 3], [0.25, 0.25, 0.5])) == 2


@given(seed=st.integers(0, 10**6), alpha=st.floats(0.01, 100))
def test_homogeneity(seed, alpha):
    rng = np.random.default_rng(seed)
    fam = random_family(rng, SpaceSpec(Family.LINF, 2), int(rng.integers(1, 10)))
    d, da = enumerate_exact(fam), enumerate_exact(fam.scaled(alpha))
    for p in (1, 2, 4):
        assert D.weak_lp_rv(da, p) == pytest.approx(alpha * D.weak_lp_rv(d, p), rel=1e-10)
    for q in (2.5, 4):
        assert D.orlicz_norm(da, q) == pytest.approx(alpha * D.orlicz_norm(d, q), rel=1e-9)


@given(seed=st.integers(0, 10**6))
def test_moment_weak_moment_chain(seed):
    rng = np.random.default_rng(seed)
    fam = random_family(rng, SpaceSpec(Family.L1, 2), int(rng.integers(1, 13)))
    d = enumerate_exact(fam)
    for p in (1, 2, 4, 8):
        assert 0.5 * D.moment(d, p) <= D.weak_lp_rv(d, 2 * p) * (1 + 1e-12)
        assert D.weak_lp_rv(d, 2 * p) <= D.moment(d, 2 * p) * (1 + 1e-12)


def test_from_atoms_validation():
    with pytest.raises(InputError):
        DistSummary.from_atoms([0, 1], [0.5, 0.4])
    with pytest.raises(InputError):
        DistSummary.from_atoms([0, 1], [1 / 3, 2 / 3])
    with pytest.raises(InputError):
        DistSummary.from_atoms([-1], [1.0])
