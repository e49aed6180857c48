"""K-functional calculus and exact laws of vector-valued Rademacher sums."""

__version__ = "0.1.0"

from .errors import CapacityError, InputError, RadseriesError, StageError, UnsupportedError  # noqa: E402
from .spaces import CoefficientFamily, DualFunctional, Family, SpaceSpec, apply_dual, dual_extreme_points, norm  # noqa: E402
from .kfunctional import k12_exact, k12_holmstedt, k12_scaling_bound  # noqa: E402
from .distribution import DistSummary, enumerate_exact, sample_mc  # noqa: E402
from .weaknorms import kw12, kw_profile, lemma2_split, weak_lp_norm  # noqa: E402

__all__ = [
    "CapacityError",
    "CoefficientFamily",
    "DistSummary",
    "DualFunctional",
    "Family",
    "InputError",
    "RadseriesError",
    "SpaceSpec",
    "StageError",
    "UnsupportedError",
    "apply_dual",
    "dual_extreme_points",
    "enumerate_exact",
    "k12_exact",
    "k12_holmstedt",
    "k12_scaling_bound",
    "kw12",
    "kw_profile",
    "lemma2_split",
    "norm",
    "sample_mc",
    "weak_lp_norm",
]
