"""Local difference sets and invariant sets of x -> a x mod 1 at desk scale."""

__version__ = "0.1.0"

from .adic import adic_frac, commensurability, rotation_orbit_gap
from .circle import CircleSet, hausdorff_distance, max_gap, rasterize, rotate
from .diffsets import (
    LocalDiffParams,
    aggregate_local_difference_set,
    difference_set,
    local_difference_set,
)
from .errors import (
    AdicLabError,
    DepthTooLarge,
    DomainError,
    EmptySetError,
    NumericalError,
    ParseError,
    PreconditionError,
    SplitRequired,
)
from .maps import SmoothMap, eval_map, image_cover, load_map
from .symbolic import (
    DigitSystem,
    PointSpec,
    classify,
    cover_at_depth,
    entropy_exact,
    load_system,
    shipped_system,
)

__all__ = [
    "__version__",
    "adic_frac",
    "commensurability",
    "rotation_orbit_gap",
    "CircleSet",
    "hausdorff_distance",
    "max_gap",
    "rasterize",
    "rotate",
    "LocalDiffParams",
    "aggregate_local_difference_set",
    "difference_set",
    "local_difference_set",
    "AdicLabError",
    "DepthTooLarge",
    "DomainError",
    "EmptySetError",
    "NumericalError",
    "ParseError",
    "PreconditionError",
    "SplitRequired",
    "SmoothMap",
    "eval_map",
    "image_cover",
    "load_map",
    "DigitSystem",
    "PointSpec",
    "classify",
    "cover_at_depth",
    "entropy_exact",
    "load_system",
    "shipped_system",
]
