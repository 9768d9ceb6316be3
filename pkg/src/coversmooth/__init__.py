"""Smoothing of pushforward potentials along branched coverings."""

from .errors import (
    CoverSmoothError,
    CoverageError,
    DomainError,
    ParameterError,
    ScenarioError,
)
from .geometry import (
    Annulus,
    Complement,
    Disk,
    Grid,
    Intersection,
    LevelRegion,
    Polydisk,
    ScalarField,
    dump_field_csv,
    field_from_function,
    halton_sample,
    mass_integral,
    sample_grid,
    sample_slice_grid,
)
from .psh import (
    laplacian_sup,
    levi_form,
    min_levi_eigenvalue,
    mollifier_kernel,
    mollify,
    reg_max_fields,
    regmax_kernel,
)
from .covers import (
    ChartPair,
    GluedCover,
    IdentityCover,
    PowerCover,
    VietaCover,
    pushforward,
)
from .cocycle import (
    ChartOverlap,
    CocycleChart,
    CurvePatch,
    KahlerCocycle,
    curve_mass,
    validate_cocycle,
)
from .smoothing import (
    GlueStep,
    NestedOpens,
    SmoothingParams,
    global_glue,
    local_smooth,
    smooth_pushforward,
)
from .scenarios import build_scenario, run_scenario, verify_agreement

__version__ = "0.1.0"

__all__ = [
    "CoverSmoothError", "CoverageError", "DomainError", "ParameterError",
    "ScenarioError",
    "Annulus", "Complement", "Disk", "Grid", "Intersection", "LevelRegion",
    "Polydisk", "ScalarField", "dump_field_csv", "field_from_function",
    "halton_sample", "mass_integral", "sample_grid", "sample_slice_grid",
    "laplacian_sup", "levi_form", "min_levi_eigenvalue", "mollifier_kernel",
    "mollify", "reg_max_fields", "regmax_kernel",
    "ChartPair", "GluedCover", "IdentityCover", "PowerCover", "VietaCover",
    "pushforward",
    "ChartOverlap", "CocycleChart", "CurvePatch", "KahlerCocycle",
    "curve_mass", "validate_cocycle",
    "GlueStep", "NestedOpens", "SmoothingParams", "global_glue",
    "local_smooth", "smooth_pushforward",
    "build_scenario", "run_scenario", "verify_agreement",
]
