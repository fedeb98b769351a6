"""Parametric families and their Fisher geometry."""

from .core import (
    CLOSED_CHRISTOFFEL_KINDS,
    christoffel_closed,
    christoffel_closed_array,
    closed_sphere_1d,
    fim,
    fim_array,
    fim_monte_carlo,
    fim_source,
    fr_distance_closed,
    logpdf,
    mean,
    normal_side,
    pdf,
    ppf,
    pushforward_spec,
    sample,
    score,
    truncated_moments,
)
from .gumbel import beta_integral, gumbel_constants
from .locscale import LocScaleConstants, QuadConfig, loc_scale_constants
from .spec import (
    BUILTIN_BASES,
    GUMBEL_BASE,
    LOGISTIC_BASE,
    NORMAL_BASE,
    BaseDensity,
    ChristoffelSymbols,
    FamilySpec,
    FisherMetric,
    Kind,
    ParamPoint,
    TruncatedMoments,
    domain_mask,
    student_base,
)
