"""Causal treatment-effect measures: computation, collapsibility, and
trial-to-target generalization."""

from .errors import (
    DirectionViolated,
    EffectMeasureError,
    InvariantViolation,
    MissingTargetControlOutcome,
    NonCollapsible,
    NotIdentifiable,
    ParseError,
    SingularDesign,
    SupportViolation,
    UndefinedMeasure,
    UnknownCell,
    UnknownScenario,
)
from .measures import (
    MeasureKind,
    MeasureValue,
    OutcomeKind,
    OutcomePair,
    UndefinedAnnotation,
    all_measures,
    compute_measure,
    rr_feasible_baseline,
    swap_labels,
)
from .strata import (
    CollapseWeights,
    StratifiedDistribution,
    Stratum,
    check_logic_respecting,
    collapse,
    collapsibility_weights,
    is_homogeneous,
    marginal_pair,
    naive_average,
)

__version__ = "0.1.0"
