"""Effect measures as total-or-error functions of an outcome pair.

A measure contrasts the two counterfactual population summaries
mu0 = E[Y(0)] and mu1 = E[Y(1)]. All eight measures are defined here as
closed forms; inputs outside a measure's domain raise
:class:`~effectmeasures.errors.UndefinedMeasure` rather than producing
NaN or infinities.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import InvariantViolation, UndefinedMeasure

__all__ = [
    "OutcomeKind",
    "OutcomePair",
    "MeasureKind",
    "MeasureValue",
    "UndefinedAnnotation",
    "BINARY_ONLY_MEASURES",
    "compute_measure",
    "all_measures",
    "swap_labels",
    "rr_feasible_baseline",
    "FeasibleBaseline",
]


class OutcomeKind(enum.Enum):
    CONTINUOUS = "continuous"
    BINARY = "binary"


@dataclass(frozen=True)
class OutcomePair:
    """The pair (E[Y(0)], E[Y(1)]) every measure contrasts."""

    mu0: float
    mu1: float
    kind: OutcomeKind

    def __post_init__(self) -> None:
        for name, v in (("mu0", self.mu0), ("mu1", self.mu1)):
            if not math.isfinite(v):
                raise InvariantViolation(f"{name} must be finite, got {v!r}")
            if self.kind is OutcomeKind.BINARY and not 0.0 <= v <= 1.0:
                raise InvariantViolation(
                    f"binary {name} must lie in [0, 1], got {v!r}"
                )


class MeasureKind(enum.Enum):
    RD = "rd"
    RR = "rr"
    SR = "sr"
    ERR = "err"
    RS = "rs"
    NNT = "nnt"
    OR = "or"
    LOG_OR = "log_or"


#: Measures that only make sense for event probabilities.
BINARY_ONLY_MEASURES = frozenset(
    {MeasureKind.SR, MeasureKind.RS, MeasureKind.NNT, MeasureKind.OR, MeasureKind.LOG_OR}
)

# Value of each measure under a null effect (mu1 == mu0). NNT diverges at
# the null; math.inf is the documented sentinel (compute_measure itself
# raises UndefinedMeasure there and never returns the sentinel).
_NULL_REFERENCE = {
    MeasureKind.RD: 0.0,
    MeasureKind.RR: 1.0,
    MeasureKind.SR: 1.0,
    MeasureKind.ERR: 0.0,
    MeasureKind.RS: 0.0,
    MeasureKind.NNT: math.inf,
    MeasureKind.OR: 1.0,
    MeasureKind.LOG_OR: 0.0,
}


@dataclass(frozen=True)
class MeasureValue:
    measure: MeasureKind
    value: float
    null_reference: float


@dataclass(frozen=True)
class UndefinedAnnotation:
    """In-band record of a measure that is undefined for a given pair."""

    measure: MeasureKind
    reason: str


def _odds(p: float) -> float:
    return p / (1.0 - p)


def compute_measure(measure: MeasureKind, pair: OutcomePair) -> MeasureValue:
    """Evaluate ``measure`` on ``pair``.

    Sign conventions: NNT is the signed reciprocal 1/RD (negative when
    treatment lowers the event probability); display layers may print the
    magnitude with a benefit/harm tag. For continuous outcomes the ratio
    measures RR/ERR only check mu0 != 0 — constancy of the outcome's sign
    cannot be verified from the two summaries, so the caller owns that.
    """
    mu0, mu1 = pair.mu0, pair.mu1
    binary = pair.kind is OutcomeKind.BINARY
    if measure in BINARY_ONLY_MEASURES and not binary:
        raise UndefinedMeasure(f"{measure.value} is defined only for binary outcomes")

    if measure is MeasureKind.RD:
        value = mu1 - mu0
    elif measure is MeasureKind.RR or measure is MeasureKind.ERR:
        if mu0 == 0.0:
            raise UndefinedMeasure("RR requires mu0 != 0")
        value = mu1 / mu0
        if measure is MeasureKind.ERR:
            value -= 1.0
    elif measure is MeasureKind.SR or measure is MeasureKind.RS:
        if mu0 == 1.0:
            raise UndefinedMeasure("SR requires mu0 != 1")
        value = (1.0 - mu1) / (1.0 - mu0)
        if measure is MeasureKind.RS:
            value = 1.0 - value
    elif measure is MeasureKind.NNT:
        if mu1 == mu0:
            raise UndefinedMeasure("NNT diverges at a null effect (mu1 == mu0)")
        value = 1.0 / (mu1 - mu0)
    elif measure is MeasureKind.OR or measure is MeasureKind.LOG_OR:
        if mu0 in (0.0, 1.0) or mu1 in (0.0, 1.0):
            raise UndefinedMeasure("OR requires both probabilities strictly inside (0, 1)")
        value = _odds(mu1) / _odds(mu0)
        if measure is MeasureKind.LOG_OR:
            value = math.log(value)
    else:  # pragma: no cover - exhaustive over MeasureKind
        raise UndefinedMeasure(f"unknown measure {measure!r}")

    if not math.isfinite(value):  # pragma: no cover - guarded above
        raise UndefinedMeasure(f"{measure.value} is not finite for {pair}")
    return MeasureValue(measure, value, _NULL_REFERENCE[measure])


def measures_for_kind(kind: OutcomeKind) -> tuple[MeasureKind, ...]:
    """The measures applicable to an outcome kind, in catalogue order."""
    if kind is OutcomeKind.BINARY:
        return tuple(MeasureKind)
    return tuple(m for m in MeasureKind if m not in BINARY_ONLY_MEASURES)


def all_measures(pair: OutcomePair) -> list[MeasureValue | UndefinedAnnotation]:
    """Every measure applicable to ``pair.kind``; undefined ones are
    reported in-band as :class:`UndefinedAnnotation`, never omitted."""
    out: list[MeasureValue | UndefinedAnnotation] = []
    for measure in measures_for_kind(pair.kind):
        try:
            out.append(compute_measure(measure, pair))
        except UndefinedMeasure as exc:
            out.append(UndefinedAnnotation(measure, exc.reason))
    return out


def swap_labels(pair: OutcomePair) -> OutcomePair:
    """Relabel the binary outcome (event <-> non-event).

    The measure transforms under the swap are: RD -> -RD, NNT -> -NNT,
    RR <-> SR, ERR <-> RS (up to the same exchange), OR -> 1/OR,
    LogOR -> -LogOR.
    """
    if pair.kind is not OutcomeKind.BINARY:
        raise UndefinedMeasure("label swap is defined only for binary outcomes")
    return OutcomePair(1.0 - pair.mu0, 1.0 - pair.mu1, OutcomeKind.BINARY)


@dataclass(frozen=True)
class FeasibleBaseline:
    """Feasibility summary for a homogeneous risk ratio target.

    ``max_baseline`` is the largest control risk at which the treated
    risk b * target_rr still fits inside [0, 1].
    """

    target_rr: float
    max_baseline: float

    def switch_probability(self, baseline: float) -> float:
        """Switch-on probability m_b that a baseline risk must carry to
        realize the target RR: (rr - 1) * b / (1 - b). Equals 1 at
        ``max_baseline``."""
        if not 0.0 < baseline <= self.max_baseline:
            raise UndefinedMeasure(
                f"baseline must lie in (0, {self.max_baseline}] for RR {self.target_rr}"
            )
        return (self.target_rr - 1.0) * baseline / (1.0 - baseline)


def rr_feasible_baseline(target_rr: float) -> FeasibleBaseline:
    """Largest baseline risk compatible with a homogeneous RR > 1.

    RR <= 1 is feasible at every baseline; that regime raises rather than
    returning a vacuous 1.0, to force explicit handling.
    """
    if not target_rr > 1.0:
        raise UndefinedMeasure("rr_feasible_baseline requires target_rr > 1")
    return FeasibleBaseline(target_rr, 1.0 / target_rr)
