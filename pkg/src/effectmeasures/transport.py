"""Covariate-set planning and trial-to-target generalization.

Two strategies move an effect from a source trial to a target population:

* conditional-outcome generalization — fit per-arm conditional means on
  the trial, average them over the target (g-formula), or reweight the
  trial by the target/source covariate density ratio (IPSW);
* local-effect generalization — estimate the effect within covariate
  cells and recombine with target-side collapsibility weights.

``plan_adjustment`` reports which covariates each (measure, outcome,
direction, strategy) combination needs, and whether the target must also
supply control outcomes.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    InvariantViolation,
    MissingTargetControlOutcome,
    NonCollapsible,
    SingularDesign,
    SupportViolation,
    UndefinedMeasure,
)
from .genmodel import MonotonicityDirection
from .measures import (
    BINARY_ONLY_MEASURES,
    MeasureKind,
    OutcomeKind,
    OutcomePair,
    compute_measure,
)
from .strata import COLLAPSIBLE_MEASURES

__all__ = [
    "CovariateRoles",
    "Strategy",
    "Learner",
    "AdjustmentPlan",
    "TrialSample",
    "TargetSample",
    "DensityRatio",
    "GeneralizedEstimate",
    "plan_adjustment",
    "estimate_density_ratio",
    "gformula_conditional",
    "ipsw_conditional",
    "generalize_local",
    "least_squares_fit",
]


class Strategy(enum.Enum):
    CONDITIONAL_OUTCOME = "conditional"
    LOCAL_EFFECT = "local"


class Learner(enum.Enum):
    CELL_MEANS = "cell-means"
    LEAST_SQUARES = "least-squares"


@dataclass(frozen=True)
class CovariateRoles:
    """Covariate names partitioned by role.

    ``baseline`` enters the control-outcome function, ``modulator`` the
    effect-modification function, ``shifted`` collects covariates whose
    distribution differs between source and target.
    """

    all: tuple[str, ...]
    baseline: frozenset[str]
    modulator: frozenset[str]
    shifted: frozenset[str]

    def __post_init__(self) -> None:
        universe = set(self.all)
        if len(universe) != len(self.all):
            raise InvariantViolation("duplicate covariate names")
        for name, subset in (
            ("baseline", self.baseline),
            ("modulator", self.modulator),
            ("shifted", self.shifted),
        ):
            if not subset <= universe:
                raise InvariantViolation(f"{name} set {subset!r} not within {self.all!r}")

    def ordered(self, subset: frozenset[str]) -> tuple[str, ...]:
        return tuple(c for c in self.all if c in subset)


@dataclass(frozen=True)
class AdjustmentPlan:
    measure: MeasureKind
    outcome: OutcomeKind
    direction: MonotonicityDirection
    strategy: Strategy
    required_covariates: tuple[str, ...]
    requires_target_y0: bool


def plan_adjustment(
    roles: CovariateRoles,
    measure: MeasureKind,
    outcome: OutcomeKind,
    direction: MonotonicityDirection,
    strategy: Strategy,
) -> AdjustmentPlan:
    """Minimal covariate set for generalization.

    Conditional-outcome generalization always needs the shifted
    prognostic covariates, (B u M) n Sh, and never target control
    outcomes. Local-effect generalization can do better when the local
    effect depends only on modulators: RD on a continuous outcome needs
    just M n Sh, and so do RR under a beneficial effect and SR under a
    harmful effect on a binary outcome — those two additionally need the
    target control-outcome distribution to rebuild the weights. Other
    collapsible measures fall back to (B u M) n Sh; NNT, OR and log-OR
    cannot be recombined from local effects at all.
    """
    prognostic = roles.baseline | roles.modulator
    if strategy is Strategy.CONDITIONAL_OUTCOME:
        required = prognostic & roles.shifted
        needs_y0 = False
    else:
        if measure not in COLLAPSIBLE_MEASURES:
            raise NonCollapsible(measure)
        modulator_only = frozenset(roles.modulator & roles.shifted)
        if measure is MeasureKind.RD and outcome is OutcomeKind.CONTINUOUS:
            required, needs_y0 = modulator_only, False
        elif outcome is OutcomeKind.BINARY and (
            (measure is MeasureKind.RR and direction is MonotonicityDirection.BENEFICIAL)
            or (measure is MeasureKind.SR and direction is MonotonicityDirection.HARMFUL)
        ):
            required, needs_y0 = modulator_only, True
        else:
            required = prognostic & roles.shifted
            needs_y0 = measure is not MeasureKind.RD
    return AdjustmentPlan(
        measure, outcome, direction, strategy, roles.ordered(frozenset(required)), needs_y0
    )


@dataclass(frozen=True)
class TrialSample:
    """Row-level source data: covariates, randomized arm, outcome."""

    covariates: tuple[str, ...]
    x: tuple[tuple, ...]
    a: tuple[int, ...]
    y: tuple[float, ...]

    def __post_init__(self) -> None:
        n = len(self.x)
        if len(self.a) != n or len(self.y) != n:
            raise InvariantViolation("x, a, y must have equal length")
        if any(len(row) != len(self.covariates) for row in self.x):
            raise InvariantViolation("row arity differs from covariate list")
        if any(ai not in (0, 1) for ai in self.a):
            raise InvariantViolation("treatment indicator must be 0 or 1")
        if 0 not in self.a or 1 not in self.a:
            raise SingularDesign("both treatment arms need observations")

    def column_indices(self, covariates: Sequence[str]) -> tuple[int, ...]:
        try:
            return tuple(self.covariates.index(c) for c in covariates)
        except ValueError as exc:
            raise InvariantViolation(str(exc)) from None

    @property
    def n(self) -> int:
        return len(self.x)


@dataclass(frozen=True)
class TargetSample:
    """Row-level target data: covariates, optionally control outcomes."""

    covariates: tuple[str, ...]
    x: tuple[tuple, ...]
    y0: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if any(len(row) != len(self.covariates) for row in self.x):
            raise InvariantViolation("row arity differs from covariate list")
        if self.y0 is not None and len(self.y0) != len(self.x):
            raise InvariantViolation("y0 must cover every row or be absent")

    def column_indices(self, covariates: Sequence[str]) -> tuple[int, ...]:
        try:
            return tuple(self.covariates.index(c) for c in covariates)
        except ValueError as exc:
            raise InvariantViolation(str(exc)) from None

    @property
    def n(self) -> int:
        return len(self.x)


@dataclass(frozen=True)
class DensityRatio:
    """Empirical target/source frequency ratio per covariate cell."""

    covariates: tuple[str, ...]
    ratios: dict[tuple, float]

    def __call__(self, cell: tuple) -> float:
        return self.ratios.get(cell, 0.0)


@dataclass(frozen=True)
class GeneralizedEstimate:
    measure: MeasureKind
    strategy: Strategy
    value: float
    covariates_used: tuple[str, ...]
    n_source: int
    n_target: int


def _cells(rows: tuple[tuple, ...], idx: tuple[int, ...]):
    return [tuple(row[i] for i in idx) for row in rows]


def _frequencies(cells: list[tuple]) -> dict[tuple, float]:
    counts: dict[tuple, int] = {}
    for cell in cells:
        counts[cell] = counts.get(cell, 0) + 1
    n = len(cells)
    return {cell: c / n for cell, c in counts.items()}


def estimate_density_ratio(
    trial: TrialSample, target: TargetSample, covariates: Sequence[str]
) -> DensityRatio:
    """Ratio of empirical cell frequencies, p_T(x) / p_S(x)."""
    src = _frequencies(_cells(trial.x, trial.column_indices(covariates)))
    tgt = _frequencies(_cells(target.x, target.column_indices(covariates)))
    unseen = sorted(cell for cell in tgt if cell not in src)
    if unseen:
        raise SupportViolation(unseen)
    ratios = {cell: tgt.get(cell, 0.0) / p for cell, p in src.items()}
    return DensityRatio(tuple(covariates), ratios)


def _infer_kind(trial: TrialSample) -> OutcomeKind:
    if all(v in (0.0, 1.0) for v in trial.y):
        return OutcomeKind.BINARY
    return OutcomeKind.CONTINUOUS


def _pair(mu0: float, mu1: float, kind: OutcomeKind) -> OutcomePair:
    try:
        return OutcomePair(mu0, mu1, kind)
    except InvariantViolation as exc:
        raise UndefinedMeasure(f"estimated pair out of range: {exc}") from None


def _arm_cell_means(
    trial: TrialSample, idx: tuple[int, ...]
) -> tuple[dict[tuple, float], dict[tuple, float]]:
    """Per-cell outcome means for each arm; cells missing from an arm are
    simply absent from its map."""
    sums: dict[tuple, list[float]] = {}
    cells = _cells(trial.x, idx)
    for cell, a, y in zip(cells, trial.a, trial.y):
        acc = sums.setdefault(cell, [0.0, 0, 0.0, 0])
        if a == 1:
            acc[0] += y
            acc[1] += 1
        else:
            acc[2] += y
            acc[3] += 1
    mu1 = {c: s[0] / s[1] for c, s in sums.items() if s[1] > 0}
    mu0 = {c: s[2] / s[3] for c, s in sums.items() if s[3] > 0}
    return mu0, mu1


def least_squares_fit(x_rows: Sequence[Sequence[float]], y: Sequence[float]) -> np.ndarray:
    """Minimum-norm least squares with an intercept (first coefficient)."""
    if len(x_rows) == 0:
        raise SingularDesign("least squares needs at least one row")
    design = np.column_stack([np.ones(len(x_rows)), np.asarray(x_rows, dtype=float)])
    coef, *_ = np.linalg.lstsq(design, np.asarray(y, dtype=float), rcond=None)
    return coef


def _ls_predictions(
    trial: TrialSample,
    target: TargetSample,
    idx_src: tuple[int, ...],
    idx_tgt: tuple[int, ...],
) -> tuple[float, float]:
    """Per-arm OLS fits on the trial, averaged over target rows."""
    tgt = np.column_stack(
        [np.ones(target.n), np.asarray([[row[i] for i in idx_tgt] for row in target.x], float)]
    )
    means = []
    for arm in (0, 1):
        rows = [
            [trial.x[j][i] for i in idx_src] for j in range(trial.n) if trial.a[j] == arm
        ]
        ys = [trial.y[j] for j in range(trial.n) if trial.a[j] == arm]
        coef = least_squares_fit(rows, ys)
        means.append(float((tgt @ coef).mean()))
    return means[0], means[1]


def gformula_conditional(
    trial: TrialSample,
    target: TargetSample,
    measure: MeasureKind,
    covariates: Sequence[str],
    learner: Learner = Learner.CELL_MEANS,
) -> GeneralizedEstimate:
    """Plug-in g-formula: fit per-arm conditional means on the trial,
    average them over the target covariate rows, contrast."""
    idx_src = trial.column_indices(covariates)
    idx_tgt = target.column_indices(covariates)
    if learner is Learner.CELL_MEANS:
        mu0_by_cell, mu1_by_cell = _arm_cell_means(trial, idx_src)
        tgt_cells = _cells(target.x, idx_tgt)
        missing = sorted(
            {c for c in tgt_cells if c not in mu0_by_cell or c not in mu1_by_cell}
        )
        if missing:
            raise SupportViolation(missing)
        mu0 = math.fsum(mu0_by_cell[c] for c in tgt_cells) / len(tgt_cells)
        mu1 = math.fsum(mu1_by_cell[c] for c in tgt_cells) / len(tgt_cells)
    else:
        mu0, mu1 = _ls_predictions(trial, target, idx_src, idx_tgt)
    pair = _pair(mu0, mu1, _infer_kind(trial))
    value = compute_measure(measure, pair).value
    return GeneralizedEstimate(
        measure, Strategy.CONDITIONAL_OUTCOME, value, tuple(covariates), trial.n, target.n
    )


def ipsw_conditional(
    trial: TrialSample,
    target: TargetSample,
    measure: MeasureKind,
    covariates: Sequence[str],
) -> GeneralizedEstimate:
    """Inverse propensity sampling weighting with empirical-frequency
    density ratios and arm-normalized weights:
    (1/n_a) * sum over arm a of r(X_i) * Y_i."""
    ratio = estimate_density_ratio(trial, target, covariates)
    idx = trial.column_indices(covariates)
    cells = _cells(trial.x, idx)
    sums = [0.0, 0.0]
    counts = [0, 0]
    for cell, a, y in zip(cells, trial.a, trial.y):
        sums[a] += ratio(cell) * y
        counts[a] += 1
    pair = _pair(sums[0] / counts[0], sums[1] / counts[1], _infer_kind(trial))
    value = compute_measure(measure, pair).value
    return GeneralizedEstimate(
        measure, Strategy.CONDITIONAL_OUTCOME, value, tuple(covariates), trial.n, target.n
    )


def generalize_local(
    trial: TrialSample,
    target: TargetSample,
    measure: MeasureKind,
    covariates: Sequence[str],
    learner: Learner = Learner.CELL_MEANS,
) -> GeneralizedEstimate:
    """Estimate the measure per covariate cell on the trial, recombine
    with target-side collapsibility weights.

    The weights mirror the collapsibility formulas: target proportions
    for RD; proportions scaled by target control-outcome cell means for
    RR/ERR (control survival for SR/RS), which is why the non-RD measures
    need ``target.y0``. For RD the result coincides with the
    cell-means g-formula.
    """
    if measure not in COLLAPSIBLE_MEASURES:
        raise NonCollapsible(measure)
    if learner is Learner.LEAST_SQUARES:
        if measure is not MeasureKind.RD:
            raise UndefinedMeasure(
                "least-squares local effects are supported for RD only"
            )
        idx_src = trial.column_indices(covariates)
        idx_tgt = target.column_indices(covariates)
        mu0, mu1 = _ls_predictions(trial, target, idx_src, idx_tgt)
        value = mu1 - mu0
        return GeneralizedEstimate(
            measure, Strategy.LOCAL_EFFECT, value, tuple(covariates), trial.n, target.n
        )

    needs_y0 = measure is not MeasureKind.RD
    if needs_y0 and target.y0 is None:
        raise MissingTargetControlOutcome(
            f"{measure.value} weights need control outcomes in the target sample"
        )
    idx_src = trial.column_indices(covariates)
    idx_tgt = target.column_indices(covariates)
    mu0_by_cell, mu1_by_cell = _arm_cell_means(trial, idx_src)
    tgt_cells = _cells(target.x, idx_tgt)
    proportions = _frequencies(tgt_cells)
    missing = sorted(
        {c for c in proportions if c not in mu0_by_cell or c not in mu1_by_cell}
    )
    if missing:
        raise SupportViolation(missing)

    kind = _infer_kind(trial)
    local = {
        c: compute_measure(measure, _pair(mu0_by_cell[c], mu1_by_cell[c], kind)).value
        for c in proportions
    }
    if measure is MeasureKind.RD:
        weights = proportions
    else:
        y0_sum: dict[tuple, list[float]] = {}
        for cell, y0 in zip(tgt_cells, target.y0):
            acc = y0_sum.setdefault(cell, [0.0, 0])
            acc[0] += y0
            acc[1] += 1
        y0_mean = {c: s[0] / s[1] for c, s in y0_sum.items()}
        if measure in (MeasureKind.RR, MeasureKind.ERR):
            raw = {c: proportions[c] * y0_mean[c] for c in proportions}
        else:
            raw = {c: proportions[c] * (1.0 - y0_mean[c]) for c in proportions}
        total = math.fsum(raw.values())
        if total == 0.0:
            raise UndefinedMeasure("degenerate target control outcomes: all weights zero")
        weights = {c: w / total for c, w in raw.items()}
    value = math.fsum(weights[c] * local[c] for c in proportions)
    return GeneralizedEstimate(
        measure, Strategy.LOCAL_EFFECT, value, tuple(covariates), trial.n, target.n
    )
