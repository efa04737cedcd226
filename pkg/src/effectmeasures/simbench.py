"""Deterministic replication engine for the two built-in simulation
studies, with exact ground-truth oracles.

Each replication draws a fresh trial and target sample from counter-based
RNG streams keyed by (seed, replication index), runs the configured
estimators from :mod:`effectmeasures.transport`, and records estimates.
Streams are independent per replication, and aggregation is
order-independent, so identical inputs produce bit-identical reports at
any worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import EffectMeasureError, InvariantViolation, UnknownScenario
from .genmodel import (
    DiscreteCovariateSpace,
    EntanglementModel,
    MeasureValue,
    population_measures_binary,
)
from .measures import MeasureKind, OutcomeKind, UndefinedMeasure
from .transport import (
    Learner,
    TargetSample,
    TrialSample,
    generalize_local,
    gformula_conditional,
    ipsw_conditional,
)

__all__ = [
    "Scenario",
    "EstimatorConfig",
    "ReplicationResult",
    "ConfigSummary",
    "AggregateReport",
    "builtin_scenario",
    "ground_truth",
    "run_scenario",
    "default_config",
    "report_rows",
    "write_report_csv",
]


@dataclass(frozen=True)
class EstimatorConfig:
    measure: MeasureKind
    strategy: str  # "gformula" | "ipsw" | "local"
    covariates: tuple[str, ...]

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.measure.value, self.strategy, "+".join(self.covariates))


@dataclass(frozen=True)
class ReplicationResult:
    rep_index: int
    estimates: dict[tuple, float]
    failures: dict[tuple, str]


@dataclass(frozen=True)
class ConfigSummary:
    config: EstimatorConfig
    ground_truth: float
    median: float
    q1: float
    q3: float
    mean: float
    sd: float
    n_ok: int
    n_failed: int


@dataclass(frozen=True)
class AggregateReport:
    scenario: str
    seed: int
    reps: int
    results: tuple[ReplicationResult, ...]
    summaries: tuple[ConfigSummary, ...]


class Scenario:
    """A fully specified generative study: covariate distributions per
    population, an outcome model, Bernoulli(0.5) treatment assignment,
    and default sample sizes."""

    name: str
    covariates: tuple[str, ...]
    outcome: OutcomeKind
    default_n: int
    default_m: int
    default_reps: int

    def sample_trial(self, rng: np.random.Generator, n: int) -> TrialSample:
        raise NotImplementedError

    def sample_target(self, rng: np.random.Generator, m: int) -> TargetSample:
        raise NotImplementedError

    def ground_truth(self, measure: MeasureKind, population: str = "target") -> float:
        raise NotImplementedError


class _ContinuousLinear(Scenario):
    """Six covariates; linear baseline and modulation, Gaussian noise.

    (X1, X2, X3) are jointly Gaussian with unit variances and
    correlations (12: 0, 13: 0.5, 23: 0.2); their means shift from
    (6, 5, 8) in the source to (15, 7, 10) in the target, as does the
    Bernoulli rate of X4 (0.8 -> 0.3). X5 ~ Bernoulli(0.8) and
    X6 ~ Normal(4, 1) are non-shifted.
    """

    name = "continuous-linear"
    covariates = ("X1", "X2", "X3", "X4", "X5", "X6")
    outcome = OutcomeKind.CONTINUOUS
    default_n = 2000
    default_m = 5000
    default_reps = 50

    _COV = np.array([[1.0, 0.0, 0.5], [0.0, 1.0, 0.2], [0.5, 0.2, 1.0]])
    _CHOL = np.linalg.cholesky(_COV)  # positive definiteness checked at import
    _MEANS = {"source": np.array([6.0, 5.0, 8.0]), "target": np.array([15.0, 7.0, 10.0])}
    _P4 = {"source": 0.8, "target": 0.3}
    _P5 = 0.8
    _NOISE_SD = math.sqrt(2.0)

    @staticmethod
    def _b(x: np.ndarray) -> np.ndarray:
        return (
            0.05 * x[:, 0] + 0.04 * x[:, 1] + 2.0 * x[:, 2]
            + x[:, 3] + 2.0 * x[:, 4] - 2.0 * x[:, 5]
        )

    @staticmethod
    def _m(x: np.ndarray) -> np.ndarray:
        return 1.5 * x[:, 0] + 2.0 * x[:, 1] + x[:, 4]

    def _sample_x(self, rng: np.random.Generator, size: int, population: str) -> np.ndarray:
        z = rng.standard_normal((size, 3))
        x123 = self._MEANS[population] + z @ self._CHOL.T
        x4 = rng.binomial(1, self._P4[population], size)
        x5 = rng.binomial(1, self._P5, size)
        x6 = rng.normal(4.0, 1.0, size)
        return np.column_stack([x123, x4, x5, x6])

    def sample_trial(self, rng: np.random.Generator, n: int) -> TrialSample:
        x = self._sample_x(rng, n, "source")
        a = rng.binomial(1, 0.5, n)
        eps = rng.normal(0.0, self._NOISE_SD, n)
        y = self._b(x) + a * self._m(x) + eps
        return TrialSample(
            self.covariates,
            tuple(map(tuple, x.tolist())),
            tuple(int(v) for v in a),
            tuple(float(v) for v in y),
        )

    def sample_target(self, rng: np.random.Generator, m: int) -> TargetSample:
        x = self._sample_x(rng, m, "target")
        return TargetSample(self.covariates, tuple(map(tuple, x.tolist())))

    def _moments(self, population: str) -> tuple[float, float]:
        mu = self._MEANS[population]
        e_b = (
            0.05 * mu[0] + 0.04 * mu[1] + 2.0 * mu[2]
            + self._P4[population] + 2.0 * self._P5 - 2.0 * 4.0
        )
        e_m = 1.5 * mu[0] + 2.0 * mu[1] + self._P5
        return float(e_b), float(e_m)

    def ground_truth(self, measure: MeasureKind, population: str = "target") -> float:
        e_b, e_m = self._moments(population)
        if measure is MeasureKind.RD:
            return e_m
        if measure is MeasureKind.RR:
            return 1.0 + e_m / e_b
        if measure is MeasureKind.ERR:
            return e_m / e_b
        raise UndefinedMeasure(f"{measure.value} is undefined for a continuous outcome")


def _roulette_cells() -> tuple[tuple, ...]:
    return tuple((l, s, g) for l in (0, 1) for s in (0, 1) for g in (0, 1))


def _bernoulli_cell_probs(rates: tuple[float, float, float]) -> tuple[float, ...]:
    out = []
    for cell in _roulette_cells():
        p = 1.0
        for value, rate in zip(cell, rates):
            p *= rate if value == 1 else 1.0 - rate
        out.append(p)
    return tuple(out)


class _RouletteHeterogeneous(Scenario):
    """Binary outcome with a harmful, heterogeneous effect.

    Baseline risk b depends on all three covariates, the switch-on
    probability m_b only on stress and gender, and the switch-off
    probability is identically zero. Lifestyle and stress shift between
    populations; gender does not.
    """

    name = "roulette-heterogeneous"
    covariates = ("lifestyle", "stress", "gender")
    outcome = OutcomeKind.BINARY
    default_n = 10000
    default_m = 20000
    default_reps = 20

    _RATES = {"source": (0.4, 0.8, 0.5), "target": (0.6, 0.2, 0.5)}

    @staticmethod
    def _b(lifestyle: int, stress: int, gender: int) -> float:
        return (
            (0.2 if lifestyle == 1 else 0.05)
            * (2.0 if stress == 1 else 1.0)
            * (0.5 if gender == 1 else 1.0)
        )

    @staticmethod
    def _m_b(lifestyle: int, stress: int, gender: int) -> float:
        if stress == 1:
            return 1.0 / 4.0
        return 1.0 / 10.0 if gender == 1 else 1.0 / 6.0

    def __init__(self) -> None:
        cells = _roulette_cells()
        self.space = DiscreteCovariateSpace(
            self.covariates,
            cells,
            {pop: _bernoulli_cell_probs(rates) for pop, rates in self._RATES.items()},
        )
        self.model = EntanglementModel(
            {c: self._b(*c) for c in cells},
            {c: self._m_b(*c) for c in cells},
            {c: 0.0 for c in cells},
        )

    def _sample_x(self, rng: np.random.Generator, size: int, population: str) -> np.ndarray:
        rates = self._RATES[population]
        cols = [rng.binomial(1, rate, size) for rate in rates]
        return np.column_stack(cols)

    def _risk(self, x: np.ndarray, a: np.ndarray) -> np.ndarray:
        b = np.array([self._b(*row) for row in x.tolist()])
        m_b = np.array([self._m_b(*row) for row in x.tolist()])
        return b + a * (1.0 - b) * m_b

    def sample_trial(self, rng: np.random.Generator, n: int) -> TrialSample:
        x = self._sample_x(rng, n, "source")
        a = rng.binomial(1, 0.5, n)
        y = rng.binomial(1, self._risk(x, a))
        return TrialSample(
            self.covariates,
            tuple(tuple(int(v) for v in row) for row in x.tolist()),
            tuple(int(v) for v in a),
            tuple(float(v) for v in y),
        )

    def sample_target(self, rng: np.random.Generator, m: int) -> TargetSample:
        x = self._sample_x(rng, m, "target")
        y0 = rng.binomial(1, self._risk(x, np.zeros(m, dtype=int)))
        return TargetSample(
            self.covariates,
            tuple(tuple(int(v) for v in row) for row in x.tolist()),
            tuple(float(v) for v in y0),
        )

    def ground_truth(self, measure: MeasureKind, population: str = "target") -> float:
        for entry in population_measures_binary(self.model, self.space, population):
            if entry.measure is measure and isinstance(entry, MeasureValue):
                return entry.value
        raise UndefinedMeasure(f"{measure.value} has no ground truth for this scenario")


_SCENARIOS = {
    _ContinuousLinear.name: _ContinuousLinear,
    _RouletteHeterogeneous.name: _RouletteHeterogeneous,
}


def builtin_scenario(name: str) -> Scenario:
    try:
        return _SCENARIOS[name]()
    except KeyError:
        raise UnknownScenario(
            f"unknown scenario {name!r}; available: {sorted(_SCENARIOS)}"
        ) from None


def ground_truth(scenario: Scenario, measure: MeasureKind, population: str = "target") -> float:
    return scenario.ground_truth(measure, population)


def default_config(scenario: Scenario) -> tuple[EstimatorConfig, ...]:
    """The covariate-set comparison each study is about."""
    if scenario.outcome is OutcomeKind.CONTINUOUS:
        small, full = ("X1", "X2"), ("X1", "X2", "X3", "X4")
        return (
            EstimatorConfig(MeasureKind.RD, "gformula", small),
            EstimatorConfig(MeasureKind.RD, "local", small),
            EstimatorConfig(MeasureKind.RD, "gformula", full),
            EstimatorConfig(MeasureKind.RR, "gformula", small),
            EstimatorConfig(MeasureKind.RR, "gformula", full),
        )
    small, full = ("stress",), ("lifestyle", "stress")
    return (
        EstimatorConfig(MeasureKind.SR, "local", small),
        EstimatorConfig(MeasureKind.RD, "ipsw", small),
        EstimatorConfig(MeasureKind.RD, "gformula", small),
        EstimatorConfig(MeasureKind.SR, "local", full),
        EstimatorConfig(MeasureKind.RD, "ipsw", full),
        EstimatorConfig(MeasureKind.RR, "gformula", full),
        EstimatorConfig(MeasureKind.OR, "gformula", full),
    )


def _validate_config(scenario: Scenario, config: tuple[EstimatorConfig, ...]) -> None:
    for entry in config:
        if not set(entry.covariates) <= set(scenario.covariates):
            raise InvariantViolation(
                f"covariates {entry.covariates!r} not in scenario {scenario.name!r}"
            )
        if entry.strategy not in ("gformula", "ipsw", "local"):
            raise InvariantViolation(f"unknown strategy {entry.strategy!r}")
        if entry.strategy == "ipsw" and scenario.outcome is OutcomeKind.CONTINUOUS:
            raise InvariantViolation(
                "ipsw needs categorical covariates; unavailable for this scenario"
            )


def _rep_rng(seed: int, rep_index: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence(entropy=seed, spawn_key=(rep_index,)))
    )


def _run_one(
    scenario: Scenario,
    seed: int,
    rep_index: int,
    n: int,
    m: int,
    config: tuple[EstimatorConfig, ...],
) -> ReplicationResult:
    rng = _rep_rng(seed, rep_index)
    trial = scenario.sample_trial(rng, n)
    target = scenario.sample_target(rng, m)
    learner = (
        Learner.LEAST_SQUARES
        if scenario.outcome is OutcomeKind.CONTINUOUS
        else Learner.CELL_MEANS
    )
    estimates: dict[tuple, float] = {}
    failures: dict[tuple, str] = {}
    for entry in config:
        try:
            if entry.strategy == "gformula":
                est = gformula_conditional(trial, target, entry.measure, entry.covariates, learner)
            elif entry.strategy == "ipsw":
                est = ipsw_conditional(trial, target, entry.measure, entry.covariates)
            else:
                est = generalize_local(trial, target, entry.measure, entry.covariates, learner)
            estimates[entry.key] = est.value
        except EffectMeasureError as exc:
            failures[entry.key] = f"{type(exc).__name__}: {exc}"
    return ReplicationResult(rep_index, estimates, failures)


def _quantile(sorted_values: list[float], q: float) -> float:
    # linear interpolation between closest ranks (same as numpy default)
    if not sorted_values:
        return math.nan
    pos = q * (len(sorted_values) - 1)
    lo = math.floor(pos)
    hi = math.ceil(pos)
    frac = pos - lo
    return sorted_values[lo] * (1.0 - frac) + sorted_values[hi] * frac


def run_scenario(
    scenario: Scenario,
    seed: int,
    reps: int | None = None,
    config: tuple[EstimatorConfig, ...] | None = None,
    n: int | None = None,
    m: int | None = None,
    workers: int = 1,
) -> AggregateReport:
    """Run ``reps`` independent replications and aggregate.

    Deterministic in (scenario, seed, reps, config, n, m) regardless of
    ``workers``: each replication owns a counter-based stream keyed by
    (seed, rep_index), and results are aggregated in rep order.
    """
    reps = scenario.default_reps if reps is None else reps
    n = scenario.default_n if n is None else n
    m = scenario.default_m if m is None else m
    config = default_config(scenario) if config is None else tuple(config)
    if reps < 1:
        raise InvariantViolation("reps must be >= 1")
    _validate_config(scenario, config)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(
                pool.map(lambda r: _run_one(scenario, seed, r, n, m, config), range(reps))
            )
    else:
        results = [_run_one(scenario, seed, r, n, m, config) for r in range(reps)]
    results.sort(key=lambda r: r.rep_index)

    summaries = []
    for entry in config:
        values = sorted(
            r.estimates[entry.key] for r in results if entry.key in r.estimates
        )
        n_ok = len(values)
        mean = math.fsum(values) / n_ok if n_ok else math.nan
        sd = (
            math.sqrt(math.fsum((v - mean) ** 2 for v in values) / (n_ok - 1))
            if n_ok > 1
            else math.nan
        )
        summaries.append(
            ConfigSummary(
                config=entry,
                ground_truth=scenario.ground_truth(entry.measure),
                median=_quantile(values, 0.5),
                q1=_quantile(values, 0.25),
                q3=_quantile(values, 0.75),
                mean=mean,
                sd=sd,
                n_ok=n_ok,
                n_failed=reps - n_ok,
            )
        )
    return AggregateReport(scenario.name, seed, reps, tuple(results), tuple(summaries))


def report_rows(report: AggregateReport, config: tuple[EstimatorConfig, ...]):
    """Long-format rows: one per (replication, estimator configuration)."""
    by_key = {s.config.key: s.ground_truth for s in report.summaries}
    for result in report.results:
        for entry in config:
            est = result.estimates.get(entry.key)
            yield (
                report.scenario,
                result.rep_index,
                entry.measure.value,
                entry.strategy,
                "+".join(entry.covariates),
                "NA" if est is None else repr(est),
                repr(by_key[entry.key]),
            )


def write_report_csv(report: AggregateReport, config: tuple[EstimatorConfig, ...], path) -> None:
    """Plot-ready long-format CSV; floats in shortest-roundtrip form."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("scenario,rep,measure,strategy,covariate_set,estimate,ground_truth\n")
        for row in report_rows(report, config):
            fh.write(",".join(str(v) for v in row) + "\n")
