"""File formats: stratified tables, trial/target samples, model
definitions (JSON), covariate-role files, and the measure-landscape grid.

One fixed CSV dialect: comma separator, ``.`` decimal point, UTF-8,
mandatory header, ``NA`` as the only missing-value token. Parsers reject
malformed input instead of coercing it; writers emit floats in
shortest-roundtrip form so that load(save(x)) == x.
"""

from __future__ import annotations

import csv
import json
import logging
from pathlib import Path
from typing import Iterable

from .errors import InvariantViolation, ParseError
from .genmodel import (
    ContinuousOutcomeModel,
    DiscreteCovariateSpace,
    EntanglementModel,
    LogitOutcomeModel,
)
from .measures import (
    MeasureKind,
    OutcomeKind,
    OutcomePair,
    all_measures,
    MeasureValue,
)
from .strata import StratifiedDistribution, Stratum
from .transport import CovariateRoles, TargetSample, TrialSample

__all__ = [
    "load_strata",
    "save_strata",
    "load_trial",
    "save_trial",
    "load_target",
    "save_target",
    "emit_grid",
    "load_model",
    "save_model",
    "load_roles",
]

logger = logging.getLogger(__name__)

NA = "NA"

_COUNTS_HEADER = ["stratum", "proportion", "n_a1_y1", "n_a1_y0", "n_a0_y1", "n_a0_y0"]
_SUMMARY_HEADER = ["stratum", "proportion", "mu0", "mu1"]


def _fmt(value: float) -> str:
    return repr(float(value))


def _read_rows(path) -> tuple[list[str], list[list[str]]]:
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError:
        raise
    if not rows:
        raise ParseError(f"{path}: empty file, header expected")
    header = [h.strip() for h in rows[0]]
    return header, rows[1:]


def _parse_float(text: str, row: int, column: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"expected a number, got {text!r}", row=row, column=column) from None


def _parse_int(text: str, row: int, column: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ParseError(f"expected an integer, got {text!r}", row=row, column=column) from None


def _parse_value(text: str):
    """Covariate values: int if int-shaped, else float, else the string."""
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def load_strata(path, kind: OutcomeKind | None = None) -> StratifiedDistribution:
    """Read a stratified table, counts or summary variant (by header).

    Proportions off by at most 1e-6 from summing to one (hand-typed
    decimals) are renormalized; the correction is logged. For the summary
    variant the outcome kind is inferred as binary when every mean lies
    in [0, 1], unless ``kind`` overrides the inference.
    """
    header, rows = _read_rows(path)
    if header == _COUNTS_HEADER:
        variant = "counts"
    elif header == _SUMMARY_HEADER:
        variant = "summary"
    else:
        raise ParseError(f"{path}: unrecognized strata header {header!r}")
    if not rows:
        raise ParseError(f"{path}: no data rows")

    labels: list[str] = []
    proportions: list[float] = []
    payload: list[tuple] = []
    for i, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(row)}", row=i)
        labels.append(row[0])
        proportions.append(_parse_float(row[1], i, "proportion"))
        if variant == "counts":
            counts = tuple(_parse_int(v, i, c) for v, c in zip(row[2:], header[2:]))
            payload.append(((counts[0], counts[1]), (counts[2], counts[3])))
        else:
            payload.append((
                _parse_float(row[2], i, "mu0"),
                _parse_float(row[3], i, "mu1"),
            ))

    total = sum(proportions)
    if abs(total - 1.0) > 1e-6:
        raise InvariantViolation(
            f"{path}: stratum proportions sum to {total!r}, outside the 1e-6 tolerance"
        )
    if total != 1.0:
        logger.info("%s: renormalizing proportions by factor %r", path, 1.0 / total)
        proportions = [p / total for p in proportions]

    if variant == "counts":
        strata = tuple(
            Stratum.from_counts(label, p, counts)
            for label, p, counts in zip(labels, proportions, payload)
        )
        return StratifiedDistribution(strata, OutcomeKind.BINARY)

    if kind is None:
        kind = (
            OutcomeKind.BINARY
            if all(0.0 <= v <= 1.0 for pair in payload for v in pair)
            else OutcomeKind.CONTINUOUS
        )
    strata = tuple(
        Stratum(label, p, OutcomePair(mu0, mu1, kind))
        for label, p, (mu0, mu1) in zip(labels, proportions, payload)
    )
    return StratifiedDistribution(strata, kind)


def save_strata(dist: StratifiedDistribution, path) -> None:
    """Write the counts variant when every stratum carries counts, the
    summary variant otherwise."""
    with_counts = all(s.counts is not None for s in dist.strata)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if with_counts:
            fh.write(",".join(_COUNTS_HEADER) + "\n")
            for s in dist.strata:
                (n11, n10), (n01, n00) = s.counts
                fh.write(
                    f"{s.label},{_fmt(s.proportion)},{n11},{n10},{n01},{n00}\n"
                )
        else:
            fh.write(",".join(_SUMMARY_HEADER) + "\n")
            for s in dist.strata:
                fh.write(
                    f"{s.label},{_fmt(s.proportion)},{_fmt(s.pair.mu0)},{_fmt(s.pair.mu1)}\n"
                )


def load_trial(path) -> TrialSample:
    """Trial CSV: covariate columns, then ``a`` and ``y``."""
    header, rows = _read_rows(path)
    if header[-2:] != ["a", "y"]:
        raise ParseError(f"{path}: trial header must end with 'a,y', got {header!r}")
    covariates = tuple(header[:-2])
    if not covariates:
        raise ParseError(f"{path}: trial needs at least one covariate column")
    x, a, y = [], [], []
    for i, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(row)}", row=i)
        x.append(tuple(_parse_value(v) for v in row[:-2]))
        ai = _parse_int(row[-2], i, "a")
        if ai not in (0, 1):
            raise InvariantViolation(f"{path}: row {i}: a must be 0 or 1, got {ai}")
        a.append(ai)
        y.append(_parse_float(row[-1], i, "y"))
    return TrialSample(covariates, tuple(x), tuple(a), tuple(y))


def save_trial(trial: TrialSample, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(trial.covariates + ("a", "y")) + "\n")
        for row, a, y in zip(trial.x, trial.a, trial.y):
            cells = [_cell_text(v) for v in row] + [str(a), _fmt(y)]
            fh.write(",".join(cells) + "\n")


def _cell_text(value) -> str:
    if isinstance(value, bool):
        raise InvariantViolation("boolean covariate values are not representable")
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return _fmt(value)
    return str(value)


def load_target(path) -> TargetSample:
    """Target CSV: covariate columns, optional trailing ``y0``."""
    header, rows = _read_rows(path)
    has_y0 = header and header[-1] == "y0"
    covariates = tuple(header[:-1]) if has_y0 else tuple(header)
    if not covariates:
        raise ParseError(f"{path}: target needs at least one covariate column")
    x, y0 = [], []
    for i, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(row)}", row=i)
        if has_y0:
            if row[-1] == NA:
                raise InvariantViolation(
                    f"{path}: row {i}: y0 must cover every row or the column must be absent"
                )
            y0.append(_parse_float(row[-1], i, "y0"))
            row = row[:-1]
        x.append(tuple(_parse_value(v) for v in row))
    return TargetSample(covariates, tuple(x), tuple(y0) if has_y0 else None)


def save_target(target: TargetSample, path) -> None:
    header = target.covariates + (("y0",) if target.y0 is not None else ())
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for i, row in enumerate(target.x):
            cells = [_cell_text(v) for v in row]
            if target.y0 is not None:
                cells.append(_fmt(target.y0[i]))
            fh.write(",".join(cells) + "\n")


_GRID_HEADER = "mu0,mu1,rd,rr,sr,err,rs,nnt,or,log_or"
_GRID_ORDER = [
    MeasureKind.RD,
    MeasureKind.RR,
    MeasureKind.SR,
    MeasureKind.ERR,
    MeasureKind.RS,
    MeasureKind.NNT,
    MeasureKind.OR,
    MeasureKind.LOG_OR,
]


def emit_grid(resolution: int, path) -> None:
    """All eight measures over the interior lattice of the unit square.

    Points are k/(resolution+1) for k = 1..resolution on each axis;
    undefined cells carry the literal ``NA``.
    """
    if resolution < 2:
        raise InvariantViolation("resolution must be >= 2")
    step = 1.0 / (resolution + 1)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_GRID_HEADER + "\n")
        for i in range(1, resolution + 1):
            mu0 = i * step
            for j in range(1, resolution + 1):
                mu1 = j * step
                pair = OutcomePair(mu0, mu1, OutcomeKind.BINARY)
                by_kind = {entry.measure: entry for entry in all_measures(pair)}
                cells = [_fmt(mu0), _fmt(mu1)]
                for measure in _GRID_ORDER:
                    entry = by_kind[measure]
                    cells.append(_fmt(entry.value) if isinstance(entry, MeasureValue) else NA)
                fh.write(",".join(cells) + "\n")


def _cells_from_json(raw) -> tuple[tuple, ...]:
    return tuple(tuple(cell) for cell in raw)


def load_model(path):
    """JSON model file -> (DiscreteCovariateSpace, model).

    Schema: ``covariates`` (names), ``cells`` (value tuples),
    ``populations`` (id -> probability vector aligned with cells), and
    ``model`` with a ``type`` of "continuous" (b, m, optional noise_sd),
    "entanglement" (b, m_b, m_g) or "logit" (b, m); per-cell function
    values are vectors aligned with ``cells``.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc}") from None
    try:
        cells = _cells_from_json(raw["cells"])
        space = DiscreteCovariateSpace(
            tuple(raw["covariates"]),
            cells,
            {pop: tuple(v) for pop, v in raw["populations"].items()},
        )
        spec = raw["model"]
        mtype = spec["type"]

        def fn(name: str) -> dict:
            values = spec[name]
            if len(values) != len(cells):
                raise ParseError(f"{path}: model.{name} must have one value per cell")
            return dict(zip(cells, (float(v) for v in values)))

        if mtype == "continuous":
            model = ContinuousOutcomeModel(fn("b"), fn("m"), float(spec.get("noise_sd", 0.0)))
        elif mtype == "entanglement":
            model = EntanglementModel(fn("b"), fn("m_b"), fn("m_g"))
        elif mtype == "logit":
            model = LogitOutcomeModel(fn("b"), fn("m"))
        else:
            raise ParseError(f"{path}: unknown model type {mtype!r}")
    except KeyError as exc:
        raise ParseError(f"{path}: missing key {exc}") from None
    return space, model


def save_model(space: DiscreteCovariateSpace, model, path) -> None:
    def vector(fn) -> list[float]:
        return [fn[c] for c in space.cells]

    if isinstance(model, ContinuousOutcomeModel):
        spec = {"type": "continuous", "b": vector(model.b), "m": vector(model.m),
                "noise_sd": model.noise_sd}
    elif isinstance(model, EntanglementModel):
        spec = {"type": "entanglement", "b": vector(model.b), "m_b": vector(model.m_b),
                "m_g": vector(model.m_g)}
    elif isinstance(model, LogitOutcomeModel):
        spec = {"type": "logit", "b": vector(model.b), "m": vector(model.m)}
    else:
        raise InvariantViolation(f"unsupported model type {type(model).__name__}")
    payload = {
        "covariates": list(space.covariates),
        "cells": [list(c) for c in space.cells],
        "populations": {pop: list(v) for pop, v in space.populations.items()},
        "model": spec,
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def load_roles(path) -> CovariateRoles:
    """JSON: ``covariates`` plus ``baseline``/``modulator``/``shifted``
    name lists."""
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc}") from None
    try:
        return CovariateRoles(
            tuple(raw["covariates"]),
            frozenset(raw["baseline"]),
            frozenset(raw["modulator"]),
            frozenset(raw["shifted"]),
        )
    except KeyError as exc:
        raise ParseError(f"{path}: missing key {exc}") from None
