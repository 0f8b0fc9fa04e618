"""Grid runner: train one model per (variant, seed) and tabulate test AUC.

A variant file is INI-shaped: each section names a variant, each key
overrides one training-config field. Every variant trains once per seed
on the same dataset; rows report overall and long-tail test AUC plus
wall time, and mean/std summary rows close out each variant. A variant
that raises is recorded as a failed row so the rest of the grid still
runs.
"""

from __future__ import annotations

import configparser
import dataclasses
import time
from dataclasses import dataclass

from .config import TrainConfig, _coerce
from .data import InteractionLog, PreparedData, prepare_dataset
from .errors import DataError, UsageError
from .metrics import ScoredSet, auc, longtail_auc
from .model import predict
from .train import train

LONGTAIL_CUTS = (3, 5, 10)


@dataclass
class AblationRow:
    label: str
    seed: int | None  # None marks a summary row
    kind: str  # "run", "mean", "std", or "failed"
    auc: float | None
    longtail: dict[int, float | None]
    seconds: float
    note: str = ""


def read_matrix(path: str) -> dict[str, dict[str, str]]:
    parser = configparser.ConfigParser()
    parser.optionxform = str  # keys are case-sensitive config field names
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise DataError(f"bad variant file {path}: {exc}") from None
    matrix = {label: dict(parser[label]) for label in parser.sections()}
    if not matrix:
        raise UsageError(f"variant file {path} defines no variants")
    return matrix


def apply_overrides(base: TrainConfig, overrides: dict[str, str]) -> TrainConfig:
    fields = {f.name: f.type for f in dataclasses.fields(TrainConfig)}
    types = {"float": float, "int": int, "str": str, "bool": bool}
    kwargs = {}
    for key, raw in overrides.items():
        if key not in fields:
            raise DataError(f"unknown config key {key!r}")
        kwargs[key] = _coerce(key, types[fields[key]], raw)
    return dataclasses.replace(base, **kwargs).validate()


def _evaluate(config: TrainConfig, data: PreparedData) -> tuple[float, dict[int, float | None]]:
    result = train(config, data)
    probs = predict(result.params, data.test)
    scored = ScoredSet(probs, data.test.labels, data.degrees_for(data.test))
    return auc(scored), {k: longtail_auc(scored, k) for k in LONGTAIL_CUTS}


def run_ablation(
    base: TrainConfig,
    matrix: dict[str, dict[str, str]],
    log: InteractionLog,
    seeds: tuple[int, ...] = (0, 1, 2),
) -> list[AblationRow]:
    if not matrix:
        raise UsageError("empty variant matrix")
    # Instance encoding only depends on these knobs, not on the model,
    # so variants that agree on them share one prepared dataset.
    cache: dict[tuple, PreparedData] = {}
    rows: list[AblationRow] = []
    for label, overrides in matrix.items():
        per_seed: list[AblationRow] = []
        for seed in seeds:
            started = time.perf_counter()
            try:
                config = dataclasses.replace(apply_overrides(base, overrides), seed=seed)
                key = (config.graph_mode, config.max_neighbors)
                if key not in cache:
                    cache[key] = prepare_dataset(log, config)
                score, tails = _evaluate(config, cache[key])
                row = AblationRow(label, seed, "run", score, tails, time.perf_counter() - started)
            except Exception as exc:
                row = AblationRow(
                    label, seed, "failed", None, {k: None for k in LONGTAIL_CUTS},
                    time.perf_counter() - started, note=f"{type(exc).__name__}: {exc}",
                )
            per_seed.append(row)
            rows.append(row)
        scores = [r.auc for r in per_seed if r.kind == "run"]
        if scores:
            mean = sum(scores) / len(scores)
            var = sum((s - mean) ** 2 for s in scores) / len(scores)
            seconds = sum(r.seconds for r in per_seed)
            rows.append(AblationRow(label, None, "mean", mean, _tail_summary(per_seed, mean=True), seconds))
            rows.append(AblationRow(label, None, "std", var**0.5, _tail_summary(per_seed, mean=False), 0.0))
    return rows


def _tail_summary(per_seed: list[AblationRow], mean: bool) -> dict[int, float | None]:
    out: dict[int, float | None] = {}
    for k in LONGTAIL_CUTS:
        vals = [r.longtail[k] for r in per_seed if r.kind == "run" and r.longtail[k] is not None]
        if not vals:
            out[k] = None
        elif mean:
            out[k] = sum(vals) / len(vals)
        else:
            m = sum(vals) / len(vals)
            out[k] = (sum((v - m) ** 2 for v in vals) / len(vals)) ** 0.5
    return out


def _cell(value: float | None) -> str:
    return "na" if value is None else repr(float(value))


def format_results(rows: list[AblationRow]) -> str:
    header = "variant\tseed\tkind\tauc\t" + "\t".join(f"auc_le{k}" for k in LONGTAIL_CUTS) + "\tseconds\tnote\n"
    lines = [header]
    for row in rows:
        seed = "" if row.seed is None else str(row.seed)
        tails = "\t".join(_cell(row.longtail[k]) for k in LONGTAIL_CUTS)
        lines.append(
            f"{row.label}\t{seed}\t{row.kind}\t{_cell(row.auc)}\t{tails}\t{row.seconds:.2f}\t{row.note}\n"
        )
    return "".join(lines)


def write_results(path: str, rows: list[AblationRow]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_results(rows))
