"""Monte Carlo experiment runner: replicate, aggregate, export.

A run draws ``n_reps`` instances from one simulation design, pushes each
through every configured pipeline and reduces the per-replicate records to
medians of model size and l2 error plus the inclusion rate of the true
model in the first-stage set. Output files depend only on the config, never
on timing or on the number of worker processes.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .core import l2_error
from .exceptions import BadSpec, StageError
from .pipelines import PipelineSpec, run_pipeline
from .rng import make_rng
from .simgen import SimulationSpec, generate
from .theory import DistributionReport

SUMMARY_HEADER = ("method", "median_size", "median_l2", "inclusion_acc")
REPLICATE_HEADER = ("method", "replicate", "size", "l2", "covered", "status")


@dataclass(frozen=True)
class ExperimentConfig:
    """One design, several pipelines, ``n_reps`` replicates.

    ``on_error`` is ``"abort"`` (re-raise the first stage failure) or
    ``"record"`` (keep a failed row and leave it out of the medians).
    With ``known_sigma`` the Dantzig stage uses the generating noise level.
    """

    sim_spec: SimulationSpec
    pipeline_specs: tuple
    n_reps: int = 200
    seed: int = 0
    output_dir: Optional[str] = None
    on_error: str = "abort"
    known_sigma: bool = True

    def __post_init__(self):
        object.__setattr__(self, "pipeline_specs", tuple(self.pipeline_specs))
        if self.n_reps < 1:
            raise BadSpec("n_reps must be >= 1")
        if not self.pipeline_specs:
            raise BadSpec("pipeline_specs is empty")
        labels = [ps.label for ps in self.pipeline_specs]
        if len(set(labels)) != len(labels):
            raise BadSpec(f"pipeline labels must be unique, got {labels}; set 'tag'")
        if self.on_error not in ("abort", "record"):
            raise BadSpec("on_error must be 'abort' or 'record'")
        if not 0 <= self.seed < 2**64:
            raise BadSpec("seed must fit in 64 bits")

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise BadSpec("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise BadSpec(f"unknown config keys: {sorted(unknown)}")
        for key in ("sim_spec", "pipeline_specs"):
            if key not in raw:
                raise BadSpec(f"config needs '{key}'")
        out = dict(raw)
        if not isinstance(raw["sim_spec"], dict):
            raise BadSpec("sim_spec must be an object")
        if not isinstance(raw["pipeline_specs"], list):
            raise BadSpec("pipeline_specs must be a list")
        out["sim_spec"] = SimulationSpec.from_dict(raw["sim_spec"])
        out["pipeline_specs"] = tuple(PipelineSpec.from_dict(p) for p in raw["pipeline_specs"])
        try:
            return cls(**out)
        except TypeError as exc:
            raise BadSpec(str(exc)) from None


@dataclass(frozen=True)
class Record:
    method: str
    replicate: int
    size: int
    l2: float
    covered: bool
    status: str = "ok"


@dataclass(frozen=True)
class AggregateReport:
    per_method: dict
    raw: tuple

    def summary_rows(self):
        for method, stats in self.per_method.items():
            yield (method, stats["median_model_size"], stats["median_l2_error"],
                   stats["inclusion_accuracy"])


def _run_replicate(cfg: ExperimentConfig, r: int) -> list:
    inst = generate(cfg.sim_spec, make_rng(cfg.seed, r, "data"))
    truth = inst.truth.true_model
    sigma = inst.sigma_used if cfg.known_sigma and inst.sigma_used > 0 else None
    rows = []
    for ps in cfg.pipeline_specs:
        try:
            out = run_pipeline(inst.data, ps, sigma=sigma)
        except StageError as exc:
            if cfg.on_error == "abort":
                raise
            rows.append(Record(ps.label, r, 0, float("nan"), False,
                               f"failed:{exc.method}:{exc.stage}"))
            continue
        covered = bool(np.all(np.isin(truth, out.first_stage)))
        rows.append(Record(ps.label, r, out.final_estimate.size,
                           l2_error(out.beta_raw, inst.truth), covered))
    return rows


def aggregate(records: Sequence[Record], labels: Sequence[str]) -> AggregateReport:
    """Reduce records to per-method medians; input order does not matter."""
    order = {lab: i for i, lab in enumerate(labels)}
    recs = tuple(sorted(records, key=lambda r: (order[r.method], r.replicate)))
    per = {}
    for lab in labels:
        rows = [r for r in recs if r.method == lab]
        ok = [r for r in rows if r.status == "ok"]
        if ok:
            size = float(np.median([r.size for r in ok]))
            l2 = float(np.median([r.l2 for r in ok]))
            acc = sum(r.covered for r in ok) / len(ok)
        else:
            size = l2 = acc = float("nan")
        per[lab] = {"median_model_size": size, "median_l2_error": l2,
                    "inclusion_accuracy": acc, "n_ok": len(ok), "n_failed": len(rows) - len(ok)}
    return AggregateReport(per_method=per, raw=recs)


def run_experiment(cfg: ExperimentConfig, jobs: int = 1) -> AggregateReport:
    """Run every replicate, aggregate and, when ``cfg.output_dir`` is set, write
    ``summary.csv``, ``replicates.csv`` and ``summary.json`` there."""
    if jobs < 1:
        raise BadSpec("jobs must be >= 1")
    reps = range(cfg.n_reps)
    if jobs == 1:
        chunks = [_run_replicate(cfg, r) for r in reps]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_run_replicate, [cfg] * cfg.n_reps, reps))
    records = [rec for chunk in chunks for rec in chunk]
    report = aggregate(records, [ps.label for ps in cfg.pipeline_specs])
    if cfg.output_dir is not None:
        write_report(report, cfg, cfg.output_dir)
    return report


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else _fmt(v) for v in row])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if hasattr(obj, "value") and isinstance(obj.value, str):
        return obj.value
    if hasattr(obj, "__dataclass_fields__"):
        return {f.name: _jsonable(getattr(obj, f.name)) for f in fields(obj)}
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def write_report(report: AggregateReport, cfg: ExperimentConfig, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "summary.csv", SUMMARY_HEADER, report.summary_rows())
    _write_csv(out / "replicates.csv", REPLICATE_HEADER,
               ((r.method, r.replicate, r.size, r.l2, r.covered, r.status) for r in report.raw))
    cfg_dict = _jsonable(cfg)
    cfg_dict.pop("output_dir", None)
    doc = {"config": cfg_dict, "per_method": _jsonable(report.per_method)}
    with open(out / "summary.json", "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def emit_figure_data(source, kind: str, path, metric: str = "size",
                     method: Optional[str] = None) -> Path:
    """Write plot-ready CSV.

    ``source`` is a :class:`DistributionReport`, an :class:`AggregateReport`
    (pick ``method`` and ``metric`` in ``{"size", "l2"}``) or a 1-d array.
    ``kind="sorted"`` writes one ``value`` per row; ``kind="histogram"``
    writes ``bin_left,bin_right,count`` with Freedman-Diaconis bins.
    """
    if isinstance(source, DistributionReport):
        sample = np.asarray(source.sample, dtype=float)
    elif isinstance(source, AggregateReport):
        if method is None:
            raise BadSpec("method is required for an AggregateReport")
        if metric not in ("size", "l2"):
            raise BadSpec("metric must be 'size' or 'l2'")
        sample = np.array([getattr(r, metric) for r in source.raw
                           if r.method == method and r.status == "ok"], dtype=float)
    else:
        sample = np.asarray(source, dtype=float).ravel()
    if sample.size == 0:
        raise BadSpec("nothing to export: empty sample")
    sample = np.sort(sample)
    path = Path(path)
    if kind == "sorted":
        _write_csv(path, ("value",), ((v,) for v in sample))
    elif kind == "histogram":
        edges = np.histogram_bin_edges(sample, bins="fd")
        counts, edges = np.histogram(sample, bins=edges)
        _write_csv(path, ("bin_left", "bin_right", "count"),
                   zip(edges[:-1], edges[1:], counts.tolist()))
    else:
        raise BadSpec("kind must be 'sorted' or 'histogram'")
    return path
