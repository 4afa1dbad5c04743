"""Multi-run benchmark orchestration: encode -> classify -> aggregate.

One experiment runs every (method, noise level, run) cell of a grid over a
single train/test dataset pair. Each run r uses seed ``base_seed + r`` for
the weight draws and for the noise draws, so any cell is reproducible in
isolation and noise is re-sampled per run. All methods within one (level,
run) see the same corrupted data. Cells are independent jobs on a bounded
worker pool; the report is a keyed merge, deterministic regardless of
completion order.

The pipeline per cell: parse -> z-score with train statistics (optional) ->
inject noise into the targeted splits -> fit autoencoder on train -> encode
train and test -> train the linear classifier on train features -> error
rate on test features. The ``raw`` baseline skips the encoder and feeds the
(preprocessed) patterns straight to the classifier.
"""

from __future__ import annotations

import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .autoencoder import KINDS, RaeTrainSpec, encode, fit, is_multilayer
from .classifier import ClassifierParams, evaluate, train_classifier
from .data import Dataset, NoiseSpec, inject_noise, normalize, parse_ucr
from .errors import FormatError, NumericalError
from .reservoir import ReservoirConfig

RAW_BASELINE = "raw"

CSV_COLUMNS = (
    "dataset",
    "method",
    "snr_db",
    "run",
    "seed",
    "er",
    "recon_error",
    "fit_ms",
    "encode_ms",
    "classify_ms",
    "error",
)
_TIMING_COLUMNS = ("fit_ms", "encode_ms", "classify_ms")


@dataclass(frozen=True)
class ExperimentSpec:
    """Full description of one benchmark experiment."""

    train_path: str
    test_path: str
    dataset_name: str = ""
    methods: tuple[str, ...] = KINDS
    raw_baseline: bool = True
    n_hidden: int = 100
    connectivity: float = 0.1
    spectral_radius: float = 0.9
    n_layers_ml: int = 2
    input_scaling: float = 1.0
    n_candidates: int = 10
    reset_policy: str = "carry"
    pinv_tolerance: float | None = None
    n_runs: int = 10
    base_seed: int = 0
    noise_levels: tuple[float | None, ...] = (None,)
    noise_targets: str = "both"
    normalize: bool = True
    reg_lambda: float = 1e-4
    epochs: int = 50
    workers: int = 4

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "noise_levels", tuple(self.noise_levels))
        for m in self.methods:
            if m not in KINDS:
                raise ValueError(f"unknown method {m!r}; expected one of {KINDS}")
        if self.n_runs < 1:
            raise ValueError(f"n_runs must be >= 1, got {self.n_runs}")
        if len(set(self.noise_levels)) != len(self.noise_levels):
            raise ValueError("noise levels must be distinct")
        if self.noise_targets not in ("train", "test", "both"):
            raise ValueError(f"noise_targets must be train|test|both, got {self.noise_targets!r}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")

    def all_methods(self) -> tuple[str, ...]:
        return self.methods + ((RAW_BASELINE,) if self.raw_baseline else ())

    def reservoir_config(self, method: str, input_dim: int) -> ReservoirConfig:
        return ReservoirConfig(
            n_hidden=self.n_hidden,
            input_dim=input_dim,
            connectivity=self.connectivity,
            spectral_radius_target=self.spectral_radius,
            n_layers=self.n_layers_ml if is_multilayer(method) else 1,
            input_scaling=self.input_scaling,
        )

    def echo(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["methods"] = list(self.methods)
        d["noise_levels"] = list(self.noise_levels)
        return d


@dataclass(frozen=True)
class CellResult:
    """Outcome of one (method, noise level, run) cell."""

    dataset: str
    method: str
    snr_db: float | None
    run: int
    seed: int
    er: float | None = None
    recon_error: float | None = None
    fit_ms: float = 0.0
    encode_ms: float = 0.0
    classify_ms: float = 0.0
    error: str = ""

    @property
    def valid(self) -> bool:
        return self.error == "" and self.er is not None


@dataclass(frozen=True)
class ExperimentReport:
    """All cell results plus the resolved configuration that produced them."""

    spec: ExperimentSpec
    dataset: str
    cells: tuple[CellResult, ...]
    total_seconds: float

    def cell(self, method: str, snr_db: float | None, run: int) -> CellResult:
        for c in self.cells:
            if c.method == method and c.snr_db == snr_db and c.run == run:
                return c
        raise KeyError(f"no cell for ({method}, {snr_db}, run {run})")

    def run_ers(self, method: str, snr_db: float | None) -> list[float]:
        """Per-run error rates of the valid cells, in run order."""
        return [
            c.er
            for c in sorted(self.cells, key=lambda c: c.run)
            if c.method == method and c.snr_db == snr_db and c.valid
        ]

    def mean_er(self, method: str, snr_db: float | None) -> float:
        ers = self.run_ers(method, snr_db)
        if not ers:
            return math.nan
        return float(np.mean(ers))

    def spread(self, method: str, snr_db: float | None) -> dict[str, float]:
        ers = self.run_ers(method, snr_db)
        if not ers:
            return {"mean": math.nan, "min": math.nan, "max": math.nan, "std": math.nan, "n": 0}
        return {
            "mean": float(np.mean(ers)),
            "min": float(np.min(ers)),
            "max": float(np.max(ers)),
            "std": float(np.std(ers)),
            "n": len(ers),
        }

    @property
    def invalid_cells(self) -> tuple[CellResult, ...]:
        return tuple(c for c in self.cells if not c.valid)


def _prepare_data(spec: ExperimentSpec) -> tuple[Dataset, Dataset]:
    d_train = parse_ucr(spec.train_path, name=spec.dataset_name, split="train")
    d_test = parse_ucr(spec.test_path, name=spec.dataset_name, split="test")
    if d_train.input_len != d_test.input_len:
        raise FormatError(
            f"train length {d_train.input_len} != test length {d_test.input_len}"
        )
    if spec.normalize:
        stats = d_train
        d_train = normalize(d_train, stats)
        d_test = normalize(d_test, stats)
    return d_train, d_test


def _noised(
    spec: ExperimentSpec,
    d_train: Dataset,
    d_test: Dataset,
    level: float | None,
    seed: int,
) -> tuple[Dataset, Dataset]:
    if level is None:
        return d_train, d_test
    ns = NoiseSpec(snr_db=level, seed=seed, targets=spec.noise_targets)
    return inject_noise(d_train, ns), inject_noise(d_test, ns)


def _run_cell(
    spec: ExperimentSpec,
    dataset: str,
    method: str,
    level: float | None,
    run: int,
    d_train: Dataset,
    d_test: Dataset,
) -> CellResult:
    seed = spec.base_seed + run
    shell = CellResult(dataset=dataset, method=method, snr_db=level, run=run, seed=seed)
    try:
        recon = None
        fit_ms = encode_ms = 0.0
        if method == RAW_BASELINE:
            f_train = d_train.patterns.T
            f_test = d_test.patterns.T
        else:
            cfg = spec.reservoir_config(method, d_train.input_len)
            train_spec = RaeTrainSpec(
                cfg=cfg,
                n_candidates=spec.n_candidates,
                seed=seed,
                reset_policy=spec.reset_policy,
                pinv_tolerance=spec.pinv_tolerance,
            )
            t0 = time.perf_counter()
            ae = fit(d_train, train_spec, method)
            fit_ms = (time.perf_counter() - t0) * 1e3
            recon = ae.reconstruction_error
            t0 = time.perf_counter()
            f_train = ae.features_train
            f_test = encode(ae, d_test)
            encode_ms = (time.perf_counter() - t0) * 1e3
        t0 = time.perf_counter()
        clf = train_classifier(
            f_train,
            d_train.labels,
            ClassifierParams(reg_lambda=spec.reg_lambda, epochs=spec.epochs, seed=seed),
        )
        result = evaluate(clf, f_test, d_test.labels)
        classify_ms = (time.perf_counter() - t0) * 1e3
        return replace(
            shell,
            er=result.error_rate,
            recon_error=recon,
            fit_ms=fit_ms,
            encode_ms=encode_ms,
            classify_ms=classify_ms,
        )
    except (ValueError, NumericalError, FormatError) as exc:
        return replace(shell, error=f"{type(exc).__name__}: {exc}")


def run_experiment(spec: ExperimentSpec) -> ExperimentReport:
    """Execute the full grid and return the merged report."""
    t_start = time.perf_counter()
    d_train, d_test = _prepare_data(spec)
    dataset = d_train.name

    prepared: dict[tuple[float | None, int], tuple[Dataset, Dataset]] = {}
    for level in spec.noise_levels:
        for run in range(spec.n_runs):
            prepared[(level, run)] = _noised(
                spec, d_train, d_test, level, spec.base_seed + run
            )

    jobs = [
        (method, level, run)
        for method in spec.all_methods()
        for level in spec.noise_levels
        for run in range(spec.n_runs)
    ]

    def work(job: tuple[str, float | None, int]) -> CellResult:
        method, level, run = job
        dtr, dte = prepared[(level, run)]
        return _run_cell(spec, dataset, method, level, run, dtr, dte)

    if spec.workers == 1 or len(jobs) == 1:
        cells = [work(j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=spec.workers) as pool:
            cells = list(pool.map(work, jobs))

    # Keyed merge: report order follows the spec's grid, not completion order.
    by_key = {(c.method, c.snr_db, c.run): c for c in cells}
    ordered = tuple(by_key[j] for j in jobs)
    return ExperimentReport(
        spec=spec,
        dataset=dataset,
        cells=ordered,
        total_seconds=time.perf_counter() - t_start,
    )


def ratio_table(report: ExperimentReport) -> dict[float | None, tuple[float, float, float]]:
    """Per-level mean-error ratios between the recurrent and feed-forward variants.

    Returns, per noise level, 100 times:
      P1 = ER(ml-esn-rae) / ER(esn-rae)
      P2 = ER(ml-esn-rae) / ER(ml-elm-ae)
      P3 = ER(esn-rae)    / ER(elm-ae)
    A zero denominator yields NaN for that entry rather than an error.
    """
    have = {c.method for c in report.cells}
    missing = [m for m in KINDS if m not in have]
    if missing:
        raise ValueError(f"ratio table needs all four methods; missing {missing}")

    def ratio(num: float, den: float) -> float:
        if den == 0.0 or math.isnan(den) or math.isnan(num):
            return math.nan
        return 100.0 * num / den

    table = {}
    for level in report.spec.noise_levels:
        er = {m: report.mean_er(m, level) for m in KINDS}
        table[level] = (
            ratio(er["ml-esn-rae"], er["esn-rae"]),
            ratio(er["ml-esn-rae"], er["ml-elm-ae"]),
            ratio(er["esn-rae"], er["elm-ae"]),
        )
    return table


def _fmt(value: float | None) -> str:
    if value is None:
        return ""
    return repr(float(value))


def _level_label(level: float | None) -> str:
    return "clean" if level is None else f"{level:g} dB"


def emit_csv(report: ExperimentReport, path: str, include_timings: bool = True) -> None:
    """Machine-readable long format, one row per cell.

    ``include_timings=False`` drops the wall-clock columns, making the output
    byte-identical across process invocations of the same spec.
    """
    columns = [c for c in CSV_COLUMNS if include_timings or c not in _TIMING_COLUMNS]
    buf = io.StringIO()
    buf.write(f"# spec: {json.dumps(report.spec.echo(), sort_keys=True)}\n")
    buf.write(",".join(columns) + "\n")
    for c in report.cells:
        row = {
            "dataset": c.dataset,
            "method": c.method,
            "snr_db": "" if c.snr_db is None else _fmt(c.snr_db),
            "run": str(c.run),
            "seed": str(c.seed),
            "er": _fmt(c.er),
            "recon_error": _fmt(c.recon_error),
            "fit_ms": f"{c.fit_ms:.3f}",
            "encode_ms": f"{c.encode_ms:.3f}",
            "classify_ms": f"{c.classify_ms:.3f}",
            "error": c.error.replace(",", ";").replace("\n", " "),
        }
        buf.write(",".join(row[col] for col in columns) + "\n")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(buf.getvalue())


def emit_report(report: ExperimentReport, path: str, format: str = "csv") -> None:
    """Write the report as csv (machine-readable) or markdown (summary)."""
    if format == "csv":
        emit_csv(report, path)
    elif format == "markdown":
        emit_markdown(report, path)
    else:
        raise ValueError(f"format must be csv|markdown, got {format!r}")


def parse_csv(path: str) -> list[dict[str, str]]:
    """Read back an emitted csv into one dict per data row."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if not ln.startswith("#")]
    if not lines:
        raise FormatError(f"{path}: no csv content")
    header = lines[0].split(",")
    return [dict(zip(header, ln.split(","))) for ln in lines[1:] if ln]


def emit_markdown(report: ExperimentReport, path: str) -> None:
    """Human-readable summary: mean-ER matrix, ratio table, per-run spread."""
    methods = report.spec.all_methods()
    levels = report.spec.noise_levels
    lines: list[str] = []
    lines.append(f"# Benchmark report: {report.dataset}")
    lines.append("")
    lines.append(f"Total wall-clock: {report.total_seconds:.1f} s")
    lines.append("")
    lines.append("## Mean error rate")
    lines.append("")
    lines.append("| noise | " + " | ".join(methods) + " |")
    lines.append("|---" * (len(methods) + 1) + "|")
    for level in levels:
        cells = [f"{report.mean_er(m, level):.3f}" for m in methods]
        lines.append(f"| {_level_label(level)} | " + " | ".join(cells) + " |")
    lines.append("")

    if all(m in methods for m in KINDS):
        lines.append("## Error-rate ratios (percent)")
        lines.append("")
        lines.append("| noise | P1 | P2 | P3 |")
        lines.append("|---|---|---|---|")
        for level, (p1, p2, p3) in ratio_table(report).items():
            lines.append(
                f"| {_level_label(level)} | {p1:.2f} | {p2:.2f} | {p3:.2f} |"
            )
        lines.append("")

    lines.append("## Per-run spread")
    lines.append("")
    lines.append("| method | noise | mean | min | max | std | runs |")
    lines.append("|---|---|---|---|---|---|---|")
    for method in methods:
        for level in levels:
            s = report.spread(method, level)
            lines.append(
                f"| {method} | {_level_label(level)} | {s['mean']:.4f} | "
                f"{s['min']:.4f} | {s['max']:.4f} | {s['std']:.4f} | {s['n']} |"
            )
    lines.append("")

    if report.invalid_cells:
        lines.append("## Invalid cells")
        lines.append("")
        for c in report.invalid_cells:
            lines.append(
                f"- {c.method} @ {_level_label(c.snr_db)} run {c.run}: {c.error}"
            )
        lines.append("")

    lines.append("## Configuration")
    lines.append("")
    lines.append("```json")
    lines.append(json.dumps(report.spec.echo(), indent=2, sort_keys=True))
    lines.append("```")
    lines.append("")
    seeds = [report.spec.base_seed + r for r in range(report.spec.n_runs)]
    lines.append(f"Seeds per run: {seeds}")
    lines.append("")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines))


def load_spec(path: str, overrides: dict | None = None) -> ExperimentSpec:
    """Build an ExperimentSpec from a flat JSON document plus flag overrides."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise FormatError(f"{path}: spec must be a JSON object")
    if overrides:
        doc.update({k: v for k, v in overrides.items() if v is not None})
    known = set(ExperimentSpec.__dataclass_fields__)
    unknown = sorted(set(doc) - known)
    if unknown:
        raise FormatError(f"{path}: unknown spec keys {unknown}")
    for key in ("train_path", "test_path"):
        if key not in doc:
            raise FormatError(f"{path}: missing required key {key!r}")
    if "methods" in doc:
        doc["methods"] = tuple(doc["methods"])
    if "noise_levels" in doc:
        doc["noise_levels"] = tuple(
            None if v is None else float(v) for v in doc["noise_levels"]
        )
    try:
        return ExperimentSpec(**doc)
    except (TypeError, ValueError) as exc:
        raise FormatError(f"{path}: {exc}") from exc
