"""Experiment sweeps: config, cell expansion, seeded runs, result files.

A sweep is the Cartesian grid (method x bf x alpha x noise x seed) with two
collapsing rules: the "regular" baseline has no bf or alpha axis, and the
"alpha" method fixes bf = 0 with a single layer. Every cell is a pure
function of (config, seed); the only non-reproducible column in the
aggregate CSV is the wall-clock ``ms``.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .baseline import solve_euclidean
from .clustering import evaluate_clustering, kmeans
from .data import Dataset, add_gaussian_noise_snr, assemble_dataset, load_manifest
from .diagnostics import (
    BarrierParams,
    LayerBarrierReport,
    layer_barriers,
    monotone_escape_check,
)
from .errors import ConfigurationError, NumericError
from .matrix import EpsilonPolicy, NonNegMatrix
from .multilayer import LayerResult, LayerSpec, MultiLayerResult, solve_chem_nmf
from .nmf import SolverConfig

METHODS = ("regular", "alpha", "chem")

RESULTS_HEADER = "method,bf,alpha,noise_db,seed,acc,nmi,final_divergence,iterations,ms"


@dataclass(frozen=True)
class SeedGrid:
    count: int
    base: int = 0

    def __post_init__(self):
        if self.count < 1:
            raise ConfigurationError(f"seed count must be >= 1, got {self.count}")
        if self.base < 0:
            raise ConfigurationError(f"seed base must be >= 0, got {self.base}")

    def values(self) -> range:
        return range(self.base, self.base + self.count)


@dataclass(frozen=True)
class KmeansParams:
    restarts: int = 10
    max_iter: int = 300

    def __post_init__(self):
        if self.restarts < 1 or self.max_iter < 1:
            raise ConfigurationError("kmeans restarts and max_iter must be >= 1")


@dataclass(frozen=True)
class SolverParams:
    """Iteration budget shared by every factorization in the sweep."""

    max_iter: int = 200
    tol: float = 1e-5
    eps_floor: float = 1e-12

    def config(self, alpha: float, seed: int) -> SolverConfig:
        return SolverConfig(
            alpha=alpha,
            max_iter=self.max_iter,
            tol=self.tol,
            eps=EpsilonPolicy(self.eps_floor),
            seed=seed,
        )


@dataclass(frozen=True)
class ExperimentConfig:
    manifest: str
    methods: tuple[str, ...]
    ranks: tuple[int, ...]
    alphas: tuple[float, ...]
    bfs: tuple[float, ...]
    noise_levels: tuple[float | None, ...]  # None means clean
    seeds: SeedGrid
    output_dir: str
    kmeans: KmeansParams = field(default_factory=KmeansParams)
    barriers: BarrierParams = field(default_factory=BarrierParams)
    solver: SolverParams = field(default_factory=SolverParams)

    def __post_init__(self):
        if not self.methods:
            raise ConfigurationError("at least one method is required")
        for m in self.methods:
            if m not in METHODS:
                raise ConfigurationError(f"unknown method {m!r}; expected {METHODS}")
        if not self.ranks:
            raise ConfigurationError("ranks must be non-empty")
        if any(r < 1 for r in self.ranks):
            raise ConfigurationError(f"ranks must be positive, got {self.ranks}")
        if any(b > a for a, b in zip(self.ranks, self.ranks[1:])):
            raise ConfigurationError(
                f"ranks must be non-increasing across layers, got {self.ranks}"
            )
        if not self.alphas or not self.bfs or not self.noise_levels:
            raise ConfigurationError("alpha, bf, and noise grids must be non-empty")
        for a in self.alphas:
            if a in (0.0, 1.0):
                raise ConfigurationError(f"alpha grid value {a} is unsupported")
        for b in self.bfs:
            if not 0.0 <= b <= 1.0:
                raise ConfigurationError(f"bf grid value {b} outside [0, 1]")


def config_from_dict(payload: dict) -> ExperimentConfig:
    """Build a validated config from the JSON-file schema.

    Noise entries are numbers (dB) or the string "clean".
    """
    if not isinstance(payload, dict):
        raise ConfigurationError("config must be a JSON object")
    required = ("manifest", "methods", "ranks", "alphas", "bfs",
                "noise_levels", "seeds", "output_dir")
    missing = [key for key in required if key not in payload]
    if missing:
        raise ConfigurationError(f"config is missing fields: {', '.join(missing)}")
    noise = []
    for level in payload["noise_levels"]:
        if level == "clean" or level is None:
            noise.append(None)
        else:
            try:
                noise.append(float(level))
            except (TypeError, ValueError) as exc:
                raise ConfigurationError(
                    f"noise level {level!r} is neither a number nor 'clean'"
                ) from exc
    try:
        seeds = SeedGrid(**payload["seeds"])
        km = KmeansParams(**payload.get("kmeans", {}))
        barriers = BarrierParams(**payload.get("barriers", {}))
        solver = SolverParams(**payload.get("solver", {}))
        return ExperimentConfig(
            manifest=str(payload["manifest"]),
            methods=tuple(payload["methods"]),
            ranks=tuple(int(r) for r in payload["ranks"]),
            alphas=tuple(float(a) for a in payload["alphas"]),
            bfs=tuple(float(b) for b in payload["bfs"]),
            noise_levels=tuple(noise),
            seeds=seeds,
            output_dir=str(payload["output_dir"]),
            kmeans=km,
            barriers=barriers,
            solver=solver,
        )
    except TypeError as exc:
        raise ConfigurationError(f"malformed config: {exc}") from exc


def load_config(path) -> ExperimentConfig:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON: {exc}") from exc
    cfg = config_from_dict(payload)
    manifest = Path(cfg.manifest)
    if not manifest.is_absolute():
        manifest = Path(path).parent / manifest
    return replace(cfg, manifest=str(manifest))


@dataclass(frozen=True)
class Cell:
    """One point of the sweep grid."""

    method: str
    bf: float | None
    alpha: float | None
    noise_db: float | None
    seed: int

    def run_id(self) -> str:
        key = json.dumps(
            [self.method, self.bf, self.alpha, self.noise_db, self.seed],
            separators=(",", ":"),
        )
        return hashlib.sha256(key.encode("ascii")).hexdigest()[:12]


@dataclass(frozen=True)
class ResultRow:
    method: str
    bf: float | None
    alpha: float | None
    noise_db: float | None
    seed: int
    acc: float
    nmi: float
    final_divergence: float
    iterations: int
    ms: int

    def csv_line(self) -> str:
        def opt(v):
            return "" if v is None else repr(float(v))

        noise = "clean" if self.noise_db is None else repr(float(self.noise_db))
        return ",".join(
            [
                self.method,
                opt(self.bf),
                opt(self.alpha),
                noise,
                str(self.seed),
                repr(float(self.acc)),
                repr(float(self.nmi)),
                repr(float(self.final_divergence)),
                str(self.iterations),
                str(self.ms),
            ]
        )


def expand_cells(cfg: ExperimentConfig) -> list[Cell]:
    """Grid expansion with the per-method collapsing rules applied."""
    cells = []
    for method in cfg.methods:
        if method == "regular":
            bf_axis: tuple[float | None, ...] = (None,)
            alpha_axis: tuple[float | None, ...] = (None,)
        elif method == "alpha":
            bf_axis = (0.0,)
            alpha_axis = cfg.alphas
        else:
            bf_axis = cfg.bfs
            alpha_axis = cfg.alphas
        for bf in bf_axis:
            for alpha in alpha_axis:
                for noise in cfg.noise_levels:
                    for seed in cfg.seeds.values():
                        cells.append(Cell(method, bf, alpha, noise, seed))
    return cells


def _noise_stream(seed: int, noise_db: float) -> np.random.Generator:
    return np.random.default_rng([seed, int(round(noise_db * 1000.0)), 0x5EED])


def _factorize_cell(y: NonNegMatrix, cfg: ExperimentConfig, cell: Cell) -> MultiLayerResult:
    if cell.method == "regular":
        pair, trace = solve_euclidean(
            y, cfg.ranks[-1], cfg.solver.config(alpha=0.5, seed=cell.seed)
        )
        return MultiLayerResult(pair.basis, pair.activation, (LayerResult(pair, trace),))
    ranks = (cfg.ranks[-1],) if cell.method == "alpha" else cfg.ranks
    bf = 0.0 if cell.method == "alpha" else cell.bf
    spec = LayerSpec(ranks, bf, cfg.solver.config(alpha=cell.alpha, seed=cell.seed))
    return solve_chem_nmf(y, spec)


def run_cell(dataset: Dataset, cfg: ExperimentConfig, cell: Cell, out_dir: Path):
    """Execute one grid cell and write its per-run artifacts."""
    y = dataset.y
    if cell.noise_db is not None:
        y = add_gaussian_noise_snr(y, cell.noise_db, _noise_stream(cell.seed, cell.noise_db))
    started = time.perf_counter()
    result = _factorize_cell(y, cfg, cell)
    labels = kmeans(
        result.activation,
        dataset.truth.k,
        seed=cell.seed,
        restarts=cfg.kmeans.restarts,
        max_iter=cfg.kmeans.max_iter,
    )
    report = evaluate_clustering(labels, dataset.truth)
    ms = int(round(1000.0 * (time.perf_counter() - started)))

    run_dir = out_dir / "runs" / cell.run_id()
    run_dir.mkdir(parents=True, exist_ok=True)
    emit_loss_curves(result, run_dir / "loss_curves.csv")
    emit_barrier_report(layer_barriers(result, cfg.barriers), run_dir / "barriers.json")

    row = ResultRow(
        method=cell.method,
        bf=cell.bf,
        alpha=cell.alpha,
        noise_db=cell.noise_db,
        seed=cell.seed,
        acc=report.acc,
        nmi=report.nmi,
        final_divergence=result.final_divergence,
        iterations=sum(layer.trace.iterations_run for layer in result.layers),
        ms=ms,
    )
    if not np.isfinite(row.final_divergence):
        raise NumericError(f"cell {cell} produced a non-finite divergence")
    return row


def run_experiment(
    cfg: ExperimentConfig, workers: int = 1, log=None
) -> list[ResultRow]:
    """Run the full sweep and write results.csv plus per-run artifacts.

    Cells execute independently (optionally in parallel); the aggregate is
    written once at the end via write-then-rename, so a failed sweep leaves
    no partial results.csv behind.
    """
    if workers < 1:
        raise ConfigurationError(f"workers must be >= 1, got {workers}")
    sources, kind, stft_cfg = load_manifest(cfg.manifest)
    dataset = assemble_dataset(sources, kind, stft_cfg)
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cells = expand_cells(cfg)
    if log:
        log(f"running {len(cells)} cells on dataset {dataset.y.shape} "
            f"with k={dataset.truth.k}")

    if workers == 1:
        rows = [run_cell(dataset, cfg, cell, out_dir) for cell in cells]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda c: run_cell(dataset, cfg, c, out_dir), cells))

    target = out_dir / "results.csv"
    tmp = out_dir / ".results.csv.tmp"
    lines = [RESULTS_HEADER] + [row.csv_line() for row in rows]
    tmp.write_text("\n".join(lines) + "\n", encoding="ascii")
    os.replace(tmp, target)
    if log:
        log(f"wrote {target}")
    return rows


def emit_loss_curves(result: MultiLayerResult, path) -> None:
    """Per-iteration divergence CSV, layers concatenated in order.

    Columns: layer, iteration, divergence, is_final_of_layer. Divergence is
    non-increasing within each layer; exactly one row per layer is final.
    """
    if not result.layers:
        raise ConfigurationError("result has no layers")
    lines = ["layer,iteration,divergence,is_final_of_layer"]
    for depth, layer in enumerate(result.layers, start=1):
        total = len(layer.trace.divergences)
        for i, value in enumerate(layer.trace.divergences, start=1):
            flag = "1" if i == total else "0"
            lines.append(f"{depth},{i},{float(value)!r},{flag}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def barrier_payload(report: LayerBarrierReport) -> dict:
    """JSON-ready view of a barrier report (shared with the service)."""
    payload = {
        "beta": report.beta,
        "z": report.z,
        "layers": [
            {
                "max_divergence": layer.max_divergence,
                "final_divergence": layer.final_divergence,
                "barrier": layer.barrier,
                "escape_probability": layer.escape_probability,
            }
            for layer in report.layers
        ],
        "cumulative_barrier": report.cumulative_barrier,
        "monotone_non_increasing": None,
        "monotone_suffix_start": None,
    }
    if len(report.layers) >= 2:
        mono = monotone_escape_check(report)
        payload["monotone_non_increasing"] = list(mono.non_increasing)
        payload["monotone_suffix_start"] = mono.suffix_start
    return payload


def emit_barrier_report(report: LayerBarrierReport, path) -> None:
    """Write the barrier report as JSON; float values round-trip exactly."""
    if not report.layers:
        raise ConfigurationError("barrier report has no layers")
    Path(path).write_text(
        json.dumps(barrier_payload(report), indent=2) + "\n", encoding="ascii"
    )
