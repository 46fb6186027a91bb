"""End-to-end orchestration: ingest, grid, normalize, initialize, anneal, relax, export, validate."""

from __future__ import annotations

import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import io, rng
from .annealer import DEFAULT_MAX_CHECKPOINTS, DEFAULT_T_START, AnnealSchedule, run_annealing
from .dissimilarity import TWO_PI, MetricSpec
from .errors import ConfigError
from .grid import (
    DEFAULT_MAX_CELLS,
    NormParams,
    PixelGrid,
    ValueSet,
    denormalize,
    initialize_inference,
    normalize,
    rasterize,
    recommend_pixel_size,
    segment,
)
from .oracle import holdout_rmse
from .relax import RelaxConfig, RelaxMode, relax, relax_unconditional

log = logging.getLogger(__name__)

HISTOGRAM_BINS = 64
STAGES = ("ingest", "grid", "normalize", "initialize", "anneal", "relax", "denormalize", "export", "validate")

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _parse_bool(v):
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in _TRUE:
        return True
    if s in _FALSE:
        return False
    raise ConfigError(f"not a boolean: {v!r}")


@dataclass
class RunConfig:
    input: str | None = None
    output_dir: str = "iini_out"
    cell_size: float | str = "auto"
    regularity: str = "irregular"
    area_hint: float | None = None
    max_cells: int = DEFAULT_MAX_CELLS
    metric: str = "square_difference"
    bias: str = "unbiased"
    beta: float = 3.0
    t_start: float = DEFAULT_T_START
    decay_a: float = 1.15
    epsilon_p: float = 1.0 / 50.0
    min_checkpoints: int = 0
    seed: int = 0
    max_checkpoints: int = DEFAULT_MAX_CHECKPOINTS
    parallel_segments: bool = False
    relax_mode: str = "conditional"
    relax_tolerance: float = 1e-9
    max_sweeps: int = 10_000
    early_relax_after: int | None = None
    unconditional_passes: str = "converge"
    holdout: str | None = None
    emit_ascii_grid: bool = True
    emit_csv: bool = False
    emit_heatmap_png: bool = False
    emit_histogram_csv: bool = True
    emit_checkpoint_log: bool = True

    @classmethod
    def from_mapping(cls, mapping):
        """Build a config from string-valued keys (config file or ``--set`` flags)."""
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, raw in mapping.items():
            key = key.strip()
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            kwargs[key] = raw
        cfg = cls()
        for key, raw in kwargs.items():
            setattr(cfg, key, raw)
        return cfg.validated()

    def validated(self):
        """Coerce string values and check ranges before any compute."""
        c = replace(self)
        try:
            if str(c.cell_size).strip().lower() != "auto":
                c.cell_size = float(c.cell_size)
                if not c.cell_size > 0:
                    raise ConfigError("cell_size must be positive or 'auto'")
            else:
                c.cell_size = "auto"
            c.area_hint = None if c.area_hint in (None, "", "none") else float(c.area_hint)
            c.max_cells = int(c.max_cells)
            c.beta = float(c.beta)
            c.t_start = float(c.t_start)
            c.decay_a = float(c.decay_a)
            c.epsilon_p = float(c.epsilon_p)
            c.min_checkpoints = int(c.min_checkpoints)
            c.seed = int(c.seed)
            c.max_checkpoints = int(c.max_checkpoints)
            c.relax_tolerance = float(c.relax_tolerance)
            c.max_sweeps = int(c.max_sweeps)
            if c.early_relax_after in ("", "none"):
                c.early_relax_after = None
            if c.early_relax_after is not None:
                c.early_relax_after = int(c.early_relax_after)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        for name in ("parallel_segments", "emit_ascii_grid", "emit_csv", "emit_heatmap_png",
                     "emit_histogram_csv", "emit_checkpoint_log"):
            setattr(c, name, _parse_bool(getattr(c, name)))
        c.regularity = str(c.regularity).strip().lower()
        c.metric = str(c.metric).strip().lower()
        c.bias = str(c.bias).strip().lower()
        c.relax_mode = str(c.relax_mode).strip().lower()
        c.unconditional_passes = str(c.unconditional_passes).strip().lower()
        if c.regularity not in ("regular", "irregular"):
            raise ConfigError(f"regularity must be regular|irregular, got {c.regularity!r}")
        if c.relax_mode not in ("conditional", "unconditional", "none"):
            raise ConfigError(f"relax_mode must be conditional|unconditional|none, got {c.relax_mode!r}")
        if c.unconditional_passes not in ("1", "converge"):
            raise ConfigError("unconditional_passes must be 1 or converge")
        if c.max_checkpoints < 0 or c.max_sweeps < 0:
            raise ConfigError("max_checkpoints and max_sweeps must be non-negative")
        if c.early_relax_after is not None and c.early_relax_after < 0:
            raise ConfigError("early_relax_after must be non-negative")
        if c.max_cells < 1:
            raise ConfigError("max_cells must be positive")
        try:
            c.metric_spec()
            c.schedule()
            c.relax_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return c

    def metric_spec(self):
        return MetricSpec(self.metric, self.bias, self.beta)

    def schedule(self):
        return AnnealSchedule(self.t_start, self.decay_a, self.epsilon_p, self.min_checkpoints)

    def relax_config(self):
        if self.relax_mode == "none":
            return None
        passes = None if self.unconditional_passes == "converge" else 1
        return RelaxConfig(self.relax_mode, self.relax_tolerance, self.max_sweeps, passes)

    def anneal_cap(self):
        if self.early_relax_after is None:
            return self.max_checkpoints
        return min(self.max_checkpoints, self.early_relax_after + 1)

    def echo(self):
        return {k: v for k, v in asdict(self).items()}


@dataclass
class Interpolation:
    initial: PixelGrid
    annealed: PixelGrid
    final: PixelGrid
    logs: dict
    relax_sweeps: int
    segment_count: int | None = None


def _thread_count():
    raw = os.environ.get("IINI_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise ConfigError(f"IINI_THREADS must be an integer, got {raw!r}") from None
    return os.cpu_count() or 1


def _subproblem(g: PixelGrid, labels, label):
    """Crop the bounding box of one segment plus a one-cell halo; other cells become frozen."""
    rr, cc = np.nonzero(labels == label)
    r0, r1 = max(rr.min() - 1, 0), min(rr.max() + 2, g.rows)
    c0, c1 = max(cc.min() - 1, 0), min(cc.max() + 2, g.cols)
    window = (slice(r0, r1), slice(c0, c1))
    mine = labels[window] == label
    sub = PixelGrid(g.values[window].copy(), ~mine, g.cell_size, g.origin, g.norm)
    return window, mine, sub


def interpolate(
    g: PixelGrid,
    metric: MetricSpec,
    schedule: AnnealSchedule,
    relax_cfg: RelaxConfig | None,
    seed: int,
    max_checkpoints: int = DEFAULT_MAX_CHECKPOINTS,
    parallel_segments: bool = False,
    initialized: bool = False,
    on_checkpoint=None,
) -> Interpolation:
    """Initialize, anneal and relax a normalized grid.

    With ``parallel_segments`` every 4-connected group of Inference pixels
    is annealed and relaxed as its own problem, with a seed derived from
    ``seed`` and the segment label, on a worker pool capped by
    ``IINI_THREADS``.
    """
    vs = ValueSet(schedule.epsilon_p, span=metric.value_span())
    initial = g if initialized else initialize_inference(g, vs, seed)
    if initial.n_infer == 0:
        final = initial.copy()
        if relax_cfg is not None and relax_cfg.mode is RelaxMode.UNCONDITIONAL:
            final = relax_unconditional(final, metric, relax_cfg)
        return Interpolation(initial, initial.copy(), final, {}, 0)

    if not parallel_segments:
        annealed, anneal_log = run_annealing(initial, metric, schedule, seed, max_checkpoints, on_checkpoint)
        logs = {None: anneal_log}
        final, sweeps = annealed, 0
        if relax_cfg is not None:
            final, sweeps, _ = relax(annealed, metric, relax_cfg)
        seg_count = None
    else:
        seg = segment(initial)
        annealed = initial.copy()
        final = initial.copy()
        logs = {}

        def work(label):
            window, mine, sub = _subproblem(initial, seg.labels, label)
            sub_seed = rng.derive_seed(seed, label)
            a, lg = run_annealing(sub, metric, schedule, sub_seed, max_checkpoints)
            f, sw = a, 0
            if relax_cfg is not None:
                f, sw, _ = relax(a, metric, relax_cfg)
            return label, window, mine, a, f, lg, sw

        workers = min(_thread_count(), max(seg.segment_count, 1))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, range(seg.segment_count)))
        sweeps = 0
        for label, window, mine, a, f, lg, sw in results:
            annealed.values[window][mine] = a.values[mine]
            final.values[window][mine] = f.values[mine]
            logs[label] = lg
            sweeps = max(sweeps, sw)
        seg_count = seg.segment_count

    if relax_cfg is not None and relax_cfg.mode is RelaxMode.UNCONDITIONAL:
        final = relax_unconditional(final, metric, relax_cfg)
    return Interpolation(initial, annealed, final, logs, sweeps, seg_count)


def value_stats(values, bins=HISTOGRAM_BINS):
    v = np.asarray(values, dtype=np.float64)
    v = v[np.isfinite(v)]
    if v.size == 0:
        return {"count": 0, "min": math.nan, "max": math.nan, "mean": math.nan, "std": math.nan,
                "hist_counts": np.zeros(bins, dtype=np.int64), "hist_edges": np.zeros(bins + 1)}
    lo, hi = float(v.min()), float(v.max())
    counts, edges = np.histogram(v, bins=bins, range=(lo, hi) if hi > lo else (lo - 0.5, hi + 0.5))
    return {"count": int(v.size), "min": lo, "max": hi, "mean": float(v.mean()), "std": float(v.std()),
            "hist_counts": counts, "hist_edges": edges}


@dataclass
class RunReport:
    config: dict
    rows: int
    cols: int
    cell_size: float
    n_infer: int
    coverage: float
    segment_count: int | None
    checkpoint_logs: dict
    relax_sweeps: int
    stats_all: dict
    stats_inference: dict
    validation: object = None
    timings: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    output_values: np.ndarray | None = field(default=None, repr=False)
    grid: PixelGrid | None = field(default=None, repr=False)
    annealed: PixelGrid | None = field(default=None, repr=False)

    @property
    def checkpoint_log(self):
        if None in self.checkpoint_logs:
            return self.checkpoint_logs[None]
        return None

    def to_text(self):
        lines = []
        for k, v in self.config.items():
            lines.append(f"config.{k} = {v}")
        lines += [
            f"grid.rows = {self.rows}",
            f"grid.cols = {self.cols}",
            f"grid.cell_size = {self.cell_size!r}",
            f"grid.n_infer = {self.n_infer}",
            f"grid.coverage = {self.coverage!r}",
            f"grid.segment_count = {self.segment_count}",
        ]
        for label, lg in self.checkpoint_logs.items():
            tag = "anneal" if label is None else f"anneal.segment{label}"
            lines.append(f"{tag}.checkpoints = {len(lg)}")
            lines.append(f"{tag}.spacing = {lg.spacing}")
            lines.append(f"{tag}.converged = {lg.converged}")
            if len(lg):
                lines.append(f"{tag}.final_rmse = {lg[-1].rmse!r}")
        lines.append(f"relax.sweeps = {self.relax_sweeps}")
        for tag, st in (("stats.all", self.stats_all), ("stats.inference", self.stats_inference)):
            for key in ("count", "min", "max", "mean", "std"):
                lines.append(f"{tag}.{key} = {st[key]!r}")
        if self.validation is not None:
            lines.append(f"validation.rmse = {self.validation.rmse!r}")
            lines.append(f"validation.n_points = {self.validation.n_points}")
            lines.append(f"validation.skipped = {self.validation.skipped}")
        for stage, secs in self.timings.items():
            lines.append(f"time.{stage} = {secs:.6f}")
        return "\n".join(lines) + "\n"


def prepare_grid(cfg: RunConfig, scatter=None):
    """Ingest and grid the input; returns ``(scatter, raw_grid, cell_size)``."""
    if scatter is None:
        if not cfg.input:
            raise ConfigError("no input file configured")
        scatter = io.read_scatter_csv(cfg.input, area_hint=cfg.area_hint, regularity=cfg.regularity)
    cell = recommend_pixel_size(scatter) if cfg.cell_size == "auto" else float(cfg.cell_size)
    return scatter, rasterize(scatter, cell, max_cells=cfg.max_cells), cell


def normalize_for(metric: MetricSpec, raw: PixelGrid) -> PixelGrid:
    if metric.is_cosine:
        # angles keep their units; only canonicalize into [0, 2*pi)
        values = raw.values.copy()
        values[raw.training] %= TWO_PI
        return raw.copy(values=values, norm=NormParams(0.0, 1.0))
    g, _ = normalize(raw)
    return g


def run(cfg: RunConfig, scatter=None, write=True, on_checkpoint=None) -> RunReport:
    """Execute the whole pipeline for one configuration and write requested artifacts.

    ``scatter`` replaces reading ``cfg.input``. ``on_checkpoint`` is passed
    to the annealer (sequential mode only). The report keeps the normalized
    annealed and final grids for inspection.
    """
    cfg = cfg.validated()
    timings = {}
    t = time.perf_counter()

    def lap(stage):
        nonlocal t
        now = time.perf_counter()
        timings[stage] = now - t
        t = now
        log.info("stage %s done in %.3fs", stage, timings[stage])

    if scatter is None:
        if not cfg.input:
            raise ConfigError("no input file configured")
        if not Path(cfg.input).exists():
            raise ConfigError(f"input file not found: {cfg.input}")
        scatter = io.read_scatter_csv(cfg.input, area_hint=cfg.area_hint, regularity=cfg.regularity)
    if cfg.holdout and not Path(cfg.holdout).exists():
        raise ConfigError(f"holdout file not found: {cfg.holdout}")
    lap("ingest")
    scatter, raw, cell = prepare_grid(cfg, scatter)
    lap("grid")
    metric = cfg.metric_spec()
    g = normalize_for(metric, raw)
    lap("normalize")
    vs = ValueSet(cfg.epsilon_p, span=metric.value_span())
    initial = initialize_inference(g, vs, cfg.seed)
    lap("initialize")
    result = interpolate(
        initial, metric, cfg.schedule(), None, cfg.seed, cfg.anneal_cap(), cfg.parallel_segments,
        initialized=True, on_checkpoint=on_checkpoint,
    )
    lap("anneal")
    relax_cfg = cfg.relax_config()
    final, sweeps = result.annealed, 0
    if relax_cfg is not None:
        # zero checkpoints: only the relaxation stage of the core runs
        relaxed = interpolate(result.annealed, metric, cfg.schedule(), relax_cfg, cfg.seed, 0,
                              cfg.parallel_segments, initialized=True)
        final, sweeps = relaxed.final, relaxed.relax_sweeps
    lap("relax")
    out_values = denormalize(final)
    lap("denormalize")

    report = RunReport(
        config=cfg.echo(),
        rows=final.rows,
        cols=final.cols,
        cell_size=cell,
        n_infer=final.n_infer,
        coverage=final.coverage,
        segment_count=result.segment_count,
        checkpoint_logs=result.logs,
        relax_sweeps=sweeps,
        stats_all=value_stats(out_values),
        stats_inference=value_stats(out_values[final.inference]),
        output_values=out_values,
        grid=final,
        annealed=result.annealed,
    )
    if write:
        report.outputs = export(cfg, report)
    lap("export")
    if cfg.holdout:
        withheld = io.read_scatter_csv(cfg.holdout)
        report.validation = holdout_rmse(final, withheld)
        if write:
            path = Path(cfg.output_dir) / "metrics.csv"
            write_metrics_csv(path, [("iini", report.validation)])
            report.outputs["metrics"] = str(path)
    lap("validate")
    report.timings = timings
    if write:
        path = Path(cfg.output_dir) / "report.txt"
        path.write_text(report.to_text(), encoding="utf-8")
        report.outputs["report"] = str(path)
    return report


def write_metrics_csv(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("method,rmse,n_points,skipped\n")
        for method, score in rows:
            fh.write(f"{method},{score.rmse!r},{score.n_points},{score.skipped}\n")


def export(cfg: RunConfig, report: RunReport):
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    g, values = report.grid, report.output_values
    written = {}
    if cfg.emit_ascii_grid:
        path = out / "interpolated.asc"
        io.write_pixel_grid(path, values, g)
        written["ascii_grid"] = str(path)
    if cfg.emit_csv:
        path = out / "interpolated.csv"
        io.write_grid_csv(path, values, g)
        written["csv"] = str(path)
    if cfg.emit_heatmap_png:
        path = out / "interpolated.png"
        io.write_heatmap_png(path, values, report.stats_all["min"], report.stats_all["max"])
        written["heatmap_png"] = str(path)
    if cfg.emit_histogram_csv:
        path = out / "histogram.csv"
        io.write_histogram_csv(path, report.stats_all["hist_counts"], report.stats_all["hist_edges"])
        written["histogram_csv"] = str(path)
        path = out / "histogram_inference.csv"
        io.write_histogram_csv(path, report.stats_inference["hist_counts"], report.stats_inference["hist_edges"])
        written["histogram_inference_csv"] = str(path)
    if cfg.emit_checkpoint_log:
        for label, lg in report.checkpoint_logs.items():
            name = "checkpoint_log.csv" if label is None else f"checkpoint_log_segment{label}.csv"
            (out / name).write_text(lg.to_csv(), encoding="utf-8")
            written.setdefault("checkpoint_log", []).append(str(out / name))
    return written


# parameter studies


def experiment_resolution(cfg: RunConfig, cell_sizes, scatter=None, write=True):
    """One run per cell size with a shared seed; writes ``resolution_comparison.csv``."""
    cell_sizes = [float(c) for c in cell_sizes]
    if not cell_sizes:
        raise ConfigError("experiment resolution needs at least one cell size")
    if any(c <= 0 for c in cell_sizes):
        raise ConfigError("cell sizes must be positive")
    reports = []
    for c in cell_sizes:
        sub = replace(cfg, cell_size=c, output_dir=str(Path(cfg.output_dir) / f"cell_{c:g}"))
        reports.append(run(sub, scatter=scatter, write=write))
    if write:
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "resolution_comparison.csv", "w", encoding="utf-8") as fh:
            fh.write("cell_size,rows,cols,coverage,std_all,std_inference\n")
            for c, r in zip(cell_sizes, reports):
                fh.write(f"{c!r},{r.rows},{r.cols},{r.coverage!r},{r.stats_all['std']!r},{r.stats_inference['std']!r}\n")
    return reports


def experiment_annealing(cfg: RunConfig, decay_values, scatter=None, write=True):
    """Shared-seed runs per decay constant plus pairwise difference grids (denormalized units).

    Returns ``(reports, differences)`` where ``differences`` maps index
    pairs ``(i, j)`` to ``report_i - report_j`` arrays.
    """
    decay_values = [float(a) for a in decay_values]
    if len(decay_values) < 2:
        raise ConfigError("experiment annealing needs at least two decay values")
    if any(a <= 1 for a in decay_values):
        raise ConfigError("decay values must exceed 1")
    reports = []
    for i, a in enumerate(decay_values):
        sub = replace(cfg, decay_a=a, output_dir=str(Path(cfg.output_dir) / f"decay_{i}_{a:g}"))
        reports.append(run(sub, scatter=scatter, write=write))
    diffs = {}
    for i in range(len(reports)):
        for j in range(i + 1, len(reports)):
            d = reports[i].output_values - reports[j].output_values
            diffs[(i, j)] = d
            if write:
                g = reports[i].grid
                io.write_ascii_grid(Path(cfg.output_dir) / f"difference_{i}_{j}.asc", d, g.cell_size, g.origin)
    return reports, diffs


def experiment_bias(cfg: RunConfig, scatter=None, write=True):
    """Unbiased and Training-boosted runs sharing everything else; returns ``(unbiased, biased)``."""
    plain = replace(cfg, bias="unbiased", output_dir=str(Path(cfg.output_dir) / "unbiased"))
    boosted = replace(cfg, bias="training_boost", output_dir=str(Path(cfg.output_dir) / "biased"))
    return run(plain, scatter=scatter, write=write), run(boosted, scatter=scatter, write=write)
