"""Command-line entry point: ``iini <subcommand> [--config FILE] [--set key=value ...]``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import io
from .errors import ConfigError, IINIError
from .grid import recommend_pixel_size, segment
from .oracle import holdout_rmse, idw_baseline
from .pipeline import (
    RunConfig,
    experiment_annealing,
    experiment_bias,
    experiment_resolution,
    prepare_grid,
    run,
    write_metrics_csv,
)

log = logging.getLogger("iini")


def _overrides(pairs):
    out = {}
    for item in pairs or ():
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def load_config(args) -> RunConfig:
    """Config file keys first, then ``--set`` pairs, then dedicated flags."""
    mapping = io.read_config(args.config) if args.config else {}
    mapping.update(_overrides(args.set))
    for key in ("input", "output_dir", "seed", "holdout"):
        value = getattr(args, key, None)
        if value is not None:
            mapping[key] = value
    return RunConfig.from_mapping(mapping)


def _common(p):
    p.add_argument("input", nargs="?", help="scatter CSV with header x,y,value")
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key (repeatable)")
    p.add_argument("-o", "--output-dir", dest="output_dir")
    p.add_argument("--seed", type=int)


def build_parser():
    parser = argparse.ArgumentParser(prog="iini", description="Interacting immediate neighbour interpolation.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log pipeline stages to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("interpolate", help="grid, anneal, relax and export one dataset")
    _common(p)
    p.add_argument("--holdout", help="withheld x,y,value CSV scored after the run")

    p = sub.add_parser("validate", help="score the interpolation and an IDW baseline on withheld points")
    _common(p)
    p.add_argument("--holdout", required=True)
    p.add_argument("--idw-power", type=float, default=2.0)

    p = sub.add_parser("grid-info", help="print the recommended pixel size and grid layout")
    _common(p)

    exp = sub.add_parser("experiment", help="parameter studies")
    esub = exp.add_subparsers(dest="study", required=True)
    p = esub.add_parser("resolution", help="one run per cell size")
    _common(p)
    p.add_argument("--cell-sizes", type=float, nargs="+", default=[])
    p.add_argument("--factors", type=float, nargs="+", default=[], help="multiples of the recommended pixel size")
    p = esub.add_parser("annealing", help="one run per decay constant plus difference grids")
    _common(p)
    p.add_argument("--decay", type=float, nargs="+", default=[1.15, 1e5])
    p = esub.add_parser("bias", help="unbiased and Training-boosted runs")
    _common(p)
    return parser


def _print_report(report, stream):
    stream.write(report.to_text())


def cmd_interpolate(args, cfg):
    _print_report(run(cfg), sys.stdout)


def cmd_validate(args, cfg):
    report = run(cfg)
    withheld = io.read_scatter_csv(cfg.holdout)
    scatter = io.read_scatter_csv(cfg.input, area_hint=cfg.area_hint, regularity=cfg.regularity)
    idw = holdout_rmse(idw_baseline(scatter, report.grid, args.idw_power), withheld)
    path = Path(cfg.output_dir) / "metrics.csv"
    write_metrics_csv(path, [("iini", report.validation), ("idw", idw)])
    sys.stdout.write(path.read_text(encoding="utf-8"))


def cmd_grid_info(args, cfg):
    scatter, raw, cell = prepare_grid(cfg)
    seg = segment(raw)
    lines = [
        f"points = {len(scatter)}",
        f"area = {scatter.area!r}",
        f"regularity = {scatter.regularity.value}",
        f"recommended_cell_size = {recommend_pixel_size(scatter)!r}" if len(scatter) > 1 else "recommended_cell_size = nan",
        f"cell_size = {cell!r}",
        f"rows = {raw.rows}",
        f"cols = {raw.cols}",
        f"origin = {raw.origin[0]!r},{raw.origin[1]!r}",
        f"n_training = {int(raw.training.sum())}",
        f"n_infer = {raw.n_infer}",
        f"coverage = {raw.coverage!r}",
        f"segments = {seg.segment_count}",
    ]
    sys.stdout.write("\n".join(lines) + "\n")


def cmd_experiment(args, cfg):
    if args.study == "resolution":
        sizes = list(args.cell_sizes)
        if args.factors:
            scatter, _, _ = prepare_grid(cfg)
            base = recommend_pixel_size(scatter)
            sizes += [base * f for f in args.factors]
        reports = experiment_resolution(cfg, sizes)
        for size, rep in zip(sizes, reports):
            sys.stdout.write(f"cell_size = {size!r} rows = {rep.rows} cols = {rep.cols} std = {rep.stats_all['std']!r}\n")
    elif args.study == "annealing":
        reports, diffs = experiment_annealing(cfg, args.decay)
        for (i, j), d in diffs.items():
            sys.stdout.write(f"difference_{i}_{j}.max_abs = {float(abs(d).max())!r}\n")
    else:
        plain, boosted = experiment_bias(cfg)
        for name, rep in (("unbiased", plain), ("biased", boosted)):
            sys.stdout.write(f"{name}.std = {rep.stats_all['std']!r} {name}.mean = {rep.stats_all['mean']!r}\n")


COMMANDS = {
    "interpolate": cmd_interpolate,
    "validate": cmd_validate,
    "grid-info": cmd_grid_info,
    "experiment": cmd_experiment,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        cfg = load_config(args)
        COMMANDS[args.command](args, cfg)
    except (IINIError, ValueError, OSError) as exc:
        print(f"iini: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
