"""Readers and writers for scattered CSV data, ESRI ASCII grids and run artifacts."""

from __future__ import annotations

import configparser
import csv
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .grid import PixelGrid, ScatterSet

NODATA = -9999.0
_HEADER_KEYS = ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "NODATA_value")


def read_scatter_csv(path, **kwargs) -> ScatterSet:
    """Read an ``x,y,value`` CSV with a header row."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip().lower() for h in next(reader)]
        except StopIteration:
            raise ConfigError(f"{path}: empty file") from None
        try:
            cols = [header.index(k) for k in ("x", "y", "value")]
        except ValueError:
            raise ConfigError(f"{path}: expected header x,y,value, got {','.join(header)}") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                rows.append([float(row[c]) for c in cols])
            except (ValueError, IndexError):
                raise ConfigError(f"{path}:{lineno}: malformed row {row!r}") from None
    if not rows:
        raise ConfigError(f"{path}: no data rows")
    return ScatterSet.from_points(rows, **kwargs)


def write_scatter_csv(path, s: ScatterSet):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("x,y,value\n")
        for x, y, v in zip(s.x, s.y, s.v):
            fh.write(f"{_fmt(x)},{_fmt(y)},{_fmt(v)}\n")


def _fmt(v):
    return repr(float(v))


def write_ascii_grid(path, values, cell_size, origin, nodata=NODATA):
    """Write a south-first 2-D array as an ESRI ASCII grid (rows written north to south).

    NaN cells are written as ``nodata``. Values use ``repr`` so a read
    returns the exact doubles.
    """
    values = np.asarray(values, dtype=np.float64)
    rows, cols = values.shape
    lines = [
        f"ncols {cols}",
        f"nrows {rows}",
        f"xllcorner {_fmt(origin[0])}",
        f"yllcorner {_fmt(origin[1])}",
        f"cellsize {_fmt(cell_size)}",
        f"NODATA_value {_fmt(nodata)}",
    ]
    for r in range(rows - 1, -1, -1):
        row = values[r]
        lines.append(" ".join(_fmt(nodata) if np.isnan(v) else _fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_ascii_grid(path):
    """Read an ESRI ASCII grid.

    Returns ``(values, header)`` where ``values`` is south-first with NODATA
    cells as NaN and ``header`` maps the six header keys to numbers.
    """
    with open(path, encoding="utf-8") as fh:
        header = {}
        for _ in range(6):
            key, val = fh.readline().split()
            header[key.lower()] = float(val)
        data = np.loadtxt(fh, dtype=np.float64, ndmin=2)
    missing = [k for k in _HEADER_KEYS if k.lower() not in header]
    if missing:
        raise ConfigError(f"{path}: missing header keys {missing}")
    rows, cols = int(header["nrows"]), int(header["ncols"])
    if data.shape != (rows, cols):
        raise ConfigError(f"{path}: expected {rows}x{cols} values, found {data.shape}")
    data = data[::-1].copy()
    data[data == header["nodata_value"]] = np.nan
    return data, header


def roles_path_for(path):
    path = Path(path)
    return path.with_name(path.stem + ".roles" + path.suffix)


def write_pixel_grid(path, values, g: PixelGrid):
    """Write ``values`` on the geometry of ``g`` plus a ``.roles`` sidecar (1 = Training)."""
    write_ascii_grid(path, values, g.cell_size, g.origin)
    write_ascii_grid(roles_path_for(path), g.training.astype(np.float64), g.cell_size, g.origin)


def read_pixel_grid(path, roles=None) -> PixelGrid:
    """Read a grid written by :func:`write_pixel_grid`; values stay in file units."""
    values, header = read_ascii_grid(path)
    roles = roles_path_for(path) if roles is None else Path(roles)
    if roles.exists():
        mask, _ = read_ascii_grid(roles)
        training = mask == 1
    else:
        training = np.zeros(values.shape, dtype=bool)
    return PixelGrid(
        values,
        training,
        cell_size=header["cellsize"],
        origin=(header["xllcorner"], header["yllcorner"]),
    )


def write_grid_csv(path, values, g: PixelGrid):
    xc, yc = g.cell_centres()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("x,y,value,role\n")
        for x, y, v, t in zip(xc.ravel(), yc.ravel(), np.asarray(values).ravel(), g.training.ravel()):
            fh.write(f"{_fmt(x)},{_fmt(y)},{_fmt(v)},{'training' if t else 'inference'}\n")


def write_histogram_csv(path, counts, edges):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("bin_lo,bin_hi,count\n")
        for lo, hi, n in zip(edges[:-1], edges[1:], counts):
            fh.write(f"{_fmt(lo)},{_fmt(hi)},{int(n)}\n")


HEATMAP_CMAP = "viridis"


def write_heatmap_png(path, values, vmin, vmax):
    """One pixel per grid cell, north up, fixed colormap; NaN cells are transparent."""
    from matplotlib import colormaps
    from matplotlib.image import imsave

    values = np.asarray(values, dtype=np.float64)[::-1]
    span = vmax - vmin if vmax > vmin else 1.0
    scaled = np.clip((values - vmin) / span, 0.0, 1.0)
    rgba = colormaps[HEATMAP_CMAP](np.nan_to_num(scaled))
    rgba[np.isnan(values), 3] = 0.0
    imsave(path, rgba)


def read_config(path) -> dict:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    text = Path(path).read_text(encoding="utf-8")
    parser = configparser.ConfigParser(
        delimiters=("=",), comment_prefixes=("#",), inline_comment_prefixes=("#",), interpolation=None
    )
    parser.optionxform = str
    try:
        parser.read_string("[run]\n" + text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return dict(parser["run"])
