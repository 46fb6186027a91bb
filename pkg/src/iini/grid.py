"""Grid data model: gridding scattered points, normalization and initialization.

Row index 0 of every grid is the southernmost row, so cell ``(r, c)`` has its
centre at ``(x0 + (c + 0.5) * cell_size, y0 + (r + 0.5) * cell_size)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
from scipy import ndimage

from . import rng
from .errors import DegenerateExtent, DegenerateRange, GridTooLarge, IINIError

DEFAULT_MAX_CELLS = 10**8


class Regularity(str, Enum):
    REGULAR = "regular"
    IRREGULAR = "irregular"


DISTRIBUTION_CONSTANT = {Regularity.REGULAR: 0.5, Regularity.IRREGULAR: 0.25}


@dataclass(frozen=True)
class ScatterSet:
    """Scattered measurements ``(x, y, value)``.

    ``area_hint`` overrides the bounding-box area when estimating a pixel
    size, since a survey area may exceed the hull of its points.
    """

    x: np.ndarray
    y: np.ndarray
    v: np.ndarray
    area_hint: float | None = None
    regularity: Regularity = Regularity.IRREGULAR

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64).ravel()
        y = np.asarray(self.y, dtype=np.float64).ravel()
        v = np.asarray(self.v, dtype=np.float64).ravel()
        if not (x.size == y.size == v.size):
            raise ValueError("x, y and v must have the same length")
        if x.size < 1:
            raise ValueError("a scatter set needs at least one point")
        if not (np.isfinite(x).all() and np.isfinite(y).all() and np.isfinite(v).all()):
            raise ValueError("scatter coordinates and values must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "regularity", Regularity(self.regularity))

    @classmethod
    def from_points(cls, points, **kwargs):
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        return cls(pts[:, 0], pts[:, 1], pts[:, 2], **kwargs)

    def __len__(self):
        return self.x.size

    @property
    def bounds(self):
        return (self.x.min(), self.y.min(), self.x.max(), self.y.max())

    @property
    def area(self):
        if self.area_hint is not None:
            return float(self.area_hint)
        xmin, ymin, xmax, ymax = self.bounds
        return float((xmax - xmin) * (ymax - ymin))


@dataclass(frozen=True)
class NormParams:
    v_min_train: float
    v_max_train: float

    def __post_init__(self):
        if not self.v_max_train > self.v_min_train:
            raise DegenerateRange(
                f"v_max_train ({self.v_max_train}) must exceed v_min_train ({self.v_min_train})"
            )

    @property
    def span(self):
        return self.v_max_train - self.v_min_train


@dataclass
class PixelGrid:
    """Dense grid of pixel values with a Training/Inference role mask.

    ``training`` is a boolean array; ``True`` marks observed (Training)
    cells, ``False`` marks cells to be inferred. Uninitialized Inference
    cells hold NaN. ``norm`` is ``None`` while values are in raw
    measurement units.
    """

    values: np.ndarray
    training: np.ndarray
    cell_size: float = 1.0
    origin: tuple[float, float] = (0.0, 0.0)
    norm: NormParams | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.training = np.asarray(self.training, dtype=bool)
        if self.values.ndim != 2 or self.values.shape != self.training.shape:
            raise ValueError(
                f"values {self.values.shape} and roles {self.training.shape} must be equal 2-D shapes"
            )
        if self.cell_size <= 0:
            raise ValueError("cell_size must be positive")

    @property
    def shape(self):
        return self.values.shape

    @property
    def rows(self):
        return self.values.shape[0]

    @property
    def cols(self):
        return self.values.shape[1]

    @property
    def inference(self):
        return ~self.training

    @property
    def n_infer(self):
        return int(self.inference.sum())

    @property
    def coverage(self):
        return float(self.training.mean())

    def copy(self, **changes):
        out = replace(self, values=self.values.copy(), training=self.training.copy())
        return replace(out, **changes) if changes else out

    def cell_centres(self):
        """Return ``(xc, yc)`` arrays of cell-centre coordinates."""
        x0, y0 = self.origin
        xc = x0 + (np.arange(self.cols) + 0.5) * self.cell_size
        yc = y0 + (np.arange(self.rows) + 0.5) * self.cell_size
        return np.meshgrid(xc, yc)

    def locate(self, x, y):
        """Row/column indices of the cells holding points; -1 where outside."""
        x0, y0 = self.origin
        c = np.floor((np.asarray(x, dtype=np.float64) - x0) / self.cell_size).astype(np.int64)
        r = np.floor((np.asarray(y, dtype=np.float64) - y0) / self.cell_size).astype(np.int64)
        outside = (r < 0) | (r >= self.rows) | (c < 0) | (c >= self.cols)
        r[outside] = -1
        c[outside] = -1
        return r, c


@dataclass(frozen=True)
class ValueSet:
    """Discrete candidate values ``(n + 1/2) * epsilon_p`` below 1, n = 0, 1, ...

    ``span`` rescales the set, e.g. ``2*pi`` to draw angles for the cosine
    metric; the plain set uses ``span = 1``.
    """

    epsilon_p: float
    span: float = 1.0
    values: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        eps = float(self.epsilon_p)
        if not 0.0 < eps < 1.0:
            raise ValueError(f"epsilon_p must lie in (0, 1), got {eps}")
        n = np.arange(int(math.floor(1.0 / eps)) + 2)
        members = (n + 0.5) * eps
        members = members[members < 1.0]
        object.__setattr__(self, "values", members * self.span)

    def __len__(self):
        return self.values.size

    def snap(self, p):
        """Nearest member of the set (lower member on exact ties)."""
        p = np.asarray(p, dtype=np.float64)
        scaled = p / (self.span * self.epsilon_p) - 0.5
        n = np.clip(np.ceil(scaled - 0.5), 0, len(self) - 1).astype(np.int64)
        return self.values[n]


@dataclass(frozen=True)
class SegmentMap:
    labels: np.ndarray
    segment_count: int

    SENTINEL = -1

    def members(self, label):
        return np.nonzero(self.labels == label)


def recommend_pixel_size(s: ScatterSet) -> float:
    """Pixel size from point density, ``c * sqrt(A / N)``.

    ``c`` is 0.5 for regularly distributed points and 0.25 for irregular
    ones; ``A`` is ``s.area_hint`` or the bounding-box area.
    """
    if len(s) < 2:
        raise ValueError("need at least two points to estimate a pixel size")
    area = s.area
    if not area > 0:
        raise DegenerateExtent(f"survey area must be positive, got {area}")
    return DISTRIBUTION_CONSTANT[s.regularity] * math.sqrt(area / len(s))


def _axis_layout(lo, hi, cell_size):
    width = hi - lo
    n = int(math.floor(width / cell_size + 1e-9)) + 1
    pad = 0.5 * (n * cell_size - width)
    return n, lo - pad


def rasterize(s: ScatterSet, cell_size: float, bounds=None, max_cells: int = DEFAULT_MAX_CELLS) -> PixelGrid:
    """Bin scattered points into a raw grid.

    Cells holding at least one point become Training with the mean of their
    values; all other cells are Inference (NaN). Without ``bounds`` the grid
    is laid out so that it covers the bounding box of the points with an
    integer number of cells, padded symmetrically; extreme points land on
    cell centres when the box width is a multiple of ``cell_size``. With
    ``bounds = (xmin, ymin, xmax, ymax)`` the grid starts at ``(xmin, ymin)``
    and spans the box exactly (rounded up to whole cells).
    """
    if not cell_size > 0:
        raise ValueError("cell_size must be positive")
    if bounds is None:
        xmin, ymin, xmax, ymax = s.bounds
        cols, x0 = _axis_layout(xmin, xmax, cell_size)
        rows, y0 = _axis_layout(ymin, ymax, cell_size)
    else:
        xmin, ymin, xmax, ymax = map(float, bounds)
        if not (xmax > xmin and ymax > ymin):
            raise DegenerateExtent(f"empty bounds {bounds}")
        cols = max(1, math.ceil((xmax - xmin) / cell_size - 1e-9))
        rows = max(1, math.ceil((ymax - ymin) / cell_size - 1e-9))
        x0, y0 = xmin, ymin
    if rows * cols > max_cells:
        raise GridTooLarge(f"{rows}x{cols} grid exceeds the cap of {max_cells} cells")

    c = np.clip(np.floor((s.x - x0) / cell_size).astype(np.int64), 0, cols - 1)
    r = np.clip(np.floor((s.y - y0) / cell_size).astype(np.int64), 0, rows - 1)
    if bounds is not None:
        inside = (s.x >= xmin) & (s.x <= xmax) & (s.y >= ymin) & (s.y <= ymax)
        r, c, v = r[inside], c[inside], s.v[inside]
    else:
        v = s.v
    flat = r * cols + c
    # sum in a canonical order so the result does not depend on input order
    order = np.lexsort((v, flat))
    flat, v = flat[order], v[order]
    counts = np.bincount(flat, minlength=rows * cols)
    sums = np.bincount(flat, weights=v, minlength=rows * cols)
    training = counts > 0
    values = np.full(rows * cols, np.nan)
    values[training] = sums[training] / counts[training]
    return PixelGrid(
        values.reshape(rows, cols),
        training.reshape(rows, cols),
        cell_size=float(cell_size),
        origin=(float(x0), float(y0)),
    )


def normalize(g: PixelGrid) -> tuple[PixelGrid, NormParams]:
    """Min-max scale Training values into [0, 1] using Training extrema."""
    train = g.values[g.training]
    if train.size == 0 or not np.isfinite(train).all():
        raise DegenerateRange("normalization needs finite Training values")
    lo, hi = float(train.min()), float(train.max())
    if not hi > lo:
        raise DegenerateRange(f"all Training values equal {lo}; nothing to normalize against")
    norm = NormParams(lo, hi)
    values = g.values.copy()
    values[g.training] = (train - lo) / (hi - lo)
    return g.copy(values=values, norm=norm), norm


def denormalize(g: PixelGrid) -> np.ndarray:
    """Map normalized values back to measurement units."""
    if g.norm is None:
        raise IINIError("grid carries no normalization parameters")
    return g.values * g.norm.span + g.norm.v_min_train


def initialize_inference(g: PixelGrid, vs: ValueSet, seed: int) -> PixelGrid:
    """Give every Inference pixel an independent uniform draw from ``vs``."""
    if len(vs) == 0:
        raise ValueError("empty value set")
    out = g.copy()
    mask = g.inference
    n = int(mask.sum())
    if n:
        idx = rng.stream(seed, rng.INIT_STREAM).integers(0, len(vs), size=n)
        out.values[mask] = vs.values[idx]
    return out


def segment(g: PixelGrid) -> SegmentMap:
    """Label 4-connected components of Inference pixels; Training pixels are walls."""
    labels, count = ndimage.label(g.inference)
    labels = labels.astype(np.int64) - 1
    return SegmentMap(labels, int(count))
