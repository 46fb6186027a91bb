"""Closed-form local optima applied in sweeps (the finishing pass after annealing)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import _kernels
from .dissimilarity import NeighbourView, MetricSpec, neighbour_table, _checked
from .errors import DegenerateCircularMean, IsolatedPixel
from .grid import PixelGrid


class RelaxMode(str, Enum):
    CONDITIONAL = "conditional"
    UNCONDITIONAL = "unconditional"


@dataclass(frozen=True)
class RelaxConfig:
    """Sweep settings.

    ``unconditional_passes`` applies to the Training-pixel pass only: ``None``
    iterates it to ``tolerance``, an integer caps it at that many sweeps.
    """

    mode: RelaxMode = RelaxMode.CONDITIONAL
    tolerance: float = 1e-9
    max_sweeps: int = 10_000
    unconditional_passes: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "mode", RelaxMode(self.mode))
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_sweeps < 0:
            raise ValueError("max_sweeps must be non-negative")


def optimal_value_sq(nv: NeighbourView) -> float:
    """Bias-weighted mean of the neighbours; minimizes the square difference."""
    p, b = _checked(nv)
    return float(np.dot(b, p) / b.sum())


def optimal_value_cos(nv: NeighbourView) -> float:
    """Weighted circular mean of the neighbour angles, in [0, 2*pi).

    ``atan2`` picks the branch where the cosine dissimilarity is minimal
    rather than maximal.
    """
    p, b = _checked(nv)
    s = float(np.dot(b, np.sin(p)))
    c = float(np.dot(b, np.cos(p)))
    if math.hypot(s, c) <= 1e-12 * b.sum():
        raise DegenerateCircularMean(f"neighbour angles {nv.values} have a zero resultant")
    return math.atan2(s, c) % (2.0 * math.pi)


def _sweep(g: PixelGrid, m: MetricSpec, mask, tolerance, max_sweeps):
    out = g.copy()
    pix = np.flatnonzero(mask.ravel())
    if pix.size == 0 or max_sweeps == 0:
        return out, 0, 0.0
    idx, w = neighbour_table(out, m, pix)
    if (w.sum(axis=1) == 0).any():
        raise IsolatedPixel("1x1 grid has no neighbours")
    flat = out.values.reshape(-1)
    if m.is_cosine:
        flat %= 2.0 * math.pi
    sweeps, max_update, bad = _kernels.relax_sweeps(flat, pix, idx, w, m.is_cosine, tolerance, max_sweeps)
    if bad >= 0:
        r, c = divmod(int(pix[bad]), out.cols)
        raise DegenerateCircularMean(f"neighbours of pixel ({r}, {c}) have a zero circular resultant")
    return out, int(sweeps), float(max_update)


def relax(g: PixelGrid, m: MetricSpec, cfg: RelaxConfig = RelaxConfig()):
    """Conditional relaxation: Inference pixels replaced by their local optimum.

    Pixels are visited in row-major order and updated in place, so later
    pixels in a sweep see already-updated neighbours. Sweeps stop when the
    largest absolute update falls below ``cfg.tolerance`` or after
    ``cfg.max_sweeps``.

    Returns ``(grid, sweeps_used, final_max_update)``.
    """
    return _sweep(g, m, g.inference, cfg.tolerance, cfg.max_sweeps)


def relax_unconditional(g: PixelGrid, m: MetricSpec, cfg: RelaxConfig = RelaxConfig()) -> PixelGrid:
    """Recompute Training pixels from their neighbourhoods, Inference pixels frozen.

    Expects a grid that has already been relaxed conditionally. The role
    mask is left as is, so callers can still tell which cells were observed.
    """
    max_sweeps = cfg.max_sweeps if cfg.unconditional_passes is None else cfg.unconditional_passes
    out, _, _ = _sweep(g, m, g.training, cfg.tolerance, max_sweeps)
    return out
