"""Local pixel dissimilarity for the square-difference and cosine metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import IsolatedPixel, RoleViolation

TWO_PI = 2.0 * math.pi

# N, S, W, E offsets; diagonals are never neighbours
OFFSETS = ((-1, 0), (1, 0), (0, -1), (0, 1))


class MetricKind(str, Enum):
    SQUARE_DIFFERENCE = "square_difference"
    COSINE = "cosine"


class BiasPolicy(str, Enum):
    UNBIASED = "unbiased"
    TRAINING_BOOST = "training_boost"


@dataclass(frozen=True)
class MetricSpec:
    """Which dissimilarity to use and how neighbours are weighted.

    With ``TRAINING_BOOST`` a Training neighbour carries weight ``beta``
    and every other neighbour weight 1. Under ``COSINE`` pixel values are
    angles in radians.
    """

    kind: MetricKind = MetricKind.SQUARE_DIFFERENCE
    bias_policy: BiasPolicy = BiasPolicy.UNBIASED
    beta: float = 3.0

    def __post_init__(self):
        object.__setattr__(self, "kind", MetricKind(self.kind))
        object.__setattr__(self, "bias_policy", BiasPolicy(self.bias_policy))
        if not self.beta >= 1.0:
            raise ValueError(f"beta must be >= 1, got {self.beta}")

    @property
    def is_cosine(self):
        return self.kind is MetricKind.COSINE

    def weight(self, training_neighbour: bool) -> float:
        if training_neighbour and self.bias_policy is BiasPolicy.TRAINING_BOOST:
            return float(self.beta)
        return 1.0

    def value_span(self):
        """Range the candidate value set is stretched over for this metric."""
        return TWO_PI if self.is_cosine else 1.0


@dataclass(frozen=True)
class NeighbourView:
    """A pixel value with its 2-4 edge-adjacent neighbours and their weights."""

    center: float
    values: tuple
    biases: tuple
    training: tuple = ()

    @classmethod
    def of(cls, center, values, biases=None):
        values = tuple(float(v) for v in values)
        biases = (1.0,) * len(values) if biases is None else tuple(float(b) for b in biases)
        if len(biases) != len(values):
            raise ValueError("one bias per neighbour")
        return cls(float(center), values, biases)

    def with_center(self, p):
        return NeighbourView(float(p), self.values, self.biases, self.training)


def _checked(nv):
    if len(nv.values) == 0:
        raise IsolatedPixel("pixel has no neighbours")
    b = np.asarray(nv.biases, dtype=np.float64)
    if not b.sum() > 0:
        raise ValueError("neighbour biases must have a positive sum")
    return np.asarray(nv.values, dtype=np.float64), b


def square_difference(nv: NeighbourView) -> float:
    """Bias-weighted mean of squared differences between a pixel and its neighbours."""
    p, b = _checked(nv)
    return float(np.dot(b, (nv.center - p) ** 2) / b.sum())


def cosine_dissimilarity(nv: NeighbourView) -> float:
    """Negated bias-weighted mean cosine of the angle between pixel and neighbours."""
    p, b = _checked(nv)
    return float(-np.dot(b, np.cos(nv.center - p)) / b.sum())


def evaluate(nv: NeighbourView, m: MetricSpec) -> float:
    return cosine_dissimilarity(nv) if m.is_cosine else square_difference(nv)


def neighbour_view(g, r: int, c: int, m: MetricSpec) -> NeighbourView:
    """Build the neighbour view of pixel ``(r, c)`` with role-derived biases."""
    rows, cols = g.shape
    vals, biases, roles = [], [], []
    for dr, dc in OFFSETS:
        rr, cc = r + dr, c + dc
        if 0 <= rr < rows and 0 <= cc < cols:
            t = bool(g.training[rr, cc])
            vals.append(float(g.values[rr, cc]))
            biases.append(m.weight(t))
            roles.append(t)
    center = float(g.values[r, c])
    if m.is_cosine:
        center = center % TWO_PI
        vals = [v % TWO_PI for v in vals]
    return NeighbourView(center, tuple(vals), tuple(biases), tuple(roles))


def delta_d(g, at, candidate: float, m: MetricSpec) -> float:
    """Change in the pixel's own dissimilarity if its value became ``candidate``.

    Neighbours are held fixed; only the chosen pixel's own D is compared.
    """
    r, c = at
    if g.training[r, c]:
        raise RoleViolation(f"pixel {at} is a Training pixel")
    nv = neighbour_view(g, r, c, m)
    current = float(g.values[r, c])
    if candidate == current:
        return 0.0
    return evaluate(nv.with_center(candidate), m) - evaluate(nv.with_center(current), m)


def neighbour_table(g, m: MetricSpec, pixels):
    """Flat neighbour indices and weights for each pixel in ``pixels``.

    ``pixels`` are flat (row-major) indices. Returns ``(idx, w)`` of shape
    ``(len(pixels), 4)``; missing neighbours have index -1 and weight 0.
    """
    rows, cols = g.shape
    pixels = np.asarray(pixels, dtype=np.int64)
    r, c = np.divmod(pixels, cols)
    train = g.training.ravel()
    idx = np.full((pixels.size, 4), -1, dtype=np.int64)
    w = np.zeros((pixels.size, 4), dtype=np.float64)
    boost = m.bias_policy is BiasPolicy.TRAINING_BOOST
    for k, (dr, dc) in enumerate(OFFSETS):
        rr, cc = r + dr, c + dc
        ok = (rr >= 0) & (rr < rows) & (cc >= 0) & (cc < cols)
        nb = rr * cols + cc
        idx[ok, k] = nb[ok]
        w[ok, k] = 1.0
        if boost:
            hit = ok.copy()
            hit[ok] = train[nb[ok]]
            w[hit, k] = m.beta
    return idx, w


def local_dissimilarity(g, m: MetricSpec) -> np.ndarray:
    """Per-pixel D for every pixel of the grid (vectorized)."""
    pixels = np.arange(g.values.size)
    idx, w = neighbour_table(g, m, pixels)
    flat = g.values.ravel()
    nb = np.where(idx >= 0, flat[np.maximum(idx, 0)], 0.0)
    diff = flat[:, None] - nb
    terms = -np.cos(diff) if m.is_cosine else diff**2
    return ((w * terms).sum(axis=1) / w.sum(axis=1)).reshape(g.shape)


def total_energy(g, m: MetricSpec) -> float:
    """Sum of each Inference pixel's own dissimilarity."""
    return float(local_dissimilarity(g, m)[g.inference].sum())
