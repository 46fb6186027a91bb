"""Independent reference solutions used to check the engine and to compare against it."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from . import _kernels
from .dissimilarity import MetricSpec, neighbour_table
from .errors import SolverFailure, TooLarge, UnconstrainedSegment
from .grid import PixelGrid, ScatterSet, ValueSet, denormalize, segment

MAX_BRUTE_PIXELS = 12
MAX_BRUTE_STATES = 10**8


@dataclass(frozen=True)
class LinearSystem:
    """Sparse triplet form of the per-Inference-pixel mean-value equations."""

    rows: np.ndarray
    cols: np.ndarray
    data: np.ndarray
    rhs: np.ndarray
    pixels: np.ndarray

    @property
    def dimension(self):
        return self.rhs.size

    def matrix(self):
        n = self.dimension
        return sparse.csc_matrix((self.data, (self.rows, self.cols)), shape=(n, n))


def assemble(g: PixelGrid, m: MetricSpec) -> LinearSystem:
    """One equation per Inference pixel: ``sum(b_i) p - sum_inference(b_i p_i) = sum_training(b_i v_i)``."""
    pix = np.flatnonzero(g.inference.ravel())
    slot = np.full(g.values.size, -1, dtype=np.int64)
    slot[pix] = np.arange(pix.size)
    idx, w = neighbour_table(g, m, pix)
    flat = g.values.ravel()
    rows = [np.arange(pix.size)]
    cols = [np.arange(pix.size)]
    data = [w.sum(axis=1)]
    rhs = np.zeros(pix.size)
    for j in range(4):
        nb = idx[:, j]
        present = nb >= 0
        unknown = present & (slot[np.maximum(nb, 0)] >= 0)
        known = present & ~unknown
        rows.append(np.nonzero(unknown)[0])
        cols.append(slot[nb[unknown]])
        data.append(-w[unknown, j])
        rhs[known] += w[known, j] * flat[nb[known]]
    return LinearSystem(np.concatenate(rows), np.concatenate(cols), np.concatenate(data), rhs, pix)


def solve_harmonic(g: PixelGrid, m: MetricSpec = MetricSpec()) -> PixelGrid:
    """Direct sparse solve for the square-difference fixed point with Training pixels held.

    Every Inference pixel ends up equal to the bias-weighted mean of its
    neighbours. Raises :class:`UnconstrainedSegment` when some connected
    group of Inference pixels touches no Training pixel.
    """
    if m.is_cosine:
        raise ValueError("the harmonic oracle covers the square-difference metric only")
    out = g.copy()
    if g.n_infer == 0:
        return out
    seg = segment(g)
    padded = np.pad(g.training, 1)
    touches = padded[:-2, 1:-1] | padded[2:, 1:-1] | padded[1:-1, :-2] | padded[1:-1, 2:]
    anchored = np.unique(seg.labels[g.inference & touches])
    if anchored.size < seg.segment_count:
        missing = sorted(set(range(seg.segment_count)) - set(anchored.tolist()))
        raise UnconstrainedSegment(f"segments {missing} have no Training neighbour")
    system = assemble(g, m)
    a = system.matrix()
    try:
        x = spsolve(a, system.rhs)
    except RuntimeError as exc:
        raise SolverFailure(str(exc)) from exc
    residual = np.linalg.norm(a @ x - system.rhs)
    if not np.isfinite(x).all() or residual > 1e-10 * max(1.0, np.linalg.norm(system.rhs)):
        raise SolverFailure(f"residual norm {residual:.3e} too large")
    out.values.reshape(-1)[system.pixels] = x
    return out


def brute_force_discrete(g: PixelGrid, m: MetricSpec, vs: ValueSet) -> PixelGrid:
    """Exhaustively minimize the summed own-dissimilarity of Inference pixels over ``vs``.

    Inference pixels in different segments never interact, so each segment
    is enumerated on its own; ties go to the lexicographically smallest
    assignment in row-major pixel order.
    """
    out = g.copy()
    n = g.n_infer
    if n == 0:
        return out
    if n > MAX_BRUTE_PIXELS or len(vs) ** n > MAX_BRUTE_STATES:
        raise TooLarge(f"{len(vs)}^{n} assignments exceed the brute-force cap")
    seg = segment(g)
    flat = out.values.reshape(-1)
    labels = seg.labels.ravel()
    for label in range(seg.segment_count):
        pix = np.flatnonzero(labels == label)
        idx, w = neighbour_table(out, m, pix)
        best, _ = _kernels.enumerate_minimum(flat, pix, idx, w, vs.values, m.is_cosine)
        flat[pix] = vs.values[best]
    return out


def idw_baseline(s: ScatterSet, g: PixelGrid, power: float = 2.0, chunk: int = 4096) -> PixelGrid:
    """Inverse-distance-weighted estimate at Inference cell centres, in measurement units.

    Uses every scatter point. A point coinciding with a cell centre gives
    that point's value exactly.
    """
    if not power > 0:
        raise ValueError("power must be positive")
    values = denormalize(g) if g.norm is not None else g.values.copy()
    out = g.copy(values=values, norm=None)
    xc, yc = g.cell_centres()
    mask = g.inference.ravel()
    qx, qy = xc.ravel()[mask], yc.ravel()[mask]
    est = np.empty(qx.size)
    for start in range(0, qx.size, chunk):
        sl = slice(start, start + chunk)
        d = np.hypot(qx[sl, None] - s.x[None, :], qy[sl, None] - s.y[None, :])
        hit = d == 0
        with np.errstate(divide="ignore"):
            wts = d ** (-power)
        exact = hit.any(axis=1)
        wts[exact] = hit[exact].astype(np.float64)
        est[sl] = wts @ s.v / wts.sum(axis=1)
    out.values.reshape(-1)[mask] = est
    return out


@dataclass(frozen=True)
class HoldoutScore:
    rmse: float
    n_points: int
    skipped: int

    def __float__(self):
        return self.rmse


def holdout_rmse(predicted: PixelGrid, withheld: ScatterSet) -> HoldoutScore:
    """RMSE between withheld measurements and the predicted value of the cell each falls in.

    Predictions are denormalized first when the grid carries normalization
    parameters. Points outside the grid are skipped and counted.
    """
    values = denormalize(predicted) if predicted.norm is not None else predicted.values
    r, c = predicted.locate(withheld.x, withheld.y)
    inside = r >= 0
    n = int(inside.sum())
    if n == 0:
        return HoldoutScore(float("nan"), 0, int(withheld.x.size))
    err = values[r[inside], c[inside]] - withheld.v[inside]
    sq = np.sort(err * err)  # order-independent sum
    return HoldoutScore(float(np.sqrt(sq.sum() / n)), n, int((~inside).sum()))
