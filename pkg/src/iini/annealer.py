"""Metropolis Monte Carlo optimization under an exponential annealing schedule."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels, rng
from .dissimilarity import MetricSpec, neighbour_table
from .errors import NothingToInfer, ShapeError
from .grid import PixelGrid, ValueSet

DEFAULT_T_START = 1.0 / math.log(2.0)
DEFAULT_MAX_CHECKPOINTS = 500

# proposals handed to the compiled kernel per call; bounds the raw-word buffer
_BLOCK = 1 << 20


@dataclass(frozen=True)
class AnnealSchedule:
    """Stepwise exponential cooling ``T(n) = t_start / decay_a**n`` over checkpoints."""

    t_start: float = DEFAULT_T_START
    decay_a: float = 1.15
    epsilon_p: float = 1.0 / 50.0
    min_checkpoints: int = 0

    def __post_init__(self):
        if not self.t_start > 0:
            raise ValueError("t_start must be positive")
        if not self.decay_a > 1:
            raise ValueError("decay_a must exceed 1")
        if not 0 < self.epsilon_p < 1:
            raise ValueError("epsilon_p must lie in (0, 1)")
        if self.min_checkpoints < 0:
            raise ValueError("min_checkpoints must be non-negative")

    def temperature(self, n: int) -> float:
        try:
            return self.t_start / self.decay_a**n
        except OverflowError:
            return 0.0

    def freeze_checkpoint(self, mistake_odds: float = 1e-3) -> int:
        """First checkpoint whose temperature accepts a one-quantum mistake
        (``delta_d = epsilon_p**2``) with probability below ``mistake_odds``."""
        t_freeze = self.epsilon_p**2 / math.log(1.0 / mistake_odds)
        if self.t_start <= t_freeze:
            return 0
        return int(math.ceil(math.log(self.t_start / t_freeze) / math.log(self.decay_a)))


@dataclass(frozen=True)
class Checkpoint:
    index: int
    iterations: int
    digest: str
    rmse: float
    acceptance_rate: float
    temperature: float


@dataclass
class CheckpointLog:
    entries: list = field(default_factory=list)
    spacing: int = 0
    converged: bool = False

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i):
        return self.entries[i]

    @property
    def rmse_trace(self):
        return [c.rmse for c in self.entries]

    CSV_HEADER = "checkpoint,iterations,temperature,rmse,acceptance_rate"

    def to_csv(self) -> str:
        lines = [self.CSV_HEADER]
        for c in self.entries:
            lines.append(f"{c.index},{c.iterations},{c.temperature!r},{c.rmse!r},{c.acceptance_rate!r}")
        return "\n".join(lines) + "\n"


def accept_probability(delta_d: float, t: float) -> float:
    """Metropolis acceptance: 1 for non-positive ``delta_d``, else ``exp(-delta_d / t)``."""
    if delta_d <= 0:
        return 1.0
    if t <= 0:
        return 0.0
    return math.exp(-delta_d / t)


def checkpoint_spacing(n_infer: int, epsilon_p: float) -> int:
    """Iterations between checkpoints, ``ceil(n_infer / epsilon_p)``."""
    if n_infer < 1:
        raise ValueError("n_infer must be at least 1")
    if not 0 < epsilon_p < 1:
        raise ValueError("epsilon_p must lie in (0, 1)")
    exact = n_infer / epsilon_p
    nearest = round(exact)
    if abs(exact - nearest) <= 1e-9 * exact:
        return int(nearest)
    return int(math.ceil(exact))


def _wrapped(d):
    return (d + math.pi) % (2.0 * math.pi) - math.pi


def rmse_between(g1: PixelGrid, g2: PixelGrid, angular: bool = False) -> float:
    """RMSE between two grids over their Inference pixels.

    With ``angular=True`` differences are wrapped into [-pi, pi).
    """
    if g1.shape != g2.shape or not np.array_equal(g1.training, g2.training):
        raise ShapeError("grids differ in shape or role mask")
    mask = g1.inference
    if not mask.any():
        return 0.0
    d = g1.values[mask] - g2.values[mask]
    if angular:
        d = _wrapped(d)
    return float(np.sqrt(np.mean(d * d)))


def _digest(values):
    return hashlib.blake2b(values.tobytes(), digest_size=8).hexdigest()


def run_annealing(
    g: PixelGrid,
    m: MetricSpec,
    s: AnnealSchedule,
    seed: int,
    max_checkpoints: int = DEFAULT_MAX_CHECKPOINTS,
    on_checkpoint=None,
):
    """Anneal the Inference pixels of an initialized grid.

    Each iteration picks a uniformly random Inference pixel and a uniformly
    random candidate value, and accepts the move with the Metropolis
    probability at the temperature of the current checkpoint interval.
    After every ``checkpoint_spacing`` iterations the grid is compared with
    the previous checkpoint (the initial grid for checkpoint 0); the run
    stops once that RMSE drops below ``epsilon_p / 2`` or after
    ``max_checkpoints`` checkpoints. ``s.min_checkpoints`` defers the RMSE
    test, which is unreliable on grids with only a handful of Inference
    pixels (a checkpoint with no net change is likely even when hot).

    Parameters
    ----------
    g : PixelGrid
        Normalized grid whose Inference pixels already hold candidate values.
    m : MetricSpec
    s : AnnealSchedule
    seed : int
    max_checkpoints : int
        Safety cap on the number of checkpoints.
    on_checkpoint : callable, optional
        Called as ``on_checkpoint(checkpoint, grid)`` after each checkpoint;
        the grid must not be modified.

    Returns
    -------
    (PixelGrid, CheckpointLog)
    """
    n_infer = g.n_infer
    if n_infer == 0:
        raise NothingToInfer("grid has no Inference pixels")
    out = g.copy()
    spacing = checkpoint_spacing(n_infer, s.epsilon_p)
    log = CheckpointLog(spacing=spacing)
    if max_checkpoints <= 0:
        return out, log
    if not np.isfinite(out.values[out.inference]).all():
        raise ValueError("Inference pixels must be initialized before annealing")

    pix = np.flatnonzero(out.inference.ravel())
    nbr_idx, nbr_w = neighbour_table(out, m, pix)
    candidates = ValueSet(s.epsilon_p, span=m.value_span()).values
    bitgen = rng.stream(seed, rng.ANNEAL_STREAM).bit_generator
    flat = out.values.reshape(-1)
    previous = flat[pix].copy()
    threshold = s.epsilon_p / 2.0
    iterations = 0

    for n in range(max_checkpoints):
        t = s.temperature(n)
        accepted = 0
        remaining = spacing
        while remaining:
            block = min(remaining, _BLOCK)
            raw = bitgen.random_raw(3 * block)
            accepted += _kernels.metropolis_block(flat, pix, nbr_idx, nbr_w, candidates, raw, t, m.is_cosine)
            remaining -= block
        iterations += spacing
        current = flat[pix]
        d = current - previous
        if m.is_cosine:
            d = _wrapped(d)
        rmse = float(np.sqrt(np.mean(d * d)))
        cp = Checkpoint(n, iterations, _digest(current), rmse, accepted / spacing, t)
        log.entries.append(cp)
        if on_checkpoint is not None:
            on_checkpoint(cp, out)
        if rmse < threshold and n + 1 >= s.min_checkpoints:
            log.converged = True
            break
        previous = current.copy()
    return out, log
