"""Projection noise on return-probability maps and zero detectability.

A measured map replaces each true probability L by Binomial(n, L)/n.  Every
grid point draws from its own RNG stream keyed by (seed, iy, ix), so noisy
scans are reproducible no matter how the work is scheduled.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .zeros import GridSpec, ScanGrid


@dataclass(frozen=True)
class NoisyGrid:
    base: ScanGrid  # true L, log-scale values
    estimates: np.ndarray  # (n_im, n_re) measured L-hat in {0, 1/n, ..., 1}
    n_shots: int
    seed: int

    @property
    def spec(self) -> GridSpec:
        return self.base.spec


def true_probabilities(grid: ScanGrid) -> np.ndarray:
    """Linear probabilities from a log-scale L grid; rejects values beyond 1."""
    with np.errstate(over="raise"):
        p = np.exp(np.where(np.isfinite(grid.values), grid.values, -np.inf))
    if np.any(p > 1.0 + 1e-9):
        raise ValueError(f"grid contains probabilities above 1 (max {p.max():.3g})")
    return np.clip(p, 0.0, 1.0)


def noisy_scan(
    true_grid: ScanGrid, n_shots: int, seed: int, threads: int | None = None
) -> NoisyGrid:
    """Binomial projection noise, one independent stream per grid point.

    Distributionally identical to full multinomial shot sampling of the
    all-initial-state event.
    """
    if n_shots < 1:
        raise ValueError("n_shots must be >= 1")
    p = true_probabilities(true_grid)
    est = np.empty_like(p)

    def fill_row(iy: int) -> None:
        for ix in range(p.shape[1]):
            rng = np.random.default_rng((seed, iy, ix))
            est[iy, ix] = rng.binomial(n_shots, p[iy, ix]) / n_shots

    if threads is not None and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(fill_row, range(p.shape[0])))
    else:
        for iy in range(p.shape[0]):
            fill_row(iy)
    return NoisyGrid(true_grid, est, n_shots, seed)


def error_stats(
    L: float, n_shots: int, trials: int, seed: int
) -> tuple[float, float]:
    """Empirical (mean, variance) of L-hat over repeated n-shot estimates.

    The estimator is unbiased with variance L(1-L)/n.
    """
    if not 0.0 <= L <= 1.0:
        raise ValueError("L must be a probability")
    if trials < 100:
        raise ValueError("need at least 100 trials for stable statistics")
    rng = np.random.default_rng((seed, n_shots, trials))
    draws = rng.binomial(n_shots, L, size=trials) / n_shots
    return float(draws.mean()), float(draws.var())


def noisy_minima_mask(
    noisy: NoisyGrid, count_threshold: int = 1
) -> np.ndarray:
    """Cells that are non-strict 8-neighborhood minima of the measured map and
    darker than count_threshold counts.

    Non-strict comparison keeps plateaus of exact-zero counts detectable.
    """
    est = noisy.estimates
    padded = np.full((est.shape[0] + 2, est.shape[1] + 2), np.inf)
    padded[1:-1, 1:-1] = est
    center = padded[1:-1, 1:-1]
    mask = np.ones(est.shape, dtype=bool)
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dy == 0 and dx == 0:
                continue
            nb = padded[1 + dy : padded.shape[0] - 1 + dy, 1 + dx : padded.shape[1] - 1 + dx]
            mask &= center <= nb
    mask &= est <= count_threshold / noisy.n_shots
    return mask


@dataclass(frozen=True)
class ZeroDetection:
    zero: complex
    cell: tuple[int, int]
    nearest_minimum: tuple[int, int] | None
    distance_cells: float


@dataclass(frozen=True)
class DetectabilityReport:
    detections: tuple[ZeroDetection, ...]
    radius_cells: float
    count_threshold: int

    def fraction_within(self, radius: float | None = None) -> float:
        r = self.radius_cells if radius is None else radius
        if not self.detections:
            return 1.0
        hit = sum(1 for d in self.detections if d.distance_cells <= r)
        return hit / len(self.detections)


def detectability(
    noisy: NoisyGrid,
    true_zeros,
    radius_cells: float = 2.0,
    count_threshold: int = 1,
) -> DetectabilityReport:
    """Chebyshev cell distance from each true zero to the nearest noisy minimum."""
    mask = noisy_minima_mask(noisy, count_threshold)
    min_cells = np.argwhere(mask)
    detections = []
    for zero in true_zeros:
        zero = complex(zero)
        if not noisy.spec.contains(zero):
            raise ValueError(f"true zero {zero:.6g} lies outside the grid window")
        cell = noisy.spec.nearest_cell(zero)
        if len(min_cells) == 0:
            detections.append(ZeroDetection(zero, cell, None, math.inf))
            continue
        cheb = np.max(np.abs(min_cells - np.array(cell)), axis=1)
        k = int(np.argmin(cheb))
        detections.append(
            ZeroDetection(zero, cell, (int(min_cells[k][0]), int(min_cells[k][1])), float(cheb[k]))
        )
    return DetectabilityReport(tuple(detections), radius_cells, count_threshold)
