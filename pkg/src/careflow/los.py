"""Length-of-stay distributions: fitting, sampling, and steady-state aging."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammainc


class LosError(ValueError):
    pass


def round_half_up(x) -> np.ndarray:
    """Round halves away from zero; stays are whole days."""
    return np.floor(np.asarray(x, dtype=np.float64) + 0.5)


@dataclass(frozen=True)
class LosDistribution:
    """Gamma stay distribution (method of moments), or a fixed stay when sd == 0.

    Draws are rounded to whole days and clamped to at least one day.
    """

    mean: float
    sd: float
    shape: float = field(init=False)
    scale: float = field(init=False)

    def __post_init__(self):
        if self.mean <= 0:
            raise LosError(f"mean must be positive, got {self.mean}")
        if self.sd < 0:
            raise LosError(f"sd must be non-negative, got {self.sd}")
        if self.sd > 0:
            object.__setattr__(self, "shape", (self.mean / self.sd) ** 2)
            object.__setattr__(self, "scale", self.sd ** 2 / self.mean)
        else:
            object.__setattr__(self, "shape", 0.0)
            object.__setattr__(self, "scale", 0.0)

    @property
    def fixed(self) -> bool:
        return self.sd == 0

    def day_pmf(self, tail: float = 1e-12) -> np.ndarray:
        """Probability of each whole-day stay 1..K, truncated where the tail
        mass drops below ``tail`` and renormalized."""
        if self.fixed:
            k = max(1, int(round_half_up(self.mean)))
            pmf = np.zeros(k)
            pmf[-1] = 1.0
            return pmf
        hi = self.mean + 1.0
        while 1.0 - float(gammainc(self.shape, (hi + 0.5) / self.scale)) > tail:
            hi *= 1.6
            if hi > 5e5:
                break
        days = np.arange(1, int(np.ceil(hi)) + 2, dtype=np.float64)
        upper = gammainc(self.shape, (days + 0.5) / self.scale)
        lower = gammainc(self.shape, (days - 0.5) / self.scale)
        pmf = upper - lower
        pmf[0] = upper[0]  # draws below 1.5 clamp to one day
        pmf = np.clip(pmf, 0.0, None)
        total = pmf.sum()
        if total <= 0:
            raise LosError("degenerate day pmf")
        return pmf / total


def fit_los(mean: float, sd: float) -> LosDistribution:
    return LosDistribution(mean=float(mean), sd=float(sd))


def sample_los(dist: LosDistribution, rng: np.random.Generator) -> int:
    if dist.fixed:
        return max(1, int(round_half_up(dist.mean)))
    draw = rng.gamma(dist.shape, dist.scale)
    return max(1, int(round_half_up(draw)))


@dataclass(frozen=True)
class RemainingLosDistribution:
    """Steady-state distribution of days left for occupants already mid-stay.

    ``weights[k]`` is the probability of k+1 remaining days (support starts at 1).
    """

    source: LosDistribution
    weights: np.ndarray
    cumulative: np.ndarray = field(init=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 1 or w.size == 0 or np.any(w < 0):
            raise LosError("invalid remaining-stay weights")
        total = w.sum()
        if not np.isclose(total, 1.0, atol=1e-9):
            raise LosError(f"weights sum to {total}, expected 1")
        object.__setattr__(self, "weights", w)
        cum = np.cumsum(w)
        cum[-1] = 1.0
        object.__setattr__(self, "cumulative", cum)

    @property
    def mean(self) -> float:
        support = np.arange(1, self.weights.size + 1)
        return float(np.dot(support, self.weights))


def age_distribution(dist: LosDistribution,
                     tv_tolerance: float = 1e-3,
                     horizon_factor: int = 10) -> RemainingLosDistribution:
    """Age a stay distribution into its steady-state remaining-days histogram.

    Simulates the aging process on expected masses: each day a unit cohort of
    stays arrives, every outstanding value drops by one day, and non-positive
    values are discarded. Runs at least ``horizon_factor`` times the mean stay
    and stops once the normalized histogram's total-variation change per day
    falls below ``tv_tolerance``.
    """
    pmf = dist.day_pmf()
    k = pmf.size
    surviving = np.zeros(k, dtype=np.float64)
    min_days = max(1, int(np.ceil(horizon_factor * dist.mean)))
    prev = None
    for day in range(min_days + 10 * k + 10):
        # shift down one day, dropping the mass that reaches zero
        surviving[:-1] = surviving[1:]
        surviving[-1] = 0.0
        surviving += pmf
        norm = surviving / surviving.sum()
        if day >= min_days and prev is not None:
            if 0.5 * np.abs(norm - prev).sum() < tv_tolerance:
                break
        prev = norm
    return RemainingLosDistribution(source=dist, weights=norm)


def sample_remaining_los(rd: RemainingLosDistribution,
                         rng: np.random.Generator) -> int:
    u = rng.random()
    return int(np.searchsorted(rd.cumulative, u, side="right")) + 1


def stationary_residual_mean(pmf: np.ndarray) -> float:
    """Brute-force stationary residual mean E[L(L+1)/2] / E[L] for a day pmf."""
    support = np.arange(1, pmf.size + 1, dtype=np.float64)
    return float(np.dot(support * (support + 1) / 2.0, pmf) / np.dot(support, pmf))
