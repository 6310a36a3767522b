"""Episode-level credit: group z-scores and success-rate-aware modulation.

The modulation (Polarized Signal Controller, PSC) rescales each z-scored
advantage by ``w(R, p) = 1 + beta * f(R, p)`` where ``p`` is the group's
empirical success rate and ``f`` is a shifted sigmoid of ``(1-p)**alpha`` for
successes and of ``-p**alpha`` for failures.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core_types import BINARY_TOL, EpisodeGroup, success_rate
from .errors import DegenerateRate, GroupTooSmall, InvalidInput, NonBinaryReward

# Groups whose return spread falls below this carry no within-group signal.
SIGMA_FLOOR = 1e-8


@dataclass(frozen=True)
class PscConfig:
    alpha: float = 4.0
    beta: float = 0.1

    def __post_init__(self) -> None:
        if not self.alpha > 0:
            raise InvalidInput(f"alpha must be > 0, got {self.alpha}")
        if not self.beta >= 0:
            raise InvalidInput(f"beta must be >= 0, got {self.beta}")


def sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def zscore_advantages(returns: Sequence[float], ddof: int = 0) -> np.ndarray:
    """Group z-scores ``(R_i - mean) / std``.

    ``ddof=0`` is the population standard deviation. A group whose standard
    deviation is below ``SIGMA_FLOOR`` gets all-zero advantages.
    """
    r = np.asarray(returns, dtype=float)
    if r.ndim != 1 or r.size < 2:
        raise GroupTooSmall(f"z-scores need at least 2 returns, got {r.size}")
    if ddof not in (0, 1):
        raise InvalidInput(f"ddof must be 0 or 1, got {ddof}")
    mu = r.mean()
    sigma = math.sqrt(float(((r - mu) ** 2).sum()) / (r.size - ddof))
    if sigma < SIGMA_FLOOR:
        return np.zeros_like(r)
    return (r - mu) / sigma


def psc_factor(return_value: float, p: float, cfg: PscConfig) -> float:
    """Modulation weight for one trajectory outcome in a group with success rate ``p``."""
    if not 0.0 <= p <= 1.0:
        raise InvalidInput(f"success rate must lie in [0, 1], got {p}")
    if abs(return_value - 1.0) <= BINARY_TOL:
        f = sigmoid((1.0 - p) ** cfg.alpha) - 0.5
    elif abs(return_value) <= BINARY_TOL:
        f = sigmoid(-(p**cfg.alpha)) - 0.5
    else:
        raise NonBinaryReward(f"modulation is defined for returns in {{0, 1}}, got {return_value}")
    return 1.0 + cfg.beta * f


def modulated_advantages(
    group: EpisodeGroup | Sequence[float], cfg: PscConfig, ddof: int = 0
) -> np.ndarray:
    returns = group.returns if isinstance(group, EpisodeGroup) else np.asarray(group, dtype=float)
    if returns.size < 2:
        raise GroupTooSmall(f"z-scores need at least 2 returns, got {returns.size}")
    p = success_rate(returns)
    adv = zscore_advantages(returns, ddof=ddof)
    weights = np.array([psc_factor(r, p, cfg) for r in returns])
    return weights * adv


def zscore_closed_form(p: float) -> tuple[float, float]:
    """Binary-outcome z-scores ``(sqrt((1-p)/p), -sqrt(p/(1-p)))`` at success rate ``p``."""
    if not 0.0 < p < 1.0:
        raise DegenerateRate(f"closed form needs 0 < p < 1, got {p}")
    return math.sqrt((1.0 - p) / p), -math.sqrt(p / (1.0 - p))
