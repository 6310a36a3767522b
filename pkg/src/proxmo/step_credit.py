"""Step-level credit from soft, similarity-weighted baselines.

For step ``t`` of trajectory ``i`` the baseline is a softmax-weighted average
of the step-``t`` discounted returns of the other trajectories in the same
episode group, with weights ``exp(sim / temperature)`` over TF-IDF cosine
similarities of the step-``t`` observations. Only trajectories that are long
enough to have a step ``t`` take part.

``hard_group_advantages`` is the exact-match comparator: the candidate set is
restricted to byte-identical observations and weighted uniformly.
"""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core_types import EpisodeGroup, Trajectory
from .errors import EmptyCandidateSet, InvalidInput
from .text_sim import SparseVector, Vocabulary, similarity_matrix, vectorize

SIZE_BINS = ("size_1", "size_2", "size_3", "size_gt3")


class SelfMode(str, enum.Enum):
    INCLUDE_SELF = "INCLUDE_SELF"
    LEAVE_ONE_OUT = "LEAVE_ONE_OUT"


@dataclass(frozen=True)
class PsaConfig:
    temperature: float = 0.1
    gamma: float = 0.95
    self_mode: SelfMode = SelfMode.LEAVE_ONE_OUT

    def __post_init__(self) -> None:
        object.__setattr__(self, "self_mode", SelfMode(self.self_mode))
        if not self.temperature > 0:
            raise InvalidInput(f"temperature must be > 0, got {self.temperature}")
        if not 0 < self.gamma <= 1:
            raise InvalidInput(f"gamma must lie in (0, 1], got {self.gamma}")


def discounted_returns(traj: Trajectory | Sequence[float], gamma: float) -> np.ndarray:
    """Tail sums ``R_t = sum_k gamma**(k-t) r_k`` by a backward pass."""
    if not 0 < gamma <= 1:
        raise InvalidInput(f"gamma must lie in (0, 1], got {gamma}")
    rewards = traj.rewards if isinstance(traj, Trajectory) else np.asarray(traj, dtype=float)
    out = np.empty(len(rewards))
    acc = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        acc = rewards[t] + gamma * acc
        out[t] = acc
    return out


def soft_weights(similarities: Sequence[float], temperature: float) -> np.ndarray:
    sims = np.asarray(similarities, dtype=float)
    if sims.size == 0:
        raise EmptyCandidateSet("soft weights need at least one candidate")
    if not temperature > 0:
        raise InvalidInput(f"temperature must be > 0, got {temperature}")
    z = sims / temperature
    e = np.exp(z - z.max())
    return e / e.sum()


def _alive(group: EpisodeGroup, t: int) -> list[int]:
    return [i for i, traj in enumerate(group) if len(traj) > t]


def psa_step_advantages(
    group: EpisodeGroup, vocab: Vocabulary, cfg: PsaConfig
) -> list[np.ndarray]:
    returns = [discounted_returns(traj, cfg.gamma) for traj in group]
    adv = [np.zeros(len(traj)) for traj in group]
    cache: dict[str, SparseVector] = {}

    def vec(text: str) -> SparseVector:
        v = cache.get(text)
        if v is None:
            v = cache[text] = vectorize(text, vocab)
        return v

    leave_one_out = cfg.self_mode is SelfMode.LEAVE_ONE_OUT
    for t in range(max(group.lengths)):
        alive = _alive(group, t)
        if len(alive) < 2:
            continue  # singleton rule: advantage stays 0
        sims = similarity_matrix([vec(group.trajectories[i].steps[t].state_text) for i in alive], len(vocab))
        tail = np.array([returns[i][t] for i in alive])
        for a, i in enumerate(alive):
            if leave_one_out:
                cand = np.array([b for b in range(len(alive)) if b != a])
            else:
                cand = np.arange(len(alive))
            w = soft_weights(sims[a, cand], cfg.temperature)
            adv[i][t] = tail[a] - float(np.dot(w, tail[cand]))
    return adv


def exact_match_sets(group: EpisodeGroup, t: int) -> dict[str, list[int]]:
    """Trajectory indices keyed by their byte-identical step-``t`` observation."""
    sets: dict[str, list[int]] = {}
    for i in _alive(group, t):
        sets.setdefault(group.trajectories[i].steps[t].state_text, []).append(i)
    return sets


def hard_group_advantages(group: EpisodeGroup, cfg: PsaConfig) -> list[np.ndarray]:
    returns = [discounted_returns(traj, cfg.gamma) for traj in group]
    adv = [np.zeros(len(traj)) for traj in group]
    leave_one_out = cfg.self_mode is SelfMode.LEAVE_ONE_OUT
    for t in range(max(group.lengths)):
        for members in exact_match_sets(group, t).values():
            if len(members) < 2:
                continue
            tail = np.array([returns[i][t] for i in members])
            for a, i in enumerate(members):
                if leave_one_out:
                    base = (tail.sum() - tail[a]) / (len(members) - 1)
                else:
                    base = tail.sum() / len(members)
                adv[i][t] = tail[a] - base
    return adv


def group_size_counts(group: EpisodeGroup, first_step_only: bool = False) -> Counter:
    """Count steps by the size of their exact-match set, binned 1, 2, 3, >3."""
    counts: Counter = Counter({b: 0 for b in SIZE_BINS})
    horizon = 1 if first_step_only else max(group.lengths)
    for t in range(horizon):
        for members in exact_match_sets(group, t).values():
            k = len(members)
            counts[SIZE_BINS[min(k, 4) - 1]] += k
    return counts


def size_fractions(counts: Counter) -> dict[str, float]:
    total = sum(counts[b] for b in SIZE_BINS)
    if total == 0:
        return {b: 0.0 for b in SIZE_BINS}
    return {b: counts[b] / total for b in SIZE_BINS}


def group_size_histogram(group: EpisodeGroup) -> dict[str, float]:
    """Fraction of steps whose exact-match set has size 1, 2, 3 or more."""
    return size_fractions(group_size_counts(group))
