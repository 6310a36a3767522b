"""Softmax-linear policy over hashed bag-of-words features.

Each candidate action at a state is embedded by hashing three token families
into ``D`` signed buckets: state tokens, action tokens, and state-action token
pairs. The pair features let a linear scorer condition on the observation.
The summed vector is L2-normalized and the action logit is its dot product
with the weight vector.

Checkpoints are JSON::

    {"format": "proxmo-policy", "version": 1, "feature_dim": D,
     "hash_seed": s, "weights": [...]}
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import InvalidAction, InvalidInput, NoAdmissibleActions, ShapeMismatch
from .text_sim import tokenize

CHECKPOINT_FORMAT = "proxmo-policy"
CHECKPOINT_VERSION = 1
MIN_FEATURE_DIM = 16


@lru_cache(maxsize=1 << 18)
def _bucket(feature: str, dim: int, seed: int) -> tuple[int, float]:
    digest = hashlib.blake2b(feature.encode("utf-8"), digest_size=8, key=seed.to_bytes(8, "little", signed=True)).digest()
    h = int.from_bytes(digest, "little")
    return h % dim, (1.0 if (h >> 63) & 1 else -1.0)


def _raw_features(state_tokens: Sequence[str], action_tokens: Sequence[str], dim: int, seed: int) -> np.ndarray:
    vec = np.zeros(dim)
    names = [f"s:{s}" for s in state_tokens]
    names += [f"a:{a}" for a in action_tokens]
    names += [f"x:{s}|{a}" for s in state_tokens for a in action_tokens]
    for name in names:
        j, sign = _bucket(name, dim, seed)
        vec[j] += sign
    return vec


def featurize(state_text: str, action_text: str, dim: int, seed: int) -> np.ndarray:
    """Dense length-``dim`` feature vector, L2-normalized (zero stays zero)."""
    if dim < MIN_FEATURE_DIM:
        raise InvalidInput(f"feature_dim must be >= {MIN_FEATURE_DIM}, got {dim}")
    vec = _raw_features(tokenize(state_text), tokenize(action_text), dim, seed)
    norm = np.linalg.norm(vec)
    return vec / norm if norm > 0 else vec


@lru_cache(maxsize=1 << 14)
def _feature_matrix(state_text: str, actions: tuple[str, ...], dim: int, seed: int) -> np.ndarray:
    mat = np.stack([featurize(state_text, a, dim, seed) for a in actions])
    mat.setflags(write=False)
    return mat


def feature_matrix(state_text: str, actions: Sequence[str], dim: int, seed: int) -> np.ndarray:
    """Rows are the features of each admissible action at ``state_text``."""
    if len(actions) == 0:
        raise NoAdmissibleActions(f"no admissible actions at state {state_text!r}")
    return _feature_matrix(state_text, tuple(actions), dim, seed)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max()
    return z - np.log(np.exp(z).sum())


@dataclass(frozen=True)
class Policy:
    weights: np.ndarray
    feature_dim: int
    hash_seed: int = 0

    def __post_init__(self) -> None:
        w = np.array(self.weights, dtype=float)
        if w.shape != (self.feature_dim,):
            raise ShapeMismatch(f"weights have shape {w.shape}, expected ({self.feature_dim},)")
        if self.feature_dim < MIN_FEATURE_DIM:
            raise InvalidInput(f"feature_dim must be >= {MIN_FEATURE_DIM}")
        if not np.all(np.isfinite(w)):
            raise InvalidInput("policy weights must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def zeros(cls, feature_dim: int = 512, hash_seed: int = 0) -> "Policy":
        return cls(np.zeros(feature_dim), feature_dim, hash_seed)

    def features(self, state_text: str, actions: Sequence[str]) -> np.ndarray:
        return feature_matrix(state_text, actions, self.feature_dim, self.hash_seed)

    def snapshot(self) -> "PolicySnapshot":
        return PolicySnapshot(self.weights.copy(), self.feature_dim, self.hash_seed)

    def to_dict(self) -> dict:
        return {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "feature_dim": self.feature_dim,
            "hash_seed": self.hash_seed,
            "weights": [float(x) for x in self.weights],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Policy":
        if data.get("format") != CHECKPOINT_FORMAT or data.get("version") != CHECKPOINT_VERSION:
            raise InvalidInput(f"unsupported checkpoint format {data.get('format')!r} v{data.get('version')!r}")
        return cls(np.array(data["weights"], dtype=float), int(data["feature_dim"]), int(data["hash_seed"]))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Policy":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


class PolicySnapshot(Policy):
    """Frozen copy of a policy, used as the behavior (old) or reference policy."""


def action_logits(policy: Policy, state_text: str, admissible_actions: Sequence[str]) -> np.ndarray:
    return policy.features(state_text, admissible_actions) @ policy.weights


def action_log_probs(policy: Policy, state_text: str, admissible_actions: Sequence[str]) -> np.ndarray:
    return log_softmax(action_logits(policy, state_text, admissible_actions))


def sample_action(
    policy: Policy, state_text: str, admissible_actions: Sequence[str], rng: np.random.Generator
) -> tuple[int, float]:
    logp = action_log_probs(policy, state_text, admissible_actions)
    probs = np.exp(logp)
    u = rng.random()
    idx = int(np.searchsorted(np.cumsum(probs), u * probs.sum(), side="right"))
    idx = min(idx, len(probs) - 1)
    return idx, float(min(logp[idx], 0.0))


def greedy_action(policy: Policy, state_text: str, admissible_actions: Sequence[str]) -> int:
    return int(np.argmax(action_logits(policy, state_text, admissible_actions)))


def log_prob_gradient(
    policy: Policy, state_text: str, admissible_actions: Sequence[str], action_id: int
) -> np.ndarray:
    """``phi(s, a) - sum_b pi(b|s) phi(s, b)``."""
    if not 0 <= action_id < len(admissible_actions):
        raise InvalidAction(f"action_id {action_id} outside {len(admissible_actions)} actions")
    phi = policy.features(state_text, admissible_actions)
    probs = np.exp(log_softmax(phi @ policy.weights))
    return phi[action_id] - probs @ phi


def sgd_update(policy: Policy, gradient: np.ndarray, learning_rate: float) -> Policy:
    """Gradient ascent step; the objective is maximized."""
    g = np.asarray(gradient, dtype=float)
    if g.shape != policy.weights.shape:
        raise ShapeMismatch(f"gradient shape {g.shape} does not match weights {policy.weights.shape}")
    return Policy(policy.weights + learning_rate * g, policy.feature_dim, policy.hash_seed)
