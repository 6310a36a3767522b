"""Combined advantages and the clipped, KL-regularized surrogate objective.

The objective over a batch of ``S = sum_i T_i`` visited steps is::

    J = (1/S) sum_{i,t} min(rho A, clip(rho, 1-eps, 1+eps) A)
        - kl_coeff * (1/S) sum_{i,t} KL(pi_theta(.|s) || pi_ref(.|s))

with ``rho = pi_theta(a|s) / pi_old(a|s)``. The KL is exact over the
admissible actions. Gradients are analytic for the softmax-linear policy.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core_types import AdvantageTensor, EpisodeGroup
from .errors import InvalidInput, LengthMismatch, ShapeMismatch, StaleSnapshot
from .policy import Policy, PolicySnapshot, log_softmax

# tolerance for stored behavior log-probs versus the old snapshot
STALE_TOL = 1e-6


@dataclass(frozen=True)
class ObjectiveConfig:
    omega: float = 1.0
    clip_epsilon: float = 0.2
    kl_coeff: float = 0.01
    epochs: int = 1

    def __post_init__(self) -> None:
        if not self.omega >= 0:
            raise InvalidInput(f"omega must be >= 0, got {self.omega}")
        if not 0 < self.clip_epsilon < 1:
            raise InvalidInput(f"clip_epsilon must lie in (0, 1), got {self.clip_epsilon}")
        if not self.kl_coeff >= 0:
            raise InvalidInput(f"kl_coeff must be >= 0, got {self.kl_coeff}")
        if self.epochs < 1:
            raise InvalidInput(f"epochs must be >= 1, got {self.epochs}")


def combine_advantages(
    episode_adv: Sequence[float], step_adv: Sequence[Sequence[float]], omega: float
) -> tuple[np.ndarray, ...]:
    """Broadcast each trajectory's episode value over its steps and add ``omega`` x step value."""
    ep = np.asarray(episode_adv, dtype=float)
    if ep.ndim != 1 or ep.size != len(step_adv):
        raise ShapeMismatch(f"{ep.size} episode values for {len(step_adv)} trajectories")
    return tuple(e + omega * np.asarray(s, dtype=float) for e, s in zip(ep, step_adv))


def clipped_surrogate(ratio: float, advantage: float, epsilon: float) -> float:
    if not ratio > 0:
        raise InvalidInput(f"ratio must be > 0, got {ratio}")
    clipped = min(max(ratio, 1.0 - epsilon), 1.0 + epsilon)
    return min(ratio * advantage, clipped * advantage)


def categorical_kl(p_logits: Sequence[float], q_logits: Sequence[float]) -> float:
    """KL(softmax(p) || softmax(q))."""
    p = np.asarray(p_logits, dtype=float)
    q = np.asarray(q_logits, dtype=float)
    if p.shape != q.shape or p.ndim != 1 or p.size == 0:
        raise LengthMismatch(f"logit vectors of shapes {p.shape} and {q.shape}")
    lp, lq = log_softmax(p), log_softmax(q)
    return max(float(np.dot(np.exp(lp), lp - lq)), 0.0)


@dataclass(frozen=True)
class ObjectiveResult:
    value: float
    gradient: np.ndarray
    surrogate: float
    kl: float
    clip_fraction: float
    n_steps: int


def objective_and_gradient(
    groups: Sequence[EpisodeGroup],
    advantages: Sequence[AdvantageTensor],
    policy: Policy,
    old: PolicySnapshot | None,
    ref: PolicySnapshot | None,
    cfg: ObjectiveConfig,
) -> ObjectiveResult:
    """Value and analytic gradient of the batch objective at ``policy``.

    Behavior log-probs are read from the steps. When ``old`` is given they are
    checked against it and ``StaleSnapshot`` is raised on disagreement.
    """
    if len(groups) != len(advantages):
        raise ShapeMismatch(f"{len(groups)} groups but {len(advantages)} advantage tensors")
    eps = cfg.clip_epsilon
    use_kl = cfg.kl_coeff > 0 and ref is not None
    grad = np.zeros(policy.feature_dim)
    surr_total = 0.0
    kl_total = 0.0
    n_steps = 0
    n_clipped = 0
    for group, adv in zip(groups, advantages):
        adv.check_shape(group)
        for traj, a_traj in zip(group, adv.combined_adv):
            for step, a in zip(traj.steps, a_traj):
                phi = policy.features(step.state_text, step.admissible_actions)
                if step.action_id >= phi.shape[0]:
                    raise StaleSnapshot(
                        f"action {step.action_id} but {phi.shape[0]} logits at state {step.state_text!r}"
                    )
                logp = log_softmax(phi @ policy.weights)
                if old is not None:
                    old_logp = log_softmax(phi @ old.weights)[step.action_id]
                    if abs(old_logp - step.log_prob_behavior) > STALE_TOL:
                        raise StaleSnapshot(
                            f"stored log-prob {step.log_prob_behavior} vs snapshot {old_logp}"
                        )
                probs = np.exp(logp)
                score = phi[step.action_id] - probs @ phi
                ratio = float(np.exp(logp[step.action_id] - step.log_prob_behavior))
                a = float(a)
                clipped = min(max(ratio, 1.0 - eps), 1.0 + eps)
                unclipped_val = ratio * a
                clipped_val = clipped * a
                if unclipped_val <= clipped_val:
                    surr_total += unclipped_val
                    grad += (a * ratio) * score
                else:
                    surr_total += clipped_val
                    n_clipped += 1
                if use_kl:
                    ref_logp = log_softmax(phi @ ref.weights)
                    diff = logp - ref_logp
                    kl = float(np.dot(probs, diff))
                    kl_total += kl
                    # d KL / d logits = pi * (log pi - log q - KL)
                    grad -= cfg.kl_coeff * ((probs * (diff - kl)) @ phi)
                n_steps += 1
    if n_steps == 0:
        return ObjectiveResult(0.0, grad, 0.0, 0.0, 0.0, 0)
    grad /= n_steps
    surrogate = surr_total / n_steps
    kl_mean = kl_total / n_steps
    value = surrogate - (cfg.kl_coeff * kl_mean if use_kl else 0.0)
    return ObjectiveResult(value, grad, surrogate, kl_mean, n_clipped / n_steps, n_steps)
