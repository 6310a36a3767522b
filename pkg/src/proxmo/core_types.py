"""Trajectories, episode groups and advantage results.

Everything here is immutable once constructed. Trajectories serialize to JSON
Lines with one object per trajectory::

    {"task_id": ..., "steps": [{"state", "actions", "action_id", "reward",
     "log_prob"}, ...], "total_return": ...}
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .errors import InvalidInput, NonBinaryReward

RETURN_TOL = 1e-12
BINARY_TOL = 1e-9


class Estimator(str, enum.Enum):
    GRPO = "GRPO"
    GRPO_PSC = "GRPO_PSC"
    HARD_GROUP = "HARD_GROUP"
    PSA = "PSA"
    PROXMO = "PROXMO"


@dataclass(frozen=True)
class Step:
    state_text: str
    action_id: int
    admissible_actions: tuple[str, ...]
    reward: float = 0.0
    log_prob_behavior: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "admissible_actions", tuple(self.admissible_actions))
        if not 0 <= self.action_id < len(self.admissible_actions):
            raise InvalidInput(
                f"action_id {self.action_id} outside {len(self.admissible_actions)} admissible actions"
            )
        if self.log_prob_behavior > 0.0:
            raise InvalidInput(f"log_prob_behavior must be <= 0, got {self.log_prob_behavior}")

    @property
    def action_text(self) -> str:
        return self.admissible_actions[self.action_id]

    def to_dict(self) -> dict[str, Any]:
        return {
            "state": self.state_text,
            "actions": list(self.admissible_actions),
            "action_id": self.action_id,
            "reward": self.reward,
            "log_prob": self.log_prob_behavior,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Step":
        return cls(
            state_text=data["state"],
            action_id=int(data["action_id"]),
            admissible_actions=tuple(data["actions"]),
            reward=float(data["reward"]),
            log_prob_behavior=float(data["log_prob"]),
        )


@dataclass(frozen=True)
class Trajectory:
    steps: tuple[Step, ...]
    task_id: str
    total_return: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "steps", tuple(self.steps))
        if not self.steps:
            raise InvalidInput("a trajectory needs at least one step")
        expected = sum(s.reward for s in self.steps)
        if abs(expected - self.total_return) > RETURN_TOL:
            raise InvalidInput(
                f"total_return {self.total_return!r} disagrees with reward sum {expected!r}"
            )

    @classmethod
    def from_steps(cls, steps: Sequence[Step], task_id: str) -> "Trajectory":
        return cls(tuple(steps), task_id, sum(s.reward for s in steps))

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def rewards(self) -> np.ndarray:
        return np.array([s.reward for s in self.steps], dtype=float)

    def to_dict(self) -> dict[str, Any]:
        return {
            "task_id": self.task_id,
            "steps": [s.to_dict() for s in self.steps],
            "total_return": self.total_return,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Trajectory":
        return cls(
            steps=tuple(Step.from_dict(s) for s in data["steps"]),
            task_id=data["task_id"],
            total_return=float(data["total_return"]),
        )


@dataclass(frozen=True)
class EpisodeGroup:
    """N trajectories rolled out from one task instance."""

    trajectories: tuple[Trajectory, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "trajectories", tuple(self.trajectories))
        if not self.trajectories:
            raise InvalidInput("an episode group needs at least one trajectory")
        ids = {t.task_id for t in self.trajectories}
        if len(ids) != 1:
            raise InvalidInput(f"trajectories in a group must share one task_id, got {sorted(ids)}")

    @property
    def group_size(self) -> int:
        return len(self.trajectories)

    @property
    def task_id(self) -> str:
        return self.trajectories[0].task_id

    @property
    def returns(self) -> np.ndarray:
        return np.array([t.total_return for t in self.trajectories], dtype=float)

    @property
    def lengths(self) -> list[int]:
        return [len(t) for t in self.trajectories]

    def __len__(self) -> int:
        return len(self.trajectories)

    def __iter__(self):
        return iter(self.trajectories)


@dataclass(frozen=True)
class AdvantageTensor:
    """Per-trajectory and per-step advantages produced by one estimator.

    ``step_adv`` and ``combined_adv`` hold one array per trajectory, each with
    that trajectory's length.
    """

    episode_adv: np.ndarray
    modulated_episode_adv: np.ndarray
    step_adv: tuple[np.ndarray, ...]
    combined_adv: tuple[np.ndarray, ...]
    estimator: Estimator

    def check_shape(self, group: EpisodeGroup) -> None:
        n = group.group_size
        if self.episode_adv.shape != (n,) or self.modulated_episode_adv.shape != (n,):
            raise InvalidInput("episode advantages do not match the group size")
        if len(self.step_adv) != n or len(self.combined_adv) != n:
            raise InvalidInput("step advantages do not match the group size")
        for traj, s, c in zip(group, self.step_adv, self.combined_adv):
            if s.shape != (len(traj),) or c.shape != (len(traj),):
                raise InvalidInput("step advantage length does not match its trajectory")

    def flat_combined(self) -> np.ndarray:
        return np.concatenate(self.combined_adv) if self.combined_adv else np.zeros(0)


def total_return(traj: Trajectory) -> float:
    return float(sum(s.reward for s in traj.steps))


def is_binary(values: Iterable[float], tol: float = BINARY_TOL) -> bool:
    return all(min(abs(v), abs(v - 1.0)) <= tol for v in values)


def success_rate(group: EpisodeGroup | Sequence[float]) -> float:
    """Fraction of trajectories with return 1; returns must be binary."""
    returns = group.returns if isinstance(group, EpisodeGroup) else np.asarray(group, dtype=float)
    if not is_binary(returns):
        raise NonBinaryReward(f"success rate needs returns in {{0, 1}}, got {list(returns)}")
    successes = sum(1 for r in returns if abs(r - 1.0) <= BINARY_TOL)
    return successes / len(returns)


def write_jsonl(trajectories: Iterable[Trajectory], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for traj in trajectories:
            f.write(json.dumps(traj.to_dict(), ensure_ascii=False) + "\n")


def read_jsonl(path: str | Path) -> list[Trajectory]:
    with open(path, encoding="utf-8") as f:
        return [Trajectory.from_dict(json.loads(line)) for line in f if line.strip()]


def group_by_task(trajectories: Iterable[Trajectory]) -> list[EpisodeGroup]:
    """Regroup a flat trajectory stream, keeping first-seen task order."""
    buckets: dict[str, list[Trajectory]] = {}
    for traj in trajectories:
        buckets.setdefault(traj.task_id, []).append(traj)
    return [EpisodeGroup(tuple(ts)) for ts in buckets.values()]

