"""Rollout collection, advantage estimation and the policy-gradient loop."""

from __future__ import annotations

import json
import math
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .core_types import AdvantageTensor, EpisodeGroup, Estimator, Step, Trajectory
from .env_sim import EnvConfig, Episode, TaskInstance, sample_task_pool
from .episode_credit import PscConfig, modulated_advantages, zscore_advantages
from .errors import InvalidConfig, NumericalDivergence
from .objective import ObjectiveConfig, combine_advantages, objective_and_gradient
from .policy import Policy, greedy_action, sample_action, sgd_update
from .step_credit import (
    PsaConfig,
    group_size_counts,
    hard_group_advantages,
    psa_step_advantages,
    size_fractions,
)
from .text_sim import Vocabulary, build_vocabulary

# offsets keep the training, evaluation and rollout streams apart
_EVAL_STREAM = 1 << 40
_TASK_STREAM = 1 << 20

Agent = Callable[[Episode, str, Sequence[str]], int]


@dataclass(frozen=True)
class TrainConfig:
    estimator: Estimator = Estimator.PROXMO
    group_size: int = 8
    tasks_per_iter: int = 4
    iterations: int = 150
    lr: float = 0.05
    seed: int = 0
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    eval_episodes: int = 200
    eval_every: int = 0
    feature_dim: int = 512
    hash_seed: int = 0
    zscore_ddof: int = 0
    psc: PscConfig = field(default_factory=PscConfig)
    psa: PsaConfig = field(default_factory=PsaConfig)
    objective: ObjectiveConfig = field(default_factory=ObjectiveConfig)
    env: EnvConfig = field(default_factory=EnvConfig)

    def __post_init__(self) -> None:
        object.__setattr__(self, "estimator", Estimator(self.estimator))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if self.group_size < 2:
            raise InvalidConfig(f"group_size must be >= 2, got {self.group_size}")
        if self.tasks_per_iter < 1 or self.iterations < 0 or self.eval_episodes < 0 or self.eval_every < 0:
            raise InvalidConfig("tasks_per_iter >= 1 and iterations, eval_episodes, eval_every >= 0 required")
        if not (self.lr > 0 and math.isfinite(self.lr)):
            raise InvalidConfig(f"lr must be a positive finite number, got {self.lr}")
        if self.zscore_ddof not in (0, 1):
            raise InvalidConfig("zscore_ddof must be 0 or 1")
        if self.seed < 0 or any(s < 0 for s in self.seeds):
            raise InvalidConfig("seeds must be non-negative")
        if not self.seeds:
            raise InvalidConfig("seeds must be non-empty")


# -- rollouts ------------------------------------------------------------


def rollout(policy: Policy, task: TaskInstance, noise_seed: int, rng: np.random.Generator) -> Trajectory:
    episode = Episode(task, noise_seed)
    obs, actions = episode.reset()
    steps = []
    done = False
    while not done:
        action_id, logp = sample_action(policy, obs, actions, rng)
        next_obs, reward, done, next_actions = episode.step(action_id)
        steps.append(Step(obs, action_id, tuple(actions), reward, logp))
        obs, actions = next_obs, next_actions
    return Trajectory.from_steps(steps, task.task_id)


def collect_group(policy: Policy, task: TaskInstance, n: int, rng: np.random.Generator) -> EpisodeGroup:
    """``n`` rollouts of one task, each with its own observation-noise seed."""
    if n < 2:
        raise InvalidConfig(f"group size must be >= 2, got {n}")
    noise_seeds = rng.integers(2**31, size=n)
    return EpisodeGroup(tuple(rollout(policy, task, int(s), rng) for s in noise_seeds))


def group_rng(seed: int, iteration: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, iteration, index, 5])


# -- advantages ----------------------------------------------------------


def needs_vocabulary(estimator: Estimator) -> bool:
    return Estimator(estimator) in (Estimator.PSA, Estimator.PROXMO)


def batch_vocabulary(groups: Sequence[EpisodeGroup]) -> Vocabulary:
    return build_vocabulary([s.state_text for g in groups for traj in g for s in traj.steps])


def compute_advantages(
    group: EpisodeGroup,
    estimator: Estimator,
    psc: PscConfig,
    psa: PsaConfig,
    omega: float,
    vocab: Vocabulary | None = None,
    ddof: int = 0,
) -> AdvantageTensor:
    estimator = Estimator(estimator)
    episode = zscore_advantages(group.returns, ddof=ddof)
    if estimator in (Estimator.GRPO_PSC, Estimator.PROXMO):
        modulated = modulated_advantages(group, psc, ddof=ddof)
    else:
        modulated = episode.copy()
    if estimator in (Estimator.PSA, Estimator.PROXMO):
        if vocab is None:
            raise InvalidConfig(f"{estimator.value} needs a batch vocabulary")
        step = psa_step_advantages(group, vocab, psa)
    elif estimator is Estimator.HARD_GROUP:
        step = hard_group_advantages(group, psa)
    else:
        step = [np.zeros(len(t)) for t in group]
    combined = combine_advantages(modulated, step, omega)
    return AdvantageTensor(episode, modulated, tuple(step), combined, estimator)


# -- evaluation ----------------------------------------------------------


@dataclass(frozen=True)
class EvalResult:
    success_rate: float
    by_level: dict[str, float]
    episodes: int


class GreedyAgent:
    def __init__(self, policy: Policy):
        self.policy = policy

    def __call__(self, episode: Episode, obs: str, actions: Sequence[str]) -> int:
        return greedy_action(self.policy, obs, actions)


class RandomAgent:
    def __init__(self, seed: int = 0):
        self.rng = np.random.default_rng(seed)

    def __call__(self, episode: Episode, obs: str, actions: Sequence[str]) -> int:
        return int(self.rng.integers(len(actions)))


def evaluate(agent: Agent | Policy, task_pool: Sequence[TaskInstance], episodes: int, seed: int = 0) -> EvalResult:
    """Run ``episodes`` rollouts cycling over ``task_pool``; policies act greedily."""
    if isinstance(agent, Policy):
        agent = GreedyAgent(agent)
    if episodes == 0 or not task_pool:
        return EvalResult(0.0, {}, 0)
    rng = np.random.default_rng([seed, 3])
    wins: dict[str, list[int]] = {}
    for k in range(episodes):
        task = task_pool[k % len(task_pool)]
        episode = Episode(task, int(rng.integers(2**31)))
        obs, actions = episode.reset()
        done = False
        while not done:
            obs, _, done, actions = episode.step(agent(episode, obs, actions))
        wins.setdefault(task.level, []).append(int(episode.success))
    total = sum(sum(v) for v in wins.values())
    by_level = {name: sum(v) / len(v) for name, v in sorted(wins.items())}
    return EvalResult(total / episodes, by_level, episodes)


def eval_pool(config: TrainConfig) -> list[TaskInstance]:
    return sample_task_pool(config.env, max(config.eval_episodes, 1), _EVAL_STREAM + config.seed)


# -- training ------------------------------------------------------------


@dataclass
class RunReport:
    config: TrainConfig
    iterations: list[dict[str, Any]] = field(default_factory=list)
    timings: list[dict[str, float]] = field(default_factory=list)
    initial_eval: EvalResult | None = None
    final_eval: EvalResult | None = None
    policy: Policy | None = None

    @property
    def final_success(self) -> float:
        return self.final_eval.success_rate if self.final_eval else float("nan")

    def jsonl_lines(self) -> list[str]:
        return [json.dumps(rec, sort_keys=True) for rec in self.iterations]

    def summary_rows(self) -> list[dict[str, Any]]:
        rows = []
        for rec, tm in zip(self.iterations, self.timings):
            rows.append({
                "iteration": rec["iteration"],
                "estimator": rec["estimator"],
                "success_rate": rec["success_rate"],
                "objective": rec["objective"],
                "kl": rec["kl"],
                "singleton_frac": rec["size_1"],
                "wall_ms_rollout": round(tm["rollout"] * 1e3, 3),
                "wall_ms_advantage": round(tm["advantage"] * 1e3, 3),
                "wall_ms_update": round(tm["update"] * 1e3, 3),
            })
        return rows


SUMMARY_COLUMNS = (
    "iteration", "estimator", "success_rate", "objective", "kl", "singleton_frac",
    "wall_ms_rollout", "wall_ms_advantage", "wall_ms_update",
)


def _stats(values: np.ndarray) -> dict[str, float]:
    if values.size == 0:
        return {"mean": 0.0, "std": 0.0, "min": 0.0, "max": 0.0}
    return {
        "mean": float(values.mean()),
        "std": float(values.std()),
        "min": float(values.min()),
        "max": float(values.max()),
    }


def _check_finite(value: float, grad: np.ndarray, iteration: int) -> None:
    if not math.isfinite(value) or not np.all(np.isfinite(grad)):
        raise NumericalDivergence(f"non-finite objective or gradient at iteration {iteration}")


def _update(policy: Policy, grad: np.ndarray, lr: float, iteration: int) -> Policy:
    with np.errstate(over="ignore", invalid="ignore"):
        new = policy.weights + lr * grad
    if not np.all(np.isfinite(new)):
        raise NumericalDivergence(f"policy weights overflowed at iteration {iteration}")
    return sgd_update(policy, grad, lr)


def train(
    config: TrainConfig,
    threads: int = 1,
    on_iteration: Callable[[dict[str, Any]], None] | None = None,
) -> RunReport:
    """Run ``config.iterations`` rollout / advantage / update cycles.

    Results depend only on ``config``: each group draws from its own seeded
    stream and reductions run in group order, so ``threads`` changes speed but
    not output.
    """
    policy = Policy.zeros(config.feature_dim, config.hash_seed)
    ref = policy.snapshot()
    pool = eval_pool(config)
    report = RunReport(config)
    report.initial_eval = evaluate(policy, pool, config.eval_episodes, seed=config.seed)
    executor = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    omega = config.objective.omega
    try:
        for it in range(1, config.iterations + 1):
            t0 = time.perf_counter()
            tasks = sample_task_pool(config.env, config.tasks_per_iter, _TASK_STREAM * config.seed + it)

            def collect(k: int, policy=policy) -> EpisodeGroup:
                return collect_group(policy, tasks[k], config.group_size, group_rng(config.seed, it, k))

            if executor is None:
                groups = [collect(k) for k in range(len(tasks))]
            else:
                groups = list(executor.map(collect, range(len(tasks))))
            t1 = time.perf_counter()

            vocab = batch_vocabulary(groups) if needs_vocabulary(config.estimator) else None
            advs = [
                compute_advantages(g, config.estimator, config.psc, config.psa, omega, vocab, config.zscore_ddof)
                for g in groups
            ]
            t2 = time.perf_counter()

            old = policy.snapshot()
            first = None
            for _ in range(config.objective.epochs):
                res = objective_and_gradient(groups, advs, policy, old, ref, config.objective)
                _check_finite(res.value, res.gradient, it)
                first = first or res
                policy = _update(policy, res.gradient, config.lr, it)
            t3 = time.perf_counter()

            counts: Counter = Counter()
            first_counts: Counter = Counter()
            for g in groups:
                counts.update(group_size_counts(g))
                first_counts.update(group_size_counts(g, first_step_only=True))
            combined = np.concatenate([a.flat_combined() for a in advs])
            step_vals = np.concatenate([np.concatenate(a.step_adv) for a in advs])
            returns = np.concatenate([g.returns for g in groups])
            record: dict[str, Any] = {
                "iteration": it,
                "estimator": config.estimator.value,
                "success_rate": float(returns.mean()),
                "objective": first.value,
                "surrogate": first.surrogate,
                "kl": first.kl,
                "clip_fraction": first.clip_fraction,
                "grad_norm": float(np.linalg.norm(first.gradient)),
                "n_steps": first.n_steps,
                "mean_length": first.n_steps / len(returns),
                "adv": _stats(combined),
                "episode_adv_abs_mean": float(np.mean(np.abs(np.concatenate([a.modulated_episode_adv for a in advs])))),
                "step_adv_abs_mean": float(np.mean(np.abs(step_vals))),
                **size_fractions(counts),
                **{f"first_step_{k}": v for k, v in size_fractions(first_counts).items()},
            }
            if config.eval_every and it % config.eval_every == 0 and it != config.iterations:
                record["eval_success"] = evaluate(policy, pool, config.eval_episodes, seed=config.seed).success_rate
            if it == config.iterations:
                report.final_eval = evaluate(policy, pool, config.eval_episodes, seed=config.seed)
                record["eval_success"] = report.final_eval.success_rate
            report.iterations.append(record)
            report.timings.append({"rollout": t1 - t0, "advantage": t2 - t1, "update": t3 - t2})
            if on_iteration is not None:
                on_iteration(record)
    finally:
        if executor is not None:
            executor.shutdown()
    if config.iterations == 0:
        report.final_eval = report.initial_eval
    report.policy = policy
    return report

