import numpy as np
import pytest

from proxmo.env_sim import (
    SYNONYMS,
    DifficultyLevel,
    EnvConfig,
    Episode,
    make_task,
    minimal_steps,
    oracle_action,
    reset,
    sample_task_pool,
)
from proxmo.errors import EpisodeFinished, InvalidAction, InvalidConfig
from proxmo.trainer import RandomAgent, evaluate

HARD = EnvConfig(n_containers=6, n_targets=2, horizon=10, distractor_prob=0.5)


def run_oracle(task, noise_seed=0):
    ep = Episode(task, noise_seed)
    obs, actions = ep.reset()
    steps, total = 0, 0.0
    done = False
    while not done:
        obs, r, done, actions = ep.step(oracle_action(ep))
        total += r
        steps += 1
    return ep, steps, total


class TestConfig:
    def test_horizon_must_fit_targets(self):
        with pytest.raises(InvalidConfig):
            EnvConfig(n_targets=2, horizon=5)

    @pytest.mark.parametrize("kw", [{"n_containers": 1}, {"n_targets": 3}, {"synonym_noise": 1.5}, {"distractor_prob": -0.1}])
    def test_invalid(self, kw):
        with pytest.raises(InvalidConfig):
            EnvConfig(**kw)

    def test_difficulty_level_validation(self):
        with pytest.raises(InvalidConfig):
            DifficultyLevel("x", 1.0, (("gravity", 2),))
        with pytest.raises(InvalidConfig):
            DifficultyLevel.from_dict({"weight": 1.0})
        with pytest.raises(InvalidConfig):
            EnvConfig(difficulty_mix=({"name": "bad", "weight": 1, "n_targets": 2, "horizon": 4},))


class TestTasks:
    def test_deterministic_layout(self):
        assert make_task(HARD, 17) == make_task(HARD, 17)
        assert make_task(HARD, 17) != make_task(HARD, 18)

    def test_targets_present(self):
        for s in range(50):
            task = make_task(HARD, s)
            flat = [o for c in task.contents for o in c]
            assert all(t in flat for t in task.targets)
            assert len(set(task.targets)) == 2

    def test_mixed_pool_levels(self):
        cfg = EnvConfig(difficulty_mix=(
            {"name": "easy", "weight": 3.0, "n_containers": 2},
            {"name": "hard", "weight": 1.0, "n_targets": 2, "horizon": 12},
        ))
        pool = sample_task_pool(cfg, 400, seed=0)
        frac_easy = np.mean([t.level == "easy" for t in pool])
        assert 0.65 < frac_easy < 0.85
        assert all(len(t.targets) == 2 for t in pool if t.level == "hard")
        assert sample_task_pool(cfg, 10, seed=1) == sample_task_pool(cfg, 10, seed=1)


class TestDynamics:
    def test_oracle_solves_in_minimal_steps(self):
        for s in range(100):
            task = make_task(HARD, s)
            ep, steps, total = run_oracle(task)
            assert ep.success and total == 1.0
            assert steps == minimal_steps(task) <= 2 * len(task.targets) + 2

    def test_reward_only_at_success(self):
        ep, obs, actions = reset(EnvConfig(), task_seed=3)
        _, r, done, _ = ep.step(actions.index("look"))
        assert r == 0.0 and not done

    def test_horizon_ends_episode(self):
        ep, obs, actions = reset(EnvConfig(horizon=4), task_seed=0)
        for _ in range(4):
            obs, r, done, actions = ep.step(actions.index("look"))
        assert done and not ep.success
        with pytest.raises(EpisodeFinished):
            ep.step(0)

    def test_invalid_action(self):
        ep, _, actions = reset(EnvConfig(), 0)
        with pytest.raises(InvalidAction):
            ep.step(len(actions))

    def test_random_agent_is_weak_on_hard_tier(self):
        pool = sample_task_pool(HARD, 50, seed=0)
        res = evaluate(RandomAgent(0), pool, episodes=200, seed=0)
        assert res.success_rate < 0.3


class TestNoise:
    def test_noise_free_observations_repeat(self):
        task = make_task(EnvConfig(synonym_noise=0.0), 5)
        obs = {Episode(task, n).reset()[0] for n in range(10)}
        assert len(obs) == 1

    def test_full_noise_initial_observations_distinct(self):
        task = make_task(EnvConfig(synonym_noise=1.0), 5)
        obs = [Episode(task, n).reset()[0] for n in range(8)]
        assert len(set(obs)) == 8

    def test_noise_is_monotone_superset(self):
        task_lo = make_task(EnvConfig(synonym_noise=0.3), 2)
        task_hi = make_task(EnvConfig(synonym_noise=0.7), 2)
        for n in range(20):
            lo = Episode(task_lo, n).reset()[0].split()
            hi = Episode(task_hi, n).reset()[0].split()
            base = Episode(make_task(EnvConfig(), 2), n).reset()[0].split()
            changed_lo = {i for i, (a, b) in enumerate(zip(base, lo)) if a != b}
            changed_hi = {i for i, (a, b) in enumerate(zip(base, hi)) if a != b}
            assert changed_lo <= changed_hi

    def test_synonym_sets_disjoint(self):
        seen = set(SYNONYMS)
        for syns in SYNONYMS.values():
            assert not seen & set(syns)
            seen |= set(syns)

    def test_noise_does_not_change_actions(self):
        a = reset(EnvConfig(synonym_noise=0.0), 4, 1)[2]
        b = reset(EnvConfig(synonym_noise=1.0), 4, 1)[2]
        assert a == b
