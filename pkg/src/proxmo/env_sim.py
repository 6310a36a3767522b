"""Seeded multi-turn text fetch tasks.

A task hides one or two target objects in a room of containers. The agent
walks to containers (which reveals their contents), takes the targets, walks
to the destination and puts them down. Reward is 1.0 on the step that
deposits the last target, 0 otherwise; the episode also ends at the horizon.

Layouts are a pure function of ``(config.seed, task_seed)``. Observation text
is rendered from templates whose filler words are swapped for synonyms with
probability ``synonym_noise`` using a separate noise stream, so rollouts of the
same task see lexically different but semantically equivalent observations.
The noise draws are made whether or not a word is swapped, which couples
configs that differ only in ``synonym_noise``: a higher level replaces a
superset of the words a lower level replaces.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, fields, replace
from typing import Any, Callable, Sequence

import numpy as np

from .errors import EpisodeFinished, InvalidAction, InvalidConfig

CONTAINER_KINDS = (
    "drawer", "cabinet", "shelf", "countertop", "safe", "dresser",
    "sidetable", "desk", "armchair", "bed", "fridge", "microwave",
)
DESTINATIONS = ("sinkbasin", "garbagecan", "diningtable", "coffeetable", "stoveburner")
OBJECTS = ("mug", "apple", "book", "key", "pen", "bowl", "cd", "vase", "plate", "spoon", "towel", "candle")

# Filler words and their replacements. Lists are pairwise disjoint and never
# contain a template word, so every swap changes the text.
SYNONYMS: dict[str, tuple[str, ...]] = {
    "middle": ("center", "centre", "heart", "midst", "core", "interior", "hub"),
    "room": ("chamber", "hall", "space", "den", "lounge", "parlor", "suite"),
    "looking": ("glancing", "peering", "gazing", "staring", "scanning", "peeking", "squinting"),
    "quickly": ("briefly", "swiftly", "rapidly", "hastily", "promptly", "speedily", "fleetingly"),
    "around": ("about", "round", "across", "throughout", "everywhere", "roundabout", "nearby"),
    "arrive": ("reach", "approach", "get", "come", "walk", "step", "wander"),
    "see": ("notice", "spot", "observe", "view", "spy", "glimpse", "discern"),
    "grab": ("lift", "collect", "seize", "snatch", "fetch", "pluck", "retrieve"),
    "place": ("set", "drop", "leave", "lay", "rest", "deposit", "stash"),
    "happens": ("occurs", "changes", "results", "follows", "transpires", "ensues", "unfolds"),
    "facing": ("watching", "eyeing", "regarding", "confronting", "fronting", "beholding", "viewing"),
    "places": ("spots", "locations", "sites", "positions", "zones", "stations", "venues"),
    "task": ("goal", "mission", "job", "objective", "assignment", "aim", "chore"),
    "air": ("atmosphere", "breeze", "draft", "climate", "ambience", "mood", "aura"),
    "calm": ("still", "quiet", "serene", "hushed", "peaceful", "tranquil", "silent"),
    "lights": ("lamps", "bulbs", "lanterns", "fixtures", "sconces", "beams", "glows"),
    "dim": ("faint", "low", "soft", "muted", "pale", "weak", "murky"),
}

_WORD = re.compile(r"[A-Za-z]+")


@dataclass(frozen=True)
class DifficultyLevel:
    name: str
    weight: float
    overrides: tuple[tuple[str, Any], ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "overrides", tuple(sorted(dict(self.overrides).items())))
        bad = set(dict(self.overrides)) - _OVERRIDABLE
        if bad:
            raise InvalidConfig(f"difficulty level {self.name!r} overrides unknown keys {sorted(bad)}")
        if not self.weight > 0:
            raise InvalidConfig(f"difficulty level {self.name!r} needs a positive weight")

    def to_dict(self) -> dict[str, Any]:
        return {"name": self.name, "weight": self.weight, **dict(self.overrides)}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "DifficultyLevel":
        data = dict(data)
        try:
            name = str(data.pop("name"))
            weight = float(data.pop("weight"))
        except KeyError as exc:
            raise InvalidConfig(f"difficulty level needs {exc.args[0]!r}") from None
        return cls(name, weight, tuple(data.items()))


@dataclass(frozen=True)
class EnvConfig:
    n_containers: int = 4
    n_targets: int = 1
    horizon: int = 10
    synonym_noise: float = 0.0
    distractor_prob: float = 0.5
    seed: int = 0
    difficulty_mix: tuple[DifficultyLevel, ...] = ()

    def __post_init__(self) -> None:
        mix = tuple(
            d if isinstance(d, DifficultyLevel) else DifficultyLevel.from_dict(d) for d in self.difficulty_mix
        )
        object.__setattr__(self, "difficulty_mix", mix)
        self.validate()
        for level in mix:
            self.for_level(level).validate()

    def validate(self) -> None:
        if self.n_containers < 2 or self.n_containers > len(CONTAINER_KINDS):
            raise InvalidConfig(f"n_containers must lie in [2, {len(CONTAINER_KINDS)}], got {self.n_containers}")
        if self.n_targets not in (1, 2):
            raise InvalidConfig(f"n_targets must be 1 or 2, got {self.n_targets}")
        if self.horizon < 2 * self.n_targets + 2:
            raise InvalidConfig(f"horizon {self.horizon} too short for {self.n_targets} targets")
        if not 0.0 <= self.synonym_noise <= 1.0:
            raise InvalidConfig(f"synonym_noise must lie in [0, 1], got {self.synonym_noise}")
        if not 0.0 <= self.distractor_prob <= 1.0:
            raise InvalidConfig(f"distractor_prob must lie in [0, 1], got {self.distractor_prob}")
        if self.seed < 0:
            raise InvalidConfig("seed must be non-negative")

    def for_level(self, level: DifficultyLevel) -> "EnvConfig":
        return replace(self, difficulty_mix=(), **dict(level.overrides))

    def to_dict(self) -> dict[str, Any]:
        out = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "difficulty_mix"}
        out["difficulty_mix"] = [d.to_dict() for d in self.difficulty_mix]
        return out


_OVERRIDABLE = {"n_containers", "n_targets", "horizon", "synonym_noise", "distractor_prob"}


@dataclass(frozen=True)
class TaskInstance:
    task_id: str
    level: str
    config: EnvConfig
    task_seed: int
    containers: tuple[str, ...]
    contents: tuple[tuple[str, ...], ...]
    destination: str
    targets: tuple[str, ...]

    @property
    def goal_text(self) -> str:
        return f"put {' and '.join('the ' + t for t in self.targets)} in the {self.destination}"


def make_task(config: EnvConfig, task_seed: int, level: str = "default") -> TaskInstance:
    """Deterministic layout for ``(config, task_seed)``."""
    if task_seed < 0:
        raise InvalidConfig("task_seed must be non-negative")
    config.validate()
    rng = np.random.default_rng([config.seed, task_seed, 11])
    kinds = rng.choice(len(CONTAINER_KINDS), size=config.n_containers, replace=False)
    containers = tuple(f"{CONTAINER_KINDS[k]} {int(rng.integers(1, 4))}" for k in kinds)
    destination = f"{DESTINATIONS[int(rng.integers(len(DESTINATIONS)))]} 1"
    objs = rng.permutation(len(OBJECTS))
    targets = tuple(OBJECTS[k] for k in objs[: config.n_targets])
    others = [OBJECTS[k] for k in objs[config.n_targets :]]
    contents: list[list[str]] = [[] for _ in containers]
    for obj in targets:
        contents[int(rng.integers(len(containers)))].append(obj)
    for c in range(len(containers)):
        if rng.random() < config.distractor_prob:
            contents[c].append(others[c % len(others)])
    for c in contents:
        c.sort()
    task_id = f"{level}-{config.seed}-{task_seed}"
    return TaskInstance(
        task_id, level, config, task_seed, containers, tuple(tuple(c) for c in contents), destination, targets
    )


def sample_task_pool(config: EnvConfig, n_tasks: int, seed: int) -> list[TaskInstance]:
    """Draw ``n_tasks`` tasks, picking each one's difficulty level by weight."""
    if n_tasks < 1:
        raise InvalidConfig(f"n_tasks must be >= 1, got {n_tasks}")
    rng = np.random.default_rng([config.seed, seed, 23])
    levels = config.difficulty_mix
    pool = []
    if not levels:
        for _ in range(n_tasks):
            pool.append(make_task(config, int(rng.integers(2**31))))
        return pool
    w = np.array([lv.weight for lv in levels], dtype=float)
    w /= w.sum()
    for _ in range(n_tasks):
        k = int(rng.choice(len(levels), p=w))
        task_seed = int(rng.integers(2**31))
        pool.append(make_task(config.for_level(levels[k]), task_seed, levels[k].name))
    return pool


def _join(items: Sequence[str]) -> str:
    items = [f"a {x}" for x in items]
    if len(items) <= 1:
        return "".join(items)
    return ", ".join(items[:-1]) + " and " + items[-1]


class Episode:
    """One rollout of a task. Mutable; use ``step`` until ``done``."""

    def __init__(self, task: TaskInstance, noise_seed: int = 0):
        self.task = task
        self.noise_seed = noise_seed
        self._noise = np.random.default_rng([task.config.seed, task.task_seed, noise_seed, 37])
        self.contents = [list(c) for c in task.contents]
        self.location: int | None = None  # container index, -1 for the destination
        self.carrying: list[str] = []
        self.deposited: set[str] = set()
        self.checked: set[int] = set()
        self.t = 0
        self.done = False
        self.success = False
        self._actions: list[tuple[str, Callable[[], tuple[str, float]]]] = []

    # -- rendering -----------------------------------------------------
    def _noisy(self, text: str) -> str:
        q = self.task.config.synonym_noise

        def swap(m: re.Match) -> str:
            word = m.group(0)
            syns = SYNONYMS.get(word.lower())
            if syns is None:
                return word
            u = self._noise.random()
            k = int(self._noise.integers(len(syns)))
            if u >= q:
                return word
            out = syns[k]
            return out.capitalize() if word[0].isupper() else out

        return _WORD.sub(swap, text)

    def _status(self) -> str:
        carry = f"You are carrying: {', '.join(self.carrying)}." if self.carrying else "You are carrying nothing."
        unchecked = [c for i, c in enumerate(self.task.containers) if i not in self.checked]
        places = f"Unchecked places: {', '.join(unchecked)}." if unchecked else "Unchecked places: none."
        return f"{carry} {places} Your task is to {self.task.goal_text}. The air is calm and the lights are dim."

    def _observe(self, feedback: str) -> str:
        return self._noisy(f"{feedback} {self._status()}")

    def _where(self) -> str:
        if self.location is None:
            return "the middle of a room"
        if self.location == -1:
            return self.task.destination
        return self.task.containers[self.location]

    def _describe_here(self) -> str:
        if self.location == -1:
            items = sorted(self.deposited)
        else:
            items = self.contents[self.location]
        name = self._where()
        return f"On the {name}, you see {_join(items)}." if items else f"On the {name}, you see nothing."

    # -- dynamics ------------------------------------------------------
    def _build_actions(self) -> list[str]:
        task = self.task
        acts: list[tuple[str, Callable[[], tuple[str, float]]]] = []
        for i, name in enumerate(task.containers):
            if self.location != i:
                acts.append((f"go to {name}", lambda i=i: self._go(i)))
        if self.location != -1:
            acts.append((f"go to {task.destination}", lambda: self._go(-1)))
        if self.location is not None and self.location >= 0:
            here = task.containers[self.location]
            for obj in self.contents[self.location]:
                acts.append((f"take {obj} from {here}", lambda obj=obj: self._take(obj)))
        if self.location == -1 and self.carrying:
            acts.append((f"put {' and '.join(self.carrying)} in {task.destination}", self._put))
        acts.append(("look", self._look))
        self._actions = acts
        return [a for a, _ in acts]

    def _go(self, i: int) -> tuple[str, float]:
        self.location = i
        if i >= 0:
            self.checked.add(i)
        return f"You arrive at {self._where()}. {self._describe_here()}", 0.0

    def _take(self, obj: str) -> tuple[str, float]:
        self.contents[self.location].remove(obj)
        self.carrying.append(obj)
        return f"You grab the {obj} from the {self._where()}.", 0.0

    def _put(self) -> tuple[str, float]:
        items = list(self.carrying)
        self.carrying.clear()
        self.deposited.update(items)
        msg = f"You place the {' and the '.join(items)} in the {self.task.destination}."
        if all(t in self.deposited for t in self.task.targets):
            self.success = True
            return msg, 1.0
        return msg, 0.0

    def _look(self) -> tuple[str, float]:
        if self.location is None:
            return "You are in the middle of a room. Nothing happens.", 0.0
        return f"You are facing the {self._where()}. {self._describe_here()}", 0.0

    def reset(self) -> tuple[str, list[str]]:
        names = ", ".join(f"a {c}" for c in self.task.containers)
        feedback = f"You are in the middle of a room. Looking quickly around you, you see {names}."
        return self._observe(feedback), self._build_actions()

    def step(self, action_id: int) -> tuple[str, float, bool, list[str]]:
        if self.done:
            raise EpisodeFinished(f"episode of {self.task.task_id} already finished")
        if not 0 <= action_id < len(self._actions):
            raise InvalidAction(f"action_id {action_id} outside {len(self._actions)} actions")
        feedback, reward = self._actions[action_id][1]()
        self.t += 1
        if reward > 0 or self.t >= self.task.config.horizon:
            self.done = True
        return self._observe(feedback), reward, self.done, self._build_actions()

    @property
    def admissible_actions(self) -> list[str]:
        return [a for a, _ in self._actions]


def reset(config: EnvConfig, task_seed: int, noise_seed: int = 0) -> tuple[Episode, str, list[str]]:
    """Start an episode on the ``task_seed`` layout of ``config``."""
    episode = Episode(make_task(config, task_seed), noise_seed)
    obs, actions = episode.reset()
    return episode, obs, actions


def oracle_action(episode: Episode) -> int:
    """Shortest-path scripted action using the hidden layout."""
    task = episode.task
    actions = episode.admissible_actions
    pending = [t for t in task.targets if t not in episode.deposited and t not in episode.carrying]
    if not pending:
        if episode.location == -1:
            return next(i for i, a in enumerate(actions) if a.startswith("put "))
        return actions.index(f"go to {task.destination}")
    if episode.location is not None and episode.location >= 0:
        here = episode.contents[episode.location]
        for t in pending:
            if t in here:
                return actions.index(f"take {t} from {task.containers[episode.location]}")
    target = pending[0]
    c = next(i for i, objs in enumerate(episode.contents) if target in objs)
    return actions.index(f"go to {task.containers[c]}")


def minimal_steps(task: TaskInstance) -> int:
    holders = {i for i, objs in enumerate(task.contents) for t in task.targets if t in objs}
    return len(holders) + len(task.targets) + 2
