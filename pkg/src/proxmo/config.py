"""YAML run configuration.

A config file has up to five sections, each optional::

    trainer:   {estimator, group_size, tasks_per_iter, iterations, lr, seed,
                seeds, eval_episodes, eval_every, feature_dim, hash_seed,
                zscore_ddof}
    psc:       {alpha, beta}
    psa:       {temperature, gamma, self_mode}
    objective: {omega, clip_epsilon, kl_coeff, epochs}
    env:       {n_containers, n_targets, horizon, synonym_noise,
                distractor_prob, seed, difficulty_mix: [{name, weight, ...}]}

Unknown sections or keys are errors. ``dump_config`` writes every field with
defaults filled in, and loading its output reproduces the same config.
"""

from __future__ import annotations

from dataclasses import fields
from pathlib import Path
from typing import Any

import yaml

from .env_sim import EnvConfig
from .episode_credit import PscConfig
from .errors import InvalidConfig, ProxmoError
from .objective import ObjectiveConfig
from .step_credit import PsaConfig
from .trainer import TrainConfig

SECTIONS = {"psc": PscConfig, "psa": PsaConfig, "objective": ObjectiveConfig, "env": EnvConfig}
_TRAINER_KEYS = {f.name for f in fields(TrainConfig)} - set(SECTIONS)


def _build(cls, section: str, data: Any):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise InvalidConfig(f"section {section!r} must be a mapping")
    allowed = {f.name for f in fields(cls)}
    unknown = set(data) - allowed
    if unknown:
        raise InvalidConfig(f"unknown key(s) in {section!r}: {', '.join(sorted(unknown))}")
    try:
        return cls(**data)
    except ProxmoError:
        raise
    except (TypeError, ValueError) as exc:
        raise InvalidConfig(f"bad value in {section!r}: {exc}") from exc


def config_from_dict(data: dict[str, Any] | None) -> TrainConfig:
    data = dict(data or {})
    unknown = set(data) - set(SECTIONS) - {"trainer"}
    if unknown:
        raise InvalidConfig(f"unknown section(s): {', '.join(sorted(unknown))}")
    trainer = dict(data.get("trainer") or {})
    bad = set(trainer) - _TRAINER_KEYS
    if bad:
        raise InvalidConfig(f"unknown key(s) in 'trainer': {', '.join(sorted(bad))}")
    parts = {name: _build(cls, name, data.get(name)) for name, cls in SECTIONS.items()}
    try:
        return TrainConfig(**trainer, **parts)
    except ProxmoError:
        raise
    except (TypeError, ValueError) as exc:
        raise InvalidConfig(f"bad value in 'trainer': {exc}") from exc


def config_to_dict(config: TrainConfig) -> dict[str, Any]:
    trainer = {k: getattr(config, k) for k in sorted(_TRAINER_KEYS)}
    trainer["estimator"] = config.estimator.value
    trainer["seeds"] = list(config.seeds)
    out: dict[str, Any] = {"trainer": trainer}
    out["psc"] = {"alpha": config.psc.alpha, "beta": config.psc.beta}
    out["psa"] = {
        "temperature": config.psa.temperature,
        "gamma": config.psa.gamma,
        "self_mode": config.psa.self_mode.value,
    }
    obj = config.objective
    out["objective"] = {
        "omega": obj.omega, "clip_epsilon": obj.clip_epsilon, "kl_coeff": obj.kl_coeff, "epochs": obj.epochs,
    }
    out["env"] = config.env.to_dict()
    return out


def dump_config(config: TrainConfig) -> str:
    return yaml.safe_dump(config_to_dict(config), sort_keys=False)


def load_config(path: str | Path) -> TrainConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InvalidConfig(f"cannot read config file {str(path)!r}: {exc.strerror}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise InvalidConfig(f"config file {str(path)!r} is not valid YAML: {exc}") from exc
    if data is not None and not isinstance(data, dict):
        raise InvalidConfig(f"config file {str(path)!r} must contain a mapping")
    return config_from_dict(data)

