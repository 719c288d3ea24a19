"""Experiment configuration: presets, YAML loading and validation."""
from __future__ import annotations

import copy
from dataclasses import dataclass
from pathlib import Path

import yaml

from .environments import ENV_PRESETS, env_preset
from .loop import LearnerConfig, RunConfig, StageConfig, staged_budgets
from .quasirandom import SaltelliDesign
from .space import SPACE_PRESETS


class ConfigError(ValueError):
    pass


_STAGE_DEFAULTS = {
    "eps_pre": 0.7,
    "eps_post": 0.15,
    "new_data_weight": 2.5,
    "epochs": 15,
    "duplicate": False,
    "warm_start": True,
}

PRESETS = {
    "desk": {
        "environment": {"name": "tabletop-6d", "options": {}},
        "sampler": {"n_base": 32, "second_order": True},
        "stage": {**_STAGE_DEFAULTS, "samples_per_stage": 128},
        "learner": {"kind": "tabular", "options": {"smoothing": [1.0, 1.0]}},
        "eval_trials": 5,
        "seed": 0,
        "baseline": {"kind": "random", "order": "random1", "budgets": None},
    },
    "paper": {
        "environment": {"name": "tabletop-6d", "options": {}},
        "sampler": {"n_base": 140, "second_order": True},
        "stage": {**_STAGE_DEFAULTS, "samples_per_stage": 470},
        "learner": {"kind": "logistic", "options": {"learning_rate": 1e-4, "batch_size": 64}},
        "eval_trials": 5,
        "seed": 0,
        "baseline": {"kind": "random", "order": "random1", "budgets": [1960, 2796, 350], "budget": 4756},
    },
}

_TOP_KEYS = {"preset", "environment", "space", "sampler", "stage", "learner", "eval_trials", "seed", "baseline"}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "options":
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved configuration; ``raw`` is the fully merged dict echoed into every output."""

    raw: dict

    @classmethod
    def resolve(cls, path=None, preset: str | None = None, seed: int | None = None) -> "ExperimentConfig":
        user = {}
        if path is not None:
            try:
                text = Path(path).read_text()
            except OSError as exc:
                raise ConfigError(f"cannot read config {path}: {exc}") from exc
            try:
                user = yaml.safe_load(text) or {}
            except yaml.YAMLError as exc:
                raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
            if not isinstance(user, dict):
                raise ConfigError("config file must hold a mapping at top level")
        unknown = set(user) - _TOP_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        name = preset or user.get("preset") or "desk"
        if name not in PRESETS:
            raise ConfigError(f"unknown preset {name!r}; known: {sorted(PRESETS)}")
        raw = _merge(PRESETS[name], user)
        raw["preset"] = name
        if seed is not None:
            raw["seed"] = seed
        cfg = cls(raw)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        r = self.raw
        if r["environment"].get("name") not in ENV_PRESETS:
            raise ConfigError(f"unknown environment {r['environment'].get('name')!r}; known: {sorted(ENV_PRESETS)}")
        if r.get("space") is not None and r["space"] not in SPACE_PRESETS:
            raise ConfigError(f"unknown space preset {r['space']!r}; known: {sorted(SPACE_PRESETS)}")
        if not isinstance(r.get("seed"), int) or isinstance(r.get("seed"), bool):
            raise ConfigError("seed must be an explicit integer")
        if r["learner"].get("kind") not in ("tabular", "logistic"):
            raise ConfigError(f"unknown learner kind {r['learner'].get('kind')!r}")
        if r["baseline"].get("kind") not in ("random", "staged", "random-curriculum"):
            raise ConfigError(f"unknown baseline kind {r['baseline'].get('kind')!r}")
        try:
            self.run_config()
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid stage/sampler settings: {exc}") from exc
        n = r["sampler"].get("n_base")
        if not isinstance(n, int) or n < 1:
            raise ConfigError("sampler.n_base must be a positive integer")

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    def environment(self):
        env_cfg = self.raw["environment"]
        try:
            env = env_preset(env_cfg["name"], **dict(env_cfg.get("options") or {}))
        except TypeError as exc:
            raise ConfigError(f"bad options for environment {env_cfg['name']!r}: {exc}") from exc
        if self.raw.get("space") is not None:
            want = SPACE_PRESETS[self.raw["space"]]()
            if want.to_dict() != env.space.to_dict():
                raise ConfigError(f"space preset {self.raw['space']!r} does not match environment {env_cfg['name']!r}")
        return env

    def run_config(self) -> RunConfig:
        r = self.raw
        return RunConfig(
            n_base=int(r["sampler"]["n_base"]),
            second_order=bool(r["sampler"].get("second_order", True)),
            stage=StageConfig(**r["stage"]),
            learner=LearnerConfig(r["learner"]["kind"], dict(r["learner"].get("options") or {})),
            eval_trials=int(r["eval_trials"]),
        )

    def design_rows(self, k: int) -> int:
        s = self.raw["sampler"]
        return SaltelliDesign.rows_for(k, int(s["n_base"]), bool(s.get("second_order", True)))

    def cassl_budget(self, k: int) -> int:
        return self.design_rows(k) + k * int(self.raw["stage"]["samples_per_stage"])

    def baseline_budget(self, k: int) -> int:
        b = self.raw["baseline"].get("budget")
        return int(b) if b is not None else self.cassl_budget(k)

    def staged_budgets(self, k: int) -> list[int]:
        b = self.raw["baseline"].get("budgets")
        if b is not None:
            return [int(v) for v in b]
        return staged_budgets(self.baseline_budget(k), self.design_rows(k))
