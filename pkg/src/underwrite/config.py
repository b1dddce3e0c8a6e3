"""Experiment configuration: presets, key=value overrides, INI-style echo files."""

from __future__ import annotations

import configparser
import io
from dataclasses import replace
from pathlib import Path
from typing import Iterable

from .agents import AgentKind, MonteCarloConfig
from .environments import EnvConfig, PoolMode
from .errors import ConfigError
from .harness import ExperimentConfig
from .model import RewardSpec

# section -> key -> parser
FIELDS = {
    "experiment": {"env_model": str, "horizon": int, "replications": int, "base_seed": int},
    "env": {
        "m_contexts": int,
        "d_features": int,
        "k_pool": int,
        "n_loans": int,
        "mode": str,
        "v": float,
        "l": float,
        "logistic_intercept": float,
        "nn_output_bias": float,
    },
    "agent": {"kind": str, "p": float},
    "mc": {"n_samples": int, "ids_epsilon": float, "regret_variant": str},
}
# written into echo files, skipped on read
ECHO_SECTIONS = ("run", "env_hashes")

_SF = {"env.n_loans": 1, "env.mode": "fixed", "experiment.horizon": 2000}
_MR = {"env.n_loans": 10, "env.mode": "renewed", "experiment.horizon": 500}
PRESETS = {
    "sf-logistic": {**_SF, "experiment.env_model": "logistic"},
    "mr-logistic": {**_MR, "experiment.env_model": "logistic"},
    "sf-nn": {**_SF, "experiment.env_model": "nn"},
    "mr-nn": {**_MR, "experiment.env_model": "nn"},
    "sf-single-context": {**_SF, "experiment.env_model": "logistic", "env.m_contexts": 1},
    "mr-single-context": {**_MR, "experiment.env_model": "logistic", "env.m_contexts": 1},
}

BASE = {
    "experiment.env_model": "logistic",
    "experiment.horizon": 500,
    "experiment.replications": 50,
    "experiment.base_seed": 0,
    "env.m_contexts": 4,
    "env.d_features": 10,
    "env.k_pool": 100,
    "env.n_loans": 10,
    "env.mode": "renewed",
    "env.v": 0.2,
    "env.l": 0.8,
    "env.logistic_intercept": -1.0,
    "env.nn_output_bias": -1.15,
    "agent.kind": "IDS",
    "agent.p": 3.0,
    "mc.n_samples": 256,
    "mc.ids_epsilon": 1e-12,
    "mc.regret_variant": "sample",
}


def _qualify(key: str) -> str:
    key = key.strip()
    if "." in key:
        section, name = key.split(".", 1)
        if name in FIELDS.get(section, {}):
            return key
        raise ConfigError(f"unknown config key {key!r}", key=key)
    matches = [f"{s}.{key}" for s, names in FIELDS.items() if key in names]
    if len(matches) != 1:
        raise ConfigError(f"unknown config key {key!r}", key=key)
    return matches[0]


def _coerce(qualified: str, value) -> object:
    section, name = qualified.split(".", 1)
    kind = FIELDS[section][name]
    if isinstance(value, str):
        value = value.strip()
    try:
        return kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{qualified}: cannot parse {value!r} as {kind.__name__}", key=qualified) from None


def parse_overrides(items: Iterable[str]) -> dict:
    out = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"override {item!r} is not of the form key=value", key=item)
        q = _qualify(key)
        out[q] = _coerce(q, value)
    return out


def from_flat(flat: dict) -> ExperimentConfig:
    def build(key, fn):
        try:
            return fn()
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}", key=key) from None

    f = {k: _coerce(k, v) for k, v in flat.items()}
    reward = build("env.v", lambda: RewardSpec(f["env.v"], f["env.l"]))
    mode = build("env.mode", lambda: PoolMode(f["env.mode"].lower()))
    env = EnvConfig(
        m_contexts=f["env.m_contexts"],
        d_features=f["env.d_features"],
        k_pool=f["env.k_pool"],
        n_loans=f["env.n_loans"],
        mode=mode,
        reward=reward,
        logistic_intercept=f["env.logistic_intercept"],
        nn_output_bias=f["env.nn_output_bias"],
    )
    return ExperimentConfig(
        env=env,
        env_model=f["experiment.env_model"],
        agent=AgentKind(f["agent.kind"], f["agent.p"]),
        horizon=f["experiment.horizon"],
        replications=f["experiment.replications"],
        base_seed=f["experiment.base_seed"],
        mc=MonteCarloConfig(f["mc.n_samples"], f["mc.ids_epsilon"], f["mc.regret_variant"]),
    )


def to_flat(cfg: ExperimentConfig) -> dict:
    env = cfg.env
    return {
        "experiment.env_model": cfg.env_model,
        "experiment.horizon": cfg.horizon,
        "experiment.replications": cfg.replications,
        "experiment.base_seed": cfg.base_seed,
        "env.m_contexts": env.m_contexts,
        "env.d_features": env.d_features,
        "env.k_pool": env.k_pool,
        "env.n_loans": env.n_loans,
        "env.mode": env.mode.value,
        "env.v": env.reward.v,
        "env.l": env.reward.l,
        "env.logistic_intercept": env.logistic_intercept,
        "env.nn_output_bias": env.nn_output_bias,
        "agent.kind": cfg.agent.name,
        "agent.p": cfg.agent.p,
        "mc.n_samples": cfg.mc.n_samples,
        "mc.ids_epsilon": cfg.mc.ids_epsilon,
        "mc.regret_variant": cfg.mc.regret_variant,
    }


def _fmt(value) -> str:
    return repr(value) if isinstance(value, float) else str(value)


def emit_config(cfg: ExperimentConfig, extra: dict | None = None) -> str:
    """INI text; ``extra`` maps echo-only section names to key/value dicts."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    for q, value in to_flat(cfg).items():
        section, name = q.split(".", 1)
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, name, _fmt(value))
    for section, items in (extra or {}).items():
        if section not in ECHO_SECTIONS:
            raise ValueError(f"echo section {section!r} not allowed")
        parser.add_section(section)
        for k, v in items.items():
            parser.set(section, str(k), str(v))
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def read_config_text(text: str) -> dict:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config file: {exc}") from None
    flat = {}
    for section in parser.sections():
        if section in ECHO_SECTIONS:
            continue
        for name, value in parser.items(section):
            q = _qualify(f"{section}.{name}")
            flat[q] = _coerce(q, value)
    return flat


def read_echo_section(text: str, section: str) -> dict:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    parser.read_string(text)
    return dict(parser.items(section)) if parser.has_section(section) else {}


def parse_config(source: str, overrides: Iterable[str] = ()) -> ExperimentConfig:
    """Expand a preset name or read a config file, then apply ``key=value`` overrides."""
    if source in PRESETS:
        flat = {**BASE, **PRESETS[source]}
    else:
        path = Path(source)
        if not path.is_file():
            raise ConfigError(f"unknown preset or missing config file {source!r}; presets: {', '.join(PRESETS)}")
        flat = {**BASE, **read_config_text(path.read_text())}
    flat.update(parse_overrides(overrides))
    return from_flat(flat)


def with_seed(cfg: ExperimentConfig, seed: int | None) -> ExperimentConfig:
    return cfg if seed is None else replace(cfg, base_seed=seed)
