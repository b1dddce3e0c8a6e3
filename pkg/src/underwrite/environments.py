"""Synthetic lending environments.

Two ground-truth default models are supported: a per-context logistic
regression with a fixed intercept, and a per-context two-hidden-layer
sigmoid network without hidden biases. Features are iid standard normal.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .agents import ActionSet
from .errors import ConfigError, DimensionError
from .model import Applicant, Outcome, Pool, RewardSpec, as_pool, default_prob, expected_reward, pool_margins, sigmoid


class PoolMode(str, enum.Enum):
    FIXED = "fixed"
    RENEWED = "renewed"


@dataclass(frozen=True)
class EnvConfig:
    m_contexts: int = 4
    d_features: int = 10
    k_pool: int = 100
    n_loans: int = 1
    mode: PoolMode = PoolMode.FIXED
    reward: RewardSpec = field(default_factory=RewardSpec)
    logistic_intercept: float = -1.0
    nn_output_bias: float = -1.15

    def __post_init__(self):
        object.__setattr__(self, "mode", PoolMode(self.mode))
        if self.m_contexts < 1:
            raise ConfigError("m_contexts must be >= 1", key="env.m_contexts")
        if self.d_features < 1:
            raise ConfigError("d_features must be >= 1", key="env.d_features")
        if not 1 <= self.n_loans < self.k_pool:
            raise ConfigError(
                f"need 1 <= n_loans < k_pool, got n_loans={self.n_loans}, k_pool={self.k_pool}", key="env.n_loans"
            )


@dataclass(frozen=True, eq=False)
class LogisticModel:
    theta: np.ndarray  # (M, d), column 0 is the intercept

    def default_probs(self, pool: Pool) -> np.ndarray:
        return sigmoid(pool_margins(self.theta, pool))

    def arrays(self):
        return (self.theta,)


@dataclass(frozen=True, eq=False)
class NeuralNetModel:
    w1: np.ndarray  # (M, d, d)
    w2: np.ndarray  # (M, d, d)
    w_out: np.ndarray  # (M, d)
    b_out: float

    def default_probs(self, pool: Pool) -> np.ndarray:
        c = pool.contexts
        h1 = sigmoid(np.einsum("kij,kj->ki", self.w1[c], pool.features))
        h2 = sigmoid(np.einsum("kij,kj->ki", self.w2[c], h1))
        return sigmoid(np.einsum("ki,ki->k", self.w_out[c], h2) + self.b_out)

    def arrays(self):
        return (self.w1, self.w2, self.w_out, np.array([self.b_out]))


TrueModel = LogisticModel | NeuralNetModel


def gen_logistic_model(cfg: EnvConfig, rng) -> LogisticModel:
    theta = rng.standard_normal((cfg.m_contexts, cfg.d_features))
    theta[:, 0] = cfg.logistic_intercept
    return LogisticModel(theta)


def gen_nn_model(cfg: EnvConfig, rng) -> NeuralNetModel:
    m, d = cfg.m_contexts, cfg.d_features
    w1 = rng.standard_normal((m, d, d))
    w2 = rng.standard_normal((m, d, d))
    w_out = rng.standard_normal((m, d))
    return NeuralNetModel(w1, w2, w_out, float(cfg.nn_output_bias))


def true_default_prob(model: TrueModel, a: Applicant) -> float:
    if isinstance(model, LogisticModel):
        return default_prob(model.theta, a)
    if model.w1.shape[1:] != (len(a.features), len(a.features)) or a.context >= len(model.w1):
        raise DimensionError("applicant does not match network dimensions")
    return float(model.default_probs(Pool.from_applicants([a]))[0])


def recruit_pool(cfg: EnvConfig, prev: Pool | None, rng, *, intercept: bool = True, id_offset: int = 0) -> Pool:
    """Draw a fresh pool, or hand back ``prev`` unchanged in fixed-pool mode.

    With ``intercept`` set (logistic environment) column 0 is the constant 1.
    """
    if cfg.mode is PoolMode.FIXED and prev is not None:
        return prev
    k = cfg.k_pool
    contexts = rng.integers(0, cfg.m_contexts, size=k)
    features = rng.standard_normal((k, cfg.d_features))
    if intercept:
        features[:, 0] = 1.0
    return Pool(np.arange(id_offset, id_offset + k, dtype=np.int64), contexts, features, cfg.m_contexts)


def realize_outcomes(model: TrueModel, approved, rng) -> list[Outcome]:
    pool = as_pool(approved)
    defaults = rng.random(len(pool)) < model.default_probs(pool)
    return [Outcome(int(i), bool(y)) for i, y in zip(pool.ids, defaults)]


def oracle_positions(probs: np.ndarray, ids: np.ndarray, n_loans: int) -> np.ndarray:
    """Positions of the ``n_loans`` lowest default probabilities, ties broken by id."""
    return np.lexsort((ids, probs))[:n_loans]


def oracle_action(model: TrueModel, pool, n_loans: int, spec: RewardSpec):
    pool = as_pool(pool)
    if n_loans > len(pool):
        raise ConfigError(f"cannot approve {n_loans} loans from a pool of {len(pool)}", key="env.n_loans")
    probs = model.default_probs(pool)
    idx = oracle_positions(probs, pool.ids, n_loans)
    best = float(np.sum(expected_reward(probs[idx], spec)))
    return ActionSet(tuple(int(i) for i in pool.ids[idx])), best


def step_regret(model: TrueModel, pool, chosen: ActionSet, n_loans: int, spec: RewardSpec) -> float:
    pool = as_pool(pool)
    _, best = oracle_action(model, pool, n_loans, spec)
    probs = model.default_probs(pool)
    got = float(np.sum(expected_reward(probs[pool.positions(chosen.approved)], spec)))
    return max(best - got, 0.0)
