"""Scoring rules for the greedy, Thompson and information-directed agents.

All three agents share one underwriting step: score every applicant in the
pool (lower is better), rank ascending with random tie-breaking, approve the
first ``n_loans``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .bayes import GaussianPosterior, PosteriorBank, sample_many
from .errors import ConfigError
from .model import Applicant, Pool, RewardSpec, as_pool, expected_reward, pool_margins, sigmoid

AGENT_NAMES = ("GRE", "THS", "IDS")


@dataclass(frozen=True)
class AgentKind:
    name: str
    p: float = 3.0

    def __post_init__(self):
        name = self.name.upper()
        if name not in AGENT_NAMES:
            raise ConfigError(f"unknown agent {self.name!r}; expected one of {', '.join(AGENT_NAMES)}", key="agent.kind")
        object.__setattr__(self, "name", name)
        if not self.p > 0:
            raise ConfigError(f"IDS exponent must be positive, got {self.p}", key="agent.p")

    @classmethod
    def parse(cls, text: str, p: float = 3.0) -> "AgentKind":
        """``gre``, ``ths``, ``ids`` or ``ids:<p>``."""
        name, _, exponent = text.strip().partition(":")
        return cls(name, float(exponent) if exponent else p)

    @property
    def label(self) -> str:
        return self.name.lower()


GRE = AgentKind("GRE")
THS = AgentKind("THS")
IDS = AgentKind("IDS", 3.0)


@dataclass(frozen=True)
class MonteCarloConfig:
    n_samples: int = 256
    ids_epsilon: float = 1e-12
    # "sample": E[max_a' r] - E[r_a];  "mean": max_a' E[r] - E[r_a]
    regret_variant: Literal["sample", "mean"] = "sample"

    def __post_init__(self):
        if self.n_samples < 2:
            raise ConfigError("n_samples must be >= 2", key="mc.n_samples")
        if not self.ids_epsilon > 0:
            raise ConfigError("ids_epsilon must be positive", key="mc.ids_epsilon")
        if self.regret_variant not in ("sample", "mean"):
            raise ConfigError(f"unknown regret_variant {self.regret_variant!r}", key="mc.regret_variant")


@dataclass(frozen=True)
class ActionSet:
    approved: tuple


def binary_entropy(p):
    """Entropy of a Bernoulli(p) in nats, with 0 log 0 = 0."""
    p = np.asarray(p, dtype=float)
    q = 1.0 - p
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -np.where(p > 0, p * np.log(p), 0.0) - np.where(q > 0, q * np.log(q), 0.0)
    return h


def bald(probs: np.ndarray) -> np.ndarray:
    """Mutual information from (S, K) sampled default probabilities, clamped at 0."""
    gain = binary_entropy(probs.mean(axis=0)) - binary_entropy(probs).mean(axis=0)
    return np.maximum(gain, 0.0)


def regret_from_rewards(rewards: np.ndarray, variant: str = "sample") -> np.ndarray:
    """Expected regret of each column of an (S, K) matrix of sampled rewards."""
    mean_r = rewards.mean(axis=0)
    if variant == "sample":
        best = rewards.max(axis=1).mean()
    else:
        best = mean_r.max()
    return np.maximum(best - mean_r, 0.0)


def score_greedy(bank: PosteriorBank, a: Applicant) -> float:
    return sigmoid(bank[a.context].mean @ a.features)


def score_thompson(theta_tilde, a: Applicant) -> float:
    return sigmoid(np.asarray(theta_tilde)[a.context] @ a.features)


def info_gain(posterior: GaussianPosterior, a: Applicant, n_samples: int, rng) -> float:
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    draws = sample_many(posterior, n_samples, rng)
    probs = sigmoid(draws @ a.features)
    return float(bald(probs[:, None])[0])


def _sampled_probs(draws: np.ndarray, pool: Pool) -> np.ndarray:
    # draws: (S, M, d) -> (S, K)
    return sigmoid(np.einsum("skd,kd->sk", draws[:, pool.contexts, :], pool.features))


def expected_regret(bank: PosteriorBank, pool, a: Applicant, spec: RewardSpec, n_samples: int, rng,
                    variant: str = "sample") -> float:
    pool = as_pool(pool)
    k = int(pool.positions([a.id])[0])
    rewards = expected_reward(_sampled_probs(bank.sample_many(n_samples, rng), pool), spec)
    return float(regret_from_rewards(rewards, variant)[k])


def score_ids(regret, gain, p, epsilon=1e-12):
    return np.power(regret, p) / np.maximum(gain, epsilon)


def pool_scores(kind: AgentKind, bank: PosteriorBank, pool: Pool, spec: RewardSpec,
                mc: MonteCarloConfig, rng) -> np.ndarray:
    """Score every pool member for one time step."""
    if kind.name == "GRE":
        return sigmoid(pool_margins(bank.means(), pool))
    if kind.name == "THS":
        # one shared draw for the whole pool
        return sigmoid(pool_margins(bank.sample(rng), pool))
    probs = _sampled_probs(bank.sample_many(mc.n_samples, rng), pool)
    regret = regret_from_rewards(expected_reward(probs, spec), mc.regret_variant)
    return score_ids(regret, bald(probs), kind.p, mc.ids_epsilon)


def rank_select(scores: np.ndarray, n: int, rng) -> np.ndarray:
    """Positions of the ``n`` lowest scores; ties fall in a uniformly random order."""
    perm = rng.permutation(len(scores))
    order = perm[np.argsort(scores[perm], kind="stable")]
    return order[:n]


def select_positions(kind, bank, pool: Pool, n_loans, spec, mc, rng) -> np.ndarray:
    if n_loans > len(pool):
        raise ConfigError(f"cannot approve {n_loans} loans from a pool of {len(pool)}", key="env.n_loans")
    return rank_select(pool_scores(kind, bank, pool, spec, mc, rng), n_loans, rng)


def underwrite_step(kind: AgentKind, bank: PosteriorBank, pool, n_loans: int, spec: RewardSpec,
                    mc: MonteCarloConfig, rng) -> ActionSet:
    pool = as_pool(pool)
    idx = select_positions(kind, bank, pool, n_loans, spec, mc, rng)
    return ActionSet(tuple(int(i) for i in pool.ids[idx]))
