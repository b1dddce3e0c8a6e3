"""Episode runner, replication management and metric aggregation."""

from __future__ import annotations

import hashlib
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Literal, Sequence

import numpy as np

from .agents import AgentKind, MonteCarloConfig, select_positions
from .bayes import GaussianPrior, PosteriorBank, laplace, map_fit
from .environments import (
    EnvConfig,
    TrueModel,
    gen_logistic_model,
    gen_nn_model,
    oracle_positions,
    recruit_pool,
)
from .errors import ConfigError, ConvergenceError, NumericalError, ShapeError, SimulationError
from .model import expected_reward

SERIES = ("regret", "cumulative_regret", "expected_reward", "cumulative_reward", "realized_reward")
STREAMS = ("model", "pool", "outcomes", "agent")


@dataclass(frozen=True)
class ExperimentConfig:
    env: EnvConfig = field(default_factory=EnvConfig)
    env_model: Literal["logistic", "nn"] = "logistic"
    agent: AgentKind = field(default_factory=lambda: AgentKind("GRE"))
    horizon: int = 100
    replications: int = 1
    base_seed: int = 0
    mc: MonteCarloConfig = field(default_factory=MonteCarloConfig)

    def __post_init__(self):
        if self.env_model not in ("logistic", "nn"):
            raise ConfigError(f"unknown env_model {self.env_model!r}", key="experiment.env_model")
        if self.horizon < 1:
            raise ConfigError("horizon must be >= 1", key="experiment.horizon")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1", key="experiment.replications")
        if not 0 <= self.base_seed < 2**64:
            raise ConfigError("base_seed must be an unsigned 64-bit integer", key="experiment.base_seed")


@dataclass(eq=False)
class RunMetrics:
    regret: np.ndarray
    cumulative_regret: np.ndarray
    expected_reward: np.ndarray
    cumulative_reward: np.ndarray
    realized_reward: np.ndarray
    allocation: np.ndarray  # (T, M) approved-loan counts
    final_means: np.ndarray  # (M, d)
    env_hash: str = ""

    @property
    def horizon(self) -> int:
        return len(self.regret)


@dataclass(eq=False)
class AggregateMetrics:
    mean: dict
    stderr: dict
    allocation: np.ndarray  # (T, M) mean fractions of N, context order
    replications: int
    n_loans: int
    minimum: dict = field(default_factory=dict)
    maximum: dict = field(default_factory=dict)
    # (T, M) fractions sorted largest-first within each run, then averaged
    ranked_allocation: np.ndarray | None = None

    def __post_init__(self):
        if self.ranked_allocation is None:
            self.ranked_allocation = -np.sort(-self.allocation, axis=1)

    @property
    def horizon(self) -> int:
        return len(self.mean["regret"])


def episode_streams(base_seed: int, replication_index: int) -> dict:
    """Independent named generators for one replication."""
    children = np.random.SeedSequence([base_seed, replication_index]).spawn(len(STREAMS))
    return {name: np.random.default_rng(ss) for name, ss in zip(STREAMS, children)}


def prefix_sum(x: np.ndarray) -> np.ndarray:
    return np.add.accumulate(x)


def run_episode(
    cfg: ExperimentConfig,
    replication_index: int,
    *,
    policy: Literal["agent", "oracle"] = "agent",
    true_model: TrueModel | None = None,
    initial_bank: PosteriorBank | None = None,
    learn: bool = True,
) -> RunMetrics:
    """Run one replication of the underwriting loop.

    ``policy="oracle"`` approves the true top-N set every step (harness self
    test). ``true_model``, ``initial_bank`` and ``learn=False`` exist for
    controlled sanity episodes.
    """
    env = cfg.env
    streams = episode_streams(cfg.base_seed, replication_index)
    logistic = cfg.env_model == "logistic"
    if true_model is None:
        gen = gen_logistic_model if logistic else gen_nn_model
        true_model = gen(env, streams["model"])
    prior = GaussianPrior.standard(env.d_features)
    bank = initial_bank if initial_bank is not None else PosteriorBank.from_prior(prior, env.m_contexts)

    T, M, N, d = cfg.horizon, env.m_contexts, env.n_loans, env.d_features
    regret = np.empty(T)
    exp_reward = np.empty(T)
    realized = np.empty(T)
    allocation = np.zeros((T, M), dtype=np.int64)

    capacity = T * N
    obs_x = [np.empty((capacity, d)) for _ in range(M)]
    obs_y = [np.empty(capacity) for _ in range(M)]
    n_obs = [0] * M

    digest = hashlib.sha256()
    for arr in true_model.arrays():
        digest.update(np.ascontiguousarray(arr, dtype=float).tobytes())

    spec = env.reward
    pool = None
    for t in range(T):
        new_pool = recruit_pool(env, pool, streams["pool"], intercept=logistic, id_offset=t * env.k_pool)
        if new_pool is not pool:
            digest.update(new_pool.contexts.tobytes())
            digest.update(new_pool.features.tobytes())
        pool = new_pool
        probs = true_model.default_probs(pool)
        # one uniform per pool member keeps outcome draws independent of the agent
        uniforms = streams["outcomes"].random(len(pool))
        digest.update(uniforms.tobytes())

        best_idx = oracle_positions(probs, pool.ids, N)
        if policy == "oracle":
            idx = best_idx
        else:
            idx = select_positions(cfg.agent, bank, pool, N, spec, cfg.mc, streams["agent"])

        best = float(np.sum(expected_reward(probs[best_idx], spec)))
        got = float(np.sum(expected_reward(probs[idx], spec)))
        regret[t] = max(best - got, 0.0)
        exp_reward[t] = got
        defaults = uniforms[idx] < probs[idx]
        realized[t] = float(np.sum(np.where(defaults, -spec.l, spec.v)))
        np.add.at(allocation[t], pool.contexts[idx], 1)

        if not learn:
            continue
        for m in np.unique(pool.contexts[idx]):
            sel = idx[pool.contexts[idx] == m]
            lo, hi = n_obs[m], n_obs[m] + len(sel)
            obs_x[m][lo:hi] = pool.features[sel]
            obs_y[m][lo:hi] = defaults[pool.contexts[idx] == m]
            n_obs[m] = hi
            try:
                theta, neg_hess = map_fit(obs_x[m][:hi], obs_y[m][:hi], prior, warm_start=bank[m].mean)
                bank = bank.replace(int(m), laplace(theta, neg_hess))
            except (ConvergenceError, NumericalError) as exc:
                raise SimulationError(
                    f"replication {replication_index}, step {t}, context {m}: {exc}",
                    replication=replication_index, step=t, context=int(m),
                ) from exc

    return RunMetrics(
        regret=regret,
        cumulative_regret=prefix_sum(regret),
        expected_reward=exp_reward,
        cumulative_reward=prefix_sum(exp_reward),
        realized_reward=realized,
        allocation=allocation,
        final_means=bank.means(),
        env_hash=digest.hexdigest(),
    )


def aggregate(runs: Sequence[RunMetrics]) -> AggregateMetrics:
    if not runs:
        raise ShapeError("no runs to aggregate")
    shape = runs[0].allocation.shape
    if any(r.allocation.shape != shape for r in runs):
        raise ShapeError("runs differ in horizon or context count")
    n_loans = int(runs[0].allocation[0].sum())
    if any(np.any(r.allocation.sum(axis=1) != n_loans) for r in runs):
        raise ShapeError("runs differ in loans per step")
    R = len(runs)
    mean, stderr, lo, hi = {}, {}, {}, {}
    for name in SERIES:
        stack = np.vstack([getattr(r, name) for r in runs])
        mean[name] = stack.mean(axis=0)
        stderr[name] = stack.std(axis=0, ddof=1) / np.sqrt(R) if R > 1 else np.zeros(stack.shape[1])
        lo[name] = stack.min(axis=0)
        hi[name] = stack.max(axis=0)
    fractions = [r.allocation / n_loans for r in runs]
    alloc = np.mean(fractions, axis=0)
    # context labels are arbitrary across runs, so rank before averaging
    ranked = np.mean([-np.sort(-f, axis=1) for f in fractions], axis=0)
    return AggregateMetrics(mean, stderr, alloc, R, n_loans, lo, hi, ranked)


def allocation_bands(agg: AggregateMetrics) -> np.ndarray:
    """Per-step allocation fractions by rank, largest first.

    Each run's fractions are sorted before averaging, so band r is the mean
    share of the r-th most-funded context whichever context that was.
    """
    return -np.sort(-agg.ranked_allocation, axis=1)


def diversity_index(agg: AggregateMetrics) -> np.ndarray:
    """Normalized entropy of the rank-averaged allocation per step; 0 when there is one context."""
    f = agg.ranked_allocation
    m = f.shape[1]
    if m == 1:
        return np.zeros(len(f))
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(f > 0, f * np.log(f), 0.0)
    return np.clip(-terms.sum(axis=1) / np.log(m), 0.0, 1.0)


def worker_count() -> int:
    cap = os.environ.get("UNDERWRITE_THREADS")
    n = os.cpu_count() or 1
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise ConfigError(f"UNDERWRITE_THREADS must be an integer, got {cap!r}", key="UNDERWRITE_THREADS")
    return n


def _episode_job(args):
    cfg, rep, policy = args
    return run_episode(cfg, rep, policy=policy)


def run_replications(cfg: ExperimentConfig, *, policy="agent", workers: int | None = None) -> list[RunMetrics]:
    """All replications of one config, returned in replication-index order."""
    jobs = [(cfg, r, policy) for r in range(cfg.replications)]
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(jobs) == 1:
        return [_episode_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(_episode_job, jobs))


def run_agents(cfg: ExperimentConfig, agents: Sequence[AgentKind], workers: int | None = None) -> dict:
    """Paired comparison: every agent sees the same environment streams."""
    return {a.label: run_replications(replace(cfg, agent=a), workers=workers) for a in agents}
