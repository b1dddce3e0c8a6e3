"""Domain types and the shared logit / reward formulas."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DimensionError


def sigmoid(z):
    """Logistic function, evaluated branch-wise so large |z| never overflows."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    if out.ndim == 0:
        return float(out)
    return out


def one_hot(context: int, m: int) -> np.ndarray:
    if not 0 <= context < m:
        raise DimensionError(f"context index {context} out of range for {m} contexts")
    v = np.zeros(m)
    v[context] = 1.0
    return v


@dataclass(frozen=True)
class RewardSpec:
    """Return ``v`` on repayment and loss ``l`` on default, both as positive fractions of principal."""

    v: float = 0.2
    l: float = 0.8

    def __post_init__(self):
        if not (self.v > 0 and self.l > 0):
            raise ValueError(f"reward parameters must be positive, got v={self.v}, l={self.l}")


@dataclass(frozen=True, eq=False)
class Applicant:
    id: int
    context: int
    features: np.ndarray
    n_contexts: int

    def __post_init__(self):
        if not 0 <= self.context < self.n_contexts:
            raise DimensionError(f"context {self.context} outside [0, {self.n_contexts})")

    @property
    def context_onehot(self) -> np.ndarray:
        return one_hot(self.context, self.n_contexts)


@dataclass(frozen=True)
class Outcome:
    applicant_id: int
    defaulted: bool


@dataclass(frozen=True, eq=False)
class Pool:
    """Column-oriented applicant pool: ids (K,), contexts (K,), features (K, d)."""

    ids: np.ndarray
    contexts: np.ndarray
    features: np.ndarray
    n_contexts: int
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.features.ndim != 2 or len(self.ids) != len(self.features) or len(self.contexts) != len(self.ids):
            raise DimensionError("pool arrays must share their leading dimension")
        object.__setattr__(self, "_index", {int(i): k for k, i in enumerate(self.ids)})

    @classmethod
    def from_applicants(cls, applicants: Sequence[Applicant]) -> "Pool":
        if not applicants:
            raise DimensionError("empty pool")
        return cls(
            ids=np.array([a.id for a in applicants], dtype=np.int64),
            contexts=np.array([a.context for a in applicants], dtype=np.int64),
            features=np.vstack([np.asarray(a.features, dtype=float) for a in applicants]),
            n_contexts=applicants[0].n_contexts,
        )

    def __len__(self):
        return len(self.ids)

    def __getitem__(self, k: int) -> Applicant:
        return Applicant(int(self.ids[k]), int(self.contexts[k]), self.features[k], self.n_contexts)

    def __iter__(self):
        return (self[k] for k in range(len(self)))

    def positions(self, ids) -> np.ndarray:
        try:
            return np.array([self._index[int(i)] for i in ids], dtype=np.int64)
        except KeyError as exc:
            raise DimensionError(f"applicant id {exc.args[0]} not in pool") from None

    @property
    def d(self) -> int:
        return self.features.shape[1]


def as_pool(pool) -> Pool:
    return pool if isinstance(pool, Pool) else Pool.from_applicants(list(pool))


def check_theta(theta, m: int | None = None, d: int | None = None) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 2:
        raise DimensionError(f"parameter matrix must be 2-D, got shape {theta.shape}")
    if (m is not None and theta.shape[0] != m) or (d is not None and theta.shape[1] != d):
        raise DimensionError(f"parameter matrix shape {theta.shape} does not match ({m}, {d})")
    if not np.all(np.isfinite(theta)):
        raise DimensionError("parameter matrix has non-finite entries")
    return theta


def margin(theta, a: Applicant) -> float:
    theta = check_theta(theta, a.n_contexts, len(a.features))
    return float(theta[a.context] @ a.features)


def pool_margins(theta, pool: Pool) -> np.ndarray:
    """Log-odds of default for every pool member under one parameter matrix."""
    theta = check_theta(theta, d=pool.d)
    return np.einsum("kd,kd->k", theta[pool.contexts], pool.features)


def default_prob(theta, a: Applicant) -> float:
    return sigmoid(margin(theta, a))


def expected_reward(p_default, spec: RewardSpec):
    return spec.v - (spec.v + spec.l) * p_default
