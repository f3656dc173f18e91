"""Query-mask distributions.

A query mask has one entry per visible unit: 1 marks an observed input, 0 a
variable the network must predict.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class QueryDistribution:
    mode: str = "bernoulli"  # "bernoulli" or "pl"
    p: float = 0.5  # probability that a unit is an input (bernoulli mode)

    def __post_init__(self):
        if self.mode not in ("bernoulli", "pl"):
            raise ValueError(f"unknown query mode {self.mode!r}")
        if self.mode == "bernoulli" and not 0.0 < self.p < 1.0:
            raise ValueError("bernoulli input probability must lie strictly inside (0, 1)")

    @classmethod
    def parse(cls, text: str) -> "QueryDistribution":
        """Parse ``"bernoulli:0.5"``, ``"bernoulli"`` or ``"pl"``."""
        text = text.strip().lower()
        if text == "pl":
            return cls("pl")
        name, _, value = text.partition(":")
        if name != "bernoulli":
            raise ValueError(f"cannot parse query distribution {text!r}")
        return cls("bernoulli", float(value) if value else 0.5)

    def __str__(self) -> str:
        return "pl" if self.mode == "pl" else f"bernoulli:{self.p:g}"


def sample_queries(n: int, v_dim: int, dist: QueryDistribution, rng: np.random.Generator) -> np.ndarray:
    """``n`` independent masks as an ``(n, v_dim)`` int8 array.

    Bernoulli masks with no output at all are redrawn whole.
    """
    if v_dim < 1:
        raise ValueError("v_dim must be >= 1")
    if dist.mode == "pl":
        q = np.ones((n, v_dim), dtype=np.int8)
        q[np.arange(n), rng.integers(0, v_dim, size=n)] = 0
        return q
    q = (rng.random((n, v_dim)) < dist.p).astype(np.int8)
    bad = np.flatnonzero(q.all(axis=1))
    while bad.size:
        q[bad] = rng.random((bad.size, v_dim)) < dist.p
        bad = bad[q[bad].all(axis=1)]
    return q


def sample_query(v_dim: int, dist: QueryDistribution, rng: np.random.Generator) -> np.ndarray:
    return sample_queries(1, v_dim, dist, rng)[0]


def generate_query_set(n_samples: int, v_dim: int, dist: QueryDistribution, seed: int) -> np.ndarray:
    """One reproducible mask per test sample."""
    return sample_queries(n_samples, v_dim, dist, np.random.default_rng(seed))
