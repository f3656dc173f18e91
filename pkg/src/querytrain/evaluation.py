"""Normalized cross-entropy (NCE) over arbitrary queries, for any inference backend.

NCE is the cross-entropy summed over every predicted entry of the test set,
divided by what a constant 0.5 predictor would score on the same entries
(``n_outputs * log 2``).  Values below 1 beat the trivial predictor.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from . import qtnn
from ._parallel import chunked_map
from .model import RbmParamsQT, as_qt, as_std

# clip for backends that may return hard 0/1 estimates
PROB_FLOOR = 1e-15

DATASETS = ("Adult", "Conn4", "Digits", "DNA", "Mushr", "NIPS", "OCR", "RCV1", "Web")

# Published full-scale NCE values (lower is better); reference constants only.
PUBLISHED_NCE = {
    "AdVIL-BP": (0.224, 0.248, 0.530, 0.778, 0.192, 0.795, 0.470, 0.475, 0.142),
    "AdVIL-Gibbs": (0.229, 0.238, 0.493, 0.782, 0.218, 0.797, 0.471, 0.477, 0.163),
    "PCD-BP": (0.215, 0.285, 0.530, 0.763, 0.159, 0.801, 0.428, 0.457, 0.140),
    "PCD-Gibbs": (0.218, 0.288, 0.516, 0.765, 0.159, 0.804, 0.427, 0.458, 0.144),
    "QT-NN": (0.167, 0.148, 0.472, 0.766, 0.124, 0.787, 0.377, 0.452, 0.133),
}


def published_nce(method: str, dataset: str) -> float:
    return PUBLISHED_NCE[method][DATASETS.index(dataset)]


class InferenceBackend(Protocol):
    name: str

    def predict(self, v: np.ndarray, q: np.ndarray, offset: int = 0) -> np.ndarray:
        """Probabilities of 1 for every visible unit, shape like ``v``.

        Only entries with ``q == 0`` are scored.  ``offset`` is the index of
        the first row within the whole evaluation set (used for seeding).
        """
        ...


class BackendError(RuntimeError):
    pass


class UniformBackend:
    name = "uniform"

    def predict(self, v, q, offset=0):
        return np.full(np.shape(v), 0.5)


class QTNNBackend:
    def __init__(self, params, n_layers: int = 10, clamp_l: float = qtnn.DEFAULT_CLAMP,
                 temperature: float | None = None, name: str = "qtnn"):
        self.params = as_qt(params)
        self.n_layers = n_layers
        self.clamp_l = clamp_l
        self.temperature = temperature
        self.name = name

    def predict(self, v, q, offset=0):
        return qtnn.infer(self.params, v, q, self.n_layers, self.clamp_l, self.temperature).v_hat


@dataclass
class EvalReport:
    backend: str
    dataset: str
    query_seed: int | None
    per_sample_ce: np.ndarray = field(repr=False)
    n_outputs: int
    nce: float

    def csv_row(self) -> str:
        seed = "" if self.query_seed is None else str(self.query_seed)
        return f"{self.backend},{self.dataset},{seed},{self.nce:.6f}"


def normalized_ce(total_ce: float, n_outputs: int, base: float = math.e) -> float:
    """``total_ce / (n_outputs * log 2)`` with both logs taken in ``base``.

    ``total_ce`` must be expressed in nats; the ratio is base-independent.
    """
    if n_outputs <= 0:
        raise ValueError("query set has no output variables")
    scale = 1.0 / math.log(base)
    return (total_ce * scale) / (n_outputs * math.log(2.0) * scale)


def per_sample_ce(v, p, q) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    p = np.clip(np.asarray(p, dtype=np.float64), PROB_FLOOR, 1.0 - PROB_FLOOR)
    out = np.asarray(q) == 0
    ce = -(v * np.log(p) + (1.0 - v) * np.log1p(-p))
    return np.where(out, ce, 0.0).sum(axis=1)


def nce(backend, test_data, queries, dataset: str = "", query_seed: int | None = None,
        threads: int = 1) -> EvalReport:
    data = np.atleast_2d(np.asarray(test_data, dtype=np.float64))
    queries = np.atleast_2d(np.asarray(queries))
    if data.shape != queries.shape:
        raise ValueError(f"data {data.shape} and queries {queries.shape} are not aligned")

    def run(a, b):
        try:
            p = backend.predict(data[a:b], queries[a:b], offset=a)
        except Exception as exc:
            raise BackendError(f"backend {backend.name!r} failed on samples {a}..{b - 1}: {exc}") from exc
        return per_sample_ce(data[a:b], p, queries[a:b])

    ce = np.concatenate(chunked_map(run, data.shape[0], threads))
    n_out = int(np.sum(queries == 0))
    return EvalReport(backend.name, dataset, query_seed, ce, n_out, normalized_ce(float(ce.sum()), n_out))


def compare(backends, test_data, queries, dataset: str = "", query_seed: int | None = None,
            threads: int = 1) -> list:
    return [nce(b, test_data, queries, dataset, query_seed, threads) for b in backends]


def format_report(reports) -> str:
    lines = ["backend,dataset,seed,nce"] + [r.csv_row() for r in reports]
    return "\n".join(lines) + "\n"


BACKENDS = ("qtnn", "pcd-bp", "pcd-gibbs", "oracle", "uniform")


def make_backend(kind: str, params, n_layers: int = 10, clamp_l: float = qtnn.DEFAULT_CLAMP,
                 gibbs_samples: int = 1000, gibbs_burn_in: int = 100, seed: int = 0):
    """Build a backend from a checkpoint of either parameterization."""
    if kind == "qtnn":
        return QTNNBackend(params, n_layers, clamp_l)
    if kind == "pcd-bp":
        from .baselines import pcd_to_bp_backend

        return pcd_to_bp_backend(as_std(params), n_layers=n_layers, clamp_l=clamp_l)
    if kind == "pcd-gibbs":
        from .baselines import GibbsBackend

        return GibbsBackend(as_std(params), gibbs_samples, gibbs_burn_in, seed)
    if kind == "oracle":
        from .oracle import ExactBackend

        return ExactBackend(as_qt(params))
    if kind == "uniform":
        return UniformBackend()
    raise ValueError(f"unknown backend {kind!r}; choose from {', '.join(BACKENDS)}")


def qtnn_nce(params: RbmParamsQT, data, queries, n_layers: int, clamp_l: float = qtnn.DEFAULT_CLAMP,
             threads: int = 1) -> float:
    return nce(QTNNBackend(params, n_layers, clamp_l), data, queries, threads=threads).nce
