"""Query training: minibatch ADAM over random (sample, query) pairs with early stopping."""
from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import qtnn
from ._parallel import chunked_map
from .errors import DataError, NumericalError
from .evaluation import qtnn_nce
from .grad import ParamGradients, backward
from .model import RbmParamsQT
from .queries import QueryDistribution, generate_query_set, sample_queries, sample_query  # noqa: F401

log = logging.getLogger(__name__)

LR_GRID = (3e-2, 1e-2, 3e-3, 1e-3)

# stream tags for SeedSequence-derived generators
_INIT, _SHUFFLE, _QUERY, _VALID = 0, 1, 2, 3


@dataclass
class TrainConfig:
    hidden_units: int = 8
    n_layers: int = 10
    batch_size: int = 500
    learning_rate: float = 1e-2
    max_epochs: int = 100
    patience: int = 10
    seed: int = 0
    clamp_l: float = qtnn.DEFAULT_CLAMP
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    threads: int = 1

    def __post_init__(self):
        for name in ("hidden_units", "n_layers", "batch_size", "max_epochs", "patience", "threads"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.patience > self.max_epochs:
            raise ValueError("patience must not exceed max_epochs")
        if not self.learning_rate > 0 or not self.clamp_l > 0:
            raise ValueError("learning_rate and clamp_l must be positive")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    valid_nce: float
    temperature: float
    wall_time: float


@dataclass
class TrainHistory:
    records: list = field(default_factory=list)
    best_epoch: int = 0
    learning_rate: float = 0.0

    @property
    def best_valid_nce(self) -> float:
        return min(r.valid_nce for r in self.records)

    def to_csv(self, include_time: bool = False) -> str:
        """Epoch table; wall time is left out unless asked for so that files stay reproducible."""
        cols = ["epoch", "train_loss", "valid_nce", "temperature"] + (["wall_time"] if include_time else [])
        lines = [",".join(cols)]
        for r in self.records:
            row = [str(r.epoch), repr(r.train_loss), repr(r.valid_nce), repr(r.temperature)]
            if include_time:
                row.append(f"{r.wall_time:.3f}")
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"


# optimizer -----------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class AdamState:
    m: ParamGradients
    v: ParamGradients
    step: int = 0

    @classmethod
    def zeros_like(cls, params: RbmParamsQT) -> "AdamState":
        z = ParamGradients(np.zeros_like(params.W), np.zeros_like(params.c_V), np.zeros_like(params.c_H), 0.0)
        return cls(z, z, 0)


def adam_step(params: RbmParamsQT, grads: ParamGradients, state: AdamState, config: TrainConfig):
    """One bias-corrected ADAM update of all parameters jointly."""
    b1, b2, eps, lr = config.adam_beta1, config.adam_beta2, config.adam_eps, config.learning_rate
    t = state.step + 1
    g = grads.as_dict()
    m_old, v_old = state.m.as_dict(), state.v.as_dict()
    m_new, v_new, updated = {}, {}, {}
    for name in ("W", "c_V", "c_H", "log_t"):
        m = b1 * m_old[name] + (1.0 - b1) * g[name]
        v = b2 * v_old[name] + (1.0 - b2) * g[name] ** 2
        m_hat = m / (1.0 - b1**t)
        v_hat = v / (1.0 - b2**t)
        updated[name] = np.asarray(getattr(params, name)) - lr * m_hat / (np.sqrt(v_hat) + eps)
        m_new[name], v_new[name] = m, v
    new_params = RbmParamsQT(updated["W"], updated["c_V"], updated["c_H"], float(updated["log_t"]))

    def pack(d):
        return ParamGradients(d["W"], d["c_V"], d["c_H"], float(d["log_t"]))

    return new_params, AdamState(pack(m_new), pack(v_new), t)


# training loop ---------------------------------------------------------------------

def check_binary(data, name="data") -> np.ndarray:
    data = np.asarray(data)
    if data.ndim != 2 or data.shape[0] == 0:
        raise DataError(f"{name} must be a non-empty 2-D array")
    bad = np.argwhere((data != 0) & (data != 1))
    if bad.size:
        r, c = bad[0]
        raise DataError(f"{name} has non-binary value {data[r, c]!r} at row {r}, column {c}")
    return data.astype(np.float64)


def init_params(train: np.ndarray, n_hidden: int, rng: np.random.Generator) -> RbmParamsQT:
    """Small random couplings, visible biases matched to training marginals."""
    V = train.shape[1]
    marg = train.mean(axis=0)
    with np.errstate(divide="ignore"):
        c_V = np.clip(qtnn.logit(marg), -3.0, 3.0)
    return RbmParamsQT(rng.uniform(-0.01, 0.01, size=(n_hidden, V)), c_V, np.zeros(n_hidden), 0.0)


def batch_loss_and_grad(params: RbmParamsQT, v, q, n_layers: int, clamp_l: float, threads: int = 1):
    """Batch-mean loss and gradient, reduced over fixed-size chunks in order."""
    B = v.shape[0]

    def run(a, b):
        u = qtnn.encode_evidence(v[a:b], q[a:b], clamp_l, params.n_hidden)
        _, trace = qtnn.forward(params, u, n_layers)
        ce = qtnn.masked_ce_logits(v[a:b], trace.z_v, q[a:b]).sum()
        return ce, backward(params, trace, v[a:b], q[a:b], reduce="sum")

    parts = chunked_map(run, B, threads)
    total = parts[0][1]
    for _, g in parts[1:]:
        total = total + g
    loss = sum(ce for ce, _ in parts)
    return loss / B, total.scaled(1.0 / B)


def _rng(seed, *keys):
    return np.random.default_rng(np.random.SeedSequence([seed, *keys]))


def train_qt(train_data, valid_data, config: TrainConfig,
             dist: QueryDistribution = QueryDistribution(), init: RbmParamsQT | None = None):
    """Train a QT-NN; returns the best-validation parameters and the history.

    Every random draw comes from a generator keyed by (seed, purpose,
    epoch, batch), so runs are reproducible and independent of
    ``config.threads``.
    """
    train = check_binary(train_data, "train_data")
    valid = check_binary(valid_data, "valid_data")
    if train.shape[1] != valid.shape[1]:
        raise DataError("train and validation sets have different widths")
    N, V = train.shape
    params = init if init is not None else init_params(train, config.hidden_units, _rng(config.seed, _INIT))
    state = AdamState.zeros_like(params)
    valid_q = generate_query_set(valid.shape[0], V, dist, np.random.SeedSequence([config.seed, _VALID]))

    history = TrainHistory(learning_rate=config.learning_rate)
    best, best_nce, stale = params, np.inf, 0
    start = time.perf_counter()
    for epoch in range(1, config.max_epochs + 1):
        order = _rng(config.seed, _SHUFFLE, epoch).permutation(N)
        total = 0.0
        for b, lo in enumerate(range(0, N, config.batch_size)):
            idx = order[lo:lo + config.batch_size]
            q = sample_queries(idx.size, V, dist, _rng(config.seed, _QUERY, epoch, b))
            loss, grads = batch_loss_and_grad(params, train[idx], q, config.n_layers, config.clamp_l,
                                              config.threads)
            if not np.isfinite(loss) or not grads.is_finite():
                raise NumericalError(f"non-finite loss/gradient at epoch {epoch}, batch {b} "
                                     f"(lr={config.learning_rate:g}, T={params.temperature:.4g})")
            params, state = adam_step(params, grads, state, config)
            total += loss * idx.size
        valid_nce = qtnn_nce(params, valid, valid_q, config.n_layers, config.clamp_l, config.threads)
        if not np.isfinite(valid_nce):
            raise NumericalError(f"non-finite validation NCE at epoch {epoch}")
        history.records.append(EpochRecord(epoch, total / N, valid_nce, params.temperature,
                                           time.perf_counter() - start))
        log.info("epoch %d loss %.5f valid_nce %.5f T %.4f", epoch, total / N, valid_nce, params.temperature)
        if valid_nce < best_nce:
            best, best_nce, stale = params, valid_nce, 0
            history.best_epoch = epoch
        else:
            stale += 1
            if stale >= config.patience:
                break
    return best, history


def train_qt_lr_search(train_data, valid_data, config: TrainConfig,
                       dist: QueryDistribution = QueryDistribution(), grid=LR_GRID):
    """Run :func:`train_qt` once per learning rate and keep the best on validation NCE.

    A learning rate that diverges is skipped; if all diverge the last error
    propagates.
    """
    best = None
    error = None
    for lr in grid:
        cfg = TrainConfig(**{**asdict(config), "learning_rate": lr})
        try:
            params, hist = train_qt(train_data, valid_data, cfg, dist)
        except NumericalError as exc:
            log.warning("learning rate %g diverged: %s", lr, exc)
            error = exc
            continue
        if best is None or hist.best_valid_nce < best[1].best_valid_nce:
            best = (params, hist)
    if best is None:
        raise error
    return best
