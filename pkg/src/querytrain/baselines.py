"""Maximum-likelihood baseline: PCD training, block Gibbs sampling, Gibbs inference for queries."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import expit

from . import qtnn
from .errors import DataError, NumericalError
from .evaluation import QTNNBackend, nce
from .model import RbmParamsStd, from_standard
from .queries import QueryDistribution, generate_query_set

log = logging.getLogger(__name__)

GIBBS_EPS = 1e-3
PCD_LR_GRID = (1e-1, 3e-2, 1e-2, 3e-3)


@dataclass(eq=False)
class GibbsChainState:
    v: np.ndarray
    h: np.ndarray
    rng: np.random.Generator


@dataclass
class PcdConfig:
    hidden_units: int = 8
    epochs: int = 1000
    learning_rate: float = 1e-2
    batch_size: int = 500
    n_chains: int | None = None  # defaults to batch_size
    gibbs_steps_per_update: int = 1
    seed: int = 0
    # validation-time conditional Gibbs
    eval_samples: int = 1000
    eval_burn_in: int = 100

    def __post_init__(self):
        for name in ("hidden_units", "epochs", "batch_size", "gibbs_steps_per_update", "eval_samples"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")

    @property
    def chains(self) -> int:
        return self.n_chains or self.batch_size


def _sample(p, rng):
    return (rng.random(p.shape) < p).astype(np.float64)


def h_given_v(std: RbmParamsStd, v):
    return expit(v @ std.W_std.T + std.b_h)


def v_given_h(std: RbmParamsStd, h):
    return expit(h @ std.W_std + std.b_v)


def gibbs_sweep(std: RbmParamsStd, state: GibbsChainState) -> GibbsChainState:
    """h ~ p(h | v), then v ~ p(v | h).  Works on one chain or a stack of chains."""
    h = _sample(h_given_v(std, state.v), state.rng)
    v = _sample(v_given_h(std, h), state.rng)
    return GibbsChainState(v, h, state.rng)


def init_chains(std: RbmParamsStd, n_chains: int, rng: np.random.Generator, start=None) -> GibbsChainState:
    v = _sample(np.full((n_chains, std.n_visible), 0.5), rng) if start is None else np.array(start, dtype=np.float64)
    return GibbsChainState(v, np.zeros((v.shape[0], std.n_hidden)), rng)


# conditional inference ------------------------------------------------------------

def gibbs_conditional_marginals(std: RbmParamsStd, v, q, n_samples: int, burn_in: int,
                                rng: np.random.Generator, n_chains: int = 1) -> np.ndarray:
    """Estimate ``p(v_j = 1 | inputs)`` for every row of ``v`` by clamped Gibbs sampling.

    Inputs stay fixed at their observed values; hidden and output units are
    resampled.  ``n_samples`` retained sweeps are split evenly over
    ``n_chains`` chains per row.  Estimates are clipped to ``[eps, 1 - eps]``.
    """
    if n_samples <= 0:
        raise ValueError("n_samples must be positive")
    v = np.atleast_2d(np.asarray(v, dtype=np.float64))
    q = np.atleast_2d(np.asarray(q)).astype(bool)
    B = v.shape[0]
    obs = np.repeat(v, n_chains, axis=0)
    keep = np.repeat(q, n_chains, axis=0)
    x = np.where(keep, obs, _sample(np.full(obs.shape, 0.5), rng))
    per_chain = -(-n_samples // n_chains)
    acc = np.zeros_like(x)
    for sweep in range(burn_in + per_chain):
        h = _sample(h_given_v(std, x), rng)
        x = np.where(keep, obs, _sample(v_given_h(std, h), rng))
        if sweep >= burn_in:
            acc += x
    est = (acc / per_chain).reshape(B, n_chains, -1).mean(axis=1)
    est = np.clip(est, GIBBS_EPS, 1.0 - GIBBS_EPS)
    return np.where(q, np.clip(v, GIBBS_EPS, 1.0 - GIBBS_EPS), est)


def gibbs_conditional_inference(std: RbmParamsStd, v, q, n_samples: int, burn_in: int, seed: int,
                                n_chains: int = 1) -> np.ndarray:
    """Output-variable estimates (entries with ``q == 0``, in index order) for one query."""
    q = np.asarray(q)
    if q.all():
        return np.empty(0)
    rng = np.random.default_rng(seed)
    full = gibbs_conditional_marginals(std, v, q, n_samples, burn_in, rng, n_chains)[0]
    return full[q == 0]


class GibbsBackend:
    def __init__(self, std: RbmParamsStd, n_samples: int = 1000, burn_in: int = 100, seed: int = 0,
                 name: str = "pcd-gibbs"):
        self.std = std
        self.n_samples = n_samples
        self.burn_in = burn_in
        self.seed = seed
        self.name = name

    def predict(self, v, q, offset=0):
        rng = np.random.default_rng(np.random.SeedSequence([self.seed, offset]))
        return gibbs_conditional_marginals(self.std, v, q, self.n_samples, self.burn_in, rng)


def pcd_to_bp_backend(std: RbmParamsStd, n_layers: int = 10, clamp_l: float = qtnn.DEFAULT_CLAMP):
    """Run the standard-parameterized RBM through the unrolled network at T = 1."""
    return QTNNBackend(from_standard(std), n_layers, clamp_l, temperature=1.0, name="pcd-bp")


# PCD training ---------------------------------------------------------------------

def pcd_update(std: RbmParamsStd, batch, chains: GibbsChainState, lr: float, steps: int = 1):
    """One persistent-CD gradient-ascent step.

    Positive statistics use exact ``p(h | v)`` on the data; negative ones use
    ``p(h | v)`` on the chains after advancing them ``steps`` sweeps.
    """
    for _ in range(steps):
        chains = gibbs_sweep(std, chains)
    ph = h_given_v(std, batch)
    nh = h_given_v(std, chains.v)
    dW = ph.T @ batch / batch.shape[0] - nh.T @ chains.v / chains.v.shape[0]
    db_v = batch.mean(axis=0) - chains.v.mean(axis=0)
    db_h = ph.mean(axis=0) - nh.mean(axis=0)
    new = RbmParamsStd(std.W_std + lr * dW, std.b_v + lr * db_v, std.b_h + lr * db_h)
    return new, chains


@dataclass
class PcdHistory:
    learning_rate: float = 0.0
    valid_nce: float = float("nan")
    lr_scores: dict = field(default_factory=dict)


def _binary(data, name):
    data = np.asarray(data)
    if data.ndim != 2 or data.shape[0] == 0:
        raise DataError(f"{name} must be a non-empty 2-D array")
    if np.any((data != 0) & (data != 1)):
        raise DataError(f"{name} contains non-binary values")
    return data.astype(np.float64)


def init_std(train: np.ndarray, n_hidden: int, rng: np.random.Generator) -> RbmParamsStd:
    marg = train.mean(axis=0)
    with np.errstate(divide="ignore"):
        b_v = np.clip(qtnn.logit(marg), -3.0, 3.0)
    return RbmParamsStd(rng.normal(0.0, 0.01, size=(n_hidden, train.shape[1])), b_v, np.zeros(n_hidden))


def pcd_train(train_data, config: PcdConfig, init: RbmParamsStd | None = None) -> RbmParamsStd:
    train = _binary(train_data, "train_data")
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0]))
    std = init if init is not None else init_std(train, config.hidden_units, rng)
    start = train[rng.integers(0, train.shape[0], size=config.chains)]
    chains = init_chains(std, config.chains, rng, start)
    N = train.shape[0]
    for epoch in range(config.epochs):
        order = rng.permutation(N)
        for lo in range(0, N, config.batch_size):
            batch = train[order[lo:lo + config.batch_size]]
            try:
                std, chains = pcd_update(std, batch, chains, config.learning_rate, config.gibbs_steps_per_update)
            except ValueError as exc:  # non-finite parameters
                raise NumericalError(f"PCD diverged at epoch {epoch} (lr={config.learning_rate:g}): {exc}") from exc
    return std


def pcd_valid_nce(std: RbmParamsStd, valid, config: PcdConfig,
                  dist: QueryDistribution = QueryDistribution()) -> float:
    valid = _binary(valid, "valid_data")
    queries = generate_query_set(valid.shape[0], valid.shape[1], dist, np.random.SeedSequence([config.seed, 3]))
    backend = GibbsBackend(std, config.eval_samples, config.eval_burn_in, seed=config.seed)
    return nce(backend, valid, queries).nce


def pcd_train_lr_search(train_data, valid_data, config: PcdConfig, grid=PCD_LR_GRID):
    """Train once per learning rate; keep the model with the lowest validation NCE (Gibbs backend)."""
    best, history = None, PcdHistory()
    for lr in grid:
        cfg = replace(config, learning_rate=lr)
        try:
            std = pcd_train(train_data, cfg)
        except NumericalError as exc:
            log.warning("PCD learning rate %g diverged: %s", lr, exc)
            continue
        score = pcd_valid_nce(std, valid_data, cfg)
        history.lr_scores[lr] = score
        log.info("PCD lr %g valid NCE %.5f", lr, score)
        if best is None or score < history.valid_nce:
            best, history.valid_nce, history.learning_rate = std, score, lr
    if best is None:
        raise NumericalError("PCD diverged for every learning rate")
    return best, history

