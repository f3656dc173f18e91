"""Exact inference by brute-force enumeration, for small models only.

State ``k`` of a group of ``n`` binary units has unit ``j`` equal to bit
``j`` of ``k``.  Joint indices put the visible bits low:
``idx = v_idx + (h_idx << V)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import OracleSizeError
from .model import RbmParamsQT, as_qt

MAX_VARS = 24
MATERIALIZE_LIMIT = 20
_BLOCK = 1 << 20  # joint states evaluated per block


def state_bits(start: int, stop: int, n: int) -> np.ndarray:
    idx = np.arange(start, stop, dtype=np.int64)
    return ((idx[:, None] >> np.arange(n)) & 1).astype(np.float64)


def _check_size(params):
    n = params.n_visible + params.n_hidden
    if n > MAX_VARS:
        raise OracleSizeError(f"exact enumeration refused: V+H = {n} exceeds the limit of {MAX_VARS}")


@dataclass(frozen=True, eq=False)
class JointTable:
    """Exact normalized distribution of an RBM.

    ``visible_log_marginal`` (2^V entries) is always present.  The full
    joint ``log_probs`` (2^(V+H) entries) is only materialized up to
    ``MATERIALIZE_LIMIT`` variables.
    """

    params: RbmParamsQT
    log_z: float
    visible_log_marginal: np.ndarray
    log_probs: np.ndarray | None = None

    @property
    def n_visible(self) -> int:
        return self.params.n_visible

    @property
    def n_hidden(self) -> int:
        return self.params.n_hidden


def enumerate_joint(params, materialize: bool | None = None) -> JointTable:
    """Enumerate every joint state, streaming log-sum-exp over state blocks."""
    params = as_qt(params)
    _check_size(params)
    V, H = params.n_visible, params.n_hidden
    if materialize is None:
        materialize = V + H <= MATERIALIZE_LIMIT
    elif materialize and V + H > MATERIALIZE_LIMIT:
        raise OracleSizeError(f"refusing to materialize 2^{V + H} joint states")
    W = params.W
    a_h = params.c_H - W.sum(axis=1)
    a_v = params.c_V - W.sum(axis=0)

    nv_states, nh_states = 1 << V, 1 << H
    v_chunk = min(nv_states, _BLOCK)
    h_chunk = max(1, _BLOCK // v_chunk)
    lv = np.full(nv_states, -np.inf)
    joint = np.empty((nh_states, nv_states)) if materialize else None
    for v0 in range(0, nv_states, v_chunk):
        vs = state_bits(v0, v0 + v_chunk, V)
        v_lin = vs @ a_v
        v_pair = 2.0 * (vs @ W.T)  # (v_chunk, H)
        for h0 in range(0, nh_states, h_chunk):
            h1 = min(h0 + h_chunk, nh_states)
            hs = state_bits(h0, h1, H)
            phi = hs @ v_pair.T + (hs @ a_h)[:, None] + v_lin[None, :]
            lv[v0:v0 + v_chunk] = np.logaddexp(lv[v0:v0 + v_chunk], logsumexp(phi, axis=0))
            if materialize:
                joint[h0:h1, v0:v0 + v_chunk] = phi
    log_z = float(logsumexp(lv))
    log_probs = None if joint is None else (joint - log_z).reshape(-1)
    return JointTable(params, log_z, lv - log_z, log_probs)


def _keys(v, q):
    weights = 1 << np.arange(v.shape[-1], dtype=np.int64)
    qbits = (q.astype(np.int64) * weights).sum(axis=-1)
    key = ((v.astype(np.int64) & q.astype(np.int64)) * weights).sum(axis=-1)
    return qbits, key


def _conditional_from(logp, idx, qbits, key, V):
    cons = (idx & qbits) == key
    lp = logp[cons]
    w = np.exp(lp - lp.max())
    bits = (idx[cons, None] >> np.arange(V)) & 1
    return (w @ bits) / w.sum()


def exact_conditionals(table: JointTable, v, q, method: str = "visible") -> np.ndarray:
    """``p(v_j = 1 | inputs)`` for every visible unit; rows of ``v``/``q`` are samples.

    Entries with ``q == 1`` equal the observed value.  ``method="visible"``
    marginalizes the hidden units first and then conditions; ``"joint"``
    conditions the full joint table and then marginalizes.
    """
    v = np.atleast_2d(np.asarray(v)).astype(np.int64)
    q = np.atleast_2d(np.asarray(q)).astype(np.int64)
    V = table.n_visible
    if v.shape != q.shape or v.shape[1] != V:
        raise ValueError("v and q must be aligned and have V columns")
    if method == "visible":
        logp = table.visible_log_marginal
    elif method == "joint":
        if table.log_probs is None:
            raise OracleSizeError("joint table not materialized")
        logp = table.log_probs
    else:
        raise ValueError(f"unknown method {method!r}")
    idx = np.arange(logp.size, dtype=np.int64)
    qbits, keys = _keys(v, q)
    out = np.empty(v.shape)
    for b in range(v.shape[0]):
        out[b] = _conditional_from(logp, idx, qbits[b], keys[b], V)
    return np.where(q == 1, v, out)


def exact_conditional(params, v, q, table: JointTable | None = None, method: str = "visible") -> np.ndarray:
    """Exact marginals of the output variables (``q == 0``) given the inputs, in index order."""
    table = table if table is not None else enumerate_joint(params, materialize=method == "joint" or None)
    q = np.asarray(q)
    full = exact_conditionals(table, v, q, method)[0]
    return full[q == 0]


class ExactBackend:
    """Bayes-optimal predictions under ``params`` (the reference floor)."""

    def __init__(self, params, name: str = "oracle"):
        self.table = enumerate_joint(params, materialize=False)
        self.name = name

    def predict(self, v, q, offset=0):
        return exact_conditionals(self.table, v, q)


def exact_nce(params, test_data, queries) -> float:
    from .evaluation import nce

    return nce(ExactBackend(params), test_data, queries).nce


def visible_marginals(table: JointTable) -> np.ndarray:
    """Unconditional ``p(v_j = 1)``."""
    V = table.n_visible
    p = np.exp(table.visible_log_marginal)
    return p @ state_bits(0, 1 << V, V)


def sample_visible(table: JointTable, n: int, rng: np.random.Generator) -> np.ndarray:
    """Exact i.i.d. samples from the visible marginal."""
    p = np.exp(table.visible_log_marginal)
    idx = rng.choice(p.size, size=n, p=p / p.sum())
    V = table.n_visible
    return ((idx[:, None] >> np.arange(V)) & 1).astype(np.int8)
