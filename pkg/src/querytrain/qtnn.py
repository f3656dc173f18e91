"""Unrolled parallel belief propagation for a binary RBM.

All messages live in logit space.  ``M_HV[i, j]`` is the message from
visible unit ``j`` into hidden unit ``i`` and ``M_VH[j, i]`` the message
from hidden unit ``i`` into visible unit ``j``.  Every function accepts a
single sample (1-D ``v``/``q``) or a batch (2-D, one row per sample);
internally everything is batched.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import DimensionError, DomainError
from .model import RbmParamsQT

DEFAULT_CLAMP = 20.0

QueryMask = np.ndarray  # 0/1 per visible unit, 1 = observed input


@dataclass(frozen=True, eq=False)
class UnaryPotentials:
    u_V: np.ndarray  # (B, V)
    u_H: np.ndarray  # (B, H), always zero


@dataclass(frozen=True, eq=False)
class MessageState:
    M_HV: np.ndarray  # (B, H, V)
    M_VH: np.ndarray  # (B, V, H)


@dataclass(frozen=True, eq=False)
class Beliefs:
    v_hat: np.ndarray
    h_hat: np.ndarray
    z_v: np.ndarray  # pre-sigmoid logits of v_hat
    z_h: np.ndarray


@dataclass(frozen=True, eq=False)
class ForwardTrace:
    """Everything the reverse pass needs.

    ``states[n]`` is the message state entering layer ``n + 1``;
    ``x_hv[n]`` / ``x_vh[n]`` are the transfer-function inputs inside layer
    ``n + 1``.
    """

    params: RbmParamsQT
    temperature: float
    u: UnaryPotentials
    states: list
    x_hv: list
    x_vh: list
    z_v: np.ndarray
    z_h: np.ndarray

    @property
    def n_layers(self) -> int:
        return len(self.x_hv)


# scalar-style elementwise functions -----------------------------------------

def logit(p):
    p = np.asarray(p, dtype=np.float64)
    with np.errstate(divide="ignore"):
        return np.log(p) - np.log1p(-p)


def softplus_t(x, t):
    """``t * log(1 + exp(x / t))`` evaluated without overflow."""
    x = np.asarray(x, dtype=np.float64)
    return np.maximum(x, 0.0) + t * np.log1p(np.exp(-np.abs(x) / t))


def transfer_mp(x, w):
    """Max-product transfer: ``sign(w) * clip(x, -|w|, |w|)``."""
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    a = np.abs(w)
    return np.sign(w) * np.clip(x, -a, a)


def transfer(x, w, t):
    """Logit-space message through a pairwise factor scoring 0 (agree) / -w (disagree).

    ``t = 1`` is sum-product, ``t -> 0`` max-product.  Computed as the
    max-product value plus a bounded softplus correction.
    """
    if t == 0:
        return transfer_mp(x, w)
    if t < 0:
        raise DomainError(f"temperature must be non-negative, got {t}")
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    return (
        transfer_mp(x, w)
        + softplus_t(-np.abs(x + w), t)
        - softplus_t(-np.abs(x - w), t)
    )


def transfer_partials(x, w, t):
    """Partial derivatives ``(df/dx, df/dw, df/dt)`` of :func:`transfer`.

    For ``t > 0`` the function is smooth and the partials below are exact
    everywhere.  For ``t == 0`` clip-derivative convention: 1 strictly inside
    the band, 0 on or outside its boundary; ``df/dt`` is reported as 0.
    """
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if t == 0:
        a = np.abs(w)
        inside = np.abs(x) < a
        dx = np.where(inside, np.sign(w), 0.0)
        dw = np.where(np.abs(x) > a, np.sign(x), 0.0)
        return dx, dw, np.zeros(np.broadcast(x, w).shape)
    # sigma(a) - sigma(b) == sigma(-b) - sigma(-a); pick the side without cancellation
    pos = x > 0
    dx = np.where(
        pos,
        expit(-(x - w) / t) - expit(-(x + w) / t),
        expit((x + w) / t) - expit((x - w) / t),
    )
    sm_ = expit((x - w) / t)
    dw = sm_ - expit(-(x + w) / t)
    # d/dt of softplus_t(y, t) at y <= 0
    yp = -np.abs(x + w) / t
    ym = -np.abs(x - w) / t
    dt = (np.log1p(np.exp(yp)) - yp * expit(yp)) - (np.log1p(np.exp(ym)) - ym * expit(ym))
    return dx, dw, dt


# network ---------------------------------------------------------------------

def _as_batch(x, n, name):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.ndim != 2 or x.shape[1] != n:
        raise DimensionError(f"{name} must have {n} columns, got shape {x.shape}")
    return x, single


def encode_evidence(v, q, clamp_l: float = DEFAULT_CLAMP, n_hidden: int = 0) -> UnaryPotentials:
    """Unary logits: ``q * clip(logit(v), -clamp_l, clamp_l)``, zero for hidden units."""
    v = np.asarray(v, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if v.shape != q.shape:
        raise DimensionError(f"v {v.shape} and q {q.shape} differ in shape")
    if np.any((v < 0) | (v > 1)) or not np.all(np.isfinite(v)):
        raise DomainError("evidence values must lie in [0, 1]")
    if not (clamp_l > 0 and np.isfinite(clamp_l)):
        raise DomainError("clamp_l must be positive and finite")
    u_V = q * np.clip(logit(v), -clamp_l, clamp_l)
    u_V = u_V + 0.0  # normalize -0.0
    u_H = np.zeros(v.shape[:-1] + (n_hidden,))
    return UnaryPotentials(u_V, u_H)


def zero_state(batch: int, n_visible: int, n_hidden: int) -> MessageState:
    return MessageState(np.zeros((batch, n_hidden, n_visible)), np.zeros((batch, n_visible, n_hidden)))


def _layer(params, u_V, u_H, state, t):
    M_HV, M_VH = state.M_HV, state.M_VH
    a_V = u_V + params.c_V + M_VH.sum(axis=2)  # (B, V)
    x_hv = a_V[:, None, :] - M_VH.transpose(0, 2, 1)  # (B, H, V)
    a_H = u_H + params.c_H + M_HV.sum(axis=2)  # (B, H)
    x_vh = a_H[:, None, :] - M_HV.transpose(0, 2, 1)  # (B, V, H)
    new = MessageState(transfer(x_hv, params.W, t), transfer(x_vh, params.W.T, t))
    return new, x_hv, x_vh


def message_layer(params: RbmParamsQT, u: UnaryPotentials, m: MessageState,
                  temperature: float | None = None) -> MessageState:
    """One fully parallel BP update computed from the previous state only."""
    t = params.temperature if temperature is None else temperature
    u_V = np.atleast_2d(u.u_V)
    u_H = np.atleast_2d(u.u_H) if np.size(u.u_H) else np.zeros((u_V.shape[0], params.n_hidden))
    M_HV = m.M_HV if m.M_HV.ndim == 3 else m.M_HV[None]
    M_VH = m.M_VH if m.M_VH.ndim == 3 else m.M_VH[None]
    new, _, _ = _layer(params, u_V, u_H, MessageState(M_HV, M_VH), t)
    if m.M_HV.ndim == 2:
        return MessageState(new.M_HV[0], new.M_VH[0])
    return new


def forward(params: RbmParamsQT, u: UnaryPotentials, n_layers: int,
            temperature: float | None = None):
    """Run ``n_layers`` BP layers from the zero state and read out beliefs.

    Returns ``(Beliefs, ForwardTrace)``.  ``temperature`` overrides the
    learned one (``0`` gives max-product); gradients w.r.t. ``log_t`` are
    only meaningful without an override.
    """
    if n_layers < 1:
        raise ValueError("n_layers must be >= 1")
    t = params.temperature if temperature is None else float(temperature)
    u_V, single = _as_batch(u.u_V, params.n_visible, "u_V")
    B = u_V.shape[0]
    u_H = np.asarray(u.u_H, dtype=np.float64).reshape(B, -1) if np.size(u.u_H) else np.zeros((B, params.n_hidden))
    if u_H.shape != (B, params.n_hidden):
        raise DimensionError(f"u_H must have shape {(B, params.n_hidden)}, got {u_H.shape}")

    state = zero_state(B, params.n_visible, params.n_hidden)
    states, xs_hv, xs_vh = [state], [], []
    for _ in range(n_layers):
        state, x_hv, x_vh = _layer(params, u_V, u_H, state, t)
        states.append(state)
        xs_hv.append(x_hv)
        xs_vh.append(x_vh)

    z_v = u_V + params.c_V + state.M_VH.sum(axis=2)
    z_h = u_H + params.c_H + state.M_HV.sum(axis=2)
    trace = ForwardTrace(params, t, UnaryPotentials(u_V, u_H), states, xs_hv, xs_vh, z_v, z_h)
    v_hat, h_hat = expit(z_v), expit(z_h)
    if single:
        return Beliefs(v_hat[0], h_hat[0], z_v[0], z_h[0]), trace
    return Beliefs(v_hat, h_hat, z_v, z_h), trace


def infer(params: RbmParamsQT, v, q, n_layers: int, clamp_l: float = DEFAULT_CLAMP,
          temperature: float | None = None) -> Beliefs:
    """Encode evidence and run :func:`forward`, discarding the trace."""
    beliefs, _ = forward(params, encode_evidence(v, q, clamp_l, params.n_hidden), n_layers, temperature)
    return beliefs


# losses ------------------------------------------------------------------------

def masked_ce(v, v_hat, q) -> float:
    """Cross-entropy (nats) summed over the unobserved (q == 0) entries.

    Batched input is summed over samples as well.
    """
    v = np.asarray(v, dtype=np.float64)
    v_hat = np.asarray(v_hat, dtype=np.float64)
    q = np.asarray(q)
    if not (v.shape == v_hat.shape == q.shape):
        raise DimensionError("v, v_hat and q must share a shape")
    out = q == 0
    p = v_hat[out]
    if np.any((p <= 0) | (p >= 1)) or not np.all(np.isfinite(p)):
        raise DomainError("predicted probabilities must lie strictly inside (0, 1)")
    t = v[out]
    return float(-np.sum(t * np.log(p) + (1 - t) * np.log1p(-p)))


def masked_ce_logits(v, z, q):
    """Per-sample masked cross-entropy from logits (stable for saturated logits)."""
    v = np.atleast_2d(np.asarray(v, dtype=np.float64))
    z = np.atleast_2d(z)
    out = 1.0 - np.atleast_2d(np.asarray(q, dtype=np.float64))
    return np.sum(out * (np.logaddexp(0.0, z) - v * z), axis=1)


def query_loss(params: RbmParamsQT, v, q, n_layers: int, clamp_l: float = DEFAULT_CLAMP,
               temperature: float | None = None) -> float:
    """Mean over samples of the masked cross-entropy of the network's beliefs."""
    beliefs = infer(params, v, q, n_layers, clamp_l, temperature)
    return float(np.mean(masked_ce_logits(v, beliefs.z_v, q)))
