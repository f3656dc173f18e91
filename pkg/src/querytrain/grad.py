"""Reverse-mode gradients of the masked cross-entropy through the unrolled network."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import TraceMismatchError
from .model import RbmParamsQT
from .qtnn import (
    DEFAULT_CLAMP,
    ForwardTrace,
    encode_evidence,
    forward,
    masked_ce_logits,
    transfer_partials,
)

PARAM_NAMES = ("W", "c_V", "c_H", "log_t")


@dataclass(frozen=True, eq=False)
class ParamGradients:
    dW: np.ndarray
    dc_V: np.ndarray
    dc_H: np.ndarray
    dlog_t: float

    def as_dict(self) -> dict:
        return {"W": self.dW, "c_V": self.dc_V, "c_H": self.dc_H, "log_t": np.float64(self.dlog_t)}

    def scaled(self, s: float) -> "ParamGradients":
        return ParamGradients(self.dW * s, self.dc_V * s, self.dc_H * s, self.dlog_t * s)

    def __add__(self, other: "ParamGradients") -> "ParamGradients":
        return ParamGradients(
            self.dW + other.dW, self.dc_V + other.dc_V, self.dc_H + other.dc_H, self.dlog_t + other.dlog_t
        )

    def is_finite(self) -> bool:
        return bool(
            np.all(np.isfinite(self.dW))
            and np.all(np.isfinite(self.dc_V))
            and np.all(np.isfinite(self.dc_H))
            and np.isfinite(self.dlog_t)
        )


def backward(params: RbmParamsQT, trace: ForwardTrace, v, q, reduce: str = "mean") -> ParamGradients:
    """Gradient of the masked cross-entropy w.r.t. ``(W, c_V, c_H, log_t)``.

    ``reduce="mean"`` differentiates the batch-mean loss (what training
    minimizes); ``"sum"`` the batch sum.
    """
    if trace.params is not params and not trace.params.same_as(params):
        raise TraceMismatchError("trace was produced with different parameters")
    v = np.atleast_2d(np.asarray(v, dtype=np.float64))
    q = np.atleast_2d(np.asarray(q, dtype=np.float64))
    if v.shape != trace.z_v.shape or q.shape != trace.z_v.shape:
        raise TraceMismatchError(f"v/q shape {v.shape} does not match trace batch {trace.z_v.shape}")
    if len(trace.states) != trace.n_layers + 1:
        raise TraceMismatchError("trace is missing message states")

    B = v.shape[0]
    scale = 1.0 / B if reduce == "mean" else 1.0
    W, t = params.W, trace.temperature

    g_zv = (expit(trace.z_v) - v) * (1.0 - q) * scale  # (B, V)
    dW = np.zeros_like(W)
    dc_V = g_zv.sum(axis=0)
    dc_H = np.zeros(params.n_hidden)
    dt = 0.0

    # readout: z_v = u_V + c_V + M_VH.sum(-1); h_hat is never part of the loss
    d_MVH = np.broadcast_to(g_zv[:, :, None], trace.states[-1].M_VH.shape).copy()
    d_MHV = np.zeros_like(trace.states[-1].M_HV)

    for n in range(trace.n_layers - 1, -1, -1):
        x_hv, x_vh = trace.x_hv[n], trace.x_vh[n]
        fx, fw, ft = transfer_partials(x_hv, W, t)
        d_xhv = d_MHV * fx
        dW += np.sum(d_MHV * fw, axis=0)
        dt += float(np.sum(d_MHV * ft))
        fx, fw, ft = transfer_partials(x_vh, W.T, t)
        d_xvh = d_MVH * fx
        dW += np.sum(d_MVH * fw, axis=0).T
        dt += float(np.sum(d_MVH * ft))
        if n == 0:
            # messages entering the first layer are the constant zero state
            dc_V += d_xhv.sum(axis=(0, 1))
            dc_H += d_xvh.sum(axis=(0, 1))
            break
        # x_hv = a_V[:, None, :] - M_VH^T,  a_V = u_V + c_V + M_VH.sum(-1)
        d_aV = d_xhv.sum(axis=1)
        dc_V += d_aV.sum(axis=0)
        d_MVH = d_aV[:, :, None] - d_xhv.transpose(0, 2, 1)
        # x_vh = a_H[:, None, :] - M_HV^T,  a_H = u_H + c_H + M_HV.sum(-1)
        d_aH = d_xvh.sum(axis=1)
        dc_H += d_aH.sum(axis=0)
        d_MHV = d_aH[:, :, None] - d_xvh.transpose(0, 2, 1)

    return ParamGradients(dW, dc_V, dc_H, t * dt)


def loss_and_grad(params: RbmParamsQT, v, q, n_layers: int, clamp_l: float = DEFAULT_CLAMP,
                  reduce: str = "mean"):
    u = encode_evidence(v, q, clamp_l, params.n_hidden)
    beliefs, trace = forward(params, u, n_layers)
    per_sample = masked_ce_logits(v, trace.z_v, q)
    loss = float(per_sample.mean() if reduce == "mean" else per_sample.sum())
    return loss, backward(params, trace, v, q, reduce=reduce)


# finite differences -----------------------------------------------------------

@dataclass
class GradCheckReport:
    max_rel_error: float
    mean_rel_error: float
    per_param: dict = field(default_factory=dict)  # name -> (max, mean)
    n_checked: int = 0
    n_excluded: int = 0
    tolerance: float = 1e-4

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (
            f"max_rel_error={self.max_rel_error:.3e} mean_rel_error={self.mean_rel_error:.3e} "
            f"checked={self.n_checked} excluded={self.n_excluded} tol={self.tolerance:.0e} {status}"
        )


def relative_error(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return np.abs(a - b) / np.maximum(1e-8, np.abs(a) + np.abs(b))


def reference_loss(params: RbmParamsQT, v, q, n_layers: int, clamp_l: float = DEFAULT_CLAMP,
                   temperature: float | None = None, dtype=np.longdouble, deltas: dict | None = None):
    """Batch-mean masked cross-entropy from a separate implementation of the network.

    Messages use the log-sum-exp form ``t * (lse(x/t, -w/t) - lse(0, (x-w)/t))``
    rather than the clip-plus-correction form, and everything runs in
    ``dtype`` (extended precision by default) so that central differences
    are not swamped by float64 roundoff.  ``deltas`` maps parameter names to
    perturbations applied in that precision.
    """
    deltas = deltas or {}
    W = np.asarray(params.W, dtype=dtype) + deltas.get("W", 0)
    c_V = np.asarray(params.c_V, dtype=dtype) + deltas.get("c_V", 0)
    c_H = np.asarray(params.c_H, dtype=dtype) + deltas.get("c_H", 0)
    if temperature is None:
        t = np.exp(dtype(params.log_t) + dtype(deltas.get("log_t", 0)))
    else:
        t = dtype(temperature)

    def msg(x, w):
        if t == 0:
            return np.maximum(x, -w) - np.maximum(0, x - w)
        return t * (np.logaddexp(x / t, -w / t) - np.logaddexp(dtype(0), (x - w) / t))

    v = np.atleast_2d(np.asarray(v)).astype(dtype)
    q = np.atleast_2d(np.asarray(q)).astype(dtype)
    with np.errstate(divide="ignore"):
        lv = np.log(v) - np.log1p(-v)
    u = q * np.clip(lv, -clamp_l, clamp_l)
    B, V = v.shape
    H = W.shape[0]
    m_hv = np.zeros((B, H, V), dtype=dtype)
    m_vh = np.zeros((B, V, H), dtype=dtype)
    for _ in range(n_layers):
        tot_v = u + c_V + m_vh.sum(axis=2)
        tot_h = c_H + m_hv.sum(axis=2)
        new_hv = msg(tot_v[:, None, :] - np.swapaxes(m_vh, 1, 2), W)
        new_vh = msg(tot_h[:, None, :] - np.swapaxes(m_hv, 1, 2), W.T)
        m_hv, m_vh = new_hv, new_vh
    z = u + c_V + m_vh.sum(axis=2)
    ce = (1 - q) * (np.logaddexp(dtype(0), z) - v * z)
    return ce.sum(axis=1).mean()


def _kink_pattern(params, v, q, n_layers, clamp_l, temperature):
    u = encode_evidence(v, q, clamp_l, params.n_hidden)
    _, trace = forward(params, u, n_layers, temperature)
    W = params.W
    parts = []
    for x_hv, x_vh in zip(trace.x_hv, trace.x_vh):
        parts.append(np.abs(x_hv) - np.abs(W))
        parts.append(np.abs(x_vh) - np.abs(W.T))
    return np.concatenate([p.ravel() for p in parts])


def finite_diff_check(params: RbmParamsQT, v, q, n_layers: int, step: float = 1e-4,
                      tolerance: float = 1e-4, clamp_l: float = DEFAULT_CLAMP,
                      temperature: float | None = None, kink_eps: float = 1e-3) -> GradCheckReport:
    """Compare :func:`backward` against central differences of the batch-mean loss.

    The differences are taken on :func:`reference_loss` in extended precision.

    With a max-product override (``temperature=0``) the loss has kinks where
    a transfer input satisfies ``|x| = |w|``.  A coordinate is excluded when
    its perturbation moves some transfer input that lies within ``kink_eps``
    of (or across) a kink.  At positive temperature the loss is smooth and
    nothing is excluded.
    """
    if not 1e-6 <= step <= 1e-3:
        raise ValueError("step must lie in [1e-6, 1e-3]")
    u = encode_evidence(v, q, clamp_l, params.n_hidden)
    _, trace = forward(params, u, n_layers, temperature)
    analytic = backward(params, trace, v, q).as_dict()
    piecewise = temperature == 0

    def loss_at(name, k, shift):
        base = np.zeros(np.shape(getattr(params, name)), dtype=np.longdouble)
        base.reshape(-1)[k] = shift
        return reference_loss(params, v, q, n_layers, clamp_l, temperature,
                              deltas={name: base if base.ndim else base[()]})

    errors = {}
    all_errs = []
    n_excluded = 0
    for name in PARAM_NAMES:
        if name == "log_t" and temperature is not None:
            continue
        base = np.array(getattr(params, name), dtype=np.float64)
        flat = base.reshape(-1)
        errs = []
        for k in range(flat.size):
            probes = []
            for sign in (1.0, -1.0):
                pert = flat.copy()
                pert[k] += sign * step
                value = pert.reshape(base.shape) if base.ndim else float(pert[0])
                probes.append(params.replace(**{name: value}))
            if piecewise:
                lo, hi = (_kink_pattern(p, v, q, n_layers, clamp_l, temperature) for p in probes)
                moved = lo != hi
                near = (np.abs(lo) < kink_eps) | (np.abs(hi) < kink_eps) | (np.sign(lo) != np.sign(hi))
                if np.any(moved & near):
                    n_excluded += 1
                    continue
            numeric = float((loss_at(name, k, step) - loss_at(name, k, -step)) / (2 * step))
            errs.append(float(relative_error(np.ravel(analytic[name])[k], numeric)))
        if errs:
            errors[name] = (max(errs), float(np.mean(errs)))
            all_errs.extend(errs)
    return GradCheckReport(
        max_rel_error=max(all_errs) if all_errs else 0.0,
        mean_rel_error=float(np.mean(all_errs)) if all_errs else 0.0,
        per_param=errors,
        n_checked=len(all_errs),
        n_excluded=n_excluded,
        tolerance=tolerance,
    )
