"""Binary RBM parameter containers, conversions and checkpoint I/O.

Two parameterizations are supported.  The *standard* one scores a joint
state as ``h^T W_std v + b_h^T h + b_v^T v``.  The *QT* one used by the
inference network scores it as

    phi(v, h) = 2 h^T W v + h^T (c_H - W 1_V) + v^T (c_V - W^T 1_H)

so that every hidden/visible pair contributes 0 when the two units agree
and ``-W[i, j]`` when they disagree.  The two are related by a linear map
(``W = W_std / 2`` plus bias shifts).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CheckpointError, DimensionError

CHECKPOINT_VERSION = 1


def _as_float_array(x, ndim, name):
    arr = np.array(x, dtype=np.float64)
    if arr.ndim != ndim:
        raise DimensionError(f"{name} must be {ndim}-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True, eq=False)
class RbmParamsQT:
    """QT parameterization: ``W`` is H x V, temperature ``T = exp(log_t)``."""

    W: np.ndarray
    c_V: np.ndarray
    c_H: np.ndarray
    log_t: float = 0.0

    def __post_init__(self):
        W = _as_float_array(self.W, 2, "W")
        c_V = _as_float_array(self.c_V, 1, "c_V")
        c_H = _as_float_array(self.c_H, 1, "c_H")
        if W.shape != (c_H.shape[0], c_V.shape[0]):
            raise DimensionError(
                f"W has shape {W.shape}, expected ({c_H.shape[0]}, {c_V.shape[0]})"
            )
        log_t = float(self.log_t)
        if not math.isfinite(log_t):
            raise ValueError("log_t must be finite")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "c_V", c_V)
        object.__setattr__(self, "c_H", c_H)
        object.__setattr__(self, "log_t", log_t)

    @property
    def n_visible(self) -> int:
        return self.c_V.shape[0]

    @property
    def n_hidden(self) -> int:
        return self.c_H.shape[0]

    @property
    def temperature(self) -> float:
        return math.exp(self.log_t)

    @classmethod
    def zeros(cls, n_visible: int, n_hidden: int) -> "RbmParamsQT":
        return cls(np.zeros((n_hidden, n_visible)), np.zeros(n_visible), np.zeros(n_hidden), 0.0)

    def replace(self, **changes) -> "RbmParamsQT":
        fields = dict(W=self.W, c_V=self.c_V, c_H=self.c_H, log_t=self.log_t)
        fields.update(changes)
        return RbmParamsQT(**fields)

    def same_as(self, other: "RbmParamsQT") -> bool:
        return (
            np.array_equal(self.W, other.W)
            and np.array_equal(self.c_V, other.c_V)
            and np.array_equal(self.c_H, other.c_H)
            and self.log_t == other.log_t
        )


@dataclass(frozen=True, eq=False)
class RbmParamsStd:
    """Standard RBM parameterization, ``W_std`` is H x V."""

    W_std: np.ndarray
    b_v: np.ndarray
    b_h: np.ndarray

    def __post_init__(self):
        W = _as_float_array(self.W_std, 2, "W_std")
        b_v = _as_float_array(self.b_v, 1, "b_v")
        b_h = _as_float_array(self.b_h, 1, "b_h")
        if W.shape != (b_h.shape[0], b_v.shape[0]):
            raise DimensionError(
                f"W_std has shape {W.shape}, expected ({b_h.shape[0]}, {b_v.shape[0]})"
            )
        object.__setattr__(self, "W_std", W)
        object.__setattr__(self, "b_v", b_v)
        object.__setattr__(self, "b_h", b_h)

    @property
    def n_visible(self) -> int:
        return self.b_v.shape[0]

    @property
    def n_hidden(self) -> int:
        return self.b_h.shape[0]


def _check_state(x, n, name):
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != n:
        raise DimensionError(f"{name} has trailing dimension {x.shape[-1]}, expected {n}")
    return x


def energy_qt(params: RbmParamsQT, v, h):
    """Unnormalized log-probability ``phi(v, h)``; broadcasts over leading axes."""
    v = _check_state(v, params.n_visible, "v")
    h = _check_state(h, params.n_hidden, "h")
    W = params.W
    a_h = params.c_H - W.sum(axis=1)
    a_v = params.c_V - W.sum(axis=0)
    pair = 2.0 * np.einsum("...i,ij,...j->...", h, W, v)
    out = pair + h @ a_h + v @ a_v
    return float(out) if np.ndim(out) == 0 else out


def energy_std(std: RbmParamsStd, v, h):
    """Standard RBM score ``h^T W v + b_h^T h + b_v^T v`` (higher is more probable)."""
    v = _check_state(v, std.n_visible, "v")
    h = _check_state(h, std.n_hidden, "h")
    out = np.einsum("...i,ij,...j->...", h, std.W_std, v) + h @ std.b_h + v @ std.b_v
    return float(out) if np.ndim(out) == 0 else out


def from_standard(std: RbmParamsStd) -> RbmParamsQT:
    W = std.W_std / 2.0
    return RbmParamsQT(
        W=W,
        c_V=std.b_v + W.sum(axis=0),
        c_H=std.b_h + W.sum(axis=1),
        log_t=0.0,
    )


def to_standard(params: RbmParamsQT) -> RbmParamsStd:
    W = params.W
    return RbmParamsStd(
        W_std=2.0 * W,
        b_v=params.c_V - W.sum(axis=0),
        b_h=params.c_H - W.sum(axis=1),
    )


# checkpoints -----------------------------------------------------------------

def params_to_dict(params) -> dict:
    if isinstance(params, RbmParamsQT):
        w, c_v, c_h, log_t, kind = params.W, params.c_V, params.c_H, params.log_t, "qt"
    elif isinstance(params, RbmParamsStd):
        w, c_v, c_h, log_t, kind = params.W_std, params.b_v, params.b_h, 0.0, "std"
    else:
        raise TypeError(f"cannot serialize {type(params).__name__}")
    return {
        "version": CHECKPOINT_VERSION,
        "v": int(w.shape[1]),
        "h": int(w.shape[0]),
        "w": w.tolist(),
        "c_v": c_v.tolist(),
        "c_h": c_h.tolist(),
        "log_t": float(log_t),
        "parameterization": kind,
    }


def params_from_dict(doc: dict):
    if doc.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {doc.get('version')!r}")
    try:
        n_v, n_h = int(doc["v"]), int(doc["h"])
        w = np.array(doc["w"], dtype=np.float64).reshape(n_h, n_v)
        c_v = np.array(doc["c_v"], dtype=np.float64)
        c_h = np.array(doc["c_h"], dtype=np.float64)
        kind = doc["parameterization"]
        log_t = float(doc.get("log_t", 0.0))
    except (KeyError, ValueError, TypeError) as exc:
        raise CheckpointError(f"malformed checkpoint: {exc}") from exc
    if c_v.shape != (n_v,) or c_h.shape != (n_h,):
        raise CheckpointError("checkpoint vector lengths disagree with v/h")
    if kind == "qt":
        return RbmParamsQT(w, c_v, c_h, log_t)
    if kind == "std":
        return RbmParamsStd(w, c_v, c_h)
    raise CheckpointError(f"unknown parameterization {kind!r}")


def save_checkpoint(params, path) -> None:
    text = json.dumps(params_to_dict(params), indent=1) + "\n"
    Path(path).write_text(text, encoding="utf-8")


def load_checkpoint(path):
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{path}: not valid JSON ({exc})") from exc
    return params_from_dict(doc)


def as_qt(params) -> RbmParamsQT:
    return from_standard(params) if isinstance(params, RbmParamsStd) else params


def as_std(params) -> RbmParamsStd:
    return to_standard(params) if isinstance(params, RbmParamsQT) else params
