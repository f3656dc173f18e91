"""Binary datasets: text I/O, splitting and synthetic generators.

File format: one sample per line, comma-separated 0/1 values, no header.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError
from .model import RbmParamsQT, RbmParamsStd, to_standard
from .oracle import MAX_VARS, enumerate_joint, sample_visible

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class BinaryDataset:
    name: str
    data: np.ndarray  # (n_samples, V) int8 in {0, 1}
    split: str = "all"

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 2:
            raise DataError(f"dataset {self.name!r} must be 2-D, got shape {arr.shape}")
        bad = np.argwhere((arr != 0) & (arr != 1))
        if bad.size:
            r, c = bad[0]
            raise DataError(f"dataset {self.name!r}: non-binary value {arr[r, c]!r} at row {r + 1}, column {c + 1}")
        object.__setattr__(self, "data", arr.astype(np.int8))

    @property
    def n_samples(self) -> int:
        return self.data.shape[0]

    @property
    def n_visible(self) -> int:
        return self.data.shape[1]

    def __len__(self):
        return self.n_samples


def load_dataset(path, split: str = "all") -> BinaryDataset:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"dataset file not found: {path}")
    rows = []
    width = None
    with path.open(encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    for lineno, line in enumerate(lines, start=1):
        line = line.rstrip("\r")
        if not line.strip():
            raise DataError(f"{path}:{lineno}: empty line")
        fields = line.split(",")
        if width is None:
            width = len(fields)
        elif len(fields) != width:
            raise DataError(f"{path}:{lineno}: expected {width} values, found {len(fields)}")
        row = []
        for col, field in enumerate(fields, start=1):
            field = field.strip()
            if field not in ("0", "1"):
                raise DataError(f"{path}:{lineno}: column {col}: non-binary value {field!r}")
            row.append(field == "1")
        rows.append(row)
    if not rows:
        raise DataError(f"{path}: dataset is empty")
    return BinaryDataset(path.stem, np.array(rows, dtype=np.int8), split)


def save_dataset(dataset, path) -> None:
    data = dataset.data if isinstance(dataset, BinaryDataset) else np.asarray(dataset)
    text = "\n".join(",".join(str(int(x)) for x in row) for row in data)
    Path(path).write_text(text + "\n", encoding="utf-8")


def split_dataset(dataset: BinaryDataset, fractions=(0.8, 0.1, 0.1), seed: int = 0):
    """Deterministic shuffled split into (train, valid, test)."""
    fractions = np.asarray(fractions, dtype=np.float64)
    if fractions.shape != (3,) or np.any(fractions <= 0) or not np.isclose(fractions.sum(), 1.0):
        raise ValueError("fractions must be three positive numbers summing to 1")
    n = dataset.n_samples
    bounds = np.rint(np.cumsum(fractions) * n).astype(int)
    bounds[-1] = n
    sizes = np.diff(np.concatenate([[0], bounds]))
    if np.any(sizes < 1):
        raise DataError(f"{n} samples are too few for split fractions {fractions.tolist()}")
    order = np.random.default_rng(seed).permutation(n)
    parts = np.split(order, bounds[:-1])
    return tuple(
        BinaryDataset(dataset.name, dataset.data[idx], tag) for idx, tag in zip(parts, ("train", "valid", "test"))
    )


def random_rbm(v_dim: int, h_dim: int, param_scale: float, rng: np.random.Generator,
               bias_jitter: float = 0.25) -> RbmParamsStd:
    """Random RBM whose pairwise agree/disagree weights are uniform in ``[-param_scale, param_scale]``.

    The draw is made in the QT parameterization (each pair scores 0 on
    agreement and ``-w`` on disagreement) with unary terms uniform in
    ``bias_jitter * [-param_scale, param_scale]``, then converted.  Marginals
    stay near 1/2, so the couplings carry most of the signal.
    """
    W = rng.uniform(-param_scale, param_scale, size=(h_dim, v_dim))
    jitter = bias_jitter * param_scale
    c_V = rng.uniform(-jitter, jitter, size=v_dim)
    c_H = rng.uniform(-jitter, jitter, size=h_dim)
    return to_standard(RbmParamsQT(W, c_V, c_H))


def generate_synthetic(v_dim: int, h_dim: int, param_scale: float = 1.5, n_samples: int = 10000,
                       seed: int = 0, exact: bool = True, gibbs_burn_in: int = 2000):
    """Draw a random ground-truth RBM and samples of its visible units.

    Exact mode samples from the enumerated visible marginal (V + H <= 24).
    With ``exact=False`` independent long Gibbs chains are used instead, one
    per sample; those samples are approximate.
    """
    rng = np.random.default_rng(seed)
    truth = random_rbm(v_dim, h_dim, param_scale, rng)
    if exact:
        if v_dim + h_dim > MAX_VARS:
            raise DataError(f"exact sampling needs V+H <= {MAX_VARS}, got {v_dim + h_dim}")
        data = sample_visible(enumerate_joint(truth, materialize=False), n_samples, rng)
        name = "synthetic"
    else:
        from .baselines import gibbs_sweep, init_chains

        log.warning("approximate synthetic data: %d Gibbs sweeps per chain", gibbs_burn_in)
        state = init_chains(truth, n_samples, rng)
        for _ in range(gibbs_burn_in):
            state = gibbs_sweep(truth, state)
        data = state.v.astype(np.int8)
        name = "synthetic-gibbs"
    return BinaryDataset(name, data), truth


def make_pl_failure_dataset(n_samples: int, seed: int = 0, n_distractors: int = 5,
                            copy_agreement: float = 0.99, weak_agreement: float = 0.75) -> BinaryDataset:
    """Columns ``a, b, z`` then independent distractor bits.

    ``b`` copies ``a`` with probability 0.99 and ``z`` agrees with ``a`` with
    probability 0.75, so ``b`` hides the weaker ``a``-``z`` dependence from
    any learner that always sees ``b`` when predicting ``a``.
    """
    rng = np.random.default_rng(seed)
    a = rng.integers(0, 2, size=n_samples)
    b = np.where(rng.random(n_samples) < copy_agreement, a, 1 - a)
    z = np.where(rng.random(n_samples) < weak_agreement, a, 1 - a)
    noise = rng.integers(0, 2, size=(n_samples, n_distractors))
    return BinaryDataset("pl-failure", np.column_stack([a, b, z, noise]).astype(np.int8))


PL_COLUMNS = {"a": 0, "b": 1, "z": 2}
