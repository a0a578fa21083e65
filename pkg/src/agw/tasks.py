"""Downstream uses of a sample coupling: barycentric projection, FOSCTTM,
matching accuracy, label propagation, supervision costs and group-level
aggregation. All argmax ties go to the lowest index."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import cdist

from .core import as_data_matrix

SUPERVISION_MODES = ("zero_matched", "penalize_mismatch", "downscale_matched")
UNLABELED = -1


@dataclass(frozen=True)
class SupervisionSpec:
    """Known (row, column) correspondences and how to turn them into costs.

    ``penalty=None`` means 100 times the ``base_scale`` handed to
    :func:`build_supervision_cost`.
    """

    pairs: Tuple[Tuple[int, int], ...] = ()
    mode: str = "penalize_mismatch"
    penalty: Optional[float] = None
    scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple((int(i), int(j)) for i, j in self.pairs))
        if self.mode not in SUPERVISION_MODES:
            raise ValueError(f"unknown supervision mode {self.mode!r}")
        if self.penalty is not None and not (np.isfinite(self.penalty) and self.penalty >= 0):
            raise ValueError("penalty must be finite and nonnegative")
        if not 0 < self.scale <= 1:
            raise ValueError("scale must lie in (0, 1]")


def as_labels(labels, allow_unlabeled=True) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise ValueError("labels must be a 1-D vector")
    if labels.size and not np.all(labels == np.round(labels)):
        raise ValueError("labels must be integers")
    labels = labels.astype(np.int64)
    lowest = UNLABELED if allow_unlabeled else 0
    if labels.size and labels.min() < lowest:
        raise ValueError(f"labels must be >= {lowest}")
    return labels


def barycentric_project(gamma_s, Y) -> np.ndarray:
    """Map row ``i`` to ``sum_j G_ij Y_j / sum_j G_ij``."""
    G = np.asarray(gamma_s, dtype=np.float64)
    Y = as_data_matrix(Y)
    if G.shape[1] != Y.shape[0]:
        raise ValueError(f"coupling has {G.shape[1]} columns but Y has {Y.shape[0]} rows")
    mass = G.sum(axis=1)
    starved = np.flatnonzero(mass <= 0)
    if starved.size:
        raise ValueError(f"sample {starved[0]} receives no mass from the coupling")
    return (G @ Y) / mass[:, None]


def foscttm(A, B) -> float:
    """Fraction of samples closer than the true match, averaged both ways.

    Rows ``A[i]`` and ``B[i]`` are true matches. For each ``i``, counts the
    ``j != i`` strictly closer (Euclidean) than the true match, over
    ``n - 1``.
    """
    A, B = as_data_matrix(A), as_data_matrix(B)
    if A.shape != B.shape:
        raise ValueError(f"shapes differ: {A.shape} vs {B.shape}")
    n = A.shape[0]
    if n < 2:
        raise ValueError("FOSCTTM needs at least two samples")
    D = cdist(A, B)
    true = np.diag(D)
    a_to_b = (D < true[:, None]).sum(axis=1) / (n - 1)
    b_to_a = (D < true[None, :]).sum(axis=0) / (n - 1)
    return float((a_to_b.mean() + b_to_a.mean()) / 2)


def matching_accuracy(gamma_s, labels_x, labels_y) -> float:
    """Share of rows whose heaviest column carries the same label."""
    G = np.asarray(gamma_s)
    labels_x, labels_y = as_labels(labels_x), as_labels(labels_y)
    if G.shape != (labels_x.size, labels_y.size):
        raise ValueError(f"coupling shape {G.shape} does not match label lengths")
    best = np.argmax(G, axis=1)
    return float(np.mean(labels_x == labels_y[best]))


def label_propagation(gamma_s, y_source, K: int) -> np.ndarray:
    """Predict target labels as ``argmax_k (D_s G)_{kj}``, ``D_s`` one-hot."""
    G = np.asarray(gamma_s, dtype=np.float64)
    y = as_labels(y_source, allow_unlabeled=False)
    if y.size != G.shape[0]:
        raise ValueError(f"{y.size} source labels for a coupling with {G.shape[0]} rows")
    if K < 1 or (y.size and y.max() >= K):
        raise ValueError(f"source labels must lie in [0, {K})")
    onehot = np.zeros((K, y.size))
    onehot[y, np.arange(y.size)] = 1.0
    return np.argmax(onehot @ G, axis=0)


def build_supervision_cost(n: int, m: int, spec: SupervisionSpec,
                           base_scale: float = 1.0) -> np.ndarray:
    """Additive ``n x m`` cost encoding the supervision pairs.

    - ``penalize_mismatch``: every listed row pays the penalty on all columns
      it is not paired with.
    - ``downscale_matched``: listed pairs get ``-(1 - scale) * base_scale``,
      which multiplies a cost of size ``base_scale`` by ``scale``.
    - ``zero_matched``: listed pairs keep an additive offset of zero, so the
      result is the zero matrix.
    """
    pairs = spec.pairs
    if len(set(pairs)) != len(pairs):
        raise ValueError("duplicate supervision pairs")
    for i, j in pairs:
        if not (0 <= i < n and 0 <= j < m):
            raise ValueError(f"supervision pair {(i, j)} outside a {n} x {m} coupling")
    S = np.zeros((n, m))
    if not pairs:
        return S
    rows, cols = np.array(pairs).T
    if spec.mode == "penalize_mismatch":
        penalty = 100.0 * base_scale if spec.penalty is None else spec.penalty
        S[np.unique(rows), :] = penalty
        S[rows, cols] = 0.0
    elif spec.mode == "downscale_matched":
        S[rows, cols] = -(1.0 - spec.scale) * base_scale
    return S


def aggregate_coupling_by_group(gamma_s, groups_x: Sequence, groups_y: Sequence):
    """Mean coupling mass between every pair of groups.

    Returns ``(matrix, row_groups, col_groups)``, with groups in sorted
    order.
    """
    G = np.asarray(gamma_s, dtype=np.float64)
    groups_x, groups_y = np.asarray(groups_x), np.asarray(groups_y)
    if G.shape != (groups_x.size, groups_y.size):
        raise ValueError(f"coupling shape {G.shape} does not match group vectors")
    gx, ix = np.unique(groups_x, return_inverse=True)
    gy, iy = np.unique(groups_y, return_inverse=True)
    Ax = np.zeros((gx.size, G.shape[0]))
    Ax[ix, np.arange(G.shape[0])] = 1.0
    Ay = np.zeros((G.shape[1], gy.size))
    Ay[np.arange(G.shape[1]), iy] = 1.0
    sums = Ax @ G @ Ay
    counts = np.outer(Ax.sum(axis=1), Ay.sum(axis=0))
    return sums / counts, gx, gy


def group_match_accuracy(aggregate, row_groups, col_groups, partner: dict) -> float:
    """Share of row groups whose heaviest column group is ``partner[g]``.

    Row groups missing from ``partner`` are skipped.
    """
    aggregate = np.asarray(aggregate)
    hits = []
    for g, row in zip(row_groups, aggregate):
        key = g.item() if hasattr(g, "item") else g
        if key in partner:
            hits.append(col_groups[int(np.argmax(row))] == partner[key])
    if not hits:
        raise ValueError("no row group has a designated partner")
    return float(np.mean(hits))
