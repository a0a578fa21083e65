"""Factored squared-loss tensor contractions for GW, COOT and AGW.

For the squared loss ``(a - b)^2 = a^2 + b^2 - 2ab`` the tensor-matrix
product ``L(A, B) (x) P`` splits into two rank-one terms and one matrix
product, so nothing of size ``n^2 m^2`` is ever formed. The row and column
sums of ``P`` are taken from ``P`` itself, which keeps every formula exact
for arbitrary (infeasible) matrices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class FactoredQuadCost:
    """``(a - b)^2 = left_sq + right_sq - left * (2 right)`` factors."""

    left: np.ndarray
    right: np.ndarray
    left_sq: np.ndarray
    right_sq: np.ndarray

    @classmethod
    def from_matrices(cls, left, right):
        left = np.asarray(left, dtype=np.float64)
        right = np.asarray(right, dtype=np.float64)
        return cls(left, right, left**2, right**2)

    def contract(self, P, transpose=False):
        """``sum_{k,l} (left_ik - right_jl)^2 P_kl`` over the inner indices.

        With ``transpose`` the sums run over rows instead, i.e. the result
        is indexed by the columns of ``left`` and ``right``.
        """
        P = np.asarray(P, dtype=np.float64)
        r, c = P.sum(axis=1), P.sum(axis=0)
        if transpose:
            return (np.outer(self.left_sq.T @ r, np.ones(self.right.shape[1]))
                    + np.outer(np.ones(self.left.shape[1]), self.right_sq.T @ c)
                    - 2.0 * self.left.T @ P @ self.right)
        return (np.outer(self.left_sq @ r, np.ones(self.right.shape[0]))
                + np.outer(np.ones(self.left.shape[0]), self.right_sq @ c)
                - 2.0 * self.left @ P @ self.right.T)


def _check(name, got, expected):
    if got != expected:
        raise ValueError(f"{name} has shape {got}, expected {expected}")


def gw_linearized_cost(DX, DY, gamma) -> np.ndarray:
    """``L(DX, DY) (x) gamma``, an ``n x m`` matrix."""
    DX, DY, gamma = (np.asarray(a, dtype=np.float64) for a in (DX, DY, gamma))
    n, m = DX.shape[0], DY.shape[0]
    _check("DX", DX.shape, (n, n))
    _check("DY", DY.shape, (m, m))
    _check("gamma", gamma.shape, (n, m))
    return FactoredQuadCost.from_matrices(DX, DY).contract(gamma)


def coot_linearized_for_samples(X, Y, gamma_v) -> np.ndarray:
    """Sample cost ``L_s[i, j] = sum_{k,l} (X_ik - Y_jl)^2 gamma_v[k, l]``."""
    X, Y, gamma_v = (np.asarray(a, dtype=np.float64) for a in (X, Y, gamma_v))
    _check("gamma_v", gamma_v.shape, (X.shape[1], Y.shape[1]))
    return FactoredQuadCost.from_matrices(X, Y).contract(gamma_v)


def coot_linearized_for_features(X, Y, gamma_s) -> np.ndarray:
    """Feature cost ``L_v[k, l] = sum_{i,j} (X_ik - Y_jl)^2 gamma_s[i, j]``."""
    X, Y, gamma_s = (np.asarray(a, dtype=np.float64) for a in (X, Y, gamma_s))
    _check("gamma_s", gamma_s.shape, (X.shape[0], Y.shape[0]))
    return FactoredQuadCost.from_matrices(X, Y).contract(gamma_s, transpose=True)


def gw_objective(DX, DY, gamma) -> float:
    gamma = np.asarray(gamma, dtype=np.float64)
    return float(np.sum(gw_linearized_cost(DX, DY, gamma) * gamma))


def coot_objective(X, Y, gamma_s, gamma_v) -> float:
    gamma_s = np.asarray(gamma_s, dtype=np.float64)
    _check("gamma_s", gamma_s.shape, (np.shape(X)[0], np.shape(Y)[0]))
    return float(np.sum(coot_linearized_for_samples(X, Y, gamma_v) * gamma_s))


def agw_objective(DX, DY, X, Y, gamma_s, gamma_v, alpha) -> float:
    """``alpha * GW(gamma_s) + (1 - alpha) * COOT(gamma_s, gamma_v)``.

    A zero weight skips its term entirely, so the endpoints evaluate exactly
    to the GW and COOT objectives.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    value = 0.0
    if alpha > 0:
        value += alpha * gw_objective(DX, DY, gamma_s)
    if alpha < 1:
        value += (1.0 - alpha) * coot_objective(X, Y, gamma_s, gamma_v)
    return value


def gw_gradient(DX, DY, gamma) -> np.ndarray:
    """Gradient of ``gamma -> gw_objective(DX, DY, gamma)``.

    Relies on the symmetry of both distance matrices, which makes the
    quadratic form's tensor symmetric under ``(i, j) <-> (k, l)``.
    """
    return 2.0 * gw_linearized_cost(DX, DY, gamma)
