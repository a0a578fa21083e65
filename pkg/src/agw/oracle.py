"""Brute-force reference computations for tests.

Nothing here imports the factored code paths in :mod:`agw.quad` or
:mod:`agw.linot`; everything is literal loops and enumeration, meant for
n <= 8.
"""

from __future__ import annotations

import itertools

import numpy as np


def tensor_contract_bruteforce(left, right, gamma) -> np.ndarray:
    """``[L (x) gamma]_ij = sum_{k,l} (left[i, k] - right[j, l])^2 gamma[k, l]``.

    ``left`` is ``n x p``, ``right`` is ``m x q`` and ``gamma`` is ``p x q``.
    With distance matrices (p = n, q = m) this is the GW tensor; with data
    matrices and a feature coupling it is the COOT sample cost.
    """
    left, right, gamma = (np.asarray(a, dtype=float) for a in (left, right, gamma))
    n, p = left.shape
    m, q = right.shape
    if gamma.shape != (p, q):
        raise ValueError(f"gamma has shape {gamma.shape}, expected {(p, q)}")
    out = np.zeros((n, m))
    for i in range(n):
        for j in range(m):
            s = 0.0
            for k in range(p):
                for l in range(q):
                    s += (left[i, k] - right[j, l]) ** 2 * gamma[k, l]
            out[i, j] = s
    return out


def feature_contract_bruteforce(X, Y, gamma_s) -> np.ndarray:
    """``[L (x) gamma_s]_kl = sum_{i,j} (X[i, k] - Y[j, l])^2 gamma_s[i, j]``."""
    X, Y = np.asarray(X, dtype=float), np.asarray(Y, dtype=float)
    return tensor_contract_bruteforce(X.T, Y.T, gamma_s)


def gw_objective_bruteforce(DX, DY, gamma) -> float:
    gamma = np.asarray(gamma, dtype=float)
    return float(np.sum(tensor_contract_bruteforce(DX, DY, gamma) * gamma))


def coot_objective_bruteforce(X, Y, gamma_s, gamma_v) -> float:
    gamma_s = np.asarray(gamma_s, dtype=float)
    return float(np.sum(tensor_contract_bruteforce(X, Y, gamma_v) * gamma_s))


def agw_objective_bruteforce(DX, DY, X, Y, gamma_s, gamma_v, alpha) -> float:
    return (alpha * gw_objective_bruteforce(DX, DY, gamma_s)
            + (1 - alpha) * coot_objective_bruteforce(X, Y, gamma_s, gamma_v))


def permutation_ot_oracle(C):
    """Minimum of ``(1/n) sum_i C[i, sigma(i)]`` over all permutations.

    Returns ``(value, sigma)``; ties go to the first permutation in
    lexicographic order.
    """
    C = np.asarray(C, dtype=float)
    n = C.shape[0]
    if C.shape != (n, n) or n > 8:
        raise ValueError("permutation oracle needs a square matrix with n <= 8")
    best, best_perm = np.inf, None
    rows = np.arange(n)
    for perm in itertools.permutations(range(n)):
        value = C[rows, perm].sum() / n
        if value < best:
            best, best_perm = value, perm
    return float(best), tuple(best_perm)


def coupling_2x2(a: float) -> np.ndarray:
    """Generic element of the uniform 2 x 2 transportation polytope."""
    return np.array([[a, 0.5 - a], [0.5 - a, a]])


def coupling_scan_2x2(objective, resolution: int = 10001):
    """Grid search of ``objective`` over the uniform 2 x 2 couplings.

    Scans ``a`` on ``resolution`` evenly spaced points of ``[0, 0.5]``
    (endpoints included) and returns ``(value, coupling)`` of the first best
    point.
    """
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    best, best_a = np.inf, None
    for a in np.linspace(0.0, 0.5, resolution):
        value = objective(coupling_2x2(a))
        if value < best:
            best, best_a = value, a
    return float(best), coupling_2x2(best_a)


def finite_diff_gradient(objective, gamma, h: float = 1e-6) -> np.ndarray:
    """Entrywise central differences of ``objective`` at ``gamma``."""
    gamma = np.asarray(gamma, dtype=float)
    grad = np.zeros_like(gamma)
    for idx in np.ndindex(gamma.shape):
        up, down = gamma.copy(), gamma.copy()
        up[idx] += h
        down[idx] -= h
        grad[idx] = (objective(up) - objective(down)) / (2 * h)
    return grad
