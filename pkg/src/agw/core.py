"""Shared domain types: histograms, data / distance matrices, couplings,
solver configuration and solve reports.

Matrices are plain dense float64 numpy arrays. The ``as_*`` helpers validate
and return read-only arrays; they are what every solver calls on its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

#: tolerance on the total mass of constructed histograms
MASS_TOL = 1e-12
#: tolerance on the marginals of couplings returned by iterative solvers
SOLVER_MARGINAL_TOL = 1e-7

SAMPLE_SOLVERS = ("frank_wolfe", "entropic_proximal")
LINEAR_SOLVERS = ("exact", "sinkhorn")


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


def uniform_hist(n: int) -> np.ndarray:
    """Uniform histogram with ``n`` bins."""
    if int(n) != n or n < 1:
        raise ValueError(f"uniform_hist needs a positive integer, got {n!r}")
    return _readonly(np.full(int(n), 1.0 / n))


def as_prob_vector(w, n: Optional[int] = None, tol: float = MASS_TOL) -> np.ndarray:
    """Validate a histogram: 1-D, nonnegative, summing to one within ``tol``."""
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 1 or w.size == 0:
        raise ValueError(f"histogram must be a non-empty 1-D array, got shape {w.shape}")
    if n is not None and w.size != n:
        raise ValueError(f"histogram has {w.size} bins, expected {n}")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise ValueError("histogram entries must be finite and nonnegative")
    if abs(w.sum() - 1.0) > tol:
        raise ValueError(f"histogram sums to {w.sum()!r}, not 1")
    return _readonly(w)


def as_data_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise ValueError(f"data matrix must be 2-D with n, d >= 1, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("data matrix contains non-finite entries")
    return _readonly(X)


def as_distance_matrix(D, tol: float = 1e-10) -> np.ndarray:
    """Validate a square, symmetric, zero-diagonal, nonnegative matrix."""
    D = np.asarray(D, dtype=np.float64)
    if D.ndim != 2 or D.shape[0] != D.shape[1] or D.shape[0] < 1:
        raise ValueError(f"distance matrix must be square, got shape {D.shape}")
    if not np.all(np.isfinite(D)):
        raise ValueError("distance matrix contains non-finite entries")
    # tolerances are relative to the matrix scale
    scale = max(1.0, float(np.abs(D).max()))
    if np.abs(D - D.T).max() > tol * scale:
        raise ValueError("distance matrix is not symmetric")
    if np.abs(np.diag(D)).max() > tol * scale:
        raise ValueError("distance matrix has a nonzero diagonal")
    if D.min() < -tol * scale:
        raise ValueError("distance matrix has negative entries")
    return _readonly(D)


@dataclass(frozen=True)
class Coupling:
    """Nonnegative matrix together with the marginals it should satisfy."""

    values: np.ndarray
    row_marginal: np.ndarray
    col_marginal: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _readonly(self.values))
        object.__setattr__(self, "row_marginal", _readonly(self.row_marginal))
        object.__setattr__(self, "col_marginal", _readonly(self.col_marginal))
        if self.values.ndim != 2:
            raise ValueError("coupling values must be a 2-D matrix")

    @property
    def shape(self):
        return self.values.shape

    def marginal_violation(self) -> float:
        """Largest L1 deviation of the row or column sums from the marginals."""
        r = np.abs(self.values.sum(axis=1) - self.row_marginal).sum()
        c = np.abs(self.values.sum(axis=0) - self.col_marginal).sum()
        return float(max(r, c))


def product_coupling(mu, nu) -> np.ndarray:
    return np.outer(mu, nu)


def validate_coupling(c: Coupling, tol: float = SOLVER_MARGINAL_TOL) -> bool:
    """True iff ``c`` is nonnegative and meets both marginals within ``tol``.

    Raises ``ValueError`` when the matrix and marginal sizes disagree.
    """
    n, m = c.values.shape
    if c.row_marginal.shape != (n,) or c.col_marginal.shape != (m,):
        raise ValueError(
            f"coupling of shape {(n, m)} with marginals of sizes "
            f"{c.row_marginal.shape} and {c.col_marginal.shape}"
        )
    if np.any(c.values < 0):
        return False
    rows_ok = np.all(np.abs(c.values.sum(axis=1) - c.row_marginal) <= tol)
    cols_ok = np.all(np.abs(c.values.sum(axis=0) - c.col_marginal) <= tol)
    return bool(rows_ok and cols_ok)


@dataclass(frozen=True)
class SolverConfig:
    """Hyperparameters shared by the GW, COOT and AGW solvers.

    ``inner_sample_solver`` and ``inner_linear_solver`` default to ``None``,
    meaning: entropic proximal steps on the sample coupling iff ``eps_s > 0``,
    and Sinkhorn for the feature coupling iff ``eps_v > 0``. An explicit
    ``inner_linear_solver`` selects the linear oracle of the Frank-Wolfe
    sample step (Sinkhorn there uses strength ``eps_s``).
    """

    alpha: float = 0.5
    eps_s: float = 0.0
    eps_v: float = 0.0
    max_bcd_iters: int = 200
    max_inner_iters: int = 500
    tol_abs: float = 1e-9
    tol_rel: float = 1e-9
    inner_sample_solver: Optional[str] = None
    inner_linear_solver: Optional[str] = None
    seed: int = 1976
    sinkhorn_max_iter: int = 10000
    sinkhorn_tol: float = 1e-9
    plan_tol: float = 1e-9

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.eps_s < 0 or self.eps_v < 0:
            raise ValueError("entropic strengths must be nonnegative")
        if min(self.tol_abs, self.tol_rel, self.sinkhorn_tol, self.plan_tol) <= 0:
            raise ValueError("tolerances must be positive")
        if min(self.max_bcd_iters, self.max_inner_iters, self.sinkhorn_max_iter) < 1:
            raise ValueError("iteration caps must be at least 1")
        if self.inner_sample_solver not in (None,) + SAMPLE_SOLVERS:
            raise ValueError(f"unknown inner_sample_solver {self.inner_sample_solver!r}")
        if self.inner_linear_solver not in (None,) + LINEAR_SOLVERS:
            raise ValueError(f"unknown inner_linear_solver {self.inner_linear_solver!r}")
        if self.sample_solver == "entropic_proximal" and self.eps_s == 0:
            raise ValueError("entropic_proximal sample steps need eps_s > 0")
        if self.sample_linear_solver == "sinkhorn" and self.eps_s == 0:
            raise ValueError("a Sinkhorn linear oracle needs eps_s > 0")

    @property
    def sample_solver(self) -> str:
        if self.inner_sample_solver is not None:
            return self.inner_sample_solver
        return "entropic_proximal" if self.eps_s > 0 else "frank_wolfe"

    @property
    def sample_linear_solver(self) -> str:
        # linear oracle of the Frank-Wolfe sample step
        if self.inner_linear_solver is not None:
            return self.inner_linear_solver
        return "exact"

    @property
    def feature_linear_solver(self) -> str:
        return "sinkhorn" if self.eps_v > 0 else "exact"

    def converged(self, prev: float, cur: float) -> bool:
        return abs(cur - prev) <= self.tol_abs + self.tol_rel * abs(cur)


@dataclass
class SolveReport:
    objective_trajectory: list
    final_objective: float
    sample_coupling: Coupling
    feature_coupling: Optional[Coupling] = None
    converged: bool = False
    bcd_iterations: int = 0
    wall_time_seconds: float = 0.0
    message: str = ""
    supervision_term: float = 0.0
    inner_iterations: list = field(default_factory=list)
