"""GW, COOT and AGW solvers.

AGW alternates two blocks: the feature coupling solves a linear OT problem
against the COOT feature cost, and the sample coupling minimizes

    alpha * GW(G) + (1 - alpha) * <L_s + S, G>

(``L_s`` the COOT sample cost, ``S`` an optional supervision cost) by
Frank-Wolfe with exact line search, or by entropic proximal steps when
``eps_s > 0``. Both couplings start from the product of their marginals.

Reported objectives never include entropy terms. A block update that would
increase the objective is rejected and ends the run, so every trajectory is
non-increasing; with exact inner solvers this only triggers on round-off.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import linot
from .core import (Coupling, SolveReport, SolverConfig, as_data_matrix,
                   as_distance_matrix, as_prob_vector, product_coupling,
                   uniform_hist)
from .quad import (agw_objective, coot_linearized_for_features,
                   coot_linearized_for_samples, coot_objective,
                   gw_linearized_cost)

Callback = Callable[[int, np.ndarray, Optional[np.ndarray]], None]


@dataclass(frozen=True)
class LineSearchStep:
    tau: float
    predicted_decrease: float


def line_search_quadratic(f0: float, slope: float, f1: float) -> LineSearchStep:
    """Exact minimizer over ``[0, 1]`` of the quadratic through ``f(0) = f0``,
    ``f'(0) = slope`` and ``f(1) = f1``."""
    a = f1 - f0 - slope
    if a > 0:
        tau = min(max(-slope / (2.0 * a), 0.0), 1.0)
    else:
        tau = 1.0 if f1 < f0 else 0.0
    return LineSearchStep(tau, -(slope * tau + a * tau * tau))


def _hist(w, n):
    return uniform_hist(n) if w is None else as_prob_vector(w, n)


def _linear_ot(kind, C, mu, nu, eps, cfg, warm=None):
    """Plan and convergence flag. ``warm`` is a dict carrying Sinkhorn
    potentials from one call to the next on slowly changing costs."""
    if kind == "exact":
        res = linot.solve_exact(C, mu, nu)
    else:
        init = warm.get("potentials") if warm is not None else None
        res = linot.sinkhorn(C, mu, nu, eps, cfg.sinkhorn_max_iter, cfg.sinkhorn_tol, init)
        if warm is not None:
            warm["potentials"] = res.potentials
    return np.array(res.plan.values), res.converged


class _SampleObjective:
    """``alpha * GW(G) + (1 - alpha) * <M, G>`` with its gradient."""

    def __init__(self, DX, DY, M, alpha):
        self.DX, self.DY, self.M, self.alpha = DX, DY, M, alpha

    def quad_cost(self, G):
        return gw_linearized_cost(self.DX, self.DY, G)

    def value(self, G, LG):
        f = self.alpha * float(np.sum(LG * G)) if self.alpha > 0 else 0.0
        if self.M is not None and self.alpha < 1:
            f += (1.0 - self.alpha) * float(np.sum(self.M * G))
        return f

    def gradient(self, LG):
        grad = 2.0 * self.alpha * LG if self.alpha > 0 else 0.0
        if self.M is not None and self.alpha < 1:
            grad = grad + (1.0 - self.alpha) * self.M
        return grad


def _frank_wolfe(obj, G, mu, nu, cfg, warm=None):
    LG = obj.quad_cost(G) if obj.alpha > 0 else None
    f = obj.value(G, LG)
    trajectory = []
    converged = False
    inner_ok = True
    it = 0
    while it < cfg.max_inner_iters:
        it += 1
        grad = obj.gradient(LG) + np.zeros_like(G)
        S, ok = _linear_ot(cfg.sample_linear_solver, grad, mu, nu, cfg.eps_s, cfg, warm)
        inner_ok &= ok
        D = S - G
        slope = float(np.sum(grad * D))
        curvature = 0.0
        if obj.alpha > 0:
            curvature = obj.alpha * float(np.sum(obj.quad_cost(D) * D))
        step = line_search_quadratic(f, slope, f + slope + curvature)
        if step.tau == 0.0:
            converged = True
            break
        G_new = S if step.tau == 1.0 else G + step.tau * D
        LG_new = obj.quad_cost(G_new) if obj.alpha > 0 else None
        f_new = obj.value(G_new, LG_new)
        if f_new > f:
            converged = True
            break
        G, LG, f_prev, f = G_new, LG_new, f, f_new
        trajectory.append(f)
        if cfg.converged(f_prev, f):
            converged = True
            break
    return G, f, trajectory, it, converged, inner_ok


def _entropic_proximal(obj, G, mu, nu, cfg, warm=None):
    LG = obj.quad_cost(G) if obj.alpha > 0 else None
    f = obj.value(G, LG)
    trajectory = []
    converged = False
    inner_ok = True
    it = 0
    while it < cfg.max_inner_iters:
        it += 1
        grad = obj.gradient(LG) + np.zeros_like(G)
        G_new, ok = _linear_ot("sinkhorn", grad, mu, nu, cfg.eps_s, cfg, warm)
        LG_new = obj.quad_cost(G_new) if obj.alpha > 0 else None
        f_new = obj.value(G_new, LG_new)
        if f_new > f:
            # objective stopped improving at this entropic strength
            converged = True
            break
        inner_ok &= ok
        change = float(np.abs(G_new - G).max())
        G, LG, f = G_new, LG_new, f_new
        trajectory.append(f)
        if change < cfg.plan_tol:
            converged = True
            break
    return G, f, trajectory, it, converged, inner_ok


def _sample_step(obj, G, mu, nu, cfg, warm=None):
    warm = {} if warm is None else warm
    if cfg.sample_solver == "frank_wolfe":
        return _frank_wolfe(obj, G, mu, nu, cfg, warm)
    return _entropic_proximal(obj, G, mu, nu, cfg, warm)


def _init(init, mu, nu):
    if init is None:
        return product_coupling(mu, nu)
    init = np.array(init, dtype=np.float64)
    if init.shape != (mu.size, nu.size):
        raise ValueError(f"initial coupling has shape {init.shape}, expected {(mu.size, nu.size)}")
    return init


def solve_gw(DX, DY, mu=None, nu=None, cfg: SolverConfig = None, init=None,
             callback: Optional[Callback] = None) -> SolveReport:
    """Gromov-Wasserstein coupling between two distance matrices.

    The trajectory holds one objective per Frank-Wolfe (or proximal)
    iteration. ``cfg.alpha`` is ignored.
    """
    cfg = cfg or SolverConfig()
    start = time.perf_counter()
    DX, DY = as_distance_matrix(DX), as_distance_matrix(DY)
    mu, nu = _hist(mu, DX.shape[0]), _hist(nu, DY.shape[0])
    G = _init(init, mu, nu)

    obj = _SampleObjective(DX, DY, None, 1.0)
    G, f, trajectory, iters, converged, inner_ok = _sample_step(obj, G, mu, nu, cfg)
    if callback is not None:
        callback(iters, G, None)
    message = "converged" if converged else "iteration cap reached"
    if not inner_ok:
        message += "; an inner Sinkhorn solve did not converge"
    return SolveReport(
        objective_trajectory=trajectory,
        final_objective=f,
        sample_coupling=Coupling(G, mu, nu),
        converged=converged and inner_ok,
        bcd_iterations=len(trajectory),
        wall_time_seconds=time.perf_counter() - start,
        message=message,
        inner_iterations=[iters],
    )


def solve_coot(X, Y, mu=None, nu=None, mu_f=None, nu_f=None, cfg: SolverConfig = None,
               init_s=None, init_v=None, callback: Optional[Callback] = None) -> SolveReport:
    """CO-Optimal Transport by alternating exact (or Sinkhorn) linear OT solves."""
    cfg = cfg or SolverConfig()
    start = time.perf_counter()
    X, Y = as_data_matrix(X), as_data_matrix(Y)
    mu, nu = _hist(mu, X.shape[0]), _hist(nu, Y.shape[0])
    mu_f, nu_f = _hist(mu_f, X.shape[1]), _hist(nu_f, Y.shape[1])
    Gs, Gv = _init(init_s, mu, nu), _init(init_v, mu_f, nu_f)
    sample_kind = "sinkhorn" if cfg.eps_s > 0 else "exact"
    warm_s, warm_v = {}, {}

    prev = coot_objective(X, Y, Gs, Gv)
    trajectory = []
    converged = False
    inner_ok = True
    message = "iteration cap reached"
    for t in range(1, cfg.max_bcd_iters + 1):
        Gv_new, ok_v = _linear_ot(cfg.feature_linear_solver,
                                  coot_linearized_for_features(X, Y, Gs), mu_f, nu_f, cfg.eps_v, cfg,
                                  warm_v)
        Gs_new, ok_s = _linear_ot(sample_kind,
                                  coot_linearized_for_samples(X, Y, Gv_new), mu, nu, cfg.eps_s, cfg,
                                  warm_s)
        cur = coot_objective(X, Y, Gs_new, Gv_new)
        if cur > prev:
            converged = True
            message = f"stopped: objective rose by {cur - prev:.3e}; kept previous iterate"
            break
        inner_ok &= ok_v and ok_s
        Gs, Gv = Gs_new, Gv_new
        trajectory.append(cur)
        if callback is not None:
            callback(t, Gs, Gv)
        if cfg.converged(prev, cur):
            converged = True
            message = "converged"
            break
        prev = cur
    if not inner_ok:
        message += "; an inner Sinkhorn solve did not converge"
    return SolveReport(
        objective_trajectory=trajectory,
        final_objective=trajectory[-1] if trajectory else prev,
        sample_coupling=Coupling(Gs, mu, nu),
        feature_coupling=Coupling(Gv, mu_f, nu_f),
        converged=converged and inner_ok,
        bcd_iterations=len(trajectory),
        wall_time_seconds=time.perf_counter() - start,
        message=message,
    )


def solve_agw(DX, DY, X, Y, mu=None, nu=None, mu_f=None, nu_f=None,
              cfg: SolverConfig = None, supervision=None, init_s=None, init_v=None,
              callback: Optional[Callback] = None) -> SolveReport:
    """Augmented GW by block-coordinate descent.

    Each iteration first re-solves the feature coupling for the current
    sample coupling, then runs the fused sample step. ``supervision`` is an
    ``n x m`` cost added to the COOT sample cost (so it is weighted by
    ``1 - alpha``).

    The trajectory holds the objective after each BCD iteration. It is the
    AGW objective plus the supervision term ``(1 - alpha) <S, G_s>``, which
    is what the iterations minimize; that term is also reported on its own
    as ``supervision_term``. Without supervision the two coincide.
    """
    cfg = cfg or SolverConfig()
    start = time.perf_counter()
    DX, DY = as_distance_matrix(DX), as_distance_matrix(DY)
    X, Y = as_data_matrix(X), as_data_matrix(Y)
    n, m = X.shape[0], Y.shape[0]
    if DX.shape[0] != n or DY.shape[0] != m:
        raise ValueError(f"distance matrices {DX.shape}, {DY.shape} do not match "
                         f"data matrices with {n} and {m} samples")
    mu, nu = _hist(mu, n), _hist(nu, m)
    mu_f, nu_f = _hist(mu_f, X.shape[1]), _hist(nu_f, Y.shape[1])
    if supervision is not None:
        supervision = np.asarray(supervision, dtype=np.float64)
        if supervision.shape != (n, m):
            raise ValueError(f"supervision has shape {supervision.shape}, expected {(n, m)}")
        if not np.all(np.isfinite(supervision)):
            raise ValueError("supervision contains non-finite entries")
    alpha = cfg.alpha
    Gs, Gv = _init(init_s, mu, nu), _init(init_v, mu_f, nu_f)
    warm_s, warm_v = {}, {}

    def supervised(Gs):
        if supervision is None or alpha == 1:
            return 0.0
        return (1.0 - alpha) * float(np.sum(supervision * Gs))

    def total(Gs, Gv):
        return agw_objective(DX, DY, X, Y, Gs, Gv, alpha) + supervised(Gs)

    prev = total(Gs, Gv)
    trajectory, inner_iterations = [], []
    converged = False
    inner_ok = True
    message = "iteration cap reached"
    for t in range(1, cfg.max_bcd_iters + 1):
        Lv = coot_linearized_for_features(X, Y, Gs)
        Gv_new, ok_v = _linear_ot(cfg.feature_linear_solver, Lv, mu_f, nu_f, cfg.eps_v, cfg, warm_v)
        M = coot_linearized_for_samples(X, Y, Gv_new)
        if supervision is not None:
            M = M + supervision
        obj = _SampleObjective(DX, DY, M, alpha)
        Gs_new, _, _, iters, _, ok_s = _sample_step(obj, Gs, mu, nu, cfg, warm_s)
        cur = total(Gs_new, Gv_new)
        if cur > prev:
            converged = True
            message = f"stopped: objective rose by {cur - prev:.3e}; kept previous iterate"
            break
        inner_ok &= ok_v and ok_s
        Gs, Gv = Gs_new, Gv_new
        trajectory.append(cur)
        inner_iterations.append(iters)
        if callback is not None:
            callback(t, Gs, Gv)
        if cfg.converged(prev, cur):
            converged = True
            message = "converged"
            break
        prev = cur
    if not inner_ok:
        message += "; an inner Sinkhorn solve did not converge"
    return SolveReport(
        objective_trajectory=trajectory,
        final_objective=trajectory[-1] if trajectory else prev,
        sample_coupling=Coupling(Gs, mu, nu),
        feature_coupling=Coupling(Gv, mu_f, nu_f),
        converged=converged and inner_ok,
        bcd_iterations=len(trajectory),
        wall_time_seconds=time.perf_counter() - start,
        message=message,
        supervision_term=supervised(Gs),
        inner_iterations=inner_iterations,
    )
