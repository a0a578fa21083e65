"""Linear (Kantorovich) optimal transport: exact network simplex and
log-domain Sinkhorn scaling."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import Coupling, as_prob_vector

# consecutive degenerate pivots before switching to Bland's rule
_BLAND_AFTER = 50


@dataclass(frozen=True)
class LinearOtResult:
    plan: Coupling
    value: float
    iterations: int
    marginal_violation: float
    converged: bool = True
    potentials: Optional[Tuple[np.ndarray, np.ndarray]] = None


def _check_cost(C, n, m) -> np.ndarray:
    C = np.asarray(C, dtype=np.float64)
    if C.shape != (n, m):
        raise ValueError(f"cost matrix has shape {C.shape}, marginals need {(n, m)}")
    if not np.all(np.isfinite(C)):
        raise ValueError("cost matrix contains non-finite entries")
    return C


def _result(C, plan, mu, nu, iterations, converged=True) -> LinearOtResult:
    coupling = Coupling(plan, mu, nu)
    return LinearOtResult(
        plan=coupling,
        value=float(np.sum(C * plan)),
        iterations=iterations,
        marginal_violation=coupling.marginal_violation(),
        converged=converged,
    )


def solve_exact(C, mu, nu) -> LinearOtResult:
    """Exact minimizer of ``<C, P>`` over couplings of ``mu`` and ``nu``.

    The returned plan is a vertex of the transportation polytope, so it has
    at most ``n + m - 1`` nonzero entries. Square problems with uniform
    marginals go through the assignment solver (the Birkhoff polytope's
    vertices are permutations); everything else runs a transportation
    network simplex.
    """
    mu = as_prob_vector(mu)
    nu = as_prob_vector(nu)
    n, m = mu.size, nu.size
    C = _check_cost(C, n, m)

    if n == m and np.all(mu == mu[0]) and np.all(nu == nu[0]):
        rows, cols = linear_sum_assignment(C)
        plan = np.zeros((n, m))
        plan[rows, cols] = mu[rows]
        return _result(C, plan, mu, nu, iterations=0)

    plan, iterations = _network_simplex(C, mu, nu)
    return _result(C, plan, mu, nu, iterations)


def _northwest_corner(mu, nu):
    n, m = mu.size, nu.size
    supply, demand = mu.copy(), nu.copy()
    cells = []
    i = j = 0
    while True:
        cells.append((i, j))
        row_done = supply[i] <= demand[j]
        x = min(supply[i], demand[j])
        supply[i] -= x
        demand[j] -= x
        if i == n - 1 and j == m - 1:
            break
        if (row_done and i < n - 1) or j == m - 1:
            i += 1
        else:
            j += 1
    return cells


class _Tree:
    """Spanning tree basis of the bipartite transportation graph.

    Node ids: rows are ``0..n-1``, columns are ``n..n+m-1``.
    """

    def __init__(self, n, m, cells):
        self.n, self.m = n, m
        self.adj = [set() for _ in range(n + m)]
        for i, j in cells:
            self.add(i, j)

    def add(self, i, j):
        self.adj[i].add(self.n + j)
        self.adj[self.n + j].add(i)

    def remove(self, i, j):
        self.adj[i].discard(self.n + j)
        self.adj[self.n + j].discard(i)

    def cells(self):
        n = self.n
        return [(i, c - n) for i in range(n) for c in sorted(self.adj[i])]

    def potentials(self, C):
        """Solve ``u_i + v_j = C_ij`` on basic cells with ``u_0 = 0``.

        Also returns parent pointers and depths of the BFS tree rooted at
        row 0, used for cycle search.
        """
        n, m = self.n, self.m
        u = np.zeros(n)
        v = np.zeros(m)
        parent = np.full(n + m, -1)
        depth = np.zeros(n + m, dtype=int)
        seen = np.zeros(n + m, dtype=bool)
        seen[0] = True
        queue = [0]
        for node in queue:
            for nb in sorted(self.adj[node]):
                if seen[nb]:
                    continue
                seen[nb] = True
                parent[nb] = node
                depth[nb] = depth[node] + 1
                if node < n:
                    v[nb - n] = C[node, nb - n] - u[node]
                else:
                    u[nb] = C[nb, node - n] - v[node - n]
                queue.append(nb)
        return u, v, parent, depth

    @staticmethod
    def path(a, b, parent, depth):
        """Node path from ``a`` to ``b`` through the tree."""
        left, right = [a], [b]
        while depth[a] > depth[b]:
            a = parent[a]
            left.append(a)
        while depth[b] > depth[a]:
            b = parent[b]
            right.append(b)
        while a != b:
            a, b = parent[a], parent[b]
            left.append(a)
            right.append(b)
        return left + right[-2::-1]

    def flows(self, mu, nu):
        """Flows implied by the basis, by peeling leaves off the tree."""
        n = self.n
        adj = [set(s) for s in self.adj]
        rest = np.concatenate([mu, nu])
        plan = np.zeros((n, self.m))
        leaves = [k for k in range(len(adj)) if len(adj[k]) == 1]
        while leaves:
            k = leaves.pop()
            if len(adj[k]) != 1:
                continue
            (other,) = adj[k]
            i, c = (k, other) if k < n else (other, k)
            plan[i, c - n] = max(rest[k], 0.0)
            rest[other] -= rest[k]
            rest[k] = 0.0
            adj[k].discard(other)
            adj[other].discard(k)
            if len(adj[other]) == 1:
                leaves.append(other)
        return plan


def _network_simplex(C, mu, nu, max_pivots=None):
    n, m = C.shape
    tree = _Tree(n, m, _northwest_corner(mu, nu))
    flow = tree.flows(mu, nu)
    scale = max(1.0, float(np.abs(C).max()))
    tol = 1e-13 * scale
    if max_pivots is None:
        max_pivots = 50 * (n + m) ** 2
    degenerate = 0
    pivots = 0
    while pivots < max_pivots:
        u, v, parent, depth = tree.potentials(C)
        reduced = C - u[:, None] - v[None, :]
        if degenerate < _BLAND_AFTER:
            k = int(np.argmin(reduced))
            if reduced.flat[k] >= -tol:
                break
        else:
            negative = np.flatnonzero(reduced < -tol)
            if negative.size == 0:
                break
            k = int(negative[0])
        i, j = divmod(k, m)

        nodes = tree.path(i, n + j, parent, depth)
        edges = []
        for a, b in zip(nodes[:-1], nodes[1:]):
            edges.append((a, b - n) if a < n else (b, a - n))
        # edges alternate: the first touches row i and gives up mass
        losers = edges[0::2]
        theta = min(flow[e] for e in losers)
        leave = min(e for e in losers if flow[e] == theta)
        tree.remove(*leave)
        tree.add(i, j)
        flow = tree.flows(mu, nu)
        pivots += 1
        degenerate = degenerate + 1 if theta <= 1e-15 else 0
    else:
        raise RuntimeError(f"network simplex did not terminate in {max_pivots} pivots")
    return tree.flows(mu, nu), pivots


def _logsumexp(A, axis):
    # scipy.special.logsumexp carries ~0.2 ms of overhead per call, which
    # dominates on the small matrices of inner solves
    top = A.max(axis=axis, keepdims=True)
    return np.squeeze(top + np.log(np.exp(A - top).sum(axis=axis, keepdims=True)), axis=axis)


def sinkhorn(C, mu, nu, eps: float, max_iter: int = 10000, tol: float = 1e-9,
             init=None) -> LinearOtResult:
    """Entropic OT by log-domain Sinkhorn iterations.

    Returns the plan ``exp((f_i + g_j - C_ij) / eps)`` built from the dual
    potentials. ``marginal_violation`` is the largest L1 deviation of the
    row or column sums; on a non-converged run the result is still returned,
    with ``converged=False``. ``value`` is the unregularized cost.

    ``init`` is an optional ``(f, g)`` pair of starting potentials, e.g. the
    ``potentials`` of an earlier result on a nearby cost.
    """
    if not eps > 0:
        raise ValueError(f"sinkhorn needs eps > 0, got {eps}")
    mu = as_prob_vector(mu)
    nu = as_prob_vector(nu)
    C = _check_cost(C, mu.size, nu.size)
    with np.errstate(divide="ignore"):
        log_mu, log_nu = np.log(mu), np.log(nu)

    if init is None:
        f, g = np.zeros(mu.size), np.zeros(nu.size)
    else:
        f, g = (np.array(v, dtype=np.float64) for v in init)
        if f.shape != mu.shape or g.shape != nu.shape:
            raise ValueError("initial potentials do not match the marginals")
    violation = np.inf
    it = 0
    while it < max_iter:
        it += 1
        f = eps * (log_mu - _logsumexp((g[None, :] - C) / eps, axis=1))
        g = eps * (log_nu - _logsumexp((f[:, None] - C) / eps, axis=0))
        if it % 10 == 0 or it == max_iter:
            plan = np.exp((f[:, None] + g[None, :] - C) / eps)
            violation = float(np.abs(plan.sum(axis=1) - mu).sum())
            if violation <= tol:
                break
    plan = np.exp((f[:, None] + g[None, :] - C) / eps)
    res = _result(C, plan, mu, nu, it)
    return LinearOtResult(res.plan, res.value, it, res.marginal_violation,
                          res.marginal_violation <= tol, (f, g))
