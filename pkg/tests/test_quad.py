import time

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from agw import (agw_objective, coot_linearized_for_features, coot_linearized_for_samples,
                 coot_objective, gw_gradient, gw_linearized_cost, gw_objective)
from agw.oracle import (coot_objective_bruteforce, coupling_2x2, coupling_scan_2x2,
                        feature_contract_bruteforce, finite_diff_gradient,
                        gw_objective_bruteforce, tensor_contract_bruteforce)
from agw.quad import FactoredQuadCost
from conftest import random_coupling, random_distance

TP = np.array([[0.0, 1.0], [1.0, 0.0]])


def matrix(rows, cols):
    return hnp.arrays(np.float64, (rows, cols), elements=st.floats(-5, 5))


@st.composite
def contraction_case(draw):
    n, m, p, q = (draw(st.integers(1, 6)) for _ in range(4))
    return draw(matrix(n, p)), draw(matrix(m, q)), draw(matrix(p, q))


@given(contraction_case())
def test_factored_contraction_matches_loops(case):
    left, right, gamma = case
    got = FactoredQuadCost.from_matrices(left, right).contract(gamma)
    want = tensor_contract_bruteforce(left, right, gamma)
    # absolute 1e-10 at unit scale; hypothesis also tries large signed gammas
    scale = max(1.0, (100 * np.abs(gamma)).sum())
    assert np.abs(got - want).max() <= 1e-12 * scale + 1e-10


def test_factor_squares():
    A = np.array([[1.5, -2.0], [0.25, 3.0]])
    f = FactoredQuadCost.from_matrices(A, A)
    assert np.abs(f.left_sq - A**2).max() <= 1e-12


def test_gw_identity_plan_has_zero_diagonal(rng):
    D = random_distance(rng, 5)
    L = gw_linearized_cost(D, D, np.eye(5) / 5)
    assert np.abs(np.diag(L)).max() <= 1e-12


def test_gw_linearization_random_instance(rng):
    DX, DY = random_distance(rng, 4), random_distance(rng, 5)
    G = random_coupling(rng, 4, 5)
    assert np.abs(gw_linearized_cost(DX, DY, G)
                  - tensor_contract_bruteforce(DX, DY, G)).max() <= 1e-10


def test_gw_linearization_of_zero(rng):
    DX, DY = random_distance(rng, 3), random_distance(rng, 4)
    assert not gw_linearized_cost(DX, DY, np.zeros((3, 4))).any()


def test_gw_linearization_shape_errors(rng):
    DX, DY = random_distance(rng, 3), random_distance(rng, 4)
    with pytest.raises(ValueError):
        gw_linearized_cost(DX, DY, np.zeros((4, 3)))
    with pytest.raises(ValueError):
        gw_linearized_cost(DX[:2], DY, np.zeros((3, 4)))


def test_coot_sample_cost_matched_features(rng):
    X = rng.normal(size=(5, 3))
    L = coot_linearized_for_samples(X, X, np.eye(3) / 3)
    sq = ((X[:, None, :] - X[None, :, :]) ** 2).sum(-1) / 3
    assert np.abs(L - sq).max() <= 1e-12
    assert np.abs(np.diag(L)).max() <= 1e-12


@pytest.mark.parametrize("feasible", [True, False])
def test_coot_costs_random_instance(rng, feasible):
    X, Y = rng.uniform(-5, 5, (3, 4)), rng.uniform(-5, 5, (5, 2))
    Gv, Gs = random_coupling(rng, 4, 2, feasible), random_coupling(rng, 3, 5, feasible)
    assert np.abs(coot_linearized_for_samples(X, Y, Gv)
                  - tensor_contract_bruteforce(X, Y, Gv)).max() <= 1e-10
    assert np.abs(coot_linearized_for_features(X, Y, Gs)
                  - feature_contract_bruteforce(X, Y, Gs)).max() <= 1e-10


def test_coot_feature_cost_matched_samples(rng):
    X = rng.normal(size=(6, 4))
    assert np.abs(np.diag(coot_linearized_for_features(X, X, np.eye(6) / 6))).max() <= 1e-12


def test_coot_feature_cost_at_product_coupling(rng):
    X, Y = rng.normal(size=(4, 3)), rng.normal(size=(5, 2))
    L = coot_linearized_for_features(X, Y, np.full((4, 5), 1 / 20))
    mean = ((X[:, None, :, None] - Y[None, :, None, :]) ** 2).mean(axis=(0, 1))
    assert np.abs(L - mean).max() <= 1e-12


def test_coot_sample_cost_translation(rng):
    X, Y = rng.normal(size=(4, 3)), rng.normal(size=(5, 2))
    Gv = random_coupling(rng, 3, 2)
    mu_f, nu_f = Gv.sum(axis=1), Gv.sum(axis=0)
    base = coot_linearized_for_samples(X, Y, Gv)
    shifted = coot_linearized_for_samples(X, Y + 1.0, Gv)
    # (x - y - 1)^2 = (x - y)^2 - 2 (x - y) + 1, contracted against Gv
    expected = base - 2 * ((X @ mu_f)[:, None] - (Y @ nu_f)[None, :]) + Gv.sum()
    assert np.abs(shifted - expected).max() <= 1e-10


def test_gw_objective_isometric_two_points():
    assert gw_objective(TP, TP, 0.5 * np.eye(2)) == 0


def test_gw_objective_two_point_scan():
    DY = 2 * TP
    for a in np.linspace(0, 0.5, 11):
        # closed form of the two-point family
        assert gw_objective(TP, DY, coupling_2x2(a)) == pytest.approx(
            0.5 + 16 * a * (0.5 - a), abs=1e-12)
    value, plan = coupling_scan_2x2(lambda G: gw_objective(TP, DY, G), resolution=10001)
    assert value == pytest.approx(0.5, abs=1e-12)
    assert np.array_equal(plan, coupling_2x2(0.0))


@given(st.integers(0, 2**32 - 1))
def test_gw_objective_nonnegative(seed):
    rng = np.random.default_rng(seed)
    n, m = rng.integers(1, 7, size=2)
    assert gw_objective(random_distance(rng, n), random_distance(rng, m),
                        random_coupling(rng, n, m)) >= 0


def test_objectives_match_bruteforce(rng):
    DX, DY = random_distance(rng, 4), random_distance(rng, 3)
    X, Y = rng.normal(size=(4, 5)), rng.normal(size=(3, 2))
    Gs, Gv = random_coupling(rng, 4, 3), random_coupling(rng, 5, 2)
    assert gw_objective(DX, DY, Gs) == pytest.approx(gw_objective_bruteforce(DX, DY, Gs), abs=1e-10)
    assert coot_objective(X, Y, Gs, Gv) == pytest.approx(coot_objective_bruteforce(X, Y, Gs, Gv),
                                                         abs=1e-10)


def test_coot_objective_self_match(rng):
    X = rng.normal(size=(4, 3))
    assert coot_objective(X, X, np.eye(4) / 4, np.eye(3) / 3) == pytest.approx(0, abs=1e-14)


def test_coot_objective_column_swap():
    X = np.array([[0.0, 1.0], [2.0, 3.0]])
    Y = np.array([[1.0, 0.0], [3.0, 2.0]])
    assert coot_objective(X, Y, 0.5 * np.eye(2), 0.5 * TP) == 0


def test_agw_objective_endpoints_and_affinity(rng):
    DX, DY = random_distance(rng, 5), random_distance(rng, 4)
    X, Y = rng.normal(size=(5, 3)), rng.normal(size=(4, 3))
    Gs, Gv = random_coupling(rng, 5, 4), random_coupling(rng, 3, 3)
    A, B = gw_objective(DX, DY, Gs), coot_objective(X, Y, Gs, Gv)
    assert agw_objective(DX, DY, X, Y, Gs, Gv, 1.0) == A
    assert agw_objective(DX, DY, X, Y, Gs, Gv, 0.0) == B
    for alpha in (0.0, 0.3, 0.5, 0.9, 1.0):
        assert abs(agw_objective(DX, DY, X, Y, Gs, Gv, alpha)
                   - (alpha * A + (1 - alpha) * B)) <= 1e-12 * max(1, A, B)


def test_agw_objective_rejects_alpha(rng):
    D = random_distance(rng, 2)
    with pytest.raises(ValueError):
        agw_objective(D, D, np.eye(2), np.eye(2), np.eye(2) / 2, np.eye(2) / 2, 1.2)


def test_gw_gradient_at_zero(rng):
    DX, DY = random_distance(rng, 3), random_distance(rng, 4)
    assert not gw_gradient(DX, DY, np.zeros((3, 4))).any()


def test_gw_gradient_matches_finite_differences(rng):
    DX, DY = random_distance(rng, 3), random_distance(rng, 3)
    G = random_coupling(rng, 3, 3)
    fd = finite_diff_gradient(lambda P: gw_objective_bruteforce(DX, DY, P), G, h=1e-6)
    g = gw_gradient(DX, DY, G)
    assert np.linalg.norm(g - fd) <= 1e-5 * np.linalg.norm(fd)


def test_gw_gradient_vanishes_on_diagonal_at_identity(rng):
    D = random_distance(rng, 6)
    assert np.abs(np.diag(gw_gradient(D, D, np.eye(6) / 6))).max() <= 1e-12


def test_linearization_cost_scales_cubically():
    # a literal n^2 m^2 contraction would grow 16x per doubling
    rng = np.random.default_rng(0)

    def best_time(n):
        D = random_distance(rng, n)
        G = np.full((n, n), 1.0 / n**2)
        times = []
        for _ in range(5):
            t = time.perf_counter()
            gw_linearized_cost(D, D, G)
            times.append(time.perf_counter() - t)
        return min(times)

    small, large = best_time(300), best_time(600)
    assert large / small < 12.0
