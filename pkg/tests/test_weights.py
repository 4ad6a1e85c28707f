import math
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gradedcaputo.mesh import build_aux_mesh, build_graded_mesh, choose_Nbar
from gradedcaputo.special import caputo_of_power
from gradedcaputo.weights import (
    apply_discrete_caputo,
    discrete_caputo,
    discrete_l1_caputo,
    hl1_coefficient_block,
    hl1_coefficients,
    hl1_kernel_moments,
    l1_weight_block,
    l1_weights,
    xi_weight_block,
    xi_weights,
)

from oracles import delta_oracle, gamma_oracle, l1_weight_oracle

GAMMA_15 = 0.886226925452758  # Gamma(1.5) = sqrt(pi)/2


def test_l1_uniform_value():
    z = l1_weights(np.array([0.0, 1.0, 2.0]), 0.5, 2).zeta
    assert z[1] == pytest.approx(1.1283791671, rel=1e-10)
    assert z[0] == pytest.approx((2**0.5 - 1) / GAMMA_15, rel=1e-14)


@pytest.mark.parametrize("tau,alpha", [(0.1, 0.3), (1.0, 0.5), (2.5, 0.9)])
def test_l1_adjacent_uniform(tau, alpha):
    pts = tau * np.arange(6)
    z = l1_weights(pts, alpha, 5).zeta
    assert z[-1] == pytest.approx(tau**-alpha / math.gamma(2 - alpha), rel=1e-14)
    J, k = 5, np.arange(5)
    ref = ((J - k) ** (1 - alpha) - (J - k - 1) ** (1 - alpha)) * tau**-alpha / math.gamma(2 - alpha)
    np.testing.assert_allclose(z, ref, rtol=1e-13)


def test_l1_monotone_small_aux():
    aux = build_aux_mesh(8, 3.0, 1.0)
    for J in range(1, 9):
        z = l1_weights(aux.points, 0.4, J).zeta
        assert np.all(np.diff(z) >= 0)


def test_l1_rejects_target():
    pts = np.linspace(0, 1, 5)
    for J in (0, 5):
        with pytest.raises(ValueError):
            l1_weights(pts, 0.5, J)


def test_l1_block_matches_rows():
    m = build_graded_mesh(40, 4.0, 1.0)
    Z = l1_weight_block(m, 0.35, 3, 30)
    for J in range(3, 30):
        z = l1_weights(m, 0.35, J).zeta
        np.testing.assert_array_equal(Z[J - 3, :J], z)
        assert np.all(Z[J - 3, J:] == 0.0)


def test_xi_example_value():
    aux = build_aux_mesh(1, 1.0, 0.25)
    xi = xi_weights(aux, 0.5, 1.0).xi
    closed = (1 - 0.75**0.5) / (GAMMA_15 * 0.25)
    assert closed == pytest.approx(0.6046, abs=1e-4)
    assert xi[0] == pytest.approx(closed, rel=1e-14)
    assert xi[0] == pytest.approx(
        l1_weight_oracle(np.array([0.0, 0.25, 1.0]), 0.5, 2, 0), rel=1e-10)


def test_xi_single_interval_formula():
    aux = build_aux_mesh(1, 2.0, 0.01)
    a, tj = 0.7, 0.3
    ref = (tj ** (1 - a) - (tj - 0.01) ** (1 - a)) / (math.gamma(2 - a) * 0.01)
    assert xi_weights(aux, a, tj).xi[0] == pytest.approx(ref, rel=1e-13)


def test_xi_rejects_target_inside():
    aux = build_aux_mesh(4, 2.0, 0.1)
    for t in (0.1, 0.05):
        with pytest.raises(ValueError):
            xi_weights(aux, 0.5, t)


def test_xi_constant_annihilation():
    aux = build_aux_mesh(30, 4.0, 1e-3)
    xi = xi_weights(aux, 0.4, 0.5).xi
    assert abs(xi @ np.diff(np.full(31, 3.7))) <= 1e-12 * xi.max()


def test_xi_block_matches_rows():
    aux = build_aux_mesh(20, 3.0, 1e-2)
    targets = np.array([0.02, 0.3, 1.0])
    B = xi_weight_block(aux, 0.6, targets)
    for i, t in enumerate(targets):
        np.testing.assert_array_equal(B[i], xi_weights(aux, 0.6, t).xi)


def test_moments_uniform_example():
    pts = np.arange(4.0)
    g, d = hl1_kernel_moments(pts, 0.5, 2, 1)
    assert g == pytest.approx(1 / GAMMA_15, rel=1e-14)
    # on a uniform mesh the shift term vanishes: (1/sqrt(pi)) * int_0^1 (1-s)^(-1/2) s ds = 4/(3 sqrt(pi))
    assert d == pytest.approx(4 / (3 * math.sqrt(math.pi)), rel=1e-13)
    assert d == pytest.approx(delta_oracle(pts, 0.5, 2, 1), rel=1e-10)


def test_moments_reject_k0_and_range():
    pts = np.linspace(0, 1, 6)
    with pytest.raises(ValueError):
        hl1_kernel_moments(pts, 0.5, 3, 0)
    for j, k in ((1, 1), (3, 3), (6, 2)):
        with pytest.raises(ValueError):
            hl1_kernel_moments(pts, 0.5, j, k)


def test_gamma_asymptotic_far_target():
    # gamma ~ (1 - alpha) tau (t_j - t_k)^(-alpha) / Gamma(2 - alpha) for distant targets
    alpha, tau = 0.4, 0.01
    pts0 = np.array([0.0, 1.0, 1.0 + tau])
    ratios = []
    for far in (10.0, 100.0, 1e4, 1e6):
        pts = np.append(pts0, far)
        g, _ = hl1_kernel_moments(pts, alpha, 3, 1)
        assert g == pytest.approx(gamma_oracle(pts, alpha, 3, 1), rel=1e-10)
        approx = (1 - alpha) * tau * (far - 1.0) ** -alpha / math.gamma(2 - alpha)
        ratios.append(g / approx)
    dev = np.abs(np.array(ratios) - 1.0)
    assert np.all(np.diff(dev) < 0) and dev[-1] < 1e-8


def test_hl1_rejects_small_j():
    with pytest.raises(ValueError):
        hl1_coefficients(np.linspace(0, 1, 5), 0.5, 1)


def test_hl1_row_sum_example():
    m = build_graded_mesh(16, 3.0, 1.0)
    for j in range(2, 17):
        d = hl1_coefficients(m, 0.6, j).d
        assert abs(d[:j].sum() - d[j]) <= 1e-12 * np.abs(d).max()


def test_hl1_block_matches_rows():
    m = build_graded_mesh(50, 6.0, 1.0)
    D = hl1_coefficient_block(m, 0.45, 2, 51)
    for j in range(2, 51):
        np.testing.assert_array_equal(D[j - 2, : j + 1], hl1_coefficients(m, 0.45, j).d)
        assert np.all(D[j - 2, j + 1 :] == 0.0)


def test_apply_constant_and_length_checks():
    m = build_graded_mesh(12, 3.0, 1.0)
    aux = build_aux_mesh(12, 3.0, m.t1)
    co = hl1_coefficients(m, 0.5, 7)
    xi = xi_weights(aux, 0.5, m.points[7])
    c = -2.5
    val = apply_discrete_caputo(co, xi, np.full(13, c), np.full(8, c))
    scale = max(np.abs(co.d).max(), xi.xi.max())
    assert abs(val) <= 1e-10 * abs(c) * scale
    with pytest.raises(ValueError):
        apply_discrete_caputo(co, xi, np.full(12, c), np.full(8, c))
    with pytest.raises(ValueError):
        apply_discrete_caputo(co, xi, np.full(13, c), np.full(7, c))
    bad = np.full(13, c)
    bad[-1] = 0.0
    with pytest.raises(ValueError):
        apply_discrete_caputo(co, xi, bad, np.full(8, c))


def test_apply_vector_valued():
    m = build_graded_mesh(10, 2.5, 1.0)
    aux = build_aux_mesh(10, 2.5, m.t1)
    co = hl1_coefficients(m, 0.3, 6)
    xi = xi_weights(aux, 0.3, m.points[6])
    ua = np.stack([aux.points, aux.points**2], axis=1)
    uc = np.stack([m.points[:7], m.points[:7] ** 2], axis=1)
    uc[1] = ua[-1]
    both = apply_discrete_caputo(co, xi, ua, uc)
    first = apply_discrete_caputo(co, xi, ua[:, 0], uc[:, 0])
    assert both.shape == (2,) and both[0] == pytest.approx(first, rel=1e-15)


def _mesh_pair(N, alpha, beta=None):
    beta = (3 - alpha) / alpha if beta is None else beta
    m = build_graded_mesh(N, beta, 1.0)
    return m, build_aux_mesh(choose_Nbar(N, alpha), beta, m.t1)


def test_discrete_caputo_of_t():
    alpha = 0.5
    m, aux = _mesh_pair(64, alpha)
    got = discrete_caputo(m, aux, alpha, lambda t: t)
    ref = caputo_of_power(alpha, 1.0, m.points[1:])
    assert np.max(np.abs(got / ref - 1)) <= 1e-3


def test_discrete_caputo_of_t_alpha_tends_to_constant():
    # convergence holds on [t0, T] for fixed t0 > 0; at a fixed mesh index near
    # the origin the graded mesh is self-similar and the error does not shrink
    alpha = 0.6
    errs, first = [], []
    for N in (16, 32, 64, 128):
        m, aux = _mesh_pair(N, alpha)
        got = discrete_caputo(m, aux, alpha, lambda t: t**alpha)
        err = np.abs(got - math.gamma(1 + alpha))
        errs.append(err[m.points[1:] >= 1e-2].max())
        first.append(err[1])
    assert np.all(np.diff(np.log2(errs)) < -1.5)
    assert errs[-1] < 5e-4
    assert np.ptp(first) < 1e-6 * first[0]


def test_discrete_l1_of_t_is_exact():
    # L1 interpolates linear functions exactly
    m = build_graded_mesh(20, 2.0, 1.0)
    got = discrete_l1_caputo(m, 0.7, lambda t: 3 * t)
    np.testing.assert_allclose(got, 3 * caputo_of_power(0.7, 1.0, m.points[1:]), rtol=1e-12)


def test_discrete_caputo_mismatched_aux():
    m = build_graded_mesh(8, 2.0, 1.0)
    with pytest.raises(ValueError):
        discrete_caputo(m, build_aux_mesh(4, 2.0, 2 * m.t1), 0.5, lambda t: t)


# {{{ properties

triples = st.tuples(st.floats(0.1, 0.9), st.floats(1.0, 8.0), st.integers(4, 128))


@given(triples)
@settings(max_examples=100, deadline=None)
def test_l1_monotone_random(params):
    alpha, beta, N = params
    Z = l1_weight_block(build_graded_mesh(N, beta, 1.0), alpha, 1, N + 1)
    for J in range(1, N + 1):
        z = Z[J - 1, :J]
        assert np.all(z[:-1] <= z[1:] * (1 + 1e-12))


@given(triples)
@settings(max_examples=100, deadline=None)
def test_hl1_row_sums_random(params):
    alpha, beta, N = params
    D = hl1_coefficient_block(build_graded_mesh(N, beta, 1.0), alpha, 2, N + 1)
    J = np.arange(2, N + 1)
    diag = D[J - 2, J]
    off = D.copy()
    off[J - 2, J] = 0.0
    scale = np.maximum(np.abs(diag), np.abs(off).sum(axis=1))
    assert np.max(np.abs(off.sum(axis=1) - diag) / scale) <= 1e-12


@given(triples, st.floats(-1e3, 1e3))
@settings(max_examples=60, deadline=None)
def test_constant_annihilation_random(params, c):
    alpha, beta, N = params
    m = build_graded_mesh(N, beta, 1.0)
    aux = build_aux_mesh(min(N, 64), beta, m.t1)
    got = discrete_caputo(m, aux, alpha, lambda t: np.full_like(t, c))
    scale = max(np.abs(hl1_coefficient_block(m, alpha, 2, N + 1)).max(),
                l1_weights(aux.points, alpha, aux.Nbar).zeta.max()) if N >= 2 else 1.0
    assert np.max(np.abs(got)) <= 1e-10 * abs(c) * scale


@given(st.floats(0.1, 0.9), st.floats(1.0, 8.0), st.integers(3, 60), st.data())
@settings(max_examples=150, deadline=None)
def test_moments_match_quadrature(alpha, beta, N, data):
    pts = build_graded_mesh(N, beta, 1.0).points
    j = data.draw(st.integers(2, N))
    k = data.draw(st.integers(1, j - 1))
    g, d = hl1_kernel_moments(pts, alpha, j, k)
    assert g == pytest.approx(gamma_oracle(pts, alpha, j, k), rel=1e-10)
    dref = delta_oracle(pts, alpha, j, k)
    # delta changes sign, so measure against the magnitude of its parts
    scale = gamma_oracle(pts, alpha, j, k) * (pts[k + 1] - pts[k - 1])
    assert abs(d - dref) <= 1e-10 * max(abs(dref), scale)


# }}}


def test_quadrature_timing_budget():
    # 1000 oracle comparisons across all four weight families must fit in 10 s
    rng = np.random.default_rng(11)
    t0 = time.perf_counter()
    for _ in range(250):
        alpha, beta, N = rng.uniform(0.1, 0.9), rng.uniform(1, 8), int(rng.integers(3, 100))
        pts = build_graded_mesh(N, beta, 1.0).points
        j = int(rng.integers(2, N + 1))
        k = int(rng.integers(1, j))
        g, d = hl1_kernel_moments(pts, alpha, j, k)
        assert g == pytest.approx(gamma_oracle(pts, alpha, j, k), rel=1e-10)
        delta_oracle(pts, alpha, j, k)
        z = l1_weights(pts, alpha, j).zeta[k]
        assert z == pytest.approx(l1_weight_oracle(pts, alpha, j, k), rel=1e-10)
        aux = build_aux_mesh(8, beta, pts[1])
        xi = xi_weights(aux, alpha, pts[j]).xi[3]
        joint = np.concatenate([aux.points, pts[2:]])
        assert xi == pytest.approx(l1_weight_oracle(joint, alpha, 8 + j - 1, 3), rel=1e-10)
    assert time.perf_counter() - t0 < 10.0
