import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import rand_low_rank, rand_q, rel
from quatcomplete import (DimensionError, InfeasibleRankError, NormVariant, QMatrix, factor_objective,
                          nuclear_norm, optimal_factors, q_schatten_p, qsvd, sv_product_bound)
from quatcomplete.quaternion import inverse

VARIANTS = list(NormVariant)


def test_variant_parsing():
    assert NormVariant.parse("Q-DFN") is NormVariant.QDFN
    assert NormVariant.parse("qfnn") is NormVariant.QFNN
    assert [v.schatten_p for v in VARIANTS] == [1.0, 0.5, 2.0 / 3.0]
    with pytest.raises(ValueError):
        NormVariant.parse("qxyz")


def test_schatten_examples(rng):
    assert q_schatten_p(QMatrix.from_components(np.diag([3.0, 1.0])), 1) == pytest.approx(4.0)
    assert q_schatten_p(QMatrix.from_components(np.diag([4.0, 1.0])), 0.5) == pytest.approx(9.0)
    u, v = rand_q(rng, 5, 1), rand_q(rng, 3, 1)
    unit = (u / u.norm()) @ (v / v.norm()).H
    for p in (0.5, 2 / 3, 1, 2, 3.5):
        assert q_schatten_p(unit, p) == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(ValueError):
        q_schatten_p(unit, 0)


def test_schatten_homogeneous_and_invariant(rng):
    a = rand_q(rng, 6, 4)
    w = qsvd(rand_q(rng, 6, 6)).U
    for p in (0.5, 1.0, 2.0):
        assert q_schatten_p(a * 3.0, p) == pytest.approx(3.0 * q_schatten_p(a, p), rel=1e-12)
        assert q_schatten_p(w @ a, p) == pytest.approx(q_schatten_p(a, p), rel=1e-9)
    assert q_schatten_p(a, 2) == pytest.approx(a.norm(), rel=1e-12)


def test_factor_objective_examples():
    z = QMatrix.zeros(3, 2)
    for v in VARIANTS:
        assert factor_objective(z, z, v) == 0.0
    eye = QMatrix.eye(2)
    assert factor_objective(eye, eye, "qdfn") == pytest.approx(2.0)
    four, one = QMatrix.from_components(np.array([[4.0]])), QMatrix.from_components(np.array([[1.0]]))
    assert factor_objective(four, one, "qdnn") == pytest.approx(6.25)
    # ((1 + 2 * 1) / 3)^(3/2) with U = V = [1]
    assert factor_objective(one, one, "qfnn") == pytest.approx(1.0)


def test_factor_objective_dimension_mismatch(rng):
    with pytest.raises(DimensionError):
        factor_objective(rand_q(rng, 3, 2), rand_q(rng, 4, 3), "qdfn")


def test_optimal_factors_diag_qdnn():
    a = QMatrix.from_components(np.diag([4.0, 1.0]))
    u, v = optimal_factors(a, 2, "qdnn")
    assert nuclear_norm(u) == pytest.approx(3.0) and nuclear_norm(v) == pytest.approx(3.0)
    assert factor_objective(u, v, "qdnn") == pytest.approx(9.0)
    assert q_schatten_p(a, 0.5) == pytest.approx(9.0)


def test_optimal_factors_zero():
    for v in VARIANTS:
        u, w = optimal_factors(QMatrix.zeros(3, 4), 2, v)
        assert u.norm() == 0 and w.norm() == 0 and factor_objective(u, w, v) == 0


@pytest.mark.parametrize("variant", VARIANTS)
def test_optimal_factors_match_schatten(rng, variant):
    a = rand_low_rank(rng, 5, 4, 3)
    u, v = optimal_factors(a, 3, variant)
    assert rel(u @ v.H, a) <= 1e-9
    assert factor_objective(u, v, variant) == pytest.approx(q_schatten_p(a, variant.schatten_p), rel=1e-8)


@pytest.mark.parametrize("variant", VARIANTS)
def test_optimal_factors_beat_reparametrizations(rng, variant):
    a = rand_low_rank(rng, 6, 5, 3)
    u, v = optimal_factors(a, 4, variant)
    best = factor_objective(u, v, variant)
    for _ in range(20):
        g = rand_q(rng, 4, 4) + QMatrix.eye(4) * 2.0
        u2, v2 = u @ g, v @ inverse(g).H
        assert rel(u2 @ v2.H, a) <= 1e-8
        assert best <= factor_objective(u2, v2, variant) * (1 + 1e-10)


def test_frobenius_split_equals_nuclear_norm(rng):
    a = rand_q(rng, 7, 5)
    u, v = optimal_factors(a, 5, "qdfn")
    assert 0.5 * (u.norm() ** 2 + v.norm() ** 2) == pytest.approx(nuclear_norm(a), rel=1e-10)


def test_optimal_factors_infeasible(rng):
    with pytest.raises(InfeasibleRankError):
        optimal_factors(rand_q(rng, 5, 5), 2, "qfnn")


def test_sv_product_bound_examples(rng):
    eye = QMatrix.eye(4)
    lhs, rhs = sv_product_bound(eye, eye, 0.5)
    assert lhs == pytest.approx(rhs)
    lhs, rhs = sv_product_bound(rand_q(rng, 4, 3), QMatrix.zeros(5, 3), 1.0)
    assert lhs == 0.0 and rhs == 0.0
    with pytest.raises(DimensionError):
        sv_product_bound(rand_q(rng, 4, 3), rand_q(rng, 4, 2), 1.0)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 20), st.integers(1, 20), st.integers(1, 8),
       st.sampled_from([0.5, 2 / 3, 1.0, 2.0]), st.integers(0, 2**32 - 1))
def test_sv_product_bound_property(m, n, d, p, seed):
    rng = np.random.default_rng(seed)
    lhs, rhs = sv_product_bound(rand_q(rng, m, d), rand_q(rng, n, d), p)
    assert lhs <= rhs * (1 + 1e-9)


@pytest.mark.parametrize("variant", VARIANTS)
def test_optimal_factors_ignore_rounding_level_values(rng, variant):
    # exact rank 2 in a 16 x 12 shape; the trailing singular values are pure rounding
    a = rand_low_rank(rng, 16, 12, 2)
    u, v = optimal_factors(a, 12, variant)
    assert factor_objective(u, v, variant) == pytest.approx(q_schatten_p(a, variant.schatten_p), rel=1e-12)
