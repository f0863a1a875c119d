import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from glde.bv import BVMatrixFunction, JumpEvent, PiecewisePoly, RegulatedVectorFunction
from glde.errors import DimensionError
from glde.ks import gauge_oracle_integrate, ks_integrate, one_sided_values, partition_variation, variation

from conftest import random_A, random_f, random_pair


def _jump_only(c, n=1):
    return BVMatrixFunction(PiecewisePoly.constant(np.zeros((n, n))), [JumpEvent(0.5, np.zeros((n, n)), c * np.eye(n))])


def _ramp():
    # f(s) = s on [0, 1)
    return RegulatedVectorFunction(PiecewisePoly.constant([1.0]))


def test_identity_density_constant_f():
    A = BVMatrixFunction.constant_density(np.eye(2))
    f = RegulatedVectorFunction.constant([3.0, -1.0])
    assert np.allclose(ks_integrate(A, f, 0, 1), [3.0, -1.0], atol=1e-15)


@pytest.mark.parametrize("c", [-0.5, 0.0, 1.0, 2.5])
def test_jump_against_ramp(c):
    A, f = _jump_only(c), _ramp()
    assert ks_integrate(A, f, 0, 1)[0] == pytest.approx(0.5 * c, abs=1e-15)
    assert gauge_oracle_integrate(A, f, 0, 1, 2**16)[0] == pytest.approx(0.5 * c, abs=1e-6)


def test_degenerate_interval_and_orientation(rng):
    A, f = random_pair(rng, 2)
    assert np.all(ks_integrate(A, f, 0.3, 0.3) == 0)
    assert np.array_equal(ks_integrate(A, f, 1.2, -0.4), -ks_integrate(A, f, -0.4, 1.2))


def test_zero_integrand_oracle(rng):
    A = random_A(rng, 2)
    z = RegulatedVectorFunction.zero(2)
    assert np.all(gauge_oracle_integrate(A, z, -0.3, 1.7, 100) == 0)
    assert np.all(ks_integrate(A, z, -0.3, 1.7) == 0)


def test_fitted_cosine_density():
    A = BVMatrixFunction(PiecewisePoly.fit(lambda t: np.array([[math.cos(t)]]), 2 * math.pi, cells=32))
    one = RegulatedVectorFunction.constant([1.0], 2 * math.pi)
    exact = A.value(math.pi / 2)[0, 0] - A.value(0.0)[0, 0]
    assert exact == pytest.approx(1.0, abs=1e-9)
    assert ks_integrate(A, one, 0, math.pi / 2)[0] == pytest.approx(exact, abs=1e-13)
    assert gauge_oracle_integrate(A, one, 0, math.pi / 2, 1000)[0] == pytest.approx(exact, abs=1e-12)


def test_dimension_mismatch():
    A = BVMatrixFunction.constant_density(np.eye(2))
    with pytest.raises(DimensionError):
        ks_integrate(A, RegulatedVectorFunction.constant([1.0, 2.0, 3.0]), 0, 1)


def test_nonfinite_bounds():
    A = BVMatrixFunction.constant_density(np.eye(1))
    with pytest.raises(ValueError):
        ks_integrate(A, _ramp(), 0, math.inf)


def test_callable_integrand_matches_object(rng):
    # a callable carries no jump information, so f is continuous here
    A, f = random_A(rng, 2), random_f(rng, 2, max_jumps=0)
    v1 = ks_integrate(A, f, 0.1, 0.9)
    v2 = ks_integrate(A, lambda t: f.value(t), 0.1, 0.9, breaks=f.breakpoints(0.1, 0.9))
    assert np.allclose(v1, v2, atol=1e-13)


@given(seed=st.integers(0, 10**6), alpha=st.floats(-3, 3), beta=st.floats(-3, 3))
@settings(max_examples=30, deadline=None)
def test_linearity(seed, alpha, beta):
    rng = np.random.default_rng(seed)
    n = 2
    A1, f1 = random_pair(rng, n)
    A2, f2 = random_A(rng, n), random_f(rng, n)
    a, b = -0.3, 1.4

    def comb_f(t):
        return alpha * f1.value(t) + beta * f2.value(t)

    br = np.concatenate([f1.breakpoints(a, b), f2.breakpoints(a, b)])
    lhs = ks_integrate(A1, comb_f, a, b, breaks=br)
    # jumps of f matter only through point values, which the callable provides
    rhs = alpha * ks_integrate(A1, f1, a, b) + beta * ks_integrate(A1, f2, a, b)
    assert np.allclose(lhs, rhs, rtol=1e-10, atol=1e-10)

    class _Sum:
        dimension = n
        period = 1.0

        def mesh(self, lo, hi):
            return np.union1d(A1.mesh(lo, hi), A2.mesh(lo, hi))

        def density_at(self, s):
            return alpha * A1.density_at(s) + beta * A2.density_at(s)

        def jumps_in(self, lo, hi):
            out = [(t, alpha * p, alpha * q) for t, p, q in A1.jumps_in(lo, hi)]
            out += [(t, beta * p, beta * q) for t, p, q in A2.jumps_in(lo, hi)]
            return out

    lhs = ks_integrate(_Sum(), f1, a, b)
    rhs = alpha * ks_integrate(A1, f1, a, b) + beta * ks_integrate(A2, f1, a, b)
    assert np.allclose(lhs, rhs, rtol=1e-10, atol=1e-10)


@given(seed=st.integers(0, 10**6), c=st.floats(-0.5, 1.5))
@settings(max_examples=30, deadline=None)
def test_interval_additivity(seed, c):
    rng = np.random.default_rng(seed)
    A, f = random_pair(rng)
    a, b = -0.5, 1.5
    whole = ks_integrate(A, f, a, b)
    split = ks_integrate(A, f, a, c) + ks_integrate(A, f, c, b)
    assert np.allclose(whole, split, rtol=1e-10, atol=1e-10)


def test_interval_additivity_at_jump(rng):
    for _ in range(20):
        A, f = random_pair(rng)
        jt = [t for t, _, _ in A.jumps_in(0, 1)] + [t for t, _, _ in f.jumps_in(0, 1)]
        for c in jt:
            whole = ks_integrate(A, f, -0.2, 1.2)
            split = ks_integrate(A, f, -0.2, c) + ks_integrate(A, f, c, 1.2)
            assert np.allclose(whole, split, rtol=1e-10, atol=1e-10)


def test_oracle_convergence_rate(rng):
    pairs = [random_pair(rng, 2) for _ in range(6)]
    errs = []
    for k in range(8, 17, 2):
        e = 0.0
        for A, f in pairs:
            e = max(e, float(np.max(np.abs(gauge_oracle_integrate(A, f, 0, 1, 2**k) - ks_integrate(A, f, 0, 1)))))
        errs.append(e)
    C = errs[0] * 2**8
    for k, e in zip(range(8, 17, 2), errs):
        assert e <= C * 2.0**-k + 1e-12
    for e0, e1 in zip(errs, errs[1:]):
        assert e1 <= e0 + 1e-12


def test_variation_examples():
    assert variation(BVMatrixFunction.constant_density(np.zeros((2, 2))), 0, 1) == 0
    assert variation(BVMatrixFunction.constant_density([[2.5]]), 0, 1) == pytest.approx(2.5)
    for c in (-0.7, 0.4):
        A = _jump_only(c, n=2)
        assert variation(A, 0, 1) == pytest.approx(abs(c))
        assert partition_variation(A, 0, 1, 64) == pytest.approx(abs(c))
    with pytest.raises(ValueError):
        variation(A, 1, 0)


def test_variation_endpoint_conventions():
    A = BVMatrixFunction(PiecewisePoly.constant(np.zeros((1, 1))), [JumpEvent(0.5, [[0.2]], [[0.3]])])
    assert variation(A, 0, 0.5) == pytest.approx(0.2)
    assert variation(A, 0.5, 1) == pytest.approx(0.3)
    assert variation(A, 0, 1) == pytest.approx(0.5)


def test_partition_variation_is_lower_bound(rng):
    for _ in range(5):
        A = random_A(rng, 2)
        v = variation(A, 0, 1)
        lo = [partition_variation(A, 0, 1, c) for c in (8, 64, 1024)]
        assert all(x <= v + 1e-10 for x in lo)
        assert lo[-1] == pytest.approx(v, rel=1e-3)


def test_one_sided_values():
    A = BVMatrixFunction(PiecewisePoly.constant([[1.0]]), [JumpEvent(0.5, [[0.4]], [[0.0]])])
    l, v, r = one_sided_values(A, 0.2)
    assert l == v == r
    l, v, r = one_sided_values(A, 0.5)
    assert (v - l)[0, 0] == pytest.approx(0.4)
    assert r == v
    l1, v1, r1 = one_sided_values(A, 1.5)
    assert np.allclose(v1 - v, A.periodic_increment)
