import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from glde.bv import BVMatrixFunction, JumpEvent, PiecewisePoly, RegulatedVectorFunction
from glde.core import (
    GLDESystem,
    Propagator,
    check_H,
    integral_equation_residual,
    one_sided_transition,
    propagate,
    transition_matrix,
    voc_crosscheck,
)
from glde.errors import ConditionHError, DimensionError

from conftest import random_A, random_f


def scalar(density, jumps=()):
    return BVMatrixFunction.constant_density([[density]], 1.0, [JumpEvent(t, [[p]], [[q]]) for t, p, q in jumps])


def random_system(rng, n=2, forced=True):
    return GLDESystem(random_A(rng, n), random_f(rng, n) if forced else None)


# -- jump factor invertibility ------------------------------------------------


def test_check_H_examples():
    rep = check_H(scalar(-1.0))
    assert rep.passed and rep.entries == ()
    rep = check_H(scalar(0.0, [(0.5, 1.0, 0.0)]))
    assert not rep.passed
    with pytest.raises(ConditionHError):
        GLDESystem(scalar(0.0, [(0.5, 1.0, 0.0)]))
    rep = check_H(scalar(0.0, [(0.5, 0.0, -0.5)]))
    assert rep.passed and rep.entries[0][2] == pytest.approx(0.5)


def test_system_dimension_check():
    with pytest.raises(DimensionError):
        GLDESystem(scalar(1.0), RegulatedVectorFunction.zero(2))
    with pytest.raises(DimensionError):
        GLDESystem(scalar(1.0), RegulatedVectorFunction.zero(1, period=2.0))


# -- transition matrix ---------------------------------------------------------


def test_transition_identity_on_diagonal(rng):
    S = random_system(rng)
    for t in (-1.3, 0.0, 0.5, 2.25):
        assert np.array_equal(transition_matrix(S, t, t), np.eye(2))


def test_scalar_exponential():
    S = GLDESystem(scalar(-1.0))
    assert transition_matrix(S, 1.0, 0.0)[0, 0] == pytest.approx(math.exp(-1), abs=1e-12)
    assert transition_matrix(S, 2.7, 0.4)[0, 0] == pytest.approx(math.exp(-2.3), abs=1e-12)
    # same solver at half the default step; the gap is accumulated rounding
    half = Propagator(S, step=1 / 8192)
    assert half.transition(1.0, 0.0)[0, 0] == pytest.approx(transition_matrix(S, 1.0, 0.0)[0, 0], abs=1e-12)


@pytest.mark.parametrize("c", [-0.5, 1.0, 3.0])
def test_single_right_jump(c):
    S = GLDESystem(scalar(0.0, [(0.5, 0.0, c)]))
    assert transition_matrix(S, 1.0, 0.0)[0, 0] == pytest.approx(1 + c, abs=1e-14)
    assert transition_matrix(S, 0.5, 0.0)[0, 0] == pytest.approx(1.0, abs=1e-14)
    assert transition_matrix(S, 0.0, 1.0)[0, 0] == pytest.approx(1 / (1 + c), abs=1e-14)


def test_jump_factor_against_tagged_partition_oracle():
    # Riemann-Stieltjes recursion for U(t) = 1 + int_0^t d[A] U on a fine
    # partition; cells touching the jump instant are tagged at the instant,
    # which makes the step into it implicit.
    tau, pre, post = 0.3, 0.2, 0.5
    A = scalar(-0.7, [(tau, pre, post)])
    eps = 1e-9
    pts = np.unique(np.concatenate([np.linspace(0, 1, 20001), [tau - eps, tau, tau + eps]]))
    Av = A.value(pts)[:, 0, 0]
    U = 1.0
    for k in range(pts.size - 1):
        dA = Av[k + 1] - Av[k]
        if pts[k + 1] == tau:
            U = U / (1 - dA)
        else:
            U = U + dA * U
    assert U == pytest.approx(transition_matrix(GLDESystem(A), 1.0, 0.0)[0, 0], rel=1e-4)


def test_one_sided_examples():
    c = 0.75
    S = GLDESystem(scalar(-0.2, [(0.5, 0.0, c)]))
    U = transition_matrix(S, 0.3, -0.4)
    assert np.allclose(one_sided_transition(S, 0.3, -0.4, "t+"), U)
    assert one_sided_transition(S, 0.5, 0.0, "t+")[0, 0] == pytest.approx((1 + c) * transition_matrix(S, 0.5, 0)[0, 0])
    # U(t, s+) through the cocycle: right limit in s is approached from above
    us = one_sided_transition(S, 1.0, 0.5, "s+")[0, 0]
    assert us == pytest.approx(transition_matrix(S, 1.0, 0.5)[0, 0] / (1 + c))
    assert us == pytest.approx(transition_matrix(S, 1.0, 0.5 + 1e-9)[0, 0], rel=1e-8)
    with pytest.raises(ValueError):
        one_sided_transition(S, 0, 0, "x")


def test_one_sided_left_limits():
    S = GLDESystem(scalar(0.3, [(0.5, 0.4, 0.0)]))
    assert one_sided_transition(S, 0.5, 0.0, "t-")[0, 0] == pytest.approx(
        transition_matrix(S, 0.5 - 1e-9, 0.0)[0, 0], rel=1e-8
    )
    assert one_sided_transition(S, 1.0, 0.5, "s-")[0, 0] == pytest.approx(
        transition_matrix(S, 1.0, 0.5 - 1e-9)[0, 0], rel=1e-8
    )


@given(seed=st.integers(0, 10**6))
@settings(max_examples=25, deadline=None)
def test_cocycle_and_inverse(seed):
    rng = np.random.default_rng(seed)
    S = random_system(rng, n=int(rng.integers(1, 4)), forced=False)
    jt = S.A.jump_times
    t, r, s = rng.uniform(-1.5, 2.5, 3)
    if jt.size and rng.random() < 0.5:
        r = float(rng.choice(jt)) + int(rng.integers(-1, 2))
    U = lambda a, b: transition_matrix(S, a, b)
    big = U(t, s)
    assert np.linalg.norm(big - U(t, r) @ U(r, s)) <= 1e-8 * (1 + np.linalg.norm(big) ** 2)
    assert np.linalg.norm(U(t, s) @ U(s, t) - np.eye(S.dimension)) <= 1e-8


def test_rk4_order():
    # one cubic cell, so per-cell errors cannot cancel
    A = BVMatrixFunction(PiecewisePoly([0.0, 1.0], np.array([[[[0.3]], [[-2.0]], [[1.5]], [[2.0]]]])))
    S = GLDESystem(A)
    exact = math.exp(A.value(1.0)[0, 0] - A.value(0.0)[0, 0])
    errs = [abs(Propagator(S, step=h).transition(1.0, 0.0)[0, 0] - exact) for h in (1 / 8, 1 / 16, 1 / 32)]
    assert errs[0] / errs[1] >= 8 and errs[1] / errs[2] >= 8


# -- propagation ---------------------------------------------------------------


def test_zero_solution(rng):
    S = random_system(rng, forced=False)
    tr = propagate(S, 0.2, np.zeros(2), 2.9, samples=17)
    assert np.all(tr.values == 0) and np.all(tr.left == 0) and np.all(tr.right == 0)


def test_scalar_decay():
    tr = propagate(GLDESystem(scalar(-1.0)), 0.0, [1.0], 1.0, samples=11)
    assert tr.values[-1, 0] == pytest.approx(math.exp(-1), abs=1e-12)
    assert tr.times.size == 11


def test_forcing_jump():
    b = 2.0
    f = RegulatedVectorFunction(PiecewisePoly.constant([0.0]), [JumpEvent(0.5, [0.0], [b])])
    tr = propagate(GLDESystem(scalar(0.0), f), 0.0, [0.0], 1.0, samples=11)
    before = tr.times <= 0.5
    assert np.all(tr.values[before] == 0)
    assert np.all(tr.values[~before] == pytest.approx(b))
    k = int(np.flatnonzero(tr.times == 0.5)[0])
    assert (tr.left[k, 0], tr.values[k, 0], tr.right[k, 0]) == (0.0, 0.0, b)


def test_trajectory_jump_relations(rng):
    for _ in range(10):
        S = random_system(rng)
        x0 = rng.normal(size=2)
        for t1 in (3.0, -2.0):
            tr = propagate(S, 0.1, x0, t1, samples=5)
            for t in tr.jump_times:
                k = int(np.argmin(np.abs(tr.times - t)))
                preA, postA = S.A.jump_at(t)
                pref, postf = S.forcing.jump_at(t)
                x, l, r = tr.values[k], tr.left[k], tr.right[k]
                assert np.allclose(r - x, postA @ x + postf, atol=1e-10)
                assert np.allclose(x - l, preA @ x + pref, atol=1e-10)
            away = ~np.isin(tr.times, tr.jump_times)
            assert np.array_equal(tr.left[away], tr.values[away])


def test_backward_matches_forward(rng):
    S = random_system(rng)
    x0 = rng.normal(size=2)
    fw = propagate(S, -0.3, x0, 1.7, samples=3)
    bw = propagate(S, 1.7, fw.values[-1], -0.3, samples=3)
    assert np.allclose(bw.values[0], x0, atol=1e-10)


def test_propagate_argument_errors():
    S = GLDESystem(scalar(-1.0))
    with pytest.raises(ValueError):
        propagate(S, 0, [1.0], 1, samples=1)
    with pytest.raises(DimensionError):
        propagate(S, 0, [1.0, 2.0], 1)


# -- variation of constants and the integral equation --------------------------


def test_voc_homogeneous_and_constant_forcing(rng):
    A = random_A(rng, 2)
    assert voc_crosscheck(GLDESystem(A), 0.0, [1.0, -2.0], 1.3) <= 1e-8
    assert voc_crosscheck(GLDESystem(A, RegulatedVectorFunction.constant([4.0, 1.0])), 0.0, [1.0, -2.0], 1.3) <= 1e-8


def test_voc_impulsive_forcing():
    f = RegulatedVectorFunction(PiecewisePoly.constant([0.0]), [JumpEvent(0.5, [0.0], [1.5])])
    assert voc_crosscheck(GLDESystem(scalar(-1.0), f), 0.0, [0.3], 1.0) <= 1e-6


def test_voc_random(rng):
    for _ in range(8):
        S = random_system(rng)
        s0, t = rng.uniform(-1, 2, 2)
        assert voc_crosscheck(S, s0, rng.normal(size=2), t) <= 1e-6


def test_integral_equation_residual(rng):
    for _ in range(8):
        S = random_system(rng)
        tr = propagate(S, -1.0, rng.normal(size=2), 2.0, samples=7)
        s, t = np.sort(rng.uniform(-1.0, 2.0, 2))
        assert integral_equation_residual(S, tr, s, t) <= 1e-6
