import math

import numpy as np
import pytest

from glde.bv import BVMatrixFunction, PiecewisePoly
from glde.core import GLDESystem, propagate
from glde.floquet import dichotomy_check, monodromy
from glde.periodic import periodic_initial_condition
from glde.testkit import builtin_examples, dense_ode_oracle, get_example


def test_required_examples_present():
    ids = {ex.identifier for ex in builtin_examples()}
    assert {"E1", "E2", "E3", "E4[c=-0.5]", "E4[c=0]", "E4[c=1]", "E5", "E6"} <= ids


@pytest.mark.parametrize("ex", builtin_examples(), ids=lambda e: e.identifier)
def test_stored_answers(ex):
    md = monodromy(ex.system)
    assert np.allclose(md.M, ex.monodromy, atol=1e-10)
    assert np.allclose(np.sort(md.multipliers.real), np.sort(ex.multipliers), atol=1e-10)
    rep = dichotomy_check(md)
    assert rep.is_dichotomy == ex.is_dichotomy
    if ex.is_dichotomy:
        assert np.allclose(rep.P, ex.projection, atol=1e-10)
        assert rep.alpha == pytest.approx(ex.alpha, abs=1e-10)
    if ex.x0 is not None:
        assert np.allclose(periodic_initial_condition(ex.system), ex.x0, atol=1e-8)


def test_unit_circle_examples_exact():
    # e^-0.5 * (1 + (e - 1)) * e^-0.5 = 1
    assert monodromy(get_example("E5").system).multipliers[0] == pytest.approx(1.0, abs=1e-14)
    assert monodromy(get_example("E4[c=0]").system).multipliers[0] == 1.0


def test_midpoint_oracle_closed_form():
    S = get_example("E1").system
    assert dense_ode_oracle(S, 0.0, [1.0], 1.0, 2**14)[0] == pytest.approx(math.exp(-1), abs=1e-6)
    assert np.all(dense_ode_oracle(get_example("E3").system, 0.0, [0.0, 0.0], 1.0, 64) == 0)


def test_midpoint_oracle_order():
    A = BVMatrixFunction(PiecewisePoly([0.0, 1.0], np.array([[[[0.3]], [[-2.0]], [[1.5]], [[2.0]]]])))
    S = GLDESystem(A)
    exact = math.exp(A.value(1.0)[0, 0] - A.value(0.0)[0, 0])
    e = [abs(dense_ode_oracle(S, 0.0, [1.0], 1.0, c)[0] - exact) for c in (64, 128, 256)]
    assert e[0] / e[1] >= 3.5 and e[1] / e[2] >= 3.5


def test_midpoint_oracle_agrees_with_forced_solver():
    S = get_example("E3F").system
    x0 = np.array([0.2, -0.1])
    ref = propagate(S, 0.0, x0, 1.0, samples=2).values[-1]
    assert np.allclose(dense_ode_oracle(S, 0.0, x0, 1.0, 2**12), ref, atol=1e-6)


def test_midpoint_oracle_rejects_jumps():
    with pytest.raises(ValueError):
        dense_ode_oracle(get_example("E6").system, 0.0, [0.0], 1.0, 10)
    with pytest.raises(ValueError):
        dense_ode_oracle(get_example("E5").system, 0.0, [1.0], 1.0, 10)
