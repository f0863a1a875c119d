import numpy as np
import pytest

from glde.bv import BVMatrixFunction, JumpEvent, PiecewisePoly, RegulatedVectorFunction


def random_mesh(rng, cells):
    inner = np.sort(rng.uniform(0.05, 0.95, cells - 1))
    while cells > 1 and np.min(np.diff(np.concatenate([[0.0], inner, [1.0]]))) < 0.02:
        inner = np.sort(rng.uniform(0.05, 0.95, cells - 1))
    return np.concatenate([[0.0], inner, [1.0]])


def random_density(rng, shape, cells=None, degree=None, scale=0.6):
    cells = int(rng.integers(1, 4)) if cells is None else cells
    degree = int(rng.integers(0, 4)) if degree is None else degree
    bp = random_mesh(rng, cells)
    coef = rng.normal(0.0, scale, (cells, degree + 1) + tuple(shape))
    return PiecewisePoly(bp, coef)


def random_jump_times(rng, k):
    while True:
        t = np.sort(rng.uniform(0.0, 1.0, k))
        if k < 2 or np.min(np.diff(t)) > 0.02:
            return t


def random_A(rng, n, max_jumps=3, jump_scale=0.3):
    """Random representable integrator; jump sizes keep the jump factors comfortably invertible."""
    k = int(rng.integers(0, max_jumps + 1))
    jumps = [
        JumpEvent(t, rng.normal(0, jump_scale, (n, n)) * rng.integers(0, 2), rng.normal(0, jump_scale, (n, n)))
        for t in random_jump_times(rng, k)
    ]
    return BVMatrixFunction(random_density(rng, (n, n)), jumps, base=rng.normal(0, 1, (n, n)))


def random_f(rng, n, max_jumps=3, scale=1.0):
    k = int(rng.integers(0, max_jumps + 1))
    jumps = [
        JumpEvent(t, rng.normal(0, scale, n) * rng.integers(0, 2), rng.normal(0, scale, n))
        for t in random_jump_times(rng, k)
    ]
    return RegulatedVectorFunction(random_density(rng, (n,), scale=scale), jumps, base=rng.normal(0, 1, n))


def random_pair(rng, n=None, max_jumps=3):
    """``(A, f)`` with at most ``max_jumps`` jump instants between them."""
    n = int(rng.integers(1, 4)) if n is None else n
    while True:
        A = random_A(rng, n, max_jumps)
        f = random_f(rng, n, max_jumps)
        if len(A.jumps) + len(f.jumps) <= max_jumps:
            return A, f


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
