"""Analytic examples and an independent ODE solver for cross-checks.

All examples have period 1.  Closed forms:

E1   x' = -x.  M = e^-1, dichotomy with P = I, alpha = 1.
E2   x' = x.  M = e, dichotomy with P = 0, alpha = 1.
E3   x' = diag(-1, 1) x.  M = diag(e^-1, e), P = diag(1, 0), alpha = 1.
E4   zero density, right jump c at t = 0.5: x(0.5+) = (1 + c) x(0.5), so
     M = 1 + c.  c = -0.5 and c = 1 give a dichotomy (alpha = |ln(1 + c)|),
     c = 0 puts the multiplier on the unit circle.
E5   density -1 plus right jump e - 1 at 0.5: M = e^-0.5 * e * e^-0.5 = 1.
E6   x' = -x with forcing jump b = 1 at 0.5 (right jump of f).  The
     periodic solution has x(1) = e^-1 x0 + b e^-0.5 = x0, hence
     x0 = b e^-0.5 / (1 - e^-1).
E1F  x' = -x + cos(2 pi t).  Periodic solution
     (cos(2 pi t) + 2 pi sin(2 pi t)) / (1 + 4 pi^2), x0 = 1 / (1 + 4 pi^2).
E3F  x' = diag(-1, 1) x + (cos 2 pi t, sin 2 pi t).  The second component
     has periodic solution (-2 pi cos - sin) / (1 + 4 pi^2), so
     x0 = (1, -2 pi) / (1 + 4 pi^2).

The forcings of E1F and E3F are degree-5 interpolants on 16 cells, which
moves ``x0`` by well under 1e-8.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .bv import BVMatrixFunction, JumpEvent, PiecewisePoly, RegulatedVectorFunction
from .core import GLDESystem

__all__ = ["NamedExample", "builtin_examples", "get_example", "dense_ode_oracle"]

E = math.e
FOUR_PI2 = 4 * math.pi**2


@dataclass(frozen=True, eq=False)
class NamedExample:
    identifier: str
    system: GLDESystem
    monodromy: np.ndarray
    multipliers: np.ndarray
    verdict: str
    x0: Optional[np.ndarray] = None
    projection: Optional[np.ndarray] = None
    alpha: Optional[float] = None
    note: str = field(default="")

    @property
    def is_dichotomy(self) -> bool:
        return self.verdict == "dichotomy"


def _scalar(density: float, jumps=()):
    return BVMatrixFunction.constant_density([[density]], 1.0, jumps)


def _right_jump(t: float, value: float):
    return JumpEvent(t, np.zeros((1, 1)), np.array([[float(value)]]))


def _cos_forcing(components):
    dens = PiecewisePoly.fit(lambda t: np.array([g(t) for g in components]), 1.0, cells=16, zero_mean=True)
    return RegulatedVectorFunction(dens)


def builtin_examples() -> list:
    ex = []
    ex.append(NamedExample(
        "E1", GLDESystem(_scalar(-1.0)), np.array([[1 / E]]), np.array([1 / E]), "dichotomy",
        projection=np.eye(1), alpha=1.0, note="scalar smooth stable, density -1",
    ))
    ex.append(NamedExample(
        "E2", GLDESystem(_scalar(1.0)), np.array([[E]]), np.array([E]), "dichotomy",
        projection=np.zeros((1, 1)), alpha=1.0, note="scalar smooth unstable, density +1",
    ))
    ex.append(NamedExample(
        "E3", GLDESystem(BVMatrixFunction.constant_density(np.diag([-1.0, 1.0]))),
        np.diag([1 / E, E]), np.array([1 / E, E]), "dichotomy",
        projection=np.diag([1.0, 0.0]), alpha=1.0, note="2x2 saddle diag(-1, 1)",
    ))
    for c in (-0.5, 0.0, 1.0):
        rho = 1.0 + c
        dich = c != 0.0
        ex.append(NamedExample(
            f"E4[c={c:g}]", GLDESystem(_scalar(0.0, [_right_jump(0.5, c)])),
            np.array([[rho]]), np.array([rho]), "dichotomy" if dich else "unit-circle",
            projection=(np.eye(1) if rho < 1 else np.zeros((1, 1))) if dich else None,
            alpha=abs(math.log(rho)) if dich else None,
            note=f"pure impulse, right jump {c:g} at 0.5",
        ))
    ex.append(NamedExample(
        "E5", GLDESystem(_scalar(-1.0, [_right_jump(0.5, E - 1.0)])),
        np.array([[1.0]]), np.array([1.0]), "unit-circle",
        note="density -1 with right jump e - 1 at 0.5, multiplier exactly 1",
    ))
    b = 1.0
    f6 = RegulatedVectorFunction(PiecewisePoly.constant(np.zeros(1)), [JumpEvent(0.5, np.zeros(1), np.array([b]))])
    ex.append(NamedExample(
        "E6", GLDESystem(_scalar(-1.0), f6), np.array([[1 / E]]), np.array([1 / E]), "dichotomy",
        x0=np.array([b * math.exp(-0.5) / (1 - 1 / E)]), projection=np.eye(1), alpha=1.0,
        note="density -1, forcing right jump 1 at 0.5",
    ))
    ex.append(NamedExample(
        "E1F", GLDESystem(_scalar(-1.0), _cos_forcing([lambda t: math.cos(2 * math.pi * t)])),
        np.array([[1 / E]]), np.array([1 / E]), "dichotomy",
        x0=np.array([1 / (1 + FOUR_PI2)]), projection=np.eye(1), alpha=1.0,
        note="density -1, forcing density cos(2 pi t)",
    ))
    ex.append(NamedExample(
        "E3F",
        GLDESystem(
            BVMatrixFunction.constant_density(np.diag([-1.0, 1.0])),
            _cos_forcing([lambda t: math.cos(2 * math.pi * t), lambda t: math.sin(2 * math.pi * t)]),
        ),
        np.diag([1 / E, E]), np.array([1 / E, E]), "dichotomy",
        x0=np.array([1.0, -2 * math.pi]) / (1 + FOUR_PI2), projection=np.diag([1.0, 0.0]), alpha=1.0,
        note="saddle diag(-1, 1), forcing density (cos 2 pi t, sin 2 pi t)",
    ))
    return ex


def get_example(identifier: str) -> NamedExample:
    for ex in builtin_examples():
        if ex.identifier == identifier:
            return ex
    raise KeyError(identifier)


def dense_ode_oracle(system: GLDESystem, s0: float, x0, t: float, cells: int) -> np.ndarray:
    """Explicit midpoint rule for ``x' = A'(t) x + f'(t)`` with ``cells`` steps.

    Only for systems without jumps; used to cross-check the main solver with
    a method of a different order.
    """
    A, f = system.A, system.forcing
    if A.jumps or f.jumps:
        raise ValueError("dense_ode_oracle requires a system without jumps")
    cells = int(cells)
    if cells < 1:
        raise ValueError("cells must be positive")
    x = np.asarray(x0, dtype=float).reshape(-1).copy()
    if x.size != system.dimension:
        raise ValueError("initial value has the wrong dimension")
    h = (float(t) - float(s0)) / cells

    def rhs(s, y):
        s = np.array([s])
        return A.density_at(s)[0] @ y + f.density_at(s)[0]

    s = float(s0)
    for _ in range(cells):
        k1 = rhs(s, x)
        x = x + h * rhs(s + 0.5 * h, x + 0.5 * h * k1)
        s += h
    return x
