"""Periodic solutions of the forced equation.

With an exponential dichotomy, 1 is not a Floquet multiplier and the forced
equation has exactly one omega-periodic solution.  Its initial value solves
``(I - M) x0 = x_forced(omega)``, where ``x_forced`` is the response from
rest.  Equivalently, in terms of the Stieltjes integral of the transition
matrix against ``phi(s) = f(s) - f(0)``,

    x0 = (I - M)^{-1} (d - int_0^omega d[U(omega, s)] phi(s)),

where ``d = f(omega) - f(0)`` is the per-period increment of ``f`` (zero for
periodic ``f``).  Both routes are computed and must agree.

A third route sums the dichotomy representation

    x0 = -int_{-inf}^0 d[P U(s)^{-1}] phi(s) + int_0^inf d[(I-P) U(s)^{-1}] phi(s)

period by period, truncated to ``N`` periods on each side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (
    TransitionIntegrator,
    _as_propagator,
    _shifted,
    integral_equation_residual,
    propagate,
    Trajectory,
)
from .errors import ConsistencyError, ResonanceError
from .floquet import EPS_UC, DichotomyReport, dichotomy_check, monodromy
from .ks import ks_integrate

__all__ = [
    "TOL_PER",
    "TOL_VOC",
    "PeriodicSolutionResult",
    "periodic_initial_condition",
    "shooting_x0",
    "direct_ks_x0",
    "periodic_solution",
    "dichotomy_representation_x0",
    "default_truncation",
    "truncation_bound",
]

TOL_PER = 1e-6
TOL_VOC = 1e-6
MAX_TRUNCATION = 64


@dataclass(frozen=True, eq=False)
class PeriodicSolutionResult:
    x0: np.ndarray
    trajectory: Trajectory
    periodicity_residual: float
    x0_alt: np.ndarray
    representation_gap: float
    truncation_periods: int
    truncation_bound: float
    x0_direct: np.ndarray
    path_gap: float
    report: DichotomyReport


def _require_dichotomy(P, eps_uc: float) -> DichotomyReport:
    md = monodromy(P)
    report = dichotomy_check(md, eps_uc=eps_uc)
    if not report.is_dichotomy:
        near = [complex(r) for r in md.multipliers if abs(abs(r) - 1.0) < max(eps_uc, 1e-6)]
        raise ResonanceError(
            f"no exponential dichotomy ({report.classification}); multipliers near the unit circle: "
            + ", ".join(f"{r.real:.12g}{r.imag:+.12g}j" for r in near),
            multipliers=near,
        )
    return report


def _increment(P) -> np.ndarray:
    f = P.system.forcing
    return f.value(P.period) - f.value(0.0)


def shooting_x0(sys, direction: int = 1) -> np.ndarray:
    """Initial value of the periodic solution by shooting from rest.

    ``direction=1`` uses ``x0 = (I - U(w, 0))^{-1} x_forced(w)``;
    ``direction=-1`` integrates backwards, ``x0 = (I - U(-w, 0))^{-1} x_forced(-w)``.
    """
    P = _as_propagator(sys)
    if direction not in (1, -1):
        raise ValueError("direction must be +1 or -1")
    w = direction * P.period
    n = P.n
    xf = propagate(P, 0.0, np.zeros(n), w, samples=2).at(w)
    return np.linalg.solve(np.eye(n) - P.transition(w, 0.0), xf)


def direct_ks_x0(sys) -> np.ndarray:
    """``(I - M)^{-1} (d - int_0^w d[U(w, s)] phi(s))`` with the integral done by ``ks_integrate``."""
    P = _as_propagator(sys)
    w, n = P.period, P.n
    J = ks_integrate(TransitionIntegrator(P, w), _shifted(P.system.forcing, 0.0), 0.0, w)
    return np.linalg.solve(np.eye(n) - P.monodromy_matrix, _increment(P) - J)


def periodic_initial_condition(sys, eps_uc: float = EPS_UC, tol_voc: float = TOL_VOC) -> np.ndarray:
    """Initial value of the unique omega-periodic solution.

    Raises ``ResonanceError`` unless the homogeneous part has a dichotomy,
    and ``ConsistencyError`` if the shooting and direct integral routes
    differ by more than ``tol_voc``.
    """
    P = _as_propagator(sys)
    _require_dichotomy(P, eps_uc)
    x0 = shooting_x0(P)
    alt = direct_ks_x0(P)
    gap = float(np.linalg.norm(x0 - alt))
    if gap > tol_voc * (1.0 + np.linalg.norm(x0)):
        raise ConsistencyError(f"shooting and direct KS initial values differ by {gap:.3e}")
    return x0


def default_truncation(report: DichotomyReport) -> int:
    return int(min(MAX_TRUNCATION, max(1, math.ceil(20.0 / (report.alpha * report.period)))))


def _tail(a: float, b: float, q: float, start: int) -> float:
    # sum_{k >= start} (a + k b) q^k
    if q >= 1.0:
        return math.inf
    geo = q**start / (1.0 - q)
    lin = q**start * (start * (1.0 - q) + q) / (1.0 - q) ** 2
    return a * geo + b * lin


def truncation_bound(report: DichotomyReport, J0_norm: float, drift_norm: float, N: int) -> float:
    """Bound on ``||x0_alt(N) - x0||`` from ``||P M^j|| <= K q^j``, ``||(I-P) M^-k|| <= K q^k``.

    ``J0_norm`` is ``||int_0^w d[U(s)^{-1}] phi||`` and ``drift_norm`` is
    ``||(M^{-1} - I) d||``; ``q = exp(-alpha w)``.
    """
    q = math.exp(-report.alpha * report.period)
    K = report.K if report.K is not None else 1.0
    return K * (_tail(J0_norm, drift_norm, q, N + 1) + _tail(J0_norm, drift_norm, q, N))


def dichotomy_representation_x0(sys, report: DichotomyReport, N: Optional[int] = None, *, with_bound: bool = False):
    """Truncated dichotomy representation of the periodic initial value.

    The integrals over ``[k w, (k+1) w]`` are reduced to one period through
    ``U(s + k w)^{-1} = M^{-k} U(s)^{-1}`` and ``phi(s + k w) = phi(s) + k d``:

        int_{kw}^{(k+1)w} d[L U^{-1}] phi = L M^{-k} (J0 + k (M^{-1} - I) d),

    with ``J0`` the one-period integral.  The stable part sums ``k = -N..-1``
    and the unstable part ``k = 0..N-1``.
    """
    if not report.is_dichotomy:
        raise ResonanceError(f"no exponential dichotomy ({report.classification})", report.multipliers)
    P = _as_propagator(sys)
    if N is None:
        N = default_truncation(report)
    N = int(N)
    if N < 1:
        raise ValueError("N must be at least 1")
    w, n = P.period, P.n
    Pm = report.P
    Qm = np.eye(n) - Pm
    phi = _shifted(P.system.forcing, 0.0)
    Jp = ks_integrate(TransitionIntegrator(P, 0.0, left=Pm), phi, 0.0, w)
    Jq = ks_integrate(TransitionIntegrator(P, 0.0, left=Qm), phi, 0.0, w)
    M = P.monodromy_matrix
    Minv = np.linalg.inv(M)
    drift = (Minv - np.eye(n)) @ _increment(P)

    stable = np.zeros(n)
    Mk = np.eye(n)
    for j in range(1, N + 1):
        Mk = M @ Mk
        stable += Mk @ (Jp - j * (Pm @ drift))
    unstable = np.zeros(n)
    Mk = np.eye(n)
    for k in range(N):
        unstable += Mk @ (Jq + k * (Qm @ drift))
        Mk = Minv @ Mk
    x0_alt = unstable - stable
    if not with_bound:
        return x0_alt
    bound = truncation_bound(report, float(np.linalg.norm(Jp + Jq)), float(np.linalg.norm(drift)), N)
    return x0_alt, bound


def periodic_solution(
    sys,
    eps_uc: float = EPS_UC,
    N: Optional[int] = None,
    samples: int = 101,
    tol_per: float = TOL_PER,
) -> PeriodicSolutionResult:
    """The unique omega-periodic solution on ``[0, w]`` with its cross-checks."""
    P = _as_propagator(sys)
    report = _require_dichotomy(P, eps_uc)
    w = P.period
    x0 = shooting_x0(P)
    x0_direct = direct_ks_x0(P)
    scale = 1.0 + float(np.linalg.norm(x0))
    path_gap = float(np.linalg.norm(x0 - x0_direct))
    if path_gap > TOL_VOC * scale:
        raise ConsistencyError(f"shooting and direct KS initial values differ by {path_gap:.3e}")

    traj = propagate(P, 0.0, x0, w, samples=samples)
    resid = float(np.linalg.norm(traj.at(w) - x0))
    if resid > tol_per * scale:
        raise ConsistencyError(f"periodicity residual {resid:.3e} exceeds {tol_per:g}")
    ie = integral_equation_residual(P, traj, 0.0, w)
    if ie > tol_per * scale:
        raise ConsistencyError(f"integral equation residual {ie:.3e} exceeds {tol_per:g}")

    if N is None:
        N = default_truncation(report)
    x0_alt, bound = dichotomy_representation_x0(P, report, N, with_bound=True)
    return PeriodicSolutionResult(
        x0=x0,
        trajectory=traj,
        periodicity_residual=resid,
        x0_alt=x0_alt,
        representation_gap=float(np.linalg.norm(x0_alt - x0)),
        truncation_periods=int(N),
        truncation_bound=bound,
        x0_direct=x0_direct,
        path_gap=path_gap,
        report=report,
    )
