"""Monodromy, Floquet decomposition and the exponential-dichotomy test.

For an omega-periodic GLDE the homogeneous equation has an exponential
dichotomy on the whole line exactly when no eigenvalue of the monodromy
matrix ``M = U(omega, 0)`` lies on the unit circle.  ``dichotomy_check``
applies that criterion with a tolerance band around the circle and, when it
succeeds, returns the spectral projection onto the stable multipliers and
constants ``K, alpha`` for the bound

    ||U(t) P U(s)^{-1}||     <= K exp(-alpha (t - s)),   t >= s,
    ||U(t) (I-P) U(s)^{-1}|| <= K exp(-alpha (s - t)),   s >= t.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg

from .core import Propagator, _as_propagator, propagate
from .errors import ConsistencyError

__all__ = [
    "EPS_UC",
    "UNIT_CIRCLE_FLOOR",
    "TOL_FLOQUET",
    "MonodromyData",
    "FloquetDecomposition",
    "DichotomyReport",
    "monodromy",
    "floquet_decompose",
    "dichotomy_check",
    "spectral_projection",
    "multiplier_solution_check",
    "dichotomy_bound_audit",
]

EPS_UC = 1e-8
UNIT_CIRCLE_FLOOR = 1e-12
TOL_FLOQUET = 1e-7
CLUSTER_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class MonodromyData:
    M: np.ndarray
    multipliers: np.ndarray
    period: float
    propagator: Optional[Propagator] = None


def _cluster(values: np.ndarray, tol: float = CLUSTER_TOL) -> np.ndarray:
    """Snap eigenvalues closer than ``tol`` to their cluster mean."""
    vals = values.astype(complex).copy()
    used = np.zeros(vals.size, dtype=bool)
    for i in range(vals.size):
        if used[i]:
            continue
        group = np.flatnonzero(~used & (np.abs(vals - vals[i]) <= tol * max(1.0, abs(vals[i]))))
        vals[group] = vals[group].mean()
        used[group] = True
    return vals


def monodromy(P) -> MonodromyData:
    """``M = U(omega, 0)`` and its eigenvalues (Floquet multipliers)."""
    P = _as_propagator(P)
    M = P.monodromy_matrix
    mult = _cluster(np.linalg.eigvals(M))
    # real matrix: enforce exact conjugate symmetry
    mult = np.where(np.abs(mult.imag) <= CLUSTER_TOL * np.maximum(1.0, np.abs(mult)), mult.real + 0j, mult)
    order = np.lexsort((mult.imag, np.abs(mult)))
    return MonodromyData(M=M, multipliers=mult[order], period=P.period, propagator=P)


@dataclass(frozen=True, eq=False)
class FloquetDecomposition:
    """``U(t) = G(t) exp(Q t)`` with ``G`` omega-periodic.

    ``times``/``G`` sample ``G`` on ``[0, 2 omega]`` (uniform grid plus jump
    instants); ``G_left``/``G_right`` are its one-sided limits there.
    """

    Q: np.ndarray
    times: np.ndarray
    G: np.ndarray
    G_left: np.ndarray
    G_right: np.ndarray
    real_log_exists: bool
    period: float
    reconstruction_error: float
    periodicity_error: float

    def G_at(self, t: float) -> np.ndarray:
        k = int(np.argmin(np.abs(self.times - t)))
        return self.G[k]


def _principal_log(M: np.ndarray) -> np.ndarray:
    # Schur-based inverse scaling and squaring; principal branch
    L = linalg.logm(M.astype(complex))
    return np.asarray(L, dtype=complex)


def floquet_decompose(P, samples_per_period: int = 128) -> FloquetDecomposition:
    """Principal-log Floquet factorisation sampled on ``[0, 2 omega]``."""
    P = _as_propagator(P)
    w, n = P.period, P.n
    M = P.monodromy_matrix
    eig = np.linalg.eigvals(M)
    real_log = not np.any((np.abs(eig.imag) <= CLUSTER_TOL) & (eig.real < 0))
    Q = _principal_log(M) / w
    recon = float(np.linalg.norm(linalg.expm(Q * w) - M, 2))

    jt = P.system.A.jump_times
    grid = np.linspace(0.0, 2 * w, 2 * samples_per_period + 1)
    times = np.unique(np.concatenate([grid, jt, jt + w]))
    G, Gl, Gr = [], [], []
    for t in times:
        E = linalg.expm(-Q * t)
        G.append(P.fundamental(t) @ E)
        Gl.append(P.one_sided(t, 0.0, "t-") @ E)
        Gr.append(P.one_sided(t, 0.0, "t+") @ E)
    G, Gl, Gr = np.array(G), np.array(Gl), np.array(Gr)
    per = 0.0
    for t in times[times <= w]:
        a = P.fundamental(t) @ linalg.expm(-Q * t)
        b = P.fundamental(t + w) @ linalg.expm(-Q * (t + w))
        per = max(per, float(np.linalg.norm(b - a, 2)))
    return FloquetDecomposition(Q, times, G, Gl, Gr, real_log, w, recon, per)


@dataclass(frozen=True, eq=False)
class DichotomyReport:
    """Outcome of the unit-circle test.

    ``classification`` is ``"dichotomy"``, ``"no-dichotomy"`` or
    ``"undecidable"``.  ``P``, ``K`` and ``alpha`` are only set for a
    dichotomy.
    """

    classification: str
    multipliers: np.ndarray
    stable: np.ndarray
    unstable: np.ndarray
    marginal: np.ndarray
    eps_uc: float
    period: float
    P: Optional[np.ndarray] = None
    K: Optional[float] = None
    alpha: Optional[float] = None
    K0: Optional[float] = None
    G_max: Optional[float] = None
    G_inv_max: Optional[float] = None

    @property
    def is_dichotomy(self) -> bool:
        return self.classification == "dichotomy"


def spectral_projection(M: np.ndarray) -> np.ndarray:
    """Real projection onto the invariant subspace of eigenvalues inside the unit disk.

    Uses a real Schur form ordered with the stable eigenvalues first,
    ``M = Z [[T11, T12], [0, T22]] Z^T``, and decouples the blocks with the
    Sylvester equation ``T11 R - R T22 = T12``; then
    ``P = Z [[I, R], [0, 0]] Z^T``.
    """
    n = M.shape[0]
    T, Z, k = linalg.schur(M, output="real", sort=lambda re, im: re * re + im * im < 1.0)
    if k == 0:
        return np.zeros((n, n))
    if k == n:
        return np.eye(n)
    R = linalg.solve_sylvester(T[:k, :k], -T[k:, k:], T[:k, k:])
    PT = np.zeros((n, n))
    PT[:k, :k] = np.eye(k)
    PT[:k, k:] = R
    return Z @ PT @ Z.T


def _constant_coefficient_K(Q: np.ndarray, P: np.ndarray, alpha: float, horizon: float, points: int = 801) -> float:
    n = Q.shape[0]
    eye = np.eye(n)
    taus = np.linspace(0.0, horizon, points)
    K0 = 0.0
    for tau in taus:
        Ep = linalg.expm(Q * tau)
        Em = linalg.expm(-Q * tau)
        K0 = max(
            K0,
            float(np.linalg.norm(Ep @ P, 2)) * math.exp(alpha * tau),
            float(np.linalg.norm(Em @ (eye - P), 2)) * math.exp(alpha * tau),
        )
    return K0


def dichotomy_check(md: MonodromyData, eps_uc: float = EPS_UC, floquet: Optional[FloquetDecomposition] = None) -> DichotomyReport:
    """Classify the homogeneous equation by the location of its multipliers.

    Any multiplier with ``| |rho| - 1 | < eps_uc`` makes the verdict
    ``"undecidable"``.  Otherwise a multiplier within ``UNIT_CIRCLE_FLOOR``
    of the circle (reachable only with ``eps_uc <= UNIT_CIRCLE_FLOOR``) gives
    ``"no-dichotomy"``, and a spectrum off the circle gives ``"dichotomy"``.

    ``K`` is ``K0 * max ||G|| * max ||G^{-1}||`` over one period, where
    ``K0`` bounds the dichotomy of ``y' = Q y`` on a sampled horizon.
    """
    if eps_uc < 0:
        raise ValueError("eps_uc must be non-negative")
    mult = np.asarray(md.multipliers)
    mod = np.abs(mult)
    dist = np.abs(mod - 1.0)
    band = max(eps_uc, UNIT_CIRCLE_FLOOR)
    common = dict(
        multipliers=mult,
        stable=mult[(mod < 1.0) & (dist >= band)],
        unstable=mult[(mod > 1.0) & (dist >= band)],
        marginal=mult[dist < band],
        eps_uc=eps_uc,
        period=md.period,
    )
    if np.any(dist < eps_uc):
        return DichotomyReport("undecidable", **common)
    if np.any(dist <= UNIT_CIRCLE_FLOOR):
        return DichotomyReport("no-dichotomy", **common)

    w = md.period
    Pm = spectral_projection(md.M)
    alpha = float(np.min(np.abs(np.log(mod)))) / w
    if md.propagator is None:
        return DichotomyReport("dichotomy", P=Pm, alpha=alpha, **common)
    fd = floquet if floquet is not None else floquet_decompose(md.propagator)
    in_period = fd.times <= w + 1e-12 * w
    Gs = np.concatenate([fd.G[in_period], fd.G_left[in_period], fd.G_right[in_period]])
    G_max = float(max(np.linalg.norm(g, 2) for g in Gs))
    G_inv_max = float(max(np.linalg.norm(np.linalg.inv(g), 2) for g in Gs))
    K0 = _constant_coefficient_K(fd.Q, Pm, alpha, horizon=10.0 * w)
    K = K0 * G_max * G_inv_max
    return DichotomyReport(
        "dichotomy", P=Pm, K=K, alpha=alpha, K0=K0, G_max=G_max, G_inv_max=G_inv_max, **common
    )


def multiplier_solution_check(P, rho, xi, N: int = 3, samples_per_period: int = 64) -> float:
    """``max ||x(t + omega) - rho x(t)|| / ||x(t)||`` over ``[-N omega, (N-1) omega]``.

    ``x`` solves the homogeneous equation with ``x(0) = xi``.  Complex
    eigenpairs are handled through the real and imaginary parts of ``xi``,
    i.e. on the real two-dimensional invariant subspace they span.
    Samples sit at half-grid offsets, away from grid-aligned jump instants.
    """
    P = _as_propagator(P)
    w = P.period
    xi = np.asarray(xi)
    rho = complex(rho)
    M = P.monodromy_matrix
    resid = np.linalg.norm(M @ xi - rho * xi)
    if resid > 1e-10 * max(1.0, np.linalg.norm(xi)) * max(1.0, np.linalg.norm(M)):
        raise ValueError(f"xi is not an eigenvector for rho={rho} (residual {resid:.2e})")
    hom = _as_propagator(P.system.homogeneous) if P.system.f is not None else P
    m = int(samples_per_period)
    ts = -N * w + (np.arange(2 * N * m) + 0.5) * (w / m)

    def solve(x0):
        out = np.empty((ts.size, hom.n))
        for sel, t1 in ((ts >= 0, N * w), (ts < 0, -N * w)):
            tr = propagate(hom, 0.0, x0, t1, samples=2, times=ts[sel])
            idx = np.abs(tr.times[None, :] - ts[sel][:, None]).argmin(axis=1)
            out[sel] = tr.values[idx]
        return out

    X = solve(xi.real).astype(complex)
    if np.any(xi.imag != 0):
        X = X + 1j * solve(xi.imag)
    worst = 0.0
    for q in range(ts.size - m):
        num = np.linalg.norm(X[q + m] - rho * X[q])
        den = np.linalg.norm(X[q])
        worst = max(worst, float(num / den))
    return worst


def dichotomy_bound_audit(P, report: DichotomyReport, grid=None) -> float:
    """Worst ``||U(t) P U(s)^{-1}|| e^{alpha (t - s)}`` (t >= s) and mirrored term.

    ``grid`` defaults to 81 uniform points of ``[-2 omega, 2 omega]`` plus
    every jump instant there.  The result should not exceed ``report.K``.
    """
    if not report.is_dichotomy:
        raise ValueError("audit needs a dichotomy report")
    P_ = _as_propagator(P)
    w, n = P_.period, P_.n
    if grid is None:
        jt = P_.system.A.jump_times
        shifts = np.concatenate([jt + k * w for k in range(-2, 2)]) if jt.size else np.zeros(0)
        grid = np.unique(np.concatenate([np.linspace(-2 * w, 2 * w, 81), shifts]))
    grid = np.asarray(grid, dtype=float)
    U = np.array([P_.fundamental(t) for t in grid])
    Uinv = np.array([np.linalg.inv(u) for u in U])
    Pm = report.P
    stable = np.einsum("aij,jk,bkl->abil", U, Pm, Uinv)
    unstable = np.einsum("aij,jk,bkl->abil", U, np.eye(n) - Pm, Uinv)
    ns = np.linalg.norm(stable, 2, axis=(2, 3))
    nu = np.linalg.norm(unstable, 2, axis=(2, 3))
    dt = grid[:, None] - grid[None, :]  # t - s
    weight = np.exp(report.alpha * np.abs(dt))
    worst_s = np.max(np.where(dt >= 0, ns * weight, 0.0))
    worst_u = np.max(np.where(dt <= 0, nu * weight, 0.0))
    return float(max(worst_s, worst_u))


def check_floquet(fd: FloquetDecomposition, tol_recon: float = 1e-8, tol_periodic: float = TOL_FLOQUET) -> None:
    """Raise if the factorisation fails its own invariants."""
    if fd.reconstruction_error > tol_recon or fd.periodicity_error > tol_periodic:
        raise ConsistencyError(
            f"Floquet factorisation inaccurate: |exp(Q w) - M| = {fd.reconstruction_error:.2e}, "
            f"max |G(t+w) - G(t)| = {fd.periodicity_error:.2e}"
        )
