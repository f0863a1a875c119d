"""Kurzweil-Stieltjes integrals ``int_a^b d[A(s)] f(s)`` for the representable class.

For an integrator with density ``A'`` and jumps, the integral against a
regulated ``f`` splits into

    int_a^b A'(s) f(s) ds + sum_{tau in [a, b)} post(tau) f(tau)
                          + sum_{tau in (a, b]} pre(tau) f(tau)

with ``f(tau)`` the point value.  The smooth part is integrated cellwise
with Gauss-Legendre rules on a mesh containing every breakpoint of both
functions, which is exact for polynomial densities against piecewise
polynomial integrands.

Integrators are duck-typed: any object with ``mesh(a, b)``, ``density_at(ts)``
and ``jumps_in(a, b)`` works (see ``glde.core.TransitionIntegrator``).
Integrands are either objects with a vectorised ``value`` method or plain
callables ``t -> vector``.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate as sp_integrate

from .bv import _merge_points, snap_tol
from .errors import DimensionError

__all__ = [
    "ks_integrate",
    "gauge_oracle_integrate",
    "variation",
    "partition_variation",
    "one_sided_values",
]

DEFAULT_NODES = 8


def _check_interval(a, b):
    if not (math.isfinite(a) and math.isfinite(b)):
        raise ValueError(f"integration bounds must be finite, got [{a}, {b}]")


def _integrand(f):
    """Return a vectorised evaluator and a breakpoint provider for ``f``."""
    if hasattr(f, "value"):
        ev = f.value
    elif callable(f):
        def ev(ts):
            return np.array([np.asarray(f(t), dtype=float) for t in np.atleast_1d(ts)])
    else:
        raise TypeError("integrand must be callable or provide .value")
    bps = getattr(f, "breakpoints", None)
    return ev, bps


def _period_of(obj):
    return getattr(obj, "period", 1.0)


def ks_integrate(A, f, a: float, b: float, *, nodes: int = DEFAULT_NODES, breaks=None) -> np.ndarray:
    """Kurzweil-Stieltjes integral of ``f`` with respect to ``A`` over ``[a, b]``.

    Parameters
    ----------
    A : integrator
        ``BVMatrixFunction`` or any object exposing ``mesh``, ``density_at``
        and ``jumps_in``.
    f : integrand
        ``RegulatedVectorFunction``, ``Trajectory`` or callable.
    a, b : float
        Bounds; ``a > b`` flips the sign and ``a == b`` gives zero.
    nodes : int
        Gauss-Legendre points per mesh cell.
    breaks : array_like, optional
        Extra points where ``f`` is not smooth.

    Returns
    -------
    numpy.ndarray
        The integral, a vector of length ``n``.
    """
    a, b = float(a), float(b)
    _check_interval(a, b)
    ev, bps = _integrand(f)
    if a > b:
        return -ks_integrate(A, f, b, a, nodes=nodes, breaks=breaks)
    probe = np.atleast_2d(ev(np.array([a])))
    n = probe.shape[-1]
    fdim = getattr(f, "dimension", n)
    adim = getattr(A, "dimension", None)
    if adim is not None and adim != fdim:
        raise DimensionError(f"integrator dimension {adim} differs from integrand dimension {fdim}")
    if a == b:
        return np.zeros(n)

    period = _period_of(A)
    tol = snap_tol([a, b], period)
    pieces = [A.mesh(a, b)]
    if bps is not None:
        pieces.append(bps(a, b))
    if breaks is not None:
        br = np.asarray(breaks, dtype=float)
        pieces.append(br[(br >= a) & (br <= b)])
    mesh = _merge_points(*pieces, tol=tol)
    mesh[0], mesh[-1] = a, b

    x, w = np.polynomial.legendre.leggauss(nodes)
    lo, hi = mesh[:-1], mesh[1:]
    half = 0.5 * (hi - lo)
    ts = (0.5 * (hi + lo))[:, None] + half[:, None] * x[None, :]
    ws = half[:, None] * w[None, :]
    ts, ws = ts.ravel(), ws.ravel()
    dens = np.asarray(A.density_at(ts))
    vals = np.atleast_2d(ev(ts))
    if dens.shape[-1] != vals.shape[-1]:
        raise DimensionError(f"integrator columns {dens.shape[-1]} differ from integrand length {vals.shape[-1]}")
    total = np.einsum("k,kij,kj->i", ws, dens, vals)

    for tau, pre, post in A.jumps_in(a, b):
        fv = np.atleast_2d(ev(np.array([tau])))[0]
        if tau < b - tol:
            total = total + post @ fv
        if tau > a + tol:
            total = total + pre @ fv
    return total


def _oracle_partition(A, f, a, b, cells):
    period = _period_of(A)
    tol = snap_tol([a, b], period)
    grid = np.linspace(a, b, cells + 1)
    h = (b - a) / cells
    eps = h * 2.0 ** -20
    jt = [tau for tau, _, _ in A.jumps_in(a, b)]
    if hasattr(f, "jumps_in"):
        jt += [tau for tau, _, _ in f.jumps_in(a, b)]
    jt = np.unique(np.array(jt, dtype=float)) if jt else np.zeros(0)
    extra = []
    for tau in jt:
        extra += [tau, max(a, tau - eps), min(b, tau + eps)]
    pts = _merge_points(grid, np.array(extra), tol=0.5 * eps)
    pts[0], pts[-1] = a, b
    tags = 0.5 * (pts[:-1] + pts[1:])
    for tau in jt:
        # tag every cell touching a jump instant at the instant itself
        touch = (np.abs(pts[:-1] - tau) <= tol) | (np.abs(pts[1:] - tau) <= tol)
        tags[touch] = tau
    return pts, tags


def gauge_oracle_integrate(A, f, a: float, b: float, cells: int) -> np.ndarray:
    """Riemann-Stieltjes sum on a gauge-refined uniform partition.

    The uniform partition with ``cells`` cells is refined at each jump instant
    ``tau`` of ``A`` or ``f`` by the points ``tau`` and ``tau +- eps`` with
    ``eps = h * 2**-20``; the two tiny cells around ``tau`` are tagged at
    ``tau``, every other cell at its midpoint.  This is a delta-fine tagged
    partition for a gauge that shrinks at the jumps, so the sum converges to
    the Kurzweil-Stieltjes integral.  ``A`` must provide vectorised point
    values, ``f`` vectorised ``value`` or be callable.
    """
    if int(cells) < 1:
        raise ValueError("cells must be a positive integer")
    a, b = float(a), float(b)
    _check_interval(a, b)
    ev, _ = _integrand(f)
    if a > b:
        return -gauge_oracle_integrate(A, f, b, a, cells)
    n = np.atleast_2d(ev(np.array([a]))).shape[-1]
    if getattr(A, "dimension", n) != n:
        raise DimensionError("integrator and integrand dimensions differ")
    if a == b:
        return np.zeros(n)
    pts, tags = _oracle_partition(A, f, a, b, int(cells))
    vals = A.value(pts)
    dA = vals[1:] - vals[:-1]
    fv = np.atleast_2d(ev(tags))
    return np.einsum("kij,kj->i", dA, fv)


def _norm(x):
    x = np.asarray(x)
    return float(np.linalg.norm(x, 2)) if x.ndim == 2 else float(np.linalg.norm(x))


def variation(A, a: float, b: float) -> float:
    """Total variation of ``A`` over ``[a, b]`` in the operator 2-norm.

    The absolutely continuous part contributes ``int_a^b ||A'(s)|| ds``; each
    jump instant contributes the norms of its left jump (if in ``(a, b]``) and
    right jump (if in ``[a, b)``).
    """
    a, b = float(a), float(b)
    _check_interval(a, b)
    if a > b:
        raise ValueError("variation needs a <= b")
    if a == b:
        return 0.0
    tol = snap_tol([a, b], A.period)
    mesh = A.mesh(a, b)
    total = 0.0
    for lo, hi in zip(mesh[:-1], mesh[1:]):
        val, _ = sp_integrate.quad(
            lambda s: _norm(A.density_at(s)), lo, hi, epsabs=1e-14, epsrel=1e-12, limit=200
        )
        total += val
    for tau, pre, post in A.jumps_in(a, b):
        if tau > a + tol:
            total += _norm(pre)
        if tau < b - tol:
            total += _norm(post)
    return total


def partition_variation(A, a: float, b: float, cells: int) -> float:
    """``sum ||A(alpha_j) - A(alpha_{j-1})||`` on the oracle partition.

    A lower bound for ``variation`` that increases to it under refinement.
    """
    a, b = float(a), float(b)
    if a > b:
        raise ValueError("variation needs a <= b")
    if a == b:
        return 0.0
    pts, _ = _oracle_partition(A, A, a, b, int(cells))
    vals = A.value(pts)
    d = vals[1:] - vals[:-1]
    if d.ndim == 3:
        return float(np.linalg.norm(d, 2, axis=(1, 2)).sum())
    return float(np.linalg.norm(d, axis=1).sum())


def one_sided_values(F, t: float):
    """``(F(t-), F(t), F(t+))`` from the density/jump representation."""
    return F.left(t), F.value(t), F.right(t)
