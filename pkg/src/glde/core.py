"""Generalized linear differential equations ``dx/dtau = D[A(t) x + f(t)]``.

A solution satisfies ``x(t) = x(s) + int_s^t d[A(r)] x(r) + f(t) - f(s)``.
Between jump instants this is the ODE ``x' = A'(t) x + f'(t)``; at a jump
instant ``tau``

    x(tau)  = [I - pre_A(tau)]^{-1} (x(tau-) + pre_f(tau))
    x(tau+) = x(tau) + post_A(tau) x(tau) + post_f(tau).

Everything is computed on the augmented state ``z = (x, 1)`` so that the
homogeneous transition matrix and the forced response come out of the same
linear maps: the upper-left ``n x n`` block of an augmented map is the
corresponding transition matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

from .bv import BVMatrixFunction, RegulatedVectorFunction, _merge_points, snap_tol
from .errors import ConditionHError, ConsistencyError, DimensionError
from .ks import ks_integrate

__all__ = [
    "H_THRESHOLD",
    "DEFAULT_STEPS_PER_PERIOD",
    "TOL_VOC",
    "HReport",
    "check_H",
    "GLDESystem",
    "Propagator",
    "Trajectory",
    "TransitionIntegrator",
    "transition_matrix",
    "one_sided_transition",
    "propagate",
    "voc_crosscheck",
    "integral_equation_residual",
]

H_THRESHOLD = 1e-12
DEFAULT_STEPS_PER_PERIOD = 4096
TOL_VOC = 1e-6


# ---------------------------------------------------------------------------
# invertibility of jump factors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HReport:
    """Jump-factor determinants at every jump instant of one period.

    ``entries`` holds ``(time, det(I - pre), det(I + post))`` triples.
    """

    entries: tuple
    threshold: float
    passed: bool

    @property
    def min_abs_det(self) -> float:
        if not self.entries:
            return math.inf
        return min(min(abs(dm), abs(dp)) for _, dm, dp in self.entries)


def check_H(A: BVMatrixFunction, threshold: float = H_THRESHOLD) -> HReport:
    """Check invertibility of ``I - pre_A`` and ``I + post_A`` at every jump."""
    n = A.dimension
    eye = np.eye(n)
    entries = []
    for j in A.jumps:
        dm = float(np.linalg.det(eye - j.pre))
        dp = float(np.linalg.det(eye + j.post))
        entries.append((j.time, dm, dp))
    passed = all(abs(dm) >= threshold and abs(dp) >= threshold for _, dm, dp in entries)
    return HReport(tuple(entries), threshold, passed)


# ---------------------------------------------------------------------------
# system
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GLDESystem:
    """Periodic GLDE; ``f=None`` means the homogeneous equation.

    Invertibility of the jump factors is verified on construction.
    """

    A: BVMatrixFunction
    f: Optional[RegulatedVectorFunction] = None

    def __post_init__(self):
        if self.f is not None:
            if self.f.dimension != self.A.dimension:
                raise DimensionError(
                    f"A has dimension {self.A.dimension} but f has dimension {self.f.dimension}"
                )
            if abs(self.f.period - self.A.period) > snap_tol(self.A.period, self.A.period):
                raise DimensionError(f"A has period {self.A.period} but f has period {self.f.period}")
        report = check_H(self.A)
        if not report.passed:
            raise ConditionHError(
                f"singular jump factor: min |det| is {report.min_abs_det:.3e}", report
            )

    @property
    def dimension(self) -> int:
        return self.A.dimension

    @property
    def period(self) -> float:
        return self.A.period

    @property
    def forcing(self) -> RegulatedVectorFunction:
        return self.f if self.f is not None else RegulatedVectorFunction.zero(self.dimension, self.period)

    @property
    def homogeneous(self) -> "GLDESystem":
        return self if self.f is None else GLDESystem(self.A)

    @cached_property
    def propagator(self) -> "Propagator":
        return Propagator(self)


# ---------------------------------------------------------------------------
# propagator
# ---------------------------------------------------------------------------


def _rk4_maps(B1, B2, B4, h):
    """Linear maps of classical RK4 steps for ``z' = B(t) z``.

    ``B1, B2, B4`` hold ``B`` at the start, midpoint and end of each step.
    """
    d = B1.shape[-1]
    eye = np.eye(d)
    hh = np.asarray(h, dtype=float).reshape(-1, 1, 1)
    K1 = B1
    K2 = B2 @ (eye + 0.5 * hh * K1)
    K3 = B2 @ (eye + 0.5 * hh * K2)
    K4 = B4 @ (eye + hh * K3)
    return eye + hh / 6.0 * (K1 + 2.0 * K2 + 2.0 * K3 + K4)


@dataclass
class _Cell:
    start: float
    end: float
    steps: int
    h: float
    a_cell: int
    a_off: float
    f_cell: int
    f_off: float
    maps: np.ndarray = field(repr=False, default=None)
    nodes: np.ndarray = field(repr=False, default=None)  # cumulative Z at nodes, from Z(start+)


class Propagator:
    """Transition matrices and solutions of a ``GLDESystem``.

    One period is meshed by the union of the breakpoints of ``A`` and ``f``;
    each cell is covered by equal classical RK4 steps of length at most
    ``step`` (default ``omega / 4096``) that never straddle a breakpoint.
    The augmented step maps and the cumulative fundamental matrix at every
    node are computed once; values over other periods follow from the
    biperiodicity of the dynamics, ``Z(t + omega, s + omega) = Z(t, s)``.

    Instances are immutable after construction.
    """

    def __init__(self, system: GLDESystem, step: Optional[float] = None):
        if isinstance(system, BVMatrixFunction):
            system = GLDESystem(system)
        self.system = system
        A, f = system.A, system.forcing
        n = system.dimension
        self.n = n
        self.period = w = system.period
        self.step = float(step) if step is not None else w / DEFAULT_STEPS_PER_PERIOD
        if not self.step > 0 or w / self.step > 5e7:
            raise ValueError(f"step size {self.step} is not usable for period {w}")

        bp = _merge_points(A.density.breakpoints, f.density.breakpoints, tol=snap_tol(w, w))
        bp[-1] = w
        self.breakpoints = bp
        m = bp.size - 1
        eye_n = np.eye(n)

        # jump maps at breakpoints of one period
        Jm = np.tile(np.eye(n + 1), (m, 1, 1))
        Jp = np.tile(np.eye(n + 1), (m, 1, 1))
        is_jump = np.zeros(m, dtype=bool)
        for i in range(m):
            preA, postA = A.jump_at(bp[i])
            pref, postf = f.jump_at(bp[i])
            if np.any(preA) or np.any(postA) or np.any(pref) or np.any(postf):
                is_jump[i] = True
            inv = np.linalg.inv(eye_n - preA)
            Jm[i, :n, :n] = inv
            Jm[i, :n, n] = inv @ pref
            Jp[i, :n, :n] = eye_n + postA
            Jp[i, :n, n] = postf
        self._Jm, self._Jp, self.is_jump = Jm, Jp, is_jump

        cells = []
        for i in range(m):
            lo, hi = bp[i], bp[i + 1]
            steps = max(1, int(math.ceil((hi - lo) / self.step - 1e-9)))
            ia, ua = A.density.locate(0.5 * (lo + hi))
            jf, uf = f.density.locate(0.5 * (lo + hi))
            ia, jf = int(ia), int(jf)
            cells.append(
                _Cell(
                    lo, hi, steps, (hi - lo) / steps,
                    ia, lo - A.density.breakpoints[ia],
                    jf, lo - f.density.breakpoints[jf],
                )
            )
        self.cells = cells

        Zleft = np.zeros((m + 1, n + 1, n + 1))
        Zpoint = np.zeros((m + 1, n + 1, n + 1))
        Zright = np.zeros((m + 1, n + 1, n + 1))
        Zpoint[0] = np.eye(n + 1)
        Zleft[0] = np.linalg.solve(Jm[0], Zpoint[0])
        Zright[0] = Jp[0] @ Zpoint[0]
        for i, c in enumerate(cells):
            u = np.arange(c.steps) * c.h
            c.maps = _rk4_maps(self._B(i, u), self._B(i, u + 0.5 * c.h), self._B(i, u + c.h), np.full(c.steps, c.h))
            Y = np.empty((c.steps + 1, n + 1, n + 1))
            Y[0] = Zright[i]
            for j in range(c.steps):
                Y[j + 1] = c.maps[j] @ Y[j]
            c.nodes = Y
            k = (i + 1) % m
            Zleft[i + 1] = Y[-1]
            Zpoint[i + 1] = Jm[k] @ Y[-1]
            Zright[i + 1] = Jp[k] @ Zpoint[i + 1]
        self._Zleft, self._Zpoint, self._Zright = Zleft, Zpoint, Zright
        self._Zomega = Zpoint[m]
        self._Zomega_inv = np.linalg.inv(Zpoint[m])

    # -- local helpers --------------------------------------------------------
    def _B(self, i: int, u) -> np.ndarray:
        """Augmented coefficient matrix at local offsets ``u`` of cell ``i``."""
        c = self.cells[i]
        u = np.atleast_1d(np.asarray(u, dtype=float))
        A, f = self.system.A, self.system.forcing
        out = np.zeros((u.size, self.n + 1, self.n + 1))
        out[:, : self.n, : self.n] = A.density.eval_local(np.full(u.size, c.a_cell), c.a_off + u)
        out[:, : self.n, self.n] = f.density.eval_local(np.full(u.size, c.f_cell), c.f_off + u)
        return out

    def _partial(self, i: int, u0: float, delta: float) -> np.ndarray:
        """Single RK4 map over ``[u0, u0 + delta]`` inside cell ``i``."""
        u = np.array([u0])
        return _rk4_maps(self._B(i, u), self._B(i, u + 0.5 * delta), self._B(i, u + delta), np.array([delta]))[0]

    def _step_map(self, i: int, p: float, q: float) -> np.ndarray:
        c = self.cells[i]
        tol = snap_tol(c.end, self.period)
        j = int(round(p / c.h))
        if j < c.steps and abs(p - j * c.h) <= tol and abs(q - (j + 1) * c.h) <= tol:
            return c.maps[j]
        return self._partial(i, p, q - p)

    def _locate(self, t: float):
        """``(k, r, cell, on_bp)`` with ``t = k*omega + r`` and ``0 <= r < omega``."""
        w = self.period
        tol = snap_tol(t, w)
        k = math.floor(t / w)
        r = t - k * w
        if r >= w - tol:
            k, r = k + 1, 0.0
        bp = self.breakpoints
        i = min(max(int(np.searchsorted(bp, r, side="right")) - 1, 0), bp.size - 2)
        if abs(bp[i + 1] - r) <= tol:
            return k, bp[i + 1], i + 1, True
        return k, r, i, abs(r - bp[i]) <= tol

    def _Z_local(self, r: float, i: int, on_bp: bool, side: str = "point") -> np.ndarray:
        if on_bp:
            return {"point": self._Zpoint, "left": self._Zleft, "right": self._Zright}[side][i]
        c = self.cells[i]
        u = r - c.start
        j = min(int(u // c.h), c.steps - 1)
        delta = u - j * c.h
        if delta <= snap_tol(r, self.period):
            return c.nodes[j]
        return self._partial(i, j * c.h, delta) @ c.nodes[j]

    def _power(self, k: int) -> np.ndarray:
        if k >= 0:
            return np.linalg.matrix_power(self._Zomega, k)
        return np.linalg.matrix_power(self._Zomega_inv, -k)

    # -- public API -----------------------------------------------------------
    def augmented(self, t: float, s: float) -> np.ndarray:
        """Affine solution map ``Z(t, s)``: ``(x(t), 1) = Z(t, s) (x(s), 1)``."""
        t, s = float(t), float(s)
        if not (math.isfinite(t) and math.isfinite(s)):
            raise ValueError("times must be finite")
        if t == s:
            return np.eye(self.n + 1)
        kt, rt, it, bt = self._locate(t)
        ks_, rs, is_, bs = self._locate(s)
        Zt = self._Z_local(rt, it, bt) @ self._power(kt - ks_)
        Zs = self._Z_local(rs, is_, bs)
        return np.linalg.solve(Zs.T, Zt.T).T

    def transition(self, t: float, s: float) -> np.ndarray:
        """Point value of the transition matrix ``U(t, s)``."""
        if float(t) == float(s):
            return np.eye(self.n)
        return self.augmented(t, s)[: self.n, : self.n]

    def fundamental(self, t: float) -> np.ndarray:
        """``U(t) = U(t, 0)``."""
        return self.transition(t, 0.0)

    @cached_property
    def monodromy_matrix(self) -> np.ndarray:
        return self._Zomega[: self.n, : self.n].copy()

    @cached_property
    def period_map(self) -> np.ndarray:
        """Augmented one-period map ``Z(omega, 0)``."""
        return self._Zomega.copy()

    def one_sided(self, t: float, s: float, side: str) -> np.ndarray:
        """``U(t+, s)``, ``U(t-, s)``, ``U(t, s+)`` or ``U(t, s-)``.

        ``side`` is one of ``"t+", "t-", "s+", "s-"``.  The jump factor is
        taken at the argument that varies.
        """
        U = self.transition(t, s)
        eye = np.eye(self.n)
        A = self.system.A
        if side == "t+":
            return (eye + A.jump_at(t)[1]) @ U
        if side == "t-":
            return (eye - A.jump_at(t)[0]) @ U
        if side == "s+":
            return np.linalg.solve((eye + A.jump_at(s)[1]).T, U.T).T
        if side == "s-":
            return np.linalg.solve((eye - A.jump_at(s)[0]).T, U.T).T
        raise ValueError(f"side must be one of 't+', 't-', 's+', 's-', got {side!r}")

    # -- sweeping -------------------------------------------------------------
    def _plan(self, lo: float, hi: float):
        """Ascending list of ('seg', cell, k, positions) / ('bp', index, time) between lo < hi."""
        w = self.period
        items = []
        k, r, i, on_bp = self._locate(lo)
        tol = snap_tol([lo, hi], w)
        while True:
            c = self.cells[i]
            a_abs = c.start + k * w
            b_abs = c.end + k * w
            u_lo = max(lo - a_abs, 0.0)
            end = min(hi, b_abs)
            u_hi = min(end - a_abs, c.end - c.start)
            pos = [u_lo]
            for j in range(int(u_lo // c.h), int(math.ceil(u_hi / c.h)) + 1):
                uj = j * c.h
                if u_lo + tol < uj < u_hi - tol:
                    pos.append(uj)
            pos.append(u_hi)
            if u_hi - u_lo > tol:
                items.append(("seg", i, k, np.array(pos)))
            if b_abs >= hi - tol:
                break
            i += 1
            if i == len(self.cells):
                i, k = 0, k + 1
            items.append(("bp", i, b_abs))
        return items

    def sweep(self, s0: float, z0: np.ndarray, t1: float):
        """Integrate the augmented state from ``s0`` to ``t1`` (either direction).

        Returns ``(segments, breaks, z1)`` where ``segments`` are
        ``(cell, k, positions, values)`` in ascending time, ``breaks`` maps
        breakpoint instants to ``(left, point, right, is_jump)`` and ``z1`` is
        the point value at ``t1``.
        """
        w = self.period
        z0 = np.asarray(z0, dtype=float)
        forward = t1 >= s0
        lo, hi = (s0, t1) if forward else (t1, s0)
        segments, breaks = [], {}
        if hi - lo <= snap_tol([lo, hi], w):
            z = z0
            _, _, i, on_bp = self._locate(s0)
            if on_bp:
                idx = i % len(self.cells)
                breaks[s0] = (np.linalg.solve(self._Jm[idx], z), z, self._Jp[idx] @ z, self.is_jump[idx])
            return segments, breaks, z

        plan = self._plan(lo, hi)
        _, _, ilo, blo = self._locate(lo)
        _, _, ihi, bhi = self._locate(hi)
        m = len(self.cells)

        def record_forward(t, idx, left):
            point = self._Jm[idx] @ left
            right = self._Jp[idx] @ point
            breaks[t] = (left, point, right, self.is_jump[idx])
            return point, right

        def record_backward(t, idx, right):
            point = np.linalg.solve(self._Jp[idx], right)
            left = np.linalg.solve(self._Jm[idx], point)
            breaks[t] = (left, point, right, self.is_jump[idx])
            return point, left

        if forward:
            z = z0
            if blo:
                idx = ilo % m
                breaks[lo] = (np.linalg.solve(self._Jm[idx], z), z, self._Jp[idx] @ z, self.is_jump[idx])
                z = breaks[lo][2]
            for item in plan:
                if item[0] == "seg":
                    _, i, k, pos = item
                    vals = np.empty((pos.size, z.size))
                    vals[0] = z
                    for q in range(pos.size - 1):
                        z = self._step_map(i, pos[q], pos[q + 1]) @ z
                        vals[q + 1] = z
                    segments.append((i, k, pos, vals))
                else:
                    _, idx, t = item
                    _, z = record_forward(t, idx, z)
            if bhi:
                z, _ = record_forward(hi, ihi % m, z)
            return segments, breaks, z

        z = z0
        if bhi:
            idx = ihi % m
            breaks[hi] = (np.linalg.solve(self._Jm[idx], z), z, self._Jp[idx] @ z, self.is_jump[idx])
            z = breaks[hi][0]
        for item in reversed(plan):
            if item[0] == "seg":
                _, i, k, pos = item
                vals = np.empty((pos.size, z.size))
                vals[-1] = z
                for q in range(pos.size - 1, 0, -1):
                    z = np.linalg.solve(self._step_map(i, pos[q - 1], pos[q]), z)
                    vals[q - 1] = z
                segments.insert(0, (i, k, pos, vals))
            else:
                _, idx, t = item
                _, z = record_backward(t, idx, z)
        if blo:
            z, _ = record_backward(lo, ilo % m, z)
        return segments, breaks, z


def _as_propagator(obj) -> Propagator:
    if isinstance(obj, Propagator):
        return obj
    if isinstance(obj, GLDESystem):
        return obj.propagator
    raise TypeError(f"expected GLDESystem or Propagator, got {type(obj).__name__}")


def transition_matrix(P, t: float, s: float) -> np.ndarray:
    """Point value ``U(t, s)`` of the transition matrix."""
    return _as_propagator(P).transition(t, s)


def one_sided_transition(P, t: float, s: float, side: str) -> np.ndarray:
    """One-sided limit of ``U`` in ``t`` or ``s``; see ``Propagator.one_sided``."""
    return _as_propagator(P).one_sided(t, s, side)


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------


def _hermite(t, t0, t1, y0, y1, d0, d1):
    h = t1 - t0
    s = ((t - t0) / h)[:, None]
    h00 = 2 * s**3 - 3 * s**2 + 1
    h10 = s**3 - 2 * s**2 + s
    h01 = -2 * s**3 + 3 * s**2
    h11 = s**3 - s**2
    return h00 * y0 + h10 * h[:, None] * d0 + h01 * y1 + h11 * h[:, None] * d1


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Sampled solution with left limit, point value and right limit per sample.

    ``times`` are ascending and include every jump instant in range; away
    from jumps the three value arrays coincide.  ``dense`` gives cubic
    Hermite output on the RK4 nodes, ``value`` returns exact point values at
    breakpoints and Hermite output elsewhere.
    """

    s0: float
    x0: np.ndarray
    times: np.ndarray
    left: np.ndarray
    values: np.ndarray
    right: np.ndarray
    jump_times: np.ndarray
    period: float
    _node_t: np.ndarray = field(repr=False)
    _node_x: np.ndarray = field(repr=False)
    _node_dx: np.ndarray = field(repr=False)
    _seg_id: np.ndarray = field(repr=False)
    _breaks: dict = field(repr=False)

    @property
    def dimension(self) -> int:
        return self.values.shape[1]

    @property
    def t0(self) -> float:
        return float(self.times[0])

    @property
    def t1(self) -> float:
        return float(self.times[-1])

    def at(self, t: float) -> np.ndarray:
        """Point value at a sample or jump instant, Hermite output elsewhere."""
        return self.value(np.array([t]))[0]

    def dense(self, ts) -> np.ndarray:
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        nt = self._node_t
        if np.any(ts < nt[0] - snap_tol(nt[0], self.period)) or np.any(ts > nt[-1] + snap_tol(nt[-1], self.period)):
            raise ValueError("dense output requested outside the trajectory")
        j = np.clip(np.searchsorted(nt, ts, side="right") - 1, 0, nt.size - 2)
        # segments abut at breakpoints; never interpolate across two of them
        j = np.where(self._seg_id[j] != self._seg_id[j + 1], j + 1, j)
        return _hermite(ts, nt[j], nt[j + 1], self._node_x[j], self._node_x[j + 1], self._node_dx[j], self._node_dx[j + 1])

    def value(self, ts) -> np.ndarray:
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        out = self.dense(ts)
        if self._breaks:
            bt = np.array(sorted(self._breaks))
            tol = snap_tol(ts, self.period)
            for q, t in enumerate(ts):
                k = int(np.argmin(np.abs(bt - t)))
                if abs(bt[k] - t) <= tol:
                    out[q] = self._breaks[bt[k]][1]
        return out

    __call__ = value

    def breakpoints(self, a: float, b: float) -> np.ndarray:
        bt = np.array(sorted(self._breaks)) if self._breaks else np.zeros(0)
        return bt[(bt >= a) & (bt <= b)]

    def rows(self):
        """Yield ``(t, side, x)`` with L/P/R triples at jumps, P elsewhere."""
        jt = set(float(t) for t in self.jump_times)
        for q, t in enumerate(self.times):
            if float(t) in jt:
                yield float(t), "L", self.left[q]
                yield float(t), "P", self.values[q]
                yield float(t), "R", self.right[q]
            else:
                yield float(t), "P", self.values[q]


def propagate(sys, s0: float, x0, t1: float, samples: int = 101, *, times=None) -> Trajectory:
    """Solve the GLDE with ``x(s0) = x0`` on the interval between ``s0`` and ``t1``.

    Parameters
    ----------
    sys : GLDESystem or Propagator
    s0, t1 : float
        Initial and final time; ``t1 < s0`` integrates backwards.
    x0 : array_like
        Initial point value.
    samples : int
        Number of uniformly spaced sample times (>= 2), endpoints included.
    times : array_like, optional
        Additional sample times inside the interval.

    Returns
    -------
    Trajectory
    """
    P = _as_propagator(sys)
    s0, t1 = float(s0), float(t1)
    if not (math.isfinite(s0) and math.isfinite(t1)):
        raise ValueError("times must be finite")
    if int(samples) < 2:
        raise ValueError("samples must be at least 2")
    n = P.n
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.size != n:
        raise DimensionError(f"initial value has length {x0.size}, system dimension is {n}")
    z0 = np.append(x0, 1.0)
    segments, breaks, _ = P.sweep(s0, z0, t1)
    lo, hi = min(s0, t1), max(s0, t1)
    w = P.period
    tol = snap_tol([lo, hi], w)

    # node arrays for dense output
    nt, nx, ndx, sid = [], [], [], []
    for q, (i, k, pos, vals) in enumerate(segments):
        c = P.cells[i]
        B = P._B(i, pos)
        nt.append(c.start + k * w + pos)
        nx.append(vals[:, :n])
        ndx.append(np.einsum("kij,kj->ki", B, vals)[:, :n])
        sid.append(np.full(pos.size, q))
    if nt:
        node_t, node_x = np.concatenate(nt), np.concatenate(nx)
        node_dx, seg_id = np.concatenate(ndx), np.concatenate(sid)
    else:
        node_t = np.array([lo, lo])
        node_x = np.tile(x0, (2, 1))
        node_dx = np.zeros((2, n))
        seg_id = np.zeros(2, dtype=int)

    jump_times = np.array(sorted(t for t, rec in breaks.items() if rec[3]))
    sample_t = np.linspace(s0, t1, int(samples))
    extra = [] if times is None else [np.asarray(times, dtype=float)]
    all_t = _merge_points(sample_t, jump_times, *extra, tol=tol)
    all_t = all_t[(all_t >= lo - tol) & (all_t <= hi + tol)]

    bkeys = np.array(sorted(breaks)) if breaks else np.zeros(0)
    seg_start = np.array([P.cells[i].start + k * w + pos[0] for i, k, pos, _ in segments])
    L = np.empty((all_t.size, n))
    V = np.empty((all_t.size, n))
    R = np.empty((all_t.size, n))
    for q, t in enumerate(all_t):
        if bkeys.size:
            kb = int(np.argmin(np.abs(bkeys - t)))
            if abs(bkeys[kb] - t) <= tol:
                rec = breaks[bkeys[kb]]
                L[q], V[q], R[q] = rec[0][:n], rec[1][:n], rec[2][:n]
                continue
        # inside a segment: partial RK4 step from the node at or below t
        sidx = max(int(np.searchsorted(seg_start, t, side="right")) - 1, 0)
        i, k, pos, vals = segments[sidx]
        a_abs = P.cells[i].start + k * w
        u = t - a_abs
        j = min(max(int(np.searchsorted(pos, u, side="right")) - 1, 0), pos.size - 1)
        delta = u - pos[j]
        z = vals[j] if abs(delta) <= tol else P._partial(i, pos[j], delta) @ vals[j]
        L[q] = V[q] = R[q] = z[:n]

    traj = Trajectory(
        s0=s0, x0=x0, times=all_t, left=L, values=V, right=R, jump_times=jump_times, period=w,
        _node_t=node_t, _node_x=node_x, _node_dx=node_dx, _seg_id=seg_id,
        _breaks={t: tuple(r[:n] for r in rec[:3]) for t, rec in breaks.items()},
    )
    _assert_jump_relations(P, traj)
    return traj


def _assert_jump_relations(P: Propagator, traj: Trajectory, tol: float = 1e-10):
    A, f = P.system.A, P.system.forcing
    for t in traj.jump_times:
        L, X, R = traj._breaks[t]
        preA, postA = A.jump_at(t)
        pref, postf = f.jump_at(t)
        scale = 1.0 + np.linalg.norm(X) + np.linalg.norm(R) + np.linalg.norm(L)
        r1 = np.linalg.norm(R - X - (postA @ X + postf))
        r2 = np.linalg.norm(X - L - (preA @ X + pref))
        if max(r1, r2) > tol * scale:
            raise ConsistencyError(f"jump relations violated at t={t}: residuals {r1:.2e}, {r2:.2e}")


# ---------------------------------------------------------------------------
# variation-of-constants cross-check
# ---------------------------------------------------------------------------


class TransitionIntegrator:
    """The matrix function ``s -> L U(t, s)`` as a KS integrator.

    Its density is ``-L U(t, s) A'(s)``; at a jump instant ``tau`` of ``A``
    the right jump is ``L U(t, tau) ([I + post]^{-1} - I)`` and the left
    jump ``L U(t, tau) (I - [I - pre]^{-1})``.
    """

    def __init__(self, P, t: float, left=None):
        self.P = _as_propagator(P)
        self.t = float(t)
        n = self.P.n
        self.L = np.eye(n) if left is None else np.asarray(left)
        self.dimension = n
        self.period = self.P.period

    def value(self, s) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        return np.array([self.L @ self.P.transition(self.t, si) for si in s])

    def mesh(self, a, b):
        return self.P.system.A.mesh(a, b)

    def density_at(self, s) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        dens = self.P.system.A.density_at(s)
        return -np.einsum("kij,kjl->kil", self.value(s), dens)

    def jumps_in(self, a, b):
        n = self.P.n
        eye = np.eye(n)
        out = []
        for tau, pre, post in self.P.system.A.jumps_in(a, b):
            LU = self.L @ self.P.transition(self.t, tau)
            jp = LU @ (np.linalg.inv(eye + post) - eye)
            jm = LU @ (eye - np.linalg.inv(eye - pre))
            out.append((tau, jm, jp))
        return out


def _shifted(f: RegulatedVectorFunction, s0: float):
    base = f.value(s0)

    class _Phi:
        dimension = f.dimension
        period = f.period

        @staticmethod
        def value(ts):
            return f.value(ts) - base

        @staticmethod
        def breakpoints(a, b):
            return f.breakpoints(a, b)

        @staticmethod
        def jumps_in(a, b):
            return f.jumps_in(a, b)

    return _Phi()


def voc_formula(sys, s0: float, x0, t: float) -> np.ndarray:
    """Right side of the variation-of-constants formula at ``t``.

    ``U(t, s0) x0 + f(t) - f(s0) - int_{s0}^t d[U(t, s)] (f(s) - f(s0))``.
    """
    P = _as_propagator(sys)
    f = P.system.forcing
    x0 = np.asarray(x0, dtype=float)
    integral = ks_integrate(TransitionIntegrator(P, t), _shifted(f, s0), s0, t)
    return P.transition(t, s0) @ x0 + f.value(t) - f.value(s0) - integral


def voc_crosscheck(sys, s0: float, x0, t: float) -> float:
    """``||voc_formula - propagate||`` at time ``t``."""
    P = _as_propagator(sys)
    traj = propagate(P, s0, x0, t, samples=2)
    direct = traj.at(t)
    return float(np.linalg.norm(voc_formula(P, s0, x0, t) - direct))


def integral_equation_residual(sys, traj: Trajectory, s: float, t: float) -> float:
    """``||x(t) - x(s) - int_s^t d[A] x - (f(t) - f(s))||`` along ``traj``."""
    P = _as_propagator(sys)
    A, f = P.system.A, P.system.forcing
    xs, xt = traj.value(np.array([s, t]))
    integral = ks_integrate(A, traj, s, t)
    return float(np.linalg.norm(xt - xs - integral - (f.value(t) - f.value(s))))
