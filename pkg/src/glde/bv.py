"""Representable integrators and forcings.

Every function handled by the package is the sum of an absolutely
continuous part, given by a piecewise polynomial density on one period
``[0, omega]``, and finitely many jumps per period.  Outside ``[0, omega)``
the function is extended so that its increment over each period is a
constant: ``F(t + k*omega) = F(t) + k*C``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DimensionError

__all__ = [
    "MAX_DEGREE",
    "PiecewisePoly",
    "JumpEvent",
    "BVMatrixFunction",
    "RegulatedVectorFunction",
    "snap_tol",
]

MAX_DEGREE = 5
_SNAP = 64 * np.finfo(float).eps


def snap_tol(t, period: float) -> float:
    """Distance below which two times are treated as the same instant."""
    return _SNAP * max(period, float(np.max(np.abs(t))) if np.size(t) else 0.0)


def _taylor_shift(coef: np.ndarray, d: float) -> np.ndarray:
    # coefficients of p(v + d) given those of p(u), ascending, along axis 0
    deg = coef.shape[0] - 1
    out = np.zeros_like(coef)
    for j in range(deg + 1):
        for k in range(j, deg + 1):
            out[j] += math.comb(k, j) * d ** (k - j) * coef[k]
    return out


class PiecewisePoly:
    """Piecewise polynomial on ``[0, period]`` with array-valued coefficients.

    Parameters
    ----------
    breakpoints : array_like, shape (m + 1,)
        Strictly increasing, ``breakpoints[0] == 0``; the last entry is the
        period.
    coefficients : array_like, shape (m, degree + 1, *value_shape)
        ``coefficients[i, k]`` multiplies ``(t - breakpoints[i])**k`` on cell
        ``i``.  The local variable keeps evaluation well conditioned.
    """

    def __init__(self, breakpoints, coefficients):
        bp = np.array(breakpoints, dtype=float)
        coef = np.array(coefficients, dtype=float)
        if bp.ndim != 1 or bp.size < 2:
            raise ValueError("need at least two breakpoints")
        if bp[0] != 0.0:
            raise ValueError("first breakpoint must be 0")
        if not np.all(np.diff(bp) > 0) or not np.all(np.isfinite(bp)):
            raise ValueError("breakpoints must be finite and strictly increasing")
        if coef.ndim < 2 or coef.shape[0] != bp.size - 1:
            raise ValueError(
                f"coefficients must have shape (cells={bp.size - 1}, degree+1, ...), got {coef.shape}"
            )
        if not 1 <= coef.shape[1] <= MAX_DEGREE + 1:
            raise ValueError(f"polynomial degree must be between 0 and {MAX_DEGREE}")
        if not np.all(np.isfinite(coef)):
            raise ValueError("coefficients must be finite")
        bp.setflags(write=False)
        coef.setflags(write=False)
        self.breakpoints = bp
        self.coefficients = coef
        # exact antiderivative coefficients, one degree higher
        k = np.arange(1, coef.shape[1] + 1, dtype=float)
        anti = np.zeros((coef.shape[0], coef.shape[1] + 1) + coef.shape[2:])
        anti[:, 1:] = coef / k.reshape((1, -1) + (1,) * (coef.ndim - 2))
        self._anti = anti
        self.cell_integrals = self.integral_local(np.arange(self.n_cells), np.diff(bp))

    @property
    def period(self) -> float:
        return float(self.breakpoints[-1])

    @property
    def n_cells(self) -> int:
        return self.breakpoints.size - 1

    @property
    def degree(self) -> int:
        return self.coefficients.shape[1] - 1

    @property
    def value_shape(self) -> tuple:
        return self.coefficients.shape[2:]

    @classmethod
    def constant(cls, value, period: float = 1.0) -> "PiecewisePoly":
        value = np.asarray(value, dtype=float)
        return cls([0.0, period], value[None, None])

    @classmethod
    def fit(
        cls,
        func: Callable[[float], np.ndarray],
        period: float = 1.0,
        cells: int = 16,
        degree: int = MAX_DEGREE,
        zero_mean: bool = False,
    ) -> "PiecewisePoly":
        """Interpolate ``func`` at Chebyshev points of every cell.

        With ``zero_mean`` the constant coefficients are shifted so that the
        density integrates to exactly zero over one period (periodic
        antiderivative).
        """
        bp = np.linspace(0.0, period, cells + 1)
        width = period / cells
        nodes = 0.5 * width * (1 - np.cos((2 * np.arange(degree + 1) + 1) * np.pi / (2 * degree + 2)))
        vander = np.vander(nodes, degree + 1, increasing=True)
        coefs = []
        for a in bp[:-1]:
            vals = np.array([np.asarray(func(a + u), dtype=float) for u in nodes])
            flat = vals.reshape(degree + 1, -1)
            c = np.linalg.solve(vander, flat).reshape(vals.shape)
            coefs.append(c)
        coef = np.array(coefs)
        if zero_mean:
            total = cls(bp, coef).cell_integrals.sum(axis=0)
            coef[:, 0] -= total / period
        return cls(bp, coef)

    def refine(self, points: Iterable[float]) -> "PiecewisePoly":
        """Return the same function on a mesh that also contains ``points``."""
        bp = list(self.breakpoints)
        coef = [c for c in self.coefficients]
        tol = snap_tol(self.period, self.period)
        for p in sorted(set(float(p) for p in points)):
            if p < 0 or p > self.period:
                raise ValueError(f"point {p} outside [0, {self.period}]")
            i = int(np.searchsorted(bp, p, side="right")) - 1
            i = min(i, len(bp) - 2)
            if abs(p - bp[i]) <= tol or abs(bp[i + 1] - p) <= tol:
                continue
            shifted = _taylor_shift(coef[i], p - bp[i])
            bp.insert(i + 1, p)
            coef.insert(i + 1, shifted)
        return PiecewisePoly(bp, np.array(coef))

    def locate(self, r):
        """Cell index (right-continuous) and local offset for ``r`` in ``[0, period]``."""
        r = np.asarray(r, dtype=float)
        idx = np.clip(np.searchsorted(self.breakpoints, r, side="right") - 1, 0, self.n_cells - 1)
        return idx, r - self.breakpoints[idx]

    def eval_local(self, cell, u) -> np.ndarray:
        """Evaluate cell polynomials at local offsets (vectorised over both)."""
        cell = np.asarray(cell)
        u = np.asarray(u, dtype=float)
        cell, u = np.broadcast_arrays(cell, u)
        powers = u[..., None] ** np.arange(self.degree + 1)
        return _contract(powers, self.coefficients[cell])

    def integral_local(self, cell, u) -> np.ndarray:
        """``int_0^u`` of the cell polynomial, exactly."""
        cell = np.asarray(cell)
        u = np.asarray(u, dtype=float)
        cell, u = np.broadcast_arrays(cell, u)
        powers = u[..., None] ** np.arange(self.degree + 2)
        return _contract(powers, self._anti[cell])

    def __call__(self, t) -> np.ndarray:
        """Evaluate the periodic extension; at breakpoints the right cell is used."""
        t = np.asarray(t, dtype=float)
        r = np.mod(t, self.period)
        cell, u = self.locate(r)
        return self.eval_local(cell, u)


def _contract(powers: np.ndarray, coef: np.ndarray) -> np.ndarray:
    # powers: (..., K); coef: (..., K, *value_shape)
    lead = powers.ndim - 1
    extra = coef.ndim - powers.ndim
    p = powers.reshape(powers.shape + (1,) * extra)
    return (p * coef).sum(axis=lead)


@dataclass(frozen=True, eq=False)
class JumpEvent:
    """Jump of a regulated function at ``time``.

    ``pre`` is the left jump ``F(t) - F(t-)`` and ``post`` the right jump
    ``F(t+) - F(t)``.
    """

    time: float
    pre: np.ndarray
    post: np.ndarray

    def __post_init__(self):
        pre = np.array(self.pre, dtype=float)
        post = np.array(self.post, dtype=float)
        if pre.shape != post.shape:
            raise DimensionError("pre and post jumps must have the same shape")
        if not (np.all(np.isfinite(pre)) and np.all(np.isfinite(post)) and math.isfinite(self.time)):
            raise ValueError("jump data must be finite")
        pre.setflags(write=False)
        post.setflags(write=False)
        object.__setattr__(self, "time", float(self.time))
        object.__setattr__(self, "pre", pre)
        object.__setattr__(self, "post", post)


class _PiecewiseBV:
    """Common machinery for density-plus-jumps functions."""

    _value_ndim: int = 0

    def __init__(self, density: PiecewisePoly, jumps: Sequence[JumpEvent] = (), base=None):
        shape = density.value_shape
        if len(shape) != self._value_ndim:
            raise DimensionError(f"density values must be {self._value_ndim}-dimensional, got shape {shape}")
        period = density.period
        jumps = sorted(jumps, key=lambda j: j.time)
        times = [j.time for j in jumps]
        for j in jumps:
            if j.pre.shape != shape:
                raise DimensionError(f"jump at {j.time} has shape {j.pre.shape}, expected {shape}")
            if not 0.0 <= j.time < period:
                raise ValueError(f"jump time {j.time} outside [0, {period})")
        if len(set(times)) != len(times) or np.any(np.diff(times) <= snap_tol(period, period)):
            raise ValueError("jump times must be distinct")
        self.density = density.refine(times)
        self.jumps = tuple(jumps)
        self.base = np.zeros(shape) if base is None else np.array(base, dtype=float)
        if self.base.shape != shape:
            raise DimensionError(f"base value has shape {self.base.shape}, expected {shape}")
        self.base.setflags(write=False)

        bp = self.density.breakpoints
        m = bp.size - 1
        pre = np.zeros((m,) + shape)
        post = np.zeros((m,) + shape)
        is_jump = np.zeros(m, dtype=bool)
        for j in jumps:
            i = int(np.argmin(np.abs(bp[:-1] - j.time)))
            pre[i], post[i], is_jump[i] = j.pre, j.post, True
        left = np.zeros((m + 1,) + shape)
        point = np.zeros((m + 1,) + shape)
        right = np.zeros((m + 1,) + shape)
        point[0] = self.base
        left[0] = self.base - pre[0]
        right[0] = self.base + post[0]
        for i in range(m):
            left[i + 1] = right[i] + self.density.cell_integrals[i]
            k = (i + 1) % m
            point[i + 1] = left[i + 1] + pre[k]
            right[i + 1] = point[i + 1] + post[k]
        self._pre, self._post, self._is_jump = pre, post, is_jump
        self._left, self._point, self._right = left, point, right
        self.increment = point[m] - point[0]

    # -- basic attributes ---------------------------------------------------
    @property
    def period(self) -> float:
        return self.density.period

    @property
    def value_shape(self) -> tuple:
        return self.density.value_shape

    @property
    def dimension(self) -> int:
        return self.value_shape[0]

    @property
    def jump_times(self) -> np.ndarray:
        return np.array([j.time for j in self.jumps])

    # -- evaluation ---------------------------------------------------------
    def _reduce(self, t):
        t = np.asarray(t, dtype=float)
        if not np.all(np.isfinite(t)):
            raise ValueError("evaluation time must be finite")
        w = self.period
        k = np.floor(t / w)
        r = t - k * w
        tol = snap_tol(t, w)
        wrap = r >= w - tol
        k = np.where(wrap, k + 1, k)
        r = np.where(wrap, 0.0, r)
        bp = self.density.breakpoints
        cell = np.clip(np.searchsorted(bp, r, side="right") - 1, 0, bp.size - 2)
        at_next = np.abs(bp[cell + 1] - r) <= tol
        cell = np.where(at_next, cell + 1, cell)
        on_bp = at_next | (np.abs(r - bp[cell]) <= tol)
        return k, r, cell, on_bp

    def _evaluate(self, t, which):
        k, r, cell, on_bp = self._reduce(t)
        u = r - self.density.breakpoints[cell]
        inner_cell = np.minimum(cell, self.density.n_cells - 1)
        smooth = self._right[inner_cell] + self.density.integral_local(inner_cell, np.where(on_bp, 0.0, u))
        table = {"left": self._left, "point": self._point, "right": self._right}[which]
        at_bp = table[cell]
        mask = on_bp.reshape(on_bp.shape + (1,) * self._value_ndim)
        val = np.where(mask, at_bp, smooth)
        return val + k.reshape(k.shape + (1,) * self._value_ndim) * self.increment

    def value(self, t) -> np.ndarray:
        """Point value ``F(t)`` (vectorised)."""
        return self._evaluate(t, "point")

    def left(self, t) -> np.ndarray:
        """Left limit ``F(t-)``."""
        return self._evaluate(t, "left")

    def right(self, t) -> np.ndarray:
        """Right limit ``F(t+)``."""
        return self._evaluate(t, "right")

    __call__ = value

    def jump_at(self, t: float):
        """``(pre, post)`` jumps at ``t``; zeros away from jump instants."""
        _, _, cell, on_bp = self._reduce(t)
        cell = int(cell) % self.density.n_cells
        if bool(on_bp) and self._is_jump[cell]:
            return self._pre[cell].copy(), self._post[cell].copy()
        z = np.zeros(self.value_shape)
        return z, z.copy()

    def density_at(self, t) -> np.ndarray:
        """Density of the absolutely continuous part (right cell at breakpoints)."""
        return self.density(t)

    # -- interval queries ---------------------------------------------------
    def _translates(self, points: np.ndarray, a: float, b: float) -> np.ndarray:
        w = self.period
        tol = snap_tol([a, b], w)
        out = []
        for k in range(int(math.floor((a - tol) / w)) - 1, int(math.floor((b + tol) / w)) + 1):
            for p in points:
                q = p + k * w
                if a - tol <= q <= b + tol:
                    out.append(min(max(q, a), b))
        return np.unique(np.array(out, dtype=float))

    def mesh(self, a: float, b: float) -> np.ndarray:
        """Breakpoints (incl. jump instants) in ``[a, b]`` together with ``a`` and ``b``."""
        pts = self._translates(self.density.breakpoints[:-1], a, b)
        return _merge_points([a, b], pts, tol=snap_tol([a, b], self.period))

    def jumps_in(self, a: float, b: float):
        """``(time, pre, post)`` for every jump instant in ``[a, b]``."""
        out = []
        if not self.jumps:
            return out
        w = self.period
        tol = snap_tol([a, b], w)
        for k in range(int(math.floor((a - tol) / w)) - 1, int(math.floor((b + tol) / w)) + 1):
            for j in self.jumps:
                q = j.time + k * w
                if a - tol <= q <= b + tol:
                    out.append((min(max(q, a), b), j.pre, j.post))
        out.sort(key=lambda e: e[0])
        return out

    def breakpoints(self, a: float, b: float) -> np.ndarray:
        """Points where the function may be discontinuous or change formula."""
        return self.mesh(a, b)


def _merge_points(*arrays, tol: float = 0.0) -> np.ndarray:
    pts = np.sort(np.concatenate([np.atleast_1d(np.asarray(x, dtype=float)) for x in arrays if np.size(x)]))
    if pts.size == 0:
        return pts
    keep = np.concatenate([[True], np.diff(pts) > tol])
    return pts[keep]


class BVMatrixFunction(_PiecewiseBV):
    """Matrix-valued integrator ``A`` with ``A(t + omega) - A(t) = C``.

    Parameters
    ----------
    density : PiecewisePoly
        Derivative of the absolutely continuous part, values of shape (n, n).
    jumps : sequence of JumpEvent
        Jumps in ``[0, omega)``; their instants are inserted into the mesh.
    base : array_like, optional
        ``A(0)``; defaults to the zero matrix.  Only differences of ``A``
        enter any equation, so the base value never changes a result.
    """

    _value_ndim = 2

    def __init__(self, density: PiecewisePoly, jumps: Sequence[JumpEvent] = (), base=None):
        super().__init__(density, jumps, base)
        n, m = self.value_shape
        if n != m:
            raise DimensionError(f"integrator values must be square, got {self.value_shape}")

    @classmethod
    def constant_density(cls, matrix, period: float = 1.0, jumps: Sequence[JumpEvent] = ()):
        matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        return cls(PiecewisePoly.constant(matrix, period), jumps)

    @property
    def periodic_increment(self) -> np.ndarray:
        """The constant ``C = A(t + omega) - A(t)``."""
        return self.increment


class RegulatedVectorFunction(_PiecewiseBV):
    """Vector forcing ``f = f(0) + int density + jumps``.

    ``periodic`` tells whether ``f`` is omega-periodic, i.e. its increment
    over a period vanishes.  Non-periodic instances still generate periodic
    dynamics because only differences ``f(t) - f(s)`` enter the equation.
    """

    _value_ndim = 1

    @classmethod
    def constant(cls, value, period: float = 1.0) -> "RegulatedVectorFunction":
        value = np.atleast_1d(np.asarray(value, dtype=float))
        return cls(PiecewisePoly.constant(np.zeros_like(value), period), (), base=value)

    @classmethod
    def zero(cls, n: int, period: float = 1.0) -> "RegulatedVectorFunction":
        return cls.constant(np.zeros(n), period)

    @property
    def base_value(self) -> np.ndarray:
        return self.base

    @property
    def periodic(self) -> bool:
        scale = 1.0 + float(np.max(np.abs(self._point)))
        return bool(np.all(np.abs(self.increment) <= 1e-12 * scale))
