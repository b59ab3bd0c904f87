"""Weighted Lebesgue and Sobolev norms over grid-sampled functions.

A :class:`SampledFunction` lives on ``[0, T]``.  Integrals over ``[0, inf)``
need values beyond ``T``; these come from an analytic extension when one is
attached, otherwise from a per-component exponential trend fitted over the
last tenth of the grid.  The latter is a heuristic and every result built on
it is flagged uncertified.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .errors import DimensionMismatch, MissingDerivative
from .quadrature import QuadratureResult, integrate_finite, integrate_semi_infinite
from .weights import WeightTriple

TAIL_FRACTION = 0.1


def _as_values(values, n_nodes: int) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    if v.ndim == 1:
        v = v[:, None]
    if v.ndim != 2 or v.shape[0] != n_nodes:
        raise DimensionMismatch(f"expected {n_nodes} rows of samples, got shape {v.shape}")
    return v


def _vector_call(fn: Callable, t: np.ndarray, n: int) -> np.ndarray:
    """Evaluate a scalar-time, vector-valued callable at many times -> (k, n)."""
    rows = [np.atleast_1d(np.asarray(fn(float(s)), dtype=float)) for s in t]
    out = np.array(rows, dtype=float).reshape(len(rows), -1)
    if out.shape[1] != n:
        raise DimensionMismatch(f"extension returns dimension {out.shape[1]}, expected {n}")
    return out


def exponential_trend(t: np.ndarray, v: np.ndarray, fraction: float = TAIL_FRACTION):
    """Fit ``v(t) ~ v_end * exp(kappa (t - t_end))`` per column over the tail window.

    Returns ``(v_end, kappa, ok)``; a column that changes sign or vanishes in
    the window gets ``kappa = -inf`` (zero extension) and ``ok = False``
    unless it is identically zero there.
    """
    t = np.asarray(t, dtype=float)
    v = np.asarray(v, dtype=float)
    if v.ndim == 1:
        v = v[:, None]
    cut = t[0] + (1.0 - fraction) * (t[-1] - t[0])
    w = t >= cut
    if w.sum() < 3:
        w = np.zeros_like(t, dtype=bool)
        w[-3:] = True
    kappa = np.empty(v.shape[1])
    ok = np.ones(v.shape[1], dtype=bool)
    for j in range(v.shape[1]):
        seg = v[w, j]
        if np.all(seg == 0.0):
            kappa[j] = -math.inf
        elif np.all(seg > 0) or np.all(seg < 0):
            kappa[j] = np.polyfit(t[w], np.log(np.abs(seg)), 1)[0]
        else:
            kappa[j] = -math.inf
            ok[j] = False
    return v[-1].copy(), kappa, ok


@dataclass(frozen=True)
class SampledFunction:
    """Samples of a function ``R_+ -> R^n`` on a grid starting at 0.

    Parameters
    ----------
    grid : array_like, shape (N,)
        Strictly increasing times, ``grid[0] == 0``, ``N >= 2``.
    values : array_like, shape (N,) or (N, n)
    derivative_values : array_like, optional
        Samples of the time derivative; enables cubic Hermite interpolation
        and the Sobolev norm.
    extension : callable, optional
        ``t -> R^n`` valid for all ``t >= 0`` (typically a closed form).  When
        present it is used everywhere and the samples only fix the grid.
    derivative_extension : callable, optional
        Same for the derivative.
    vectorized : bool
        The extensions accept an array of times and return shape ``(k, n)``.
    """

    grid: np.ndarray
    values: np.ndarray
    derivative_values: Optional[np.ndarray] = None
    extension: Optional[Callable] = field(default=None, compare=False, repr=False)
    derivative_extension: Optional[Callable] = field(default=None, compare=False, repr=False)
    vectorized: bool = False

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        if grid.ndim != 1 or grid.size < 2:
            raise ValueError("grid needs at least two nodes")
        if grid[0] != 0.0 or np.any(np.diff(grid) <= 0):
            raise ValueError("grid must start at 0 and increase strictly")
        values = _as_values(self.values, grid.size)
        if not np.all(np.isfinite(values)):
            raise ValueError("sample values must be finite")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)
        if self.derivative_values is not None:
            dv = _as_values(self.derivative_values, grid.size)
            if dv.shape != values.shape:
                raise DimensionMismatch("derivative samples must match the value samples")
            object.__setattr__(self, "derivative_values", dv)

    @classmethod
    def from_callable(cls, fn: Callable, T: float, n_nodes: int = 401,
                      derivative: Optional[Callable] = None, vectorized: bool = False) -> "SampledFunction":
        """Sample ``fn`` on ``linspace(0, T, n_nodes)`` and keep it as extension."""
        grid = np.linspace(0.0, T, n_nodes)
        if vectorized:
            vals = _as_values(fn(grid), n_nodes)
            dvals = None if derivative is None else _as_values(derivative(grid), n_nodes)
        else:
            probe = np.atleast_1d(np.asarray(fn(0.0), dtype=float))
            vals = _vector_call(fn, grid, probe.size)
            dvals = None if derivative is None else _vector_call(derivative, grid, probe.size)
        return cls(grid, vals, dvals, extension=fn, derivative_extension=derivative, vectorized=vectorized)

    @property
    def horizon_T(self) -> float:
        return float(self.grid[-1])

    @property
    def dim(self) -> int:
        return int(self.values.shape[1])

    @property
    def analytic_tail(self) -> bool:
        return self.extension is not None

    @cached_property
    def _interp(self):
        if self.derivative_values is not None:
            return CubicHermiteSpline(self.grid, self.values, self.derivative_values, axis=0)
        return None

    @cached_property
    def _trend(self):
        return exponential_trend(self.grid, self.values)

    def scaled(self, alpha: float) -> "SampledFunction":
        ext = None if self.extension is None else (lambda t, f=self.extension: alpha * np.asarray(f(t)))
        dext = None if self.derivative_extension is None else (
            lambda t, f=self.derivative_extension: alpha * np.asarray(f(t)))
        dv = None if self.derivative_values is None else alpha * self.derivative_values
        return SampledFunction(self.grid, alpha * self.values, dv, ext, dext, self.vectorized)

    def derivative_function(self) -> "SampledFunction":
        if self.derivative_values is None:
            raise MissingDerivative("no derivative samples attached")
        return SampledFunction(self.grid, self.derivative_values, extension=self.derivative_extension,
                               vectorized=self.vectorized)

    def __call__(self, t) -> np.ndarray:
        """Values at ``t``; the result has shape ``t.shape + (n,)``."""
        shape = np.shape(t)
        t = np.asarray(t, dtype=float).ravel()
        out = np.empty((t.size, self.dim))
        if self.extension is not None:
            if self.vectorized:
                out[:] = np.asarray(self.extension(t), dtype=float).reshape(t.size, self.dim)
            else:
                out[:] = _vector_call(self.extension, t, self.dim)
            return out.reshape(shape + (self.dim,))
        inside = t <= self.grid[-1]
        if inside.any():
            ti = t[inside]
            if self._interp is not None:
                out[inside] = self._interp(ti)
            else:
                for j in range(self.dim):
                    out[inside, j] = np.interp(ti, self.grid, self.values[:, j])
        if (~inside).any():
            to = t[~inside]
            v_end, kappa, _ = self._trend
            with np.errstate(over="ignore", invalid="ignore"):
                grow = np.exp(np.outer(to - self.grid[-1], kappa))
            out[~inside] = np.where(np.isfinite(kappa), v_end * grow, 0.0)
        return out.reshape(shape + (self.dim,))


def _finite_plus_tail(g: Callable, funcs, tol: float, tail: Optional[Callable]) -> QuadratureResult:
    T = max(f.horizon_T for f in funcs)
    nodes = np.unique(np.concatenate([f.grid for f in funcs]))
    head = integrate_finite(g, 0.0, T, tol / 2, points=nodes)
    rest = integrate_semi_infinite(g, tol / 2, tail, a=T)
    certified = rest.certified and all(f.analytic_tail for f in funcs)
    if tail is not None:
        certified = rest.certified
    return QuadratureResult(head.value + rest.value, head.abs_error_estimate + rest.abs_error_estimate,
                            rest.truncation_T, rest.tail_bound, head.evaluations + rest.evaluations,
                            certified)


def weighted_Lp_norm(x: SampledFunction, triple: WeightTriple, tail: Optional[Callable] = None,
                     tol: float = 1e-11, p: Optional[float] = None) -> QuadratureResult:
    """``(int_0^inf ||x(t)||^p nu(t) dt)^(1/p)``.

    Parameters
    ----------
    x : SampledFunction
    triple : WeightTriple
        Supplies ``nu`` and the default exponent.
    tail : callable, optional
        ``T -> bound`` on the integral of ``||x||^p nu`` beyond ``T``.
    tol : float
        Absolute tolerance on the integral (before the root is taken).
    p : float, optional
        Exponent override, used for the conjugate-space norm.

    Raises
    ------
    Divergent
        If the integrand does not settle on the extension.
    """
    p = triple.p if p is None else float(p)
    nu = triple.nu

    def g(t):
        v = x(t)
        return np.linalg.norm(v, axis=-1) ** p * nu(t)

    r = _finite_plus_tail(g, [x], tol, tail)
    integral = max(r.value, 0.0)
    norm = integral ** (1.0 / p)
    if integral > 0:
        scale = integral ** (1.0 / p - 1.0) / p
        err, tb = r.abs_error_estimate * scale, r.tail_bound * scale
    else:
        err, tb = r.abs_error_estimate ** (1.0 / p), r.tail_bound ** (1.0 / p)
    return QuadratureResult(norm, err, r.truncation_T, tb, r.evaluations, r.certified)


def weighted_W1p_norm(x: SampledFunction, triple: WeightTriple, tail: Optional[Callable] = None) -> float:
    """``||x||_{L_p(nu)} + ||x'||_{L_p(nu)}``; needs derivative samples."""
    dx = x.derivative_function()
    return weighted_Lp_norm(x, triple, tail).value + weighted_Lp_norm(dx, triple).value


def _check_dims(x: SampledFunction, y: SampledFunction):
    if x.dim != y.dim:
        raise DimensionMismatch(f"dimensions differ: {x.dim} vs {y.dim}")


def duality_pairing(x: SampledFunction, y: SampledFunction, triple: WeightTriple,
                    tail: Optional[Callable] = None, tol: float = 1e-11) -> QuadratureResult:
    """``int_0^inf <x(t), y(t)> nu(t) dt``."""
    _check_dims(x, y)
    nu = triple.nu

    def g(t):
        return np.sum(x(t) * y(t), axis=-1) * nu(t)

    return _finite_plus_tail(g, [x, y], tol, tail)


class HolderCheck(NamedTuple):
    holds: bool
    margin: float
    lhs: float
    rhs: float
    error_budget: float


def holder_check(x: SampledFunction, y: SampledFunction, triple: WeightTriple,
                 tol: float = 1e-11) -> HolderCheck:
    """Compare ``|| <x, y> ||_{L_1(nu)}`` with ``||x||_{L_p(nu)} ||y||_{L_q(nu)}``."""
    _check_dims(x, y)
    nu = triple.nu

    def g(t):
        return np.abs(np.sum(x(t) * y(t), axis=-1)) * nu(t)

    lhs = _finite_plus_tail(g, [x, y], tol, None)
    nx = weighted_Lp_norm(x, triple, tol=tol)
    ny = weighted_Lp_norm(y, triple, tol=tol, p=triple.q)
    rhs = nx.value * ny.value
    budget = (lhs.total_error + nx.value * ny.total_error + ny.value * nx.total_error
              + 1e-12 * max(rhs, lhs.value))
    margin = rhs - lhs.value
    return HolderCheck(bool(margin >= -budget), float(margin), lhs.value, rhs, float(budget))
