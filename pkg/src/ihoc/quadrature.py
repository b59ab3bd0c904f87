"""Adaptive quadrature on finite intervals and on ``[a, inf)``.

Finite intervals use globally adaptive Gauss-Kronrod (7/15) subdivision.
Half-lines are cut into doubling panels ``[a+L, a+2L]``; the horizon stops
growing once two successive doublings move the running estimate by less than
``tol`` (a heuristic, uncertified tail) or once a user supplied tail
certifier bounds the discarded part (certified tail).  An integrable
singularity at the left end point is handled by geometrically graded panels
towards it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

import numpy as np

from .errors import BudgetExceeded, Divergent, NonFinite

DEFAULT_TOL = 1e-9
DEFAULT_MAX_EVALS = 1_000_000
DEFAULT_HORIZON_CAP = 2.0**16
SINGULAR_WIDTH = 1e-3

_EPS = np.finfo(float).eps

# Kronrod abscissae on [0, 1] (descending) and weights; Gauss weights belong to
# the abscissae with odd index.
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG7 = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

_NODES = np.concatenate([-_XGK[:7], [0.0], _XGK[6::-1]])
_WK = np.concatenate([_WGK[:7], [_WGK[7]], _WGK[6::-1]])
_WG = np.zeros(15)
for _i, _w in zip((1, 3, 5), _WG7[:3]):
    _WG[_i] = _w
    _WG[14 - _i] = _w
_WG[7] = _WG7[3]


@dataclass(frozen=True)
class QuadratureResult:
    """Value of an integral together with its error budget.

    ``abs_error_estimate`` covers the integrated range ``[a, truncation_T]``;
    ``tail_bound`` covers what lies beyond it.  ``certified`` is false when
    the tail bound (or a graded start) rests on the doubling heuristic rather
    than on an analytic envelope.
    """

    value: float
    abs_error_estimate: float
    truncation_T: float
    tail_bound: float
    evaluations: int
    certified: bool = True

    @property
    def total_error(self) -> float:
        return self.abs_error_estimate + self.tail_bound


class _Integrand:
    """Counts evaluations, enforces the budget and vectorizes when possible."""

    def __init__(self, g: Callable, max_evals: float):
        self.g = g
        self.max_evals = max_evals
        self.count = 0
        self.vectorized: Optional[bool] = None

    def __call__(self, t: np.ndarray) -> np.ndarray:
        if self.count + t.size > self.max_evals:
            raise BudgetExceeded(f"evaluation cap {int(self.max_evals)} reached")
        self.count += t.size
        with np.errstate(all="ignore"):
            if self.vectorized is not False:
                try:
                    out = np.asarray(self.g(t), dtype=float)
                except Exception:
                    if self.vectorized:
                        raise
                    out = None
                if out is not None:
                    if out.shape == ():
                        out = np.full(t.shape, float(out))
                    if out.shape == t.shape:
                        self.vectorized = True
                        return out
                self.vectorized = False
            flat = [_scalar(self.g(float(s))) for s in t.ravel()]
        return np.asarray(flat, dtype=float).reshape(t.shape)

    def point(self, t: float) -> float:
        """Single evaluation that tolerates non-finite output and exceptions."""
        try:
            return float(self(np.array([t]))[0])
        except (ArithmeticError, ValueError):
            return math.nan


def _scalar(v) -> float:
    a = np.asarray(v, dtype=float)
    if a.size != 1:
        raise ValueError(f"integrand must be scalar-valued, got shape {a.shape}")
    return float(a.reshape(()))


def _gk_batch(fn: _Integrand, left: np.ndarray, right: np.ndarray):
    center = 0.5 * (left + right)
    half = 0.5 * (right - left)
    t = center[:, None] + half[:, None] * _NODES[None, :]
    y = fn(t)
    bad = ~np.isfinite(y)
    if bad.any():
        where = float(t[bad][0])
        raise NonFinite(f"integrand is not finite at t={where!r}", t=where)
    kron = half * (y @ _WK)
    gauss = half * (y @ _WG)
    resabs = np.abs(half) * (np.abs(y) @ _WK)
    floor = 50.0 * _EPS * resabs
    err = np.maximum(np.abs(kron - gauss), floor)
    return kron, err, floor


def _adaptive(fn: _Integrand, edges: np.ndarray, tol: float):
    left = np.asarray(edges[:-1], dtype=float)
    right = np.asarray(edges[1:], dtype=float)
    vals, errs, floors = _gk_batch(fn, left, right)
    while True:
        total = errs.sum()
        # below a few times the summed roundoff floor, splitting only chases noise
        if total <= max(tol, 4.0 * floors.sum()):
            break
        width = right - left
        scale = np.maximum(np.abs(left), np.abs(right))
        splittable = (errs > floors * 1.0001) & (width > 64 * _EPS * np.maximum(scale, 1e-300))
        if not splittable.any():
            break
        cand = np.flatnonzero(splittable)
        order = cand[np.argsort(-errs[cand], kind="stable")]
        cum = np.cumsum(errs[order])
        k = int(np.searchsorted(cum, 0.5 * min(cum[-1], total))) + 1
        pick = order[:k]
        mid = 0.5 * (left[pick] + right[pick])
        new_left = np.concatenate([left[pick], mid])
        new_right = np.concatenate([mid, right[pick]])
        nv, ne, nf = _gk_batch(fn, new_left, new_right)
        keep = np.ones(left.size, dtype=bool)
        keep[pick] = False
        left = np.concatenate([left[keep], new_left])
        right = np.concatenate([right[keep], new_right])
        vals = np.concatenate([vals[keep], nv])
        errs = np.concatenate([errs[keep], ne])
        floors = np.concatenate([floors[keep], nf])
    return float(vals.sum()), float(errs.sum())


def integrate_finite(
    g: Callable,
    a: float,
    b: float,
    tol: float = DEFAULT_TOL,
    *,
    points: Optional[Iterable[float]] = None,
    max_evals: float = DEFAULT_MAX_EVALS,
) -> QuadratureResult:
    """Integrate ``g`` over ``[a, b]`` to absolute accuracy ``tol``.

    Parameters
    ----------
    g : callable
        Real function of time.  Array input is tried first; scalar-only
        functions are detected and called point by point.
    a, b : float
        Interval end points, ``a <= b``.
    tol : float
        Requested absolute error.
    points : iterable of float, optional
        Initial break points (kinks, grid nodes) inside ``(a, b)``.
    max_evals : int
        Evaluation cap; :class:`BudgetExceeded` is raised when reached.
    """
    if not (a <= b):
        raise ValueError(f"need a <= b, got a={a}, b={b}")
    if not tol > 0:
        raise ValueError("tol must be positive")
    if a == b:
        return QuadratureResult(0.0, 0.0, float(b), 0.0, 0)
    fn = _Integrand(g, max_evals)
    edges = _edges(a, b, points)
    value, err = _adaptive(fn, edges, tol)
    return QuadratureResult(value, err, float(b), 0.0, fn.count)


def _edges(a: float, b: float, points) -> np.ndarray:
    if points is None:
        return np.array([a, b], dtype=float)
    inner = np.asarray(list(points), dtype=float)
    inner = inner[(inner > a) & (inner < b)]
    return np.unique(np.concatenate([[a, b], inner]))


def _aitken(seq: list[float]) -> list[float]:
    out = []
    for i in range(2, len(seq)):
        d1 = seq[i] - seq[i - 1]
        d0 = seq[i - 1] - seq[i - 2]
        den = d1 - d0
        if den == 0.0 or d1 * d0 <= 0.0:
            out.append(seq[i])
        else:
            out.append(seq[i] - d1 * d1 / den)
    return out


def _settled(seq: list[float], tol: float) -> bool:
    return len(seq) >= 3 and abs(seq[-1] - seq[-2]) < tol and abs(seq[-2] - seq[-3]) < tol


def _spread(seq: list[float]) -> float:
    return max(abs(seq[-1] - seq[-2]), abs(seq[-2] - seq[-3]))


def _graded_start(fn: _Integrand, a: float, width: float, tol: float):
    """Integrate over ``(a, a+width]`` when ``g`` blows up at ``a``.

    Panels ``[a+w/2^(j+1), a+w/2^j]`` contribute a sequence whose ratio tends
    to ``2^-(beta+1)`` for a ``t^beta`` singularity.  Partial sums are
    accelerated by iterated Aitken extrapolation; a ratio that stays at or
    above one flags divergence.
    """
    partial: list[float] = [0.0]
    err = 0.0
    last = 0.0
    rising = 0
    for j in range(1070):
        hi = a + width * 2.0**-j
        lo = a + width * 2.0 ** -(j + 1)
        if not lo > a:
            break
        try:
            v, e = _adaptive(fn, np.array([lo, hi]), tol / 64)
        except NonFinite as exc:
            if rising >= 2:
                raise Divergent("integrand not integrable at the left end point", t=lo) from exc
            raise
        err += e
        rising = rising + 1 if (j > 0 and last != 0.0 and v / last >= 1.0) else 0
        if rising >= 5 and j >= 8:
            raise Divergent("integrand not integrable at the left end point", t=lo)
        last = v
        partial.append(partial[-1] + v)
        if j < 4:
            continue
        if _settled(partial, tol):
            return partial[-1], err, _spread(partial)
        acc = _aitken(_aitken(partial))
        if _settled(acc, tol):
            return acc[-1], err, _spread(acc)
    raise Divergent("graded start did not stabilise", t=a)


def integrate_semi_infinite(
    g: Callable,
    tol: float = DEFAULT_TOL,
    tail_certifier: Optional[Callable[[float], float]] = None,
    *,
    a: float = 0.0,
    horizon_cap: float = DEFAULT_HORIZON_CAP,
    max_evals: float = DEFAULT_MAX_EVALS,
    singular_width: float = SINGULAR_WIDTH,
) -> QuadratureResult:
    """Integrate ``g`` over ``[a, inf)``.

    Parameters
    ----------
    g : callable
        Real function of time.
    tol : float
        Absolute tolerance for the finite part and for the horizon test.
    tail_certifier : callable, optional
        ``T -> bound`` on ``int_T^inf |g|``, e.g. the analytic integral of a
        decreasing envelope.  When given, the horizon is doubled until the
        bound drops below ``tol/2`` and the result is certified.
    a : float
        Left end point.
    horizon_cap : float
        Largest admissible ``(T - a) / max(1, |a|)`` before the integral is
        declared :class:`Divergent`; for ``a = 0`` this is ``T`` itself.

    Notes
    -----
    Without a certifier the doubling stops when either the raw partial sums
    or their twice (or thrice) Aitken-accelerated versions move by less than
    ``tol`` over two successive doublings.  The acceleration lets power-law tails such as
    ``(1+t)^-2`` settle well inside the horizon cap.  The last observed change
    is reported as ``tail_bound`` and the result is flagged uncertified.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    fn = _Integrand(g, max_evals)
    g_start = fn.point(a)
    value = 0.0
    err = 0.0
    certified = True
    start = a
    if not math.isfinite(g_start):
        s_val, s_err, s_unc = _graded_start(fn, a, singular_width, tol / 4)
        value += s_val
        err += s_err + s_unc
        certified = False
        start = a + singular_width

    if tail_certifier is not None:
        T = max(a + 1.0, start + 1.0)
        while tail_certifier(T) > tol / 2:
            T = a + 2.0 * (T - a)
            if (T - a) / max(1.0, abs(a)) > horizon_cap:
                raise Divergent("tail envelope does not fall below tol before the horizon cap", t=T)
        knots = [start]
        L = 1.0
        while a + L < T:
            if a + L > start:
                knots.append(a + L)
            L *= 2.0
        knots.append(T)
        v, e = _adaptive(fn, np.array(knots), tol / 2)
        return QuadratureResult(value + v, err + e, T, float(tail_certifier(T)), fn.count, certified)

    # Panels scale with |a| so that a tail integral starting far out sees
    # geometric panel ratios from the first doubling.
    lo = start
    first = max(1.0, abs(a))
    hi = a + first if start < a + first else a + 2.0 * (start - a)
    partial = [value]
    growth = 0
    g_lo = fn.point(lo)
    while True:
        try:
            v, e = _adaptive(fn, np.array([lo, hi]), tol / 32)
        except NonFinite as exc:
            if growth >= 1:
                raise Divergent("integrand grows without bound", t=hi) from exc
            raise
        err += e
        prev = partial[-1] - partial[-2] if len(partial) > 1 else 0.0
        partial.append(partial[-1] + v)
        g_hi = fn.point(hi)
        pointwise_up = math.isfinite(g_hi) and abs(g_hi) >= abs(g_lo) > 0.0
        if prev != 0.0 and v / prev >= 1.0 and pointwise_up and hi - a >= 8.0:
            growth += 1
        else:
            growth = 0
        if growth >= 3 or not math.isfinite(g_hi):
            raise Divergent("integrand does not decay", t=hi)
        if _settled(partial, tol):
            return QuadratureResult(partial[-1], err, hi, _spread(partial), fn.count, False)
        acc = _aitken(_aitken(partial))
        if len(partial) > 5 and _settled(acc, tol):
            return QuadratureResult(acc[-1], err, hi, _spread(acc), fn.count, False)
        acc = _aitken(acc)
        if len(partial) > 7 and _settled(acc, tol):
            return QuadratureResult(acc[-1], err, hi, _spread(acc), fn.count, False)
        if (hi - a) / first >= horizon_cap:
            raise Divergent(
                f"no stabilisation before horizon cap {horizon_cap:g}",
                partial=QuadratureResult(partial[-1], err, hi, math.inf, fn.count, False),
                t=hi,
            )
        lo, g_lo = hi, g_hi
        hi = a + 2.0 * (hi - a)


def exponential_tail(scale: float, rate: float) -> Callable[[float], float]:
    """Tail certifier for the envelope ``scale * exp(-rate * t)``, ``rate > 0``."""
    if not rate > 0:
        raise ValueError("rate must be positive")
    return lambda T: abs(scale) * math.exp(-rate * T) / rate


def power_tail(scale: float, power: float) -> Callable[[float], float]:
    """Tail certifier for the envelope ``scale * (1+t)^-power``, ``power > 1``."""
    if not power > 1:
        raise ValueError("power must exceed one")
    return lambda T: abs(scale) * (1.0 + T) ** (1.0 - power) / (power - 1.0)
