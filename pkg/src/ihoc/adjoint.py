"""Adjoint variables, the necessary conditions, and the stability probe.

The normal-form adjoint is computed from the representation

    p(t) = -Z(t) int_t^inf omega(s) Z(s)^{-1} f_x(s) ds,

with ``Z`` the fundamental matrix of ``z' = -phi_x^T z`` normalised at 0.
Since ``Z^{-1} = Y^T`` for the fundamental matrix ``Y`` of ``y' = phi_x y``,
no matrix is inverted.  The integral is accumulated backwards over the grid
in one pass; the part beyond the horizon comes from an exponential trend of
the integrand (uncertified) or a caller-supplied envelope.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .errors import BlowUp, Divergent, IhocError
from .problem import ControlProblem, H_u, SetKind, Trajectory, pontryagin_H
from .quadrature import QuadratureResult, integrate_finite, integrate_semi_infinite
from .spaces import SampledFunction, exponential_trend
from .verdicts import (Condition, ConditionReport, Verdict, acceptable, decay_verdict, jsonable,
                       worst)

FM_CAP = 1e100
INVARIANT_FALLBACK = 1e-6
RESIDUAL_TOL = 1e-5
VI_TOL = 1e-6
N_RANDOM_DIRECTIONS = 32

_GL15 = np.polynomial.legendre.leggauss(15)
_GL7 = np.polynomial.legendre.leggauss(7)


# --------------------------------------------------------------------------
# fundamental matrices


@dataclass(frozen=True)
class FundamentalMatrices:
    """``Y`` and ``Z`` on a grid, with dense evaluators.

    ``invariant_error`` is ``max |Y^T Z - I|`` over the grid and
    ``conditioning`` is ``max ||Y|| ||Z||``.
    """

    grid: np.ndarray
    Y: np.ndarray
    Z: np.ndarray
    invariant_error: float
    conditioning: float
    use_transpose: bool = True
    _dense: Callable = field(default=None, compare=False, repr=False)

    @property
    def n(self) -> int:
        return int(self.Y.shape[1])

    @property
    def horizon(self) -> float:
        return float(self.grid[-1])

    def _eval(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any(t < 0) or np.any(t > self.horizon * (1 + 1e-12)):
            raise ValueError("time outside the integrated range")
        w = self._dense(np.minimum(t, self.horizon))
        n = self.n
        Y = w[: n * n].T.reshape(-1, n, n)
        Z = w[n * n:].T.reshape(-1, n, n)
        return Y, Z

    def Y_at(self, t) -> np.ndarray:
        Y, _ = self._eval(t)
        return Y[0] if np.ndim(t) == 0 else Y

    def Z_at(self, t) -> np.ndarray:
        _, Z = self._eval(t)
        return Z[0] if np.ndim(t) == 0 else Z

    def z_inverse_at(self, t) -> np.ndarray:
        """``Z(t)^{-1}``, as ``Y(t)^T`` unless the invariant degraded."""
        Y, Z = self._eval(t)
        out = np.transpose(Y, (0, 2, 1)) if self.use_transpose else np.linalg.inv(Z)
        return out[0] if np.ndim(t) == 0 else out


def fundamental_matrices(prob: ControlProblem, reference: Trajectory, T: Optional[float] = None,
                         tol: float = 1e-11, cap: float = FM_CAP) -> FundamentalMatrices:
    """Integrate ``Y' = A Y`` and ``Z' = -A^T Z`` with ``A = phi_x`` along the reference.

    Raises
    ------
    BlowUp
        When an entry exceeds ``cap``; the message reports the conditioning
        reached.
    """
    T = reference.horizon if T is None else float(T)
    if T > reference.horizon * (1 + 1e-12) and not reference.closed_form:
        raise ValueError("reference does not reach the requested horizon")
    n = prob.n
    eye = np.eye(n)

    def rhs(t, w):
        A = prob.dyn_x(t, reference.x_at(t), reference.u_at(t))
        Y = w[: n * n].reshape(n, n)
        Z = w[n * n:].reshape(n, n)
        return np.concatenate([(A @ Y).ravel(), (-A.T @ Z).ravel()])

    def big(t, w):
        return np.max(np.abs(w)) - cap

    big.terminal = True
    big.direction = 1

    knots = [0.0] + sorted(j for j in reference.jumps if 0.0 < j < T) + [T]
    w0 = np.concatenate([eye.ravel(), eye.ravel()])
    pieces = []
    for a, b in zip(knots[:-1], knots[1:]):
        sol = solve_ivp(rhs, (a, b), w0, method="DOP853", rtol=tol, atol=1e-300,
                        dense_output=True, events=big)
        if sol.status == -1:
            raise IhocError(f"fundamental matrix integration failed: {sol.message}")
        pieces.append((a, float(sol.t[-1]), sol.sol))
        if sol.status == 1:
            raise BlowUp(f"fundamental matrix entries reached {cap:g} at t={sol.t[-1]:.6g}",
                         float(sol.t[-1]))
        w0 = sol.y[:, -1]

    def dense(t):
        t = np.atleast_1d(t)
        out = np.empty((2 * n * n, t.size))
        for a, b, s in pieces:
            sel = (t >= a) & (t <= b)
            if sel.any():
                out[:, sel] = s(t[sel])
        return out

    grid = np.unique(np.concatenate([reference.grid[reference.grid <= T], np.linspace(0.0, T, 401)]))
    w = dense(grid)
    Y = w[: n * n].T.reshape(-1, n, n)
    Z = w[n * n:].T.reshape(-1, n, n)
    Y[0] = eye
    Z[0] = eye
    inv_err = float(np.max(np.abs(np.einsum("kji,kjl->kil", Y, Z) - eye)))
    cond = float(np.max(np.linalg.norm(Y, 2, axis=(1, 2)) * np.linalg.norm(Z, 2, axis=(1, 2))))
    use_t = inv_err <= INVARIANT_FALLBACK
    if not use_t:
        warnings.warn(f"Z^-1 = Y^T holds only to {inv_err:.2e}; falling back to LU inversion",
                      RuntimeWarning, stacklevel=2)
    return FundamentalMatrices(grid, Y, Z, inv_err, cond, use_t, dense)


# --------------------------------------------------------------------------
# adjoint solutions


@dataclass(frozen=True)
class AdjointSolution:
    """Multiplier ``lambda0`` and adjoint ``p`` on a grid.

    ``y_factor`` is ``p / nu``.  ``p_fn`` evaluates ``p`` between nodes
    (``None`` for bare samples).
    """

    lambda0: float
    grid: np.ndarray
    p: np.ndarray
    y_factor: np.ndarray
    normal: bool
    p_fn: Optional[Callable] = field(default=None, compare=False, repr=False)
    certified: bool = False
    tail_bound: float = 0.0
    label: str = ""
    degenerate: bool = False

    def __post_init__(self):
        if self.lambda0 < 0:
            raise ValueError("lambda0 must be non-negative")
        if self.lambda0 == 0 and not np.any(self.p) and not self.degenerate:
            raise ValueError("lambda0 and p vanish together; flag the solution as degenerate")

    @property
    def horizon(self) -> float:
        return float(self.grid[-1])

    def p_at(self, t: float) -> np.ndarray:
        if self.p_fn is not None:
            return np.atleast_1d(np.asarray(self.p_fn(float(t)), dtype=float))
        return np.array([np.interp(t, self.grid, self.p[:, j]) for j in range(self.p.shape[1])])

    @classmethod
    def from_function(cls, p_fn: Callable, grid, lambda0: float, prob: ControlProblem,
                      normal: bool = False, label: str = "", degenerate: bool = False) -> "AdjointSolution":
        grid = np.asarray(grid, dtype=float)
        p = np.array([np.atleast_1d(np.asarray(p_fn(float(t)), dtype=float)) for t in grid])
        return cls(float(lambda0), grid, p, _y_factor(prob, grid, p), normal, p_fn, True, 0.0,
                   label, degenerate)


def _y_factor(prob: ControlProblem, grid: np.ndarray, p: np.ndarray) -> np.ndarray:
    lognu = np.asarray(prob.triple.nu.log(grid), dtype=float)
    with np.errstate(over="ignore"):
        return p * np.exp(-lognu)[:, None]


def _omega_times(omega_t: np.ndarray, v: np.ndarray) -> np.ndarray:
    """``omega * v`` with ``0 * inf`` read as 0 (integrand free of the state)."""
    with np.errstate(invalid="ignore"):
        out = omega_t[:, None] * v
    return np.where(v == 0.0, 0.0, out)


def adjoint_by_representation(prob: ControlProblem, reference: Trajectory, T: Optional[float] = None,
                              tol: float = 1e-10, fm: Optional[FundamentalMatrices] = None,
                              envelope: Optional[Callable[[float], float]] = None) -> AdjointSolution:
    """Normal-form adjoint (``lambda0 = 1``) from the representation integral.

    Parameters
    ----------
    envelope : callable, optional
        ``T -> bound`` on ``int_T^inf ||omega Y^T f_x||``.  When given the
        tail value is taken as zero with this certified bound; otherwise
        the tail is the integral of an exponential fitted to the last tenth
        of the grid.

    Raises
    ------
    Divergent
        If the integrand does not decay beyond the horizon.
    """
    fm = fm or fundamental_matrices(prob, reference, T, tol=min(tol, 1e-11))
    grid = fm.grid
    n = prob.n
    omega = prob.triple.omega

    def g(s: np.ndarray) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        fx = np.array([prob.cost_x(t, reference.x_at(t), reference.u_at(t)) for t in s])
        zinv = fm.z_inverse_at(s)
        return _omega_times(np.asarray(omega(s), dtype=float), np.einsum("kij,kj->ki", zinv, fx))

    a, b = grid[:-1], grid[1:]
    half, mid = 0.5 * (b - a), 0.5 * (b + a)
    x15, w15 = _GL15
    x7, w7 = _GL7
    s15 = (mid[:, None] + half[:, None] * x15[None, :]).ravel()
    s7 = (mid[:, None] + half[:, None] * x7[None, :]).ravel()
    g15 = g(s15).reshape(a.size, 15, n)
    g7 = g(s7).reshape(a.size, 7, n)
    seg = half[:, None] * np.einsum("kqj,q->kj", g15, w15)
    seg_err = np.abs(seg - half[:, None] * np.einsum("kqj,q->kj", g7, w7))
    if not np.isfinite(omega(grid[0])):
        for j in range(n):
            r = integrate_finite(lambda s, j=j: g(s)[:, j], grid[0], grid[1], tol)
            seg[0, j], seg_err[0, j] = r.value, r.abs_error_estimate
    if not np.all(np.isfinite(seg)):
        raise Divergent("representation integrand is not finite on the grid")

    node_g = g(grid)
    finite = np.all(np.isfinite(node_g), axis=1)
    if envelope is not None:
        tail_val = np.zeros(n)
        tail_bound = float(envelope(float(grid[-1])))
        certified = True
    else:
        tail_val, tail_bound = _trend_tail(grid[finite], node_g[finite], tol)
        certified = False

    cum = np.zeros((grid.size, n))
    cum[-1] = tail_val
    cum[:-1] = tail_val + np.cumsum(seg[::-1], axis=0)[::-1]
    Z = fm.Z
    p = -np.einsum("kij,kj->ki", Z, cum)
    quad_err = float(np.sum(seg_err))

    def p_fn(t: float) -> np.ndarray:
        t = float(t)
        k = int(np.clip(np.searchsorted(grid, t, side="right") - 1, 0, grid.size - 2))
        lo, hi = t, grid[k + 1]
        h2, m2 = 0.5 * (hi - lo), 0.5 * (hi + lo)
        part = h2 * (w15 @ g(m2 + h2 * x15)) if hi > lo else np.zeros(n)
        return -fm.Z_at(t) @ (cum[k + 1] + part)

    return AdjointSolution(1.0, grid, p, _y_factor(prob, grid, p), True, p_fn, certified,
                           tail_bound + quad_err, "representation")


def _trend_tail(t: np.ndarray, v: np.ndarray, tol: float):
    scale = float(np.max(np.abs(v))) if v.size else 0.0
    if scale == 0.0:
        return np.zeros(v.shape[1]), 0.0
    v_end, kappa, ok = exponential_trend(t, v)
    val = np.zeros(v.shape[1])
    bound = 0.0
    for j in range(v.shape[1]):
        if abs(v_end[j]) <= 1e-14 * scale or kappa[j] == -math.inf:
            bound += 0.0 if ok[j] else abs(v_end[j]) * (t[-1] - t[0])
            continue
        if kappa[j] >= -1e-9:
            raise Divergent("representation integrand does not decay", t=float(t[-1]))
        val[j] = -v_end[j] / kappa[j]
        # spread of the rate over the two halves of the tail window
        cut = t[0] + 0.9 * (t[-1] - t[0])
        w = t >= cut
        tw, vw = t[w], np.abs(v[w, j])
        if tw.size >= 6:
            h = tw.size // 2
            k1 = np.polyfit(tw[:h], np.log(vw[:h]), 1)[0]
            k2 = np.polyfit(tw[h:], np.log(vw[h:]), 1)[0]
            bound += abs(v_end[j]) * abs(1.0 / k1 - 1.0 / k2) if k1 < 0 and k2 < 0 else abs(val[j])
    return val, bound + tol


def adjoint_homogeneous(prob: ControlProblem, fm: FundamentalMatrices, p0,
                        label: str = "abnormal") -> AdjointSolution:
    """``lambda0 = 0`` branch: ``p(t) = Z(t) p0``."""
    p0 = np.atleast_1d(np.asarray(p0, dtype=float))
    grid = fm.grid
    p = np.einsum("kij,j->ki", fm.Z, p0)
    return AdjointSolution(0.0, grid, p, _y_factor(prob, grid, p), False,
                           lambda t: fm.Z_at(float(t)) @ p0, True, 0.0, label, not np.any(p0))


def adjoint_from_initial(prob: ControlProblem, reference: Trajectory, p0, lambda0: float,
                         T: Optional[float] = None, tol: float = 1e-10, grid=None) -> AdjointSolution:
    """Forward solution of the adjoint equation from ``p(0) = p0``."""
    T = reference.horizon if T is None else float(T)
    p0 = np.atleast_1d(np.asarray(p0, dtype=float))
    omega = prob.triple.omega

    def rhs(t, p):
        x, u = reference.x_at(t), reference.u_at(t)
        out = -prob.dyn_x(t, x, u).T @ p
        if lambda0 != 0.0:
            fx = prob.cost_x(t, x, u)
            if np.any(fx):
                out = out + lambda0 * float(omega(t)) * fx
        return out

    t_start = 0.0 if np.isfinite(omega(0.0)) else 1e-12
    sol = solve_ivp(rhs, (t_start, T), p0, method="DOP853", rtol=tol, atol=tol * 1e-6,
                    dense_output=True)
    if sol.status == -1:
        raise IhocError(f"adjoint integration failed: {sol.message}")
    grid = reference.grid[reference.grid <= T] if grid is None else np.asarray(grid, dtype=float)
    p_fn = lambda t: sol.sol(min(max(float(t), t_start), T))  # noqa: E731
    return AdjointSolution.from_function(p_fn, grid, lambda0, prob, normal=False,
                                         label=f"forward lambda0={lambda0:g}",
                                         degenerate=(lambda0 == 0 and not np.any(p0)))


# --------------------------------------------------------------------------
# necessary conditions


def _valid_nodes(prob: ControlProblem, grid: np.ndarray) -> np.ndarray:
    return np.isfinite(np.asarray(prob.triple.omega(grid), dtype=float))


def adjoint_residual(prob: ControlProblem, reference: Trajectory, adj: AdjointSolution,
                     tol: float = RESIDUAL_TOL) -> ConditionReport:
    """``sup ||p' + phi_x^T p - lambda0 omega f_x|| / (1 + ||p||)`` over interior nodes."""
    grid = adj.grid
    T = grid[-1]
    ok = _valid_nodes(prob, grid)
    if adj.p_fn is None:
        from scipy.interpolate import CubicSpline
        dp_spline = CubicSpline(grid, adj.p, axis=0).derivative()
    res = np.full(grid.size, np.nan)
    for i in range(1, grid.size - 1):
        t = grid[i]
        if not ok[i]:
            continue
        p = adj.p[i]
        if adj.p_fn is not None:
            h = min(1e-3, t / 2.5, (T - t) / 2.5)
            if h < 1e-7:
                continue
            f = adj.p_at
            dp = (f(t - 2 * h) - 8 * f(t - h) + 8 * f(t + h) - f(t + 2 * h)) / (12 * h)
        else:
            dp = dp_spline(t)
        x, u = reference.x_at(t), reference.u_at(t)
        rhs = -prob.dyn_x(t, x, u).T @ p
        if adj.lambda0 != 0.0:
            rhs = rhs + adj.lambda0 * float(prob.triple.omega(t)) * prob.cost_x(t, x, u)
        res[i] = np.linalg.norm(dp - rhs) / (1.0 + np.linalg.norm(p))
    if np.all(np.isnan(res)):
        return ConditionReport(Condition.ADJOINT_RESIDUAL, Verdict.INCONCLUSIVE, math.nan,
                               {"reason": "no interior nodes"}, {"adjoint_residual": res})
    i = int(np.nanargmax(res))
    r = float(res[i])
    verdict = Verdict.PASS if r <= tol else Verdict.FAIL
    return ConditionReport(Condition.ADJOINT_RESIDUAL, verdict, r,
                           {"worst_t": float(grid[i]), "worst_residual": r, "lambda0": adj.lambda0},
                           {"adjoint_residual": res})


def _vi_violation(kind: SetKind, lo: np.ndarray, hi: np.ndarray, u: np.ndarray, h: np.ndarray) -> float:
    """Largest ``<H_u, v - u>`` over the extreme points and unit directions of U."""
    total = 0.0
    for j in range(u.size):
        if kind is SetKind.FULL_SPACE or (math.isinf(lo[j]) and math.isinf(hi[j])):
            total += abs(h[j])
            continue
        cands = [0.0]
        if math.isfinite(lo[j]):
            cands.append(h[j] * (lo[j] - u[j]))
        else:
            cands.append(-h[j])
        if math.isfinite(hi[j]):
            cands.append(h[j] * (hi[j] - u[j]))
        else:
            cands.append(h[j])
        total += max(cands)
    return total


def _unbounded_ascent(prob: ControlProblem, t: float, x, u, p, lambda0: float) -> bool:
    """Does ``H`` keep increasing along an unbounded direction of U?"""
    hi = prob.U.upper
    if np.all(np.isfinite(hi)):
        return False
    for k in range(7):
        step = 10.0**k
        uu = np.where(np.isfinite(hi), u, u + step)
        if not np.all(H_u(prob, t, x, uu, p, lambda0)[~np.isfinite(hi)] > 0):
            return False
    return True


def variational_inequality_check(prob: ControlProblem, reference: Trajectory, adj: AdjointSolution,
                                 tol: float = VI_TOL) -> ConditionReport:
    """``<H_u, v - u*> <= 0`` for all ``v`` in U, node by node."""
    U = prob.U
    grid = adj.grid
    ok = _valid_nodes(prob, grid)
    viol = np.full(grid.size, np.nan)
    rel = np.full(grid.size, np.nan)
    outside = []
    for i, t in enumerate(grid):
        if not ok[i]:
            continue
        x, u, p = reference.x_at(t), reference.u_at(t), adj.p[i]
        if not U.contains(u, 1e-9):
            outside.append(float(t))
        h = H_u(prob, t, x, u, p, adj.lambda0)
        v = _vi_violation(U.kind, U.lower, U.upper, u, h)
        viol[i] = v
        rel[i] = v / (1.0 + np.linalg.norm(h))
    i = int(np.nanargmax(rel))
    t_w = float(grid[i])
    xw, uw = reference.x_at(t_w), reference.u_at(t_w)
    hw = H_u(prob, t_w, xw, uw, adj.p[i], adj.lambda0)
    verdict = Verdict.PASS if rel[i] <= tol and not outside else Verdict.FAIL
    witness = {"worst_t": t_w, "worst_u": uw, "H_u": hw, "violation": float(viol[i]),
               "lambda0": adj.lambda0, "controls_outside_U": outside[:5]}
    if verdict is Verdict.FAIL and _unbounded_ascent(prob, t_w, xw, uw, adj.p[i], adj.lambda0):
        witness["unbounded_maximizer"] = True
    return ConditionReport(Condition.VARIATIONAL_INEQUALITY, verdict, float(np.nanmax(viol)), witness,
                           {"Hu_violation": viol})


def _decay_report(cid: Condition, t, v, extra: Optional[dict] = None) -> ConditionReport:
    d = decay_verdict(t, v)
    witness = {"slope": d.slope, "terminal": d.terminal, "scale": d.scale, "t_end": float(t[-1])}
    witness.update(extra or {})
    return ConditionReport(cid, d.verdict, abs(d.terminal) if math.isfinite(d.terminal) else math.inf,
                           witness)


def transversality_checks(prob: ControlProblem, adj: AdjointSolution,
                          probe_x: Optional[Sequence] = None,
                          reference: Optional[Trajectory] = None):
    """Natural transversality and, for ``p = 2``, the strong version.

    Returns three reports: ``||p(t)|| -> 0``; ``<p(t), x(t)> -> 0`` for every
    probe ``x`` (the reference state and the constant one by default);
    ``||p(t)||^2 / nu(t) -> 0``.
    """
    grid = adj.grid
    norm_p = np.linalg.norm(adj.p, axis=1)
    r_norm = _decay_report(Condition.TRANSVERSALITY_NORM, grid, norm_p)

    probes = list(probe_x or [])
    names = [f"probe{i}" for i in range(len(probes))]
    if not probes:
        if reference is not None:
            probes.append(reference.x_at)
            names.append("reference")
        probes.append(lambda t: np.ones(prob.n))
        names.append("ones")
    per = {}
    verdicts = []
    worst_terminal = 0.0
    for name, x in zip(names, probes):
        xs = x(grid) if isinstance(x, SampledFunction) else np.array([np.atleast_1d(x(t)) for t in grid])
        d = decay_verdict(grid, np.abs(np.sum(adj.p * xs, axis=1)))
        per[name] = d.to_dict()
        verdicts.append(d.verdict)
        if math.isfinite(d.terminal):
            worst_terminal = max(worst_terminal, d.terminal)
    r_pair = ConditionReport(Condition.TRANSVERSALITY_PAIRING, worst(verdicts), worst_terminal,
                             {"probes": per, "t_end": float(grid[-1])})

    if prob.triple.p != 2.0:
        r_strong = ConditionReport(Condition.STRONG_TRANSVERSALITY, Verdict.NOT_APPLICABLE, 0.0,
                                   {"reason": "requires p = 2", "p": prob.triple.p})
    else:
        lognu = np.asarray(prob.triple.nu.log(grid), dtype=float)
        with np.errstate(divide="ignore", over="ignore"):
            v = np.exp(2.0 * np.log(np.maximum(norm_p, 1e-320)) - lognu)
        v = np.where(norm_p == 0.0, 0.0, v)
        r_strong = _decay_report(Condition.STRONG_TRANSVERSALITY, grid, v)
    return r_norm, r_pair, r_strong


def michel_check(prob: ControlProblem, reference: Trajectory, adj: AdjointSolution) -> ConditionReport:
    """``H(t, x*, u*, p, lambda0) -> 0`` under its two decay hypotheses (``p = 2``)."""
    if prob.triple.p != 2.0:
        return ConditionReport(Condition.MICHEL, Verdict.NOT_APPLICABLE, 0.0,
                               {"reason": "requires p = 2", "p": prob.triple.p})
    grid = adj.grid
    ok = _valid_nodes(prob, grid)
    g = grid[ok]
    lognu = np.asarray(prob.triple.nu.log(g), dtype=float)
    logw = np.asarray(prob.triple.omega.log(g), dtype=float)
    with np.errstate(over="ignore"):
        h1 = np.exp(2.0 * logw - lognu)
    unorm = np.array([np.linalg.norm(reference.u_at(t)) for t in g])
    h2 = np.exp(lognu) * unorm**2
    d1, d2 = decay_verdict(g, h1), decay_verdict(g, h2)
    hyp = {"nu_inv_omega_sq": d1.to_dict(), "nu_u_sq": d2.to_dict()}
    if Verdict.FAIL in (d1.verdict, d2.verdict):
        return ConditionReport(Condition.MICHEL, Verdict.NOT_APPLICABLE, 0.0,
                               {"hypothesis": Verdict.FAIL, "hypotheses": hyp,
                                "reason": "hypothesis fails; check skipped"})
    Hs = np.array([pontryagin_H(prob, t, reference.x_at(t), reference.u_at(t), p, adj.lambda0)
                   for t, p in zip(g, adj.p[ok])])
    d = decay_verdict(g, np.abs(Hs))
    verdict = worst([d.verdict, d1.verdict, d2.verdict])
    return ConditionReport(Condition.MICHEL, verdict, abs(d.terminal) if math.isfinite(d.terminal) else math.inf,
                           {"hypothesis": worst([d1.verdict, d2.verdict]), "hypotheses": hyp,
                            "H": d.to_dict()})


# --------------------------------------------------------------------------
# stability condition (S)


def _envelope_norm(grid: np.ndarray, ratios: np.ndarray, kappa: float, triple, tol: float) -> QuadratureResult:
    """``||mu||_{L_p(nu)}`` with ``mu`` continued as ``mu(T) e^{kappa (t - T)}``.

    The continuation is weighted on the log scale: ``mu^p`` alone overflows
    long before ``nu`` has pulled the product back down.
    """
    p, nu = triple.p, triple.nu
    T, end = float(grid[-1]), float(ratios[-1])

    def head(t):
        return np.interp(t, grid, ratios) ** p * nu(t)

    h = integrate_finite(head, 0.0, T, tol / 2, points=grid)
    if end == 0.0 or not math.isfinite(kappa):
        tail = QuadratureResult(0.0, 0.0, T, 0.0, 0, True)
    else:
        log_end = math.log(end)

        def rest(t):
            with np.errstate(over="ignore", divide="ignore"):
                return np.exp(p * (log_end + kappa * (np.asarray(t) - T)) + nu.log(t))

        tail = integrate_semi_infinite(rest, tol / 2, a=T)
    integral = max(h.value + tail.value, 0.0)
    return QuadratureResult(integral ** (1.0 / p), h.abs_error_estimate + tail.abs_error_estimate,
                            tail.truncation_T, tail.tail_bound, h.evaluations + tail.evaluations,
                            tail.certified)


def stability_probe(prob: ControlProblem, reference: Trajectory, K0: float = 1.0, delta: float = 0.1,
                    probes: int = 4, T_max: Optional[float] = None, eta_at: str = "T",
                    tol: float = 1e-10) -> ConditionReport:
    """Perturbed restarts under ``u*`` and the weighted norm of their envelope.

    For probe times ``T_k`` in ``[K0, T_max/2]`` and perturbations of size
    ``delta * eta`` along every coordinate direction, the dynamics are
    re-integrated up to ``T_max``.  ``mu(t)`` is the largest ratio
    ``||x(t) - x*(t)|| / ||zeta - x*(T_k)||`` over probes with ``T_k <= t``.
    The verdict is Pass iff ``||mu||_{L_p(nu)}`` is finite.

    ``eta_at="T"`` scales perturbations with ``eta(T_k)``; ``"t"`` uses the
    smallest ``eta`` on ``[T_k, T_max]``, the stricter reading.
    """
    if eta_at not in ("T", "t"):
        raise ValueError("eta_at must be 'T' or 't'")
    T_max = reference.horizon if T_max is None else float(T_max)
    grid = reference.grid[reference.grid <= T_max]
    last = max(K0, 0.5 * T_max)
    Ts = np.linspace(K0, last, probes) if probes > 1 else np.array([K0])
    n = prob.n
    dirs = np.vstack([np.eye(n), -np.eye(n)])
    ratios = np.zeros(grid.size)
    started = np.zeros(grid.size, dtype=bool)
    xstar = np.array([reference.x_at(t) for t in grid])
    for T in Ts:
        if eta_at == "T":
            size = delta * float(prob.triple.eta(T))
        else:
            size = delta * float(np.min(prob.triple.eta(grid[grid >= T])))
        for d in dirs:
            zeta = reference.x_at(T) + size * d
            sub = grid[grid >= T]

            def rhs(t, x):
                return prob.dyn(t, x, reference.u_at(t))

            def blow(t, x):
                return np.linalg.norm(x) - 1e12

            blow.terminal = True
            sol = solve_ivp(rhs, (T, T_max), zeta, method="DOP853", rtol=tol, atol=tol * 1e-3,
                            t_eval=sub, events=blow)
            if sol.status == 1 or sol.status == -1:
                t_b = float(sol.t_events[0][0]) if sol.status == 1 else float(sol.t[-1])
                return ConditionReport(Condition.STABILITY_S, Verdict.FAIL, math.inf,
                                       {"reason": "perturbed state blew up", "probe_T": float(T),
                                        "direction": d, "t_blowup": t_b})
            dev = np.linalg.norm(sol.y.T - xstar[grid >= T], axis=1) / size
            sel = grid >= T
            ratios[sel] = np.maximum(ratios[sel], dev)
            started |= sel
    first = int(np.argmax(started))
    ratios[:first] = ratios[first]
    _, kappa, _ = exponential_trend(grid, ratios)
    witness = {"probe_T": Ts, "delta": delta, "eta_at": eta_at, "C_s": 1.0,
               "growth_rate": float(kappa[0]), "mu_max": float(ratios.max())}
    try:
        nrm = _envelope_norm(grid, ratios, float(kappa[0]), prob.triple, tol=1e-9)
    except Divergent as exc:
        witness.update({"reason": "envelope not in L_p(nu)", "diverges_at": exc.t})
        return ConditionReport(Condition.STABILITY_S, Verdict.FAIL, math.inf, witness)
    witness["mu_norm"] = nrm.value
    witness["certified"] = nrm.certified
    return ConditionReport(Condition.STABILITY_S, Verdict.PASS, nrm.value, witness)


# --------------------------------------------------------------------------
# normality


def necessary_suite(prob: ControlProblem, reference: Trajectory, adj: AdjointSolution) -> dict:
    """Adjoint residual, variational inequality, transversality and Michel reports."""
    res = adjoint_residual(prob, reference, adj)
    vi = variational_inequality_check(prob, reference, adj)
    tn, tp, ts = transversality_checks(prob, adj, reference=reference)
    mi = michel_check(prob, reference, adj)
    return {r.condition_id.value: r for r in (res, vi, tn, tp, ts, mi)}


def _first_failure(reports: dict) -> Optional[str]:
    for k, r in reports.items():
        if r.verdict not in (Verdict.PASS, Verdict.NOT_APPLICABLE):
            return k
    return None


def _summary(reports: dict) -> dict:
    return {k: r.verdict.value for k, r in reports.items()}


def normality_analysis(prob: ControlProblem, reference: Trajectory, T: Optional[float] = None,
                       tol: float = 1e-10, seed: int = 0, stability: Optional[dict] = None):
    """Decide which multiplier branch satisfies the necessary conditions.

    The normal branch (``lambda0 = 1``) uses the representation formula; it
    is tried even when the stability probe fails, since that probe is only
    sufficient.  If it diverges or a condition fails, the abnormal branch
    ``lambda0 = 0``, ``p = Z p0`` is searched over ``2n`` axis directions
    and 32 seeded random unit vectors.

    Returns
    -------
    (AdjointSolution or None, ConditionReport)
        The adjoint of the selected branch and a ``Normality`` report whose
        witness names the branch and records both attempts.
    """
    T = reference.horizon if T is None else float(T)
    ref = reference if T >= reference.horizon else reference.restrict(T)
    stab = stability_probe(prob, ref, **(stability or {}))
    witness: dict = {"stability": stab.verdict.value}
    fm = fundamental_matrices(prob, ref, T)
    witness["fundamental_matrices"] = {"invariant_error": fm.invariant_error,
                                       "conditioning": fm.conditioning}

    normal_adj = None
    normal_reports: dict = {}
    try:
        normal_adj = adjoint_by_representation(prob, ref, T, tol, fm=fm)
        rep = ConditionReport(Condition.REPRESENTATION, Verdict.PASS, normal_adj.tail_bound,
                              {"tail_bound": normal_adj.tail_bound, "certified": normal_adj.certified})
        normal_reports = {rep.condition_id.value: rep, **necessary_suite(prob, ref, normal_adj)}
        failed = _first_failure(normal_reports)
        normal_reason = None if failed is None else f"{failed} {normal_reports[failed].verdict.value}"
    except Divergent as exc:
        rep = ConditionReport(Condition.REPRESENTATION, Verdict.FAIL, math.inf,
                              {"reason": "representation integral divergent", "t": exc.t})
        normal_reports = {rep.condition_id.value: rep}
        normal_reason = "representation integral divergent"
    normal_ok = normal_reason is None
    degenerate = False
    degenerate_reason = None
    vi = normal_reports.get(Condition.VARIATIONAL_INEQUALITY.value)
    if vi is not None and vi.witness.get("unbounded_maximizer"):
        degenerate = True
        degenerate_reason = "maximizer of H unbounded: u* = +inf"
    witness["normal_branch"] = {"verdict": worst(r.verdict for r in normal_reports.values()).value,
                                "reason": normal_reason, "reports": _summary(normal_reports)}

    if not normal_ok and normal_adj is None:
        witness["normal_candidates"] = _normal_candidates(prob, ref, T)

    abnormal_adj = None
    abnormal_reports: dict = {}
    passing = 0
    tried = 0
    if not normal_ok:
        rng = np.random.default_rng(seed)
        n = prob.n
        rand = rng.normal(size=(N_RANDOM_DIRECTIONS, n))
        rand /= np.linalg.norm(rand, axis=1, keepdims=True)
        directions = np.vstack([np.eye(n), -np.eye(n), rand])
        for d in directions:
            cand = adjoint_homogeneous(prob, fm, d)
            reports = necessary_suite(prob, ref, cand)
            tried += 1
            if _first_failure(reports) is None:
                passing += 1
                if abnormal_adj is None:
                    abnormal_adj, abnormal_reports = cand, reports
        witness["abnormal_branch"] = {
            "verdict": (Verdict.PASS if abnormal_adj is not None else Verdict.FAIL).value,
            "directions_tried": tried, "directions_passing": passing,
            "p0": None if abnormal_adj is None else abnormal_adj.p[0],
            "reports": _summary(abnormal_reports)}

    if normal_ok:
        branch, adj, verdict, reports = "normal", normal_adj, Verdict.PASS, normal_reports
    elif abnormal_adj is not None:
        branch, adj, verdict, reports = "abnormal", abnormal_adj, Verdict.PASS, abnormal_reports
    elif normal_adj is not None:
        # a normal branch that is merely undecided (horizon too short) stays undecided
        verdict = worst(r.verdict for r in normal_reports.values())
        branch, adj, reports = "normal", normal_adj, normal_reports
    else:
        branch, adj, verdict, reports = "none", None, Verdict.FAIL, {}
    lam = None if adj is None else adj.lambda0
    witness.update({"branch": branch, "lambda0": lam,
                    "summary": f"{branch}: lambda0={lam:g}" if lam is not None else "no branch satisfies the conditions",
                    "degenerate": degenerate})
    if degenerate_reason:
        witness["degenerate_reason"] = degenerate_reason
    if adj is not None and degenerate:
        adj = replace(adj, degenerate=True)
    residual = max([r.residual for r in reports.values() if math.isfinite(r.residual)] or [0.0])
    report = ConditionReport(Condition.NORMALITY, verdict, residual, witness)
    report.series["reports"] = reports
    return adj, report


def _normal_candidates(prob: ControlProblem, reference: Trajectory, T: float) -> dict:
    """Forward ``lambda0 = 1`` adjoints from a few ``p(0)``: which condition fails first."""
    out = {}
    n = prob.n
    for scale in (-1.0, 0.0, 1.0):
        p0 = np.full(n, scale)
        try:
            cand = adjoint_from_initial(prob, reference, p0, 1.0, T)
        except IhocError as exc:
            out[f"{scale:g}"] = f"integration failed: {exc}"
            continue
        reports = necessary_suite(prob, reference, cand)
        failed = _first_failure(reports)
        out[f"{scale:g}"] = "all conditions pass" if failed is None else f"{failed} {reports[failed].verdict.value}"
    return out
