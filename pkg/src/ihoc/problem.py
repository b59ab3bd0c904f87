"""Control problems on the half-line: model, state integration, objective.

Callbacks take ``(t, x, u)`` with ``x`` of length ``n`` and ``u`` of length
``m``.  Maximisation problems are turned into minimisation problems once, at
construction, by negating the integrand and its partials; every other module
reads the normalised callbacks ``cost``, ``cost_x``, ``cost_u`` and the
shape-checked dynamics ``dyn``, ``dyn_x``, ``dyn_u``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline
from scipy.stats import qmc

from .errors import BlowUp, DimensionMismatch, Divergent, NonFinite
from .quadrature import QuadratureResult, integrate_finite, integrate_semi_infinite
from .spaces import exponential_trend
from .verdicts import Condition, ConditionReport, Verdict
from .weights import WeightTriple

BLOWUP_CAP = 1e12
MIN_OUTPUT_NODES = 400


class Sense(str, Enum):
    MINIMIZE = "Minimize"
    MAXIMIZE = "Maximize"

    def __str__(self) -> str:
        return self.value


class SetKind(str, Enum):
    FULL_SPACE = "FullSpace"
    BOX = "Box"
    HALF_LINE = "HalfLine"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class ControlSet:
    """Convex control set: all of ``R^m``, a box, or a product of half-lines."""

    kind: SetKind
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        kind = SetKind(self.kind)
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise DimensionMismatch("lower and upper bounds must be vectors of equal length")
        if np.any(lo > hi):
            raise ValueError("box bounds need lower <= upper")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def full(cls, m: int) -> "ControlSet":
        return cls(SetKind.FULL_SPACE, np.full(m, -np.inf), np.full(m, np.inf))

    @classmethod
    def box(cls, lower, upper) -> "ControlSet":
        lo, hi = np.atleast_1d(np.asarray(lower, float)), np.atleast_1d(np.asarray(upper, float))
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("box bounds must be finite")
        return cls(SetKind.BOX, lo, hi)

    @classmethod
    def half_line(cls, lower) -> "ControlSet":
        lo = np.atleast_1d(np.asarray(lower, float))
        return cls(SetKind.HALF_LINE, lo, np.full(lo.shape, np.inf))

    @property
    def m(self) -> int:
        return int(self.lower.size)

    @property
    def bounded(self) -> bool:
        return bool(np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper)))

    def contains(self, u, tol: float = 1e-12) -> bool:
        u = np.atleast_1d(np.asarray(u, dtype=float))
        slack = tol * (1.0 + np.abs(u))
        return bool(np.all(u >= self.lower - slack) and np.all(u <= self.upper + slack))

    def project(self, u) -> np.ndarray:
        return np.clip(np.asarray(u, dtype=float), self.lower, self.upper)

    def to_dict(self) -> dict:
        from .verdicts import jsonable
        return {"kind": self.kind.value, "lower": jsonable(self.lower), "upper": jsonable(self.upper)}


def _coerce_scalar(fn):
    def wrapped(t, x, u):
        return float(np.asarray(fn(t, x, u), dtype=float).reshape(()))
    return wrapped


def _coerce_vector(fn, size: int, name: str, sign: float = 1.0):
    def wrapped(t, x, u):
        v = np.asarray(fn(t, x, u), dtype=float).reshape(-1)
        if v.size != size:
            raise DimensionMismatch(f"{name} returned {v.size} entries, expected {size}")
        return sign * v
    return wrapped


def _coerce_matrix(fn, rows: int, cols: int, name: str):
    def wrapped(t, x, u):
        v = np.asarray(fn(t, x, u), dtype=float)
        if v.size != rows * cols:
            raise DimensionMismatch(f"{name} returned shape {v.shape}, expected ({rows}, {cols})")
        return v.reshape(rows, cols)
    return wrapped


@dataclass(frozen=True)
class ControlProblem:
    """``min int_0^inf omega(t) f(t,x,u) dt`` subject to ``x' = phi(t,x,u)``, ``u in U``.

    The fields hold the callbacks as supplied, in the problem's own sense.
    Use the attributes ``cost``, ``cost_x``, ``cost_u`` (minimisation form)
    and ``dyn``, ``dyn_x``, ``dyn_u`` downstream.
    """

    n: int
    m: int
    f: Callable
    f_x: Callable
    f_u: Callable
    phi: Callable
    phi_x: Callable
    phi_u: Callable
    x0: np.ndarray
    U: ControlSet
    triple: WeightTriple
    gamma: float = 1.0
    sense: Sense = Sense.MINIMIZE
    name: str = ""

    def __post_init__(self):
        x0 = np.atleast_1d(np.asarray(self.x0, dtype=float))
        if x0.size != self.n:
            raise DimensionMismatch(f"x0 has {x0.size} entries, expected n={self.n}")
        if self.U.m != self.m:
            raise DimensionMismatch(f"control set has dimension {self.U.m}, expected m={self.m}")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "sense", Sense(self.sense))
        s = -1.0 if self.sense is Sense.MAXIMIZE else 1.0
        raw_f = _coerce_scalar(self.f)
        object.__setattr__(self, "objective_sign", s)
        object.__setattr__(self, "cost", (lambda t, x, u: s * raw_f(t, x, u)))
        object.__setattr__(self, "cost_x", _coerce_vector(self.f_x, self.n, "f_x", s))
        object.__setattr__(self, "cost_u", _coerce_vector(self.f_u, self.m, "f_u", s))
        object.__setattr__(self, "dyn", _coerce_vector(self.phi, self.n, "phi"))
        object.__setattr__(self, "dyn_x", _coerce_matrix(self.phi_x, self.n, self.n, "phi_x"))
        object.__setattr__(self, "dyn_u", _coerce_matrix(self.phi_u, self.n, self.m, "phi_u"))

    def with_triple(self, triple: WeightTriple) -> "ControlProblem":
        from dataclasses import replace
        return replace(self, triple=triple)

    def radius(self, t) -> np.ndarray:
        """Neighbourhood radius ``gamma * eta(t)``."""
        return self.gamma * np.asarray(self.triple.eta(t), dtype=float)


def _omega_term(prob: ControlProblem, t: float, lambda0: float) -> float:
    if lambda0 == 0.0:
        return 0.0
    return lambda0 * float(prob.triple.omega(t))


def pontryagin_H(prob: ControlProblem, t: float, x, u, p, lambda0: float) -> float:
    """``-lambda0 omega(t) f(t,x,u) + <p, phi(t,x,u)>`` in minimisation form."""
    x, u, p = (np.atleast_1d(np.asarray(v, dtype=float)) for v in (x, u, p))
    if x.size != prob.n or p.size != prob.n or u.size != prob.m:
        raise DimensionMismatch("state, control or adjoint has the wrong dimension")
    if lambda0 < 0:
        raise ValueError("lambda0 must be non-negative")
    w = _omega_term(prob, t, lambda0)
    val = float(p @ prob.dyn(t, x, u))
    if w != 0.0:
        val -= w * prob.cost(t, x, u)
    if not math.isfinite(val):
        raise NonFinite(f"Pontryagin function is not finite at t={t!r}", t=t)
    return val


def H_u(prob: ControlProblem, t: float, x, u, p, lambda0: float) -> np.ndarray:
    x, u, p = (np.atleast_1d(np.asarray(v, dtype=float)) for v in (x, u, p))
    w = _omega_term(prob, t, lambda0)
    out = prob.dyn_u(t, x, u).T @ p
    if w != 0.0:
        out = out - w * prob.cost_u(t, x, u)
    return out


def H_x(prob: ControlProblem, t: float, x, u, p, lambda0: float) -> np.ndarray:
    x, u, p = (np.atleast_1d(np.asarray(v, dtype=float)) for v in (x, u, p))
    w = _omega_term(prob, t, lambda0)
    out = prob.dyn_x(t, x, u).T @ p
    if w != 0.0:
        out = out - w * prob.cost_x(t, x, u)
    return out


@dataclass(frozen=True)
class Trajectory:
    """A candidate process sampled on a grid.

    ``x_fn``/``u_fn`` (scalar time to vector) give off-grid values; with
    ``closed_form`` set they are trusted on all of ``[0, inf)``.  Without
    them, states use cubic Hermite interpolation through ``xdot`` and
    controls are interpolated linearly.
    """

    grid: np.ndarray
    x: np.ndarray
    u: np.ndarray
    xdot: np.ndarray
    x_fn: Optional[Callable] = field(default=None, compare=False, repr=False)
    u_fn: Optional[Callable] = field(default=None, compare=False, repr=False)
    closed_form: bool = False
    jumps: tuple = ()

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        x = np.asarray(self.x, dtype=float)
        u = np.asarray(self.u, dtype=float)
        xd = np.asarray(self.xdot, dtype=float)
        x = x[:, None] if x.ndim == 1 else x
        u = u[:, None] if u.ndim == 1 else u
        xd = xd[:, None] if xd.ndim == 1 else xd
        if not (grid.ndim == 1 and x.shape[0] == u.shape[0] == xd.shape[0] == grid.size):
            raise DimensionMismatch("grid, x, u and xdot need the same number of nodes")
        if np.any(np.diff(grid) <= 0):
            raise ValueError("grid must increase strictly")
        for name, v in (("grid", grid), ("x", x), ("u", u), ("xdot", xd)):
            object.__setattr__(self, name, v)
        object.__setattr__(self, "jumps", tuple(float(j) for j in self.jumps))

    @property
    def horizon(self) -> float:
        return float(self.grid[-1])

    @property
    def n(self) -> int:
        return int(self.x.shape[1])

    @property
    def m(self) -> int:
        return int(self.u.shape[1])

    def _spline(self):
        sp = self.__dict__.get("_sp")
        if sp is None:
            sp = CubicHermiteSpline(self.grid, self.x, self.xdot, axis=0)
            self.__dict__["_sp"] = sp
        return sp

    def x_at(self, t: float) -> np.ndarray:
        if self.x_fn is not None:
            return np.atleast_1d(np.asarray(self.x_fn(float(t)), dtype=float))
        return self._spline()(float(t))

    def u_at(self, t: float) -> np.ndarray:
        if self.u_fn is not None:
            return np.atleast_1d(np.asarray(self.u_fn(float(t)), dtype=float))
        return np.array([np.interp(float(t), self.grid, self.u[:, j]) for j in range(self.m)])

    def restrict(self, T: float) -> "Trajectory":
        keep = self.grid <= T + 1e-12
        return Trajectory(self.grid[keep], self.x[keep], self.u[keep], self.xdot[keep],
                          self.x_fn, self.u_fn, self.closed_form, tuple(j for j in self.jumps if j < T))


def _control_fn(u, m: int) -> Callable:
    if callable(u):
        def uf(t):
            v = np.atleast_1d(np.asarray(u(t), dtype=float))
            if v.size != m:
                raise DimensionMismatch(f"control returns {v.size} entries, expected m={m}")
            return v
        return uf
    c = np.atleast_1d(np.asarray(u, dtype=float))
    if c.size != m:
        raise DimensionMismatch(f"constant control has {c.size} entries, expected m={m}")
    return lambda t: c


def integrate_state(prob: ControlProblem, u, T: float, tol: float = 1e-10, *,
                    jumps: Sequence[float] = (), n_out: int = MIN_OUTPUT_NODES + 1,
                    cap: float = BLOWUP_CAP, x0=None, t0: float = 0.0) -> Trajectory:
    """Integrate ``x' = phi(t, x, u(t))`` on ``[t0, T]``.

    Uses the embedded 8(5,3) Dormand-Prince pair with relative tolerance
    ``tol``.  The integration restarts at the declared control ``jumps``.
    The returned grid is the union of the accepted steps and ``n_out``
    uniform nodes.

    Raises
    ------
    BlowUp
        When ``||x||`` reaches ``cap``; ``exc.t`` is the crossing time and
        ``exc.trajectory`` the partial trajectory.
    """
    uf = _control_fn(u, prob.m)
    start = prob.x0 if x0 is None else np.atleast_1d(np.asarray(x0, dtype=float))
    knots = [t0] + sorted(j for j in jumps if t0 < j < T) + [T]

    def rhs(t, x):
        return prob.dyn(t, x, uf(t))

    def blow(t, x):
        return np.linalg.norm(x) - cap

    blow.terminal = True
    blow.direction = 1

    pieces = []
    xs = start
    steps = []
    crossed = None
    for a, b in zip(knots[:-1], knots[1:]):
        sol = solve_ivp(rhs, (a, b), xs, method="DOP853", rtol=tol, atol=tol * 1e-3,
                        dense_output=True, events=blow)
        if sol.status == -1:
            raise RuntimeError(f"state integration failed: {sol.message}")
        pieces.append((a, float(sol.t[-1]), sol.sol))
        steps.append(sol.t)
        if sol.status == 1:
            crossed = float(sol.t_events[0][0])
            break
        xs = sol.y[:, -1]

    def x_fn(t):
        for a, b, s in reversed(pieces):
            if t >= a:
                return s(min(t, b))
        return pieces[0][2](t)

    end = crossed if crossed is not None else T
    grid = np.unique(np.concatenate(steps + [np.linspace(t0, end, n_out)]))
    grid = grid[(grid >= t0) & (grid <= end)]
    xg = np.array([x_fn(t) for t in grid])
    ug = np.array([uf(t) for t in grid])
    xd = np.array([prob.dyn(t, xv, uv) for t, xv, uv in zip(grid, xg, ug)])
    traj = Trajectory(grid, xg, ug, xd, x_fn=x_fn, u_fn=uf, closed_form=False, jumps=tuple(knots[1:-1]))
    if crossed is not None:
        raise BlowUp(f"state norm reached {cap:g} at t={crossed:.6g}", crossed, traj)
    return traj


def dynamics_residual(prob: ControlProblem, traj: Trajectory) -> float:
    """``max_i ||xdot_i - phi(t_i, x_i, u_i)|| / (1 + ||xdot_i||)``."""
    res = 0.0
    for t, x, u, xd in zip(traj.grid, traj.x, traj.u, traj.xdot):
        r = np.linalg.norm(xd - prob.dyn(t, x, u)) / (1.0 + np.linalg.norm(xd))
        res = max(res, float(r))
    return res


def _tail_by_trend(t: np.ndarray, v: np.ndarray, tol: float):
    """Integral beyond ``t[-1]`` of the exponential trend fitted to ``v``."""
    v_end, kappa, ok = exponential_trend(t, v)
    v_end, kappa = float(v_end[0]), float(kappa[0])
    if not ok[0]:
        return 0.0, abs(v_end), False
    if kappa == -math.inf or v_end == 0.0:
        return 0.0, 0.0, True
    if kappa >= 0.0:
        raise Divergent("integrand does not decay beyond the horizon", t=float(t[-1]))
    val = -v_end / kappa
    return val, 0.1 * abs(val) + tol, True


def objective(prob: ControlProblem, traj: Trajectory, tol: float = 1e-9,
              tail: Optional[Callable] = None) -> QuadratureResult:
    """``int_0^inf omega f`` along ``traj``, in the problem's own sense.

    Closed-form trajectories are integrated over the half-line directly.
    Sampled ones are integrated up to their horizon, with the remainder
    taken from ``tail`` if given and from an exponential trend otherwise
    (uncertified).
    """
    omega = prob.triple.omega
    sign = prob.objective_sign

    def g_scalar(t):
        return float(omega(t)) * prob.cost(t, traj.x_at(t), traj.u_at(t))

    def g(t):
        t = np.asarray(t, dtype=float)
        return np.array([g_scalar(s) for s in t.ravel()]).reshape(t.shape)

    if traj.closed_form:
        r = integrate_semi_infinite(g, tol, tail)
        return QuadratureResult(sign * r.value, r.abs_error_estimate, r.truncation_T,
                                r.tail_bound, r.evaluations, r.certified)
    T = traj.horizon
    pts = np.concatenate([traj.grid, list(traj.jumps)])
    head = integrate_finite(g, 0.0, T, tol / 2, points=pts)
    if tail is not None:
        rest_val, rest_bound, cert = 0.0, float(tail(T)), True
    else:
        w = np.isfinite(omega(traj.grid))
        vals = np.array([g_scalar(t) for t in traj.grid[w]])
        rest_val, rest_bound, _ = _tail_by_trend(traj.grid[w], vals, tol)
        cert = False
    return QuadratureResult(sign * (head.value + rest_val), head.abs_error_estimate, T,
                            rest_bound, head.evaluations, cert)


def _ball_probes(n_dim: int, count: int, seed: int = 0) -> np.ndarray:
    """Deterministic Halton points pushed into the unit ball of ``R^n_dim``."""
    h = qmc.Halton(d=n_dim, scramble=False, seed=seed).random(count + 1)[1:]
    z = 2.0 * h - 1.0
    norms = np.linalg.norm(z, axis=1, keepdims=True)
    return np.where(norms > 1.0, z / np.maximum(norms, 1e-300), z)


def _neighbourhood_points(prob: ControlProblem, reference: Trajectory, t: float, probes: np.ndarray):
    xs, us = reference.x_at(t), reference.u_at(t)
    r = float(prob.radius(t))
    out = [(xs, prob.U.project(us))]
    for z in probes:
        out.append((xs + r * z[: prob.n], prob.U.project(us + r * z[prob.n:])))
    return out


B2_BOUNDS = ("f_linear_growth", "f_gradient", "phi_linear_growth", "phi_jacobian")


def check_B2_growth(prob: ControlProblem, reference: Trajectory, n_t: int = 64,
                    n_radial: int = 8, growth_factor: float = 2.0) -> ConditionReport:
    """Estimate the constant of the growth bounds on the tube around ``reference``.

    Per time node the four ratios ``|f|/(1+|x|+|u|)``, ``|(f_x, f_u)|``,
    ``|phi|/(1+|x|+|u|)`` and ``|(phi_x, phi_u)|`` are maximised over the
    probes.  A bound whose per-node maximum still grows over the second half
    of the horizon (by more than ``growth_factor`` with a positive log
    slope) has no uniform constant and fails.
    """
    T = reference.horizon
    ts = np.linspace(0.0, T, n_t)
    probes = _ball_probes(prob.n + prob.m, n_radial)
    C = np.zeros((n_t, 4))
    for i, t in enumerate(ts):
        for x, u in _neighbourhood_points(prob, reference, t, probes):
            lin = 1.0 + np.linalg.norm(x) + np.linalg.norm(u)
            grad = np.concatenate([prob.cost_x(t, x, u), prob.cost_u(t, x, u)])
            jac = np.hstack([prob.dyn_x(t, x, u), prob.dyn_u(t, x, u)])
            vals = (abs(prob.cost(t, x, u)) / lin, np.linalg.norm(grad),
                    np.linalg.norm(prob.dyn(t, x, u)) / lin, np.linalg.norm(jac, 2))
            C[i] = np.maximum(C[i], vals)
    per_bound = {}
    growing = []
    half = ts >= T / 2
    for j, name in enumerate(B2_BOUNDS):
        col = C[:, j]
        per_bound[name] = float(np.max(col)) if np.all(np.isfinite(col)) else math.inf
        if not np.all(np.isfinite(col)):
            growing.append(name)
            continue
        tail = col[half]
        if tail[0] > 0 and tail[-1] > growth_factor * tail[0]:
            slope = np.polyfit(ts[half], np.log(np.maximum(tail, 1e-300)), 1)[0]
            if slope > 0:
                growing.append(name)
    c0 = max(per_bound.values())
    worst = int(np.argmax(np.max(C, axis=1)))
    witness = {"C0": c0, "per_bound": per_bound, "growing_bounds": growing,
               "worst_t": float(ts[worst]), "t_nodes": n_t, "probes_per_node": n_radial + 1}
    verdict = Verdict.FAIL if growing else Verdict.PASS
    return ConditionReport(Condition.B2_GROWTH, verdict, c0 if math.isfinite(c0) else math.inf, witness)


def gradient_consistency(prob: ControlProblem, reference: Trajectory, n_probes: int = 256,
                         seed: int = 0) -> float:
    """Worst mismatch of the supplied partials against central differences.

    The error of each entry is ``|a - b| / max(1, |a|, |b|)``; probes are
    random points of the tube around ``reference``.
    """
    rng = np.random.default_rng(seed)
    T = reference.horizon
    worst = 0.0
    for _ in range(n_probes):
        t = float(rng.uniform(0.0, T))
        r = float(prob.radius(t))
        z = rng.uniform(-1.0, 1.0, prob.n + prob.m)
        z /= max(1.0, np.linalg.norm(z))
        x = reference.x_at(t) + r * z[: prob.n]
        u = prob.U.project(reference.u_at(t) + r * z[prob.n:])
        # keep a difference stencil inside U
        lo, hi = prob.U.lower, prob.U.upper
        worst = max(worst, _fd_mismatch(prob, t, x, u, lo, hi))
    return worst


FD_STEP_LADDER = tuple(10.0 ** -k for k in range(9))


def _fd_mismatch(prob, t, x, u, lo, hi) -> float:
    """Mismatch of the partials at one probe, minimised over a ladder of steps.

    Strongly curved callbacks (``c^{-sigma}`` near a control floor) need a
    step far below the default; a wrong partial matches at no step.
    """
    def rel(a, b):
        a, b = np.asarray(a, dtype=float).ravel(), np.asarray(b, dtype=float).ravel()
        return np.abs(a - b) / np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))

    best = np.full(prob.n + prob.n * prob.n + prob.m + prob.n * prob.m, math.inf)
    for scale in FD_STEP_LADDER:
        fx, Jx, fu, Ju = _fd_partials(prob, t, x, u, lo, hi, scale)
        err = np.concatenate([rel(fx, prob.cost_x(t, x, u)), rel(Jx, prob.dyn_x(t, x, u)),
                              rel(fu, prob.cost_u(t, x, u)), rel(Ju, prob.dyn_u(t, x, u))])
        best = np.minimum(best, err)
        if best.max() <= 1e-9:
            break
    return float(best.max())


def _fd_partials(prob, t, x, u, lo, hi, scale: float):
    fx = np.zeros(prob.n)
    Jx = np.zeros((prob.n, prob.n))
    for i in range(prob.n):
        h = scale * 1e-6 * max(1.0, abs(x[i]))
        e = np.zeros(prob.n)
        e[i] = h
        fx[i] = (prob.cost(t, x + e, u) - prob.cost(t, x - e, u)) / (2 * h)
        Jx[:, i] = (prob.dyn(t, x + e, u) - prob.dyn(t, x - e, u)) / (2 * h)
    fu = prob.cost_u(t, x, u).astype(float).copy()
    Ju = prob.dyn_u(t, x, u).astype(float).copy()
    for i in range(prob.m):
        h = scale * 1e-6 * max(1.0, abs(u[i]))
        up, dn = u.copy(), u.copy()
        up[i] = min(u[i] + h, hi[i])
        dn[i] = max(u[i] - h, lo[i])
        if up[i] == dn[i]:
            continue  # degenerate coordinate: nothing to compare
        if up[i] - u[i] < h or u[i] - dn[i] < h:
            # one-sided near a bound: second order forward/backward stencil
            s = 1.0 if up[i] - u[i] >= h else -1.0
            e1, e2 = u.copy(), u.copy()
            e1[i] = u[i] + s * h
            e2[i] = u[i] + 2 * s * h
            fu[i] = s * (-3 * prob.cost(t, x, u) + 4 * prob.cost(t, x, e1) - prob.cost(t, x, e2)) / (2 * h)
            Ju[:, i] = s * (-3 * prob.dyn(t, x, u) + 4 * prob.dyn(t, x, e1) - prob.dyn(t, x, e2)) / (2 * h)
        else:
            fu[i] = (prob.cost(t, x, up) - prob.cost(t, x, dn)) / (up[i] - dn[i])
            Ju[:, i] = (prob.dyn(t, x, up) - prob.dyn(t, x, dn)) / (up[i] - dn[i])
    return fx, Jx, fu, Ju
