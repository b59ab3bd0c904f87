"""Worked examples as ready-made problems with closed-form reference solutions.

Entries
-------
RegulatorB2
    ``int e^{-2t} (x^2 + u^2)/2 -> inf``, ``x' = 2x + u``.  Optionally in the
    shifted form ``omega = e^{-(2+d)t}``, ``f = e^{dt}(x^2+u^2)/2``.
RegulatorB1
    Same integrand, ``x' = x + u``, ``x(0) = 1``.
HalkinModified
    ``int e^{-rho t}(u - x) -> sup``, ``x' = u^2 + x``, ``x(0) = 0``, ``u in [0, 1]``.
RamseyGrowth
    ``int e^{-rho t} U(c) -> sup``, ``k' = (r-n-m)k + w - c``, ``c > 0``.
FisheryNashPlayer
    One player of the fishery game in ``z = ln x`` coordinates, the other
    player's equilibrium control held fixed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp

from . import weights as W
from .errors import BadParams
from .problem import ControlProblem, ControlSet, Sense, Trajectory
from .quadrature import integrate_finite, integrate_semi_infinite
from .verdicts import DecayVerdict, decay_verdict

SQRT2 = math.sqrt(2.0)
C_FLOOR = 1e-9


class EntryId(str, Enum):
    REGULATOR_B2 = "RegulatorB2"
    REGULATOR_B1 = "RegulatorB1"
    HALKIN = "HalkinModified"
    RAMSEY = "RamseyGrowth"
    FISHERY = "FisheryNashPlayer"

    def __str__(self) -> str:
        return self.value


DEFAULTS = {
    EntryId.REGULATOR_B2: {"a": 3.0, "p": 2.0, "shift": 0.0, "eta_rate": (SQRT2 - 1.0) / 2.0,
                           "gamma": 1.0, "x0": 2.0, "horizon": 30.0},
    EntryId.REGULATOR_B1: {"a": 3.0, "p": 2.0, "gamma": 1.0, "x0": 1.0, "horizon": 30.0},
    EntryId.HALKIN: {"rho": 0.5, "a": 0.5, "p": 2.0, "gamma": 1.0, "horizon": 30.0},
    EntryId.RAMSEY: {"r": 0.02, "n": 0.01, "m": 0.03, "rho": 0.05, "sigma": 0.5, "wage": 1.0,
                     "k0": 1.0, "c0": 0.5, "a": 0.05, "p": 2.0, "gamma": 1.0, "horizon": 400.0},
    EntryId.FISHERY: {"c1": 1.0, "c2": 2.0, "alpha": 1.0, "r": 0.5, "x0": 2.0, "k": 0.5,
                      "a": 2.0, "p": 3.0, "player": 1, "gamma": 0.5, "horizon": 200.0},
}

# What the full verification is expected to conclude for each entry.
EXPECTED = {
    EntryId.REGULATOR_B2: {"branch": "normal", "lambda0": 1.0, "Normality": "Pass",
                           "Sufficiency": "Pass", "sufficiency_via": "H_joint_xu", "exit": 0},
    EntryId.REGULATOR_B1: {"branch": "normal", "lambda0": 1.0, "Normality": "Pass",
                           "Sufficiency": "Pass", "sufficiency_via": "H_joint_xu", "exit": 0},
    EntryId.HALKIN: {"branch": "abnormal", "lambda0": 0.0, "Normality": "Pass",
                     "Sufficiency": "NotApplicable", "normal_branch": "Fail", "exit": 0},
    EntryId.RAMSEY: {"branch": "normal", "lambda0": 1.0, "Normality": "Fail", "degenerate": True,
                     "Sufficiency": "Fail", "exit": 1},
    EntryId.FISHERY: {"branch": "normal", "lambda0": 1.0, "Normality": "Pass",
                      "Sufficiency": "Pass", "sufficiency_via": "ScriptH_x", "exit": 0},
}


@dataclass(frozen=True)
class ClosedForm:
    """Analytic optimal process and multipliers (``None`` where not known)."""

    x: Callable
    u: Callable
    p: Optional[Callable]
    lambda0: Optional[float]


@dataclass(frozen=True)
class CatalogEntry:
    id: EntryId
    params: dict
    problem: ControlProblem
    closed_form: ClosedForm
    expected: dict
    horizon: float
    notes: dict = field(default_factory=dict)

    def reference(self, T: Optional[float] = None, n_nodes: int = 401) -> Trajectory:
        """Closed-form reference sampled on ``linspace(0, T, n_nodes)``."""
        T = self.horizon if T is None else float(T)
        grid = np.linspace(0.0, T, n_nodes)
        cf, prob = self.closed_form, self.problem
        xs = np.array([np.atleast_1d(cf.x(t)) for t in grid], dtype=float)
        us = np.array([np.atleast_1d(cf.u(t)) for t in grid], dtype=float)
        xd = np.array([prob.dyn(t, x, u) for t, x, u in zip(grid, xs, us)])
        return Trajectory(grid, xs, us, xd, x_fn=cf.x, u_fn=cf.u, closed_form=True)


def _merge(eid: EntryId, params: Optional[dict]) -> dict:
    out = dict(DEFAULTS[eid])
    for k, v in (params or {}).items():
        if k not in out:
            raise BadParams(f"unknown parameter {k!r} for {eid.value}; known: {sorted(out)}")
        try:
            out[k] = type(out[k])(v) if not isinstance(out[k], int) else int(v)
        except (TypeError, ValueError) as exc:
            raise BadParams(f"parameter {k!r} is not numeric: {v!r}") from exc
    for k, v in out.items():
        if not math.isfinite(float(v)):
            raise BadParams(f"parameter {k!r} must be finite")
    return out


def _require(cond: bool, msg: str):
    if not cond:
        raise BadParams(msg)


def _triple(omega, nu, eta, p):
    try:
        return W.WeightTriple(omega, nu, eta, p)
    except ValueError as exc:
        raise BadParams(str(exc)) from exc


# --------------------------------------------------------------------------
# regulators


def _regulator_b2(q: dict) -> CatalogEntry:
    d = q["shift"]
    _require(q["a"] > 0, "a must be positive")
    _require(d >= 0, "shift must be non-negative")
    _require(0 < q["eta_rate"] <= SQRT2 - 1, "eta_rate must lie in (0, sqrt(2)-1]")
    _require(q["gamma"] > 0, "gamma must be positive")

    def f(t, x, u):
        return 0.5 * (x[0] ** 2 + u[0] ** 2) * math.exp(d * t)

    prob = ControlProblem(
        n=1, m=1, f=f,
        f_x=lambda t, x, u: x * math.exp(d * t),
        f_u=lambda t, x, u: u * math.exp(d * t),
        phi=lambda t, x, u: 2.0 * x + u,
        phi_x=lambda t, x, u: [[2.0]],
        phi_u=lambda t, x, u: [[1.0]],
        x0=[q["x0"]], U=ControlSet.full(1),
        triple=_triple(W.exponential(2.0 + d), W.exponential(q["a"]), W.exponential(q["eta_rate"]), q["p"]),
        gamma=q["gamma"], name="RegulatorB2")
    x0, lam = q["x0"], 1.0 - SQRT2
    cf = ClosedForm(
        x=lambda t: np.array([x0 * math.exp(lam * t)]),
        u=lambda t: np.array([-(1.0 + SQRT2) * x0 * math.exp(lam * t)]),
        p=lambda t: np.array([-(1.0 + SQRT2) * x0 * math.exp(-(1.0 + SQRT2) * t)]),
        lambda0=1.0)
    return CatalogEntry(EntryId.REGULATOR_B2, q, prob, cf, EXPECTED[EntryId.REGULATOR_B2], q["horizon"])


def _regulator_b1(q: dict) -> CatalogEntry:
    _require(q["a"] > 0, "a must be positive")
    _require(q["x0"] != 0, "x0 must be non-zero")
    x0 = q["x0"]
    prob = ControlProblem(
        n=1, m=1, f=lambda t, x, u: 0.5 * (x[0] ** 2 + u[0] ** 2),
        f_x=lambda t, x, u: x, f_u=lambda t, x, u: u,
        phi=lambda t, x, u: x + u,
        phi_x=lambda t, x, u: [[1.0]], phi_u=lambda t, x, u: [[1.0]],
        x0=[x0], U=ControlSet.full(1),
        triple=_triple(W.exponential(2.0), W.exponential(q["a"]), W.constant(1.0), q["p"]),
        gamma=q["gamma"], name="RegulatorB1")
    cf = ClosedForm(x=lambda t: np.array([x0]), u=lambda t: np.array([-x0]),
                    p=lambda t: np.array([-x0 * math.exp(-2.0 * t)]), lambda0=1.0)
    return CatalogEntry(EntryId.REGULATOR_B1, q, prob, cf, EXPECTED[EntryId.REGULATOR_B1], q["horizon"])


# --------------------------------------------------------------------------
# Halkin


def halkin_adjoint(t, p0: float, lambda0: float, rho: float):
    """Solution of ``p' = -p + lambda0 e^{-rho t}`` with ``p(0) = p0``."""
    c = lambda0 / (1.0 - rho)
    t = np.asarray(t, dtype=float)
    return (p0 - c) * np.exp(-t) + c * np.exp(-rho * t)


def halkin_adjoint_printed(t, p0: float, lambda0: float, rho: float):
    """The often-quoted variant with a growing second term ``e^{(1-rho)t}``.

    It does not solve the adjoint equation; it is kept to show that the
    transversality check rejects it.
    """
    c = lambda0 / (1.0 - rho)
    t = np.asarray(t, dtype=float)
    return (p0 - c) * np.exp(-t) + c * np.exp((1.0 - rho) * t)


def _halkin(q: dict) -> CatalogEntry:
    rho = q["rho"]
    _require(0 < rho < 1, "rho must lie in (0, 1)")
    _require(0 < q["a"] < 2 * rho, "a must lie in (0, 2 rho)")
    prob = ControlProblem(
        n=1, m=1, f=lambda t, x, u: u[0] - x[0],
        f_x=lambda t, x, u: [-1.0], f_u=lambda t, x, u: [1.0],
        phi=lambda t, x, u: u**2 + x,
        phi_x=lambda t, x, u: [[1.0]], phi_u=lambda t, x, u: [[2.0 * u[0]]],
        x0=[0.0], U=ControlSet.box([0.0], [1.0]),
        triple=_triple(W.exponential(rho), W.exponential(q["a"]), W.constant(1.0), q["p"]),
        gamma=q["gamma"], sense=Sense.MAXIMIZE, name="HalkinModified")
    zero = lambda t: np.zeros(1)  # noqa: E731
    cf = ClosedForm(x=zero, u=zero, p=lambda t: np.array([math.exp(-t)]), lambda0=0.0)
    return CatalogEntry(EntryId.HALKIN, q, prob, cf, EXPECTED[EntryId.HALKIN], q["horizon"])


# --------------------------------------------------------------------------
# Ramsey


def ramsey_utility(c, sigma: float):
    c = np.asarray(c, dtype=float)
    if sigma == 1.0:
        return np.log(c)
    return (c ** (1.0 - sigma) - 1.0) / (1.0 - sigma)


def ramsey_rule_rate(params: Optional[dict] = None) -> float:
    """Constant consumption growth rate ``(r - (n + m + rho)) / sigma``."""
    q = _merge(EntryId.RAMSEY, params)
    _require(q["sigma"] > 0, "sigma must be positive")
    return (q["r"] - (q["n"] + q["m"] + q["rho"])) / q["sigma"]


def _ramsey(q: dict) -> CatalogEntry:
    _require(q["sigma"] > 0, "sigma must be positive")
    _require(q["rho"] > 0 and q["r"] > 0 and q["wage"] > 0, "rho, r and wage must be positive")
    _require(q["n"] >= 0 and q["m"] >= 0, "n and m must be non-negative")
    _require(q["r"] < q["n"] + q["m"], "needs r < n + m")
    _require(q["c0"] > 0 and q["k0"] > 0, "c0 and k0 must be positive")
    beta = q["r"] - (q["n"] + q["m"])
    sigma, w = q["sigma"], q["wage"]
    g = ramsey_rule_rate(q)

    def f(t, x, u):
        return float(ramsey_utility(max(u[0], C_FLOOR), sigma))

    prob = ControlProblem(
        n=1, m=1, f=f, f_x=lambda t, x, u: [0.0],
        f_u=lambda t, x, u: [max(u[0], C_FLOOR) ** (-sigma)],
        phi=lambda t, x, u: beta * x + w - u,
        phi_x=lambda t, x, u: [[beta]], phi_u=lambda t, x, u: [[-1.0]],
        x0=[q["k0"]], U=ControlSet.half_line([C_FLOOR]),
        triple=_triple(W.exponential(q["rho"]), W.exponential(q["a"]), W.constant(1.0), q["p"]),
        gamma=q["gamma"], sense=Sense.MAXIMIZE, name="RamseyGrowth")
    c0, k0 = q["c0"], q["k0"]
    if abs(beta - g) < 1e-14:
        raise BadParams("growth rate of consumption coincides with r - (n+m)")
    C = k0 + w / beta - c0 / (beta - g)
    # candidate following the constant-growth-rate rule
    cf = ClosedForm(
        x=lambda t: np.array([C * math.exp(beta * t) - w / beta + c0 * math.exp(g * t) / (beta - g)]),
        u=lambda t: np.array([c0 * math.exp(g * t)]),
        p=lambda t: np.zeros(1), lambda0=1.0)
    return CatalogEntry(EntryId.RAMSEY, q, prob, cf, EXPECTED[EntryId.RAMSEY], q["horizon"],
                        notes={"control_floor": C_FLOOR, "growth_rate": g})


@dataclass(frozen=True)
class NoPonziWitness:
    """Three-phase consumption path with a lower objective bound."""

    N: float
    lower_bound: float
    objective: float
    limit: float
    decay: DecayVerdict
    N_prime: float
    k_at_N: float


def _phase_one_consumption(t, rho: float, sigma: float):
    level = np.exp(rho * np.asarray(t, dtype=float))
    if sigma == 1.0:
        return np.exp(level)
    base = 1.0 + (1.0 - sigma) * level
    if np.any(base <= 0):
        raise BadParams("utility bounded above: no consumption reaches the required utility level")
    return base ** (1.0 / (1.0 - sigma))


def no_ponzi_witness(params: Optional[dict] = None, N: float = 5.0, horizon: float = 1000.0) -> NoPonziWitness:
    """Build the consumption path ``c^N`` and evaluate its bound and debt limit.

    On ``[0, N)`` utility is held at ``e^{rho t}``.  Consumption then equals the
    wage until ``|k| <= K = w / (2 |r - n - m|)`` (at ``N'``) and afterwards
    ``c = w - (r - n - m) k``.  Returns the bound ``N - |U(w/2)| / rho``, the
    objective of ``c^N`` and the trend-fitted limit of ``k(t) e^{-(r-n-m) t}``.
    """
    if not N > 0:
        raise BadParams("N must be positive")
    q = _merge(EntryId.RAMSEY, params)
    _require(q["r"] < q["n"] + q["m"], "needs r < n + m")
    rho, sigma, w = q["rho"], q["sigma"], q["wage"]
    beta = q["r"] - (q["n"] + q["m"])
    if sigma > 1.0 and math.exp(rho * N) >= 1.0 / (sigma - 1.0):
        raise BadParams("utility bounded above: phase one infeasible for this N")
    sol = solve_ivp(lambda t, k: beta * k + w - _phase_one_consumption(t, rho, sigma),
                    (0.0, N), [q["k0"]], method="DOP853", rtol=1e-12, atol=1e-12)
    kN = float(sol.y[0, -1])
    K = w / (2.0 * abs(beta))
    Np = N if abs(kN) <= K else N + math.log(K / abs(kN)) / beta
    kNp = kN * math.exp(beta * (Np - N))

    def k_of(t):
        t = np.asarray(t, dtype=float)
        return np.where(t < Np, kN * np.exp(beta * (t - N)), kNp * np.exp(2.0 * beta * (t - Np)))

    u_w = float(ramsey_utility(w, sigma))
    J = N
    if Np > N:
        J += u_w * (math.exp(-rho * N) - math.exp(-rho * Np)) / rho
    tail = integrate_semi_infinite(
        lambda t: np.exp(-rho * t) * ramsey_utility(w - beta * k_of(t), sigma), 1e-10, a=Np)
    J += tail.value
    ts = np.linspace(Np, max(horizon, Np + 10.0), 2001)
    debt = np.abs(k_of(ts) * np.exp(-beta * ts))
    dv = decay_verdict(ts, debt)
    lower = N - abs(float(ramsey_utility(w / 2.0, sigma))) / rho
    return NoPonziWitness(float(N), lower, float(J), float(debt[-1]), dv, float(Np), kN)


# --------------------------------------------------------------------------
# fishery


def fishery_equilibrium(c1: float, c2: float):
    """Equilibrium harvesting efforts ``(c2, c1) / (c1 + c2)^2``."""
    s = (c1 + c2) ** 2
    return c2 / s, c1 / s


def fishery_stock(z):
    """Map the transformed state back to the stock ``x = e^z``."""
    return np.exp(z)


def _fishery(q: dict) -> CatalogEntry:
    c1, c2, alpha, r = q["c1"], q["c2"], q["alpha"], q["r"]
    _require(c1 > 0 and c2 > 0 and r > 0 and alpha > 0, "c1, c2, r, alpha must be positive")
    _require(alpha > 1.0 / (c1 + c2), "needs alpha > 1/(c1 + c2)")
    _require(q["x0"] > 1.0, "needs x0 > 1 so that z(0) = ln x0 > 0")
    _require(0 < q["k"] < 1, "Weibull shape k must lie in (0, 1)")
    _require(q["a"] > 1, "nu = (1+t)^-a needs a > 1")
    _require(q["p"] > 1.0 / q["k"], "the exponent p must exceed 1/k")
    _require(q["player"] in (1, 2), "player must be 1 or 2")
    u1, u2 = fishery_equilibrium(c1, c2)
    i = q["player"]
    ci, uo, ui = (c1, u2, u1) if i == 1 else (c2, u1, u2)

    def f(t, x, u):
        s = u[0] + uo
        return (1.0 / s - ci) * u[0]

    prob = ControlProblem(
        n=1, m=1, f=f, f_x=lambda t, x, u: [0.0],
        f_u=lambda t, x, u: [uo / (u[0] + uo) ** 2 - ci],
        phi=lambda t, x, u: -r * x + alpha - u - uo,
        phi_x=lambda t, x, u: [[-r]], phi_u=lambda t, x, u: [[-1.0]],
        x0=[math.log(q["x0"])], U=ControlSet.half_line([0.0]),
        triple=_triple(W.weibull(q["k"]), W.polynomial(q["a"]), W.constant(1.0), q["p"]),
        gamma=q["gamma"], sense=Sense.MAXIMIZE, name=f"FisheryNashPlayer{i}")
    z0 = math.log(q["x0"])
    zbar = (alpha - (u1 + u2)) / r
    cf = ClosedForm(x=lambda t: np.array([(z0 - zbar) * math.exp(-r * t) + zbar]),
                    u=lambda t: np.array([ui]), p=lambda t: np.zeros(1), lambda0=1.0)
    return CatalogEntry(EntryId.FISHERY, q, prob, cf, EXPECTED[EntryId.FISHERY], q["horizon"],
                        notes={"u_star": (u1, u2), "z_bar": zbar, "other_control": uo})


_BUILDERS = {
    EntryId.REGULATOR_B2: _regulator_b2,
    EntryId.REGULATOR_B1: _regulator_b1,
    EntryId.HALKIN: _halkin,
    EntryId.RAMSEY: _ramsey,
    EntryId.FISHERY: _fishery,
}


def entry_ids() -> list:
    return [e.value for e in EntryId]


def build(entry_id, params: Optional[dict] = None) -> CatalogEntry:
    """Build a catalog entry with ``params`` overriding the defaults.

    Raises
    ------
    BadParams
        Unknown id or key, or parameters outside the documented range.
    """
    try:
        eid = EntryId(entry_id)
    except ValueError as exc:
        raise BadParams(f"unknown catalog id {entry_id!r}; known: {entry_ids()}") from exc
    return _BUILDERS[eid](_merge(eid, params))
