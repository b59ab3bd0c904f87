"""Arrow-type sufficient conditions checked by midpoint-concavity probes.

Two criteria are available once the normal-form necessary conditions hold:
concavity of the Pontryagin function ``H(t, ., ., p(t), 1)`` jointly in
``(x, u)``, or concavity of the maximised Hamiltonian ``x -> sup_u H`` on the
tube ``||x - x*(t)|| <= gamma eta(t)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from scipy.optimize import brentq, minimize, minimize_scalar

from .adjoint import AdjointSolution, necessary_suite
from .problem import ControlProblem, SetKind, Trajectory
from .verdicts import Condition, ConditionReport, Verdict, jsonable

N_T = 64
N_PAIRS = 64
CONCAVITY_TOL = 1e-9
UNBOUNDED_LIMIT = 1e8


class Scope(str, Enum):
    H_JOINT = "H_joint_xu"
    SCRIPT_H = "ScriptH_x"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class SupResult:
    value: float
    argmax: Optional[np.ndarray]
    unbounded: bool = False
    boundary: bool = False
    method: str = ""


def _H_factory(prob: ControlProblem, t: float, p):
    """``(x, u) -> H(t, x, u, p, 1)`` with ``omega(t)`` evaluated once."""
    w = float(prob.triple.omega(t))
    p = np.atleast_1d(np.asarray(p, dtype=float))
    cost, dyn = prob.cost, prob.dyn

    def H(x, u):
        return float(p @ dyn(t, x, u)) - w * cost(t, x, u)

    def Hu(x, u):
        return prob.dyn_u(t, x, u).T @ p - w * prob.cost_u(t, x, u)

    return H, Hu


def _quadratic_stationary(Hu, x, m: int) -> Optional[np.ndarray]:
    """Newton point if ``H_uu`` is constant and negative definite, else ``None``.

    ``H_u`` is affine for a quadratic, so a unit difference step is exact.
    """
    h = 1.0

    def hess(u0):
        out = np.empty((m, m))
        for j in range(m):
            e = np.zeros(m)
            e[j] = h
            out[:, j] = (Hu(x, u0 + e) - Hu(x, u0 - e)) / (2 * h)
        return 0.5 * (out + out.T)

    A = hess(np.zeros(m))
    B = hess(np.ones(m))
    if not (np.all(np.isfinite(A)) and np.allclose(A, B, rtol=1e-6, atol=1e-12)):
        return None
    if np.any(np.linalg.eigvalsh(A) >= 0):
        return None
    u = -np.linalg.solve(A, Hu(x, np.zeros(m)))
    g = Hu(x, u)
    if np.linalg.norm(g) > 1e-8 * (1.0 + np.linalg.norm(Hu(x, np.zeros(m)))):
        u = u - np.linalg.solve(A, g)
    return u


def _scan_1d(H, x, lo: float, hi: float, Hu=None) -> SupResult:
    f = lambda v: H(x, np.array([v]))  # noqa: E731
    if math.isfinite(hi):
        pts = np.linspace(lo, hi, 8)
    else:
        pts = lo + np.array([0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0])
    vals = np.array([f(v) for v in pts])
    k = int(np.argmax(vals))
    if not math.isfinite(hi) and k == pts.size - 1:
        # push the bracket out while H still increases
        a, b, fb = pts[-2], pts[-1], vals[-1]
        while True:
            c = lo + 2.0 * (b - lo)
            fc = f(c)
            if c - lo > UNBOUNDED_LIMIT:
                return SupResult(math.inf, None, True, False, "scan")
            if fc <= fb:
                pts = np.array([a, b, c])
                vals = np.array([f(a), fb, fc])
                k = 1
                break
            a, b, fb = b, c, fc
    left = pts[max(k - 1, 0)]
    right = pts[min(k + 1, pts.size - 1)]
    best_u, best_v = pts[k], vals[k]
    if right > left:
        r = minimize_scalar(lambda v: -f(v), bounds=(left, right), method="bounded",
                            options={"xatol": 1e-12 * max(1.0, abs(right))})
        if -r.fun >= best_v:
            best_u, best_v = float(r.x), float(-r.fun)
        if Hu is not None:
            # H is flat at the top, so comparing values stalls near sqrt(eps); H_u has a clean root
            g = lambda v: float(Hu(x, np.array([v]))[0])  # noqa: E731
            if g(left) > 0 > g(right):
                v = brentq(g, left, right, xtol=1e-15, rtol=4 * np.finfo(float).eps)
                if f(v) >= best_v - 1e-12 * max(1.0, abs(best_v)):
                    best_u, best_v = float(v), float(f(v))
    boundary = bool(abs(best_u - lo) <= 1e-9 * max(1.0, abs(lo))
                    or (math.isfinite(hi) and abs(best_u - hi) <= 1e-9 * max(1.0, abs(hi))))
    return SupResult(float(best_v), np.array([best_u]), False, boundary, "scan+brent")


def hamiltonian_sup(prob: ControlProblem, t: float, x, p, method: str = "auto") -> SupResult:
    """``sup_{u in U} H(t, x, u, p, 1)`` and a maximiser.

    ``method="auto"`` uses the closed-form stationary point when ``U`` is the
    whole space and ``H`` is detected to be a concave quadratic in ``u``;
    ``"ascent"`` forces the numeric search.  An unbounded supremum is
    reported with ``value = inf`` rather than raised.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    H, Hu = _H_factory(prob, t, p)
    U = prob.U
    m = prob.m
    if U.kind is SetKind.FULL_SPACE and method == "auto":
        u = _quadratic_stationary(Hu, x, m)
        if u is not None:
            return SupResult(H(x, u), u, False, False, "quadratic")
    if m == 1 and U.kind is not SetKind.FULL_SPACE:
        return _scan_1d(H, x, float(U.lower[0]), float(U.upper[0]), Hu)
    # general case: multistart quasi-Newton ascent
    bounds = [(None if not math.isfinite(a) else a, None if not math.isfinite(b) else b)
              for a, b in zip(U.lower, U.upper)]
    rng = np.random.default_rng(0)
    starts = [U.project(np.zeros(m))] + [U.project(rng.normal(scale=2.0, size=m)) for _ in range(7)]
    best = None
    for s in starts:
        r = minimize(lambda u: -H(x, u), s, jac=lambda u: -Hu(x, u), method="L-BFGS-B", bounds=bounds)
        if np.linalg.norm(r.x) > UNBOUNDED_LIMIT or not np.isfinite(r.fun):
            return SupResult(math.inf, None, True, False, "lbfgsb")
        if best is None or -r.fun > best[0]:
            best = (float(-r.fun), np.asarray(r.x, dtype=float))
    u = best[1]
    # escape test: does H keep growing along the final ascent direction?
    g = Hu(x, u)
    free = np.where(((g > 0) & ~np.isfinite(U.upper)) | ((g < 0) & ~np.isfinite(U.lower)), g, 0.0)
    if np.linalg.norm(free) > 1e-6 * (1.0 + abs(best[0])):
        d = free / np.linalg.norm(free)
        if all(H(x, u + s * d) > H(x, u + 0.5 * s * d) for s in (1e2, 1e4, 1e6)):
            return SupResult(math.inf, None, True, False, "lbfgsb")
    on_bound = bool(np.any(np.isclose(u, U.lower)) or np.any(np.isclose(u, U.upper)))
    return SupResult(best[0], u, False, on_bound, "lbfgsb")


@dataclass(frozen=True)
class ConcavityCertificate:
    scope: Scope
    verdict: Verdict
    worst_violation: float
    witness: dict = field(default_factory=dict)
    probes: int = 0

    def __post_init__(self):
        if self.verdict is Verdict.FAIL and not self.witness:
            raise ValueError("a failing certificate needs a witness")

    def to_dict(self) -> dict:
        return jsonable({"scope": self.scope, "verdict": self.verdict,
                         "worst_violation": self.worst_violation, "witness": self.witness,
                         "probes": self.probes})


def _probe_times(prob: ControlProblem, reference: Trajectory, n_t: int) -> np.ndarray:
    ts = np.linspace(0.0, reference.horizon, n_t + 1)[1:]
    return ts[np.isfinite(np.asarray(prob.triple.omega(ts), dtype=float))]


def _ball(rng, dim: int, radius: float) -> np.ndarray:
    d = rng.normal(size=dim)
    d /= max(np.linalg.norm(d), 1e-300)
    return radius * rng.uniform() ** (1.0 / dim) * d


def _midpoint_probe(scope: Scope, fn, centre, radius: float, rng, project, n_pairs: int, t: float):
    """Largest scaled midpoint violation of ``fn`` over random pairs in the ball."""
    worst = (0.0, None)
    dim = centre.size
    for _ in range(n_pairs):
        z1 = project(centre + _ball(rng, dim, radius))
        z2 = project(centre + _ball(rng, dim, radius))
        mid = 0.5 * (z1 + z2)
        a, b, c = fn(z1), fn(z2), fn(mid)
        if not all(math.isfinite(v) for v in (a, b, c)):
            return None, {"t": t, "z1": z1, "z2": z2, "reason": "supremum unbounded"}
        scale = max(1.0, abs(a), abs(b), abs(c))
        viol = (0.5 * (a + b) - c) / scale
        if viol > worst[0]:
            worst = (viol, {"t": t, "z1": z1, "z2": z2, "mid_value": c, "chord_value": 0.5 * (a + b)})
    return worst


def _concavity(scope: Scope, prob, reference, adj, n_t, n_pairs, seed, tol) -> ConcavityCertificate:
    if adj is None or adj.lambda0 != 1.0:
        return ConcavityCertificate(scope, Verdict.NOT_APPLICABLE, 0.0,
                                    {"reason": "requires lambda0 = 1"})
    rng = np.random.default_rng(seed)
    n = prob.n
    worst_v, worst_w = 0.0, None
    count = 0
    for t in _probe_times(prob, reference, n_t):
        p = adj.p_at(t)
        r = float(prob.radius(t))
        xs = reference.x_at(t)
        if scope is Scope.H_JOINT:
            H, _ = _H_factory(prob, t, p)
            centre = np.concatenate([xs, reference.u_at(t)])
            fn = lambda z, H=H: H(z[:n], z[n:])  # noqa: E731
            project = lambda z: np.concatenate([z[:n], prob.U.project(z[n:])])  # noqa: E731
        else:
            centre = xs
            fn = lambda z, t=t, p=p: hamiltonian_sup(prob, t, z, p).value  # noqa: E731
            project = lambda z: z  # noqa: E731
        viol, w = _midpoint_probe(scope, fn, centre, r, rng, project, n_pairs, float(t))
        count += n_pairs
        if viol is None:
            return ConcavityCertificate(scope, Verdict.INCONCLUSIVE, math.inf, w, count)
        if viol > worst_v:
            worst_v, worst_w = viol, w
    verdict = Verdict.FAIL if worst_v > tol else Verdict.PASS
    witness = worst_w or {}
    witness = dict(witness, tolerance=tol)
    return ConcavityCertificate(scope, verdict, float(worst_v), witness, count)


def concavity_check_H(prob: ControlProblem, adj: AdjointSolution, reference: Trajectory,
                      n_t: int = N_T, n_pairs: int = N_PAIRS, seed: int = 0,
                      tol: float = CONCAVITY_TOL) -> ConcavityCertificate:
    """Midpoint concavity of ``(x, u) -> H(t, x, u, p(t), 1)`` on the tube."""
    return _concavity(Scope.H_JOINT, prob, reference, adj, n_t, n_pairs, seed, tol)


def concavity_check_scriptH(prob: ControlProblem, adj: AdjointSolution, reference: Trajectory,
                            n_t: int = N_T, n_pairs: int = N_PAIRS, seed: int = 0,
                            tol: float = CONCAVITY_TOL) -> ConcavityCertificate:
    """Midpoint concavity of ``x -> sup_u H(t, x, u, p(t), 1)`` on the tube."""
    return _concavity(Scope.SCRIPT_H, prob, reference, adj, n_t, n_pairs, seed, tol)


def certify_weak_local_minimum(prob: ControlProblem, reference: Trajectory,
                               adj: Optional[AdjointSolution], necessary: Optional[dict] = None,
                               seed: int = 0) -> ConditionReport:
    """Combine the necessary conditions with either concavity criterion.

    Pass means: all necessary conditions hold with ``lambda0 = 1`` and at
    least one concavity probe passes, so ``(x*, u*)`` is certified as a
    weak local minimum at probe scale.  The witness lists every criterion
    that passed.
    """
    if adj is None or adj.lambda0 != 1.0:
        lam = None if adj is None else adj.lambda0
        return ConditionReport(Condition.SUFFICIENCY, Verdict.NOT_APPLICABLE, 0.0,
                               {"reason": "sufficient conditions need lambda0 = 1", "lambda0": lam})
    reports = necessary if necessary is not None else necessary_suite(prob, reference, adj)
    bad = {k: r.verdict.value for k, r in reports.items()
           if r.verdict in (Verdict.FAIL, Verdict.INCONCLUSIVE)}
    if bad:
        verdict = Verdict.FAIL if Verdict.FAIL.value in bad.values() else Verdict.INCONCLUSIVE
        return ConditionReport(Condition.SUFFICIENCY, verdict, 0.0,
                               {"reason": "necessary conditions not satisfied", "conditions": bad})
    certs = [concavity_check_H(prob, adj, reference, seed=seed),
             concavity_check_scriptH(prob, adj, reference, seed=seed)]
    criteria = [c.scope.value for c in certs if c.verdict is Verdict.PASS]
    witness = {"criteria": criteria, "certificates": {c.scope.value: c.to_dict() for c in certs}}
    if criteria:
        return ConditionReport(Condition.SUFFICIENCY, Verdict.PASS,
                               min(c.worst_violation for c in certs if c.verdict is Verdict.PASS), witness)
    witness["reason"] = "no concavity criterion satisfied"
    return ConditionReport(Condition.SUFFICIENCY, Verdict.INCONCLUSIVE,
                           max(c.worst_violation for c in certs if math.isfinite(c.worst_violation))
                           if any(math.isfinite(c.worst_violation) for c in certs) else 0.0, witness)
