"""Distribution, weight and radius functions and their admissibility properties.

A :class:`WeightTriple` bundles the distribution function ``omega`` of the
objective, the weight ``nu`` of the function spaces and the neighbourhood
radius ``eta``.  :func:`certify` checks one of the properties F0 to F7 at
probe scale; it never claims a proof.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .errors import BadParams, BudgetExceeded, Divergent, NonFinite, QuadratureError
from .quadrature import integrate_semi_infinite
from .verdicts import Verdict, jsonable

T_PROBE = 1e3
N_PROBES = 512
MONOTONE_TOL = 1e-12


class Family(str, Enum):
    EXPONENTIAL = "Exponential"
    POLYNOMIAL = "Polynomial"
    WEIBULL = "Weibull"
    CONSTANT = "Constant"
    CUSTOM = "Custom"

    def __str__(self) -> str:
        return self.value


_ARITY = {Family.EXPONENTIAL: 1, Family.POLYNOMIAL: 1, Family.WEIBULL: 1, Family.CONSTANT: 1}


@dataclass(frozen=True)
class ScalarFunction:
    """A scalar function of time with a derivative.

    Parameters
    ----------
    family : Family
        ``Exponential(rate)`` is ``exp(-rate t)``, ``Polynomial(power)`` is
        ``(1+t)^(-power)``, ``Weibull(shape)`` is the density
        ``t^(k-1) exp(-t^k)``, ``Constant(level)`` is constant.
    params : tuple of float
        Family parameters.
    fn, dfn : callable, optional
        Only for ``Custom``: the function and (optionally) its derivative.
    label : str
        Free text used in reports for custom functions.
    """

    family: Family
    params: tuple = ()
    fn: Optional[Callable] = field(default=None, compare=False, repr=False)
    dfn: Optional[Callable] = field(default=None, compare=False, repr=False)
    label: str = ""

    def __post_init__(self):
        fam = Family(self.family)
        object.__setattr__(self, "family", fam)
        params = tuple(float(v) for v in self.params)
        object.__setattr__(self, "params", params)
        if fam is Family.CUSTOM:
            if self.fn is None:
                raise BadParams("custom functions need a callable")
            return
        if len(params) != _ARITY[fam]:
            raise BadParams(f"{fam} expects {_ARITY[fam]} parameter(s), got {len(params)}")
        if not all(math.isfinite(v) for v in params):
            raise BadParams(f"{fam} parameters must be finite")
        if fam is Family.WEIBULL and params[0] <= 0:
            raise BadParams("Weibull shape must be positive")

    @property
    def has_analytic_derivative(self) -> bool:
        return self.family is not Family.CUSTOM or self.dfn is not None

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        fam = self.family
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            if fam is Family.EXPONENTIAL:
                out = np.exp(-self.params[0] * t)
            elif fam is Family.POLYNOMIAL:
                out = (1.0 + t) ** (-self.params[0])
            elif fam is Family.WEIBULL:
                k = self.params[0]
                out = t ** (k - 1.0) * np.exp(-(t**k))
            elif fam is Family.CONSTANT:
                out = np.full_like(t, self.params[0])
            else:
                out = _apply(self.fn, t)
        return out if out.ndim else float(out)

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        fam = self.family
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            if fam is Family.EXPONENTIAL:
                a = self.params[0]
                out = -a * np.exp(-a * t)
            elif fam is Family.POLYNOMIAL:
                a = self.params[0]
                out = -a * (1.0 + t) ** (-a - 1.0)
            elif fam is Family.WEIBULL:
                k = self.params[0]
                out = np.exp(-(t**k)) * ((k - 1.0) * t ** (k - 2.0) - k * t ** (2.0 * k - 2.0))
            elif fam is Family.CONSTANT:
                out = np.zeros_like(t)
            elif self.dfn is not None:
                out = _apply(self.dfn, t)
            else:
                out = _central_difference(self, t)
        return out if out.ndim else float(out)

    def log(self, t):
        """Natural logarithm of the value, robust against underflow."""
        t = np.asarray(t, dtype=float)
        fam = self.family
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            if fam is Family.EXPONENTIAL:
                out = -self.params[0] * t
            elif fam is Family.POLYNOMIAL:
                out = -self.params[0] * np.log1p(t)
            elif fam is Family.WEIBULL:
                k = self.params[0]
                out = (k - 1.0) * np.log(t) - t**k
            elif fam is Family.CONSTANT:
                out = np.full_like(t, np.log(self.params[0]) if self.params[0] > 0 else np.nan)
                if self.params[0] == 0:
                    out[...] = -np.inf
            else:
                out = np.log(_apply(self.fn, t))
        return out if out.ndim else float(out)

    def log_derivative(self, t):
        """``f'(t) / f(t)``, evaluated without forming the quotient where possible."""
        t = np.asarray(t, dtype=float)
        fam = self.family
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            if fam is Family.EXPONENTIAL:
                out = np.full_like(t, -self.params[0])
            elif fam is Family.POLYNOMIAL:
                out = -self.params[0] / (1.0 + t)
            elif fam is Family.WEIBULL:
                k = self.params[0]
                out = (k - 1.0) / t - k * t ** (k - 1.0)
            elif fam is Family.CONSTANT:
                out = np.zeros_like(t)
            else:
                out = np.asarray(self.derivative(t), dtype=float) / np.asarray(self(t), dtype=float)
        return out if out.ndim else float(out)

    def to_dict(self) -> dict:
        d = {"family": self.family.value, "params": list(self.params)}
        if self.label:
            d["label"] = self.label
        return d

    def describe(self) -> str:
        if self.family is Family.CUSTOM:
            return f"Custom({self.label or 'callable'})"
        return f"{self.family.value}({', '.join(repr(p) for p in self.params)})"


def _apply(fn: Callable, t: np.ndarray) -> np.ndarray:
    try:
        out = np.asarray(fn(t), dtype=float)
        if out.shape == t.shape:
            return out
    except Exception:  # scalar-only callables
        pass
    flat = [float(fn(float(s))) for s in t.ravel()]
    return np.asarray(flat, dtype=float).reshape(t.shape)


def _central_difference(sf: ScalarFunction, t: np.ndarray) -> np.ndarray:
    h = 1e-6 * np.maximum(1.0, np.abs(t))
    lo = np.maximum(t - h, 0.0)
    hi = lo + 2.0 * h
    return (_apply(sf.fn, hi) - _apply(sf.fn, lo)) / (hi - lo)


def exponential(rate: float) -> ScalarFunction:
    return ScalarFunction(Family.EXPONENTIAL, (rate,))


def polynomial(power: float) -> ScalarFunction:
    return ScalarFunction(Family.POLYNOMIAL, (power,))


def weibull(shape: float) -> ScalarFunction:
    return ScalarFunction(Family.WEIBULL, (shape,))


def constant(level: float) -> ScalarFunction:
    return ScalarFunction(Family.CONSTANT, (level,))


def custom(fn: Callable, derivative: Optional[Callable] = None, label: str = "") -> ScalarFunction:
    return ScalarFunction(Family.CUSTOM, (), fn=fn, dfn=derivative, label=label)


def from_spec(spec: dict) -> ScalarFunction:
    """Build a family function from ``{"family": tag, "params": [...]}``."""
    tags = {f.value.lower(): f for f in Family}
    try:
        fam = tags[str(spec["family"]).lower()]
    except (KeyError, TypeError) as exc:
        raise BadParams(f"unknown function family in {spec!r}") from exc
    if fam is Family.CUSTOM:
        raise BadParams("custom functions cannot be built from a config")
    try:
        params = tuple(float(v) for v in spec.get("params", ()))
    except (TypeError, ValueError) as exc:
        raise BadParams(f"non-numeric parameter in {spec!r}") from exc
    return ScalarFunction(fam, params)


@dataclass(frozen=True)
class WeightTriple:
    """The triple ``(omega, nu, eta)`` together with the exponent ``p``."""

    omega: ScalarFunction
    nu: ScalarFunction
    eta: ScalarFunction
    p: float = 2.0

    def __post_init__(self):
        p = float(self.p)
        if not (1.0 < p < math.inf):
            raise BadParams(f"exponent p must lie in (1, inf), got {p}")
        object.__setattr__(self, "p", p)

    @property
    def q(self) -> float:
        return self.p / (self.p - 1.0)

    def to_dict(self) -> dict:
        return {"omega": self.omega.to_dict(), "nu": self.nu.to_dict(),
                "eta": self.eta.to_dict(), "p": self.p, "q": self.q}


class Property(str, Enum):
    F0 = "F0"
    F1 = "F1"
    F2 = "F2"
    F3 = "F3"
    F4 = "F4"
    F5 = "F5"
    F6 = "F6"
    F7 = "F7"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class PropertyCertificate:
    property_id: Property
    verdict: Verdict
    witness: tuple
    probes: int
    details: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.verdict is Verdict.FAIL and not self.witness:
            raise ValueError("a failing certificate needs a witness")

    def to_dict(self) -> dict:
        return {"property": self.property_id.value, "verdict": self.verdict.value,
                "witness": jsonable(list(self.witness)), "probes": self.probes,
                "details": jsonable(self.details)}


def probe_grid(t_probe: float = T_PROBE, n: int = N_PROBES, include_zero: bool = True) -> np.ndarray:
    grid = np.geomspace(1e-6, t_probe, n)
    return np.concatenate([[0.0], grid]) if include_zero else grid


def _integral(g: Callable, tol: float, **kw):
    """Run the half-line quadrature and map failures onto verdicts."""
    try:
        res = integrate_semi_infinite(g, tol=tol, **kw)
        return Verdict.PASS, res, None
    except Divergent as exc:
        return Verdict.FAIL, exc.partial, exc
    except (BudgetExceeded, NonFinite, QuadratureError) as exc:
        return Verdict.INCONCLUSIVE, exc.partial, exc


def _failure_point(exc, fallback: float) -> float:
    t = getattr(exc, "t", None)
    return float(t) if t is not None else fallback


def _positive(sf: ScalarFunction, grid: np.ndarray):
    """Index of the first probe where ``sf`` is not positive and finite, else None.

    Analytic families are judged on the log scale so that underflow of a
    rapidly decaying weight is not mistaken for a zero.
    """
    if sf.family is Family.CUSTOM:
        v = np.asarray(sf(grid), dtype=float)
        bad = ~np.isfinite(v) | (v <= 0)
    else:
        lv = np.asarray(sf.log(grid), dtype=float)
        bad = ~np.isfinite(lv)
    return int(np.argmax(bad)) if bad.any() else None


def _monotone(sf: ScalarFunction, grid: np.ndarray, name: str, prop: Property) -> PropertyCertificate:
    v = np.asarray(sf(grid), dtype=float)
    i = _positive(sf, grid)
    if i is not None:
        return PropertyCertificate(prop, Verdict.FAIL, (float(grid[i]), float(v[i])), grid.size,
                                   {"reason": f"{name} not positive and finite"})
    if sf.family is not Family.CUSTOM:
        v = np.asarray(sf.log(grid), dtype=float)
    inc = np.diff(v) - MONOTONE_TOL * (1.0 + np.abs(v[:-1]))
    if (inc > 0).any():
        i = int(np.argmax(inc > 0))
        return PropertyCertificate(prop, Verdict.FAIL, (float(grid[i]), float(grid[i + 1]), float(v[i + 1] - v[i])),
                                   grid.size, {"reason": f"{name} increases"})
    ends = np.asarray(sf(grid[[0, -1]]), dtype=float)
    return PropertyCertificate(prop, Verdict.PASS, (float(ends[0]), float(ends[1])), grid.size)


def certify(triple: WeightTriple, property_id, *, t_probe: float = T_PROBE,
            n_probes: int = N_PROBES, tol: float = 1e-9) -> PropertyCertificate:
    """Check one admissibility property of ``triple`` numerically.

    Parameters
    ----------
    triple : WeightTriple
    property_id : Property or str
        One of ``F0`` ... ``F7``.
    t_probe, n_probes : float, int
        Extent and size of the log-spaced probe grid.
    tol : float
        Quadrature tolerance for the integrability properties.

    Returns
    -------
    PropertyCertificate
        Quadrature budget exhaustion without a divergence verdict yields
        ``Inconclusive``; a detected divergence yields ``Fail``.
    """
    prop = Property(property_id)
    grid = probe_grid(t_probe, n_probes)
    nu, omega = triple.nu, triple.omega

    if prop is Property.F0:
        p, q = triple.p, triple.q
        gap = abs(1.0 / p + 1.0 / q - 1.0)
        ok = 1.0 < p < math.inf and 1.0 < q < math.inf and gap <= 4 * np.finfo(float).eps
        return PropertyCertificate(prop, Verdict.PASS if ok else Verdict.FAIL, (p, q), 1, {"gap": gap})

    if prop is Property.F1:
        i = _positive(nu, grid)
        if i is not None:
            return PropertyCertificate(prop, Verdict.FAIL, (float(grid[i]), float(nu(grid[i]))), grid.size)
        return PropertyCertificate(prop, Verdict.PASS, (float(np.min(nu(grid))),), grid.size)

    if prop is Property.F2:
        return _monotone(nu, grid, "nu", prop)

    if prop is Property.F7:
        return _monotone(triple.eta, grid, "eta", prop)

    if prop is Property.F3:
        v1, r1, e1 = _integral(nu, tol)
        v2, r2, e2 = _integral(lambda t: np.abs(nu.derivative(t)), tol)
        details = {"int_nu": None if r1 is None else r1.value,
                   "int_abs_nu_dot": None if r2 is None else r2.value,
                   "nu_verdict": v1.value, "nu_dot_verdict": v2.value}
        if Verdict.FAIL in (v1, v2):
            exc = e1 if v1 is Verdict.FAIL else e2
            return PropertyCertificate(prop, Verdict.FAIL, (_failure_point(exc, t_probe),), 2, details)
        if Verdict.INCONCLUSIVE in (v1, v2):
            return PropertyCertificate(prop, Verdict.INCONCLUSIVE, (), 2, details)
        return PropertyCertificate(prop, Verdict.PASS, (r1.value, r2.value), 2, details)

    if prop is Property.F4:
        ratio = np.abs(np.asarray(nu.log_derivative(grid), dtype=float))
        if not np.all(np.isfinite(ratio)):
            i = int(np.argmax(~np.isfinite(ratio)))
            return PropertyCertificate(prop, Verdict.FAIL, (float(grid[i]), float(ratio[i])), grid.size)
        i = int(np.argmax(ratio))
        k_hat = float(ratio[i])
        # A ratio still climbing steeply at the end of the probe range has no
        # visible bound.
        last = grid >= t_probe / 10.0
        growth = float(ratio[last][-1] / max(ratio[last][0], 1e-300)) if last.any() else 1.0
        if growth > 1.5 and i == grid.size - 1:
            return PropertyCertificate(prop, Verdict.INCONCLUSIVE, (k_hat, float(grid[i])), grid.size,
                                       {"growth_last_decade": growth})
        return PropertyCertificate(prop, Verdict.PASS, (k_hat, float(grid[i])), grid.size)

    if prop is Property.F5:
        w = np.asarray(omega(grid[1:]), dtype=float)
        neg = w < 0
        if neg.any():
            i = int(np.argmax(neg)) + 1
            return PropertyCertificate(prop, Verdict.FAIL, (float(grid[i]), float(w[i - 1])), grid.size,
                                       {"reason": "omega negative"})
        v, r, e = _integral(omega, tol)
        if v is Verdict.FAIL:
            return PropertyCertificate(prop, v, (_failure_point(e, t_probe),), grid.size, {"reason": str(e)})
        if v is Verdict.INCONCLUSIVE:
            return PropertyCertificate(prop, v, (), grid.size, {"reason": str(e)})
        return PropertyCertificate(prop, v, (r.value,), grid.size, {"certified_tail": r.certified})

    # F6: dominance of omega^q over nu^(q-1)
    q = triple.q

    def dom(t):
        # assembled on the log scale: nu^(1-q) overflows long before the
        # product does
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            lw = np.asarray(omega.log(t), dtype=float)
            out = np.exp((1.0 - q) * np.asarray(nu.log(t), dtype=float) + q * lw)
        return np.where(lw == -np.inf, 0.0, out)

    v, r, e = _integral(dom, tol)
    if v is Verdict.FAIL:
        return PropertyCertificate(prop, v, (_failure_point(e, t_probe),), 1, {"reason": str(e), "q": q})
    if v is Verdict.INCONCLUSIVE:
        return PropertyCertificate(prop, v, (), 1, {"reason": str(e), "q": q})
    return PropertyCertificate(prop, v, (r.value,), 1, {"q": q, "certified_tail": r.certified})


def certify_all(triple: WeightTriple, properties: Optional[Iterable] = None, **kw) -> dict:
    props = [Property(p) for p in (properties or list(Property))]
    return {p.value: certify(triple, p, **kw) for p in props}


def dominance_threshold_scan(family: Callable[[float], WeightTriple], param_grid: Sequence[float],
                             property_id="F6", **kw) -> list:
    """Certify one property across a one-parameter family of triples.

    Returns a list of ``(param, verdict)`` pairs in grid order.
    """
    return [(float(a), certify(family(float(a)), property_id, **kw).verdict) for a in param_grid]
