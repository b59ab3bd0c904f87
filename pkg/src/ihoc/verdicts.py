"""Verdicts, condition reports and the decay test behind every "lim = 0"."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable

import numpy as np


class Verdict(str, Enum):
    PASS = "Pass"
    FAIL = "Fail"
    INCONCLUSIVE = "Inconclusive"
    NOT_APPLICABLE = "NotApplicable"

    def __str__(self) -> str:
        return self.value


_SEVERITY = {Verdict.PASS: 0, Verdict.NOT_APPLICABLE: 0, Verdict.INCONCLUSIVE: 1, Verdict.FAIL: 2}


def worst(verdicts: Iterable[Verdict]) -> Verdict:
    """Most severe verdict; ``NotApplicable`` counts as neutral."""
    out = Verdict.PASS
    for v in verdicts:
        if _SEVERITY[v] > _SEVERITY[out]:
            out = v
    return out


def acceptable(verdicts: Iterable[Verdict]) -> bool:
    return all(v in (Verdict.PASS, Verdict.NOT_APPLICABLE) for v in verdicts)


class Condition(str, Enum):
    ADJOINT_RESIDUAL = "AdjointResidual"
    REPRESENTATION = "Representation"
    VARIATIONAL_INEQUALITY = "VariationalInequality"
    TRANSVERSALITY_NORM = "TransversalityNorm"
    TRANSVERSALITY_PAIRING = "TransversalityPairing"
    STRONG_TRANSVERSALITY = "StrongTransversality"
    MICHEL = "Michel"
    STABILITY_S = "StabilityS"
    NORMALITY = "Normality"
    B2_GROWTH = "B2Growth"
    SUFFICIENCY = "Sufficiency"

    def __str__(self) -> str:
        return self.value


def jsonable(obj: Any) -> Any:
    """Convert numpy scalars/arrays and non-finite floats into JSON-safe values."""
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if hasattr(obj, "to_dict"):
        return obj.to_dict()
    return obj


@dataclass
class ConditionReport:
    """Quantitative record of one checked condition.

    ``series`` carries per-node arrays (for CSV export) and is not part of
    the serialized report.
    """

    condition_id: Condition
    verdict: Verdict
    residual: float
    witness: dict = field(default_factory=dict)
    series: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if not (self.residual >= 0 or math.isnan(self.residual)):
            raise ValueError("residual must be non-negative")
        if self.verdict is Verdict.FAIL and not self.witness:
            raise ValueError("a failing report needs a witness")

    @property
    def passed(self) -> bool:
        return self.verdict is Verdict.PASS

    def to_dict(self) -> dict:
        return {
            "condition": self.condition_id.value,
            "verdict": self.verdict.value,
            "residual": jsonable(self.residual),
            "witness": jsonable(self.witness),
        }


# "lim_{t->inf} v(t) = 0" is judged on the final tenth of the horizon.
DECAY_RATIO = 1e-4
TAIL_FRACTION = 0.1


@dataclass(frozen=True)
class DecayVerdict:
    verdict: Verdict
    slope: float
    terminal: float
    scale: float

    def to_dict(self) -> dict:
        return jsonable({"verdict": self.verdict, "slope": self.slope,
                         "terminal": self.terminal, "scale": self.scale})


def decay_verdict(t: np.ndarray, v: np.ndarray, ratio: float = DECAY_RATIO) -> DecayVerdict:
    """Decide whether the non-negative samples ``v(t)`` tend to zero.

    Pass when the log-linear trend over the final tenth of the horizon is
    decreasing and the terminal value is at most ``ratio`` times the largest
    sample.  A decreasing trend that has not yet fallen that far is
    Inconclusive (horizon too short); a non-decreasing one is Fail.
    """
    t = np.asarray(t, dtype=float)
    v = np.abs(np.asarray(v, dtype=float))
    ok = np.isfinite(v) & np.isfinite(t)
    t, v = t[ok], v[ok]
    if v.size < 4:
        return DecayVerdict(Verdict.INCONCLUSIVE, math.nan, math.nan, math.nan)
    scale = float(v.max())
    terminal = float(v[-1])
    if scale == 0.0:
        return DecayVerdict(Verdict.PASS, -math.inf, terminal, scale)
    t_cut = t[0] + (1.0 - TAIL_FRACTION) * (t[-1] - t[0])
    w = (t >= t_cut) & (v > 0)
    if w.sum() < 3:
        w = v > 0
        w[: max(0, w.size - 3)] = False
    slope = float(np.polyfit(t[w], np.log(v[w]), 1)[0]) if w.sum() >= 2 else math.nan
    if terminal <= 1e-12 * scale or (slope < 0 and terminal <= ratio * scale):
        verdict = Verdict.PASS
    elif slope < 0:
        verdict = Verdict.INCONCLUSIVE
    else:
        verdict = Verdict.FAIL
    return DecayVerdict(verdict, slope, terminal, scale)
