"""Command-line front end: ``ihoc weights | verify | report``.

Exit codes: 0 all requested checks pass, 1 some check fails, 2 usage or
configuration error, 3 some check is inconclusive (and none fails).

Configuration is a YAML file.  Numeric fields are given as decimal strings
(plain numbers are accepted and read through their decimal text).  Example::

    problem: RegulatorB2
    params: {a: "3"}
    horizon: "30"
    suites: [normality, sufficiency, growth]

An external problem with linear dynamics ``x' = A x + B u + c`` and cost
``(x'Qx + u'Ru)/2 + q'x + r'u`` is given as a mapping with ``external:
linear``, the matrices, ``x0``, ``control_set``, ``weights`` and a
``reference`` CSV with columns ``t,x0..,u0..``.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import tempfile
import time
from dataclasses import replace
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from . import __version__
from . import catalog as cat
from . import weights as W
from .adjoint import normality_analysis
from .errors import BadParams, ConfigError, Divergent, IhocError
from .problem import ControlProblem, ControlSet, Sense, Trajectory, check_B2_growth
from .spaces import SampledFunction, weighted_Lp_norm, weighted_W1p_norm
from .sufficiency import certify_weak_local_minimum
from .verdicts import Verdict, jsonable, worst

ENV_OUT = "IHOC_OUT_DIR"
DEFAULT_OUT = "ihoc-out"
SUITES = ("normality", "sufficiency", "growth")
EXIT = {Verdict.PASS: 0, Verdict.NOT_APPLICABLE: 0, Verdict.FAIL: 1, Verdict.INCONCLUSIVE: 3}
CONFIG_KEYS = {"problem", "params", "weights", "p", "gamma", "horizon", "tolerances", "suites",
               "seed", "output_dir", "properties"}


# --------------------------------------------------------------------------
# configuration


def _decimal(v, name: str) -> str:
    """Canonical decimal text of a numeric config field."""
    if isinstance(v, bool):
        raise ConfigError(f"{name}: expected a number, got a boolean")
    try:
        d = Decimal(str(v).strip())
    except InvalidOperation as exc:
        raise ConfigError(f"{name}: {v!r} is not a decimal number") from exc
    if not d.is_finite():
        raise ConfigError(f"{name}: must be finite")
    return str(d.normalize()) if d != d.to_integral_value() else str(d.quantize(Decimal(1)))


def _num(text: str) -> float:
    return float(Decimal(text))


def _weight_spec(spec, name: str) -> dict:
    if not isinstance(spec, dict) or "family" not in spec:
        raise ConfigError(f"weights.{name}: needs a 'family' tag")
    params = spec.get("params", [])
    if not isinstance(params, list):
        params = [params]
    return {"family": str(spec["family"]),
            "params": [_decimal(v, f"weights.{name}.params") for v in params]}


def _matrix(v, name: str) -> list:
    if not isinstance(v, list):
        v = [v]
    return [_matrix(r, name) if isinstance(r, list) else _decimal(r, name) for r in v]


def normalize_config(raw, base: Optional[Path] = None) -> dict:
    """Validate a parsed config and return its canonical form."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    unknown = set(raw) - CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    cfg: dict = {}
    prob = raw.get("problem")
    if isinstance(prob, str):
        if prob not in cat.entry_ids():
            raise ConfigError(f"unknown catalog id {prob!r}; known: {cat.entry_ids()}")
        cfg["problem"] = prob
    elif isinstance(prob, dict):
        cfg["problem"] = _external_spec(prob, base)
    elif prob is not None:
        raise ConfigError("problem must be a catalog id or an external problem mapping")
    params = raw.get("params", {}) or {}
    if not isinstance(params, dict):
        raise ConfigError("params must be a mapping")
    cfg["params"] = {str(k): _decimal(v, f"params.{k}") for k, v in sorted(params.items())}
    ws = raw.get("weights", {}) or {}
    if not isinstance(ws, dict) or set(ws) - {"omega", "nu", "eta"}:
        raise ConfigError("weights may only set omega, nu and eta")
    cfg["weights"] = {k: _weight_spec(v, k) for k, v in sorted(ws.items())}
    for key in ("p", "gamma", "horizon"):
        if raw.get(key) is not None:
            cfg[key] = _decimal(raw[key], key)
    if "horizon" in cfg and not _num(cfg["horizon"]) > 0:
        raise ConfigError("horizon must be positive")
    if "gamma" in cfg and not _num(cfg["gamma"]) > 0:
        raise ConfigError("gamma must be positive")
    tols = raw.get("tolerances", {}) or {}
    if not isinstance(tols, dict):
        raise ConfigError("tolerances must be a mapping")
    cfg["tolerances"] = {}
    for k, v in sorted(tols.items()):
        t = _decimal(v, f"tolerances.{k}")
        if not _num(t) > 0:
            raise ConfigError(f"tolerances.{k} must be positive")
        cfg["tolerances"][str(k)] = t
    cfg["suites"] = _suites(raw.get("suites", list(SUITES)))
    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, (int, str)) or not str(seed).lstrip("-").isdigit():
        raise ConfigError("seed must be an integer")
    cfg["seed"] = int(seed)
    props = raw.get("properties")
    if props is not None:
        try:
            cfg["properties"] = [W.Property(p).value for p in props]
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"properties must be among {[p.value for p in W.Property]}") from exc
    if raw.get("output_dir") is not None:
        cfg["output_dir"] = str(raw["output_dir"])
    return cfg


def _suites(suites) -> list:
    if isinstance(suites, str):
        suites = [s.strip() for s in suites.split(",") if s.strip()]
    if not isinstance(suites, list) or not suites or any(s not in SUITES for s in suites):
        raise ConfigError(f"suites must be a non-empty subset of {list(SUITES)}")
    return [s for s in SUITES if s in suites]


def _external_spec(spec: dict, base: Optional[Path]) -> dict:
    if spec.get("external") != "linear":
        raise ConfigError("only external problems of kind 'linear' are supported")
    out = {"external": "linear"}
    for key in ("A", "B", "x0"):
        if key not in spec:
            raise ConfigError(f"external problem needs {key!r}")
    for key in ("A", "B", "c", "Q", "R", "q", "r", "x0"):
        if key in spec:
            out[key] = _matrix(spec[key], f"problem.{key}")
    try:
        out["sense"] = Sense(spec.get("sense", "Minimize")).value
    except ValueError as exc:
        raise ConfigError("sense must be Minimize or Maximize") from exc
    cs = spec.get("control_set", {"kind": "FullSpace"})
    if not isinstance(cs, dict) or cs.get("kind") not in ("FullSpace", "Box", "HalfLine"):
        raise ConfigError("control_set.kind must be FullSpace, Box or HalfLine")
    out["control_set"] = {"kind": cs["kind"]}
    for key in ("lower", "upper"):
        if key in cs:
            out["control_set"][key] = _matrix(cs[key], f"control_set.{key}")
    ref = spec.get("reference")
    if ref is not None:
        path = Path(str(ref))
        if base is not None and not path.is_absolute():
            path = base / path
        out["reference"] = str(path)
    return out


def load_config(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML: {exc}") from exc
    return normalize_config(raw, Path(path).resolve().parent)


def canonical_json(obj) -> str:
    return json.dumps(jsonable(obj), sort_keys=True, indent=2, ensure_ascii=True) + "\n"


def config_hash(cfg: dict) -> str:
    core = {k: v for k, v in cfg.items() if k != "output_dir"}
    return hashlib.sha256(canonical_json(core).encode()).hexdigest()


def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def output_dir(args_out: Optional[str], cfg: Optional[dict]) -> Path:
    """``--out`` wins, then the environment variable, then the config, then a default."""
    for cand in (args_out, os.environ.get(ENV_OUT), (cfg or {}).get("output_dir")):
        if cand:
            return Path(cand)
    return Path(DEFAULT_OUT)


# --------------------------------------------------------------------------
# building problems


def _triple_from(cfg: dict, base: Optional[W.WeightTriple]) -> W.WeightTriple:
    ws = cfg.get("weights", {})
    parts = {}
    for name in ("omega", "nu", "eta"):
        if name in ws:
            parts[name] = W.from_spec({"family": ws[name]["family"],
                                       "params": [_num(v) for v in ws[name]["params"]]})
        elif base is not None:
            parts[name] = getattr(base, name)
        elif name == "eta":
            parts[name] = W.constant(1.0)
        else:
            raise ConfigError(f"weights.{name} is required")
    p = _num(cfg["p"]) if "p" in cfg else (base.p if base is not None else 2.0)
    return W.WeightTriple(parts["omega"], parts["nu"], parts["eta"], p)


def _arr(v) -> np.ndarray:
    return np.array(_floats(v if isinstance(v, list) else [v]), dtype=float)


def _floats(v):
    return [_floats(r) if isinstance(r, list) else _num(r) for r in v]


def _linear_problem(spec: dict, triple: W.WeightTriple, gamma: float) -> ControlProblem:
    A = np.atleast_2d(_arr(spec["A"]))
    n = A.shape[0]
    B = _arr(spec["B"]).reshape(n, -1)
    m = B.shape[1]
    c = _arr(spec.get("c", ["0"] * n)).reshape(n)
    Q = _arr(spec.get("Q", [["0"] * n] * n)).reshape(n, n)
    R = _arr(spec.get("R", [["0"] * m] * m)).reshape(m, m)
    qv = _arr(spec.get("q", ["0"] * n)).reshape(n)
    rv = _arr(spec.get("r", ["0"] * m)).reshape(m)
    x0 = _arr(spec["x0"]).reshape(n)
    if A.shape != (n, n):
        raise ConfigError("A must be square")
    cs = spec["control_set"]
    kind = cs["kind"]
    if kind == "FullSpace":
        U = ControlSet.full(m)
    elif kind == "Box":
        U = ControlSet.box(_arr(cs["lower"]).reshape(m), _arr(cs["upper"]).reshape(m))
    else:
        U = ControlSet.half_line(_arr(cs["lower"]).reshape(m))
    return ControlProblem(
        n=n, m=m,
        f=lambda t, x, u: 0.5 * (x @ Q @ x + u @ R @ u) + qv @ x + rv @ u,
        f_x=lambda t, x, u: 0.5 * (Q + Q.T) @ x + qv,
        f_u=lambda t, x, u: 0.5 * (R + R.T) @ u + rv,
        phi=lambda t, x, u: A @ x + B @ u + c,
        phi_x=lambda t, x, u: A, phi_u=lambda t, x, u: B,
        x0=x0, U=U, triple=triple, gamma=gamma, sense=Sense(spec["sense"]), name="external-linear")


def _read_reference(path: str, prob: ControlProblem) -> Trajectory:
    try:
        with open(path, encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read reference trajectory: {exc}") from exc
    if len(rows) < 3:
        raise ConfigError("reference trajectory needs a header and at least two rows")
    header = [h.strip() for h in rows[0]]
    want = ["t"] + [f"x{i}" for i in range(prob.n)] + [f"u{j}" for j in range(prob.m)]
    if header[: len(want)] != want:
        raise ConfigError(f"reference columns must start with {','.join(want)}")
    try:
        data = np.array([[float(v) for v in r[: len(want)]] for r in rows[1:] if r], dtype=float)
    except ValueError as exc:
        raise ConfigError(f"non-numeric entry in reference trajectory: {exc}") from exc
    t, x, u = data[:, 0], data[:, 1: 1 + prob.n], data[:, 1 + prob.n:]
    if t[0] != 0.0:
        raise ConfigError("reference trajectory must start at t = 0")
    xd = np.array([prob.dyn(s, xv, uv) for s, xv, uv in zip(t, x, u)])
    return Trajectory(t, x, u, xd)


def resolve(cfg: dict, horizon: Optional[float] = None):
    """Return ``(problem, reference, catalog entry or None)`` for a config."""
    spec = cfg.get("problem")
    if spec is None:
        raise ConfigError("config names no problem")
    gamma = _num(cfg["gamma"]) if "gamma" in cfg else None
    if isinstance(spec, str):
        entry = cat.build(spec, cfg.get("params"))
        prob = entry.problem
        if cfg.get("weights") or "p" in cfg:
            prob = prob.with_triple(_triple_from(cfg, prob.triple))
        if gamma is not None:
            prob = replace(prob, gamma=gamma)
        T = horizon or (_num(cfg["horizon"]) if "horizon" in cfg else entry.horizon)
        return prob, entry.reference(T), entry
    if cfg.get("params"):
        raise ConfigError("params apply to catalog problems only")
    prob = _linear_problem(spec, _triple_from(cfg, None), gamma or 1.0)
    if "reference" not in spec:
        raise ConfigError("external problem needs a reference trajectory")
    ref = _read_reference(spec["reference"], prob)
    T = horizon or (_num(cfg["horizon"]) if "horizon" in cfg else None)
    if T is not None and T < ref.horizon:
        ref = ref.restrict(T)
    return prob, ref, None


# --------------------------------------------------------------------------
# commands


def _problem_block(prob: ControlProblem) -> dict:
    return {"name": prob.name, "n": prob.n, "m": prob.m, "sense": prob.sense.value,
            "control_set": prob.U.to_dict(), "weights": prob.triple.to_dict(), "gamma": prob.gamma}


def _norms(prob: ControlProblem, ref: Trajectory) -> dict:
    out = {}
    T = ref.horizon
    if ref.closed_form:
        xs = SampledFunction.from_callable(ref.x_at, T, derivative=lambda t: prob.dyn(t, ref.x_at(t), ref.u_at(t)))
        us = SampledFunction.from_callable(ref.u_at, T)
    else:
        grid = ref.grid - ref.grid[0]
        xs = SampledFunction(grid, ref.x, ref.xdot)
        us = SampledFunction(grid, ref.u)
    for key, fn in (("x_W1p", lambda: weighted_W1p_norm(xs, prob.triple)),
                    ("u_Lp", lambda: weighted_Lp_norm(us, prob.triple, tol=1e-9).value)):
        try:
            out[key] = float(fn())
        except Divergent:
            out[key] = math.inf
        except IhocError as exc:
            out[key] = f"unavailable: {type(exc).__name__}"
    return out


def run_verify(cfg: dict, horizon: Optional[float] = None, tol: Optional[float] = None):
    """Run the requested suites; returns ``(report, csv_text, timings)``."""
    prob, ref, entry = resolve(cfg, horizon)
    tol = tol or (_num(cfg["tolerances"]["adjoint"]) if "adjoint" in cfg.get("tolerances", {}) else 1e-10)
    seed = cfg.get("seed", 0)
    suites = cfg["suites"]
    timings = {}
    report: dict = {"tool": {"name": "ihoc", "version": __version__}, "config": cfg,
                    "config_hash": config_hash(cfg), "problem": _problem_block(prob),
                    "horizon": ref.horizon, "suites": {}}
    adj = nrep = None
    if "normality" in suites or "sufficiency" in suites:
        t0 = time.perf_counter()
        adj, nrep = normality_analysis(prob, ref, tol=tol, seed=seed)
        timings["normality"] = time.perf_counter() - t0
        w = nrep.witness
        report.update({"branch": w["branch"], "lambda0": w["lambda0"], "verdict_string": w["summary"],
                       "degenerate": w["degenerate"]})
    if "normality" in suites:
        block = nrep.to_dict()
        block["conditions"] = {k: r.to_dict() for k, r in nrep.series["reports"].items()}
        report["suites"]["normality"] = block
    if "sufficiency" in suites:
        t0 = time.perf_counter()
        srep = certify_weak_local_minimum(prob, ref, adj, nrep.series.get("reports"), seed=seed)
        timings["sufficiency"] = time.perf_counter() - t0
        report["suites"]["sufficiency"] = srep.to_dict()
    if "growth" in suites:
        t0 = time.perf_counter()
        report["suites"]["growth"] = check_B2_growth(prob, ref).to_dict()
        timings["growth"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    report["norms"] = _norms(prob, ref)
    timings["norms"] = time.perf_counter() - t0

    if adj is not None and entry is not None and entry.closed_form.p is not None \
            and entry.closed_form.lambda0 == adj.lambda0 and adj.lambda0 == 1.0:
        exact = np.array([entry.closed_form.p(t) for t in adj.grid])
        scale = np.maximum(np.abs(exact), 1e-300)
        nz = np.abs(exact) > 0
        rel = np.where(nz, np.abs(adj.p - exact) / scale, np.abs(adj.p))
        report["adjoint_vs_closed_form"] = {"max_error": float(np.max(rel)),
                                            "measure": "relative where p != 0, absolute otherwise"}
    verdicts = [Verdict(b["verdict"]) for b in report["suites"].values()]
    overall = worst(verdicts)
    report["overall"] = overall.value
    report["exit_code"] = EXIT[overall]
    if entry is not None:
        exp = dict(entry.expected)
        report["expected"] = exp
        report["matches_expected"] = _matches(report, exp)
    return report, _csv(prob, ref, adj, nrep), timings


def _matches(report: dict, exp: dict) -> bool:
    s = report["suites"]
    checks = []
    if "normality" in s:
        checks += [report.get("branch") == exp["branch"], report.get("lambda0") == exp["lambda0"],
                   s["normality"]["verdict"] == exp["Normality"]]
        if "degenerate" in exp:
            checks.append(report.get("degenerate") == exp["degenerate"])
        if "normal_branch" in exp:
            checks.append(s["normality"]["witness"]["normal_branch"]["verdict"] == exp["normal_branch"])
    if "sufficiency" in s:
        checks.append(s["sufficiency"]["verdict"] == exp["Sufficiency"])
        if "sufficiency_via" in exp:
            checks.append(exp["sufficiency_via"] in s["sufficiency"]["witness"].get("criteria", []))
    if set(s) == set(SUITES):
        checks.append(report["exit_code"] == exp["exit"])
    return all(checks)


def _fmt(v: float) -> str:
    return "nan" if not math.isfinite(v) and math.isnan(v) else repr(float(v))


def _csv(prob: ControlProblem, ref: Trajectory, adj, nrep) -> str:
    """``t,x0..,u0..,p0..,adjoint_residual,Hu_violation`` on the adjoint (or reference) grid."""
    cols = (["t"] + [f"x{i}" for i in range(prob.n)] + [f"u{j}" for j in range(prob.m)]
            + [f"p{i}" for i in range(prob.n)] + ["adjoint_residual", "Hu_violation"])
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(cols)
    grid = adj.grid if adj is not None else ref.grid
    reports = nrep.series.get("reports", {}) if nrep is not None else {}
    res = reports.get("AdjointResidual")
    vi = reports.get("VariationalInequality")
    res_s = res.series.get("adjoint_residual") if res is not None else None
    vi_s = vi.series.get("Hu_violation") if vi is not None else None
    for i, t in enumerate(grid):
        row = [t, *ref.x_at(t), *ref.u_at(t)]
        row += list(adj.p[i]) if adj is not None else [math.nan] * prob.n
        row.append(res_s[i] if res_s is not None and len(res_s) == len(grid) else math.nan)
        row.append(vi_s[i] if vi_s is not None and len(vi_s) == len(grid) else math.nan)
        wr.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def cmd_verify(args) -> int:
    cfg = load_config(args.config)
    if args.suite:
        cfg["suites"] = _suites(args.suite)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.horizon is not None:
        cfg["horizon"] = _decimal(args.horizon, "--horizon")
    if args.tol is not None:
        cfg["tolerances"] = dict(cfg["tolerances"], adjoint=_decimal(args.tol, "--tol"))
    report, csv_text, timings = run_verify(cfg)
    out = output_dir(args.out, cfg)
    stem = f"{_stem(cfg)}-{report['config_hash'][:12]}"
    _atomic_write(out / f"{stem}.json", canonical_json(report))
    _atomic_write(out / f"{stem}.csv", csv_text)
    _atomic_write(out / f"{stem}.timings.json", canonical_json(timings))
    print(f"{stem}: {report.get('verdict_string', report['overall'])} -> {report['overall']}")
    return report["exit_code"]


def _stem(cfg: dict) -> str:
    p = cfg.get("problem")
    return p if isinstance(p, str) else "external"


def cmd_weights(args) -> int:
    cfg = load_config(args.config)
    if isinstance(cfg.get("problem"), str):
        base = cat.build(cfg["problem"], cfg.get("params")).problem.triple
        triple = _triple_from(cfg, base)
    else:
        triple = _triple_from(cfg, None)
    props = cfg.get("properties") or [p.value for p in W.Property]
    certs = {p: W.certify(triple, p) for p in props}
    verdict = worst(c.verdict for c in certs.values())
    doc = {"tool": {"name": "ihoc", "version": __version__}, "config": cfg,
           "config_hash": config_hash(cfg), "weights": triple.to_dict(),
           "certificates": {k: c.to_dict() for k, c in certs.items()}, "overall": verdict.value}
    out = output_dir(args.out, cfg)
    path = out / f"weights-{config_hash(cfg)[:12]}.json"
    _atomic_write(path, canonical_json(doc))
    for k, c in certs.items():
        print(f"{k}: {c.verdict.value}")
    return EXIT[verdict]


REPORT_CONDITIONS = ("Representation", "AdjointResidual", "VariationalInequality", "TransversalityNorm",
                     "TransversalityPairing", "StrongTransversality", "Michel")


def summarize(paths) -> list:
    """One row per distinct run (deduplicated by config hash), sorted by problem."""
    rows = {}
    for p in paths:
        try:
            with open(p, encoding="utf-8") as fh:
                doc = json.load(fh)
            h = doc["config_hash"]
            suites = doc["suites"]
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"unreadable report {p}: {exc}") from exc
        conds = suites.get("normality", {}).get("conditions", {})
        residuals = [c["residual"] for c in conds.values() if isinstance(c.get("residual"), (int, float))]
        row = {"problem": doc["problem"].get("name") or _stem(doc["config"]),
               "branch": doc.get("branch", ""), "lambda0": doc.get("lambda0", ""),
               "Normality": suites.get("normality", {}).get("verdict", ""),
               **{c: conds.get(c, {}).get("verdict", "") for c in REPORT_CONDITIONS},
               "Sufficiency": suites.get("sufficiency", {}).get("verdict", ""),
               "B2Growth": suites.get("growth", {}).get("verdict", ""),
               "max_residual": max(residuals) if residuals else "",
               "overall": doc.get("overall", ""),
               "matches_expected": doc.get("matches_expected", ""),
               "config_hash": h[:12]}
        rows[h] = row
    return sorted(rows.values(), key=lambda r: (str(r["problem"]), r["config_hash"]))


def cmd_report(args) -> int:
    if not args.reports:
        raise ConfigError("no report files given")
    rows = summarize(args.reports)
    buf = io.StringIO()
    wr = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    wr.writeheader()
    wr.writerows(rows)
    text = buf.getvalue()
    if args.out or os.environ.get(ENV_OUT):
        _atomic_write(output_dir(args.out, None) / "summary.csv", text)
    sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ihoc", description="Check optimality conditions of "
                                 "infinite-horizon control problems in weighted Sobolev spaces.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--out", metavar="DIR", help=f"output directory (overrides ${ENV_OUT})")
        if config_required:
            p.add_argument("--config", metavar="PATH", required=True, help="YAML run configuration")

    w = sub.add_parser("weights", help="certify the properties F0-F7 of a weight triple")
    common(w)
    w.set_defaults(func=cmd_weights)
    v = sub.add_parser("verify", help="check necessary and sufficient conditions for a process")
    common(v)
    v.add_argument("--horizon", metavar="T", help="truncation horizon (decimal)")
    v.add_argument("--tol", metavar="X", help="adjoint tolerance (decimal)")
    v.add_argument("--suite", metavar="LIST", help=f"comma-separated subset of {','.join(SUITES)}")
    v.add_argument("--seed", metavar="N", type=int, help="seed for random probe directions")
    v.set_defaults(func=cmd_verify)
    r = sub.add_parser("report", help="tabulate verify reports")
    common(r, config_required=False)
    r.add_argument("reports", nargs="*", metavar="REPORT", help="verify report files")
    r.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        return args.func(args)
    except (ConfigError, BadParams) as exc:
        print(f"ihoc: configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
