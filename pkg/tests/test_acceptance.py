"""Acceptance suite: one test per criterion, each printing a single status line."""
import math
import time

import numpy as np

from ihoc import cli
from ihoc import weights as W
from ihoc.adjoint import (AdjointSolution, adjoint_by_representation, adjoint_residual,
                          fundamental_matrices, necessary_suite, normality_analysis, stability_probe,
                          transversality_checks)
from ihoc.catalog import (build, entry_ids, fishery_equilibrium, halkin_adjoint_printed,
                          no_ponzi_witness, ramsey_rule_rate)
from ihoc.problem import H_u, gradient_consistency, integrate_state
from ihoc.spaces import SampledFunction, holder_check, weighted_Lp_norm
from ihoc.sufficiency import certify_weak_local_minimum, hamiltonian_sup
from ihoc.verdicts import Verdict

R2 = math.sqrt(2.0)
OK = (Verdict.PASS, Verdict.NOT_APPLICABLE)


def test_regulator_b2_adjoint(acceptance):
    e = build("RegulatorB2")
    start = time.perf_counter()
    ref = e.reference()
    adj = adjoint_by_representation(e.problem, ref)
    res = adjoint_residual(e.problem, ref, adj)
    hu = max(np.linalg.norm(H_u(e.problem, t, x, u, adj.p_at(t), 1.0))
             for t, x, u in zip(ref.grid, ref.x, ref.u))
    elapsed = time.perf_counter() - start
    t = np.linspace(0.0, 15.0, 301)
    exact = -2 * (1 + R2) * np.exp(-(1 + R2) * t)
    rel = max(abs(adj.p_at(s)[0] - v) / abs(v) for s, v in zip(t, exact))
    acceptance(1, f"B2 adjoint rel err {rel:.1e}, residual {res.residual:.1e}, |H_u| {hu:.1e}, "
                  f"{elapsed:.2f} s", {
        "p relative error <= 1e-5 on [0, 15]": rel <= 1e-5,
        "adjoint residual <= 1e-5": res.residual <= 1e-5,
        "|H_u| <= 1e-6": hu <= 1e-6,
        "runtime < 10 s": elapsed < 10.0,
    })


def test_regulator_b1_normal_and_stability(acceptance):
    e = build("RegulatorB1")
    ref = e.reference()
    adj, rep = normality_analysis(e.problem, ref)
    err = max(abs(adj.p_at(t)[0] + math.exp(-2 * t)) for t in ref.grid)
    stab = {a: stability_probe(b.problem, b.reference())
            for a in (1.5, 1.9, 2.5, 3.0) for b in [build("RegulatorB1", {"a": a})]}
    growth = stab[3.0].witness["growth_rate"]
    acceptance(2, f"B1 lambda0={adj.lambda0:g}, p error {err:.1e}, envelope rate {growth:.4f}, "
                  + " ".join(f"a={a}:{r.verdict.value}" for a, r in stab.items()), {
        "lambda0 = 1": adj.lambda0 == 1.0 and rep.witness["summary"] == "normal: lambda0=1",
        "p = -e^{-2t} within 1e-5": err <= 1e-5,
        "envelope grows like e^t": abs(growth - 1.0) <= 1e-3,
        "stability passes for a > 2": all(stab[a].verdict is Verdict.PASS for a in (2.5, 3.0)),
        "stability fails for a < 2": all(stab[a].verdict is Verdict.FAIL for a in (1.5, 1.9)),
    })


def test_halkin_abnormal(acceptance):
    e = build("HalkinModified")
    ref = e.reference()
    start = time.perf_counter()
    adj, rep = normality_analysis(e.problem, ref)
    elapsed = time.perf_counter() - start
    normal = rep.witness["normal_branch"]
    printed_fail = []
    for p0 in (-1.0, 0.0, 1.0):
        cand = AdjointSolution.from_function(
            lambda t, p0=p0: np.atleast_1d(halkin_adjoint_printed(t, p0, 1.0, 0.5)), ref.grid, 1.0, e.problem)
        norm, pairing, _ = transversality_checks(e.problem, cand, reference=ref)
        printed_fail.append(norm.verdict is Verdict.FAIL or pairing.verdict is Verdict.FAIL)
    p0 = adj.p_at(0.0)[0]
    shape = max(abs(adj.p_at(t)[0] - p0 * math.exp(-t)) for t in ref.grid)
    suite = necessary_suite(e.problem, ref, adj)
    acceptance(3, f"Halkin '{rep.witness['summary']}', normal branch {normal['verdict']} "
                  f"({normal.get('reason', '')}), {elapsed:.2f} s", {
        "normal branch fails": normal["verdict"] == "Fail",
        "printed lambda0=1 adjoint fails transversality": all(printed_fail),
        "lambda0 = 0": adj.lambda0 == 0.0,
        "p = p(0) e^{-t}": p0 != 0.0 and shape <= 1e-9 * abs(p0),
        "abnormal adjoint passes every condition": all(r.verdict in OK for r in suite.values()),
        "verdict string": rep.witness["summary"] == "abnormal: lambda0=0",
        "runtime < 10 s": elapsed < 10.0,
    })


def test_dominance_scans(acceptance):
    exp = W.dominance_threshold_scan(
        lambda a: W.WeightTriple(W.exponential(2.0), W.exponential(a), W.constant(1.0), 2.0),
        [3.0, 3.5, 3.9, 4.1, 4.5])
    wb = W.dominance_threshold_scan(
        lambda p: W.WeightTriple(W.weibull(0.5), W.polynomial(2.0), W.constant(1.0), p),
        [1.5, 1.9, 2.1, 3.0])
    got_exp = "".join(v.value[0] for _, v in exp)
    got_wb = "".join(v.value[0] for _, v in wb)
    acceptance(4, f"F6 exponential {got_exp}, Weibull {got_wb}", {
        "exponential scan P,P,P,F,F": got_exp == "PPPFF",
        "Weibull scan F,F,P,P": got_wb == "FFPP",
        "no Inconclusive": all(v is not Verdict.INCONCLUSIVE for _, v in exp + wb),
    })


def test_fishery(acceptance):
    e = build("FisheryNashPlayer")
    ref = e.reference(T=50.0)
    adj, rep = normality_analysis(e.problem, ref)
    u1, _ = fishery_equilibrium(e.params["c1"], e.params["c2"])
    times = [t for t in np.linspace(0.5, 50.0, 25)]
    u_err = max(abs(hamiltonian_sup(e.problem, t, ref.x_at(t), adj.p_at(t)).argmax[0] - u1) for t in times)
    cert = certify_weak_local_minimum(e.problem, ref, adj)
    traj = integrate_state(e.problem, e.closed_form.u, 20.0, 1e-12)
    trip = max(np.max(np.abs(x - e.closed_form.x(t))) for t, x in zip(traj.grid, traj.x))
    acceptance(5, f"fishery lambda0={adj.lambda0:g}, max|p|={np.abs(adj.p).max():g}, "
                  f"u* error {u_err:.1e}, round trip {trip:.1e}", {
        "p = 0": np.all(adj.p == 0.0),
        "lambda0 != 0": adj.lambda0 != 0.0,
        "u* within 1e-8": u_err <= 1e-8,
        "sufficiency via maximised Hamiltonian": (cert.verdict is Verdict.PASS
                                                  and "ScriptH_x" in cert.witness["criteria"]),
        "round trip <= 1e-6 on [0, 20]": trip <= 1e-6,
    })


def test_ramsey(acceptance):
    e = build("RamseyGrowth")
    adj = adjoint_by_representation(e.problem, e.reference(T=100.0))
    q = e.params
    rate = ramsey_rule_rate(q)
    c = e.closed_form.u
    observed = math.log(c(10.0)[0] / c(0.0)[0]) / 10.0
    w5, w10 = no_ponzi_witness(N=5.0), no_ponzi_witness(N=10.0)
    acceptance(6, f"Ramsey |p|={np.abs(adj.p).max():g}, rule rate {rate:g}, "
                  f"no-Ponzi bounds {w5.lower_bound:.4f} < {w10.lower_bound:.4f}", {
        "|p| <= 1e-10": np.abs(adj.p).max() <= 1e-10,
        "rule rate exact": rate == (q["r"] - (q["n"] + q["m"] + q["rho"])) / q["sigma"],
        "rule rate examples": (abs(ramsey_rule_rate({"r": 0.04, "n": 0.01, "m": 0.02, "rho": 0.02,
                                                      "sigma": 2.0}) + 0.005) <= 1e-15
                               and abs(ramsey_rule_rate({"r": 0.02, "n": 0.01, "m": 0.03, "rho": 0.05,
                                                         "sigma": 1.0}) + 0.07) <= 1e-15),
        "candidate follows the rule": abs(observed - rate) <= 1e-12 * max(1.0, abs(rate)),
        "bound increases from N = 5 to 10": w10.lower_bound > w5.lower_bound,
        "objective above bound": all(w.objective >= w.lower_bound for w in (w5, w10)),
        "limit trend-fits to 0": all(w.decay.verdict is Verdict.PASS for w in (w5, w10)),
    })


def _random_smooth(rng, n=2, k=3, T=10.0):
    a = rng.normal(size=(k, n))
    r = rng.uniform(0.0, 1.5, size=(k, n))
    w = rng.uniform(0.0, 3.0, size=(k, n))

    def f(t):
        t = np.asarray(t, dtype=float)[..., None, None]
        return np.sum(a * np.exp(-r * t) * np.cos(w * t), axis=-2)

    return SampledFunction.from_callable(f, T, 41, vectorized=True)


def test_property_suites(acceptance):
    fm_err, grad = {}, {}
    for eid in entry_ids():
        e = build(eid)
        ref = e.reference(T=min(30.0, e.horizon))
        fm_err[eid] = fundamental_matrices(e.problem, ref).invariant_error
        grad[eid] = gradient_consistency(e.problem, ref, n_probes=256)
    rng = np.random.default_rng(2024)
    holder_ok, homog, tri = True, 0.0, True
    for p in (1.5, 2.0, 3.0):
        for _ in range(1000):
            triple = W.WeightTriple(W.exponential(2.0), W.exponential(rng.uniform(1.0, 3.0)), W.constant(1.0), p)
            holder_ok &= holder_check(_random_smooth(rng), _random_smooth(rng), triple).holds
        triple = W.WeightTriple(W.exponential(2.0), W.exponential(2.0), W.constant(1.0), p)
        for _ in range(20):
            x, y = _random_smooth(rng), _random_smooth(rng)
            alpha = rng.uniform(-20, 20)
            nx = weighted_Lp_norm(x, triple)
            homog = max(homog, abs(weighted_Lp_norm(x.scaled(alpha), triple).value - abs(alpha) * nx.value)
                        / max(abs(alpha) * nx.value, 1e-300))
            fx, fy = x.extension, y.extension
            s = SampledFunction.from_callable(lambda t: fx(t) + fy(t), 10.0, 41, vectorized=True)
            ny, ns = weighted_Lp_norm(y, triple), weighted_Lp_norm(s, triple)
            tri &= ns.value <= nx.value + ny.value + nx.total_error + ny.total_error + ns.total_error + 1e-12
    acceptance(7, f"invariant {max(fm_err.values()):.1e}, gradient {max(grad.values()):.1e}, "
                  f"homogeneity rel {homog:.1e}", {
        "Z^{-1} = Y^T within 1e-8": max(fm_err.values()) <= 1e-8,
        "gradient consistency <= 1e-5": max(grad.values()) <= 1e-5,
        "Hoelder on 1000 random pairs per exponent": holder_ok,
        "homogeneity": homog <= 1e-9,
        "triangle inequality": tri,
    })


def test_determinism(acceptance, tmp_path, monkeypatch):
    monkeypatch.delenv(cli.ENV_OUT, raising=False)
    cfg = tmp_path / "b2.yaml"
    cfg.write_text("problem: RegulatorB2\n", encoding="utf-8")
    a, b = tmp_path / "a", tmp_path / "b"
    codes = [cli.main(["verify", "--config", str(cfg), "--out", str(d)]) for d in (a, b)]
    files = sorted(f.name for f in a.iterdir() if not f.name.endswith(".timings.json"))
    same = all((a / f).read_bytes() == (b / f).read_bytes() for f in files)
    acceptance(8, f"verify twice: exit codes {codes}, {len(files)} files compared", {
        "both runs succeed": codes == [0, 0],
        "reports byte-identical": bool(files) and same,
    })
