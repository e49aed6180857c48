"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line."""

import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

import conftest
from oracles import k12_dual_oracle
from radseries import distribution as D
from radseries.kfunctional import k12_batch, k12_exact, k12_scaling_bound
from radseries.spaces import CoefficientFamily, Family, SpaceSpec
from radseries.verify import DEFAULT_GRIDS, Model, run_checks
from suite import instance_suite, label

ARTIFACTS = Path(__file__).resolve().parent.parent / "artifacts"


def record(key, ok, detail):
    conftest.ACCEPTANCE[key] = (bool(ok), detail)
    print(f"\n{'PASS' if ok else 'FAIL'}  criterion {key}: {detail}")
    assert ok, detail


@pytest.fixture(scope="session")
def suite_reports():
    """Exact models and full check reports for every suite instance, with build time."""
    t0 = time.perf_counter()
    out = []
    for fam in instance_suite():
        model = Model.exact(fam)
        out.append((fam, model, run_checks(model)))
    elapsed = time.perf_counter() - t0
    ARTIFACTS.mkdir(exist_ok=True)
    archive = {label(f): r.to_json() for f, _, r in out}
    (ARTIFACTS / "acceptance_report.json").write_text(json.dumps(archive, indent=1, sort_keys=True) + "\n")
    return out, elapsed


def by_id(report, check_id):
    return next(r for r in report.results if r.check_id == check_id)


def test_suite_shape():
    fams = instance_suite()
    assert len(fams) >= 100 and all(f.N <= 20 for f in fams)
    kinds = {(f.space.family, f.dim == 1) for f in fams}
    assert kinds == {(Family.LINF, True), (Family.LINF, False), (Family.L1, False)}
    assert max(f.dim for f in fams if f.space.family is Family.LINF) <= 8
    assert max(f.dim for f in fams if f.space.family is Family.L1) <= 6


def test_criterion_1_k_functional_exactness():
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    worst = 0.0
    for i in range(1000):
        a = rng.standard_normal(rng.integers(1, 9)) * rng.uniform(0.01, 100)
        for t in (0.1, 0.5, 1.0, 2.0, 5.0):
            ref = k12_dual_oracle(a, t, restarts=1000, seed=i)
            worst = max(worst, abs(k12_exact(a, t).value - ref) / ref)
    elapsed = time.perf_counter() - t0
    record("1", worst <= 1e-6 and elapsed < 60, f"max rel. deviation from dual oracle {worst:.2e} (tol 1e-6), {elapsed:.1f}s (< 60s)")


def test_criterion_2_endpoints_and_calculus():
    rng = np.random.default_rng(2)
    bad = []
    for _ in range(200):
        N = int(rng.integers(1, 21))
        a = rng.standard_normal(N) * rng.uniform(0.01, 100)
        l1, l2, amax = np.abs(a).sum(), np.linalg.norm(a), np.abs(a).max()
        # endpoints at 1e-10
        for t in np.linspace(0, l2 / amax, 7):
            if abs(k12_exact(a, t).value - t * l2) > 1e-10 * max(1.0, t * l2):
                bad.append(("l2 endpoint", t))
        for t in math.sqrt(N) * np.array([1, 1.5, 4]):
            if abs(k12_exact(a, t).value - l1) > 1e-10 * max(1.0, l1):
                bad.append(("l1 endpoint", t))
        # calculus on a 1000-point grid and its two dyadic refinements
        tmax = 1.5 * math.sqrt(N)
        for G in (1000, 1999, 3997):
            grid = np.linspace(0, tmax, G)
            vals, _ = k12_batch(np.broadcast_to(a, (G, N)), grid)
            tol = 1e-9 * l1
            d = np.diff(vals)
            if d.min() < -tol or np.any(d > l2 * np.diff(grid) + tol) or np.diff(d).max() > tol:
                bad.append(("calculus", G))
    for _ in range(10_000):
        a = rng.standard_normal(rng.integers(1, 21))
        s, t = rng.uniform(0.01, 6, 2)
        if not k12_scaling_bound(a, s, t).holds:
            bad.append(("scaling", s, t))
    record("2", not bad, f"200 sequences x 3 grids + 10^4 scaling pairs; violations: {len(bad)}")


def test_criterion_3_main_upper(suite_reports):
    reports, elapsed = suite_reports
    worst = min(by_id(r, "main_upper").worst_margin for _, _, r in reports)
    failed = [label(f) for f, _, r in reports if not by_id(r, "main_upper").passed]
    grid_ok = DEFAULT_GRIDS["t"][0] == 0 and DEFAULT_GRIDS["t"][-1] == 6
    record(
        "3",
        not failed and worst >= 0 and grid_ok and elapsed < 600,
        f"{len(reports)} instances, worst margin {worst:.3e}, failures {len(failed)}, suite time {elapsed:.0f}s (< 600s)",
    )


def test_criterion_4_theorem_a(suite_reports):
    reports, _ = suite_reports
    results = [by_id(r, "theorem_a") for _, _, r in reports]
    worst = min(r.worst_margin for r in results)
    record("4", worst >= 0 and all(r.passed for r in results), f"{len(results)} instances, worst margin {worst:.3e}")


def test_criterion_5_proof_facts(suite_reports):
    reports, _ = suite_reports
    worst = {}
    for _, _, rep in reports:
        mf, c2, c3 = by_id(rep, "moment_facts"), by_id(rep, "cor2"), by_id(rep, "cor3")
        ps = np.asarray(c3.grid["p"])
        low = ps <= 8
        pieces = {
            "second moment <= 9 (E S)^2": mf.parts["borell_second_moment"],
            "Paley-Zygmund": mf.parts["paley_zygmund"],
            "Paley-Zygmund 1/9 floor": mf.parts["paley_zygmund_ninth"],
            "Kahane doubling": c2.parts["kahane_doubling"],
            "moment 2p <= sqrt3 moment p": np.asarray(c3.parts["borell_sqrt3"])[low],
            "half moment <= weak 2p": c3.parts["half_moment_le_weak"],
            "weak 2p <= moment 2p": c3.parts["weak_le_moment"],
        }
        for k, v in pieces.items():
            worst[k] = min(worst.get(k, np.inf), float(np.min(v)))
    ok = all(v >= -1e-9 for v in worst.values())
    record("5", ok, "worst margins " + "; ".join(f"{k} {v:.2e}" for k, v in worst.items()))


def test_criterion_6_equivalence_bands(suite_reports):
    reports, _ = suite_reports
    lo = {"cor1": np.inf, "cor3": np.inf}
    hi = {"cor1": 0.0, "cor3": 0.0}
    q_env = {}
    fails = []
    for fam, _, rep in reports:
        for cid in ("cor1", "cor3"):
            r = by_id(rep, cid)
            lo[cid] = min(lo[cid], r.fitted["ratio_min"])
            hi[cid] = max(hi[cid], r.fitted["ratio_max"])
            if not r.passed:
                fails.append((cid, label(fam)))
        if fam.space.family is Family.LINF:
            r = by_id(rep, "cor4")
            for q, ratio, band in zip(r.grid["q"], r.fitted["ratio"], r.fitted["bands"]):
                a, b = q_env.get(q, (np.inf, 0.0))
                q_env[q] = (min(a, ratio), max(b, ratio))
                if not band[0] <= ratio <= band[1]:
                    fails.append(("cor4", label(fam)))
    archived = (ARTIFACTS / "acceptance_report.json").exists()
    detail = (
        f"cor1 ratios [{lo['cor1']:.3f}, {hi['cor1']:.3f}] in [1/30, 30]; "
        f"cor3 [{lo['cor3']:.3f}, {hi['cor3']:.3f}] in [1/10, 10]; "
        + ", ".join(f"cor4 q={q:g} [{a:.3f}, {b:.3f}]" for q, (a, b) in sorted(q_env.items()))
        + " in [1/30, 30]"
    )
    record("6", not fails and archived, detail)


def test_criterion_7_positive_fits(suite_reports):
    reports, _ = suite_reports
    fits = {"c": [], "c1": [], "d": []}
    for fam, _, rep in reports:
        fits["c"].append(by_id(rep, "main_lower_fit").fitted["c"])
        fits["c1"].append(by_id(rep, "cor2").fitted["c1"])
        if fam.dim == 1:
            fits["d"].append(by_id(rep, "scalar_lower").fitted["d"])
    ok = all(min(v) > 0 for v in fits.values())
    record("7", ok, ", ".join(f"min {k} = {min(v):.4g} over {len(v)}" for k, v in fits.items()))


def test_criterion_8_lemma2_split(suite_reports):
    reports, _ = suite_reports
    rs = [by_id(r, "lemma2") for f, _, r in reports if f.space.family is Family.LINF]
    worst = min(r.worst_margin for r in rs)
    factor = max(r.fitted["max_factor"] for r in rs)
    record("8", worst >= -1e-8, f"{len(rs)} l_inf instances, min 2K^w - split {worst:.3e}, max split/K^w {factor:.4f}")


def test_criterion_9_determinism_and_speed():
    rng = np.random.default_rng(9)
    fam = CoefficientFamily(SpaceSpec(Family.LINF, 8), rng.standard_normal((24, 8)))
    t0 = time.perf_counter()
    d1 = D.enumerate_exact(fam, workers=1)
    single = time.perf_counter() - t0
    t0 = time.perf_counter()
    d8 = D.enumerate_exact(fam, workers=8)
    multi = time.perf_counter() - t0
    same = d1.values.tobytes() == d8.values.tobytes() and d1.counts.tobytes() == d8.counts.tobytes()
    mc = [D.sample_mc(fam, 300_000, seed=17, workers=w) for w in (1, 3, 8)]
    mc_same = all(m.values.tobytes() == mc[0].values.tobytes() and m.counts.tobytes() == mc[0].counts.tobytes() for m in mc)
    ok = single <= 60 and multi <= 15 and same and mc_same
    record(
        "9",
        ok,
        f"N=24 m=8: {single:.1f}s single (<= 60), {multi:.1f}s at 8 workers (<= 15), identical={same}; MC 1/3/8 workers identical={mc_same}",
    )
