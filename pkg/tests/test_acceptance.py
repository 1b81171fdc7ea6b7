"""Acceptance criteria, one test each; every test prints a single PASS/FAIL line."""
import json
import math
import time

import numpy as np
import pytest

from cconcave.cconcavity import admissible_gradient_bound, certify_main, certify_technical, empirical_cconcavity
from cconcave.cli import COMMANDS, main
from cconcave.comparison import (
    check_alpha_inequality,
    check_half_square_bound,
    check_hessian_comparison,
    check_sphere_identity,
)
from cconcave.counterexample import CounterexampleConfig, build_counterexample, verify_counterexample
from cconcave.fields import DistSqPotential, RampProfile, sup_gradient_norm
from cconcave.grids import default_grid
from cconcave.manifold import Euclidean, FlatTorus, Sphere
from cconcave.transport import (
    PointCloud,
    brute_force_assignment,
    check_cyclical_monotonicity,
    mccann_map,
    optimal_assignment,
    verify_optimality,
)

from conftest import N

S2 = Sphere(1.0)
RESULTS = []


def record(number, name, ok, detail):
    line = f"ACCEPTANCE {number} {name}: {'PASS' if ok else 'FAIL'} ({detail})"
    RESULTS.append(line)
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def grid():
    return default_grid(S2, 4096, seed=1)


def test_1_sphere_identity():
    t = time.perf_counter()
    rep = check_sphere_identity(1.0, default_grid(S2, 4096, seed=0), h=1e-3, seed=0)
    dt = time.perf_counter() - t
    d = rep.details
    ok = rep.samples == 4096 and d["max_error_h"] < 10 * 1e-3**2 and 3.5 <= d["ratio"] <= 4.5 and dt < 30
    record(1, "sphere identity", ok,
           f"pairs={rep.samples} max_err={d['max_error_h']:.3e} < 1e-5, ratio={d['ratio']:.3f}, {dt:.1f}s")


def test_2_comparison_suite():
    worst = math.inf
    sphere_dev = 0.0
    ok = True
    for M in (S2, Sphere(2.0), FlatTorus(1.0), Euclidean(2)):
        g = default_grid(M, 4096, seed=1)
        for rep in (check_hessian_comparison(M, g), check_half_square_bound(M, g)):
            ok &= rep.passed and rep.min_margin >= -1e-8
            worst = min(worst, rep.min_margin)
        if isinstance(M, Sphere):
            rep = check_hessian_comparison(M, g)
            sphere_dev = max(sphere_dev, abs(rep.min_margin), rep.details["max_deviation"])
    alpha = check_alpha_inequality()
    ok &= alpha.passed and sphere_dev <= 1e-8
    record(2, "comparison suite", ok,
           f"min margin={min(worst, alpha.min_margin):.2e} >= -1e-8, sphere |margin|<={sphere_dev:.1e} <= 1e-8")


def test_3_certifier_soundness(grid):
    rng = np.random.default_rng(2024)
    t = time.perf_counter()
    worst, fields = -math.inf, 0
    while fields < 50:
        center = S2.random_points(rng, 1)[0]
        t1 = rng.uniform(0.1, 0.6)
        f = rng.uniform(0.005, 0.15) * DistSqPotential(S2, center, RampProfile(t1 / 2, t1))
        if not certify_technical(f, grid).certified:
            continue
        fields += 1
        res = empirical_cconcavity(f, grid, grid, tol=1e-7)
        worst = max(worst, res.max_violation)
        if not res.passed:
            break
    dt = time.perf_counter() - t
    ok = fields == 50 and worst <= 1e-7 and dt < 600
    record(3, "certifier soundness", ok, f"{fields} certified fields, max violation={worst:.2e} <= 1e-7, {dt:.0f}s")


def test_4_main_theorem_consistency():
    c_star, _ = admissible_gradient_bound(1.0, math.pi, math.pi, 0.5)
    oracle = (-2 * math.pi + math.sqrt(4 * math.pi**2 + 4)) / 2  # positive root of t^2 + 2 pi t - 1
    g = default_grid(S2, 1024, seed=3)
    rng = np.random.default_rng(5)
    implied = certified = 0
    for _ in range(50):
        eps = rng.uniform(0.05, 0.95)
        t1 = rng.uniform(0.05, 0.5)
        base = DistSqPotential(S2, S2.random_points(rng, 1)[0], RampProfile(t1 / 2, t1))
        cs, eb = admissible_gradient_bound(S2.K, S2.inj, S2.diam, eps)
        f = rng.uniform(0.1, 1.0) * min(cs, eb) / sup_gradient_norm(base, g) * base
        if certify_main(f, eps, g).certified:
            certified += 1
            implied += certify_technical(f, g).certified
    ok = abs(c_star - oracle) <= 1e-12 and implied == certified and certified > 0
    record(4, "main-theorem consistency", ok,
           f"C*={c_star:.12f} (|diff|={abs(c_star - oracle):.1e}), main=>technical {implied}/{certified}")


def test_5_counterexample():
    t = time.perf_counter()
    cfg = CounterexampleConfig()
    f, info = build_counterexample(cfg)
    rep = verify_counterexample(f, cfg, raise_on_fail=False)
    dt = time.perf_counter() - t
    c1, c2, c3 = rep["clause_i"], rep["clause_ii"], rep["clause_iii"]
    ok = (c1["min_margin"] >= -1e-8 and c1["samples"] >= 16384 and c2["max_violation"] > 1e-6
          and c3["passed"] and dt < 300)
    record(5, "counterexample", ok,
           f"min eig(g-hess f)={c1['min_margin']:.1e} over {c1['samples']} pts, violation={c2['max_violation']:.2e} > 1e-6, "
           f"saddle eig={c3['eigenvalues'][0]:.6f} vs r*cot r*-1={c3['predicted']:.6f}, {dt:.0f}s")


def test_6_transport(grid):
    f = 0.05 * DistSqPotential(S2, N, RampProfile(0.15, 0.3))
    assert certify_technical(f, grid).certified
    gap, slack = 0.0, math.inf
    for n in (8, 32, 64):
        for k in range(20):
            cloud = PointCloud.random(S2, n, seed=1000 * n + k)
            rep = verify_optimality(f, cloud, grid, require_certified=False)
            gap = max(gap, abs(rep["gap"]))
            mono = check_cyclical_monotonicity(cloud, mccann_map(f, cloud), trials=200, seed=k)
            slack = min(slack, mono.min_slack)
    rng = np.random.default_rng(6)
    mismatches = 0
    for k in range(200):
        n = int(rng.integers(1, 9))
        C = rng.integers(0, 10, size=(n, n)).astype(float) if k % 2 else rng.random((n, n))
        a, b = optimal_assignment(C), brute_force_assignment(C)
        same = a.cost == b.cost if k % 2 else abs(a.cost - b.cost) <= 1e-12
        mismatches += not same
    ok = gap <= 1e-9 and slack >= -1e-9 and mismatches == 0
    record(6, "transport optimality", ok,
           f"max |paired-optimal|={gap:.1e} <= 1e-9, assignment vs brute force mismatches={mismatches}/200, "
           f"min monotonicity slack={slack:.2e}")


def test_7_determinism(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "field": {"type": "scaled", "scale": 0.05,
                  "field": {"type": "dist_sq_potential", "center": [0, 0, 1], "ramp": {"t0": 0.15, "t1": 0.3}}},
        "n": 16, "trials": 200, "epsilon": 0.5,
    }))
    differing = []
    for cmd in COMMANDS:
        outputs = []
        for k in range(2):
            out = tmp_path / f"{cmd}-{k}"
            main([cmd, "--config", str(cfg), "--quick", "--seed", "11", "--out", str(out)])
            files = {}
            for p in sorted(out.iterdir()):
                text = p.read_text()
                if p.suffix == ".json":
                    d = json.loads(text)
                    d.pop("timestamp")
                    text = json.dumps(d, sort_keys=True)
                files[p.name] = text
            outputs.append(files)
        if outputs[0] != outputs[1]:
            differing.append(cmd)
    record(7, "determinism", not differing, f"{len(COMMANDS)} subcommands, differing={differing or 'none'}")
