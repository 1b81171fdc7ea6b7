"""Command-line experiment runner.

Every subcommand reads an optional JSON config, writes ``<out>/<command>.json``
and exits 0 when all asserted checks pass, 1 when a check fails and 2 on a
configuration error. Flags can also be given as CCONCAVE_CONFIG,
CCONCAVE_SEED, CCONCAVE_QUICK and CCONCAVE_OUT.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import fields as dc_fields
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import cconcavity, comparison, counterexample, transport
from .errors import CConcaveError, ConfigError, InvalidArgument
from .fields import Sum, document_from_field, field_from_dict
from .grids import default_grid
from .manifold import Sphere, manifold_from_dict

COMMANDS = ("compare", "certify", "check-cconcavity", "counterexample", "transport-verify", "sweep")
ENV_PREFIX = "CCONCAVE_"
QUICK_FACTOR = 16

DEFAULTS = {
    "manifold": {"kind": "sphere", "radius": 1.0},
    "field": {"type": "constant", "value": 0.0},
    "grid": {"n": 4096},
    "tol": None,
    "epsilon": None,
    "n": 64,
    "trials": 1000,
    "clouds": 1,
    "counterexample": {},
    "sweep": {"param": "lambda", "values": [1.0, 0.5, 0.2, 0.1, 0.05, 0.02]},
}


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def dumps(report) -> str:
    return json.dumps(report, sort_keys=True, indent=2, default=_jsonable) + "\n"


def load_config(path):
    cfg = json.loads(json.dumps(DEFAULTS))
    if path:
        try:
            with open(path) as fh:
                user = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(user) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(user)
    return cfg


class _Ctx:
    def __init__(self, cfg, seed, quick):
        self.cfg, self.seed, self.quick = cfg, seed, quick
        try:
            self.M = manifold_from_dict(cfg["manifold"])
            self.f = field_from_dict(cfg["field"], self.M)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad manifold/field definition: {exc}") from exc

    def n(self, n):
        return max(64, int(n) // QUICK_FACTOR) if self.quick else int(n)

    def grid(self, M=None):
        return default_grid(M or self.M, self.n(self.cfg["grid"].get("n", 4096)), self.seed)

    def tol(self, default):
        return default if self.cfg["tol"] is None else float(self.cfg["tol"])


def run_compare(ctx):
    M, grid = ctx.M, ctx.grid()
    reports = [
        comparison.check_hessian_comparison(M, grid, seed=ctx.seed),
        comparison.check_half_square_bound(M, grid, seed=ctx.seed),
        comparison.check_alpha_inequality(),
    ]
    bound = comparison.convexity_radius_bound(M)
    if math.isfinite(bound):
        reports.append(comparison.check_convexity_radius(M, grid.points[0], 0.99 * bound, seed=ctx.seed))
    if M.K > 0:
        reports.append(comparison.check_sphere_identity(M.radius, ctx.grid(), seed=ctx.seed))
    out = {r.name: r.to_dict() for r in reports}
    return out, all(r.passed for r in reports)


def run_certify(ctx):
    grid, tol = ctx.grid(), ctx.tol(1e-10)
    tech = cconcavity.certify_technical(ctx.f, grid, tol)
    out = {"technical": tech.to_dict()}
    ok = tech.certified
    if ctx.cfg["epsilon"] is not None:
        main = cconcavity.certify_main(ctx.f, float(ctx.cfg["epsilon"]), grid, tol)
        out["main"] = main.to_dict()
        ok = ok and main.certified
    return out, ok


def run_check_cconcavity(ctx):
    grid = ctx.grid()
    res = cconcavity.empirical_cconcavity(ctx.f, grid, grid, tol=ctx.tol(1e-7))
    return res.to_dict(), res.passed


def _ce_config(ctx, **over):
    raw = dict(ctx.cfg["counterexample"])
    names = {f.name for f in dc_fields(counterexample.CounterexampleConfig)}
    preset = raw.pop("preset", "default")
    unknown = set(raw) - names
    if unknown:
        raise ConfigError(f"unknown counterexample keys: {sorted(unknown)}")
    raw.setdefault("seed", ctx.seed)
    raw.update(over)
    if ctx.quick:
        raw["grid_n"] = ctx.n(raw.get("grid_n", 16384))
    if preset == "literal":
        return counterexample.CounterexampleConfig.literal(**raw)
    if preset != "default":
        raise ConfigError(f"unknown counterexample preset {preset!r}")
    return counterexample.CounterexampleConfig(**raw)


def run_counterexample(ctx):
    cfg = _ce_config(ctx)
    f, info = counterexample.build_counterexample(cfg)
    rep = counterexample.verify_counterexample(f, cfg, raise_on_fail=False)
    rows = rep.pop("_rows")
    rep["construction"] = info
    rep["field"] = document_from_field(f)
    return rep, rep["passed"], {"counterexample.csv": (["x", "y", "z", "min_eig_g_minus_hess", "h_violation"], rows)}


def run_transport(ctx):
    grid, tol = ctx.grid(), ctx.tol(1e-9)
    cert = cconcavity.certify_technical(ctx.f, grid)
    if not cert.certified:
        raise InvalidArgument(f"transport-verify needs a certified field, got {cert.verdict}")
    n = int(ctx.cfg["n"])
    results, csvs = [], {}
    for k in range(int(ctx.cfg["clouds"])):
        cloud = transport.PointCloud.random(ctx.M, n, seed=ctx.seed + k)
        opt = transport.verify_optimality(ctx.f, cloud, tol=tol, require_certified=False)
        mono = transport.check_cyclical_monotonicity(
            cloud, transport.mccann_map(ctx.f, cloud), trials=int(ctx.cfg["trials"]), seed=ctx.seed + k, tol=tol
        )
        results.append({"optimality": opt, "monotonicity": mono.to_dict()})
        csvs[f"cloud_{k}.csv"] = transport.write_cloud_csv(cloud)
    ok = all(r["optimality"]["passed"] and r["monotonicity"]["passed"] for r in results)
    return {"certificate": cert.verdict, "clouds": results}, ok, csvs


def run_sweep(ctx):
    sw = ctx.cfg["sweep"]
    param, values = sw.get("param"), [float(v) for v in sw.get("values", [])]
    rows = []
    if param == "lambda":
        grid = ctx.grid()
        for lam in values:
            c = cconcavity.certify_technical(lam * ctx.f, grid)
            rows.append({"lambda": lam, "verdict": c.verdict, "grad_bound": c.grad_bound, "delta": c.delta,
                         "delta_budget": c.delta_budget, "hess_margin": c.hess_margin})
    elif param == "eps_mix":
        for e in values:
            cfg = _ce_config(ctx, eps_mix=e)
            M = Sphere(1.0)
            f1 = counterexample.build_f1(cfg.t0, cfg.t1, M)
            f2, _ = counterexample.build_f2(cfg.a, cfg.c, cfg.cutoff, cfg.inner, M)
            f = Sum(M, ((1.0, f1), (e, f2)))
            scan = counterexample.hessian_scan(f, cfg.grid_n, cfg.seed)
            viol = counterexample.violation_near_north(f, max(e * abs(cfg.a), 1e-3))
            rows.append({"eps_mix": e, "hess_margin": scan.refined_min, "violation": viol})
    else:
        raise ConfigError(f"sweep.param must be 'lambda' or 'eps_mix', got {param!r}")
    return {"param": param, "rows": rows}, True


RUNNERS = {
    "compare": run_compare,
    "certify": run_certify,
    "check-cconcavity": run_check_cconcavity,
    "counterexample": run_counterexample,
    "transport-verify": run_transport,
    "sweep": run_sweep,
}


def _env_bool(v):
    return v is not None and v.strip().lower() in ("1", "true", "yes", "on")


def build_parser():
    p = argparse.ArgumentParser(prog="cconcave", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", default=os.environ.get(ENV_PREFIX + "CONFIG"))
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--quick", action="store_true", default=None)
    p.add_argument("--out", default=os.environ.get(ENV_PREFIX + "OUT", "."))
    return p


def _write_csv(path, payload):
    if isinstance(payload, str):
        path.write_text(payload)
        return
    header, rows = payload
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        seed = args.seed
        if seed is None:
            env = os.environ.get(ENV_PREFIX + "SEED")
            seed = int(env) if env not in (None, "") else 0
        if seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        quick = bool(args.quick) if args.quick is not None else _env_bool(os.environ.get(ENV_PREFIX + "QUICK"))
        cfg = load_config(args.config)
        ctx = _Ctx(cfg, seed, quick)
        result = RUNNERS[args.command](ctx)
    except (ConfigError, InvalidArgument) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except CConcaveError as exc:
        result = ({"error": type(exc).__name__, "message": str(exc)}, False)
    except (ValueError, TypeError, KeyError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2

    body, ok = result[0], result[1]
    extra = result[2] if len(result) > 2 else {}
    report = {
        "command": args.command,
        "config": cfg,
        "seed": seed,
        "quick": quick,
        "passed": bool(ok),
        "result": body,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{args.command}.json").write_text(dumps(report))
    for name, payload in extra.items():
        _write_csv(out / name, payload)
    print(f"{args.command}: {'PASS' if ok else 'FAIL'} -> {out / (args.command + '.json')}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
