"""A function on S^2 with hess f <= g everywhere that is not c-concave.

f = f1 + eps_mix * f2 where

    f1(y) = rho(1/2 d^2(N, y))              (hess f1(N) = g, grad f1(N) = 0)
    f2    = a u_1 - c |u|^3  (cut off)      (grad f2(N) = a e1, hess f2(N) = 0)

in normal coordinates u at the north pole N. At x = N the point
x* = exp_N(-grad f(N)) differs from N, so the tangential curvature
r* cot r* - 1 < 0 of h = 1/2 d^2(x*, .) - f at N makes N a saddle of h.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

import numpy as np
from scipy.optimize import minimize

from .cconcavity import empirical_cconcavity
from .errors import ConstructionFailed, InvalidArgument, InvalidRamp, MixTooLarge, VerificationFailed
from .fields import DistSqPotential, NormalCoordField, RampProfile, ScalarField, Sum, grid_jet
from .grids import SampleGrid, geodesic_disk, sphere_grid
from .manifold import Sphere, SymBilinearForm, half_r2_hessian_ambient

NORTH = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True)
class CounterexampleConfig:
    """Parameters of the construction.

    The defaults are tuned so that the violation (which scales roughly like
    eps_mix^4 a^6 / c^2) is comfortably above 1e-6 while the global Hessian
    scan still passes. ``literal`` gives a smaller choice (c = 2,
    eps_mix = 0.02) whose violation is only about 3e-11.
    """

    eps_mix: float = 0.12
    t0: float = 0.05
    t1: float = 0.1
    a: float = 1.0
    c: float = 0.3
    cutoff: float = 1.55
    inner: float = 0.5
    grid_n: int = 16384
    seed: int = 0
    hess_tol: float = 1e-8
    cc_tol: float = 1e-7

    def __post_init__(self):
        if not self.eps_mix >= 0:
            raise InvalidArgument("eps_mix must be non-negative")
        if not self.c > 0:
            raise InvalidArgument("c must be positive")
        if self.a == 0:
            raise InvalidArgument("a must be non-zero")
        if not (0 < self.inner < self.cutoff < math.pi / 2):
            raise InvalidArgument("need 0 < inner < cutoff < pi/2")

    @classmethod
    def literal(cls, **kw):
        base = dict(eps_mix=0.02, t0=0.05, t1=0.1, a=1.0, c=2.0, cutoff=1.2, inner=0.6)
        base.update(kw)
        return cls(**base)

    def to_dict(self):
        return asdict(self)


def build_f1(t0, t1, manifold=None):
    M = manifold or Sphere(1.0)
    ramp = RampProfile(t0, t1)
    if not ramp.check_invariants():
        raise InvalidRamp("ramp profile violates its invariants")
    return DistSqPotential(M, NORTH * M.radius, ramp)


def _radial_scan(M, f, radius, n_rings=400, n_angles=48):
    pts = geodesic_disk(M, NORTH * M.radius, radius, n_rings, n_angles)
    r = M.dist(NORTH * M.radius, pts)
    jet = grid_jet(f, pts)
    lam = np.linalg.eigvalsh(SymBilinearForm.from_ambient(M.frame(pts), jet.hess).matrix)
    return pts, r, lam


def concave_radius(f2, radius, tol=1e-12):
    """Largest sampled r0 such that hess f2 <= 0 on every sampled point with r <= r0."""
    M = f2.manifold
    _, r, lam = _radial_scan(M, f2, radius)
    bad = r[lam[:, -1] > tol]
    if bad.size == 0:
        return float(radius)
    below = r[r < bad.min()]
    return float(below.max()) if below.size else 0.0


def build_f2(a, c, cutoff, inner=None, manifold=None, min_radius=1e-2):
    """a u_1 - c |u|^3 around N with a radial cutoff; returns (f2, r0)."""
    M = manifold or Sphere(1.0)
    if a == 0 or not c > 0 or not cutoff < math.pi / 2 * M.radius:
        raise InvalidArgument("need a != 0, c > 0 and cutoff < pi/2")
    center = NORTH * M.radius
    lin = NormalCoordField(M, center, "linear", a, cutoff, inner)
    cub = NormalCoordField(M, center, "cubic", c, cutoff, inner)
    f2 = Sum(M, ((1.0, lin), (1.0, cub)))
    r0 = concave_radius(f2, lin.inner)
    if r0 < min_radius:
        raise ConstructionFailed(f"hess f2 <= 0 only verified up to r0={r0:.3g}; increase c relative to a")
    return f2, r0


def _margin_at(f, p):
    """Smallest eigenvalue of g - hess f at p."""
    return float(np.linalg.eigvalsh(np.eye(2) - f.hess(p).matrix)[0])


@dataclass
class HessianScan:
    min_margin: float
    worst_point: list
    samples: int
    refined_min: float

    def to_dict(self):
        return asdict(self)


def hessian_scan(f: ScalarField, n=16384, seed=0, n_refine=20):
    """min over S^2 of lambda_min(g - hess f): Fibonacci grid, a dense disk at N, then local refinement."""
    M = f.manifold
    grid = sphere_grid(M, n, seed)
    disk = geodesic_disk(M, NORTH * M.radius, 0.3 * M.radius, 60, 48)
    pts = np.concatenate([grid.points, disk])
    jet = grid_jet(f, pts)
    form = SymBilinearForm.from_ambient(M.frame(pts), jet.hess)
    margin = np.linalg.eigvalsh(np.eye(2) - form.matrix)[:, 0]
    order = np.argsort(margin, kind="stable")
    best = float(margin[order[0]])
    worst = pts[order[0]]
    step = grid.spacing
    for i in order[:n_refine]:
        F = M.frame(pts[i])

        def obj(u, p=pts[i], F=F):
            u = u if np.linalg.norm(u) <= step else u * step / np.linalg.norm(u)
            return _margin_at(f, M.exp(p, u @ F))

        res = minimize(obj, np.zeros(2), method="Nelder-Mead",
                       options={"initial_simplex": np.vstack([np.zeros(2), 0.25 * step * np.eye(2)]),
                                "xatol": 1e-10, "fatol": 1e-14, "maxiter": 400})
        if res.fun < best:
            u = res.x if np.linalg.norm(res.x) <= step else res.x * step / np.linalg.norm(res.x)
            best, worst = float(res.fun), M.exp(pts[i], u @ F)
    return HessianScan(float(margin.min()), worst.tolist(), len(pts), best)


def build_counterexample(config: CounterexampleConfig = CounterexampleConfig()):
    """Return (f, info) with f = f1 + eps_mix f2; raises MixTooLarge if hess f <= g fails."""
    M = Sphere(1.0)
    f1 = build_f1(config.t0, config.t1, M)
    f2, r0 = build_f2(config.a, config.c, config.cutoff, config.inner, M)
    f = Sum(M, ((1.0, f1), (config.eps_mix, f2)))
    scan = hessian_scan(f, config.grid_n, config.seed)
    if scan.refined_min < -config.hess_tol:
        raise MixTooLarge(f"g - hess f has eigenvalue {scan.refined_min:.3g}; shrink eps_mix")
    return f, {"r0": r0, "hessian_scan": scan.to_dict()}


def _violation_grids(M, config, spacing_grid: SampleGrid):
    scale = max(config.eps_mix * abs(config.a), 1e-3)
    center = NORTH * M.radius
    x_pts = np.concatenate([geodesic_disk(M, center, 1.5 * scale, 30, 36), spacing_grid.points[::16]])
    y_pts = np.concatenate([geodesic_disk(M, center, 3.0 * scale, 90, 72), spacing_grid.points])
    return x_pts, SampleGrid(M, y_pts, min(spacing_grid.spacing, 3.0 * scale / 90), spacing_grid.seed)


def verify_counterexample(f: ScalarField, config: CounterexampleConfig = CounterexampleConfig(), raise_on_fail=True):
    """Check (i) hess f <= g, (ii) an argmin violation > 10 tol, (iii) N is a saddle of h."""
    M = f.manifold
    center = NORTH * M.radius
    scan = hessian_scan(f, config.grid_n, config.seed)
    clause1 = scan.refined_min >= -config.hess_tol

    grid = sphere_grid(M, config.grid_n, config.seed)
    X, Y = _violation_grids(M, config, grid)
    res = empirical_cconcavity(f, X, Y, tol=config.cc_tol, refine=16, refine_radius=Y.spacing * 4)
    wit = res.witness
    clause2 = wit is not None and wit.violation > 10 * config.cc_tol
    d_xN = float(M.dist(center, np.asarray(wit.x))) if wit else None

    jn = f.jet(center)
    xs = M.exp(center, -jn.grad)
    r_star = float(np.linalg.norm(jn.grad))
    w = -M.log(center, xs)
    Hh = half_r2_hessian_ambient(M, w[None], np.array([r_star]), center[None])[0] - jn.hess
    lam = SymBilinearForm.from_ambient(M.frame(center), Hh).eigvalsh()
    predicted = r_star / math.tan(r_star) - 1.0 if r_star > 0 else 0.0
    clause3 = bool(lam[0] < 0 and abs(lam[0] - predicted) <= 1e-4)

    report = {
        "config": config.to_dict(),
        "clause_i": {"min_margin": scan.refined_min, "grid_min_margin": scan.min_margin,
                     "worst_point": scan.worst_point, "samples": scan.samples, "passed": bool(clause1)},
        "clause_ii": {"max_violation": res.max_violation, "threshold": 10 * config.cc_tol,
                      "witness": wit.to_dict() if wit else None, "witness_distance_to_N": d_xN,
                      "locality_envelope": 3 * config.eps_mix * abs(config.a),
                      "within_envelope": None if d_xN is None else d_xN <= 3 * config.eps_mix * abs(config.a),
                      "passed": bool(clause2)},
        "clause_iii": {"r_star": r_star, "eigenvalues": lam.tolist(), "predicted": predicted,
                       "passed": clause3},
    }
    report["passed"] = bool(clause1 and clause2 and clause3)
    if raise_on_fail and not report["passed"]:
        failed = [k for k in ("clause_i", "clause_ii", "clause_iii") if not report[k]["passed"]]
        raise VerificationFailed(f"counterexample verification failed: {', '.join(failed)}")

    margins = np.linalg.eigvalsh(np.eye(2) - SymBilinearForm.from_ambient(M.frame(X), grid_jet(f, X).hess).matrix)[:, 0]
    report["_rows"] = [
        (*map(float, p), float(m), float(v)) for p, m, v in zip(X, margins, res.per_x)
    ]
    return report


def violation_near_north(f: ScalarField, scale, tol=1e-7):
    """Largest argmin violation found for x and y in small disks around N."""
    M = f.manifold
    center = NORTH * M.radius
    X = geodesic_disk(M, center, 1.5 * scale, 15, 24)
    Y = SampleGrid(M, geodesic_disk(M, center, 3.0 * scale, 60, 48), 3.0 * scale / 60)
    return empirical_cconcavity(f, X, Y, tol=tol, refine=8, refine_radius=4 * Y.spacing).max_violation


def degeneration(config: CounterexampleConfig = CounterexampleConfig(), eps_values=(0.04, 0.02, 0.01)):
    """Violation near N for each eps_mix (expected to shrink with eps_mix)."""
    out = []
    for e in eps_values:
        cfg = replace(config, eps_mix=e)
        M = Sphere(1.0)
        f1 = build_f1(cfg.t0, cfg.t1, M)
        f2, _ = build_f2(cfg.a, cfg.c, cfg.cutoff, cfg.inner, M)
        f = Sum(M, ((1.0, f1), (e, f2)))
        out.append((e, violation_near_north(f, max(e * abs(cfg.a), 1e-3))))
    return out
