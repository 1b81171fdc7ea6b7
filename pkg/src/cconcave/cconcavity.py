"""Certificates of c-concavity for the quadratic cost and empirical argmin checks.

Two certifiers are provided. ``certify_technical`` checks the pair of
hypotheses

    delta = sqrt(2 diam |grad f|_inf + |grad f|_inf^2) <= min(inj/2, 1/sqrt(K))
    hess f <= (1 - K delta^2) g,

and ``certify_main`` checks the epsilon form

    |grad f|_inf <= min(eps / (3 K diam), C*),   hess f <= (1 - eps) g.

``empirical_cconcavity`` independently tests, for sampled x, whether x
minimises h(y) = 1/2 d^2(x*, y) - f(y) with x* = exp_x(-grad f(x)).
"""
from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import CutLocusError, InvalidArgument, VerificationFailed
from .fields import ScalarField, document_from_field, gradient_bound, grid_jet, oscillation
from .grids import SampleGrid, geodesic_disk
from .manifold import SymBilinearForm, half_r2_hessian_ambient

CERTIFIED = "Certified"
FAILED_DELTA = "FailedDelta"
FAILED_HESSIAN = "FailedHessian"


def field_id(f: ScalarField) -> str:
    blob = json.dumps(document_from_field(f), sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def _grid_echo(grid):
    if isinstance(grid, SampleGrid):
        return {"n": len(grid), "seed": grid.seed, "spacing": grid.spacing}
    return {"n": len(grid)}


def _points(grid):
    return grid.points if isinstance(grid, SampleGrid) else np.asarray(grid, dtype=float)


@dataclass
class Certificate:
    field_id: str
    variant: str
    verdict: str
    K: float
    inj: float
    diam: float
    grad_bound: float
    delta: float
    delta_budget: float
    hess_threshold: float
    hess_margin: float
    tol: float
    epsilon: float | None = None
    C_star: float | None = None
    eps_bound: float | None = None
    details: dict = field(default_factory=dict)

    @property
    def certified(self) -> bool:
        return self.verdict == CERTIFIED

    def to_dict(self):
        return asdict(self)


def delta_from_gradient(diam, grad_bound):
    return math.sqrt(2.0 * diam * grad_bound + grad_bound**2)


def delta_of(f: ScalarField, grid: SampleGrid) -> float:
    """delta = sqrt(2 diam G + G^2), G the certified bound on |grad f|_inf."""
    return delta_from_gradient(f.manifold.diam, gradient_bound(f, grid).bound)


def delta_budget(K, inj):
    return min(inj / 2.0, 1.0 / math.sqrt(K) if K > 0 else math.inf)


def admissible_gradient_bound(K, inj, diam, eps):
    """Return (C*, eps_bound).

    C* is the positive root of G^2 + 2 diam G = delta_budget^2, so any
    |grad f|_inf <= C* keeps delta inside the budget; eps_bound = eps/(3 K diam).
    """
    if not (inj > 0 and diam > 0):
        raise InvalidArgument("inj and diam must be positive")
    if K < 0:
        raise InvalidArgument("K must be non-negative")
    if not eps > 0:
        raise InvalidArgument("eps must be positive")
    b = delta_budget(K, inj)
    if math.isinf(b):
        c_star = math.inf
    else:
        # b^2 / (diam + sqrt(diam^2 + b^2)) == -diam + sqrt(diam^2 + b^2) without cancellation
        c_star = b**2 / (diam + math.sqrt(diam**2 + b**2))
    eps_bound = math.inf if K == 0 else eps / (3.0 * K * diam)
    return c_star, eps_bound


def _hessian_margin(f, pts, jet, threshold):
    """min over pts of the smallest eigenvalue of threshold * g - hess f."""
    frames = f.manifold.frame(pts)
    mats = frames @ jet.hess @ np.swapaxes(frames, -1, -2)
    lam = np.linalg.eigvalsh(threshold * np.eye(f.manifold.dim) - mats)[:, 0]
    i = int(np.argmin(lam))
    return float(lam[i]), i


def certify_technical(f: ScalarField, grid: SampleGrid, tol=1e-10) -> Certificate:
    M = f.manifold
    pts = _points(grid)
    jet = grid_jet(f, pts)
    gb = gradient_bound(f, grid, jet)
    delta = delta_from_gradient(M.diam, gb.bound)
    budget = delta_budget(M.K, M.inj)
    threshold = 1.0 - M.K * delta**2
    margin, worst = _hessian_margin(f, pts, jet, threshold)
    if delta > budget:
        verdict = FAILED_DELTA
    elif margin < -tol:
        verdict = FAILED_HESSIAN
    else:
        verdict = CERTIFIED
    details = {
        "grad_grid_max": gb.grid_max,
        "hess_opnorm_max": gb.hess_opnorm_max,
        "grid": _grid_echo(grid),
        "delta_slack": budget - delta,
        "worst_hessian_point": pts[worst].tolist(),
        "field": document_from_field(f),
    }
    return Certificate(
        field_id(f), "technical", verdict, M.K, M.inj, M.diam, gb.bound, delta, budget,
        threshold, margin, tol, details=details,
    )


def certify_main(f: ScalarField, eps: float, grid: SampleGrid, tol=1e-10) -> Certificate:
    if not (0.0 < eps < 1.0):
        raise InvalidArgument(f"epsilon must lie in (0, 1), got {eps}")
    M = f.manifold
    pts = _points(grid)
    jet = grid_jet(f, pts)
    gb = gradient_bound(f, grid, jet)
    c_star, eps_bound = admissible_gradient_bound(M.K, M.inj, M.diam, eps)
    limit = min(c_star, eps_bound)
    margin, worst = _hessian_margin(f, pts, jet, 1.0 - eps)
    if gb.bound > limit:
        verdict = FAILED_DELTA
    elif margin < -tol:
        verdict = FAILED_HESSIAN
    else:
        verdict = CERTIFIED
    delta = delta_from_gradient(M.diam, gb.bound)
    details = {
        "grad_limit": limit,
        "grad_grid_max": gb.grid_max,
        "grid": _grid_echo(grid),
        "worst_hessian_point": pts[worst].tolist(),
        "field": document_from_field(f),
    }
    cert = Certificate(
        field_id(f), "main", verdict, M.K, M.inj, M.diam, gb.bound, delta, delta_budget(M.K, M.inj),
        1.0 - eps, margin, tol, epsilon=eps, C_star=c_star, eps_bound=eps_bound, details=details,
    )
    if cert.certified:
        tech = certify_technical(f, grid, tol)
        details["technical_verdict"] = tech.verdict
        if not tech.certified:
            raise VerificationFailed("main-theorem certificate without a technical certificate")
    return cert


# -- empirical argmin check --------------------------------------------------


@dataclass
class ViolationWitness:
    x: list
    x_star: list
    y: list
    violation: float
    x_index: int

    def recompute(self, f: ScalarField) -> float:
        """h(x) - h(y) from raw field evaluations."""
        M = f.manifold
        x, xs, y = (np.asarray(v, dtype=float) for v in (self.x, self.x_star, self.y))
        hx = 0.5 * M.dist(xs, x) ** 2 - f.eval(x)
        hy = 0.5 * M.dist(xs, y) ** 2 - f.eval(y)
        return float(hx - hy)

    def to_dict(self):
        return asdict(self)


@dataclass
class CConcavityResult:
    passed: bool
    witness: ViolationWitness | None
    max_violation: float
    tol: float
    n_x: int
    n_y: int
    refined: int
    necessity_regime: bool | None = None
    per_x: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self):
        d = asdict(self)
        d.pop("per_x")
        return d


def _targets(f, X):
    M = f.manifold
    jx = grid_jet(f, X)
    gn = np.linalg.norm(jx.grad, axis=-1)
    if np.any(gn >= M.inj - 1e-9):
        raise CutLocusError("|grad f(x)| reaches the injectivity radius; x* is ill-defined")
    Xs = M.exp(X, -jx.grad)
    hX = 0.5 * gn**2 - jx.value
    return jx, Xs, hX


def _coarse(M, Xs, hX, Y, fY, workers, budget=2_000_000):
    n = len(Xs)
    block = max(1, budget // max(1, len(Y)))
    starts = list(range(0, n, block))

    def run(s):
        H = 0.5 * M.dist(Xs[s : s + block, None, :], Y[None, :, :]) ** 2 - fY[None, :]
        j = np.argmin(H, axis=1)
        return hX[s : s + block] - H[np.arange(len(j)), j], j

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(run, starts))
    else:
        parts = [run(s) for s in starts]
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def local_minimize_h(f: ScalarField, x_star, start, radius):
    """Minimise h(y) = 1/2 d^2(x*, y) - f(y) over the geodesic ball B(start, radius)."""
    M = f.manifold
    F = M.frame(start)

    def point(u):
        return M.exp(start, u @ F)

    def h(u):
        nu = float(np.linalg.norm(u))
        if nu > radius:
            u = u * (radius / nu)
        y = point(u)
        return float(0.5 * M.dist(x_star, y) ** 2 - f.eval(y)) + max(0.0, nu - radius) ** 2

    init = np.zeros(M.dim)
    simplex = np.vstack([init, 0.25 * radius * np.eye(M.dim)])
    res = minimize(h, init, method="Nelder-Mead",
                   options={"initial_simplex": simplex, "xatol": 1e-11, "fatol": 1e-16, "maxiter": 2000})
    u = res.x
    nu = float(np.linalg.norm(u))
    if nu > radius:
        u = u * (radius / nu)
    y = point(u)
    return y, float(0.5 * M.dist(x_star, y) ** 2 - f.eval(y))


def _h_hessian_min_eig(f, X, Xs, jx):
    """Smallest eigenvalue of hess h_x at y = x, where h_x = 1/2 d^2(x*, .) - f."""
    M = f.manifold
    w = -M.log(X, Xs, check=False)
    r = np.linalg.norm(w, axis=-1)
    H = half_r2_hessian_ambient(M, w, r, X) - jx.hess
    form = SymBilinearForm.from_ambient(M.frame(X), H)
    lam, vec = np.linalg.eigh(form.matrix)
    return lam[:, 0], np.einsum("ni,nij->nj", vec[:, :, 0], form.frame)


def necessity_regime(f: ScalarField, grid) -> bool:
    """Working smallness criterion under which a failed argmin test disproves c-concavity."""
    M = f.manifold
    if not isinstance(grid, SampleGrid):
        return None
    g = gradient_bound(f, grid).bound
    rad = min(M.inj / 2, math.pi / (2 * math.sqrt(M.K)) if M.K > 0 else math.inf)
    return bool(oscillation(f, grid) + 0.5 * g**2 <= 0.5 * rad**2)


def empirical_cconcavity(f: ScalarField, x_grid, y_grid, tol=1e-7, refine=8, refine_radius=None, workers=1):
    """Test x in argmin_y h_x(y) for every sampled x (one-sided: Pass is not a proof).

    Stage one scans the full y grid. Stage two refines, for the ``refine``
    x with largest coarse violation and the ``refine`` x where h_x is least
    convex at x, by a local Nelder-Mead search around the best coarse y and
    along the most negative curvature direction of h_x at x.
    """
    M = f.manifold
    X, Y = _points(x_grid), _points(y_grid)
    jx, Xs, hX = _targets(f, X)
    fY = grid_jet(f, Y).value
    viol, best = _coarse(M, Xs, hX, Y, fY, workers)
    best_y = Y[best].copy()

    if refine_radius is None:
        refine_radius = y_grid.spacing if isinstance(y_grid, SampleGrid) else 0.05
    refined = 0
    if refine:
        lam, vmin = _h_hessian_min_eig(f, X, Xs, jx)
        cand = list(np.argsort(-viol, kind="stable")[:refine])
        neg = np.flatnonzero(lam < 0)
        cand += list(neg[np.argsort(lam[neg], kind="stable")][:refine])
        for i in sorted(set(int(c) for c in cand)):
            starts = [best_y[i]]
            if lam[i] < 0:
                for s in (1.0, -1.0):
                    starts.append(M.exp(X[i], s * 0.5 * refine_radius * vmin[i]))
            for st in starts:
                y, hy = local_minimize_h(f, Xs[i], st, refine_radius)
                if hX[i] - hy > viol[i]:
                    viol[i] = hX[i] - hy
                    best_y[i] = y
            refined += 1

    i = int(np.argmax(viol))
    worst = float(viol[i])
    witness = None
    if worst > tol:
        witness = ViolationWitness(X[i].tolist(), Xs[i].tolist(), best_y[i].tolist(), worst, i)
    return CConcavityResult(
        witness is None, witness, worst, tol, len(X), len(Y), refined,
        necessity_regime(f, y_grid), per_x=viol,
    )


# -- the three claims --------------------------------------------------------


def check_three_claims(f: ScalarField, x, grid: SampleGrid, tol=1e-8, n_rings=12, n_angles=24):
    """Evaluate the three ingredients of the technical proof at a single x.

    1. h(y) >= h(x) for y outside B(x*, delta);
    2. grad h(x) = 0, i.e. gamma'(1) = grad f(x) for the geodesic x* -> x;
    3. hess h >= 0 inside B(x*, delta).
    """
    M = f.manifold
    x = np.asarray(x, dtype=float)
    gb = gradient_bound(f, grid)
    G = gb.bound
    delta = delta_from_gradient(M.diam, G)
    jx = f.jet(x)
    if np.linalg.norm(jx.grad) >= M.inj - 1e-9:
        raise CutLocusError("d(x, x*) reaches the injectivity radius")
    xs = M.exp(x, -jx.grad)
    hx = 0.5 * float(jx.grad @ jx.grad) - float(jx.value)

    Y = grid.points
    dY = M.dist(xs[None, :], Y)
    far = dY >= delta
    h_far = 0.5 * dY[far] ** 2 - grid_jet(f, Y[far]).value if far.any() else np.array([])
    m1 = float(np.min(h_far - hx)) if h_far.size else math.inf
    chain = 0.5 * delta**2 - M.diam * G - 0.5 * G**2

    gamma1 = -M.log(x, xs)
    m2 = float(np.linalg.norm(gamma1 - jx.grad))

    rad = min(delta, M.inj - 1e-6) * (1 - 1e-9)
    inside = Y[dY < rad]
    local = geodesic_disk(M, xs, rad, n_rings, n_angles) if rad > 0 else xs[None, :]
    B = np.concatenate([inside, local], axis=0)
    jB = grid_jet(f, B)
    w = -M.log(B, np.broadcast_to(xs, B.shape), check=False)
    HB = half_r2_hessian_ambient(M, w, np.linalg.norm(w, axis=-1), B) - jB.hess
    lam = np.linalg.eigvalsh(SymBilinearForm.from_ambient(M.frame(B), HB).matrix)[:, 0]
    m3 = float(lam.min())

    claims = {
        "claim1": {"min_gap": m1, "samples": int(far.sum()), "chain_lower_bound": chain, "passed": m1 >= -tol},
        "claim2": {"gradient_mismatch": m2, "passed": m2 <= tol},
        "claim3": {"min_eigenvalue": m3, "samples": int(len(B)), "passed": m3 >= -tol},
    }
    return {
        "x": x.tolist(),
        "x_star": xs.tolist(),
        "delta": delta,
        "grad_bound": G,
        "tol": tol,
        "claims": claims,
        "passed": all(c["passed"] for c in claims.values()),
    }
