"""Numerical checks of the geometric comparison facts behind c-concavity.

Each check samples point pairs, evaluates both sides of an inequality
and reports the most negative slack. The Hessian of r is "measured" through
an independent route (the extrinsic embedding formula on the sphere, the
Euclidean norm Hessian on flat spaces, or finite differences), never through
the closed form being compared against.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InvalidArgument, InvalidRadius
from .fields import fd_hessian_fn
from .grids import SampleGrid
from .manifold import Manifold, Sphere, hessian_half_r2, hessian_r

CLOSED_FORM_TOL = 1e-8


@dataclass
class ComparisonReport:
    name: str
    samples: int
    min_margin: float
    worst_sample: list
    tol: float
    passed: bool
    details: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def _report(name, margins, samples_repr, tol, details=None):
    margins = np.asarray(margins, dtype=float)
    if margins.size == 0:
        return ComparisonReport(name, 0, math.inf, [], tol, True, details or {})
    i = int(np.argmin(margins))
    worst = np.atleast_1d(samples_repr[i]).tolist()
    m = float(margins[i])
    return ComparisonReport(name, int(margins.size), m, worst, tol, bool(m >= -tol), details or {})


def comparison_coefficient(K, r):
    """sqrt(K) cot(sqrt(K) r), with the flat limit 1/r at K = 0."""
    r = np.asarray(r, dtype=float)
    if K == 0:
        return 1.0 / r
    s = math.sqrt(K)
    return s * np.cos(s * r) / np.sin(s * r)


def alpha(t):
    """alpha(t) = t cos t / sin t with alpha(0) = 1."""
    t = np.asarray(t, dtype=float)
    small = np.abs(t) < 1e-4
    ts = np.where(small, 1.0, t)
    return np.where(small, 1.0 - t**2 / 3.0 - t**4 / 45.0, ts * np.cos(ts) / np.sin(ts))


def sample_pairs(M: Manifold, grid: SampleGrid, rmin, rmax, seed=0):
    """Pairs (x, y) with x on the grid and y = exp_x(v), |v| uniform in [rmin, rmax]."""
    rng = np.random.default_rng(seed)
    x = grid.points
    v = M.random_tangent(rng, x, 1.0)
    v = v / np.linalg.norm(v, axis=-1, keepdims=True)
    r = rmin + (rmax - rmin) * rng.random(len(x))
    y = M.exp(x, v * r[:, None])
    return x, y


def hessian_r_embedded(M: Manifold, x, y):
    """Hessian of r = d(x, .) at y computed extrinsically, as an ambient matrix.

    On the sphere r = R arccos(<x/R, y>/R) is differentiated in R^3 and
    converted with the Weingarten correction P D^2F P - (<DF, y>/R^2) P.
    On flat spaces it is the Hessian of the Euclidean norm of the displacement.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if isinstance(M, Sphere):
        R = M.radius
        xh = x / R
        sin_t = np.linalg.norm(np.cross(xh, y / R), axis=-1)
        cos_t = np.sum(xh * y, axis=-1) / R
        dF = (-1.0 / sin_t)[:, None] * xh
        P = M.projector(y)
        # P (c xh xh^T) P = c (P xh)(P xh)^T; projecting first avoids cancelling 1/sin^3 terms
        pxh = np.einsum("nij,nj->ni", P, xh)
        d2F_tan = (-cos_t / sin_t**3 / R)[:, None, None] * (pxh[:, :, None] * pxh[:, None, :])
        return d2F_tan - (np.sum(dF * y, axis=-1) / R**2)[:, None, None] * P
    delta = M.log(x, y, check=False)
    r = np.linalg.norm(delta, axis=-1)
    n = delta / r[:, None]
    eye = np.eye(M.ambient_dim)
    return (eye - n[:, :, None] * n[:, None, :]) / r[:, None, None]


def _measured_hessian_r(M, x, y, method, h):
    frame = M.frame(y)
    if method == "embedding":
        H = hessian_r_embedded(M, x, y)
        return frame @ H @ np.swapaxes(frame, -1, -2)
    if method == "fd":
        return fd_hessian_fn(M, lambda q: M.dist(x, q), y, h).matrix
    if method == "closed":
        return hessian_r(M, x, y).matrix
    raise InvalidArgument(f"unknown method {method!r}")


def _radial_frame_components(M, x, y):
    n = -M.log(y, x, check=False)
    n = n / np.linalg.norm(n, axis=-1, keepdims=True)
    return np.einsum("nij,nj->ni", M.frame(y), n)


def check_hessian_comparison(M: Manifold, grid: SampleGrid, tol=None, method="embedding", h=None, seed=0, rmin=None):
    """Hessian comparison: hess r >= sqrt(K) cot(sqrt(K) r) (g - dr (x) dr).

    Pairs are sampled with rmin <= r <= bound - rmin, bound = min(pi/sqrt(K), inj).
    The direction of grad r is ill-conditioned like 1/r near 0 and near the
    cut locus, so rmin defaults to 1e-3 (scaled by the sphere radius).
    """
    fd = method == "fd"
    h = (5e-5 if fd else 1e-3) if h is None else h
    if tol is None:
        tol = max(1e-6, 10 * h**2) if fd else CLOSED_FORM_TOL
    bound = min(math.pi / math.sqrt(M.K) if M.K > 0 else math.inf, M.inj)
    top = bound if math.isfinite(bound) else M.diam
    if fd:
        # finite-difference truncation grows like h^2 / r^3: stay in the bulk
        rmin, rmax = 0.3 * min(top, 1.0) if rmin is None else rmin, 0.9 * top
    else:
        scale = 1.0 / math.sqrt(M.K) if M.K > 0 else 1.0
        rmin = 1e-3 * scale if rmin is None else rmin
        rmax = top - rmin
    x, y = sample_pairs(M, grid, rmin, rmax, seed)
    r = M.dist(x, y)
    measured = _measured_hessian_r(M, x, y, method, h)
    c = _radial_frame_components(M, x, y)
    d = M.dim
    rhs = comparison_coefficient(M.K, r)[:, None, None] * (np.eye(d) - c[:, :, None] * c[:, None, :])
    eig = np.linalg.eigvalsh(measured - rhs)
    margins = eig[:, 0]
    details = {"method": method, "max_deviation": float(np.max(np.abs(eig))), "r_range": [float(r.min()), float(r.max())]}
    rep = _report("hessian_comparison", margins, np.concatenate([x, y], axis=-1), tol, details)
    if isinstance(M, Sphere) or M.K == 0:
        # equality case: the comparison is an identity on constant-curvature models
        details["equality_holds"] = bool(details["max_deviation"] <= tol)
        rep.passed = rep.passed and details["equality_holds"]
    return rep


def check_half_square_bound(M: Manifold, grid: SampleGrid, tol=CLOSED_FORM_TOL, seed=0):
    """Half-square bound: 1/2 hess(r^2) >= (1 - K r^2) g for r < min(1/sqrt(K), inj)."""
    bound = min(1.0 / math.sqrt(M.K) if M.K > 0 else math.inf, M.inj)
    rmax = (bound if math.isfinite(bound) else M.diam) * (1 - 1e-6)
    x, y = sample_pairs(M, grid, 0.0, rmax, seed)
    r = M.dist(x, y)
    frame = M.frame(y)
    hr = np.zeros((len(x), M.dim, M.dim))
    pos = r > 1e-12
    hr[pos] = frame[pos] @ hessian_r_embedded(M, x[pos], y[pos]) @ np.swapaxes(frame[pos], -1, -2)
    c = np.zeros((len(x), M.dim))
    c[pos] = _radial_frame_components(M, x[pos], y[pos])
    eye = np.eye(M.dim)
    half_sq = c[:, :, None] * c[:, None, :] + r[:, None, None] * hr
    half_sq[~pos] = eye
    slack = half_sq - (1.0 - M.K * r**2)[:, None, None] * eye
    margins = np.linalg.eigvalsh(slack)[:, 0]
    order = np.argsort(r)
    # reported only: is the slack monotone in r along the sampled range?
    diffs = np.diff(margins[order])
    details = {
        "r_range": [float(r.min()), float(r.max())],
        "monotone_increasing_in_r": bool(np.all(diffs >= -1e-12)),
        "monotone_decreasing_in_r": bool(np.all(diffs <= 1e-12)),
    }
    return _report("half_square_bound", margins, np.concatenate([x, y], axis=-1), tol, details)


def half_square_slack_along_geodesic(M: Manifold, x, direction, rs):
    """Slack min-eig(1/2 hess r^2 - (1 - K r^2) g) at exp_x(r u) for each r in rs."""
    rs = np.asarray(rs, dtype=float)
    u = direction / np.linalg.norm(direction)
    y = M.exp(np.broadcast_to(x, (len(rs), len(x))), rs[:, None] * u)
    H = hessian_half_r2(M, np.broadcast_to(x, y.shape), y).matrix
    return np.linalg.eigvalsh(H - (1 - M.K * rs**2)[:, None, None] * np.eye(M.dim))[:, 0]


def check_alpha_inequality(t_grid=None, tol=0.0):
    """|1 - alpha(t)| <= t^2 / 2 on [0, 1)."""
    t = np.linspace(0.0, 1.0, 10_001)[:-1] if t_grid is None else np.asarray(t_grid, dtype=float)
    if np.any((t < 0) | (t >= 1)):
        raise InvalidArgument("alpha inequality is only asserted for 0 <= t < 1")
    margins = t**2 / 2 - np.abs(1 - alpha(t))
    return _report("alpha_inequality", margins, t, tol)


def convexity_radius_bound(M: Manifold):
    return min(M.inj / 2, math.pi / (2 * math.sqrt(M.K)) if M.K > 0 else math.inf)


def check_convexity_radius(M: Manifold, x, delta, pair_samples=2000, tol=1e-10, seed=0, n_t=33, enforce_bound=True):
    """Sampled geodesic convexity of B(x, delta): minimizing geodesics between
    points of the ball must not leave it."""
    bound = convexity_radius_bound(M)
    if enforce_bound and delta > bound + 1e-12:
        raise InvalidRadius(f"delta={delta} exceeds the convexity-radius bound {bound}")
    rng = np.random.default_rng(seed)
    x = np.asarray(x, dtype=float)
    base = np.broadcast_to(x, (pair_samples, x.size))
    # half of the endpoints are pushed to the boundary, where leaving the ball is likeliest
    scale = np.where(rng.random((2, pair_samples)) < 0.5, 1.0, np.sqrt(rng.random((2, pair_samples))))
    pts = []
    for k in range(2):
        v = M.random_tangent(rng, base, 1.0)
        v = v / np.linalg.norm(v, axis=-1, keepdims=True)
        pts.append(M.exp(base, v * (delta * (1 - 1e-12) * scale[k])[:, None]))
    p, q = pts
    ok = M.dist(p, q) < M.inj - 1e-9
    p, q = p[ok], q[ok]
    v = M.log(p, q, check=False)
    ts = np.linspace(0.0, 1.0, n_t)
    gam = M.exp(p[:, None, :], ts[None, :, None] * v[:, None, :])
    margin = delta - M.dist(np.broadcast_to(x, gam.shape), gam)
    worst_t = np.min(margin, axis=1)
    details = {"delta": delta, "bound": bound, "skipped_cut_pairs": int((~ok).sum())}
    return _report("convexity_radius", worst_t, np.concatenate([p, q], axis=-1), tol, details)


def check_sphere_identity(R=1.0, grid: SampleGrid | None = None, h=1e-3, tol=None, rmin=None, seed=0):
    """Finite-difference Hessians of r and 1/2 r^2 against the closed forms on S^2(R).

    Passes when the max entrywise error at step h is below tol (default 10 h^2)
    and the error ratio between h and h/2 lies in [3.5, 4.5].
    """
    from .grids import sphere_grid

    M = Sphere(R)
    if grid is None:
        grid = sphere_grid(M, 4096, seed)
    tol = 10 * h**2 if tol is None else tol
    rmin = 0.5 * R if rmin is None else rmin
    x, y = sample_pairs(M, grid, rmin, math.pi * R - rmin, seed)
    Hr = hessian_r(M, x, y).matrix
    Hq = hessian_half_r2(M, x, y).matrix

    def errors(step):
        fr = fd_hessian_fn(M, lambda q: M.dist(x, q), y, step).matrix
        fq = fd_hessian_fn(M, lambda q: 0.5 * M.dist(x, q) ** 2, y, step).matrix
        return np.maximum(np.abs(fr - Hr).max(axis=(1, 2)), np.abs(fq - Hq).max(axis=(1, 2))), fr

    (e1, fd_r), (e2, _) = errors(h), errors(h / 2)
    ratio = float(e1.max() / e2.max())
    c = _radial_frame_components(M, x, y)
    # the measured Hessian of r must kill the radial direction
    radial = np.abs(np.einsum("ni,nij->nj", c, fd_r)).max()
    details = {
        "h": h,
        "max_error_h": float(e1.max()),
        "max_error_h2": float(e2.max()),
        "ratio": ratio,
        "radial_annihilation": float(radial),
        "rmin": rmin,
    }
    rep = _report("sphere_identity", tol - e1, np.concatenate([x, y], axis=-1), 0.0, details)
    rep.tol = tol
    rep.min_margin = float(tol - e1.max())
    rep.passed = bool(e1.max() <= tol and 3.5 <= ratio <= 4.5 and radial <= tol)
    return rep
