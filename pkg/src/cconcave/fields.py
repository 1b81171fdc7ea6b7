"""C^2 scalar fields on the model manifolds with analytic gradients and Hessians.

Fields form a small closed algebra (constants, ramped squared-distance
potentials, restricted linear functions, normal-coordinate bumps and linear
combinations). Every constructor knows its exact gradient and Hessian, so the
finite-difference routines below serve purely as an independent oracle.

Gradients are ambient tangent vectors, Hessians are ambient (D x D) operators
supported on the tangent space; ``hess`` converts them to a
:class:`~cconcave.manifold.SymBilinearForm` in the standard frame.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import InvalidArgument, InvalidRamp
from .grids import SampleGrid
from .manifold import Manifold, Sphere, SymBilinearForm, manifold_from_dict

_CUT_MARGIN = 1e-3


class Jet(NamedTuple):
    value: np.ndarray
    grad: np.ndarray
    hess: np.ndarray


def _as_batch(p):
    p = np.asarray(p, dtype=float)
    if p.ndim == 1:
        return p[None, :], True
    return p.reshape(-1, p.shape[-1]), False


def _outer(a, b):
    return a[..., :, None] * b[..., None, :]


# -- one-dimensional profiles ------------------------------------------------


@dataclass(frozen=True)
class RampProfile:
    """C^2 ramp rho: rho(t) = t on [0, t0], constant on [t1, inf).

    Between the knots rho'' is a negative hat (piecewise linear, zero at both
    knots), so rho is a cubic spline with knots t0, (t0+t1)/2, t1.
    """

    t0: float
    t1: float

    def __post_init__(self):
        if not (0.0 < self.t0 < self.t1) or not math.isfinite(self.t1):
            raise InvalidRamp(f"ramp needs 0 < t0 < t1 < inf, got t0={self.t0}, t1={self.t1}")

    @property
    def width(self):
        return self.t1 - self.t0

    @property
    def plateau(self):
        return self.t0 + 0.5 * self.width

    def __call__(self, t):
        """Return (rho, rho', rho'') at t."""
        t = np.asarray(t, dtype=float)
        w = self.width
        u = np.clip((t - self.t0) / w, 0.0, 1.0)
        lo = u <= 0.5
        integral = np.where(lo, u - 2.0 * u**3 / 3.0, 0.5 - 2.0 * (1.0 - u) ** 3 / 3.0)
        step = np.where(lo, 2.0 * u**2, 1.0 - 2.0 * (1.0 - u) ** 2)
        hat = np.where(lo, 4.0 * u, 4.0 * (1.0 - u))
        inside = (t > self.t0) & (t < self.t1)
        rho = np.where(t <= self.t0, t, self.t0 + w * integral)
        d1 = np.where(t <= self.t0, 1.0, 1.0 - step)
        d2 = np.where(inside, -hat / w, 0.0)
        return rho, d1, d2

    def check_invariants(self, n=10_000, tol=1e-12):
        t = np.linspace(0.0, 1.5 * self.t1, n)
        rho, d1, d2 = self(t)
        ok = np.all(d1 >= -tol) and np.all(d1 <= 1 + tol) and np.all(d2 <= tol)
        ok = ok and np.allclose(rho[t <= self.t0], t[t <= self.t0])
        ok = ok and np.allclose(rho[t >= self.t1], self.plateau)
        return bool(ok)

    def to_dict(self):
        return {"t0": self.t0, "t1": self.t1}


def _cutoff_profile(r, inner, outer):
    """Quintic C^2 cutoff: 1 for r <= inner, 0 for r >= outer. Returns (chi, chi'/r, chi'')."""
    w = outer - inner
    u = np.clip((r - inner) / w, 0.0, 1.0)
    s = u**3 * (10.0 - 15.0 * u + 6.0 * u**2)
    s1 = 30.0 * u**2 * (1.0 - u) ** 2
    s2 = 60.0 * u * (1.0 - u) * (1.0 - 2.0 * u)
    chi = 1.0 - s
    d1_over_r = np.where(r > inner, -s1 / w / np.maximum(r, inner), 0.0)
    d2 = -s2 / w**2
    return chi, d1_over_r, d2


def _cubic_profile(r, c):
    return -c * r**3, -3.0 * c * r, -6.0 * c * r


def _psi_profile(r, radius):
    """psi(r) = theta / sin(theta), theta = r / R: the normal-coordinate stretch factor."""
    th = r / radius
    small = th < 1e-2
    ts = np.where(small, 1.0, th)
    sn, cs = np.sin(ts), np.cos(ts)
    psi = np.where(small, 1 + th**2 / 6 + 7 * th**4 / 360 + 31 * th**6 / 15120, ts / sn)
    a = sn - ts * cs
    d1_over_r = np.where(small, 1 / 3 + 7 * th**2 / 90 + 31 * th**4 / 2520, a / sn**2 / ts)
    d2 = np.where(small, 1 / 3 + 7 * th**2 / 30 + 31 * th**4 / 504, (ts * sn**2 - 2 * cs * a) / sn**3)
    return psi, d1_over_r / radius**2, d2 / radius**2


def _profile_product(p, q, r):
    f, fr, f2 = p
    g, gr, g2 = q
    return f * g, fr * g + f * gr, f2 * g + 2.0 * (r * fr) * (r * gr) + f * g2


def _radial_jet(M, y, w, r, profile):
    """Jet of phi(r), r = |w|, w = grad(1/2 r^2) at y; profile = (phi, phi'/r, phi'')."""
    phi, dr, d2 = profile
    grad = dr[:, None] * w
    P = M.projector(y)
    tang = dr * M.rkappa(r)
    rs = np.where(r > 0, r, 1.0)
    n = np.where((r > 0)[:, None], w / rs[:, None], 0.0)
    hess = tang[:, None, None] * P + (d2 - tang)[:, None, None] * _outer(n, n)
    return Jet(phi, grad, hess)


def _support(M, center, y, radius):
    """Distances to center, mask of points with r < radius and w = -log_y(center) there."""
    d = M.dist(center[None, :], y)
    mask = d < radius
    w = -M.log(y[mask], center[None, :], check=False)
    return d, mask, w


# -- the field algebra -------------------------------------------------------


class ScalarField:
    """Base class: subclasses implement ``_jet`` on an (N, D) batch."""

    manifold: Manifold

    def _jet(self, y) -> Jet:
        raise NotImplementedError

    def jet(self, p) -> Jet:
        y, single = _as_batch(p)
        j = self._jet(y)
        if single:
            return Jet(j.value[0], j.grad[0], j.hess[0])
        return j

    def eval(self, p):
        return self.jet(p).value

    def grad(self, p):
        return self.jet(p).grad

    def hess_ambient(self, p):
        return self.jet(p).hess

    def hess(self, p) -> SymBilinearForm:
        p = np.asarray(p, dtype=float)
        return SymBilinearForm.from_ambient(self.manifold.frame(p), self.hess_ambient(p))

    def __add__(self, other):
        return Sum(self.manifold, ((1.0, self), (1.0, other)))

    def __sub__(self, other):
        return Sum(self.manifold, ((1.0, self), (-1.0, other)))

    def __mul__(self, c):
        return Sum(self.manifold, ((float(c), self),))

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def to_dict(self) -> dict:
        raise NotImplementedError


def _zero_jet(M, y):
    n, D = y.shape
    return Jet(np.zeros(n), np.zeros((n, D)), np.zeros((n, D, D)))


@dataclass(frozen=True, eq=False)
class Constant(ScalarField):
    manifold: Manifold
    value: float = 0.0

    def _jet(self, y):
        j = _zero_jet(self.manifold, y)
        return Jet(j.value + self.value, j.grad, j.hess)

    def to_dict(self):
        return {"type": "constant", "value": self.value}


@dataclass(frozen=True, eq=False)
class DistSqPotential(ScalarField):
    """y -> rho(1/2 d^2(center, y)) for a ramp rho that is constant before the cut locus."""

    manifold: Manifold
    center: np.ndarray
    ramp: RampProfile

    def __post_init__(self):
        M = self.manifold
        object.__setattr__(self, "center", M.project(np.asarray(self.center, dtype=float)))
        if math.isfinite(M.inj) and math.sqrt(2 * self.ramp.t1) > M.inj * (1 - _CUT_MARGIN):
            raise InvalidRamp(
                f"ramp plateau t1={self.ramp.t1} must start before the cut locus "
                f"(need t1 < {0.5 * (M.inj * (1 - _CUT_MARGIN)) ** 2:.6g})"
            )

    def _jet(self, y):
        M = self.manifold
        d, mask, w = _support(M, self.center, y, math.sqrt(2 * self.ramp.t1))
        out = _zero_jet(M, y)
        value = np.full(len(y), self.ramp.plateau)
        r = d[mask]
        rho, d1, d2 = self.ramp(0.5 * r**2)
        j = _radial_jet(M, y[mask], w, r, (rho, d1, d1 + d2 * r**2))
        value[mask] = j.value
        out.grad[mask] = j.grad
        out.hess[mask] = j.hess
        return Jet(value, out.grad, out.hess)

    def to_dict(self):
        return {"type": "dist_sq_potential", "center": list(map(float, self.center)), "ramp": self.ramp.to_dict()}


@dataclass(frozen=True, eq=False)
class AmbientLinear(ScalarField):
    """Restriction of x -> <x, v> to the sphere."""

    manifold: Sphere
    v: np.ndarray

    def __post_init__(self):
        if not isinstance(self.manifold, Sphere):
            raise InvalidArgument("AmbientLinear is only defined on the sphere")
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float))

    def _jet(self, y):
        M = self.manifold
        val = y @ self.v
        grad = M.proj(y, np.broadcast_to(self.v, y.shape))
        hess = -(val / M.radius**2)[:, None, None] * M.projector(y)
        return Jet(val, grad, hess)

    def to_dict(self):
        return {"type": "ambient_linear", "v": list(map(float, self.v))}


@dataclass(frozen=True, eq=False)
class NormalCoordField(ScalarField):
    """A bump in normal coordinates u = log_center(y), cut off radially.

    kind "linear" is coef * u_1 (u_1 along the first frame axis at center);
    kind "cubic" is -coef * |u|^3. The cutoff equals 1 for r <= inner and
    vanishes for r >= cutoff.
    """

    manifold: Manifold
    center: np.ndarray
    kind: str
    coef: float
    cutoff: float
    inner: float | None = None

    def __post_init__(self):
        M = self.manifold
        object.__setattr__(self, "center", M.project(np.asarray(self.center, dtype=float)))
        if self.inner is None:
            object.__setattr__(self, "inner", 0.5 * self.cutoff)
        if self.kind not in ("linear", "cubic"):
            raise InvalidArgument(f"unknown normal-coordinate kind {self.kind!r}")
        if not (0 < self.inner < self.cutoff):
            raise InvalidArgument("need 0 < inner < cutoff")
        if math.isfinite(M.inj) and self.cutoff > M.inj * (1 - _CUT_MARGIN):
            raise InvalidArgument("cutoff radius must stay inside the injectivity radius")

    @property
    def axis(self):
        return self.manifold.frame(self.center)[0]

    def _jet(self, y):
        M = self.manifold
        d, mask, w = _support(M, self.center, y, self.cutoff)
        out = _zero_jet(M, y)
        ym, r = y[mask], d[mask]
        chi = _cutoff_profile(r, self.inner, self.cutoff)
        if self.kind == "cubic":
            j = _radial_jet(M, ym, w, r, _profile_product(_cubic_profile(r, self.coef), chi, r))
        else:
            e1 = self.axis
            if isinstance(M, Sphere):
                # u_1 = psi(r) <y, e1> with psi = theta / sin(theta)
                prof = _profile_product(_psi_profile(r, M.radius), chi, r)
                B = ym @ e1
                gB = M.proj(ym, np.broadcast_to(e1, ym.shape))
                HB = -(B / M.radius**2)[:, None, None] * M.projector(ym)
            else:
                prof = chi
                B = w @ e1
                gB = np.broadcast_to(e1, ym.shape)
                HB = np.zeros(ym.shape + (ym.shape[-1],))
            A = _radial_jet(M, ym, w, r, prof)
            j = Jet(
                self.coef * A.value * B,
                self.coef * (A.value[:, None] * gB + B[:, None] * A.grad),
                self.coef
                * (
                    A.value[:, None, None] * HB
                    + B[:, None, None] * A.hess
                    + _outer(A.grad, gB)
                    + _outer(gB, A.grad)
                ),
            )
        out.value[mask] = j.value
        out.grad[mask] = j.grad
        out.hess[mask] = j.hess
        return out

    def to_dict(self):
        return {
            "type": "normal_coord",
            "center": list(map(float, self.center)),
            "kind": self.kind,
            "coef": self.coef,
            "cutoff": self.cutoff,
            "inner": self.inner,
        }


@dataclass(frozen=True, eq=False)
class Sum(ScalarField):
    manifold: Manifold
    terms: tuple

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple((float(c), f) for c, f in self.terms))

    def _jet(self, y):
        out = _zero_jet(self.manifold, y)
        v, g, H = out
        for c, f in self.terms:
            j = f._jet(y)
            v = v + c * j.value
            g = g + c * j.grad
            H = H + c * j.hess
        return Jet(v, g, H)

    def to_dict(self):
        return {"type": "sum", "terms": [[c, f.to_dict()] for c, f in self.terms]}


def field_from_dict(d: dict, manifold: Manifold) -> ScalarField:
    kind = d.get("type")
    if kind == "constant":
        return Constant(manifold, float(d.get("value", 0.0)))
    if kind == "dist_sq_potential":
        ramp = d["ramp"]
        t1 = float(ramp["t1"])
        return DistSqPotential(manifold, np.array(d["center"], float), RampProfile(float(ramp.get("t0", t1 / 2)), t1))
    if kind == "ambient_linear":
        return AmbientLinear(manifold, np.array(d["v"], float))
    if kind == "normal_coord":
        return NormalCoordField(
            manifold, np.array(d["center"], float), d["kind"], float(d["coef"]), float(d["cutoff"]),
            None if d.get("inner") is None else float(d["inner"]),
        )
    if kind == "sum":
        return Sum(manifold, tuple((float(c), field_from_dict(t, manifold)) for c, t in d["terms"]))
    if kind == "scaled":
        return float(d["scale"]) * field_from_dict(d["field"], manifold)
    raise InvalidArgument(f"unknown field type {kind!r}")


def document_from_field(f: ScalarField) -> dict:
    return {"manifold": f.manifold.to_dict(), "field": f.to_dict()}


def field_from_document(doc: dict) -> ScalarField:
    return field_from_dict(doc["field"], manifold_from_dict(doc["manifold"]))


# -- finite-difference oracles -----------------------------------------------


def _values(fn, pts):
    shape = pts.shape[:-1]
    return np.asarray(fn(pts.reshape(-1, pts.shape[-1]))).reshape(shape)


def fd_gradient_fn(M: Manifold, fn, p, h):
    """Central differences of fn along geodesics exp_p(+-h e_i)."""
    p, single = _as_batch(p)
    F = M.frame(p)
    comps = []
    for i in range(M.dim):
        e = F[:, i, :]
        comps.append((_values(fn, M.exp(p, h * e)) - _values(fn, M.exp(p, -h * e))) / (2 * h))
    c = np.stack(comps, axis=-1)
    g = np.einsum("ni,nij->nj", c, F)
    return g[0] if single else g


def fd_hessian_fn(M: Manifold, fn, p, h) -> SymBilinearForm:
    """Geodesic second differences; off-diagonal entries by polarisation."""
    p, single = _as_batch(p)
    F = M.frame(p)
    f0 = _values(fn, p)

    def Q(v):
        return (_values(fn, M.exp(p, h * v)) - 2 * f0 + _values(fn, M.exp(p, -h * v))) / h**2

    d = M.dim
    H = np.zeros((len(p), d, d))
    for i in range(d):
        H[:, i, i] = Q(F[:, i, :])
        for j in range(i):
            val = 0.25 * (Q(F[:, i, :] + F[:, j, :]) - Q(F[:, i, :] - F[:, j, :]))
            H[:, i, j] = H[:, j, i] = val
    form = SymBilinearForm(F, H)
    return SymBilinearForm(F[0], H[0]) if single else form


def fd_gradient(f: ScalarField, p, h):
    return fd_gradient_fn(f.manifold, lambda q: f.jet(q).value, p, h)


def fd_hessian(f: ScalarField, p, h) -> SymBilinearForm:
    return fd_hessian_fn(f.manifold, lambda q: f.jet(q).value, p, h)


# -- certified global quantities ---------------------------------------------


class GradientBound(NamedTuple):
    bound: float
    grid_max: float
    hess_opnorm_max: float
    spacing: float


def grid_jet(f: ScalarField, points, chunk=8192) -> Jet:
    parts = [f.jet(points[i : i + chunk]) for i in range(0, len(points), chunk)]
    return Jet(*(np.concatenate(x, axis=0) for x in zip(*parts)))


def gradient_bound(f: ScalarField, grid: SampleGrid, jet: Jet | None = None) -> GradientBound:
    """Grid max of |grad f| inflated by spacing * grid max of |hess f|_op."""
    j = grid_jet(f, grid.points) if jet is None else jet
    gmax = float(np.max(np.linalg.norm(j.grad, axis=-1))) if len(j.grad) else 0.0
    frames = f.manifold.frame(grid.points)
    mats = frames @ j.hess @ np.swapaxes(frames, -1, -2)
    hmax = float(np.max(np.abs(np.linalg.eigvalsh(mats)))) if len(mats) else 0.0
    return GradientBound(gmax + grid.spacing * hmax, gmax, hmax, grid.spacing)


def sup_gradient_norm(f: ScalarField, grid: SampleGrid) -> float:
    return gradient_bound(f, grid).bound


def oscillation(f: ScalarField, grid: SampleGrid) -> float:
    """Certified upper bound on sup f - inf f: grid oscillation + 2 * spacing * sup|grad f|."""
    j = grid_jet(f, grid.points)
    g = gradient_bound(f, grid, j).bound
    return float(np.max(j.value) - np.min(j.value)) + 2.0 * grid.spacing * g
