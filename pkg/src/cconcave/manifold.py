"""Closed-form Riemannian geometry on the three model manifolds.

Points and tangent vectors are plain numpy arrays whose last axis holds
ambient coordinates; every routine broadcasts over leading axes. Sphere
points live in R^3 (radius-normalised), torus points in [0, L)^2 and
Euclidean points in R^dim. Tangent vectors are ambient vectors (tangential
to the sphere at their base point).

Bilinear forms on tangent spaces are returned as :class:`SymBilinearForm`,
i.e. a symmetric matrix expressed in an orthonormal frame at the base point.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import ClassVar, NamedTuple, Union

import numpy as np

from .errors import CutLocusError, DegenerateError, InvalidArgument

CUT_TOL = 1e-9


class Constants(NamedTuple):
    K: float
    inj: float
    diam: float


def _norm(v):
    return np.sqrt(np.sum(np.asarray(v) ** 2, axis=-1))


def _dot(a, b):
    return np.sum(a * b, axis=-1)


class _Base:
    kind: ClassVar[str]
    dim: ClassVar[int]
    ambient_dim: ClassVar[int]

    def constants(self) -> Constants:
        return Constants(self.K, self.inj, self.diam)

    def log(self, p, q, check=True, tol=CUT_TOL):
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        if check:
            d = self.dist(p, q)
            if np.any(d >= self.inj - tol):
                raise CutLocusError(
                    f"distance {float(np.max(d)):.6g} reaches the injectivity radius {self.inj:.6g}"
                )
        return self._log(p, q)

    def projector(self, p):
        """Orthogonal projector onto T_p M, i.e. the metric g as an ambient matrix."""
        p = np.asarray(p, dtype=float)
        eye = np.eye(self.ambient_dim)
        return np.broadcast_to(eye, p.shape[:-1] + eye.shape).copy()

    def proj(self, p, v):
        return np.asarray(v, dtype=float)

    def frame(self, p):
        """Orthonormal frame at p, shape (..., dim, ambient_dim)."""
        p = np.asarray(p, dtype=float)
        eye = np.eye(self.dim)
        return np.broadcast_to(eye, p.shape[:-1] + eye.shape).copy()

    def rkappa(self, r):
        """r times the tangential coefficient of the Hessian of r (1 when flat)."""
        return np.ones_like(np.asarray(r, dtype=float))

    def rkappa_defect(self, r):
        """(1 - rkappa(r)) / r^2 with its finite r -> 0 limit (0 when flat)."""
        return np.zeros_like(np.asarray(r, dtype=float))

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Sphere(_Base):
    """Round 2-sphere of the given radius embedded in R^3."""

    radius: float = 1.0

    kind: ClassVar[str] = "sphere"
    dim: ClassVar[int] = 2
    ambient_dim: ClassVar[int] = 3

    def __post_init__(self):
        if not self.radius > 0:
            raise InvalidArgument(f"sphere radius must be positive, got {self.radius}")

    @property
    def K(self):
        return 1.0 / self.radius**2

    @property
    def inj(self):
        return math.pi * self.radius

    @property
    def diam(self):
        return math.pi * self.radius

    def project(self, p):
        p = np.asarray(p, dtype=float)
        return p * (self.radius / _norm(p)[..., None])

    def is_valid(self, p, rtol=1e-12):
        return np.all(np.abs(_norm(p) - self.radius) <= rtol * self.radius)

    def proj(self, p, v):
        p = np.asarray(p, dtype=float)
        v = np.asarray(v, dtype=float)
        return v - (_dot(v, p) / self.radius**2)[..., None] * p

    def projector(self, p):
        p = np.asarray(p, dtype=float)
        ph = p / self.radius
        return np.eye(3) - ph[..., :, None] * ph[..., None, :]

    def dist(self, p, q):
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        # atan2 form keeps full relative accuracy near 0 and near the antipode
        s = _norm(np.cross(p, q))
        c = _dot(p, q)
        return self.radius * np.arctan2(s, c)

    def exp(self, p, v):
        p = np.asarray(p, dtype=float)
        v = self.proj(p, v)
        nv = _norm(v)
        t = nv / self.radius
        safe = np.where(t > 0, t, 1.0)
        sinc = np.where(t > 1e-8, np.sin(t) / safe, 1.0 - t**2 / 6.0)
        out = np.cos(t)[..., None] * p + sinc[..., None] * v
        return self.project(out)

    def _log(self, p, q):
        u = q - (_dot(p, q) / self.radius**2)[..., None] * p
        nu = _norm(u)
        d = self.dist(p, q)
        scale = np.where(nu > 0, d / np.where(nu > 0, nu, 1.0), 1.0)
        return u * scale[..., None]

    def frame(self, p):
        ph = np.asarray(p, dtype=float) / self.radius
        k = np.argmin(np.abs(ph), axis=-1)
        a = np.eye(3)[k]
        e1 = a - _dot(a, ph)[..., None] * ph
        e1 = e1 / _norm(e1)[..., None]
        e2 = np.cross(ph, e1)
        return np.stack([e1, e2], axis=-2)

    def rkappa(self, r):
        th = np.asarray(r, dtype=float) / self.radius
        small = th < 1e-4
        ths = np.where(small, 1.0, th)
        return np.where(small, 1.0 - th**2 / 3.0 - th**4 / 45.0, ths * np.cos(ths) / np.sin(ths))

    def rkappa_defect(self, r):
        th = np.asarray(r, dtype=float) / self.radius
        small = th < 1e-3
        ths = np.where(small, 1.0, th)
        full = (1.0 - ths * np.cos(ths) / np.sin(ths)) / ths**2
        series = 1.0 / 3.0 + th**2 / 45.0 + 2.0 * th**4 / 945.0
        return np.where(small, series, full) / self.radius**2

    def random_points(self, rng, n):
        x = rng.standard_normal((n, 3))
        return self.project(x)

    def random_tangent(self, rng, p, max_norm):
        """Tangent vectors at p with norm distributed area-uniformly in [0, max_norm)."""
        p = np.asarray(p, dtype=float)
        v = self.proj(p, rng.standard_normal(p.shape))
        rad = max_norm * np.sqrt(rng.random(p.shape[:-1]))
        return v * (rad / _norm(v))[..., None]

    def to_dict(self):
        return {"kind": self.kind, "radius": self.radius}


class _Flat(_Base):
    K = 0.0

    def _delta(self, p, q):
        return q - p

    def dist(self, p, q):
        return _norm(self._delta(np.asarray(p, dtype=float), np.asarray(q, dtype=float)))

    def _log(self, p, q):
        return self._delta(p, q)

    def random_tangent(self, rng, p, max_norm):
        p = np.asarray(p, dtype=float)
        v = rng.standard_normal(p.shape)
        rad = max_norm * rng.random(p.shape[:-1]) ** (1.0 / self.dim)
        return v * (rad / _norm(v))[..., None]


@dataclass(frozen=True)
class FlatTorus(_Flat):
    """Flat 2-torus R^2 / (L Z)^2 with coordinates reduced to [0, L)."""

    period: float = 1.0

    kind: ClassVar[str] = "torus"
    dim: ClassVar[int] = 2
    ambient_dim: ClassVar[int] = 2

    def __post_init__(self):
        if not self.period > 0:
            raise InvalidArgument(f"torus period must be positive, got {self.period}")

    @property
    def inj(self):
        return self.period / 2.0

    @property
    def diam(self):
        return self.period * math.sqrt(2.0) / 2.0

    def project(self, p):
        return np.mod(np.asarray(p, dtype=float), self.period)

    def is_valid(self, p, rtol=0.0):
        p = np.asarray(p)
        return np.all((p >= 0) & (p < self.period))

    def _delta(self, p, q):
        d = q - p
        return d - self.period * np.round(d / self.period)

    def minimizing_shift_gap(self, p, q):
        """Gap between the best and second-best lattice shift lengths.

        Zero gap marks the cut locus, where the minimising geodesic is not unique.
        """
        d = self._delta(np.asarray(p, dtype=float), np.asarray(q, dtype=float))
        L = self.period
        best = _norm(d)
        # second best flips the sign of the coordinate closest to L/2
        alt = np.where(np.abs(d) > 0, d - np.sign(d) * L, L)
        alts = []
        for i in range(self.dim):
            di = d.copy()
            di[..., i] = alt[..., i]
            alts.append(_norm(di))
        return np.min(np.stack(alts, axis=-1), axis=-1) - best

    def log(self, p, q, check=True, tol=CUT_TOL):
        if check:
            gap = self.minimizing_shift_gap(p, q)
            if np.any(gap <= tol):
                raise CutLocusError("torus points on the cut locus (non-unique minimising shift)")
        return super().log(p, q, check=check, tol=tol)

    def exp(self, p, v):
        return self.project(np.asarray(p, dtype=float) + np.asarray(v, dtype=float))

    def random_points(self, rng, n):
        return rng.random((n, 2)) * self.period

    def to_dict(self):
        return {"kind": self.kind, "period": self.period}


@dataclass(frozen=True)
class Euclidean(_Flat):
    """Flat R^dim; the bounding box only fixes diam and the sampling region."""

    dim: int = 2
    lower: tuple = field(default=None)
    upper: tuple = field(default=None)

    kind: ClassVar[str] = "euclidean"

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise InvalidArgument(f"Euclidean dim must be 2 or 3, got {self.dim}")
        lo = (-1.0,) * self.dim if self.lower is None else tuple(float(x) for x in self.lower)
        hi = (1.0,) * self.dim if self.upper is None else tuple(float(x) for x in self.upper)
        if len(lo) != self.dim or len(hi) != self.dim or any(a >= b for a, b in zip(lo, hi)):
            raise InvalidArgument("bounding box must satisfy lower < upper in every coordinate")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def ambient_dim(self):
        return self.dim

    @property
    def inj(self):
        return math.inf

    @property
    def diam(self):
        return float(np.linalg.norm(np.subtract(self.upper, self.lower)))

    def project(self, p):
        return np.asarray(p, dtype=float)

    def is_valid(self, p, rtol=0.0):
        return bool(np.all(np.isfinite(p)))

    def exp(self, p, v):
        return np.asarray(p, dtype=float) + np.asarray(v, dtype=float)

    def random_points(self, rng, n):
        lo, hi = np.array(self.lower), np.array(self.upper)
        return lo + rng.random((n, self.dim)) * (hi - lo)

    def to_dict(self):
        return {"kind": self.kind, "dim": self.dim, "lower": list(self.lower), "upper": list(self.upper)}


Manifold = Union[Sphere, FlatTorus, Euclidean]


def manifold_from_dict(d: dict) -> Manifold:
    kind = d.get("kind")
    if kind == "sphere":
        return Sphere(float(d.get("radius", 1.0)))
    if kind == "torus":
        return FlatTorus(float(d.get("period", 1.0)))
    if kind == "euclidean":
        return Euclidean(int(d.get("dim", 2)), d.get("lower"), d.get("upper"))
    raise InvalidArgument(f"unknown manifold kind {kind!r}")


@dataclass(frozen=True, eq=False)
class SymBilinearForm:
    """Symmetric bilinear form on T_p M written in an orthonormal frame.

    ``frame`` has shape (..., d, D) and ``matrix`` (..., d, d); both may carry
    leading batch axes. ``A <= B`` is the Loewner order (B - A is PSD).
    """

    frame: np.ndarray
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "matrix", 0.5 * (m + np.swapaxes(m, -1, -2)))
        object.__setattr__(self, "frame", np.asarray(self.frame, dtype=float))

    @classmethod
    def from_ambient(cls, frame, H):
        frame = np.asarray(frame, dtype=float)
        return cls(frame, frame @ H @ np.swapaxes(frame, -1, -2))

    def ambient(self):
        return np.swapaxes(self.frame, -1, -2) @ self.matrix @ self.frame

    def __call__(self, u, v):
        """Evaluate the form on ambient tangent vectors."""
        cu = np.einsum("...ij,...j->...i", self.frame, u)
        cv = np.einsum("...ij,...j->...i", self.frame, v)
        return np.einsum("...i,...ij,...j->...", cu, self.matrix, cv)

    def eigvalsh(self):
        return np.linalg.eigvalsh(self.matrix)

    def min_eigenvalue(self):
        return self.eigvalsh()[..., 0]

    def max_eigenvalue(self):
        return self.eigvalsh()[..., -1]

    def _other(self, other):
        return other.matrix if isinstance(other, SymBilinearForm) else other

    def __add__(self, other):
        return SymBilinearForm(self.frame, self.matrix + self._other(other))

    def __sub__(self, other):
        return SymBilinearForm(self.frame, self.matrix - self._other(other))

    def __neg__(self):
        return SymBilinearForm(self.frame, -self.matrix)

    def __mul__(self, c):
        return SymBilinearForm(self.frame, self.matrix * np.asarray(c, dtype=float)[..., None, None])

    __rmul__ = __mul__

    def le(self, other, tol=0.0):
        """True where self <= other in the Loewner order, up to tol."""
        return np.linalg.eigvalsh(self._other(other) - self.matrix)[..., 0] >= -tol


# -- module-level operations ------------------------------------------------


def distance(M: Manifold, p, q):
    return M.dist(p, q)


def exp_map(M: Manifold, p, v):
    return M.exp(p, v)


def log_map(M: Manifold, p, q, tol=CUT_TOL):
    return M.log(p, q, check=True, tol=tol)


def _radial(M, center, y, tol):
    center = np.asarray(center, dtype=float)
    y = np.asarray(y, dtype=float)
    w = -M.log(y, center, check=True, tol=tol)
    r = _norm(w)
    return w, r


def distance_gradient(M: Manifold, center, y, tol=CUT_TOL):
    """Gradient of r = d(center, .) at y: the unit vector pointing away from center."""
    w, r = _radial(M, center, y, tol)
    if np.any(r <= 1e-14):
        raise DegenerateError("gradient of the distance is undefined at its center")
    return w / r[..., None]


def half_r2_hessian_ambient(M: Manifold, w, r, y):
    """Ambient Hessian of 1/2 d^2(c, .) at y given w = grad(1/2 r^2) = -log_y(c)."""
    P = M.projector(y)
    rk = M.rkappa(r)
    defect = M.rkappa_defect(r)
    return rk[..., None, None] * P + defect[..., None, None] * (w[..., :, None] * w[..., None, :])


def hessian_r(M: Manifold, center, y, tol=CUT_TOL) -> SymBilinearForm:
    """Hessian of r = d(center, .) at y, valid for 0 < r < inj."""
    w, r = _radial(M, center, y, tol)
    if np.any(r <= 1e-14):
        raise DegenerateError("Hessian of the distance is undefined at its center")
    n = w / r[..., None]
    kappa = M.rkappa(r) / r
    H = kappa[..., None, None] * (M.projector(y) - n[..., :, None] * n[..., None, :])
    return SymBilinearForm.from_ambient(M.frame(y), H)


def hessian_half_r2(M: Manifold, center, y, tol=CUT_TOL) -> SymBilinearForm:
    """Hessian of 1/2 d^2(center, .) at y; equals g exactly at y = center."""
    w, r = _radial(M, center, y, tol)
    return SymBilinearForm.from_ambient(M.frame(y), half_r2_hessian_ambient(M, w, r, y))


def metric_form(M: Manifold, p) -> SymBilinearForm:
    frame = M.frame(p)
    d = frame.shape[-2]
    eye = np.broadcast_to(np.eye(d), frame.shape[:-2] + (d, d))
    return SymBilinearForm(frame, eye)


def tensor_square(M: Manifold, p, v) -> SymBilinearForm:
    """The form v (x) v (i.e. dr (x) dr when v = grad r)."""
    frame = M.frame(p)
    c = np.einsum("...ij,...j->...i", frame, np.asarray(v, dtype=float))
    return SymBilinearForm(frame, c[..., :, None] * c[..., None, :])
