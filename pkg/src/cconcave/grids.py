"""Deterministic sample grids used to discretise suprema over M."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.transform import Rotation

from .manifold import Euclidean, FlatTorus, Manifold, Sphere

GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))


@dataclass(frozen=True, eq=False)
class SampleGrid:
    """Points on a manifold with a covering radius ``spacing`` (max gap to a sample)."""

    manifold: Manifold
    points: np.ndarray
    spacing: float
    seed: int | None = None

    def __len__(self):
        return len(self.points)


def fibonacci_sphere(n, radius=1.0, seed=None):
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    rho = np.sqrt(1.0 - z**2)
    phi = GOLDEN_ANGLE * np.arange(n)
    pts = np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=-1)
    if seed is not None:
        pts = Rotation.random(random_state=seed).apply(pts)
    return radius * pts


def _sphere_covering_radius(points, radius, seed):
    # probe with a denser, differently rotated lattice; 5% safety on top
    probes = fibonacci_sphere(8 * len(points), 1.0, seed=(0 if seed is None else seed) + 7919)
    tree = cKDTree(points / radius)
    chord, _ = tree.query(probes)
    chord = min(float(np.max(chord)), 2.0)
    return 1.05 * radius * 2.0 * math.asin(chord / 2.0)


def sphere_grid(M: Sphere, n=4096, seed=None) -> SampleGrid:
    pts = fibonacci_sphere(n, M.radius, seed)
    return SampleGrid(M, pts, _sphere_covering_radius(pts, M.radius, seed), seed)


def torus_grid(M: FlatTorus, n=4096, seed=None) -> SampleGrid:
    m = max(1, int(round(math.sqrt(n))))
    step = M.period / m
    offset = np.zeros(2) if seed is None else np.random.default_rng(seed).random(2) * step
    ax = np.arange(m) * step
    xx, yy = np.meshgrid(ax, ax, indexing="ij")
    pts = M.project(np.stack([xx.ravel(), yy.ravel()], axis=-1) + offset)
    return SampleGrid(M, pts, step * math.sqrt(2.0) / 2.0, seed)


def box_grid(M: Euclidean, n=4096, seed=None) -> SampleGrid:
    m = max(2, int(round(n ** (1.0 / M.dim))))
    lo, hi = np.array(M.lower), np.array(M.upper)
    axes = [np.linspace(lo[k], hi[k], m) for k in range(M.dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([a.ravel() for a in mesh], axis=-1)
    cell = (hi - lo) / (m - 1)
    return SampleGrid(M, pts, 0.5 * float(np.linalg.norm(cell)), seed)


def default_grid(M: Manifold, n=4096, seed=None) -> SampleGrid:
    if isinstance(M, Sphere):
        return sphere_grid(M, n, seed)
    if isinstance(M, FlatTorus):
        return torus_grid(M, n, seed)
    return box_grid(M, n, seed)


def geodesic_disk(M: Manifold, center, radius, n_rings=12, n_angles=24, frame_axes=None):
    """Polar lattice of points exp_c(u) with |u| <= radius (center included)."""
    center = np.asarray(center, dtype=float)
    axes = M.frame(center) if frame_axes is None else frame_axes
    rs = radius * np.arange(1, n_rings + 1) / n_rings
    ang = 2.0 * math.pi * np.arange(n_angles) / n_angles
    rr, aa = np.meshgrid(rs, ang, indexing="ij")
    coeffs = np.stack([rr.ravel() * np.cos(aa.ravel()), rr.ravel() * np.sin(aa.ravel())], axis=-1)
    if M.dim > 2:
        coeffs = np.concatenate([coeffs, np.zeros((len(coeffs), M.dim - 2))], axis=-1)
    v = coeffs @ axes
    pts = M.exp(np.broadcast_to(center, v.shape), v)
    return np.concatenate([center[None, :], pts], axis=0)


def estimate_covering_radius(grid: SampleGrid, n_probes=1000, seed=0):
    """Largest probe-to-grid distance over random probes (lower bound on the true radius)."""
    rng = np.random.default_rng(seed)
    M = grid.manifold
    probes = M.random_points(rng, n_probes)
    best = np.full(n_probes, np.inf)
    for chunk in np.array_split(np.arange(len(grid.points)), max(1, len(grid.points) // 1024)):
        d = M.dist(probes[:, None, :], grid.points[None, chunk, :])
        best = np.minimum(best, d.min(axis=1))
    return float(best.max())
