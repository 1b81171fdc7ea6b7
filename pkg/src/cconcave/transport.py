"""Discrete optimal transport checks for McCann maps T = exp(-grad f)."""
from __future__ import annotations

import csv
import io
import itertools
import json
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .cconcavity import certify_technical
from .errors import CutLocusError, InvalidArgument, SizeLimit, SizeMismatch
from .fields import ScalarField, grid_jet
from .manifold import Manifold, manifold_from_dict

MAX_POINTS = 512


@dataclass
class PointCloud:
    manifold: Manifold
    points: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        n = len(self.points)
        if n > MAX_POINTS:
            raise SizeLimit(f"point clouds are limited to {MAX_POINTS} points")
        if self.weights is None:
            self.weights = np.full(n, 1.0 / n) if n else np.zeros(0)
        self.weights = np.asarray(self.weights, dtype=float)
        if len(self.weights) != n:
            raise SizeMismatch("one weight per point is required")
        if n and abs(self.weights.sum() - 1.0) > 1e-12:
            raise InvalidArgument("weights must sum to 1")

    def __len__(self):
        return len(self.points)

    @classmethod
    def random(cls, manifold, n, seed=0):
        return cls(manifold, manifold.random_points(np.random.default_rng(seed), n))


@dataclass
class Assignment:
    sigma: np.ndarray
    cost: float

    def to_dict(self):
        return {"sigma": [int(s) for s in self.sigma], "cost": self.cost}


def mccann_map(f: ScalarField, cloud: PointCloud) -> PointCloud:
    M = f.manifold
    g = grid_jet(f, cloud.points).grad
    if np.any(np.linalg.norm(g, axis=-1) >= M.inj):
        raise CutLocusError("a gradient reaches the injectivity radius")
    return PointCloud(M, M.exp(cloud.points, -g), cloud.weights.copy())


def cost_matrix(sources: PointCloud, targets: PointCloud) -> np.ndarray:
    if len(sources) != len(targets):
        raise SizeMismatch(f"{len(sources)} sources vs {len(targets)} targets")
    M = sources.manifold
    return 0.5 * M.dist(sources.points[:, None, :], targets.points[None, :, :]) ** 2


def assignment_cost(C, sigma) -> float:
    C = np.asarray(C)
    return float(np.sum(C[np.arange(len(C)), np.asarray(sigma)]))


def _check_square(C):
    C = np.asarray(C, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise SizeMismatch("cost matrix must be square")
    if len(C) > MAX_POINTS:
        raise SizeLimit(f"assignment limited to n <= {MAX_POINTS}")
    return C


def optimal_assignment(C) -> Assignment:
    """Exact minimum-cost permutation (Jonker-Volgenant via scipy)."""
    C = _check_square(C)
    rows, cols = linear_sum_assignment(C)
    sigma = np.empty(len(C), dtype=int)
    sigma[rows] = cols
    return Assignment(sigma, assignment_cost(C, sigma))


def brute_force_assignment(C) -> Assignment:
    """Enumerate S_n; lexicographically smallest minimiser. Reference oracle for n <= 8."""
    C = _check_square(C)
    n = len(C)
    if n > 8:
        raise SizeLimit("brute force is limited to n <= 8")
    if n == 0:
        return Assignment(np.zeros(0, dtype=int), 0.0)
    perms = np.array(list(itertools.permutations(range(n))), dtype=int).reshape(-1, n)
    costs = C[np.arange(n), perms].sum(axis=1)
    # permutations() yields lexicographic order and argmin returns the first minimiser
    k = int(np.argmin(costs))
    best, best_cost = perms[k], float(costs[k])
    return Assignment(np.array(best, dtype=int), best_cost)


@dataclass
class MonotonicityReport:
    min_slack: float
    worst_subset: list
    worst_sigma: list
    trials: int
    tol: float
    passed: bool

    def to_dict(self):
        return dict(self.__dict__)


def check_cyclical_monotonicity(sources: PointCloud, targets: PointCloud, trials=1000, seed=0,
                                max_subset=6, tol=1e-9, large_trials=None):
    """Sample subsets (size <= max_subset, all permutations) plus random full permutations.

    slack = sum c(x_i, T_sigma(i)) - sum c(x_i, T_i), which must be >= -tol.
    """
    C = cost_matrix(sources, targets)
    n = len(C)
    rng = np.random.default_rng(seed)
    best = (np.inf, [], [])
    perms = {k: np.array(list(itertools.permutations(range(k)))) for k in range(2, min(max_subset, n) + 1)}
    # the identity permutation (first in lexicographic order) is skipped: its slack is 0
    for _ in range(trials if n > 1 else 0):
        k = int(rng.integers(2, min(max_subset, n) + 1))
        sub = np.sort(rng.choice(n, size=k, replace=False))
        Cs = C[np.ix_(sub, sub)]
        P = perms[k][1:]
        slack = Cs[np.arange(k), P].sum(axis=1) - np.trace(Cs)
        j = int(np.argmin(slack))
        if slack[j] < best[0]:
            best = (float(slack[j]), sub.tolist(), sub[P[j]].tolist())
    for _ in range(trials if large_trials is None else large_trials):
        if n < 2:
            break
        sigma = rng.permutation(n)
        slack = assignment_cost(C, sigma) - float(np.trace(C))
        if slack < best[0]:
            best = (slack, list(range(n)), sigma.tolist())
    if not np.isfinite(best[0]):
        best = (0.0, [], [])
    return MonotonicityReport(best[0], best[1], best[2], trials, tol, best[0] >= -tol)


def verify_optimality(f: ScalarField, cloud: PointCloud, grid=None, tol=1e-9, require_certified=True):
    """Compare the cost of x_i -> T(x_i) with the optimal assignment onto {T(x_i)}."""
    cert = None
    if require_certified:
        if grid is None:
            raise InvalidArgument("a grid is required to certify the field")
        cert = certify_technical(f, grid)
        if not cert.certified:
            raise InvalidArgument(f"field is not certified ({cert.verdict}); pass require_certified=False to override")
    T = mccann_map(f, cloud)
    C = cost_matrix(cloud, T)
    paired = float(np.trace(C))
    opt = optimal_assignment(C)
    return {
        "n": len(cloud),
        "paired_cost": paired,
        "optimal_cost": opt.cost,
        "gap": paired - opt.cost,
        "tol": tol,
        "certificate": cert.verdict if cert else None,
        "passed": paired <= opt.cost + tol,
    }


def write_cloud_csv(cloud: PointCloud, path=None):
    buf = io.StringIO()
    buf.write("# manifold: " + json.dumps(cloud.manifold.to_dict(), sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    for p, wt in zip(cloud.points, cloud.weights):
        w.writerow([repr(float(v)) for v in p] + [repr(float(wt))])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def read_cloud_csv(source) -> PointCloud:
    """Read a cloud written by ``write_cloud_csv`` (path or text); the last column is the weight."""
    text = source if "\n" in str(source) else open(source).read()
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# manifold:"):
        raise InvalidArgument("missing '# manifold:' header")
    M = manifold_from_dict(json.loads(lines[0].split(":", 1)[1]))
    rows = np.array([[float(v) for v in r] for r in csv.reader(lines[1:]) if r], dtype=float)
    return PointCloud(M, M.project(rows[:, :-1]), rows[:, -1])
