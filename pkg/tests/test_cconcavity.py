import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cconcave.cconcavity import (
    CERTIFIED,
    FAILED_DELTA,
    FAILED_HESSIAN,
    admissible_gradient_bound,
    certify_main,
    certify_technical,
    check_three_claims,
    delta_from_gradient,
    delta_of,
    empirical_cconcavity,
)
from cconcave.errors import InvalidArgument
from cconcave.fields import Constant, DistSqPotential, RampProfile, sup_gradient_norm
from cconcave.grids import SampleGrid, default_grid
from cconcave.manifold import Euclidean, FlatTorus, Sphere

from conftest import N

S2 = Sphere(1.0)
C_STAR_UNIT = 0.15531565588582197  # positive root of t^2 + 2 pi t - 1


def potential(lam, center=N, t0=0.15, t1=0.3, M=S2):
    return lam * DistSqPotential(M, center, RampProfile(t0, t1))


@pytest.fixture(scope="module")
def grid():
    return default_grid(S2, 4096, seed=1)


@pytest.fixture(scope="module")
def small_grid():
    return default_grid(S2, 1024, seed=2)


class TestDelta:
    def test_zero_gradient(self, grid):
        assert delta_of(Constant(S2, 2.0), grid) == 0.0

    def test_formula(self):
        assert delta_from_gradient(math.pi, 0.1) == pytest.approx(0.7989483905221655, abs=1e-15)
        assert delta_from_gradient(math.pi, 0.1) == pytest.approx(math.sqrt(0.2 * math.pi + 0.01), abs=1e-15)

    @given(st.floats(0, 10), st.floats(1e-3, 10))
    def test_identity(self, G, diam):
        d = delta_from_gradient(diam, G)
        assert d**2 - G**2 == pytest.approx(2 * diam * G, rel=1e-12, abs=1e-15)

    def test_monotone_in_gradient(self, small_grid):
        deltas = [delta_of(potential(lam), small_grid) for lam in (0.01, 0.05, 0.2, 1.0)]
        assert deltas == sorted(deltas)


class TestAdmissibleBound:
    def test_unit_sphere(self):
        c_star, eps_bound = admissible_gradient_bound(1.0, math.pi, math.pi, 0.3)
        assert c_star == pytest.approx(C_STAR_UNIT, abs=1e-12)
        assert c_star**2 + 2 * math.pi * c_star - 1 == pytest.approx(0.0, abs=1e-15)
        assert eps_bound == pytest.approx(0.3 / (3 * math.pi))

    def test_flat(self):
        c_star, eps_bound = admissible_gradient_bound(0.0, 0.5, math.sqrt(2) / 2, 0.3)
        assert eps_bound == math.inf
        assert c_star == pytest.approx(-math.sqrt(2) / 2 + math.sqrt(0.5 + 0.0625), abs=1e-15)

    @pytest.mark.parametrize("inj,diam", [(0.0, 1.0), (1.0, 0.0), (-1.0, 1.0)])
    def test_rejects_non_positive(self, inj, diam):
        with pytest.raises(InvalidArgument):
            admissible_gradient_bound(1.0, inj, diam, 0.5)

    def test_random_parameters_are_admissible(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            K = float(rng.choice([0.0, rng.uniform(0.01, 10)]))
            inj = rng.uniform(0.1, 5)
            diam = rng.uniform(inj, 3 * inj)
            eps = rng.uniform(1e-3, 0.999)
            c_star, eps_bound = admissible_gradient_bound(K, inj, diam, eps)
            G = min(c_star, eps_bound) * rng.uniform(0, 1)
            d = delta_from_gradient(diam, G)
            budget = min(inj / 2, 1 / math.sqrt(K) if K else math.inf)
            assert d <= budget * (1 + 1e-12)
            if G <= diam:
                assert K * d**2 <= eps * (1 + 1e-12)


class TestCertifyTechnical:
    def test_constant(self, grid):
        c = certify_technical(Constant(S2, 1.0), grid)
        assert c.verdict == CERTIFIED and c.delta == 0.0 and c.hess_margin == pytest.approx(1.0)

    def test_small_potential(self, grid):
        c = certify_technical(potential(0.05), grid)
        assert c.verdict == CERTIFIED
        assert c.delta <= c.delta_budget and c.hess_margin >= 0

    def test_large_potential(self, grid):
        c = certify_technical(potential(1.0), grid)
        assert c.verdict == FAILED_DELTA and c.delta > 1.0

    def test_hessian_failure_is_identified(self):
        E = Euclidean(2)
        f = -0.5 * DistSqPotential(E, np.zeros(2), RampProfile(10.0, 20.0))
        c = certify_technical(f + 3.0 * DistSqPotential(E, np.zeros(2), RampProfile(10.0, 20.0)), default_grid(E, 256))
        assert c.verdict == FAILED_HESSIAN and c.hess_margin == pytest.approx(-1.5)

    def test_scaling_keeps_certificate(self, grid):
        f = potential(0.08)
        assert certify_technical(f, grid).certified
        for lam in (0.5, 0.1):
            assert certify_technical(lam * f, grid).certified

    def test_serializes(self, grid):
        c = certify_technical(potential(0.05), grid)
        d = json.loads(json.dumps(c.to_dict()))
        assert d["details"]["grid"]["seed"] == 1 and d["details"]["field"]["manifold"]["kind"] == "sphere"


class TestCertifyMain:
    def test_constant(self, grid):
        assert certify_main(Constant(S2, 0.0), 0.5, grid).verdict == CERTIFIED

    @pytest.mark.parametrize("eps", [0.0, 1.0, 1.5, -0.1])
    def test_epsilon_range(self, grid, eps):
        with pytest.raises(InvalidArgument):
            certify_main(Constant(S2, 0.0), eps, grid)

    def test_hessian_above_threshold(self):
        E = Euclidean(2)
        f = 0.9 * DistSqPotential(E, np.zeros(2), RampProfile(10.0, 20.0))
        c = certify_main(f, 0.2, default_grid(E, 256))
        assert c.verdict == FAILED_HESSIAN
        assert c.hess_margin == pytest.approx(0.8 - 0.9)

    def test_main_implies_technical(self, small_grid):
        rng = np.random.default_rng(3)
        checked = 0
        for _ in range(50):
            eps = rng.uniform(0.05, 0.95)
            center = S2.random_points(rng, 1)[0]
            t1 = rng.uniform(0.05, 0.5)
            base = DistSqPotential(S2, center, RampProfile(t1 / 2, t1))
            G = sup_gradient_norm(base, small_grid)
            c_star, eps_bound = admissible_gradient_bound(S2.K, S2.inj, S2.diam, eps)
            f = rng.uniform(0.1, 1.0) * min(c_star, eps_bound) / G * base
            main = certify_main(f, eps, small_grid)
            if main.certified:
                checked += 1
                assert certify_technical(f, small_grid).certified
        assert checked == 50


class TestEmpirical:
    def test_constant_passes(self, small_grid):
        res = empirical_cconcavity(Constant(S2, 1.0), small_grid, small_grid)
        assert res.passed and res.witness is None
        assert res.max_violation == pytest.approx(0.0, abs=1e-15)

    def test_half_distance_squared(self, grid):
        t0 = 0.45 * math.pi**2
        f = DistSqPotential(S2, N, RampProfile(t0, 0.49 * math.pi**2))
        inside = grid.points[S2.dist(N[None, :], grid.points) < math.sqrt(2 * t0) - 1e-3]
        res = empirical_cconcavity(f, inside, grid)
        assert res.passed and abs(res.max_violation) < 1e-12

    def test_flat_quadratic(self):
        E = Euclidean(2)
        f = DistSqPotential(E, np.array([0.2, -0.1]), RampProfile(10.0, 20.0))
        g = default_grid(E, 1024)
        assert empirical_cconcavity(f, g, g).passed

    def test_certified_fields_pass(self, small_grid):
        rng = np.random.default_rng(4)
        for _ in range(5):
            f = potential(rng.uniform(0.01, 0.08), center=S2.random_points(rng, 1)[0])
            assert certify_technical(f, small_grid).certified
            assert empirical_cconcavity(f, small_grid, small_grid).passed

    def test_torus_certified_field_passes(self):
        T = FlatTorus(1.0)
        g = default_grid(T, 1024, seed=0)
        f = potential(0.02, np.array([0.5, 0.5]), 0.02, 0.04, T)
        assert certify_technical(f, g).certified
        assert empirical_cconcavity(f, g, g).passed

    def test_concave_bump_fails_with_valid_witness(self, small_grid):
        # -lambda * d^2/2 pushes x* away from the bump and breaks the argmin condition
        f = potential(-0.9, t0=0.4, t1=0.8)
        res = empirical_cconcavity(f, small_grid, small_grid)
        assert not res.passed
        w = res.witness
        assert w.violation > res.tol
        assert w.recompute(f) == pytest.approx(w.violation, rel=1e-9, abs=1e-14)

    def test_worker_count_does_not_change_result(self, small_grid):
        f = potential(-0.9, t0=0.4, t1=0.8)
        a = empirical_cconcavity(f, small_grid, small_grid, workers=1).to_dict()
        b = empirical_cconcavity(f, small_grid, small_grid, workers=3).to_dict()
        assert a == b

    def test_accepts_arrays(self, small_grid):
        res = empirical_cconcavity(Constant(S2, 0.0), small_grid.points[:10], small_grid.points)
        assert res.n_x == 10 and res.necessity_regime is None


class TestThreeClaims:
    def test_constant(self, small_grid):
        rep = check_three_claims(Constant(S2, 0.0), N, small_grid)
        assert rep["passed"] and rep["claims"]["claim2"]["gradient_mismatch"] == 0.0

    def test_certified_potential(self, grid):
        f = potential(0.05)
        assert certify_technical(f, grid).certified
        xs = S2.random_points(np.random.default_rng(5), 20)
        for x in xs:
            rep = check_three_claims(f, x, grid)
            assert rep["passed"], rep["claims"]
            assert rep["claims"]["claim1"]["chain_lower_bound"] == pytest.approx(0.0, abs=1e-14)

    def test_flat_torus(self):
        T = FlatTorus(1.0)
        g = default_grid(T, 1024, seed=0)
        f = potential(0.02, np.array([0.5, 0.5]), 0.02, 0.04, T)
        assert check_three_claims(f, np.array([0.45, 0.6]), g)["passed"]
