import math

import numpy as np
import pytest

from cconvex.counterexample import (CounterexampleParams, find_violation,
                                    locate_level_crossing, refine_violation)
from cconvex.errors import NoViolationFound, RefinementFailed
from cconvex.mtw import check_loeper


@pytest.fixture(scope="module")
def power_violation(power):
    raw = find_violation(power, budget=500, seed=0)
    sv = refine_violation(power, raw, seed=0, prominence=0.25)
    return raw, sv


class TestLevelCrossing:
    def test_synthetic_hump(self):
        # single hump with known crossings; the locator must bracket it
        def profile(ts):
            ts = np.asarray(ts, dtype=float)
            return np.sin(math.pi * ts) - 0.25

        tau, sigma, level = locate_level_crossing(profile, t0=0.5, level=0.0,
                                                  prominence=0.3)
        assert 0.0 < tau < 0.5 < sigma < 1.0
        # bisection oracle: the exit crossing solves sin(pi t) = level + 0.25
        target = level + 0.25
        oracle = 1.0 - math.asin(target) / math.pi
        assert sigma == pytest.approx(oracle, abs=1e-8)
        assert abs(profile(np.array([sigma]))[0] - level) <= 1e-8
        assert abs(profile(np.array([tau]))[0] - level) <= 1e-12  # the reset level

    def test_no_hump_raises(self):
        def profile(ts):
            return -np.ones_like(np.asarray(ts, dtype=float))

        with pytest.raises(RefinementFailed):
            locate_level_crossing(profile, t0=0.5, level=0.0)

    def test_monotone_profile_never_returns(self):
        def profile(ts):
            return np.asarray(ts, dtype=float) + 0.5

        with pytest.raises(RefinementFailed) as err:
            locate_level_crossing(profile, t0=0.9, level=0.6)
        assert err.value.condition == 1


class TestFindViolation:
    def test_quadratic_raises(self, quadratic):
        with pytest.raises(NoViolationFound):
            find_violation(quadratic, budget=300, seed=0)

    def test_power_margins_strict(self, power, power_violation):
        raw, _ = power_violation
        m0, m1, ms = raw.inequality_margins(power)
        assert min(m0, m1, ms) > 0
        # the two endpoint inequalities and the segment inequality re-evaluate
        # to the same half-gap structure
        assert ms == pytest.approx(min(m0, m1), rel=1e-6)

    def test_interior_points(self, power, power_violation):
        raw, _ = power_violation
        X, Y = power.domain.X, power.domain.Y
        for pt, dom in ((raw.x0, X), (raw.x1, X), (raw.y0, Y), (raw.y1, Y)):
            assert dom.boundary_distance(pt) > 1e-3

    def test_handcrafted_certificate_nudged(self, power):
        # boundary-touching certificate points are pulled inward, then the
        # inequalities are re-verified
        rep = check_loeper(power, sample_budget=600, seed=1)
        cert = rep.certificate
        cert.x0[0] = power.domain.X.lo[0]   # push onto the boundary
        cert.y1[1] = power.domain.Y.hi[1]
        seed = find_violation(power, budget=0, seed=0, certificate=cert)
        X, Y = power.domain.X, power.domain.Y
        for pt, dom in ((seed.x0, X), (seed.x1, X), (seed.y0, Y), (seed.y1, Y)):
            assert dom.boundary_distance(pt) > 1e-3
        assert min(seed.inequality_margins(power)) > 0


class TestRefineViolation:
    def test_condition1_residuals(self, power, power_violation):
        _, sv = power_violation
        assert max(sv.condition1_residuals(power)) <= 1e-8

    def test_condition2_margins(self, power, power_violation):
        _, sv = power_violation
        m = sv.condition2_margins(power)
        assert min(m) > 0

    def test_condition3_cone(self, power, power_violation):
        _, sv = power_violation
        assert math.cos(sv.theta) > 7.0 / 8.0
        assert sv.rho >= 0.5 * float(np.linalg.norm(sv.xi))
        assert sv.condition3_check(power, samples=120, seed=1) >= -1e-9

    def test_points_interior(self, power, power_violation):
        _, sv = power_violation
        for z in (sv.z0, sv.z1):
            assert power.domain.X.boundary_distance(z) > 0

    def test_dual_anchor_consistency(self, power, power_violation):
        _, sv = power_violation
        for z, w in ((sv.z0, sv.w0), (sv.z1, sv.w1)):
            assert np.allclose(-power.grad_y(z, sv.y0), w, atol=1e-7)


class TestBuiltInstance:
    @pytest.fixture(scope="class")
    def built(self, power, power_violation):
        from cconvex.counterexample import build_phi_epsilon, plan_cap, tilt_family
        from cconvex.convexity import CAffine
        _, sv = power_violation
        r = 0.03
        affines = [CAffine(y=sv.y0.copy(), h=0.0), CAffine(y=sv.y1.copy(), h=sv.h1)]
        affines += tilt_family(power, sv, r, 16, seed=0)
        X = power.domain.X
        from cconvex.gridfn import GridFunction
        grid = GridFunction("X", X.lo, X.hi, np.zeros((48, 48)))
        plans = plan_cap(power, sv, affines, grid)
        assert plans, "no feasible cap plan"
        plan = plans[0]
        params = CounterexampleParams(r=r, delta=plan.delta, epsilon=plan.epsilon)
        return build_phi_epsilon(power, sv, params, shape=(48, 48), seed=0), params, sv

    def test_anchor_values(self, power, built):
        phi, params, sv = built
        # phi_epsilon(z0) = -c(z0, y0); near z1 the flat cap sits at +epsilon
        v0 = phi.evaluate(power, sv.z0[None, :])[0]
        assert v0 == pytest.approx(float(-power.cost(sv.z0, sv.y0)), abs=1e-6)
        v1 = phi.evaluate(power, sv.z1[None, :])[0]
        assert v1 == pytest.approx(float(-power.cost(sv.z1, sv.y0)) + params.epsilon,
                                   abs=1e-6)
        assert len(phi.cap_flat) >= 1

    def test_excess_nonnegative_before_capping(self, power, built):
        from cconvex.counterexample import _phi_raw
        phi, params, sv = built
        nodes = phi.grid.nodes()
        excess = (_phi_raw(power, phi.affines, nodes)
                  + power.cost(nodes, np.broadcast_to(sv.y0, nodes.shape)))
        assert float(np.min(excess)) >= -1e-9

    def test_lipschitz_bound(self, power, built):
        from cconvex.convexity import lip_estimate
        phi, _, _ = built
        g = phi.grid
        sp = g.spacing
        lip = lip_estimate(power)
        worst = max(np.max(np.abs(np.diff(g.values, axis=0))) / sp[0],
                    np.max(np.abs(np.diff(g.values, axis=1))) / sp[1])
        assert worst <= lip * 1.1

    def test_monotone_in_epsilon(self, power, built):
        from cconvex.counterexample import build_phi_epsilon
        phi, params, sv = built
        import dataclasses
        smaller = dataclasses.replace(params, epsilon=params.epsilon * 0.5)
        phi_small = build_phi_epsilon(power, sv, smaller, shape=(48, 48), seed=0)
        diff = phi.grid.values - phi_small.grid.values
        assert np.min(diff) >= -1e-12
        assert np.max(diff) > 0

    def test_verification_deterministic(self, power, built):
        from cconvex.counterexample import verify_counterexample
        phi, _, _ = built
        a = verify_counterexample(power, phi, budget=20, seed=5, y_shape=(48, 48))
        b = verify_counterexample(power, phi, budget=20, seed=5, y_shape=(48, 48))
        assert a.alt_worst_gap == b.alt_worst_gap
        assert a.c_convex_gap == b.c_convex_gap
        assert a.verdict == b.verdict


class TestParams:
    def test_validation(self):
        with pytest.raises(ValueError):
            CounterexampleParams(r=0.0, delta=1.0, epsilon=0.1).validate()
        CounterexampleParams(r=0.1, delta=1.0, epsilon=0.1).validate()

    def test_delta_below_rho_enforced(self, power, power_violation):
        from cconvex.counterexample import build_phi_epsilon
        _, sv = power_violation
        bad = CounterexampleParams(r=0.01, delta=sv.rho * 2.0, epsilon=0.01)
        with pytest.raises(ValueError):
            build_phi_epsilon(power, sv, bad, shape=(33, 33))
