import math

import numpy as np
import pytest

from cconvex.costs import make_cost
from cconvex.domains import Box, DomainPair
from cconvex.mtw import (certify_mtw, check_loeper, chord_equivalence_probe,
                         estimate_qqconv, mtw_value)


def independent_contraction(model, x, y, eta, xi, h=2e-3):
    """Second route: contract the raw FD (2,2) tensor and FD third tensors."""
    from cconvex.costs import (fd_mixed_hessian, fd_tensor_xxy, fd_tensor_xyy,
                               fd_tensor_xxyy)
    c_pq = fd_mixed_hessian(model, x, y, h)
    c_ijp = fd_tensor_xxy(model, x, y, h)
    c_qst = fd_tensor_xyy(model, x, y, h)
    c_ijst = fd_tensor_xxyy(model, x, y, h)
    inv = np.linalg.inv(c_pq)
    t = np.einsum("ijp,pq,qst->ijst", c_ijp, inv, c_qst) - c_ijst
    full = np.einsum("ijst,sk,tl->ijkl", t, inv, inv)
    return float(np.einsum("ijkl,i,j,k,l->", full, eta, eta, xi, xi))


class TestMTWValue:
    def test_quadratic_zero(self, quadratic):
        rng = np.random.default_rng(0)
        for _ in range(20):
            x = quadratic.domain.X.sample(rng)
            y = quadratic.domain.Y.sample(rng)
            eta, xi = rng.normal(size=2), rng.normal(size=2)
            assert abs(mtw_value(quadratic, x, y, eta, xi)) <= 1e-12

    def test_bilinear_zero(self, bilinear):
        rng = np.random.default_rng(1)
        x = bilinear.domain.X.sample(rng)
        y = bilinear.domain.Y.sample(rng)
        assert mtw_value(bilinear, x, y, [1.0, 0.0], [0.0, 1.0]) == pytest.approx(0.0)

    def test_power_independent_contraction_oracle(self):
        m = make_cost("power", DomainPair(Box([-1, -1], [1, 1]), Box([0.5, -1], [3, 1]),
                                          separation=0.0), allow_diagonal=True)
        x = np.array([0.0, 0.0])
        y = np.array([2.0, 0.0])
        eta = np.array([0.0, 1.0])
        xi = np.array([1.0, 0.0])
        v = mtw_value(m, x, y, eta, xi)
        v2 = independent_contraction(m, x, y, eta, xi)
        assert abs(v - v2) / abs(v) <= 1e-3

    def test_degree_two_homogeneity(self, power):
        rng = np.random.default_rng(4)
        for _ in range(10):
            x = power.domain.X.sample(rng)
            y = power.domain.Y.sample(rng)
            eta, xi = rng.normal(size=2), rng.normal(size=2)
            a, b = rng.uniform(0.5, 2.0, 2)
            v = mtw_value(power, x, y, eta, xi)
            va = mtw_value(power, x, y, a * eta, b * xi)
            assert va == pytest.approx(a**2 * b**2 * v, rel=1e-8, abs=1e-12)

    def test_zero_direction_rejected(self, quadratic):
        with pytest.raises(ValueError):
            mtw_value(quadratic, [0.0, 0.0], [0.1, 0.1], [0.0, 0.0], [1.0, 0.0])


class TestCertify:
    def test_quadratic_nonneg(self, quadratic):
        rep = certify_mtw(quadratic, sample_budget=300, seed=0)
        assert rep.verdict == "nonneg"
        assert abs(rep.min_value) <= 1e-6

    def test_one_dimensional_vacuous(self):
        m = make_cost("quadratic", None, dimension=1)
        rep = certify_mtw(m, sample_budget=100, seed=0)
        assert rep.verdict == "nonneg"
        assert rep.samples == 0

    def test_power_violated_stable_across_seeds(self, power):
        verdicts = set()
        for seed in (0, 1, 2):
            rep = certify_mtw(power, sample_budget=300, seed=seed)
            verdicts.add(rep.verdict)
            if rep.verdict == "violated":
                x, y, eta, xi = rep.argmin
                assert abs(np.dot(eta, xi)) <= 1e-10
                assert np.linalg.norm(eta) == pytest.approx(1.0, abs=1e-10)
                assert np.linalg.norm(xi) == pytest.approx(1.0, abs=1e-10)
        assert verdicts == {"violated"}

    def test_sqrt_nonneg(self, sqrt_cost):
        rep = certify_mtw(sqrt_cost, sample_budget=300, seed=0)
        assert rep.verdict == "nonneg"
        assert rep.min_value >= -1e-7

    def test_refinement_beats_sampling(self, power):
        coarse = certify_mtw(power, sample_budget=50, refine_iters=0, seed=5)
        refined = certify_mtw(power, sample_budget=50, refine_iters=200, seed=5)
        assert refined.min_value <= coarse.min_value + 1e-12


class TestLoeper:
    def test_quadratic_none(self, quadratic):
        rep = check_loeper(quadratic, sample_budget=400, seed=0)
        assert rep.certificate is None

    def test_bilinear_none(self, bilinear):
        rep = check_loeper(bilinear, sample_budget=400, seed=0)
        assert rep.certificate is None

    def test_power_certificate_revalidates(self, power):
        rep = check_loeper(power, sample_budget=800, seed=1)
        cert = rep.certificate
        assert cert is not None
        assert cert.margin > 1e-6
        assert cert.revalidate(power) == pytest.approx(cert.margin, abs=1e-8)
        # certificate fields are genuine domain points
        assert power.domain.X.contains(cert.x0) and power.domain.X.contains(cert.x1)
        assert power.domain.Y.contains(cert.y0) and power.domain.Y.contains(cert.y1)
        assert 0.0 < cert.t < 1.0

    def test_role_symmetry_verdicts(self, quadratic, power):
        # the x<->y swapped check on the swapped cost agrees verdict-wise
        for model, expect in ((quadratic, False), (power, True)):
            swapped = model.swapped()
            rep = check_loeper(swapped, sample_budget=600, seed=2)
            assert (rep.certificate is not None) == expect

    def test_certificate_csv_row(self, power):
        rep = check_loeper(power, sample_budget=600, seed=3)
        row = rep.certificate.to_csv_row()
        assert len(row.split(",")) == 4 * 2 + 2


class TestQQconv:
    def test_quadratic_bounded_by_one(self, quadratic):
        est = estimate_qqconv(quadratic, sample_budget=300, seed=0)
        assert est.C <= 1.0 + 1e-9

    def test_quadratic_1d_brute_force(self):
        # dense tuple grid in 1D confirms the constant never exceeds 1
        m = make_cost("quadratic", None, dimension=1)
        xs = np.linspace(-1, 1, 9)
        ys = np.linspace(-1, 1, 9)
        worst = 1.0
        for x0 in xs:
            for x1 in xs:
                if x1 == x0:
                    continue
                for y0 in ys:
                    for y in ys:
                        for t in np.linspace(0.1, 0.9, 9):
                            xt = (1 - t) * x0 + t * x1
                            lhs = (-0.5 * (xt - y)**2 + 0.5 * (xt - y0)**2
                                   + 0.5 * (x0 - y)**2 - 0.5 * (x0 - y0)**2)
                            rhs = (-0.5 * (x1 - y)**2 + 0.5 * (x1 - y0)**2
                                   + 0.5 * (x0 - y)**2 - 0.5 * (x0 - y0)**2)
                            if rhs > 1e-12:
                                worst = max(worst, lhs / (t * rhs))
        assert worst <= 1.0 + 1e-9

    def test_power_unbounded(self, power):
        est = estimate_qqconv(power, sample_budget=600, seed=1)
        assert est.C == math.inf
        # re-evaluate the witness tuple directly
        x0, x1, y0, y, t = est.worst_tuple
        from cconvex.geometry import c_segment
        xt = c_segment(power, y0, x0, x1, [t])[0]
        base = float(power.cost(x0, y) - power.cost(x0, y0))
        lhs = float(-power.cost(xt, y) + power.cost(xt, y0)) + base
        rhs = float(-power.cost(x1, y) + power.cost(x1, y0)) + base
        assert rhs <= 1e-10 and lhs > 1e-10


class TestChordProbe:
    def test_quadratic_small_deviation(self, quadratic):
        rep = chord_equivalence_probe(quadratic, sample_budget=6, seed=0,
                                      y_shape=(33, 33))
        assert rep.max_deviation <= 1e-4

    def test_power_strictly_positive(self, power):
        rep = chord_equivalence_probe(power, sample_budget=10, seed=3,
                                      y_shape=(33, 33))
        assert rep.max_deviation > 1e-4
