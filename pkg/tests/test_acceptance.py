"""Acceptance gate: every criterion at its stated tolerance, desk scale.

Each test prints one PASS line on success (shown with pytest -s); a failure
carries the criterion number in the assertion message.
"""

import math

import numpy as np
import pytest

from cconvex.chords import (ChordSolver, LiftedPoint, alt_tolerance, chord_eval,
                            connect, is_alternative_c_convex, segment_identity_check)
from cconvex.cli import main as cli_main
from cconvex.convexity import c_envelope, c_transform, lip_estimate
from cconvex.costs import make_cost
from cconvex.domains import Box, DomainPair
from cconvex.gridfn import GridFunction
from cconvex.mtw import certify_mtw, check_loeper, mtw_value
from cconvex.counterexample import run_pipeline

pytestmark = pytest.mark.acceptance


def report(n, text):
    print(f"[acceptance {n}] PASS: {text}")


class TestCriterion1Degenerate:
    def test_degenerate_tensor(self, quadratic, bilinear):
        for model in (quadratic, bilinear):
            rng = np.random.default_rng(0)
            worst = 0.0
            for _ in range(1000):
                x = model.domain.X.sample(rng)
                y = model.domain.Y.sample(rng)
                phi = rng.uniform(0, 2 * math.pi)
                eta = np.array([math.cos(phi), math.sin(phi)])
                xi = np.array([-math.sin(phi), math.cos(phi)])
                worst = max(worst, abs(mtw_value(model, x, y, eta, xi)))
            assert worst <= 1e-6, f"criterion 1: {model.name} |MTW| = {worst}"
            rep = certify_mtw(model, sample_budget=1000, seed=0)
            assert rep.verdict == "nonneg", f"criterion 1: {model.name} verdict"
        report(1, "quadratic and bilinear tensors vanish over 10^3 orthogonal configs")


class TestCriterion2Loeper:
    def test_no_violation_for_regular_costs(self, quadratic, bilinear, sqrt_cost):
        for model in (quadratic, bilinear, sqrt_cost):
            for seed in (0, 1, 2):
                rep = check_loeper(model, sample_budget=10_000, seed=seed)
                assert rep.certificate is None, (
                    f"criterion 2: {model.name} seed {seed} margin {rep.best_margin}")
        report(2, "quadratic/bilinear/sqrt clean at budget 10^4 across 3 seeds")

    def test_power_certificate(self, power):
        rep = check_loeper(power, sample_budget=10_000, seed=0)
        cert = rep.certificate
        assert cert is not None, "criterion 2: no power-cost certificate"
        assert cert.margin > 1e-6, f"criterion 2: margin {cert.margin}"
        assert abs(cert.revalidate(power) - cert.margin) <= 1e-8
        report(2, f"power-cost certificate margin {cert.margin:.4g} re-validates")


class TestCriterion3ChordOracle:
    def test_worked_example_against_grid_oracle(self, quadratic_big):
        X0 = LiftedPoint([0.0, 0.0], 0.0)
        X1 = LiftedPoint([1.0, 0.0], 0.0)
        val = chord_eval(quadratic_big, X0, X1, [0.5, 0.0], y_shape=(33, 33))
        assert val == pytest.approx(0.125, abs=1e-4), "criterion 3: midpoint value"
        # independent (y, h)-grid oracle
        Y = quadratic_big.domain.Y
        axes = [np.linspace(Y.lo[i], Y.hi[i], 121) for i in range(2)]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 2)
        c0 = quadratic_big.cost(np.broadcast_to(X0.x, mesh.shape), mesh)
        c1 = quadratic_big.cost(np.broadcast_to(X1.x, mesh.shape), mesh)
        cx = quadratic_big.cost(np.broadcast_to(np.array([0.5, 0.0]), mesh.shape), mesh)
        best = -np.inf
        for h in np.linspace(-1.0, 1.0, 2001):
            feas = (-c0 + h <= 1e-12) & (-c1 + h <= 1e-12)
            if np.any(feas):
                best = max(best, float(np.max(-cx[feas] + h)))
        assert val == pytest.approx(best, abs=1e-4), "criterion 3: oracle mismatch"

        conn = connect(quadratic_big, X0, X1, y_shape=(33, 33))
        dev = segment_identity_check(quadratic_big, X0, X1, conn.touching,
                                     t_grid=np.linspace(0, 1, 33), y_shape=(33, 33))
        assert dev <= 1e-4, f"criterion 3: segment identity deviation {dev}"
        report(3, f"chord = 0.125 vs oracle {best:.6f}; segment identity dev {dev:.2e}")


class TestCriterion4LemmaSuites:
    SHAPE = (33, 33)

    def test_ordered_and_shift(self, quadratic_big, power):
        for model in (quadratic_big, power):
            solver = ChordSolver(model, self.SHAPE)
            rng = np.random.default_rng(4)
            probes = model.domain.X.sample(rng, 6)
            for _ in range(50):
                x0, x1 = model.domain.X.sample(rng, 2)
                u0, u1 = rng.uniform(-1, 1, 2)
                lam = rng.uniform(0.0, 1.0)
                F_hi = solver.lattice_values(LiftedPoint(x0, u0), LiftedPoint(x1, u1), probes)
                F_lo = solver.lattice_values(LiftedPoint(x0, u0 - lam),
                                             LiftedPoint(x1, u1 - lam), probes)
                assert np.all(F_lo <= F_hi + 1e-8), "criterion 4: ordered-F"
                assert np.max(np.abs(F_lo + lam - F_hi)) <= 1e-8, "criterion 4: shift"
        report(4, "ordered-F monotonicity and shift equivariance at 100 instances")

    def test_idempotence_and_touching(self, quadratic_big, power):
        count = 0
        for model in (quadratic_big, power):
            solver = ChordSolver(model, self.SHAPE)
            rng = np.random.default_rng(7)
            probes = model.domain.X.sample(rng, 4)
            for _ in range(50):
                x0, x1 = model.domain.X.sample(rng, 2)
                u0, u1 = rng.uniform(-0.5, 0.5, 2)
                X0, X1 = LiftedPoint(x0, u0), LiftedPoint(x1, u1)
                conn = connect(model, X0, X1, solver=solver)
                assert max(conn.residuals) <= 1e-6, "criterion 4: touching residual"
                F1 = solver.lattice_values(X0, X1, probes)
                F2 = solver.lattice_values(LiftedPoint(x0, conn.u0p),
                                           LiftedPoint(x1, conn.u1p), probes)
                assert np.max(np.abs(F1 - F2)) <= 1e-6, "criterion 4: idempotence"
                count += 1
        assert count >= 100
        report(4, f"actual-F idempotence and touching residuals at {count} instances")

    def test_lipschitz_both_objects(self, quadratic):
        lip = lip_estimate(quadratic)
        rng = np.random.default_rng(9)
        solver = ChordSolver(quadratic, self.SHAPE)
        X = quadratic.domain.X
        grid = GridFunction("X", X.lo, X.hi, np.zeros(self.SHAPE))
        nodes = grid.nodes()
        sp = grid.spacing
        for k in range(100):
            if k % 2 == 0:
                psi = GridFunction("Y", quadratic.domain.Y.lo, quadratic.domain.Y.hi,
                                   rng.uniform(-0.5, 0.5, self.SHAPE))
                vals = c_transform(quadratic, psi, shape=self.SHAPE).values
            else:
                x0, x1 = X.sample(rng, 2)
                u0, u1 = rng.uniform(-0.5, 0.5, 2)
                vals = solver.lattice_values(LiftedPoint(x0, u0), LiftedPoint(x1, u1),
                                             nodes).reshape(self.SHAPE)
            worst = max(np.max(np.abs(np.diff(vals, axis=0))) / sp[0],
                        np.max(np.abs(np.diff(vals, axis=1))) / sp[1])
            assert worst <= lip * 1.05, f"criterion 4: Lipschitz {worst} > {lip * 1.05}"
        report(4, "chord and transform Lipschitz bounds at 100 instances")

    def test_transforms_certify_and_alt(self, quadratic):
        rng = np.random.default_rng(10)
        Y = quadratic.domain.Y
        for k in range(100):
            psi = GridFunction("Y", Y.lo, Y.hi, rng.uniform(-0.5, 0.5, self.SHAPE))
            phi = c_transform(quadratic, psi, shape=self.SHAPE)
            env = c_envelope(quadratic, phi, y_shape=self.SHAPE)
            assert env.is_c_convex, f"criterion 4: transform output gap {env.max_gap}"
            if k < 25:  # first half of the equivalence, sampled
                alt = is_alternative_c_convex(quadratic, phi, pair_budget=8,
                                              seed=k, y_shape=self.SHAPE)
                assert alt.holds, f"criterion 4: alt gap {alt.worst_gap}"
        report(4, "c-transform outputs certify c-convex (100) and alt-c-convex (25)")


class TestCriterion5Envelope:
    def test_1d_bump_against_hull_oracle(self):
        m = make_cost("quadratic", None, dimension=1)
        X = m.domain.X
        shape = (257,)
        xs = np.linspace(X.lo[0], X.hi[0], shape[0])
        phi = GridFunction("X", X.lo, X.hi, -xs ** 2)
        rep = c_envelope(m, phi, y_shape=shape)
        # classical oracle: convexify phi + x^2/2, shift back
        g = phi.values + xs ** 2 / 2
        hull = []
        for p in zip(xs, g):
            while len(hull) >= 2:
                (x1, y1), (x2, y2) = hull[-2], hull[-1]
                if (y2 - y1) * (p[0] - x1) >= (p[1] - y1) * (x2 - x1):
                    hull.pop()
                else:
                    break
            hull.append(p)
        hx = np.array([h[0] for h in hull])
        hy = np.array([h[1] for h in hull])
        oracle = np.interp(xs, hx, hy) - xs ** 2 / 2
        err = float(np.max(np.abs(rep.envelope.values - oracle)))
        assert err <= 1e-3, f"criterion 5: envelope vs hull {err}"
        report(5, f"1D envelope matches the classical hull to {err:.2e}")


class TestCriterion6Counterexample:
    def test_power_pipeline_verdict(self, power):
        shape = (48, 48)
        res = run_pipeline(power, budget=800, seed=0, shape=shape,
                           verify_budget=100, y_shape=shape, max_attempts=4)
        assert res.verdict, f"criterion 6: no verdict after {len(res.attempts)} attempts"
        rep = res.report
        grid = res.phi.grid
        triples = rep.pairs_checked * int(np.prod(grid.shape))
        assert triples >= 10_000, f"criterion 6: only {triples} chord triples"
        assert rep.alt_holds
        assert rep.alt_worst_gap <= alt_tolerance(power, grid)
        assert rep.c_convex_gap >= res.params.epsilon / 2.0
        assert rep.subdiff_empty_at is not None, "criterion 6: subdifferential found"
        report(6, f"pipeline verdict true: alt gap {rep.alt_worst_gap:.3g}, "
                  f"envelope gap {rep.c_convex_gap:.3g} >= eps/2 = "
                  f"{res.params.epsilon / 2:.3g}, empty subdifferential at "
                  f"{np.round(rep.subdiff_empty_at, 4).tolist()} ({triples} triples)")

    def test_quadratic_pipeline_exit_status_2(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("cost.name = quadratic\nbudget.counterexample = 200\n")
        code = cli_main(["counterexample", "--config", str(cfg),
                         "--output", str(tmp_path / "out")])
        assert code == 2, f"criterion 6: exit status {code}"
        report(6, "quadratic pipeline exits with status 2 (no violation found)")


class TestCriterion7Determinism:
    def test_cli_byte_identical(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("cost.name = power\nbudget.loeper = 300\nbudget.mtw = 150\n"
                       "budget.qqconv = 150\nbudget.chord_probe = 2\n"
                       "budget.constants = 150\nlattice.y_nodes = 17\n")
        blobs = []
        for sub in ("r1", "r2"):
            out = tmp_path / sub
            code = cli_main(["analyze", "--config", str(cfg), "--output", str(out),
                             "--seed", "21"])
            assert code == 0
            blobs.append((out / "report.json").read_bytes())
        assert blobs[0] == blobs[1], "criterion 7: reports differ"
        report(7, f"analyze reports byte-identical ({len(blobs[0])} bytes)")


class TestCriterion8IntroExample:
    def test_truncation_growth(self):
        vals = []
        for R in (2.0, 4.0, 8.0):
            pair = DomainPair(Box([0.0], [1.0]), Box([-R], [R]), separation=0.0)
            m = make_cost("power", pair, allow_diagonal=True)
            X0 = LiftedPoint([0.4], 0.0)
            X1 = LiftedPoint([0.6], 0.0)
            vals.append(chord_eval(m, X0, X1, [0.9], y_shape=(257,)))
        assert vals[0] < vals[1] < vals[2], f"criterion 8: not monotone {vals}"
        assert vals[2] > 100.0, f"criterion 8: growth too weak {vals}"
        report(8, "chord grows with the truncation radius: "
                  + " < ".join(f"{v:.3g}" for v in vals))
