"""Numeric optimizer: weights, supports, c-optimality, and the reference tables."""

from __future__ import annotations

import math

import numpy as np
import pytest

from optdesign import (
    CriterionSpec,
    DesignSpace,
    OptimizationError,
    ValidationError,
    criterion_value,
    fim,
    make_design,
    phi_c,
    phi_d,
    phi_r2,
    slr_model,
)
from optdesign.mm import MMParams, mm_model
from optdesign.optimize import (
    OptimizeRequest,
    c_optimal,
    mm_designs_csv,
    mm_efficiencies_csv,
    mm_tables,
    optimize_design,
    optimize_weights,
    sa_references,
)
from optdesign.slr import SlrInterval, d_optimal_slr, p_r


class TestOptimizeWeights:
    def test_slr_r_weights(self, slr_15):
        ws = optimize_weights(slr_15, (1.0, 5.0), CriterionSpec("R"), tol=1e-10)
        assert abs(ws[1] - 0.356) < 1e-3
        assert abs(ws[1] - p_r(SlrInterval(1.0, 5.0))) < 1e-4

    def test_slr_d_weights_half(self):
        model = slr_model(DesignSpace(-2.0, 3.0))
        ws = optimize_weights(model, (-2.0, 3.0), CriterionSpec("D"), tol=1e-10)
        assert np.allclose(ws, [0.5, 0.5], atol=1e-7)

    def test_mm_r_weights_at_published_support(self):
        model = mm_model(MMParams(b=5.0, eps=0.0))
        K = 227.27
        ws = optimize_weights(model, (0.55 * K, 5 * K), CriterionSpec("R"), tol=1e-10)
        assert abs(ws[0] - 0.54) < 0.01  # mass at 0.55K

    def test_three_point_support_drops_interior_point(self, slr_15):
        # D-optimal weights on {1, 3, 5} put nothing on the middle point
        ws = optimize_weights(slr_15, (1.0, 3.0, 5.0), CriterionSpec("D"), tol=1e-9)
        assert ws[1] < 1e-6
        assert abs(ws[0] - 0.5) < 1e-4 and abs(ws[2] - 0.5) < 1e-4

    def test_rejects_bad_support(self, slr_15):
        with pytest.raises(ValidationError):
            optimize_weights(slr_15, (2.0, 2.0), CriterionSpec("D"))
        with pytest.raises(ValidationError):
            optimize_weights(slr_15, (0.0, 5.0), CriterionSpec("D"))  # outside space
        with pytest.raises(ValidationError):
            optimize_weights(slr_15, (3.0,), CriterionSpec("D"))

    def test_all_singular_support_is_an_error(self):
        # The regressor vanishes at the origin, so every weighting of a
        # support containing 0 is rank-deficient.
        model = mm_model(MMParams(V=1.0, K=1.0, b=5.0, eps=0.0))
        with pytest.raises(OptimizationError):
            optimize_weights(model, (0.0, 1e-4), CriterionSpec("R"))


class TestOptimizeDesign:
    def test_request_validation(self, slr_15):
        with pytest.raises(ValidationError):
            OptimizeRequest(model=slr_15, criterion=CriterionSpec("D"), n_support=5)
        with pytest.raises(ValidationError):
            OptimizeRequest(model=slr_15, criterion=CriterionSpec("D"), grid_resolution=50)

    def test_slr_d_matches_closed_form(self, slr_15):
        res = optimize_design(OptimizeRequest(model=slr_15, criterion=CriterionSpec("D")))
        xi_star = d_optimal_slr(SlrInterval(1.0, 5.0))
        assert res.converged and res.label == "certified"
        for (x, w), (xs, ws) in zip(res.design.points, xi_star.points):
            assert abs(x - xs) < 1e-6 and abs(w - ws) < 1e-6

    def test_slr_r_matches_closed_form(self, slr_15):
        res = optimize_design(OptimizeRequest(model=slr_15, criterion=CriterionSpec("R")))
        assert res.converged
        assert abs(res.design.points[1][0] - 5.0) < 1e-9
        assert abs(res.design.points[1][1] - p_r(SlrInterval(1.0, 5.0))) < 1e-6

    def test_certificate_contract(self, mm_half):
        res = optimize_design(OptimizeRequest(model=mm_half, criterion=CriterionSpec("R")))
        assert res.converged
        assert res.derivative_report is not None
        assert res.derivative_report.min_dd >= -1e-6 * max(1.0, res.criterion_value)

    def test_mm_em_interior_optimum(self, mm_half):
        res = optimize_design(OptimizeRequest(model=mm_half, criterion=CriterionSpec("EM")))
        assert res.label == "best-found" and res.derivative_report is None
        K = 227.27
        assert abs(res.design.points[0][0] / K - 0.50) < 0.02
        assert abs(res.design.points[0][1] - 0.86) < 0.02

    def test_mm_r2_boundary_beats_interior(self):
        # On [0.05K, 5K] the squared-correlation optimum hugs the lower
        # boundary with a near-extreme weight and strictly beats the interior
        # two-point design (0.50, 0.61).
        params = MMParams(b=5.0, eps=0.05)
        model = mm_model(params)
        res = optimize_design(OptimizeRequest(model=model, criterion=CriterionSpec("R2")))
        K = params.K
        assert abs(res.design.points[0][0] / K - 0.05) < 0.01
        assert res.design.points[0][1] > 0.95
        interior = make_design([(0.50 * K, 0.61), (5.0 * K, 0.39)], model.space)
        assert res.criterion_value < phi_r2(fim(model, interior)) - 0.1
        assert abs(res.criterion_value - 0.507) < 0.005

    def test_oracle_dominance(self, mm_half):
        rng = np.random.default_rng(7)
        space = mm_half.space
        for kind in ("D", "R"):
            spec = CriterionSpec(kind)
            res = optimize_design(OptimizeRequest(model=mm_half, criterion=spec))
            best_random = math.inf
            n = 0
            while n < 10_000:
                x1, x2 = np.sort(rng.uniform(space.lo, space.hi, 2))
                if x2 - x1 <= space.merge_tol():
                    continue
                w = float(rng.uniform(0.0, 1.0))
                if not 0.0 < w < 1.0:
                    continue
                m = fim(mm_half, make_design([(x1, w), (x2, 1 - w)], space))
                val = criterion_value(m, spec) if not m.is_singular else math.inf
                best_random = min(best_random, val)
                n += 1
            assert res.criterion_value <= best_random * (1 + 1e-8)

    def test_determinism(self, mm_half):
        req = OptimizeRequest(model=mm_half, criterion=CriterionSpec("EM"), seed=42)
        r1 = optimize_design(req)
        r2 = optimize_design(req)
        assert r1.design == r2.design
        assert r1.criterion_value == r2.criterion_value
        assert r1.iterations == r2.iterations

    def test_self_efficiency_is_one(self, slr_15):
        res = optimize_design(OptimizeRequest(model=slr_15, criterion=CriterionSpec("D")))
        val = criterion_value(fim(slr_15, res.design), CriterionSpec("D"))
        assert abs(res.criterion_value / val - 1.0) <= 1e-9

    def test_cpb_shares_optimum_with_r2(self, mm_half):
        # CPB is the square root of the squared correlation for two
        # parameters, so the minimizers coincide.
        res_cpb = optimize_design(OptimizeRequest(model=mm_half, criterion=CriterionSpec("CPB")))
        res_r2 = optimize_design(OptimizeRequest(model=mm_half, criterion=CriterionSpec("R2")))
        assert abs(res_cpb.criterion_value ** 2 - res_r2.criterion_value) < 1e-6
        for (x1, w1), (x2, w2) in zip(res_cpb.design.points, res_r2.design.points):
            assert abs(x1 - x2) < 1e-4 * mm_half.space.width and abs(w1 - w2) < 1e-4

    def test_three_support_collapses_to_two(self, slr_15):
        res = optimize_design(OptimizeRequest(model=slr_15, criterion=CriterionSpec("D"),
                                              n_support=3, grid_resolution=101))
        # canonicalization drops the zero-weight third point
        assert res.design.support_size == 2
        assert abs(res.criterion_value - phi_d(fim(slr_15, d_optimal_slr(SlrInterval(1, 5))))) < 1e-4


class TestCOptimal:
    def test_slope_variance_on_symmetric_interval(self):
        model = slr_model(DesignSpace(-1.0, 1.0))
        res = c_optimal(model, (0.0, 1.0))
        assert abs(res.criterion_value - 1.0) < 1e-9
        assert np.allclose(res.design.xs, [-1.0, 1.0], atol=1e-9)
        assert np.allclose(res.design.ws, [0.5, 0.5], atol=1e-6)

    def test_intercept_variance_reaches_one(self):
        model = slr_model(DesignSpace(-1.0, 1.0))
        res = c_optimal(model, (1.0, 0.0))
        assert abs(res.criterion_value - 1.0) < 1e-9
        assert abs(res.design.mean_x()) < 1e-6

    def test_brute_force_oracle(self):
        model = slr_model(DesignSpace(-1.0, 1.0))
        rng = np.random.default_rng(9)
        for c in [(1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (2.0, -1.0)]:
            res = c_optimal(model, c)
            best = math.inf
            for _ in range(4000):
                x1, x2 = np.sort(rng.uniform(-1, 1, 2))
                if x2 - x1 < 1e-6:
                    continue
                w = float(rng.uniform(0.01, 0.99))
                m = fim(model, make_design([(x1, w), (x2, 1 - w)], model.space))
                best = min(best, phi_c(m, c))
            assert res.criterion_value <= best * (1 + 1e-6)

    def test_singleton_estimable_path(self):
        # Intercept variance on [-1, 1]: the one-point design at 0 is estimable
        # with value 1; the returned optimum must match it.
        model = slr_model(DesignSpace(-1.0, 1.0))
        singleton = make_design([(0.0, 1.0)], model.space)
        assert math.isclose(phi_c(fim(model, singleton), (1.0, 0.0)), 1.0, rel_tol=1e-12)
        res = c_optimal(model, (1.0, 0.0))
        assert res.criterion_value <= 1.0 + 1e-9

    def test_rejects_zero_vector(self, slr_15):
        with pytest.raises(ValidationError):
            c_optimal(slr_15, (0.0, 0.0))

    def test_sa_references_self_efficiency(self, mm_half):
        ref1, ref2 = sa_references(mm_half)
        assert ref1 > 0 and ref2 > 0
        # first term of the SA criterion equals 1 at the c1-optimal design
        res1 = c_optimal(mm_half, (1.0, 0.0))
        m = fim(mm_half, res1.design)
        assert abs(phi_c(m, (1.0, 0.0)) / ref1 - 1.0) <= 1e-9


@pytest.fixture(scope="module")
def tables():
    return mm_tables(MMParams(), eps_list=[0.0, 0.5], compat=True)


class TestMMTables:
    def test_shapes(self, tables):
        assert len(tables.designs) == 10          # 5 criteria x 2 eps
        assert len(tables.efficiencies) == 10

    def test_compat_collapse_rows(self, tables):
        rows = {(r.eps, r.criterion): r for r in tables.designs}
        for kind in ("EM", "R2"):
            row = rows[(0.0, kind)]
            assert row.collapsed and row.a == 0.0 and row.p == 1.0 and row.design is None
        eff = {(r.eps, r.criterion): r for r in tables.efficiencies}
        em_row = eff[(0.0, "EM")]
        assert em_row.eff_em == 1.0
        assert em_row.eff_d is None and em_row.r2 is None

    def test_known_cells(self, tables):
        rows = {(r.eps, r.criterion): r for r in tables.designs}
        assert abs(rows[(0.5, "D")].a - 5 / 7) < 1e-9
        assert abs(rows[(0.5, "D")].p - 0.5) < 1e-9
        assert abs(rows[(0.5, "R")].a - 0.55) < 0.02
        assert abs(rows[(0.5, "R")].p - 0.53) < 0.02
        assert abs(rows[(0.5, "EM")].a - 0.50) < 0.02
        assert abs(rows[(0.5, "EM")].p - 0.86) < 0.02
        eff = {(r.eps, r.criterion): r for r in tables.efficiencies}
        assert abs(eff[(0.5, "D")].r2 - 0.69) < 0.01
        assert abs(eff[(0.5, "D")].eff_d - 1.0) < 1e-9
        assert eff[(0.5, "R")].eff_r == pytest.approx(1.0, abs=1e-6)

    def test_strict_mode_reports_best_found_at_zero_floor(self):
        t = mm_tables(MMParams(), eps_list=[0.0], criteria=("EM",), compat=False)
        row = t.designs[0]
        assert not row.collapsed and row.design is not None

    def test_csv_rendering_deterministic(self, tables):
        a = mm_designs_csv(tables)
        b = mm_designs_csv(tables)
        assert a == b
        assert a.splitlines()[0] == "eps,criterion,a,p"
        e = mm_efficiencies_csv(tables)
        assert e.splitlines()[0] == "eps,criterion,Eff_D,Eff_SA,Eff_R,Eff_EM,Eff_r2,r2"

    def test_rejects_unknown_criterion(self):
        with pytest.raises(ValidationError):
            mm_tables(MMParams(), eps_list=[0.5], criteria=("Z",))
