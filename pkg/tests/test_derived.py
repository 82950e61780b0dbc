"""Tests for ratio probabilities, marginals, conditionals and moments.

Closed forms used below: for two unit exponentials the ratio max/sum is
uniform on [1/2, 1], the max has density 2e^(-z)(1 - e^(-z)), the sum has
density y e^(-y), and E[sum*max] = 4.5 via the independence of the min and
the range. Discrete expectations are plain finite sums checked by hand.
"""
import math

import numpy as np
import pytest

from summax import (
    DegenerateSliceError,
    EngineError,
    GridError,
    GridSpec,
    PaprQuery,
    Table1D,
    bernoulli,
    binomial,
    conditional,
    dcdf_eval,
    expectation,
    exponential,
    joint_moment,
    marginal_max,
    marginal_sum,
    papr_prob_continuous,
    papr_prob_discrete,
    pdf_iid_recursive,
    pmf_recursive,
    prob_zero_sum,
    cdf_recursive,
    uniform_int,
)

from summax.grids import line_integral


@pytest.fixture(scope="module")
def exp_pair_joint():
    return pdf_iid_recursive(exponential(1.0), 2, GridSpec(24.0, 12.0, 417, 417))


@pytest.fixture(scope="module")
def exp_triple_joint():
    return pdf_iid_recursive(exponential(1.0), 3, GridSpec(24.0, 12.0, 417, 417))


@pytest.fixture(scope="module")
def bern_triple():
    return pmf_recursive([bernoulli(0.5)] * 3)


class TestPaprQuery:
    def test_rejects_reversed_band(self):
        with pytest.raises(EngineError):
            PaprQuery(2.0, 1.0, 3)

    def test_rejects_negative_alpha(self):
        with pytest.raises(EngineError):
            PaprQuery(-0.5, 1.0, 3)


class TestPaprContinuous:
    def test_two_exponentials_half_band(self, exp_pair_joint):
        got = papr_prob_continuous(exp_pair_joint, PaprQuery(1.0, 1.5, 2))
        assert got == pytest.approx(0.5, abs=5e-3)

    def test_full_band_collects_all_mass(self, exp_pair_joint, exp_triple_joint):
        assert papr_prob_continuous(exp_pair_joint, PaprQuery(1.0, 2.0, 2)) \
            == pytest.approx(1.0, abs=5e-3)
        assert papr_prob_continuous(exp_triple_joint, PaprQuery(1.0, 3.0, 3)) \
            == pytest.approx(1.0, abs=5e-3)

    def test_band_widening_is_monotone(self, exp_pair_joint):
        probs = [papr_prob_continuous(exp_pair_joint, PaprQuery(1.0, b, 2))
                 for b in (1.1, 1.3, 1.5, 1.7, 2.0)]
        assert all(b >= a - 1e-12 for a, b in zip(probs, probs[1:]))

    def test_degenerate_bands_are_zero(self, exp_pair_joint):
        assert papr_prob_continuous(exp_pair_joint, PaprQuery(1.5, 1.5, 2)) == 0.0
        # the ratio never drops below 1
        assert papr_prob_continuous(exp_pair_joint, PaprQuery(0.0, 0.9, 2)) == 0.0

    def test_rejects_cdf_grids(self):
        g = cdf_recursive([exponential(1.0)] * 2, GridSpec(8.0, 4.0, 33, 33))
        with pytest.raises(GridError):
            papr_prob_continuous(g, PaprQuery(1.0, 2.0, 2))

    def test_rejects_mismatched_arity(self, exp_pair_joint):
        with pytest.raises(EngineError):
            papr_prob_continuous(exp_pair_joint, PaprQuery(1.0, 3.0, 3))


class TestPaprDiscrete:
    def test_three_bernoulli_full_band(self, bern_triple):
        got = papr_prob_discrete(bern_triple, PaprQuery(1.0, 3.0, 3))
        assert got == pytest.approx(7 / 8, abs=1e-12)

    def test_three_bernoulli_peak_only(self, bern_triple):
        # ratio exactly n means all mass sits on one variable
        got = papr_prob_discrete(bern_triple, PaprQuery(3.0, 3.0, 3))
        assert got == pytest.approx(3 / 8, abs=1e-12)

    def test_zero_sum_mass_completes_the_total(self, bern_triple):
        assert prob_zero_sum(bern_triple) == pytest.approx(1 / 8, abs=1e-12)
        full = papr_prob_discrete(bern_triple, PaprQuery(1.0, 3.0, 3))
        assert full + prob_zero_sum(bern_triple) == pytest.approx(1.0, abs=1e-12)

    def test_total_splits_for_mixed_models(self):
        tri = pmf_recursive([uniform_int(0, 3), binomial(3, 0.4)])
        full = papr_prob_discrete(tri, PaprQuery(1.0, 2.0, 2))
        assert full + prob_zero_sum(tri) == pytest.approx(tri.total_mass(), abs=1e-12)

    def test_rejects_wrong_input_type(self, exp_pair_joint):
        with pytest.raises(EngineError):
            papr_prob_discrete(exp_pair_joint, PaprQuery(1.0, 2.0, 2))

    def test_rejects_mismatched_arity(self, bern_triple):
        with pytest.raises(EngineError):
            papr_prob_discrete(bern_triple, PaprQuery(1.0, 2.0, 2))


class TestMarginalsContinuous:
    def test_max_marginal_matches_closed_form(self, exp_pair_joint):
        marg = marginal_max(exp_pair_joint)
        want = 2 * np.exp(-marg.coords) * (1 - np.exp(-marg.coords))
        np.testing.assert_allclose(marg.values, want, atol=5e-3)

    def test_sum_marginal_matches_closed_form(self, exp_pair_joint):
        marg = marginal_sum(exp_pair_joint)
        want = marg.coords * np.exp(-marg.coords)
        np.testing.assert_allclose(marg.values, want, atol=5e-3)

    def test_marginals_carry_unit_mass(self, exp_pair_joint):
        for marg in (marginal_sum(exp_pair_joint), marginal_max(exp_pair_joint)):
            assert np.trapezoid(marg.values, marg.coords) == pytest.approx(1.0, abs=5e-3)

    def test_rejects_cdf_grids(self):
        g = cdf_recursive([exponential(1.0)] * 2, GridSpec(8.0, 4.0, 33, 33))
        with pytest.raises(GridError):
            marginal_sum(g)


class TestMarginalsDiscrete:
    def test_max_marginal_cumsum_is_product_law(self):
        models = [uniform_int(0, 2), binomial(3, 0.4)]
        tri = pmf_recursive(models)
        marg = marginal_max(tri)
        got = np.cumsum(marg.values)
        for m in range(tri.m_max + 1):
            want = dcdf_eval(models[0], m) * dcdf_eval(models[1], m)
            assert got[m] == pytest.approx(want, abs=1e-12)

    def test_sum_marginal_total(self, bern_triple):
        marg = marginal_sum(bern_triple)
        assert marg.values.sum() == pytest.approx(bern_triple.total_mass(), abs=1e-15)
        assert marg.kind == "mass"


class TestConditional:
    def test_continuous_slice_normalizes_and_remultiplies(self, exp_pair_joint):
        spec = exp_pair_joint.spec
        j = 35
        z_at = spec.z_nodes()[j]
        cond = conditional(exp_pair_joint, "max", z_at)
        assert cond.at == pytest.approx(z_at)
        tot = line_integral(spec.y_nodes(), cond.values, 0.0, spec.y_max,
                            z_at, 2 * z_at)
        assert tot == pytest.approx(1.0, abs=1e-9)
        col = exp_pair_joint.values[:, j]
        norm = line_integral(spec.y_nodes(), col, 0.0, spec.y_max, z_at, 2 * z_at)
        np.testing.assert_allclose(cond.values * norm, col, rtol=1e-9, atol=1e-300)

    def test_conditioning_value_snaps_to_grid(self, exp_pair_joint):
        spec = exp_pair_joint.spec
        y_at = spec.y_nodes()[40]
        cond = conditional(exp_pair_joint, "sum", y_at + 0.3 * spec.h_y)
        assert cond.at == pytest.approx(y_at)
        assert cond.axis == "max"

    def test_zero_slice_is_degenerate(self, exp_pair_joint):
        with pytest.raises(DegenerateSliceError):
            conditional(exp_pair_joint, "max", 0.0)

    def test_out_of_grid_slice_is_degenerate(self, exp_pair_joint):
        with pytest.raises(DegenerateSliceError):
            conditional(exp_pair_joint, "max", 100.0)

    def test_discrete_conditional_given_max(self, bern_triple):
        cond = conditional(bern_triple, "max", 1)
        # masses (3/8, 3/8, 1/8) over sums 1..3, normalized by 7/8
        want = np.array([0.0, 3 / 7, 3 / 7, 1 / 7])
        np.testing.assert_allclose(cond.values, want, atol=1e-12)

    def test_discrete_conditional_given_sum(self, bern_triple):
        cond = conditional(bern_triple, "sum", 2)
        assert cond.values[1] == pytest.approx(1.0, abs=1e-12)
        assert cond.values.sum() == pytest.approx(1.0, abs=1e-12)

    def test_discrete_zero_max_is_a_point_mass(self, bern_triple):
        cond = conditional(bern_triple, "max", 0)
        assert cond.values[0] == pytest.approx(1.0, abs=1e-12)

    def test_discrete_rejects_fractional_values(self, bern_triple):
        with pytest.raises(EngineError):
            conditional(bern_triple, "max", 0.5)

    def test_rejects_unknown_axis(self, bern_triple):
        with pytest.raises(GridError):
            conditional(bern_triple, "min", 1)


class TestMoments:
    def test_first_moments_of_two_exponentials(self, exp_pair_joint):
        assert expectation(exp_pair_joint, lambda y, z: y) == pytest.approx(2.0, abs=1e-2)
        assert expectation(exp_pair_joint, lambda y, z: z) == pytest.approx(1.5, abs=1e-2)

    def test_sum_mean_of_three_exponentials(self, exp_triple_joint):
        assert expectation(exp_triple_joint, lambda y, z: y) == pytest.approx(3.0, abs=2e-2)

    def test_cross_moment_of_two_exponentials(self, exp_pair_joint):
        # E[sum*max] = E[(m+M)M] with min and range independent: 4.5
        assert joint_moment(exp_pair_joint, 1.0, 1.0) == pytest.approx(4.5, abs=2e-2)

    def test_discrete_sum_mean_is_exact(self, bern_triple):
        assert expectation(bern_triple, lambda l, m: l) == pytest.approx(1.5, abs=1e-12)

    def test_discrete_negative_exponent_off_zero_support(self):
        tri = pmf_recursive([uniform_int(1, 2), uniform_int(1, 2)])
        # sums 2, 3, 4 with masses 1/4, 1/2, 1/4
        assert joint_moment(tri, -1.0, 0.0) == pytest.approx(17 / 48, abs=1e-12)

    def test_discrete_negative_exponent_with_zero_mass_raises(self, bern_triple):
        with pytest.raises(EngineError):
            joint_moment(bern_triple, -1.0, 0.0)

    def test_continuous_negative_exponent_raises(self, exp_pair_joint):
        with pytest.raises(EngineError):
            joint_moment(exp_pair_joint, -1.0, 0.0)

    def test_non_finite_integrand_raises(self, exp_pair_joint):
        with pytest.raises(EngineError):
            expectation(exp_pair_joint, lambda y, z: 1.0 / y)


class TestTable1D:
    def test_json_fields(self, exp_pair_joint):
        marg = marginal_max(exp_pair_joint)
        d = marg.to_json_dict()
        assert d["spec"] == "summax-table-1"
        assert d["axis"] == "max"
        assert d["kind"] == "density"
        assert d["at"] is None
        assert len(d["values"]) == exp_pair_joint.spec.n_z

    def test_csv_layout(self, tmp_path, bern_triple):
        marg = marginal_sum(bern_triple)
        path = tmp_path / "marg.csv"
        marg.to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "coordinate,value"
        assert len(lines) == 1 + bern_triple.l_max + 1

    def test_rejects_mismatched_shapes(self):
        with pytest.raises(GridError):
            Table1D("sum", np.arange(4.0), np.arange(5.0), "mass")

    def test_rejects_unknown_axis(self):
        with pytest.raises(GridError):
            Table1D("ratio", np.arange(4.0), np.arange(4.0), "mass")
