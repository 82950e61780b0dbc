"""Tests for the continuous grid engines.

Expected numbers come from closed forms (pairs of exponentials admit
elementary antiderivatives, uniform pairs have piecewise-flat densities) and
from the pointwise tensor-quadrature evaluator, which shares no code with the
recurrence path.
"""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lemma_utils import level_identity_errors
from summax import (
    EngineError,
    GridError,
    GridFunction2D,
    GridSpec,
    bernoulli,
    cdf_direct_smalln,
    cdf_from_pdf,
    cdf_mixed,
    cdf_mixed_at,
    cdf_recursive,
    cdf_recursive_discrete,
    cdf_shifted,
    default_grid_spec,
    exponential,
    pdf_bootstrap_g2,
    pdf_iid_recursive,
    pdf_recursive,
    pdf_shifted,
    uniform,
    uniform_int,
    wedge_row_bounds,
)

# (2, 1) lands on nodes of this spec for both axes, so closed-form points can
# be compared without interpolation error
ALIGNED = GridSpec(y_max=16.0, z_max=8.0, n_y=513, n_z=513)

EXP_PAIR = [exponential(1.0), exponential(2.0)]


class TestGridSpec:
    def test_node_spacing(self):
        spec = GridSpec(4.0, 2.0, 17, 33)
        assert spec.h_y == pytest.approx(0.25)
        assert spec.h_z == pytest.approx(0.0625)
        np.testing.assert_allclose(spec.y_nodes()[[0, -1]], [0.0, 4.0])

    def test_rejects_coarse_grids(self):
        with pytest.raises(GridError):
            GridSpec(4.0, 2.0, 15, 32)

    def test_rejects_max_extent_above_sum_extent(self):
        with pytest.raises(GridError):
            GridSpec(2.0, 4.0, 32, 32)

    def test_rejects_nonpositive_extent(self):
        with pytest.raises(GridError):
            GridSpec(0.0, 0.0, 32, 32)

    def test_default_extents_cover_tail_mass(self):
        spec = default_grid_spec([exponential(1.0), exponential(1.0)])
        q = -math.log(5e-7)  # upper 1e-6/2 quantile of exp(1)
        assert spec.z_max == pytest.approx(q, rel=1e-12)
        assert spec.y_max == pytest.approx(2 * q, rel=1e-12)

    def test_default_extents_grow_with_common_shift(self):
        # shift=2 means the variable is X - 2; re-expressing both against the
        # largest shift leaves it as plain X and translates the other one up
        plain = default_grid_spec([exponential(1.0), exponential(1.0)])
        shifted = default_grid_spec([exponential(1.0, shift=2.0), exponential(1.0)])
        assert shifted.z_max == pytest.approx(plain.z_max + 2.0)
        assert shifted.y_max == pytest.approx(plain.y_max + 2.0)

    def test_wedge_row_bounds_bracket_the_wedge(self):
        spec = GridSpec(8.0, 4.0, 33, 17)
        lo, hi = wedge_row_bounds(spec, 2)
        z = spec.z_nodes()
        for j in range(1, spec.n_z):
            assert lo[j] * spec.h_y >= z[j] - 1e-9
            assert hi[j] * spec.h_y <= 2 * z[j] + 1e-9


class TestGridFunction:
    def test_eval_negative_coordinates_are_zero(self):
        g = cdf_recursive(EXP_PAIR, GridSpec(8.0, 4.0, 33, 33))
        assert g.eval(-0.5, 1.0) == 0.0
        assert g.eval(1.0, -0.5) == 0.0

    def test_eval_rejects_points_beyond_rectangle(self):
        g = cdf_recursive(EXP_PAIR, GridSpec(8.0, 4.0, 33, 33))
        with pytest.raises(GridError):
            g.eval(9.0, 1.0)
        with pytest.raises(GridError):
            g.eval(1.0, 5.0)

    def test_eval_clamp_uses_edge_value(self):
        g = cdf_recursive(EXP_PAIR, GridSpec(8.0, 4.0, 33, 33))
        assert g.eval(9.0, 5.0, clamp=True) == pytest.approx(g.eval(8.0, 4.0))

    def test_rejects_wrong_shape(self):
        spec = GridSpec(8.0, 4.0, 33, 33)
        with pytest.raises(GridError):
            GridFunction2D(spec, "cdf", 2, "fp", np.zeros((4, 4)))

    def test_rejects_unknown_kind(self):
        spec = GridSpec(8.0, 4.0, 33, 33)
        with pytest.raises(GridError):
            GridFunction2D(spec, "mass", 2, "fp", np.zeros((33, 33)))

    def test_json_round_trip_carries_spec_and_values(self):
        g = cdf_recursive(EXP_PAIR, GridSpec(8.0, 4.0, 17, 33))
        d = g.to_json_dict()
        assert d["spec"]["n_y"] == 17
        assert d["kind"] == "cdf"
        back = np.array(d["values"]).reshape(17, 33)
        np.testing.assert_array_equal(back, g.values)

    def test_csv_layout(self, tmp_path):
        g = cdf_recursive(EXP_PAIR, GridSpec(8.0, 4.0, 17, 17))
        path = tmp_path / "grid.csv"
        g.to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "y,z,value"
        assert len(lines) == 1 + 17 * 17


class TestCdfRecursive:
    def test_single_variable_is_its_own_law(self):
        g = cdf_recursive([exponential(1.0)], ALIGNED)
        assert g.eval(2.0, 1.0) == pytest.approx(1 - math.exp(-1), abs=1e-12)
        assert g.eval(0.5, 3.0) == pytest.approx(1 - math.exp(-0.5), abs=1e-12)

    def test_two_exponentials_box_point(self):
        # at (2, 1) the constraints decouple into X1 <= 1, X2 <= 1
        g = cdf_recursive(EXP_PAIR, ALIGNED)
        want = (1 - math.exp(-1)) * (1 - math.exp(-2))
        assert g.eval(2.0, 1.0) == pytest.approx(want, abs=1e-9)

    def test_matches_pointwise_quadrature(self):
        g = cdf_recursive(EXP_PAIR, ALIGNED)
        direct = cdf_direct_smalln(EXP_PAIR, 2.0, 1.0, 2001)
        assert abs(g.eval(2.0, 1.0) - direct) < 1e-4

    def test_zero_rows_and_columns(self):
        g = cdf_recursive(EXP_PAIR, GridSpec(8.0, 4.0, 65, 65))
        np.testing.assert_array_equal(g.values[0], 0.0)
        np.testing.assert_array_equal(g.values[:, 0], 0.0)

    def test_flat_once_max_cap_exceeds_sum_cap(self):
        # for z >= y the cap on the max is inactive, so every such column,
        # the node on the diagonal included, stores the same restriction
        spec = GridSpec(8.0, 8.0, 65, 65)
        g = cdf_recursive(EXP_PAIR, spec)
        z = spec.z_nodes()
        i = 24  # y = 3
        cols = np.where(z >= spec.y_nodes()[i])[0]
        assert z[cols[0]] == spec.y_nodes()[i]
        np.testing.assert_array_equal(g.values[i, cols], g.values[i, cols[0]])

    def test_product_form_when_sum_cap_inactive(self):
        spec = GridSpec(16.0, 8.0, 129, 129)
        g = cdf_recursive(EXP_PAIR, spec)
        y = spec.y_nodes()
        z = spec.z_nodes()
        for j in range(1, spec.n_z, 7):
            for i in range(spec.n_y - 1, -1, -16):
                if y[i] < 2 * z[j]:
                    continue
                want = (1 - math.exp(-z[j])) * (1 - math.exp(-2 * z[j]))
                assert abs(g.values[i, j] - want) < 5e-3

    def test_monotone_in_each_argument(self):
        g = cdf_recursive(EXP_PAIR, GridSpec(16.0, 8.0, 257, 257))
        # quadrature roundoff can produce adjacent steps of order -1e-15
        assert np.diff(g.values, axis=0).min() >= -1e-12
        assert np.diff(g.values, axis=1).min() >= -1e-12

    def test_values_stay_in_unit_interval(self):
        g = cdf_recursive(EXP_PAIR, GridSpec(16.0, 8.0, 65, 65))
        assert g.values.min() >= 0.0
        assert g.values.max() <= 1.0 + 1e-12

    def test_rejects_empty_model_list(self):
        with pytest.raises(EngineError):
            cdf_recursive([], ALIGNED)

    def test_rejects_discrete_models(self):
        with pytest.raises(EngineError):
            cdf_recursive([exponential(1.0), bernoulli(0.5)], ALIGNED)

    def test_positive_support_pair_matches_area(self):
        # two uniform(2, 3) variables: P(sum <= 4.8, max <= 2.5) is the area
        # of [2, 2.5]^2 under the line x1 + x2 = 4.8, which is 0.23
        g = cdf_recursive([uniform(2.0, 3.0), uniform(2.0, 3.0)],
                          GridSpec(6.0, 3.0, 513, 513))
        assert g.eval(4.8, 2.5) == pytest.approx(0.23, abs=5e-4)


class TestPdfBootstrap:
    def test_iid_exponential_value(self):
        g = pdf_bootstrap_g2([exponential(1.0), exponential(1.0)], ALIGNED)
        assert g.eval(2.0, 1.0) == pytest.approx(2 * math.exp(-2), abs=1e-12)

    def test_distinct_rates_value(self):
        g = pdf_bootstrap_g2(EXP_PAIR, ALIGNED)
        assert g.eval(2.0, 1.0) == pytest.approx(4 * math.exp(-3), abs=1e-12)

    def test_zero_outside_wedge(self):
        g = pdf_bootstrap_g2(EXP_PAIR, ALIGNED)
        assert g.eval(3.0, 1.0) == 0.0  # sum above twice the max
        assert g.eval(0.5, 1.0) == 0.0  # sum below the max

    def test_uniform_pair_is_flat_inside(self):
        spec = GridSpec(2.0, 1.0, 257, 257)
        g = pdf_bootstrap_g2([uniform(0.0, 1.0), uniform(0.0, 1.0)], spec)
        for (y, z) in [(0.75, 0.5), (1.2, 0.8), (0.4, 0.25)]:
            assert g.eval(y, z) == pytest.approx(2.0, abs=1e-9)

    def test_general_entry_reuses_bootstrap(self):
        a = pdf_bootstrap_g2(EXP_PAIR, ALIGNED)
        b = pdf_recursive(EXP_PAIR, ALIGNED)
        np.testing.assert_array_equal(a.values, b.values)

    def test_rejects_wrong_arity(self):
        with pytest.raises(EngineError):
            pdf_bootstrap_g2([exponential(1.0)], ALIGNED)


class TestPdfRecursive:
    def test_iid_route_equals_general_route(self):
        spec = GridSpec(12.0, 6.0, 257, 257)
        a = pdf_iid_recursive(exponential(1.0), 3, spec)
        b = pdf_recursive([exponential(1.0)] * 3, spec)
        np.testing.assert_allclose(a.values, b.values, atol=1e-9)

    def test_three_uniform_matches_mixed_difference(self):
        """Central second difference of the CDF reproduces the density."""
        spec = GridSpec(3.0, 1.0, 513, 513)
        models = [uniform(0.0, 1.0)] * 3
        gc = cdf_recursive(models, spec)
        gp = pdf_recursive(models, spec)
        h = 1e-2
        y0, z0 = 1.5, 0.75
        fd = (gc.eval(y0 + h, z0 + h) - gc.eval(y0 + h, z0 - h)
              - gc.eval(y0 - h, z0 + h) + gc.eval(y0 - h, z0 - h)) / (4 * h * h)
        assert abs(fd - gp.eval(y0, z0)) < 5e-2

    def test_mass_integrates_to_one(self):
        spec = GridSpec(24.0, 12.0, 417, 417)
        joint = pdf_iid_recursive(exponential(1.0), 3, spec)
        total = cdf_from_pdf(joint).values[-1, -1]
        assert total == pytest.approx(1.0, abs=5e-3)

    def test_keep_levels_exposes_every_stage(self):
        spec = GridSpec(8.0, 4.0, 33, 33)
        levels = pdf_iid_recursive(exponential(1.0), 4, spec, keep_levels=True)
        assert sorted(levels) == [2, 3, 4]
        boot = pdf_bootstrap_g2([exponential(1.0)] * 2, spec)
        np.testing.assert_array_equal(levels[2].values, boot.values)

    def test_tip_adjacent_nodes_carry_density(self):
        # nodes one cell in from the wedge tip have small support intervals
        # but order-one density; exact value for three unit exponentials
        spec = GridSpec(8.0, 8.0, 161, 161)
        g = pdf_iid_recursive(exponential(1.0), 3, spec)
        want = 6 * math.exp(-0.25) * 0.025
        assert g.values[5, 2] == pytest.approx(want, rel=1e-6)

    def test_rejects_single_variable(self):
        with pytest.raises(EngineError):
            pdf_recursive([exponential(1.0)], ALIGNED)
        with pytest.raises(EngineError):
            pdf_iid_recursive(exponential(1.0), 1, ALIGNED)


class TestCdfFromPdf:
    def test_round_trip_against_direct_cdf(self):
        spec = GridSpec(16.0, 8.0, 257, 257)
        via_density = cdf_from_pdf(pdf_recursive(EXP_PAIR, spec))
        direct = cdf_recursive(EXP_PAIR, spec)
        assert np.abs(via_density.values - direct.values).max() < 5e-3

    def test_output_clipped_to_unit_interval(self):
        spec = GridSpec(24.0, 12.0, 129, 129)
        g = cdf_from_pdf(pdf_iid_recursive(exponential(1.0), 2, spec))
        assert g.values.max() <= 1.0
        assert g.values.min() >= 0.0

    def test_rejects_cdf_input(self):
        g = cdf_recursive(EXP_PAIR, GridSpec(8.0, 4.0, 33, 33))
        with pytest.raises(GridError):
            cdf_from_pdf(g)


class TestDirectSmallN:
    def test_two_exponentials_box_point(self):
        want = (1 - math.exp(-1)) * (1 - math.exp(-2))
        got = cdf_direct_smalln(EXP_PAIR, 2.0, 1.0, 2001)
        assert got == pytest.approx(want, abs=1e-9)

    def test_uniform_triple_saturates(self):
        got = cdf_direct_smalln([uniform(0.0, 1.0)] * 3, 3.0, 1.0, 501)
        assert got == pytest.approx(1.0, abs=1e-6)

    def test_zero_caps_give_zero(self):
        assert cdf_direct_smalln(EXP_PAIR, 0.0, 1.0, 101) == 0.0
        assert cdf_direct_smalln(EXP_PAIR, 1.0, 0.0, 101) == 0.0

    def test_even_point_counts_are_promoted(self):
        a = cdf_direct_smalln(EXP_PAIR, 1.7, 0.9, 400)
        b = cdf_direct_smalln(EXP_PAIR, 1.7, 0.9, 401)
        assert a == b

    def test_arity_limits(self):
        with pytest.raises(EngineError):
            cdf_direct_smalln([exponential(1.0)], 1.0, 1.0, 101)
        with pytest.raises(EngineError):
            cdf_direct_smalln([exponential(1.0)] * 5, 1.0, 1.0, 101)

    def test_rejects_tiny_point_count(self):
        with pytest.raises(EngineError):
            cdf_direct_smalln(EXP_PAIR, 1.0, 1.0, 2)


class TestShifted:
    def test_zero_shift_matches_plain_engine(self):
        spec = GridSpec(16.0, 8.0, 129, 129)
        got = cdf_shifted(EXP_PAIR, spec, 2.0, 1.0)
        want = cdf_recursive(EXP_PAIR, spec).eval(2.0, 1.0)
        assert got == pytest.approx(want, abs=1e-12)

    def test_single_shifted_variable_is_analytic(self):
        got = cdf_shifted([exponential(1.0, shift=1.0)], None, 1.0, 0.5)
        assert got == pytest.approx(1 - math.exp(-1.5), abs=1e-12)

    def test_common_shift_translates_the_law(self):
        spec = GridSpec(16.0, 8.0, 513, 513)
        shifted = [exponential(1.0, shift=1.0), exponential(2.0, shift=1.0)]
        got = cdf_shifted(shifted, spec, 1.0, 0.5)
        want = cdf_recursive(EXP_PAIR, spec).eval(3.0, 1.5)
        assert got == pytest.approx(want, abs=1e-12)

    def test_unequal_shifts_match_hand_integral(self):
        spec = GridSpec(8.0, 4.0, 513, 513)
        models = [exponential(1.0, shift=1.0), exponential(1.0)]
        for (y, z) in [(1.2, 0.8), (205 * spec.h_y - 2.0, 231 * spec.h_z - 1.0)]:
            a, b, s = z + 1.0, z, y + 1.0  # caps on X1, X2 and their sum
            assert a < s < a + b
            want = ((1 - math.exp(-a)) * (1 - math.exp(-(s - a)))
                    + (math.exp(-(s - a)) - math.exp(-b))
                    - (b - (s - a)) * math.exp(-s))
            assert cdf_shifted(models, spec, y, z) == pytest.approx(want, abs=1e-4)

    def test_density_shift_is_pure_translation(self):
        spec = GridSpec(16.0, 8.0, 257, 257)
        shifted = [exponential(1.0, shift=1.0), exponential(1.0, shift=1.0)]
        got = pdf_shifted(shifted, spec, 0.5, 0.3)
        want = pdf_recursive([exponential(1.0)] * 2, spec).eval(2.5, 1.3)
        assert got == pytest.approx(want, abs=1e-12)

    def test_translated_query_outside_grid_raises(self):
        spec = GridSpec(8.0, 4.0, 33, 33)
        with pytest.raises(GridError):
            cdf_shifted([exponential(1.0, shift=3.0), exponential(1.0, shift=3.0)],
                        spec, 7.0, 3.0)


class TestMixed:
    def test_all_continuous_degenerates_to_grid_engine(self):
        spec = GridSpec(16.0, 8.0, 129, 129)
        a = cdf_mixed(EXP_PAIR, spec)
        b = cdf_recursive(EXP_PAIR, spec)
        np.testing.assert_allclose(a.values, b.values, atol=1e-9)

    def test_all_discrete_is_exact_on_integer_nodes(self):
        models = [bernoulli(0.6), uniform_int(0, 2)]
        spec = GridSpec(8.0, 4.0, 17, 17)  # integers land on nodes
        g = cdf_mixed(models, spec)
        for l in range(5):
            for m in range(4):
                want = cdf_recursive_discrete(models, l, m)
                assert g.eval(float(l), float(m)) == pytest.approx(want, abs=1e-9)

    def test_exponential_plus_bernoulli_closed_form(self):
        # P(X + B <= 2, max <= 1) = P(X <= 1) because both B values allow it
        models = [exponential(1.0), bernoulli(0.5)]
        spec = GridSpec(8.0, 4.0, 513, 513)
        got = cdf_mixed_at(models, 2.0, 1.0, spec)
        assert got == pytest.approx(1 - math.exp(-1), abs=1e-4)

    def test_fractional_caps_truncate_the_lattice_part(self):
        # below z = 1 only B = 0 contributes: G(y, z) = p0 * P(X <= min(y, z))
        models = [exponential(1.0), bernoulli(0.5)]
        spec = GridSpec(8.0, 4.0, 513, 513)
        got = cdf_mixed_at(models, 0.5, 0.5, spec)
        assert got == pytest.approx(0.5 * (1 - math.exp(-0.5)), abs=1e-4)

    def test_grid_and_pointwise_routes_agree_on_nodes(self):
        models = [exponential(1.0), bernoulli(0.5)]
        spec = GridSpec(8.0, 4.0, 129, 129)
        g = cdf_mixed(models, spec)
        got = g.eval(2.0, 1.0)
        assert got == pytest.approx(cdf_mixed_at(models, 2.0, 1.0, spec), abs=1e-3)
        assert got == pytest.approx(1 - math.exp(-1), abs=1e-6)


class TestPermutationInvariance:
    @settings(max_examples=10, deadline=None)
    @given(r1=st.floats(0.5, 3.0), r2=st.floats(0.5, 3.0))
    def test_cdf_grid_is_order_free(self, r1, r2):
        # small extent keeps the interpolation-free quadrature asymmetry
        # visible; it stays well under the engine's pointwise tolerance
        spec = GridSpec(0.75, 0.375, 257, 257)
        a = cdf_recursive([exponential(r1), exponential(r2)], spec)
        b = cdf_recursive([exponential(r2), exponential(r1)], spec)
        assert np.abs(a.values - b.values).max() < 1e-6

    def test_pdf_interior_is_order_free(self):
        """Quadrature order only differs along the wedge edges.

        Strictly inside the wedge the two orderings integrate the same
        smooth integrand and agree to roundoff; the one-sided cells touching
        the edges differ at O(h), which the edge mask excludes.
        """
        spec = GridSpec(0.75, 0.375, 257, 257)
        ms = [exponential(1.0), exponential(1.0), exponential(2.0)]
        a = pdf_recursive(ms, spec)
        b = pdf_recursive(list(reversed(ms)), spec)
        y = spec.y_nodes()[:, None]
        z = spec.z_nodes()[None, :]
        interior = (y >= 1.15 * z) & (y <= 2.85 * z) & (z >= 8 * spec.h_y)
        diff = np.abs(a.values - b.values)
        assert diff[interior].max() < 1e-12


class TestLevelRaisingIdentity:
    """Integrating level n over its max coordinate must rebuild level n+1's
    inner integral, node by node across the whole wedge."""

    def test_two_variable_level_is_exact(self):
        errs = level_identity_errors(exponential(1.0), 2, nodes=257)
        assert errs[2] < 1e-9

    def test_deeper_levels_hold_to_grid_accuracy(self):
        errs = level_identity_errors(exponential(1.0), 4, nodes=513)
        assert errs[2] < 1e-9
        assert errs[3] < 1e-3
        assert errs[4] < 1e-3
