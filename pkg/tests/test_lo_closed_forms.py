import math

import numpy as np
import pytest

from stepiem.angles import TWO_PI
from stepiem.iem import compute_params
from stepiem.lo_closed_forms import (chi2_lo,
                                     chi2_monotonicity, chi2_prime_lo,
                                     count_chi2_integer_crossings, edge_table,
                                     format_edge_table, h_step_lo, lo_params,
                                     lo_wall_phase, near_threshold_table,
                                     nosc_large_h, theta1_star, theta2_star,
                                     theta1_wall_prime_lo,
                                     theta2_wall_prime_in_e1_lo)
from stepiem.potentials import linear_oscillator
from stepiem.step_system import LevelSet, StepConfig
from stepiem.verify import random_lo_draw


class TestLoParams:
    def test_symmetric_example(self):
        p = lo_params(1.0, 1.0, -0.5, -0.5, 0.5, 1.0)
        assert abs(p.theta2_wall - 2 * math.pi / 3) < 1e-15
        assert abs(p.Theta2 - 4 * math.pi / 3) < 1e-15
        assert abs(p.chi2 - 0.5) < 1e-15
        assert p.K2 == 0

    def test_agrees_with_generic_path(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            om1, om2, q1w, q2w, e1, h = random_lo_draw(rng)
            closed = lo_params(om1, om2, q1w, q2w, e1, h)
            cfg = StepConfig(linear_oscillator(om1), linear_oscillator(om2),
                             q1w, q2w)
            generic = compute_params(cfg, LevelSet(e1, h))
            assert abs(closed.theta2_wall - generic.theta2_wall) < 1e-12
            assert abs(closed.Theta2 - generic.Theta2) < 1e-12
            assert abs(closed.chi2 - generic.chi2) < 1e-12

    def test_agrees_with_quadrature_path(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            om1, om2, q1w, q2w, e1, h = random_lo_draw(rng)
            closed = lo_params(om1, om2, q1w, q2w, e1, h)
            cfg = StepConfig(linear_oscillator(om1), linear_oscillator(om2),
                             q1w, q2w)
            quad = compute_params(cfg, LevelSet(e1, h), use_quadrature=True)
            for a, b in ((closed.theta2_wall, quad.theta2_wall),
                         (closed.Theta2, quad.Theta2),
                         (closed.chi2, quad.chi2)):
                assert abs(a - b) < 1e-12 * max(1.0, abs(a))

    def test_theta2_goes_to_zero_at_lower_edge_positive_wall(self):
        # Theta2 -> 0 as e1 drops to the wall energy with q1_wall > 0
        h1s = 0.5 * 0.6 ** 2
        p = lo_params(1.0, 1.0, 0.6, -0.5, h1s * (1 + 1e-12), 1.0)
        assert p.Theta2 < 1e-5

    def test_outside_family_rejected(self):
        with pytest.raises(ValueError):
            lo_params(1.0, 1.0, -0.5, -0.5, 0.05, 1.0)
        with pytest.raises(ValueError):
            lo_wall_phase(1.0, -0.5, 0.01)

    def test_high_energy_wall_phase_limit(self):
        h = 1e8
        assert abs(lo_wall_phase(1.0, -0.5, h) - math.pi / 2) < 1e-3


class TestDerivatives:
    def test_chi2_prime_matches_finite_differences(self):
        om1, om2, q1w, q2w, h = 1.0, 1.4, -0.5, -0.6, 2.0
        h1s = 0.5 * (om1 * q1w) ** 2
        h2s = 0.5 * (om2 * q2w) ** 2
        for e1 in np.linspace(h1s * 1.3, h - h2s * 1.3, 17):
            e1 = float(e1)
            d = 1e-6
            fd = (chi2_lo(om1, om2, q1w, q2w, e1 + d, h)
                  - chi2_lo(om1, om2, q1w, q2w, e1 - d, h)) / (2 * d)
            an = chi2_prime_lo(om1, om2, q1w, q2w, e1, h)
            assert abs(fd - an) < 1e-7 * max(1.0, abs(an))

    def test_arm_width_monotonicity(self):
        # dtheta1/de1 has the sign of q1_wall, dtheta2/de1 the sign of -q2_wall
        for q1w, q2w in ((-0.5, -0.4), (-0.5, 0.4), (0.5, -0.4), (0.5, 0.4)):
            e1, h = 0.6, 1.4
            d1 = theta1_wall_prime_lo(1.1, q1w, e1)
            d2 = theta2_wall_prime_in_e1_lo(0.9, q2w, e1, h)
            assert math.copysign(1, d1) == math.copysign(1, q1w)
            assert math.copysign(1, d2) == -math.copysign(1, q2w)
            # finite differences on the wall phases themselves
            d = 1e-7
            fd1 = (lo_wall_phase(1.1, q1w, e1 + d)
                   - lo_wall_phase(1.1, q1w, e1 - d)) / (2 * d)
            fd2 = (lo_wall_phase(0.9, q2w, h - e1 - d)
                   - lo_wall_phase(0.9, q2w, h - e1 + d)) / (2 * d)
            assert abs(fd1 - d1) < 1e-6
            assert abs(fd2 - d2) < 1e-6
            # opposite monotonicity exactly when the walls share a sign
            assert (d1 * d2 < 0) == (q1w * q2w > 0)


class TestMonotonicity:
    def test_opposite_signs_monotone(self):
        rep = chi2_monotonicity(1.0, 1.3, -0.5, 0.4, 2.0)
        assert rep.monotone and rep.bracket is None

    def test_same_signs_non_monotone_with_bracket(self):
        rep = chi2_monotonicity(1.0, 1.3, -0.5, -0.4, 2.0)
        assert not rep.monotone
        a, b = rep.bracket
        assert chi2_prime_lo(1.0, 1.3, -0.5, -0.4, a, 2.0) \
            * chi2_prime_lo(1.0, 1.3, -0.5, -0.4, b, 2.0) < 0
        assert a < rep.derivative_root < b


class TestEdgeTable:
    @pytest.mark.parametrize("q1s,q2s", [(-1, -1), (-1, 1), (1, -1), (1, 1)])
    def test_edges_match_symbolic_entries(self, q1s, q2s):
        om1, om2, a1, a2, h = 1.0, 1.3, 0.5, 0.4, 2.0
        q1w, q2w = q1s * a1, q2s * a2
        r = om2 / om1
        t1s = theta1_star(om1, om2, q1w, q2w, h)
        t2s = theta2_star(om1, om2, q1w, q2w, h)
        tab = edge_table(om1, om2, q1w, q2w, h)
        # wall-phase edge values
        assert tab.theta1_wall_edges[0] == (math.pi if q1w < 0 else 0.0)
        assert tab.theta2_wall_edges[1] == (math.pi if q2w < 0 else 0.0)
        assert abs(tab.theta1_wall_edges[1] - t1s) < 1e-14
        assert abs(tab.theta2_wall_edges[0] - t2s) < 1e-14
        # Theta2 edge values
        expect_lo = TWO_PI * r if q1w < 0 else 0.0
        assert abs(tab.Theta2_edges[0] - expect_lo) < 1e-14
        assert abs(tab.Theta2_edges[1] - 2 * r * t1s) < 1e-14
        # chi2 edge values
        if q1w < 0:
            assert tab.chi2_edges[0] == 0.0
        else:
            assert abs(tab.chi2_edges[0] - r * math.pi / t2s) < 1e-14
        if q2w < 0:
            assert abs(tab.chi2_edges[1] - r * (1 - t1s / math.pi)) < 1e-14
        else:
            assert math.isinf(tab.chi2_edges[1])

    def test_edges_are_limits_of_lo_params(self):
        om1, om2, q1w, q2w, h = 1.0, 1.3, -0.5, -0.4, 2.0
        tab = edge_table(om1, om2, q1w, q2w, h)
        h1s = 0.5 * (om1 * q1w) ** 2
        h2s = 0.5 * (om2 * q2w) ** 2
        eps = 1e-11
        near_lo = lo_params(om1, om2, q1w, q2w, h1s * (1 + eps), h)
        near_hi = lo_params(om1, om2, q1w, q2w, h - h2s * (1 + eps), h)
        assert abs(near_lo.Theta2 - tab.Theta2_edges[0]) < 1e-4
        assert abs(near_lo.chi2 - tab.chi2_edges[0]) < 1e-4
        assert abs(near_hi.Theta2 - tab.Theta2_edges[1]) < 1e-4
        assert abs(near_hi.chi2 - tab.chi2_edges[1]) < 1e-4

    def test_format_renders_all_quadrants(self):
        tabs = [edge_table(1.0, 1.3, s1 * 0.5, s2 * 0.4, 2.0)
                for s1 in (-1, 1) for s2 in (-1, 1)]
        text = format_edge_table(tabs)
        assert "inf" in text and "(-,-)" in text and "(+,+)" in text


class TestCrossings:
    def test_divergent_case_infinite_marker(self):
        rep = count_chi2_integer_crossings(1.0, 1.0, -0.5, 0.6, 1.2)
        assert math.isinf(rep.count)
        assert len(rep.crossings) >= 3
        for n, e1 in rep.crossings:
            assert abs(chi2_lo(1.0, 1.0, -0.5, 0.6, e1, 1.2) - n) < 1e-9

    def test_crossings_accumulate_at_divergent_edge(self):
        rep = count_chi2_integer_crossings(1.0, 1.0, -0.5, 0.6, 1.2,
                                           max_roots=12)
        es = [e for _, e in rep.crossings]
        assert es == sorted(es)
        gaps = np.diff(es)
        assert gaps[-1] < gaps[0]  # accumulation toward the edge

    def test_monotone_quadrant_counts(self):
        # (+,-) quadrant: chi2 decreases across (r/2, 2r); every integer
        # strictly inside is crossed exactly once
        om1, om2 = 1.0, 3.0
        q1w, q2w = 0.5, -0.5
        h = 100.0 * h_step_lo(om1, om2, q1w, q2w)
        rep = count_chi2_integer_crossings(om1, om2, q1w, q2w, h)
        assert rep.count == 4  # integers 2..5 inside (1.53, 5.66)
        assert rep.bound_kind == "eq" and rep.bound_value == 4

    def test_sigma2_section_swaps_roles(self):
        rep = count_chi2_integer_crossings(1.0, 1.0, 0.6, -0.5, 1.2,
                                           section="sigma2")
        assert rep.axis == "e2"
        assert math.isinf(rep.count)  # swapped q2_wall > 0

    def test_nosc_bounds_table(self):
        assert nosc_large_h(1.0, 5.0, -0.5, -0.5) == ("geq", 2)
        assert nosc_large_h(1.0, 2.0, -0.5, 0.5) == ("inf", None)
        assert nosc_large_h(1.0, 2.0, 0.5, -0.5) == ("eq", 3)
        assert nosc_large_h(1.0, 2.0, 0.5, 0.5) == ("inf", None)


class TestNearThreshold:
    @pytest.mark.parametrize("q1s,q2s", [(-1, -1), (-1, 1), (1, -1), (1, 1)])
    def test_sqrt_eta_asymptotics_converge(self, q1s, q2s):
        om1, om2, a1, a2 = 1.0, 1.3, 0.5, 0.4
        q1w, q2w = q1s * a1, q2s * a2
        hs = h_step_lo(om1, om2, q1w, q2w)
        first, last = None, None
        for k, eta in enumerate(hs * 10.0 ** np.linspace(-3, -4, 5)):
            row = near_threshold_table(om1, om2, q1w, q2w, float(eta))
            devs = [abs(r - 1.0) for r in row.ratios.values()]
            if k == 0:
                first = max(devs)
            last = max(devs)
        assert last < 0.1
        assert last <= first

    def test_exact_prefactor_rows(self):
        # (-,-): chi2 upper edge ~ (om2/(pi om1)) sqrt(eta/h1_step)
        om1, om2, q1w, q2w = 1.0, 1.3, -0.5, -0.4
        h1s = 0.5 * (om1 * q1w) ** 2
        eta = 1e-6 * h1s
        row = near_threshold_table(om1, om2, q1w, q2w, eta)
        pred = (om2 / (math.pi * om1)) * math.sqrt(eta / h1s)
        assert abs(row.exact["chi2_upper"] / pred - 1.0) < 1e-2
        # (+,+): chi2 lower edge ~ (pi om2/om1) sqrt(h2_step/eta)
        q1w, q2w = 0.5, 0.4
        h2s = 0.5 * (om2 * q2w) ** 2
        hs = h_step_lo(om1, om2, q1w, q2w)
        eta = 1e-6 * hs
        row = near_threshold_table(om1, om2, q1w, q2w, eta)
        pred = (math.pi * om2 / om1) * math.sqrt(h2s / eta)
        assert abs(row.exact["chi2_lower"] / pred - 1.0) < 1e-2
