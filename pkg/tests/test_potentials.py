import math

import numpy as np
import pytest

from stepiem.angles import TWO_PI, circle_dist
from stepiem.potentials import (EnergyShellError,
                                action_and_frequency, angle_of_state,
                                from_callables, linear_oscillator,
                                oscillator_data, partial_period, period,
                                quartic, state_of_angle, turning_points,
                                wall_phase)


def bisect_turning(v, e, lo, hi, n=200):
    # independent oracle: plain bisection on V(q) - e
    for _ in range(n):
        mid = 0.5 * (lo + hi)
        if v(mid) < e:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


class TestTurningPoints:
    def test_lo_closed_form(self):
        assert turning_points(linear_oscillator(1.0), 0.5) == (-1.0, 1.0)
        qmin, qmax = turning_points(linear_oscillator(2.0), 2.0)
        assert abs(qmin + 1.0) < 1e-14 and abs(qmax - 1.0) < 1e-14

    def test_quartic_against_bisection(self):
        pot = quartic(4.0)  # V = q^4
        qmin, qmax = turning_points(pot, 1.0)
        ref = bisect_turning(pot.v, 1.0, 0.0, 10.0)
        assert abs(qmax - ref) < 1e-12
        assert abs(qmax - 1.0) < 1e-12 and abs(qmin + 1.0) < 1e-12
        assert abs(pot.v(qmin) - 1.0) < 1e-12 and abs(pot.v(qmax) - 1.0) < 1e-12

    def test_nesting(self):
        for pot in (linear_oscillator(1.3), quartic(0.7)):
            es = np.logspace(-2, 2, 25)
            qmins, qmaxs = zip(*(turning_points(pot, float(e)) for e in es))
            assert all(b > a for a, b in zip(qmaxs, qmaxs[1:]))
            assert all(b < a for a, b in zip(qmins, qmins[1:]))

    def test_nonpositive_energy_rejected(self):
        with pytest.raises(ValueError):
            turning_points(linear_oscillator(1.0), 0.0)


class TestPeriod:
    def test_lo_energy_independent(self):
        pot = linear_oscillator(3.0)
        for e in (0.01, 0.125, 1.0, 50.0):
            assert abs(period(pot, e) - TWO_PI / 3.0) < 1e-15
            assert abs(period(pot, e, use_quadrature=True) - TWO_PI / 3.0) < 1e-12

    def test_quartic_scaling(self):
        # V = a q^4/4 has T proportional to e^(-1/4)
        pot = quartic(1.0)
        assert abs(period(pot, 16.0) - 0.5 * period(pot, 1.0)) < 1e-10


class TestPartialPeriod:
    def test_half_period_at_origin(self):
        pot = linear_oscillator(1.0)
        for e in (0.1, 1.0, 7.5):
            assert abs(partial_period(pot, e, 0.0) - math.pi) < 1e-13

    def test_lo_closed_form_value(self):
        # wall at -0.5, e = 0.5: 2*arccos(-0.5) = 4*pi/3
        pot = linear_oscillator(1.0)
        assert abs(partial_period(pot, 0.5, -0.5) - 4.0 * math.pi / 3.0) < 1e-13
        assert abs(partial_period(pot, 0.5, -0.5, use_quadrature=True)
                   - 4.0 * math.pi / 3.0) < 1e-11

    def test_vanishes_at_turning_point(self):
        pot = linear_oscillator(1.0)
        e = 0.5
        q_wall = math.sqrt(2 * e) * (1 - 1e-10)
        assert partial_period(pot, e, q_wall) < 1e-4

    def test_wall_outside_range_rejected(self):
        with pytest.raises(ValueError):
            partial_period(linear_oscillator(1.0), 0.1, 2.0)


class TestWallPhase:
    def test_lo_value(self):
        pot = linear_oscillator(1.0)
        assert abs(wall_phase(pot, 0.5, -0.5) - math.acos(-0.5)) < 1e-14

    def test_limits_at_wall_energy(self):
        pot = linear_oscillator(1.0)
        e_wall = 0.125  # V(+-0.5)
        assert wall_phase(pot, e_wall * (1 + 1e-12), -0.5) > math.pi - 1e-5
        assert wall_phase(pot, e_wall * (1 + 1e-12), +0.5) < 1e-5

    def test_symmetric_high_energy_limit(self):
        # symmetric potentials approach pi/2; the quartic rate is only e^(-1/4)
        for pot in (linear_oscillator(1.0), quartic(2.0)):
            devs = [abs(wall_phase(pot, e, 0.4) - math.pi / 2)
                    for e in (1e2, 1e4, 1e6, 1e8)]
            assert all(b < a for a, b in zip(devs, devs[1:]))
            assert devs[-1] < 2e-2

    def test_two_paths_agree(self):
        pot = quartic(1.5)
        for e in np.logspace(-1, 2, 7):
            t_tilde = partial_period(pot, float(e), -0.3)
            t = period(pot, float(e))
            assert abs(wall_phase(pot, float(e), -0.3)
                       - math.pi * t_tilde / t) < 1e-10


class TestAction:
    def test_lo_value(self):
        act, om = action_and_frequency(linear_oscillator(2.0), 1.0)
        assert abs(act - 0.5) < 1e-15 and om == 2.0
        act_q, om_q = action_and_frequency(linear_oscillator(2.0), 1.0,
                                           use_quadrature=True)
        assert abs(act_q - 0.5) < 1e-11 and abs(om_q - 2.0) < 1e-11

    def test_zero_energy(self):
        assert action_and_frequency(linear_oscillator(1.0), 0.0)[0] == 0.0

    def test_didE_is_inverse_frequency(self):
        pot = quartic(1.0)
        for e in (0.5, 1.0, 4.0):
            d = 1e-6 * e
            ip, _ = action_and_frequency(pot, e + d)
            im, _ = action_and_frequency(pot, e - d)
            _, om = action_and_frequency(pot, e)
            assert abs((ip - im) / (2 * d) - 1.0 / om) < 1e-7 / om


class TestAngleChart:
    def test_convention_points(self):
        pot = linear_oscillator(1.0)
        qmin, qmax = turning_points(pot, 0.5)
        assert angle_of_state(pot, 0.5, qmax, 0.0) == 0.0
        assert angle_of_state(pot, 0.5, qmin, 0.0) == -math.pi
        assert abs(angle_of_state(pot, 0.5, 0.0, -1.0) - math.pi / 2) < 1e-14

    def test_sign_convention(self):
        # negative momentum on (0, pi), positive on (-pi, 0)
        for pot in (linear_oscillator(1.4), quartic(1.0)):
            e = 0.8
            for th in (0.3, 1.2, 2.9):
                q, p = state_of_angle(pot, e, th)
                assert p < 0.0
                q, p = state_of_angle(pot, e, -th)
                assert p > 0.0

    def test_state_of_angle_examples(self):
        pot = linear_oscillator(1.0)
        q, p = state_of_angle(pot, 0.5, 0.0)
        assert abs(q - 1.0) < 1e-14 and p == 0.0
        q, p = state_of_angle(pot, 0.5, math.pi / 2)
        assert abs(q) < 1e-14 and abs(p + 1.0) < 1e-14

    @pytest.mark.parametrize("pot", [linear_oscillator(1.7), quartic(2.3)])
    def test_round_trip(self, pot):
        e = 0.9
        for th in np.linspace(-math.pi, math.pi, 64, endpoint=False):
            q, p = state_of_angle(pot, e, float(th))
            assert abs(0.5 * p * p + pot.v(q) - e) < 1e-10 * max(e, 1.0)
            back = angle_of_state(pot, e, q, p)
            assert circle_dist(back, float(th)) < 1e-9

    def test_off_shell_rejected(self):
        with pytest.raises(EnergyShellError):
            angle_of_state(linear_oscillator(1.0), 0.5, 1.0, 1.0)


class TestLoQuadratureCrossCheck:
    def test_closed_forms_match_quadrature(self):
        pot = linear_oscillator(1.6)
        q_wall = -0.25  # wall energy 0.08, below the whole energy grid
        for e in np.logspace(-1, 1.5, 6):
            e = float(e)
            assert abs(period(pot, e, use_quadrature=True)
                       - TWO_PI / 1.6) < 1e-10
            assert abs(partial_period(pot, e, q_wall, use_quadrature=True)
                       - partial_period(pot, e, q_wall)) < 1e-10
            assert abs(wall_phase(pot, e, q_wall, use_quadrature=True)
                       - wall_phase(pot, e, q_wall)) < 1e-10
            act_q, _ = action_and_frequency(pot, e, use_quadrature=True)
            assert abs(act_q - e / 1.6) < 1e-10 * max(1.0, e)


class TestValidation:
    def test_concavity_check_accepts_single_well(self):
        quartic(1.0).validate_concavity(-3.0, 3.0)
        linear_oscillator(2.0).validate_concavity(-5.0, 5.0)

    def test_concavity_check_rejects_double_well(self):
        pot = from_callables(lambda q: q ** 4 - q ** 2,
                             lambda q: 4 * q ** 3 - 2 * q, label="double-well")
        with pytest.raises(ValueError):
            pot.validate_concavity(-1.0, 1.0)

    def test_oscillator_data_consistency(self):
        data = oscillator_data(quartic(1.0), 2.0)
        assert data.q_min < 0.0 < data.q_max
        assert abs(data.omega * data.T - TWO_PI) < 1e-12
        assert data.I > 0.0
