"""One-degree-of-freedom concave potentials and their oscillator quantities.

A ``Potential1D`` describes a single-well potential with V(0) = 0 and
q*V'(q) > 0 away from the origin, so every positive energy e gives a closed
orbit between two turning points.  All derived quantities (period, partial
period up to a wall, action, angle of a phase-space point) reduce to
integrals of 1/sqrt(2(e - V(q))) which are singular like an inverse square
root at the turning points.  The singularity is removed exactly by the
substitution q = q_turn -/+ s**2, after which scipy's adaptive quadrature
converges to near machine accuracy.

Linear oscillators carry closed forms for everything; the quadrature path is
kept available behind ``use_quadrature=True`` for cross-validation.

Angle convention: theta = 0 at the rightmost turning point (p = 0, pdot < 0),
theta in (0, pi) where p < 0, theta in (-pi, 0) where p > 0, canonical
representative in [-pi, pi).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

from scipy.integrate import quad
from scipy.optimize import brentq

from .angles import TWO_PI, wrap

QUAD_EPSABS = 1e-12
QUAD_EPSREL = 1e-12
QUAD_LIMIT = 200
# accept quad results whose reported error is within a small factor of target
_QUAD_ERR_SLACK = 100.0


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""


class EnergyShellError(ValueError):
    """A phase-space point is off the requested energy shell."""


@dataclass(frozen=True)
class Potential1D:
    """Analytic single-well potential.

    ``omega0`` is set only for the linear-oscillator kind and switches every
    operation to its closed form.
    """

    label: str
    v: Callable[[float], float]
    dv: Callable[[float], float]
    omega0: Optional[float] = None

    @property
    def is_lo(self) -> bool:
        return self.omega0 is not None

    def validate_concavity(self, q_lo: float, q_hi: float, n: int = 201) -> None:
        """Sample q*V'(q) > 0 and V(0) = 0 on [q_lo, q_hi]; raise on violation."""
        if abs(self.v(0.0)) > 1e-12:
            raise ValueError(f"{self.label}: V(0) must vanish")
        for k in range(n):
            q = q_lo + (q_hi - q_lo) * k / (n - 1)
            if abs(q) > 1e-9 and q * self.dv(q) <= 0.0:
                raise ValueError(f"{self.label}: q*V'(q) <= 0 at q={q}")


@dataclass(frozen=True)
class _QuadraticV:
    omega: float

    def __call__(self, q: float) -> float:
        return 0.5 * self.omega * self.omega * q * q


@dataclass(frozen=True)
class _QuadraticDV:
    omega: float

    def __call__(self, q: float) -> float:
        return self.omega * self.omega * q


@dataclass(frozen=True)
class _QuarticV:
    a: float

    def __call__(self, q: float) -> float:
        return 0.25 * self.a * q ** 4


@dataclass(frozen=True)
class _QuarticDV:
    a: float

    def __call__(self, q: float) -> float:
        return self.a * q ** 3


def linear_oscillator(omega: float) -> Potential1D:
    if omega <= 0.0:
        raise ValueError("omega must be positive")
    return Potential1D(label=f"lo(omega={omega:g})", v=_QuadraticV(omega),
                       dv=_QuadraticDV(omega), omega0=omega)


def quartic(a: float) -> Potential1D:
    """V(q) = a q^4 / 4, the shipped analytic nonlinear family."""
    if a <= 0.0:
        raise ValueError("a must be positive")
    return Potential1D(label=f"quartic(a={a:g})", v=_QuarticV(a), dv=_QuarticDV(a))


def from_callables(v: Callable[[float], float], dv: Callable[[float], float],
                   label: str = "custom") -> Potential1D:
    """Register an additional analytic single-well family."""
    return Potential1D(label=label, v=v, dv=dv)


@dataclass(frozen=True)
class OscillatorData:
    """Turning points, period, action and frequency at one energy."""

    e: float
    q_min: float
    q_max: float
    T: float
    I: float
    omega: float


@dataclass(frozen=True)
class WallPhaseData:
    """Partial period up to a wall and the corresponding angle phase."""

    e: float
    q_wall: float
    T_tilde: float
    theta_wall: float


def _quad(f, a: float, b: float) -> float:
    # full_output suppresses the warning machinery; convergence is judged by
    # the reported error estimate, so a subdivision-cap overflow is an error
    # while a roundoff-limited result within tolerance is accepted
    out = quad(f, a, b, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL,
               limit=QUAD_LIMIT, full_output=1)
    val, err = out[0], out[1]
    if err > _QUAD_ERR_SLACK * max(QUAD_EPSABS, QUAD_EPSREL * abs(val)):
        msg = out[3] if len(out) > 3 else "error estimate above tolerance"
        raise QuadratureError(f"{msg} (estimate {err:g})")
    return val


def _expand_bracket(f, x0: float, direction: float) -> float:
    """Grow x geometrically until f changes sign; returns the far end."""
    x = x0
    for _ in range(200):
        if f(x) > 0.0:
            return x
        x *= 2.0
    raise QuadratureError("failed to bracket turning point")


@lru_cache(maxsize=16384)
def _turning_points_quad(pot: Potential1D, e: float) -> tuple[float, float]:
    g = lambda q: pot.v(q) - e
    hi = _expand_bracket(g, 1.0, +1.0)
    lo = -_expand_bracket(lambda q: pot.v(-q) - e, 1.0, +1.0)
    q_max = brentq(g, 0.0, hi, xtol=1e-15, rtol=8.9e-16)
    q_min = brentq(g, lo, 0.0, xtol=1e-15, rtol=8.9e-16)
    return q_min, q_max


def turning_points(pot: Potential1D, e: float) -> tuple[float, float]:
    """Solve V(q) = e on both sides of the well."""
    if e <= 0.0:
        raise ValueError("energy must be positive")
    if pot.is_lo:
        q = math.sqrt(2.0 * e) / pot.omega0
        return -q, q
    return _turning_points_quad(pot, e)


def _time_integral(pot: Potential1D, e: float, q_lo: float, q_hi: float,
                   q_turn: float, turn_side: str) -> float:
    """integral of dq / sqrt(2(e - V)) over [q_lo, q_hi].

    ``q_turn`` is the turning point adjacent to the singular end (``turn_side``
    'hi' means q_hi is at or near q_max, 'lo' means q_lo is at q_min).  The
    substitution distance-to-turn = s**2 makes the integrand smooth.
    """
    if turn_side == "hi":
        s_lo = math.sqrt(max(q_turn - q_hi, 0.0))
        s_hi = math.sqrt(q_turn - q_lo)
    else:
        s_lo = math.sqrt(max(q_lo - q_turn, 0.0))
        s_hi = math.sqrt(q_hi - q_turn)

    def f(s: float) -> float:
        q = q_turn - s * s if turn_side == "hi" else q_turn + s * s
        d = 2.0 * (e - pot.v(q))
        if d <= 0.0:
            # roundoff at the turning point: the true integrand limit is finite
            slope = abs(pot.dv(q_turn))
            return 2.0 / math.sqrt(2.0 * slope) if slope > 0.0 else 0.0
        return 2.0 * s / math.sqrt(d)

    return _quad(f, s_lo, s_hi)


def _time_from_max(pot: Potential1D, e: float, q: float) -> float:
    """Travel time from q_max to q along the p < 0 branch."""
    q_min, q_max = turning_points(pot, e)
    q = min(max(q, q_min), q_max)
    mid = 0.5 * (q_min + q_max)
    if q >= mid:
        return _time_integral(pot, e, q, q_max, q_max, "hi")
    upper = _time_integral(pot, e, mid, q_max, q_max, "hi")
    lower = _time_integral(pot, e, q, mid, q_min, "lo")
    return upper + lower


@lru_cache(maxsize=16384)
def _period_quad(pot: Potential1D, e: float) -> float:
    return 2.0 * _time_from_max(pot, e, turning_points(pot, e)[0])


def period(pot: Potential1D, e: float, *, use_quadrature: bool = False) -> float:
    """Full oscillation period T(e)."""
    if e <= 0.0:
        raise ValueError("energy must be positive")
    if pot.is_lo and not use_quadrature:
        return TWO_PI / pot.omega0
    return _period_quad(pot, e)


def partial_period(pot: Potential1D, e: float, q_wall: float, *,
                   use_quadrature: bool = False) -> float:
    """Period of the one-sided system reflected off a wall at q_wall.

    Equals 2 * (time from the wall up to q_max and back), so it vanishes as
    q_wall approaches q_max and tends to T(e) as q_wall approaches q_min.
    """
    if e <= pot.v(q_wall):
        raise ValueError("wall outside the oscillation range (e <= V(q_wall))")
    if pot.is_lo and not use_quadrature:
        x = pot.omega0 * q_wall / math.sqrt(2.0 * e)
        return 2.0 / pot.omega0 * math.acos(x)
    return 2.0 * _time_from_max(pot, e, q_wall)


def wall_phase(pot: Potential1D, e: float, q_wall: float, *,
               use_quadrature: bool = False) -> float:
    """Angle phase at which the orbit meets the wall: pi * T_tilde / T, in (0, pi)."""
    if pot.is_lo and not use_quadrature:
        x = pot.omega0 * q_wall / math.sqrt(2.0 * e)
        if abs(x) > 1.0:
            raise ValueError("wall outside the oscillation range")
        return math.acos(x)
    t_tilde = partial_period(pot, e, q_wall, use_quadrature=use_quadrature)
    return math.pi * t_tilde / period(pot, e, use_quadrature=use_quadrature)


def wall_phase_data(pot: Potential1D, e: float, q_wall: float, *,
                    use_quadrature: bool = False) -> WallPhaseData:
    t_tilde = partial_period(pot, e, q_wall, use_quadrature=use_quadrature)
    t = period(pot, e, use_quadrature=use_quadrature)
    return WallPhaseData(e=e, q_wall=q_wall, T_tilde=t_tilde,
                         theta_wall=math.pi * t_tilde / t)


@lru_cache(maxsize=16384)
def _action_quad(pot: Potential1D, e: float) -> float:
    q_min, q_max = turning_points(pot, e)
    mid = 0.5 * (q_min + q_max)

    def make(side: str, q_turn: float):
        def f(s: float) -> float:
            q = q_turn - s * s if side == "hi" else q_turn + s * s
            d = 2.0 * (e - pot.v(q))
            return 2.0 * s * math.sqrt(max(d, 0.0))
        return f

    upper = _quad(make("hi", q_max), 0.0, math.sqrt(q_max - mid))
    lower = _quad(make("lo", q_min), 0.0, math.sqrt(mid - q_min))
    return (upper + lower) / math.pi


def action_and_frequency(pot: Potential1D, e: float, *,
                         use_quadrature: bool = False) -> tuple[float, float]:
    """Action I(e) = (1/pi) * integral of sqrt(2(e - V)) dq, and omega = 2 pi / T."""
    if e == 0.0:
        return 0.0, (pot.omega0 if pot.is_lo else float("nan"))
    if pot.is_lo and not use_quadrature:
        return e / pot.omega0, pot.omega0
    return _action_quad(pot, e), TWO_PI / period(pot, e, use_quadrature=True)


def oscillator_data(pot: Potential1D, e: float, *,
                    use_quadrature: bool = False) -> OscillatorData:
    q_min, q_max = turning_points(pot, e)
    t = period(pot, e, use_quadrature=use_quadrature)
    act, om = action_and_frequency(pot, e, use_quadrature=use_quadrature)
    return OscillatorData(e=e, q_min=q_min, q_max=q_max, T=t, I=act, omega=om)


def angle_of_state(pot: Potential1D, e: float, q: float, p: float, *,
                   shell_tol: float = 1e-8, use_quadrature: bool = False) -> float:
    """Angle coordinate of (q, p) on the shell p^2/2 + V(q) = e, in [-pi, pi)."""
    if abs(0.5 * p * p + pot.v(q) - e) > shell_tol * max(abs(e), 1.0):
        raise EnergyShellError("state off the energy shell")
    if pot.is_lo and not use_quadrature:
        return wrap(math.atan2(-p / pot.omega0, q))
    q_min, q_max = turning_points(pot, e)
    if p == 0.0:
        # closer turning point decides between 0 and -pi
        return 0.0 if abs(q - q_max) <= abs(q - q_min) else -math.pi
    omega = TWO_PI / period(pot, e, use_quadrature=True)
    t = _time_from_max(pot, e, q)
    theta = omega * t
    return wrap(theta if p < 0.0 else -theta)


def state_of_angle(pot: Potential1D, e: float, theta: float, *,
                   use_quadrature: bool = False) -> tuple[float, float]:
    """Inverse of ``angle_of_state`` on the energy shell."""
    if e <= 0.0:
        raise ValueError("energy must be positive")
    theta = wrap(theta)
    if pot.is_lo and not use_quadrature:
        amp = math.sqrt(2.0 * e)
        return amp / pot.omega0 * math.cos(theta), -amp * math.sin(theta)
    q_min, q_max = turning_points(pot, e)
    if theta == 0.0:
        return q_max, 0.0
    omega = TWO_PI / period(pot, e, use_quadrature=True)
    tau = abs(theta) / omega
    g = lambda q: _time_from_max(pot, e, q) - tau
    q = brentq(g, q_min, q_max, xtol=1e-14, rtol=8.9e-16)
    p = math.sqrt(max(2.0 * (e - pot.v(q)), 0.0))
    return q, (-p if theta > 0.0 else p)
