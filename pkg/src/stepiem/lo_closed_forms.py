"""Closed forms for the linear-oscillator step system.

With V_i = omega_i^2 q^2 / 2 every return-map quantity is elementary:

    theta_i_wall(e) = arccos(omega_i q_i_wall / sqrt(2 e))
    Theta2(e1)      = 2 (omega2/omega1) * theta1_wall(e1)
    chi2(e1, h)     = (omega2/omega1) * (pi - theta1_wall(e1)) / theta2_wall(h - e1)

This module also evaluates the step-region edge values of these functions,
their monotonicity (chi2 is monotone in e1 exactly when the walls sit on
opposite sides of the origin), the count of level sets where chi2 crosses an
integer (where the circle exchange degenerates to a rotation), and the
small-eta asymptotics of the edge values just above the step energy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from scipy.optimize import brentq

from .angles import TWO_PI
from .iem import ReturnMapParams
from .step_system import RegionTag

INF = math.inf


def h_step_lo(omega1: float, omega2: float, q1_wall: float, q2_wall: float) -> float:
    return 0.5 * ((omega1 * q1_wall) ** 2 + (omega2 * q2_wall) ** 2)


def lo_wall_phase(omega: float, q_wall: float, e: float) -> float:
    """arccos(omega q_wall / sqrt(2e)); raises when e is below the wall energy."""
    x = omega * q_wall / math.sqrt(2.0 * e)
    if abs(x) > 1.0 + 1e-12:
        raise ValueError("energy below the wall energy (arccos argument beyond [-1, 1])")
    return math.acos(min(1.0, max(-1.0, x)))


def lo_params(omega1: float, omega2: float, q1_wall: float, q2_wall: float,
              e1: float, h: float) -> ReturnMapParams:
    """Step-family return-map parameters, entirely by closed forms."""
    h1s = 0.5 * (omega1 * q1_wall) ** 2
    h2s = 0.5 * (omega2 * q2_wall) ** 2
    e2 = h - e1
    if not (e1 >= h1s and e2 >= h2s):
        raise ValueError("(e1, h) is not in the step family")
    th1 = lo_wall_phase(omega1, q1_wall, e1)
    th2 = lo_wall_phase(omega2, q2_wall, e2)
    r = omega2 / omega1
    smooth = TWO_PI * r
    big = 2.0 * r * th1
    if th2 > 0.0:
        chi2 = r * (math.pi - th1) / th2
        k2 = math.floor(chi2)
        star = 2.0 * th2 * ((big / (2.0 * th2)) % 1.0)
    else:
        chi2, k2, star = INF, None, 0.0
    return ReturnMapParams(
        e1=e1, e2=e2, h=h, region=RegionTag.STEP_FAMILY,
        theta1_hat=th1, theta2_wall=th2,
        Theta2_smooth=smooth, Theta2=big, Theta2_star=star,
        chi2=chi2, K2=k2,
        T1=TWO_PI / omega1, T1_tilde=2.0 * th1 / omega1,
    )


def chi2_lo(omega1: float, omega2: float, q1_wall: float, q2_wall: float,
            e1: float, h: float) -> float:
    th1 = lo_wall_phase(omega1, q1_wall, e1)
    th2 = lo_wall_phase(omega2, q2_wall, h - e1)
    if th2 == 0.0:
        return INF
    return (omega2 / omega1) * (math.pi - th1) / th2


def chi2_prime_lo(omega1: float, omega2: float, q1_wall: float, q2_wall: float,
                  e1: float, h: float) -> float:
    """d chi2 / d e1 for linear oscillators."""
    e2 = h - e1
    a1 = omega1 * q1_wall
    a2 = omega2 * q2_wall
    th1 = lo_wall_phase(omega1, q1_wall, e1)
    th2 = lo_wall_phase(omega2, q2_wall, e2)
    term1 = -a1 * th2 / (2.0 * e1 * math.sqrt(2.0 * e1 - a1 * a1))
    term2 = a2 * (math.pi - th1) / (2.0 * e2 * math.sqrt(2.0 * e2 - a2 * a2))
    return omega2 * (term1 + term2) / (omega1 * th2 * th2)


def theta1_wall_prime_lo(omega1: float, q1_wall: float, e1: float) -> float:
    a1 = omega1 * q1_wall
    return a1 / (2.0 * e1 * math.sqrt(2.0 * e1 - a1 * a1))


def theta2_wall_prime_in_e1_lo(omega2: float, q2_wall: float, e1: float,
                               h: float) -> float:
    a2 = omega2 * q2_wall
    e2 = h - e1
    return -a2 / (2.0 * e2 * math.sqrt(2.0 * e2 - a2 * a2))


def theta1_star(omega1: float, omega2: float, q1_wall: float, q2_wall: float,
                h: float) -> float:
    """theta1_wall at the upper edge e1 = h - h2_step."""
    return math.acos(omega1 * q1_wall / math.sqrt(2.0 * h - (omega2 * q2_wall) ** 2))


def theta2_star(omega1: float, omega2: float, q1_wall: float, q2_wall: float,
                h: float) -> float:
    """theta2_wall at the lower edge e1 = h1_step."""
    return math.acos(omega2 * q2_wall / math.sqrt(2.0 * h - (omega1 * q1_wall) ** 2))


@dataclass(frozen=True)
class MonotonicityReport:
    monotone: bool
    bracket: Optional[tuple[float, float]]  # e1 bracket with a chi2' sign change
    derivative_root: Optional[float]


def chi2_monotonicity(omega1: float, omega2: float, q1_wall: float,
                      q2_wall: float, h: float, *,
                      grid: int = 512) -> MonotonicityReport:
    """Monotone verdict for chi2 on the step interval: monotone iff q1_wall*q2_wall < 0.

    For the same-sign cases the derivative changes sign inside the interval;
    a bracket (and the refined root) is returned.
    """
    if h <= h_step_lo(omega1, omega2, q1_wall, q2_wall):
        raise ValueError("h must exceed the step energy")
    if q1_wall * q2_wall < 0.0:
        return MonotonicityReport(True, None, None)
    h1s = 0.5 * (omega1 * q1_wall) ** 2
    h2s = 0.5 * (omega2 * q2_wall) ** 2
    lo, hi = h1s, h - h2s
    width = hi - lo
    xs = [lo + width * (k + 0.5) / grid for k in range(grid)]
    f = lambda e1: chi2_prime_lo(omega1, omega2, q1_wall, q2_wall, e1, h)
    prev_x, prev_y = xs[0], f(xs[0])
    for x in xs[1:]:
        y = f(x)
        if prev_y == 0.0 or prev_y * y < 0.0:
            root = brentq(f, prev_x, x, xtol=1e-14)
            return MonotonicityReport(False, (prev_x, x), root)
        prev_x, prev_y = x, y
    # derivative sign change proven to exist; a denser scan is a caller issue
    raise RuntimeError("no derivative sign change found; increase grid")


@dataclass(frozen=True)
class LoEdgeTable:
    """Edge values of the wall phases, Theta2 and chi2 on the step interval."""

    quadrant: tuple[int, int]  # signs of (q1_wall, q2_wall)
    h: float
    theta1_star: float
    theta2_star: float
    theta1_wall_edges: tuple[float, float]  # at e1 = h1_step, e1 = h - h2_step
    theta2_wall_edges: tuple[float, float]
    Theta2_edges: tuple[float, float]
    chi2_edges: tuple[float, float]  # upper entry may be inf
    chi2_monotone: bool
    Theta2_increasing: bool


def edge_table(omega1: float, omega2: float, q1_wall: float, q2_wall: float,
               h: float) -> LoEdgeTable:
    if h <= h_step_lo(omega1, omega2, q1_wall, q2_wall):
        raise ValueError("h must exceed the step energy")
    r = omega2 / omega1
    t1s = theta1_star(omega1, omega2, q1_wall, q2_wall, h)
    t2s = theta2_star(omega1, omega2, q1_wall, q2_wall, h)
    th1_lo = math.pi if q1_wall < 0.0 else 0.0
    th2_hi = math.pi if q2_wall < 0.0 else 0.0
    big_lo = TWO_PI * r if q1_wall < 0.0 else 0.0
    big_hi = 2.0 * r * t1s
    chi_lo = 0.0 if q1_wall < 0.0 else r * math.pi / t2s
    chi_hi = r * (1.0 - t1s / math.pi) if q2_wall < 0.0 else INF
    return LoEdgeTable(
        quadrant=(int(math.copysign(1, q1_wall)), int(math.copysign(1, q2_wall))),
        h=h,
        theta1_star=t1s, theta2_star=t2s,
        theta1_wall_edges=(th1_lo, t1s),
        theta2_wall_edges=(t2s, th2_hi),
        Theta2_edges=(big_lo, big_hi),
        chi2_edges=(chi_lo, chi_hi),
        chi2_monotone=q1_wall * q2_wall < 0.0,
        Theta2_increasing=q1_wall > 0.0,
    )


@dataclass(frozen=True)
class CrossingReport:
    """Level sets where chi crosses an integer (rotation-reduction points)."""

    section: str  # "sigma1" or "sigma2"
    axis: str     # which energy the crossing values refer to
    count: float  # number of crossings, inf marker when divergent
    crossings: tuple[tuple[int, float], ...]  # (integer n, energy)
    bound_kind: str   # "eq", "geq" or "inf": the large-h prediction
    bound_value: Optional[int]


def nosc_large_h(omega1: float, omega2: float, q1_wall: float,
                 q2_wall: float) -> tuple[str, Optional[int]]:
    """Large-h prediction for the number of chi2 integer crossings."""
    r = omega2 / omega1
    if q2_wall > 0.0:
        return "inf", None
    if q1_wall < 0.0:
        return "geq", math.floor(0.5 * r)
    return "eq", math.floor(1.5 * r)


def count_chi2_integer_crossings(omega1: float, omega2: float, q1_wall: float,
                                 q2_wall: float, h: float, *,
                                 section: str = "sigma1",
                                 max_roots: int = 50,
                                 grid: int = 4001) -> CrossingReport:
    """Locate the level sets with integer chi by grid scan plus root refinement.

    With the divergent wall sign the count is reported as an inf marker and
    only the first ``max_roots`` crossings (smallest integers) are located.
    """
    if section == "sigma2":
        omega1, omega2 = omega2, omega1
        q1_wall, q2_wall = q2_wall, q1_wall
        axis = "e2"
    elif section == "sigma1":
        axis = "e1"
    else:
        raise ValueError("section must be 'sigma1' or 'sigma2'")
    if h <= h_step_lo(omega1, omega2, q1_wall, q2_wall):
        raise ValueError("h must exceed the step energy")
    h1s = 0.5 * (omega1 * q1_wall) ** 2
    h2s = 0.5 * (omega2 * q2_wall) ** 2
    lo, hi = h1s, h - h2s
    width = hi - lo
    divergent = q2_wall > 0.0

    xs = [lo + width * (k + 0.5) / grid for k in range(grid)]
    # chi2 varies like a square root at both edges (and diverges at the upper
    # one when q2_wall > 0): refine geometrically toward both ends
    cell = width * 0.5 / grid
    xs += [lo + cell * 2.0 ** (-k) for k in range(1, 45)]
    xs += [hi - cell * 2.0 ** (-k) for k in range(1, 50 if divergent else 45)]
    xs.sort()
    f = lambda e1: chi2_lo(omega1, omega2, q1_wall, q2_wall, e1, h)
    found: list[tuple[int, float]] = []
    n_cap: Optional[int] = None  # chi2 diverges: only the smallest integers matter
    prev_x, prev_y = xs[0], f(xs[0])
    for x in xs[1:]:
        y = f(x)
        if not (math.isfinite(y) and math.isfinite(prev_y)):
            # the wall phase underflows within rounding of the divergent edge
            prev_x, prev_y = x, y
            continue
        n_lo, n_hi = math.floor(min(prev_y, y)), math.floor(max(prev_y, y))
        for n in range(n_lo + 1, n_hi + 1):
            if n_cap is not None and n > n_cap:
                break
            root = brentq(lambda e: f(e) - n, prev_x, x, xtol=1e-15)
            found.append((n, root))
            if divergent and len(found) >= max_roots:
                n_cap = sorted(c[0] for c in found)[max_roots - 1]
        prev_x, prev_y = x, y
    crossings = sorted(found, key=lambda t: (t[0], t[1]))[:max_roots]
    count: float = INF if divergent else float(len(found))
    kind, value = nosc_large_h(omega1, omega2, q1_wall, q2_wall)
    return CrossingReport(section=section, axis=axis, count=count,
                          crossings=tuple(crossings),
                          bound_kind=kind, bound_value=value)


@dataclass(frozen=True)
class NearThresholdRow:
    """Edge values at h = h_step + eta next to their sqrt(eta) asymptotics."""

    quadrant: tuple[int, int]
    eta: float
    exact: dict
    asymptotic: dict
    ratios: dict  # exact/asymptotic where the asymptotic is finite and nonzero


def near_threshold_table(omega1: float, omega2: float, q1_wall: float,
                         q2_wall: float, eta: float) -> NearThresholdRow:
    hs = h_step_lo(omega1, omega2, q1_wall, q2_wall)
    if not 0.0 < eta < hs:
        raise ValueError("eta must satisfy 0 < eta << h_step")
    h = hs + eta
    h1s = 0.5 * (omega1 * q1_wall) ** 2
    h2s = 0.5 * (omega2 * q2_wall) ** 2
    r = omega2 / omega1
    tab = edge_table(omega1, omega2, q1_wall, q2_wall, h)
    exact = {
        "chi2_lower": tab.chi2_edges[0],
        "chi2_upper": tab.chi2_edges[1],
        "Theta2_lower": tab.Theta2_edges[0],
        "Theta2_upper": tab.Theta2_edges[1],
    }
    s1 = math.sqrt(eta / h1s)
    s2 = math.sqrt(eta / h2s)
    asym = {
        "chi2_lower": (0.0 if q1_wall < 0.0 else
                       (r * math.pi / s2 if q2_wall > 0.0 else r + r * s2 / math.pi)),
        "chi2_upper": ((r / math.pi) * s1 if (q1_wall < 0.0 and q2_wall < 0.0) else
                       (INF if q2_wall > 0.0 else r - r * s1 / math.pi)),
        "Theta2_lower": TWO_PI * r if q1_wall < 0.0 else 0.0,
        "Theta2_upper": 2.0 * r * (math.pi - s1) if q1_wall < 0.0 else 2.0 * r * s1,
    }
    ratios = {}
    for key, a in asym.items():
        if math.isfinite(a) and a != 0.0:
            ratios[key] = exact[key] / a
    return NearThresholdRow(
        quadrant=(int(math.copysign(1, q1_wall)), int(math.copysign(1, q2_wall))),
        eta=eta, exact=exact, asymptotic=asym, ratios=ratios,
    )


def format_edge_table(tables: list[LoEdgeTable]) -> str:
    """Aligned-text rendering of edge tables, one row per wall quadrant."""
    def fmt(x: float) -> str:
        return "inf" if not math.isfinite(x) else f"{x:.6g}"

    header = (f"{'quadrant':>9} | {'th1(lo)':>9} {'th1(hi)':>9} | "
              f"{'th2(lo)':>9} {'th2(hi)':>9} | {'Theta2(lo)':>10} {'Theta2(hi)':>10} | "
              f"{'chi2(lo)':>9} {'chi2(hi)':>9} | mono")
    lines = [header, "-" * len(header)]
    for t in tables:
        quad = f"({'+' if t.quadrant[0] > 0 else '-'},{'+' if t.quadrant[1] > 0 else '-'})"
        lines.append(
            f"{quad:>9} | {fmt(t.theta1_wall_edges[0]):>9} {fmt(t.theta1_wall_edges[1]):>9} | "
            f"{fmt(t.theta2_wall_edges[0]):>9} {fmt(t.theta2_wall_edges[1]):>9} | "
            f"{fmt(t.Theta2_edges[0]):>10} {fmt(t.Theta2_edges[1]):>10} | "
            f"{fmt(t.chi2_edges[0]):>9} {fmt(t.chi2_edges[1]):>9} | "
            f"{'yes' if t.chi2_monotone else 'no'}")
    return "\n".join(lines)
