"""Event-driven simulation of the impact flow.

Between impacts the two degrees of freedom are uncoupled, so propagation is
exact in the action-angle chart: each phase advances linearly at its own
frequency.  Events are located analytically as the next time a phase hits
one of its targets (0 for a section crossing, +/- theta_wall for the wall
line), then the earliest candidate is kept only if its co-condition holds
(a wall-1 crossing is an impact only while the other coordinate is below the
other wall).  This removes any step-size dependence from event detection.

A reflection flips one momentum sign, which in the chart is theta -> -theta
at the wall phase.  A trajectory entering the corner (both wall conditions
within tolerance) stops: corner hits terminate the run with a truncation
marker.

The batch sampler iterates the return map to the section Sigma1
(first oscillator at its rightmost turning point) for many initial phases at
once with numpy; it follows the same local rules event by event and is used
for the large conjugacy cross-checks against the analytic exchange maps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional

import numpy as np

from .angles import TWO_PI, wrap
from .potentials import angle_of_state, period, state_of_angle, wall_phase
from .step_system import LevelSet, RegionClass, RegionTag, StepConfig, classify

CORNER_TIME_TOL = 1e-10
WALL_POSITION_TOL = 1e-10


class EventInsideIntervalError(ValueError):
    """Smooth propagation was asked to step across an impact."""


class EventKind(Enum):
    WALL1 = "Wall1Impact"
    WALL2 = "Wall2Impact"
    SIGMA1 = "Sigma1Crossing"
    SIGMA2 = "Sigma2Crossing"
    CORNER = "CornerHit"


@dataclass(frozen=True)
class ImpactState:
    q1: float
    q2: float
    p1: float
    p2: float
    t: float = 0.0

    def energies(self, cfg: StepConfig) -> tuple[float, float]:
        return (0.5 * self.p1 * self.p1 + cfg.pot1.v(self.q1),
                0.5 * self.p2 * self.p2 + cfg.pot2.v(self.q2))


@dataclass(frozen=True)
class Event:
    kind: EventKind
    t: float
    theta1: float
    theta2: float
    state: Optional[ImpactState] = None  # at the event, before reflection

    def state_after(self) -> ImpactState:
        """State just after the event (reflected momentum for wall impacts)."""
        if self.state is None:
            raise ValueError("event was produced without a materialized state")
        if self.kind is EventKind.WALL1:
            return replace(self.state, p1=-self.state.p1)
        if self.kind is EventKind.WALL2:
            return replace(self.state, p2=-self.state.p2)
        return self.state


@dataclass(frozen=True)
class Frame:
    """Per-level-set chart constants used by the event engine."""

    cfg: StepConfig
    e1: float
    e2: float
    region: RegionClass
    omega1: float
    omega2: float
    theta1_wall: Optional[float]  # None when the dof never reaches its wall line
    theta2_wall: Optional[float]
    always_below1: bool  # q1 < q1_wall identically (only when theta1_wall is None)
    always_below2: bool
    corner_ang1: float
    corner_ang2: float

    @property
    def T1(self) -> float:
        return TWO_PI / self.omega1

    @property
    def T1_tilde(self) -> float:
        if self.theta1_wall is None:
            return self.T1
        return 2.0 * self.theta1_wall / self.omega1


def build_frame(cfg: StepConfig, ls: LevelSet, *,
                use_quadrature: bool = False) -> Frame:
    rc = classify(cfg, ls, use_quadrature=use_quadrature)
    if rc.tag is RegionTag.DISALLOWED:
        raise ValueError("level set is not in the allowed region of motion")
    if ls.e1 <= 0.0 or ls.e2 <= 0.0:
        raise ValueError("both energies must be positive for the event engine")
    om1 = TWO_PI / period(cfg.pot1, ls.e1, use_quadrature=use_quadrature)
    om2 = TWO_PI / period(cfg.pot2, ls.e2, use_quadrature=use_quadrature)
    th1 = th2 = None
    ang1 = ang2 = 0.0
    if ls.e1 > cfg.h1_step:
        th1 = wall_phase(cfg.pot1, ls.e1, cfg.q1_wall, use_quadrature=use_quadrature)
        ang1 = WALL_POSITION_TOL * om1 / math.sqrt(2.0 * (ls.e1 - cfg.h1_step))
    if ls.e2 > cfg.h2_step:
        th2 = wall_phase(cfg.pot2, ls.e2, cfg.q2_wall, use_quadrature=use_quadrature)
        ang2 = WALL_POSITION_TOL * om2 / math.sqrt(2.0 * (ls.e2 - cfg.h2_step))
    return Frame(
        cfg=cfg, e1=ls.e1, e2=ls.e2, region=rc,
        omega1=om1, omega2=om2,
        theta1_wall=th1, theta2_wall=th2,
        always_below1=(th1 is None and cfg.q1_wall > 0.0),
        always_below2=(th2 is None and cfg.q2_wall > 0.0),
        corner_ang1=ang1, corner_ang2=ang2,
    )


def _below(theta: float, theta_wall: Optional[float], always: bool) -> bool:
    """Is q < q_wall for this dof at phase theta?"""
    if theta_wall is None:
        return always
    return abs(wrap(theta)) > theta_wall


def _near_wall(theta: float, theta_wall: Optional[float], ang_tol: float) -> bool:
    if theta_wall is None:
        return False
    return abs(abs(wrap(theta)) - theta_wall) < ang_tol


def _next_event_phases(frame: Frame, th1: float, th2: float):
    """Earliest qualifying event from phases (th1, th2).

    Returns (dt, kind, th1_at, th2_at) with phases set exactly on the event
    target, before any reflection.  Wall-line crossings that fail their
    co-condition are free (the face is not present there); such a target is
    rescheduled one period later, since the co-condition may hold next time.
    The section crossing of each dof bounds the search within one period.
    """
    cands: list[list] = []  # [dt, kind, dof, target, period]

    def seed(dof: int, target: float, kind: EventKind) -> None:
        th, om = (th1, frame.omega1) if dof == 1 else (th2, frame.omega2)
        period_ = TWO_PI / om
        dt = ((target - th) % TWO_PI) / om
        if dt == 0.0:
            dt = period_
        cands.append([dt, kind, dof, target, period_])

    seed(1, 0.0, EventKind.SIGMA1)
    seed(2, 0.0, EventKind.SIGMA2)
    if frame.theta1_wall is not None:
        seed(1, frame.theta1_wall, EventKind.WALL1)
        seed(1, -frame.theta1_wall, EventKind.WALL1)
    if frame.theta2_wall is not None:
        seed(2, frame.theta2_wall, EventKind.WALL2)
        seed(2, -frame.theta2_wall, EventKind.WALL2)

    while True:
        cand = min(cands, key=lambda c: c[0])
        dt, kind, dof, target = cand[0], cand[1], cand[2], cand[3]
        a1 = th1 + frame.omega1 * dt if dof != 1 else target
        a2 = th2 + frame.omega2 * dt if dof != 2 else target
        if kind is EventKind.SIGMA1 or kind is EventKind.SIGMA2:
            return dt, kind, wrap(a1), wrap(a2)
        inbound = target > 0.0
        if dof == 1:
            other_near = _near_wall(a2, frame.theta2_wall, frame.corner_ang2)
            other_below = _below(a2, frame.theta2_wall, frame.always_below2)
        else:
            other_near = _near_wall(a1, frame.theta1_wall, frame.corner_ang1)
            other_below = _below(a1, frame.theta1_wall, frame.always_below1)
        if other_near:
            return dt, EventKind.CORNER, wrap(a1), wrap(a2)
        if inbound:
            other_inbound = [c[0] for c in cands
                             if c[2] != dof and c[3] > 0.0
                             and c[1] in (EventKind.WALL1, EventKind.WALL2)]
            if other_inbound and abs(other_inbound[0] - dt) < CORNER_TIME_TOL:
                return dt, EventKind.CORNER, wrap(a1), wrap(a2)
            if other_below:
                return dt, kind, wrap(a1), wrap(a2)
        else:
            if other_below:
                raise RuntimeError("trajectory emerged from inside the step; "
                                   "invalid initial state or missed corner")
        cand[0] = dt + cand[4]  # free crossing: try the next occurrence


def _phases_of_state(frame: Frame, state: ImpactState, *,
                     use_quadrature: bool = False) -> tuple[float, float]:
    th1 = angle_of_state(frame.cfg.pot1, frame.e1, state.q1, state.p1,
                         use_quadrature=use_quadrature)
    th2 = angle_of_state(frame.cfg.pot2, frame.e2, state.q2, state.p2,
                         use_quadrature=use_quadrature)
    return th1, th2


def _state_of_phases(frame: Frame, th1: float, th2: float, t: float, *,
                     use_quadrature: bool = False) -> ImpactState:
    q1, p1 = state_of_angle(frame.cfg.pot1, frame.e1, th1,
                            use_quadrature=use_quadrature)
    q2, p2 = state_of_angle(frame.cfg.pot2, frame.e2, th2,
                            use_quadrature=use_quadrature)
    return ImpactState(q1=q1, q2=q2, p1=p1, p2=p2, t=t)


def _validate_state(cfg: StepConfig, state: ImpactState) -> None:
    if state.q1 < cfg.q1_wall and state.q2 < cfg.q2_wall:
        raise ValueError("state lies inside the step")
    if state.q1 == cfg.q1_wall and state.q2 < cfg.q2_wall and state.p1 < 0.0:
        raise ValueError("state on the right face moving into the step")
    if state.q2 == cfg.q2_wall and state.q1 < cfg.q1_wall and state.p2 < 0.0:
        raise ValueError("state on the upper face moving into the step")


def propagate_smooth(cfg: StepConfig, state: ImpactState, dt: float, *,
                     check: bool = True, method: str = "chart") -> ImpactState:
    """Advance both degrees of freedom by dt with no impact in between.

    Linear oscillators use the exact phase-space rotation; other potentials
    advance through the action-angle chart.  ``method="ode"`` integrates
    Hamilton's equations with a high-order adaptive scheme instead, kept as a
    cross-check oracle for the chart.  With ``check=True`` the segment is
    verified to be impact-free (section crossings are harmless and allowed).
    """
    if method not in ("chart", "ode"):
        raise ValueError("method must be 'chart' or 'ode'")
    e1, e2 = state.energies(cfg)
    if check:
        frame = build_frame(cfg, LevelSet(e1, e1 + e2))
        if frame.theta1_wall is not None or frame.theta2_wall is not None:
            th1, th2 = _phases_of_state(frame, state)
            remaining = dt
            while remaining > 0.0:
                d, kind, th1, th2 = _next_event_phases(frame, th1, th2)
                if d >= remaining:
                    break
                if kind in (EventKind.WALL1, EventKind.WALL2, EventKind.CORNER):
                    raise EventInsideIntervalError(
                        f"{kind.value} occurs {d:g} time units into the segment")
                remaining -= d

    def advance(pot, q, p, tau):
        if method == "ode":
            from scipy.integrate import solve_ivp
            sol = solve_ivp(lambda t, y: [y[1], -pot.dv(y[0])], (0.0, tau),
                            [q, p], rtol=1e-12, atol=1e-13, method="DOP853")
            return float(sol.y[0, -1]), float(sol.y[1, -1])
        if pot.is_lo:
            om = pot.omega0
            c, s = math.cos(om * tau), math.sin(om * tau)
            return q * c + (p / om) * s, -q * om * s + p * c
        e = 0.5 * p * p + pot.v(q)
        if e <= 0.0:
            return q, p  # resting at the well minimum
        om = TWO_PI / period(pot, e)
        th = angle_of_state(pot, e, q, p) + om * tau
        return state_of_angle(pot, e, th)

    q1, p1 = advance(cfg.pot1, state.q1, state.p1, dt)
    q2, p2 = advance(cfg.pot2, state.q2, state.p2, dt)
    return ImpactState(q1=q1, q2=q2, p1=p1, p2=p2, t=state.t + dt)


def next_event(cfg: StepConfig, state: ImpactState, *,
               use_quadrature: bool = False) -> Event:
    """Earliest future event (wall impact, section crossing or corner hit)."""
    _validate_state(cfg, state)
    e1, e2 = state.energies(cfg)
    frame = build_frame(cfg, LevelSet(e1, e1 + e2), use_quadrature=use_quadrature)
    th1, th2 = _phases_of_state(frame, state, use_quadrature=use_quadrature)
    dt, kind, a1, a2 = _next_event_phases(frame, th1, th2)
    ev_state = _state_of_phases(frame, a1, a2, state.t + dt,
                                use_quadrature=use_quadrature)
    return Event(kind=kind, t=state.t + dt, theta1=a1, theta2=a2, state=ev_state)


@dataclass
class SimResult:
    events: list[Event]
    final: ImpactState
    truncated: bool  # corner hit terminated the run


def simulate(cfg: StepConfig, state: ImpactState, *,
             n_events: Optional[int] = None,
             t_final: Optional[float] = None,
             materialize: bool = True,
             use_quadrature: bool = False) -> SimResult:
    """Run the event loop from ``state`` for a number of events or a time span."""
    if (n_events is None) == (t_final is None):
        raise ValueError("give exactly one of n_events, t_final")
    _validate_state(cfg, state)
    e1, e2 = state.energies(cfg)
    frame = build_frame(cfg, LevelSet(e1, e1 + e2), use_quadrature=use_quadrature)
    th1, th2 = _phases_of_state(frame, state, use_quadrature=use_quadrature)
    t = state.t
    events: list[Event] = []
    truncated = False
    while True:
        if n_events is not None and len(events) >= n_events:
            break
        dt, kind, a1, a2 = _next_event_phases(frame, th1, th2)
        if t_final is not None and t + dt > t_final:
            th1 = wrap(th1 + frame.omega1 * (t_final - t))
            th2 = wrap(th2 + frame.omega2 * (t_final - t))
            t = t_final
            break
        th1, th2 = a1, a2
        t += dt
        ev_state = (_state_of_phases(frame, th1, th2, t,
                                     use_quadrature=use_quadrature)
                    if materialize else None)
        events.append(Event(kind=kind, t=t, theta1=th1, theta2=th2,
                            state=ev_state))
        if kind is EventKind.CORNER:
            truncated = True
            break
        if kind is EventKind.WALL1:
            th1 = -th1
        elif kind is EventKind.WALL2:
            th2 = -th2
    final = _state_of_phases(frame, th1, th2, t,
                             use_quadrature=use_quadrature)
    return SimResult(events=events, final=final, truncated=truncated)


@dataclass(frozen=True)
class SectionSample:
    k: int
    theta2: float
    return_time: float
    tag: str  # "R" for a right-face return, "U<k>" for k upper-face bounces


@dataclass
class SectionSamples:
    level_set: LevelSet
    theta2_0: float
    samples: list[SectionSample]
    truncated: bool


def section_state(cfg: StepConfig, ls: LevelSet, theta2_0: float, *,
                  use_quadrature: bool = False) -> ImpactState:
    """State on Sigma1 (first oscillator at its turning point) with dof-2 phase theta2_0."""
    frame = build_frame(cfg, ls, use_quadrature=use_quadrature)
    return _state_of_phases(frame, 0.0, wrap(theta2_0), 0.0,
                            use_quadrature=use_quadrature)


def return_map_samples(cfg: StepConfig, ls: LevelSet, theta2_0: float, n: int, *,
                       use_quadrature: bool = False) -> SectionSamples:
    """n successive Sigma1 crossings from the section state with phase theta2_0."""
    frame = build_frame(cfg, ls, use_quadrature=use_quadrature)
    th1, th2 = 0.0, wrap(theta2_0)
    t = 0.0
    t_prev = 0.0
    hit_right = False
    bounces = 0
    samples: list[SectionSample] = []
    truncated = False
    while len(samples) < n and not truncated:
        dt, kind, th1, th2 = _next_event_phases(frame, th1, th2)
        t += dt
        if kind is EventKind.CORNER:
            truncated = True
        elif kind is EventKind.WALL1:
            th1 = -th1
            hit_right = True
        elif kind is EventKind.WALL2:
            th2 = -th2
            bounces += 1
        elif kind is EventKind.SIGMA1:
            tag = "R" if hit_right else f"U{bounces}"
            samples.append(SectionSample(k=len(samples) + 1, theta2=wrap(th2),
                                         return_time=t - t_prev, tag=tag))
            t_prev = t
            hit_right = False
            bounces = 0
    return SectionSamples(level_set=ls, theta2_0=theta2_0,
                          samples=samples, truncated=truncated)


@dataclass
class ReturnOrbit:
    """Batched section orbits: one column per initial phase."""

    theta2: np.ndarray       # (n_iter + 1, N) phases at successive crossings
    return_time: np.ndarray  # (n_iter, N)
    hit_right: np.ndarray    # (n_iter, N) bool
    bounces: np.ndarray      # (n_iter, N) upper-face impacts per return
    truncated_at: np.ndarray  # (N,) iterate index of a corner hit, -1 if none

    @property
    def alive(self) -> np.ndarray:
        return self.truncated_at < 0


def batch_return_map(cfg: StepConfig, ls: LevelSet, theta2_0: np.ndarray,
                     n_iter: int, *, use_quadrature: bool = False) -> ReturnOrbit:
    """Iterate the Sigma1 return map for many initial phases at once.

    Follows the same event rules as the scalar engine (advance to the wall
    line, impact only if the other coordinate is below its wall, upper-face
    bounces while passing above the step).  Corner-bound columns freeze at
    the iterate where they hit.
    """
    frame = build_frame(cfg, ls, use_quadrature=use_quadrature)
    th = wrap(np.asarray(theta2_0, dtype=float).copy())
    n = th.shape[0]
    out_theta = np.empty((n_iter + 1, n))
    out_theta[0] = th
    rt = np.zeros((n_iter, n))
    hits = np.zeros((n_iter, n), dtype=bool)
    bounces = np.zeros((n_iter, n), dtype=int)
    trunc = np.full(n, -1, dtype=int)

    om1, om2 = frame.omega1, frame.omega2
    t1 = frame.T1
    th1w = frame.theta1_wall
    th2w = frame.theta2_wall
    tag = frame.region.tag

    if tag is RegionTag.ONLY_WALL2 and np.any(np.abs(th) > th2w):
        raise ValueError("initial phases must lie on the reduced circle "
                         "[-theta2_wall, theta2_wall) for this level set")

    for k in range(n_iter):
        alive = trunc < 0
        rt[k, ~alive] = np.nan
        if tag is RegionTag.NO_IMPACTS:
            th = np.where(alive, wrap(th + om2 * t1), th)
            rt[k, alive] = t1
        elif tag is RegionTag.ONLY_WALL1:
            th = np.where(alive, wrap(th + om2 * frame.T1_tilde), th)
            rt[k, alive] = frame.T1_tilde
            hits[k] = alive
        elif tag is RegionTag.ONLY_WALL2:
            th, nb, bad = _bounce_segment(th, om2, th2w, t1, frame.corner_ang2,
                                          alive)
            trunc[bad & alive] = k
            alive = trunc < 0
            bounces[k, alive] = nb[alive]
            rt[k, alive] = t1
        else:  # step family
            half_right = th1w / om1
            th = np.where(alive, wrap(th + om2 * half_right), th)
            w = np.abs(th)
            near = (np.abs(w - th2w) < frame.corner_ang2) & alive
            trunc[near] = k
            alive = trunc < 0
            below = w > th2w
            hit = below & alive
            hits[k] = hit
            # right-face branch: reflect dof 1 and come straight back
            th = np.where(hit, wrap(th + om2 * half_right), th)
            rt[k, hit] = frame.T1_tilde
            # above-step branch: bounce off the upper face for the long segment
            go = alive & ~below
            if go.any():
                tau = (TWO_PI - 2.0 * th1w) / om1
                th_go, nb, bad = _bounce_segment(th, om2, th2w, tau,
                                                 frame.corner_ang2, go)
                trunc[bad & go] = k
                go &= trunc < 0
                near_exit = (np.abs(np.abs(th_go) - th2w) < frame.corner_ang2) & go
                trunc[near_exit] = k
                go &= trunc < 0
                th = np.where(go, wrap(th_go + om2 * half_right), th)
                bounces[k, go] = nb[go]
                rt[k, go] = t1
        out_theta[k + 1] = th
    return ReturnOrbit(theta2=out_theta, return_time=rt, hit_right=hits,
                       bounces=bounces, truncated_at=trunc)


def _bounce_segment(th: np.ndarray, om2: float, th2w: float, tau: float,
                    corner_ang: float, mask: np.ndarray):
    """Advance masked phases for time tau inside the strip |theta2| < th2w.

    Reflections send +th2w to -th2w.  Returns the new phases, bounce counts
    and a mask of columns whose final bounce landed within the corner
    tolerance of the segment end.
    """
    th = th.copy()
    nb = np.zeros(th.shape, dtype=int)
    bad = np.zeros(th.shape, dtype=bool)
    remaining = np.where(mask, tau, 0.0)
    active = mask.copy()
    while active.any():
        dtb = (th2w - th[active]) / om2
        rem = remaining[active]
        corner = np.abs(dtb - rem) < corner_ang / om2
        bounce = (dtb < rem) & ~corner
        idx = np.flatnonzero(active)
        bad[idx[corner]] = True
        b_idx = idx[bounce]
        th[b_idx] = -th2w
        remaining[b_idx] -= dtb[bounce]
        nb[b_idx] += 1
        done = idx[~bounce & ~corner]
        th[done] = th[done] + om2 * remaining[done]
        remaining[done] = 0.0
        new_active = np.zeros_like(active)
        new_active[b_idx] = True
        active = new_active
    return th, nb, bad
