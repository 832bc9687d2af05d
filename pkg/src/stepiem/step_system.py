"""Step geometry and classification of iso-energy level sets.

The configuration-space obstacle is the quadrant {q1 < q1_wall, q2 < q2_wall}
with both wall positions nonzero.  On a level set (e1, e2 = h - e1) the
oscillation box either misses the obstacle entirely, touches one of its two
faces, straddles both (the step family, where the dynamics live on a genus-2
surface), or, when both walls sit at positive positions and both energies
are small, lies inside the obstacle where no motion exists.

Classification only compares each e_i against the wall energy
h_i_step = V_i(q_i_wall) and looks at the wall signs; the effective wall
phases theta_hat follow the same case split (pi marks a face that cannot be
hit, None marks the disallowed case).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .potentials import Potential1D, wall_phase

_BOUNDARY_RTOL = 1e-12


class RegionTag(Enum):
    STEP_FAMILY = "StepFamily"
    ONLY_WALL1 = "OnlyWall1Impacts"
    ONLY_WALL2 = "OnlyWall2Impacts"
    NO_IMPACTS = "NoImpacts"
    DISALLOWED = "Disallowed"


@dataclass(frozen=True)
class StepConfig:
    """Two potentials plus the step corner position."""

    pot1: Potential1D
    pot2: Potential1D
    q1_wall: float
    q2_wall: float
    h1_step: float = field(init=False)
    h2_step: float = field(init=False)

    def __post_init__(self) -> None:
        if self.q1_wall == 0.0 or self.q2_wall == 0.0:
            raise ValueError("wall positions must satisfy q1_wall * q2_wall != 0")
        object.__setattr__(self, "h1_step", self.pot1.v(self.q1_wall))
        object.__setattr__(self, "h2_step", self.pot2.v(self.q2_wall))

    @property
    def h_step(self) -> float:
        return self.h1_step + self.h2_step


@dataclass(frozen=True)
class LevelSet:
    """Energy split (e1, e2 = h - e1) on the energy surface h."""

    e1: float
    h: float

    def __post_init__(self) -> None:
        if self.h <= 0.0:
            raise ValueError("total energy must be positive")
        if not 0.0 <= self.e1 <= self.h:
            raise ValueError("e1 must lie in [0, h]")

    @property
    def e2(self) -> float:
        return self.h - self.e1


@dataclass(frozen=True)
class RegionClass:
    tag: RegionTag
    theta1_hat: Optional[float]  # None encodes the disallowed (empty) case
    theta2_hat: Optional[float]
    boundary: bool = False


def _near(a: float, b: float) -> bool:
    return abs(a - b) <= _BOUNDARY_RTOL * max(abs(a), abs(b), 1.0)


def classify(cfg: StepConfig, ls: LevelSet, *,
             use_quadrature: bool = False) -> RegionClass:
    """Tag a level set by which step faces its trajectories can hit.

    Level sets exactly on a wall energy (tangency) get the inclusive tag of
    the closed set plus ``boundary=True``.
    """
    e1, e2 = ls.e1, ls.e2
    h1s, h2s = cfg.h1_step, cfg.h2_step
    boundary = _near(e1, h1s) or _near(e2, h2s)
    on1 = e1 >= h1s or _near(e1, h1s)
    on2 = e2 >= h2s or _near(e2, h2s)

    if on1 and on2:
        tag = RegionTag.STEP_FAMILY
    elif on1:  # e2 below wall energy
        tag = RegionTag.ONLY_WALL1 if cfg.q2_wall > 0.0 else RegionTag.NO_IMPACTS
    elif on2:
        tag = RegionTag.ONLY_WALL2 if cfg.q1_wall > 0.0 else RegionTag.NO_IMPACTS
    else:
        if cfg.q1_wall > 0.0 and cfg.q2_wall > 0.0:
            tag = RegionTag.DISALLOWED
        else:
            tag = RegionTag.NO_IMPACTS

    if tag is RegionTag.DISALLOWED:
        return RegionClass(tag, None, None, boundary)

    def hat(pot, e, q_wall, can_hit):
        if not can_hit:
            return math.pi
        if e > pot.v(q_wall):
            return wall_phase(pot, e, q_wall, use_quadrature=use_quadrature)
        # tangent level set: limiting phase decided by the wall sign
        return math.pi if q_wall < 0.0 else 0.0

    th1 = hat(cfg.pot1, e1, cfg.q1_wall,
              tag in (RegionTag.STEP_FAMILY, RegionTag.ONLY_WALL1))
    th2 = hat(cfg.pot2, e2, cfg.q2_wall,
              tag in (RegionTag.STEP_FAMILY, RegionTag.ONLY_WALL2))
    return RegionClass(tag, th1, th2, boundary)


def step_family_interval(cfg: StepConfig, h: float) -> Optional[tuple[float, float]]:
    """Open e1-interval of the step family, or None when h <= h_step."""
    if h <= 0.0:
        raise ValueError("total energy must be positive")
    if h <= cfg.h_step:
        return None
    return cfg.h1_step, h - cfg.h2_step


@dataclass(frozen=True)
class DiagramSegment:
    h: float
    seg_tag: str
    e1_lo: float
    e1_hi: float


def energy_momentum_diagram(cfg: StepConfig, h_grid) -> list[DiagramSegment]:
    """Partition of [0, h] into impact regions for each h on the grid.

    Segment endpoints are analytic (h1_step and h - h2_step); closed segments
    may overlap below h_step.  Suitable for CSV plotting with columns
    h, seg_tag, e1_lo, e1_hi.
    """
    rows: list[DiagramSegment] = []
    for h in h_grid:
        if h <= 0.0:
            raise ValueError("grid energies must be positive")
        r1_hi = min(h, cfg.h1_step)
        r2_lo = max(0.0, h - cfg.h2_step)
        rows.append(DiagramSegment(h, "R1", 0.0, r1_hi))
        iv = step_family_interval(cfg, h)
        if iv is not None:
            rows.append(DiagramSegment(h, "Rc", iv[0], iv[1]))
        rows.append(DiagramSegment(h, "R2", r2_lo, h))
        if cfg.q1_wall > 0.0 and cfg.q2_wall > 0.0 and r2_lo <= r1_hi:
            rows.append(DiagramSegment(h, "disallowed", r2_lo, r1_hi))
    return rows
