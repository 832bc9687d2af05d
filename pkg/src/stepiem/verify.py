"""Randomized verification checks shared by the CLI and the acceptance tests.

Each check draws reproducible random step-family configurations (seeded
generator, healthy margins from the region edges so the wall phases stay
away from 0 and pi) and reports a worst-case residual.  Thresholds live with
the callers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .angles import TWO_PI
from .diagnostics import ConjugacyReport, conjugacy_suite, sweep
from .iem import (build_step_circle_iem, compute_params, image_order,
                  tiling_residual)
from .lo_closed_forms import lo_params
from .potentials import linear_oscillator, quartic
from .step_system import LevelSet, StepConfig

QUADRANTS = ((-1, -1), (-1, +1), (+1, -1), (+1, +1))


def random_lo_draw(rng: np.random.Generator, quadrant=None):
    """(omega1, omega2, q1_wall, q2_wall, e1, h) of a random step-family level set."""
    s1, s2 = quadrant if quadrant is not None else QUADRANTS[rng.integers(0, 4)]
    om1, om2 = rng.uniform(0.5, 2.5, size=2)
    q1w = s1 * rng.uniform(0.3, 1.0)
    q2w = s2 * rng.uniform(0.3, 1.0)
    h1s = 0.5 * (om1 * q1w) ** 2
    h2s = 0.5 * (om2 * q2w) ** 2
    # margins keep both wall phases well inside (0, pi)
    e1 = h1s * (1.0 + rng.uniform(0.3, 3.0))
    e2 = h2s * (1.0 + rng.uniform(0.3, 3.0))
    return om1, om2, q1w, q2w, e1, e1 + e2


def random_step_family(rng: np.random.Generator, kind: str = "lo",
                       quadrant=None) -> tuple[StepConfig, LevelSet]:
    """Random configuration plus a step-family level set, LO or quartic."""
    s1, s2 = quadrant if quadrant is not None else QUADRANTS[rng.integers(0, 4)]
    if kind == "lo":
        om1, om2, q1w, q2w, e1, h = random_lo_draw(rng, (s1, s2))
        cfg = StepConfig(linear_oscillator(om1), linear_oscillator(om2), q1w, q2w)
    elif kind == "quartic":
        a1, a2 = rng.uniform(0.5, 3.0, size=2)
        q1w = s1 * rng.uniform(0.4, 1.0)
        q2w = s2 * rng.uniform(0.4, 1.0)
        cfg = StepConfig(quartic(a1), quartic(a2), q1w, q2w)
        e1 = cfg.h1_step * (1.0 + rng.uniform(0.3, 3.0))
        e2 = cfg.h2_step * (1.0 + rng.uniform(0.3, 3.0))
        h = e1 + e2
    else:
        raise ValueError(f"unknown potential kind {kind!r}")
    return cfg, LevelSet(e1, h)


def lo_spine_max_dev(n_configs: int, seed: int = 0) -> float:
    """Worst disagreement between LO closed forms and the quadrature path.

    Compares theta2_wall, Theta2 and chi2 relative to their magnitude
    (values of order one up to a few tens).
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_configs):
        om1, om2, q1w, q2w, e1, h = random_lo_draw(rng)
        closed = lo_params(om1, om2, q1w, q2w, e1, h)
        cfg = StepConfig(linear_oscillator(om1), linear_oscillator(om2), q1w, q2w)
        quad = compute_params(cfg, LevelSet(e1, h), use_quadrature=True)
        for a, b in ((closed.theta2_wall, quad.theta2_wall),
                     (closed.Theta2, quad.Theta2),
                     (closed.chi2, quad.chi2)):
            worst = max(worst, abs(a - b) / max(1.0, abs(a)))
    return worst


def identity_max_residual(cfg: StepConfig, h: float, grid_size: int, *,
                          use_quadrature: bool = False) -> float:
    """Worst |Theta2_smooth - (2 theta2_wall chi2 + Theta2)| over a sweep."""
    worst = 0.0
    for row in sweep(cfg, h, grid_size, use_quadrature=use_quadrature):
        resid = abs(row.Theta2_smooth
                    - (2.0 * row.theta2_wall * row.chi2 + row.Theta2))
        worst = max(worst, resid)
    return worst


@dataclass
class StructuralResult:
    n: int
    max_length_defect: float
    max_domain_defect: float
    max_image_defect: float
    order_violations: int


def structural_check(n_draws: int, seed: int = 0) -> StructuralResult:
    """Piece-length sums, bijective tiling and image cyclic order on random draws."""
    rng = np.random.default_rng(seed)
    res = StructuralResult(n_draws, 0.0, 0.0, 0.0, 0)
    for _ in range(n_draws):
        om1, om2, q1w, q2w, e1, h = random_lo_draw(rng)
        params = lo_params(om1, om2, q1w, q2w, e1, h)
        ci = build_step_circle_iem(params)
        res.max_length_defect = max(
            res.max_length_defect,
            abs(sum(p.length for p in ci.pieces) - TWO_PI))
        dom, img = tiling_residual(ci)
        res.max_domain_defect = max(res.max_domain_defect, dom)
        res.max_image_defect = max(res.max_image_defect, img)
        order = image_order(ci)
        if len(order) == 3:
            k = order.index("JR")
            if order[k:] + order[:k] != ["JR", "JK1", "JK"]:
                res.order_violations += 1
    return res


def conjugacy_random_suite(n_level_sets: int, n_samples: int, n_iter: int, *,
                           kind: str = "lo", seed: int = 0,
                           workers: int = 1) -> list[ConjugacyReport]:
    """Conjugacy reports on random step-family level sets across all quadrants."""
    rng = np.random.default_rng(seed)
    jobs = []
    for k in range(n_level_sets):
        quadrant = QUADRANTS[k % 4]
        jobs.append(random_step_family(rng, kind, quadrant))
    return conjugacy_suite(jobs, n_samples, n_iter, seed=seed + 1,
                           workers=workers)


def run_default_suite(*, seed: int = 0, workers: int = 1) -> dict:
    """The CLI verification suite: a reduced version of the acceptance gate."""
    from .diagnostics import find_special_level_sets
    from .lo_closed_forms import edge_table, theta1_star, theta2_star

    criteria: dict[str, bool] = {}

    spine = lo_spine_max_dev(200, seed=seed)
    criteria["lo_spine_1e-10"] = spine < 1e-10

    cfg_lo = StepConfig(linear_oscillator(1.0), linear_oscillator(1.3), -0.5, -0.4)
    cfg_q = StepConfig(quartic(1.0), quartic(2.0), -0.6, 0.5)
    ident = max(identity_max_residual(cfg_lo, 1.5, 200),
                identity_max_residual(cfg_q, 1.0, 25))
    criteria["functional_identity_1e-10"] = ident < 1e-10

    s = structural_check(2000, seed=seed + 2)
    criteria["iem_structure_1e-12"] = (
        s.max_length_defect < 1e-12 and s.max_domain_defect < 1e-12
        and s.max_image_defect < 1e-12 and s.order_violations == 0)

    reports = conjugacy_random_suite(8, 100, 200, kind="lo", seed=seed + 3,
                                     workers=workers)
    reports_q = conjugacy_random_suite(2, 40, 60, kind="quartic",
                                       seed=seed + 4, workers=workers)
    max_angle = max(r.max_angle_dev for r in reports)
    max_time = max(r.max_time_dev for r in reports)
    corners = sum(r.n_corner_truncations for r in reports + reports_q)
    criteria["conjugacy_lo_1e-9"] = all(r.passes(1e-9) for r in reports)
    criteria["conjugacy_quartic_1e-6"] = all(r.passes(1e-6) for r in reports_q)

    cfg_pos = StepConfig(linear_oscillator(1.0), linear_oscillator(1.7), -0.5, 0.6)
    hits = find_special_level_sets(cfg_pos, 4.0, "chi2-integer", max_hits=8)
    criteria["rotation_reduction"] = (
        len(hits) >= 5
        and all(h.certificate["effective_pieces"] == 2 for h in hits))

    t1s = theta1_star(1.0, 1.3, -0.5, -0.4, 1.5)
    tab = edge_table(1.0, 1.3, -0.5, -0.4, 1.5)
    criteria["edge_table_consistency"] = (
        abs(tab.Theta2_edges[1] - 2.0 * (1.3 / 1.0) * t1s) < 1e-12
        and abs(tab.theta2_star - theta2_star(1.0, 1.3, -0.5, -0.4, 1.5)) < 1e-12)

    return {
        "max_dev_angle": max(max_angle,
                             max(r.max_angle_dev for r in reports_q)),
        "max_dev_time": max(max_time, max(r.max_time_dev for r in reports_q)),
        "n_corner_truncations": corners,
        "criteria": criteria,
        "pass": all(criteria.values()),
    }
