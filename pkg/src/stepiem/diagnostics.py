"""Cross-validation of the event-driven flow against the analytic exchanges.

The conjugacy check runs many section orbits with the batched flow sampler
and iterates the circle exchange from the same initial phases; it reports the
largest phase deviation, the largest return-time deviation from the two-value
prediction (short return for right-face phases, full dof-1 period otherwise)
and any corner truncations.  Initial phases keep a guard distance from the
exchange cut points, since those phases aim exactly at the step corner.

Special level sets are located by root-solving along the step interval:
integer crossings of chi2 (where the exchange collapses to a rotation),
rational values of Theta2 (resonant bands with coexisting periods), and the
zero-length / seam-collision degeneracies.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.optimize import brentq

from .angles import TWO_PI, circle_dist, wrap
from .flow_sim import batch_return_map, build_frame
from .iem import (CircleIem, FundamentalIem, ReturnMapParams,
                  build_step_circle_iem, compute_params, degeneracy_check,
                  return_map)
from .step_system import LevelSet, RegionTag, StepConfig, step_family_interval

SAMPLE_GUARD = 1e-6
RECURRENCE_TOL = 1e-9


@dataclass(frozen=True)
class OrbitVerdict:
    """Periodicity verdict for one exchange orbit."""

    kind: str  # "periodic" or "aperiodic"
    period: Optional[int]
    witness: float
    min_recurrence_gap: float
    n_iter: int


def classify_orbit(iem: Union[CircleIem, FundamentalIem], theta2: float,
                   max_iter: int, *, tol: float = RECURRENCE_TOL,
                   exact_rational: bool = True) -> OrbitVerdict:
    """First recurrence of the orbit of theta2 within tol, up to max_iter.

    For pure rotations, ``exact_rational`` first checks the rotation number
    for a small-denominator rational (sharper than the recurrence threshold);
    the iterated verdict still confirms it.
    """
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    c = iem.circumference
    if exact_rational and isinstance(iem, CircleIem) and _is_rotation(iem):
        from .iem import rotation_kind
        kind, q = rotation_kind(c, iem.pieces[0].shift,
                                max_denominator=max_iter, tol=1e-13)
        if kind == "identity":
            return OrbitVerdict("periodic", 1, theta2,
                                circle_dist(iem.apply(theta2), theta2, c), 1)
        if kind == "periodic" and q <= max_iter:
            th = theta2
            for _ in range(q):
                th = iem.apply(th)
            gap = circle_dist(th, theta2, c)
            if gap < tol:
                return OrbitVerdict("periodic", q, theta2, gap, q)
    th = theta2
    min_gap = math.inf
    for n in range(1, max_iter + 1):
        th = iem.apply(th)
        gap = circle_dist(th, theta2, c)
        if gap < tol:
            return OrbitVerdict("periodic", n, theta2, gap, n)
        min_gap = min(min_gap, gap)
    return OrbitVerdict("aperiodic", None, theta2, min_gap, max_iter)


def _is_rotation(iem: CircleIem) -> bool:
    if len(iem.pieces) == 1:
        return True
    shifts = {wrap(p.shift, iem.circumference) for p in iem.pieces}
    return len({round(s, 14) for s in shifts}) == 1


@dataclass
class ConjugacyReport:
    e1: float
    h: float
    region: str
    n_samples: int
    n_iter: int
    max_angle_dev: float
    max_time_dev: float
    n_corner_truncations: int
    tag_mismatches: int

    def passes(self, tol_angle: float, tol_time: Optional[float] = None) -> bool:
        tol_time = tol_angle if tol_time is None else tol_time
        return (self.max_angle_dev < tol_angle and self.max_time_dev < tol_time
                and self.tag_mismatches == 0)


def guarded_phases(iem: CircleIem, n_samples: int, rng: np.random.Generator, *,
                   guard: float = SAMPLE_GUARD) -> np.ndarray:
    """Uniform phases on the exchange circle, away from every cut point.

    Cut points are the phases whose trajectory meets the step corner, so the
    guard also keeps samples off corner-bound orbits at the first return.
    """
    c = iem.circumference
    cuts = np.array([p.lo for p in iem.pieces])
    out = np.empty(n_samples)
    k = 0
    while k < n_samples:
        cand = rng.uniform(-0.5 * c, 0.5 * c, size=2 * (n_samples - k))
        dist = np.min(np.abs(wrap(cand[:, None] - cuts[None, :], c)), axis=1)
        good = cand[dist > guard]
        take = min(good.size, n_samples - k)
        out[k:k + take] = good[:take]
        k += take
    return out


def conjugacy_check(cfg: StepConfig, ls: LevelSet, n_samples: int, n_iter: int, *,
                    seed: int = 0, guard: float = SAMPLE_GUARD,
                    use_quadrature: bool = False) -> ConjugacyReport:
    """Compare flow-sampled section orbits against the analytic exchange."""
    params, ci = return_map(cfg, ls, use_quadrature=use_quadrature)
    rng = np.random.default_rng(seed)
    phases = guarded_phases(ci, n_samples, rng, guard=guard)

    flow = batch_return_map(cfg, ls, phases, n_iter,
                            use_quadrature=use_quadrature)
    frame = build_frame(cfg, ls, use_quadrature=use_quadrature)
    t_full, t_short = frame.T1, frame.T1_tilde

    th = phases.copy()
    c = ci.circumference
    max_angle = 0.0
    max_time = 0.0
    mismatches = 0
    for k in range(n_iter):
        valid = (flow.truncated_at < 0) | (flow.truncated_at > k)
        if not valid.any():
            break
        idx = ci.piece_index_array(th)
        tags = np.array([p.tag for p in ci.pieces])[idx]
        th = ci.apply_array(th)
        dev = circle_dist(flow.theta2[k + 1][valid], th[valid], c)
        max_angle = max(max_angle, float(dev.max()))
        if params.region is RegionTag.STEP_FAMILY:
            pred = np.where(tags == "JR", t_short, t_full)
            mismatches += int(np.sum((tags == "JR")[valid]
                                     != flow.hit_right[k][valid]))
        elif params.region is RegionTag.ONLY_WALL1:
            pred = np.full(th.shape, t_short)
        else:
            pred = np.full(th.shape, t_full)
        tdev = np.abs(flow.return_time[k][valid] - pred[valid])
        max_time = max(max_time, float(tdev.max()))
    return ConjugacyReport(
        e1=ls.e1, h=ls.h, region=params.region.value,
        n_samples=n_samples, n_iter=n_iter,
        max_angle_dev=max_angle, max_time_dev=max_time,
        n_corner_truncations=int(np.sum(flow.truncated_at >= 0)),
        tag_mismatches=mismatches,
    )


def _conjugacy_job(args) -> ConjugacyReport:
    cfg, ls, n_samples, n_iter, seed, use_quadrature = args
    return conjugacy_check(cfg, ls, n_samples, n_iter, seed=seed,
                           use_quadrature=use_quadrature)


def conjugacy_suite(cfg_level_sets: list[tuple[StepConfig, LevelSet]],
                    n_samples: int, n_iter: int, *, seed: int = 0,
                    workers: int = 1,
                    use_quadrature: bool = False) -> list[ConjugacyReport]:
    """Conjugacy checks over many level sets, optionally in parallel processes."""
    jobs = [(cfg, ls, n_samples, n_iter, seed + 1000 * k, use_quadrature)
            for k, (cfg, ls) in enumerate(cfg_level_sets)]
    if workers <= 1 or len(jobs) <= 1:
        return [_conjugacy_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_conjugacy_job, jobs))


@dataclass(frozen=True)
class SpecialLevelSet:
    e1: float
    kind: str
    target: str  # which condition was solved, e.g. "chi2=3" or "Theta2=2pi*1/3"
    params: ReturnMapParams
    certificate: dict


def _chi2_profile(cfg: StepConfig, h: float, use_quadrature: bool):
    def f(e1: float) -> float:
        return compute_params(cfg, LevelSet(e1, h),
                              use_quadrature=use_quadrature).chi2
    return f


def _grid(lo: float, hi: float, n: int, *, refine_hi: bool = False) -> list[float]:
    # the profiles vary like square roots at the interval edges; geometric
    # refinement there keeps edge crossings from slipping between grid points
    width = hi - lo
    cell = width * 0.5 / n
    xs = [lo + width * (k + 0.5) / n for k in range(n)]
    xs += [lo + cell * 2.0 ** (-k) for k in range(1, 40)]
    xs += [hi - cell * 2.0 ** (-k) for k in range(1, 48 if refine_hi else 40)]
    xs.sort()
    return xs


def find_special_level_sets(cfg: StepConfig, h: float, kind: str, *,
                            n_max: int = 7, grid: int = 1024,
                            max_hits: int = 50, tol: float = 1e-9,
                            use_quadrature: bool = False) -> list[SpecialLevelSet]:
    """Root-solve a special-level-set condition over the step interval.

    kind = "chi2-integer": integer chi2 (exchange reduces to a rotation);
    kind = "theta2-rational": Theta2 = 2 pi m / n with n <= n_max;
    kind = "degeneracy": the zero-length / seam-collision conditions.
    An empty list is a valid result.
    """
    iv = step_family_interval(cfg, h)
    if iv is None:
        return []
    lo, hi = iv
    if kind == "chi2-integer":
        return _find_chi2_integer(cfg, h, lo, hi, grid, max_hits, use_quadrature)
    if kind == "theta2-rational":
        return _find_theta2_rational(cfg, h, lo, hi, grid, n_max, max_hits,
                                     use_quadrature)
    if kind == "degeneracy":
        return _find_degeneracies(cfg, h, lo, hi, grid, max_hits, tol,
                                  use_quadrature)
    raise ValueError(f"unknown special-level-set kind: {kind}")


def _find_chi2_integer(cfg, h, lo, hi, grid, max_hits, use_quadrature):
    chi = _chi2_profile(cfg, h, use_quadrature)
    divergent = cfg.q2_wall > 0.0
    xs = _grid(lo, hi, grid, refine_hi=divergent)
    hits = []
    prev_x, prev_y = xs[0], chi(xs[0])
    for x in xs[1:]:
        y = chi(x)
        if not (math.isfinite(y) and math.isfinite(prev_y)):
            prev_x, prev_y = x, y
            continue
        n_lo, n_hi = math.floor(min(prev_y, y)), math.floor(max(prev_y, y))
        for n in range(n_lo + 1, n_hi + 1):
            root = brentq(lambda e: chi(e) - n, prev_x, x, xtol=1e-15)
            params = compute_params(cfg, LevelSet(root, h),
                                    use_quadrature=use_quadrature)
            ci = build_step_circle_iem(params)
            frac = min(params.chi2_frac, 1.0 - params.chi2_frac)
            hits.append(SpecialLevelSet(
                e1=root, kind="chi2-integer", target=f"chi2={n}",
                params=params,
                certificate={
                    "chi2_frac_residual": frac,
                    "effective_pieces": len(ci.effective_pieces()),
                    "rotation_flagged": "rotation" in ci.flags
                                        or frac < 1e-9,
                },
            ))
            if len(hits) >= max_hits:
                return sorted(hits, key=lambda s: s.e1)
        prev_x, prev_y = x, y
    return sorted(hits, key=lambda s: s.e1)


def _points_in_invariant_core(ci: CircleIem, n: int, n_points: int,
                              rng: np.random.Generator) -> list[float]:
    """Phases in JR whose first n iterates stay out of the upper-passage pieces."""
    tags = [p.tag for p in ci.pieces]
    out: list[float] = []
    jr = next(p for p in ci.pieces if p.tag == "JR")
    for _ in range(50 * n_points):
        if len(out) >= n_points:
            break
        th = wrap(jr.lo + rng.uniform(0.0, jr.length), ci.circumference)
        ok = True
        x = th
        for _ in range(n):
            if tags[ci.piece_index(x)] != "JR":
                ok = False
                break
            x = ci.apply(x)
        if ok:
            out.append(th)
    return out


def _find_theta2_rational(cfg, h, lo, hi, grid, n_max, max_hits, use_quadrature):
    def big(e1: float) -> float:
        return compute_params(cfg, LevelSet(e1, h),
                              use_quadrature=use_quadrature).Theta2

    xs = _grid(lo, hi, grid)
    ys = [big(x) for x in xs]
    y_min, y_max = min(ys), max(ys)
    targets = []
    for n in range(1, n_max + 1):
        m = 1
        while True:
            val = TWO_PI * m / n
            if val > y_max:
                break
            if val >= y_min and math.gcd(m, n) == 1:
                targets.append((m, n, val))
            m += 1
    hits = []
    rng = np.random.default_rng(1)
    for m, n, val in targets:
        for i in range(len(xs) - 1):
            g0, g1 = ys[i] - val, ys[i + 1] - val
            if g0 == 0.0 or g0 * g1 < 0.0:
                root = brentq(lambda e: big(e) - val, xs[i], xs[i + 1],
                              xtol=1e-15)
                params = compute_params(cfg, LevelSet(root, h),
                                        use_quadrature=use_quadrature)
                small_wall = 2.0 * params.theta2_wall < TWO_PI / n
                cert = {"small_wall_condition": small_wall}
                if small_wall and math.isfinite(params.chi2):
                    ci = build_step_circle_iem(params)
                    pts = _points_in_invariant_core(ci, n, 5, rng)
                    verdicts = [classify_orbit(ci, p, 4 * n) for p in pts]
                    cert["core_periodic_n"] = all(
                        v.kind == "periodic" and v.period == n for v in verdicts)
                    cert["core_points_tested"] = len(pts)
                hits.append(SpecialLevelSet(
                    e1=root, kind="theta2-rational",
                    target=f"Theta2=2pi*{m}/{n}", params=params,
                    certificate=cert))
                if len(hits) >= max_hits:
                    return sorted(hits, key=lambda s: s.e1)
    return sorted(hits, key=lambda s: s.e1)


def _find_degeneracies(cfg, h, lo, hi, grid, max_hits, tol, use_quadrature):
    def params_at(e1: float) -> ReturnMapParams:
        return compute_params(cfg, LevelSet(e1, h),
                              use_quadrature=use_quadrature)

    xs = _grid(lo, hi, grid)
    ps = [params_at(x) for x in xs]
    hits = []

    def scan(res, label):
        # res maps a params object to a signed residual, continuous while K2
        # stays constant
        for i in range(len(xs) - 1):
            if ps[i].K2 != ps[i + 1].K2:
                continue
            g0, g1 = res(ps[i]), res(ps[i + 1])
            if g0 == 0.0 or g0 * g1 < 0.0:
                root = brentq(lambda e: res(params_at(e)), xs[i], xs[i + 1],
                              xtol=1e-15)
                params = params_at(root)
                tags = degeneracy_check(params, tol=tol)
                hits.append(SpecialLevelSet(
                    e1=root, kind="degeneracy", target=label, params=params,
                    certificate={"tags": list(tags), "verified": len(tags) > 0}))

    max_m = math.ceil(max(p.Theta2_smooth for p in ps) / TWO_PI) + 2
    for m in range(-2, max_m + 1):
        odd = TWO_PI * (1 + 2 * m)
        for s in (+1.0, -1.0):
            scan(lambda p, s=s, odd=odd:
                 p.Theta2 - (s * 2.0 * p.theta2_wall + odd),
                 f"jr_cut:M={m},s={'+' if s > 0 else '-'}1")
        scan(lambda p, odd=odd:
             p.Theta2 - (2.0 * p.theta2_wall * (1.0 - 2.0 * p.chi2_frac) + odd),
             f"jk_cut:M={m}")
    # the zero-length family is exactly the integer-chi2 condition
    for hit in _find_chi2_integer(cfg, h, lo, hi, grid, max_hits,
                                  use_quadrature):
        tags = degeneracy_check(hit.params, tol=tol)
        hits.append(SpecialLevelSet(
            e1=hit.e1, kind="degeneracy", target=hit.target, params=hit.params,
            certificate={"tags": list(tags), "verified": len(tags) > 0}))
    return sorted(hits, key=lambda s: s.e1)[:max_hits]


@dataclass(frozen=True)
class SweepRow:
    e1: float
    theta2_wall: float
    Theta2: float
    chi2: float
    K2: Optional[int]
    lam_JR: float
    lam_JK: float
    lam_JK1: float
    thetaL_JR: float
    deg_flags: tuple[str, ...]
    region: str
    Theta2_smooth: float


def sweep(cfg: StepConfig, h: float, grid_size: int, *,
          use_quadrature: bool = False) -> list[SweepRow]:
    """Return-map quantities on a midpoint grid over the step interval."""
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    iv = step_family_interval(cfg, h)
    if iv is None:
        return []
    lo, hi = iv
    rows = []
    for k in range(grid_size):
        e1 = lo + (hi - lo) * (k + 0.5) / grid_size
        params = compute_params(cfg, LevelSet(e1, h),
                                use_quadrature=use_quadrature)
        f = params.chi2_frac
        th2 = params.theta2_wall
        rows.append(SweepRow(
            e1=e1,
            theta2_wall=th2,
            Theta2=params.Theta2,
            chi2=params.chi2,
            K2=params.K2,
            lam_JR=TWO_PI - 2.0 * th2,
            lam_JK=2.0 * th2 * (1.0 - f),
            lam_JK1=2.0 * th2 * f,
            thetaL_JR=wrap(th2 - 0.5 * params.Theta2),
            deg_flags=degeneracy_check(params),
            region=params.region.value,
            Theta2_smooth=params.Theta2_smooth,
        ))
    return rows
