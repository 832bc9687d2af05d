"""Analytic return maps to the section Sigma1 as interval exchanges.

On each level set the return map of the impact flow to the section where the
first oscillator sits at its rightmost turning point is an isometric
piecewise rotation of the second oscillator's phase:

* complement regions: a plain rotation by Theta2 on a circle of circumference
  2*theta2_hat (equivalently a 2-piece exchange),
* step family: a 3-piece exchange on the full 2 pi circle whose pieces are
  the phases that bounce off the right face once (JR) and those that pass
  above the step bouncing K2 or K2+1 times off the upper face.

Parameters:

* Theta2_smooth = 2 pi T1/T2, the phase gain of dof 2 per free dof-1 period,
* Theta2 = (theta1_hat/pi) * Theta2_smooth, the gain while right of the step,
* chi2 = (Theta2_smooth - Theta2) / (2 theta2_wall), the time above the step
  measured in upper-face bounce periods; K2 = floor(chi2),

tied together by the identity Theta2_smooth = 2*theta2_wall*chi2 + Theta2.
Cutting the circle at -pi and at the pre-image of -pi induces the
generically five-piece exchange on the fundamental interval [-pi, pi).
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

import numpy as np

from .angles import TWO_PI, wrap
from .potentials import period
from .step_system import LevelSet, RegionTag, StepConfig, classify


@dataclass(frozen=True)
class ReturnMapParams:
    """Level-set data determining the return map to Sigma1."""

    e1: float
    e2: float
    h: float
    region: RegionTag
    theta1_hat: float
    theta2_wall: float  # effective dof-2 wall phase (pi where that face is unreachable)
    Theta2_smooth: float
    Theta2: float
    Theta2_star: float
    chi2: float  # +inf exactly on the e2 = h2_step boundary with q2_wall > 0
    K2: Optional[int]
    T1: float
    T1_tilde: float

    @property
    def chi2_frac(self) -> float:
        if not math.isfinite(self.chi2):
            raise ValueError("chi2 diverges on this level set")
        return self.chi2 - self.K2


def compute_params(cfg: StepConfig, ls: LevelSet, *,
                   use_quadrature: bool = False) -> ReturnMapParams:
    """Evaluate the return-map parameters on one level set.

    Raises on disallowed level sets and on e1 in {0, h} (a frozen degree of
    freedom has no section return map).
    """
    rc = classify(cfg, ls, use_quadrature=use_quadrature)
    if rc.tag is RegionTag.DISALLOWED:
        raise ValueError("level set is not in the allowed region of motion")
    if ls.e1 <= 0.0 or ls.e2 <= 0.0:
        raise ValueError("both energies must be positive")
    t1 = period(cfg.pot1, ls.e1, use_quadrature=use_quadrature)
    t2 = period(cfg.pot2, ls.e2, use_quadrature=use_quadrature)
    th1, th2 = rc.theta1_hat, rc.theta2_hat
    big_smooth = TWO_PI * t1 / t2
    if th1 == math.pi:
        big = big_smooth
        t1_tilde = t1
    else:
        big = (th1 / math.pi) * big_smooth
        t1_tilde = (th1 / math.pi) * t1
    if th2 > 0.0:
        chi2 = (big_smooth - big) / (2.0 * th2)
        k2 = math.floor(chi2)
        star = 2.0 * th2 * ((big / (2.0 * th2)) % 1.0)
    else:
        chi2 = math.inf
        k2 = None
        star = 0.0
    return ReturnMapParams(
        e1=ls.e1, e2=ls.e2, h=ls.h, region=rc.tag,
        theta1_hat=th1, theta2_wall=th2,
        Theta2_smooth=big_smooth, Theta2=big, Theta2_star=star,
        chi2=chi2, K2=k2, T1=t1, T1_tilde=t1_tilde,
    )


@dataclass(frozen=True)
class Piece:
    """One arc of the circle together with its rigid shift."""

    lo: float      # arc start, canonical representative
    length: float
    shift: float
    tag: str


@dataclass(frozen=True)
class CircleIem:
    """Piecewise rotation on a circle; arcs are listed in circle order.

    Pieces are left-closed right-open along the orientation; a phase landing
    exactly on a cut belongs to the piece on its right.
    """

    circumference: float
    pieces: tuple[Piece, ...]
    flags: tuple[str, ...] = ()

    def _offsets(self) -> list[float]:
        cum = [0.0]
        for p in self.pieces:
            cum.append(cum[-1] + p.length)
        return cum

    def piece_index(self, theta: float) -> int:
        off = (theta - self.pieces[0].lo) % self.circumference
        cum = self._offsets()
        idx = bisect_right(cum, off) - 1
        return min(idx, len(self.pieces) - 1)

    def apply(self, theta: float) -> float:
        p = self.pieces[self.piece_index(theta)]
        return wrap(theta + p.shift, self.circumference)

    def apply_array(self, thetas: np.ndarray) -> np.ndarray:
        idx = self.piece_index_array(thetas)
        shifts = np.array([p.shift for p in self.pieces])
        return wrap(thetas + shifts[idx], self.circumference)

    def piece_index_array(self, thetas: np.ndarray) -> np.ndarray:
        off = (thetas - self.pieces[0].lo) % self.circumference
        cum = np.array(self._offsets())
        idx = np.searchsorted(cum, off, side="right") - 1
        return np.minimum(idx, len(self.pieces) - 1)

    def image_arcs(self) -> list[tuple[float, float, str]]:
        """(image arc start, length, tag) for each piece, canonical starts."""
        c = self.circumference
        return [(wrap(p.lo + p.shift, c), p.length, p.tag) for p in self.pieces]

    def effective_pieces(self, tol: float = 1e-9) -> tuple[Piece, ...]:
        return tuple(p for p in self.pieces if p.length > tol)

    def lengths_by_tag(self) -> dict[str, float]:
        return {p.tag: p.length for p in self.pieces}


def build_rotation(params: ReturnMapParams) -> CircleIem:
    """Return map on a complement-region level set: rotation by Theta2.

    The circle has circumference 2*theta2_hat and the rotation splits into
    the 2-piece exchange with lengths (C - Theta2_star, Theta2_star).
    """
    if params.region in (RegionTag.STEP_FAMILY, RegionTag.DISALLOWED):
        raise ValueError("rotation form only applies to complement-region level sets")
    half = params.theta2_wall
    c = 2.0 * half
    star = params.Theta2_star
    if star == 0.0:
        return CircleIem(c, (Piece(-half, c, 0.0, "A"),), flags=("identity",))
    pieces = (
        Piece(-half, c - star, star, "A"),
        Piece(half - star, star, star - c, "B"),
    )
    return CircleIem(c, pieces, flags=())


def build_step_circle_iem(params: ReturnMapParams) -> CircleIem:
    """Three-piece exchange (JR, JK, JK1) on the 2 pi circle of a step-family level set.

    Piece order on the circle starts at the left end of JR; the image order
    is (JR, JK1, JK).  When chi2 is an exact integer JK1 has zero length and
    the map degenerates to the rotation by Theta2.
    """
    if params.region is not RegionTag.STEP_FAMILY:
        raise ValueError("step-family level set required")
    if not math.isfinite(params.chi2):
        raise ValueError("chi2 diverges on this boundary level set")
    th2 = params.theta2_wall
    f = params.chi2_frac
    lam_r = TWO_PI - 2.0 * th2
    lam_k = 2.0 * th2 * (1.0 - f)
    lam_k1 = 2.0 * th2 * f
    lo_r = wrap(th2 - 0.5 * params.Theta2)
    shift_r = wrap(params.Theta2)
    shift_k = wrap(params.Theta2 + 2.0 * th2 * f)
    shift_k1 = wrap(params.Theta2 + 2.0 * th2 * (f - 1.0))
    pieces = []
    flags = []
    if lam_r > 0.0:
        pieces.append(Piece(lo_r, lam_r, shift_r, "JR"))
    else:
        flags.append("no_right_face")
    pieces.append(Piece(wrap(lo_r + lam_r), lam_k, shift_k, "JK"))
    if lam_k1 > 0.0:
        pieces.append(Piece(wrap(lo_r + lam_r + lam_k), lam_k1, shift_k1, "JK1"))
    else:
        flags.append("rotation")  # exact chi2 integer: pure rotation by Theta2
    return CircleIem(TWO_PI, tuple(pieces), flags=tuple(flags))


def return_map(cfg: StepConfig, ls: LevelSet, *,
               use_quadrature: bool = False) -> tuple[ReturnMapParams, CircleIem]:
    """Parameters plus the circle exchange for any allowed level set."""
    params = compute_params(cfg, ls, use_quadrature=use_quadrature)
    if params.region is RegionTag.STEP_FAMILY:
        return params, build_step_circle_iem(params)
    return params, build_rotation(params)


@dataclass(frozen=True)
class FundamentalPiece:
    lo: float
    hi: float
    shift: float  # image interval is [lo + shift, hi + shift), no wrapping
    tag: str


@dataclass(frozen=True)
class FundamentalIem:
    """Exchange induced on the fundamental interval [-C/2, C/2)."""

    circumference: float
    pieces: tuple[FundamentalPiece, ...]
    cut_preimages: tuple[float, ...]
    flags: tuple[str, ...] = ()

    def apply(self, theta: float) -> float:
        theta = wrap(theta, self.circumference)
        los = [p.lo for p in self.pieces]
        idx = min(bisect_right(los, theta) - 1, len(self.pieces) - 1)
        idx = max(idx, 0)
        return wrap(theta + self.pieces[idx].shift, self.circumference)


def induce_fundamental(ci: CircleIem) -> FundamentalIem:
    """Cut the circle exchange at the seam and at the seam's pre-image.

    A generic 3-piece step exchange yields five intervals; coincidences of a
    cut with an existing endpoint (or of the two cuts with each other) yield
    fewer and are flagged.
    """
    c = ci.circumference
    seam = -0.5 * c
    work = [(p.lo, p.length, p.shift, p.tag) for p in ci.pieces]

    def split_at_point(items, point, use_image):
        out = []
        hit = None
        for lo, length, shift, tag in items:
            ref = lo + shift if use_image else lo
            off = (point - ref) % c
            if 0.0 < off < length:
                out.append((lo, off, shift, tag))
                out.append((wrap(lo + off, c), length - off, shift, tag))
                hit = wrap(lo + off, c)
            else:
                out.append((lo, length, shift, tag))
        return out, hit

    work, _ = split_at_point(work, seam, use_image=False)
    cut_pres = []
    final = []
    for item in work:
        parts, pre = split_at_point([item], seam, use_image=True)
        final.extend(parts)
        if pre is not None:
            cut_pres.append(pre)

    pieces = []
    for lo, length, shift, tag in final:
        lo_f = wrap(lo, c)
        img_lo = wrap(lo + shift, c)
        pieces.append(FundamentalPiece(lo=lo_f, hi=lo_f + length,
                                       shift=img_lo - lo_f, tag=tag))
    pieces.sort(key=lambda p: p.lo)
    flags = list(ci.flags)
    if len(pieces) < len(ci.pieces) + 2:
        flags.append("cut_coincidence")
    return FundamentalIem(circumference=c, pieces=tuple(pieces),
                          cut_preimages=tuple(sorted(cut_pres)),
                          flags=tuple(flags))


def rotation_kind(circumference: float, shift: float, *,
                  max_denominator: int = 4096,
                  tol: float = 1e-12) -> tuple[str, Optional[int]]:
    """Classify a circle rotation as identity, periodic(q) or minimal.

    Rationality of the rotation number is detected only up to
    ``max_denominator``; beyond that the rotation is reported minimal.
    """
    rho = (shift / circumference) % 1.0
    if rho < tol or 1.0 - rho < tol:
        return "identity", 1
    guess = Fraction(rho).limit_denominator(max_denominator)
    if abs(rho - float(guess)) < tol:
        return "periodic", guess.denominator
    return "minimal", None


def degeneracy_check(params: ReturnMapParams, tol: float = 1e-9) -> tuple[str, ...]:
    """Which zero-length / seam-collision conditions hold on this level set.

    Three families are scanned over the admissible integers: an exchange
    piece of zero length (chi2 integer), an endpoint of JR or its image on
    the seam, and an endpoint of JK or of JK1's image on the seam.
    """
    if params.region is not RegionTag.STEP_FAMILY:
        raise ValueError("step-family level set required")
    if not math.isfinite(params.chi2):
        return ("chi2_divergent",)
    th2 = params.theta2_wall
    big, smooth = params.Theta2, params.Theta2_smooth
    f = params.chi2_frac
    tags = []
    # over the admissible K in [0, K2+1] the residual is 2*theta2_wall*|K - chi2|,
    # so only the two integers adjacent to chi2 can ever lie within tolerance
    for k in {max(params.K2, 0), params.K2 + 1}:
        if abs(big - (smooth - 2.0 * k * th2)) < tol:
            tags.append(f"lambda_zero:K={k}")
    m_hi = math.ceil(smooth / TWO_PI) + 2
    for m in range(-2, m_hi + 1):
        odd = TWO_PI * (1 + 2 * m)
        if abs(big - (2.0 * th2 + odd)) < tol:
            tags.append(f"jr_cut:M={m},s=+1")
        if abs(big - (-2.0 * th2 + odd)) < tol:
            tags.append(f"jr_cut:M={m},s=-1")
        if abs(big - (2.0 * th2 * (1.0 - 2.0 * f) + odd)) < tol:
            tags.append(f"jk_cut:M={m}")
    return tuple(tags)


def tiling_residual(iem: Union[CircleIem, FundamentalIem]) -> tuple[float, float]:
    """(domain, image) tiling defects: worst gap/overlap between consecutive arcs.

    Both are zero (to rounding) for a valid exchange: the pieces partition
    the circle and so do their images.
    """
    c = iem.circumference
    if isinstance(iem, CircleIem):
        dom = [(wrap(p.lo, c), p.length) for p in iem.pieces]
        img = [(wrap(p.lo + p.shift, c), p.length) for p in iem.pieces]
    else:
        dom = [(p.lo, p.hi - p.lo) for p in iem.pieces]
        img = [(p.lo + p.shift, p.hi - p.lo) for p in iem.pieces]

    def defect(arcs: list[tuple[float, float]]) -> float:
        arcs = sorted(arcs)
        worst = abs(sum(a[1] for a in arcs) - c)
        for k in range(len(arcs)):
            lo_next = arcs[(k + 1) % len(arcs)][0]
            end = arcs[k][0] + arcs[k][1]
            gap = (lo_next - end) % c
            worst = max(worst, min(gap, c - gap))
        return worst

    return defect(dom), defect(img)


def image_order(iem: CircleIem) -> list[str]:
    """Piece tags in the circle order of their images."""
    c = iem.circumference
    return [p.tag for p in sorted(iem.pieces,
                                  key=lambda p: wrap(p.lo + p.shift, c))]


def to_dict(iem: Union[CircleIem, FundamentalIem]) -> dict:
    """JSON-ready description: circumference, pieces, image permutation, flags."""
    c = iem.circumference
    if isinstance(iem, CircleIem):
        pieces = [{"lo": p.lo, "hi": p.lo + p.length, "shift": p.shift,
                   "tag": p.tag} for p in iem.pieces]
        order = sorted(range(len(iem.pieces)),
                       key=lambda k: wrap(iem.pieces[k].lo + iem.pieces[k].shift, c))
        perm = [iem.pieces[k].tag for k in order]
        kind = "circle"
    else:
        pieces = [{"lo": p.lo, "hi": p.hi, "shift": p.shift, "tag": p.tag}
                  for p in iem.pieces]
        order = sorted(range(len(iem.pieces)),
                       key=lambda k: iem.pieces[k].lo + iem.pieces[k].shift)
        perm = [f"{iem.pieces[k].tag}#{k}" for k in order]
        kind = "fundamental"
    return {"kind": kind, "circumference": c, "pieces": pieces,
            "permutation": perm, "flags": list(iem.flags)}
