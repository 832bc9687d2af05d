"""Canonical angle arithmetic.

Every mod-2pi (or mod-circumference) reduction in the package goes through
``wrap`` so that rounding at the seam is consistent everywhere: the canonical
representative lives in [-C/2, C/2) and a value landing exactly on +C/2 maps
to -C/2.
"""

from __future__ import annotations

import math

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap(angle, circumference: float = TWO_PI):
    """Reduce an angle (scalar or array) to [-C/2, C/2).

    In-range values pass through bit-exactly; the event engine relies on that
    to recognize a phase sitting exactly on a target.
    """
    half = 0.5 * circumference
    if isinstance(angle, np.ndarray):
        r = (angle + half) % circumference - half
        # float '%' can round a tiny negative operand up to the full modulus,
        # which would put r exactly on +half
        r = np.where(r >= half, r - circumference, r)
        return np.where((angle >= -half) & (angle < half), angle, r)
    if -half <= angle < half:
        return angle
    r = (angle + half) % circumference - half
    if r >= half:
        r -= circumference
    return r


def circle_dist(a, b, circumference: float = TWO_PI):
    """Shortest distance between two points on the circle."""
    d = wrap(a - b, circumference)
    return np.abs(d) if isinstance(d, np.ndarray) else abs(d)


def frac(x: float) -> float:
    """Fractional part in [0, 1)."""
    return x - math.floor(x)
