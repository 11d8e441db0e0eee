"""Closed-form root finding for polynomials up to degree four.

Quartics are solved with Ferrari's method via a resolvent cubic; cubics with
Cardano's formula.  All solvers return the full complex root multiset so the
caller decides which roots count as real.
"""

from __future__ import annotations

import cmath
import math

_LEADING_TOL = 1e-12


def solve_quadratic(b: float, c: float) -> list[complex]:
    """Both roots of x^2 + b x + c."""
    disc = cmath.sqrt(b * b - 4.0 * c)
    # Pair the square root with the matching sign of b to avoid cancellation.
    if b >= 0:
        q = -0.5 * (b + disc)
    else:
        q = -0.5 * (b - disc)
    r1 = q
    r2 = c / q if q != 0 else -b - q
    return [r1, r2]


def solve_cubic(b: float, c: float, d: float) -> list[complex]:
    """All three roots of x^3 + b x^2 + c x + d."""
    # Depress: x = u - b/3.
    p = c - b * b / 3.0
    q = 2.0 * b ** 3 / 27.0 - b * c / 3.0 + d
    shift = b / 3.0

    if p == 0.0 and q == 0.0:
        return [complex(-shift)] * 3

    disc = cmath.sqrt((q / 2.0) ** 2 + (p / 3.0) ** 3)
    u3 = -q / 2.0 + disc
    if abs(u3) < 1e-300:
        u3 = -q / 2.0 - disc
    u = u3 ** (1.0 / 3.0)
    omega = complex(-0.5, math.sqrt(3.0) / 2.0)
    roots = []
    for k in range(3):
        uk = u * omega ** k
        roots.append(uk - p / (3.0 * uk) - shift)
    return roots


def largest_real_cubic_root(b: float, c: float, d: float) -> float:
    """The largest real root of x^3 + b x^2 + c x + d (always exists)."""
    # Real-arithmetic Cardano: cheaper than the complex general solver.
    p = c - b * b / 3.0
    q = 2.0 * b ** 3 / 27.0 - b * c / 3.0 + d
    shift = b / 3.0
    disc = (q / 2.0) ** 2 + (p / 3.0) ** 3
    if disc > 0.0:
        # One real root.
        s = math.sqrt(disc)
        u = math.copysign(abs(-q / 2.0 + s) ** (1.0 / 3.0), -q / 2.0 + s)
        v = math.copysign(abs(-q / 2.0 - s) ** (1.0 / 3.0), -q / 2.0 - s)
        return u + v - shift
    if p == 0.0:
        return math.copysign(abs(q) ** (1.0 / 3.0), -q) - shift
    # Three real roots; the largest uses the k = 0 trigonometric branch.
    m = 2.0 * math.sqrt(-p / 3.0)
    arg = 3.0 * q / (p * m)
    arg = min(1.0, max(-1.0, arg))
    return m * math.cos(math.acos(arg) / 3.0) - shift


def solve_quartic(a: float, b: float, c: float, d: float, e: float) -> list[complex]:
    """All roots of a x^4 + b x^3 + c x^2 + d x + e via Ferrari's method.

    A vanishing leading coefficient falls back to the cubic (then quadratic,
    then linear) formulas on the deflated polynomial.
    """
    scale = max(abs(a), abs(b), abs(c), abs(d), abs(e))
    if scale == 0.0:
        return []
    if abs(a) <= _LEADING_TOL * scale:
        if abs(b) <= _LEADING_TOL * scale:
            if abs(c) <= _LEADING_TOL * scale:
                if abs(d) <= _LEADING_TOL * scale:
                    return []
                return [complex(-e / d)]
            return solve_quadratic(d / c, e / c)
        return solve_cubic(c / b, d / b, e / b)

    b, c, d, e = b / a, c / a, d / a, e / a
    # Depress: y = t - b/4.
    p = c - 3.0 * b * b / 8.0
    q = d - b * c / 2.0 + b ** 3 / 8.0
    r = e - b * d / 4.0 + b * b * c / 16.0 - 3.0 * b ** 4 / 256.0
    shift = b / 4.0

    if abs(q) <= 1e-14 * max(1.0, abs(p), abs(r)):
        # Biquadratic: t^4 + p t^2 + r = 0.
        roots = []
        for u in solve_quadratic(p, r):
            su = cmath.sqrt(u)
            roots.extend([su - shift, -su - shift])
        return roots

    # Resolvent cubic m^3 + p m^2 + (p^2/4 - r) m - q^2/8 = 0 has a root
    # m > 0 whenever q != 0; use the largest for conditioning.
    m = largest_real_cubic_root(p, p * p / 4.0 - r, -q * q / 8.0)
    m = max(m, 1e-300)
    s = math.sqrt(2.0 * m)
    t_plus = p / 2.0 + m + q / (2.0 * s)
    t_minus = p / 2.0 + m - q / (2.0 * s)

    roots = []
    for sg, tt in ((1.0, t_plus), (-1.0, t_minus)):
        disc = cmath.sqrt(s * s / 4.0 - tt)
        half = sg * s / 2.0
        roots.extend([half + disc - shift, half - disc - shift])
    return roots


def real_roots(roots: list[complex], imag_tol: float = 1e-6) -> list[float]:
    """Real parts of roots whose imaginary part is negligible.

    A root counts as real when |Im| <= imag_tol * max(1, |Re|); conjugate
    pairs that pass the filter yield a double real root, preserving
    multiplicity.
    """
    return [z.real for z in roots if abs(z.imag) <= imag_tol * max(1.0, abs(z.real))]
