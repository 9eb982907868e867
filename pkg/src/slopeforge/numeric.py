"""Numeric backends: exact rationals and high-precision reals.

Exact data (breakpoints, node values, Markov point sets) lives in
`fractions.Fraction`.  Spectral data (growth rate, eigenvector, the
increasing factor map) is irrational in general and is carried either
in mpmath arbitrary-precision floats or, for the large structures
produced by the approximation pipeline, in ordinary float64.  The
mantissa width defaults to 128 bits and can be overridden with the
SLOPEFORGE_PRECISION environment variable (in bits).
"""

from __future__ import annotations

import math
import os
from fractions import Fraction

import mpmath

DEFAULT_PRECISION_BITS = 128


def precision_bits() -> int:
    """Mantissa bits for high-precision arithmetic (env-overridable)."""
    raw = os.environ.get("SLOPEFORGE_PRECISION")
    if raw is None:
        return DEFAULT_PRECISION_BITS
    try:
        bits = int(raw)
    except ValueError:
        raise ValueError(f"SLOPEFORGE_PRECISION must be an integer, got {raw!r}")
    if bits < 24:
        raise ValueError("SLOPEFORGE_PRECISION below 24 bits is not supported")
    return bits


def mp_context(bits: int | None = None) -> mpmath.ctx_mp.MPContext:
    """A fresh mpmath context at the requested precision.

    Using a local context keeps library calls independent of the global
    mpmath state a host application may have configured.
    """
    ctx = mpmath.mp.clone()
    ctx.prec = precision_bits() if bits is None else bits
    return ctx


def to_mpf(ctx, x):
    if isinstance(x, Fraction):
        return ctx.mpf(x.numerator) / ctx.mpf(x.denominator)
    return ctx.mpf(x)


def generic_log(x):
    """Natural log working for float and mpf alike."""
    if isinstance(x, float) or isinstance(x, int):
        return math.log(x)
    ctx = getattr(x, "context", mpmath.mp)
    return ctx.log(x)


def exact_fraction(value) -> Fraction:
    """Lossless binary-float (float or mpf) to Fraction conversion."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float) or isinstance(value, int):
        return Fraction(value)
    sign, man, exp, _ = value._mpf_
    if man == 0 and exp != 0:
        raise ValueError(f"cannot convert special value {value!r}")
    frac = Fraction(man, 1) * Fraction(2) ** exp
    return -frac if sign else frac


def rationalize(value, digits: int = 40) -> Fraction:
    """Round a real to a Fraction with `digits` decimal digits.

    Used when an irrational construction result has to be rendered as
    an exact piecewise-affine map.  The rounding error is 10**-digits,
    far below every verification tolerance in this package.  Exactly
    representable inputs shorter than `digits` come back unchanged.
    """
    frac = exact_fraction(value)
    scale = 10**digits
    scaled = frac * scale
    rounded = (scaled.numerator + scaled.denominator // 2) // scaled.denominator
    out = Fraction(rounded, scale)
    return frac if out == frac else out


def format_decimal(value, sig: int = 15) -> str:
    """Fixed-significant-digit decimal rendering (deterministic)."""
    if isinstance(value, Fraction):
        if value.denominator == 1:
            return str(value.numerator)
        value = mpmath.mpf(value.numerator) / value.denominator
    if isinstance(value, (int,)):
        return str(value)
    if isinstance(value, float):
        return f"{value:.{sig}g}"
    return mpmath.nstr(value, sig, strip_zeros=False)


def format_rational(x: Fraction) -> str:
    if x.denominator == 1:
        return str(x.numerator)
    return f"{x.numerator}/{x.denominator}"


def parse_rational(token: str) -> Fraction:
    """Parse `p/q` or an integer or decimal literal into a Fraction."""
    token = token.strip()
    try:
        if "/" in token:
            num, den = token.split("/")
            return Fraction(int(num), int(den))
        if "." in token or "e" in token or "E" in token:
            return Fraction(token)
        return Fraction(int(token))
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"not a rational literal: {token!r}") from exc
