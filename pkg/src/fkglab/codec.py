"""Rational <-> string conversion used by every JSON surface."""

from __future__ import annotations

from fractions import Fraction
from numbers import Rational


def fmt(x: Rational | int) -> str:
    """Render an exact rational as ``"p/q"`` in lowest terms, ``q > 0``.

    Integers are rendered with an explicit denominator (``"0/1"``, ``"2/1"``)
    so that every rational field in a report has one shape.
    """
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


def parse(s: str | int) -> Fraction:
    """Inverse of :func:`fmt`; also accepts bare integers and ``"p"``.

    Floats are refused: an exact pipeline must not silently absorb a
    binary approximation.
    """
    if isinstance(s, bool) or isinstance(s, float):
        raise ValueError(f"expected an exact rational, got {s!r}")
    if isinstance(s, int):
        return Fraction(s)
    if not isinstance(s, str):
        raise ValueError(f"expected a rational string 'p/q', got {s!r}")
    text = s.strip()
    if "." in text or "e" in text.lower():
        raise ValueError(f"expected a rational string 'p/q', got {s!r}")
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"expected a rational string 'p/q', got {s!r}") from exc
