import hashlib
import math
from fractions import Fraction
from typing import Tuple

from .exceptions import *

RED = 1
BLUE = 0


def parse_radius(text) -> Fraction:
    """
    Parse a radius written as a decimal integer or an ``int/int`` rational

    :param text: A string such as ``16`` or ``33/2``
    :return: The radius
    :rtype: Fraction
    :raise: InvalidSpecException
    """
    if isinstance(text, Fraction):
        value = text
    elif isinstance(text, int):
        value = Fraction(text)
    else:
        text = str(text).strip()
        parts = text.split('/')
        if len(parts) > 2 or not all(p.strip().isdigit() for p in parts):
            raise InvalidSpecException("Radius '%s' is not an integer or integer/integer rational" % text)
        if len(parts) == 2 and int(parts[1]) == 0:
            raise InvalidSpecException("Radius '%s' has a zero denominator" % text)
        value = Fraction(int(parts[0]), int(parts[1]) if len(parts) == 2 else 1)
    if value <= 0:
        raise InvalidSpecException("Radius must be positive, got %s" % value)
    return value


def format_radius(value: Fraction) -> str:
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    return "%s/%s" % (value.numerator, value.denominator)


def row_extent(r: Fraction) -> int:
    """
    Largest ``a >= 0`` such that the hexagon ``(a, 0)`` lies in the open disk of radius r
    """
    return int(math.ceil(Fraction(r))) - 1


def parse_colors(text: str) -> Tuple[int, ...]:
    """
    Turn a color word over ``{r, b}`` into a tuple of color bits

    :param str text: e.g. ``rbr``
    :raise: InvalidSpecException
    """
    if not text or any(ch not in 'rb' for ch in text):
        raise InvalidSpecException("Colors must be a non-empty word over {r,b}, got '%s'" % text)
    return tuple(RED if ch == 'r' else BLUE for ch in text)


def format_colors(colors) -> str:
    return ''.join('r' if c == RED else 'b' for c in colors)


def alternating(j: int, first: int = RED) -> Tuple[int, ...]:
    return tuple(first if k % 2 == 0 else 1 - first for k in range(j))


def config_hash(text: str) -> str:
    return hashlib.sha256(text.encode('utf-8')).hexdigest()[:12]
