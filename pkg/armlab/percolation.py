import logging
from fractions import Fraction
from typing import Callable, Iterator, Optional, Sequence

import numpy as np

from .exceptions import *
from .lattice import DiscDomain, HexCoord, parse_domain
from .utils import RED, BLUE

MAX_ENUMERATION = 26
_MASK64 = (1 << 64) - 1


class RngStream(object):
    """
    Counter-based stream of fair bits. ``(seed, stream_id)`` fixes the whole sequence,
    distinct stream ids give independent streams.

    :param int seed: 64-bit seed
    :param int stream_id: 64-bit stream number
    """
    def __init__(self, seed: int, stream_id: int = 0):
        self.__seed = int(seed) & _MASK64
        self.__stream_id = int(stream_id) & _MASK64
        key = self.__seed | (self.__stream_id << 64)
        self.__generator = np.random.Generator(np.random.Philox(key=key))

    @property
    def seed(self) -> int:
        return self.__seed

    @property
    def stream_id(self) -> int:
        return self.__stream_id

    @property
    def generator(self) -> np.random.Generator:
        return self.__generator

    def bits(self, n: int) -> np.ndarray:
        return self.__generator.integers(0, 2, size=n, dtype=np.uint8)

    def spawn(self, stream_id: int) -> 'RngStream':
        """
        A sibling stream with the same seed
        """
        return RngStream(self.__seed, stream_id)

    def __repr__(self):
        return "RngStream(seed=%d, stream_id=%d)" % (self.__seed, self.__stream_id)


class Configuration(object):
    """
    One color bit per hexagon of a domain, ``1`` red and ``0`` blue, in the domain's index order.

    :param DiscDomain domain: the domain
    :param colors: a sequence of 0/1 values of length ``domain.n``
    """
    def __init__(self, domain: DiscDomain, colors):
        arr = np.array(colors, dtype=np.uint8).reshape(-1)
        if arr.shape[0] != domain.n:
            raise InvalidSpecException("Configuration has %d bits but %s has %d hexagons" % (arr.shape[0], domain.spec, domain.n))
        if arr.size and arr.max() > 1:
            raise InvalidSpecException("Colors must be 0 or 1")
        arr.setflags(write=False)
        self.__domain = domain
        self.__colors = arr

    @classmethod
    def uniform(cls, domain: DiscDomain, color: int) -> 'Configuration':
        return cls(domain, np.full(domain.n, color, dtype=np.uint8))

    @classmethod
    def painted(cls, domain: DiscDomain, red=(), blue=(), default: int = BLUE) -> 'Configuration':
        """
        Build a configuration by listing red and blue hexagons over a default color
        """
        colors = np.full(domain.n, default, dtype=np.uint8)
        for h in red:
            colors[domain.index_of(HexCoord(*h))] = RED
        for h in blue:
            colors[domain.index_of(HexCoord(*h))] = BLUE
        return cls(domain, colors)

    @property
    def domain(self) -> DiscDomain:
        return self.__domain

    @property
    def colors(self) -> np.ndarray:
        return self.__colors

    def __len__(self):
        return self.__colors.shape[0]

    def color(self, h: HexCoord) -> int:
        """
        :raise: KeyError when h is not in the domain
        """
        return int(self.__colors[self.__domain.index_of(h)])

    def color_at(self, index: int) -> int:
        return int(self.__colors[index])

    def is_red(self, h: HexCoord) -> bool:
        return self.color(h) == RED

    def with_colors(self, updates) -> 'Configuration':
        """
        Copy with some hexagons recolored

        :param updates: mapping of HexCoord to color
        """
        colors = self.__colors.copy()
        for h, c in dict(updates).items():
            colors[self.__domain.index_of(HexCoord(*h))] = c
        return Configuration(self.__domain, colors)

    def flipped(self, h: HexCoord) -> 'Configuration':
        return self.with_colors({h: 1 - self.color(h)})

    def restricted(self, domain: DiscDomain) -> 'Configuration':
        """
        The colors on a subdomain
        """
        return Configuration(domain, [self.color(h) for h in domain.hexagons])

    @property
    def packed(self) -> bytes:
        return np.packbits(self.__colors, bitorder='little').tobytes()

    def dumps(self) -> str:
        return "domain=%s n=%d\n%s\n" % (self.__domain.spec, self.__domain.n, self.packed.hex())

    @classmethod
    def loads(cls, text: str, domain: Optional[DiscDomain] = None) -> 'Configuration':
        """
        Parse the text produced by :meth:`dumps`

        :raise: InvalidSpecException on malformed input
        """
        lines = [line.strip() for line in text.strip().splitlines()]
        if len(lines) < 1:
            raise InvalidSpecException("Empty configuration dump")
        try:
            header = dict(field.split('=', 1) for field in lines[0].split())
            n = int(header['n'])
            spec = header['domain']
        except (KeyError, ValueError):
            raise InvalidSpecException("Malformed configuration header '%s'" % lines[0])
        if domain is None:
            domain = parse_domain(spec)
        if domain.n != n:
            raise InvalidSpecException("Header says n=%d but %s has %d hexagons" % (n, domain.spec, domain.n))
        payload = bytes.fromhex(lines[1]) if len(lines) > 1 else b''
        bits = np.unpackbits(np.frombuffer(payload, dtype=np.uint8), bitorder='little')[:n]
        return cls(domain, bits)

    def __eq__(self, other):
        return isinstance(other, Configuration) and self.__domain.spec == other.domain.spec \
            and bool(np.array_equal(self.__colors, other.colors))

    def __hash__(self):
        return hash((self.__domain.spec, self.packed))

    def __repr__(self):
        return "Configuration(%s, red=%d/%d)" % (self.__domain.spec, int(self.__colors.sum()), len(self))


def sample(domain: DiscDomain, rng: RngStream) -> Configuration:
    """
    Critical site percolation: every hexagon red with probability 1/2, independently

    :param DiscDomain domain: the domain to color
    :param RngStream rng: the stream to draw from, advanced by ``domain.n`` bits
    """
    return Configuration(domain, rng.bits(domain.n))


def _check_enumerable(domain: DiscDomain):
    if domain.n > MAX_ENUMERATION:
        raise TooLargeException("%s has %d hexagons, enumeration is capped at %d" % (domain.spec, domain.n, MAX_ENUMERATION))


def enumerate_all(domain: DiscDomain) -> Iterator[Configuration]:
    """
    Every configuration of the domain, configuration ``i`` has bit ``k`` equal to bit ``k`` of i

    :raise: TooLargeException above ``MAX_ENUMERATION`` hexagons
    """
    _check_enumerable(domain)
    shifts = np.arange(domain.n, dtype=np.int64)
    for i in range(1 << domain.n):
        yield Configuration(domain, (i >> shifts) & 1)


def exact_probability(domain: DiscDomain, predicate: Callable[[Configuration], bool]) -> Fraction:
    """
    Exact probability of an event by exhaustive enumeration

    :raise: TooLargeException above ``MAX_ENUMERATION`` hexagons
    """
    _check_enumerable(domain)
    log = logging.getLogger(__name__)
    log.debug("enumerating %d configurations of %s", 1 << domain.n, domain.spec)
    hits = sum(1 for cfg in enumerate_all(domain) if predicate(cfg))
    return Fraction(hits, 1 << domain.n)
