import functools
import logging
import math
from fractions import Fraction
from typing import Callable, Dict, FrozenSet, Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .exceptions import *
from .utils import parse_radius, format_radius, row_extent

SQRT3 = math.sqrt(3.0)

# counterclockwise, starting east
DIRECTIONS = ((1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1))
_DIRECTION_INDEX = {d: k for k, d in enumerate(DIRECTIONS)}

DOMAIN_KINDS = ('disk', 'half', 'ann', 'semiann', 'halfexp', 'planeexp')


class HexCoord(NamedTuple):
    """
    A site of the triangular lattice, equivalently a hexagon of the dual tiling.
    The embedded center is ``a*(1,0) + b*(1/2, sqrt(3)/2)``.
    """
    a: int
    b: int

    def shift(self, k: int) -> 'HexCoord':
        da, db = DIRECTIONS[k % 6]
        return HexCoord(self.a + da, self.b + db)

    @property
    def center(self) -> Tuple[float, float]:
        return (self.a + self.b / 2.0, self.b * SQRT3 / 2.0)

    def norm2(self) -> int:
        """
        squared Euclidean norm of the center, an exact integer on this lattice
        """
        return self.a * self.a + self.a * self.b + self.b * self.b


def neighbors(h: HexCoord) -> List[HexCoord]:
    """
    The six neighbors of h, counterclockwise starting from ``(a+1, b)``

    :param HexCoord h: the hexagon
    :rtype: list
    """
    return [h.shift(k) for k in range(6)]


def direction(h: HexCoord, g: HexCoord) -> int:
    """
    Index k such that ``g == h.shift(k)``

    :raise: ValueError if the hexagons are not adjacent
    """
    try:
        return _DIRECTION_INDEX[(g[0] - h[0], g[1] - h[1])]
    except KeyError:
        raise ValueError("%s and %s are not adjacent" % (h, g))


def in_radius(h: HexCoord, radius: Fraction) -> bool:
    radius = Fraction(radius)
    return h.norm2() * radius.denominator ** 2 < radius.numerator ** 2


class DualVertex(NamedTuple):
    """
    A vertex of the hexagonal tiling, i.e. a triangle of three mutually adjacent hexagons.
    ``s == 0`` is the triangle ``(a,b),(a+1,b),(a,b+1)``, ``s == 1`` is ``(a+1,b),(a,b+1),(a+1,b+1)``.
    """
    a: int
    b: int
    s: int

    @classmethod
    def of(cls, hexagons: Iterable[HexCoord]) -> 'DualVertex':
        hs = sorted((HexCoord(*h) for h in hexagons), key=lambda h: (h.a + h.b, h.b, h.a))
        if len(set(hs)) != 3:
            raise ValueError("A dual vertex needs three distinct hexagons, got %s" % hs)
        sums = [h.a + h.b for h in hs]
        if sums[0] + 1 == sums[1] == sums[2]:
            vertex = cls(hs[0].a, hs[0].b, 0)
        elif sums[0] == sums[1] == sums[2] - 1:
            vertex = cls(hs[2].a - 1, hs[2].b - 1, 1)
        else:
            raise ValueError("%s is not a triangle of the lattice" % hs)
        if set(vertex.hexagons) != set(hs):
            raise ValueError("%s is not a triangle of the lattice" % hs)
        return vertex

    @property
    def hexagons(self) -> Tuple[HexCoord, HexCoord, HexCoord]:
        a, b = self.a, self.b
        if self.s == 0:
            return (HexCoord(a, b), HexCoord(a + 1, b), HexCoord(a, b + 1))
        return (HexCoord(a + 1, b), HexCoord(a, b + 1), HexCoord(a + 1, b + 1))

    @property
    def position(self) -> Tuple[float, float]:
        xs, ys = zip(*(h.center for h in self.hexagons))
        return (sum(xs) / 3.0, sum(ys) / 3.0)


class DualEdge(NamedTuple):
    """
    The edge shared by two adjacent hexagons, stored in sorted order.
    """
    h1: HexCoord
    h2: HexCoord

    @classmethod
    def of(cls, h: HexCoord, g: HexCoord) -> 'DualEdge':
        direction(h, g)
        h, g = HexCoord(*h), HexCoord(*g)
        return cls(h, g) if h <= g else cls(g, h)

    @property
    def vertices(self) -> Tuple[DualVertex, DualVertex]:
        k = direction(self.h1, self.h2)
        return (DualVertex.of((self.h1, self.h2, self.h1.shift(k + 1))),
                DualVertex.of((self.h1, self.h2, self.h1.shift(k - 1))))


class Step(NamedTuple):
    """
    One directed edge of a b-path: ``left`` is the hexagon on the left of travel,
    ``right = left.shift(k)``. ``ahead`` completes the vertex the step points to.
    """
    left: HexCoord
    k: int

    @classmethod
    def between(cls, left: HexCoord, right: HexCoord) -> 'Step':
        return cls(HexCoord(*left), direction(left, right))

    @property
    def right(self) -> HexCoord:
        return self.left.shift(self.k)

    @property
    def ahead(self) -> HexCoord:
        return self.left.shift(self.k + 1)

    @property
    def behind(self) -> HexCoord:
        return self.left.shift(self.k - 1)

    @property
    def edge(self) -> DualEdge:
        return DualEdge.of(self.left, self.right)

    @property
    def forward_vertex(self) -> DualVertex:
        return DualVertex.of((self.left, self.right, self.ahead))

    @property
    def backward_vertex(self) -> DualVertex:
        return DualVertex.of((self.left, self.right, self.behind))

    def advance(self, ahead_is_left: bool) -> 'Step':
        if ahead_is_left:
            return Step(self.ahead, (self.k - 1) % 6)
        return Step(self.left, (self.k + 1) % 6)


def walk(start: Step, ahead_is_left: Callable[[Step], bool], until: Callable[[Step], bool],
         limit: int = 10_000_000) -> List[Step]:
    """
    Follow the b-path that keeps ``ahead_is_left`` hexagons on its left until ``until`` holds
    for the current step. The start step is included.

    :raise: TraceException when the step limit is exceeded
    """
    steps = [start]
    current = start
    while not until(current):
        if len(steps) > limit:
            raise TraceException("walk from %s did not terminate within %d steps" % (start, limit))
        current = current.advance(ahead_is_left(current))
        steps.append(current)
    return steps


class BPath(object):
    """
    A path on the dual graph given by its directed steps.

    :param steps: consecutive :class:`Step` values
    :param bool closed: whether the last step leads back into the first
    """
    def __init__(self, steps: Sequence[Step], closed: bool = False):
        self.__steps = tuple(steps)
        self.__closed = closed

    @property
    def steps(self) -> Tuple[Step, ...]:
        return self.__steps

    @property
    def closed(self) -> bool:
        return self.__closed

    def __len__(self):
        return len(self.__steps)

    def __iter__(self):
        return iter(self.__steps)

    def __getitem__(self, item):
        return self.__steps[item]

    def __eq__(self, other):
        return isinstance(other, BPath) and self.__steps == other.steps and self.__closed == other.closed

    def __hash__(self):
        return hash((self.__steps, self.__closed))

    def __repr__(self):
        return "BPath(%d steps, closed=%s)" % (len(self.__steps), self.__closed)

    @property
    def edges(self) -> List[DualEdge]:
        return [s.edge for s in self.__steps]

    @property
    def vertices(self) -> List[DualVertex]:
        if not self.__steps:
            return []
        verts = [self.__steps[0].backward_vertex] + [s.forward_vertex for s in self.__steps]
        if self.__closed:
            verts.pop()
        return verts

    @property
    def left_cells(self) -> List[HexCoord]:
        return [s.left for s in self.__steps]

    @property
    def right_cells(self) -> List[HexCoord]:
        return [s.right for s in self.__steps]

    @property
    def start(self) -> DualVertex:
        return self.__steps[0].backward_vertex

    @property
    def end(self) -> DualVertex:
        return self.__steps[-1].forward_vertex

    def polygon(self) -> List[Tuple[float, float]]:
        return [v.position for v in self.vertices]

    def dumps(self) -> str:
        """
        one vertex per line as ``a b s``
        """
        return ''.join("%d %d %d\n" % v for v in self.vertices)


def loads_vertices(text: str) -> List[DualVertex]:
    verts = []
    for line in text.splitlines():
        line = line.strip()
        if line:
            a, b, s = line.split()
            verts.append(DualVertex(int(a), int(b), int(s)))
    return verts


def encloses(polygon: Sequence[Tuple[float, float]], point: Tuple[float, float]) -> bool:
    """
    Even-odd ray casting test
    """
    x, y = point
    inside = False
    n = len(polygon)
    for i in range(n):
        x1, y1 = polygon[i]
        x2, y2 = polygon[(i + 1) % n]
        if (y1 > y) != (y2 > y):
            xc = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if xc > x:
                inside = not inside
    return inside


def boundary_loops(hexagons: FrozenSet[HexCoord]) -> List[BPath]:
    """
    All boundary loops of a finite hexagon set, each keeping the set on its left.
    The first loop is the outer one (counterclockwise), holes follow.
    """
    pending = set(Step(h, k) for h in hexagons for k in range(6) if h.shift(k) not in hexagons)
    loops = []
    while pending:
        start = min(pending, key=lambda s: (s.left.b, s.left.a, (s.k - 4) % 6))
        steps = walk(start.advance(start.ahead in hexagons),
                     lambda s: s.ahead in hexagons,
                     lambda s: s == start,
                     limit=len(pending) + 1)
        steps = [start] + steps[:-1]
        pending.difference_update(steps)
        loops.append(BPath(steps, closed=True))
    return loops


def hexagons_in_disk(radius, center: Tuple[float, float] = (0.0, 0.0)) -> List[HexCoord]:
    """
    Hexagons whose centers lie in the open disk, sorted by ``(b, a)``.
    An origin-centered disk uses the exact integer norm.
    """
    radius = Fraction(radius)
    cx, cy = center
    m = int(math.ceil(2 * float(radius) + abs(cx) + abs(cy))) + 2
    bs, as_ = np.mgrid[-m:m + 1, -m:m + 1]
    if cx == 0 and cy == 0:
        mask = (as_ * as_ + as_ * bs + bs * bs) * radius.denominator ** 2 < radius.numerator ** 2
    else:
        x = as_ + bs / 2.0 - cx
        y = bs * (SQRT3 / 2.0) - cy
        mask = x * x + y * y < float(radius) ** 2
    return [HexCoord(int(a), int(b)) for b, a in zip(bs[mask], as_[mask])]


class DiscDomain(object):
    """
    A discretized disk, half-disk, annulus or semi-annulus together with the naming
    of its boundary arcs. Build it with :func:`build_domain` or :func:`parse_domain`.

    :param str kind: one of ``DOMAIN_KINDS``
    :param R: outer radius
    :param r: inner radius (or the inner interval half-width for half-disks), may be None
    :param hexagons: member hexagons
    :param namer: maps an outside hexagon to its arc name
    :param dict marks: named boundary vertices
    """
    def __init__(self, kind: str, R: Fraction, r: Optional[Fraction], hexagons: Iterable[HexCoord],
                 namer: Callable[[HexCoord], str], marks: Optional[Dict[str, DualVertex]] = None):
        self._log = logging.getLogger(__name__)
        self.__kind = kind
        self.__R = Fraction(R)
        self.__r = Fraction(r) if r is not None else None
        self.__hexagons = tuple(sorted(set(hexagons), key=lambda h: (h.b, h.a)))
        self.__index = {h: i for i, h in enumerate(self.__hexagons)}
        self.__namer = namer
        self.__marks = dict(marks or {})
        self.__loops = None  # type: Optional[List[BPath]]
        self.__arcs = {}  # type: Dict[str, BPath]

    @property
    def kind(self) -> str:
        return self.__kind

    @property
    def R(self) -> Fraction:
        return self.__R

    @property
    def r(self) -> Optional[Fraction]:
        return self.__r

    @property
    def spec(self) -> str:
        parts = [self.__kind]
        if self.__r is not None:
            parts.append(format_radius(self.__r))
        parts.append(format_radius(self.__R))
        return ':'.join(parts)

    @property
    def hexagons(self) -> Tuple[HexCoord, ...]:
        return self.__hexagons

    @property
    def n(self) -> int:
        return len(self.__hexagons)

    @property
    def marks(self) -> Dict[str, DualVertex]:
        return dict(self.__marks)

    def __len__(self):
        return len(self.__hexagons)

    def __contains__(self, h) -> bool:
        return h in self.__index

    def __iter__(self):
        return iter(self.__hexagons)

    def __repr__(self):
        return "DiscDomain(%s, n=%d)" % (self.spec, self.n)

    def index_of(self, h: HexCoord) -> int:
        return self.__index[h]

    def arc_of(self, h: HexCoord) -> str:
        """
        Name of the boundary arc an outside hexagon belongs to

        :raise: ValueError for member hexagons
        """
        if h in self.__index:
            raise ValueError("%s is inside %s" % (h, self.spec))
        return self.__namer(h)

    @property
    def loops(self) -> List[BPath]:
        if self.__loops is None:
            self.__loops = boundary_loops(frozenset(self.__hexagons))
        return self.__loops

    @property
    def outer_loop(self) -> BPath:
        return self.loops[0]

    @property
    def arc_names(self) -> List[str]:
        names = []  # type: List[str]
        for loop in self.loops:
            for s in loop:
                name = self.__namer(s.right)
                if name not in names:
                    names.append(name)
        return names

    def boundary_arc(self, name: str) -> BPath:
        """
        The maximal run of boundary steps whose outside hexagon lies on the named arc.
        A whole loop is returned closed.

        :param str name: e.g. ``C_R+`` or ``[-r,r]``
        :rtype: BPath
        :raise: InvalidSpecException for names this domain does not have
        """
        if name in self.__arcs:
            return self.__arcs[name]
        for loop in self.loops:
            labels = [self.__namer(s.right) for s in loop]
            if name not in labels:
                continue
            if all(label == name for label in labels):
                arc = loop
            else:
                n = len(labels)
                first = next(i for i in range(n) if labels[i] == name and labels[i - 1] != name)
                steps = []
                i = first
                while labels[i % n] == name:
                    steps.append(loop[i % n])
                    i += 1
                if any(labels[m % n] == name for m in range(i, first + n)):
                    raise TraceException("arc %s of %s is not contiguous" % (name, self.spec))
                arc = BPath(steps)
            self.__arcs[name] = arc
            return arc
        raise InvalidSpecException("Domain %s has no boundary arc named '%s'" % (self.spec, name))

    def loop_position(self, step: Step) -> Tuple[int, int]:
        """
        ``(loop number, index)`` of a boundary step
        """
        for n, loop in enumerate(self.loops):
            try:
                return (n, loop.steps.index(step))
            except ValueError:
                continue
        raise ValueError("%s is not a boundary step of %s" % (step, self.spec))


def _half_namer(r: Optional[Fraction]) -> Callable[[HexCoord], str]:
    kk = row_extent(r) if r is not None else None

    def namer(h: HexCoord) -> str:
        # the right corner of row 0 closes the real segment
        if h.b > 0 or (h.b == 0 and h.a < 0):
            return "C_R+"
        if kk is None:
            return "[-R,R]"
        if h.b == 0 or h.a >= kk + 2:
            return "[r,R]"
        if -kk <= h.a <= kk + 1:
            return "[-r,r]"
        return "[-R,-r]"
    return namer


def corner_vertices(loop: BPath, hexagons: FrozenSet[HexCoord]) -> List[Tuple[int, DualVertex]]:
    """
    forward vertices of the loop that touch two outside hexagons, where the outside hexagon changes
    """
    return [(i, s.forward_vertex) for i, s in enumerate(loop) if s.ahead not in hexagons]


def snap_vertex(candidates: Sequence[Tuple[int, DualVertex]], point: Tuple[float, float]) -> Tuple[int, DualVertex]:
    """
    Nearest candidate vertex to a point; ties go to the lexicographically smallest vertex
    """
    def key(item):
        x, y = item[1].position
        return (round((x - point[0]) ** 2 + (y - point[1]) ** 2, 9), item[1])
    return min(candidates, key=key)


def label_between_marks(loop: BPath, first: int, second: int, names: Tuple[str, str]) -> Dict[HexCoord, str]:
    """
    Outside hexagons of steps after ``first`` up to ``second`` get names[0], the rest names[1]

    :raise: InvalidSpecException when an outside hexagon would get both names
    """
    n = len(loop)
    labels = {}  # type: Dict[HexCoord, str]
    i = (first + 1) % n
    current = names[0]
    for _ in range(n):
        o = loop[i].right
        if o in labels and labels[o] != current:
            raise InvalidSpecException("Outside hexagon %s straddles a marked boundary point" % (o,))
        labels[o] = current
        if i == second:
            current = names[1]
        i = (i + 1) % n
    return labels


class CircleMarks(NamedTuple):
    """
    The marks a (bottom), c (angle pi/3) and b (angle 2 pi/3) on the boundary loop of a disk,
    as indices of the loop steps whose forward vertices they are. Positions count loop steps
    counterclockwise from a: the arc ``ac`` holds positions ``[0, pos_c)``, ``cb`` holds
    ``[pos_c, pos_b)`` and ``ba`` the rest.
    """
    ia: int
    ib: int
    ic: int
    size: int

    def position(self, i: int) -> int:
        return (i - self.ia - 1) % self.size

    @property
    def pos_c(self) -> int:
        return self.position(self.ic) + 1

    @property
    def pos_b(self) -> int:
        return self.position(self.ib) + 1

    def arc(self, i: int) -> str:
        p = self.position(i)
        if p < self.pos_c:
            return 'ac'
        return 'cb' if p < self.pos_b else 'ba'


def circle_marks(loop: BPath, hexagons: FrozenSet[HexCoord], R) -> CircleMarks:
    """
    Snap a, b, c of the circle of radius R to corners of a boundary loop

    :raise: InvalidSpecException when the loop is too short to keep the marks apart
    """
    R = float(R)
    corners = corner_vertices(loop, hexagons)
    ia, _ = snap_vertex(corners, (0.0, -R))
    ic, _ = snap_vertex(corners, (R / 2.0, R * SQRT3 / 2.0))
    ib, _ = snap_vertex(corners, (-R / 2.0, R * SQRT3 / 2.0))
    marks = CircleMarks(ia, ib, ic, len(loop))
    if not (0 < marks.pos_c < marks.pos_b < marks.size):
        raise InvalidSpecException("a loop of %d steps is too short to place the marks a, b, c apart" % len(loop))
    return marks


def _exploration_half(R: Fraction) -> DiscDomain:
    bump = [h for h in hexagons_in_disk(R / 4, (-0.75 * float(R), 0.0)) if h.b < 0]
    members = frozenset([h for h in hexagons_in_disk(R) if h.b >= 0] + bump)
    if not bump:
        raise InvalidSpecException("halfexp:%s is too small to carry its lower bump" % format_radius(R))
    loop = boundary_loops(members)[0]
    corners = corner_vertices(loop, members)
    # a sits where the real line meets C_R+ on the right
    ia = next(i for i, s in enumerate(loop)
              if s.right.b < 0 and s.right.a > 0 and loop[(i + 1) % len(loop)].right.b >= 0)
    a = loop[ia].forward_vertex
    ib, b = snap_vertex(corners, (-0.75 * float(R), -0.25 * float(R)))
    labels = label_between_marks(loop, ia, ib, ("ab", "ba"))
    return DiscDomain('halfexp', R, None, members, lambda h: labels.get(h, "ba"), marks={'a': a, 'b': b})


def _exploration_plane(R: Fraction) -> DiscDomain:
    """
    The disk of radius R with a cap glued on along the arc from c to b. The cap takes in exactly
    the outside hexagons of the disk's boundary steps on ``cb``, so the hexagons left around the
    disk are those of the arcs ``ac`` and ``ba`` of :func:`circle_marks`.
    """
    rf = float(R)
    disk = frozenset(hexagons_in_disk(R))
    rim = boundary_loops(disk)[0]
    marks = circle_marks(rim, disk, R)
    glued = set(s.right for i, s in enumerate(rim) if marks.arc(i) == 'cb')
    kept = set(s.right for i, s in enumerate(rim) if marks.arc(i) != 'cb')
    if glued & kept:
        raise InvalidSpecException("planeexp:%s has a rim hexagon on both sides of b or c" % format_radius(R))
    cap = [h for h in hexagons_in_disk(2 * rf * math.sin(math.pi / 12), (0.0, rf)) if h not in disk and h not in kept]
    members = disk | glued | frozenset(cap)
    loop = boundary_loops(members)[0]
    a = rim[marks.ia].forward_vertex
    ia = next(i for i, s in enumerate(loop) if s.forward_vertex == a and s.ahead not in members)
    ie, e = snap_vertex(corner_vertices(loop, members), (0.0, rf * (1 + 2 * math.sin(math.pi / 12))))
    labels = label_between_marks(loop, ia, ie, ("ace", "eba"))
    return DiscDomain('planeexp', R, None, members, lambda h: labels.get(h, "eba"), marks={'a': a, 'e': e})


@functools.lru_cache(maxsize=64)
def build_domain(kind: str, R, r=None) -> DiscDomain:
    """
    Build a discretized domain. Hexagons are those with centers at norm < R
    (and >= r for annular kinds); half kinds keep the rows with ``b >= 0``.

    :param str kind: ``disk``, ``half``, ``ann``, ``semiann``, ``halfexp`` or ``planeexp``
    :param R: outer radius
    :param r: inner radius for ``ann``/``semiann``, optional inner interval for ``half``
    :rtype: DiscDomain
    :raise: InvalidSpecException
    """
    if kind not in DOMAIN_KINDS:
        raise InvalidSpecException("Unknown domain kind '%s'" % kind)
    R = parse_radius(R)
    r = parse_radius(r) if r is not None else None
    if R < 1:
        raise InvalidSpecException("Outer radius must be at least 1, got %s" % format_radius(R))
    if kind in ('ann', 'semiann') and r is None:
        raise InvalidSpecException("%s needs an inner radius" % kind)
    if r is not None:
        if kind not in ('ann', 'semiann', 'half'):
            raise InvalidSpecException("%s takes a single radius" % kind)
        if not (1 <= r < R):
            raise InvalidSpecException("Radii must satisfy 1 <= r < R, got r=%s R=%s" % (format_radius(r), format_radius(R)))

    if kind == 'disk':
        return DiscDomain(kind, R, None, hexagons_in_disk(R), lambda h: "C_R")
    if kind == 'half':
        return DiscDomain(kind, R, r, [h for h in hexagons_in_disk(R) if h.b >= 0], _half_namer(r))
    if kind == 'ann':
        return DiscDomain(kind, R, r, [h for h in hexagons_in_disk(R) if not in_radius(h, r)],
                          lambda h: "C_r" if in_radius(h, r) else "C_R")
    if kind == 'semiann':
        def namer(h: HexCoord) -> str:
            if h.b >= 0:
                return "C_r+" if in_radius(h, r) else "C_R+"
            return "[r,R]" if h.a >= 1 else "[-R,-r]"
        return DiscDomain(kind, R, r, [h for h in hexagons_in_disk(R) if h.b >= 0 and not in_radius(h, r)], namer)
    if kind == 'halfexp':
        return _exploration_half(R)
    return _exploration_plane(R)


def parse_domain(spec: str) -> DiscDomain:
    """
    Parse ``disk:R``, ``half:R``, ``half:r:R``, ``ann:r:R``, ``semiann:r:R``, ``halfexp:R`` or ``planeexp:R``

    :raise: InvalidSpecException
    """
    parts = [p.strip() for p in str(spec).strip().split(':')]
    if len(parts) == 2:
        return build_domain(parts[0], parse_radius(parts[1]))
    if len(parts) == 3:
        return build_domain(parts[0], parse_radius(parts[2]), parse_radius(parts[1]))
    raise InvalidSpecException("Domain spec '%s' is not kind:R or kind:r:R" % spec)
