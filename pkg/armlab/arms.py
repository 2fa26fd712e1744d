import itertools
import logging
from collections import deque
from fractions import Fraction
from typing import Dict, FrozenSet, List, NamedTuple, Optional, Sequence, Set, Tuple

from .exceptions import *
from .explore import trace_interfaces, InterfacePath
from .lattice import (DiscDomain, DualEdge, HexCoord, Step, build_domain, circle_marks, direction, hexagons_in_disk,
                      in_radius, neighbors)
from .peeling import SOURCE, TARGET, WALL, FAIL, Peeler, connects, find_corner, loop_erase, static_role
from .utils import RED, BLUE, alternating, format_colors, format_radius, parse_colors, parse_radius

FAMILIES = ('B', 'H', 'P', 'A', 'X', 'Y', 'Z')
HALF_FAMILIES = ('B', 'H')
PLANE_FAMILIES = ('P', 'A', 'X', 'Y', 'Z')

ALTERNATING = 'alternating'
PRESCRIBED = 'prescribed'
CYCLIC = 'cyclic'
MIXED = 'mixed'
EXPLICIT = 'explicit'

ORACLE_LIMIT = 5000


class PatternSplit(NamedTuple):
    l: int
    r_count: int


class Exponent(NamedTuple):
    value: Fraction

    def __float__(self):
        return float(self.value)


def pattern_split(j: int) -> PatternSplit:
    """
    How many arms of the prescribed planar pattern land on the arc ``ba`` and on the arc ``ac``

    :param int j: number of arms, at least 2
    :rtype: PatternSplit
    :raise: InvalidSpecException
    """
    if j < 2:
        raise InvalidSpecException("pattern_split needs j >= 2, got %d" % j)
    return PatternSplit(j // 4 + (j + 1) // 4 + 1, (j + 2) // 4 + (j + 3) // 4 - 1)


def prescribed_colors(j: int) -> Tuple[int, ...]:
    """
    Colors of the prescribed pattern in counterclockwise order starting at a: the arms landing
    on ``ac`` (blue first), then those landing on ``ba`` (the one nearest a is red).
    """
    split = pattern_split(j)
    right = [BLUE if k % 2 == 0 else RED for k in range(split.r_count)]
    left = [RED if k % 2 == 0 else BLUE for k in range(split.l)]
    return tuple(right + left[::-1])


def exponent(family: str, j: int) -> Exponent:
    """
    Half-plane exponent ``j(j+1)/6`` or plane exponent ``(j^2-1)/12``

    :param str family: ``half`` or ``plane`` (arm families B/H and P/A/X/Y/Z are accepted too)
    :param int j: number of arms
    :rtype: Exponent
    :raise: InvalidSpecException
    """
    if family in HALF_FAMILIES:
        family = 'half'
    elif family in PLANE_FAMILIES:
        family = 'plane'
    if family == 'half':
        if j < 1:
            raise InvalidSpecException("half-plane exponents need j >= 1, got %d" % j)
        return Exponent(Fraction(j * (j + 1), 6))
    if family == 'plane':
        if j < 2:
            raise InvalidSpecException("plane exponents need j >= 2, got %d" % j)
        return Exponent(Fraction(j * j - 1, 12))
    raise InvalidSpecException("Unknown exponent family '%s'" % family)


def d_constant(j: int) -> int:
    if j < 2:
        raise InvalidSpecException("d_constant needs j >= 2, got %d" % j)
    if j % 2 == 1:
        return 1
    if j % 4 == 2:
        return j // 2
    return j // 4


class ArmEventSpec(object):
    """
    One arm event: a family, the number of arms, the radii and the color pattern.

    :param str family: one of ``FAMILIES``
    :param int j: number of arms
    :param r: inner radius (or inner half-width for H)
    :param R: outer radius
    :param colors: a color word such as ``rb``, a tuple of color bits, or None for the family default
    :raise: InvalidSpecException
    """
    def __init__(self, family: str, j: int, r, R, colors=None):
        family = str(family).upper()
        if family not in FAMILIES:
            raise InvalidSpecException("Unknown event family '%s'" % family)
        j = int(j)
        if j < 1:
            raise InvalidSpecException("An event needs at least one arm")
        if family in PLANE_FAMILIES and j < 2:
            raise InvalidSpecException("%s events need j >= 2" % family)
        r, R = parse_radius(r), parse_radius(R)
        if not (1 <= r < R):
            raise InvalidSpecException("Radii must satisfy 1 <= r < R, got r=%s R=%s" % (format_radius(r), format_radius(R)))
        if isinstance(colors, str):
            colors = parse_colors(colors)
        if colors is not None:
            colors = tuple(int(c) for c in colors)
            if family in ('X', 'Y', 'Z'):
                raise InvalidSpecException("%s events use the prescribed pattern, explicit colors are not allowed" % family)
            if len(colors) != j:
                raise InvalidSpecException("Got %d colors for %d arms" % (len(colors), j))
            if family in PLANE_FAMILIES and len(set(colors)) == 1:
                raise InvalidSpecException("Monochromatic planar arm events are not supported")
        self.__family = family
        self.__j = j
        self.__r = r
        self.__R = R
        self.__colors = colors

    @property
    def family(self) -> str:
        return self.__family

    @property
    def j(self) -> int:
        return self.__j

    @property
    def r(self) -> Fraction:
        return self.__r

    @property
    def R(self) -> Fraction:
        return self.__R

    @property
    def pattern(self) -> str:
        if self.__colors is not None:
            return EXPLICIT
        return {'B': ALTERNATING, 'H': ALTERNATING, 'P': MIXED, 'A': CYCLIC,
                'X': PRESCRIBED, 'Y': PRESCRIBED, 'Z': CYCLIC}[self.__family]

    @property
    def colors(self) -> Optional[Tuple[int, ...]]:
        """
        The required colors in counterclockwise order, None for P events without explicit colors
        """
        if self.__colors is not None:
            return self.__colors
        if self.__family in HALF_FAMILIES:
            return alternating(self.__j, RED)
        if self.__family == 'P':
            return None
        return prescribed_colors(self.__j)

    @property
    def setting(self) -> str:
        return 'half' if self.__family in HALF_FAMILIES else 'plane'

    @property
    def region(self) -> DiscDomain:
        """
        The domain the arms live in
        """
        if self.__family == 'B':
            return build_domain('semiann', self.__R, self.__r)
        if self.__family == 'H':
            return build_domain('half', self.__R, self.__r)
        return build_domain('ann', self.__R, self.__r)

    @property
    def spec(self) -> str:
        parts = [self.__family, str(self.__j), format_radius(self.__r), format_radius(self.__R)]
        if self.__colors is not None:
            parts.append(format_colors(self.__colors))
        return ':'.join(parts)

    def with_radii(self, r, R) -> 'ArmEventSpec':
        return ArmEventSpec(self.__family, self.__j, r, R, self.__colors)

    def __eq__(self, other):
        return isinstance(other, ArmEventSpec) and self.spec == other.spec

    def __hash__(self):
        return hash(self.spec)

    def __repr__(self):
        return "ArmEventSpec(%s)" % self.spec

    def __str__(self):
        return self.spec


def parse_event(text: str) -> ArmEventSpec:
    """
    Parse ``F:j:r:R`` or ``F:j:r:R:colors``, e.g. ``B:2:4:64`` or ``B:2:4:64:bb``

    :raise: InvalidSpecException
    """
    parts = [p.strip() for p in str(text).strip().split(':')]
    if len(parts) not in (4, 5):
        raise InvalidSpecException("Event spec '%s' is not F:j:r:R[:colors]" % text)
    if not parts[1].isdigit():
        raise InvalidSpecException("Arm count '%s' is not an integer" % parts[1])
    return ArmEventSpec(parts[0], int(parts[1]), parts[2], parts[3], parts[4] if len(parts) == 5 else None)


def _check_domain(spec: ArmEventSpec, cfg, region: DiscDomain):
    domain = cfg.domain
    if spec.family == 'H' and domain.kind not in ('half', 'halfexp'):
        raise InvalidSpecException("H events need a half-disk configuration, got %s" % domain.spec)
    missing = next((h for h in region.hexagons if h not in domain), None)
    if missing is not None:
        raise InvalidSpecException("%s does not contain the region %s of %s (missing %s)" % (domain.spec, region.spec, spec, missing))
    if spec.family in ('Y', 'Z') and any(h not in domain for h in hexagons_in_disk(spec.R)):
        raise InvalidSpecException("%s events connect arms inside the disk of radius %s, %s does not cover it"
                                   % (spec.family, format_radius(spec.R), domain.spec))


def _half_arcs(spec: ArmEventSpec) -> Tuple[str, str]:
    return ("C_r+", "C_R+") if spec.family == 'B' else ("[-r,r]", "C_R+")


def _half_roles(spec: ArmEventSpec, region: DiscDomain):
    source, target = _half_arcs(spec)
    names = {source: SOURCE, target: TARGET, "[r,R]": WALL, "[-R,-r]": FAIL}

    def roles(h: HexCoord) -> str:
        return names[region.arc_of(h)]
    return roles


def _is_alternating(colors: Sequence[int]) -> bool:
    return all(colors[i] != colors[i + 1] for i in range(len(colors) - 1))


def _detect_half(spec: ArmEventSpec, cfg, region: DiscDomain) -> bool:
    colors = spec.colors
    if not _is_alternating(colors):
        return _oracle_half(spec, cfg, region)
    crossing = trace_interfaces(cfg, region, 'inner')
    m = len(crossing)
    if m == 0:
        if spec.j > 1:
            return False
        source, target = _half_arcs(spec)
        c = colors[0]
        seeds = [h for h in region.hexagons if cfg.color(h) == c
                 and any(n not in region and region.arc_of(n) == source for n in neighbors(h))]
        return connects(seeds, lambda h: h in region and cfg.color(h) == c,
                        lambda h: any(n not in region and region.arc_of(n) == target for n in neighbors(h)))
    # sectors between consecutive crossings alternate, the first one has the color right of the first crossing
    if crossing[0].right_color == colors[0]:
        return m + 1 >= spec.j
    return m >= spec.j


def _oracle_half(spec: ArmEventSpec, cfg, region: DiscDomain) -> bool:
    roles = _half_roles(spec, region)
    cells = frozenset(region.hexagons)
    start = find_corner(cells, roles, 'left')
    if start is None:
        raise TraceException("no source/wall corner in %s" % region.spec)
    return Peeler(cfg, cells, static_role(roles)).peel(start, spec.colors) is not None


class _Marks(NamedTuple):
    positions: Dict[Tuple[HexCoord, HexCoord], int]
    hex_positions: Dict[HexCoord, int]
    size: int
    pos_c: int
    pos_b: int


def _plane_marks(region: DiscDomain) -> _Marks:
    """
    Loop positions on the outer circle counted counterclockwise from the mark a
    """
    loop = region.outer_loop
    marks = circle_marks(loop, frozenset(region.hexagons), region.R)
    positions = {}
    hex_positions = {}  # type: Dict[HexCoord, int]
    for i, s in enumerate(loop):
        p = marks.position(i)
        positions[(s.left, s.right)] = p
        hex_positions[s.right] = min(p, hex_positions.get(s.right, p))
    return _Marks(positions, hex_positions, marks.size, marks.pos_c, marks.pos_b)


class _Cut(NamedTuple):
    start: Step
    cut: FrozenSet[DualEdge]
    side_a: FrozenSet[HexCoord]
    end: Tuple[HexCoord, HexCoord]


def _thirds(e: DualEdge) -> Tuple[HexCoord, HexCoord]:
    k = direction(e.h1, e.h2)
    return (e.h1.shift(k + 1), e.h1.shift(k - 1))


def _oriented(e: DualEdge, ahead: HexCoord) -> Step:
    s = Step.between(e.h1, e.h2)
    return s if s.ahead == ahead else Step.between(e.h2, e.h1)


def _crossing_cut(cfg, region: DiscDomain) -> Optional[_Cut]:
    """
    A shortest chain of two-colored edges from the inner circle to the outer one, by breadth-first
    search over the dual edges of the region. No arm crosses it.
    """
    members = frozenset(region.hexagons)

    def two_colored(h: HexCoord, g: HexCoord) -> bool:
        return h in members and g in members and cfg.color(h) != cfg.color(g)

    parent = {}  # type: Dict[DualEdge, Optional[DualEdge]]
    queue = deque()  # type: deque
    for h in sorted(members):
        for g in neighbors(h):
            if h < g and two_colored(h, g):
                e = DualEdge.of(h, g)
                if any(t not in members and region.arc_of(t) == "C_r" for t in _thirds(e)):
                    parent[e] = None
                    queue.append(e)
    while queue:
        e = queue.popleft()
        for t in _thirds(e):
            if t in members:
                for f in (DualEdge.of(e.h1, t), DualEdge.of(e.h2, t)):
                    if f not in parent and two_colored(f.h1, f.h2):
                        parent[f] = e
                        queue.append(f)
            elif region.arc_of(t) == "C_R":
                chain = [e]
                while parent[chain[-1]] is not None:
                    chain.append(parent[chain[-1]])
                chain.reverse()
                aheads = [next(x for x in g if x not in f) for f, g in zip(chain, chain[1:])] + [t]
                steps = [_oriented(f, x) for f, x in zip(chain, aheads)]
                first, last = steps[0], steps[-1]
                return _Cut(Step(first.behind, (first.k + 1) % 6), frozenset(s.edge for s in steps),
                            frozenset(s.left for s in steps), (last.left, last.ahead))
    return None


def _plane_peel(cfg, region: DiscDomain, cut: _Cut, colors: Sequence[int], roles=None) -> Optional[List[List[HexCoord]]]:
    def basic(h: HexCoord, anchor) -> str:
        return SOURCE if region.arc_of(h) == "C_r" else TARGET
    peeler = Peeler(cfg, frozenset(region.hexagons), basic, 'left', cut.cut, cut.side_a)
    return peeler.peel(cut.start, colors, True, roles)


def _rotations(pattern: Sequence[int]) -> List[Tuple[Tuple[int, ...], int]]:
    seen = set()
    out = []
    for k in range(len(pattern)):
        seq = tuple(pattern[k:]) + tuple(pattern[:k])
        if seq not in seen:
            seen.add(seq)
            out.append((seq, k))
    return out


def _connection_pairs(j: int) -> List[Tuple[int, int]]:
    """
    0-based pattern positions of the right k-th and left (k+1)-th arms
    """
    split = pattern_split(j)
    return [(k - 1, j - k - 1) for k in range(1, min(split.l - 1, split.r_count) + 1)]


def _connected(cfg, R, first: Sequence[HexCoord], second: Sequence[HexCoord]) -> bool:
    c = cfg.color(first[0])
    goal = set(second)
    return connects(first, lambda h: h in cfg.domain and in_radius(h, R) and cfg.color(h) == c,
                    lambda h: h in goal)


def _links_hold(spec: ArmEventSpec, cfg, arms_by_position: Dict[int, List[HexCoord]]) -> bool:
    return all(_connected(cfg, spec.R, arms_by_position[p], arms_by_position[q])
               for p, q in _connection_pairs(spec.j))


def _cyclic_oracle(spec: ArmEventSpec, cfg, region: DiscDomain, cut: _Cut, links: bool = False) -> bool:
    pattern = spec.colors
    for seq, offset in _rotations(pattern):
        arms = _plane_peel(cfg, region, cut, seq)
        if arms is None:
            continue
        if not links:
            return True
        by_position = {(offset + t) % spec.j: arm for t, arm in enumerate(arms)}
        if _links_hold(spec, cfg, by_position):
            return True
    return False


def _windows(spec: ArmEventSpec, marks: _Marks) -> List[Tuple[int, int]]:
    split = pattern_split(spec.j)
    return [(0, marks.pos_c - 1)] * split.r_count + [(marks.pos_b, marks.size - 1)] * split.l


def _landing_oracle(spec: ArmEventSpec, cfg, region: DiscDomain, cut: _Cut, links: bool = False) -> bool:
    marks = _plane_marks(region)
    j = spec.j
    pattern = spec.colors
    windows = _windows(spec, marks)
    M = marks.size
    pe = marks.positions[cut.end]

    for s in range(j + 1):
        order = list(range(s, j)) + list(range(s))
        relative = []
        for i in order:
            lo, hi = windows[i]
            if i >= s:
                lo, hi = max(lo, pe) - pe, hi - pe
            else:
                lo, hi = lo + M - pe, min(hi, pe - 1) + M - pe
            if lo > hi:
                break
            relative.append((lo, hi))
        if len(relative) != j:
            continue
        roles = [_window_role(region, marks, pe, lo, hi) for lo, hi in relative]
        arms = _plane_peel(cfg, region, cut, [pattern[i] for i in order], roles)
        if arms is None:
            continue
        if not links:
            return True
        if _links_hold(spec, cfg, {i: arm for i, arm in zip(order, arms)}):
            return True
    return False


def _window_role(region: DiscDomain, marks: _Marks, pe: int, lo: int, hi: int):
    def role(h: HexCoord, anchor: Optional[HexCoord]) -> str:
        if region.arc_of(h) == "C_r":
            return SOURCE
        p = marks.positions.get((anchor, h)) if anchor is not None else None
        if p is None:
            p = marks.hex_positions[h]
        q = (p - pe) % marks.size
        if q < lo:
            return WALL
        return TARGET if q <= hi else FAIL
    return role


def _oracle_plane(spec: ArmEventSpec, cfg, region: DiscDomain) -> bool:
    cut = _crossing_cut(cfg, region)
    if cut is None:
        # arms of both colors are always separated by a crossing chain of two-colored edges
        return False
    if spec.family == 'P' and spec.pattern == MIXED:
        for seq in itertools.product((RED, BLUE), repeat=spec.j):
            if len(set(seq)) > 1 and _plane_peel(cfg, region, cut, seq) is not None:
                return True
        return False
    if spec.family in ('X', 'Y'):
        return _landing_oracle(spec, cfg, region, cut, links=spec.family == 'Y')
    return _cyclic_oracle(spec, cfg, region, cut, links=spec.family == 'Z')


class _SideArm(NamedTuple):
    lo: int
    hi: int
    color: int
    cells: Tuple[HexCoord, ...]


def _side_arms(cfg, marks: _Marks, crossing: Sequence[InterfacePath]) -> List[_SideArm]:
    """
    Both sides of every crossing interface as arms, ordered by where they land on the outer circle.
    Sides that meet the outer circle before their last cell, or land across the mark a, are left out.
    """
    landing = {}  # type: Dict[HexCoord, List[int]]
    for (c, _), p in marks.positions.items():
        landing.setdefault(c, []).append(p)
    out = []
    for g in crossing:
        for side in ([s.left for s in g.steps], [s.right for s in g.steps]):
            cells = loop_erase(side)
            where = landing.get(cells[-1])
            if where is None or any(c in landing for c in cells[:-1]):
                continue
            lo, hi = min(where), max(where)
            if hi - lo > 6:
                continue
            out.append(_SideArm(lo, hi, cfg.color(cells[0]), tuple(cells)))
    out.sort()
    return out


def _landing_match(spec: ArmEventSpec, marks: _Marks, arms: Sequence[_SideArm]) -> Optional[Dict[int, List[HexCoord]]]:
    """
    Earliest disjoint side arms realizing the pattern in its landing windows
    """
    pattern, windows = spec.colors, _windows(spec, marks)
    picked = {}  # type: Dict[int, List[HexCoord]]
    used = set()  # type: Set[HexCoord]
    last = -1
    for arm in arms:
        t = len(picked)
        if t == spec.j:
            break
        lo, hi = windows[t]
        if arm.lo > last and arm.color == pattern[t] and lo <= arm.lo and arm.hi <= hi and used.isdisjoint(arm.cells):
            picked[t] = list(arm.cells)
            used.update(arm.cells)
            last = arm.hi
    return picked if len(picked) == spec.j else None


def _cyclic_match(spec: ArmEventSpec, cfg, arms: Sequence[_SideArm], links: bool) -> bool:
    n = len(arms)
    for seq, offset in _rotations(spec.colors):
        for first in range(n):
            picked = []  # type: List[List[HexCoord]]
            used = set()  # type: Set[HexCoord]
            for k in range(n):
                arm = arms[(first + k) % n]
                if arm.color == seq[len(picked)] and used.isdisjoint(arm.cells):
                    picked.append(list(arm.cells))
                    used.update(arm.cells)
                    if len(picked) == spec.j:
                        break
            if len(picked) < spec.j:
                continue
            if not links or _links_hold(spec, cfg, {(offset + t) % spec.j: arm for t, arm in enumerate(picked)}):
                return True
    return False


def _interface_sides_hold(spec: ArmEventSpec, cfg, region: DiscDomain, crossing: Sequence[InterfacePath]) -> bool:
    """
    Whether the sides of the crossing interfaces already carry the arms. False means undecided.
    """
    marks = _plane_marks(region)
    arms = _side_arms(cfg, marks, crossing)
    if spec.family in ('X', 'Y'):
        picked = _landing_match(spec, marks, arms)
        return picked is not None and (spec.family == 'X' or _links_hold(spec, cfg, picked))
    return _cyclic_match(spec, cfg, arms, links=spec.family == 'Z')


def _detect_plane(spec: ArmEventSpec, cfg, region: DiscDomain) -> bool:
    crossing = trace_interfaces(cfg, region, 'inner')
    m = len(crossing)
    if m == 0:
        return False
    if spec.family == 'P' and spec.pattern == MIXED:
        return m >= spec.j or _oracle_plane(spec, cfg, region)
    if spec.pattern != EXPLICIT:
        if spec.family == 'A' and spec.j % 2 == 0:
            return m >= spec.j
        if m < 2 * (spec.j // 2):
            return False
    if _interface_sides_hold(spec, cfg, region, crossing):
        return True
    logging.getLogger(__name__).debug("%s: %d crossings, interface sides undecided, peeling", spec, m)
    return _oracle_plane(spec, cfg, region)


def detect(spec: ArmEventSpec, cfg) -> bool:
    """
    Whether a configuration realizes an arm event. Alternating half-plane events and
    alternating planar events are decided by counting crossing interfaces. Other planar
    events first look for their arms among the sides of the crossing interfaces, landing
    where the interfaces end, and fall back to peeling when those do not settle it.

    :param ArmEventSpec spec: the event
    :param cfg: a :class:`armlab.percolation.Configuration` whose domain contains the event's region
    :rtype: bool
    :raise: InvalidSpecException on a domain mismatch
    """
    region = spec.region
    _check_domain(spec, cfg, region)
    if spec.setting == 'half':
        return _detect_half(spec, cfg, region)
    return _detect_plane(spec, cfg, region)


def detect_oracle(spec: ArmEventSpec, cfg) -> bool:
    """
    Reference detector: extracts arms one at a time, each as close to the previous one as possible,
    for every admissible color order. Planar arms are peeled around a chain of two-colored edges
    found by breadth-first search, without tracing interfaces.

    :raise: TooLargeException above ``ORACLE_LIMIT`` region hexagons
    """
    region = spec.region
    if region.n > ORACLE_LIMIT:
        raise TooLargeException("%s has %d hexagons, the oracle is capped at %d" % (region.spec, region.n, ORACLE_LIMIT))
    _check_domain(spec, cfg, region)
    if spec.setting == 'half':
        return _oracle_half(spec, cfg, region)
    return _oracle_plane(spec, cfg, region)


def arm_witness(spec: ArmEventSpec, cfg) -> Optional[List[List[HexCoord]]]:
    """
    Arms realizing an alternating or explicit half-plane event, nearest the right axis first
    """
    region = spec.region
    _check_domain(spec, cfg, region)
    if spec.setting != 'half':
        raise InvalidSpecException("witnesses are produced for half-plane events only")
    roles = _half_roles(spec, region)
    cells = frozenset(region.hexagons)
    start = find_corner(cells, roles, 'left')
    if start is None:
        raise TraceException("no source/wall corner in %s" % region.spec)
    return Peeler(cfg, cells, static_role(roles)).peel(start, spec.colors)
