import logging
import math
from typing import FrozenSet, List, NamedTuple, Optional, Sequence, Set, Tuple

from .exceptions import *
from .lattice import (BPath, DiscDomain, DualVertex, HexCoord, Step, in_radius, neighbors, walk,
                      corner_vertices, label_between_marks)
from .peeling import SOURCE, TARGET, WALL, FAIL, Peeler, find_corner, flood, static_role
from .utils import RED, BLUE, row_extent

HALF = 'half'
PLANE = 'plane'
PLANE_EVEN = 'plane-even'
PLANE_ODD = 'plane-odd'


class InterfacePath(object):
    """
    A b-path between two clusters of different colors, traced from one boundary of a region

    :param steps: the traced steps, first one starting on the boundary
    :param int left_color: color of every hexagon on the left of travel
    :param bool outward: True when traced from the inner boundary
    :param str start_arc: arc the path starts from
    :param str end_arc: arc the path ends on
    """
    def __init__(self, steps: Sequence[Step], left_color: int, outward: bool, start_arc: str, end_arc: str):
        self.__path = BPath(steps)
        self.__left_color = left_color
        self.__outward = outward
        self.__start_arc = start_arc
        self.__end_arc = end_arc
        self.__left = _unique(self.__path.left_cells)
        self.__right = _unique(self.__path.right_cells)

    @property
    def path(self) -> BPath:
        return self.__path

    @property
    def steps(self) -> Tuple[Step, ...]:
        return self.__path.steps

    @property
    def edges(self):
        return self.__path.edges

    @property
    def left_color(self) -> int:
        return self.__left_color

    @property
    def right_color(self) -> int:
        return 1 - self.__left_color

    @property
    def outward(self) -> bool:
        return self.__outward

    @property
    def start_arc(self) -> str:
        return self.__start_arc

    @property
    def end_arc(self) -> str:
        return self.__end_arc

    @property
    def endpoints(self) -> Tuple[DualVertex, DualVertex]:
        return (self.__path.start, self.__path.end)

    @property
    def left_cells(self) -> List[HexCoord]:
        return list(self.__left)

    @property
    def right_cells(self) -> List[HexCoord]:
        return list(self.__right)

    @property
    def ccw_cells(self) -> List[HexCoord]:
        """
        hexagons on the counterclockwise side, in travel order
        """
        return list(self.__left if self.__outward else self.__right)

    @property
    def cw_cells(self) -> List[HexCoord]:
        return list(self.__right if self.__outward else self.__left)

    @property
    def ccw_color(self) -> int:
        return self.__left_color if self.__outward else 1 - self.__left_color

    @property
    def touching(self) -> FrozenSet[HexCoord]:
        return frozenset(self.__left) | frozenset(self.__right)

    def __len__(self):
        return len(self.__path)

    def __repr__(self):
        return "InterfacePath(%s -> %s, %d edges)" % (self.__start_arc, self.__end_arc, len(self.__path))


def _unique(cells) -> Tuple[HexCoord, ...]:
    seen = set()  # type: Set[HexCoord]
    out = []
    for c in cells:
        if c not in seen:
            seen.add(c)
            out.append(c)
    return tuple(out)


def region_arcs(region: DiscDomain) -> Tuple[str, str, str]:
    """
    ``(inner arc, outer arc, setting)`` of an annulus-like region

    :raise: InvalidSpecException
    """
    if region.kind == 'semiann':
        return ("C_r+", "C_R+", HALF)
    if region.kind == 'ann':
        return ("C_r", "C_R", PLANE)
    if region.kind == 'half' and region.r is not None:
        return ("[-r,r]", "C_R+", HALF)
    raise InvalidSpecException("%s is not an annulus-like region" % region.spec)


def polar_angle(point: Tuple[float, float]) -> float:
    return math.atan2(point[1], point[0]) % (2 * math.pi)


def _half_angle(point: Tuple[float, float]) -> float:
    angle = math.atan2(point[1], point[0])
    return angle + 2 * math.pi if angle < -math.pi / 2 else angle


def boundary_interfaces(cfg, region: DiscDomain, source: str) -> List[Tuple[Tuple[int, int], InterfacePath]]:
    """
    Every interface starting on the named arc, each traced to its first boundary hit,
    tagged with the ``(loop, index)`` of its start.
    """
    traced = []
    outward = source in ("C_r+", "C_r", "[-r,r]")
    for n, loop in enumerate(region.loops):
        for i, s in enumerate(loop):
            if s.ahead not in region or region.arc_of(s.right) != source:
                continue
            x, y = s.left, s.ahead
            c = cfg.color(x)
            if c == cfg.color(y):
                continue
            start = Step(x, (s.k + 1) % 6)
            steps = walk(start, lambda st: cfg.color(st.ahead) == c, lambda st: st.ahead not in region,
                         limit=6 * region.n + 16)
            traced.append(((n, i), InterfacePath(steps, c, outward, source, region.arc_of(steps[-1].ahead))))
    return traced


def trace_interfaces(cfg, region: DiscDomain, from_side: str = 'outer') -> List[InterfacePath]:
    """
    All interfaces crossing an annulus-like region, explored from one side and stopped at their
    first hit of the far boundary, listed counterclockwise by their starting point.

    :param cfg: a configuration whose domain contains the region
    :param DiscDomain region: ``semiann``, ``ann`` or ``half`` with an inner interval
    :param str from_side: ``outer`` or ``inner``
    :rtype: list
    """
    inner, outer, setting = region_arcs(region)
    if from_side not in ('outer', 'inner'):
        raise InvalidSpecException("from_side must be 'outer' or 'inner', got '%s'" % from_side)
    source, target = (outer, inner) if from_side == 'outer' else (inner, outer)
    crossing = [(pos, g) for pos, g in boundary_interfaces(cfg, region, source) if g.end_arc == target]
    if setting == PLANE:
        crossing.sort(key=lambda item: polar_angle(item[1].endpoints[0].position))
    else:
        crossing.sort(key=lambda item: item[0], reverse=(from_side == 'inner'))
    return [g for _, g in crossing]


def exploration_path(cfg, domain: Optional[DiscDomain] = None, a: Optional[DualVertex] = None,
                     b: Optional[DualVertex] = None, red_arc: Optional[str] = None) -> BPath:
    """
    The exploration process from a to b: the interface between the cluster of the red boundary arc
    and the cluster of the blue one.

    :param cfg: configuration on ``domain``
    :param domain: defaults to ``cfg.domain``
    :param a: start corner, defaults to the domain mark ``a``
    :param b: end corner, defaults to the domain mark ``b`` (or ``e``)
    :param str red_arc: ``ab`` colors the counterclockwise arc from a to b red, ``ba`` the other one
    :rtype: BPath
    :raise: InvalidSpecException if a or b is not a boundary corner
    """
    domain = domain or cfg.domain
    marks = domain.marks
    a = a or marks.get('a')
    b = b or marks.get('b') or marks.get('e')
    if red_arc is None:
        red_arc = 'ba' if domain.kind == 'planeexp' else 'ab'
    if a is None or b is None or a == b:
        raise InvalidSpecException("exploration needs two distinct boundary corners")
    loop = domain.outer_loop
    members = frozenset(domain.hexagons)
    corners = {v: i for i, v in corner_vertices(loop, members)}
    if a not in corners or b not in corners:
        raise InvalidSpecException("%s and %s must both be corners of the boundary of %s" % (a, b, domain.spec))
    ia, ib = corners[a], corners[b]
    names = ("red", "blue") if red_arc == 'ab' else ("blue", "red")
    labels = label_between_marks(loop, ia, ib, names)
    boundary_color = {o: (RED if name == "red" else BLUE) for o, name in labels.items()}

    first = loop[ia]
    o1 = first.right
    left_color = boundary_color[o1]

    def color(h: HexCoord) -> int:
        if h in members:
            return cfg.color(h)
        try:
            return boundary_color[h]
        except KeyError:
            raise TraceException("exploration left %s through %s" % (domain.spec, h))

    start = Step(o1, (first.k + 2) % 6)
    steps = walk(start, lambda s: color(s.ahead) == left_color, lambda s: s.forward_vertex == b,
                 limit=6 * domain.n + 16)
    return BPath(steps[1:])


class QualityValue(NamedTuple):
    q: float

    def well_separated(self, j: int) -> bool:
        return self.q > 1.0 / j


def _point(p) -> Tuple[float, float]:
    if isinstance(p, DualVertex):
        return p.position
    return (float(p[0]), float(p[1]))


def quality(endpoints: Sequence, v: float, setting: str = HALF) -> QualityValue:
    """
    Smallest gap between consecutive endpoints on a circle of radius v, divided by v.
    The half-plane chain is anchored at ``(v,0)`` and ``(-v,0)``, the plane one is cyclic.

    :param endpoints: DualVertex values or ``(x, y)`` points
    :param v: the radius
    :param str setting: ``half`` or ``plane``
    :raise: InvalidSpecException on too few endpoints
    """
    points = [_point(p) for p in endpoints]
    v = float(v)
    if setting == HALF:
        if not points:
            raise InvalidSpecException("half-plane quality needs at least one endpoint")
        chain = [(v, 0.0)] + sorted(points, key=_half_angle) + [(-v, 0.0)]
        gaps = [math.dist(chain[i], chain[i + 1]) for i in range(len(chain) - 1)]
    else:
        if len(points) < 2:
            raise InvalidSpecException("plane quality needs at least two endpoints")
        chain = sorted(points, key=polar_angle)
        gaps = [math.dist(chain[i], chain[(i + 1) % len(chain)]) for i in range(len(chain))]
    return QualityValue(min(gaps) / v)


class FaceConfig(object):
    """
    Monochromatic faces chained around the far boundary of an exploration

    :param str orientation: ``outer`` for faces around the inner circle, ``inner`` for the outer circle
    :param faces: ``(color, cells)`` pairs in counterclockwise order
    :param endpoints: the vertices where consecutive faces meet the circle
    :param discovered: hexagons on the explored side
    :param vacant: hexagons on the unexplored side
    """
    def __init__(self, orientation: str, setting: str, faces: Sequence[Tuple[int, Tuple[HexCoord, ...]]],
                 endpoints: Sequence[DualVertex], discovered: FrozenSet[HexCoord], vacant: FrozenSet[HexCoord]):
        self.__orientation = orientation
        self.__setting = setting
        self.__faces = tuple(faces)
        self.__endpoints = tuple(endpoints)
        self.__discovered = frozenset(discovered)
        self.__vacant = frozenset(vacant)

    @property
    def orientation(self) -> str:
        return self.__orientation

    @property
    def setting(self) -> str:
        return self.__setting

    @property
    def faces(self) -> List[Tuple[int, Tuple[HexCoord, ...]]]:
        return list(self.__faces)

    @property
    def endpoints(self) -> List[DualVertex]:
        return list(self.__endpoints)

    @property
    def discovered(self) -> FrozenSet[HexCoord]:
        return self.__discovered

    @property
    def vacant(self) -> FrozenSet[HexCoord]:
        return self.__vacant

    @property
    def cells(self) -> FrozenSet[HexCoord]:
        return frozenset(c for _, face in self.__faces for c in face)

    @property
    def colors(self) -> List[int]:
        return [c for c, _ in self.__faces]

    def __len__(self):
        return len(self.__faces)

    def __eq__(self, other):
        return isinstance(other, FaceConfig) and self.__faces == other._FaceConfig__faces and \
            self.__endpoints == other._FaceConfig__endpoints

    def __hash__(self):
        return hash((self.__faces, self.__endpoints))

    def __repr__(self):
        return "FaceConfig(%s, %d faces)" % (self.__orientation, len(self.__faces))


def _touches(cell: HexCoord, cells: Set[HexCoord]) -> bool:
    return cell in cells or any(n in cells for n in neighbors(cell))


def _join(ccw_side: Sequence[HexCoord], cw_side: Sequence[HexCoord]) -> Optional[Tuple[HexCoord, ...]]:
    """
    Face running back up one interface and down the next, joined at the junction nearest the far ends
    """
    other = set(cw_side)
    for ia in range(len(ccw_side) - 1, -1, -1):
        if _touches(ccw_side[ia], other):
            cell = ccw_side[ia]
            jb = max(i for i, c in enumerate(cw_side) if c == cell or c in neighbors(cell))
            return _unique(list(reversed(ccw_side[ia:])) + list(cw_side[jb:]))
    return None


def _bridge_join(ccw_side: Sequence[HexCoord], bridge: Sequence[HexCoord], cw_side: Sequence[HexCoord]) -> Optional[Tuple[HexCoord, ...]]:
    """
    Face closed by a monochromatic bridge running from one interface to the next
    """
    if not bridge:
        return _join(ccw_side, cw_side)
    head, tail = {bridge[0]}, {bridge[-1]}
    starts = [i for i, c in enumerate(ccw_side) if _touches(c, head)]
    ends = [i for i, c in enumerate(cw_side) if _touches(c, tail)]
    if not starts or not ends:
        return None
    return _unique(list(reversed(ccw_side[max(starts):])) + list(bridge) + list(cw_side[max(ends):]))


def _foot(cfg, region: DiscDomain, chain: Sequence[HexCoord], axis: str, wall: str, hand: str) -> Optional[List[HexCoord]]:
    """
    Path of the chain's color from the named boundary arc to the chain hugging the ``wall`` arc,
    arc end first. Only the hexagons between the path and the wall are looked at.
    """
    color = cfg.color(chain[0])
    goal = set(chain)
    seeds = [h for h in region.hexagons
             if h not in goal and any(n not in region and region.arc_of(n) == axis for n in neighbors(h))]
    quad = frozenset(flood(seeds, lambda h: h in region and h not in goal))

    def roles(h: HexCoord) -> str:
        if h in goal:
            return TARGET
        if h in region:
            return FAIL
        arc = region.arc_of(h)
        if arc == axis:
            return SOURCE
        return WALL if arc == wall else FAIL

    start = find_corner(quad, roles, hand)
    if start is None:
        return None
    found = Peeler(cfg, quad, static_role(roles), hand).trace(start, color)
    return found[0] if found is not None else None


def faces_from_interfaces(cfg, region: DiscDomain, interfaces: Sequence[InterfacePath], from_side: str,
                          right_foot: Optional[Sequence[HexCoord]] = None,
                          left_foot: Optional[Sequence[HexCoord]] = None,
                          bridge: Optional[Sequence[HexCoord]] = None) -> Optional[FaceConfig]:
    """
    Build the faces between consecutive interfaces. In the half-plane the two outermost faces
    run from the real line, either along the interface sides or along the given foot paths.
    Two interfaces that share no hexagon are joined through ``bridge`` when one is given.
    """
    inner, outer, setting = region_arcs(region)
    far = inner if from_side == 'outer' else outer
    m = len(interfaces)
    if m == 0:
        return None
    faces = []
    if setting == HALF:
        right_axis = "[r,R]"
        left_axis = "[-R,-r]"
        if from_side == 'outer':
            wall, lead_hand, tail_hand = outer, 'left', 'right'
        else:
            wall, lead_hand, tail_hand = inner, 'right', 'left'
        first = interfaces[0].cw_cells
        if right_foot is not None:
            lead = _join(list(reversed(right_foot)), first)
        else:
            touching = [i for i, c in enumerate(first)
                        if any(n not in region and region.arc_of(n) == right_axis for n in neighbors(c))]
            lead = tuple(first[max(touching):]) if touching else None
            if lead is None:
                foot = _foot(cfg, region, first, right_axis, wall, lead_hand)
                lead = _join(list(reversed(foot)), first) if foot else None
        if lead is None:
            return None
        faces.append((interfaces[0].right_color if interfaces[0].outward else interfaces[0].left_color, lead))
    pairs = list(zip(interfaces, interfaces[1:]))
    if setting == PLANE:
        pairs.append((interfaces[-1], interfaces[0]))
    for g, h in pairs:
        face = _join(g.ccw_cells, h.cw_cells)
        if face is None and bridge is not None:
            face = _bridge_join(g.ccw_cells, bridge, h.cw_cells)
        if face is None:
            return None
        faces.append((g.ccw_color, face))
    if setting == HALF:
        last = interfaces[-1].ccw_cells
        if left_foot is not None:
            tail = _join(last, list(left_foot))
        else:
            touching = [i for i, c in enumerate(last)
                        if any(n not in region and region.arc_of(n) == left_axis for n in neighbors(c))]
            tail = tuple(reversed(last[max(touching):])) if touching else None
            if tail is None:
                foot = _foot(cfg, region, last, left_axis, wall, tail_hand)
                tail = _join(last, list(reversed(foot))) if foot else None
        if tail is None:
            return None
        faces.append((interfaces[-1].ccw_color, tail))
    theta = frozenset(c for _, face in faces for c in face)
    seeds = [h for h in region.hexagons if h not in theta
             and any(n not in region and region.arc_of(n) == far for n in neighbors(h))]
    vacant = frozenset(flood(seeds, lambda h: h in region and h not in theta))
    discovered = frozenset(h for h in region.hexagons if h not in theta and h not in vacant)
    orientation = 'outer' if from_side == 'outer' else 'inner'
    return FaceConfig(orientation, setting, faces, [g.endpoints[1] for g in interfaces], discovered, vacant)


def extract_faces(cfg, region: DiscDomain, from_side: str = 'outer') -> Optional[FaceConfig]:
    """
    The configuration of faces induced by exploring the crossing interfaces from one side.
    None when no interface crosses or consecutive interfaces do not close a face.

    :rtype: FaceConfig
    """
    return faces_from_interfaces(cfg, region, trace_interfaces(cfg, region, from_side), from_side)


class Circuit(NamedTuple):
    cells: Tuple[HexCoord, ...]
    color: int
    extremality: str


def find_circuit(cfg, region: DiscDomain, color: int, extremality: str = 'outermost') -> Optional[Circuit]:
    """
    Extremal monochromatic path of a semi-annulus from ``[r,R]`` to ``[-R,-r]``

    :param region: a ``semiann`` domain
    :param int color: RED or BLUE
    :param str extremality: ``outermost`` or ``innermost``
    :rtype: Circuit
    """
    if region.kind != 'semiann':
        raise InvalidSpecException("circuits live in semi-annuli, got %s" % region.spec)
    if extremality not in ('outermost', 'innermost'):
        raise InvalidSpecException("extremality must be 'outermost' or 'innermost'")
    wall_arc, fail_arc, hand = ("C_R+", "C_r+", 'left') if extremality == 'outermost' else ("C_r+", "C_R+", 'right')
    names = {"[r,R]": SOURCE, "[-R,-r]": TARGET, wall_arc: WALL, fail_arc: FAIL}

    def roles(h: HexCoord) -> str:
        return names[region.arc_of(h)]

    cells = frozenset(region.hexagons)
    start = find_corner(cells, roles, hand)
    if start is None:
        raise TraceException("no corner between [r,R] and %s in %s" % (wall_arc, region.spec))
    found = Peeler(cfg, cells, static_role(roles), hand).trace(start, color)
    if found is None:
        return None
    return Circuit(tuple(found[0]), color, extremality)


def _half_hits(path: BPath, domain: DiscDomain, r) -> Tuple[List[str], int]:
    kk = row_extent(r)
    members = frozenset(domain.hexagons)
    kinds = []
    stop = len(path)
    for i, s in enumerate(path):
        cells = (s.left, s.right)
        if any(c.b == -1 and c.a <= -kk - 1 for c in cells):
            stop = i
            break
        if any(c.b == -1 and -kk <= c.a <= kk + 1 and c not in members for c in cells):
            kinds.append('S')
        elif any(c.b >= 0 and c not in members for c in cells):
            kinds.append('O')
        else:
            kinds.append('')
    return kinds[:stop], stop


def _plane_hits(path: BPath, domain: DiscDomain, r) -> Tuple[List[Set[str]], int]:
    """
    Per step, which of ``C_r``, ``ac`` and ``ba`` the path touches, up to the first step with a cell of the cap
    """
    R = domain.R
    members = frozenset(domain.hexagons)
    kinds = []
    for i, s in enumerate(path):
        cells = (s.left, s.right)
        if any(c in members and not in_radius(c, R) for c in cells):
            return kinds, i
        here = set()
        for c in cells:
            if c not in members:
                # only the rim hexagons of ac and ba are reachable before the cap
                here.add('ac' if domain.arc_of(c) == "ace" else 'ba')
            elif in_radius(c, r):
                here.add('C_r')
        kinds.append(here)
    return kinds, len(path)


def _greedy(kinds: Sequence, pattern: Sequence[str], begin: int = 0) -> List[int]:
    times = []
    k = begin
    for want in pattern:
        while k < len(kinds) and want not in kinds[k]:
            k += 1
        if k >= len(kinds):
            break
        times.append(k)
        k += 1
    return times


def plane_pattern(count: int) -> List[str]:
    """
    ``C_r, ba, C_r, ac, C_r, ba, ...`` of the given length
    """
    out = []
    sides = ('ba', 'ac')
    for i in range(count):
        out.append('C_r' if i % 2 == 0 else sides[(i // 2) % 2])
    return out


def hitting_sequence_check(path: BPath, domain: DiscDomain, j: int, variant: str, r) -> bool:
    """
    Whether the exploration path shuttles between the inner target and the outer boundary
    often enough before it reaches the stopping set.

    In the plane the stopping set is the cap above the arc from c to b. For an even j the hits
    ``C_r, ba, C_r, ac, ...`` of :func:`plane_pattern` must appear in order. For an odd j the last
    two arms share a color: after the first ``j - 4`` hits of the pattern, the path must leave its
    last hit of one side arc, visit ``C_r`` and reach the other side arc, and the cells of the
    pair's color seen on the way in and on the way out must be disjoint.

    :param path: from :func:`exploration_path` on a ``halfexp`` or ``planeexp`` domain
    :param domain: that domain
    :param int j: number of arms
    :param str variant: ``half``, ``plane-even`` or ``plane-odd``
    :param r: inner half-width (half) or inner radius (plane)
    :raise: InvalidSpecException on a variant/domain mismatch
    """
    if j < 1:
        raise InvalidSpecException("j must be positive")
    if variant == HALF:
        if domain.kind != 'halfexp':
            raise InvalidSpecException("half variant needs a halfexp domain, got %s" % domain.spec)
        kinds, _ = _half_hits(path, domain, r)
        count = 0
        want = 'S'
        for kind in kinds:
            if kind == want:
                count += 1
                want = 'O' if want == 'S' else 'S'
        return count >= j
    if variant not in (PLANE_EVEN, PLANE_ODD) or domain.kind != 'planeexp':
        raise InvalidSpecException("variant %s does not match %s" % (variant, domain.spec))
    if (j % 2 == 0) != (variant == PLANE_EVEN) or j < 2:
        raise InvalidSpecException("%s does not fit j=%d" % (variant, j))
    kinds, _ = _plane_hits(path, domain, r)
    pattern = plane_pattern(j - 1)
    if variant == PLANE_EVEN:
        return len(_greedy(kinds, pattern)) == len(pattern)
    head = _greedy(kinds, pattern[:j - 4]) if j >= 5 else []
    if len(head) < j - 4:
        return False
    return _paired_tail(path, domain, kinds, head[-1] if head else -1, pattern[-1], r)


def _paired_tail(path: BPath, domain: DiscDomain, kinds: Sequence[Set[str]], begin: int, final: str, r) -> bool:
    """
    Some hit s of the final arc after ``begin`` such that, with t the last hit of the other arc
    before s, the path visits ``C_r`` between t and s and the pair's cells before the first visit
    and after the last one are disjoint. The start of the path counts as a hit of ``ac``.
    """
    other = 'ac' if final == 'ba' else 'ba'
    # a blue pair lands on ac and ba, a red one on ba and ac
    side = (lambda s: s.right) if final == 'ba' else (lambda s: s.left)
    members = frozenset(domain.hexagons)
    steps = path.steps

    def pair_cells(lo: int, hi: int) -> Set[HexCoord]:
        cells = (side(s) for s in steps[lo:hi + 1])
        return set(c for c in cells if c in members and not in_radius(c, r))

    last_other = 0 if begin < 0 and other == 'ac' else None
    visits = []  # type: List[int]
    for t in range(begin + 1, len(kinds)):
        if final in kinds[t] and last_other is not None and visits:
            if not (pair_cells(last_other, visits[0]) & pair_cells(visits[-1], t)):
                return True
        if other in kinds[t]:
            last_other, visits = t, []
        elif 'C_r' in kinds[t] and last_other is not None:
            visits.append(t)
    return False
