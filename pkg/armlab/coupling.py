"""
Good events and good sets of a double layer, and the layer-by-layer coupling of two
conditional laws of percolation from the outside in.

A layer ``A_i`` is the (semi-)annulus between ``r_i`` and ``2 r_i``; the good event of a
double layer ``A_i + A_{i+1}`` asks for a fixed number of well separated, mutually adjacent
interfaces together with the connecting paths of the right colors. The good set is the
colored witness of that event, and two configurations whose good sets agree can be
glued along it.
"""
import logging
import math
from collections import Counter
from fractions import Fraction
from typing import Callable, Dict, FrozenSet, Hashable, List, Mapping, NamedTuple, Optional, Sequence, Tuple

from .arms import PLANE_FAMILIES, ArmEventSpec, detect, parse_event
from .estimate import default_domain, parallel_map, slope_fit, substream, SlopeFit
from .exceptions import *
from .explore import (HALF, PLANE_EVEN, PLANE_ODD, FaceConfig, InterfacePath, extract_faces,
                      faces_from_interfaces, quality, region_arcs, trace_interfaces, polar_angle)
from .lattice import DiscDomain, HexCoord, build_domain, in_radius, neighbors, parse_domain
from .peeling import SOURCE, TARGET, WALL, FAIL, Peeler, connects, find_corner, flood, static_role
from .percolation import MAX_ENUMERATION, Configuration, RngStream, enumerate_all, sample
from .utils import RED, BLUE, alternating, format_radius, parse_radius

SETTINGS = (HALF, PLANE_ODD, PLANE_EVEN)
DEFAULT_K = 6
DEFAULT_D = Fraction(1, 2)
MAX_ATTEMPTS = 1000000
MIN_LAYERS = 2
MIN_WIDTH = 2
CSV_COLUMNS = ('layer_index', 'overlap_estimate', 'overlap_stderr', 'empty_mass_1', 'empty_mass_2',
               'cumulative_failure_bound')


class LayerSpec(object):
    """
    The double layer ``A_i + A_{i+1}`` with ``r_i = 2^i``.

    :param int i: layer index
    :param int j: number of arms of the conditioning event
    :param str setting: ``half``, ``plane-odd`` or ``plane-even``
    :param radii: ``(inner, middle, outer)`` radii replacing ``(2^i, 2^(i+1), 2^(i+2))``
    :param bool enforce_threshold: require ``r_i >= 10 j``
    :raise: InvalidSpecException
    """
    def __init__(self, i: int, j: int, setting: str = HALF, radii=None, enforce_threshold: bool = True):
        if setting not in SETTINGS:
            raise InvalidSpecException("Unknown coupling setting '%s'" % setting)
        j = int(j)
        if j < 2:
            raise InvalidSpecException("good events need j >= 2")
        if setting == PLANE_ODD and (j % 2 == 0 or j < 3):
            raise InvalidSpecException("plane-odd layers need an odd j >= 3, got %d" % j)
        if setting == PLANE_EVEN and j % 2:
            raise InvalidSpecException("plane-even layers need an even j, got %d" % j)
        if radii is None:
            radii = (2 ** i, 2 ** (i + 1), 2 ** (i + 2))
        r, middle, outer = (parse_radius(x) for x in radii)
        if not (1 <= r < middle < outer):
            raise InvalidSpecException("layer radii must satisfy 1 <= r < middle < outer")
        if enforce_threshold and r < 10 * j:
            raise InvalidSpecException("layer radius %s is below 10j = %d" % (format_radius(r), 10 * j))
        self.__i = int(i)
        self.__j = j
        self.__setting = setting
        self.__radii = (r, middle, outer)

    @property
    def i(self) -> int:
        return self.__i

    @property
    def j(self) -> int:
        return self.__j

    @property
    def setting(self) -> str:
        return self.__setting

    @property
    def plane(self) -> bool:
        return self.__setting != HALF

    @property
    def r(self) -> Fraction:
        return self.__radii[0]

    @property
    def middle(self) -> Fraction:
        return self.__radii[1]

    @property
    def outer(self) -> Fraction:
        return self.__radii[2]

    @property
    def region(self) -> DiscDomain:
        """
        The double layer
        """
        return build_domain('ann' if self.plane else 'semiann', self.outer, self.r)

    @property
    def inner_layer(self) -> DiscDomain:
        return build_domain('ann' if self.plane else 'semiann', self.middle, self.r)

    @property
    def outer_layer(self) -> DiscDomain:
        return build_domain('ann' if self.plane else 'semiann', self.outer, self.middle)

    def band(self, h: HexCoord) -> int:
        """
        0 for hexagons of ``A_i``, 1 for ``A_{i+1}``
        """
        return 0 if in_radius(h, self.middle) else 1

    def __eq__(self, other):
        return isinstance(other, LayerSpec) and (self.__i, self.__j, self.__setting, self.__radii) == \
            (other.i, other.j, other.setting, (other.r, other.middle, other.outer))

    def __hash__(self):
        return hash((self.__i, self.__j, self.__setting, self.__radii))

    def __repr__(self):
        return "LayerSpec(i=%d, j=%d, %s, %s)" % (self.__i, self.__j, self.__setting,
                                                 ":".join(format_radius(x) for x in self.__radii))


class GoodSet(object):
    """
    Colored hexagons witnessing the good event of a double layer, with the faces they induce.
    Two good sets are equal when they color the same hexagons the same way; the empty good set
    stands for a failed good event.

    :param LayerSpec layer: the double layer
    :param colored: mapping of hexagon to color
    :param inner_faces: faces around the inner circle
    :param outer_faces: faces around the outer circle
    :param labels: named face indices
    """
    def __init__(self, layer: Optional[LayerSpec] = None, colored: Optional[Mapping[HexCoord, int]] = None,
                 inner_faces: Optional[FaceConfig] = None, outer_faces: Optional[FaceConfig] = None,
                 labels: Optional[Dict[str, int]] = None):
        self.__layer = layer
        self.__colored = frozenset((colored or {}).items())
        self.__inner = inner_faces
        self.__outer = outer_faces
        self.__labels = dict(labels or {})

    @classmethod
    def empty(cls, layer: Optional[LayerSpec] = None) -> 'GoodSet':
        return cls(layer)

    @property
    def layer(self) -> Optional[LayerSpec]:
        return self.__layer

    @property
    def cells(self) -> FrozenSet[HexCoord]:
        return frozenset(h for h, _ in self.__colored)

    @property
    def colors(self) -> Dict[HexCoord, int]:
        return dict(self.__colored)

    @property
    def size(self) -> int:
        return len(self.__colored)

    @property
    def inner_faces(self) -> Optional[FaceConfig]:
        return self.__inner

    @property
    def outer_faces(self) -> Optional[FaceConfig]:
        return self.__outer

    @property
    def labels(self) -> Dict[str, int]:
        return dict(self.__labels)

    def agrees_with(self, cfg) -> bool:
        return all(cfg.color(h) == c for h, c in self.__colored)

    def __len__(self):
        return len(self.__colored)

    def __bool__(self):
        return bool(self.__colored)

    def __eq__(self, other):
        return isinstance(other, GoodSet) and self.__colored == other._GoodSet__colored

    def __hash__(self):
        return hash(self.__colored)

    def __repr__(self):
        if not self.__colored:
            return "GoodSet(empty)"
        return "GoodSet(%d hexagons, %d faces)" % (self.size, len(self.__inner) if self.__inner else 0)


def _check_layer(cfg, layer: LayerSpec) -> DiscDomain:
    region = layer.region
    missing = next((h for h in region.hexagons if h not in cfg.domain), None)
    if missing is not None:
        raise InvalidSpecException("%r is out of %s (missing %s)" % (layer, cfg.domain.spec, missing))
    return region


def _adjacent(g: InterfacePath, h: InterfacePath) -> bool:
    """
    Whether the face counterclockwise of g and clockwise of h shares a hexagon with both
    """
    return bool(set(g.ccw_cells) & set(h.cw_cells))


def _separated(layer: LayerSpec, interfaces: Sequence[InterfacePath]) -> bool:
    setting = HALF if layer.setting == HALF else 'plane'
    starts = [g.endpoints[0] for g in interfaces]
    ends = [g.endpoints[1] for g in interfaces]
    return quality(starts, layer.outer, setting).well_separated(layer.j) and \
        quality(ends, layer.r, setting).well_separated(layer.j)


def _extremal_path(cfg, cells: FrozenSet[HexCoord], source: Callable[[HexCoord], bool], target: FrozenSet[HexCoord],
                   wall: Callable[[HexCoord], bool], color: int, hand: str,
                   prefer: Optional[Callable] = None) -> Optional[List[HexCoord]]:
    """
    The path of one color from the source to the target closest to the wall.
    An empty list means a target hexagon already touches the source.
    """
    def roles(h: HexCoord) -> str:
        if h in target:
            return TARGET
        if source(h):
            return SOURCE
        if wall(h):
            return WALL
        return FAIL

    start = find_corner(cells, roles, hand, prefer)
    if start is not None:
        try:
            found = Peeler(cfg, cells, static_role(roles), hand).trace(start, color)
        except TraceException as e:
            logging.getLogger(__name__).debug("extremal path: %s", e)
            found = None
        if found is not None:
            return found[0]
    if any(source(n) for t in target for n in neighbors(t)):
        return []
    return None


def _enclosed(quad: FrozenSet[HexCoord], region: DiscDomain, inner_path: Sequence[HexCoord],
              outer_path: Sequence[HexCoord]) -> FrozenSet[HexCoord]:
    """
    Hexagons of the quad between the path in ``A_i`` and the path in ``A_{i+1}``
    """
    inner_arc, outer_arc, _ = region_arcs(region)

    def on_arc(h: HexCoord, arc: str) -> bool:
        return any(n not in region and region.arc_of(n) == arc for n in neighbors(h))

    p0, p1 = frozenset(inner_path), frozenset(outer_path)
    below = flood([h for h in quad if on_arc(h, inner_arc)], lambda h: h in quad and h not in p0)
    above = flood([h for h in quad if on_arc(h, outer_arc)], lambda h: h in quad and h not in p1)
    return frozenset(h for h in quad if h not in below and h not in above)


def _quad_paths(cfg, layer: LayerSpec, quad: FrozenSet[HexCoord], source: Callable[[HexCoord], bool],
                target: Sequence[HexCoord], color: int, hands: Tuple[str, str],
                order: Optional[Dict[HexCoord, int]] = None) -> Optional[Tuple[List[HexCoord], List[HexCoord]]]:
    region = layer.region
    paths = []
    for band, hand in zip((0, 1), hands):
        cells = frozenset(h for h in quad if layer.band(h) == band)
        band_target = frozenset(t for t in target if layer.band(t) == band)

        def band_source(h: HexCoord, band=band) -> bool:
            return source(h) and (h not in region or layer.band(h) == band)

        def wall(h: HexCoord, band=band) -> bool:
            return h in region and layer.band(h) != band

        prefer = None
        if order is not None:
            def prefer(s, hand=hand):
                return -order.get(s.left if hand == 'left' else s.right, -1)
        path = _extremal_path(cfg, cells, band_source, band_target, wall, color, hand, prefer)
        if path is None:
            return None
        paths.append(path)
    return paths[0], paths[1]


def _half_side(cfg, layer: LayerSpec, region: DiscDomain, gamma: InterfacePath, side: str, color: int,
               touching: FrozenSet[HexCoord]) -> Optional[FrozenSet[HexCoord]]:
    arc = "[r,R]" if side == 'right' else "[-R,-r]"
    chain = gamma.cw_cells if side == 'right' else gamma.ccw_cells
    if any(cfg.color(c) != color for c in chain):
        return None

    def source(h: HexCoord) -> bool:
        return h not in region and region.arc_of(h) == arc

    seeds = [h for h in region.hexagons if h not in touching and any(source(n) for n in neighbors(h))]
    quad = frozenset(flood(seeds, lambda h: h in region and h not in touching))
    hands = ('left', 'right') if side == 'right' else ('right', 'left')
    paths = _quad_paths(cfg, layer, quad, source, chain, color, hands)
    if paths is None:
        return None
    return _enclosed(quad, region, paths[0], paths[1])


def _good_half(cfg, layer: LayerSpec, region: DiscDomain, interfaces: List[InterfacePath]) -> GoodSet:
    j = layer.j
    if len(interfaces) != j - 1:
        return GoodSet.empty(layer)
    if not all(_adjacent(g, h) for g, h in zip(interfaces, interfaces[1:])):
        return GoodSet.empty(layer)
    if not _separated(layer, interfaces):
        return GoodSet.empty(layer)
    touching = frozenset().union(*(g.touching for g in interfaces))
    right = _half_side(cfg, layer, region, interfaces[0], 'right', RED, touching)
    if right is None:
        return GoodSet.empty(layer)
    left = _half_side(cfg, layer, region, interfaces[-1], 'left', RED if j % 2 else BLUE, touching)
    if left is None:
        return GoodSet.empty(layer)
    return _assemble(cfg, layer, region, interfaces, touching | right | left)


def _good_plane_odd(cfg, layer: LayerSpec, region: DiscDomain, interfaces: List[InterfacePath]) -> GoodSet:
    j = layer.j
    m = len(interfaces)
    if m != j - 1:
        return GoodSet.empty(layer)
    flags = [_adjacent(interfaces[k], interfaces[(k + 1) % m]) for k in range(m)]
    if flags.count(False) != 1:
        return GoodSet.empty(layer)
    gap = flags.index(False)
    ordered = interfaces[gap + 1:] + interfaces[:gap + 1]
    if not _separated(layer, ordered):
        return GoodSet.empty(layer)
    color = RED if j % 4 == 1 else BLUE
    first, last = ordered[0], ordered[-1]
    if any(cfg.color(c) != color for c in first.cw_cells + last.ccw_cells):
        return GoodSet.empty(layer)
    touching = frozenset().union(*(g.touching for g in ordered))
    chain = last.ccw_cells
    members = frozenset(chain)
    seeds = [n for c in chain for n in neighbors(c) if n in region and n not in touching]
    sector = frozenset(flood(seeds, lambda h: h in region and h not in touching))
    order = {c: k for k, c in enumerate(chain)}
    paths = _quad_paths(cfg, layer, sector, lambda h: h in members, first.cw_cells, color,
                        ('left', 'right'), order)
    if paths is None:
        return GoodSet.empty(layer)
    cells = touching | _enclosed(sector, region, paths[0], paths[1])
    return _assemble(cfg, layer, region, ordered, cells, paths[0], paths[1])


def _good_plane_even(cfg, layer: LayerSpec, region: DiscDomain, interfaces: List[InterfacePath]) -> GoodSet:
    m = len(interfaces)
    if m != layer.j:
        return GoodSet.empty(layer)
    if not all(_adjacent(interfaces[k], interfaces[(k + 1) % m]) for k in range(m)):
        return GoodSet.empty(layer)
    if not _separated(layer, interfaces):
        return GoodSet.empty(layer)
    touching = frozenset().union(*(g.touching for g in interfaces))
    return _assemble(cfg, layer, region, interfaces, touching)


def first_red_face(faces: FaceConfig) -> Optional[int]:
    """
    Index of the first red face counting counterclockwise from the negative imaginary axis
    """
    best = None
    for k, (color, _) in enumerate(faces.faces):
        if color != RED or k >= len(faces.endpoints):
            continue
        key = (polar_angle(faces.endpoints[k].position) - 1.5 * math.pi) % (2 * math.pi)
        if best is None or key < best[0]:
            best = (key, k)
    return best[1] if best else None


def _assemble(cfg, layer: LayerSpec, region: DiscDomain, interfaces: List[InterfacePath], cells: FrozenSet[HexCoord],
              inner_bridge: Optional[Sequence[HexCoord]] = None,
              outer_bridge: Optional[Sequence[HexCoord]] = None) -> GoodSet:
    inner = faces_from_interfaces(cfg, region, interfaces, 'outer', bridge=inner_bridge)
    outward = trace_interfaces(cfg, region, 'inner')
    outer = faces_from_interfaces(cfg, region, outward, 'inner', bridge=outer_bridge) if outward else None
    labels = {}
    if layer.setting == PLANE_EVEN and inner is not None:
        tilde = first_red_face(inner)
        if tilde is not None:
            labels['tilde'] = tilde
    return GoodSet(layer, {h: cfg.color(h) for h in cells}, inner, outer, labels)


def _evaluate(cfg, layer: LayerSpec) -> Tuple[GoodSet, int]:
    region = _check_layer(cfg, layer)
    interfaces = trace_interfaces(cfg, region, 'outer')
    if layer.setting == HALF:
        good = _good_half(cfg, layer, region, interfaces)
    elif layer.setting == PLANE_ODD:
        good = _good_plane_odd(cfg, layer, region, interfaces)
    else:
        good = _good_plane_even(cfg, layer, region, interfaces)
    faces = len(interfaces) + (1 if layer.setting == HALF else 0)
    return good, faces


def good_set(cfg, layer: LayerSpec) -> GoodSet:
    """
    The good set of a double layer: every hexagon touching a crossing interface, plus the
    hexagons enclosed by the extremal connecting paths on either side of the middle circle.
    Empty when the good event fails.

    :param cfg: a configuration covering the double layer
    :param LayerSpec layer: the double layer
    :rtype: GoodSet
    :raise: InvalidSpecException if the layer is out of the configuration's domain
    """
    return _evaluate(cfg, layer)[0]


def good_event(cfg, layer: LayerSpec) -> bool:
    """
    Whether the double layer carries the right number of adjacent, well separated interfaces
    and the connecting paths of the right colors on both sides.

    :raise: InvalidSpecException if the layer is out of the configuration's domain
    """
    return bool(good_set(cfg, layer))


def hat_label(cfg, good: GoodSet) -> Optional[int]:
    """
    Index of the red outer face reached by the first red arm from the configuration's boundary,
    counting counterclockwise from the negative imaginary axis
    """
    if not good or good.outer_faces is None or good.layer is None:
        return None
    layer = good.layer
    domain = cfg.domain
    red_faces = [(k, frozenset(face)) for k, (c, face) in enumerate(good.outer_faces.faces) if c == RED]

    def outside(h: HexCoord) -> bool:
        return h in domain and not in_radius(h, layer.outer) and cfg.color(h) == RED

    boundary = [h for h in domain.hexagons if outside(h) and any(n not in domain for n in neighbors(h))]
    boundary.sort(key=lambda h: ((polar_angle(h.center) - 1.5 * math.pi) % (2 * math.pi), h.b, h.a))
    seen = set()
    for h in boundary:
        if h in seen:
            continue
        cluster = flood([h], outside)
        seen |= cluster
        for k, face in red_faces:
            if any(n in face for c in cluster for n in neighbors(c)):
                return k
    return None


def adjacency_event(cfg, layer: LayerSpec) -> bool:
    """
    Every crossing interface of the double layer is adjacent to its neighbors
    """
    region = _check_layer(cfg, layer)
    interfaces = trace_interfaces(cfg, region, 'outer')
    m = len(interfaces)
    if layer.plane:
        return m > 0 and all(_adjacent(interfaces[k], interfaces[(k + 1) % m]) for k in range(m))
    return all(_adjacent(g, h) for g, h in zip(interfaces, interfaces[1:]))


def quasi_good_event(cfg, layer: LayerSpec) -> bool:
    """
    Well separated faces around the outer circle outside ``3/4`` of it and around the inner
    circle inside the middle one, j of each with alternating colors starting with red,
    each face joined to its partner by a path of its color.

    :raise: InvalidSpecException outside the half-plane setting
    """
    if layer.setting != HALF:
        raise InvalidSpecException("the quasi-good event is defined for half-plane layers")
    region = _check_layer(cfg, layer)
    j = layer.j
    theta = extract_faces(cfg, build_domain('semiann', layer.outer, layer.outer * 3 / 4), 'inner')
    theta_p = extract_faces(cfg, layer.inner_layer, 'outer')
    if theta is None or theta_p is None or len(theta) != j or len(theta_p) != j:
        return False
    colors = list(alternating(j, RED))
    if theta.colors != colors or theta_p.colors != colors:
        return False
    if not quality(theta.endpoints, layer.outer).well_separated(j) or \
            not quality(theta_p.endpoints, layer.r).well_separated(j):
        return False
    for (c, face), (_, face_p) in zip(theta.faces, theta_p.faces):
        goal = frozenset(face_p)
        if not connects(face, lambda h, c=c: h in region and cfg.color(h) == c, lambda h, goal=goal: h in goal):
            return False
    return True


class InclusionCount(NamedTuple):
    quasi_good: int
    violations: int


def quasi_good_inclusion(domain: DiscDomain, layer: LayerSpec) -> InclusionCount:
    """
    Enumerate a micro domain and count configurations with the quasi-good and adjacency events,
    and among them those where the good event fails
    """
    total = violations = 0
    for cfg in enumerate_all(domain):
        if quasi_good_event(cfg, layer) and adjacency_event(cfg, layer):
            total += 1
            if not good_event(cfg, layer):
                violations += 1
    if violations:
        logging.getLogger(__name__).warning("%d of %d quasi-good configurations of %s miss the good event",
                                            violations, total, domain.spec)
    return InclusionCount(total, violations)


class RejectionSampler(object):
    """
    Exact sampler of the conditional law given an arm event: draw until the event holds.

    :param ArmEventSpec event: the conditioning event
    :param DiscDomain domain: the domain to sample
    :param RngStream rng: the stream to draw from
    :param int max_attempts: attempts allowed per draw
    """
    def __init__(self, event: ArmEventSpec, domain: DiscDomain, rng: RngStream, max_attempts: int = MAX_ATTEMPTS):
        self._log = logging.getLogger(__name__)
        self.__event = event
        self.__domain = domain
        self.__rng = rng
        self.__max_attempts = int(max_attempts)
        self.__attempts = 0
        self.__accepted = 0

    @property
    def attempts(self) -> int:
        return self.__attempts

    @property
    def accepted(self) -> int:
        return self.__accepted

    @property
    def acceptance_rate(self) -> float:
        return self.__accepted / self.__attempts if self.__attempts else 0.0

    def draw(self) -> Configuration:
        """
        :raise: BudgetException after ``max_attempts`` rejections
        """
        for _ in range(self.__max_attempts):
            self.__attempts += 1
            cfg = sample(self.__domain, self.__rng)
            if detect(self.__event, cfg):
                self.__accepted += 1
                return cfg
        self._log.warning("%s on %s: budget of %d attempts exhausted", self.__event, self.__domain.spec,
                          self.__max_attempts)
        raise BudgetException("no configuration of %s satisfied %s" % (self.__domain.spec, self.__event),
                              attempts=self.__max_attempts)


def conditional_sample(event: ArmEventSpec, domain: DiscDomain, rng: RngStream,
                       max_attempts: int = MAX_ATTEMPTS) -> Configuration:
    """
    One configuration from the law of percolation on ``domain`` given ``event``

    :raise: BudgetException when ``max_attempts`` draws all miss the event
    """
    return RejectionSampler(event, domain, rng, max_attempts).draw()


def _conditional_batch(event_text: str, domain_spec: str, count: int, seed: int, stream_id: int,
                       max_attempts: int) -> Tuple[List[str], int]:
    domain = parse_domain(domain_spec)
    sampler = RejectionSampler(parse_event(event_text), domain, RngStream(seed, stream_id), max_attempts)
    return [sampler.draw().dumps() for _ in range(count)], sampler.attempts


def conditional_samples(event: ArmEventSpec, domain: DiscDomain, N: int, rng: RngStream,
                        max_attempts: int = MAX_ATTEMPTS, threads: Optional[int] = None,
                        batch_size: int = 250) -> List[Configuration]:
    """
    N independent conditional samples, batch ``b`` drawn from its own stream
    """
    sizes = [batch_size] * (N // batch_size) + ([N % batch_size] if N % batch_size else [])
    tasks = [(event.spec, domain.spec, size, rng.seed, substream(rng, 0, b).stream_id, max_attempts)
             for b, size in enumerate(sizes)]
    out = []
    for dumps, _ in parallel_map(_conditional_batch, tasks, threads):
        out.extend(Configuration.loads(text, domain) for text in dumps)
    return out


def good_set_joint_law(domain: DiscDomain, event: ArmEventSpec,
                       layers: Sequence[LayerSpec]) -> Dict[Tuple[GoodSet, ...], Fraction]:
    """
    Exact joint law of the good sets of several double layers given the event, by enumeration

    :raise: TooLargeException above ``MAX_ENUMERATION`` hexagons, InvalidSpecException for a null event
    """
    if domain.n > MAX_ENUMERATION:
        raise TooLargeException("%s has %d hexagons, enumeration is capped at %d" % (domain.spec, domain.n, MAX_ENUMERATION))
    counts = Counter()  # type: Counter
    total = 0
    for cfg in enumerate_all(domain):
        if detect(event, cfg):
            total += 1
            counts[tuple(good_set(cfg, layer) for layer in layers)] += 1
    if total == 0:
        raise InvalidSpecException("%s never happens on %s" % (event, domain.spec))
    return {v: Fraction(c, total) for v, c in counts.items()}


def good_set_law(domain: DiscDomain, event: ArmEventSpec, layer: LayerSpec) -> Dict[GoodSet, Fraction]:
    """
    Exact law of the good set given the event, by enumeration

    :raise: TooLargeException above ``MAX_ENUMERATION`` hexagons, InvalidSpecException for a null event
    """
    return {v[0]: p for v, p in good_set_joint_law(domain, event, [layer]).items()}


def empty_mass(law: Mapping) -> Fraction:
    return sum((p for s, p in law.items() if not s), Fraction(0))


def weight_spread(law: Mapping[GoodSet, Fraction]) -> Optional[Fraction]:
    """
    ``max / min`` of ``P[S] 2^|S|`` over the nonempty good sets
    """
    weights = [p * 2 ** len(s) for s, p in law.items() if s]
    if not weights:
        return None
    return max(weights) / min(weights)


def _check_law(law: Mapping, name: str):
    values = list(law.values())
    if any(p < 0 for p in values):
        raise InvalidSpecException("%s has negative mass" % name)
    total = sum(values)
    exact = all(isinstance(p, (int, Fraction)) for p in values)
    if (exact and total != 1) or (not exact and abs(float(total) - 1.0) > 1e-9):
        raise InvalidSpecException("%s is not normalized (total %s)" % (name, total))


class MaximalCoupling(NamedTuple):
    table: Dict[Tuple[Hashable, Hashable], Fraction]
    success: Fraction


def total_variation(law1: Mapping, law2: Mapping):
    keys = list(dict.fromkeys(list(law1) + list(law2)))
    return sum(abs(law1.get(k, 0) - law2.get(k, 0)) for k in keys) / 2


def maximal_coupling(law1: Mapping, law2: Mapping) -> MaximalCoupling:
    """
    Joint law with the given marginals that puts ``min(law1(S), law2(S))`` on every diagonal
    pair and spreads the rest as a product. Success counts the diagonal on nonempty values.

    :param law1: value -> probability, a falsy value stands for the empty good set
    :param law2: value -> probability
    :rtype: MaximalCoupling
    :raise: InvalidSpecException on unnormalized input
    """
    _check_law(law1, "first law")
    _check_law(law2, "second law")
    keys = list(dict.fromkeys(list(law1) + list(law2)))
    common = {k: min(law1.get(k, 0), law2.get(k, 0)) for k in keys}
    table = {(k, k): p for k, p in common.items() if p > 0}
    rest = 1 - sum(common.values())
    if rest > 0:
        for a in keys:
            ra = law1.get(a, 0) - common[a]
            if ra <= 0:
                continue
            for b in keys:
                rb = law2.get(b, 0) - common[b]
                if rb > 0:
                    table[(a, b)] = table.get((a, b), 0) + ra * rb / rest
    success = sum((p for k, p in common.items() if k), Fraction(0) if isinstance(rest, Fraction) else 0.0)
    return MaximalCoupling(table, success)


class CouplingOutcome(NamedTuple):
    success: bool
    success_layer: Optional[int]
    theta_star: Optional[FaceConfig]
    per_layer_overlap: Tuple[float, ...]
    i_trace: Tuple[int, ...]


class LayerRow(NamedTuple):
    layer_index: int
    overlap_estimate: float
    overlap_stderr: float
    empty_mass_1: float
    empty_mass_2: float
    cumulative_failure_bound: float


class CouplingReport(object):
    """
    Per-layer overlaps and per-replica outcomes of a layered coupling run
    """
    def __init__(self, tier: str, j: int, r, R, m, setting: str, rows: Sequence[LayerRow],
                 outcomes: Sequence[CouplingOutcome], truncations: Mapping[int, int]):
        self.tier = tier
        self.j = j
        self.r = Fraction(r)
        self.R = Fraction(R)
        self.m = Fraction(m)
        self.setting = setting
        self.rows = list(rows)
        self.outcomes = list(outcomes)
        self.truncations = dict(truncations)

    @property
    def success_rate(self) -> float:
        if not self.outcomes:
            return 0.0
        return sum(1 for o in self.outcomes if o.success) / len(self.outcomes)

    @property
    def failure_estimate(self) -> float:
        return 1.0 - self.success_rate

    @property
    def failure_bound(self) -> float:
        return self.rows[-1].cumulative_failure_bound if self.rows else 1.0

    def csv_rows(self) -> List[Tuple]:
        return [tuple(row) for row in self.rows]

    def __repr__(self):
        return "CouplingReport(%s, %d layers, failure=%.4g)" % (self.tier, len(self.rows), self.failure_estimate)


def coupling_layers(j: int, r, R, setting: str = HALF, d=DEFAULT_D, enforce_threshold: bool = True,
                    min_layers: int = MIN_LAYERS) -> List[LayerSpec]:
    """
    Double layers between ``u = r^d R^(1-d)`` and R, outermost first. Under the threshold the
    innermost radius is raised to ``10 j``. The circles are the powers of two when at least
    ``min_layers`` double layers fit between them, otherwise ``min_layers`` double layers are
    spaced geometrically from the innermost radius to R.

    :raise: InvalidSpecException when a layer would be thinner than ``MIN_WIDTH``
    """
    r, R, d = Fraction(r), Fraction(R), Fraction(d)
    u = float(r) ** float(d) * float(R) ** float(1 - d)
    lo = max(u, 10.0 * j, 1.0) if enforce_threshold else max(u, 1.0)
    first = math.ceil(math.log2(lo) - 1e-12)
    last = math.floor(math.log2(float(R)) + 1e-12) - 2
    if last - first + 1 >= min_layers:
        return [LayerSpec(i, j, setting, enforce_threshold=enforce_threshold) for i in range(last, first - 1, -1)]
    if lo >= float(R):
        raise InvalidSpecException("no double layer fits between u=%.3g and R=%s" % (lo, format_radius(R)))
    ratio = (float(R) / lo) ** (1.0 / (min_layers + 1))
    circles = [Fraction(math.ceil(lo * ratio ** k * 8), 8) for k in range(min_layers + 1)] + [R]
    if any(b - a < MIN_WIDTH for a, b in zip(circles, circles[1:])):
        raise InvalidSpecException("no %d double layers of width %s fit between u=%.3g and R=%s"
                                   % (min_layers, MIN_WIDTH, lo, format_radius(R)))
    return [LayerSpec(k, j, setting, radii=circles[k:k + 3], enforce_threshold=enforce_threshold)
            for k in range(min_layers - 1, -1, -1)]


def conditioning_events(j: int, r, R, m, setting: str, family: Optional[str] = None):
    """
    ``((event, domain), (event, domain))`` for the two conditional laws to couple: H at R and m R
    in the half-plane, A against X at R for an odd j, Y at R and m R for an even j. An explicit
    family is taken at R and m R.
    """
    R = Fraction(R)
    if family is not None:
        pairs = [(family, R), (family, R * Fraction(m))]
    elif setting == HALF:
        pairs = [('H', R), ('H', R * Fraction(m))]
    elif setting == PLANE_ODD:
        pairs = [('A', R), ('X', R)]
    else:
        pairs = [('Y', R), ('Y', R * Fraction(m))]
    out = []
    for name, radius in pairs:
        event = ArmEventSpec(name, j, r, radius)
        if name == 'H':
            domain = build_domain('half', radius)
        elif name in PLANE_FAMILIES:
            domain = build_domain('disk', radius)
        else:
            domain = default_domain(event)
        out.append((event, domain))
    return tuple(out)


class _Draw(NamedTuple):
    good: GoodSet
    crowded: bool


def _marginal(joint: Mapping, k: int) -> Dict[GoodSet, object]:
    out = {}  # type: Dict[GoodSet, object]
    for v, p in joint.items():
        out[v[k].good] = out.get(v[k].good, 0) + p
    return out


def _conditional(joint: Mapping, history: Tuple) -> Dict[_Draw, object]:
    """
    Law of the next layer's draw given the draws of the layers outside it
    """
    k = len(history)
    out = {}  # type: Dict[_Draw, object]
    for v, p in joint.items():
        if v[:k] == history:
            out[v[k]] = out.get(v[k], 0) + p
    total = sum(out.values())
    return {s: p / total for s, p in out.items()}


def _couple_replicas(gen, joint1: Mapping, joint2: Mapping, overlaps: Sequence[float], N: int,
                     layers: Sequence[LayerSpec]) -> List[CouplingOutcome]:
    """
    Run N replicas of the coupling from the outermost layer in. Each layer draws the pair of good
    sets from the maximal coupling of the two laws given what each replica drew outside it; a
    crowded draw skips the layer without advancing the index.
    """
    outcomes = []
    for n in range(N):
        h1, h2 = (), ()  # type: Tuple, Tuple
        index = 0
        trace = []
        winner = None
        for layer in layers:
            table = maximal_coupling(_conditional(joint1, h1), _conditional(joint2, h2)).table
            pairs = list(table)
            weights = [float(table[p]) for p in pairs]
            total = sum(weights)
            e1, e2 = pairs[int(gen.choice(len(pairs), p=[w / total for w in weights]))]
            h1, h2 = h1 + (e1,), h2 + (e2,)
            if e1.crowded or e2.crowded:
                trace.append(index)
                continue
            index += 1
            if e1 == e2 and e1.good:
                winner = (layer.i, e1.good)
                trace.append(-1)
                break
            trace.append(index)
        theta = winner[1].inner_faces if winner else None
        outcomes.append(CouplingOutcome(winner is not None, winner[0] if winner else None, theta,
                                        tuple(overlaps), tuple(trace)))
    return outcomes


def layered_coupling_experiment(j: int, r, R, m, setting: str, N: int, rng: RngStream, K: int = DEFAULT_K,
                                d=DEFAULT_D, layers: Optional[Sequence[LayerSpec]] = None,
                                enforce_threshold: bool = True, family: Optional[str] = None,
                                tier: Optional[str] = None, max_attempts: int = MAX_ATTEMPTS,
                                threads: Optional[int] = None) -> CouplingReport:
    """
    Couple the two conditional laws of :func:`conditioning_events` from the outermost double
    layer inwards.

    On enumerable domains the joint law of the good sets of all layers is exact; otherwise it is
    the empirical law of N conditional samples, and a sample showing more than K faces at a layer
    marks that layer crowded. Each of the N replicas then runs the sequential maximal coupling:
    at every layer it couples the laws of the layer's good set given the good sets it drew
    outside, and succeeds at the first layer where both draws are the same nonempty good set.
    The reported per-layer overlap is the unconditional ``sum min(p1(S), p2(S))`` over nonempty S.

    :param int j: number of arms
    :param r: inner radius of the conditioning events
    :param R: outer radius of the first event
    :param m: the second event lives at radius m R
    :param str setting: ``half``, ``plane-odd`` or ``plane-even``
    :param int N: replicas, and conditional samples per law in the sampled tier
    :param RngStream rng: parent stream
    :param layers: explicit double layers, outermost first
    :rtype: CouplingReport
    :raise: BudgetException from the conditional sampler
    """
    log = logging.getLogger(__name__)
    if layers is None and Fraction(R) < 4 * Fraction(r):
        raise InvalidSpecException("coupling needs R >= 4 r, got r=%s R=%s" % (format_radius(r), format_radius(R)))
    (event1, domain1), (event2, domain2) = conditioning_events(j, r, R, m, setting, family)
    layers = list(layers) if layers is not None else coupling_layers(j, r, R, setting, d, enforce_threshold)
    if tier is None:
        tier = 'exact' if max(domain1.n, domain2.n) <= MAX_ENUMERATION else 'sampled'
    gen = substream(rng, 7, 0).generator
    truncations = {}
    if tier == 'exact':
        exact1 = good_set_joint_law(domain1, event1, layers)
        exact2 = exact1 if (event2, domain2.spec) == (event1, domain1.spec) else \
            good_set_joint_law(domain2, event2, layers)
        joints = [{tuple(_Draw(s, False) for s in v): p for v, p in law.items()} for law in (exact1, exact2)]
    else:
        joints = []
        crowded = Counter()  # type: Counter
        for event, domain, stream in ((event1, domain1, 5), (event2, domain2, 6)):
            samples = conditional_samples(event, domain, N, substream(rng, stream, 0), max_attempts, threads)
            vectors = [tuple(_Draw(g, faces > K) for g, faces in (_evaluate(cfg, layer) for layer in layers))
                       for cfg in samples]
            for v in vectors:
                crowded.update(layer.i for layer, draw in zip(layers, v) if draw.crowded)
            joints.append({v: c / N for v, c in Counter(vectors).items()})
        truncations = {layer.i: crowded[layer.i] for layer in layers}
    rows = []
    overlaps = []
    bound = 1.0
    for k, layer in enumerate(layers):
        law1, law2 = _marginal(joints[0], k), _marginal(joints[1], k)
        overlap = float(maximal_coupling(law1, law2).success)
        stderr = 0.0 if tier == 'exact' else math.sqrt(overlap * (1.0 - overlap) / N)
        bound *= 1.0 - overlap
        rows.append(LayerRow(layer.i, overlap, stderr, float(empty_mass(law1)), float(empty_mass(law2)), bound))
        overlaps.append(overlap)
        log.info("layer %d: %s overlap %.4f +- %.4f, %d crowded", layer.i, tier, overlap, stderr,
                 truncations.get(layer.i, 0))
    outcomes = _couple_replicas(gen, joints[0], joints[1], overlaps, N, layers)
    return CouplingReport(tier, j, r, R, m, setting, rows, outcomes, truncations)


def failure_decay(reports: Sequence[CouplingReport]) -> SlopeFit:
    """
    Slope of ``log(failure)`` against ``log(r/R)`` over several runs
    """
    points = []
    for report in reports:
        f = report.failure_estimate
        n = max(len(report.outcomes), 1)
        points.append((float(report.r / report.R), f, math.sqrt(f * (1.0 - f) / n)))
    return slope_fit(points)
