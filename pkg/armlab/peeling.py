"""
Arm peeling on quads.

A quad is a set of cells together with a role for every hexagon around it: arms start next
to ``SOURCE`` hexagons and must reach ``TARGET`` hexagons, ``WALL`` is the side the next arm
is peeled off from and ``FAIL`` is the far side. Peeling follows the b-path that keeps arm
colored cells on one hand, so the arm it finds is the one closest to the wall.
"""
import logging
from collections import deque
from typing import Callable, Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

from .exceptions import *
from .lattice import DualEdge, HexCoord, Step, neighbors

SOURCE = 'source'
TARGET = 'target'
WALL = 'wall'
FAIL = 'fail'

ARM = 'arm'
OPPOSITE = 'opposite'

_ARM_CLASS = frozenset([ARM, SOURCE, TARGET, FAIL])

Role = Callable[[HexCoord, Optional[HexCoord]], str]


def loop_erase(cells: Iterable[HexCoord]) -> List[HexCoord]:
    out = []  # type: List[HexCoord]
    position = {}  # type: Dict[HexCoord, int]
    for c in cells:
        if c in position:
            keep = position[c] + 1
            for dropped in out[keep:]:
                del position[dropped]
            del out[keep:]
        else:
            position[c] = len(out)
            out.append(c)
    return out


def static_role(roles: Callable[[HexCoord], str]) -> Role:
    return lambda h, anchor: roles(h)


def flood(seeds: Iterable[HexCoord], allowed: Callable[[HexCoord], bool],
          blocked: Optional[Callable[[HexCoord, HexCoord], bool]] = None) -> Set[HexCoord]:
    """
    Breadth-first closure of the seeds over allowed hexagons. ``blocked(h, g)`` can forbid single moves.
    """
    seen = set(s for s in seeds if allowed(s))
    queue = deque(seen)
    while queue:
        h = queue.popleft()
        for g in neighbors(h):
            if g not in seen and allowed(g) and (blocked is None or not blocked(h, g)):
                seen.add(g)
                queue.append(g)
    return seen


def connects(seeds: Iterable[HexCoord], allowed: Callable[[HexCoord], bool], goal: Callable[[HexCoord], bool]) -> bool:
    seen = set()
    queue = deque()
    for s in seeds:
        if allowed(s) and s not in seen:
            if goal(s):
                return True
            seen.add(s)
            queue.append(s)
    while queue:
        h = queue.popleft()
        for g in neighbors(h):
            if g not in seen and allowed(g):
                if goal(g):
                    return True
                seen.add(g)
                queue.append(g)
    return False


class Peeler(object):
    """
    Greedy arm extraction on one quad of a configuration

    :param cfg: the :class:`armlab.percolation.Configuration` giving cell colors
    :param cells: the quad's cells
    :param role: role of a hexagon outside the quad, given the cell it is seen from (or None)
    :param str hand: ``left`` keeps arms on the left of travel, ``right`` mirrors it
    :param cut: dual edges that must not be crossed; cells on both sides see each other as virtual
    :param side_a: cells on the wall side of the cut
    """
    def __init__(self, cfg, cells: FrozenSet[HexCoord], role: Role, hand: str = 'left',
                 cut: FrozenSet[DualEdge] = frozenset(), side_a: FrozenSet[HexCoord] = frozenset(),
                 limit: Optional[int] = None):
        if hand not in ('left', 'right'):
            raise ValueError("hand must be 'left' or 'right'")
        self._log = logging.getLogger(__name__)
        self.__cfg = cfg
        self.__cells = cells
        self.__role = role
        self.__hand = hand
        self.__cut = cut
        self.__side_a = side_a
        self.__walls = set()  # type: Set[HexCoord]
        self.__limit = limit if limit is not None else 12 * len(cells) + 64

    @property
    def walls(self) -> FrozenSet[HexCoord]:
        return frozenset(self.__walls)

    def add_walls(self, cells: Iterable[HexCoord]):
        self.__walls.update(cells)

    def _arm_cell(self, state: Step) -> HexCoord:
        return state.left if self.__hand == 'left' else state.right

    def _opposite_cell(self, state: Step) -> HexCoord:
        return state.right if self.__hand == 'left' else state.left

    def classify(self, h: HexCoord, color: int, anchors: Sequence[HexCoord] = (), role: Optional[Role] = None) -> Tuple[str, bool]:
        """
        ``(class, virtual)`` of a hexagon as seen from the anchor cells
        """
        if self.__cut and h in self.__cells:
            for anchor in anchors:
                if DualEdge.of(anchor, h) in self.__cut:
                    return (WALL if anchor in self.__side_a else FAIL, True)
        if h in self.__cells:
            if h in self.__walls:
                return (WALL, False)
            return (ARM if self.__cfg.color(h) == color else OPPOSITE, False)
        role = role or self.__role
        anchor = anchors[0] if anchors else None
        return (role(h, anchor), False)

    def trace(self, start: Step, color: int, opposite_virtual: bool = False,
              role: Optional[Role] = None) -> Optional[Tuple[List[HexCoord], HexCoord]]:
        """
        Follow the quad from ``start`` until the arm side reaches TARGET or FAIL.

        :return: ``(arm, source cell it leaves from)`` or None when no arm of this color exists
        :raise: TraceException if the walk does not terminate
        """
        hand_left = self.__hand == 'left'
        state = start
        first = self._arm_cell(start)
        sequence = [(first, self.classify(first, color, (), role)[0])]
        ov = opposite_virtual
        for _ in range(self.__limit):
            anchors = [c for c in (self._arm_cell(state), None if ov else self._opposite_cell(state))
                       if c is not None and c in self.__cells]
            t = state.ahead
            cls, virtual = self.classify(t, color, anchors, role)
            joins_arm = cls in _ARM_CLASS
            state = state.advance(joins_arm == hand_left)
            if joins_arm:
                sequence.append((t, cls))
                if cls == TARGET:
                    return self._extract(sequence)
                if cls == FAIL:
                    return None
            else:
                ov = virtual
        raise TraceException("peel from %s exceeded %d steps" % (start, self.__limit))

    @staticmethod
    def _extract(sequence: List[Tuple[HexCoord, str]]) -> Optional[Tuple[List[HexCoord], HexCoord]]:
        last_source = max(i for i, (_, cls) in enumerate(sequence) if cls == SOURCE) \
            if any(cls == SOURCE for _, cls in sequence) else None
        if last_source is None:
            return None
        arm = loop_erase(c for c, cls in sequence[last_source + 1:] if cls == ARM)
        if not arm:
            return None
        return arm, sequence[last_source][0]

    def next_start(self, arm: List[HexCoord], source: HexCoord) -> Step:
        if self.__hand == 'left':
            return Step.between(source, arm[0])
        return Step.between(arm[0], source)

    def peel(self, start: Step, colors: Sequence[int], opposite_virtual: bool = False,
             roles: Optional[Sequence[Role]] = None) -> Optional[List[List[HexCoord]]]:
        """
        Extract arms of the given colors in order, each as close to the previous one as possible

        :return: the arms, or None if some arm does not exist
        """
        arms = []
        state, ov = start, opposite_virtual
        for i, color in enumerate(colors):
            found = self.trace(state, color, ov, roles[i] if roles is not None else None)
            if found is None:
                return None
            arm, source = found
            arms.append(arm)
            self.__walls.update(arm)
            state, ov = self.next_start(arm, source), False
        return arms

    def count(self, start: Step, color: int, cap: int, opposite_virtual: bool = False) -> int:
        """
        Number of disjoint arms of one color, up to ``cap``
        """
        n = 0
        state, ov = start, opposite_virtual
        while n < cap:
            found = self.trace(state, color, ov)
            if found is None:
                break
            arm, source = found
            self.__walls.update(arm)
            state, ov = self.next_start(arm, source), False
            n += 1
        return n


def find_corner(cells: FrozenSet[HexCoord], roles: Callable[[HexCoord], str], hand: str = 'left',
                prefer: Optional[Callable[[Step], object]] = None) -> Optional[Step]:
    """
    Start step where SOURCE meets WALL around some quad cell: for the left hand the SOURCE
    hexagon is on the left, for the right hand the WALL hexagon is.
    """
    first, second = (SOURCE, WALL) if hand == 'left' else (WALL, SOURCE)
    found = []
    for x in cells:
        for k in range(6):
            nk, nk1 = x.shift(k), x.shift(k + 1)
            if nk in cells or nk1 in cells:
                continue
            if roles(nk) == first and roles(nk1) == second:
                found.append(Step(nk, (k + 2) % 6))
    if not found:
        return None
    if prefer is not None:
        return min(found, key=prefer)
    return min(found, key=lambda s: (s.left.b, s.left.a, s.k))
