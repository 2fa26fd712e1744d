import math
from fractions import Fraction
from unittest import TestCase

from hypothesis import given, strategies as st

from armlab import *
from armlab.exceptions import *
from constants import Constants


class TestHexCoord(TestCase):
    c = Constants()

    def test_neighbors(self):
        h = HexCoord(3, -2)
        ns = neighbors(h)
        self.assertEqual(len(ns), 6)
        self.assertEqual(len(set(ns)), 6)
        for n in ns:
            self.assertAlmostEqual(math.dist(h.center, n.center), 1.0)

    @given(st.integers(-50, 50), st.integers(-50, 50))
    def test_norm_matches_center(self, a, b):
        h = HexCoord(a, b)
        x, y = h.center
        self.assertAlmostEqual(x * x + y * y, h.norm2(), places=6)

    def test_direction(self):
        h = HexCoord(0, 0)
        for k in range(6):
            self.assertEqual(direction(h, h.shift(k)), k)
        self.assertRaises(ValueError, direction, h, HexCoord(2, 0))

    def test_dual_vertex(self):
        v = DualVertex(2, 1, 1)
        self.assertEqual(DualVertex.of(v.hexagons), v)
        w = DualVertex(-1, 4, 0)
        self.assertEqual(DualVertex.of(reversed(w.hexagons)), w)
        self.assertRaises(ValueError, DualVertex.of, [HexCoord(0, 0), HexCoord(1, 0), HexCoord(2, 0)])

    def test_step(self):
        s = Step(HexCoord(0, 0), 0)
        self.assertEqual(s.right, HexCoord(1, 0))
        self.assertEqual(s.ahead, HexCoord(0, 1))
        self.assertEqual(s.edge, DualEdge.of(HexCoord(1, 0), HexCoord(0, 0)))
        self.assertEqual(set(s.forward_vertex.hexagons), {HexCoord(0, 0), HexCoord(1, 0), HexCoord(0, 1)})


class TestDomains(TestCase):
    c = Constants()

    def test_counts(self):
        self.assertEqual(build_domain('disk', 1).n, 1)
        self.assertEqual(build_domain('disk', 2).n, 13)
        self.assertEqual(build_domain('disk', 3).n, 31)
        self.assertEqual(build_domain('half', 2).n, 8)
        self.assertEqual(build_domain('half', Fraction(5, 2)).n, 12)
        self.assertEqual(build_domain('semiann', Fraction(5, 2), 1).n, 11)
        self.assertEqual(build_domain('ann', 2, 1).n, 12)

    def test_index_order(self):
        domain = build_domain('disk', 4)
        keys = [(h.b, h.a) for h in domain.hexagons]
        self.assertEqual(keys, sorted(keys))
        for i, h in enumerate(domain.hexagons):
            self.assertEqual(domain.index_of(h), i)

    def test_parse(self):
        for spec in ('disk:8', 'half:16', 'half:4:16', 'ann:2:5', 'semiann:1:5/2', 'halfexp:16', 'planeexp:16'):
            self.assertEqual(parse_domain(spec).spec, spec)
        self.assertIs(parse_domain('disk:8'), build_domain('disk', 8))

    def test_parse_errors(self):
        for spec in ('foo:3', 'ann:5:2', 'disk', 'disk:0', 'disk:1/0', 'ann:3', 'disk:1:2:3', 'disk:x'):
            with self.assertRaises(InvalidSpecException):
                parse_domain(spec)

    def test_circle_is_close(self):
        R = 8
        loop = build_domain('disk', R).outer_loop
        self.assertTrue(loop.closed)
        for v in loop.vertices:
            self.assertLessEqual(abs(math.hypot(*v.position) - R), 2.0)

    def test_single_hexagon_loop(self):
        loops = boundary_loops(frozenset([HexCoord(0, 0)]))
        self.assertEqual(len(loops), 1)
        self.assertEqual(len(loops[0]), 6)
        self.assertEqual(set(loops[0].left_cells), {HexCoord(0, 0)})

    def test_annulus_has_two_loops(self):
        domain = build_domain('ann', 6, 2)
        self.assertEqual(len(domain.loops), 2)
        self.assertEqual(set(domain.arc_names), {"C_r", "C_R"})

    def test_arc_names(self):
        domain = build_domain('semiann', 8, 2)
        for name in ("C_r+", "C_R+", "[r,R]", "[-R,-r]"):
            self.assertIn(name, domain.arc_names)
        self.assertEqual(domain.arc_of(HexCoord(0, 0)), "C_r+")
        self.assertEqual(domain.arc_of(HexCoord(4, -1)), "[r,R]")
        self.assertEqual(domain.arc_of(HexCoord(-4, -1)), "[-R,-r]")
        self.assertRaises(ValueError, domain.arc_of, HexCoord(3, 0))

    def test_boundary_arc(self):
        domain = build_domain('semiann', 8, 2)
        arc = domain.boundary_arc("[r,R]")
        self.assertTrue(all(domain.arc_of(s.right) == "[r,R]" for s in arc))
        self.assertRaises(InvalidSpecException, domain.boundary_arc, "C_r")

    def test_exploration_domains(self):
        half = build_domain('halfexp', 16)
        self.assertIn('a', half.marks)
        self.assertIn('b', half.marks)
        self.assertTrue(any(h.b < 0 for h in half.hexagons))
        plane = build_domain('planeexp', 16)
        self.assertIn('a', plane.marks)
        self.assertIn('e', plane.marks)
        self.assertTrue(all(h in plane for h in build_domain('disk', 16).hexagons))

    def test_snap_vertex(self):
        loop = build_domain('disk', 6).outer_loop
        candidates = [(i, s.forward_vertex) for i, s in enumerate(loop)]
        i, v = snap_vertex(candidates, (6.0, 0.0))
        self.assertTrue(all(math.dist(v.position, (6.0, 0.0)) <= math.dist(w.position, (6.0, 0.0)) + 1e-12
                            for _, w in candidates))

    def test_half_disk_corner(self):
        domain = build_domain('half', 1)
        labels = [domain.arc_of(s.right) for s in domain.outer_loop]
        self.assertEqual(labels.count("C_R+"), 3)
        self.assertEqual(labels.count("[-R,R]"), 3)

    def test_half_disk_arcs_meet_twice(self):
        for R in (1, 2, Fraction(5, 2), 8, 16):
            domain = build_domain('half', R)
            labels = [domain.arc_of(s.right) for s in domain.outer_loop]
            changes = [i for i in range(len(labels)) if labels[i] != labels[i - 1]]
            self.assertEqual(len(changes), 2, R)

    def test_disks_are_nested(self):
        radii = (1, 2, 4, 8, 16, 32, 64)
        for r, R in zip(radii, radii[1:]):
            outer = build_domain('disk', R).outer_loop.polygon()
            for v in build_domain('disk', r).outer_loop.vertices:
                self.assertTrue(encloses(outer, v.position), (r, R, v))
            self.assertTrue(set(build_domain('disk', r).hexagons) <= set(build_domain('disk', R).hexagons))

    def test_no_cracks(self):
        for R in (1, Fraction(3, 2), 2, 3, 4, 6, 8, 12, 16, 24, 32, 48, 64):
            self.assertEqual(len(build_domain('disk', R).loops), 1, R)
            self.assertEqual(len(build_domain('half', R).loops), 1, R)

    def test_circle_marks(self):
        disk = build_domain('disk', 16)
        marks = circle_marks(disk.outer_loop, frozenset(disk.hexagons), 16)
        self.assertEqual(marks.size, len(disk.outer_loop))
        self.assertEqual(marks.arc(marks.ia + 1), 'ac')
        self.assertEqual(marks.arc(marks.ia), 'ba')
        self.assertEqual(marks.arc(marks.ic + 1), 'cb')
        self.assertEqual(marks.arc(marks.ib + 1), 'ba')

    def test_plane_exploration_rim(self):
        for R in (8, 16):
            plane = build_domain('planeexp', R)
            disk = build_domain('disk', R)
            rim = disk.outer_loop
            marks = circle_marks(rim, frozenset(disk.hexagons), R)
            for i, s in enumerate(rim):
                arc = marks.arc(i)
                if arc == 'cb':
                    self.assertIn(s.right, plane)
                else:
                    self.assertNotIn(s.right, plane)
                    self.assertEqual(plane.arc_of(s.right), "ace" if arc == 'ac' else "eba")

    def test_label_between_marks(self):
        disk = build_domain('disk', 4)
        loop = disk.outer_loop
        corners = corner_vertices(loop, frozenset(disk.hexagons))
        (first, _), (second, _) = corners[0], corners[len(corners) // 2]
        labels = label_between_marks(loop, first, second, ("x", "y"))
        self.assertEqual(set(labels), set(s.right for s in loop))
        self.assertEqual(labels[loop[first + 1].right], "x")
        self.assertEqual(labels[loop[first].right], "y")
        self.assertEqual(labels[loop[second].right], "x")
