import math
from collections import Counter
from fractions import Fraction
from unittest import TestCase

from scipy import stats

from armlab import *
from armlab.exceptions import *
from constants import Constants

MICRO = (1, Fraction(3, 2), Fraction(5, 2))
RIGHT_RED = [(1, 0), (0, 1), (1, 1), (2, 0), (0, 2)]
LEFT_BLUE = [(-1, 0), (-1, 1), (-2, 1), (-2, 0), (-2, 2), (-1, 2)]


def micro_layer():
    return LayerSpec(0, 2, HALF, radii=MICRO, enforce_threshold=False)


class TestLayers(TestCase):
    c = Constants()

    def test_layer_spec(self):
        layer = LayerSpec(5, 2)
        self.assertEqual((layer.r, layer.middle, layer.outer), (32, 64, 128))
        self.assertFalse(layer.plane)
        self.assertTrue(LayerSpec(5, 3, PLANE_ODD).plane)
        self.assertEqual(LayerSpec(5, 2), LayerSpec(5, 2, HALF))
        self.assertNotEqual(LayerSpec(5, 2), LayerSpec(6, 2))

    def test_layer_errors(self):
        self.assertRaises(InvalidSpecException, LayerSpec, 5, 1)
        self.assertRaises(InvalidSpecException, LayerSpec, 5, 2, PLANE_ODD)
        self.assertRaises(InvalidSpecException, LayerSpec, 5, 3, PLANE_EVEN)
        self.assertRaises(InvalidSpecException, LayerSpec, 5, 2, 'sphere')
        self.assertRaises(InvalidSpecException, LayerSpec, 0, 2)
        self.assertRaises(InvalidSpecException, LayerSpec, 0, 2, HALF, (4, 2, 8), False)

    def test_micro_layer(self):
        layer = micro_layer()
        self.assertEqual(layer.region.n, 11)
        self.assertEqual(layer.band(HexCoord(1, 0)), 0)
        self.assertEqual(layer.band(HexCoord(2, 0)), 1)

    def test_coupling_layers(self):
        layers = coupling_layers(2, 1, 1024)
        self.assertEqual([layer.i for layer in layers], [8, 7, 6, 5])
        self.assertRaises(InvalidSpecException, coupling_layers, 2, 1, 8, HALF, Fraction(1, 2), False)

    def test_coupling_layers_below_dyadic(self):
        for R in (32, 64, 128):
            layers = coupling_layers(2, 4, R, PLANE_EVEN)
            self.assertGreaterEqual(len(layers), 2, R)
            self.assertEqual(layers[0].outer, R)
            self.assertGreaterEqual(layers[-1].r, 20)
            for outer, inner in zip(layers, layers[1:]):
                self.assertEqual((inner.middle, inner.outer), (outer.r, outer.middle))
            for layer in layers:
                self.assertGreaterEqual(layer.middle - layer.r, MIN_WIDTH)
                self.assertGreaterEqual(layer.outer - layer.middle, MIN_WIDTH)

    def test_conditioning_events(self):
        (e1, d1), (e2, d2) = conditioning_events(2, 1, 4, 2, HALF)
        self.assertEqual((e1.family, e1.R, e2.R), ('H', 4, 8))
        self.assertEqual((d1.spec, d2.spec), ('half:4', 'half:8'))
        (e1, d1), (e2, d2) = conditioning_events(3, 1, 4, 2, PLANE_ODD)
        self.assertEqual((e1.family, e1.R, d1.kind), ('A', 4, 'disk'))
        self.assertEqual((e2.family, e2.R, d2.kind), ('X', 4, 'disk'))
        (e1, d1), (e2, d2) = conditioning_events(2, 1, 4, 2, PLANE_EVEN)
        self.assertEqual((e1.family, e1.R, e2.family, e2.R), ('Y', 4, 'Y', 8))
        self.assertEqual((d1.spec, d2.spec), ('disk:4', 'disk:8'))


class TestGoodSet(TestCase):
    c = Constants()

    def test_equality(self):
        h = HexCoord(0, 0)
        self.assertEqual(GoodSet(None, {h: RED}), GoodSet(micro_layer(), {h: RED}))
        self.assertNotEqual(GoodSet(None, {h: RED}), GoodSet(None, {h: BLUE}))
        self.assertFalse(GoodSet.empty())
        self.assertEqual(len({GoodSet.empty(), GoodSet.empty(micro_layer())}), 1)

    def test_monochrome_fails(self):
        layer = micro_layer()
        cfg = Configuration.uniform(layer.region, RED)
        self.assertFalse(good_set(cfg, layer))
        self.assertFalse(good_event(cfg, layer))
        self.assertIsNone(hat_label(cfg, good_set(cfg, layer)))

    def test_split_layer(self):
        layer = micro_layer()
        cfg = Configuration.painted(layer.region, red=RIGHT_RED, blue=LEFT_BLUE)
        self.assertEqual(len(trace_interfaces(cfg, layer.region, 'outer')), 1)
        good = good_set(cfg, layer)
        self.assertTrue(good.agrees_with(cfg))
        self.assertTrue(good.cells <= frozenset(layer.region.hexagons))
        self.assertEqual(good_event(cfg, layer), bool(good))

    def test_good_event_witness(self):
        layer = micro_layer()
        cfg = next(cfg for cfg in enumerate_all(layer.region) if good_event(cfg, layer))
        good = good_set(cfg, layer)
        self.assertTrue(good)
        self.assertTrue(good.agrees_with(cfg))
        for g in trace_interfaces(cfg, layer.region, 'outer'):
            self.assertTrue(g.touching <= good.cells)
        self.assertTrue(good.cells <= frozenset(layer.region.hexagons))

    def test_good_set_is_determined_by_its_cells(self):
        layer = micro_layer()
        found = [(cfg, good_set(cfg, layer)) for cfg in enumerate_all(layer.region)]
        realized = set(good for _, good in found if good)
        self.assertTrue(realized)
        for cfg, own in found:
            self.assertEqual(good_set(cfg, layer), own)
            if own:
                for good in realized:
                    if good.agrees_with(cfg):
                        self.assertEqual(good, own)

    def test_quasi_good_inclusion(self):
        layer = micro_layer()
        count = quasi_good_inclusion(layer.region, layer)
        self.assertEqual(count.violations, 0)
        self.assertGreaterEqual(count.quasi_good, count.violations)

    def test_layer_out_of_domain(self):
        cfg = Configuration.uniform(build_domain('half', 2), RED)
        self.assertRaises(InvalidSpecException, good_set, cfg, micro_layer())

    def test_quasi_good_is_half_only(self):
        layer = LayerSpec(0, 3, PLANE_ODD, radii=(1, 2, 4), enforce_threshold=False)
        cfg = Configuration.uniform(build_domain('disk', 4), RED)
        self.assertRaises(InvalidSpecException, quasi_good_event, cfg, layer)


class TestCouplingLaws(TestCase):
    c = Constants()

    def test_maximal_coupling(self):
        law1 = {'x': Fraction(1, 2), 'y': Fraction(1, 2)}
        law2 = {'x': Fraction(1, 4), 'y': Fraction(3, 4)}
        coupling = maximal_coupling(law1, law2)
        self.assertEqual(coupling.success, Fraction(3, 4))
        self.assertEqual(total_variation(law1, law2), Fraction(1, 4))
        for a in law1:
            self.assertEqual(sum(p for (x, _), p in coupling.table.items() if x == a), law1[a])
        for b in law2:
            self.assertEqual(sum(p for (_, y), p in coupling.table.items() if y == b), law2[b])

    def test_disjoint_supports(self):
        coupling = maximal_coupling({'x': Fraction(1)}, {'y': Fraction(1)})
        self.assertEqual(coupling.success, 0)
        self.assertEqual(total_variation({'x': Fraction(1)}, {'y': Fraction(1)}), 1)

    def test_empty_value_never_counts(self):
        law = {None: Fraction(1, 2), 'x': Fraction(1, 2)}
        self.assertEqual(maximal_coupling(law, law).success, Fraction(1, 2))
        self.assertEqual(empty_mass(law), Fraction(1, 2))

    def test_unnormalized(self):
        self.assertRaises(InvalidSpecException, maximal_coupling, {'x': Fraction(1, 2)}, {'x': Fraction(1)})
        self.assertRaises(InvalidSpecException, maximal_coupling, {'x': Fraction(3, 2), 'y': Fraction(-1, 2)},
                          {'x': Fraction(1)})

    def test_weight_spread(self):
        one = GoodSet(None, {HexCoord(0, 0): RED})
        two = GoodSet(None, {HexCoord(0, 0): RED, HexCoord(1, 0): BLUE})
        law = {one: Fraction(1, 2), two: Fraction(1, 4), GoodSet.empty(): Fraction(1, 4)}
        self.assertEqual(weight_spread(law), 1)
        self.assertIsNone(weight_spread({GoodSet.empty(): Fraction(1)}))

    def test_good_set_law(self):
        layer = micro_layer()
        law = good_set_law(layer.region, ArmEventSpec('B', 2, 1, Fraction(5, 2)), layer)
        self.assertEqual(sum(law.values()), 1)
        self.assertTrue(all(s.size == 0 or s.cells <= frozenset(layer.region.hexagons) for s in law))

    def test_good_set_law_errors(self):
        layer = micro_layer()
        self.assertRaises(TooLargeException, good_set_law, build_domain('half', 8),
                          ArmEventSpec('B', 2, 1, Fraction(5, 2)), layer)
        self.assertRaises(InvalidSpecException, good_set_law, layer.region,
                          ArmEventSpec('B', 6, 1, Fraction(5, 2)), layer)


class TestSampling(TestCase):
    c = Constants()

    def test_conditional_sample(self):
        event = ArmEventSpec('B', 2, 1, Fraction(5, 2))
        domain = event.region
        cfg = conditional_sample(event, domain, RngStream(self.c.seed, 31))
        self.assertTrue(detect(event, cfg))

    def test_conditional_law(self):
        event = ArmEventSpec('B', 2, 1, Fraction(5, 2))
        domain = event.region
        exact = Counter(int(cfg.colors.sum()) for cfg in enumerate_all(domain) if detect(event, cfg))
        total = sum(exact.values())
        sampler = RejectionSampler(event, domain, RngStream(self.c.seed, 30))
        N = self.c.samples
        seen = Counter(int(sampler.draw().colors.sum()) for _ in range(N))
        self.assertTrue(set(seen) <= set(exact))
        observed, expected = [], []
        for reds in sorted(exact):
            if not expected or expected[-1] >= 5:
                observed.append(0)
                expected.append(0.0)
            observed[-1] += seen[reds]
            expected[-1] += N * exact[reds] / total
        if len(expected) > 1 and expected[-1] < 5:
            observed[-2] += observed.pop()
            expected[-2] += expected.pop()
        self.assertGreater(stats.chisquare(observed, expected).pvalue, 0.001)
        p = total / 2 ** domain.n
        self.assertEqual(sampler.accepted, N)
        self.assertLessEqual(abs(sampler.acceptance_rate - p), 4 * math.sqrt(p * (1 - p) / sampler.attempts))

    def test_conditional_samples(self):
        event = ArmEventSpec('B', 2, 1, Fraction(5, 2))
        domain = event.region
        first = conditional_samples(event, domain, 12, RngStream(self.c.seed, 32), threads=1, batch_size=5)
        second = conditional_samples(event, domain, 12, RngStream(self.c.seed, 32), threads=1, batch_size=5)
        self.assertEqual(len(first), 12)
        self.assertEqual(first, second)
        self.assertTrue(all(detect(event, cfg) for cfg in first))

    def test_budget(self):
        event = ArmEventSpec('B', 6, 1, Fraction(5, 2))
        sampler = RejectionSampler(event, event.region, RngStream(self.c.seed, 33), max_attempts=50)
        with self.assertRaises(BudgetException):
            sampler.draw()
        self.assertEqual(sampler.attempts, 50)
        self.assertEqual(sampler.acceptance_rate, 0.0)


class TestExperiment(TestCase):
    c = Constants()

    def test_micro_exact(self):
        report = layered_coupling_experiment(2, 1, Fraction(5, 2), 1, HALF, 200, RngStream(self.c.seed, 34),
                                             family='B', layers=[micro_layer()])
        self.assertEqual(report.tier, 'exact')
        self.assertEqual(len(report.rows), 1)
        row = report.rows[0]
        self.assertEqual(row.layer_index, 0)
        self.assertEqual(row.overlap_stderr, 0.0)
        self.assertAlmostEqual(row.overlap_estimate, 1.0 - row.empty_mass_1)
        self.assertAlmostEqual(row.cumulative_failure_bound, row.empty_mass_1)
        self.assertEqual(len(report.outcomes), 200)
        self.assertEqual(len(report.csv_rows()[0]), len(CSV_COLUMNS))
        for outcome in report.outcomes:
            self.assertEqual(outcome.success, outcome.success_layer == 0)

    def test_micro_is_reproducible(self):
        kwargs = dict(family='B', layers=[micro_layer()])
        first = layered_coupling_experiment(2, 1, Fraction(5, 2), 1, HALF, 50, RngStream(self.c.seed, 35), **kwargs)
        second = layered_coupling_experiment(2, 1, Fraction(5, 2), 1, HALF, 50, RngStream(self.c.seed, 35), **kwargs)
        self.assertEqual(first.success_rate, second.success_rate)
        self.assertEqual(first.csv_rows(), second.csv_rows())

    def test_scale_separation(self):
        self.assertRaises(InvalidSpecException, layered_coupling_experiment, 2, 1, 3, 1, HALF, 10,
                          RngStream(self.c.seed, 36))

    def test_sequential_coupling(self):
        outer = LayerSpec(1, 2, HALF, radii=(Fraction(3, 2), 2, Fraction(5, 2)), enforce_threshold=False)
        inner = LayerSpec(0, 2, HALF, radii=(1, Fraction(3, 2), 2), enforce_threshold=False)
        N = 200
        report = layered_coupling_experiment(2, 1, Fraction(5, 2), 1, HALF, N, RngStream(self.c.seed, 37),
                                             family='B', layers=[outer, inner])
        self.assertEqual(report.tier, 'exact')
        self.assertEqual([row.layer_index for row in report.rows], [1, 0])
        for row in report.rows:
            self.assertAlmostEqual(row.overlap_estimate, 1.0 - row.empty_mass_1)
        for outcome in report.outcomes:
            if outcome.success:
                self.assertEqual(outcome.i_trace[-1], -1)
                self.assertEqual(outcome.success_layer, (1, 0)[len(outcome.i_trace) - 1])
            else:
                self.assertEqual(outcome.i_trace, (1, 2))
        (event, domain), _ = conditioning_events(2, 1, Fraction(5, 2), 1, HALF, 'B')
        joint = good_set_joint_law(domain, event, [outer, inner])
        p = float(sum(q for v, q in joint.items() if not any(v)))
        self.assertLessEqual(abs(report.failure_estimate - p), 4 * math.sqrt(p * (1 - p) / N) + 1e-12)

    def test_sampled_tier(self):
        kwargs = dict(family='B', layers=[micro_layer()], tier='sampled', threads=1)
        report = layered_coupling_experiment(2, 1, Fraction(5, 2), 1, HALF, 100, RngStream(self.c.seed, 38), **kwargs)
        self.assertEqual(report.tier, 'sampled')
        self.assertEqual(set(report.truncations), {0})
        row = report.rows[0]
        self.assertLessEqual(row.overlap_estimate, 1.0 - max(row.empty_mass_1, row.empty_mass_2) + 1e-9)
        self.assertEqual(len(report.outcomes), 100)

    def test_crowded_layers_are_skipped(self):
        report = layered_coupling_experiment(2, 1, Fraction(5, 2), 1, HALF, 20, RngStream(self.c.seed, 39), K=0,
                                             family='B', layers=[micro_layer()], tier='sampled', threads=1)
        self.assertEqual(report.truncations, {0: 40})
        for outcome in report.outcomes:
            self.assertFalse(outcome.success)
            self.assertEqual(outcome.i_trace, (0,))

    def test_plane_layers_at_desk_radii(self):
        for R in (32, 64, 128):
            report = layered_coupling_experiment(2, 4, R, 1, PLANE_EVEN, 2, RngStream(self.c.seed, 40), threads=1)
            self.assertEqual(report.tier, 'sampled')
            self.assertGreaterEqual(len(report.rows), 2, R)
            self.assertEqual(len(report.outcomes), 2)
