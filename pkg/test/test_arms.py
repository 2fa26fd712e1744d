from fractions import Fraction
from unittest import TestCase, skipUnless

from armlab import *
from armlab.exceptions import *
from constants import Constants


class TestEventSpec(TestCase):
    c = Constants()

    def test_parse(self):
        for text in ('B:2:4:64', 'B:2:4:64:bb', 'H:1:2:16', 'Y:4:2:33/2', 'P:3:1:8:rrb'):
            self.assertEqual(parse_event(text).spec, text)
        self.assertEqual(parse_event('b:2:4:64'), ArmEventSpec('B', 2, 4, 64))

    def test_parse_errors(self):
        for text in ('Q:1:2:3', 'B:x:1:2', 'B:1:3:2', 'B:2:1:4:r', 'P:2:1:4:rr', 'Y:2:1:4:rb', 'A:1:1:4', 'B:1:2'):
            with self.assertRaises(InvalidSpecException):
                parse_event(text)

    def test_default_colors(self):
        self.assertEqual(ArmEventSpec('B', 3, 1, 4).colors, (RED, BLUE, RED))
        self.assertIsNone(ArmEventSpec('P', 3, 1, 4).colors)
        self.assertEqual(len(ArmEventSpec('Y', 5, 1, 8).colors), 5)

    def test_regions(self):
        self.assertEqual(ArmEventSpec('B', 1, 2, 8).region.spec, 'semiann:2:8')
        self.assertEqual(ArmEventSpec('H', 1, 2, 8).region.spec, 'half:2:8')
        self.assertEqual(ArmEventSpec('A', 2, 2, 8).region.spec, 'ann:2:8')

    def test_exponents(self):
        self.assertEqual(exponent('B', 1).value, Fraction(1, 3))
        self.assertEqual(exponent('H', 2).value, 1)
        self.assertEqual(exponent('half', 3).value, 2)
        self.assertEqual(exponent('P', 2).value, Fraction(1, 4))
        self.assertEqual(exponent('plane', 5).value, 2)
        self.assertRaises(InvalidSpecException, exponent, 'plane', 1)

    def test_pattern_split(self):
        for j in range(2, 12):
            split = pattern_split(j)
            self.assertEqual(split.l + split.r_count, j)
            self.assertEqual(len(prescribed_colors(j)), j)

    def test_d_constant(self):
        self.assertEqual(d_constant(3), 1)
        self.assertEqual(d_constant(6), 3)
        self.assertEqual(d_constant(8), 2)
        self.assertRaises(InvalidSpecException, d_constant, 1)


class TestDetect(TestCase):
    c = Constants()

    def test_monochrome(self):
        half = build_domain('half', 4)
        red = Configuration.uniform(half, RED)
        blue = Configuration.uniform(half, BLUE)
        self.assertTrue(detect(parse_event('H:1:1:4'), red))
        self.assertFalse(detect(parse_event('B:2:1:4'), red))
        self.assertFalse(detect(parse_event('B:1:1:4'), blue))
        self.assertTrue(detect(parse_event('B:1:1:4:b'), blue))
        disk = build_domain('disk', 4)
        self.assertFalse(detect(parse_event('P:2:1:4'), Configuration.uniform(disk, BLUE)))
        self.assertFalse(detect(parse_event('A:2:1:4'), Configuration.uniform(disk, RED)))

    def test_domain_mismatch(self):
        cfg = Configuration.uniform(build_domain('disk', 4), RED)
        self.assertRaises(InvalidSpecException, detect, parse_event('H:1:1:4'), cfg)
        small = Configuration.uniform(build_domain('half', 3), RED)
        self.assertRaises(InvalidSpecException, detect, parse_event('B:1:1:4'), small)

    def test_oracle_agreement_half(self):
        domain = build_domain('half', 2)
        for text in ('B:1:1:2', 'B:2:1:2', 'H:1:1:2', 'H:2:1:2'):
            event = parse_event(text)
            self.assertEqual(exact_probability(domain, lambda cfg: detect(event, cfg)),
                             exact_probability(domain, lambda cfg: detect_oracle(event, cfg)), text)

    def test_oracle_agreement_plane(self):
        domain = build_domain('disk', 2)
        for text in ('P:2:1:2', 'A:2:1:2'):
            event = parse_event(text)
            self.assertEqual(exact_probability(domain, lambda cfg: detect(event, cfg)),
                             exact_probability(domain, lambda cfg: detect_oracle(event, cfg)), text)

    def test_oracle_agreement_random(self):
        domain = build_domain('half', 16)
        rng = RngStream(self.c.seed, 11)
        events = [parse_event('B:2:2:16'), parse_event('B:3:2:16')]
        for _ in range(200):
            cfg = sample(domain, rng)
            for event in events:
                self.assertEqual(detect(event, cfg), detect_oracle(event, cfg))

    def test_color_switching(self):
        domain = build_domain('half', Fraction(5, 2))
        rb = parse_event('B:2:1:5/2:rb')
        br = parse_event('B:2:1:5/2:br')
        self.assertEqual(exact_probability(domain, lambda cfg: detect(rb, cfg)),
                         exact_probability(domain, lambda cfg: detect(br, cfg)))

    def test_one_arm_is_monotone(self):
        domain = build_domain('half', Fraction(5, 2))
        event = parse_event('B:1:1:5/2')
        for cfg in enumerate_all(domain):
            if detect(event, cfg):
                for h in domain.hexagons:
                    self.assertTrue(detect(event, cfg.with_colors({h: RED})))

    def test_witness(self):
        domain = build_domain('half', 8)
        event = parse_event('B:1:2:8')
        arms = arm_witness(event, Configuration.uniform(domain, RED))
        self.assertEqual(len(arms), 1)
        self.assertTrue(all(h in event.region for h in arms[0]))
        self.assertIsNone(arm_witness(event, Configuration.uniform(domain, BLUE)))

    def test_oracle_agreement_prescribed(self):
        domain = build_domain('disk', 8)
        rng = RngStream(self.c.seed, 12)
        events = [ArmEventSpec(family, j, 2, 8) for family in ('X', 'Y', 'Z') for j in (2, 3, 4)]
        for _ in range(60):
            cfg = sample(domain, rng)
            for event in events:
                self.assertEqual(detect(event, cfg), detect_oracle(event, cfg), event.spec)

    def test_oracle_agreement_small_domains(self):
        half, disk = build_domain('half', 3), build_domain('disk', 3)
        half_events = [ArmEventSpec(family, j, 1, 3) for family in ('B', 'H') for j in (1, 2)]
        disk_events = [parse_event('P:2:1:3'), parse_event('A:2:1:3')]
        rng = RngStream(self.c.seed, 14)
        for _ in range(200):
            for domain, events in ((half, half_events), (disk, disk_events)):
                cfg = sample(domain, rng)
                for event in events:
                    self.assertEqual(detect(event, cfg), detect_oracle(event, cfg), event.spec)

    @skipUnless(Constants().slow, "set ARMLAB_SLOW=1 for long runs")
    def test_oracle_agreement_half_exact(self):
        domain = build_domain('half', 3)
        for family in ('B', 'H'):
            for j in (1, 2):
                event = ArmEventSpec(family, j, 1, 3)
                self.assertEqual(exact_probability(domain, lambda cfg: detect(event, cfg)),
                                 exact_probability(domain, lambda cfg: detect_oracle(event, cfg)), event.spec)

    def test_nesting(self):
        half = build_domain('half', 16)
        disk = build_domain('disk', 8)
        rng = RngStream(self.c.seed, 13)
        for _ in range(60):
            cfg = sample(half, rng)
            for j in (1, 2, 3):
                self.assertLessEqual(detect(ArmEventSpec('H', j, 2, 16), cfg), detect(ArmEventSpec('B', j, 2, 16), cfg))
            cfg = sample(disk, rng)
            for j in (2, 3, 4):
                x, y, z, a = (detect(ArmEventSpec(family, j, 2, 8), cfg) for family in 'XYZA')
                self.assertLessEqual(y, x, j)
                self.assertLessEqual(x, a, j)
                self.assertLessEqual(z, a, j)
