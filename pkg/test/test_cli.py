import io
import os
import tempfile
from unittest import TestCase

from armlab.cli import *
from armlab.exceptions import *
from constants import Constants


class TestConfig(TestCase):
    c = Constants()

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp.cleanup()

    def path(self, name, text=None):
        target = os.path.join(self.tmp.name, name)
        if text is not None:
            with open(target, 'w', encoding='utf-8') as handle:
                handle.write(text)
        return target

    def test_defaults(self):
        config = ExperimentConfig(command='estimate')
        self.assertEqual(config.n, 10000)
        self.assertEqual(config.K, 6)
        self.assertEqual(config.d, '1/2')
        self.assertIsNone(config.event)
        self.assertRaises(InvalidSpecException, ExperimentConfig, colour='red')
        self.assertRaises(InvalidSpecException, ExperimentConfig, command='dance')

    def test_round_trip(self):
        config = ExperimentConfig(command='slope', family='B', j=2, r='2', grid='8,16,32', seed=self.c.seed)
        self.assertEqual(config.grid, (8, 16, 32))
        target = self.path('run.env')
        save_config(config, target)
        loaded = load_config(target)
        self.assertEqual(loaded, config)
        self.assertEqual(loaded.hash, config.hash)
        self.assertNotEqual(loaded.merged({'seed': self.c.seed + 1}).hash, config.hash)

    def test_comments_and_export(self):
        target = self.path('run.env', "# a run\n\nexport command=enumerate\nevent=B:1:1:2\n")
        config = load_config(target)
        self.assertEqual(config.command, 'enumerate')
        self.assertEqual(config.event, 'B:1:1:2')

    def test_missing_command(self):
        target = self.path('run.env', "event=B:1:1:2\n")
        self.assertRaises(ConfigException, load_config, target)

    def test_malformed_line(self):
        target = self.path('run.env', "command=estimate\nnonsense\n")
        with self.assertRaises(ConfigException) as cm:
            load_config(target)
        self.assertEqual(cm.exception.line, 2)

    def test_unknown_key(self):
        target = self.path('run.env', "command=estimate\n  colour=red\n")
        with self.assertRaises(ConfigException) as cm:
            load_config(target)
        self.assertEqual((cm.exception.line, cm.exception.column), (2, 3))

    def test_bad_value(self):
        target = self.path('run.env', "command=estimate\nn=many\n")
        with self.assertRaises(ConfigException) as cm:
            load_config(target)
        self.assertEqual(cm.exception.line, 2)

    def test_flags_override(self):
        target = self.path('run.env', "command=enumerate\nevent=B:1:1:2\nseed=3\n")
        config = resolve(['--config', target, '--event', 'H:1:1:2'])
        self.assertEqual(config.event, 'H:1:1:2')
        self.assertEqual(config.seed, 3)
        self.assertEqual(resolve(['estimate', '--config', target]).command, 'estimate')


class TestRun(TestCase):
    c = Constants()

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp.cleanup()

    def test_enumerate(self):
        out = io.StringIO()
        self.assertEqual(run(['enumerate', '--event', 'B:1:1:2', '--domain', 'half:2'], out), EXIT_OK)
        lines = out.getvalue().splitlines()
        self.assertTrue(lines[0].startswith('# armlab v'))
        self.assertEqual(lines[1], 'event,domain,hexagons,probability,oracle')
        self.assertTrue(lines[2].startswith('B:1:1:2,half:2,8,'))

    def test_estimate_to_file(self):
        target = os.path.join(self.tmp.name, 'estimate.csv')
        status = run(['estimate', '--event', 'B:1:2:8', '-N', '50', '--seed', str(self.c.seed), '--threads', '1',
                      '--output', target])
        self.assertEqual(status, EXIT_OK)
        rows = read_table(target)
        self.assertEqual(len(rows), 1)
        self.assertEqual(rows[0]['event'], 'B:1:2:8')
        self.assertEqual(int(rows[0]['N']), 50)
        self.assertTrue(0.0 <= float(rows[0]['p_hat']) <= 1.0)

    def test_fit(self):
        source = os.path.join(self.tmp.name, 'values.csv')
        with open(source, 'w', encoding='utf-8') as handle:
            handle.write("# synthetic\nn,value\n")
            for k in range(6):
                n = 16 * 2 ** k
                handle.write("%d,%r\n" % (n, 7.0 * n ** 2))
        out = io.StringIO()
        self.assertEqual(run(['fit', '--input', source], out), EXIT_OK)
        report = dict(line.split('=', 1) for line in out.getvalue().splitlines())
        self.assertAlmostEqual(float(report['alpha']), 2.0, places=9)
        self.assertAlmostEqual(float(report['C']), 7.0, places=6)
        self.assertEqual(run(['fit', '--input', source, '--m', '3'], io.StringIO()), EXIT_USAGE)

    def test_fit_too_short(self):
        source = os.path.join(self.tmp.name, 'values.csv')
        with open(source, 'w', encoding='utf-8') as handle:
            handle.write("n,value\n16,1.0\n32,0.5\n64,0.25\n")
        self.assertEqual(run(['fit', '--input', source], io.StringIO()), EXIT_USAGE)

    def test_usage_errors(self):
        self.assertEqual(run(['--event', 'B:1:1:2'], io.StringIO()), EXIT_USAGE)
        self.assertEqual(run(['dance'], io.StringIO()), EXIT_USAGE)
        self.assertEqual(run(['estimate'], io.StringIO()), EXIT_USAGE)
        self.assertEqual(run(['estimate', '--event', 'Q:1:1:2'], io.StringIO()), EXIT_USAGE)
        self.assertEqual(run(['--config', os.path.join(self.tmp.name, 'missing.env')], io.StringIO()), EXIT_USAGE)


class TestPackage(TestCase):

    def test_public_names(self):
        import armlab
        from armlab import exceptions
        for name in ('polar_angle', 'circle_marks', 'corner_vertices', 'label_between_marks',
                     'good_set_joint_law', 'detect', 'detect_oracle', 'layered_coupling_experiment'):
            self.assertTrue(callable(getattr(armlab, name)), name)
        self.assertIs(armlab.InvalidSpecException, exceptions.InvalidSpecException)
        self.assertTrue(armlab.__version__)

    def test_no_private_names_across_modules(self):
        import armlab
        for name in ('_angle', '_half_namer', '_couple_replicas', '_paired_tail'):
            self.assertFalse(hasattr(armlab, name), name)
