"""
Command line runner: ``armlab <command> [--config FILE] [--flag value ...]``.

Every run is described by an :class:`ExperimentConfig`; a config file holds flat
``key=value`` lines and flags given on the command line override it. Results go to CSV
with a ``# armlab v<version> config=<hash>`` header, summaries to standard error.
Exit status is 0 on success, 2 when a statistical check fails and 1 on usage errors.
"""
import argparse
import csv
import io
import logging
import sys
from fractions import Fraction
from typing import Callable, Dict, List, Sequence, Tuple

from dotenv import dotenv_values

from .__version__ import __version__
from .arms import ArmEventSpec, detect, detect_oracle, exponent, parse_event
from .coupling import CSV_COLUMNS, DEFAULT_K, SETTINGS, layered_coupling_experiment
from .estimate import (EQUIVALENCE_FAMILIES, default_domain, equivalence_check, fit_sequence, mc_estimate,
                       quasi_mult, ratio_stability, slope_fit, substream)
from .exceptions import *
from .lattice import parse_domain
from .percolation import RngStream, exact_probability
from .utils import config_hash, format_radius, parse_radius

COMMANDS = ('estimate', 'slope', 'ratio', 'quasimult', 'couple', 'enumerate', 'fit', 'equivalence')

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAILED = 2


def _int_list(text) -> Tuple[int, ...]:
    if isinstance(text, (tuple, list)):
        return tuple(int(x) for x in text)
    try:
        return tuple(int(x) for x in str(text).split(',') if x.strip())
    except ValueError:
        raise InvalidSpecException("'%s' is not a comma separated list of integers" % text)


def _radius_text(text) -> str:
    return format_radius(parse_radius(text))


def _fraction_text(text) -> str:
    try:
        return str(Fraction(str(text).strip()))
    except (ValueError, ZeroDivisionError):
        raise InvalidSpecException("'%s' is not a number" % text)


def _command(text: str) -> str:
    if text not in COMMANDS:
        raise InvalidSpecException("Unknown command '%s'" % text)
    return text


# key -> (parser, default)
FIELDS = {
    'command': (_command, None),
    'event': (str, None),
    'domain': (str, None),
    'n': (int, 10000),
    'seed': (int, 0),
    'stream': (int, 0),
    'grid': (_int_list, None),
    'm': (_fraction_text, None),
    'epsilon': (float, 0.25),
    'K': (int, DEFAULT_K),
    'output': (str, None),
    'threads': (int, None),
    'j': (int, None),
    'r': (_radius_text, None),
    'R': (_radius_text, None),
    'u': (_radius_text, None),
    'variant': (str, 'half'),
    'setting': (str, 'half'),
    'family': (str, None),
    'd': (_fraction_text, '1/2'),
    'input': (str, None),
    'tolerance': (float, None),
    'min_overlap': (float, 0.05),
}  # type: Dict[str, Tuple[Callable, object]]


class ExperimentConfig(object):
    """
    Everything a run depends on. Unset keys take their defaults.

    :raise: InvalidSpecException for unknown keys or unparsable values
    """
    def __init__(self, **values):
        unknown = [k for k in values if k not in FIELDS]
        if unknown:
            raise InvalidSpecException("Unknown config key(s): %s" % ", ".join(unknown))
        self.__values = {}
        for key, (parse, default) in FIELDS.items():
            value = values.get(key)
            self.__values[key] = parse(value) if value is not None else default

    def __getattr__(self, name):
        values = self.__dict__.get('_ExperimentConfig__values')
        if values is not None and name in values:
            return values[name]
        raise AttributeError(name)

    def get(self, key: str):
        return self.__values[key]

    def merged(self, overrides: Dict[str, object]) -> 'ExperimentConfig':
        """
        Copy with the non-None overrides applied
        """
        values = {k: v for k, v in self.__values.items() if v is not None}
        values.update({k: v for k, v in overrides.items() if v is not None})
        return ExperimentConfig(**values)

    def require(self, *keys: str):
        missing = [k for k in keys if self.__values[k] is None]
        if missing:
            raise ConfigException("'%s' needs the key(s): %s" % (self.command, ", ".join(missing)))

    def items(self) -> List[Tuple[str, str]]:
        out = []
        for key in FIELDS:
            value = self.__values[key]
            if value is None:
                continue
            if isinstance(value, tuple):
                value = ",".join(str(v) for v in value)
            out.append((key, str(value)))
        return out

    def dumps(self) -> str:
        return "".join("%s=%s\n" % kv for kv in self.items())

    @property
    def hash(self) -> str:
        return config_hash(self.dumps())

    def __eq__(self, other):
        return isinstance(other, ExperimentConfig) and self.items() == other.items()

    def __repr__(self):
        return "ExperimentConfig(%s)" % ", ".join("%s=%s" % kv for kv in self.items())


def _scan(text: str) -> Dict[str, int]:
    """
    Check the shape of every line and return the line number of each key
    """
    lines = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith('#'):
            continue
        if line.startswith('export '):
            line = line[len('export '):].lstrip()
        offset = raw.index(line[0]) + 1
        if '=' not in line:
            raise ConfigException("expected KEY=VALUE", line=number, column=len(raw) + 1)
        key = line.split('=', 1)[0].strip()
        if not key:
            raise ConfigException("empty key", line=number, column=offset)
        if key not in FIELDS:
            raise ConfigException("unknown key '%s'" % key, line=number, column=offset)
        lines[key] = number
    return lines


def load_config(path: str) -> ExperimentConfig:
    """
    Read a flat ``key=value`` config file

    :rtype: ExperimentConfig
    :raise: ConfigException naming the line and column of a malformed entry, or a missing ``command``
    """
    try:
        with open(path, 'r', encoding='utf-8') as handle:
            text = handle.read()
    except OSError as e:
        raise ConfigException("cannot read config %s: %s" % (path, e))
    lines = _scan(text)
    values = dotenv_values(stream=io.StringIO(text))
    if not values.get('command'):
        raise ConfigException("missing required key 'command'", line=lines.get('command'))
    for key, value in values.items():
        parse = FIELDS[key][0]
        if value is None:
            continue
        try:
            parse(value)
        except (InvalidSpecException, ValueError) as e:
            raise ConfigException("bad value for '%s': %s" % (key, e), line=lines.get(key), column=1)
    return ExperimentConfig(**{k: v for k, v in values.items() if v is not None})


def save_config(config: ExperimentConfig, path: str):
    with open(path, 'w', encoding='utf-8') as handle:
        handle.write(config.dumps())


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigException(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog='armlab', description="Arm events of critical site percolation on the triangular lattice")
    parser.add_argument('command', nargs='?', choices=COMMANDS, help="experiment to run")
    parser.add_argument('--config', help="flat key=value file, flags override it")
    parser.add_argument('--event', help="event spec such as H:1:2:16")
    parser.add_argument('--domain', help="domain spec such as half:16")
    parser.add_argument('--n', '-N', dest='n', type=int, help="samples or replicas")
    parser.add_argument('--seed', type=int)
    parser.add_argument('--stream', type=int, help="parent stream id")
    parser.add_argument('--grid', help="comma separated radii")
    parser.add_argument('--m')
    parser.add_argument('--epsilon', type=float)
    parser.add_argument('--K', type=int, help="face count above which a layer is skipped")
    parser.add_argument('--output', '-o', help="CSV file, standard output when omitted")
    parser.add_argument('--threads', type=int, help="worker processes, capped by ARMLAB_THREADS")
    parser.add_argument('--j', type=int, help="number of arms")
    parser.add_argument('--r')
    parser.add_argument('--R')
    parser.add_argument('--u')
    parser.add_argument('--variant', choices=sorted(EQUIVALENCE_FAMILIES))
    parser.add_argument('--setting', choices=SETTINGS)
    parser.add_argument('--family')
    parser.add_argument('--d')
    parser.add_argument('--input')
    parser.add_argument('--tolerance', type=float)
    parser.add_argument('--min-overlap', dest='min_overlap', type=float)
    parser.add_argument('--verbose', '-v', action='count', default=0)
    return parser


def _write_csv(config: ExperimentConfig, header: Sequence[str], rows: Sequence[Sequence], out=None):
    buffer = io.StringIO()
    buffer.write("# armlab v%s config=%s\n" % (__version__, config.hash))
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    text = buffer.getvalue()
    if config.output:
        with open(config.output, 'w', encoding='utf-8', newline='') as handle:
            handle.write(text)
    else:
        (out or sys.stdout).write(text)


def read_table(path: str) -> List[Dict[str, str]]:
    """
    Rows of a CSV file written by this tool, comment lines skipped
    """
    with open(path, 'r', encoding='utf-8') as handle:
        lines = [line for line in handle if line.strip() and not line.startswith('#')]
    return list(csv.DictReader(lines))


def _rng(config: ExperimentConfig) -> RngStream:
    return RngStream(config.seed, config.stream)


def _estimate(config: ExperimentConfig, out) -> int:
    config.require('event')
    event = parse_event(config.event)
    domain = parse_domain(config.domain) if config.domain else default_domain(event)
    est = mc_estimate(event, config.n, _rng(config), domain, threads=config.threads)
    _write_csv(config, ('event', 'j', 'r', 'R', 'N', 'p_hat', 'stderr', 'seed'),
               [(event.spec, event.j, format_radius(event.r), format_radius(event.R), est.n_samples, est.p_hat,
                 est.stderr, est.seed)], out)
    print("%s on %s: p_hat=%.6g +- %.2g" % (event, domain.spec, est.p_hat, est.stderr), file=sys.stderr)
    return EXIT_OK


def _slope(config: ExperimentConfig, out) -> int:
    config.require('family', 'j', 'r', 'grid')
    rng = _rng(config)
    rows, points = [], []
    for index, n in enumerate(config.grid):
        event = ArmEventSpec(config.family, config.j, config.r, n)
        est = mc_estimate(event, config.n, substream(rng, 1, index), threads=config.threads)
        rows.append((event.spec, event.j, format_radius(event.r), format_radius(event.R), est.n_samples, est.p_hat,
                     est.stderr, est.seed))
        points.append((n, est.p_hat, est.stderr))
    _write_csv(config, ('event', 'j', 'r', 'R', 'N', 'p_hat', 'stderr', 'seed'), rows, out)
    fit = slope_fit(points)
    expected = -float(exponent(config.family, config.j))
    print("slope=%r stderr=%r expected=%r" % (fit.slope, fit.stderr, expected), file=sys.stderr)
    if config.tolerance is not None and abs(fit.slope - expected) > config.tolerance:
        return EXIT_FAILED
    return EXIT_OK


def _ratio(config: ExperimentConfig, out) -> int:
    config.require('family', 'j', 'r', 'grid')
    m = Fraction(config.m or 2)
    if m.denominator != 1:
        raise InvalidSpecException("ratio stability needs an integer m")
    report = ratio_stability(config.family, config.j, config.r, int(m), config.grid, config.n, _rng(config),
                             threads=config.threads)
    _write_csv(config, ('n', 'ratio_left', 'ratio_right', 'z'),
               list(zip(report.grid, report.ratio_left, report.ratio_right, report.z)), out)
    print("ratio stability %s (max |z| = %.3g)" % ('passed' if report.passed else 'FAILED',
                                                   max(abs(z) for z in report.z)), file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_FAILED


def _quasimult(config: ExperimentConfig, out) -> int:
    config.require('family', 'j', 'r', 'u', 'R')
    ci = quasi_mult(config.family, config.j, config.r, config.u, config.R, config.n, _rng(config),
                    threads=config.threads)
    _write_csv(config, ('family', 'j', 'r', 'u', 'R', 'N', 'ratio', 'stderr', 'low', 'high'),
               [(config.family, config.j, config.r, config.u, config.R, config.n, ci.ratio, ci.stderr, ci.low,
                 ci.high)], out)
    print("ratio=%.4g [%.4g, %.4g]" % (ci.ratio, ci.low, ci.high), file=sys.stderr)
    return EXIT_OK


def _couple(config: ExperimentConfig, out) -> int:
    config.require('j', 'r', 'R')
    report = layered_coupling_experiment(config.j, config.r, config.R, Fraction(config.m or 1), config.setting,
                                         config.n, _rng(config), K=config.K, d=Fraction(config.d),
                                         threads=config.threads)
    _write_csv(config, CSV_COLUMNS, report.csv_rows(), out)
    low = min(row.overlap_estimate for row in report.rows)
    print("%s tier, %d layers: failure=%.4g bound=%.4g min overlap=%.4g" % (
        report.tier, len(report.rows), report.failure_estimate, report.failure_bound, low), file=sys.stderr)
    return EXIT_OK if low >= config.min_overlap else EXIT_FAILED


def _enumerate(config: ExperimentConfig, out) -> int:
    config.require('event')
    event = parse_event(config.event)
    domain = parse_domain(config.domain) if config.domain else default_domain(event)
    fast = exact_probability(domain, lambda cfg: detect(event, cfg))
    slow = exact_probability(domain, lambda cfg: detect_oracle(event, cfg))
    _write_csv(config, ('event', 'domain', 'hexagons', 'probability', 'oracle'),
               [(event.spec, domain.spec, domain.n, str(fast), str(slow))], out)
    print("%s on %s: %s (oracle %s)" % (event, domain.spec, fast, slow), file=sys.stderr)
    return EXIT_OK if fast == slow else EXIT_FAILED


def _fit(config: ExperimentConfig, out) -> int:
    config.require('input')
    rows = read_table(config.input)
    if not rows:
        raise InvalidSpecException("%s has no data rows" % config.input)
    xkey = next((k for k in ('n', 'R') if k in rows[0]), None)
    ykey = next((k for k in ('value', 'p_hat', 'a') if k in rows[0]), None)
    if xkey is None or ykey is None:
        raise InvalidSpecException("%s needs an n (or R) column and a value (or p_hat) column" % config.input)
    ns = [float(Fraction(row[xkey])) for row in rows]
    values = [float(row[ykey]) for row in rows]
    try:
        fit = fit_sequence(ns, values)
    except FitException as e:
        logging.getLogger(__name__).error("sequence fit failed: %s", e)
        print("residuals=%s" % ",".join(repr(v) for v in e.residuals), file=sys.stderr)
        return EXIT_FAILED
    if config.m is not None and abs(fit.m - float(Fraction(config.m))) > 1e-9 * fit.m:
        raise InvalidSpecException("grid ratio %r does not match m=%s" % (fit.m, config.m))
    text = fit.dumps()
    if config.output:
        with open(config.output, 'w', encoding='utf-8') as handle:
            handle.write("# armlab v%s config=%s\n" % (__version__, config.hash))
            handle.write(text)
    else:
        (out or sys.stdout).write(text)
    return EXIT_OK


def _equivalence(config: ExperimentConfig, out) -> int:
    config.require('j', 'R')
    count = equivalence_check(config.variant, config.j, Fraction(config.R), config.n, _rng(config),
                              r=Fraction(config.r) if config.r else None, threads=config.threads)
    r = config.r or format_radius(Fraction(config.R) / 4)
    _write_csv(config, ('variant', 'j', 'r', 'R', 'N', 'agreements', 'event_hits', 'seed'),
               [(config.variant, config.j, r, config.R, count.total, count.agreements, count.event_hits,
                 count.seed)], out)
    print("agreement %d/%d" % (count.agreements, count.total), file=sys.stderr)
    return EXIT_OK if count.passed else EXIT_FAILED


HANDLERS = {
    'estimate': _estimate,
    'slope': _slope,
    'ratio': _ratio,
    'quasimult': _quasimult,
    'couple': _couple,
    'enumerate': _enumerate,
    'fit': _fit,
    'equivalence': _equivalence,
}


def resolve(argv: Sequence[str]) -> ExperimentConfig:
    """
    The config a command line describes: the ``--config`` file, then the flags

    :raise: ConfigException, InvalidSpecException
    """
    args = build_parser().parse_args(list(argv))
    base = load_config(args.config) if args.config else ExperimentConfig()
    overrides = {k: v for k, v in vars(args).items() if k in FIELDS}
    config = base.merged(overrides)
    if config.command is None:
        raise ConfigException("no command given, expected one of: %s" % ", ".join(COMMANDS))
    return config


def run(argv: Sequence[str], out=None) -> int:
    """
    Run one command line and return its exit status
    """
    log = logging.getLogger(__name__)
    try:
        args = build_parser().parse_args(list(argv))
    except SystemExit as e:
        return int(e.code or 0)
    except ConfigException as e:
        log.error("%s", e)
        return EXIT_USAGE
    if args.verbose:
        logging.basicConfig(level=logging.DEBUG if args.verbose > 1 else logging.INFO)
    try:
        config = resolve(argv)
        log.info("running %s", config)
        return HANDLERS[config.command](config, out)
    except (ConfigException, InvalidSpecException, TooLargeException, OSError) as e:
        log.error("%s", e)
        return EXIT_USAGE
    except BudgetException as e:
        log.error("sampling budget exhausted: %s", e)
        return EXIT_USAGE
    except FitException as e:
        log.error("fit failed: %s", e)
        return EXIT_FAILED


def main():
    sys.exit(run(sys.argv[1:]))


if __name__ == '__main__':
    main()
