"""
Monte Carlo estimation and the fits and diagnostics built on it.
"""
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from typing import Callable, Dict, List, Mapping, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import stats

from .arms import ArmEventSpec, detect, exponent, parse_event
from .exceptions import *
from .explore import HALF, PLANE_EVEN, PLANE_ODD, exploration_path, hitting_sequence_check
from .lattice import DiscDomain, build_domain, parse_domain
from .percolation import Configuration, RngStream, exact_probability, sample

BATCH_SIZE = 20000
Z_BAR = 4.0
_MASK64 = (1 << 64) - 1

Event = Union[ArmEventSpec, Callable[[Configuration], bool]]


def thread_count(threads: Optional[int] = None) -> int:
    """
    Worker processes to use: the request (or the CPU count), capped by ``ARMLAB_THREADS``
    """
    width = int(threads) if threads else (os.cpu_count() or 1)
    cap = os.environ.get('ARMLAB_THREADS')
    if cap:
        try:
            width = min(width, int(cap))
        except ValueError:
            raise InvalidSpecException("ARMLAB_THREADS must be an integer, got '%s'" % cap)
    return max(1, width)


def parallel_map(fn: Callable, tasks: Sequence[tuple], threads: Optional[int] = None) -> list:
    """
    ``[fn(*task) for task in tasks]``, spread over worker processes. Results keep the task order.
    """
    width = thread_count(threads)
    if width <= 1 or len(tasks) <= 1:
        return [fn(*task) for task in tasks]
    with ProcessPoolExecutor(max_workers=min(width, len(tasks))) as pool:
        return list(pool.map(fn, *zip(*tasks)))


def substream(rng: RngStream, label: int, index: int) -> RngStream:
    """
    Stream number ``index`` of the family ``label`` derived from a parent stream
    """
    return rng.spawn((((rng.stream_id * 131 + label) << 32) + index) & _MASK64)


def _batches(total: int, size: int) -> List[int]:
    full, rest = divmod(total, size)
    return [size] * full + ([rest] if rest else [])


def default_domain(spec: ArmEventSpec) -> DiscDomain:
    """
    Smallest domain an event can be detected on
    """
    if spec.family in ('Y', 'Z'):
        return build_domain('disk', spec.R)
    return spec.region


class Estimate(NamedTuple):
    p_hat: float
    n_samples: int
    hits: int
    seed: int
    stream_id: int

    @property
    def stderr(self) -> float:
        return math.sqrt(self.p_hat * (1.0 - self.p_hat) / self.n_samples)


def _count_batch(event, domain_spec: str, count: int, seed: int, stream_id: int) -> int:
    domain = parse_domain(domain_spec)
    if isinstance(event, str):
        event = parse_event(event)
    predicate = (lambda cfg: detect(event, cfg)) if isinstance(event, ArmEventSpec) else event
    rng = RngStream(seed, stream_id)
    return sum(1 for _ in range(count) if predicate(sample(domain, rng)))


def mc_estimate(event: Event, N: int, rng: RngStream, domain: Optional[DiscDomain] = None,
                threads: Optional[int] = None, batch_size: int = BATCH_SIZE) -> Estimate:
    """
    Frequency of an event over N independent configurations.

    Samples are drawn in batches of ``batch_size``, batch ``b`` from its own stream, so the
    result depends on the seed, the stream and N only, never on the number of workers.

    :param event: an :class:`ArmEventSpec` or a picklable predicate on configurations
    :param int N: number of samples
    :param RngStream rng: parent stream
    :param domain: defaults to the event's smallest domain, required for predicates
    :param threads: worker processes
    :rtype: Estimate
    :raise: InvalidSpecException
    """
    if N < 1:
        raise InvalidSpecException("N must be at least 1, got %s" % N)
    if domain is None:
        if not isinstance(event, ArmEventSpec):
            raise InvalidSpecException("a domain is required to estimate a predicate")
        domain = default_domain(event)
    arg = event.spec if isinstance(event, ArmEventSpec) else event
    tasks = [(arg, domain.spec, size, rng.seed, substream(rng, 0, b).stream_id)
             for b, size in enumerate(_batches(N, batch_size))]
    hits = sum(parallel_map(_count_batch, tasks, threads))
    log = logging.getLogger(__name__)
    log.debug("%s on %s: %d/%d", arg, domain.spec, hits, N)
    return Estimate(hits / N, N, hits, rng.seed, rng.stream_id)


EQUIVALENCE_FAMILIES = {HALF: ('H', 'halfexp'), PLANE_EVEN: ('Y', 'planeexp'), PLANE_ODD: ('Y', 'planeexp')}


class EquivalenceCount(NamedTuple):
    agreements: int
    total: int
    event_hits: int
    seed: int

    @property
    def disagreements(self) -> int:
        return self.total - self.agreements

    @property
    def passed(self) -> bool:
        return self.agreements == self.total


def _equivalence_batch(variant: str, event_text: str, domain_spec: str, count: int, seed: int,
                       stream_id: int) -> Tuple[int, int]:
    domain = parse_domain(domain_spec)
    event = parse_event(event_text)
    rng = RngStream(seed, stream_id)
    agree = hits = 0
    for _ in range(count):
        cfg = sample(domain, rng)
        direct = detect(event, cfg)
        hits += direct
        agree += direct == hitting_sequence_check(exploration_path(cfg), domain, event.j, variant, event.r)
    return agree, hits


def equivalence_check(variant: str, j: int, R, N: int, rng: RngStream, r=None,
                      threads: Optional[int] = None, batch_size: int = 2000) -> EquivalenceCount:
    """
    Compare the exploration-path characterization of an arm event with direct detection on
    N random configurations of the exploration domain of radius R.

    :param str variant: ``half`` (H events), ``plane-even`` or ``plane-odd`` (Y events)
    :param r: inner radius, defaults to R/4
    :rtype: EquivalenceCount
    :raise: InvalidSpecException
    """
    if variant not in EQUIVALENCE_FAMILIES:
        raise InvalidSpecException("Unknown equivalence variant '%s'" % variant)
    family, kind = EQUIVALENCE_FAMILIES[variant]
    R = Fraction(R)
    r = Fraction(r) if r is not None else R / 4
    event = ArmEventSpec(family, j, r, R)
    domain = build_domain(kind, R)
    tasks = [(variant, event.spec, domain.spec, size, rng.seed, substream(rng, 3, b).stream_id)
             for b, size in enumerate(_batches(N, batch_size))]
    results = parallel_map(_equivalence_batch, tasks, threads)
    agree = sum(a for a, _ in results)
    if agree != N:
        logging.getLogger(__name__).warning("%s on %s: %d of %d configurations disagree", event, domain.spec,
                                            N - agree, N)
    return EquivalenceCount(agree, N, sum(h for _, h in results), rng.seed)


class SlopeFit(NamedTuple):
    slope: float
    stderr: float
    intercept: float
    n_points: int


def slope_fit(points: Sequence[Tuple[float, float, float]]) -> SlopeFit:
    """
    Weighted least squares of ``log p`` against ``log n``; each point is weighted by
    ``(p / stderr)^2``. Points with zero stderr share the smallest positive weight,
    and all points weigh the same when every stderr is zero.

    :param points: ``(n, p_hat, stderr)`` triples
    :rtype: SlopeFit
    :raise: FitException with fewer than three positive points
    """
    log = logging.getLogger(__name__)
    kept = []
    for n, p, s in points:
        if p <= 0:
            log.warning("dropping nonpositive estimate p=%s at n=%s", p, n)
            continue
        kept.append((float(n), float(p), float(s)))
    if len(kept) < 3:
        raise FitException("slope fit needs at least three positive points, got %d" % len(kept),
                           residuals=[p for _, p, _ in kept])
    x = np.log([n for n, _, _ in kept])
    y = np.log([p for _, p, _ in kept])
    sigma = np.array([s / p for _, p, s in kept])
    if np.any(sigma > 0):
        floor = sigma[sigma > 0].min()
        sigma = np.where(sigma > 0, sigma, floor)
        w = 1.0 / sigma ** 2
    else:
        w = np.ones_like(x)
    X = np.column_stack([np.ones_like(x), x])
    normal = X.T @ (w[:, None] * X)
    beta = np.linalg.solve(normal, X.T @ (w * y))
    residuals = y - X @ beta
    dof = len(kept) - 2
    s2 = float(np.sum(w * residuals ** 2)) / dof if dof > 0 else 0.0
    cov = s2 * np.linalg.inv(normal)
    return SlopeFit(float(beta[1]), math.sqrt(max(float(cov[1, 1]), 0.0)), float(beta[0]), len(kept))


class SequenceFit(NamedTuple):
    C: float
    alpha: float
    c_rate: float
    residuals: Tuple[float, ...]
    b: Tuple[float, ...]
    C_m: float
    B_m: float
    m: float
    n0: float

    def dumps(self) -> str:
        """
        key=value report
        """
        lines = ["C=%r" % self.C, "alpha=%r" % self.alpha, "c_rate=%r" % self.c_rate,
                 "C_m=%r" % self.C_m, "B_m=%r" % self.B_m, "m=%r" % self.m, "n0=%r" % self.n0,
                 "b=%s" % ",".join(repr(v) for v in self.b),
                 "residuals=%s" % ",".join(repr(v) for v in self.residuals)]
        return "\n".join(lines) + "\n"


def _accelerate(x0: float, x1: float, x2: float) -> float:
    """
    Limit of a sequence with a geometric tail from its last three terms
    """
    d = x2 - 2.0 * x1 + x0
    if abs(d) <= 1e-12 * max(abs(x2), 1e-300):
        return x2
    return x2 - (x2 - x1) ** 2 / d


def fit_sequence(ns: Sequence[float], values: Sequence[float]) -> SequenceFit:
    """
    Fit ``a_n = C n^alpha (1 + O(n^-c))`` on a geometric grid ``n = n0 m^k``.

    ``b_k = a_{k+1} / a_k`` converges to ``C(m) = m^alpha``; its limit and the limit of
    ``a_k / C(m)^k`` are taken by geometric-tail acceleration of their last three terms.

    :param ns: the grid, at least four points with a constant ratio m in (1.1, 10)
    :param values: positive values on the grid
    :rtype: SequenceFit
    :raise: InvalidSpecException on a bad grid, FitException when b_k does not settle
    """
    ns = [float(n) for n in ns]
    a = [float(v) for v in values]
    if len(ns) != len(a):
        raise InvalidSpecException("grid has %d points but %d values" % (len(ns), len(a)))
    if len(a) < 4:
        raise InvalidSpecException("sequence fit needs at least four points, got %d" % len(a))
    if any(v <= 0 for v in a) or any(n <= 0 for n in ns):
        raise InvalidSpecException("sequence fit needs positive grid points and values")
    m = ns[1] / ns[0]
    if any(abs(ns[k + 1] / ns[k] - m) > 1e-9 * m for k in range(len(ns) - 1)):
        raise InvalidSpecException("grid is not geometric")
    if not (1.1 < m < 10):
        raise InvalidSpecException("grid ratio m=%s is outside (1.1, 10)" % m)

    b = [a[k + 1] / a[k] for k in range(len(a) - 1)]
    deltas = [b[k + 1] - b[k] for k in range(len(b) - 1)]
    tol = 1e-12 * max(abs(v) for v in b)
    significant = [d for d in deltas if abs(d) > tol]
    flips = sum(1 for d, e in zip(significant, significant[1:]) if (d > 0) != (e > 0))
    if flips and abs(significant[-1]) >= abs(significant[0]):
        raise FitException("b_k(m) oscillates without settling (%d sign changes)" % flips, residuals=b)

    C_m = _accelerate(*b[-3:])
    if C_m <= 0:
        raise FitException("extrapolated ratio C(m)=%r is not positive" % C_m, residuals=b)
    alpha = math.log(C_m) / math.log(m)
    B_seq = [a[k] / C_m ** k for k in range(len(a))]
    B_m = _accelerate(*B_seq[-3:])
    C = B_m / ns[0] ** alpha

    tail = [(k * math.log(m), math.log(abs(d))) for k, d in enumerate(deltas) if abs(d) > tol][-4:]
    if len(tail) >= 2:
        c_rate = -float(stats.linregress([x for x, _ in tail], [y for _, y in tail]).slope)
    else:
        c_rate = math.inf
    residuals = tuple(a[k] / (C * ns[k] ** alpha) - 1.0 for k in range(len(a)))
    return SequenceFit(C, alpha, c_rate, residuals, tuple(b), C_m, B_m, m, ns[0])


class RatioReport(NamedTuple):
    grid: Tuple[int, ...]
    ratio_left: Tuple[float, ...]
    ratio_right: Tuple[float, ...]
    z: Tuple[float, ...]

    @property
    def passed(self) -> bool:
        return all(abs(z) <= Z_BAR for z in self.z)


def _ratio(num: Tuple[float, float], den: Tuple[float, float]) -> Tuple[float, float]:
    """
    ``num / den`` and its delta-method standard error
    """
    (p, sp), (q, sq) = num, den
    if q == 0 or p == 0:
        raise FitException("zero estimate in a ratio (%r / %r)" % (p, q))
    value = p / q
    return value, value * math.sqrt((sp / p) ** 2 + (sq / q) ** 2)


def ratio_report(grid: Sequence[int], m: int, values: Mapping[int, Tuple[float, float]]) -> RatioReport:
    """
    Compare ``p(mn)/p(n)`` with ``p(m^2 n)/p(mn)`` along a grid

    :param values: ``n -> (p, stderr)`` covering n, mn and m^2 n for every grid point
    """
    left, right, zs = [], [], []
    for n in grid:
        lv, ls = _ratio(values[m * n], values[n])
        rv, rs = _ratio(values[m * m * n], values[m * n])
        sigma = max(math.sqrt(ls ** 2 + rs ** 2), 1e-12 * max(abs(lv), abs(rv)))
        left.append(lv)
        right.append(rv)
        zs.append((lv - rv) / sigma)
    return RatioReport(tuple(grid), tuple(left), tuple(right), tuple(zs))


def _estimate_radii(family: str, j: int, pairs: Sequence[Tuple[object, object]], N: int, rng: RngStream,
                    threads: Optional[int]) -> Dict[Tuple[object, object], Estimate]:
    out = {}
    for index, (r, R) in enumerate(pairs):
        out[(r, R)] = mc_estimate(ArmEventSpec(family, j, r, R), N, substream(rng, 1, index), threads=threads)
    return out


def ratio_stability(family: str, j: int, r, m: int, n_grid: Sequence[int], N: int, rng: RngStream,
                    threads: Optional[int] = None) -> RatioReport:
    """
    Estimate ``p(r, n)`` at n, mn and m^2 n for every grid point and compare the two ratios

    :rtype: RatioReport
    """
    radii = sorted(set(k * n for n in n_grid for k in (1, m, m * m)))
    estimates = _estimate_radii(family, j, [(r, n) for n in radii], N, rng, threads)
    values = {n: (estimates[(r, n)].p_hat, estimates[(r, n)].stderr) for n in radii}
    return ratio_report(n_grid, m, values)


class RatioCI(NamedTuple):
    ratio: float
    stderr: float
    low: float
    high: float


def ratio_ci(num: Tuple[float, float], dens: Sequence[Tuple[float, float]]) -> RatioCI:
    """
    ``num / prod(dens)`` with a 95% delta-method interval

    :raise: FitException on zero estimates
    """
    p, sp = num
    if p == 0 or any(q == 0 for q, _ in dens):
        raise FitException("zero estimate in a ratio")
    value = p / math.prod(q for q, _ in dens)
    rel = math.sqrt((sp / p) ** 2 + sum((sq / q) ** 2 for q, sq in dens))
    stderr = value * rel
    return RatioCI(value, stderr, value - 1.96 * stderr, value + 1.96 * stderr)


def quasi_mult(family: str, j: int, r, u, R, N: int, rng: RngStream, threads: Optional[int] = None) -> RatioCI:
    """
    ``p(r, R) / (p(r, u) p(u, R))``

    :raise: InvalidSpecException unless r < u < R, FitException on zero estimates
    """
    if not (Fraction(r) < Fraction(u) < Fraction(R)):
        raise InvalidSpecException("quasi-multiplicativity needs r < u < R")
    e = _estimate_radii(family, j, [(r, R), (r, u), (u, R)], N, rng, threads)
    def pair(key):
        return (e[key].p_hat, e[key].stderr)
    return ratio_ci(pair((r, R)), [pair((r, u)), pair((u, R))])


def comparability(j: int, r, n, N: int, rng: RngStream, threads: Optional[int] = None) -> RatioCI:
    """
    ``P[H_j(r, n)] / P[B_j(r, n)]``
    """
    h = mc_estimate(ArmEventSpec('H', j, r, n), N, substream(rng, 2, 0), threads=threads)
    b = mc_estimate(ArmEventSpec('B', j, r, n), N, substream(rng, 2, 1), threads=threads)
    return ratio_ci((h.p_hat, h.stderr), [(b.p_hat, b.stderr)])


class MonotonicityReport(NamedTuple):
    ts: Tuple[int, ...]
    ratios: Tuple[float, ...]
    stderrs: Tuple[float, ...]
    slack: float

    @property
    def min_ratio(self) -> float:
        return min(self.ratios)

    @property
    def passed(self) -> bool:
        return all(q >= 1.0 - Z_BAR * s - self.slack for q, s in zip(self.ratios, self.stderrs))


def monotonicity_report(ts: Sequence[int], values: Sequence[Tuple[float, float]], epsilon: float,
                        decay: float) -> MonotonicityReport:
    """
    Ratios ``p(t) / p(t_0)`` over ``t`` in ``[n, (1+epsilon) n]``. A power law of exponent
    ``decay`` may lose up to ``1 - (1+epsilon)^-decay`` over the window, that is the slack.

    :param values: ``(p, stderr)`` per t, the first one at t = n
    """
    if not (0 < epsilon < 1):
        raise InvalidSpecException("epsilon must be in (0, 1), got %s" % epsilon)
    base = values[0]
    ratios, errors = [1.0], [0.0]
    for p in values[1:]:
        q, s = _ratio(p, base)
        ratios.append(q)
        errors.append(s)
    slack = 1.0 - (1.0 + epsilon) ** (-decay)
    return MonotonicityReport(tuple(ts), tuple(ratios), tuple(errors), slack)


def near_monotonicity_test(family: str, j: int, r, n: int, epsilon: float, N: int, rng: RngStream,
                           steps: int = 4, threads: Optional[int] = None) -> MonotonicityReport:
    """
    Estimate ``p(r, t)`` on an integer grid of ``[n, (1+epsilon) n]``
    """
    if not (0 < epsilon < 1):
        raise InvalidSpecException("epsilon must be in (0, 1), got %s" % epsilon)
    ts = sorted(set(int(round(n * (1 + epsilon * k / steps))) for k in range(steps + 1)))
    estimates = _estimate_radii(family, j, [(r, t) for t in ts], N, rng, threads)
    values = [(estimates[(r, t)].p_hat, estimates[(r, t)].stderr) for t in ts]
    return monotonicity_report(ts, values, epsilon, float(exponent(family, j)))


def _as_predicate(event: Event) -> Callable[[Configuration], bool]:
    if isinstance(event, ArmEventSpec):
        return lambda cfg: detect(event, cfg)
    return event


class CorrelationCheck(NamedTuple):
    joint: Fraction
    first: Fraction
    second: Fraction

    @property
    def positive(self) -> bool:
        return self.joint >= self.first * self.second

    @property
    def negative(self) -> bool:
        return self.joint <= self.first * self.second


def fkg_check(domain: DiscDomain, first: Event, second: Event) -> CorrelationCheck:
    """
    Exact ``P[A and B]``, ``P[A]`` and ``P[B]`` on a micro domain
    """
    a, b = _as_predicate(first), _as_predicate(second)
    return CorrelationCheck(exact_probability(domain, lambda cfg: a(cfg) and b(cfg)),
                            exact_probability(domain, a), exact_probability(domain, b))


class CovarianceEstimate(NamedTuple):
    covariance: float
    stderr: float

    @property
    def passed(self) -> bool:
        return self.covariance >= -Z_BAR * self.stderr


def fkg_estimate(domain: DiscDomain, first: Event, second: Event, N: int, rng: RngStream) -> CovarianceEstimate:
    """
    Sample covariance of two indicators and its standard error
    """
    a, b = _as_predicate(first), _as_predicate(second)
    xs, ys = np.zeros(N), np.zeros(N)
    for k in range(N):
        cfg = sample(domain, rng)
        xs[k], ys[k] = a(cfg), b(cfg)
    products = (xs - xs.mean()) * (ys - ys.mean())
    stderr = float(products.std(ddof=1) / math.sqrt(N)) if N > 1 else 0.0
    return CovarianceEstimate(float(products.sum() / max(N - 1, 1)), stderr)


def bk_check(domain: DiscDomain, first: ArmEventSpec, second: ArmEventSpec) -> CorrelationCheck:
    """
    Disjoint occurrence of two single-arm crossings of the same half-plane region,
    ``joint`` is the probability that both occur on disjoint arms.

    :raise: InvalidSpecException for anything but two one-arm events of one region
    """
    if first.j != 1 or second.j != 1 or first.family != second.family or first.family not in ('B', 'H') \
            or (first.r, first.R) != (second.r, second.R):
        raise InvalidSpecException("disjoint occurrence is checked for two one-arm events of the same region")
    c1, c2 = first.colors[0], second.colors[0]
    both = [ArmEventSpec(first.family, 2, first.r, first.R, (c1, c2)),
            ArmEventSpec(first.family, 2, first.r, first.R, (c2, c1))]
    joint = exact_probability(domain, lambda cfg: any(detect(e, cfg) for e in both))
    return CorrelationCheck(joint, exact_probability(domain, _as_predicate(first)),
                            exact_probability(domain, _as_predicate(second)))
