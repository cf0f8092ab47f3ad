"""Exact and Monte-Carlo evaluators for the crooked-indifferentiability quantities.

Everything here is a pure function of (handle, table, z). `TableAnalysis`
caches the per-point query logs of one table so the O((l+1) 2^n) scans that
robustness and good-pair questions need are done once.
"""

from __future__ import annotations

import itertools
import math
import random
from collections.abc import Callable, Iterable, Sequence
from dataclasses import asdict, dataclass, field
from fractions import Fraction

from .errors import DomainError, SizeLimitError
from .exor import ExorParams, g_r_eval
from .oracle_core import LazyFunctionTable, Point
from .rng import derive_seed, stream
from .stats import RateEstimate, mean_ci
from .subversion import (EvaluationRecord, ImplementationHandle, SubverterSpec,
                         crooked_fraction, evaluate_subverted, run_first_stage)

CLASSIFY_MAX_BITS = 10
CRITICAL_ALL_M_MAX_BITS = 6
DJ_EXACT_MAX_BITS = 12


# ---------------------------------------------------------------- ladder --
@dataclass(frozen=True)
class EpsilonLadder:
    """eps -> eps1 -> eps2 -> p1, each clamped to [0, 1] with a vacuity flag."""

    eps: float
    q1: int
    n: int
    tau: int

    @property
    def eps1_raw(self) -> float:
        return self.eps + self.q1 * 2.0 ** -self.n

    @property
    def eps2_raw(self) -> float:
        return 3 * self.tau * self.eps1_raw ** 0.25

    @property
    def p1_raw(self) -> float:
        return math.sqrt(self.eps2_raw) + 2.0 ** -self.n

    @property
    def eps1(self) -> float:
        return min(1.0, self.eps1_raw)

    @property
    def eps2(self) -> float:
        return min(1.0, self.eps2_raw)

    @property
    def p1(self) -> float:
        return min(1.0, self.p1_raw)

    @property
    def robust_threshold(self) -> float:
        """Bound on D^j for robust points: eps1^(1/2)."""
        return math.sqrt(self.eps1)

    @property
    def querier_cap(self) -> float:
        """Maximum number of queriers of a good point: eps1^(-1/4)."""
        return math.inf if self.eps1 == 0 else self.eps1 ** -0.25

    @property
    def robust_function_threshold(self) -> float:
        return math.sqrt(self.eps2)

    def vacuous(self) -> dict[str, bool]:
        return {"eps1": self.eps1_raw >= 1, "eps2": self.eps2_raw >= 1,
                "p1": self.p1_raw >= 1}

    def as_dict(self) -> dict:
        return {"eps": self.eps, "eps1": self.eps1, "eps2": self.eps2,
                "p1": self.p1, "vacuous": self.vacuous()}


# ------------------------------------------------------------ report rows --
@dataclass
class CheckRow:
    """One analysis report row (JSON-lines friendly)."""

    quantity: str
    params: dict
    estimate: float
    ci_low: float
    ci_high: float
    paper_bound: float
    vacuous: bool
    passed: bool
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return d


# -------------------------------------------------------- point evaluators --
def _resampled_oracle(base: Callable[[Point], int], a: Point, beta: int):
    def oracle(q: Point) -> int:
        return beta if q == a else base(q)
    return oracle


def d_indicator(handle: ImplementationHandle, table: LazyFunctionTable,
                z, p: Point) -> int:
    """1 iff p is in D(z) or h~(p) != h(p)."""
    zdom = z.domain() if z is not None else handle.advice.domain()
    if p in zdom:
        return 1
    return int(evaluate_subverted(handle, table.peek, p).subverted)


def dj_value(handle: ImplementationHandle, table: LazyFunctionTable, z, p: Point,
             j: int, mode: str | tuple = "exact", *, rng: random.Random | None = None):
    """D^j(p, h): mean of d(p, h_{a_j -> beta}) over beta, a_j the j-th query.

    exact mode returns a Fraction; ("sample", m) returns a RateEstimate.
    """
    zdom = z.domain() if z is not None else handle.advice.domain()
    log = evaluate_subverted(handle, table.peek, p).points
    if not 1 <= j <= handle.tau:
        raise DomainError(f"j={j} outside 1..tau={handle.tau}")
    if j > len(log):
        raise DomainError(f"h~({p}) made only {len(log)} queries")
    a = log[j - 1]
    n = table.n
    size = 1 << table.out_width

    def d_at(beta: int) -> int:
        if p in zdom:
            return 1
        orc = _resampled_oracle(table.peek, a, beta)
        return int(evaluate_subverted(handle, orc, p).value != orc(p))

    if mode == "exact":
        if n > DJ_EXACT_MAX_BITS:
            raise SizeLimitError(f"exact D^j needs n <= {DJ_EXACT_MAX_BITS}")
        return Fraction(sum(d_at(b) for b in range(size)), size)
    kind, m = mode
    if kind != "sample" or m < 1 or rng is None:
        raise DomainError(f"bad dj_value mode {mode!r} (sample mode needs rng)")
    hits = sum(d_at(rng.getrandbits(table.out_width)) for _ in range(m))
    return RateEstimate(hits, m)


@dataclass
class PointClassification:
    point: Point
    d: int
    dj: list[Fraction]
    robust: bool
    queried_by: list[Point]
    good_pair: bool


class TableAnalysis:
    """Cached classification of every domain point of one table."""

    def __init__(self, handle: ImplementationHandle, table: LazyFunctionTable, *,
                 eps: float | None = None, max_bits: int = CLASSIFY_MAX_BITS):
        if table.n > max_bits:
            raise SizeLimitError(f"classification needs n <= {max_bits}, got {table.n}")
        self.handle = handle
        self.table = table
        self.n = table.n
        self.l = table.max_index
        self.zdom = handle.advice.domain()
        self.oracle = table.peek
        if eps is None:
            eps = max(r.estimate for r in crooked_fraction(handle, table, max_bits=max_bits))
        self.ladder = EpsilonLadder(eps, len(self.zdom), table.n, handle.tau)
        self._recs: dict[Point, EvaluationRecord] = {}
        self._dj: dict[Point, list[int]] = {}
        self._robust: dict[Point, bool] = {}
        self._good: dict[Point, bool] = {}
        self._rev: dict[Point, list[Point]] | None = None

    # ---- per point -------------------------------------------------------
    def record(self, p: Point) -> EvaluationRecord:
        rec = self._recs.get(p)
        if rec is None:
            rec = evaluate_subverted(self.handle, self.oracle, p)
            self._recs[p] = rec
        return rec

    def log_points(self, p: Point) -> tuple[Point, ...]:
        return self.record(p).points

    def d(self, p: Point) -> int:
        if p in self.zdom:
            return 1
        return int(self.record(p).subverted)

    def d_resampled(self, p: Point, a: Point, beta: int) -> int:
        """d(p, h_{a -> beta})."""
        if p in self.zdom:
            return 1
        orc = _resampled_oracle(self.oracle, a, beta)
        return int(evaluate_subverted(self.handle, orc, p).value != orc(p))

    def dj_counts(self, p: Point) -> list[int]:
        """2^n * D^j(p, h) for j = 1..tau (positions past the log reuse d)."""
        c = self._dj.get(p)
        if c is None:
            size = 1 << self.table.out_width
            log = self.log_points(p)
            c = []
            for j in range(1, self.handle.tau + 1):
                if j > len(log) or p in self.zdom:
                    c.append(size * self.d(p))
                    continue
                a = log[j - 1]
                c.append(sum(self.d_resampled(p, a, b) for b in range(size)))
            self._dj[p] = c
        return c

    def dj(self, p: Point, j: int) -> Fraction:
        if not 1 <= j <= self.handle.tau:
            raise DomainError(f"j={j} outside 1..tau={self.handle.tau}")
        return Fraction(self.dj_counts(p)[j - 1], 1 << self.table.out_width)

    def robust(self, p: Point) -> bool:
        r = self._robust.get(p)
        if r is None:
            if self.d(p):
                r = False
            else:
                limit = self.ladder.robust_threshold * (1 << self.table.out_width)
                r = all(c <= limit for c in self.dj_counts(p))
            self._robust[p] = r
        return r

    # ---- query relation --------------------------------------------------
    def domain(self) -> Iterable[Point]:
        return self.table.domain_points()

    def reverse_index(self) -> dict[Point, list[Point]]:
        if self._rev is None:
            rev: dict[Point, list[Point]] = {}
            for a in self.domain():
                for q in self.log_points(a):
                    rev.setdefault(q, []).append(a)
            self._rev = rev
        return self._rev

    def queried_by(self, p: Point) -> list[Point]:
        return list(self.reverse_index().get(p, ()))

    def good(self, p: Point) -> bool:
        g = self._good.get(p)
        if g is None:
            qb = self.reverse_index().get(p, ())
            g = len(qb) <= self.ladder.querier_cap and all(self.robust(a) for a in qb)
            self._good[p] = g
        return g

    def classify(self, p: Point) -> PointClassification:
        counts = self.dj_counts(p)
        size = 1 << self.table.out_width
        return PointClassification(p, self.d(p), [Fraction(c, size) for c in counts],
                                   self.robust(p), self.queried_by(p), self.good(p))

    def bad_fraction(self) -> Fraction:
        pts = list(self.domain())
        return Fraction(sum(not self.good(p) for p in pts), len(pts))

    def is_robust_function(self) -> tuple[bool, Fraction]:
        frac = self.bad_fraction()
        return frac <= self.ladder.robust_function_threshold, frac

    # ---- resampled variants ----------------------------------------------
    def derive(self, a: Point, beta: int) -> TableAnalysis:
        """Analysis of h_{a -> beta}; logs not involving `a` are reused."""
        child = object.__new__(TableAnalysis)
        child.handle = self.handle
        child.table = self.table.resample(a, beta)
        child.n, child.l, child.zdom = self.n, self.l, self.zdom
        child.oracle = child.table.peek
        child.ladder = self.ladder
        child._recs = {p: r for p, r in self._recs.items() if p != a and a not in r.points}
        child._dj, child._robust, child._good = {}, {}, {}
        child._rev = None
        return child


def classify_point(handle, table, z, p: Point, params=None, *,
                   analysis: TableAnalysis | None = None) -> PointClassification:
    ta = analysis if analysis is not None else TableAnalysis(handle, table)
    return ta.classify(p)


def is_robust_function(handle, table, z=None, params=None, mode: str = "exhaustive", *,
                       analysis: TableAnalysis | None = None) -> tuple[bool, Fraction]:
    ta = analysis if analysis is not None else TableAnalysis(handle, table)
    return ta.is_robust_function()


# ------------------------------------------------------ critical-set logic --
def index_of_interest(ta: TableAnalysis, params: ExorParams, m: int) -> int | None:
    """Smallest i with (alpha_i, h) good and no earlier branch querying alpha_i."""
    alphas = params.batch_points(m)
    for i, ai in enumerate(alphas, start=1):
        if not ta.good(ai):
            continue
        if any(ai in ta.log_points(alphas[j]) for j in range(i - 1)):
            continue
        return i
    return None


def in_critical_set(ta: TableAnalysis, params: ExorParams,
                    mode: str | tuple = "all-m", *, rng: random.Random | None = None) -> bool:
    if not ta.is_robust_function()[0]:
        return False
    if mode == "all-m":
        if params.n > CRITICAL_ALL_M_MAX_BITS:
            raise SizeLimitError(f"all-m mode needs n <= {CRITICAL_ALL_M_MAX_BITS}")
        msgs: Iterable[int] = range(1 << params.n)
    else:
        kind, k = mode
        if kind != "sample-m" or rng is None:
            raise DomainError(f"bad critical-set mode {mode!r}")
        msgs = [rng.getrandbits(params.n) for _ in range(k)]
    return all(index_of_interest(ta, params, m) is not None for m in msgs)


def resampling_set(ta: TableAnalysis, params: ExorParams, m: int, i: int) -> list[int]:
    """S = {beta : every querier of alpha_i stays unsubverted under h_{alpha_i -> beta}}."""
    ai = params.alpha(i, m)
    qb = ta.queried_by(ai)
    return [b for b in range(1 << ta.table.out_width)
            if all(ta.d_resampled(a, ai, b) == 0 for a in qb)]


@dataclass
class ResamplingCheck:
    m: int
    i: int
    size: int
    threshold_quarter: float
    threshold_half: float
    identity_ok: bool
    index_ok: bool
    others_ok: bool
    envelope_ok: bool

    @property
    def size_ok(self) -> bool:
        """|S| >= 2^n (1 - eps1^(1/4))."""
        return self.size >= self.threshold_quarter

    @property
    def size_ok_half(self) -> bool:
        """|S| >= 2^n (1 - eps1^(1/2))."""
        return self.size >= self.threshold_half

    @property
    def ok(self) -> bool:
        return self.identity_ok and self.index_ok and self.size_ok


def check_resampling(ta: TableAnalysis, params: ExorParams, m: int, *,
                     spot_messages: Sequence[int] = ()) -> ResamplingCheck | None:
    """Verify the resampling identities for every beta in S (None if m has no
    index of interest)."""
    i = index_of_interest(ta, params, m)
    if i is None:
        return None
    ai = params.alpha(i, m)
    S = resampling_set(ta, params, m, i)
    base_g, _ = g_r_eval(params, m, ta.oracle, ta.handle)
    h_ai = ta.oracle(ai)
    others = [x for x in spot_messages if x != m]
    base_other = {x: g_r_eval(params, x, ta.oracle, ta.handle)[0] for x in others}
    base_env = {x: ta.d(Point(0, g)) for x, g in base_other.items()}
    identity = index = other_ok = env_ok = True
    for b in S:
        child = ta.derive(ai, b)
        g_b, _ = g_r_eval(params, m, child.oracle, ta.handle)
        identity &= g_b == b ^ base_g ^ h_ai
        index &= index_of_interest(child, params, m) == i
        for x in others:
            gx = g_r_eval(params, x, child.oracle, ta.handle)[0]
            other_ok &= gx == base_other[x]
            env_ok &= child.d(Point(0, gx)) == base_env[x]
    size = 1 << ta.table.out_width
    e1 = ta.ladder.eps1
    return ResamplingCheck(m, i, len(S), size * (1 - e1 ** 0.25), size * (1 - e1 ** 0.5),
                           identity, index, other_ok, env_ok)


# -------------------------------------------------------------- bounds ----
@dataclass(frozen=True)
class BoundValue:
    value: float
    terms: tuple[float, ...]

    @property
    def vacuous(self) -> bool:
        return self.value >= 1

    def as_dict(self) -> dict:
        return {"value": self.value, "terms": list(self.terms), "vacuous": self.vacuous}


def exor_bound(*, eps: float, q1: int, q2: int, tau: int, n: int) -> BoundValue:
    """2 eps q2 + 2 q2 (q1+q2)/2^n + (3 tau (eps + q1/2^n))^(1/8) + 2^-n."""
    t = (2 * eps * q2,
         2 * q2 * (q1 + q2) / 2 ** n,
         (3 * tau * (eps + q1 / 2 ** n)) ** 0.125,
         2.0 ** -n)
    return BoundValue(sum(t), t)


def indiff_advantage(*, q: int, tau: int, c: int) -> float:
    """Classical sponge simulator advantage q^2 tau^2 / 2^c (distinct from crook_rate)."""
    return (q * q * tau * tau) / 2 ** c


def sponge_bound(*, q: int, tau: int, q2: int, ell_s: float, kappa: int,
                 r: int, c: int, eps: float) -> BoundValue:
    """(q^2 tau^2 + q2 (ell+s) kappa)/2^c + 2^r eps q2 (ell+s); eps is the crook_rate."""
    t = (indiff_advantage(q=q, tau=tau, c=c),
         q2 * ell_s * kappa / 2 ** c,
         2 ** r * eps * q2 * ell_s)
    return BoundValue(sum(t), t)


def sponge_bad_bound(*, q2: int, ell_s: float, eps: float, r: int, kappa: int, c: int) -> BoundValue:
    """Pr[Bad] <= q2 (ell+s) eps 2^r + q2 (ell+s) kappa / 2^c."""
    t = (q2 * ell_s * eps * 2 ** r, q2 * ell_s * kappa / 2 ** c)
    return BoundValue(sum(t), t)


def sponge_ell_s(ell: int, s: int, r: int) -> dict[str, float]:
    """Both readings of the (ell+s) factor: block counts and raw bit lengths."""
    return {"blocks": ell // r + s // r, "bits": ell + s}


def theorem_bound(which: str, **params) -> BoundValue:
    if which == "exor":
        return exor_bound(**params)
    if which == "sponge":
        return sponge_bound(**params)
    raise DomainError(f"unknown construction {which!r}")


# ------------------------------------------------------ rejection sampling --
@dataclass(frozen=True)
class RejectionResult:
    holds: bool
    lhs: Fraction
    rhs_squared: Fraction  # k * Pr(Z in S); inequality is lhs^2 <= rhs_squared

    @property
    def ratio(self) -> float:
        if self.rhs_squared == 0:
            return math.inf if self.lhs else 0.0
        return float(self.lhs) / math.sqrt(self.rhs_squared)


class RejectionResampler:
    """Exact Pr(Z in S) for one selector A on Omega = prod Omega_i."""

    def __init__(self, sizes: Sequence[int], selector: Callable[[tuple], int]):
        if not sizes or min(sizes) < 1:
            raise DomainError("coordinate sizes must be positive")
        total = math.prod(sizes)
        if total > 1 << 16:
            raise SizeLimitError("Omega larger than 2^16")
        self.sizes = tuple(sizes)
        self.k = len(sizes)
        self.omega = list(itertools.product(*(range(s) for s in sizes)))
        self.L = math.lcm(*sizes)
        w = dict.fromkeys(self.omega, 0)
        for x in self.omega:
            j = selector(x)
            if not 0 <= j < self.k:
                raise DomainError(f"selector returned {j}, outside 0..{self.k - 1}")
            share = self.L // self.sizes[j]
            for v in range(self.sizes[j]):
                w[x[:j] + (v,) + x[j + 1:]] += share
        self.weight = w

    def pr_z(self, S: Iterable[tuple]) -> Fraction:
        return Fraction(sum(self.weight[y] for y in set(S)), len(self.omega) * self.L)

    def check(self, S: Iterable[tuple]) -> RejectionResult:
        S = set(S)
        lhs = Fraction(len(S), len(self.omega))
        rhs2 = self.k * self.pr_z(S)
        return RejectionResult(lhs * lhs <= rhs2, lhs, rhs2)


def check_rejection_resampling(sizes: Sequence[int], selector: Callable[[tuple], int],
                               sets: Iterable[Iterable[tuple]]) -> list[RejectionResult]:
    rs = RejectionResampler(sizes, selector)
    return [rs.check(S) for S in sets]


def random_selector(sizes: Sequence[int], rng: random.Random) -> Callable[[tuple], int]:
    table = {x: rng.randrange(len(sizes))
             for x in itertools.product(*(range(s) for s in sizes))}
    return table.__getitem__


# ----------------------------------------------------------------- markov --
def markov_tail(values: Sequence[float], a: float) -> tuple[float, float]:
    """(empirical Pr[X >= a], mean/a) for a non-negative sample."""
    if a <= 0:
        raise DomainError("a must be positive")
    if not values:
        raise DomainError("empty sample")
    if min(values) < 0:
        raise DomainError("Markov needs non-negative values")
    tail = sum(v >= a for v in values) / len(values)
    return tail, (sum(values) / len(values)) / a


# --------------------------------------------------- (f, beta) count claim --
def fb_count_check(handle: ImplementationHandle, n: int, l: int, alpha: Point,
                   j: int) -> dict:
    """Enumerate every function on [l] x {0,1}^n -> {0,1}^n (tiny n only).

    For each f and beta, resample f at the j-th query of h~_f(alpha) and tally
    the resulting function g. Returns whether every g is hit exactly 2^n times
    and whether sum_{f,beta} d(alpha, f') equals 2^n sum_g d(alpha, g).
    """
    points = [Point(i, x) for i in range(l + 1) for x in range(1 << n)]
    if (1 << n) ** len(points) > 1 << 20:
        raise SizeLimitError("function space too large to enumerate")
    pos = {p: k for k, p in enumerate(points)}
    vals = range(1 << n)
    zdom = handle.advice.domain()
    counts: dict[tuple, int] = {}
    d_cache: dict[tuple, int] = {}

    def d_of(g: tuple) -> int:
        v = d_cache.get(g)
        if v is None:
            if alpha in zdom:
                v = 1
            else:
                orc = lambda q: g[pos[q]]  # noqa: E731
                v = int(evaluate_subverted(handle, orc, alpha).subverted)
            d_cache[g] = v
        return v

    lhs = 0
    for f in itertools.product(vals, repeat=len(points)):
        log = evaluate_subverted(handle, lambda q: f[pos[q]], alpha).points
        a = log[j - 1] if j <= len(log) else None
        for b in vals:
            if a is None:
                g = f
            else:
                k = pos[a]
                g = f[:k] + (b,) + f[k + 1:]
            counts[g] = counts.get(g, 0) + 1
            lhs += d_of(g)
    total_g = (1 << n) ** len(points)
    uniform = len(counts) == total_g and all(c == 1 << n for c in counts.values())
    rhs = (1 << n) * sum(d_of(g) for g in itertools.product(vals, repeat=len(points)))
    return {"uniform_count": uniform, "N": 1 << n, "lhs": lhs, "rhs": rhs,
            "identity": lhs == rhs}


# ---------------------------------------------------- Monte-Carlo drivers --
def _sample_handle(spec: SubverterSpec, n: int, l: int, seed: int, label: str, t: int):
    s = derive_seed(seed, label, t)
    table = LazyFunctionTable(n, s, "h", max_index=l)
    handle, _ = run_first_stage(spec, table.peek, l=l, n=n, rng=stream(s, "stage-one"))
    return table, handle


def check_lemma1(spec: SubverterSpec, *, n: int, l: int, tables: int = 200,
                 alphas: int = 8, seed: int = 0, slack: float = 0.0) -> list[CheckRow]:
    """Ex_{alpha,h}[D^j] for every j <= tau against eps + q1 2^-n.

    eps is the largest measured per-index crooked fraction over the sampled
    tables; D^j is computed exactly by enumerating beta.
    """
    if n > DJ_EXACT_MAX_BITS:
        raise SizeLimitError("exact inner enumeration needs small n")
    samples: list[list[float]] = []
    eps = 0.0
    tau = None
    for t in range(tables):
        table, handle = _sample_handle(spec, n, l, seed, "lemma1", t)
        tau = handle.tau
        ta = TableAnalysis(handle, table, eps=0.0, max_bits=DJ_EXACT_MAX_BITS)
        eps = max(eps, max(r.estimate for r in crooked_fraction(handle, table)))
        rng = stream(seed, "lemma1-alpha", t)
        size = 1 << table.out_width
        for _ in range(alphas):
            a = Point(rng.randrange(l + 1), rng.getrandbits(n))
            samples.append([c / size for c in ta.dj_counts(a)])
    bound = eps + spec.q1 * 2.0 ** -n
    rows = []
    for j in range(tau):
        est = mean_ci([s[j] for s in samples])
        rows.append(CheckRow("lemma1_Dj", {"j": j + 1, "n": n, "l": l, "q1": spec.q1,
                                           "tau": tau, "kind": spec.kind, "tables": tables},
                             est.mean, est.ci_low, est.ci_high, bound, bound >= 1,
                             est.ci_high <= bound + slack,
                             {"eps_measured": eps, "slack": slack}))
    return rows


def check_robust_function(spec: SubverterSpec, *, n: int, l: int, tables: int = 50,
                          seed: int = 0) -> CheckRow:
    not_robust = 0
    eps_max = 0.0
    ladders = []
    for t in range(tables):
        table, handle = _sample_handle(spec, n, l, seed, "robust", t)
        ta = TableAnalysis(handle, table)
        eps_max = max(eps_max, ta.ladder.eps)
        ladders.append(ta.ladder)
        not_robust += not ta.is_robust_function()[0]
    lad = EpsilonLadder(eps_max, spec.q1, n, ladders[0].tau if ladders else 1)
    est = RateEstimate(not_robust, tables)
    bound = lad.robust_function_threshold
    vac = lad.eps2_raw >= 1
    return CheckRow("pr_not_robust", {"n": n, "l": l, "kind": spec.kind, "tables": tables},
                    est.estimate, est.ci_low, est.ci_high, bound, vac,
                    vac or est.estimate <= bound, {"eps_measured": eps_max})


def check_critical_set(spec: SubverterSpec, *, n: int, l: int, samples: int = 100,
                       seed: int = 0, mode: str | tuple = "all-m") -> CheckRow:
    outside = 0
    eps_max = 0.0
    tau = 1
    for t in range(samples):
        table, handle = _sample_handle(spec, n, l, seed, "critical", t)
        tau = handle.tau
        ta = TableAnalysis(handle, table)
        eps_max = max(eps_max, ta.ladder.eps)
        params = ExorParams.sample(n, l, stream(seed, "critical-R", t))
        rng = stream(seed, "critical-m", t)
        outside += not in_critical_set(ta, params, mode, rng=rng)
    lad = EpsilonLadder(eps_max, spec.q1, n, tau)
    est = RateEstimate(outside, samples)
    vac = lad.p1_raw >= 1
    return CheckRow("pr_outside_critical_set",
                    {"n": n, "l": l, "kind": spec.kind, "samples": samples},
                    est.estimate, est.ci_low, est.ci_high, lad.p1, vac,
                    vac or est.estimate <= lad.p1, {"eps_measured": eps_max,
                                                    "membership_rate": 1 - est.estimate})


def check_resampling_samples(spec: SubverterSpec, *, n: int, l: int, samples: int = 100,
                             seed: int = 0, spot: int = 4) -> tuple[CheckRow, list[ResamplingCheck]]:
    """Draw (h, R, m) until `samples` of them have an index of interest."""
    checks: list[ResamplingCheck] = []
    t = 0
    skipped = 0
    while len(checks) < samples:
        table, handle = _sample_handle(spec, n, l, seed, "resample", t)
        ta = TableAnalysis(handle, table)
        params = ExorParams.sample(n, l, stream(seed, "resample-R", t))
        rng = stream(seed, "resample-m", t)
        m = rng.getrandbits(n)
        spots = [rng.getrandbits(n) for _ in range(spot)]
        res = check_resampling(ta, params, m, spot_messages=spots)
        t += 1
        if res is None:
            skipped += 1
            if skipped > 10 * samples:
                break
            continue
        checks.append(res)
    ok = sum(c.ok for c in checks)
    est = RateEstimate(ok, len(checks))
    return (CheckRow("resampling_identity", {"n": n, "l": l, "kind": spec.kind,
                                             "samples": len(checks)},
                     est.estimate, est.ci_low, est.ci_high, 1.0, False,
                     len(checks) >= samples and ok == len(checks),
                     {"skipped_no_index": skipped,
                      "size_ok_half": sum(c.size_ok_half for c in checks),
                      "others_ok": sum(c.others_ok for c in checks),
                      "envelope_ok": sum(c.envelope_ok for c in checks)}),
            checks)
