"""Closed-form flocking conditions, decay envelopes, and tail bounds.

Every infinite series here is evaluated as a finite sum plus an explicit
analytic tail bound (geometric or p-series comparison). The tail bound is
folded into the reported number in the conservative direction, so reported
upper bounds stay upper bounds and reported lower bounds stay lower bounds
despite truncation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .dynamics import CommunicationWeight, Trajectory
from .graph import TopologyEnsemble, union_graph, has_spanning_tree
from .matrix import ergodicity_coefficient, flow_product, update_matrix
from .switching import (
    SwitchingSchedule,
    a_values,
    dwell_window_threshold,
    window_dwell_sum,
)

E = math.e


@dataclass(frozen=True)
class SeriesValue:
    """A truncated series with its tail treatment.

    ``value`` already includes the tail bound in the conservative
    direction; ``tail_bound`` records how much was added (or subtracted)
    and ``terms`` the truncation index.
    """

    value: float
    terms: int
    tail_bound: float

    def __float__(self) -> float:
        return self.value


@dataclass
class BoundReport:
    """Outcome of one named condition or bound evaluation."""

    name: str
    passed: bool | None
    values: dict = field(default_factory=dict)
    conditions: list = field(default_factory=list)  # (label, ok, margin)
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "values": self.values,
            "conditions": [
                {"label": lbl, "ok": ok, "margin": margin}
                for (lbl, ok, margin) in self.conditions
            ],
            "notes": self.notes,
        }


@dataclass(frozen=True)
class FrameworkParams:
    """Parameters entering the flocking conditions and decay bounds.

    ``window_base`` and ``log_coeff`` are the (n, c) of the window index
    sequence; ``dwell_cap`` is the integer M multiplying the per-window
    dwell-sum threshold; ``tail_exponent`` is the eps with
    1/phi(r) = O(r^eps).
    """

    n_agents: int
    h: float
    kappa: float
    probs: tuple
    window_base: int
    log_coeff: float
    dwell_cap: int
    tail_exponent: float = 0.0
    delta: float | None = None
    x_bound: float | None = None

    def __post_init__(self):
        if self.n_agents < 1:
            raise ValueError("n_agents must be >= 1")
        if self.window_base < 1:
            raise ValueError("window_base must be a positive integer")
        if self.log_coeff <= 0:
            raise ValueError("log_coeff must be positive")
        if self.dwell_cap < 0:
            raise ValueError("dwell_cap must be a nonnegative integer")
        object.__setattr__(self, "probs", tuple(float(p) for p in self.probs))

    @property
    def hk(self) -> float:
        return self.h * self.kappa

    @property
    def min_log_term(self) -> float:
        """min over topologies of log(1/(1-p_k)); infinite for a certain choice."""
        return min(
            (math.log(1.0 / (1.0 - p)) for p in self.probs if p < 1.0),
            default=math.inf,
        )

    @property
    def envelope_exponent(self) -> float:
        """1 + c (M+N-1) log(1-h kappa); must be positive for decay."""
        if not 0.0 < self.hk < 1.0:
            raise ValueError("stability condition violated: need 0 < h*kappa < 1")
        return 1.0 + self.log_coeff * (self.dwell_cap + self.n_agents - 1) * math.log(
            1.0 - self.hk
        )


def _phi_at_bound(p: FrameworkParams, w: CommunicationWeight) -> float:
    if w.kind == "constant":
        return w.kappa
    if p.x_bound is None:
        raise ValueError("x_bound is required for a distance-dependent weight")
    return float(w(p.x_bound))


# ---------------------------------------------------------------------------
# parameter condition checks


def check_flocking_conditions(p: FrameworkParams) -> BoundReport:
    """Discrete-model sufficient conditions for flocking with probability one.

    (i) 0 < h kappa < 1; (ii) the dwell/choice ratio is below one;
    (iii) the weight tail exponent fits in the remaining window.
    """
    hk = p.hk
    nm1 = p.n_agents - 1
    conds = []
    ok_hk = 0.0 < hk < 1.0
    conds.append(("0 < h*kappa < 1", ok_hk, min(hk, 1.0 - hk)))
    values = {"h_kappa": hk}
    if ok_hk and nm1 >= 1:
        ratio = (
            (p.dwell_cap + nm1)
            * math.log(1.0 / (1.0 - hk))
            / p.min_log_term
        )
        eps_max = (1.0 - ratio) / nm1
        conds.append(
            ("(M+N-1) log(1/(1-h*kappa)) / min_k log(1/(1-p_k)) < 1", ratio < 1.0, 1.0 - ratio)
        )
        conds.append(
            (
                "0 <= eps < (1 - ratio)/(N-1)",
                0.0 <= p.tail_exponent < eps_max,
                eps_max - p.tail_exponent,
            )
        )
        values.update(
            {"ratio": ratio, "eps": p.tail_exponent, "eps_max": eps_max}
        )
    elif ok_hk:
        conds.append(("single agent: nothing to align", True, math.inf))
    return BoundReport(
        name="flocking_conditions",
        passed=all(ok for (_, ok, _) in conds),
        values=values,
        conditions=conds,
    )


def check_continuous_flocking_conditions(
    n_agents: int,
    kappa: float,
    min_gap: float,
    dwell_cap: float,
    probs,
    tail_exponent: float,
) -> BoundReport:
    """Continuous-model analogue of the parameter conditions.

    ``min_gap`` is the deterministic part of the inter-switch gap. No
    continuous simulation is performed; this only evaluates the
    inequalities.
    """
    nm1 = n_agents - 1
    min_log = min(
        (math.log(1.0 / (1.0 - p)) for p in probs if p < 1.0), default=math.inf
    )
    ratio = (min_gap * nm1 + dwell_cap) * kappa / min_log
    eps_max = (1.0 - ratio) / nm1 if nm1 >= 1 else math.inf
    conds = [
        ("(a(N-1)+M) kappa / min_k log(1/(1-p_k)) < 1", ratio < 1.0, 1.0 - ratio),
        (
            "0 <= eps < (1 - ratio)/(N-1)",
            0.0 <= tail_exponent < eps_max,
            eps_max - tail_exponent,
        ),
    ]
    return BoundReport(
        name="continuous_flocking_conditions",
        passed=all(ok for (_, ok, _) in conds),
        values={"ratio": ratio, "eps": tail_exponent, "eps_max": eps_max},
        conditions=conds,
    )


# ---------------------------------------------------------------------------
# window contraction bounds


def ergodicity_lower_bound(
    window_length: int, p: FrameworkParams, w: CommunicationWeight
) -> float:
    """Floor on the ergodicity coefficient of a window flow product.

    ``window_length`` is the realized number of steps between the window's
    star instants. Requires the position diameter to stay within
    ``p.x_bound`` along the path (measured sup is a valid choice).
    """
    if not 0.0 < p.hk < 1.0:
        raise ValueError("stability condition violated: need 0 < h*kappa < 1")
    phi_x = _phi_at_bound(p, w)
    n = p.n_agents
    return (1.0 - p.hk) ** window_length * (
        p.h * phi_x / (n * (1.0 - p.hk))
    ) ** (n - 1)


def velocity_decay_envelope(
    r: int, p: FrameworkParams, w: CommunicationWeight
) -> float:
    """Multiplicative decay envelope after r contraction windows.

    The velocity diameter on the r-th window is bounded by
    ``envelope(r) * DV(0)`` on any path whose windows satisfy the
    rootedness and dwell-sum assumptions up to r.
    """
    if r < 0:
        raise ValueError("window count must be nonnegative")
    a = p.envelope_exponent
    if a <= 0.0:
        raise ValueError("divergent envelope exponent: 1 + c(M+N-1)log(1-h*kappa) <= 0")
    n = p.n_agents
    if n == 1:
        return math.exp(0.0) if r == 0 else 0.0
    phi_x = _phi_at_bound(p, w)
    big_k = (1.0 - p.hk) ** (
        (p.dwell_cap + n - 1) * (p.window_base + p.log_coeff * math.log(n - 1))
    ) * (p.h * phi_x / (n * (1.0 - p.hk))) ** (n - 1)
    return math.exp(-big_k * ((r + 1.0) ** a - 1.0) / a)


def exp_inequality(x: float, delta: float) -> tuple[float, float]:
    """Both sides of exp(-x) <= (delta/e)^delta * x^(-delta); tight at x = delta."""
    if x <= 0 or delta <= 0:
        raise ValueError("x and delta must be positive")
    return math.exp(-x), (delta / E) ** delta * x ** (-delta)


def default_delta(p: FrameworkParams) -> float:
    """Midpoint of the admissible decay-power interval.

    The interval is (1/a, 1/((N-1) eps)) with a the envelope exponent;
    for eps = 0 the upper end is infinite and 2/a is used.
    """
    a = p.envelope_exponent
    if a <= 0.0:
        raise ValueError("divergent envelope exponent")
    lo = 1.0 / a
    if p.tail_exponent <= 0.0 or p.n_agents == 1:
        return 2.0 * lo
    hi = 1.0 / ((p.n_agents - 1) * p.tail_exponent)
    if hi <= lo:
        raise ValueError("empty delta interval: decrease eps or the ratio")
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# spatial bound existence (uniform-in-time position diameter)


def spatial_bound_lhs(
    x_bound: float,
    p: FrameworkParams,
    w: CommunicationWeight,
    init_dx: float,
    init_dv: float,
    rel_tol: float = 1e-14,
    max_terms: int = 1 << 22,
) -> SeriesValue:
    """Self-consistency functional whose value below ``x_bound`` certifies it.

    Evaluates the series bounding ``sup_t DX(t)`` when the candidate
    ``x_bound`` is used inside the decay envelope. The p-series tail bound
    is added, so the reported value is a valid upper bound of the true
    series and a certified ``value < x_bound`` stays correct.
    """
    if x_bound <= 0:
        raise ValueError("x_bound must be positive")
    delta = p.delta if p.delta is not None else default_delta(p)
    a = p.envelope_exponent
    if a <= 0.0:
        raise ValueError("divergent envelope exponent")
    s = a * delta
    if s <= 1.0:
        raise ValueError(
            "series divergent: delta is at or below the admissible interval's lower end"
        )
    n, c = p.window_base, p.log_coeff
    nn = p.n_agents
    mn = p.dwell_cap + nn - 1
    if nn == 1:
        return SeriesValue(init_dx, 0, 0.0)
    log_nm1 = math.log(nn - 1)
    head = init_dx + init_dv * p.h * mn * (n + c * log_nm1)
    if init_dv == 0.0:
        return SeriesValue(head, 0, 0.0)

    phi_x = float(w(x_bound))
    big_k = (1.0 - p.hk) ** (mn * (n + c * log_nm1)) * (
        p.h * phi_x / (nn * (1.0 - p.hk))
    ) ** (nn - 1)
    pref = mn * (delta / E) ** delta
    if big_k <= 0.0 or (big_k / (2.0 * a)) ** (-delta) == math.inf:
        # prefactor too small for float range; the true value is beyond
        # representable magnitudes, so report it as unbounded
        return SeriesValue(math.inf, 0, math.inf)

    total = 0.0
    r = 1
    chunk = 1 << 16
    tail = math.inf
    # closure needs (r+1)^a >= 2 and the summand decreasing past r
    r_min_close = max(2.0 ** (1.0 / a), math.exp(max(0.0, 1.0 / s - (n + c * log_nm1) / c)), 16.0)
    with np.errstate(over="ignore"):
        while r <= max_terms:
            hi = min(r + chunk - 1, max_terms)
            rr = np.arange(r, hi + 1, dtype=float)
            series_r = ((rr + 1.0) ** a - 1.0) / a
            total += float(
                ((n + c * np.log((rr + 1.0) * (nn - 1))) * (big_k * series_r) ** (-delta)).sum()
            )
            r = hi + 1
            if r > r_min_close:
                u = float(r)
                integral = u ** (1.0 - s) / (s - 1.0) * (
                    n + c * log_nm1 + c * math.log(u) + c / (s - 1.0)
                )
                tail = (2.0 * a / big_k) ** delta * integral
                if tail <= rel_tol * max(total, 1e-300) or not math.isfinite(total):
                    break
    value = head + init_dv * p.h * pref * (total + tail)
    return SeriesValue(value, r - 1, init_dv * p.h * pref * tail)


def solve_spatial_bound(
    p: FrameworkParams,
    w: CommunicationWeight,
    init_dx: float,
    init_dv: float,
    ceiling: float = 1e300,
    grid_factor: float = 1.25,
) -> float | None:
    """Smallest certified uniform position-diameter bound, or None.

    Scans a geometric grid for the first candidate x with lhs(x) < x, then
    bisects the bracket. The functional is nondecreasing in x, so the grid
    may start at its value at the first candidate: everything below is
    excluded. Scan evaluations use a looser series tolerance (the tail is
    added, so they stay valid upper bounds); the returned value is
    re-verified at full tolerance.
    """

    def lhs(x: float, rel_tol: float = 1e-9) -> float:
        return spatial_bound_lhs(
            x, p, w, init_dx, init_dv, rel_tol=rel_tol, max_terms=1 << 20
        ).value

    start = max(init_dx, p.h * init_dv, 1e-9)
    lo, x = 0.0, start
    hi = None
    for _ in range(1024):
        if x > ceiling:
            break
        val = lhs(x)
        if val < x:
            hi = x
            break
        lo = x
        # monotone fixed-point jump: candidates below lhs(x) all fail too
        x = max(x * grid_factor, min(val, ceiling * grid_factor))
    if hi is None:
        return None
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if lhs(mid) < mid:
            hi = mid
        else:
            lo = mid
    if not spatial_bound_lhs(hi, p, w, init_dx, init_dv).value < hi:
        return None  # defensive; the bracket invariant keeps hi valid
    return hi


# ---------------------------------------------------------------------------
# probability bounds for the switching process


def _floor_log_power_sum(q: float, c: float, rel_tol: float = 1e-16) -> SeriesValue:
    """sum_{l>=0} q^floor(c log(l+1)) with a geometric tail closure.

    Terms are grouped by the floor value m: the group count is the number
    of integers j = l+1 in [e^(m/c), e^((m+1)/c)), and group weights decay
    like (q e^(1/c))^m. The tail bound is added, so the reported value is
    an upper bound of the true sum.
    """
    if not 0.0 < q < 1.0:
        raise ValueError("q must be in (0, 1)")
    ratio = q * math.exp(1.0 / c)
    if ratio >= 1.0:
        raise ValueError("series divergent: need c > -1/log(1-p)")
    terms = []
    running = 0.0
    prev_cut = 1
    m = 0
    while True:
        upper = math.exp((m + 1) / c)
        if upper > 2.0**53:
            break  # group counts no longer exact in float; close analytically
        cut = math.ceil(upper)
        if cut > prev_cut:
            terms.append((q**m) * (cut - prev_cut))
            running += terms[-1]
        prev_cut = cut
        m += 1
        tail = (math.exp(1.0 / c) - 1.0) * ratio**m / (1.0 - ratio) + q**m / (1.0 - q)
        if terms and tail <= rel_tol * running:
            break
    tail = (math.exp(1.0 / c) - 1.0) * ratio**m / (1.0 - ratio) + q**m / (1.0 - q)
    return SeriesValue(math.fsum(terms) + tail, m, tail)


def rooted_windows_lower_bound(n: int, c: float, ens: TopologyEnsemble) -> SeriesValue:
    """Lower bound on the probability that every star window union is rooted.

    Requires sum_k (1-p_k)^n <= 1/2 and c > -1/log(1-p_k) for every k.
    The inner series' tail bounds are added before exponentiating, which
    pushes the reported probability down: it stays a valid lower bound.
    """
    probs = ens.probs
    weight_sum = sum((1.0 - pk) ** n for pk in probs)
    if weight_sum > 0.5:
        raise ValueError(
            f"hypothesis violated: sum_k (1-p_k)^n = {weight_sum:.6g} > 1/2; increase n"
        )
    total = 0.0
    terms = 0
    tail_effect = 0.0
    for k, pk in enumerate(probs):
        q = 1.0 - pk
        if q == 0.0:
            continue
        if c <= -1.0 / math.log(q):
            raise ValueError(
                f"hypothesis violated for topology {k + 1}: need c > {-1.0 / math.log(q):.6g}"
            )
        inner = _floor_log_power_sum(q, c)
        total += q**n * inner.value
        terms = max(terms, inner.terms)
        tail_effect += q**n * inner.tail_bound
    scale = 2.0 * math.log(2.0)
    value = math.exp(-scale * total)
    return SeriesValue(value, terms, math.exp(-scale * (total - tail_effect)) - value)


@lru_cache(maxsize=512)
def _p_series_upper(s: float, rel_tol: float = 1e-14, max_terms: int = 1 << 23) -> SeriesValue:
    """Upper bound of zeta(s) = sum i^-s by partial sum plus integral tail.

    Terms are float64 (their rounding is proportional to term size, at most
    a few ulp of the total); accumulation runs in extended precision and an
    eps-scale guard is folded into the tail so rounding cannot push the
    reported value below the true sum.
    """
    if s <= 1.0:
        raise ValueError("series divergent: exponent must exceed 1")
    total = np.longdouble(0.0)
    i = 1
    chunk = 1 << 16
    while i <= max_terms:
        hi = min(i + chunk - 1, max_terms)
        ii = np.arange(i, hi + 1, dtype=float)
        total += (ii ** (-s)).sum(dtype=np.longdouble)
        i = hi + 1
        # sum_{j>=i} j^-s <= integral_{i-1}^inf x^-s dx
        tail = float(i - 1) ** (1.0 - s) / (s - 1.0)
        if tail <= rel_tol * float(total):
            break
    tail = float(i - 1) ** (1.0 - s) / (s - 1.0) + 8.0 * np.finfo(float).eps * float(total)
    return SeriesValue(float(total + np.longdouble(tail)), i - 1, tail)


def dwell_tail_bound_poisson(
    n: int, c: float, m_cap: int, n_agents: int, rate_max: float
) -> SeriesValue:
    """Upper bound on the dwell-sum violation probability, Poisson dwelling.

    Requires M > (N-1) e rate_max and M c log((N-1) e rate_max / M) < -1.
    The p-series tail is added, keeping the value a valid upper bound.
    """
    if n_agents < 2:
        raise ValueError("need at least two agents")
    if n < 1:
        raise ValueError("n must be a positive integer")
    base = (n_agents - 1) * E * rate_max
    if m_cap <= base:
        raise ValueError(
            f"series divergent, increase M: need M > (N-1)*e*rate_max = {base:.6g}"
        )
    s = -m_cap * c * math.log(base / m_cap)
    if s <= 1.0:
        raise ValueError("series divergent, increase M: need M*c*log((N-1)e*rate/M) < -1")
    zsum = _p_series_upper(s)
    pref = (base / m_cap) ** (
        m_cap * (n + c * math.log(n_agents - 1) - 1.0)
    ) / math.sqrt(2.0 * math.pi * m_cap * n)
    return SeriesValue(pref * zsum.value, zsum.terms, pref * zsum.tail_bound)


def geometric_cap_constant(m_cap: int, n_agents: int, prob_min: float) -> float:
    """The contraction constant C(M); below one for large M when p_min > 1/2."""
    if not 0.5 < prob_min <= 1.0:
        raise ValueError("geometric dwelling requires p_min > 1/2")
    ratio = (n_agents - 1) / m_cap
    return (1.0 + ratio) ** (1.0 + ratio) * (1.0 / ratio) ** ratio * (
        1.0 - prob_min
    ) / prob_min


def dwell_tail_bound_geometric(
    n: int, c: float, m_cap: int, n_agents: int, prob_min: float
) -> SeriesValue:
    """Upper bound on the dwell-sum violation probability, geometric dwelling.

    Requires p_min > 1/2, C(M) < 1 and M c log(C(M)) < -1.
    """
    if n_agents < 2:
        raise ValueError("need at least two agents")
    if n < 1:
        raise ValueError("n must be a positive integer")
    cm = geometric_cap_constant(m_cap, n_agents, prob_min)
    if cm >= 1.0:
        raise ValueError(f"series divergent, increase M: C(M) = {cm:.6g} >= 1")
    s = -m_cap * c * math.log(cm)
    if s <= 1.0:
        raise ValueError("series divergent, increase M: need M*c*log(C(M)) < -1")
    zsum = _p_series_upper(s)
    pref = (E / (math.sqrt(2.0) * math.pi)) * cm ** (
        m_cap * (n + c * math.log(n_agents - 1) - 1.0)
    )
    return SeriesValue(pref * zsum.value, zsum.terms, pref * zsum.tail_bound)


_M_SEARCH_CAP = 10**6


def smallest_valid_m_poisson(c: float, n_agents: int, rate_max: float) -> int:
    """First M satisfying both convergence conditions of the Poisson bound."""
    base = (n_agents - 1) * E * rate_max
    m = max(1, math.floor(base) + 1)
    while m <= _M_SEARCH_CAP:
        if m > base and -m * c * math.log(base / m) > 1.0:
            return m
        m += 1
    raise ValueError("no valid M found below the search cap")


def smallest_valid_m_geometric(c: float, n_agents: int, prob_min: float) -> int:
    """First M satisfying both convergence conditions of the geometric bound."""
    m = 1
    while m <= _M_SEARCH_CAP:
        cm = geometric_cap_constant(m, n_agents, prob_min)
        if cm < 1.0 and -m * c * math.log(cm) > 1.0:
            return m
        m += 1
    raise ValueError("no valid M found below the search cap")


# ---------------------------------------------------------------------------
# sample-path audits


@dataclass
class WindowAudit:
    """Measured vs. bounded quantities for one contraction window r."""

    index: int
    start: int
    end: int
    rooted_ok: bool
    dwell_ok: bool
    mu: float
    mu_floor: float
    flow_stochastic: bool
    dv_start: float
    envelope: float | None


@dataclass
class PathAudit:
    windows: list
    assumptions_ok: bool
    mu_violations: int
    envelope_violations: int
    stochasticity_violations: int
    x_bound_used: float

    @property
    def n_windows(self) -> int:
        return len(self.windows)


def audit_path(
    traj: Trajectory,
    sched: SwitchingSchedule,
    ens: TopologyEnsemble,
    h: float,
    w: CommunicationWeight,
    n: int,
    c: float,
    m_cap: int,
    x_bound: float | None = None,
    mu_slack: float = 1e-10,
    flow_tol: float = 1e-10,
) -> PathAudit:
    """Check the window contraction floor and decay envelope along one path.

    The trajectory must carry full position history. Windows are audited up
    to the last star instant covered by both the schedule and the recorded
    steps. The envelope at window r applies only when all windows up to r
    satisfy the rootedness and dwell-sum assumptions; violation counters
    respect that.
    """
    if traj.positions_history is None:
        raise ValueError("audit requires record_states=True trajectories")
    nn = ens.n_vertices
    if nn < 2:
        raise ValueError("audit needs at least two agents")
    x_used = float(x_bound) if x_bound is not None else traj.max_dx
    params = FrameworkParams(
        n_agents=nn,
        h=h,
        kappa=w.kappa,
        probs=ens.probs,
        window_base=n,
        log_coeff=c,
        dwell_cap=m_cap,
        x_bound=x_used,
    )

    # largest star index fully covered by schedule and recorded steps
    max_ell = 0
    while True:
        idx = a_values(n, c, max_ell + 1)
        if idx[-1] >= len(sched.instants) or sched.instants[idx[-1]] > traj.steps:
            break
        max_ell += 1
    n_windows = max_ell // (nn - 1)
    if n_windows == 0:
        return PathAudit([], True, 0, 0, 0, x_used)

    stars = sched.instants[a_values(n, c, n_windows * (nn - 1))]
    sigma = traj.sigma
    xh = traj.positions_history
    dv0 = float(traj.dv[0])

    def window_union_rooted(s0: int, s1: int) -> bool:
        ks = set(int(k) for k in np.unique(sigma[s0:s1]))
        return has_spanning_tree(union_graph([ens.graphs[k] for k in ks]))

    def window_flow(s0: int, s1: int) -> np.ndarray:
        if s0 == s1:
            return np.eye(nn)
        mats = [
            update_matrix(xh[t], ens.graphs[int(sigma[t])], h, w)
            for t in range(s0, s1)
        ]
        return flow_product(mats)

    windows = []
    mu_viol = env_viol = stoch_viol = 0
    assumptions_ok = True
    prefix_ok = True
    for r in range(1, n_windows + 1):
        s0 = int(stars[(r - 1) * (nn - 1)])
        s1 = int(stars[r * (nn - 1)])
        rooted = all(
            window_union_rooted(
                int(stars[(r - 1) * (nn - 1) + i]),
                int(stars[(r - 1) * (nn - 1) + i + 1]),
            )
            for i in range(nn - 1)
        )
        dwell = window_dwell_sum(sched, r, n, c, nn) < dwell_window_threshold(
            r, n, c, m_cap, nn
        )
        phi = window_flow(s0, s1)
        mu = ergodicity_coefficient(np.maximum(phi, 0.0))
        floor = ergodicity_lower_bound(s1 - s0, params, w)
        row_err = float(np.abs(phi.sum(axis=1) - 1.0).max())
        flow_ok = phi.min() >= -flow_tol and row_err <= flow_tol
        if not flow_ok:
            stoch_viol += 1
        if rooted and x_used >= traj.max_dx and mu < floor * (1.0 - mu_slack):
            mu_viol += 1
        prefix_ok = prefix_ok and rooted and dwell
        envelope = None
        if prefix_ok:
            envelope = velocity_decay_envelope(r, params, w)
            if float(traj.dv[s1]) > dv0 * envelope * (1.0 + mu_slack) + 1e-15:
                env_viol += 1
        assumptions_ok = assumptions_ok and rooted and dwell
        windows.append(
            WindowAudit(
                index=r,
                start=s0,
                end=s1,
                rooted_ok=rooted,
                dwell_ok=dwell,
                mu=mu,
                mu_floor=floor,
                flow_stochastic=flow_ok,
                dv_start=float(traj.dv[s1]),
                envelope=envelope,
            )
        )
    return PathAudit(windows, assumptions_ok, mu_viol, env_viol, stoch_viol, x_used)
