"""Random switching schedules: dwelling times, switching instants, choices.

A schedule is a strictly increasing sequence of integer instants
``t_0 = 0 < t_1 < ...`` with gaps ``t_{l+1} - t_l = 1 + T_l`` where the
``T_l`` are nonnegative integer dwelling times, plus an i.i.d. topology
choice per instant.

Reproducibility contract: every draw is produced by inverse-CDF transforms
of ``Generator.random()`` uniforms, so sample paths depend only on the
seed and this module, not on numpy's distribution internals. One seed per
sample path; dwelling draws and topology choices consume from two
independent child streams, so extending the horizon never changes earlier
draws.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Union

import numpy as np

from .graph import TopologyEnsemble

RateSpec = Union[float, Callable[[int], float]]

# Above this rate a single inverse-CDF table gets long; split the draw into
# independent parts with smaller rates instead (their sum has the right law).
_POISSON_INVERSION_MAX_RATE = 30.0


def a_sequence(n: int, c: float, ell: int) -> int:
    """Window index sequence: a_0 = 0, a_{l+1} = a_l + n + floor(c*log(l+1))."""
    if n < 1:
        raise ValueError("n must be a positive integer")
    if c <= 0:
        raise ValueError("c must be positive")
    if ell < 0:
        raise ValueError("ell must be nonnegative")
    return int(a_values(n, c, ell)[ell])


def a_values(n: int, c: float, count: int) -> np.ndarray:
    """Array [a_0, ..., a_count] of the window index sequence."""
    if count == 0:
        return np.zeros(1, dtype=np.int64)
    incr = n + np.floor(c * np.log(np.arange(1, count + 1))).astype(np.int64)
    return np.concatenate([[0], np.cumsum(incr)])


@lru_cache(maxsize=256)
def _poisson_cdf_table(rate: float) -> np.ndarray:
    """CDF table covering all but < 1e-18 of the mass."""
    kmax = int(math.ceil(rate + 60.0 * math.sqrt(rate) + 60.0))
    k = np.arange(kmax + 1)
    log_pmf = k * math.log(rate) - rate - np.cumsum(
        np.concatenate([[0.0], np.log(np.arange(1, kmax + 1))])
    )
    cdf = np.cumsum(np.exp(log_pmf))
    return cdf


def _sample_poisson(rate: float, size: int, rng: np.random.Generator) -> np.ndarray:
    if rate <= 0:
        raise ValueError("poisson rate must be positive")
    if rate <= _POISSON_INVERSION_MAX_RATE:
        cdf = _poisson_cdf_table(float(rate))
        u = rng.random(size)
        out = np.searchsorted(cdf, u, side="right")
        return np.minimum(out, len(cdf) - 1).astype(np.int64)
    parts = int(math.ceil(rate / _POISSON_INVERSION_MAX_RATE))
    total = np.zeros(size, dtype=np.int64)
    for _ in range(parts):
        total += _sample_poisson(rate / parts, size, rng)
    return total


def _sample_geometric(p: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """Failures before the first success: P(k) = (1-p)^k p, k >= 0."""
    if not 0.0 < p <= 1.0:
        raise ValueError("geometric success probability must be in (0, 1]")
    if p == 1.0:
        return np.zeros(size, dtype=np.int64)
    u = rng.random(size)
    return np.floor(np.log1p(-u) / math.log1p(-p)).astype(np.int64)


@dataclass(frozen=True)
class PoissonDwelling:
    """Dwelling times T_l drawn from Poisson(rate_l).

    ``rate`` may be a constant or a callable l -> rate_l; when callable,
    ``rate_max`` must bound the rates from above (it feeds the tail bound).
    """

    rate: RateSpec
    rate_max: float | None = None

    def __post_init__(self):
        if callable(self.rate):
            if self.rate_max is None:
                raise ValueError("rate_max is required for a rate sequence")
        else:
            if self.rate <= 0:
                raise ValueError("poisson rate must be positive")
            if self.rate_max is None:
                object.__setattr__(self, "rate_max", float(self.rate))

    def rate_at(self, ell: int) -> float:
        r = self.rate(ell) if callable(self.rate) else self.rate
        r = float(r)
        if r <= 0 or r > self.rate_max + 1e-12:
            raise ValueError(f"rate at ell={ell} outside (0, rate_max]")
        return r

    def mean_dwell(self) -> float:
        return float(self.rate_max)

    def sample_block(self, ell0: int, count: int, rng: np.random.Generator) -> np.ndarray:
        if not callable(self.rate):
            return _sample_poisson(float(self.rate), count, rng)
        return np.array(
            [_sample_poisson(self.rate_at(ell0 + i), 1, rng)[0] for i in range(count)],
            dtype=np.int64,
        )

    def sample_matrix(self, rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
        if not callable(self.rate):
            return _sample_poisson(float(self.rate), rows * cols, rng).reshape(rows, cols)
        out = np.empty((rows, cols), dtype=np.int64)
        for j in range(cols):
            out[:, j] = _sample_poisson(self.rate_at(j), rows, rng)
        return out


@dataclass(frozen=True)
class GeometricDwelling:
    """Dwelling times T_l with P(T_l = k) = (1 - p_l)^k p_l.

    The switching framework requires inf_l p_l > 1/2, enforced here.
    ``success_prob`` may be a constant or a callable l -> p_l with
    ``prob_min`` as its infimum.
    """

    success_prob: RateSpec
    prob_min: float | None = None

    def __post_init__(self):
        if callable(self.success_prob):
            if self.prob_min is None:
                raise ValueError("prob_min is required for a probability sequence")
        else:
            p = float(self.success_prob)
            if self.prob_min is None:
                object.__setattr__(self, "prob_min", p)
        if not 0.5 < self.prob_min <= 1.0:
            raise ValueError("geometric dwelling requires inf p_l > 1/2")

    def prob_at(self, ell: int) -> float:
        p = self.success_prob(ell) if callable(self.success_prob) else self.success_prob
        p = float(p)
        if p < self.prob_min - 1e-12 or p > 1.0:
            raise ValueError(f"success prob at ell={ell} outside [prob_min, 1]")
        return p

    def mean_dwell(self) -> float:
        return (1.0 - self.prob_min) / self.prob_min

    def sample_block(self, ell0: int, count: int, rng: np.random.Generator) -> np.ndarray:
        if not callable(self.success_prob):
            return _sample_geometric(float(self.success_prob), count, rng)
        return np.array(
            [_sample_geometric(self.prob_at(ell0 + i), 1, rng)[0] for i in range(count)],
            dtype=np.int64,
        )

    def sample_matrix(self, rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
        if not callable(self.success_prob):
            return _sample_geometric(float(self.success_prob), rows * cols, rng).reshape(
                rows, cols
            )
        out = np.empty((rows, cols), dtype=np.int64)
        for j in range(cols):
            out[:, j] = _sample_geometric(self.prob_at(j), rows, rng)
        return out


@dataclass(frozen=True)
class DeterministicDwelling:
    """Constant dwelling time; value 0 means a switch at every step."""

    value: int

    def __post_init__(self):
        if self.value < 0 or int(self.value) != self.value:
            raise ValueError("deterministic dwelling must be a nonnegative integer")
        object.__setattr__(self, "value", int(self.value))

    def mean_dwell(self) -> float:
        return float(self.value)

    def sample_block(self, ell0: int, count: int, rng: np.random.Generator) -> np.ndarray:
        return np.full(count, self.value, dtype=np.int64)

    def sample_matrix(self, rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
        return np.full((rows, cols), self.value, dtype=np.int64)


DwellingProcess = Union[PoissonDwelling, GeometricDwelling, DeterministicDwelling]


def sample_dwelling(p: DwellingProcess, ell: int, rng: np.random.Generator) -> int:
    """One draw of the ell-th dwelling time."""
    return int(p.sample_block(ell, 1, rng)[0])


@dataclass(frozen=True)
class SwitchingSchedule:
    """One realized switching path.

    ``instants[l]`` is t_l (strictly increasing, t_0 = 0, the final one is
    the first instant >= the generation horizon); ``choices[l]`` is the
    0-based topology index active on [t_l, t_{l+1}); ``dwell_draws[l]`` is
    the realized T_l, so ``instants`` has one more entry than
    ``dwell_draws``.
    """

    instants: np.ndarray
    choices: np.ndarray
    dwell_draws: np.ndarray

    def __post_init__(self):
        instants = np.asarray(self.instants, dtype=np.int64)
        choices = np.asarray(self.choices, dtype=np.int64)
        draws = np.asarray(self.dwell_draws, dtype=np.int64)
        if instants[0] != 0:
            raise ValueError("schedules start at t_0 = 0")
        if len(instants) != len(choices):
            raise ValueError("choices length must match instants length")
        if len(draws) != len(instants) - 1:
            raise ValueError("need exactly one dwell draw per gap")
        if (np.diff(instants) != 1 + draws).any():
            raise ValueError("gaps must satisfy t_{l+1} - t_l = 1 + T_l")
        if draws.min(initial=0) < 0:
            raise ValueError("dwelling times must be nonnegative")
        object.__setattr__(self, "instants", instants)
        object.__setattr__(self, "choices", choices)
        object.__setattr__(self, "dwell_draws", draws)

    @property
    def n_switches(self) -> int:
        return len(self.instants)

    @property
    def coverage(self) -> int:
        """Largest time t such that the topology is defined on [0, t)."""
        return int(self.instants[-1])

    def to_dict(self) -> dict:
        return {
            "instants": self.instants.tolist(),
            "choices": [int(k) + 1 for k in self.choices],
            "dwell_draws": self.dwell_draws.tolist(),
        }


def _as_seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def generate_schedule(
    ens: TopologyEnsemble,
    p: DwellingProcess,
    horizon: int,
    seed,
) -> SwitchingSchedule:
    """Generate instants until the first one >= horizon, with i.i.d. choices.

    ``seed`` is an int or a ``numpy.random.SeedSequence``; two child
    streams are derived from it (dwelling, choices). The schedule is fully
    determined by the seed.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    ss = _as_seed_sequence(seed)
    dwell_ss, choice_ss = ss.spawn(2)
    dwell_rng = np.random.Generator(np.random.PCG64(dwell_ss))
    choice_rng = np.random.Generator(np.random.PCG64(choice_ss))

    cum_probs = np.cumsum(np.asarray(ens.probs, dtype=float))
    cum_probs[-1] = 1.0

    def draw_choices(count: int) -> np.ndarray:
        ks = np.searchsorted(cum_probs, choice_rng.random(count), side="right")
        return np.minimum(ks, len(cum_probs) - 1)

    # one choice per instant: instant 0 first, then one per subsequent gap
    chunks_t: list[np.ndarray] = []
    chunks_k: list[np.ndarray] = [draw_choices(1)]
    last = 0
    ell = 0
    mean_gap = 1.0 + p.mean_dwell()
    while last < horizon:
        need = max(64, int((horizon - last) / mean_gap * 1.1) + 16)
        chunks_t.append(p.sample_block(ell, need, dwell_rng))
        chunks_k.append(draw_choices(need))
        ell += need
        last += int((1 + chunks_t[-1]).sum())

    all_draws = np.concatenate(chunks_t)
    all_ks = np.concatenate(chunks_k)
    instants = np.concatenate([[0], np.cumsum(1 + all_draws)])
    stop = int(np.searchsorted(instants, horizon, side="left"))
    return SwitchingSchedule(
        instants=instants[: stop + 1],
        choices=all_ks[: stop + 1],
        dwell_draws=all_draws[:stop],
    )


def topology_at(s: SwitchingSchedule, t: int) -> int:
    """0-based topology index active at time t (piecewise constant)."""
    if t < 0 or t >= s.instants[-1]:
        raise ValueError(f"t={t} outside the covered range [0, {s.instants[-1]})")
    ell = int(np.searchsorted(s.instants, t, side="right")) - 1
    return int(s.choices[ell])


def sigma_steps(s: SwitchingSchedule, horizon: int) -> np.ndarray:
    """Per-step active topology indices for t = 0..horizon-1."""
    if horizon > s.instants[-1]:
        raise ValueError("insufficient schedule")
    gaps = np.diff(s.instants)
    return np.repeat(s.choices[:-1], gaps)[:horizon]


def star_times(s: SwitchingSchedule, n: int, c: float, count: int) -> np.ndarray:
    """Subsampled instants t*_l = t_{a_l(n, c)} for l = 0..count."""
    idx = a_values(n, c, count)
    if idx[-1] >= len(s.instants):
        raise ValueError("insufficient schedule")
    return s.instants[idx]


def window_dwell_sum(
    s: SwitchingSchedule, i: int, n: int, c: float, n_agents: int
) -> int:
    """Sum of T_l over the i-th dwell window l in [a_{(i-1)(N-1)}, a_{i(N-1)}).

    Used to test the dwell boundedness condition on a realized path: the
    good event is (strictly) sum < M * (n + floor(c * log(i * (N-1)))).
    """
    if i < 1:
        raise ValueError("window index starts at 1")
    blocks = a_values(n, c, i * (n_agents - 1))
    lo = int(blocks[(i - 1) * (n_agents - 1)])
    hi = int(blocks[i * (n_agents - 1)])
    if hi > len(s.dwell_draws):
        raise ValueError("insufficient schedule")
    return int(s.dwell_draws[lo:hi].sum())


def dwell_window_threshold(i: int, n: int, c: float, m_cap: int, n_agents: int) -> int:
    """Violation threshold M * (n + floor(c * log(i * (N-1)))) for window i."""
    return m_cap * (n + int(math.floor(c * math.log(i * (n_agents - 1)))))
