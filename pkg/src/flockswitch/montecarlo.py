"""Seeded ensemble driver and empirical bound-consistency estimators.

Reproducibility: run i of an ensemble derives its seed as
``SeedSequence(root_seed, spawn_key=(i,))``, so results are bit-identical
across re-runs and worker counts, and adding runs never perturbs existing
ones. Each run spawns three child streams: initial condition, dwelling
draws, topology choices.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dynamics import (
    CommunicationWeight,
    Configuration,
    StopCriteria,
    Trajectory,
    simulate,
)
from .graph import TopologyEnsemble, has_spanning_tree, union_graph
from .switching import DwellingProcess, a_values, generate_schedule

MONOTONE_TOL = 1e-12


def wilson_interval(successes: int, trials: int, z: float = 1.959963984540054):
    """95% Wilson score interval for a binomial fraction."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    phat = successes / trials
    denom = 1.0 + z * z / trials
    center = (phat + z * z / (2 * trials)) / denom
    half = (
        z * math.sqrt(phat * (1.0 - phat) / trials + z * z / (4.0 * trials * trials))
        / denom
    )
    lo = 0.0 if successes == 0 else max(0.0, center - half)
    hi = 1.0 if successes == trials else min(1.0, center + half)
    return lo, hi


@dataclass(frozen=True)
class InitialCondition:
    """Fixed initial state, or a sampling box per run.

    When ``positions``/``velocities`` are None, entries are drawn uniformly
    from the corresponding box.
    """

    n_agents: int
    dim: int
    positions: np.ndarray | None = None
    velocities: np.ndarray | None = None
    position_box: tuple = (-1.0, 1.0)
    velocity_box: tuple = (-1.0, 1.0)

    def realize(self, rng: np.random.Generator) -> Configuration:
        if self.positions is not None:
            x = np.array(self.positions, dtype=float)
        else:
            lo, hi = self.position_box
            x = lo + (hi - lo) * rng.random((self.n_agents, self.dim))
        if self.velocities is not None:
            v = np.array(self.velocities, dtype=float)
        else:
            lo, hi = self.velocity_box
            v = lo + (hi - lo) * rng.random((self.n_agents, self.dim))
        return Configuration(x, v)


@dataclass(frozen=True)
class EnsembleSpec:
    """Everything needed to reproduce an ensemble of sample paths."""

    ensemble: TopologyEnsemble
    process: DwellingProcess
    weight: CommunicationWeight
    h: float
    init: InitialCondition
    horizon: int
    n_runs: int
    root_seed: int
    stop: StopCriteria = StopCriteria()
    jobs: int = 1
    kernel: str = "auto"

    def __post_init__(self):
        if self.n_runs < 1:
            raise ValueError("n_runs must be >= 1")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")


@dataclass
class RunRecord:
    """Outcome of one sample path (finite-horizon flocking surrogate)."""

    index: int
    flocked: bool
    steps_run: int
    steps_to_tolerance: int | None
    final_dx: float
    final_dv: float
    max_dx: float
    monotonicity_violations: int
    stop_reason: str
    error: str | None = None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def run_seed(root_seed: int, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(root_seed, spawn_key=(index,))


def run_path(
    spec: EnsembleSpec, index: int, return_schedule: bool = False, **simulate_kwargs
):
    """Simulate the index-th path of the ensemble."""
    init_ss, sched_ss, _reserved = run_seed(spec.root_seed, index).spawn(3)
    init = spec.init.realize(np.random.Generator(np.random.PCG64(init_ss)))
    sched = generate_schedule(spec.ensemble, spec.process, spec.horizon, sched_ss)
    traj = simulate(
        init,
        spec.ensemble,
        sched,
        spec.h,
        spec.weight,
        spec.horizon,
        spec.stop,
        kernel=spec.kernel,
        **simulate_kwargs,
    )
    return (traj, sched) if return_schedule else traj


def _monotonicity_violations(traj: Trajectory, h: float) -> int:
    dv_up = int((np.diff(traj.dv) > MONOTONE_TOL).sum())
    dx_up = int((np.diff(traj.dx) - h * traj.dv[:-1] > MONOTONE_TOL).sum())
    return dv_up + dx_up


def _run_single(spec: EnsembleSpec, index: int) -> RunRecord:
    try:
        traj = run_path(spec, index)
    except Exception as exc:  # failures are recorded per run, never fatal
        return RunRecord(
            index=index,
            flocked=False,
            steps_run=0,
            steps_to_tolerance=None,
            final_dx=math.nan,
            final_dv=math.nan,
            max_dx=math.nan,
            monotonicity_violations=0,
            stop_reason="error",
            error=f"{type(exc).__name__}: {exc}",
        )
    v_tol, x_cap = spec.stop.resolve(float(traj.dx[0]), float(traj.dv[0]))
    hit = traj.steps_to_tolerance(v_tol)
    flocked = hit is not None and traj.max_dx <= x_cap
    return RunRecord(
        index=index,
        flocked=bool(flocked),
        steps_run=traj.steps,
        steps_to_tolerance=hit,
        final_dx=float(traj.dx[-1]),
        final_dv=float(traj.dv[-1]),
        max_dx=traj.max_dx,
        monotonicity_violations=_monotonicity_violations(traj, spec.h),
        stop_reason=traj.stop_reason,
    )


@dataclass
class EnsembleResult:
    n_runs: int
    root_seed: int
    horizon: int
    runs: list = field(default_factory=list)

    @property
    def n_flocked(self) -> int:
        return sum(1 for r in self.runs if r.flocked)

    @property
    def flocking_fraction(self) -> float:
        return self.n_flocked / self.n_runs

    @property
    def confidence_interval(self) -> tuple:
        return wilson_interval(self.n_flocked, self.n_runs)

    def to_dict(self) -> dict:
        lo, hi = self.confidence_interval
        return {
            "n_runs": self.n_runs,
            "root_seed": self.root_seed,
            "horizon": self.horizon,
            "n_flocked": self.n_flocked,
            "flocking_fraction": self.flocking_fraction,
            "wilson_95": [lo, hi],
            "total_monotonicity_violations": sum(
                r.monotonicity_violations for r in self.runs
            ),
            "runs": [r.to_dict() for r in self.runs],
        }

    def write_json(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)
            f.write("\n")

    def write_csv(self, path) -> None:
        import csv

        cols = [
            "index",
            "flocked",
            "steps_run",
            "steps_to_tolerance",
            "final_dx",
            "final_dv",
            "max_dx",
            "monotonicity_violations",
            "stop_reason",
            "error",
        ]
        with open(path, "w", newline="") as f:
            wr = csv.writer(f)
            wr.writerow(cols)
            for r in self.runs:
                d = r.to_dict()
                wr.writerow(
                    [
                        repr(d[c]) if isinstance(d[c], float) else d[c]
                        for c in cols
                    ]
                )


def run_ensemble(spec: EnsembleSpec) -> EnsembleResult:
    """Run all paths; results are ordered by run index.

    Individual runs are independent, so the outcome does not depend on the
    worker count, only on (root_seed, index).
    """
    if spec.jobs <= 1 or spec.n_runs == 1:
        runs = [_run_single(spec, i) for i in range(spec.n_runs)]
    else:
        with ProcessPoolExecutor(max_workers=spec.jobs) as pool:
            chunk = max(1, spec.n_runs // (spec.jobs * 4))
            runs = list(
                pool.map(_run_single, [spec] * spec.n_runs, range(spec.n_runs), chunksize=chunk)
            )
    return EnsembleResult(
        n_runs=spec.n_runs, root_seed=spec.root_seed, horizon=spec.horizon, runs=runs
    )


# ---------------------------------------------------------------------------
# empirical estimates for the switching-process bounds


@dataclass
class FractionEstimate:
    fraction: float
    count: int
    n_samples: int
    confidence_interval: tuple

    @property
    def standard_error(self) -> float:
        return math.sqrt(self.fraction * (1.0 - self.fraction) / self.n_samples)


_ROW_CHUNK = 1024


def estimate_a2_violation(
    process: DwellingProcess,
    n: int,
    c: float,
    m_cap: int,
    n_agents: int,
    i_max: int,
    n_samples: int,
    root_seed: int,
) -> FractionEstimate:
    """Fraction of dwell sequences violating some window sum cap, i <= i_max.

    A sequence violates when sum of T_l over window i reaches
    ``m_cap * (n + floor(c log(i (N-1))))`` for some i. Compare against the
    analytic tail bound for the matching process.
    """
    if n_agents < 2:
        raise ValueError("need at least two agents")
    blocks = a_values(n, c, i_max * (n_agents - 1))
    starts = blocks[:: n_agents - 1][:i_max]
    length = int(blocks[-1])
    ii = np.arange(1, i_max + 1)
    thresholds = m_cap * (n + np.floor(c * np.log(ii * (n_agents - 1))).astype(np.int64))

    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(root_seed)))
    count = 0
    done = 0
    while done < n_samples:
        rows = min(_ROW_CHUNK, n_samples - done)
        draws = process.sample_matrix(rows, length, rng)
        sums = np.add.reduceat(draws, starts, axis=1)
        count += int((sums >= thresholds[None, :]).any(axis=1).sum())
        done += rows
    frac = count / n_samples
    return FractionEstimate(frac, count, n_samples, wilson_interval(count, n_samples))


def _rooted_mask_table(ens: TopologyEnsemble):
    memo: dict[int, bool] = {}

    def rooted(mask: int) -> bool:
        if mask not in memo:
            members = [ens.graphs[k] for k in range(ens.n_topologies) if mask >> k & 1]
            memo[mask] = has_spanning_tree(union_graph(members))
        return memo[mask]

    return rooted


def estimate_rooted_windows(
    ens: TopologyEnsemble,
    n: int,
    c: float,
    n_windows: int,
    n_samples: int,
    root_seed: int,
) -> FractionEstimate:
    """Fraction of choice sequences whose first ``n_windows`` star windows
    all have rooted union graphs.

    Compare against the analytic lower bound for the same (n, c).
    """
    if ens.n_topologies > 60:
        raise ValueError("bitmask path supports at most 60 topologies")
    idx = a_values(n, c, n_windows)
    length = int(idx[-1])
    starts = idx[:-1]
    cum_probs = np.cumsum(np.asarray(ens.probs, dtype=float))
    cum_probs[-1] = 1.0
    rooted = _rooted_mask_table(ens)

    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(root_seed)))
    count = 0
    done = 0
    while done < n_samples:
        rows = min(_ROW_CHUNK, n_samples - done)
        u = rng.random((rows, length))
        ks = np.minimum(
            np.searchsorted(cum_probs, u, side="right"), ens.n_topologies - 1
        )
        bits = np.left_shift(np.int64(1), ks.astype(np.int64))
        masks = np.bitwise_or.reduceat(bits, starts, axis=1)
        uniq, inv = np.unique(masks, return_inverse=True)
        ok = np.array([rooted(int(m)) for m in uniq], dtype=bool)[inv].reshape(
            masks.shape
        )
        count += int(ok.all(axis=1).sum())
        done += rows
    frac = count / n_samples
    return FractionEstimate(frac, count, n_samples, wilson_interval(count, n_samples))
