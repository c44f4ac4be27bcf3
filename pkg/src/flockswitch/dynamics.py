"""Discrete velocity-alignment integrator driven by a switching schedule.

One step reads the whole state at time t: positions advance with the
pre-step velocities, and velocities mix through the active topology,

    x_i[t+1] = x_i[t] + h v_i[t]
    v_i[t+1] = v_i[t] + (h/N) sum_j chi_ij phi(||x_j[t] - x_i[t]||) (v_j[t] - v_i[t])

which is the matrix form ``V[t+1] = M[t] V[t]`` with ``M[t]`` the
row-stochastic update matrix built at the pre-step positions. Semi-implicit
variants (updating positions with post-step velocities) are deliberately
not implemented.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .graph import Digraph, TopologyEnsemble, adjacency_matrix
from .kernels import get_kernel
from .matrix import diameter, pairwise_distances, update_matrix
from .switching import SwitchingSchedule, sigma_steps

__all__ = [
    "CommunicationWeight",
    "Configuration",
    "StopCriteria",
    "Trajectory",
    "diameter",
    "step",
    "step_component",
    "simulate",
]

_WEIGHT_KINDS = {"constant": 0, "power_law": 1}


@dataclass(frozen=True)
class CommunicationWeight:
    """Distance kernel weighting the velocity coupling.

    ``constant`` means phi(r) = kappa; ``power_law`` means
    phi(r) = kappa * (1 + r^2)^(-beta). Both are positive, nonincreasing
    and Lipschitz with phi(0) = kappa.
    """

    kind: str
    kappa: float
    beta: float = 0.0

    def __post_init__(self):
        if self.kind not in _WEIGHT_KINDS:
            raise ValueError(f"unknown weight kind {self.kind!r}")
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")
        if self.kind == "constant" and self.beta != 0.0:
            raise ValueError("constant weight takes no beta")

    @classmethod
    def constant(cls, kappa: float) -> "CommunicationWeight":
        return cls("constant", kappa)

    @classmethod
    def power_law(cls, kappa: float, beta: float) -> "CommunicationWeight":
        return cls("power_law", kappa, beta)

    def __call__(self, r):
        if self.kind == "constant":
            return self.kappa * np.ones_like(np.asarray(r, dtype=float))
        r = np.asarray(r, dtype=float)
        # hypot(1, r)^2 = 1 + r^2 without overflowing r*r for huge r
        return self.kappa * np.hypot(1.0, r) ** (-2.0 * self.beta)

    @property
    def tail_exponent(self) -> float:
        """Smallest eps with 1/phi(r) = O(r^eps): 2*beta for power_law, else 0."""
        return 2.0 * self.beta if self.kind == "power_law" else 0.0

    def lipschitz_bound(self) -> float:
        if self.kind == "constant" or self.beta == 0.0:
            return 0.0
        # |phi'| maximized at r^2 = 1/(2 beta + 1)
        b = self.beta
        rstar2 = 1.0 / (2.0 * b + 1.0)
        return 2.0 * self.kappa * b * math.sqrt(rstar2) * (1.0 + rstar2) ** (-(b + 1.0))

    def kernel_args(self) -> tuple[int, float, float]:
        return _WEIGHT_KINDS[self.kind], self.kappa, self.beta


@dataclass
class Configuration:
    """Agent state: positions and velocities as (N, d) arrays."""

    positions: np.ndarray
    velocities: np.ndarray
    t: int = 0

    def __post_init__(self):
        self.positions = np.ascontiguousarray(self.positions, dtype=float)
        self.velocities = np.ascontiguousarray(self.velocities, dtype=float)
        if self.positions.ndim != 2 or self.positions.shape != self.velocities.shape:
            raise ValueError("positions and velocities must be matching (N, d) arrays")
        if not (np.isfinite(self.positions).all() and np.isfinite(self.velocities).all()):
            raise ValueError("state must be finite")

    @property
    def n_agents(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    def copy(self) -> "Configuration":
        return Configuration(self.positions.copy(), self.velocities.copy(), self.t)


@dataclass(frozen=True)
class StopCriteria:
    """Early-exit thresholds for a run.

    Absolute values win when given; otherwise ``v_tol_rel`` scales the
    initial velocity diameter and ``x_cap_factor`` scales the initial
    position diameter plus one. A run counts as flocked when the velocity
    diameter falls to v_tol; hitting x_cap flags divergence.
    """

    v_tol: float | None = None
    x_cap: float | None = None
    v_tol_rel: float = 1e-8
    x_cap_factor: float = 1e6

    def resolve(self, dx0: float, dv0: float) -> tuple[float, float]:
        v_tol = self.v_tol if self.v_tol is not None else self.v_tol_rel * dv0
        x_cap = self.x_cap if self.x_cap is not None else self.x_cap_factor * (dx0 + 1.0)
        return float(v_tol), float(x_cap)


_STOP_REASONS = {0: "horizon", 1: "flocked", 2: "diverged"}


@dataclass
class Trajectory:
    """Per-step diagnostics of one run.

    ``dx[t]``/``dv[t]`` are the configuration diameters at step t for
    t = 0..steps; ``sigma[t]`` is the 0-based topology index applied on
    [t, t+1) for t = 0..steps-1. Full state snapshots are kept every
    ``snapshot_stride`` steps plus the final state; complete histories are
    only stored when requested.
    """

    dx: np.ndarray
    dv: np.ndarray
    sigma: np.ndarray
    final: Configuration
    stop_reason: str
    snapshots: list = field(default_factory=list)
    positions_history: np.ndarray | None = None
    velocities_history: np.ndarray | None = None

    @property
    def steps(self) -> int:
        return len(self.dx) - 1

    @property
    def max_dx(self) -> float:
        return float(self.dx.max())

    @property
    def flocked(self) -> bool:
        return self.stop_reason == "flocked"

    def steps_to_tolerance(self, v_tol: float) -> int | None:
        hits = np.nonzero(self.dv <= v_tol)[0]
        return int(hits[0]) if len(hits) else None

    def to_csv(self, path) -> None:
        """Columns t, DX, DV, sigma (1-based; 0 on the final row, no step taken)."""
        with open(path, "w", newline="") as f:
            wr = csv.writer(f)
            wr.writerow(["t", "DX", "DV", "sigma"])
            for t in range(self.steps + 1):
                sig = int(self.sigma[t]) + 1 if t < self.steps else 0
                wr.writerow([t, repr(float(self.dx[t])), repr(float(self.dv[t])), sig])

    def summary(self) -> dict:
        return {
            "steps": self.steps,
            "stop_reason": self.stop_reason,
            "flocked": self.flocked,
            "final_dx": float(self.dx[-1]),
            "final_dv": float(self.dv[-1]),
            "max_dx": self.max_dx,
        }


def step(cfg: Configuration, g: Digraph, h: float, w: CommunicationWeight) -> Configuration:
    """One integrator step in matrix form: X += hV, then V <- M V."""
    m = update_matrix(cfg.positions, g, h, w)
    return Configuration(
        cfg.positions + h * cfg.velocities,
        m @ cfg.velocities,
        cfg.t + 1,
    )


def step_component(
    cfg: Configuration, g: Digraph, h: float, w: CommunicationWeight
) -> Configuration:
    """One integrator step summed component-wise; cross-check for `step`."""
    if not 0.0 < h * w.kappa < 1.0:
        raise ValueError("stability condition violated: need 0 < h*kappa < 1")
    x, v = cfg.positions, cfg.velocities
    n = cfg.n_agents
    chi = adjacency_matrix(g)
    wij = chi * w(pairwise_distances(x))
    accel = (h / n) * (wij[:, :, None] * (v[None, :, :] - v[:, None, :])).sum(axis=1)
    return Configuration(x + h * v, v + accel, cfg.t + 1)


def simulate(
    init: Configuration,
    ens: TopologyEnsemble,
    sched: SwitchingSchedule,
    h: float,
    w: CommunicationWeight,
    horizon: int,
    stop: StopCriteria | None = None,
    *,
    kernel: str = "auto",
    snapshot_stride: int = 100,
    record_states: bool = False,
) -> Trajectory:
    """Run the integrator for up to ``horizon`` steps under a schedule.

    Diameters are recorded every step; the run exits early when the
    velocity diameter reaches the flocking tolerance or the position
    diameter hits the divergence cap.
    """
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    if snapshot_stride < 1:
        raise ValueError("snapshot_stride must be >= 1")
    if sched.coverage < horizon:
        raise ValueError("insufficient schedule")
    if not 0.0 < h * w.kappa < 1.0:
        raise ValueError("stability condition violated: need 0 < h*kappa < 1")
    if init.n_agents != ens.n_vertices:
        raise ValueError("initial state and topologies disagree on N")
    stop = stop or StopCriteria()

    x = init.positions.copy()
    v = init.velocities.copy()
    n, d = x.shape
    dx = np.zeros(horizon + 1)
    dv = np.zeros(horizon + 1)
    dx[0] = diameter(x)
    dv[0] = diameter(v)
    v_tol, x_cap = stop.resolve(dx[0], dv[0])

    sigma = np.ascontiguousarray(sigma_steps(sched, horizon), dtype=np.int64)
    adj = np.ascontiguousarray(ens.adjacency_stack(), dtype=float)
    xhist = vhist = None
    if record_states:
        nbytes = 2 * (horizon + 1) * n * d * 8
        if nbytes > 4 << 30:
            raise ValueError(
                f"record_states would allocate {nbytes / 2**30:.1f} GiB; "
                "reduce the horizon or audit a shorter run"
            )
        xhist = np.zeros((horizon + 1, n, d))
        vhist = np.zeros((horizon + 1, n, d))
        xhist[0] = x
        vhist[0] = v

    kind, kappa, beta = w.kernel_args()
    k = get_kernel(kernel)
    snapshots = [(0, x.copy(), v.copy())]

    reason = 0
    t = 0
    if dv[0] <= v_tol:
        reason = 1
    elif dx[0] >= x_cap:
        reason = 2
    else:
        while t < horizon:
            seg_end = min(t + snapshot_stride, horizon)
            t, reason = k.run_segment(
                x, v, adj, sigma, t, seg_end, h, kind, kappa, beta,
                dx, dv, v_tol, x_cap, xhist, vhist,
            )
            if reason != 0:
                break
            if t < horizon:
                snapshots.append((t, x.copy(), v.copy()))

    dx = dx[: t + 1]
    dv = dv[: t + 1]
    final = Configuration(x.copy(), v.copy(), t)
    if snapshots[-1][0] != t:
        snapshots.append((t, x.copy(), v.copy()))
    return Trajectory(
        dx=dx,
        dv=dv,
        sigma=sigma[:t],
        final=final,
        stop_reason=_STOP_REASONS[reason],
        snapshots=snapshots,
        positions_history=xhist[: t + 1] if record_states else None,
        velocities_history=vhist[: t + 1] if record_states else None,
    )
