"""Experiment configuration: one JSON document describing a whole run.

Vertices and topology indices are 1-indexed in the file and in every
exported artifact; the in-memory objects are 0-indexed. ``parse ->
serialize -> parse`` is the identity, and ``config_hash`` fingerprints the
canonical serialization so outputs can cite the exact inputs.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, replace

from .analysis import FrameworkParams, default_delta
from .dynamics import CommunicationWeight, StopCriteria
from .graph import Digraph, TopologyEnsemble
from .montecarlo import EnsembleSpec, InitialCondition
from .switching import (
    DeterministicDwelling,
    DwellingProcess,
    GeometricDwelling,
    PoissonDwelling,
)


class ConfigError(Exception):
    """Structurally invalid configuration (usage error, exit code 2)."""


def _require(mapping: dict, key: str, where: str):
    if key not in mapping:
        raise ConfigError(f"missing key {key!r} in {where}")
    return mapping[key]


@dataclass(frozen=True)
class AgentsConfig:
    n: int
    dim: int
    positions: tuple | None = None
    velocities: tuple | None = None
    position_box: tuple = (-1.0, 1.0)
    velocity_box: tuple = (-1.0, 1.0)


@dataclass(frozen=True)
class WeightConfig:
    kind: str = "constant"
    kappa: float = 1.0
    beta: float = 0.0


@dataclass(frozen=True)
class TopologiesConfig:
    edges: tuple = ()  # per graph: tuple of (j, i) 1-indexed pairs
    probs: tuple | None = None


@dataclass(frozen=True)
class DwellingConfig:
    kind: str = "deterministic"
    rate: float | None = None
    success_prob: float | None = None
    value: int | None = None


@dataclass(frozen=True)
class FrameworkConfig:
    n: int = 10
    c: float = 1.0
    m: int = 1
    epsilon: float | None = None
    delta: float | None = None
    x_bound: float | None = None


@dataclass(frozen=True)
class RunConfig:
    horizon: int = 1000
    seed: int | None = None
    runs: int = 100
    jobs: int = 1
    v_tol_rel: float = 1e-8
    x_cap_factor: float = 1e6
    snapshot_stride: int = 100
    out_dir: str = "."


@dataclass(frozen=True)
class GridsConfig:
    n: tuple = (10, 20, 40)
    r: tuple = (1, 2, 5, 10, 20, 50)


@dataclass(frozen=True)
class ExperimentConfig:
    agents: AgentsConfig
    weight: WeightConfig
    h: float
    topologies: TopologiesConfig
    dwelling: DwellingConfig
    framework: FrameworkConfig = FrameworkConfig()
    run: RunConfig = RunConfig()
    grids: GridsConfig = GridsConfig()

    # -- construction of domain objects (module preconditions apply here) --

    def build_weight(self) -> CommunicationWeight:
        return CommunicationWeight(self.weight.kind, self.weight.kappa, self.weight.beta)

    def build_ensemble(self) -> TopologyEnsemble:
        n = self.agents.n
        graphs = []
        for gi, edge_list in enumerate(self.topologies.edges):
            try:
                edges = frozenset((int(j) - 1, int(i) - 1) for (j, i) in edge_list)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad edge list for topology {gi + 1}: {exc}") from exc
            graphs.append(Digraph(n, edges))
        if self.topologies.probs is None:
            return TopologyEnsemble.uniform(graphs)
        return TopologyEnsemble(tuple(graphs), tuple(self.topologies.probs))

    def build_process(self) -> DwellingProcess:
        d = self.dwelling
        if d.kind == "poisson":
            if d.rate is None:
                raise ConfigError("poisson dwelling needs 'rate'")
            return PoissonDwelling(d.rate)
        if d.kind == "geometric":
            if d.success_prob is None:
                raise ConfigError("geometric dwelling needs 'success_prob'")
            return GeometricDwelling(d.success_prob)
        if d.kind == "deterministic":
            if d.value is None:
                raise ConfigError("deterministic dwelling needs 'value'")
            return DeterministicDwelling(d.value)
        raise ConfigError(f"unknown dwelling kind {d.kind!r}")

    def build_params(self) -> FrameworkParams:
        weight = self.build_weight()
        ens = self.build_ensemble()
        eps = self.framework.epsilon
        if eps is None:
            eps = weight.tail_exponent
        params = FrameworkParams(
            n_agents=self.agents.n,
            h=self.h,
            kappa=weight.kappa,
            probs=ens.probs,
            window_base=self.framework.n,
            log_coeff=self.framework.c,
            dwell_cap=self.framework.m,
            tail_exponent=eps,
            delta=self.framework.delta,
            x_bound=self.framework.x_bound,
        )
        if params.delta is None and 0.0 < params.hk < 1.0:
            try:
                if params.envelope_exponent > 0:
                    params = replace(params, delta=default_delta(params))
            except ValueError:
                pass  # no admissible delta; leave unset
        return params

    def build_init(self) -> InitialCondition:
        a = self.agents
        return InitialCondition(
            n_agents=a.n,
            dim=a.dim,
            positions=None if a.positions is None else a.positions,
            velocities=None if a.velocities is None else a.velocities,
            position_box=a.position_box,
            velocity_box=a.velocity_box,
        )

    def build_stop(self) -> StopCriteria:
        return StopCriteria(
            v_tol_rel=self.run.v_tol_rel, x_cap_factor=self.run.x_cap_factor
        )

    def build_spec(
        self,
        root_seed: int,
        n_runs: int | None = None,
        horizon: int | None = None,
        jobs: int | None = None,
        kernel: str = "auto",
    ) -> EnsembleSpec:
        return EnsembleSpec(
            ensemble=self.build_ensemble(),
            process=self.build_process(),
            weight=self.build_weight(),
            h=self.h,
            init=self.build_init(),
            horizon=horizon if horizon is not None else self.run.horizon,
            n_runs=n_runs if n_runs is not None else self.run.runs,
            root_seed=root_seed,
            stop=self.build_stop(),
            jobs=jobs if jobs is not None else self.run.jobs,
            kernel=kernel,
        )

    # -- serialization --

    def to_dict(self) -> dict:
        def scrub(obj):
            if isinstance(obj, tuple):
                return [scrub(x) for x in obj]
            if isinstance(obj, dict):
                return {k: scrub(v) for k, v in obj.items()}
            return obj

        return scrub(asdict(self))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def config_hash(cfg: ExperimentConfig) -> str:
    canonical = json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def _tupleize(obj):
    if isinstance(obj, list):
        return tuple(_tupleize(x) for x in obj)
    return obj


def _section(data: dict, name: str, cls, required: bool, where: str):
    if name not in data:
        if required:
            raise ConfigError(f"missing section {name!r} in {where}")
        return cls()
    raw = data[name]
    if not isinstance(raw, dict):
        raise ConfigError(f"section {name!r} must be an object")
    fields = {f.name for f in cls.__dataclass_fields__.values()}
    unknown = set(raw) - fields
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)} in section {name!r}")
    try:
        return cls(**{k: _tupleize(v) for k, v in raw.items()})
    except TypeError as exc:
        raise ConfigError(f"bad section {name!r}: {exc}") from exc


def parse_config(data: dict) -> ExperimentConfig:
    """Structural parse of a config document; raises ConfigError on misuse."""
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    known = {"agents", "weight", "h", "topologies", "dwelling", "framework", "run", "grids"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
    agents = _section(data, "agents", AgentsConfig, True, "config")
    if agents.n < 1 or agents.dim < 1:
        raise ConfigError("agents.n and agents.dim must be positive")
    h = _require(data, "h", "config")
    if not isinstance(h, (int, float)) or h <= 0:
        raise ConfigError("h must be a positive number")
    topo = _section(data, "topologies", TopologiesConfig, True, "config")
    if len(topo.edges) == 0:
        raise ConfigError("topologies.edges must list at least one edge list")
    return ExperimentConfig(
        agents=agents,
        weight=_section(data, "weight", WeightConfig, False, "config"),
        h=float(h),
        topologies=topo,
        dwelling=_section(data, "dwelling", DwellingConfig, True, "config"),
        framework=_section(data, "framework", FrameworkConfig, False, "config"),
        run=_section(data, "run", RunConfig, False, "config"),
        grids=_section(data, "grids", GridsConfig, False, "config"),
    )


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as f:
            data = json.load(f)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    return parse_config(data)
