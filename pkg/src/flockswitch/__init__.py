"""Flocking under randomly switching directed network topologies.

A discrete velocity-alignment model where the communication digraph is
redrawn at random switching instants from an admissible set. The package
simulates sample paths, evaluates every closed-form contraction and tail
bound of the underlying convergence framework, and estimates the flocking
probability by seeded Monte Carlo.
"""
from .graph import Digraph, TopologyEnsemble, adjacency_matrix, has_spanning_tree, union_graph
from .matrix import (
    contraction_check,
    diameter,
    ergodicity_coefficient,
    flow_product,
    is_scrambling,
    is_stochastic,
    update_matrix,
)
from .switching import (
    DeterministicDwelling,
    GeometricDwelling,
    PoissonDwelling,
    SwitchingSchedule,
    a_sequence,
    generate_schedule,
    sample_dwelling,
    topology_at,
    window_dwell_sum,
)
from .dynamics import (
    CommunicationWeight,
    Configuration,
    StopCriteria,
    Trajectory,
    simulate,
    step,
)
from .analysis import (
    BoundReport,
    FrameworkParams,
    audit_path,
    check_continuous_flocking_conditions,
    check_flocking_conditions,
    dwell_tail_bound_geometric,
    dwell_tail_bound_poisson,
    ergodicity_lower_bound,
    exp_inequality,
    rooted_windows_lower_bound,
    solve_spatial_bound,
    velocity_decay_envelope,
)
from .montecarlo import (
    EnsembleSpec,
    EnsembleResult,
    InitialCondition,
    estimate_a2_violation,
    estimate_rooted_windows,
    run_ensemble,
)
from .kernels import HAVE_COMPILED

__version__ = "0.1.0"
