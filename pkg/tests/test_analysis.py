import dataclasses
import math

import numpy as np
import pytest

from flockswitch.analysis import (
    FrameworkParams,
    audit_path,
    check_continuous_flocking_conditions,
    check_flocking_conditions,
    default_delta,
    dwell_tail_bound_geometric,
    dwell_tail_bound_poisson,
    ergodicity_lower_bound,
    exp_inequality,
    geometric_cap_constant,
    rooted_windows_lower_bound,
    smallest_valid_m_geometric,
    smallest_valid_m_poisson,
    solve_spatial_bound,
    spatial_bound_lhs,
    velocity_decay_envelope,
)
from flockswitch.dynamics import CommunicationWeight, StopCriteria
from flockswitch.graph import Digraph, TopologyEnsemble
from flockswitch.montecarlo import EnsembleSpec, InitialCondition, run_path
from flockswitch.switching import GeometricDwelling

CONST = CommunicationWeight.constant(1.0)


def params(**kw):
    base = dict(
        n_agents=2,
        h=0.01,
        kappa=1.0,
        probs=(0.5, 0.5),
        window_base=1,
        log_coeff=1.0,
        dwell_cap=1,
    )
    base.update(kw)
    return FrameworkParams(**base)


# ---------------------------------------------------------- condition checks


def test_flocking_conditions_example():
    rep = check_flocking_conditions(params())
    # (M+N-1) log(1/(1-h kappa)) / log 2 with M=1, N=2, h kappa = 0.01
    assert rep.values["ratio"] == pytest.approx(0.028999139390230153, rel=1e-12)
    assert rep.passed


def test_flocking_conditions_skewed_probs():
    # min_k log(1/(1-p_k)) is set by the rare topology
    rep = check_flocking_conditions(params(probs=(0.99, 0.01)))
    assert rep.values["ratio"] == pytest.approx(
        2 * math.log(1 / 0.99) / math.log(1 / 0.99), rel=1e-12
    )
    assert rep.values["ratio"] == pytest.approx(2.0, rel=1e-12)
    assert not rep.passed


def test_flocking_conditions_small_coupling_passes():
    rep = check_flocking_conditions(params(h=1e-6))
    assert rep.values["ratio"] < 1e-4
    assert rep.passed


def test_flocking_conditions_unstable_step():
    rep = check_flocking_conditions(params(h=1.0, kappa=2.0))
    assert not rep.passed
    assert rep.conditions[0][1] is False


def test_flocking_conditions_epsilon_window():
    p = params(h=0.001, tail_exponent=0.5)
    rep = check_flocking_conditions(p)
    assert rep.passed
    p = params(h=0.001, tail_exponent=2.0)  # above 1/(N-1)
    rep = check_flocking_conditions(p)
    assert not rep.passed


def test_continuous_conditions_example():
    rep = check_continuous_flocking_conditions(2, 1.0, 0.1, 0.5, (0.5, 0.5), 0.0)
    assert rep.values["ratio"] == pytest.approx(0.86561702453337804, rel=1e-12)
    assert rep.passed


def test_continuous_conditions_small_kappa_passes():
    rep = check_continuous_flocking_conditions(4, 1e-6, 0.1, 0.5, (0.25,) * 4, 0.0)
    assert rep.passed


def test_single_topology_certain_choice():
    # p_k = 1 makes min_k log(1/(1-p_k)) infinite: conditions hold trivially
    p = params(probs=(1.0,), n_agents=3)
    rep = check_flocking_conditions(p)
    assert rep.passed and rep.values["ratio"] == 0.0
    ens = TopologyEnsemble.uniform([Digraph.complete(3)])
    assert rooted_windows_lower_bound(5, 1.0, ens).value == 1.0


# -------------------------------------------------------- contraction bounds


def test_ergodicity_lower_bound_value():
    p = params(h=0.1, x_bound=1.0)
    assert ergodicity_lower_bound(10, p, CONST) == pytest.approx(
        0.01937102445, rel=1e-12
    )


def test_ergodicity_lower_bound_degenerate_and_monotone():
    p = params(n_agents=1, h=0.1, x_bound=1.0)
    assert ergodicity_lower_bound(0, p, CONST) == pytest.approx(1.0)
    p = params(h=0.1, x_bound=1.0)
    vals = [ergodicity_lower_bound(k, p, CONST) for k in range(20)]
    assert (np.diff(vals) < 0).all()


def test_envelope_frozen_value():
    p = params(h=0.1, window_base=2, x_bound=1.0)
    assert velocity_decay_envelope(0, p, CONST) == pytest.approx(1.0)
    assert velocity_decay_envelope(5, p, CONST) == pytest.approx(
        0.8660858106512512, rel=1e-12
    )


def test_envelope_decreasing_to_zero():
    p = params(h=0.1, window_base=2, x_bound=1.0)
    vals = [velocity_decay_envelope(r, p, CONST) for r in range(0, 2000, 50)]
    assert (np.diff(vals) < 0).all()
    assert vals[-1] < 1e-6


def test_envelope_divergent_exponent_rejected():
    p = params(h=0.5, kappa=1.9, log_coeff=10.0, x_bound=1.0)
    assert p.envelope_exponent <= 0
    with pytest.raises(ValueError, match="divergent envelope exponent"):
        velocity_decay_envelope(3, p, CONST)


def test_exp_inequality_tight_at_delta():
    for delta in (0.5, 1.0, 3.7):
        lhs, rhs = exp_inequality(delta, delta)
        assert lhs == pytest.approx(rhs, rel=1e-12)
    lhs, rhs = exp_inequality(1.0, 1.0)
    assert lhs == pytest.approx(0.36787944117144233, rel=1e-15)
    assert rhs == pytest.approx(0.36787944117144233, rel=1e-12)


def test_exp_inequality_grid_sweep():
    xs = np.geomspace(0.01, 100.0, 60)
    deltas = np.geomspace(0.1, 10.0, 40)
    worst = 0.0
    for x in xs:
        for d in deltas:
            lhs, rhs = exp_inequality(float(x), float(d))
            worst = max(worst, lhs - rhs)
    assert worst <= 0.0


def test_default_delta():
    p = params(h=0.1, window_base=2)  # eps = 0
    a = p.envelope_exponent
    assert default_delta(p) == pytest.approx(2.0 / a)
    p = dataclasses.replace(p, n_agents=3, tail_exponent=0.1)
    a = p.envelope_exponent
    lo, hi = 1.0 / a, 1.0 / (2 * 0.1)
    assert lo < default_delta(p) < hi
    with pytest.raises(ValueError, match="empty delta interval"):
        default_delta(dataclasses.replace(p, tail_exponent=5.0))


# ---------------------------------------------------------- spatial bound


def spatial_params(**kw):
    base = dict(
        n_agents=3,
        h=0.2,
        kappa=1.0,
        probs=(0.5, 0.5),
        window_base=2,
        log_coeff=0.5,
        dwell_cap=1,
    )
    base.update(kw)
    return FrameworkParams(**base)


def test_spatial_bound_constant_weight():
    # constant phi makes the functional constant in x: solution = its value
    p = spatial_params()
    lhs = spatial_bound_lhs(1.0, p, CONST, 1.0, 1.0)
    lhs2 = spatial_bound_lhs(100.0, p, CONST, 1.0, 1.0)
    assert lhs.value == pytest.approx(lhs2.value, rel=1e-12)
    x = solve_spatial_bound(p, CONST, 1.0, 1.0)
    assert x == pytest.approx(lhs.value, rel=1e-5)
    assert spatial_bound_lhs(x, p, CONST, 1.0, 1.0).value < x


def test_spatial_bound_no_motion():
    p = spatial_params()
    assert spatial_bound_lhs(5.0, p, CONST, 2.5, 0.0).value == 2.5
    assert solve_spatial_bound(p, CONST, 2.5, 0.0) == pytest.approx(2.5, rel=1e-9)


def test_spatial_bound_power_law_certified():
    w = CommunicationWeight.power_law(1.0, 0.05)
    p = spatial_params(tail_exponent=w.tail_exponent)
    d = default_delta(p)
    assert (p.n_agents - 1) * d * w.tail_exponent < 1.0
    x = solve_spatial_bound(p, w, 1.0, 1.0)
    assert x is not None
    again = spatial_bound_lhs(x, p, w, 1.0, 1.0)
    assert again.value < x


def test_spatial_bound_rejects_bad_delta():
    p = spatial_params(delta=0.1)  # below the admissible interval
    with pytest.raises(ValueError, match="series divergent"):
        spatial_bound_lhs(1.0, p, CONST, 1.0, 1.0)


def test_spatial_bound_ceiling_gives_none():
    p = spatial_params()
    assert solve_spatial_bound(p, CONST, 1.0, 1.0, ceiling=2.0) is None


# ------------------------------------------------- switching-process bounds


def ensemble_two():
    return TopologyEnsemble(
        (Digraph.from_edges(3, [(0, 1)]), Digraph.from_edges(3, [(0, 2)])),
        (0.6, 0.4),
    )


def test_rooted_windows_bound_frozen_value():
    c = 1.2 * max(-1.0 / math.log(0.4), -1.0 / math.log(0.6))
    assert c == pytest.approx(2.3491382267654612, rel=1e-12)
    p1 = rooted_windows_lower_bound(10, c, ensemble_two())
    assert p1.value == pytest.approx(0.9426407736593753, rel=1e-9)
    # truncation must not push a lower bound up
    assert p1.value <= 0.9426407736593753 * (1 + 1e-12)


def test_rooted_windows_bound_monotone_to_one():
    c = 2.5
    vals = [rooted_windows_lower_bound(n, c, ensemble_two()).value for n in (5, 10, 20, 40)]
    assert (np.diff(vals) > 0).all()
    assert vals[-1] > 0.9999


def test_rooted_windows_bound_hypotheses():
    with pytest.raises(ValueError, match="increase n"):
        rooted_windows_lower_bound(1, 2.5, ensemble_two())
    with pytest.raises(ValueError, match="topology 2"):
        # c below the floor for the rarer topology (p=0.4, needs c > 1.9576)
        rooted_windows_lower_bound(10, 1.5, ensemble_two())


def test_rooted_windows_direct_sum_bracket():
    # independent check: direct partial sum brackets the grouped evaluation
    c = 2.3491382267654612
    q = 0.4
    ells = np.arange(200_000)
    direct = (q ** np.floor(c * np.log(ells + 1.0))).sum()
    s_dec = -c * math.log(q)
    tail_ub = (1 / q) * len(ells) ** (1 - s_dec) / (s_dec - 1)
    from flockswitch.analysis import _floor_log_power_sum

    grouped = _floor_log_power_sum(q, c)
    assert direct <= grouped.value <= direct + tail_ub


def test_poisson_tail_bound_frozen_values():
    m = smallest_valid_m_poisson(1.0, 3, 1.0)
    assert m == 7
    expected = {
        10: 3.2777242831315019e-9,
        20: 4.7963188837259882e-17,
        40: 1.4524269846714598e-32,
    }
    prev = 1.0
    for n, val in expected.items():
        got = dwell_tail_bound_poisson(n, 1.0, m, 3, 1.0)
        assert got.value == pytest.approx(val, rel=1e-9)
        assert got.value >= val * (1 - 1e-12)  # upper bound stays upper
        assert got.value < prev
        prev = got.value


def test_poisson_tail_bound_hypotheses():
    with pytest.raises(ValueError, match="increase M"):
        dwell_tail_bound_poisson(10, 1.0, 5, 3, 1.0)  # M <= (N-1) e
    with pytest.raises(ValueError, match="increase M"):
        dwell_tail_bound_poisson(10, 0.05, 6, 3, 1.0)  # series exponent <= 1


def test_geometric_tail_bound_frozen_values():
    m = smallest_valid_m_geometric(1.0, 3, 0.9)
    assert m == 2
    assert geometric_cap_constant(2, 3, 0.9) == pytest.approx(4.0 / 9.0, rel=1e-12)
    expected = {
        10: 2.0284025253855610e-7,
        20: 1.8344411350866602e-14,
        40: 1.5003861823116414e-28,
    }
    for n, val in expected.items():
        got = dwell_tail_bound_geometric(n, 1.0, m, 3, 0.9)
        assert got.value == pytest.approx(val, rel=1e-9)
        assert got.value >= val * (1 - 1e-12)


def test_geometric_cap_constant_limit():
    # C(M) decreases toward (1-p)/p for large M
    vals = [geometric_cap_constant(m, 3, 0.9) for m in (1, 2, 5, 20, 200, 2000)]
    assert (np.diff(vals) < 0).all()
    assert vals[-1] == pytest.approx(1.0 / 9.0, rel=1e-2)


def test_geometric_tail_bound_nearly_sure_switching():
    got = dwell_tail_bound_geometric(10, 1.0, 2, 3, 0.999)
    assert got.value < 1e-25


def test_zeta_series_against_scipy():
    from scipy.special import zeta as scipy_zeta

    from flockswitch.analysis import _p_series_upper

    for s in (1.62186043243265753, 1.7693407794675760, 2.5, 4.0):
        got = _p_series_upper(s)
        assert got.value == pytest.approx(float(scipy_zeta(s)), rel=1e-10)
        assert got.value >= float(scipy_zeta(s)) * (1 - 1e-14)


# ----------------------------------------------------------------- audits


def three_piece_ring_ensemble():
    g1 = Digraph.from_edges(5, [(0, 1), (1, 2)])
    g2 = Digraph.from_edges(5, [(2, 3)])
    g3 = Digraph.from_edges(5, [(3, 4), (4, 0)])
    return TopologyEnsemble.uniform([g1, g2, g3])


def test_audit_path_no_violations():
    ens = three_piece_ring_ensemble()
    spec = EnsembleSpec(
        ensemble=ens,
        process=GeometricDwelling(0.9),
        weight=CONST,
        h=0.1,
        init=InitialCondition(5, 2),
        horizon=1500,
        n_runs=1,
        root_seed=77,
        stop=StopCriteria(v_tol=0.0, x_cap=1e15),
    )
    traj, sched = run_path(spec, 0, return_schedule=True, record_states=True)
    audit = audit_path(traj, sched, ens, 0.1, CONST, n=20, c=1.0, m_cap=3)
    assert audit.n_windows >= 5
    assert audit.mu_violations == 0
    assert audit.stochasticity_violations == 0
    assert audit.envelope_violations == 0
    for wnd in audit.windows:
        assert wnd.mu_floor > 0
        assert wnd.flow_stochastic


def test_audit_path_power_law_weight():
    # the window floor uses the weight at the measured diameter bound, which
    # undercuts every realized coupling along the path
    ens = three_piece_ring_ensemble()
    w = CommunicationWeight.power_law(1.0, 0.6)
    spec = EnsembleSpec(
        ensemble=ens,
        process=GeometricDwelling(0.9),
        weight=w,
        h=0.1,
        init=InitialCondition(5, 2),
        horizon=1200,
        n_runs=8,
        root_seed=31337,
        stop=StopCriteria(v_tol=-1.0, x_cap=np.inf),
    )
    for i in range(spec.n_runs):
        traj, sched = run_path(spec, i, return_schedule=True, record_states=True)
        audit = audit_path(traj, sched, ens, spec.h, w, n=20, c=1.0, m_cap=3)
        assert audit.mu_violations == 0
        assert audit.envelope_violations == 0
        assert audit.stochasticity_violations == 0


def test_audit_requires_history():
    ens = three_piece_ring_ensemble()
    spec = EnsembleSpec(
        ensemble=ens,
        process=GeometricDwelling(0.9),
        weight=CONST,
        h=0.1,
        init=InitialCondition(5, 2),
        horizon=100,
        n_runs=1,
        root_seed=1,
    )
    traj, sched = run_path(spec, 0, return_schedule=True)
    with pytest.raises(ValueError, match="record_states"):
        audit_path(traj, sched, ens, 0.1, CONST, n=5, c=1.0, m_cap=3)
