import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flockswitch.graph import Digraph, TopologyEnsemble
from flockswitch.switching import (
    DeterministicDwelling,
    GeometricDwelling,
    PoissonDwelling,
    SwitchingSchedule,
    a_sequence,
    a_values,
    generate_schedule,
    sample_dwelling,
    sigma_steps,
    star_times,
    topology_at,
    window_dwell_sum,
)


def make_rng(seed=0):
    return np.random.Generator(np.random.PCG64(seed))


def two_graph_ensemble(n=3, probs=(0.5, 0.5)):
    return TopologyEnsemble(
        (Digraph.from_edges(n, [(0, 1)]), Digraph.from_edges(n, [(0, 2)])), probs
    )


# ---------------------------------------------------------------- a sequence


def test_a_sequence_base_cases():
    for n, c in [(1, 0.5), (3, 2.0), (7, 10.0)]:
        assert a_sequence(n, c, 0) == 0
        assert a_sequence(n, c, 1) == n


def test_a_sequence_hand_value():
    # a_2(2,3) = 2 + 2 + floor(3 log 2) = 6
    assert a_sequence(2, 3.0, 2) == 6


@settings(max_examples=100, deadline=None)
@given(n=st.integers(1, 10), c=st.floats(0.1, 10.0), count=st.integers(1, 60))
def test_a_sequence_increasing_and_linear_floor(n, c, count):
    vals = a_values(n, c, count)
    assert (np.diff(vals) >= n).all()
    assert all(vals[ell] >= ell * n for ell in range(count + 1))


def test_a_sequence_validation():
    with pytest.raises(ValueError):
        a_sequence(0, 1.0, 1)
    with pytest.raises(ValueError):
        a_sequence(1, 0.0, 1)
    with pytest.raises(ValueError):
        a_sequence(1, 1.0, -1)


# ---------------------------------------------------------------- dwellings


def test_deterministic_dwelling():
    p = DeterministicDwelling(0)
    assert all(sample_dwelling(p, ell, make_rng()) == 0 for ell in range(5))
    assert DeterministicDwelling(3).sample_block(0, 4, make_rng()).tolist() == [3, 3, 3, 3]
    with pytest.raises(ValueError):
        DeterministicDwelling(-1)


def test_geometric_certain_success():
    p = GeometricDwelling(1.0)
    assert p.sample_block(0, 1000, make_rng()).max() == 0


def test_geometric_requires_min_over_half():
    with pytest.raises(ValueError, match="1/2"):
        GeometricDwelling(0.5)
    GeometricDwelling(0.51)


def test_geometric_moments():
    p = 0.75
    draws = GeometricDwelling(p).sample_block(0, 100_000, make_rng(3))
    mean, var = (1 - p) / p, (1 - p) / p**2
    assert draws.mean() == pytest.approx(mean, abs=3 * math.sqrt(var / len(draws)))
    assert draws.min() >= 0


def test_poisson_moments():
    lam = 2.0
    draws = PoissonDwelling(lam).sample_block(0, 100_000, make_rng(4))
    n = len(draws)
    assert draws.mean() == pytest.approx(lam, abs=3 * math.sqrt(lam / n))
    # var of the sample variance for Poisson: (mu4 - sigma^4)/n with mu4 = lam(1+3lam)
    mu4 = lam * (1 + 3 * lam)
    se_var = math.sqrt((mu4 - lam**2) / n)
    assert draws.var() == pytest.approx(lam, abs=3 * se_var)


def test_poisson_large_rate_split():
    lam = 45.0  # exercised through the rate-splitting path
    draws = PoissonDwelling(lam).sample_block(0, 60_000, make_rng(5))
    n = len(draws)
    assert draws.mean() == pytest.approx(lam, abs=3 * math.sqrt(lam / n))
    mu4 = lam * (1 + 3 * lam)
    assert draws.var() == pytest.approx(lam, abs=3 * math.sqrt((mu4 - lam**2) / n))


def test_poisson_validation():
    with pytest.raises(ValueError):
        PoissonDwelling(0.0)
    with pytest.raises(ValueError):
        PoissonDwelling(lambda ell: 1.0)  # missing rate_max


def test_varying_rate_sequences():
    p = PoissonDwelling(lambda ell: 0.5 + 0.1 * (ell % 3), rate_max=0.8)
    block = p.sample_block(0, 10, make_rng(6))
    assert block.shape == (10,)
    g = GeometricDwelling(lambda ell: 0.9 if ell % 2 else 0.8, prob_min=0.8)
    mat = g.sample_matrix(5, 6, make_rng(7))
    assert mat.shape == (5, 6)


# ---------------------------------------------------------------- schedules


def test_schedule_every_step_switching():
    ens = two_graph_ensemble()
    s = generate_schedule(ens, DeterministicDwelling(0), 5, 0)
    assert s.instants.tolist() == [0, 1, 2, 3, 4, 5]
    assert len(s.choices) == 6
    assert s.dwell_draws.tolist() == [0] * 5


def test_schedule_single_topology():
    ens = TopologyEnsemble.uniform([Digraph.complete(3)])
    s = generate_schedule(ens, GeometricDwelling(0.9), 50, 1)
    assert set(s.choices.tolist()) == {0}


def test_schedule_deterministic_in_seed():
    ens = two_graph_ensemble()
    p = PoissonDwelling(1.5)
    s1 = generate_schedule(ens, p, 1000, 42)
    s2 = generate_schedule(ens, p, 1000, 42)
    assert np.array_equal(s1.instants, s2.instants)
    assert np.array_equal(s1.choices, s2.choices)
    assert np.array_equal(s1.dwell_draws, s2.dwell_draws)
    s3 = generate_schedule(ens, p, 1000, 43)
    assert not np.array_equal(s1.instants, s3.instants)


def test_schedule_prefix_stable_in_horizon():
    # longer horizon extends the path without reshuffling earlier draws
    ens = two_graph_ensemble()
    p = GeometricDwelling(0.8)
    s1 = generate_schedule(ens, p, 200, 9)
    s2 = generate_schedule(ens, p, 2000, 9)
    k = len(s1.instants)
    assert np.array_equal(s1.instants, s2.instants[:k])
    assert np.array_equal(s1.choices, s2.choices[:k])


def test_schedule_gap_structure():
    ens = two_graph_ensemble()
    s = generate_schedule(ens, PoissonDwelling(2.0), 500, 11)
    gaps = np.diff(s.instants)
    assert (gaps >= 1).all()
    assert np.array_equal(gaps, 1 + s.dwell_draws)
    assert s.instants[-1] >= 500 and s.instants[-2] < 500


def test_schedule_stress_many_horizons():
    # constructor validation guards the instants/choices/draws alignment,
    # in particular when the horizon is crossed exactly at a chunk boundary
    ens = two_graph_ensemble()
    procs = [DeterministicDwelling(0), DeterministicDwelling(3),
             PoissonDwelling(1.3), GeometricDwelling(0.8)]
    for seed, horizon in enumerate(list(range(1, 40)) + [63, 64, 65, 100, 1000]):
        for p in procs:
            s = generate_schedule(ens, p, horizon, seed)
            assert s.coverage >= horizon
            assert len(s.choices) == len(s.instants)


def test_schedule_invariant_validation():
    with pytest.raises(ValueError):
        SwitchingSchedule(np.array([0, 1]), np.array([0]), np.array([0]))
    with pytest.raises(ValueError):
        SwitchingSchedule(np.array([1, 2]), np.array([0, 0]), np.array([0]))
    with pytest.raises(ValueError):
        SwitchingSchedule(np.array([0, 3]), np.array([0, 0]), np.array([1]))


def test_topology_at_matches_linear_scan():
    ens = two_graph_ensemble()
    s = generate_schedule(ens, PoissonDwelling(3.0), 2000, 13)

    def linear(t):
        for ell in range(len(s.instants) - 1):
            if s.instants[ell] <= t < s.instants[ell + 1]:
                return int(s.choices[ell])
        raise AssertionError

    rng = make_rng(14)
    for t in rng.integers(0, s.instants[-1], size=1000):
        assert topology_at(s, int(t)) == linear(int(t))
    assert topology_at(s, int(s.instants[0])) == int(s.choices[0])
    assert topology_at(s, int(s.instants[1]) - 1) == int(s.choices[0])
    with pytest.raises(ValueError):
        topology_at(s, int(s.instants[-1]))
    with pytest.raises(ValueError):
        topology_at(s, -1)


def test_sigma_steps_expansion():
    ens = two_graph_ensemble()
    s = generate_schedule(ens, GeometricDwelling(0.7), 300, 15)
    sig = sigma_steps(s, 300)
    assert len(sig) == 300
    assert all(sig[t] == topology_at(s, t) for t in range(300))
    with pytest.raises(ValueError, match="insufficient"):
        sigma_steps(s, int(s.instants[-1]) + 1)


def test_choice_frequencies():
    probs = (0.2, 0.5, 0.3)
    ens = TopologyEnsemble(
        tuple(Digraph.complete(2) for _ in range(3)), probs
    )
    s = generate_schedule(ens, DeterministicDwelling(0), 100_000, 17)
    counts = np.bincount(s.choices, minlength=3)
    total = len(s.choices)
    for k, p in enumerate(probs):
        se = math.sqrt(p * (1 - p) / total)
        assert counts[k] / total == pytest.approx(p, abs=3 * se)


def test_star_times_is_subsequence():
    ens = two_graph_ensemble()
    s = generate_schedule(ens, GeometricDwelling(0.8), 5000, 19)
    stars = star_times(s, n=3, c=1.5, count=10)
    assert set(stars.tolist()) <= set(s.instants.tolist())
    assert (np.diff(stars) > 0).all()
    with pytest.raises(ValueError, match="insufficient"):
        star_times(s, n=3, c=1.5, count=10_000)


def test_window_dwell_sum_deterministic():
    ens = two_graph_ensemble()
    for value in (0, 2):
        s = generate_schedule(ens, DeterministicDwelling(value), 2000, 21)
        n, c, nn = 3, 1.0, 4
        blocks = a_values(n, c, 2 * (nn - 1))
        expected = value * (int(blocks[nn - 1]) - 0)
        assert window_dwell_sum(s, 1, n, c, nn) == expected
        expected2 = value * (int(blocks[2 * (nn - 1)]) - int(blocks[nn - 1]))
        assert window_dwell_sum(s, 2, n, c, nn) == expected2


def test_window_dwell_sum_matches_slice(rng):
    ens = two_graph_ensemble()
    s = generate_schedule(ens, PoissonDwelling(1.0), 3000, 23)
    n, c, nn = 2, 1.3, 5
    for i in (1, 2, 3):
        blocks = a_values(n, c, i * (nn - 1))
        lo, hi = int(blocks[(i - 1) * (nn - 1)]), int(blocks[i * (nn - 1)])
        assert window_dwell_sum(s, i, n, c, nn) == int(s.dwell_draws[lo:hi].sum())


def test_window_dwell_sum_insufficient():
    ens = two_graph_ensemble()
    s = generate_schedule(ens, DeterministicDwelling(0), 10, 25)
    with pytest.raises(ValueError, match="insufficient"):
        window_dwell_sum(s, 50, 5, 1.0, 5)


def test_schedule_roundtrip_dict():
    ens = two_graph_ensemble()
    s = generate_schedule(ens, GeometricDwelling(0.9), 100, 27)
    d = s.to_dict()
    assert d["choices"][0] == int(s.choices[0]) + 1  # 1-indexed in exports
    assert d["instants"][0] == 0


# ------------------------------------------------- truncated-geometric lemma


def truncated_geometric_mass(x: np.ndarray, cap: int) -> float:
    """P(sum of B independent geometrics(x_l) <= cap), by enumeration."""
    b = len(x)
    total = 0.0
    for js in itertools.product(range(cap + 1), repeat=b):
        if sum(js) <= cap:
            term = 1.0
            for j, xl in zip(js, x):
                term *= (1 - xl) ** j * xl
            total += term
    return total


def test_truncated_geometric_mass_increasing_in_each_rate(rng):
    # positivity of each partial derivative, checked by central differences
    eps = 1e-6
    for cap in (1, 2, 3, 4):
        for b in (1, 2, 3, 4):
            x = 0.1 + 0.8 * rng.random(b)
            for k in range(b):
                up, dn = x.copy(), x.copy()
                up[k] += eps
                dn[k] -= eps
                deriv = (
                    truncated_geometric_mass(up, cap)
                    - truncated_geometric_mass(dn, cap)
                ) / (2 * eps)
                assert deriv > 0.0
