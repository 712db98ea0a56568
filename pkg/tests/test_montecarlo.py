import math

import numpy as np
import pytest

from trajdist.analytic import trajectory_distribution, uniform_edges
from trajdist.core import MonitoredSystem
from trajdist.models import HoppingParams, QubitParams, hopping_system, qubit_system
from trajdist.montecarlo import (
    CHUNK,
    GridMismatch,
    _jackknife_se,
    default_workers,
    distribution_distance,
    run_ensemble,
    sample_trajectory,
)
from trajdist.rng import mix_seed


@pytest.fixture(scope="module")
def qubit():
    return qubit_system(QubitParams(1.0, 1.0))


def test_single_trajectory_is_well_formed(qubit):
    rec = sample_trajectory(qubit, 10.0, 99)
    assert rec.n_jumps == rec.outcomes.size
    assert np.all(np.diff(rec.jump_times) > 0)
    assert np.all((rec.jump_times > 0) & (rec.jump_times < 10.0))
    assert set(rec.outcomes.tolist()) <= {0, 1}
    assert rec.final_state.norm_deviation < 1e-12
    assert rec.final_value == pytest.approx(qubit.expectation(rec.final_state.amplitudes))


def test_trajectory_replay_is_exact(qubit):
    a = sample_trajectory(qubit, 5.0, 2024)
    b = sample_trajectory(qubit, 5.0, 2024)
    assert np.array_equal(a.jump_times, b.jump_times)
    assert a.final_value == b.final_value


def test_single_trajectory_matches_ensemble_member(qubit):
    stats = run_ensemble(qubit, 4.0, 50, base_seed=17, keep_records=True)
    for i in (0, 13, 49):
        rec = sample_trajectory(qubit, 4.0, int(mix_seed(17, i)))
        assert rec.final_value == stats.values[i]
        assert rec.jump_times.tolist() == stats.records[i]["jump_times"]
        assert rec.outcomes.tolist() == stats.records[i]["outcomes"]
        assert stats.records[i]["index"] == i


def test_no_measurement_gives_free_value():
    s = qubit_system(QubitParams(1.0, 0.0))
    stats = run_ensemble(s, 2.5, 100)
    assert np.all(stats.jump_counts == 0)
    assert np.allclose(stats.values, math.cos(2.5), atol=1e-14)


def test_zero_time():
    s = qubit_system(QubitParams(1.0, 3.0))
    stats = run_ensemble(s, 0.0, 10)
    assert np.allclose(stats.values, 1.0, atol=1e-14)
    assert stats.no_click_fraction == 1.0


def test_jump_counts_are_poisson(qubit):
    stats = run_ensemble(qubit, 3.0, 20_000, base_seed=5)
    lam = 3.0
    se_mean = math.sqrt(lam / stats.n_traj)
    assert abs(stats.jump_mean - lam) < 4 * se_mean
    # var of the sample variance for Poisson: (lam + 2 lam^2) / n approximately
    se_var = math.sqrt((lam + 2 * lam * lam) / stats.n_traj)
    assert abs(stats.jump_var - lam) < 4 * se_var
    p = math.exp(-lam)
    assert abs(stats.no_click_fraction - p) < 4 * math.sqrt(p * (1 - p) / stats.n_traj)


def test_first_outcome_follows_born_rule():
    # after tau ~ Exp(gamma) the flip probability is sin^2(Omega tau / 2);
    # its mean is Omega^2 / (2 (gamma^2 + Omega^2))
    g, om = 1.0, 1.0
    s = qubit_system(QubitParams(om, g))
    stats = run_ensemble(s, 40.0, 20_000, base_seed=8, keep_records=True)
    first = np.array([r["outcomes"][0] for r in stats.records if r["outcomes"]])
    p = om**2 / (2 * (g * g + om * om))
    assert abs(first.mean() - p) < 4 * math.sqrt(p * (1 - p) / first.size)


def test_click_state_is_measured_basis_vector():
    # after a click at tau the value is X(a, t - tau); with t - tau = 0 it is o_a
    s = MonitoredSystem(np.array([[0.0, 0.4, 0.0], [0.4, 0.0, 0.4], [0.0, 0.4, 0.0]]), [1.0, 2.0, 6.0], 50.0)
    stats = run_ensemble(s, 1.0, 200, base_seed=1, keep_records=True)
    for rec, v in zip(stats.records, stats.values):
        tail = 1.0 - rec["jump_times"][-1]
        if tail < 1e-4:
            assert v == pytest.approx([1.0, 2.0, 6.0][rec["outcomes"][-1]], abs=1e-3)


def test_worker_count_is_irrelevant():
    s = hopping_system(HoppingParams(1.0, 1.0), 31)
    n = 2 * CHUNK + 123
    ref = run_ensemble(s, 3.0, n, base_seed=77, workers=1)
    for w in (3, 16):
        other = run_ensemble(s, 3.0, n, base_seed=77, workers=w)
        assert np.array_equal(ref.values, other.values)
        assert np.array_equal(ref.jump_counts, other.jump_counts)


def test_prefix_stability():
    # trajectory i does not depend on how many trajectories are run
    s = qubit_system(QubitParams(1.0, 2.0))
    small = run_ensemble(s, 2.0, 100, base_seed=3)
    big = run_ensemble(s, 2.0, CHUNK + 100, base_seed=3)
    assert np.array_equal(small.values, big.values[:100])


def test_norm_is_preserved():
    s = hopping_system(HoppingParams(1.0, 2.0), 41)
    stats = run_ensemble(s, 4.0, 2000, base_seed=2)
    assert stats.max_norm_deviation < 1e-10


def test_ks_distance_shrinks_with_sample_size(qubit):
    edges = uniform_edges(-1, 1, 400)
    exact, _, _ = trajectory_distribution(qubit, 3.0, edges)
    ks = [distribution_distance(run_ensemble(qubit, 3.0, n, base_seed=11, edges=edges), exact) for n in (1000, 40_000)]
    # 1.63 / sqrt(n) is the 1% point of the Kolmogorov distribution
    assert ks[0] < 1.63 / math.sqrt(1000)
    assert ks[1] < 1.63 / math.sqrt(40_000)
    assert ks[1] < ks[0]


def test_distance_requires_same_edges(qubit):
    a = run_ensemble(qubit, 1.0, 10, edges=uniform_edges(-1, 1, 10))
    b = run_ensemble(qubit, 1.0, 10, edges=uniform_edges(-1, 1, 20))
    with pytest.raises(GridMismatch):
        distribution_distance(a, b)
    assert distribution_distance(a, a) == 0.0


def test_jackknife_matches_iid_error():
    x = np.random.default_rng(0).normal(size=100_000)
    se = _jackknife_se(x)
    assert se == pytest.approx(1 / math.sqrt(x.size), rel=0.2)
    assert math.isnan(_jackknife_se(np.ones(1)))


def test_summary_fields(qubit):
    s = run_ensemble(qubit, 1.0, 500).summary()
    assert s["n_traj"] == 500 and s["histogram_mass"] == 1.0
    assert set(s) >= {"m1", "m1_se", "m2", "m4", "no_click_fraction", "jump_mean"}


def test_argument_validation(qubit, monkeypatch):
    with pytest.raises(ValueError):
        run_ensemble(qubit, 1.0, 0)
    with pytest.raises(ValueError):
        run_ensemble(qubit, -1.0, 5)
    with pytest.raises(ValueError):
        run_ensemble(qubit, 1.0, 5, workers=0)
    with pytest.raises(ValueError):
        sample_trajectory(qubit, -1.0, 0)
    monkeypatch.setenv("TRAJDIST_WORKERS", "3")
    assert default_workers() == 3
    monkeypatch.setenv("TRAJDIST_WORKERS", "zero")
    with pytest.raises(ValueError):
        default_workers()
    monkeypatch.delenv("TRAJDIST_WORKERS")
    assert default_workers() == 1


def test_unmeasured_hopping_mean_is_zero():
    s = hopping_system(HoppingParams(1.0, 0.0), 41)
    rec = sample_trajectory(s, 2.0, 1)
    assert rec.n_jumps == 0
    assert abs(rec.final_value) < 1e-12
    assert abs(rec.final_value) <= np.max(np.abs(s.observable_values))


def test_worked_ensemble_values():
    q = qubit_system(QubitParams(1.0, 1.0))
    stats = run_ensemble(q, 1.0, 100_000, base_seed=21)
    assert abs(stats.no_click_fraction - math.exp(-1)) < 0.006
    crit = run_ensemble(qubit_system(QubitParams(1.0, 2.0)), 1.0, 100_000, base_seed=22)
    assert abs(crit.moment(1) - 2 * math.exp(-1)) < 4 * crit.moment_se(1)
    hop = run_ensemble(hopping_system(HoppingParams(1.0, 1.0), 49), 2.0, 100_000, base_seed=23)
    assert abs(hop.moment(2) - 16 * math.exp(-2)) < 4 * hop.moment_se(2)


@pytest.mark.slow
def test_ks_distance_scaling():
    # KS distance to the exact law should shrink like n^{-1/2}
    s = hopping_system(HoppingParams(1.0, 1.0), 49)
    exact, _, _ = trajectory_distribution(s, 2.0)
    ks = []
    for n in (1_000, 10_000, 100_000):
        ks.append(distribution_distance(run_ensemble(s, 2.0, n, base_seed=31, edges=exact.edges), exact))
    assert ks[-1] < 0.02
    scaled = np.array(ks) * np.sqrt([1_000, 10_000, 100_000])
    assert np.all(scaled < 1.63)
    slope = np.polyfit(np.log([1e3, 1e4, 1e5]), np.log(ks), 1)[0]
    assert -0.8 < slope < -0.2
