import dataclasses

import numpy as np
import pytest

from stratsim.core import (
    Belief,
    DimensionError,
    HypothesisClass,
    ImpossibleObservationError,
    PreconditionError,
    Strategy,
    ValidationError,
)
from stratsim.scenarios import mask_strategy
from stratsim.simulator import (
    GENERATOR_NAME,
    SimConfig,
    Trajectory,
    bayes_update,
    detect_convergence,
    read_trajectory,
    run,
    run_many,
    summarize,
    write_trajectory,
)
from stratsim.strategize import naive_strategy


def _direct_update(weights, tensor, z, b):
    post = weights * tensor[:, z, b]
    return post / post.sum()


def test_bayes_update_matches_direct_formula():
    rng = np.random.default_rng(7)
    for _ in range(50):
        m, n_z, n_b = rng.integers(2, 5), rng.integers(1, 4), rng.integers(2, 4)
        tensor = rng.dirichlet(np.ones(n_b), size=(m, n_z))
        weights = rng.dirichlet(np.ones(m))
        z, b = int(rng.integers(n_z)), int(rng.integers(n_b))
        out = bayes_update(Belief(weights), HypothesisClass(tensor), z, b)
        assert out.weights == pytest.approx(_direct_update(weights, tensor, z, b), abs=1e-12)


def test_bayes_update_zero_likelihood_model_drops_out(s1):
    out = bayes_update(Belief.uniform(3), s1.hypothesis_class, 4, 1)
    assert out.weights[0] == 0.0
    assert out.weights[1:] == pytest.approx([0.5, 0.5])


def test_bayes_update_impossible_observation(s1):
    with pytest.raises(ImpossibleObservationError):
        bayes_update(Belief.vertex(0, 3), s1.hypothesis_class, 4, 1)
    with pytest.raises(DimensionError):
        bayes_update(Belief.uniform(3), s1.hypothesis_class, 8, 0)


def test_sim_config_validation(s1):
    with pytest.raises(ValidationError):
        SimConfig(s1, 0, 1)
    with pytest.raises(ValidationError):
        SimConfig(s1, 10, 1, snapshot_every=11)
    with pytest.raises(ValidationError):
        SimConfig(s1, 10, -1)


def test_run_is_deterministic_per_seed(s1):
    q = naive_strategy(s1.user_payoff)
    a = run(SimConfig(s1, 300, 42), q)
    b = run(SimConfig(s1, 300, 42), q)
    c = run(SimConfig(s1, 300, 43), q)
    assert np.array_equal(a.z, b.z) and np.array_equal(a.b, b.b)
    assert np.array_equal(a.snapshot_beliefs, b.snapshot_beliefs)
    assert not np.array_equal(a.z, c.z)
    assert a.generator == GENERATOR_NAME


def test_run_snapshots_and_payoffs(s1):
    q = naive_strategy(s1.user_payoff)
    traj = run(SimConfig(s1, 10, 3, snapshot_every=3), q)
    assert traj.snapshot_times.tolist() == [0, 3, 6, 9, 10]
    assert len(traj) == 10
    assert traj.snapshot_beliefs.sum(axis=1) == pytest.approx(np.ones(5), abs=1e-12)
    # U e V conferem com as matrizes nas ações sorteadas
    assert traj.v.tolist() == [s1.platform_payoff.values[z, b] for z, b in zip(traj.z, traj.b)]
    assert traj.u.tolist() == [s1.user_payoff.values[z, b] for z, b in zip(traj.z, traj.b)]
    t, z, b, u, v = traj.steps[0]
    assert t == 0 and isinstance(z, int)
    assert traj.belief_snapshots[0][1].weights == pytest.approx([1 / 3] * 3)


def test_run_rejects_bad_inputs(s1):
    with pytest.raises(DimensionError):
        run(SimConfig(s1, 5, 0), Strategy([[0.0, 1.0]]))
    no_support = dataclasses.replace(s1, prior=Belief([0.5, 0.5, 0.0]))
    with pytest.raises(PreconditionError):
        run(SimConfig(no_support, 5, 0), naive_strategy(s1.user_payoff))


def test_naive_run_converges_to_q3(s1):
    q = naive_strategy(s1.user_payoff)
    traj = run(SimConfig(s1, 1000, 5), q)
    step = detect_convergence(traj, [2])
    assert step is not None and step < 1000
    assert traj.final_belief.weights[2] == pytest.approx(1.0)


def test_belief_floor_keeps_eliminated_models_at_zero(s1):
    q = naive_strategy(s1.user_payoff)
    traj = run(SimConfig(s1, 500, 1, belief_floor=1e-3), q)
    assert traj.final_belief.weights[0] == 0.0
    assert traj.final_belief.weights[1] == 0.0


def test_a_side_strategy_converges_to_q1(s1):
    traj = run(SimConfig(s1, 2000, 11), mask_strategy(8, [0, 1, 2]))
    assert detect_convergence(traj, [0]) is not None


def _synthetic(masses):
    beliefs = np.array([[m, 1 - m] for m in masses])
    times = np.arange(len(masses))
    empty = np.zeros(0)
    return Trajectory(empty, empty, empty, empty, times, beliefs, Belief(beliefs[-1]), seed=0)


def test_detect_convergence_window():
    traj = _synthetic([0.5, 0.995, 0.5, 0.995, 0.999, 0.999])
    assert detect_convergence(traj, [0], 0.99, hold=2) == 3
    # janela cortada no último snapshot
    assert detect_convergence(traj, [0], 0.99, hold=100) == 3
    assert detect_convergence(_synthetic([0.5, 0.6]), [0]) is None
    with pytest.raises(PreconditionError):
        detect_convergence(traj, [])
    with pytest.raises(PreconditionError):
        detect_convergence(traj, [0], threshold=1.0)


def test_summarize_columns(s1):
    traj = run(SimConfig(s1, 50, 2), naive_strategy(s1.user_payoff))
    row = summarize(traj, [2], names=["q1", "q2", "q3"])
    assert list(row) == ["seed", "convergence_step", "final_belief_q1", "final_belief_q2", "final_belief_q3", "mean_u", "mean_v"]
    assert row["mean_v"] == pytest.approx(traj.v.mean())


def test_run_many_does_not_depend_on_jobs(s1):
    q = naive_strategy(s1.user_payoff)
    serial = run_many(s1, q, [0, 1, 2, 3], 100)
    parallel = run_many(s1, q, [3, 2, 1, 0], 100, jobs=3)
    assert sorted(parallel) == [0, 1, 2, 3]
    for s in serial:
        assert np.array_equal(serial[s].z, parallel[s].z)
    with pytest.raises(PreconditionError):
        run_many(s1, q, [], 10)


def test_trajectory_file_round_trip(s1, tmp_path):
    traj = run(SimConfig(s1, 40, 9, snapshot_every=5), naive_strategy(s1.user_payoff))
    path = tmp_path / "seed_9.jsonl"
    write_trajectory(str(path), traj, "abc", ["q1", "q2", "q3"])
    header, back = read_trajectory(str(path))
    assert header["config_hash"] == "abc" and header["models"] == ["q1", "q2", "q3"]
    assert np.array_equal(back.z, traj.z) and np.array_equal(back.b, traj.b)
    assert np.array_equal(back.snapshot_beliefs, traj.snapshot_beliefs)
    assert back.snapshot_every == 5
    assert [p.name for p in tmp_path.iterdir()] == ["seed_9.jsonl"]


def test_read_trajectory_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_trajectory(str(tmp_path / "nada.jsonl"))
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"type": "step", "t": 0, "z": 0, "b": 0, "u": 0.0, "v": 0.0}\n')
    with pytest.raises(ValidationError):
        read_trajectory(str(bad))


def test_bayes_update_scales_belief_ratios_by_likelihood_ratio():
    rng = np.random.default_rng(8)
    for _ in range(200):
        m, n_z, n_b = int(rng.integers(2, 5)), int(rng.integers(1, 4)), int(rng.integers(2, 4))
        tensor = rng.dirichlet(np.ones(n_b), size=(m, n_z))
        weights = rng.dirichlet(np.ones(m))
        z, b = int(rng.integers(n_z)), int(rng.integers(n_b))
        out = bayes_update(Belief(weights), HypothesisClass(tensor), z, b).weights
        i, j = 0, 1
        expected = weights[i] / weights[j] * tensor[i, z, b] / tensor[j, z, b]
        assert out[i] / out[j] == pytest.approx(expected, rel=1e-9)
