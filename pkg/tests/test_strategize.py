import dataclasses

import numpy as np
import pytest

from stratsim.core import DimensionError, PayoffMatrix, PreconditionError, Strategy, ValidationError
from stratsim.scenarios import make_stylized, mask_strategy, s1_subset_a_params
from stratsim.stability import stable_set
from stratsim.strategize import (
    AllSupportMasks,
    CandidateEvaluation,
    Explicit,
    GridRefine,
    PartitionMasks,
    PlatformPayoff,
    UserParams,
    _select,
    alignment_benefit_check,
    deviation,
    expected_platform_payoff,
    expected_user_payoff,
    generate_candidates,
    naive_strategy,
    solve_strategic,
    user_response,
    worst_case_over_stable,
)


def test_naive_strategy_splits_ties():
    q = naive_strategy(PayoffMatrix([[1.0, 1.0], [0.0, 1.0]]))
    assert q.rows.tolist() == [[0.5, 0.5], [0.0, 1.0]]


def test_expected_payoffs_with_deviation_cost():
    U = PayoffMatrix([[0.0, 1.0], [0.0, 1.0]])
    q_br = naive_strategy(U)
    q = Strategy([[1.0, 0.0], [0.0, 1.0]])
    r = [0.5, 0.5]
    assert deviation(q, q_br) == 1.0
    assert expected_user_payoff(r, q, q_br, U, 0.0) == pytest.approx(0.5)
    assert expected_user_payoff(r, q, q_br, U, 0.2) == pytest.approx(0.4)
    assert expected_platform_payoff(r, q, U) == pytest.approx(0.5)
    with pytest.raises(DimensionError):
        expected_platform_payoff([1.0], q, U)


def test_all_support_masks_are_deduplicated(s1):
    candidates = generate_candidates(s1, UserParams())
    # máscaras que só diferem em itens negativos geram a mesma estratégia
    assert len(candidates) == 32
    assert candidates[0].label == "q_br"
    assert candidates[0].strategy.equals(naive_strategy(s1.user_payoff))
    assert [c.id for c in candidates] == list(range(32))
    assert len({c.strategy.rows.tobytes() for c in candidates}) == 32


def test_all_support_masks_cap(s1):
    with pytest.raises(PreconditionError):
        generate_candidates(s1, UserParams(candidates=AllSupportMasks(cap=4)))


def test_partition_and_explicit_families(s1):
    family = PartitionMasks((frozenset({0, 1, 2}), frozenset({9})))
    with pytest.raises(DimensionError):
        generate_candidates(s1, UserParams(candidates=family))
    bad = Explicit((Strategy([[0.0, 1.0]]),))
    with pytest.raises(DimensionError):
        generate_candidates(s1, UserParams(candidates=bad))
    ok = Explicit((mask_strategy(8, [4, 5]),), ("lado_b",))
    labels = [c.label for c in generate_candidates(s1, UserParams(candidates=ok))]
    assert labels == ["q_br", "lado_b"]


def test_grid_refine_levels(s1):
    family = GridRefine((frozenset({0, 1, 2}),), resolution=2)
    candidates = generate_candidates(s1, UserParams(candidates=family))
    assert [c.label for c in candidates] == ["q_br", "mask:{z0,z1,z2}@1/2", "mask:{z0,z1,z2}@2/2"]
    assert candidates[1].strategy.rows[0].tolist() == [0.5, 0.5]
    assert candidates[2].strategy.equals(mask_strategy(8, [0, 1, 2]))


def test_user_params_validation(s1):
    with pytest.raises(ValidationError):
        UserParams(mode="adversario")
    with pytest.raises(ValidationError):
        UserParams(lam=-1.0)
    resolved = UserParams().resolve(s1)
    assert resolved.lam == 0.0 and resolved.opt_out_behavior == 0
    with pytest.raises(ValidationError):
        UserParams(opt_out_behavior=5).resolve(s1)


def test_solve_strategic_on_s1(s1, default_params):
    solution = solve_strategic(s1, UserParams(), default_params)
    assert solution.label == "mask:{z0,z1,z2}"
    assert solution.worst_case_user_payoff == pytest.approx(0.7125, abs=1e-12)
    assert solution.worst_case_platform_payoff == pytest.approx(0.7125, abs=1e-12)
    assert solution.stable_set.survivors == (0,)
    assert solution.family["family"] == "all_support_masks"
    assert len(solution.per_candidate_table) == 32


def test_solve_with_parallel_jobs_matches_serial(s1, default_params):
    serial = solve_strategic(s1, UserParams(), default_params)
    parallel = solve_strategic(s1, UserParams(), default_params, jobs=4)
    assert parallel.candidate_id == serial.candidate_id
    assert parallel.per_candidate_table == serial.per_candidate_table


def test_naive_response_on_s1(s1, default_params):
    naive = user_response(s1, UserParams(mode="naive"), default_params)
    assert naive.candidate_id == 0
    assert naive.stable_set.survivors == (2,)
    assert naive.worst_case_user_payoff == pytest.approx(0.625, abs=1e-12)


def test_subset_a_variant_returns_best_response(default_params):
    variant = make_stylized(s1_subset_a_params())
    solution = solve_strategic(variant, UserParams(), default_params)
    assert solution.candidate_id == 0
    assert solution.strategy.equals(naive_strategy(variant.user_payoff))


def test_select_breaks_ties_by_deviation_then_id():
    rows = [
        CandidateEvaluation(0, "a", (0,), 0.5, 0.0, 2.0),
        CandidateEvaluation(1, "b", (0,), 0.5 + 1e-13, 0.0, 1.0),
        CandidateEvaluation(2, "c", (0,), 0.5, 0.0, 1.0),
        CandidateEvaluation(3, "d", (0,), 0.4, 0.0, 0.0),
    ]
    assert _select(rows).id == 1
    assert _select(rows[::-1]).id == 1


def test_worst_case_sense(s1):
    q = naive_strategy(s1.user_payoff)
    stable = stable_set(q, s1.algorithm, s1.hypothesis_class)
    payoff = PlatformPayoff(s1.platform_payoff)
    assert worst_case_over_stable(s1.algorithm, stable, q, payoff, s1.hypothesis_class) == pytest.approx(0.625)
    with pytest.raises(ValidationError):
        worst_case_over_stable(s1.algorithm, stable, q, payoff, s1.hypothesis_class, sense="media")


@pytest.mark.parametrize("sense", ["min", "max"])
def test_alignment_benefit_on_s1(s1, default_params, sense):
    report = alignment_benefit_check(s1, UserParams(), default_params, sense)
    assert report.naive_side_label == "q_br" and report.naive_side_matches_br
    assert report.lhs == pytest.approx(0.7125)
    assert report.rhs == pytest.approx(0.625)
    assert report.strategization_helps


def test_alignment_requires_unique_maximizers(s1):
    values = s1.user_payoff.values.copy()
    values[3] = [0.0, 0.0]
    tied = dataclasses.replace(s1, user_payoff=PayoffMatrix(values, (-1.0, 1.0)))
    with pytest.raises(PreconditionError):
        alignment_benefit_check(tied, UserParams())


def test_strategy_only_within_masks(s1):
    for c in generate_candidates(s1, UserParams()):
        # fora da máscara o usuário não clica
        assert np.all(c.strategy.rows[:, 1] <= naive_strategy(s1.user_payoff).rows[:, 1])


def test_strategic_value_does_not_grow_with_lambda(s1, default_params):
    values = [
        solve_strategic(s1, UserParams(lam=lam), default_params).worst_case_user_payoff
        for lam in (0.0, 0.01, 0.1, 1.0)
    ]
    for lower, higher in zip(values, values[1:]):
        assert higher <= lower + 1e-11


@pytest.mark.parametrize("lam", [0.0, 0.1])
def test_solved_value_at_least_best_response(s1, default_params, lam):
    solution = solve_strategic(s1, UserParams(lam=lam), default_params)
    q_br_row = solution.per_candidate_table[0]
    assert q_br_row.id == 0
    assert solution.worst_case_user_payoff >= q_br_row.user_payoff - 1e-11
