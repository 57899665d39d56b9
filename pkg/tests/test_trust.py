import dataclasses
import math

import numpy as np
import pytest

from stratsim.algorithms import LipschitzEstimate, Reweighted, Tabular, Uniform
from stratsim.core import (
    ActionSpaces,
    Belief,
    HypothesisClass,
    PayoffMatrix,
    PreconditionError,
    SizeGuardError,
    expected_payoff_rows,
    payoff_variance,
)
from stratsim.scenarios import (
    analytic_toxicity_predicted,
    analytic_toxicity_true,
    make_eps_net_instance,
    make_prop5_instance,
    s1_params,
)
from stratsim.strategize import UserParams
from stratsim.trust import (
    br_predictability_check,
    build_eps_net_class,
    counterfactual_audit,
    covering_radius,
    eps_grid,
    expansion_check,
    max_predicted_gap,
    predicted_payoff,
    quadratic_payoff,
    trust_audit,
)


def test_trust_audit_on_s1(s1, default_params):
    report = trust_audit(s1, UserParams(), 0.5, default_params)
    assert report.strategization_gap == pytest.approx(0.0875, abs=1e-12)
    assert report.kappa == pytest.approx(0.625, abs=1e-12)
    assert report.strategic_label == "mask:{z0,z1,z2}"
    assert not report.trustworthy
    assert report.to_dict()["trustworthy"] is False


def test_trust_audit_when_engagement_hurts_the_user(s1, default_params):
    hostile = dataclasses.replace(s1, user_payoff=PayoffMatrix(-s1.platform_payoff.values, (-1.0, 1.0)))
    report = trust_audit(hostile, UserParams(), 0.0, default_params)
    assert report.strategization_gap == 0.0
    assert report.kappa == 0.0
    assert report.trustworthy
    assert not report.trustworthy_at(0.1)


def test_counterfactual_audit_toxicity(prop4, default_params):
    instance, p_cf = prop4
    params = s1_params(gamma=0.25)
    report = counterfactual_audit(instance, p_cf, UserParams(), default_params)
    assert report.predicted == pytest.approx(float(analytic_toxicity_predicted(params)), abs=1e-9)
    assert report.true_strategic == pytest.approx(float(analytic_toxicity_true(params)), abs=1e-9)
    assert report.current_true == pytest.approx(0.7125, abs=1e-9)
    assert report.current_predicted == pytest.approx(0.7125, abs=1e-9)
    assert report.predicted < report.current_true < report.true_strategic
    assert report.beliefs_used["chosen_name"] == "q1"
    assert 0.0 < report.d_P_between <= 1.0
    lo, hi = report.variance_range
    assert 0.0 <= lo <= hi <= 0.25


def test_predicted_payoff_and_zeta(s1):
    hclass, V = s1.hypothesis_class, s1.platform_payoff
    assert predicted_payoff(Uniform(), Belief.vertex(2, 3), hclass, V) == pytest.approx(0.8)
    assert predicted_payoff(Uniform(), Belief.vertex(0, 3), hclass, V) == pytest.approx(0.4)
    assert max_predicted_gap(Uniform(), hclass, V) == pytest.approx(0.4)


@pytest.mark.parametrize("eps", [0.0, 0.3, 1.5])
def test_eps_grid_rejects_bad_eps(eps):
    with pytest.raises(PreconditionError):
        eps_grid(eps, 2)


@pytest.mark.parametrize(
    "n_z, eps, size",
    [(2, 0.5, 9), (1, 1.0, 2), (3, 0.25, 125)],
)
def test_eps_net_class_sizes(n_z, eps, size):
    hclass = build_eps_net_class(ActionSpaces(n_z, 2), eps)
    assert len(hclass) == size
    assert hclass.shape == (n_z, 2)


def test_eps_net_guard():
    with pytest.raises(SizeGuardError):
        build_eps_net_class(ActionSpaces(3, 2), 0.25, guard=100)


def test_br_predictability_bound_with_uniform():
    instance = make_eps_net_instance(2, 0.25)
    report = br_predictability_check(instance, Uniform(), 0.0, 0.25)
    assert report.bound == pytest.approx(math.sqrt(0.5))
    assert report.empirical_gap == pytest.approx(0.0, abs=1e-12)
    assert report.holds and report.lipschitz_provenance == "supplied"


def test_br_predictability_with_estimated_lipschitz():
    instance = make_eps_net_instance(2, 0.5)
    rng = np.random.default_rng(3)
    table = Tabular(rng.dirichlet(np.ones(2), size=len(instance.hypothesis_class)))
    report = br_predictability_check(instance, table, None, 0.5)
    assert report.lipschitz_provenance == "estimated"
    assert report.holds
    supplied = br_predictability_check(instance, table, LipschitzEstimate(2.0, None, 1, 0), 0.5)
    assert supplied.bound == pytest.approx(5.0)


def test_expansion_check_prop5(default_params):
    _, after = make_prop5_instance()
    report = expansion_check(after, range(3), UserParams(), default_params)
    assert report.naive_not_lower
    assert report.strategic_sub == pytest.approx(0.475, abs=1e-12)
    assert report.strategic_drop >= 0.01


def test_quadratic_payoff():
    V = PayoffMatrix([[0.0, 1.0]])
    U = quadratic_payoff(V, 0.5)
    assert U.values.tolist() == [[0.25, 0.25]]
    assert U.declared_range == (0.0, 0.25)
    assert quadratic_payoff(V, 2.0).declared_range == (1.0, 4.0)


@pytest.mark.parametrize("p_cf", [Uniform(), Reweighted(Uniform(), [3.0, 1.0])])
def test_br_predictability_constant_algorithm_has_zero_lipschitz(p_cf):
    instance = make_eps_net_instance(2, 0.25)
    report = br_predictability_check(instance, p_cf, None, 0.25)
    assert report.lipschitz == 0.0
    assert report.lipschitz_provenance == "constant"
    assert report.covering_radius == 0.0
    assert report.bound == pytest.approx(math.sqrt(0.5))
    assert report.holds


def test_covering_radius():
    spaces = ActionSpaces(2, 2)
    assert covering_radius(build_eps_net_class(spaces, 0.25), spaces, 0.25) == 0.0
    assert covering_radius(build_eps_net_class(spaces, 0.5), spaces, 0.25) == pytest.approx(0.25)
    pair = HypothesisClass([[[0.5, 0.5], [0.5, 0.5]], [[1.0, 0.0], [0.0, 1.0]]])
    assert covering_radius(pair, spaces, 0.25) == pytest.approx(0.5)
    with pytest.raises(PreconditionError):
        covering_radius(pair, ActionSpaces(3, 2), 0.25)


def test_br_predictability_rejects_class_that_is_not_a_net():
    instance = make_eps_net_instance(2, 0.25)
    pair = HypothesisClass([[[0.5, 0.5], [0.5, 0.5]], [[1.0, 0.0], [0.0, 1.0]]], ["meio", "extremo"])
    with pytest.raises(PreconditionError, match="rede-ε"):
        br_predictability_check(instance.with_class(pair), Uniform(), None, 0.25)


def test_br_predictability_rejects_stylized_class(s1):
    with pytest.raises(PreconditionError):
        br_predictability_check(s1, Uniform(), 0.0, 0.5)


def test_quadratic_payoff_is_variance_plus_squared_bias(s1):
    V = s1.platform_payoff
    rng = np.random.default_rng(5)
    for _ in range(50):
        r = rng.dirichlet(np.ones(s1.spaces.n_propositions))
        q = s1.hypothesis_class.model(int(rng.integers(3)))
        c = float(rng.uniform(-1.0, 2.0))
        mean = float(r @ expected_payoff_rows(q, V))
        u_bar = float(r @ expected_payoff_rows(q, quadratic_payoff(V, c)))
        assert u_bar == pytest.approx(payoff_variance(r, q, V) + (mean - c) ** 2, abs=1e-12)


def test_counterfactual_audit_without_change_has_no_gap(prop4, default_params):
    instance, _ = prop4
    report = counterfactual_audit(instance, instance.algorithm, UserParams(), default_params)
    assert report.gap <= 1e-9
    assert report.d_P_between == 0.0
    assert report.predicted == pytest.approx(report.true_strategic, abs=1e-9)
