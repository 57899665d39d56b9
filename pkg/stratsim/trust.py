"""Auditoria de kappa-confiabilidade, payoffs contrafactuais e classes rede-ε."""

from __future__ import annotations

import dataclasses
import itertools
import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from stratsim.algorithms import BeliefGrid, LipschitzEstimate, ProposerAlgorithm, algorithm_distance, estimate_lipschitz, simplex_grid
from stratsim.core import (
    ActionSpaces,
    Belief,
    GameInstance,
    HypothesisClass,
    PayoffMatrix,
    PreconditionError,
    SizeGuardError,
    payoff_variance,
)
from stratsim.stability import DominanceParams, stable_set
from stratsim.strategize import (
    PlatformPayoff,
    UserParams,
    naive_strategy,
    user_response,
    worst_case_over_stable,
)

logger = logging.getLogger(__name__)

EPS_NET_GUARD = 10**6


@dataclass(frozen=True)
class TrustReport:
    strategic_value: float
    naive_value: float
    strategization_gap: float
    kappa: float
    kappa0: float
    strategic_label: str

    def trustworthy_at(self, kappa0: float) -> bool:
        return self.strategization_gap <= 0 and self.kappa >= kappa0

    @property
    def trustworthy(self) -> bool:
        return self.trustworthy_at(self.kappa0)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["trustworthy"] = self.trustworthy
        return out


@dataclass(frozen=True)
class CounterfactualReport:
    predicted: float
    true_strategic: float
    gap: float
    d_P_between: float
    beliefs_used: dict
    current_true: float
    current_predicted: float
    zeta: float
    variance_range: tuple[float, float]

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["variance_range"] = list(self.variance_range)
        return out


def predicted_payoff(p_cf: ProposerAlgorithm, mu: Belief, hclass: HypothesisClass, V: PayoffMatrix) -> float:
    """V̂(p', mu) = E_{q~mu}[ V̄(p'(.; mu), q) ]."""
    r = p_cf.evaluate(mu.weights, hclass)[0]
    # V̄(r, q_i) para cada modelo i
    per_model = (hclass.tensor * V.values[None]).sum(axis=2) @ r
    return float(mu.weights @ per_model)


def _vertex_predictions(p_cf: ProposerAlgorithm, hclass: HypothesisClass, V: PayoffMatrix, indices: Sequence[int]) -> np.ndarray:
    m = len(hclass)
    points = np.zeros((len(indices), m))
    points[np.arange(len(indices)), list(indices)] = 1.0
    r = p_cf.evaluate(points, hclass)
    per_item = (hclass.tensor[list(indices)] * V.values[None]).sum(axis=2)
    return (r * per_item).sum(axis=1)


def max_predicted_gap(p_cf: ProposerAlgorithm, hclass: HypothesisClass, V: PayoffMatrix) -> float:
    """zeta(p') = max_{i,j} V̂(p', delta_i) - V̂(p', delta_j)."""
    values = _vertex_predictions(p_cf, hclass, V, range(len(hclass)))
    return float(values.max() - values.min())


def true_strategic_payoff(
    instance: GameInstance,
    user: UserParams,
    params: DominanceParams | None = None,
    jobs: int = 1,
) -> float:
    """V̄*(p): pior caso do payoff da plataforma na resposta do usuário sob ``instance.algorithm``."""
    solution = user_response(instance, user, params, jobs)
    return solution.worst_case_platform_payoff


def counterfactual_audit(
    instance: GameInstance,
    p_cf: ProposerAlgorithm,
    user: UserParams,
    params: DominanceParams | None = None,
    jobs: int = 1,
) -> CounterfactualReport:
    """Previsão da plataforma para p_cf (com a crença atual) contra o payoff verdadeiro."""
    params = params or DominanceParams()
    hclass = instance.hypothesis_class
    V = instance.platform_payoff
    current = user_response(instance, user, params, jobs)
    survivors = list(current.stable_set.survivors)

    cf_instance = instance.with_algorithm(p_cf)
    true_cf = true_strategic_payoff(cf_instance, user, params, jobs)

    predictions = _vertex_predictions(p_cf, hclass, V, survivors)
    gaps = np.abs(predictions - true_cf)
    k = int(np.argmin(gaps))
    chosen = survivors[k]
    mu = Belief.vertex(chosen, len(hclass))
    current_predicted = predicted_payoff(instance.algorithm, mu, hclass, V)

    variances = [
        payoff_variance(p_cf.evaluate(Belief.vertex(i, len(hclass)).weights, hclass)[0], hclass.tensor[i], V)
        for i in survivors
    ]
    grid = BeliefGrid.sweep(
        _PairSweep(instance.algorithm, p_cf), range(len(hclass)), len(hclass), params.grid_k
    )
    report = CounterfactualReport(
        predicted=float(predictions[k]),
        true_strategic=true_cf,
        gap=float(gaps[k]),
        d_P_between=algorithm_distance(instance.algorithm, p_cf, hclass, grid),
        beliefs_used={
            "source": "vertices of the current stable set",
            "survivors": survivors,
            "chosen": chosen,
            "chosen_name": hclass.name(chosen),
            "user_strategy": current.label,
            "grid": grid.to_dict(),
        },
        current_true=current.worst_case_platform_payoff,
        current_predicted=current_predicted,
        zeta=max_predicted_gap(p_cf, hclass, V),
        variance_range=(float(min(variances)), float(max(variances))),
    )
    logger.info(
        "Contrafactual: previsto %.6g, verdadeiro %.6g (atual %.6g)",
        report.predicted,
        report.true_strategic,
        report.current_true,
    )
    return report


class _PairSweep:
    """Junta as flags de dois algoritmos para escolher a grade de comparação."""

    def __init__(self, a: ProposerAlgorithm, b: ProposerAlgorithm) -> None:
        self.belief_constant = a.belief_constant and b.belief_constant
        self.belief_affine = a.belief_affine and b.belief_affine


def trust_audit(
    instance: GameInstance,
    user: UserParams,
    kappa0: float = 0.0,
    params: DominanceParams | None = None,
    jobs: int = 1,
) -> TrustReport:
    """Condições de kappa-confiabilidade: sem incentivo a estrategizar e payoff ingênuo >= kappa."""
    strategic_user = dataclasses.replace(user, mode="strategic")
    naive_user = dataclasses.replace(user, mode="naive")
    strategic = user_response(instance, strategic_user, params, jobs)
    naive = user_response(instance, naive_user, params, jobs)
    gap = strategic.worst_case_user_payoff - naive.worst_case_user_payoff
    return TrustReport(
        strategic_value=strategic.worst_case_user_payoff,
        naive_value=naive.worst_case_user_payoff,
        strategization_gap=gap,
        kappa=naive.worst_case_user_payoff,
        kappa0=kappa0,
        strategic_label=strategic.label,
    )


def eps_grid(eps: float, n_behaviors: int) -> np.ndarray:
    """Delta_eps(B): vetores com entradas em {0, eps, 2eps, ...} somando 1."""
    if not 0.0 < eps <= 1.0:
        raise PreconditionError(f"eps deve estar em (0, 1], recebido {eps}")
    k = round(1.0 / eps)
    if abs(k * eps - 1.0) > 1e-9:
        raise PreconditionError(f"1/eps precisa ser inteiro, recebido eps={eps}")
    return simplex_grid(k, n_behaviors)


def build_eps_net_class(spaces: ActionSpaces, eps: float, guard: int = EPS_NET_GUARD) -> HypothesisClass:
    """Q_eps = Delta_eps(B)^Z: todas as combinações de uma linha da grade por proposição."""
    grid = eps_grid(eps, spaces.n_behaviors)
    size = grid.shape[0] ** spaces.n_propositions
    if size > guard:
        raise SizeGuardError(f"rede-ε com {size} modelos excede o limite {guard}")
    combos = np.array(list(itertools.product(range(grid.shape[0]), repeat=spaces.n_propositions)))
    tensor = grid[combos]
    names = ["net:" + "-".join(str(i) for i in row) for row in combos]
    logger.debug("rede-ε com %d modelos (eps=%g)", size, eps)
    return HypothesisClass(tensor, names)


def covering_radius(hclass: HypothesisClass, spaces: ActionSpaces, eps: float, budget: int = 2**22) -> float:
    """Maior distância (norma do máximo) de um ponto de Q_eps ao modelo mais próximo da classe."""
    net = build_eps_net_class(spaces, eps).tensor.reshape(-1, spaces.n_propositions * spaces.n_behaviors)
    models = hclass.tensor.reshape(len(hclass), -1)
    if models.shape[1] != net.shape[1]:
        raise PreconditionError("classe de hipóteses e espaços de ações com dimensões diferentes")
    chunk = max(1, budget // models.size)
    radius = 0.0
    for start in range(0, net.shape[0], chunk):
        block = net[start:start + chunk]
        dist = np.abs(block[:, None, :] - models[None, :, :]).max(axis=2)
        radius = max(radius, float(dist.min(axis=1).max()))
    return radius


@dataclass(frozen=True)
class PredictabilityReport:
    bound: float
    empirical_gap: float
    holds: bool
    lipschitz: float
    lipschitz_provenance: str
    naive_true: float
    survivors: tuple[int, ...]
    covering_radius: float

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def br_predictability_check(
    instance: GameInstance,
    p_cf: ProposerAlgorithm,
    L_P: float | LipschitzEstimate | None,
    eps: float,
    params: DominanceParams | None = None,
) -> PredictabilityReport:
    """Cota (2 L_P + 1) sqrt(|B| eps) para o erro de previsão com usuário ingênuo.

    Exige que a classe cubra Q_eps: todo ponto da rede a no máximo eps (norma do
    máximo) de algum modelo.
    """
    params = params or DominanceParams()
    hclass = instance.hypothesis_class
    m = len(hclass)
    V = instance.platform_payoff
    q_br = naive_strategy(instance.user_payoff)

    radius = covering_radius(hclass, instance.spaces, eps)
    if radius > eps + 1e-9:
        raise PreconditionError(
            f"a classe não é uma rede-ε: raio de cobertura {radius:.4g} > eps={eps:g}"
        )

    if L_P is None:
        if p_cf.belief_constant or m == 1:
            L_P = LipschitzEstimate(0.0, None, 0, 0, provenance="constant")
        else:
            grid = BeliefGrid.sweep(p_cf, range(m), m, params.grid_k)
            if len(grid) < 2:
                grid = BeliefGrid.for_subset(range(m), params.grid_k, m)
            L_P = estimate_lipschitz(p_cf, hclass, grid)
    if isinstance(L_P, LipschitzEstimate):
        lipschitz, provenance = L_P.value, L_P.provenance
    else:
        lipschitz, provenance = float(L_P), "supplied"

    stable_p = stable_set(q_br, instance.algorithm, hclass, params)
    stable_cf = stable_set(q_br, p_cf, hclass, params)
    naive_true = worst_case_over_stable(p_cf, stable_cf, q_br, PlatformPayoff(V), hclass)

    predictions = _vertex_predictions(p_cf, hclass, V, stable_p.survivors)
    empirical = float(np.abs(predictions - naive_true).max())
    bound = (2.0 * lipschitz + 1.0) * math.sqrt(instance.spaces.n_behaviors * eps)
    return PredictabilityReport(
        bound=bound,
        empirical_gap=empirical,
        holds=empirical <= bound,
        lipschitz=lipschitz,
        lipschitz_provenance=provenance,
        naive_true=naive_true,
        survivors=stable_p.survivors,
        covering_radius=radius,
    )


@dataclass(frozen=True)
class ExpansionReport:
    subset: tuple[int, ...]
    naive_sub: float
    naive_full: float
    strategic_sub: float
    strategic_full: float

    @property
    def naive_not_lower(self) -> bool:
        return self.naive_full >= self.naive_sub - 1e-12

    @property
    def strategic_drop(self) -> float:
        return self.strategic_sub - self.strategic_full

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["naive_not_lower"] = self.naive_not_lower
        out["strategic_drop"] = self.strategic_drop
        return out


def expansion_check(
    instance: GameInstance,
    subset: Sequence[int],
    user: UserParams,
    params: DominanceParams | None = None,
    jobs: int = 1,
) -> ExpansionReport:
    """Pior caso da plataforma com a subclasse e com a classe completa, para os dois modos."""
    subset = tuple(sorted(int(i) for i in subset))
    hclass = instance.hypothesis_class
    prior = instance.prior.weights[list(subset)]
    sub_instance = instance.with_class(hclass.subset(subset), Belief(prior / prior.sum()))
    values = {}
    for mode in ("naive", "strategic"):
        u = dataclasses.replace(user, mode=mode)
        values[mode] = (
            user_response(sub_instance, u, params, jobs).worst_case_platform_payoff,
            user_response(instance, u, params, jobs).worst_case_platform_payoff,
        )
    return ExpansionReport(subset, values["naive"][0], values["naive"][1], values["strategic"][0], values["strategic"][1])


def quadratic_payoff(V: PayoffMatrix, c: float) -> PayoffMatrix:
    """U(Z, B) = (V(Z, B) - c)^2 com faixa derivada da faixa de V."""
    lo_v, hi_v = V.declared_range
    ends = ((lo_v - c) ** 2, (hi_v - c) ** 2)
    lo = 0.0 if lo_v <= c <= hi_v else min(ends)
    hi = max(ends)
    return PayoffMatrix((V.values - c) ** 2, (lo, hi))

