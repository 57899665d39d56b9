"""Recomendador estilizado, construções auxiliares e reprodução das proposições 1 a 5.

Os oráculos analíticos usam ``fractions.Fraction`` (aritmética exata) e são
independentes dos motores genéricos.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Sequence

import numpy as np

from stratsim.algorithms import EngagementProportional, ProposerAlgorithm, Reweighted, Uniform
from stratsim.core import (
    ActionSpaces,
    GameInstance,
    HypothesisClass,
    PayoffMatrix,
    PreconditionError,
    StratsimError,
    Strategy,
    ValidationError,
)
from stratsim.simulator import DEFAULT_HOLD, DEFAULT_THRESHOLD, detect_convergence, run_many
from stratsim.stability import DominanceParams, dominates, stable_set, stylized_stable_set
from stratsim.strategize import (
    AllSupportMasks,
    PartitionMasks,
    UserParams,
    naive_strategy,
    solve_strategic,
    user_response,
)
from stratsim.trust import build_eps_net_class, counterfactual_audit, expansion_check

logger = logging.getLogger(__name__)

BEHAVIOR_LABELS = ("ignora", "clica")
NO_CLICK, CLICK = 0, 1
DEFAULT_ALPHA = 0.01
DEFAULT_ETA = 0.5
EXACT_TOL = 1e-12
CALIBRATION_TOL = 1e-9


def _frac(x: float) -> Fraction:
    return Fraction(str(x))


@dataclass(frozen=True)
class StylizedParams:
    partition_a: tuple[int, ...]
    partition_b: tuple[int, ...]
    affinity: tuple[int, ...]
    gamma: float
    eps: float
    lam: float = 0.0

    def __post_init__(self) -> None:
        a, b = set(self.partition_a), set(self.partition_b)
        n = len(self.affinity)
        if not a or not b:
            raise ValidationError("Z_A e Z_B precisam ser não vazios")
        if a & b:
            raise ValidationError(f"Z_A e Z_B se sobrepõem em {sorted(a & b)}")
        if a | b != set(range(n)):
            raise ValidationError("Z_A e Z_B precisam cobrir Z")
        if any(x not in (-1, 1) for x in self.affinity):
            raise ValidationError("afinidade deve ser +1 ou -1")
        if not 0.0 < self.gamma < 1.0:
            raise ValidationError(f"gamma deve estar em (0, 1), recebido {self.gamma}")
        if not 0.0 < self.eps < 1.0:
            raise ValidationError(f"eps deve estar em (0, 1), recebido {self.eps}")
        if self.lam < 0:
            raise ValidationError("lambda deve ser >= 0")
        object.__setattr__(self, "partition_a", tuple(sorted(a)))
        object.__setattr__(self, "partition_b", tuple(sorted(b)))
        object.__setattr__(self, "affinity", tuple(int(x) for x in self.affinity))

    @property
    def n(self) -> int:
        return len(self.affinity)

    @property
    def positives(self) -> set[int]:
        return {z for z, a in enumerate(self.affinity) if a == 1}

    @property
    def counts(self) -> tuple[int, int, int, int]:
        """(|A∩Z+|, |A∖Z+|, |B∩Z+|, |B∖Z+|)."""
        pos = self.positives
        a, b = set(self.partition_a), set(self.partition_b)
        return (len(a & pos), len(a - pos), len(b & pos), len(b - pos))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def s1_params(**overrides: Any) -> StylizedParams:
    """|Z_A| = |Z_B| = 4, positivos {z0, z1, z2, z4, z5}: contagens (3, 1, 2, 2)."""
    base = dict(
        partition_a=(0, 1, 2, 3),
        partition_b=(4, 5, 6, 7),
        affinity=(1, 1, 1, -1, 1, 1, -1, -1),
        gamma=0.2,
        eps=0.1,
        lam=0.0,
    )
    base.update(overrides)
    return StylizedParams(**base)


def s1_subset_a_params(**overrides: Any) -> StylizedParams:
    """Variante com Z+ contido em Z_A (positivos só em z0, z1)."""
    return s1_params(affinity=(1, 1, -1, -1, -1, -1, -1, -1), **overrides)


def stylized_class(params: StylizedParams) -> HypothesisClass:
    n = params.n
    click = 1.0 - params.gamma
    in_a = np.zeros(n, dtype=bool)
    in_a[list(params.partition_a)] = True
    clicks = [np.where(in_a, click, 0.0), np.where(in_a, 0.0, click), np.full(n, click)]
    return HypothesisClass([np.stack([1.0 - c, c], axis=1) for c in clicks], ["q1", "q2", "q3"])


def constant_click_model(n: int, click: float) -> Strategy:
    return Strategy(np.tile([1.0 - click, click], (n, 1)))


def make_stylized(params: StylizedParams, name: str = "stylized") -> GameInstance:
    """V = engajamento, U = engajamento x afinidade, classe de três modelos, algoritmo eps-proporcional."""
    n = params.n
    engage = np.tile([0.0, 1.0], (n, 1))
    affinity = np.array(params.affinity, dtype=np.float64)
    hclass = stylized_class(params)
    # q3 clica com probabilidade 1 - gamma em todo item: denominador nunca se anula
    assert np.all(hclass.tensor[2, :, CLICK] > 0)
    return GameInstance(
        spaces=ActionSpaces(n, 2, tuple(f"z{z}" for z in range(n)), BEHAVIOR_LABELS),
        user_payoff=PayoffMatrix(engage * affinity[:, None], (-1.0, 1.0)),
        platform_payoff=PayoffMatrix(engage, (0.0, 1.0)),
        algorithm=EngagementProportional(params.eps),
        hypothesis_class=hclass,
        lam=params.lam,
        opt_out_behavior=NO_CLICK,
        name=name,
        metadata={"stylized": params.to_dict()},
    )


def mask_strategy(n: int, clicks: Sequence[int]) -> Strategy:
    """Clica com probabilidade 1 nos itens dados e nunca nos demais."""
    rows = np.tile([1.0, 0.0], (n, 1))
    rows[list(clicks)] = [0.0, 1.0]
    return Strategy(rows)


def toxicity_weights(params: StylizedParams, alpha: float = DEFAULT_ALPHA) -> np.ndarray:
    """alpha em Z_A∩Z+ e em Z_B∖Z+, 1 nos demais."""
    if not alpha > 0:
        raise ValidationError("alpha deve ser > 0")
    pos = params.positives
    w = np.ones(params.n)
    for z in params.partition_a:
        if z in pos:
            w[z] = alpha
    for z in params.partition_b:
        if z not in pos:
            w[z] = alpha
    return w


def toxicity_algorithm(params: StylizedParams, alpha: float = DEFAULT_ALPHA) -> ProposerAlgorithm:
    return Reweighted(EngagementProportional(params.eps), toxicity_weights(params, alpha), componentwise=True)


# Oráculos analíticos (frações exatas)


def analytic_side_value(params: StylizedParams, side: str = "A") -> Fraction:
    """Payoff (usuário = plataforma, lambda = 0) de clicar só nos positivos de um lado."""
    n1, n2, n3, n4 = params.counts
    eps, n = _frac(params.eps), params.n
    pos, size = (n1, n1 + n2) if side == "A" else (n3, n3 + n4)
    return eps * pos / n + (1 - eps) * Fraction(pos, size)


def analytic_naive_value(params: StylizedParams) -> Fraction:
    """Payoff do usuário ingênuo (lambda = 0)."""
    n1, _, n3, _ = params.counts
    if n3 == 0:
        return analytic_side_value(params, "A")
    if n1 == 0:
        return analytic_side_value(params, "B")
    return Fraction(n1 + n3, params.n)


def analytic_predicted_at_q1(params: StylizedParams) -> Fraction:
    """V̂(p, delta_q1) = (1 - gamma) [eps |A| / N + 1 - eps]."""
    eps, gamma = _frac(params.eps), _frac(params.gamma)
    return (1 - gamma) * (eps * len(params.partition_a) / params.n + 1 - eps)


def calibrate_gamma(params: StylizedParams) -> Fraction:
    """gamma que iguala a previsão em delta_q1 ao payoff verdadeiro do lado A."""
    eps = _frac(params.eps)
    target = analytic_side_value(params, "A")
    return 1 - target / (eps * len(params.partition_a) / params.n + 1 - eps)


def analytic_toxicity_predicted(params: StylizedParams, alpha: float = DEFAULT_ALPHA) -> Fraction:
    n1, n2, n3, n4 = params.counts
    eps, gamma, a = _frac(params.eps), _frac(params.gamma), _frac(alpha)
    return (1 - gamma) * (eps * (a * n1 + n2) / (a * n1 + n2 + n3 + a * n4) + (1 - eps))


def analytic_toxicity_true(params: StylizedParams, alpha: float = DEFAULT_ALPHA) -> Fraction:
    n1, n2, n3, n4 = params.counts
    eps, a = _frac(params.eps), _frac(alpha)
    return eps * n3 / (a * n1 + n2 + n3 + a * n4) + (1 - eps) * n3 / (n3 + a * n4)


def prop2_thresholds(params: StylizedParams) -> dict:
    """Limiares de eps: o enunciado |A||B|Delta/n_A e o limiar exato onde o lado denso vence o ingênuo.

    Os lados são trocados quando a densidade de positivos em B é maior.
    """
    n1, n2, n3, n4 = params.counts
    size_a, size_b = n1 + n2, n3 + n4
    if Fraction(n3, size_b) > Fraction(n1, size_a):
        n1, size_a, n3, size_b = n3, size_b, n1, size_a
    delta = Fraction(n1, size_a) - Fraction(n3, size_b)
    n = params.n
    if n1 == 0 or delta == 0:
        return {"delta": delta, "stated": None, "binding": None}
    stated = size_a * size_b * delta / n1
    gain = Fraction(n1, size_a) - Fraction(n1 + n3, n)
    binding = gain / (n1 * (Fraction(1, size_a) - Fraction(1, n)))
    return {"delta": delta, "stated": stated, "binding": binding}


def random_stylized_params(
    rng: np.random.Generator,
    n_min: int = 2,
    n_max: int = 8,
    eps_range: tuple[float, float] = (0.0, 0.3),
    gamma_range: tuple[float, float] = (0.05, 0.5),
    lam: float = 0.0,
) -> StylizedParams:
    """Partição, afinidades (ao menos um positivo), eps e gamma aleatórios."""
    n = int(rng.integers(n_min, n_max + 1))
    perm = rng.permutation(n)
    size_a = int(rng.integers(1, n))
    affinity = rng.choice([-1, 1], size=n)
    if not np.any(affinity == 1):
        affinity[int(rng.integers(n))] = 1
    eps = float(rng.uniform(*eps_range))
    gamma = float(rng.uniform(*gamma_range))
    return StylizedParams(
        partition_a=tuple(int(z) for z in perm[:size_a]),
        partition_b=tuple(int(z) for z in perm[size_a:]),
        affinity=tuple(int(a) for a in affinity),
        gamma=min(max(gamma, 1e-3), 1 - 1e-3),
        eps=min(max(eps, 1e-3), 1 - 1e-3),
        lam=lam,
    )


def make_prop4_instance(alpha: float = DEFAULT_ALPHA, eps: float = 0.1) -> tuple[GameInstance, ProposerAlgorithm]:
    """Geometria S1 com gamma calibrado (0.25 para eps = 0.1) e o repeso de toxicidade."""
    gamma = calibrate_gamma(s1_params(eps=eps))
    params = s1_params(eps=eps, gamma=float(gamma))
    return make_stylized(params, "prop4"), toxicity_algorithm(params, alpha)


def prop5_params(gamma: float = 0.2, eps: float = 0.1, lam: float = 0.01) -> StylizedParams:
    return s1_params(affinity=(1, 1, -1, -1, 1, -1, -1, -1), gamma=gamma, eps=eps, lam=lam)


def make_prop5_instance(
    eta: float = DEFAULT_ETA, gamma: float = 0.2, eps: float = 0.1, lam: float = 0.01
) -> tuple[GameInstance, GameInstance]:
    """Antes: classe de três modelos. Depois: mais q4 com clique 1 - eta em todo item."""
    if not 0.0 < eta < 1.0:
        raise ValidationError(f"eta deve estar em (0, 1), recebido {eta}")
    params = prop5_params(gamma, eps, lam)
    before = make_stylized(params, "prop5_before")
    hclass = before.hypothesis_class.extended(constant_click_model(params.n, 1.0 - eta), "q4")
    after = dataclasses.replace(before.with_class(hclass), name="prop5_after")
    return before, after


def make_eps_net_instance(n_propositions: int = 2, eps: float = 0.25) -> GameInstance:
    """Instância mínima com classe rede-ε: V = clique, U prefere clicar nos itens pares."""
    spaces = ActionSpaces(n_propositions, 2, tuple(f"z{z}" for z in range(n_propositions)), BEHAVIOR_LABELS)
    prefer = np.array([[0.0, 1.0] if z % 2 == 0 else [1.0, 0.0] for z in range(n_propositions)])
    return GameInstance(
        spaces=spaces,
        user_payoff=PayoffMatrix(prefer, (0.0, 1.0)),
        platform_payoff=PayoffMatrix(np.tile([0.0, 1.0], (n_propositions, 1)), (0.0, 1.0)),
        algorithm=Uniform(),
        hypothesis_class=build_eps_net_class(spaces, eps),
        name="eps_net",
        metadata={"eps": eps},
    )


def _stylized_from(params: dict, default: Callable[..., StylizedParams]) -> StylizedParams:
    params = dict(params)
    for key in ("partition_a", "partition_b", "affinity"):
        if key in params:
            params[key] = tuple(params[key])
    return default(**params)


SCENARIOS: dict[str, Callable[[dict], GameInstance]] = {
    "stylized": lambda p: make_stylized(_stylized_from(p, StylizedParams), "stylized"),
    "s1": lambda p: make_stylized(_stylized_from(p, s1_params), "s1"),
    "s1_subset_a": lambda p: make_stylized(_stylized_from(p, s1_subset_a_params), "s1_subset_a"),
    "prop4": lambda p: make_prop4_instance(**p)[0],
    "prop5_before": lambda p: make_prop5_instance(**p)[0],
    "prop5_after": lambda p: make_prop5_instance(**p)[1],
    "eps_net": lambda p: make_eps_net_instance(**p),
}


def build_scenario(name: str, params: dict | None = None) -> GameInstance:
    if name not in SCENARIOS:
        raise ValidationError(f"cenário desconhecido: {name!r} (disponíveis: {', '.join(sorted(SCENARIOS))})")
    try:
        return SCENARIOS[name](params or {})
    except TypeError as e:
        raise ValidationError(f"parâmetros inválidos para o cenário {name!r}: {e}") from e


# Reprodução das proposições


@dataclass(frozen=True)
class ReproduceSettings:
    params: DominanceParams = field(default_factory=DominanceParams)
    seeds: tuple[int, ...] = tuple(range(20))
    horizon: int = 5000
    threshold: float = DEFAULT_THRESHOLD
    hold: int = DEFAULT_HOLD
    n_random: int = 100
    random_seed: int = 0
    sensitivity: bool = False
    jobs: int = 1


@dataclass
class PropositionReport:
    prop_id: int
    analytic: dict = field(default_factory=dict)
    computed: dict = field(default_factory=dict)
    deltas: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    sensitivity: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)
    error: str | None = None

    @property
    def passed(self) -> bool:
        if self.error is not None:
            return False
        within = all(abs(self.deltas[k]) <= self.tolerances.get(k, EXACT_TOL) for k in self.deltas)
        return within and all(self.checks.values())

    def compare(self, key: str, analytic: Fraction | float, computed: float, tol: float = EXACT_TOL) -> None:
        self.analytic[key] = float(analytic)
        self.computed[key] = float(computed)
        self.deltas[key] = float(Fraction(computed) - Fraction(analytic))
        self.tolerances[key] = tol

    def to_dict(self) -> dict:
        return {
            "prop_id": self.prop_id,
            "analytic": self.analytic,
            "computed": self.computed,
            "deltas": self.deltas,
            "tolerances": self.tolerances,
            "checks": self.checks,
            "sensitivity": self.sensitivity,
            "notes": self.notes,
            "error": self.error,
            "pass": self.passed,
        }


def _prop1(report: PropositionReport, settings: ReproduceSettings) -> None:
    params = s1_params()
    instance = make_stylized(params, "s1")
    hclass = instance.hypothesis_class
    n1_side = sorted(set(params.partition_a) & params.positives)
    n3_side = sorted(set(params.partition_b) & params.positives)
    cases = {
        "support_in_A": mask_strategy(params.n, n1_side),
        "support_in_B": mask_strategy(params.n, n3_side),
        "naive": naive_strategy(instance.user_payoff),
    }
    partition = (params.partition_a, params.partition_b)
    for case, q in cases.items():
        result = stable_set(q, instance.algorithm, hclass, settings.params)
        expected = stylized_stable_set(q, partition)
        report.analytic[f"{case}_survivors"] = [expected]
        report.computed[f"{case}_survivors"] = list(result.survivors)
        report.checks[f"{case}_matches_oracle"] = result.survivors == (expected,)
        trajs = run_many(instance, q, settings.seeds, settings.horizon, jobs=settings.jobs)
        steps = {s: detect_convergence(t, result.survivors, settings.threshold, settings.hold) for s, t in trajs.items()}
        converged = sum(1 for v in steps.values() if v is not None)
        report.computed[f"{case}_converged_runs"] = converged
        report.computed[f"{case}_max_convergence_step"] = max((v for v in steps.values() if v is not None), default=None)
        report.checks[f"{case}_all_runs_converge"] = converged == len(settings.seeds) and len(settings.seeds) > 0
    report.notes["runs_per_case"] = len(settings.seeds)
    report.notes["horizon"] = settings.horizon


def _prop2(report: PropositionReport, settings: ReproduceSettings) -> None:
    params = s1_params()
    instance = make_stylized(params, "s1")
    pos = params.positives
    family = PartitionMasks(
        (frozenset(pos), frozenset(pos & set(params.partition_a)), frozenset(pos & set(params.partition_b)))
    )
    strategic = solve_strategic(instance, UserParams(candidates=family), settings.params, settings.jobs)
    naive = user_response(instance, UserParams(mode="naive"), settings.params)
    report.compare("strategic_user_value", analytic_side_value(params, "A"), strategic.worst_case_user_payoff)
    report.compare("naive_user_value", analytic_naive_value(params), naive.worst_case_user_payoff)
    report.computed["strategic_label"] = strategic.label
    report.checks["strategic_differs_from_br"] = strategic.candidate_id != 0

    variant = make_stylized(s1_subset_a_params(), "s1_subset_a")
    solved = solve_strategic(variant, UserParams(candidates=AllSupportMasks()), settings.params, settings.jobs)
    report.computed["subset_a_label"] = solved.label
    report.checks["subset_a_returns_br"] = solved.candidate_id == 0

    thresholds = prop2_thresholds(params)
    report.notes["eps"] = params.eps
    report.notes["eps_threshold_stated"] = float(thresholds["stated"])
    report.notes["eps_threshold_binding"] = float(thresholds["binding"])
    report.checks["eps_below_binding_threshold"] = _frac(params.eps) < thresholds["binding"]


def _prop3(report: PropositionReport, settings: ReproduceSettings) -> None:
    params = s1_params()
    instance = make_stylized(params, "s1")
    strategic = solve_strategic(instance, UserParams(), settings.params, settings.jobs)
    naive = user_response(instance, UserParams(mode="naive"), settings.params)
    report.compare("strategic_platform", analytic_side_value(params, "A"), strategic.worst_case_platform_payoff)
    report.compare("naive_platform", analytic_naive_value(params), naive.worst_case_platform_payoff)
    report.checks["s1_strategic_at_least_naive"] = (
        strategic.worst_case_platform_payoff >= naive.worst_case_platform_payoff - EXACT_TOL
    )

    rng = np.random.default_rng(settings.random_seed)
    worst = np.inf
    for _ in range(settings.n_random):
        inst = make_stylized(random_stylized_params(rng, n_max=6), "random")
        s = solve_strategic(inst, UserParams(), settings.params)
        nv = user_response(inst, UserParams(mode="naive"), settings.params)
        worst = min(worst, s.worst_case_platform_payoff - nv.worst_case_platform_payoff)
    report.computed["random_instances"] = settings.n_random
    report.computed["min_platform_advantage"] = float(worst) if settings.n_random else None
    report.checks["random_strategic_at_least_naive"] = settings.n_random == 0 or worst >= -EXACT_TOL


def _prop4_values(alpha: float, settings: ReproduceSettings) -> dict:
    instance, p_cf = make_prop4_instance(alpha)
    user = UserParams()
    current = counterfactual_audit(instance, instance.algorithm, user, settings.params, settings.jobs)
    cf = counterfactual_audit(instance, p_cf, user, settings.params, settings.jobs)
    return {
        "predicted_p": current.predicted,
        "true_p": current.true_strategic,
        "predicted_cf": cf.predicted,
        "true_cf": cf.true_strategic,
        "d_P": cf.d_P_between,
        "zeta": cf.zeta,
    }


def _prop4(report: PropositionReport, settings: ReproduceSettings) -> None:
    params = s1_params(gamma=float(calibrate_gamma(s1_params())))
    values = _prop4_values(DEFAULT_ALPHA, settings)
    report.compare("predicted_p", analytic_predicted_at_q1(params), values["predicted_p"], CALIBRATION_TOL)
    report.compare("true_p", analytic_side_value(params, "A"), values["true_p"], CALIBRATION_TOL)
    report.compare("predicted_cf", analytic_toxicity_predicted(params, DEFAULT_ALPHA), values["predicted_cf"], CALIBRATION_TOL)
    report.compare("true_cf", analytic_toxicity_true(params, DEFAULT_ALPHA), values["true_cf"], CALIBRATION_TOL)
    report.computed["d_P"] = values["d_P"]
    report.computed["zeta"] = values["zeta"]
    report.notes["gamma"] = params.gamma
    report.notes["alpha"] = DEFAULT_ALPHA
    report.checks["calibrated"] = abs(values["predicted_p"] - values["true_p"]) <= CALIBRATION_TOL
    report.checks["a_predicted_cf_below_current"] = values["predicted_cf"] < values["true_p"]
    report.checks["b_true_cf_above_current"] = values["true_cf"] > values["true_p"]
    if settings.sensitivity:
        for alpha in (0.001, 0.05):
            v = _prop4_values(alpha, settings)
            report.sensitivity.append(
                {
                    "alpha": alpha,
                    **v,
                    "ordering_holds": v["predicted_cf"] < v["true_p"] < v["true_cf"],
                }
            )


def _prop5_values(eta: float, settings: ReproduceSettings) -> dict:
    before, after = make_prop5_instance(eta)
    user = UserParams()
    sol_before = solve_strategic(before, user, settings.params, settings.jobs)
    sol_after = solve_strategic(after, user, settings.params, settings.jobs)
    expansion = expansion_check(after, range(3), user, settings.params, settings.jobs)
    # q4 contra q1 para a estratégia que induzia q1 antes da expansão
    cert = dominates(
        sol_before.strategy, 3, 0, after.algorithm, range(4), settings.params, after.hypothesis_class
    )
    return {
        "platform_before": sol_before.worst_case_platform_payoff,
        "platform_after": sol_after.worst_case_platform_payoff,
        "label_before": sol_before.label,
        "label_after": sol_after.label,
        "survivors_before": list(sol_before.stable_set.survivors),
        "survivors_after": list(sol_after.stable_set.survivors),
        "naive_not_lower": expansion.naive_not_lower,
        "q4_dominates_q1": cert.dominates,
        "q4_vs_q1_margin": cert.margin,
    }


def _prop5(report: PropositionReport, settings: ReproduceSettings) -> None:
    params = prop5_params()
    values = _prop5_values(DEFAULT_ETA, settings)
    report.compare("platform_before", analytic_side_value(params, "A"), values["platform_before"])
    report.computed.update({k: values[k] for k in ("platform_after", "label_before", "label_after", "survivors_before", "survivors_after")})
    drop = values["platform_before"] - values["platform_after"]
    report.computed["platform_drop"] = drop
    report.notes["eta"] = DEFAULT_ETA
    report.notes["lam"] = params.lam
    report.computed["q4_dominates_q1"] = values["q4_dominates_q1"]
    report.computed["q4_vs_q1_margin"] = values["q4_vs_q1_margin"]
    report.notes["q4_vs_q1"] = _q4_note(DEFAULT_ETA, values)
    report.checks["before_stable_set_is_q1"] = values["survivors_before"] == [0]
    report.checks["platform_drops_by_at_least_0.01"] = drop >= 0.01
    report.checks["naive_payoff_not_lower_after_expansion"] = values["naive_not_lower"]
    if settings.sensitivity:
        for eta in (0.4, 0.6):
            v = _prop5_values(eta, settings)
            report.sensitivity.append(
                {"eta": eta, **v, "drop": v["platform_before"] - v["platform_after"]}
            )


def _q4_note(eta: float, values: dict) -> str:
    """Texto sobre a dominância de q4 sobre q1 (uniforme na grade de crenças ou não)."""
    if values["q4_dominates_q1"]:
        head = f"com eta={eta:g}, q4 domina q1 uniformemente para a estratégia que induzia q1"
    else:
        head = (
            f"com eta={eta:g}, q4 NÃO domina q1 uniformemente para a estratégia que induzia q1 "
            f"(margem mínima {values['q4_vs_q1_margin']:.4g})"
        )
    survivors = values["survivors_after"]
    if 0 in survivors:
        return f"{head}; q1 segue no conjunto estável depois da expansão {survivors}"
    return f"{head}; q1 sai do conjunto estável depois da expansão {survivors}"


_PROPS: dict[int, Callable[[PropositionReport, ReproduceSettings], None]] = {
    1: _prop1,
    2: _prop2,
    3: _prop3,
    4: _prop4,
    5: _prop5,
}


def reproduce(prop_id: int, settings: ReproduceSettings | None = None) -> PropositionReport:
    """Monta o cenário, roda os motores genéricos e compara com os oráculos fechados.

    Erros dos motores não propagam: ficam no relatório com pass = false.
    """
    if prop_id not in _PROPS:
        raise PreconditionError(f"proposição desconhecida: {prop_id} (válidas: 1 a 5)")
    settings = settings or ReproduceSettings()
    report = PropositionReport(prop_id)
    try:
        _PROPS[prop_id](report, settings)
    except StratsimError as e:
        report.error = f"{type(e).__name__}: {e}"
        logger.error("Proposição %d falhou: %s", prop_id, report.error)
    else:
        logger.info("Proposição %d: %s", prop_id, "OK" if report.passed else "FALHOU")
    return report
