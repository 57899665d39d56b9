"""Usuário ingênuo e estratégico, payoffs esperados e o teste de alinhamento."""

from __future__ import annotations

import dataclasses
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from stratsim.algorithms import BeliefGrid, ProposerAlgorithm
from stratsim.core import (
    DimensionError,
    GameInstance,
    PayoffMatrix,
    PreconditionError,
    SizeGuardError,
    Strategy,
    ValidationError,
    expected_payoff_rows,
)
from stratsim.stability import DominanceParams, StableSetResult, stable_set

logger = logging.getLogger(__name__)

DEFAULT_MASK_CAP = 16
# Limite de candidatos depois da deduplicação
CANDIDATE_GUARD = 4096
# Empates no argmax dentro desta tolerância
TIE_TOL = 1e-12


@dataclass(frozen=True)
class AllSupportMasks:
    cap: int = DEFAULT_MASK_CAP
    kind: str = "all_support_masks"


@dataclass(frozen=True)
class PartitionMasks:
    subsets: tuple[frozenset[int], ...]
    kind: str = "partition_masks"


@dataclass(frozen=True)
class Explicit:
    strategies: tuple[Strategy, ...]
    labels: tuple[str, ...] | None = None
    kind: str = "explicit"


@dataclass(frozen=True)
class GridRefine:
    base_masks: tuple[frozenset[int], ...]
    resolution: int = 4
    kind: str = "grid_refine"


CandidateSpec = AllSupportMasks | PartitionMasks | Explicit | GridRefine


@dataclass(frozen=True)
class UserParams:
    """Parâmetros do usuário; ``lam`` e ``opt_out_behavior`` None herdam da instância."""

    mode: str = "strategic"
    lam: float | None = None
    opt_out_behavior: int | None = None
    candidates: CandidateSpec = field(default_factory=AllSupportMasks)

    def __post_init__(self) -> None:
        if self.mode not in ("naive", "strategic"):
            raise ValidationError(f"modo de usuário desconhecido: {self.mode}")
        if self.lam is not None and self.lam < 0:
            raise ValidationError("lambda deve ser >= 0")

    def resolve(self, instance: GameInstance) -> "UserParams":
        lam = instance.lam if self.lam is None else self.lam
        opt = instance.opt_out_behavior if self.opt_out_behavior is None else self.opt_out_behavior
        if not 0 <= opt < instance.spaces.n_behaviors:
            raise ValidationError(f"opt_out_behavior fora do intervalo: {opt}")
        return dataclasses.replace(self, lam=float(lam), opt_out_behavior=int(opt))

    def describe(self) -> dict:
        spec = self.candidates
        out = {"mode": self.mode, "lam": self.lam, "opt_out_behavior": self.opt_out_behavior, "family": spec.kind}
        if isinstance(spec, AllSupportMasks):
            out["cap"] = spec.cap
        elif isinstance(spec, PartitionMasks):
            out["subsets"] = [sorted(s) for s in spec.subsets]
        elif isinstance(spec, GridRefine):
            out["base_masks"] = [sorted(s) for s in spec.base_masks]
            out["resolution"] = spec.resolution
        else:
            out["n_strategies"] = len(spec.strategies)
        return out


@dataclass(frozen=True)
class Candidate:
    id: int
    label: str
    strategy: Strategy


@dataclass(frozen=True)
class CandidateEvaluation:
    id: int
    label: str
    survivors: tuple[int, ...]
    user_payoff: float
    platform_payoff: float
    deviation: float

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class StrategicSolution:
    strategy: Strategy
    candidate_id: int
    label: str
    stable_set: StableSetResult
    worst_case_user_payoff: float
    worst_case_platform_payoff: float
    per_candidate_table: tuple[CandidateEvaluation, ...]
    family: dict

    def to_dict(self, hclass=None) -> dict:
        return {
            "strategy": self.strategy.to_dict(),
            "candidate_id": self.candidate_id,
            "label": self.label,
            "stable_set": self.stable_set.to_dict(hclass),
            "worst_case_user_payoff": self.worst_case_user_payoff,
            "worst_case_platform_payoff": self.worst_case_platform_payoff,
            "per_candidate_table": [row.to_dict() for row in self.per_candidate_table],
            "family": self.family,
        }


def naive_strategy(U: PayoffMatrix) -> Strategy:
    """q^BR: por linha, uniforme sobre o argmax de U(Z, .)."""
    values = U.values
    best = values == values.max(axis=1, keepdims=True)
    return Strategy(best / best.sum(axis=1, keepdims=True))


def deviation(q: Strategy, q_br: Strategy) -> float:
    """sum_Z TV(q(.|Z), q^BR(.|Z))."""
    return float((0.5 * np.abs(q.rows - q_br.rows).sum(axis=1)).sum())


def _row_tv(q: Strategy, q_br: Strategy) -> np.ndarray:
    if q.shape != q_br.shape:
        raise DimensionError(f"estratégias com shapes {q.shape} e {q_br.shape}")
    return np.minimum(1.0, 0.5 * np.abs(q.rows - q_br.rows).sum(axis=1))


@dataclass(frozen=True)
class UserPayoff:
    """Ū(r, q) = E_Z[ E_B U(Z,B) - lambda * TV(q(.|Z), q^BR(.|Z)) ]."""

    U: PayoffMatrix
    q_br: Strategy
    lam: float
    name: str = "user"

    def per_item(self, q: Strategy) -> np.ndarray:
        return expected_payoff_rows(q, self.U) - self.lam * _row_tv(q, self.q_br)


@dataclass(frozen=True)
class PlatformPayoff:
    """V̄(r, q) = E_{Z~r, B~q} V(Z, B)."""

    V: PayoffMatrix
    name: str = "platform"

    def per_item(self, q: Strategy) -> np.ndarray:
        return expected_payoff_rows(q, self.V)


def _vector(r: Any) -> np.ndarray:
    return r.weights if hasattr(r, "weights") else np.asarray(r, dtype=np.float64)


def expected_user_payoff(r: Any, q: Strategy, q_br: Strategy, U: PayoffMatrix, lam: float) -> float:
    r = _vector(r)
    if r.size != q.shape[0]:
        raise DimensionError(f"r tem tamanho {r.size}, |Z| = {q.shape[0]}")
    return float(r @ UserPayoff(U, q_br, lam).per_item(q))


def expected_platform_payoff(r: Any, q: Strategy, V: PayoffMatrix) -> float:
    r = _vector(r)
    if r.size != q.shape[0]:
        raise DimensionError(f"r tem tamanho {r.size}, |Z| = {q.shape[0]}")
    return float(r @ PlatformPayoff(V).per_item(q))


def worst_case_over_stable(
    r_of_belief: ProposerAlgorithm,
    stable: StableSetResult,
    q: Strategy,
    payoff: UserPayoff | PlatformPayoff,
    hclass,
    grid: BeliefGrid | None = None,
    sense: str = "min",
) -> float:
    """Extremo do payoff em p(.; mu) com mu na grade restrita a Delta(sobreviventes)."""
    if sense not in ("min", "max"):
        raise ValidationError(f"sense deve ser 'min' ou 'max', recebido {sense}")
    survivors = list(stable.survivors)
    if not survivors:
        raise PreconditionError("conjunto estável vazio")
    m = len(hclass)
    if len(survivors) == 1:
        points = BeliefGrid.vertices(survivors, m).points
    elif grid is not None:
        points = grid.restrict(survivors).points
    else:
        points = BeliefGrid.sweep(r_of_belief, survivors, m, stable.grid_used.resolution).points
    values = r_of_belief.evaluate(points, hclass) @ payoff.per_item(q)
    return float(values.min() if sense == "min" else values.max())


def _mask_strategy(q_br: Strategy, mask: set[int], opt_out: int, level: float = 1.0) -> Strategy:
    n_z, n_b = q_br.shape
    opt_row = np.zeros(n_b)
    opt_row[opt_out] = 1.0
    rows = np.tile(opt_row, (n_z, 1))
    for z in mask:
        rows[z] = level * q_br.rows[z] + (1.0 - level) * opt_row
    return Strategy(rows)


def _mask_label(mask: set[int]) -> str:
    return "mask:{" + ",".join(f"z{z}" for z in sorted(mask)) + "}"


def generate_candidates(instance: GameInstance, user: UserParams) -> list[Candidate]:
    """Família finita de candidatos; id 0 é sempre q^BR, duplicatas ficam com o menor id."""
    user = user.resolve(instance)
    q_br = naive_strategy(instance.user_payoff)
    n_z = instance.spaces.n_propositions
    opt = user.opt_out_behavior
    spec = user.candidates
    raw: list[tuple[str, Strategy]] = [("q_br", q_br)]

    if isinstance(spec, AllSupportMasks):
        if n_z > spec.cap:
            raise PreconditionError(f"AllSupportMasks exige |Z| <= {spec.cap}, recebido {n_z}")
        for bits in range(2**n_z):
            mask = {z for z in range(n_z) if bits >> z & 1}
            raw.append((_mask_label(mask), _mask_strategy(q_br, mask, opt)))
    elif isinstance(spec, PartitionMasks):
        for subset in spec.subsets:
            mask = set(subset)
            if not mask <= set(range(n_z)):
                raise DimensionError(f"máscara fora de Z: {sorted(mask)}")
            raw.append((_mask_label(mask), _mask_strategy(q_br, mask, opt)))
    elif isinstance(spec, GridRefine):
        if spec.resolution < 1:
            raise ValidationError("resolution do GridRefine deve ser >= 1")
        for subset in spec.base_masks:
            mask = set(subset)
            for j in range(1, spec.resolution + 1):
                level = j / spec.resolution
                raw.append((f"{_mask_label(mask)}@{j}/{spec.resolution}", _mask_strategy(q_br, mask, opt, level)))
    elif isinstance(spec, Explicit):
        labels = spec.labels or tuple(f"explicit:{i}" for i in range(len(spec.strategies)))
        for label, s in zip(labels, spec.strategies):
            if s.shape != q_br.shape:
                raise DimensionError(f"candidato {label} tem shape {s.shape}")
            raw.append((label, s))
    else:
        raise ValidationError(f"família de candidatos desconhecida: {spec!r}")

    out: list[Candidate] = []
    seen: set[bytes] = set()
    for label, s in raw:
        key = s.rows.tobytes()
        if key in seen:
            continue
        seen.add(key)
        out.append(Candidate(len(out), label, s))
        if len(out) > CANDIDATE_GUARD:
            raise SizeGuardError(f"família com mais de {CANDIDATE_GUARD} candidatos")
    return out


def _select(rows: Sequence[CandidateEvaluation]) -> CandidateEvaluation:
    rows = sorted(rows, key=lambda r: r.id)
    top = max(r.user_payoff for r in rows)
    tied = [r for r in rows if r.user_payoff >= top - TIE_TOL]
    return min(tied, key=lambda r: (r.deviation, r.id))


def evaluate_candidates(
    instance: GameInstance,
    user: UserParams,
    params: DominanceParams | None = None,
    jobs: int = 1,
    candidates: Sequence[Candidate] | None = None,
) -> tuple[list[Candidate], dict[int, tuple[StableSetResult, CandidateEvaluation]]]:
    """Conjunto estável e payoffs de pior caso de cada candidato."""
    params = params or DominanceParams()
    user = user.resolve(instance)
    candidates = list(candidates) if candidates is not None else generate_candidates(instance, user)
    if not candidates:
        raise PreconditionError("família de candidatos vazia")
    hclass = instance.hypothesis_class
    alg = instance.algorithm
    q_br = naive_strategy(instance.user_payoff)
    u_pay = UserPayoff(instance.user_payoff, q_br, user.lam)
    v_pay = PlatformPayoff(instance.platform_payoff)
    done = 0
    done_lock = threading.Lock()

    def task(c: Candidate) -> tuple[StableSetResult, CandidateEvaluation]:
        nonlocal done
        stable = stable_set(c.strategy, alg, hclass, params)
        u = worst_case_over_stable(alg, stable, c.strategy, u_pay, hclass)
        v = worst_case_over_stable(alg, stable, c.strategy, v_pay, hclass)
        row = CandidateEvaluation(c.id, c.label, stable.survivors, u, v, deviation(c.strategy, q_br))
        with done_lock:
            done += 1
        logger.debug("Candidato %d (%s): sobreviventes %s, U=%.6g, V=%.6g", c.id, c.label, stable.survivors, u, v)
        return stable, row

    if jobs <= 1:
        results = {c.id: task(c) for c in candidates}
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = {c.id: pool.submit(task, c) for c in candidates}
            results = {cid: futures[cid].result() for cid in sorted(futures)}
    logger.info("%d candidatos avaliados", done)
    return candidates, results


def solve_strategic(
    instance: GameInstance,
    user: UserParams,
    params: DominanceParams | None = None,
    jobs: int = 1,
    candidates: Sequence[Candidate] | None = None,
) -> StrategicSolution:
    """argmax sobre candidatos do pior caso de Ū no conjunto estável induzido.

    Empates (dentro de 1e-12) vão para o menor desvio de q^BR e depois para o menor id.
    """
    user = user.resolve(instance)
    candidates, results = evaluate_candidates(instance, user, params, jobs, candidates)
    table = tuple(results[c.id][1] for c in candidates)
    best = _select(table)
    return StrategicSolution(
        strategy=candidates[best.id].strategy,
        candidate_id=best.id,
        label=best.label,
        stable_set=results[best.id][0],
        worst_case_user_payoff=best.user_payoff,
        worst_case_platform_payoff=best.platform_payoff,
        per_candidate_table=table,
        family=user.describe(),
    )


def user_response(
    instance: GameInstance,
    user: UserParams,
    params: DominanceParams | None = None,
    jobs: int = 1,
) -> StrategicSolution:
    """Resposta do usuário conforme o modo: q^BR (ingênuo) ou a solução estratégica."""
    user = user.resolve(instance)
    if user.mode == "strategic":
        return solve_strategic(instance, user, params, jobs)
    q_br = naive_strategy(instance.user_payoff)
    return solve_strategic(instance, user, params, candidates=[Candidate(0, "q_br", q_br)])


@dataclass(frozen=True)
class AlignmentReport:
    lhs: float
    rhs: float
    strategization_helps: bool
    sense: str
    strategic_label: str
    naive_side_label: str
    # o lado ingênuo deve coincidir com q^BR quando U tem maximizador único
    naive_side_matches_br: bool

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def alignment_benefit_check(
    instance: GameInstance,
    user: UserParams,
    params: DominanceParams | None = None,
    sense: str = "min",
    jobs: int = 1,
) -> AlignmentReport:
    """Compara Ṽ no argmax estratégico com Ṽ no argmax sobre toda Delta(Q)."""
    ties = instance.user_payoff.has_unique_maximizers()
    if ties:
        names = ", ".join(instance.spaces.proposition_name(z) for z in ties)
        raise PreconditionError(f"U não tem maximizador único em Z = {names}")
    params = params or DominanceParams()
    user = user.resolve(instance)
    hclass = instance.hypothesis_class
    alg = instance.algorithm
    m = len(hclass)
    q_br = naive_strategy(instance.user_payoff)
    u_pay = UserPayoff(instance.user_payoff, q_br, user.lam)
    v_pay = PlatformPayoff(instance.platform_payoff)

    candidates, results = evaluate_candidates(instance, user, params, jobs)
    table = [results[c.id][1] for c in candidates]

    def tilde_v(cid: int) -> float:
        stable = results[cid][0]
        return worst_case_over_stable(alg, stable, candidates[cid].strategy, v_pay, hclass, sense=sense)

    strategic = _select(table)
    full_points = BeliefGrid.sweep(alg, range(m), m, params.grid_k).points
    r_full = alg.evaluate(full_points, hclass)
    naive_rows = [
        dataclasses.replace(row, user_payoff=float((r_full @ u_pay.per_item(candidates[row.id].strategy)).min()))
        for row in table
    ]
    naive_side = _select(naive_rows)
    matches = candidates[naive_side.id].strategy.equals(q_br)
    if not matches:
        logger.warning("lado ingênuo (%s) difere de q^BR", naive_side.label)

    lhs, rhs = tilde_v(strategic.id), tilde_v(naive_side.id)
    return AlignmentReport(
        lhs=lhs,
        rhs=rhs,
        strategization_helps=lhs > rhs,
        sense=sense,
        strategic_label=strategic.label,
        naive_side_label=naive_side.label,
        naive_side_matches_br=matches,
    )
