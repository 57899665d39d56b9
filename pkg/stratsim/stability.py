"""Conjuntos globalmente estáveis por eliminação iterada de modelos KL-dominados."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy.special import xlogy

from stratsim.algorithms import DEFAULT_GRID_K, ENGAGE_BEHAVIOR, BeliefGrid, ProposerAlgorithm
from stratsim.core import (
    DimensionError,
    Distribution,
    HypothesisClass,
    IndeterminateGapError,
    PreconditionError,
    Strategy,
    ValidationError,
)

logger = logging.getLogger(__name__)

DEFAULT_TAU_DOM = 1e-9


@dataclass(frozen=True)
class DominanceParams:
    """Parâmetros do teste "para todo mu": resolução da grade, margem e rodadas.

    ``max_rounds`` None significa |Q| rodadas.
    """

    grid_k: int = DEFAULT_GRID_K
    tau_dom: float = DEFAULT_TAU_DOM
    max_rounds: int | None = None

    def __post_init__(self) -> None:
        if self.grid_k < 1:
            raise ValidationError("grid_k deve ser >= 1")
        if not self.tau_dom > 0:
            raise ValidationError("tau_dom deve ser > 0")
        if self.max_rounds is not None and self.max_rounds < 1:
            raise ValidationError("max_rounds deve ser >= 1")

    def grid(self, alg: ProposerAlgorithm, active: Sequence[int], m: int) -> BeliefGrid:
        return BeliefGrid.sweep(alg, active, m, self.grid_k)


@dataclass(frozen=True)
class Elimination:
    round: int
    eliminated: int
    dominator: int
    margin: float
    argmin_belief: list[float]

    def to_dict(self) -> dict:
        return {
            "round": self.round,
            "eliminated": self.eliminated,
            "dominator": self.dominator,
            "margin": self.margin,
            "argmin_belief": self.argmin_belief,
        }


@dataclass(frozen=True)
class DominanceCertificate:
    dominates: bool
    margin: float
    argmin_belief: list[float] | None
    indeterminate: bool = False
    inconclusive: bool = False

    def __bool__(self) -> bool:
        return self.dominates


@dataclass(frozen=True)
class StableSetResult:
    survivors: tuple[int, ...]
    rounds: tuple[Elimination, ...]
    grid_used: BeliefGrid
    tau_dom: float = DEFAULT_TAU_DOM
    indeterminate_pairs: tuple[tuple[int, int], ...] = ()
    inconclusive_pairs: tuple[tuple[int, int, float], ...] = ()
    # um único dominador para todo mu (leitura conservadora)
    dominator_rule: str = "uniform"
    active_history: tuple[tuple[int, ...], ...] = field(default=())

    def __post_init__(self) -> None:
        if not self.survivors:
            raise ValidationError("conjunto estável vazio")

    def to_dict(self, hclass: HypothesisClass | None = None) -> dict:
        out = {
            "survivors": list(self.survivors),
            "rounds": [r.to_dict() for r in self.rounds],
            "grid_used": self.grid_used.to_dict(),
            "tau_dom": self.tau_dom,
            "indeterminate_pairs": [list(p) for p in self.indeterminate_pairs],
            "inconclusive_pairs": [list(p) for p in self.inconclusive_pairs],
            "dominator_rule": self.dominator_rule,
        }
        if hclass is not None:
            out["survivor_names"] = [hclass.name(i) for i in self.survivors]
        return out


def log_likelihood_table(q: Strategy, hclass: HypothesisClass) -> np.ndarray:
    """LL[i, Z] = sum_B q(B|Z) log q_i(B|Z); -inf quando q_i viola o suporte de q."""
    if q.shape != hclass.shape:
        raise DimensionError(f"estratégia {q.shape} incompatível com classe {hclass.shape}")
    return xlogy(q.rows[None, :, :], hclass.tensor).sum(axis=2)


def _expected_ll(table: np.ndarray, r: np.ndarray) -> np.ndarray:
    # r: (n, |Z|) -> (n, m); itens com r = 0 não contam
    finite = np.isfinite(table)
    value = r @ np.where(finite, table, 0.0).T
    violated = (r > 0).astype(np.float64) @ (~finite).astype(np.float64).T
    return np.where(violated > 0, -np.inf, value)


def expected_log_likelihoods(q: Strategy, hclass: HypothesisClass, r: Any) -> np.ndarray:
    """E_{Z~r, B~q(.|Z)} log q_i(B|Z) para cada modelo i (-inf em violação de suporte)."""
    r = r.weights if isinstance(r, Distribution) else np.asarray(r, dtype=np.float64)
    if r.shape[-1] != hclass.shape[0]:
        raise DimensionError(f"r tem tamanho {r.shape[-1]}, |Z| = {hclass.shape[0]}")
    out = _expected_ll(log_likelihood_table(q, hclass), np.atleast_2d(r))
    return out[0] if r.ndim == 1 else out


def joint_kl_gap(q: Strategy, qi: int, qj: int, r: Any, hclass: HypothesisClass) -> float:
    """KL_j - KL_i na distribuição conjunta r x q; positivo certifica q_i melhor que q_j em r."""
    if not isinstance(r, Distribution):
        r = Distribution(r)
    if qi == qj:
        return 0.0
    ll = expected_log_likelihoods(q, hclass, r)
    if np.isneginf(ll[qi]) and np.isneginf(ll[qj]):
        raise IndeterminateGapError(
            f"{hclass.name(qi)} e {hclass.name(qj)} violam o suporte de q sob r"
        )
    return float(ll[qi] - ll[qj])


def _gap_tensor(ll: np.ndarray) -> np.ndarray:
    # G[k, i, j] = LL_i - LL_j no ponto k; nan quando ambos são -inf
    with np.errstate(invalid="ignore"):
        return ll[:, :, None] - ll[:, None, :]


def dominates(
    q: Strategy,
    qi: int,
    qj: int,
    p: ProposerAlgorithm,
    active: Sequence[int],
    params: DominanceParams,
    hclass: HypothesisClass,
) -> DominanceCertificate:
    """q_i domina q_j estritamente em todo ponto da grade sobre Delta(active)?"""
    active = sorted(set(int(i) for i in active))
    if qi not in active or qj not in active:
        raise PreconditionError(f"modelos {qi}, {qj} precisam estar no conjunto ativo {active}")
    if qi == qj:
        return DominanceCertificate(False, 0.0, None)
    grid = params.grid(p, active, len(hclass))
    r = p.evaluate(grid.points, hclass)
    ll = _expected_ll(log_likelihood_table(q, hclass), r)
    with np.errstate(invalid="ignore"):
        gaps = ll[:, qi] - ll[:, qj]
    if np.any(np.isnan(gaps)):
        return DominanceCertificate(False, float("nan"), None, indeterminate=True)
    k = int(np.argmin(gaps))
    margin = float(gaps[k])
    return DominanceCertificate(
        margin > params.tau_dom,
        margin,
        grid.points[k].tolist(),
        inconclusive=0.0 < margin <= params.tau_dom,
    )


def stable_set(
    q: Strategy,
    p: ProposerAlgorithm,
    hclass: HypothesisClass,
    params: DominanceParams | None = None,
    active: Sequence[int] | None = None,
) -> StableSetResult:
    """Ponto fixo da eliminação iterada (simultânea por rodada) de modelos dominados."""
    params = params or DominanceParams()
    m = len(hclass)
    active = sorted(set(range(m) if active is None else (int(i) for i in active)))
    if not active:
        raise PreconditionError("classe vazia")
    table = log_likelihood_table(q, hclass)
    max_rounds = params.max_rounds or m

    first_grid = params.grid(p, active, m)
    rounds: list[Elimination] = []
    history = [tuple(active)]
    indeterminate: set[tuple[int, int]] = set()
    inconclusive: dict[tuple[int, int], float] = {}

    for rnd in range(1, max_rounds + 1):
        if len(active) == 1:
            break
        grid = params.grid(p, active, m)
        r = p.evaluate(grid.points, hclass)
        ll = _expected_ll(table, r)[:, active]
        gaps = _gap_tensor(ll)
        nan = np.isnan(gaps).any(axis=0)
        clean = np.where(np.isnan(gaps), np.inf, gaps)
        worst = np.where(nan, -np.inf, clean.min(axis=0))
        argmin = clean.argmin(axis=0)
        np.fill_diagonal(worst, -np.inf)

        for a, b in np.argwhere(nan):
            if a != b:
                indeterminate.add((active[a], active[b]))
        for a, b in np.argwhere((worst > 0) & (worst <= params.tau_dom)):
            inconclusive[(active[a], active[b])] = float(worst[a, b])

        eliminated = []
        for col, j in enumerate(active):
            margins = worst[:, col]
            if margins.max() > params.tau_dom:
                row = int(np.argmax(margins))
                eliminated.append(
                    Elimination(
                        rnd,
                        j,
                        active[row],
                        float(margins[row]),
                        grid.points[int(argmin[row, col])].tolist(),
                    )
                )
        if not eliminated:
            break
        for e in eliminated:
            logger.debug(
                "Rodada %d: %s eliminado por %s (margem %.6g)",
                rnd,
                hclass.name(e.eliminated),
                hclass.name(e.dominator),
                e.margin,
            )
        gone = {e.eliminated for e in eliminated}
        active = [i for i in active if i not in gone]
        rounds.extend(eliminated)
        history.append(tuple(active))

    if inconclusive:
        logger.info("%d pares com margem inconclusiva; refine a grade", len(inconclusive))
    return StableSetResult(
        survivors=tuple(active),
        rounds=tuple(rounds),
        grid_used=first_grid,
        tau_dom=params.tau_dom,
        indeterminate_pairs=tuple(sorted(indeterminate)),
        inconclusive_pairs=tuple((i, j, v) for (i, j), v in sorted(inconclusive.items())),
        active_history=tuple(history),
    )


def support_of(q: Strategy, engage_behavior: int = ENGAGE_BEHAVIOR) -> set[int]:
    return {int(z) for z in np.flatnonzero(q.rows[:, engage_behavior] > 0)}


def stylized_stable_set(
    q: Strategy, partition: tuple[Sequence[int], Sequence[int]], engage_behavior: int = ENGAGE_BEHAVIOR
) -> int:
    """Oráculo fechado da classe de três modelos.

    Retorna o índice do modelo sobrevivente: 0 (q1) se o suporte de cliques não
    toca Z_B, 1 (q2) se não toca Z_A, 2 (q3) caso contrário.
    """
    supp = support_of(q, engage_behavior)
    if not supp:
        raise PreconditionError("estratégia degenerada: nenhum clique com probabilidade positiva")
    part_a, part_b = set(partition[0]), set(partition[1])
    if not supp & part_b:
        return 0
    if not supp & part_a:
        return 1
    return 2
