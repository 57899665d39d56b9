"""Algoritmos de proposição p: Delta(Q) -> Delta(Z) e diagnósticos sobre eles."""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from stratsim.core import (
    Belief,
    DegenerateDenominatorError,
    DimensionError,
    Distribution,
    HypothesisClass,
    PreconditionError,
    SizeGuardError,
    UndefinedEstimateError,
    ValidationError,
    tv_distance,
)

logger = logging.getLogger(__name__)

DEFAULT_GRID_K = 8
# Máximo de pontos numa grade de crenças
GRID_GUARD = 200_000
# Comportamento "engajar" (clique) usado pelo algoritmo proporcional
ENGAGE_BEHAVIOR = 1


def _as_batch(weights: Any) -> np.ndarray:
    w = weights.weights if isinstance(weights, Belief) else np.asarray(weights, dtype=np.float64)
    return w[None, :] if w.ndim == 1 else w


class ProposerAlgorithm:
    """Interface comum dos algoritmos.

    ``evaluate`` recebe um lote de crenças (n, m) e devolve (n, |Z|).
    ``components`` devolve a decomposição em mistura: lista de
    (coeficientes (n,), distribuições (n, |Z|)).
    """

    kind = "abstract"
    # p(.; mu) não depende de mu
    belief_constant = False
    # p(.; mu) é afim em mu (checar vértices basta)
    belief_affine = False

    def components(self, weights: np.ndarray, hclass: HypothesisClass) -> list[tuple[np.ndarray, np.ndarray]]:
        raise NotImplementedError

    def evaluate(self, weights: Any, hclass: HypothesisClass) -> np.ndarray:
        w = _as_batch(weights)
        out = np.zeros((w.shape[0], hclass.shape[0]))
        for coef, dist in self.components(w, hclass):
            out += coef[:, None] * dist
        return out / out.sum(axis=1, keepdims=True)

    def to_dict(self) -> dict:
        return {"kind": self.kind}


class Uniform(ProposerAlgorithm):
    kind = "uniform"
    belief_constant = True
    belief_affine = True

    def components(self, weights, hclass):
        w = _as_batch(weights)
        n_z = hclass.shape[0]
        return [(np.ones(w.shape[0]), np.full((w.shape[0], n_z), 1.0 / n_z))]


class EngagementProportional(ProposerAlgorithm):
    """Mistura eps-uniforme com a massa de clique esperada sob a crença."""

    kind = "engagement_proportional"

    def __init__(self, eps: float, engage_behavior: int = ENGAGE_BEHAVIOR) -> None:
        if not 0.0 < eps < 1.0:
            raise ValidationError(f"eps deve estar em (0, 1), recebido {eps}")
        self.eps = float(eps)
        self.engage_behavior = int(engage_behavior)

    def components(self, weights, hclass):
        w = _as_batch(weights)
        n_z = hclass.shape[0]
        mass = w @ hclass.tensor[:, :, self.engage_behavior]
        denom = mass.sum(axis=1)
        if np.any(denom <= 0):
            bad = int(np.flatnonzero(denom <= 0)[0])
            raise DegenerateDenominatorError(
                f"massa de clique nula sob a crença {w[bad].tolist()}"
            )
        ones = np.ones(w.shape[0])
        return [
            (self.eps * ones, np.full((w.shape[0], n_z), 1.0 / n_z)),
            ((1.0 - self.eps) * ones, mass / denom[:, None]),
        ]

    def evaluate(self, weights, hclass):
        # caminho direto: eps/|Z| por item mais a parte proporcional
        (_, _), (_, prop) = self.components(weights, hclass)
        return self.eps / hclass.shape[0] + (1.0 - self.eps) * prop

    def to_dict(self):
        return {"kind": self.kind, "eps": self.eps, "engage_behavior": self.engage_behavior}


class Reweighted(ProposerAlgorithm):
    """Multiplica a saída da base por pesos positivos e renormaliza.

    Com ``componentwise=True`` o repeso é aplicado a cada componente da
    mistura da base separadamente.
    """

    kind = "reweighted"

    def __init__(self, base: ProposerAlgorithm, weights: Sequence[float], componentwise: bool = False) -> None:
        w = np.array(weights, dtype=np.float64)
        if w.ndim != 1 or np.any(~np.isfinite(w)) or np.any(w <= 0):
            raise ValidationError("pesos do repeso devem ser todos > 0")
        w.setflags(write=False)
        self.base = base
        self.weights = w
        self.componentwise = bool(componentwise)
        self.belief_constant = base.belief_constant
        self.belief_affine = base.belief_constant or (self.componentwise and base.belief_affine)

    def _check(self, hclass: HypothesisClass) -> None:
        if self.weights.size != hclass.shape[0]:
            raise DimensionError(f"pesos têm tamanho {self.weights.size}, |Z| = {hclass.shape[0]}")

    def components(self, weights, hclass):
        self._check(hclass)
        base = self.base.components(_as_batch(weights), hclass)
        if self.componentwise:
            out = []
            for coef, dist in base:
                rw = dist * self.weights
                out.append((coef, rw / rw.sum(axis=1, keepdims=True)))
            return out
        return [(np.ones(_as_batch(weights).shape[0]), self.evaluate(weights, hclass))]

    def evaluate(self, weights, hclass):
        self._check(hclass)
        if self.componentwise:
            return super().evaluate(weights, hclass)
        rw = self.base.evaluate(weights, hclass) * self.weights
        return rw / rw.sum(axis=1, keepdims=True)

    def to_dict(self):
        return {
            "kind": self.kind,
            "base": self.base.to_dict(),
            "weights": self.weights.tolist(),
            "componentwise": self.componentwise,
        }


class Tabular(ProposerAlgorithm):
    """Distribuição fixa por vértice, interpolada por mistura: p(mu) = sum_i mu_i p(delta_i)."""

    kind = "tabular"
    belief_affine = True

    def __init__(self, vertices: Any) -> None:
        v = np.array(vertices, dtype=np.float64)
        if v.ndim != 2:
            raise DimensionError(f"tabela deve ser matriz (m, |Z|), recebido {v.shape}")
        for row in v:
            Distribution(row)
        v.setflags(write=False)
        self.vertices = v

    def components(self, weights, hclass):
        w = _as_batch(weights)
        if self.vertices.shape != (len(hclass), hclass.shape[0]):
            raise DimensionError(
                f"tabela {self.vertices.shape} incompatível com classe ({len(hclass)}, {hclass.shape[0]})"
            )
        n = w.shape[0]
        return [(w[:, i], np.broadcast_to(self.vertices[i], (n, self.vertices.shape[1]))) for i in range(len(hclass))]

    def evaluate(self, weights, hclass):
        self.components(weights, hclass)
        out = _as_batch(weights) @ self.vertices
        return out / out.sum(axis=1, keepdims=True)

    def to_dict(self):
        return {"kind": self.kind, "vertices": self.vertices.tolist()}


def propose(alg: ProposerAlgorithm, belief: Belief, hclass: HypothesisClass) -> Distribution:
    """p(.; mu) como Distribution validada."""
    if len(belief) != len(hclass):
        raise DimensionError(f"crença tem tamanho {len(belief)}, classe tem {len(hclass)} modelos")
    return Distribution(alg.evaluate(belief.weights, hclass)[0])


def simplex_grid(k: int, d: int) -> np.ndarray:
    """Todos os vetores de tamanho d com entradas múltiplas de 1/k somando 1."""
    if k < 1 or d < 1:
        raise ValidationError(f"grade inválida: k={k}, d={d}")
    rows = []
    # estrelas e barras: posições das d-1 barras entre k+d-1 casas
    for bars in itertools.combinations(range(k + d - 1), d - 1):
        prev = -1
        counts = []
        for bar in bars:
            counts.append(bar - prev - 1)
            prev = bar
        counts.append(k + d - 1 - prev - 1)
        rows.append(counts)
    return np.array(rows, dtype=np.float64) / k


@dataclass(frozen=True, eq=False)
class BeliefGrid:
    """Substituto finito para "para todo mu em Delta(ativos)".

    ``kind`` é "full" (múltiplos de 1/k), "vertices" ou "single".
    """

    resolution: int
    n_models: int
    active: tuple[int, ...]
    kind: str
    points: np.ndarray

    @classmethod
    def full(cls, k: int, m: int) -> "BeliefGrid":
        return cls.for_subset(range(m), k, m)

    @classmethod
    def for_subset(cls, active: Sequence[int], k: int, m: int) -> "BeliefGrid":
        active = tuple(sorted(int(i) for i in active))
        if not active:
            raise PreconditionError("grade sobre conjunto vazio de modelos")
        size = math.comb(k + len(active) - 1, len(active) - 1)
        if size > GRID_GUARD:
            raise SizeGuardError(
                f"grade com {size} pontos (k={k}, {len(active)} modelos) excede o limite {GRID_GUARD}"
            )
        local = simplex_grid(k, len(active))
        points = np.zeros((local.shape[0], m))
        points[:, list(active)] = local
        points.setflags(write=False)
        return cls(k, m, active, "full", points)

    @classmethod
    def vertices(cls, active: Sequence[int], m: int, k: int = 1) -> "BeliefGrid":
        active = tuple(sorted(int(i) for i in active))
        if not active:
            raise PreconditionError("grade sobre conjunto vazio de modelos")
        points = np.zeros((len(active), m))
        points[np.arange(len(active)), list(active)] = 1.0
        points.setflags(write=False)
        return cls(k, m, active, "vertices", points)

    @classmethod
    def single(cls, active: Sequence[int], m: int, k: int = 1) -> "BeliefGrid":
        active = tuple(sorted(int(i) for i in active))
        grid = cls.vertices(active[:1], m, k)
        return cls(k, m, active, "single", grid.points)

    @classmethod
    def sweep(cls, alg: ProposerAlgorithm, active: Sequence[int], m: int, k: int) -> "BeliefGrid":
        """Grade mínima exata para o algoritmo: 1 ponto se constante, vértices se afim."""
        if alg.belief_constant:
            return cls.single(active, m, k)
        if alg.belief_affine:
            return cls.vertices(active, m, k)
        return cls.for_subset(active, k, m)

    def __len__(self) -> int:
        return int(self.points.shape[0])

    def restrict(self, survivors: Sequence[int]) -> "BeliefGrid":
        keep = sorted(int(i) for i in survivors)
        if self.kind == "single":
            return BeliefGrid.single(keep, self.n_models, self.resolution)
        outside = np.ones(self.n_models, dtype=bool)
        outside[keep] = False
        mask = ~np.any(self.points[:, outside] > 0, axis=1)
        points = self.points[mask]
        if points.shape[0] == 0:
            return BeliefGrid.vertices(keep, self.n_models, self.resolution)
        points = np.array(points)
        points.setflags(write=False)
        return BeliefGrid(self.resolution, self.n_models, tuple(keep), self.kind, points)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "resolution": self.resolution,
            "n_models": self.n_models,
            "active": list(self.active),
            "n_points": len(self),
        }


def algorithm_distance(
    p1: ProposerAlgorithm, p2: ProposerAlgorithm, hclass: HypothesisClass, grid: BeliefGrid
) -> float:
    """max sobre a grade de TV(p1(mu), p2(mu)); cota inferior para o sup verdadeiro."""
    a = p1.evaluate(grid.points, hclass)
    b = p2.evaluate(grid.points, hclass)
    return float(min(1.0, (0.5 * np.abs(a - b).sum(axis=1)).max()))


@dataclass(frozen=True)
class LipschitzEstimate:
    value: float
    pair: tuple[list[float], list[float]] | None
    pairs_used: int
    pairs_skipped: int
    provenance: str = "estimated"

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "pair": [list(x) for x in self.pair] if self.pair else None,
            "pairs_used": self.pairs_used,
            "pairs_skipped": self.pairs_skipped,
            "provenance": self.provenance,
        }


def model_distance_matrix(hclass: HypothesisClass) -> np.ndarray:
    """D[i, j] = max_Z TV(q_i(.|Z), q_j(.|Z))."""
    t = hclass.tensor
    m = len(hclass)
    out = np.zeros((m, m))
    for i in range(m):
        out[i] = (0.5 * np.abs(t[i][None] - t).sum(axis=2)).max(axis=1)
    return out


def estimate_lipschitz(p: ProposerAlgorithm, hclass: HypothesisClass, grid: BeliefGrid) -> LipschitzEstimate:
    """Estimativa empírica (cota inferior) da constante L_P.

    Razão TV(p(mu1), p(mu2)) / E_{q1~mu1, q2~mu2}[max_Z TV(q1, q2)] sobre todos
    os pares da grade; pares com denominador nulo são ignorados.
    """
    if len(grid) < 2:
        raise PreconditionError("estimate_lipschitz precisa de pelo menos 2 pontos na grade")
    points = grid.points
    dists = p.evaluate(points, hclass)
    expected = points @ model_distance_matrix(hclass) @ points.T
    best, best_pair, used, skipped = 0.0, None, 0, 0
    for a in range(len(points)):
        for b in range(a + 1, len(points)):
            denom = expected[a, b]
            if denom <= 0:
                skipped += 1
                continue
            used += 1
            ratio = tv_distance(dists[a], dists[b]) / denom
            if best_pair is None or ratio > best:
                best, best_pair = ratio, (points[a].tolist(), points[b].tolist())
    if used == 0:
        raise UndefinedEstimateError("todos os pares da grade têm denominador nulo")
    logger.debug("L_P estimado = %.6g (%d pares, %d ignorados)", best, used, skipped)
    return LipschitzEstimate(float(best), best_pair, used, skipped)
