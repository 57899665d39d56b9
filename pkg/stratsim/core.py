"""Tipos de domínio, validação e primitivas de teoria da informação.

Todos os tipos são imutáveis depois de construídos (os arrays numpy são
marcados como somente leitura), então podem ser compartilhados entre threads.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Iterable, Sequence

import numpy as np
from scipy.special import rel_entr

if TYPE_CHECKING:
    from stratsim.algorithms import ProposerAlgorithm

logger = logging.getLogger(__name__)

# Tolerância de construção (linhas estocásticas, vetores de probabilidade)
ROW_TOL = 1e-9
# Tolerância de deriva numérica depois de renormalizar
DRIFT_TOL = 1e-12
# Teto padrão para razões de verossimilhança em validate_instance
DEFAULT_LR_CAP = 1e6


class StratsimError(Exception):
    """Erro base de todo o pacote."""


class DimensionError(StratsimError, ValueError):
    pass


class ValidationError(StratsimError, ValueError):
    pass


class PreconditionError(StratsimError, ValueError):
    pass


class DegenerateDenominatorError(StratsimError, ArithmeticError):
    pass


class ImpossibleObservationError(StratsimError, ArithmeticError):
    pass


class IndeterminateGapError(StratsimError, ArithmeticError):
    pass


class SizeGuardError(StratsimError, ValueError):
    pass


class UndefinedEstimateError(StratsimError, ArithmeticError):
    pass


def _frozen(values: Any, dtype: Any = np.float64) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def _check_labels(labels: Sequence[str] | None, size: int, what: str) -> tuple[str, ...] | None:
    if labels is None:
        return None
    labels = tuple(str(x) for x in labels)
    if len(labels) != size:
        raise DimensionError(f"{what}: esperado {size} rótulos, recebido {len(labels)}")
    if len(set(labels)) != len(labels):
        raise ValidationError(f"{what}: rótulos repetidos {labels}")
    return labels


@dataclass(frozen=True)
class ActionSpaces:
    """Espaços de proposições (Z) e comportamentos (B), representados por índices.

    ``ambient_dims`` guarda (d1, d2) apenas como metadado para relatórios.
    """

    n_propositions: int
    n_behaviors: int
    proposition_labels: tuple[str, ...] | None = None
    behavior_labels: tuple[str, ...] | None = None
    ambient_dims: tuple[int, int] | None = None

    def __post_init__(self) -> None:
        if int(self.n_propositions) < 1:
            raise ValidationError("n_propositions deve ser >= 1")
        if int(self.n_behaviors) < 2:
            raise ValidationError("n_behaviors deve ser >= 2")
        object.__setattr__(self, "n_propositions", int(self.n_propositions))
        object.__setattr__(self, "n_behaviors", int(self.n_behaviors))
        object.__setattr__(
            self,
            "proposition_labels",
            _check_labels(self.proposition_labels, self.n_propositions, "proposition_labels"),
        )
        object.__setattr__(
            self,
            "behavior_labels",
            _check_labels(self.behavior_labels, self.n_behaviors, "behavior_labels"),
        )

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_propositions, self.n_behaviors)

    def proposition_name(self, z: int) -> str:
        if self.proposition_labels is not None:
            return self.proposition_labels[z]
        return f"z{z}"

    def to_dict(self) -> dict:
        return {
            "n_propositions": self.n_propositions,
            "n_behaviors": self.n_behaviors,
            "proposition_labels": list(self.proposition_labels) if self.proposition_labels else None,
            "behavior_labels": list(self.behavior_labels) if self.behavior_labels else None,
        }


@dataclass(frozen=True, eq=False)
class PayoffMatrix:
    """Matriz |Z|x|B| de payoffs com faixa declarada [lo, hi].

    Sem faixa explícita usa-se [min(0, menor valor), max(1, maior valor)],
    que cobre a escala [0, 1] e também payoffs em {-1, 0, 1}.
    """

    values: np.ndarray
    declared_range: tuple[float, float] | None = None

    def __post_init__(self) -> None:
        values = _frozen(self.values)
        if values.ndim != 2:
            raise DimensionError(f"payoff deve ser matriz, recebido shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValidationError("payoff contém NaN ou infinito")
        if self.declared_range is None:
            lo = min(0.0, float(values.min()))
            hi = max(1.0, float(values.max()))
        else:
            lo, hi = (float(x) for x in self.declared_range)
        if not lo < hi:
            raise ValidationError(f"faixa declarada inválida: [{lo}, {hi}]")
        if values.min() < lo or values.max() > hi:
            raise ValidationError(f"payoff fora da faixa declarada [{lo}, {hi}]")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "declared_range", (lo, hi))

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def has_unique_maximizers(self) -> list[int]:
        """Retorna as proposições cujo argmax em B não é único."""
        best = self.values.max(axis=1, keepdims=True)
        ties = (self.values == best).sum(axis=1)
        return [int(z) for z in np.flatnonzero(ties > 1)]

    def to_dict(self) -> dict:
        return {"values": self.values.tolist(), "declared_range": list(self.declared_range)}


def _check_stochastic_rows(rows: np.ndarray, what: str) -> None:
    if np.any(~np.isfinite(rows)) or np.any(rows < 0) or np.any(rows > 1):
        raise ValidationError(f"{what}: entradas devem estar em [0, 1]")
    drift = np.abs(rows.sum(axis=-1) - 1.0)
    if np.any(drift > ROW_TOL):
        bad = np.argwhere(drift > ROW_TOL)[0].tolist()
        raise ValidationError(f"{what}: linha {bad} não soma 1")


@dataclass(frozen=True, eq=False)
class Strategy:
    """Mapa estocástico por linha: proposição -> distribuição sobre comportamentos."""

    rows: np.ndarray

    def __post_init__(self) -> None:
        rows = np.array(self.rows, dtype=np.float64)
        if rows.ndim != 2:
            raise DimensionError(f"estratégia deve ser matriz, recebido shape {rows.shape}")
        _check_stochastic_rows(rows, "Strategy")
        object.__setattr__(self, "rows", _frozen(rows))

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows.shape

    @classmethod
    def constant(cls, n_propositions: int, behavior: int, n_behaviors: int) -> "Strategy":
        rows = np.zeros((n_propositions, n_behaviors))
        rows[:, behavior] = 1.0
        return cls(rows)

    def equals(self, other: "Strategy") -> bool:
        return self.rows.shape == other.rows.shape and bool(np.array_equal(self.rows, other.rows))

    def to_dict(self) -> list:
        return self.rows.tolist()


class HypothesisClass:
    """Classe finita de modelos de usuário, guardada como tensor (m, |Z|, |B|).

    O tensor evita materializar milhares de objetos Strategy em redes-ε.
    """

    def __init__(self, tensor: Any, names: Sequence[str] | None = None) -> None:
        tensor = np.array(tensor, dtype=np.float64)
        if tensor.ndim != 3:
            raise DimensionError(f"classe deve ter shape (m, |Z|, |B|), recebido {tensor.shape}")
        if tensor.shape[0] == 0:
            raise ValidationError("classe de hipóteses vazia")
        _check_stochastic_rows(tensor, "HypothesisClass")
        self.tensor = _frozen(tensor)
        self.names = _check_labels(names, tensor.shape[0], "names")

    @classmethod
    def from_models(cls, models: Iterable[Strategy], names: Sequence[str] | None = None) -> "HypothesisClass":
        rows = [m.rows for m in models]
        if not rows:
            raise ValidationError("classe de hipóteses vazia")
        shapes = {r.shape for r in rows}
        if len(shapes) != 1:
            raise DimensionError(f"modelos com shapes diferentes: {sorted(shapes)}")
        return cls(np.stack(rows), names)

    def __len__(self) -> int:
        return int(self.tensor.shape[0])

    @property
    def shape(self) -> tuple[int, int]:
        return (int(self.tensor.shape[1]), int(self.tensor.shape[2]))

    def model(self, i: int) -> Strategy:
        return Strategy(self.tensor[i])

    @property
    def models(self) -> list[Strategy]:
        return [self.model(i) for i in range(len(self))]

    def name(self, i: int) -> str:
        if self.names is not None:
            return self.names[i]
        return f"q{i + 1}"

    def subset(self, indices: Sequence[int]) -> "HypothesisClass":
        indices = list(indices)
        names = [self.name(i) for i in indices]
        return HypothesisClass(self.tensor[indices], names)

    def extended(self, extra: Strategy, name: str | None = None) -> "HypothesisClass":
        names = [self.name(i) for i in range(len(self))] + [name or f"q{len(self) + 1}"]
        return HypothesisClass(np.concatenate([self.tensor, extra.rows[None]]), names)

    def to_dict(self) -> dict:
        return {"names": [self.name(i) for i in range(len(self))], "models": self.tensor.tolist()}


@dataclass(frozen=True, eq=False)
class _ProbabilityVector:
    weights: np.ndarray

    def __post_init__(self) -> None:
        w = np.array(self.weights, dtype=np.float64)
        if w.ndim != 1 or w.size == 0:
            raise DimensionError(f"vetor de probabilidade inválido, shape {w.shape}")
        if np.any(~np.isfinite(w)) or np.any(w < 0):
            raise ValidationError(f"{type(self).__name__}: entradas devem ser finitas e >= 0")
        total = w.sum()
        if abs(total - 1.0) > ROW_TOL:
            raise ValidationError(f"{type(self).__name__}: soma {total!r} != 1")
        if total != 1.0:
            w = w / total
        object.__setattr__(self, "weights", _frozen(w))

    def __len__(self) -> int:
        return int(self.weights.size)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.weights > 0))

    def to_dict(self) -> list:
        return self.weights.tolist()


class Belief(_ProbabilityVector):
    """Crença da plataforma sobre a classe de hipóteses (mu)."""

    @classmethod
    def uniform(cls, m: int) -> "Belief":
        return cls(np.full(m, 1.0 / m))

    @classmethod
    def vertex(cls, i: int, m: int) -> "Belief":
        w = np.zeros(m)
        w[i] = 1.0
        return cls(w)

    @property
    def full_support(self) -> bool:
        return bool(np.all(self.weights > 0))


class Distribution(_ProbabilityVector):
    """Distribuição sobre um conjunto finito (normalmente Z)."""


def _as_vector(x: Any) -> np.ndarray:
    if isinstance(x, _ProbabilityVector):
        return x.weights
    return np.asarray(x, dtype=np.float64)


def tv_distance(a: Any, b: Any) -> float:
    """Distância de variação total: 0.5 * sum |a - b|."""
    a, b = _as_vector(a), _as_vector(b)
    if a.shape != b.shape:
        raise DimensionError(f"tamanhos diferentes: {a.shape} vs {b.shape}")
    return float(min(1.0, 0.5 * np.abs(a - b).sum()))


def kl_divergence(a: Any, b: Any) -> float:
    """KL(a || b) com 0*log(0/x) = 0 e +inf quando a > 0 onde b = 0."""
    a, b = _as_vector(a), _as_vector(b)
    if a.shape != b.shape:
        raise DimensionError(f"tamanhos diferentes: {a.shape} vs {b.shape}")
    return float(max(0.0, rel_entr(a, b).sum()))


def expected_payoff_rows(q: Any, payoff: Any) -> np.ndarray:
    """Vetor por proposição de E_{B~q(.|Z)} payoff(Z, B)."""
    rows = q.rows if isinstance(q, Strategy) else np.asarray(q)
    values = payoff.values if isinstance(payoff, PayoffMatrix) else np.asarray(payoff)
    if rows.shape != values.shape:
        raise DimensionError(f"estratégia {rows.shape} e payoff {values.shape} incompatíveis")
    return (rows * values).sum(axis=1)


def payoff_variance(r: Any, q: Any, payoff: Any) -> float:
    """Var[V(Z, B)] com Z ~ r e B ~ q(.|Z)."""
    r = _as_vector(r)
    values = payoff.values if isinstance(payoff, PayoffMatrix) else np.asarray(payoff)
    mean = float(r @ expected_payoff_rows(q, values))
    second = float(r @ expected_payoff_rows(q, values**2))
    return max(0.0, second - mean * mean)


@dataclass(frozen=True, eq=False)
class GameInstance:
    """Tupla (Z, B, U, V, p, Q, lambda) mais a crença inicial mu0."""

    spaces: ActionSpaces
    user_payoff: PayoffMatrix
    platform_payoff: PayoffMatrix
    algorithm: "ProposerAlgorithm"
    hypothesis_class: HypothesisClass
    prior: Belief | None = None
    lam: float = 0.0
    opt_out_behavior: int = 0
    name: str = ""
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        shape = self.spaces.shape
        for what, mat in (("user_payoff", self.user_payoff), ("platform_payoff", self.platform_payoff)):
            if mat.shape != shape:
                raise DimensionError(f"{what} tem shape {mat.shape}, esperado {shape}")
        if self.hypothesis_class.shape != shape:
            raise DimensionError(f"classe tem shape {self.hypothesis_class.shape}, esperado {shape}")
        m = len(self.hypothesis_class)
        if self.prior is None:
            object.__setattr__(self, "prior", Belief.uniform(m))
        elif len(self.prior) != m:
            raise DimensionError(f"mu0 tem tamanho {len(self.prior)}, classe tem {m} modelos")
        if self.lam < 0:
            raise ValidationError("lambda deve ser >= 0")
        if not 0 <= self.opt_out_behavior < self.spaces.n_behaviors:
            raise ValidationError(f"opt_out_behavior fora do intervalo: {self.opt_out_behavior}")

    def with_algorithm(self, algorithm: "ProposerAlgorithm") -> "GameInstance":
        return dataclasses.replace(self, algorithm=algorithm)

    def with_class(self, hclass: HypothesisClass, prior: Belief | None = None) -> "GameInstance":
        return dataclasses.replace(self, hypothesis_class=hclass, prior=prior)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "spaces": self.spaces.to_dict(),
            "user_payoff": self.user_payoff.to_dict(),
            "platform_payoff": self.platform_payoff.to_dict(),
            "algorithm": self.algorithm.to_dict(),
            "hypothesis_class": self.hypothesis_class.to_dict(),
            "prior": self.prior.to_dict(),
            "lam": self.lam,
            "opt_out_behavior": self.opt_out_behavior,
        }


@dataclass(frozen=True)
class Diagnostic:
    kind: str  # "support" | "likelihood_ratio" | "prior"
    message: str
    z: int | None = None
    b: int | None = None
    models: tuple[int, ...] = ()

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def validate_instance(
    instance: GameInstance,
    user: Strategy | None = None,
    lr_cap: float = DEFAULT_LR_CAP,
) -> list[Diagnostic]:
    """Diagnósticos de execução (nunca levanta exceção, nunca altera a instância).

    - razões de verossimilhança entre modelos (entradas positivas) acima de ``lr_cap``;
    - violações de suporte de ``user`` contra cada modelo, uma por (Z, B);
    - razão q/q_hat acima de ``lr_cap`` onde ambos são positivos;
    - crença inicial sem suporte completo.
    """
    out: list[Diagnostic] = []
    hclass = instance.hypothesis_class
    tensor = hclass.tensor

    if not instance.prior.full_support:
        out.append(Diagnostic("prior", "mu0 não tem suporte completo"))

    positive = tensor > 0
    for i in range(len(hclass)):
        for j in range(len(hclass)):
            if i == j:
                continue
            both = positive[i] & positive[j]
            ratio = np.where(both, tensor[i] / np.where(both, tensor[j], 1.0), 0.0)
            for z, b in np.argwhere(ratio > lr_cap):
                out.append(
                    Diagnostic(
                        "likelihood_ratio",
                        f"{hclass.name(i)}/{hclass.name(j)} = {ratio[z, b]:.3g} > {lr_cap:g}",
                        int(z),
                        int(b),
                        (i, j),
                    )
                )

    if user is not None:
        if user.shape != instance.spaces.shape:
            out.append(Diagnostic("support", f"estratégia com shape {user.shape} incompatível"))
            return out
        q = user.rows
        for i in range(len(hclass)):
            violation = (q > 0) & (tensor[i] == 0)
            for z, b in np.argwhere(violation):
                out.append(
                    Diagnostic(
                        "support",
                        f"{hclass.name(i)} atribui 0 a (Z={instance.spaces.proposition_name(z)}, B={b})",
                        int(z),
                        int(b),
                        (i,),
                    )
                )
            both = (q > 0) & (tensor[i] > 0)
            ratio = np.where(both, q / np.where(both, tensor[i], 1.0), 0.0)
            for z, b in np.argwhere(ratio > lr_cap):
                out.append(
                    Diagnostic(
                        "likelihood_ratio",
                        f"q/{hclass.name(i)} = {ratio[z, b]:.3g} > {lr_cap:g}",
                        int(z),
                        int(b),
                        (i,),
                    )
                )
    return out
