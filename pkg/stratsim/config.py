"""Configuração de experimentos em YAML.

Chaves desconhecidas são erro (com o caminho pontuado da chave). O hash da
configuração é o SHA256 do JSON canônico do dicionário já com os overrides
da linha de comando aplicados.
"""

from __future__ import annotations

import copy
import hashlib
import json
import os
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import yaml

from stratsim.algorithms import (
    DEFAULT_GRID_K,
    EngagementProportional,
    ProposerAlgorithm,
    Reweighted,
    Tabular,
    Uniform,
)
from stratsim.core import (
    ActionSpaces,
    Belief,
    GameInstance,
    HypothesisClass,
    PayoffMatrix,
    StratsimError,
    Strategy,
)
from stratsim.scenarios import StylizedParams, build_scenario, toxicity_algorithm
from stratsim.simulator import DEFAULT_HOLD, DEFAULT_THRESHOLD
from stratsim.stability import DEFAULT_TAU_DOM, DominanceParams
from stratsim.strategize import (
    DEFAULT_MASK_CAP,
    AllSupportMasks,
    Explicit,
    GridRefine,
    PartitionMasks,
    UserParams,
)

SUPPORTED_FORMATS = {"json", "csv", "pdf", "png"}
OUTPUT_DIR = "resultados"

SCHEMA: dict[str, Any] = {
    "instance": {
        "scenario": str,
        "params": dict,
        "spaces": dict,
        "user_payoff": dict,
        "platform_payoff": dict,
        "models": list,
        "model_names": list,
        "prior": list,
        "lam": float,
        "opt_out_behavior": int,
        "name": str,
    },
    "algorithm": dict,
    "counterfactual_algorithm": dict,
    "user": {
        "mode": str,
        "lam": float,
        "opt_out_behavior": int,
        "candidates": dict,
    },
    "engine": {
        "grid_k": int,
        "tau_dom": float,
        "max_rounds": int,
        "horizon": int,
        "snapshot_every": int,
        "belief_floor": float,
        "seeds": list,
        "convergence": {"threshold": float, "hold": int},
        "kappa0": float,
        "props": list,
        "sensitivity": bool,
        "lipschitz": float,
        "eps_net": float,
        "n_random": int,
    },
    "outputs": {"directory": str, "formats": list},
}

ALGORITHM_KEYS = {
    "uniform": set(),
    "engagement_proportional": {"eps", "engage_behavior"},
    "reweighted": {"base", "weights", "componentwise"},
    "tabular": {"vertices"},
    "toxicity": {"alpha"},
}

CANDIDATE_KEYS = {
    "all_support_masks": {"cap"},
    "partition_masks": {"subsets"},
    "explicit": {"strategies", "labels"},
    "grid_refine": {"base_masks", "resolution"},
}


class ConfigError(StratsimError, ValueError):
    """Erro de leitura ou resolução da configuração."""


def _check_keys(node: Any, schema: Any, path: str) -> None:
    if node is None:
        return
    if isinstance(schema, dict):
        if not isinstance(node, dict):
            raise ConfigError(f"{path or '<raiz>'}: esperado um mapeamento")
        for key, value in node.items():
            where = f"{path}.{key}" if path else str(key)
            if key not in schema:
                raise ConfigError(f"chave desconhecida: {where}")
            _check_keys(value, schema[key], where)
        return
    if schema is float and isinstance(node, (int, float)) and not isinstance(node, bool):
        return
    if schema is float and isinstance(node, str):
        # o YAML 1.1 lê "1e-9" (sem ponto) como string
        try:
            float(node)
            return
        except ValueError:
            raise ConfigError(f"{path}: esperado número, recebido {node!r}") from None
    if schema is int and isinstance(node, bool):
        raise ConfigError(f"{path}: esperado inteiro")
    if not isinstance(node, schema):
        raise ConfigError(f"{path}: esperado {schema.__name__}, recebido {type(node).__name__}")


def config_hash(raw: dict) -> str:
    canonical = json.dumps(raw, sort_keys=True, separators=(",", ":"), ensure_ascii=True)
    return hashlib.sha256(canonical.encode()).hexdigest()


@dataclass
class ExperimentConfig:
    raw: dict
    source: str = "<memória>"
    hash: str = field(init=False)

    def __post_init__(self) -> None:
        _check_keys(self.raw, SCHEMA, "")
        self.hash = config_hash(self.raw)

    def section(self, name: str) -> dict:
        return dict(self.raw.get(name) or {})

    @property
    def engine(self) -> dict:
        return self.section("engine")

    @property
    def output_dir(self) -> str:
        return self.section("outputs").get("directory", OUTPUT_DIR)

    @property
    def formats(self) -> list[str]:
        formats = self.section("outputs").get("formats", ["json", "csv"])
        unknown = set(formats) - SUPPORTED_FORMATS
        if unknown:
            raise ConfigError(f"outputs.formats: formatos não suportados {sorted(unknown)}")
        return list(formats)

    @property
    def seeds(self) -> list[int]:
        return [int(s) for s in self.engine.get("seeds", [])]

    def dominance(self) -> DominanceParams:
        engine = self.engine
        try:
            return DominanceParams(
                grid_k=int(engine.get("grid_k", DEFAULT_GRID_K)),
                tau_dom=float(engine.get("tau_dom", DEFAULT_TAU_DOM)),
                max_rounds=engine.get("max_rounds"),
            )
        except StratsimError as e:
            raise ConfigError(f"engine: {e}") from e

    @property
    def convergence(self) -> tuple[float, int]:
        conv = self.engine.get("convergence") or {}
        return float(conv.get("threshold", DEFAULT_THRESHOLD)), int(conv.get("hold", DEFAULT_HOLD))

    def instance(self) -> GameInstance:
        spec = self.section("instance")
        if not spec:
            raise ConfigError("instance: seção obrigatória")
        try:
            if "scenario" in spec:
                instance = build_scenario(spec["scenario"], spec.get("params"))
            else:
                instance = _inline_instance(spec)
            if self.raw.get("algorithm"):
                instance = instance.with_algorithm(self.algorithm("algorithm", instance))
        except ConfigError:
            raise
        except StratsimError as e:
            raise ConfigError(f"instance: {e}") from e
        return instance

    def algorithm(self, key: str, instance: GameInstance) -> ProposerAlgorithm:
        spec = self.raw.get(key)
        if not spec:
            raise ConfigError(f"{key}: seção obrigatória para este comando")
        try:
            return build_algorithm(spec, instance, key)
        except ConfigError:
            raise
        except StratsimError as e:
            raise ConfigError(f"{key}: {e}") from e

    def user(self) -> UserParams:
        spec = self.section("user")
        try:
            candidates = build_candidates(spec.get("candidates") or {"kind": "all_support_masks"}, "user.candidates")
            return UserParams(
                mode=spec.get("mode", "strategic"),
                lam=spec.get("lam"),
                opt_out_behavior=spec.get("opt_out_behavior"),
                candidates=candidates,
            )
        except ConfigError:
            raise
        except StratsimError as e:
            raise ConfigError(f"user: {e}") from e


def _inline_instance(spec: dict) -> GameInstance:
    for key in ("spaces", "user_payoff", "platform_payoff", "models"):
        if key not in spec:
            raise ConfigError(f"instance.{key}: obrigatório sem 'scenario'")
    _check_keys(spec["spaces"], {"n_propositions": int, "n_behaviors": int, "proposition_labels": list, "behavior_labels": list}, "instance.spaces")
    spaces = ActionSpaces(**spec["spaces"])
    payoffs = {}
    for key in ("user_payoff", "platform_payoff"):
        _check_keys(spec[key], {"values": list, "range": list}, f"instance.{key}")
        rng = spec[key].get("range")
        payoffs[key] = PayoffMatrix(spec[key]["values"], tuple(rng) if rng else None)
    hclass = HypothesisClass.from_models([Strategy(m) for m in spec["models"]], spec.get("model_names"))
    prior = Belief(spec["prior"]) if spec.get("prior") else None
    return GameInstance(
        spaces=spaces,
        user_payoff=payoffs["user_payoff"],
        platform_payoff=payoffs["platform_payoff"],
        algorithm=Uniform(),
        hypothesis_class=hclass,
        prior=prior,
        lam=float(spec.get("lam", 0.0)),
        opt_out_behavior=int(spec.get("opt_out_behavior", 0)),
        name=spec.get("name", "inline"),
    )


def build_algorithm(spec: dict, instance: GameInstance, path: str = "algorithm") -> ProposerAlgorithm:
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError(f"{path}: esperado mapeamento com 'kind'")
    kind = spec["kind"]
    if kind not in ALGORITHM_KEYS:
        raise ConfigError(f"{path}.kind: algoritmo desconhecido {kind!r}")
    for key in spec:
        if key != "kind" and key not in ALGORITHM_KEYS[kind]:
            raise ConfigError(f"chave desconhecida: {path}.{key}")
    if kind == "uniform":
        return Uniform()
    if kind == "engagement_proportional":
        return EngagementProportional(float(spec["eps"]), int(spec.get("engage_behavior", 1)))
    if kind == "reweighted":
        base = build_algorithm(spec["base"], instance, f"{path}.base")
        return Reweighted(base, spec["weights"], bool(spec.get("componentwise", False)))
    if kind == "tabular":
        return Tabular(np.array(spec["vertices"], dtype=np.float64))
    stylized = instance.metadata.get("stylized")
    if stylized is None:
        raise ConfigError(f"{path}: 'toxicity' exige um cenário estilizado")
    return toxicity_algorithm(StylizedParams(**stylized), float(spec.get("alpha", 0.01)))


def build_candidates(spec: dict, path: str):
    kind = spec.get("kind")
    if kind not in CANDIDATE_KEYS:
        raise ConfigError(f"{path}.kind: família desconhecida {kind!r}")
    for key in spec:
        if key != "kind" and key not in CANDIDATE_KEYS[kind]:
            raise ConfigError(f"chave desconhecida: {path}.{key}")
    if kind == "all_support_masks":
        return AllSupportMasks(int(spec.get("cap", DEFAULT_MASK_CAP)))
    if kind == "partition_masks":
        return PartitionMasks(tuple(frozenset(s) for s in spec["subsets"]))
    if kind == "grid_refine":
        return GridRefine(tuple(frozenset(s) for s in spec["base_masks"]), int(spec.get("resolution", 4)))
    labels = spec.get("labels")
    return Explicit(tuple(Strategy(s) for s in spec["strategies"]), tuple(labels) if labels else None)


def apply_overrides(
    raw: dict,
    out: str | None = None,
    seeds: list[int] | None = None,
    grid_k: int | None = None,
    tau_dom: float | None = None,
) -> dict:
    """Aplica os flags da linha de comando antes do hash."""
    raw = copy.deepcopy(raw)
    if out is not None:
        raw.setdefault("outputs", {})["directory"] = out
    engine = raw.setdefault("engine", {}) if any(v is not None for v in (seeds, grid_k, tau_dom)) else None
    if seeds is not None:
        engine["seeds"] = list(seeds)
    if grid_k is not None:
        engine["grid_k"] = grid_k
    if tau_dom is not None:
        engine["tau_dom"] = tau_dom
    return raw


def load_config(path: str, **overrides: Any) -> ExperimentConfig:
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = yaml.safe_load(f)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        where = f" (linha {mark.line + 1}, coluna {mark.column + 1})" if mark else ""
        raise ConfigError(f"{path}: YAML inválido{where}: {e}") from e
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: o documento deve ser um mapeamento")
    return ExperimentConfig(apply_overrides(raw, **overrides), source=path)
