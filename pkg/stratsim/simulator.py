"""Jogo repetido: sorteia proposições e comportamentos, atualiza a crença por Bayes."""

from __future__ import annotations

import json
import logging
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.special import logsumexp

from stratsim.core import (
    Belief,
    DimensionError,
    GameInstance,
    HypothesisClass,
    ImpossibleObservationError,
    PreconditionError,
    Strategy,
    ValidationError,
)

logger = logging.getLogger(__name__)

GENERATOR_NAME = "numpy.random.Philox"
DEFAULT_THRESHOLD = 0.99
DEFAULT_HOLD = 100


@dataclass(frozen=True)
class SimConfig:
    instance: GameInstance
    horizon: int
    seed: int
    belief_floor: float = 0.0
    snapshot_every: int = 1

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise ValidationError("horizonte T deve ser >= 1")
        if not 1 <= self.snapshot_every <= self.horizon:
            raise ValidationError(f"snapshot_every deve estar em [1, T], recebido {self.snapshot_every}")
        if self.belief_floor < 0:
            raise ValidationError("belief_floor deve ser >= 0")
        if not 0 <= self.seed < 2**64:
            raise ValidationError("seed deve ser inteiro sem sinal de 64 bits")


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Passos (t, Z_t, B_t, u_t, v_t) em arrays paralelos e snapshots da crença."""

    z: np.ndarray
    b: np.ndarray
    u: np.ndarray
    v: np.ndarray
    snapshot_times: np.ndarray
    snapshot_beliefs: np.ndarray
    final_belief: Belief
    seed: int
    generator: str = GENERATOR_NAME
    snapshot_every: int = 1

    def __len__(self) -> int:
        return int(self.z.size)

    @property
    def steps(self) -> list[tuple[int, int, int, float, float]]:
        return [
            (t, int(z), int(b), float(u), float(v))
            for t, (z, b, u, v) in enumerate(zip(self.z, self.b, self.u, self.v))
        ]

    @property
    def belief_snapshots(self) -> list[tuple[int, Belief]]:
        return [(int(t), Belief(w)) for t, w in zip(self.snapshot_times, self.snapshot_beliefs)]


def _log_weights(weights: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(weights)


def _normalize_log(logw: np.ndarray) -> np.ndarray:
    w = np.exp(logw - logsumexp(logw))
    return w / w.sum()


def _log_update(logw: np.ndarray, hclass: HypothesisClass, z: int, b: int) -> np.ndarray:
    with np.errstate(divide="ignore"):
        loglik = np.log(hclass.tensor[:, z, b])
    new = logw + loglik
    if not np.any(np.isfinite(new)):
        raise ImpossibleObservationError(
            f"nenhum modelo com massa positiva atribui probabilidade a (Z={z}, B={b})"
        )
    return new - new[np.isfinite(new)].max()


def bayes_update(belief: Belief, hclass: HypothesisClass, z: int, b: int) -> Belief:
    """mu'(q_i) proporcional a mu(q_i) * q_i(b|z), calculado em escala log."""
    if len(belief) != len(hclass):
        raise DimensionError(f"crença tem tamanho {len(belief)}, classe tem {len(hclass)}")
    n_z, n_b = hclass.shape
    if not (0 <= z < n_z and 0 <= b < n_b):
        raise DimensionError(f"observação fora do intervalo: (Z={z}, B={b})")
    logw = _log_update(_log_weights(belief.weights), hclass, z, b)
    return Belief(_normalize_log(logw))


def _sample(rng: np.random.Generator, weights: np.ndarray) -> int:
    cdf = np.cumsum(weights)
    idx = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return min(idx, weights.size - 1)


def _streams(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    # um fluxo para proposições, outro para comportamentos
    z_seq, b_seq = np.random.SeedSequence(seed).spawn(2)
    return np.random.Generator(np.random.Philox(z_seq)), np.random.Generator(np.random.Philox(b_seq))


def run(config: SimConfig, user: Strategy) -> Trajectory:
    """Executa T passos do jogo; determinístico dado o seed."""
    instance = config.instance
    hclass = instance.hypothesis_class
    if user.shape != instance.spaces.shape:
        raise DimensionError(f"estratégia {user.shape} incompatível com {instance.spaces.shape}")
    if not instance.prior.full_support:
        raise PreconditionError("mu0 precisa de suporte completo")

    alg = instance.algorithm
    U = instance.user_payoff.values
    V = instance.platform_payoff.values
    q = user.rows
    rng_z, rng_b = _streams(config.seed)

    T = config.horizon
    zs = np.empty(T, dtype=np.int64)
    bs = np.empty(T, dtype=np.int64)
    us = np.empty(T)
    vs = np.empty(T)
    times = [0]
    snaps = [instance.prior.weights.copy()]

    logw = _log_weights(instance.prior.weights)
    weights = instance.prior.weights.copy()
    constant = alg.evaluate(weights, hclass)[0] if alg.belief_constant else None

    for t in range(T):
        r = constant if constant is not None else alg.evaluate(weights, hclass)[0]
        z = _sample(rng_z, r)
        b = _sample(rng_b, q[z])
        zs[t], bs[t], us[t], vs[t] = z, b, U[z, b], V[z, b]

        logw = _log_update(logw, hclass, z, b)
        weights = _normalize_log(logw)
        if config.belief_floor > 0:
            alive = weights > 0
            weights = np.where(alive, np.maximum(weights, config.belief_floor), 0.0)
            weights = weights / weights.sum()
            logw = _log_weights(weights)

        step = t + 1
        if step % config.snapshot_every == 0 or step == T:
            times.append(step)
            snaps.append(weights.copy())

    return Trajectory(
        z=zs,
        b=bs,
        u=us,
        v=vs,
        snapshot_times=np.array(times, dtype=np.int64),
        snapshot_beliefs=np.array(snaps),
        final_belief=Belief(weights),
        seed=config.seed,
        snapshot_every=config.snapshot_every,
    )


def detect_convergence(
    traj: Trajectory,
    target: Iterable[int],
    threshold: float = DEFAULT_THRESHOLD,
    hold: int = DEFAULT_HOLD,
) -> int | None:
    """Primeiro instante t de snapshot a partir do qual mu(target) >= threshold por ``hold`` snapshots.

    A janela é cortada no último snapshot registrado.
    """
    target = sorted(set(int(i) for i in target))
    if not target:
        raise PreconditionError("conjunto alvo vazio")
    if not 0.0 < threshold < 1.0:
        raise PreconditionError(f"threshold deve estar em (0, 1), recebido {threshold}")
    if hold < 1:
        raise PreconditionError("hold deve ser >= 1")
    mass = traj.snapshot_beliefs[:, target].sum(axis=1)
    ok = mass >= threshold
    n = ok.size
    # failures[k] = quantidade de snapshots abaixo do limiar em [0, k)
    failures = np.concatenate([[0], np.cumsum(~ok)])
    for k in np.flatnonzero(ok):
        end = min(n, k + hold + 1)
        if failures[end] - failures[k] == 0:
            return int(traj.snapshot_times[k])
    return None


def summarize(
    traj: Trajectory,
    target: Iterable[int],
    threshold: float = DEFAULT_THRESHOLD,
    hold: int = DEFAULT_HOLD,
    names: Sequence[str] | None = None,
) -> dict:
    """Linha do CSV de resumo de uma trajetória."""
    row = {
        "seed": traj.seed,
        "convergence_step": detect_convergence(traj, target, threshold, hold),
    }
    for i, w in enumerate(traj.final_belief.weights):
        label = names[i] if names else f"q{i + 1}"
        row[f"final_belief_{label}"] = float(w)
    row["mean_u"] = float(traj.u.mean())
    row["mean_v"] = float(traj.v.mean())
    return row


def run_many(
    instance: GameInstance,
    user: Strategy,
    seeds: Sequence[int],
    horizon: int,
    snapshot_every: int = 1,
    belief_floor: float = 0.0,
    jobs: int = 1,
) -> dict[int, Trajectory]:
    """Roda um seed por tarefa; o resultado é indexado por seed."""
    seeds = list(seeds)
    if not seeds:
        raise PreconditionError("lista de seeds vazia")
    done = 0
    done_lock = threading.Lock()

    def task(seed: int) -> Trajectory:
        nonlocal done
        traj = run(SimConfig(instance, horizon, seed, belief_floor, snapshot_every), user)
        with done_lock:
            done += 1
            logger.info("Seed %d concluído (%d/%d)", seed, done, len(seeds))
        return traj

    if jobs <= 1:
        return {s: task(s) for s in seeds}
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        futures = {s: pool.submit(task, s) for s in seeds}
        return {s: futures[s].result() for s in sorted(futures)}


def trajectory_records(traj: Trajectory, config_hash: str, names: Sequence[str]) -> Iterable[dict]:
    yield {
        "type": "header",
        "config_hash": config_hash,
        "seed": traj.seed,
        "generator": traj.generator,
        "horizon": len(traj),
        "snapshot_every": traj.snapshot_every,
        "models": list(names),
    }
    for t, z, b, u, v in traj.steps:
        yield {"type": "step", "t": t, "z": z, "b": b, "u": u, "v": v}
    for t, w in zip(traj.snapshot_times, traj.snapshot_beliefs):
        yield {"type": "snapshot", "t": int(t), "belief": [float(x) for x in w]}


def write_trajectory(path: str, traj: Trajectory, config_hash: str, names: Sequence[str]) -> None:
    """Grava a trajetória em JSON lines (arquivo temporário + rename)."""
    from stratsim.report import atomic_write_text

    lines = (json.dumps(rec, sort_keys=True) for rec in trajectory_records(traj, config_hash, names))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_trajectory(path: str) -> tuple[dict, Trajectory]:
    """Lê um arquivo JSON lines gravado por ``write_trajectory``."""
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    header = None
    steps, times, snaps = [], [], []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            rec = json.loads(line)
            if rec["type"] == "header":
                header = rec
            elif rec["type"] == "step":
                steps.append((rec["z"], rec["b"], rec["u"], rec["v"]))
            elif rec["type"] == "snapshot":
                times.append(rec["t"])
                snaps.append(rec["belief"])
    if header is None or not snaps:
        raise ValidationError(f"arquivo de trajetória incompleto: {path}")
    arr = np.array(steps, dtype=np.float64).reshape(-1, 4)
    traj = Trajectory(
        z=arr[:, 0].astype(np.int64),
        b=arr[:, 1].astype(np.int64),
        u=arr[:, 2],
        v=arr[:, 3],
        snapshot_times=np.array(times, dtype=np.int64),
        snapshot_beliefs=np.array(snaps, dtype=np.float64),
        final_belief=Belief(snaps[-1]),
        seed=int(header["seed"]),
        generator=header.get("generator", GENERATOR_NAME),
        snapshot_every=int(header.get("snapshot_every", 1)),
    )
    return header, traj
