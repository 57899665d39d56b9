"""Linha de comando: ``python -m stratsim <comando> --config experimento.yaml``.

Comandos: simulate, stable-set, solve, trust, counterfactual, reproduce, charts.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Sequence

from stratsim import charts
from stratsim.config import ConfigError, ExperimentConfig, apply_overrides, load_config
from stratsim.core import PreconditionError, StratsimError, validate_instance
from stratsim.report import (
    ReportBundle,
    ensure_output_dir,
    simulation_rng,
    table_to_pdf,
    to_jsonable,
    write_csv,
)
from stratsim.scenarios import ReproduceSettings, reproduce
from stratsim.simulator import run_many, summarize, write_trajectory
from stratsim.stability import stable_set
from stratsim.strategize import alignment_benefit_check, naive_strategy, user_response
from stratsim.trust import br_predictability_check, counterfactual_audit, trust_audit

logger = logging.getLogger("stratsim")

BANNER = "=" * 60
LOG_FORMAT = "[%(levelname)s] %(message)s"
TRAJECTORY_DIR = "trajetorias"

_handler: logging.Handler | None = None


def configure_logging(verbose: bool = False) -> None:
    """Um único handler no logger ``stratsim``: ``[NIVEL] mensagem``."""
    global _handler
    if _handler is not None:
        logger.removeHandler(_handler)
    _handler = logging.StreamHandler(sys.stderr)
    _handler.setFormatter(logging.Formatter(LOG_FORMAT))
    logger.addHandler(_handler)
    logger.setLevel(logging.DEBUG if verbose else logging.INFO)


def parse_seeds(text: str) -> list[int]:
    """``0-19`` ou ``1,2,5`` (ou uma mistura: ``0-3,10``)."""
    seeds: list[int] = []
    try:
        for part in text.split(","):
            part = part.strip()
            if not part:
                continue
            if "-" in part:
                lo, hi = (int(x) for x in part.split("-", 1))
                if hi < lo:
                    raise ValueError(part)
                seeds.extend(range(lo, hi + 1))
            else:
                seeds.append(int(part))
    except ValueError:
        raise argparse.ArgumentTypeError(f"seeds inválidos: {text!r}") from None
    return seeds


def _banner(title: str) -> None:
    print(BANNER)
    print(title)
    print(BANNER)


def _warn_diagnostics(instance, strategy=None) -> None:
    for diag in validate_instance(instance, strategy):
        logger.warning("%s: %s", diag.kind, diag.message)


def _emit(bundle: ReportBundle, config: ExperimentConfig, rows: Sequence[dict], columns: Sequence[str] | None = None) -> None:
    """Grava o relatório JSON, a tabela CSV e, se pedido, os gráficos de payoff."""
    out = config.output_dir
    formats = config.formats
    ensure_output_dir(out)
    if "json" in formats:
        bundle.write(out)
    if "csv" in formats:
        write_csv(os.path.join(out, f"{bundle.command}.csv"), rows, columns)
    chart_formats = [f for f in formats if f in charts.SUPPORTED]
    if chart_formats:
        for name, bars in charts.bars_from_bundle(to_jsonable(bundle.to_dict())):
            charts.payoff_bars(bars, os.path.join(out, f"payoffs_{name}"), chart_formats, f"Payoffs ({name})")


def cmd_simulate(config: ExperimentConfig, jobs: int) -> int:
    seeds = config.seeds
    if not seeds:
        raise ConfigError("engine.seeds: lista vazia (simulate precisa de ao menos um seed)")
    engine = config.engine
    instance = config.instance()
    user = config.user()
    params = config.dominance()
    threshold, hold = config.convergence
    horizon = int(engine.get("horizon", 5000))
    response = user_response(instance, user, params, jobs)
    _warn_diagnostics(instance, response.strategy)

    hclass = instance.hypothesis_class
    names = [hclass.name(i) for i in range(len(hclass))]
    target = response.stable_set.survivors
    _banner(f"Simulação: {instance.name} | usuário {user.mode} ({response.label}) | {len(seeds)} seeds x T={horizon}")

    trajs = run_many(
        instance,
        response.strategy,
        seeds,
        horizon,
        snapshot_every=int(engine.get("snapshot_every", 1)),
        belief_floor=float(engine.get("belief_floor", 0.0)),
        jobs=jobs,
    )
    traj_dir = os.path.join(config.output_dir, TRAJECTORY_DIR)
    ensure_output_dir(traj_dir)
    rows = []
    for seed in sorted(trajs):
        write_trajectory(os.path.join(traj_dir, f"seed_{seed}.jsonl"), trajs[seed], config.hash, names)
        row = summarize(trajs[seed], target, threshold, hold, names)
        rows.append(row)
        step = row["convergence_step"]
        logger.info("Seed %d: %s", seed, f"convergiu no passo {step}" if step is not None else "não convergiu")

    write_csv(os.path.join(config.output_dir, "simulate_summary.csv"), rows)
    payload = {
        "instance": instance.name,
        "user_strategy": response.label,
        "stable_set": response.stable_set.to_dict(hclass),
        "summaries": rows,
        "trajectory_dir": TRAJECTORY_DIR,
    }
    bundle = ReportBundle("simulate", config.raw, payload, rng=simulation_rng())
    if "json" in config.formats:
        bundle.write(config.output_dir)
    chart_formats = [f for f in config.formats if f in charts.SUPPORTED]
    if chart_formats:
        charts.belief_chart([trajs[s] for s in sorted(trajs)], names, os.path.join(config.output_dir, "crencas"), chart_formats)
    converged = sum(1 for r in rows if r["convergence_step"] is not None)
    print(f"{converged}/{len(rows)} seeds convergiram para {[names[i] for i in target]}")
    return 0


def cmd_stable_set(config: ExperimentConfig, jobs: int) -> int:
    instance = config.instance()
    user = config.user()
    params = config.dominance()
    hclass = instance.hypothesis_class
    if user.mode == "naive":
        strategy, label = naive_strategy(instance.user_payoff), "q_br"
    else:
        solution = user_response(instance, user, params, jobs)
        strategy, label = solution.strategy, solution.label
    _warn_diagnostics(instance, strategy)
    result = stable_set(strategy, instance.algorithm, hclass, params)
    _banner(f"Conjunto estável ({instance.name}, estratégia {label})")
    print("Sobreviventes:", ", ".join(hclass.name(i) for i in result.survivors))
    for e in result.rounds:
        print(f"  rodada {e.round}: {hclass.name(e.eliminated)} eliminado por {hclass.name(e.dominator)} (margem {e.margin:.6g})")
    payload = {"user_strategy": label, "strategy": strategy.to_dict(), "result": result.to_dict(hclass)}
    rows = [
        {
            "round": e.round,
            "eliminated": hclass.name(e.eliminated),
            "dominator": hclass.name(e.dominator),
            "margin": e.margin,
        }
        for e in result.rounds
    ]
    _emit(ReportBundle("stable_set", config.raw, payload), config, rows, ["round", "eliminated", "dominator", "margin"])
    return 0


def cmd_solve(config: ExperimentConfig, jobs: int) -> int:
    instance = config.instance()
    user = config.user()
    params = config.dominance()
    hclass = instance.hypothesis_class
    _warn_diagnostics(instance)
    solution = user_response(instance, user, params, jobs)
    alignment = {}
    for sense in ("min", "max"):
        try:
            alignment[sense] = alignment_benefit_check(instance, user, params, sense, jobs).to_dict()
        except PreconditionError as e:
            logger.warning("Teste de alinhamento ignorado: %s", e)
            alignment = None
            break
    _banner(f"Resposta do usuário {user.mode} ({instance.name})")
    print(f"Estratégia: {solution.label}")
    print(f"Pior caso U: {solution.worst_case_user_payoff:.6g} | pior caso V: {solution.worst_case_platform_payoff:.6g}")
    print("Conjunto estável:", ", ".join(hclass.name(i) for i in solution.stable_set.survivors))
    payload = {"solution": solution.to_dict(hclass), "alignment": alignment}
    rows = [row.to_dict() for row in solution.per_candidate_table]
    _emit(
        ReportBundle("solve", config.raw, payload),
        config,
        rows,
        ["id", "label", "survivors", "user_payoff", "platform_payoff", "deviation"],
    )
    return 0


def cmd_trust(config: ExperimentConfig, jobs: int) -> int:
    instance = config.instance()
    user = config.user()
    params = config.dominance()
    _warn_diagnostics(instance)
    report = trust_audit(instance, user, float(config.engine.get("kappa0", 0.0)), params, jobs)
    _banner(f"Auditoria de confiabilidade ({instance.name})")
    print(f"Estratégico: {report.strategic_value:.6g} ({report.strategic_label}) | ingênuo: {report.naive_value:.6g}")
    print(f"Ganho de estrategizar: {report.strategization_gap:.6g} | kappa: {report.kappa:.6g}")
    print("Confiável" if report.trustworthy else "Não confiável", f"(kappa0 = {report.kappa0:g})")
    payload = report.to_dict()
    _emit(ReportBundle("trust", config.raw, payload), config, [payload])
    return 0


def cmd_counterfactual(config: ExperimentConfig, jobs: int) -> int:
    instance = config.instance()
    user = config.user()
    params = config.dominance()
    p_cf = config.algorithm("counterfactual_algorithm", instance)
    _warn_diagnostics(instance)
    report = counterfactual_audit(instance, p_cf, user, params, jobs)
    payload = report.to_dict()
    eps = config.engine.get("eps_net")
    if eps is not None:
        lipschitz = config.engine.get("lipschitz")
        check = br_predictability_check(
            instance, p_cf, None if lipschitz is None else float(lipschitz), float(eps), params
        )
        payload["predictability"] = check.to_dict()
    _banner(f"Auditoria contrafactual ({instance.name})")
    print(f"Previsto V̂(p'): {report.predicted:.6g} | verdadeiro V̄*(p'): {report.true_strategic:.6g}")
    print(f"Atual V̄*(p): {report.current_true:.6g} | d_P(p, p'): {report.d_P_between:.6g}")
    row = {k: v for k, v in payload.items() if not isinstance(v, dict)}
    _emit(ReportBundle("counterfactual", config.raw, payload), config, [row])
    return 0


def _reproduce_settings(config: ExperimentConfig, jobs: int) -> ReproduceSettings:
    engine = config.engine
    threshold, hold = config.convergence
    defaults = ReproduceSettings()
    return ReproduceSettings(
        params=config.dominance(),
        seeds=tuple(config.seeds) or defaults.seeds,
        horizon=int(engine.get("horizon", defaults.horizon)),
        threshold=threshold,
        hold=hold,
        n_random=int(engine.get("n_random", defaults.n_random)),
        sensitivity=bool(engine.get("sensitivity", False)),
        jobs=jobs,
    )


def cmd_reproduce(config: ExperimentConfig, jobs: int) -> int:
    props = [int(p) for p in config.engine.get("props", [1, 2, 3, 4, 5])]
    settings = _reproduce_settings(config, jobs)
    _banner(f"Reprodução das proposições {props}")
    if jobs > 1 and len(props) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = {p: pool.submit(reproduce, p, settings) for p in props}
            reports = {p: futures[p].result() for p in sorted(futures)}
    else:
        reports = {p: reproduce(p, settings) for p in props}

    rows = []
    for p in sorted(reports):
        rep = reports[p]
        failed = [k for k, ok in rep.checks.items() if not ok]
        failed += [k for k in rep.deltas if abs(rep.deltas[k]) > rep.tolerances.get(k, 0.0)]
        rows.append(
            {
                "prop_id": p,
                "pass": rep.passed,
                "max_abs_delta": max((abs(d) for d in rep.deltas.values()), default=None),
                "failed": ";".join(failed),
                "error": rep.error,
                "detail": "; ".join(v for v in rep.notes.values() if isinstance(v, str)),
            }
        )
        print(f"  Proposição {p}: {'OK' if rep.passed else 'FALHOU'}" + (f" ({', '.join(failed)})" if failed else ""))

    out = config.output_dir
    ensure_output_dir(out)
    payload = {"props": sorted(reports), "reports": [reports[p].to_dict() for p in sorted(reports)]}
    bundle = ReportBundle("reproduce", config.raw, payload)
    formats = config.formats
    if "json" in formats:
        bundle.write(out)
    columns = ["prop_id", "pass", "max_abs_delta", "failed", "error", "detail"]
    write_csv(os.path.join(out, "reproduce_table.csv"), rows, columns)
    if "pdf" in formats:
        table = [columns] + [[r[c] for c in columns] for r in rows]
        table_to_pdf(table, os.path.join(out, "reproduce_table.pdf"), "Reprodução das proposições")
    chart_formats = [f for f in formats if f in charts.SUPPORTED]
    if chart_formats:
        for name, bars in charts.bars_from_bundle(to_jsonable(bundle.to_dict())):
            charts.payoff_bars(bars, os.path.join(out, f"payoffs_{name}"), chart_formats, f"Payoffs ({name})")
    return 0 if all(r["pass"] for r in rows) else 1


def cmd_charts(args: argparse.Namespace) -> int:
    written = charts.emit_charts(args.input, args.out or "graficos", args.formats)
    for path in written:
        print(f"  {path}")
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "stable-set": cmd_stable_set,
    "solve": cmd_solve,
    "trust": cmd_trust,
    "counterfactual": cmd_counterfactual,
    "reproduce": cmd_reproduce,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stratsim", description="Simulador de usuários estratégicos em plataformas bayesianas")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="diretório de saída (sobrescreve outputs.directory)")
    common.add_argument("--jobs", type=int, default=1, help="tarefas em paralelo")
    common.add_argument("--verbose", action="store_true", help="log em nível DEBUG")

    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        p.add_argument("--config", required=name != "reproduce", help="arquivo YAML do experimento")
        p.add_argument("--seeds", type=parse_seeds, help="ex.: 0-19 ou 1,2,3")
        p.add_argument("--grid-k", type=int, dest="grid_k")
        p.add_argument("--tau-dom", type=float, dest="tau_dom")

    p = sub.add_parser("charts", parents=[common])
    p.add_argument("--input", required=True, help="diretório de trajetórias ou relatório JSON")
    p.add_argument("--formats", nargs="+", default=["pdf"], choices=sorted(charts.SUPPORTED))
    return parser


def _load(args: argparse.Namespace) -> ExperimentConfig:
    overrides = dict(out=args.out, seeds=args.seeds, grid_k=args.grid_k, tau_dom=args.tau_dom)
    if args.config:
        return load_config(args.config, **overrides)
    return ExperimentConfig(apply_overrides({}, **overrides), source="<padrões>")


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose)
    if args.jobs < 1:
        parser.error("--jobs deve ser >= 1")
    try:
        if args.command == "charts":
            return cmd_charts(args)
        config = _load(args)
        logger.debug("Configuração %s (hash %s)", config.source, config.hash)
        return COMMANDS[args.command](config, args.jobs)
    except (ConfigError, FileNotFoundError) as e:
        print(f"[ERRO] {e}", file=sys.stderr)
        return 2
    except StratsimError as e:
        print(f"[ERRO] {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as e:
        logger.debug("Falha inesperada", exc_info=True)
        print(f"[ERRO] {type(e).__name__}: {e}", file=sys.stderr)
        return 1
