"""Command-line entry point.

    underwrite run --preset mr-logistic --agents gre,ths,ids --set replications=5 --out results/
    underwrite presets
    underwrite render --in results/
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .agents import AgentKind
from .charts import render_charts
from .config import PRESETS, emit_config, parse_config, read_echo_section, with_seed
from .errors import ConfigError, ConvergenceError, CsvFormatError, NumericalError, SimulationError
from .harness import ExperimentConfig, aggregate, run_agents
from .output import allocation_path, metrics_path, write_allocation_csv, write_comparison_csv, write_metrics_csv

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4
CONFIG_ECHO = "config.ini"


def parse_agents(text: str, p: float = 3.0) -> list[AgentKind]:
    agents = [AgentKind.parse(tok, p) for tok in text.split(",") if tok.strip()]
    labels = [a.label for a in agents]
    if len(set(labels)) != len(labels):
        raise ConfigError(f"duplicate agent in {text!r}", key="agents")
    return agents


def run_command(cfg: ExperimentConfig, agents, out_dir, workers=None, log=sys.stderr) -> int:
    """Run every agent on paired environment streams and write CSVs, config echo and charts."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    agents = list(agents)
    for a in agents:
        print(f"running {a.label}: {cfg.replications} replications x {cfg.horizon} steps", file=log, flush=True)
    results = run_agents(cfg, agents, workers=workers)
    aggs = {label: aggregate(runs) for label, runs in results.items()}

    for label, agg in aggs.items():
        write_metrics_csv(metrics_path(out_dir, label), agg)
        write_allocation_csv(allocation_path(out_dir, label), agg)
    if aggs:
        write_comparison_csv(out_dir / "comparison.csv", aggs)

    hashes = {f"{label}.{r}": run.env_hash for label, runs in results.items() for r, run in enumerate(runs)}
    echo = emit_config(cfg, {"run": {"agents": ",".join(aggs)}, "env_hashes": hashes})
    (out_dir / CONFIG_ECHO).write_text(echo)

    render_charts(list(aggs), out_dir)
    summary = " ".join(f"{label}={agg.mean['cumulative_regret'][-1]:.4f}" for label, agg in aggs.items())
    print(f"final mean cumulative regret: {summary}" if summary else "no agents run")
    return EXIT_OK


def render_command(in_dir, out_dir=None) -> int:
    in_dir = Path(in_dir)
    echo = in_dir / CONFIG_ECHO
    if echo.is_file():
        text = read_echo_section(echo.read_text(), "run").get("agents", "")
        labels = [t for t in text.split(",") if t]
    else:
        labels = sorted(p.stem.removeprefix("metrics_") for p in in_dir.glob("metrics_*.csv"))
    written = render_charts(labels, in_dir, out_dir)
    print(f"wrote {len(written)} charts")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="underwrite", description="Credit underwriting bandit simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate a scenario for one or more agents")
    run.add_argument("--preset", required=True, help="preset name or path to a config file")
    run.add_argument("--agents", default="gre,ths,ids", help="comma-separated: gre, ths, ids or ids:<p>")
    run.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    run.add_argument("--out", default="results")
    run.add_argument("--seed", type=int, default=None)

    sub.add_parser("presets", help="list scenario presets")

    render = sub.add_parser("render", help="re-render charts from CSVs")
    render.add_argument("--in", dest="in_dir", required=True)
    render.add_argument("--out", dest="out_dir", default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "presets":
            for name in PRESETS:
                cfg = parse_config(name)
                print(f"{name:20s} model={cfg.env_model} M={cfg.env.m_contexts} K={cfg.env.k_pool} "
                      f"N={cfg.env.n_loans} mode={cfg.env.mode.value} T={cfg.horizon} R={cfg.replications}")
            return EXIT_OK
        if args.command == "render":
            return render_command(args.in_dir, args.out_dir)
        cfg = with_seed(parse_config(args.preset, args.overrides), args.seed)
        return run_command(cfg, parse_agents(args.agents, cfg.agent.p), args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SimulationError, NumericalError, ConvergenceError) as exc:
        print(f"simulation error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (OSError, CsvFormatError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
