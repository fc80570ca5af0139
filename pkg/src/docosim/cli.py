"""Config-driven experiment runner.

Commands:

* ``run <config> -o <dir> [--threads k]`` — run the experiment grid described
  by a key-value config (or a previously written manifest.json) and emit
  regret.csv / trials.csv / manifest.json;
* ``spectral <topology> <N> [--c x]`` — print the mixing-matrix spectral
  report for a topology;
* ``plot <csv> [<csv> ...] -o <file>`` — render mean +/- std regret curves to
  a single SVG (one panel column per topology, one row per input CSV).

Exit codes: 0 ok, 2 config error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import datetime
import json
import os
import sys
from pathlib import Path

from . import __version__
from . import losses as loss_mod
from .losses import NonConvergenceError
from .simulator import (
    ALGORITHMS,
    LOSS_REGIMES,
    SimConfig,
    build_comm,
    compare_algorithms,
    write_regret_csv,
    write_trials_csv,
)
from .svgfig import Panel, render_figure
from .topology import build_graph, comm_matrix, spectral_gap_report

__all__ = ["ConfigError", "load_config", "cmd_run", "cmd_spectral", "cmd_plot", "main"]


class ConfigError(ValueError):
    pass


REQUIRED_KEYS = ("topology", "agents", "algorithm", "loss", "delay", "rounds",
                 "trials", "seed")

DEFAULTS = {
    "mixing_c": "auto",
    "dim": "10",
    "lipschitz": "auto",
    "alpha": "auto",
    "radius": "2.0",
    "block_len": "auto",
    "delay_max": "50",
    "delay_p": "0.1",
    "delay_value": "0",
    "geometric_support": "zero_based",
    "check_invariants": "true",
}

# algorithm = auto expands per regime: adftrl_sc needs strong convexity and
# the baseline is only interesting against the convex-regime pair.
AUTO_ALGORITHMS = {
    "convex": ("adftrl_fixed", "adftrl_adaptive", "baseline_dogd"),
    "strongly_convex": ("adftrl_sc", "adftrl_adaptive"),
}


def parse_config_text(text: str) -> dict:
    """Parse `key = value` lines; '#' starts a comment."""
    out = {}
    for i, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {i}: expected 'key = value', got {raw!r}")
        key, val = line.split("=", 1)
        out[key.strip()] = val.strip()
    return out


def load_config(path) -> dict:
    """Read a config file or the config block of a manifest.json."""
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {path}")
    if p.suffix == ".json":
        data = json.loads(p.read_text())
        if "config" not in data:
            raise ConfigError("manifest JSON lacks a 'config' block")
        raw = {str(k): str(v) for k, v in data["config"].items()}
    else:
        raw = parse_config_text(p.read_text())
    for key in REQUIRED_KEYS:
        if key not in raw:
            raise ConfigError(f"missing required config key: {key}")
    merged = dict(DEFAULTS)
    merged.update(raw)
    return merged


def _split_list(value: str) -> list:
    return [v.strip() for v in value.split(",") if v.strip()]


def _parse_int(cfg, key):
    try:
        return int(cfg[key])
    except ValueError:
        raise ConfigError(f"config key {key} must be an integer, got {cfg[key]!r}")


def _parse_float(cfg, key):
    try:
        return float(cfg[key])
    except ValueError:
        raise ConfigError(f"config key {key} must be a number, got {cfg[key]!r}")


def _delay_params(cfg: dict, kind: str) -> tuple:
    if kind == "uniform":
        return (("max", _parse_int(cfg, "delay_max")),)
    if kind == "geometric":
        return (("p", _parse_float(cfg, "delay_p")),
                ("support", cfg["geometric_support"]))
    if kind == "constant":
        return (("value", _parse_int(cfg, "delay_value")),)
    raise ConfigError(f"unknown delay kind {kind!r}")


def expand_grid(cfg: dict) -> list:
    """Expand a parsed config into the list of experiment cells.

    Returns [(cell_name, loss, delay, [SimConfig per algorithm-topology])]
    with one cell per (delay, loss) environment; inside a cell the configs
    share everything but topology and algorithm.
    """
    topologies = _split_list(cfg["topology"])
    losses = _split_list(cfg["loss"])
    delaykinds = _split_list(cfg["delay"])
    for loss in losses:
        if loss not in LOSS_REGIMES:
            raise ConfigError(f"unknown loss regime {loss!r}")
    block_len = None if cfg["block_len"] == "auto" else _parse_int(cfg, "block_len")
    mixing_c = cfg["mixing_c"] if cfg["mixing_c"] == "auto" else _parse_float(cfg, "mixing_c")
    lipschitz = cfg["lipschitz"] if cfg["lipschitz"] == "auto" else _parse_float(cfg, "lipschitz")
    alpha = cfg["alpha"] if cfg["alpha"] == "auto" else _parse_float(cfg, "alpha")
    check = cfg["check_invariants"].lower() in ("true", "1", "yes")

    cells = []
    for loss in losses:
        if cfg["algorithm"] == "auto":
            algs = list(AUTO_ALGORITHMS[loss])
        else:
            algs = _split_list(cfg["algorithm"])
            for a in algs:
                if a not in ALGORITHMS:
                    raise ConfigError(f"unknown algorithm {a!r}")
        for dkind in delaykinds:
            cell_cfgs = []
            for topo in topologies:
                for alg in algs:
                    cell_cfgs.append(SimConfig(
                        topology=topo,
                        agents=_parse_int(cfg, "agents"),
                        algorithm=alg,
                        loss_regime=loss,
                        delay_kind=dkind,
                        delay_params=_delay_params(cfg, dkind),
                        horizon=_parse_int(cfg, "rounds"),
                        trials=_parse_int(cfg, "trials"),
                        seed=_parse_int(cfg, "seed"),
                        mixing_c=mixing_c,
                        dim=_parse_int(cfg, "dim"),
                        lipschitz=lipschitz,
                        alpha=alpha,
                        radius=_parse_float(cfg, "radius"),
                        block_len=block_len,
                        check_invariants=check,
                    ))
            cells.append((f"{dkind}_{loss}", loss, dkind, cell_cfgs))
    return cells


def _derived_block(cfg: dict) -> dict:
    out = {}
    agents = int(cfg["agents"])
    c = "auto" if cfg["mixing_c"] == "auto" else float(cfg["mixing_c"])
    for topo in _split_list(cfg["topology"]):
        cm = comm_matrix(build_graph(topo, agents), c)
        rep = spectral_gap_report(cm)
        out[topo] = {
            "sigma2": rep["sigma2"],
            "gap": rep["gap"],
            "gap_quartic_inverse": rep["gap_quartic_inverse"],
            "theta": cm.theta,
            "block_len": cm.block_len,
            "contraction_base": cm.contraction_base,
        }
    dim = int(cfg["dim"])
    radius = float(cfg["radius"])
    out["lipschitz_default"] = loss_mod.default_lipschitz(dim, radius)
    out["diameter"] = 2.0 * radius
    return out


def cmd_run(config_path, out_dir, threads: int | None = None) -> int:
    """Execute the grid of a config file and write outputs under out_dir."""
    cfg = load_config(config_path)
    cells = expand_grid(cfg)
    threads = threads or os.cpu_count() or 1
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    manifest = {
        "tool": "docosim",
        "version": __version__,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "config": cfg,
        "derived": _derived_block(cfg),
        "seeds": {
            "base": int(cfg["seed"]),
            "trials": int(cfg["trials"]),
        },
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")

    single = len(cells) == 1
    for cell_name, _loss, _dkind, cell_cfgs in cells:
        cell_dir = out if single else out / cell_name
        cell_dir.mkdir(parents=True, exist_ok=True)
        # group by topology: algorithms within a topology share trial worlds
        entries = []
        topologies = []
        for c in cell_cfgs:
            if c.topology not in topologies:
                topologies.append(c.topology)
        for topo in topologies:
            group = [c for c in cell_cfgs if c.topology == topo]
            results = compare_algorithms(group, threads=threads)
            for c in group:
                entries.append((c.algorithm, topo, results[c.algorithm]))
        write_regret_csv(entries, cell_dir / "regret.csv")
        write_trials_csv(entries, cell_dir / "trials.csv")
    return 0


def cmd_spectral(topology: str, agents: int, c="auto", out=sys.stdout) -> int:
    """Print sigma2, the gap, its inverse quartic root, theta, and B."""
    cm = comm_matrix(build_graph(topology, agents), c)
    rep = spectral_gap_report(cm)
    out.write(f"topology={topology} agents={agents} c={cm.mixing_c!r}\n")
    out.write(f"sigma2 = {rep['sigma2']:.10f}\n")
    out.write(f"gap (1 - sigma2) = {rep['gap']:.10f}\n")
    out.write(f"gap^(-1/4) = {rep['gap_quartic_inverse']:.4f}\n")
    out.write(f"theta = {cm.theta:.10f}\n")
    out.write(f"block_len = {cm.block_len}\n")
    return 0


def _read_regret_csv(path):
    rows = {}
    order = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "algorithm,topology,t,mean_regret,std_regret":
            raise ConfigError(f"unexpected regret.csv header in {path}")
        for ln in fh:
            ln = ln.strip()
            if not ln:
                continue
            alg, topo, t, mean, std = ln.split(",")
            key = (topo, alg)
            if key not in rows:
                rows[key] = ([], [], [])
                order.append(key)
            rows[key][0].append(int(t))
            rows[key][1].append(float(mean))
            rows[key][2].append(float(std))
    return rows, order


def cmd_plot(csv_paths, out_path) -> int:
    """Render regret CSVs as an SVG grid of per-topology panels."""
    grid = []
    for path in csv_paths:
        rows, order = _read_regret_csv(path)
        topologies = []
        for topo, _alg in order:
            if topo not in topologies:
                topologies.append(topo)
        stem = Path(path).parent.name or Path(path).stem
        row = []
        for topo in topologies:
            panel = Panel(f"{stem}: {topo}" if stem else topo)
            for (p_topo, alg) in order:
                if p_topo != topo:
                    continue
                t, mean, std = rows[(p_topo, alg)]
                panel.add_curve(alg, t, mean, std)
            row.append(panel)
        grid.append(row)
    render_figure(grid, out_path)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="docosim",
        description="decentralized online learning simulator over gossip "
                    "networks with delayed feedback",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config")
    p_run.add_argument("-o", "--out", required=True)
    p_run.add_argument("--threads", type=int, default=None)

    p_spec = sub.add_parser("spectral", help="spectral report for a topology")
    p_spec.add_argument("topology")
    p_spec.add_argument("agents", type=int)
    p_spec.add_argument("--c", default="auto")

    p_plot = sub.add_parser("plot", help="plot regret CSVs as SVG")
    p_plot.add_argument("csv", nargs="+")
    p_plot.add_argument("-o", "--out", required=True)

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args.config, args.out, args.threads)
        if args.command == "spectral":
            c = args.c if args.c == "auto" else float(args.c)
            return cmd_spectral(args.topology, args.agents, c)
        if args.command == "plot":
            return cmd_plot(args.csv, args.out)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (NonConvergenceError, ArithmeticError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
