"""Command-line entry point.

    covoter <simulate|pde|graphon|experiment> [NAME] --config FILE [--set key=value]... --seed N --out DIR
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from pathlib import Path

import numpy as np

from covoter import config as cfgmod
from covoter import io
from covoter.core import DensityField, Model1Params, Model2Params
from covoter.errors import BudgetError, ConfigurationError, ContractViolation, DegenerateKernelError
from covoter.experiments import REGISTRY, run_experiment
from covoter.graphon import EXACT_BUDGET, cut_norm_exact, cut_norm_lower_bound, from_snapshot, l1_distance
from covoter.pde import PdeConfig, l1_between, solve, stationary_density, stationary_model1
from covoter.simulator import init, run
from covoter.stats import beta_bin_masses, polarisation, type_histogram


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="covoter", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="flat key = value file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one key")
        p.add_argument("--seed", type=int, help="64-bit seed")
        p.add_argument("--out", help="output directory")

    common(sub.add_parser("simulate", help="run one stochastic process"))
    common(sub.add_parser("pde", help="solve the forward equations"))
    common(sub.add_parser("graphon", help="distances between two stored graphons"))
    p = sub.add_parser("experiment", help="run a registered experiment")
    p.add_argument("name", help="one of: " + ", ".join(REGISTRY))
    common(p)
    return ap


def _load(args) -> cfgmod.ExperimentConfig:
    return cfgmod.load(args.config, args.set, seed=args.seed, out=args.out)


def _record(cfg: cfgmod.ExperimentConfig) -> dict:
    # the output location does not influence results; keep it out of the files
    return {k: v for k, v in cfg.to_dict().items() if k != "out"}


def cmd_simulate(cfg: cfgmod.ExperimentConfig) -> int:
    out = Path(cfg.out)
    params = cfg.params()
    state = init(cfg.n, params, cfg.opinion_law, cfg.y_law, cfg.seed, simulate_edges=not cfg.vertex_only, mim3_p=cfg.get("mim3_p") if cfg.model == "3" else "mean")
    times = list(np.arange(cfg.obs_dt, cfg.T + 1e-12, cfg.obs_dt))
    if not times or times[-1] < cfg.T - 1e-12:
        times.append(cfg.T)
    snaps = []
    run(state, cfg.T, [snaps.append], times)
    first = init(cfg.n, params, cfg.opinion_law, cfg.y_law, cfg.seed, simulate_edges=not cfg.vertex_only).snapshot()
    snaps = [first] + snaps
    io.write_csv(out / "trajectory.csv", ["t", "frac_plus"], [(s.t, s.n_plus / s.n) for s in snaps])
    final = snaps[-1]
    h = type_histogram(final, cfg.bins, "y")
    if isinstance(params, Model1Params):
        a, b = params.gamma_mp, params.gamma_pm
    else:
        ph = final.n_plus / final.n
        a, b = (params.beta * ph, params.beta * (1 - ph)) if 0 < ph < 1 else (math.nan, math.nan)
    bm = beta_bin_masses(h.edges, a, b) if math.isfinite(a) else np.full(h.bins, math.nan)
    io.write_csv(out / "histogram.csv", ["bin_left", "bin_right", "mass", "beta_mass"], zip(h.edges[:-1], h.edges[1:], h.masses, bm))
    summary = {"config": _record(cfg), "frac_plus": final.n_plus / final.n, "vertex_events": state.vertex_events, "edge_events": state.edge_events}
    if not cfg.vertex_only:
        io.write_graphon_pgm(out / "graphon.pgm", from_snapshot(final))
        pol = [(s.t,) + polarisation(s) for s in snaps]
        io.write_csv(out / "polarisation.csv", ["t", "disagree_density", "disagree_share"], pol)
        summary["disagree_density"], summary["disagree_share"] = pol[-1][1], pol[-1][2]
    if cfg.model == "3":
        layers = state.layer_edges()
        q = int(cfg.get("q"))
        io.write_csv(out / "layers.csv", ["layer", "colour", "active_edges"], [(i, "g" if i < q else "r", e.n_active) for i, e in enumerate(layers)])
        for i, e in enumerate(layers):
            io.write_pgm(out / f"layer{i}.pgm", e.adjacency[np.ix_(final.permutation, final.permutation)])
        io.write_pgm(out / "resulting.pgm", final.relabelled_adjacency())
    io.write_json(out / "summary.json", summary)
    return 0


def cmd_pde(cfg: cfgmod.ExperimentConfig) -> int:
    out = Path(cfg.out)
    params = cfg.params()
    p_plus = {"balanced": 0.5, "plus": 1.0, "minus": 0.0}.get(cfg.init_opinion)
    if p_plus is None:
        p_plus = float(cfg.init_opinion)
    if cfg.pde_init == "point":
        start = DensityField.point_mass(cfg.M, p_plus)
    elif cfg.pde_init == "uniform":
        start = DensityField.uniform(cfg.M, p_plus)
    elif cfg.pde_init == "stationary" and isinstance(params, Model1Params):
        start = stationary_model1(params, cfg.M)
    else:
        raise ConfigurationError(f"pde_init: unsupported value {cfg.pde_init!r} for model {cfg.model}")
    n_out = max(1, int(round(cfg.T / cfg.obs_dt)))
    tr = solve(start, params, PdeConfig(M=cfg.M, T=cfg.T), np.linspace(0.0, cfg.T, n_out + 1))
    io.write_density_csv(out / "densities.csv", tr)
    final = tr.final
    report = {"config": _record(cfg), "mass_error": max(abs(s.mass - 1) for s in tr.slices), "frac_plus_final": final.plus_mass}
    fixed = None
    if isinstance(params, Model1Params):
        fixed = stationary_model1(params, cfg.M)
    elif isinstance(params, Model2Params) and params.pi_p == params.pi_m and 0 < final.plus_mass < 1:
        fixed = stationary_density(params.beta * final.plus_mass, params.beta * (1 - final.plus_mass), cfg.M)
    if fixed is not None:
        report["l1_to_fixed_point"] = l1_between(final, fixed)
    io.write_json(out / "residuals.json", report)
    return 0


def cmd_graphon(cfg: cfgmod.ExperimentConfig) -> int:
    if not (cfg.graphon_a and cfg.graphon_b):
        raise ConfigurationError("graphon_a, graphon_b: both CSV block dumps are required")
    a = io.read_graphon_csv(cfg.graphon_a)
    b = io.read_graphon_csv(cfg.graphon_b)
    diff = a - b
    rep = {"config": _record(cfg), "l1": l1_distance(a, b)}
    if diff.k <= EXACT_BUDGET:
        rep["cut"] = cut_norm_exact(diff)
        rep["cut_method"] = "exact"
    else:
        rep["cut"] = cut_norm_lower_bound(diff, cfg.restarts, cfg.seed)
        rep["cut_method"] = "lower_bound"
    io.write_json(Path(cfg.out) / "distances.json", rep)
    print(f"l1={rep['l1']:.6g} cut={rep['cut']:.6g} ({rep['cut_method']})")
    return 0


def cmd_experiment(name: str, args) -> int:
    if name not in REGISTRY:
        print(f"unknown experiment {name!r}; registry: {', '.join(REGISTRY)}", file=sys.stderr)
        return 2
    overrides = cfgmod.parse_text(Path(args.config).read_text()) if args.config else {}
    overrides.update(cfgmod.parse_overrides(args.set))
    if args.seed is not None:
        overrides["seed"] = args.seed
    out = args.out or f"out/{name}"
    v = run_experiment(name, overrides, out)
    status = "PASS" if v.passed else "FAIL"
    print(f"{status} {name}: {v.metric} = {v.value:.6g} ({v.comparison} {v.threshold:g}) in {v.runtime_s:.1f}s")
    return 0 if v.passed else 1


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    t0 = time.perf_counter()
    try:
        if args.command == "experiment":
            return cmd_experiment(args.name, args)
        cfg = _load(args)
        rc = {"simulate": cmd_simulate, "pde": cmd_pde, "graphon": cmd_graphon}[args.command](cfg)
        print(f"{args.command}: wrote {cfg.out} in {time.perf_counter() - t0:.1f}s", file=sys.stderr)
        return rc
    except (ConfigurationError, ContractViolation, BudgetError, DegenerateKernelError, OSError) as exc:
        print(f"covoter: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
