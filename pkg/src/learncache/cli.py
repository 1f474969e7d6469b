"""``learncache`` command line: generate, simulate, sweep, lowerbound, verify."""

from __future__ import annotations

import argparse
import logging
import statistics
import sys
from pathlib import Path

from .adversary import sample_omega, write_instance
from .errors import ConfigError
from .experiment import (load_config, lower_bound_experiment, run_experiment, sweep_eta,
                         verify_suite, write_csv, write_plot_data)
from .trace import Trace, write_trace

log = logging.getLogger("learncache")


def _output(args, config) -> str | None:
    return args.out or (config.output_path if config is not None else None)


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        log.info("wrote %s", out)


def cmd_generate(args) -> int:
    config = load_config(args.config, args.seed_base)
    out_dir = Path(args.out or config.output_path or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    wl = config.workload
    for seed in config.seeds:
        if wl.kind == "omega":
            for t in config.t_list:
                inst = sample_omega(config.k, t, wl.n, seed, wl.random_part_len)
                path = out_dir / f"omega_k{config.k}_t{t}_n{wl.n}_s{seed}.trace"
                write_instance(inst, path)
                print(path)
            continue
        name = wl.workload_id(seed)
        path = out_dir / f"{name}.trace"
        trace = wl.build(config.k, seed)
        if trace.predictions is None:
            trace = Trace.perfect(trace.requests)
        write_trace(trace, path, header=f"workload={name}")
        print(path)
    return 0


def cmd_simulate(args) -> int:
    config = load_config(args.config, args.seed_base)
    if len(config.noise_grid) > 1:
        raise ConfigError("simulate takes at most one noise entry; use sweep for a grid")
    rows = run_experiment(config, jobs=args.jobs)
    out = _output(args, config)
    _emit(write_csv(rows, out, timing=args.timing), out)
    return 0


def cmd_sweep(args) -> int:
    config = load_config(args.config, args.seed_base)
    rows = sweep_eta(config, jobs=args.jobs)
    out = _output(args, config)
    _emit(write_csv(rows, out, timing=args.timing), out)
    if args.plot_data:
        series = {}
        for spec in config.policies:
            points = []
            for noise in config.noise_grid:
                mine = [r for r in rows if r["policy"] == spec.label and r["noise"] == str(noise)]
                points.append((statistics.fmean(r["eta_over_opt"] for r in mine),
                               statistics.fmean(r["ratio"] for r in mine)))
            series[spec.label] = points
        write_plot_data(args.plot_data, series)
    return 0


def cmd_lowerbound(args) -> int:
    config = load_config(args.config, args.seed_base)
    if config.workload.kind != "omega":
        raise ConfigError("lowerbound needs workload = omega")
    rows = lower_bound_experiment(config.k, config.t_list, config.workload.n, config.policies,
                                  config.seeds, config.workload.random_part_len, jobs=args.jobs)
    out = _output(args, config)
    _emit(write_csv(rows, out), out)
    if args.plot_data:
        series = {spec.label: [(r["t"], r["mean_misses"]) for r in rows
                               if r["policy"] == spec.label] for spec in config.policies}
        series["floor"] = sorted({(r["t"], r["floor"]) for r in rows})
        write_plot_data(args.plot_data, series)
    return 0 if all(r["passed"] for r in rows) else 1


def cmd_verify(args) -> int:
    rows = verify_suite(seed=args.seed_base, scale=args.scale)
    _emit(write_csv(rows, args.out), args.out)
    failed = [r for r in rows if not r["passed"]]
    for r in failed:
        log.error("failed: %s %s observed=%s", r["check"], r["params"], r["observed"])
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="learncache",
        description="Caching with next-arrival predictions: simulations and checks.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="key=value config file")
        p.add_argument("--out", help="output path (CSV, or directory for generate)")
        p.add_argument("--seed-base", type=int, default=0, help="offset added to every seed")
        p.add_argument("--jobs", type=int, default=1, help="worker processes")
        return p

    common(sub.add_parser("generate", help="write workload trace files")).set_defaults(
        func=cmd_generate)
    p = common(sub.add_parser("simulate", help="run policies on one workload"))
    p.add_argument("--timing", action="store_true", help="include runtime_ms column")
    p.set_defaults(func=cmd_simulate)
    p = common(sub.add_parser("sweep", help="run policies across a noise grid"))
    p.add_argument("--timing", action="store_true", help="include runtime_ms column")
    p.add_argument("--plot-data", help="write mean (eta/opt, ratio) points per policy")
    p.set_defaults(func=cmd_sweep)
    p = common(sub.add_parser("lowerbound", help="mean misses on sampled adversarial inputs"))
    p.add_argument("--plot-data", help="write mean misses against t per policy")
    p.set_defaults(func=cmd_lowerbound)
    p = common(sub.add_parser("verify", help="run the lemma check suite"), config_required=False)
    p.add_argument("--scale", type=float, default=1.0, help="multiplier on instance counts")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, OSError, ValueError) as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
