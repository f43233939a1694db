"""Command-line entry point wiring the pipeline stages together.

Subcommands: ``simulate`` (synthetic design -> design file), ``sample``
(design file -> trace file), ``find`` (trace file -> report and optional
SVG), ``summarize`` (trace file -> first-order summaries), and ``oracle``
(brute-force validation utilities on fixture files).

Exit status 0 on success, 2 on usage errors (bad flags, bad values, missing
files), 1 on any other failure, always with a diagnostic on stderr.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .datagen import gen_block_ar, gen_george_mcculloch
from .io_report import (
    RunConfig,
    analyze_trace,
    read_design,
    read_distribution,
    read_report,
    read_trace,
    render_svg,
    report_credible_set,
    write_design,
    write_distribution,
    write_report,
    write_trace,
)
from .sampler import LEARN, LinearBvsConfig, run_chains
from .summaries import summarize

__all__ = ["main"]


def _level(text: str) -> float:
    value = float(text)
    if not 0 < value <= 1:
        raise argparse.ArgumentTypeError(
            f"credibility level must be in (0, 1], got {text}"
        )
    return value


def _screen_tau(text: str) -> float:
    value = float(text)
    if not 0 <= value < 1:
        raise argparse.ArgumentTypeError(
            f"screen threshold must be in [0, 1), got {text}"
        )
    return value


def _positive(text: str) -> float:
    value = float(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return value


def _learn_or_positive(text: str) -> float | str:
    if text == LEARN:
        return LEARN
    return _positive(text)


def _learn_or_prob(text: str) -> float | str:
    if text == LEARN:
        return LEARN
    value = float(text)
    if not 0 <= value <= 1:
        raise argparse.ArgumentTypeError(
            f"inclusion probability must be in [0, 1] or 'learn', got {text}"
        )
    return value


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ccs",
        description="Cartesian credible sets for Bayesian variable selection",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate a synthetic design file")
    sim_sub = sim.add_subparsers(dest="design", required=True)
    gm = sim_sub.add_parser("gm", help="multicollinear 15-variable benchmark")
    gm.add_argument("--n", type=int, required=True)
    gm.add_argument("--sigma", type=float, required=True)
    gm.add_argument("--seed", type=int, default=0)
    gm.add_argument("--out", required=True)
    ar = sim_sub.add_parser("block-ar", help="five 3-variable AR-correlated blocks")
    ar.add_argument("--n", type=int, required=True)
    ar.add_argument("--rho", type=float, required=True)
    ar.add_argument("--sigma", type=float, required=True)
    ar.add_argument("--seed", type=int, default=0)
    ar.add_argument("--out", required=True)

    smp = sub.add_parser("sample", help="run the spike-and-slab sampler")
    smp.add_argument("--design", required=True)
    smp.add_argument("--p0", type=_positive, required=True,
                     help="prior mean model size (required, no default)")
    smp.add_argument("--iterations", type=int, required=True,
                     help="number of kept draws")
    smp.add_argument("--burn-in", type=int, default=0)
    smp.add_argument("--thin", type=int, default=1)
    smp.add_argument("--g", type=_learn_or_positive, default=LEARN,
                     help="slab variance, or 'learn'")
    smp.add_argument("--pi", type=_learn_or_prob, default=LEARN,
                     help="inclusion probability, or 'learn'")
    smp.add_argument("--seed", type=int, default=0)
    smp.add_argument("--chains", type=int, default=1)
    smp.add_argument("--format", choices=("text", "binary"), default="text")
    smp.add_argument("--out", required=True)

    fnd = sub.add_parser("find", help="build the Cartesian credible set report")
    fnd.add_argument("--trace", required=True)
    fnd.add_argument("--lambda", dest="level", type=_level, default=0.5)
    fnd.add_argument("--M", dest="penalty_scale", type=_positive, default=2.0)
    fnd.add_argument("--screen", dest="screen_tau", type=_screen_tau, default=0.04)
    fnd.add_argument("--sign-mode", choices=("penalty-added", "paper-literal"),
                     default="penalty-added")
    fnd.add_argument("--seed", type=int, default=None,
                     help="echoed into the report for provenance")
    fnd.add_argument("--out", default=None, help="report path (JSON)")
    fnd.add_argument("--svg", default=None, help="also render the set as SVG")

    smz = sub.add_parser("summarize", help="PIPs, median/MAP models, correlation")
    smz.add_argument("--trace", required=True)
    smz.add_argument("--json", dest="json_out", default=None)

    orc = sub.add_parser("oracle", help="brute-force validation utilities")
    orc_sub = orc.add_subparsers(dest="oracle_command", required=True)
    om = orc_sub.add_parser("set-mass",
                            help="exhaustive mass of a report's credible set")
    om.add_argument("--dist", required=True)
    om.add_argument("--report", required=True)
    ov = orc_sub.add_parser("validate", help="check a report's credible set")
    ov.add_argument("--report", required=True)
    src = ov.add_mutually_exclusive_group(required=True)
    src.add_argument("--dist")
    src.add_argument("--trace")
    ov.add_argument("--lambda", dest="level", type=_level, default=None,
                    help="defaults to the report's level")
    oe = orc_sub.add_parser("enumerate",
                            help="exact posterior over all models (fixed g, pi)")
    oe.add_argument("--design", required=True)
    oe.add_argument("--g", type=_positive, required=True)
    oe.add_argument("--pi", type=float, required=True)
    oe.add_argument("--out", required=True)
    osc = orc_sub.add_parser("partition-scan",
                             help="KL-best partition per block count")
    osc.add_argument("--trace", required=True)
    return parser


def _cmd_simulate(args) -> int:
    if args.design == "gm":
        data = gen_george_mcculloch(args.n, args.sigma, args.seed)
        comments = [f"design=gm n={args.n} sigma={args.sigma} seed={args.seed}"]
    else:
        data = gen_block_ar(args.n, args.rho, args.sigma, args.seed)
        comments = [
            f"design=block-ar n={args.n} rho={args.rho} "
            f"sigma={args.sigma} seed={args.seed}"
        ]
    comments.append("beta_true=" + ",".join(repr(float(b)) for b in data.beta_true))
    write_design(data.y, data.X, data.labels, args.out, comments=comments)
    print(f"wrote design ({args.n} x {data.X.shape[1]}) to {args.out}")
    return 0


def _cmd_sample(args) -> int:
    y, X, labels = read_design(args.design)
    config = LinearBvsConfig(
        prior_mean_size=args.p0,
        iterations=args.iterations,
        burn_in=args.burn_in,
        thin=args.thin,
        slab_variance=args.g,
        inclusion_prob=args.pi,
        seed=args.seed,
    )
    trace = run_chains(y, X, config, args.chains, labels)
    write_trace(trace, args.out, fmt=args.format)
    print(f"wrote trace ({trace.n_samples} x {trace.n_variables}) to {args.out}")
    return 0


def _cmd_find(args) -> int:
    trace = read_trace(args.trace)
    config = RunConfig(
        level=args.level,
        penalty_scale=args.penalty_scale,
        screen_tau=args.screen_tau,
        sign_mode=args.sign_mode,
        seed=args.seed,
    )
    report = analyze_trace(trace, config)
    if args.out:
        write_report(report, args.out)
    if args.svg:
        render_svg(report, args.svg)
    if report.status != "ok":
        print(f"error: {report.status}", file=sys.stderr)
        return 1
    cs = report.credible_set
    print(
        f"{100 * config.level:g}% Cartesian credible set: "
        f"{len(cs.blocks)} blocks, mass {cs.mass[0]}/{cs.mass[1]}"
    )
    for block in cs.blocks:
        subs = " | ".join(s.bits for s in block.submodels)
        print(f"  block {','.join(block.labels)}: {subs}")
    return 0


def _cmd_summarize(args) -> int:
    trace = read_trace(args.trace)
    bundle = summarize(trace)
    if args.json_out:
        payload = {
            "labels": list(trace.labels),
            "pips": [float(v) for v in bundle.pips],
            "median_model": str(bundle.median_model),
            "map_model_estimate": str(bundle.map_model_estimate),
            "inclusion_correlation": [
                [float(v) for v in row] for row in bundle.inclusion_correlation
            ],
        }
        with open(args.json_out, "w") as handle:
            json.dump(payload, handle, indent=2)
            handle.write("\n")
    median = bundle.median_model.to_array()
    print("variable  pip     median")
    for i, label in enumerate(trace.labels):
        mark = "*" if median[i] else ""
        print(f"{label:<9} {bundle.pips[i]:<7.4f} {mark}")
    print(f"median model: {bundle.median_model}")
    print(f"MAP estimate: {bundle.map_model_estimate}")
    return 0


def _cmd_oracle(args) -> int:
    from .oracle import (
        exact_posterior_enumeration,
        exhaustive_partition_scan,
        exhaustive_set_mass,
        validate_credible_set,
    )

    if args.oracle_command == "set-mass":
        dist = read_distribution(args.dist)
        cset = report_credible_set(read_report(args.report))
        mass = exhaustive_set_mass(dist, cset)
        print(f"exhaustive set mass: {mass} ({float(mass)})")
        return 0
    if args.oracle_command == "validate":
        report = read_report(args.report)
        cset = report_credible_set(report)
        level = args.level if args.level is not None else report.config.level
        source = (
            read_distribution(args.dist) if args.dist else read_trace(args.trace)
        )
        outcome = validate_credible_set(source, cset, level)
        if outcome.passed:
            print(f"PASS (mass {outcome.mass:.6f} >= {level})")
            return 0
        for failure in outcome.failures:
            print(f"FAIL: {failure}", file=sys.stderr)
        return 1
    if args.oracle_command == "enumerate":
        y, X, labels = read_design(args.design)
        dist = exact_posterior_enumeration(y, X, args.g, args.pi)
        write_distribution(dist, args.out)
        print(f"wrote {len(dist.atoms)} atoms to {args.out}")
        return 0
    trace = read_trace(args.trace)
    best = exhaustive_partition_scan(trace)
    for n_blocks in sorted(best, reverse=True):
        partition, score = best[n_blocks]
        desc = " ".join("{" + ",".join(map(str, b)) + "}" for b in partition.blocks)
        print(f"{n_blocks} blocks: score {score:.6f}  {desc}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "sample":
            return _cmd_sample(args)
        if args.command == "find":
            return _cmd_find(args)
        if args.command == "summarize":
            return _cmd_summarize(args)
        return _cmd_oracle(args)
    except FileNotFoundError as exc:
        print(f"error: no such file: {exc.filename}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
