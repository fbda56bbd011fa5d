"""Command-line entry point: ``twirlmem {ptm,twirl-gen,compile,run,bounds}``."""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .harness import (
    EXPERIMENTS,
    ConfigError,
    ExperimentConfig,
    aggregate,
    depth_report,
    preset,
    ptm_dump,
    records_to_csv,
    run_experiment,
    summary_to_csv,
)
from .mitigate import BoundInputs, bound_theorem1, bound_theorem3
from .mtcompile import MtPlan, compile_mt, default_targets
from .noise import lambda_to_ptm, load_noise_config, noise_from_config
from .pauli import ZMask
from .twirl import random_twirl_set, sbpt_set


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _noise_spec(args) -> dict:
    if args.config:
        return load_noise_config(args.config)
    return {"kind": "device"}


def _qubits(text: str | None) -> list[int]:
    return [int(q) for q in text.split(",") if q] if text else []


def cmd_ptm(args):
    text = ptm_dump(_noise_spec(args), n=args.n, seed=args.seed)
    _emit(text, args.out)


def cmd_twirl_gen(args):
    if args.support:
        s = sbpt_set(_qubits(args.support), args.n, args.size, args.seed)
    else:
        s = random_twirl_set(args.n, args.size, args.seed)
    _emit(s.to_text(), args.out)


def cmd_compile(args):
    src = ZMask.from_label(args.observable)
    if args.targets:
        plan = MtPlan(src, ZMask.from_support(_qubits(args.targets), src.n))
    else:
        plan = MtPlan(src, default_targets(src, args.weight))
    circuit, z_eff = compile_mt(plan)
    text = circuit.to_text(layered=args.layered)
    text = f"# effective {z_eff.label} depth {circuit.depth}\n" + text
    _emit(text, args.out)


def cmd_bounds(args):
    noise = noise_from_config(_noise_spec(args), seed=args.seed, n=args.n)
    r = ZMask.from_label(args.observable)
    b = BoundInputs(lambda_to_ptm(noise.lam), r, args.size, args.delta)
    text = "theorem1:\n" + _indent(bound_theorem1(b).to_text())
    text += "theorem3:\n" + _indent(bound_theorem3(b).to_text())
    _emit(text, args.out)


def _indent(text: str) -> str:
    return "".join("  " + line + "\n" for line in text.splitlines())


def cmd_run(args):
    if args.config:
        cfg = ExperimentConfig.load(args.config)
    elif args.experiment:
        cfg = preset(args.experiment)
    else:
        raise ConfigError("run needs --config or --experiment")
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.replicates is not None:
        updates["replicates"] = args.replicates
    if args.no_timing:
        updates["timing"] = False
    cfg = replace(cfg, **updates)
    if cfg.experiment == "ptm-dump":
        _emit(ptm_dump(cfg.noise, n=cfg.n, seed=cfg.seed), args.out)
        return
    records = run_experiment(cfg, threads=args.threads)
    _emit(records_to_csv(records), args.out)
    if args.summary:
        Path(args.summary).write_text(summary_to_csv(aggregate(records)))
    if cfg.experiment == "fig4":
        for obs, k, depth in depth_report(cfg.observables, cfg.mt_weights):
            print(f"{obs} weight {k} depth {depth}", file=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="twirlmem", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed_default=0):
        sp.add_argument("--config", help="YAML file")
        sp.add_argument("--seed", type=int, default=seed_default)
        sp.add_argument("--out", help="output file (default: stdout)")

    sp = sub.add_parser("ptm", help="dump |R_Z| of a noise model as CSV")
    common(sp)
    sp.add_argument("--n", type=int)
    sp.set_defaults(func=cmd_ptm)

    sp = sub.add_parser("twirl-gen", help="write a twirling set")
    common(sp)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--size", type=int, required=True)
    sp.add_argument("--support", help="comma-separated qubits for a balanced set")
    sp.set_defaults(func=cmd_twirl_gen)

    sp = sub.add_parser("compile", help="compile a Z observable into a CX circuit")
    common(sp)
    sp.add_argument("observable")
    sp.add_argument("--weight", type=int, default=1)
    sp.add_argument("--targets", help="comma-separated target qubits")
    sp.add_argument("--layered", action="store_true")
    sp.set_defaults(func=cmd_compile)

    sp = sub.add_parser("run", help="run an experiment and write records as CSV")
    common(sp, seed_default=None)
    sp.add_argument("--experiment", choices=EXPERIMENTS)
    sp.add_argument("--threads", type=int)
    sp.add_argument("--replicates", type=int)
    sp.add_argument("--summary", help="also write mean/SEM per point to this file")
    sp.add_argument("--no-timing", action="store_true", help="write wall_ms as 0 for byte-stable output")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("bounds", help="finite-set error bounds for one observable")
    common(sp)
    sp.add_argument("observable")
    sp.add_argument("--n", type=int)
    sp.add_argument("--size", type=int, default=64)
    sp.add_argument("--delta", type=float, default=0.05)
    sp.set_defaults(func=cmd_bounds)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
