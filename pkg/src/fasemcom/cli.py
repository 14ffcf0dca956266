"""Command-line entry point: ``fasemcom run|sweep|inspect-plan|selftest``."""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

import numpy as np

from . import powalloc
from .errors import ConfigError, InputError, SimulationError, StageError
from .runner import MODES, load_config, plans_for, prepare, run_pipeline

EXIT_OK, EXIT_CONFIG, EXIT_INPUT, EXIT_SIM = 0, 2, 3, 4


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, StageError):
        exc = exc.cause
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, InputError):
        return EXIT_INPUT
    return EXIT_SIM


def _summary(records, out):
    print(f"{len(records)} cells -> {out}/runs.csv")
    for r in records:
        print(f"  {r.mode:8s} beta={r.beta:<5g} snr={r.snr_db:<5g} ber={r.overall_ber:.3e} "
              f"important_ber={r.important_patch_ber:.3e} weighted_mse={r.weighted_mse:.4g}")


def cmd_run(args):
    cfg = load_config(args.config)
    if args.output_dir:
        cfg = replace(cfg, output_dir=args.output_dir)
    records, _ = run_pipeline(cfg)
    _summary(records, cfg.output_dir)


def cmd_sweep(args):
    cfg = load_config(args.config)
    changes = {}
    if args.beta:
        changes["beta_list"] = tuple(args.beta)
    if args.snr:
        changes["snr_db_list"] = tuple(args.snr)
    if args.mode:
        changes["modes"] = tuple(args.mode)
    if args.trials:
        changes["trials"] = args.trials
    if args.output_dir:
        changes["output_dir"] = args.output_dir
    try:
        cfg = replace(cfg, **changes)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    records, _ = run_pipeline(cfg)
    _summary(records, cfg.output_dir)


def cmd_inspect_plan(args):
    cfg = load_config(args.config)
    prep = prepare(cfg)
    betas = args.beta or list(cfg.beta_list)
    mode = args.mode or cfg.modes[0]
    side = cfg.grid.patches_per_side
    m = prep.match
    print(f"question: {cfg.question}")
    print(f"match: {m.matched_label!r} via {m.keyword!r} (sim {m.similarity:.4f})" if m else "match: none")
    print(f"tiles: {', '.join(t.name for t in prep.tiles)}; visual tokens: {prep.token_count}")
    for beta in betas:
        weights, plans = plans_for(prep, mode, beta)
        for tile, plan in zip(prep.tiles, plans):
            counts = np.bincount(plan.levels, minlength=cfg.L + 1)[1:]
            print(f"\n[{mode} beta={beta:g} tile={tile.name}] sum={plan.powers.sum():.6g} W "
                  f"boost={powalloc.boost_ratio(plan):.6g} levels(1..{cfg.L})={counts.tolist()}")
            if args.full:
                print("patch,row,col,level,power")
                for i, (lv, p) in enumerate(zip(plan.levels, plan.powers)):
                    print(f"{i},{i // side},{i % side},{int(lv)},{float(p)!r}")
            else:
                grid = plan.levels.reshape(side, side)
                for row in grid:
                    print("".join(str(v) for v in row))


def cmd_selftest(args):
    from .selftest import run_selftest

    ok = run_selftest(verbose=True)
    if not ok:
        raise SimulationError("selftest failed")


def build_parser():
    p = argparse.ArgumentParser(prog="fasemcom", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the pipeline for the config's grid")
    run.add_argument("--config", required=True, help="JSON config path, or @fixture")
    run.add_argument("--output-dir")
    run.set_defaults(func=cmd_run)

    sw = sub.add_parser("sweep", help="run with beta/SNR/mode axes overridden")
    sw.add_argument("--config", required=True)
    sw.add_argument("--beta", type=float, nargs="+")
    sw.add_argument("--snr", type=float, nargs="+")
    sw.add_argument("--mode", choices=MODES, nargs="+")
    sw.add_argument("--trials", type=int)
    sw.add_argument("--output-dir")
    sw.set_defaults(func=cmd_sweep)

    ip = sub.add_parser("inspect-plan", help="print the per-tile power plan")
    ip.add_argument("--config", required=True)
    ip.add_argument("--beta", type=float, nargs="+")
    ip.add_argument("--mode", choices=MODES)
    ip.add_argument("--full", action="store_true", help="list every patch instead of the level grid")
    ip.set_defaults(func=cmd_inspect_plan)

    st = sub.add_parser("selftest", help="run the built-in oracle checks")
    st.set_defaults(func=cmd_selftest)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (ConfigError, InputError, SimulationError, StageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exit_code(exc)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SIM
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
