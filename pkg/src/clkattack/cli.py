"""Command line: ``clkattack <command> ...``; see ``clkattack --help``."""

from __future__ import annotations

import argparse
import logging
import sys

from . import atoms as atm
from . import pipeline as pl
from . import popgen
from .report import write_report_bundle

log = logging.getLogger("clkattack")


def _weights(text):
    return None if text in (None, "auto") else pl.parse_weights(text)


def cmd_synth_lists(args):
    lists = popgen.synthetic_lists(args.forenames, args.surnames, args.locations, args.seed, args.zipf)
    popgen.write_lists(args.out, lists)


def cmd_generate(args):
    paths = pl.stage_generate(args.lists, args.size, args.seed, args.out, args.training_size)
    for role, path in paths.items():
        print(f"{role}: {path}")


def cmd_encode(args):
    keys = pl.load_keys(args.config)
    cfg = pl.load_config(_run_config_path(args.config), {"L": args.L, "k": args.k})
    pl.stage_encode(args.records, keys, cfg.L, cfg.k, args.out, args.truth)


def _run_config_path(path):
    if not path:
        return None
    cp = pl._read_ini(path)
    if not cp.has_section("run"):
        return None
    return path


def _attack_config(args) -> pl.RunConfig:
    if getattr(args, "config", None):
        pl.check_attack_input(args.config)
    return pl.load_config(getattr(args, "config", None), {
        "k": getattr(args, "k", None),
        "min_support": getattr(args, "min_support", None),
        "score_floor": getattr(args, "score_floor", None),
        "dim": getattr(args, "dim", None),
        "threads": getattr(args, "threads", None),
    })


def cmd_detect(args):
    cfg = _attack_config(args)
    weights = _weights(args.weights)
    if weights is None:
        # L comes from the filter file itself
        with open(args.filters, encoding="utf-8") as fh:
            length = len(fh.readline().strip().rpartition(",")[2])
        weights = atm.default_weights(length, cfg.k)
    found = pl.stage_detect(args.filters, cfg.k, weights, cfg.min_support, args.out, cfg.threads)
    print(f"{len(found)} atoms -> {args.out}")


def cmd_assign(args):
    cfg = _attack_config(args)

    def progress(i, value):
        if i % 100 == 0:
            log.info("update %d: objective %.4f", i, value)

    result = pl.stage_assign(args.atoms, args.filters, args.training, args.out, args.progress,
                             args.freq, cfg.dim, on_update=progress)
    print(f"{result.update_count} updates, objective {result.progress[0]:.4f} -> {result.objective_value:.4f}")


def cmd_reconstruct(args):
    cfg = _attack_config(args)
    out = pl.stage_reconstruct(args.sigma, args.atoms, args.filters, args.refs, args.out, cfg.score_floor)
    print(f"{len(out)} reconstructions -> {args.out}")


def cmd_evaluate(args):
    report = pl.stage_evaluate(args.recon, args.truth, args.report, args.details)
    for tag, acc in report.accuracy.items():
        print(f"{tag.name.lower():9s} {100 * acc:6.2f}%")
    print(f"{'full':9s} {100 * report.full_record_accuracy:6.2f}%")


def cmd_report(args):
    out = write_report_bundle(args.progress, args.freq, args.out, args.report, args.top, not args.no_figures)
    for name, path in out.items():
        print(f"{name}: {path}")


def cmd_run(args):
    overrides = {"L": args.L, "k": args.k, "min_support": args.min_support, "seed": args.seed,
                 "size": args.size, "training_size": args.training_size, "dim": args.dim,
                 "score_floor": args.score_floor, "threads": args.threads, "lists": args.lists,
                 "out": args.out, "allowed_weights": _weights(args.weights) and tuple(_weights(args.weights))}
    cfg = pl.load_config(_run_config_path(args.config), overrides)
    try:
        keys = pl.load_keys(args.config)
    except KeyError:
        log.warning("no keys in config or environment; using keys derived from the seed")
        keys = None
    result = pl.run_pipeline(cfg, keys)
    print(f"atoms detected: {result.n_atoms}")
    for tag, acc in result.report.accuracy.items():
        print(f"{tag.name.lower():9s} {100 * acc:6.2f}%")
    print(f"{'full':9s} {100 * result.report.full_record_accuracy:6.2f}%")
    for name, sec in result.timings.items():
        print(f"  {name:12s} {sec:8.2f}s")


STAGE_EXIT = {"lists": 2, "generate": 3, "encode": 4, "detect-atoms": 5, "assign": 6,
              "reconstruct": 7, "evaluate": 8, "report": 9}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="clkattack", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth-lists", help="write synthetic Zipf-weighted name lists")
    s.add_argument("--out", required=True)
    s.add_argument("--forenames", type=int, default=500)
    s.add_argument("--surnames", type=int, default=1000)
    s.add_argument("--locations", type=int, default=200)
    s.add_argument("--zipf", type=float, default=1.0)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_synth_lists)

    s = sub.add_parser("generate", help="sample target and training corpora from frequency lists")
    s.add_argument("--lists", required=True)
    s.add_argument("--size", type=int, required=True)
    s.add_argument("--training-size", type=int)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_generate)

    s = sub.add_parser("encode", help="encrypt a record corpus (needs keys)")
    s.add_argument("--records", required=True)
    s.add_argument("--config", help="config with an [encode] section holding key_f/key_g")
    s.add_argument("--L", type=int)
    s.add_argument("--k", type=int)
    s.add_argument("--out", required=True, help="filter file")
    s.add_argument("--truth", required=True, help="ground-truth sidecar")
    s.set_defaults(func=cmd_encode)

    attack = sub.add_parser("attack", help="attacker stages (no keys, no ground truth)")
    asub = attack.add_subparsers(dest="stage", required=True)

    s = asub.add_parser("detect-atoms")
    s.add_argument("--filters", required=True)
    s.add_argument("--min-support", type=int)
    s.add_argument("--weights", default="auto", help="comma list, or 'auto' (8,10,20 at L=1000,k=20)")
    s.add_argument("--k", type=int)
    s.add_argument("--threads", type=int)
    s.add_argument("--config")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_detect)

    s = asub.add_parser("assign")
    s.add_argument("--atoms", required=True)
    s.add_argument("--filters", required=True)
    s.add_argument("--training", required=True)
    s.add_argument("--out", required=True, help="sigma.csv")
    s.add_argument("--progress", required=True)
    s.add_argument("--freq", help="also write training bigram frequencies")
    s.add_argument("--dim", type=int, help="optimize over the top DIM bigrams/atoms only")
    s.add_argument("--config")
    s.set_defaults(func=cmd_assign)

    s = asub.add_parser("reconstruct")
    s.add_argument("--sigma", required=True)
    s.add_argument("--atoms", required=True)
    s.add_argument("--filters", required=True)
    s.add_argument("--refs", required=True, help="directory with forenames/surnames/locations.csv")
    s.add_argument("--score-floor", type=float)
    s.add_argument("--config")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_reconstruct)

    s = sub.add_parser("evaluate", help="score reconstructions against ground truth")
    s.add_argument("--recon", required=True)
    s.add_argument("--truth", required=True)
    s.add_argument("--report", required=True)
    s.add_argument("--details")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("report", help="plot-ready CSVs and figures")
    s.add_argument("--progress", required=True)
    s.add_argument("--freq", required=True)
    s.add_argument("--report")
    s.add_argument("--top", type=int, default=10)
    s.add_argument("--no-figures", action="store_true")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_report)

    s = sub.add_parser("run", help="whole pipeline from one config")
    s.add_argument("--config")
    s.add_argument("--lists")
    s.add_argument("--out", required=True)
    s.add_argument("--L", type=int)
    s.add_argument("--k", type=int)
    s.add_argument("--min-support", type=int)
    s.add_argument("--weights")
    s.add_argument("--seed", type=int)
    s.add_argument("--size", type=int)
    s.add_argument("--training-size", type=int)
    s.add_argument("--dim", type=int)
    s.add_argument("--score-floor", type=float)
    s.add_argument("--threads", type=int)
    s.set_defaults(func=cmd_run)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        args.func(args)
    except pl.StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return STAGE_EXIT.get(exc.stage, 1)
    except pl.AttackInputError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return 10
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
