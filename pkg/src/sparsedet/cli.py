"""Command-line entry point.

Subcommands: roc, minfrac, p1p2, known-vs-somp, validate. Each experiment
subcommand reads a JSON config mirroring ExperimentConfig and writes CSV
tables to the output directory. Exit codes: 0 success, 2 config error,
3 invariant-suite failure.
"""

import argparse
import json
import sys

import numpy as np

from . import harness, validate as validate_mod

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VALIDATE = 3


def _load_config(args):
    data = {}
    if args.config:
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise harness.ConfigError(f"config: {e}")
    if args.seed is not None:
        data["seed"] = args.seed
    if args.trials is not None:
        data["trials"] = args.trials
    return harness.ExperimentConfig.from_dict(data)


def _add_common(p):
    p.add_argument("--config", help="JSON config file mirroring ExperimentConfig")
    p.add_argument("--seed", type=int, default=None, help="master seed override")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--trials", type=int, default=None, help="trial count override")


def build_parser():
    ap = argparse.ArgumentParser(prog="sparsedet",
                                 description="Sparse signal detection simulator")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, hlp in [("roc", "Monte Carlo ROC curves per algorithm"),
                      ("minfrac", "minimum support fraction planner maps"),
                      ("p1p2", "first-iteration success probability sweep"),
                      ("known-vs-somp", "known vs estimated partial support ROC"),
                      ("validate", "run the invariant suite")]:
        p = sub.add_parser(name, help=hlp)
        if name != "validate":
            _add_common(p)
        if name == "minfrac":
            p.add_argument("--tau-d", type=float, nargs="+",
                           default=list(np.round(np.linspace(0.5, 0.99, 8), 4)))
            p.add_argument("--alpha", type=float, nargs="+", default=[0.05, 0.1])
            p.add_argument("--empirical-trials", type=int, default=0)
        if name == "p1p2":
            p.add_argument("--c-r", type=float, nargs="+",
                           default=[0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5])
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "validate":
        return EXIT_OK if validate_mod.run_validation() else EXIT_VALIDATE

    try:
        cfg = _load_config(args)
    except harness.ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    out = args.out.rstrip("/")
    if args.command == "roc":
        curves = harness.run_roc(cfg)
        harness.write_roc_csv(f"{out}/roc.csv", curves, cfg)
        print(f"wrote {out}/roc.csv")
    elif args.command == "minfrac":
        rows = harness.run_min_fraction_experiments(
            cfg, args.tau_d, args.alpha, empirical_trials=args.empirical_trials)
        harness.write_minfrac_csv(f"{out}/minfrac.csv", rows, cfg)
        print(f"wrote {out}/minfrac.csv")
    elif args.command == "p1p2":
        rows = harness.run_p1_p2(cfg, args.c_r)
        harness.write_p1p2_csv(f"{out}/p1p2.csv", rows, cfg)
        print(f"wrote {out}/p1p2.csv")
    elif args.command == "known-vs-somp":
        curves = harness.run_known_support_comparison(cfg)
        harness.write_roc_csv(f"{out}/roc.csv", curves, cfg)
        print(f"wrote {out}/roc.csv")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
