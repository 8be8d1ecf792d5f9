"""Command line entry point.

    bla run --config grid.cfg --seeds 0-4 --out results
    bla plot-data results/history/*.csv -o plot.csv
    bla bayes bernoulli_cosine --trials 1000000

``run`` exits 0 when every (optimizer, seed) run succeeded, 1 when some
failed and 2 on a bad config.
"""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import __version__
from .metrics import bayes_accuracy_estimate, bayes_accuracy_exact
from .runner import ConfigError, ExperimentConfig, emit_plot_data, load_config, run_experiment, with_overrides

# flag -> config key; values go through the config-file parser
OVERRIDES = {
    "generator": "generator",
    "optimizer": "optimizers",
    "epochs": "epochs",
    "seeds": "seeds",
    "out": "out",
    "report_epochs": "report_epochs",
    "r_policy": "r_policy",
    "step_factor": "step_factor",
    "delta_start": "delta_start",
    "delta_floor": "delta_floor",
    "jobs": "jobs",
}


def build_parser():
    p = argparse.ArgumentParser(prog="bla", description="Bootstrap learning experiments.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a (generator x optimizer x seed) grid")
    r.add_argument("--config", help="key = value config file")
    r.add_argument("--generator")
    r.add_argument("--optimizer", help="comma list of BLA, BLA2, GD, ADAM")
    r.add_argument("--epochs")
    r.add_argument("--seeds", help='e.g. "0-9" or "0,3,7"')
    r.add_argument("--out")
    r.add_argument("--report-epochs")
    r.add_argument("--r-policy", choices=["first_batch_zero", "first_epoch_zero"])
    r.add_argument("--step-factor")
    r.add_argument("--delta-start")
    r.add_argument("--delta-floor")
    r.add_argument("--jobs")
    r.add_argument("--timing", action="store_true", default=None,
                   help="record wall-clock ms (histories are then not reproducible)")

    pd = sub.add_parser("plot-data", help="merge history CSVs into long format")
    pd.add_argument("histories", nargs="+")
    pd.add_argument("-o", "--output", required=True)
    pd.add_argument("--report-epochs", help="keep only these epochs")

    b = sub.add_parser("bayes", help="Bayes accuracy of a classification generator")
    b.add_argument("generator", choices=["bernoulli_step", "bernoulli_cosine"])
    b.add_argument("--trials", type=int, default=1_000_000)
    b.add_argument("--seed", type=int, default=0)
    return p


def _config(args):
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    overrides = {key: getattr(args, flag) for flag, key in OVERRIDES.items()}
    overrides["timing"] = args.timing
    return with_overrides(cfg, **overrides)


def cmd_run(args):
    try:
        cfg = _config(args)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    result = run_experiment(cfg)
    print(f"wrote {result.table_path} and {result.plot_path}")
    for (opt, seed), err in result.failures.items():
        print(f"run {opt} seed {seed} failed: {err.strip().splitlines()[-1]}", file=sys.stderr)
    return 0 if result.ok else 1


def cmd_plot_data(args):
    epochs = None
    if args.report_epochs:
        epochs = [int(e) for e in args.report_epochs.split(",")]
    try:
        n = emit_plot_data(args.histories, args.output, epochs)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {n} rows to {args.output}")
    return 0


def cmd_bayes(args):
    exact = bayes_accuracy_exact(args.generator)
    est = bayes_accuracy_estimate(args.generator, args.trials, np.random.default_rng(args.seed))
    print(f"exact {exact:.6f}  monte_carlo {est:.6f}  ({args.trials} trials)")
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = [logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    return {"run": cmd_run, "plot-data": cmd_plot_data, "bayes": cmd_bayes}[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
