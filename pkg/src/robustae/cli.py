"""Command line entry point: ``robustae <subcommand> ...``.

Experiment subcommands take ``--config FILE`` plus any config key as a
``--key value`` override, e.g.::

    robustae detect --config usps.cfg --lambda 0.1 --seeds 0,1,2,3,4

Exit codes: 0 success, 1 unexpected failure, 2 bad configuration,
3 bad data, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from .data import write_dataset
from .errors import ConfigError, DataError, NumericError
from .experiment import CONFIG_KEYS, SWEEP_PARAMS, evaluate_score_files, load_config, run_experiment, run_sweep
from .synthetic import make_digit_pair, make_planted_line, make_synthetic_manifold

EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 2, 3, 4

log = logging.getLogger("robustae")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _overrides(tokens) -> dict:
    out = {}
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if not tok.startswith("--") or tok == "--":
            raise ConfigError(f"unexpected argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, value = key.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(tokens):
                raise ConfigError(f"override {tok} needs a value")
            value = tokens[i + 1]
            i += 2
        if key.replace("-", "_") not in CONFIG_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        out[key] = value
    return out


def build_parser() -> argparse.ArgumentParser:
    keys = ", ".join(CONFIG_KEYS)
    p = _Parser(prog="robustae", description="Robust autoencoders and baselines for anomaly detection.")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", help="write a seeded synthetic dataset and manifest")
    s.add_argument("kind", choices=("manifold", "digits", "line"))
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--name", help="file stem (default: the kind)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--n-normal", type=int, help="normal rows (manifold 50, digits 220, line 20)")
    s.add_argument("--n-anomaly", type=int, help="anomalous rows (manifold 5, digits 11, line 1)")
    s.add_argument("--dims", type=int, default=20, help="manifold ambient dimension")
    s.add_argument("--format", choices=("csv", "bin"), default="csv")

    epilog = f"Any config key may be overridden as --key value. Keys: {keys}."
    for mode in ("detect", "inductive", "denoise"):
        e = sub.add_parser(mode, help=f"run a {mode} experiment over seeds", epilog=epilog)
        e.add_argument("--config", help="key=value config file")

    w = sub.add_parser("sweep", help="grid search one hyperparameter", epilog=epilog)
    w.add_argument("--config", help="key=value config file")
    w.add_argument("--param", required=True, choices=SWEEP_PARAMS)
    w.add_argument("--grid", required=True, help="comma-separated values, e.g. 0.1,1,10,100")

    v = sub.add_parser("eval", help="metrics from existing per-seed score CSVs")
    v.add_argument("files", nargs="+", help="seed<S>_scores.csv files")
    v.add_argument("--out", help="directory for metrics.csv and summary.csv")
    return p


_SYNTH_DEFAULTS = {"manifold": (50, 5), "digits": (220, 11), "line": (20, 1)}


def _cmd_synth(args):
    n_norm, n_anom = _SYNTH_DEFAULTS[args.kind]
    n_norm = n_norm if args.n_normal is None else args.n_normal
    n_anom = n_anom if args.n_anomaly is None else args.n_anomaly
    if n_norm < 1 or n_anom < 0:
        raise ConfigError("need n_normal >= 1 and n_anomaly >= 0")
    rng = np.random.default_rng(args.seed)
    if args.kind == "manifold":
        ds = make_synthetic_manifold(n_norm, n_anom, args.dims, rng)
    elif args.kind == "digits":
        ds = make_digit_pair(n_norm, n_anom, rng)
    else:
        ds = make_planted_line(n_norm, rng, n_anom)
    path = write_dataset(ds, args.out, args.name or args.kind, args.format)
    print(path)


def _cmd_experiment(args, extra):
    overrides = _overrides(extra)
    if args.command != "sweep":
        overrides["mode"] = args.command
    cfg = load_config(args.config, overrides)
    if args.command == "sweep":
        rows, _ = run_sweep(cfg, args.param, [v for v in args.grid.split(",") if v.strip()])
        for r in rows:
            print(f"{args.param}={r['value']}: auroc={r['auroc_mean']} auprc={r['auprc_mean']} nnz={r['nnz_mean']}")
        return
    bundle = run_experiment(cfg)
    print(bundle.format_summary())
    for row in bundle.failures:
        print(f"  seed {row['seed']}: {row['status']}", file=sys.stderr)


def _cmd_eval(args):
    rows, summary = evaluate_score_files(args.files, args.out)
    for r in rows:
        print(f"{r['file']}: auprc={r['auprc']:.4f} auroc={r['auroc']:.4f} p@10={r['p_at_10']:.4f}")
    for key, (mean, se, runs) in summary.items():
        print(f"{key}: {mean:.4f} +- {se:.4f} (runs={runs})")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args, extra = parser.parse_known_args(argv)
        logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                            format="%(levelname)s %(name)s: %(message)s")
        if args.command in ("detect", "inductive", "denoise", "sweep"):
            _cmd_experiment(args, extra)
        else:
            if extra:
                raise ConfigError(f"unexpected arguments: {' '.join(extra)}")
            _cmd_synth(args) if args.command == "synth" else _cmd_eval(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return 0


if __name__ == "__main__":
    sys.exit(main())
