"""Command line entry point: ``mwh train|eval|sweep|plot``.

Exit codes: 0 success, 1 configuration error, 2 runtime or numeric failure.
"""
import argparse
import json
import logging
import sys
from dataclasses import replace

from .exceptions import ConfigError, DataError, NumericError
from .harness import evaluate_saved, load_config, plot_metrics, run_training, sweep

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def _split_list(raw):
    return [v for v in raw.replace(",", " ").split() if v]


def build_parser():
    ap = argparse.ArgumentParser(prog="mwh", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    tr = sub.add_parser("train", help="train one run from a config file")
    tr.add_argument("--config", required=True)
    tr.add_argument("--seed", type=int)
    tr.add_argument("--out")

    ev = sub.add_parser("eval", help="score a saved model on a data file")
    ev.add_argument("--model", required=True)
    ev.add_argument("--data", required=True)
    ev.add_argument("--label-column")

    sw = sub.add_parser("sweep", help="one run per value along an axis")
    sw.add_argument("--config", required=True)
    sw.add_argument("--axis", required=True, choices=["alpha", "p", "q", "strategy"])
    sw.add_argument("--values", required=True, help="comma or space separated")
    sw.add_argument("--seeds", help="comma separated; defaults to the config seed")
    sw.add_argument("--out")

    pl = sub.add_parser("plot", help="loss/accuracy curves from metrics CSVs")
    pl.add_argument("--in", dest="inputs", nargs="+", required=True)
    pl.add_argument("--out", required=True)
    pl.add_argument("--labels", nargs="+")
    return ap


def _run(args):
    if args.command == "train":
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        res = run_training(cfg, out_dir=args.out)
        print(json.dumps({
            "out": str(res.out_dir),
            "epoch": res.final.epoch,
            "test_accuracy": res.final.test_accuracy,
            "test_loss": res.final.test_loss,
        }))
    elif args.command == "eval":
        print(json.dumps(evaluate_saved(args.model, args.data, args.label_column)))
    elif args.command == "sweep":
        cfg = load_config(args.config)
        seeds = _split_list(args.seeds) if args.seeds else None
        rows = sweep(cfg, args.axis, _split_list(args.values), seeds=seeds, out_dir=args.out)
        for row in rows:
            print(f"{row['axis']}={row['value']} seed={row['seed']} {row['status']} "
                  f"acc={row['final_test_accuracy']:.4f}")
        if any(r["status"] != "ok" for r in rows):
            return EXIT_RUNTIME
    elif args.command == "plot":
        print(plot_metrics(args.inputs, args.out, labels=args.labels))
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _run(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericError, DataError, ValueError, OSError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
