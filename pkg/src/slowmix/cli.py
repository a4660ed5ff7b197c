"""Command line entry point.

    slowmix <experiment> --kappa 0.0625 0.03125 --amplitude 50 --grid 256 --seeds 0 1 --out r.csv
    slowmix sweep --config sweep.json
    slowmix summary --in r.csv
    slowmix plotdata --in r.csv --kind tdis-scaling

Exit status: 0 on success, 2 on an invalid configuration or plot kind, 3 when
any result row records a numerical failure.
"""
from __future__ import annotations

import argparse
import json
import sys

from . import lab
from .errors import ConfigInvalid, SlowmixError, UnknownKind

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _override(text):
    key, sep, val = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    try:
        return key, json.loads(val)
    except json.JSONDecodeError:
        return key, val


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="slowmix", description="Mixing and dissipation experiments for random shear flows")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in lab.EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--kappa", type=float, nargs="+", default=[1 / 16])
        p.add_argument("--amplitude", type=float, default=50.0)
        p.add_argument("--profile", default="cosine_bump")
        p.add_argument("--grid", type=int, default=256)
        p.add_argument("--seeds", type=int, nargs="+", default=[0])
        p.add_argument("--substeps", type=int, default=64)
        p.add_argument("--master-seed", type=int, default=0)
        p.add_argument("--set", dest="overrides", type=_override, action="append", default=[],
                       metavar="KEY=VALUE", help="experiment-specific option (JSON value)")
        p.add_argument("--out", default="results.csv")
    p = sub.add_parser("sweep", help="run a configuration file")
    p.add_argument("--config", required=True)
    p = sub.add_parser("summary", help="summarize a results file")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", default=None)
    p = sub.add_parser("plotdata", help="emit plot series")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--kind", required=True)
    p.add_argument("--out-dir", default=None)
    return ap


def _finish(path):
    rows = lab.read_results(path)
    failed = sum(r["status"] != "ok" for r in rows)
    print(f"{path}: {len(rows)} rows, {failed} failed")
    return EXIT_NUMERIC if failed else EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "sweep":
            try:
                with open(args.config) as fh:
                    cfg = lab.ExperimentConfig.from_dict(json.load(fh))
            except (OSError, json.JSONDecodeError) as e:
                raise ConfigInvalid({"config": str(e)})
            return _finish(lab.run(cfg))
        if args.command == "summary":
            for row in lab.sweep_summary(args.inp, args.out):
                print(", ".join(f"{k}={v}" for k, v in row.items()))
            return EXIT_OK
        if args.command == "plotdata":
            print(lab.emit_plotdata(args.inp, args.kind, args.out_dir))
            return EXIT_OK
        cfg = lab.ExperimentConfig(
            experiment=args.command, kappa_list=args.kappa, amplitude=args.amplitude,
            profile_name=args.profile, grid=args.grid, seeds=args.seeds, substeps=args.substeps,
            out_path=args.out, overrides=dict(args.overrides), master_seed=args.master_seed,
        )
        return _finish(lab.run(cfg))
    except (ConfigInvalid, UnknownKind) as e:
        print(f"invalid configuration: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except SlowmixError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
