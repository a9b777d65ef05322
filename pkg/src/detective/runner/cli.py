"""Command line entry point: ``detective {gen,run,ablate,report}``."""

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from ..datagen import gen_blobs, preset, write_dataset
from ..errors import ConfigError, DetectiveError
from ..udn import save_checkpoint
from .config import ExperimentConfig, dump_config, load_config, parse_overrides
from .loop import run_active_loop
from .report import emit_report, render_from_csv, slug

log = logging.getLogger("detective")

AXES = {
    "module": [
        ("Detective", {}),
        ("-UDN", {"disable_udn": True}),
        ("-IUS", {"disable_ius": True}),
        ("-CDC", {"disable_cdc": True}),
    ],
    "strategy": [
        ("LPS", {"strategy": "lps"}),
        ("GPG", {"strategy": "gpg"}),
    ],
    "uncertainty": [
        ("U_pre only", {"lambda_dom": 0.0}),
        ("U_dom only", {"lambda_pre": 0.0}),
        ("Detective", {}),
    ],
}


def ablation_configs(cfg, axis):
    if axis not in AXES:
        raise ConfigError(f"unknown ablation axis {axis!r}; expected one of {sorted(AXES)}")
    return [cfg.replace(label=label, **changes) for label, changes in AXES[axis]]


def _base_config(args):
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.set:
        overrides.update(parse_overrides("\n".join(args.set), "--set"))
    return cfg.replace(**overrides) if overrides else cfg


def cmd_gen(args):
    cfg = preset(args.preset, seed=args.seed if args.seed is not None else 0)
    ds = gen_blobs(cfg)
    out = Path(args.out)
    path = out / f"{args.preset}.csv" if out.suffix != ".csv" else out
    write_dataset(ds, path)
    print(f"wrote {path} ({len(ds)} samples, K={ds.K}, d={ds.d}, M={ds.M})")
    return 0


def _write_run(result, out):
    out = Path(out)
    emit_report([result], out)
    save_checkpoint(result.model, out / "model.ckpt")
    (out / "config.cfg").write_text(dump_config(result.config))


def cmd_run(args):
    cfg = _base_config(args)
    result = run_active_loop(cfg)
    _write_run(result, args.out)
    print(f"{result.label}: target accuracy {100 * result.target_accuracy:.2f}%, "
          f"oracle queries {result.oracle_queries}; reports in {args.out}")
    return 0


def cmd_ablate(args):
    base = _base_config(args)
    cfgs = ablation_configs(base, args.axis)
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(run_active_loop, cfgs))
    else:
        results = [run_active_loop(c) for c in cfgs]
    out = Path(args.out)
    emit_report(results, out)
    for res in results:
        save_checkpoint(res.model, out / slug(res.label) / "model.ckpt")
    for res in results:
        print(f"{res.label:>12}: target accuracy {100 * res.target_accuracy:.2f}%")
    return 0


def cmd_report(args):
    runs = render_from_csv(args.inputs, args.out)
    print(f"rendered {len(runs)} run(s) into {args.out}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="detective", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress per round")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="synthesise a multi-domain dataset")
    p.add_argument("--preset", default="blobs3")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="output directory or .csv path")
    p.set_defaults(func=cmd_gen)

    for name, func, helptext in (
        ("run", cmd_run, "run one active-learning experiment"),
        ("ablate", cmd_ablate, "run one ablation axis"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", help="key = value experiment file")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", required=True)
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")
        if name == "ablate":
            p.add_argument("--axis", choices=sorted(AXES), required=True)
            p.add_argument("--jobs", type=int, default=1, help="parallel experiments")
        p.set_defaults(func=func)

    p = sub.add_parser("report", help="re-render report.md from rounds.csv files")
    p.add_argument("inputs", nargs="+", help="rounds.csv files or run directories")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except DetectiveError as exc:
        print(f"detective: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"detective: I/O error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
