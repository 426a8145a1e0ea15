"""Command-line interface: ``simulate``, ``ground-truth`` and ``explain``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import platform
import sys
from pathlib import Path

from . import __version__
from .config import (ConfigError, ExplainSpec, LearnerSpec, apply_overrides, config_hash,
                     expand_config)
from .data import DataError, load_csv
from .experiment import (GroundTruthMismatch, compute_ground_truth, load_ground_truth,
                         run_study, save_ground_truths)
from .imputation import ImputerSpec
from .missingness import MissSpec
from .rng import Seed
from .uncertainty import ResampleSpec

log = logging.getLogger("imlmi")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _versions() -> dict:
    import numba
    import numpy
    import scipy
    return {"imlmi": __version__, "python": platform.python_version(),
            "numpy": numpy.__version__, "scipy": scipy.__version__, "numba": numba.__version__}


def _write_manifest(out: Path, command: str, doc: dict, seed, extra=None):
    manifest = {
        "command": command,
        "config": doc,
        "config_hash": config_hash(doc),
        "seed": seed,
        "versions": _versions(),
    }
    manifest.update(extra or {})
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))


def _load_doc(args) -> dict:
    path = Path(args.config)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError("--config", f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("--config", f"invalid JSON: {exc}") from None
    if isinstance(doc, dict) and "versions" in doc and "config" in doc:
        doc = doc["config"]  # a manifest from an earlier run
    if not isinstance(doc, dict):
        raise ConfigError("--config", "expected a JSON object")
    doc = apply_overrides(doc, args.set)
    if args.seed is not None:
        doc["seed"] = args.seed
    return doc


def _print_summary(result, stream=None):
    stream = stream or sys.stdout
    cols = ("setting_id", "mechanism", "proportion", "imputer", "learner", "explainer",
            "adjusted", "refits_used", "coverage", "avg_width", "bias", "n_completed")
    rows = [r for r in result.table() if r["component"] == "mean"]
    stream.write("  ".join(f"{c:>11}" for c in cols) + "\n")
    for r in rows:
        cells = []
        for c in cols:
            v = r[c]
            cells.append(f"{v:>11.4f}" if isinstance(v, float) else f"{v!s:>11}")
        stream.write("  ".join(cells) + "\n")


def cmd_simulate(args) -> int:
    doc = _load_doc(args)
    configs = expand_config(doc)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    gts = None
    if args.ground_truth:
        gts = load_ground_truth(args.ground_truth)
        for cfg in configs:
            h = config_hash(cfg.ground_truth_key())
            if h not in gts:
                raise GroundTruthMismatch(
                    f"{args.ground_truth} has no ground truth for config hash {h}")
    result = run_study(configs, out_dir=out, threads=args.threads, ground_truth=gts,
                       master_seed=doc.get("seed", 0))
    _write_manifest(out, "simulate", doc, doc.get("seed", 0))
    _print_summary(result)
    return EXIT_OK


def cmd_ground_truth(args) -> int:
    doc = _load_doc(args)
    configs = expand_config(doc)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    gts = {}
    for cfg in configs:
        h = config_hash(cfg.ground_truth_key())
        if h not in gts:
            gts[h] = compute_ground_truth(cfg, threads=args.threads)
    save_ground_truths(gts, out / "ground_truth.csv")
    _write_manifest(out, "ground-truth", doc, doc.get("seed", 0),
                    {"ground_truth_hashes": sorted(gts)})
    for h, gt in gts.items():
        print(f"{h}: {len(gt.labels)} components over {gt.replications} replications")
    return EXIT_OK


def _parse_amputation(text):
    if text is None:
        return None
    try:
        mech, prop = text.split(":")
        return MissSpec(mech, float(prop))
    except ValueError as exc:
        raise ConfigError("--amputation", f"expected MECHANISM:PROPORTION ({exc})") from None


def _write_table(path, rows, columns):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})


_EXPLAIN_KEYS = ("data", "target", "delimiter", "amputation", "imputer", "m", "learner",
                 "rounds", "depth", "strategy", "refits", "alpha", "unadjusted", "grid_size",
                 "n_perm", "seed")


def _explain_from_manifest(args):
    try:
        manifest = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError("--config", f"cannot read manifest {args.config}: {exc}") from None
    if manifest.get("command") != "explain":
        raise ConfigError("--config", "not a manifest written by 'imlmi explain'")
    for key in _EXPLAIN_KEYS:
        if key in manifest["config"]:
            setattr(args, key, manifest["config"][key])


def cmd_explain(args) -> int:
    from .analysis import explain_dataset

    if args.config:
        _explain_from_manifest(args)
    if not args.data or not args.target:
        raise ConfigError("--data/--target", "required unless --config names a manifest")
    try:
        imputer = ImputerSpec(args.imputer, m=args.m)
        learner = LearnerSpec(args.learner, max_rounds=args.rounds, max_depth=args.depth)
        resample = ResampleSpec(args.strategy, args.refits)
        explain = ExplainSpec(grid_size=args.grid_size, n_perm=args.n_perm)
    except ValueError as exc:
        raise ConfigError("explain", str(exc)) from None
    amputation = _parse_amputation(args.amputation)
    d = load_csv(args.data, args.delimiter, args.target)
    report = explain_dataset(d, imputer, learner, resample, explain,
                             adjusted=not args.unadjusted, alpha=args.alpha,
                             seed=Seed(args.seed if args.seed is not None else 0),
                             amputation=amputation)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cols = ["feature", "point", "lo", "hi", "variance", "df"]
    _write_table(out / "pfi.csv", report.table("PFI"), cols)
    _write_table(out / "shap.csv", report.table("SHAP"), cols)
    _write_table(out / "pd.csv", report.table("PD"),
                 ["feature", "grid_index", "grid_value", "point", "lo", "hi", "variance", "df"])
    mse_rows = [{"imputation": i, "refit": j, "mse": float(v)}
                for i, row in enumerate(report.mse) for j, v in enumerate(row)]
    _write_table(out / "mse.csv", mse_rows, ["imputation", "refit", "mse"])
    doc = {k: getattr(args, k) for k in _EXPLAIN_KEYS}
    _write_manifest(out, "explain", doc, args.seed,
                    {"mean_mse": report.mean_mse, "m": report.m, "c": report.c})
    print(f"mean test MSE over {report.mse.size} fits: {report.mean_mse:.4f} (m={report.m})")
    for kind in ("PFI", "SHAP"):
        rows = sorted(report.table(kind), key=lambda r: -r["point"])
        print(f"{kind}:")
        for r in rows:
            print(f"  {r['feature']:>24}  {r['point']:9.4f}  [{r['lo']:9.4f}, {r['hi']:9.4f}]")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="imlmi", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", required=True, help="experiment JSON (or a manifest)")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the master seed")
        p.add_argument("--threads", type=int, default=1, help="parallel worker processes")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="dotted-path override, e.g. miss.proportion=0.2")

    p = sub.add_parser("simulate", help="run a simulation study")
    common(p)
    p.add_argument("--ground-truth", default=None, help="reuse a ground_truth.csv")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("ground-truth", help="compute the complete-data ground truth")
    common(p)
    p.set_defaults(func=cmd_ground_truth)

    p = sub.add_parser("explain", help="explanation CIs on a CSV dataset")
    p.add_argument("--data", default=None, help="CSV file with a header row")
    p.add_argument("--target", default=None, help="name of the response column")
    p.add_argument("--config", default=None, help="rerun from an explain manifest.json")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--out", required=True)
    p.add_argument("--amputation", default=None, help="e.g. MCAR:0.4")
    p.add_argument("--imputer", default="none")
    p.add_argument("--m", type=int, default=None, help="number of MICE imputations")
    p.add_argument("--learner", default="gbt")
    p.add_argument("--rounds", type=int, default=20)
    p.add_argument("--depth", type=int, default=2)
    p.add_argument("--strategy", default="bootstrap")
    p.add_argument("--refits", type=int, default=15)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--unadjusted", action="store_true")
    p.add_argument("--grid-size", type=int, default=20)
    p.add_argument("--n-perm", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_explain)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, GroundTruthMismatch, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001
        log.exception("run failed")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
