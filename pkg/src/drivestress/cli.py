"""Command-line front end.

Subcommands: ``extract``, ``label``, ``select``, ``evaluate``, ``full``,
``dict`` and ``synth`` (write a synthetic record fixture). Exit codes:
0 success, 1 data error, 2 config error, 3 internal invariant violation.
"""

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .config import load_config
from .evaluation import (PUBLISHED_REFERENCE, ROW_ORDER, SelectionResult, evaluate_final,
                         grid_search_hyper, run_selection, split_dataset)
from .exceptions import ConfigError, DataError, DriveStressError, InvariantViolation
from .features import FEATURE_NAMES, feature_dictionary
from .pipeline import build_dataset, extract_features, label_records
from .records import load_records, write_record
from .svm import SvmHyper, save_model, train_svm
from .synthetic import synthetic_drives

logger = logging.getLogger("drivestress")

FEATURES_CSV = "features.csv"
LABELS_CSV = "labels.csv"
REJECTED_CSV = "rejected.csv"
RANKING_JSON = "ranking.json"
FINAL_SET_JSON = "final_set.json"
MODEL_JSON = "model_final.json"
REPORT_JSON = "report.json"
REPORT_CSV = "report.csv"


class Outputs:
    """Writes artifacts into the output directory and remembers them so a
    failed run can remove what it produced."""

    def __init__(self, directory, stamp):
        self.dir = Path(directory)
        self.stamp = stamp
        self.written = []

    def path(self, name):
        return self.dir / name

    def _open(self, name):
        self.dir.mkdir(parents=True, exist_ok=True)
        p = self.path(name)
        self.written.append(p)
        return open(p, "w", newline="")

    def _comment(self):
        return f"# drivestress {self.stamp['artifact_version']} config_hash={self.stamp['config_hash']}\n"

    def csv(self, name, header, rows):
        with self._open(name) as fh:
            fh.write(self._comment())
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_cell(row.get(h)) for h in header])

    def json(self, name, payload):
        with self._open(name) as fh:
            json.dump({**self.stamp, **payload}, fh, indent=2)
            fh.write("\n")

    def model(self, name, model):
        self.dir.mkdir(parents=True, exist_ok=True)
        self.written.append(self.path(name))
        save_model(model, self.path(name), self.stamp)

    def rollback(self):
        for p in self.written:
            p.unlink(missing_ok=True)


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def read_csv_rows(path):
    if not Path(path).exists():
        raise DataError(f"{path}: not found (run the producing subcommand first)")
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def read_json(path):
    if not Path(path).exists():
        raise DataError(f"{path}: not found (run the producing subcommand first)")
    with open(path) as fh:
        return json.load(fh)


def _check_stamp(payload, cfg, path):
    if payload.get("config_hash") != cfg.hash():
        logger.warning("%s was produced with config %s, current config is %s",
                       path, payload.get("config_hash"), cfg.hash())


# -- subcommands -------------------------------------------------------------

def cmd_extract(cfg, out, args):
    records = load_records(cfg.data_dir)
    rows, rejected = extract_features(records, cfg, n_jobs=args.jobs)
    if not rows:
        raise DataError("no window produced a feature vector")
    out.csv(FEATURES_CSV, ["record_id", "window_index", "start_s", *FEATURE_NAMES], rows)
    out.csv(REJECTED_CSV, ["record_id", "window_index", "reason"], rejected)


def cmd_label(cfg, out, args):
    records = load_records(cfg.data_dir)
    rows = label_records(records, cfg)
    out.csv(LABELS_CSV, ["record_id", "window_index", "label", "gsr_median", "lower", "upper"], rows)


def _dataset(out):
    return build_dataset(read_csv_rows(out.path(FEATURES_CSV)), read_csv_rows(out.path(LABELS_CSV)))


def cmd_select(cfg, out, args):
    data = _dataset(out)
    selection_set, _ = split_dataset(data, cfg.split.policy)
    cv = {**cfg.cv_options(), "n_jobs": args.jobs}
    hyper = cfg.hyper()
    result = run_selection(selection_set, hyper, cfg.mrmr.bins, cfg.mrmr.variant, cfg.mrmr.global_k, **cv)
    if cfg.svm.grid_search:
        hyper, acc = grid_search_hyper(selection_set, result.final_set, **cv)
        logger.info("grid search picked C=%g scale=%g (acc %.3f)", hyper.c, hyper.kernel_scale, acc)
    out.json(RANKING_JSON, {"selection_records": selection_set.records, **result.to_dict()})
    out.json(FINAL_SET_JSON, {
        "final_set": result.final_set,
        "hyper": {"c": hyper.c, "kernel_scale": hyper.kernel_scale, "tol": hyper.tol},
    })


def _table_csv_rows(table):
    return [{k: r[k] for k in ("condition", "row", "n_features", "acc", "sn", "sp", "f1",
                               "tp", "tn", "fp", "fn")} for r in table]


def cmd_evaluate(cfg, out, args):
    data = _dataset(out)
    ranking = read_json(out.path(RANKING_JSON))
    final = read_json(out.path(FINAL_SET_JSON))
    _check_stamp(ranking, cfg, RANKING_JSON)
    selection = SelectionResult.from_dict(ranking)
    hyper = SvmHyper(**final["hyper"])
    selection_set, eval_set = split_dataset(data, cfg.split.policy)
    if set(selection_set.records) & set(eval_set.records):
        raise InvariantViolation("selection and evaluation subsets share a record")
    cv = {**cfg.cv_options(), "n_jobs": args.jobs}
    table = evaluate_final(eval_set, selection, hyper, **cv)
    if [r["condition"] for r in table] != list(ROW_ORDER):
        raise InvariantViolation("comparison table rows out of order")

    model = train_svm(data.columns(selection.final_set), data.y, hyper, selection.final_set)
    out.model(MODEL_JSON, model)

    reference = {}
    for r in table:
        ref = dict(zip(("acc", "sn", "sp", "f1"), PUBLISHED_REFERENCE[r["condition"]]))
        ours = {k: (None if r[k] is None else round(100 * r[k], 1)) for k in ref}
        reference[r["condition"]] = {
            "published_pct": ref,
            "this_run_pct": ours,
            "delta_pct": {k: (None if ours[k] is None else round(ours[k] - ref[k], 1)) for k in ref},
        }
    out.json(REPORT_JSON, {
        "config": {k: v for k, v in cfg.to_dict().items() if k != "output_dir"},
        "hyper": final["hyper"],
        "selection_records": selection_set.records,
        "evaluation_records": eval_set.records,
        "n_labeled_windows": {"selection": int(selection_set.y.size), "evaluation": int(eval_set.y.size)},
        "rankings": {c: s["ranking"] for c, s in ranking["per_category"].items()},
        "global_ranking": ranking["global"],
        "k_map": ranking["k_map"],
        "final_set": selection.final_set,
        "table": table,
        "published_reference": reference,
        "reference_caveats": [
            "window length/overlap is a configured choice (window.len_s, window.step_s)",
            "GSR alpha is derived per record unless labeling.per_record = false",
            "selection/evaluation split is record-level (split.policy)",
        ],
    })
    out.csv(REPORT_CSV, ["condition", "row", "n_features", "acc", "sn", "sp", "f1", "tp", "tn", "fp", "fn"],
            _table_csv_rows(table))


def cmd_full(cfg, out, args):
    for step in (cmd_extract, cmd_label, cmd_select, cmd_evaluate):
        step(cfg, out, args)


def cmd_dict(cfg, out, args):
    json.dump(feature_dictionary(), sys.stdout, indent=2)
    sys.stdout.write("\n")


def cmd_synth(cfg, out, args):
    dest = Path(cfg.data_dir)
    for rec in synthetic_drives(args.records, seed=cfg.svm.seed):
        write_record(dest / rec.record_id, rec)
    logger.info("wrote %d synthetic records to %s", args.records, dest)


COMMANDS = {
    "extract": cmd_extract,
    "label": cmd_label,
    "select": cmd_select,
    "evaluate": cmd_evaluate,
    "full": cmd_full,
    "dict": cmd_dict,
    "synth": cmd_synth,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="drivestress", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"drivestress {__version__}")
    parser.add_argument("--seed", type=int, default=None, help="overrides svm.seed")
    parser.add_argument("--jobs", type=int, default=1, help="worker processes for CV and extraction")
    parser.add_argument("--verbose", "-v", action="count", default=0)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML config file")
    common.add_argument("--data-dir", help="directory of record directories")
    common.add_argument("--output-dir", help="artifact directory")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config key, e.g. svm.c=8")

    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "synth":
            p.add_argument("--records", type=int, default=8)
    return parser


def _overrides(args):
    out = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    if args.data_dir:
        out["data_dir"] = args.data_dir
    if args.output_dir:
        out["output_dir"] = args.output_dir
    if args.seed is not None:
        out["svm.seed"] = str(args.seed)
    return out


def _fail(exc, code):
    kind = {1: "data", 2: "config", 3: "internal"}[code]
    msg = str(exc).replace("\n", " ")
    sys.stderr.write(json.dumps({"error": kind, "exit_code": code, "message": msg}) + "\n")
    return code


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    out = None
    try:
        cfg = load_config(args.config, _overrides(args))
        out = Outputs(cfg.output_dir, cfg.stamp())
        COMMANDS[args.command](cfg, out, args)
    except DriveStressError as exc:
        if out is not None:
            out.rollback()
        return _fail(exc, exc.exit_code)
    except Exception as exc:  # anything unexpected is an internal fault
        if out is not None:
            out.rollback()
        logger.debug("internal error", exc_info=True)
        return _fail(exc, 3)
    return 0


if __name__ == "__main__":
    sys.exit(main())
