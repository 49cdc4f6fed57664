"""Command-line front end.

Every stage is a subcommand that reads and writes plain files, and
``pipeline`` chains them. Exit codes: 0 success, 2 validation error,
3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import contextlib
import hashlib
import json
import logging
import platform
import shutil
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .cluster import CONSTRAINED_COMPLETE, LINKAGES, MEDIAN, Dendrogram
from .cluster import constrained_complete_link, median_linkage
from .correspondence import FactorDecomposition, factor_decomposition, frequency_model
from .errors import DataError, NumericalError, UltrasegError, ValidationError
from .haar import MAGNITUDE, POLICIES, SIGN_CONVENTION, forward
from .ingest import (
    ContingencyTable,
    aggregate,
    load_signal,
    parse_events,
    read_table,
    write_table,
)
from .regression import (
    BREAK_TOL,
    MSE_NORMALIZATION,
    breakpoints_table,
    fold_and_regress,
    mse_sweep,
    sweep_csv,
)

logger = logging.getLogger("ultraseg")


class StageError(Exception):
    def __init__(self, stage: str, error: UltrasegError):
        super().__init__(f"[{stage}] {error}")
        self.stage = stage
        self.exit_code = error.exit_code


@contextlib.contextmanager
def stage(name: str):
    try:
        yield
    except UltrasegError as exc:
        raise StageError(name, exc) from exc
    except OSError as exc:
        raise StageError(name, DataError(str(exc))) from exc
    except np.linalg.LinAlgError as exc:
        raise StageError(name, NumericalError(str(exc))) from exc


def _read_text(path) -> str:
    with open(path, encoding="utf-8", newline="") as fh:
        return fh.read()


class Outputs:
    """Stages artifacts in a scratch directory and publishes them on success."""

    def __init__(self, out_dir):
        self.out_dir = Path(out_dir)
        self.files: dict[str, str] = {}

    def write(self, name: str, text: str):
        self.files[name] = text

    def publish(self):
        self.out_dir.mkdir(parents=True, exist_ok=True)
        scratch = Path(tempfile.mkdtemp(prefix=".ultraseg-", dir=self.out_dir))
        try:
            for name, text in self.files.items():
                with open(scratch / name, "w", encoding="utf-8", newline="") as fh:
                    fh.write(text)
            for name in self.files:
                (scratch / name).replace(self.out_dir / name)
        finally:
            shutil.rmtree(scratch, ignore_errors=True)


# -- stage helpers --------------------------------------------------------


def load_table(args) -> ContingencyTable:
    if bool(args.events) == bool(args.table):
        raise ValidationError("give exactly one of --events or --table")
    if args.table:
        if args.from_ or args.to:
            logger.warning("--from/--to are ignored with --table")
        return read_table(_read_text(args.table))
    if (args.from_ is None) != (args.to is None):
        raise ValidationError("--from and --to must be given together")
    events = parse_events(_read_text(args.events))
    schema = _read_text(args.events).splitlines()[0].split(",")[1:]
    rng = (args.from_, args.to) if args.from_ is not None else None
    return aggregate(events, args.granularity, rng, [s.strip() for s in schema])


def clustering_points(dec: FactorDecomposition, dims: int) -> np.ndarray:
    if dims < 1:
        raise ValidationError("--dims must be at least 1")
    if dec.n_retained == 0:
        raise DataError("table has zero inertia; no factors to cluster on")
    if dims > dec.n_retained:
        logger.warning("only %d factors retained; clustering on all of them", dec.n_retained)
    return dec.row_factors[:, : min(dims, dec.n_retained)]


def build_tree(points, labels, linkage: str) -> Dendrogram:
    if linkage == CONSTRAINED_COMPLETE:
        return constrained_complete_link(points, labels)
    if linkage == MEDIAN:
        return median_linkage(points, labels)
    raise ValidationError(f"unknown linkage {linkage!r}")


def _signal_names(paths) -> list[str]:
    names = [Path(p).stem for p in paths]
    if len(set(names)) != len(names):
        raise ValidationError("signal file names must have distinct stems")
    return names


def regress_signals(tree, paths, policy, keep, sweep, out: Outputs):
    names = _signal_names(paths)
    signals = []
    for path in paths:
        with stage(f"signal {path}"):
            signals.append(load_signal(_read_text(path)))

    def work(item):
        path, signal = item
        with stage(f"regress {path}"):
            if sweep:
                return None, mse_sweep(tree, signal, policy)
            return fold_and_regress(tree, signal, keep, policy), mse_sweep(tree, signal, policy)

    with ThreadPoolExecutor() as pool:
        results = list(pool.map(work, zip(paths, signals)))

    summary = {}
    for name, (fit, sweep_rows) in zip(names, results):
        out.write(f"{name}.sweep.csv", sweep_csv(sweep_rows))
        if fit is not None:
            out.write(f"{name}.fit.csv", fit.to_csv())
            out.write(f"{name}.breakpoints.txt", breakpoints_table([(f"keep={keep}", fit)]))
        else:
            out.write(f"{name}.fit.csv", _sweep_fits_csv(sweep_rows))
            out.write(
                f"{name}.breakpoints.txt",
                breakpoints_table([(f"keep={k}", f) for k, _, f in sweep_rows]),
            )
        summary[name] = {
            "n": len(sweep_rows),
            "mse": fit.mse if fit is not None else None,
            "sweep_mse": [m for _, m, _ in sweep_rows],
        }
    return summary


def _sweep_fits_csv(sweep_rows) -> str:
    lines = ["keep,label,original,fitted"]
    for keep, _, fit in sweep_rows:
        labels = fit.labels or [str(i + 1) for i in range(len(fit.fitted))]
        for lab, s, f in zip(labels, fit.original, fit.fitted):
            lines.append(f"{keep},{_csv_cell(lab)},{float(s)!r},{float(f)!r}")
    return "\n".join(lines) + "\n"


def _csv_cell(text: str) -> str:
    if any(c in text for c in ',"\n'):
        return '"' + text.replace('"', '""') + '"'
    return text


def conventions() -> dict:
    return {
        "factor_scaling": "principal coordinates",
        "factor_sign": "largest-magnitude row coordinate positive",
        "eigenvalue_cutoff": 1e-12,
        "constrained_tie_break": "leftmost adjacent pair",
        "median_tie_break": "smallest then next-smallest cluster id; smaller id is left child",
        "median_heights": "squared Euclidean distances",
        "haar_sign": SIGN_CONVENTION,
        "magnitude_tie_break": "later merge first",
        "mse": MSE_NORMALIZATION,
        "breakpoint_tolerance": BREAK_TOL,
    }


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# -- subcommands ----------------------------------------------------------


def cmd_ingest(args):
    out = Outputs(args.out)
    with stage("ingest"):
        table = load_table(args)
    out.write("table.csv", write_table(table))
    out.write(
        "table_meta.json",
        json.dumps(
            {"dropped_rows": list(table.dropped_rows), "dropped_cols": list(table.dropped_cols)},
            indent=2,
        )
        + "\n",
    )
    out.publish()


def cmd_ca(args):
    out = Outputs(args.out)
    with stage("ingest"):
        table = read_table(_read_text(args.table))
    with stage("ca"):
        dec = factor_decomposition(frequency_model(table))
    out.write("factors.json", dec.to_json())
    out.publish()


def _load_factors(path) -> FactorDecomposition:
    return FactorDecomposition.from_json(_read_text(path))


def cmd_cluster(args):
    out = Outputs(args.out)
    with stage("cluster"):
        dec = _load_factors(args.factors)
        tree = build_tree(clustering_points(dec, args.dims), dec.row_labels, args.linkage)
    out.write("dendrogram.json", tree.to_json())
    out.write("dendrogram.nwk", tree.to_newick())
    out.publish()


def cmd_haar(args):
    out = Outputs(args.out)
    with stage("haar"):
        tree = Dendrogram.from_json(_read_text(args.tree))
        dec = _load_factors(args.factors)
        points = clustering_points(dec, args.dims)
        hd = forward(tree, points)
    dims = [f"F{c + 1}" for c in range(points.shape[1])]
    out.write("decomposition.csv", hd.to_csv(dims))
    out.write("decomposition.json", hd.to_json(dims))
    out.publish()


def cmd_regress(args, sweep=False):
    out = Outputs(args.out)
    with stage("regress"):
        tree = Dendrogram.from_json(_read_text(args.tree))
    regress_signals(tree, args.signal, args.policy, getattr(args, "keep", None), sweep, out)
    out.publish()


def cmd_pipeline(args):
    if not args.sweep and args.keep is None and args.signal:
        raise StageError("config", ValidationError("give --keep K or --sweep"))
    if args.signal and args.linkage != CONSTRAINED_COMPLETE:
        raise StageError(
            "config", ValidationError("signal regression needs --linkage constrained-complete")
        )
    with stage("config"):
        _signal_names(args.signal)
    out = Outputs(args.out)
    with stage("ingest"):
        table = load_table(args)
    out.write("table.csv", write_table(table))
    with stage("ca"):
        dec = factor_decomposition(frequency_model(table))
    out.write("factors.json", dec.to_json())
    with stage("cluster"):
        points = clustering_points(dec, args.dims)
        tree = build_tree(points, table.row_labels, args.linkage)
    out.write("dendrogram.json", tree.to_json())
    out.write("dendrogram.nwk", tree.to_newick())
    with stage("haar"):
        hd = forward(tree, points)
    dims = [f"F{c + 1}" for c in range(points.shape[1])]
    out.write("decomposition.csv", hd.to_csv(dims))

    summary = regress_signals(tree, args.signal, args.policy, args.keep, args.sweep, out)

    inputs = {}
    for key, path in (("events", args.events), ("table", args.table)):
        if path:
            inputs[key] = {"file": Path(path).name, "sha256": _sha256(path)}
    inputs["signals"] = [{"file": Path(p).name, "sha256": _sha256(p)} for p in args.signal]
    manifest = {
        "tool": "ultraseg",
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "inputs": inputs,
        "config": {
            "granularity": args.granularity if args.events else None,
            "from": args.from_,
            "to": args.to,
            "dims": args.dims,
            "linkage": args.linkage,
            "policy": args.policy,
            "keep": "sweep" if args.sweep else args.keep,
        },
        "conventions": conventions(),
        "dropped_rows": list(table.dropped_rows),
        "dropped_cols": list(table.dropped_cols),
        "eigenvalues": [float(x) for x in dec.eigenvalues],
        "inertia_total": dec.inertia_total,
        "signals": summary,
        "artifacts": sorted([*out.files, "manifest.json"]),
    }
    out.write("manifest.json", json.dumps(manifest, indent=2) + "\n")
    out.publish()


# -- argument parsing -----------------------------------------------------


def _add_source(p):
    p.add_argument("--events", help="event CSV (date,<attrs>...)")
    p.add_argument("--table", help="pre-aggregated table CSV (label,<attrs>...)")
    p.add_argument("--granularity", choices=("month", "year"), default="month")
    p.add_argument("--from", dest="from_", metavar="LABEL", help="first bin, e.g. 1990 or 1990-01")
    p.add_argument("--to", metavar="LABEL", help="last bin (inclusive)")


def _add_regress(p, keep=True):
    p.add_argument("--signal", action="append", default=[], metavar="PATH",
                   help="label,value CSV; repeatable")
    p.add_argument("--policy", choices=POLICIES, default=MAGNITUDE)
    if keep:
        p.add_argument("--keep", type=int, metavar="K", help="number of details to keep")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ultraseg", description=__doc__.splitlines()[0])
    parser.add_argument("-q", "--quiet", action="store_true", help="suppress warnings")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="aggregate events into a contingency table")
    _add_source(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("ca", help="correspondence analysis of a table")
    p.add_argument("--table", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ca)

    p = sub.add_parser("cluster", help="build a dendrogram on factor coordinates")
    p.add_argument("--factors", required=True)
    p.add_argument("--dims", type=int, default=2)
    p.add_argument("--linkage", choices=LINKAGES, default=CONSTRAINED_COMPLETE)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("haar", help="Haar transform of factor coordinates on a dendrogram")
    p.add_argument("--tree", required=True)
    p.add_argument("--factors", required=True)
    p.add_argument("--dims", type=int, default=2)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_haar)

    p = sub.add_parser("regress", help="thresholded wavelet fit of signals on a dendrogram")
    p.add_argument("--tree", required=True)
    _add_regress(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_regress)

    p = sub.add_parser("sweep", help="MSE for every number of kept details")
    p.add_argument("--tree", required=True)
    _add_regress(p, keep=False)
    p.add_argument("--out", required=True)
    p.set_defaults(func=lambda a: cmd_regress(a, sweep=True))

    p = sub.add_parser("pipeline", help="run every stage end to end")
    _add_source(p)
    p.add_argument("--dims", type=int, default=2)
    p.add_argument("--linkage", choices=LINKAGES, default=CONSTRAINED_COMPLETE)
    _add_regress(p, keep=False)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--keep", type=int, metavar="K")
    group.add_argument("--sweep", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_pipeline)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.ERROR if args.quiet else logging.WARNING,
        format="%(levelname)s: %(message)s",
    )
    if args.command in ("regress", "sweep") and not args.signal:
        parser.error("at least one --signal is required")
    if args.command == "regress" and args.keep is None:
        parser.error("--keep is required")
    try:
        args.func(args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
