"""Batch command line front end.

Subcommands::

    sessionclust stats     --input FILE
    sessionclust tolerance --input FILE [--p 0.5]
    sessionclust fcm       --input FILE [--alpha 0.5 --m 2 ...]
    sessionclust eval      --clusters FILE --labels FILE

Exit codes: 0 success, 1 usage or config error, 2 input parse or validation
error, 3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .cluster_eval import evaluate
from .feature_space import (
    WEIGHT_METHODS,
    FeatureWeights,
    compute_feature_weights,
    frequency_matrix,
)
from .improved_fcm import FcmConfig, harden, merge_clusters, run_fcm
from .session_ingest import (
    CategoryDictionary,
    SessionLogError,
    dataset_stats,
    msnbc_dictionary,
    read_log,
)
from .tolerance_cluster import (
    ClusterSet,
    merge_tolerance_classes,
    similarity_matrix,
    threshold_components,
    upper_approximation,
)

log = logging.getLogger("sessionclust")

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_INTERNAL = 0, 1, 2, 3
MEMBERSHIP_LIMIT = 10_000

# settings that change how a run executes but never what it outputs
_NOT_ECHOED = {"command", "config", "output", "format", "verbose", "threads"}


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


class InvariantError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _add_common(p: argparse.ArgumentParser, needs_input: bool = True) -> None:
    if needs_input:
        p.add_argument("--input", help="sequence log in msnbc format")
        p.add_argument("--dictionary", default="embedded",
                       help="'embedded' (read from the file), 'msnbc', or a file of "
                            "whitespace separated category names")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--output", help="write here instead of stdout")
    p.add_argument("--config", help="JSON or TOML file of option values; flags win")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("-v", "--verbose", action="count", default=0)


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = _Parser(prog="sessionclust", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    subs = {}

    p = sub.add_parser("stats", help="corpus statistics")
    _add_common(p)
    subs["stats"] = p

    p = sub.add_parser("tolerance", help="threshold similarity clustering")
    _add_common(p)
    p.add_argument("--p", type=float, default=0.5, help="similarity threshold in (0, 1]")
    p.add_argument("--streaming", action="store_true",
                   help="merged clusters only, without building the similarity matrix")
    p.add_argument("--similarity-csv", help="also dump the similarity matrix here")
    subs["tolerance"] = p

    p = sub.add_parser("fcm", help="improved fuzzy c-means")
    _add_common(p)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--m", type=float, default=2.0)
    p.add_argument("--init-beta", "--beta", dest="init_beta", type=float, default=0.5)
    p.add_argument("--epsilon", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=300)
    p.add_argument("--weights", choices=WEIGHT_METHODS, default="uniform")
    p.add_argument("--label-p", type=float, default=0.5,
                   help="threshold of the tolerance pass that supplies labels for weighting")
    p.add_argument("--vectorize", choices=("normalized", "frequency"), default="normalized")
    p.add_argument("--merge-p", type=float, default=None,
                   help="merge hardened clusters whose centroid similarity reaches this")
    p.add_argument("--emit-memberships", action="store_true")
    subs["fcm"] = p

    p = sub.add_parser("eval", help="purity, inverse purity and purity-F")
    _add_common(p, needs_input=False)
    p.add_argument("--clusters", help="ClusterSet JSON or item_id,cluster_id CSV")
    p.add_argument("--labels", help="reference classes, same formats")
    p.add_argument("--per-pair", action="store_true")
    subs["eval"] = p
    return parser, subs


def _load_config(path: str) -> dict:
    text = Path(path).read_bytes()
    if path.endswith(".toml"):
        try:
            import tomllib
        except ModuleNotFoundError:  # python < 3.11
            import tomli as tomllib
        try:
            data = tomllib.loads(text.decode("utf-8"))
        except Exception as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from None
    else:
        try:
            data = json.loads(text)
        except ValueError as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError(f"config {path} must hold a table/object")
    return data


def parse_args(argv: Sequence[str]) -> argparse.Namespace:
    parser, subs = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        raise UsageError("a subcommand is required: stats, tolerance, fcm or eval")
    if args.config:
        try:
            cfg = _load_config(args.config)
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        sp = subs[args.command]
        known = {a.dest for a in sp._actions} - {"help", "config"}
        cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
        unknown = sorted(set(cfg) - known)
        if unknown:
            raise UsageError(f"unknown config key(s) for {args.command}: {unknown}")
        sp.set_defaults(**cfg)
        args = parser.parse_args(argv)
    return args


def _check_ranges(args) -> None:
    if args.threads < 1:
        raise UsageError("--threads must be at least 1")
    if args.command in ("stats", "tolerance", "fcm") and not args.input:
        raise UsageError("--input is required")
    if args.command == "tolerance" and not 0 < args.p <= 1:
        raise UsageError(f"--p must lie in (0, 1], got {args.p}")
    if args.command == "fcm":
        if not 0 <= args.alpha <= 1:
            raise UsageError(f"--alpha must lie in [0, 1], got {args.alpha}")
        if not args.m > 1:
            raise UsageError(f"--m must exceed 1, got {args.m}")
        if not 0 < args.init_beta < 1:
            raise UsageError(f"--init-beta must lie in (0, 1), got {args.init_beta}")
        if not args.epsilon > 0:
            raise UsageError("--epsilon must be positive")
        if args.max_iter < 1:
            raise UsageError("--max-iter must be at least 1")
        if not 0 < args.label_p <= 1:
            raise UsageError("--label-p must lie in (0, 1]")
        if args.merge_p is not None and not 0 < args.merge_p <= 1:
            raise UsageError("--merge-p must lie in (0, 1]")
    if args.command == "eval" and not (args.clusters and args.labels):
        raise UsageError("--clusters and --labels are required")


def _digest(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _metadata(args, inputs: dict[str, str]) -> dict:
    config = {k: v for k, v in sorted(vars(args).items()) if k not in _NOT_ECHOED}
    return {
        "tool": "sessionclust",
        "version": __version__,
        "command": args.command,
        "config": config,
        "input_sha256": {k: _digest(v) for k, v in inputs.items()},
    }


def _dictionary(spec: str) -> CategoryDictionary | None:
    if spec == "embedded":
        return None
    if spec == "msnbc":
        return msnbc_dictionary()
    try:
        names = Path(spec).read_text(encoding="latin-1").split()
        return CategoryDictionary(tuple(names))
    except (OSError, ValueError) as exc:
        raise InputError(f"bad dictionary {spec}: {exc}") from None


def _load(args):
    try:
        return read_log(args.input, _dictionary(args.dictionary))
    except OSError as exc:
        raise InputError(f"cannot read {args.input}: {exc}") from None
    except SessionLogError as exc:
        raise InputError(f"{args.input}: {exc}") from None


def _csv(header, rows) -> str:
    import csv
    import io
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _json(doc: dict) -> str:
    return json.dumps(doc, indent=2) + "\n"


def cmd_stats(args) -> str:
    data = _load(args)
    st = dataset_stats(data)
    if args.format == "csv":
        d = st.as_dict()
        return _csv(list(d), [[repr(v) if isinstance(v, float) else v for v in d.values()]])
    return _json({"metadata": _metadata(args, {"input": args.input}), "stats": st.as_dict()})


def _check_partition(clusters: ClusterSet, ids) -> None:
    if clusters.items != frozenset(ids) or clusters.n_items != len(ids):
        raise InvariantError("clustering is not a partition of the sessions")


def cmd_tolerance(args) -> str:
    data = _load(args)
    rel = None
    if args.streaming:
        clusters = threshold_components(data, args.p)
    else:
        sim = similarity_matrix(data, n_jobs=args.threads)
        if args.similarity_csv:
            Path(args.similarity_csv).write_text(sim.to_csv())
        rel = upper_approximation(sim, args.p)
        clusters = merge_tolerance_classes(rel)
    _check_partition(clusters, data.ids)
    log.info("%d sessions -> %d clusters at p=%s", len(data), len(clusters), args.p)
    if args.format == "csv":
        return clusters.to_csv()
    doc = {"metadata": _metadata(args, {"input": args.input})}
    doc.update(clusters.to_dict(threshold=args.p))
    if rel is not None:
        doc["upper_approximations"] = rel.to_dict()["upper_approximations"]
    return _json(doc)


def cmd_fcm(args) -> str:
    data = _load(args)
    X = frequency_matrix(data, normalized=args.vectorize == "normalized")
    if args.weights == "uniform":
        weights = FeatureWeights.uniform(X.shape[1])
    else:
        first = threshold_components(data, args.label_p)
        where = first.assignments()
        labels = [where[i] for i in data.ids]
        weights = compute_feature_weights(frequency_matrix(data, normalized=False),
                                          labels, args.weights)
    if not any(weights.weights):
        log.warning("every feature weight is zero; falling back to uniform weights")
        weights = FeatureWeights.uniform(X.shape[1])
    cfg = FcmConfig(alpha=args.alpha, m=args.m, max_iter=args.max_iter,
                    epsilon=args.epsilon, seed=args.seed, init_beta=args.init_beta,
                    weights=weights, n_jobs=args.threads)
    res = run_fcm(X, cfg)
    U = res.memberships
    if not (np.all((U >= 0) & (U <= 1)) and np.allclose(U.sum(axis=1), 1.0, atol=1e-9)):
        raise InvariantError("membership rows do not sum to 1")
    clusters = harden(U, data.ids)
    if args.merge_p is not None:
        clusters = merge_clusters(X, clusters, args.merge_p, data.ids, weights)
    _check_partition(clusters, data.ids)
    log.info("%d centers, %d iterations, converged=%s", res.n_clusters, res.iterations,
             res.converged)
    if not res.converged:
        log.warning("no convergence within %d iterations", args.max_iter)
    if args.format == "csv":
        return clusters.to_csv()
    emit = args.emit_memberships or len(data) <= MEMBERSHIP_LIMIT
    doc = {"metadata": _metadata(args, {"input": args.input}),
           "weights": weights.to_dict(),
           "n_clusters": res.n_clusters}
    doc.update(res.to_dict(include_memberships=emit))
    doc["clusters"] = clusters.to_dict()["clusters"]
    return _json(doc)


def _read_clusters(path: str) -> ClusterSet:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    try:
        if text.lstrip().startswith("{"):
            return ClusterSet.from_json(text)
        return ClusterSet.from_csv(text)
    except (ValueError, TypeError, KeyError) as exc:
        raise InputError(f"{path}: {exc}") from None


def cmd_eval(args) -> str:
    clusters = _read_clusters(args.clusters)
    labels = _read_clusters(args.labels)
    try:
        report = evaluate(clusters, labels, per_pair=args.per_pair)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    if args.format == "csv":
        return report.to_csv()
    doc = {"metadata": _metadata(args, {"clusters": args.clusters, "labels": args.labels})}
    doc.update(report.to_dict())
    return _json(doc)


COMMANDS = {"stats": cmd_stats, "tolerance": cmd_tolerance, "fcm": cmd_fcm, "eval": cmd_eval}


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
        _check_ranges(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        text = COMMANDS[args.command](args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except InvariantError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    if args.output:
        try:
            Path(args.output).write_text(text)
        except OSError as exc:
            print(f"error: cannot write {args.output}: {exc}", file=sys.stderr)
            return EXIT_USAGE
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
