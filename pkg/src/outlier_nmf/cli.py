"""
Command-line entry point: ``outlier-nmf {factorize,eval,baseline,gen,sweep}``.

Every run writes a ``manifest.json`` describing the resolved configuration,
input digests and the artifacts it produced. Wall-clock timings go to a
separate ``timings.json`` so that everything else is byte-reproducible.

Exit codes: 0 success, 2 missing or unreadable input, 3 shape or label
mismatch, 4 invalid configuration, 5 numerical failure.
"""

import argparse
import dataclasses
import hashlib
import json
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .baselines import knn_scores, knn_sweep, svd_scores
from .corpus_io import (
    CorpusFormatError,
    LabelError,
    load_labels,
    load_matrix,
    save_bow,
    save_dense_matrix_market,
    save_labels,
    tfidf,
)
from .evaluation import LabelMismatch, auc, roc_curve, write_roc_csv
from .solver import NumericalError, SolverConfig, solve
from .synthgen import InfeasibleConfig, SynthConfig, generate

logger = logging.getLogger("outlier_nmf")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_MISMATCH = 3
EXIT_CONFIG = 4
EXIT_NUMERICAL = 5

_DEFAULTS = SolverConfig()


class CliError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


# ---------------------------------------------------------------- helpers

def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class Run:
    """Collects artifacts, digests and timings for one command invocation."""

    def __init__(self, command, out_dir, config, seed=None):
        self.command = command
        self.out_dir = out_dir
        self.config = config
        self.seed = seed
        self.inputs = {}
        self.artifacts = []
        self.result = {}
        self.timings = {}
        os.makedirs(out_dir, exist_ok=True)

    def add_input(self, role, path):
        self.inputs[role] = {"file": os.path.basename(path), "sha256": _sha256(path)}

    @property
    def run_id(self):
        blob = json.dumps([self.command, self.config, self.inputs, __version__], sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def path(self, name):
        self.artifacts.append(name)
        return os.path.join(self.out_dir, name)

    def stamp(self):
        return f"run_id={self.run_id} manifest=manifest.json"

    def timed(self, phase):
        run = self

        class _Timer:
            def __enter__(self):
                self.t0 = time.perf_counter()

            def __exit__(self, *exc):
                run.timings[phase] = run.timings.get(phase, 0.0) + time.perf_counter() - self.t0

        return _Timer()

    def finish(self):
        manifest = {
            "tool": "outlier-nmf",
            "version": __version__,
            "command": self.command,
            "run_id": self.run_id,
            "seed": self.seed,
            "config": self.config,
            "inputs": self.inputs,
            "result": self.result,
            "artifacts": [
                {"file": a, "sha256": _sha256(os.path.join(self.out_dir, a))}
                for a in self.artifacts
            ],
            "timings_file": "timings.json",
        }
        with open(os.path.join(self.out_dir, "manifest.json"), "w", encoding="utf-8",
                  newline="\n") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        with open(os.path.join(self.out_dir, "timings.json"), "w", encoding="utf-8",
                  newline="\n") as fh:
            json.dump({"run_id": self.run_id, "seconds": self.timings}, fh, indent=2,
                      sort_keys=True)
            fh.write("\n")


def write_scores(scores, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("doc_id,score\n")
        for i, s in enumerate(scores):
            fh.write(f"{i},{float(s):.10g}\n")


def read_scores(path):
    """Read a ``doc_id,score`` CSV; ids must be 0..n-1 in order."""
    if not os.path.exists(path):
        raise FileNotFoundError(f"no such file: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0].replace(" ", "") != "doc_id,score":
        raise CorpusFormatError(path, "expected header 'doc_id,score'", 1)
    scores = np.empty(len(lines) - 1)
    for k, line in enumerate(lines[1:]):
        parts = line.split(",")
        try:
            doc, val = int(parts[0]), float(parts[1])
        except (ValueError, IndexError):
            raise CorpusFormatError(path, "malformed score row", k + 2)
        if doc != k or len(parts) != 2:
            raise CorpusFormatError(path, f"expected doc_id {k}", k + 2)
        scores[k] = val
    return scores


def _load_input(run, args):
    with run.timed("load"):
        A = load_matrix(args.input, args.format)
        run.add_input("input", args.input)
        if args.tfidf:
            A = tfidf(A)
    return A


def _load_labels(run, path, n_docs):
    labels = load_labels(path)
    run.add_input("labels", path)
    if labels.size != n_docs:
        raise CliError(EXIT_MISMATCH,
                       f"{path}: {labels.size} labels for {n_docs} documents")
    return labels


def _solver_config(args, alpha=None, rank=None):
    return SolverConfig(
        rank=args.rank if rank is None else rank,
        alpha=args.alpha if alpha is None else alpha,
        beta=args.beta,
        gamma=args.gamma,
        max_outer=args.max_outer,
        max_inner=args.max_inner,
        tol_outer=args.tol_outer,
        tol_inner=args.tol_inner,
        seed=args.seed,
        n_restarts=args.restarts,
    )


def _float_list(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _int_list(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


# ---------------------------------------------------------------- commands

def cmd_factorize(args):
    cfg = _solver_config(args)
    run = Run("factorize", args.out_dir, _config_dict(cfg, args), seed=cfg.seed)
    A = _load_input(run, args)
    with run.timed("solve"):
        res = solve(A, cfg)
    with run.timed("write"):
        write_scores(res.scores, run.path("scores.csv"))
        save_dense_matrix_market(res.factors.W, run.path("W.mtx"), run.stamp())
        save_dense_matrix_market(res.factors.H, run.path("H.mtx"), run.stamp())
        with open(run.path("objective.csv"), "w", encoding="utf-8", newline="\n") as fh:
            fh.write("iteration,objective\n")
            for k, obj in enumerate(res.objective_trace):
                fh.write(f"{k},{obj:.17g}\n")
    run.result = {
        "n_terms": A.shape[0],
        "n_docs": A.shape[1],
        "iterations_used": res.iterations_used,
        "converged": res.converged,
        "degenerate_events": res.degenerate_events,
        "final_objective": res.objective_trace[-1] if res.objective_trace else None,
    }
    run.finish()
    return EXIT_OK


def cmd_eval(args):
    run = Run("eval", args.out_dir, {})
    scores = read_scores(args.scores)
    run.add_input("scores", args.scores)
    labels = _load_labels(run, args.labels, scores.size)
    curve = roc_curve(scores, labels)
    write_roc_csv(curve, run.path("roc.csv"))
    run.result = {"auc": curve.auc}
    run.finish()
    print(f"auc={curve.auc:.4f}")
    return EXIT_OK


def cmd_baseline(args):
    config = {
        "method": args.method, "k": args.k, "k_max": args.k_max, "metric": args.metric,
        "rank": args.rank, "svd_mode": args.svd_mode, "svd_power_iters": args.power_iters,
        "svd_oversample": args.oversample, "tfidf": args.tfidf,
    }
    if args.method == "knn-sweep" and args.labels is None:
        raise CliError(EXIT_CONFIG, "--method knn-sweep needs --labels")
    run = Run("baseline", args.out_dir, config, seed=args.seed)
    A = _load_input(run, args)
    labels = None if args.labels is None else _load_labels(run, args.labels, A.shape[1])
    outputs = []

    with run.timed("score"):
        if args.method == "knn":
            outputs.append(("knn", knn_scores(A, args.k, args.metric, args.threads)))
        elif args.method == "knn-sweep":
            best_k, best_auc, table = knn_sweep(A, range(1, args.k_max + 1), labels,
                                                args.metric, args.threads)
            with open(run.path("knn_sweep.csv"), "w", encoding="utf-8", newline="\n") as fh:
                fh.write("k,auc,best\n")
                for k, a in table:
                    fh.write(f"{k},{a:.10g},{int(k == best_k)}\n")
            run.result["best_k"] = best_k
            run.result["best_auc"] = best_auc
            outputs.append(("knn", knn_scores(A, best_k, args.metric, args.threads)))
        else:
            modes = {"energy": ["subspace_energy"], "residual": ["residual"],
                     "both": ["residual", "subspace_energy"]}[args.svd_mode]
            for mode in modes:
                s = svd_scores(A, args.rank, mode=mode, power_iters=args.power_iters,
                               oversample=args.oversample, seed=args.seed)
                tag = "energy" if mode == "subspace_energy" else "residual"
                outputs.append((f"svd_{tag}", s))

    for name, scores in outputs:
        write_scores(scores, run.path(f"scores_{name}.csv"))
        if labels is not None:
            a = auc(scores, labels)
            run.result[f"auc_{name}"] = a
            print(f"{name} auc={a:.4f}")
    run.finish()
    return EXIT_OK


def cmd_gen(args):
    cfg = SynthConfig(
        n_terms=args.terms, n_regular_docs=args.docs, n_outliers=args.outliers,
        n_topics=args.topics, doc_length_mean=args.doc_length,
        outlier_vocab_overlap=args.overlap, seed=args.seed,
    )
    run = Run("gen", args.out_dir, dataclasses.asdict(cfg), seed=args.seed)
    with run.timed("generate"):
        A, labels = generate(cfg)
    with run.timed("write"):
        save_bow(A, run.path("corpus.bow"))
        save_labels(labels, run.path("labels.txt"))
    run.result = {"n_terms": A.shape[0], "n_docs": A.shape[1], "nnz": int(A.nnz),
                  "n_outliers": int(labels.sum())}
    run.finish()
    return EXIT_OK


def cmd_sweep(args):
    if not args.alphas or not args.ranks:
        raise CliError(EXIT_CONFIG, "empty sweep grid: give at least one alpha and one rank")
    cells = [(a, r) for a in args.alphas for r in args.ranks]
    configs = [_solver_config(args, alpha=a, rank=r) for a, r in cells]
    config = _config_dict(configs[0], args)
    config.pop("alpha")
    config.pop("rank")
    config["alphas"] = args.alphas
    config["ranks"] = args.ranks
    run = Run("sweep", args.out_dir, config, seed=args.seed)
    A = _load_input(run, args)
    labels = _load_labels(run, args.labels, A.shape[1])

    def one(cfg):
        return auc(solve(A, cfg).scores, labels)

    with run.timed("solve"):
        if args.threads > 1 and len(configs) > 1:
            with ThreadPoolExecutor(max_workers=args.threads) as pool:
                aucs = list(pool.map(one, configs))
        else:
            aucs = [one(c) for c in configs]
    with open(run.path("sweep.csv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("alpha,rank,auc\n")
        for (a, r), v in zip(cells, aucs):
            fh.write(f"{a:.10g},{r},{v:.10g}\n")
    best = int(np.argmax(aucs))
    run.result = {"best_alpha": cells[best][0], "best_rank": cells[best][1],
                  "best_auc": aucs[best]}
    run.finish()
    return EXIT_OK


def _config_dict(cfg, args):
    d = dataclasses.asdict(cfg)
    d["tfidf"] = bool(getattr(args, "tfidf", False))
    d["format"] = getattr(args, "format", None)
    return d


# ---------------------------------------------------------------- parser

def build_parser():
    p = argparse.ArgumentParser(prog="outlier-nmf", description=__doc__.split("\n\n")[0].strip())
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out-dir", default=".", help="directory for outputs (default: .)")
    common.add_argument("--seed", type=int, default=_DEFAULTS.seed)
    common.add_argument("--threads", type=int, default=1,
                        help="workers for independent tasks; results do not depend on it")

    matrix = argparse.ArgumentParser(add_help=False)
    matrix.add_argument("--input", required=True, help="term-document matrix file")
    matrix.add_argument("--format", choices=("bow", "mm"), default="bow")
    matrix.add_argument("--tfidf", action="store_true", help="apply tf-idf weighting first")

    solver = argparse.ArgumentParser(add_help=False)
    solver.add_argument("--alpha", type=float, default=_DEFAULTS.alpha)
    solver.add_argument("--beta", type=float, default=None,
                        help="l1 weight on H (default: 0.1 * alpha)")
    solver.add_argument("--gamma", type=float, default=_DEFAULTS.gamma)
    solver.add_argument("--max-outer", type=int, default=_DEFAULTS.max_outer)
    solver.add_argument("--max-inner", type=int, default=_DEFAULTS.max_inner)
    solver.add_argument("--tol-outer", type=float, default=_DEFAULTS.tol_outer)
    solver.add_argument("--tol-inner", type=float, default=_DEFAULTS.tol_inner)
    solver.add_argument("--restarts", type=int, default=_DEFAULTS.n_restarts,
                        help="random starts; the lowest final objective is kept")

    f = sub.add_parser("factorize", parents=[common, matrix, solver],
                       help="fit the outlier factorization and write scores")
    f.add_argument("--rank", type=int, default=_DEFAULTS.rank)
    f.set_defaults(func=cmd_factorize)

    e = sub.add_parser("eval", parents=[common], help="ROC curve and AUC of a score file")
    e.add_argument("--scores", required=True)
    e.add_argument("--labels", required=True)
    e.set_defaults(func=cmd_eval)

    b = sub.add_parser("baseline", parents=[common, matrix], help="kNN and SVD scorers")
    b.add_argument("--method", choices=("knn", "knn-sweep", "svd"), required=True)
    b.add_argument("--labels")
    b.add_argument("--k", type=int, default=5)
    b.add_argument("--k-max", type=int, default=50)
    b.add_argument("--metric", choices=("euclidean", "cosine"), default="euclidean")
    b.add_argument("--rank", type=int, default=_DEFAULTS.rank)
    b.add_argument("--svd-mode", choices=("energy", "residual", "both"), default="both")
    b.add_argument("--power-iters", type=int, default=4)
    b.add_argument("--oversample", type=int, default=8)
    b.set_defaults(func=cmd_baseline)

    g = sub.add_parser("gen", parents=[common], help="synthetic corpus with planted outliers")
    sd = SynthConfig()
    g.add_argument("--terms", type=int, default=sd.n_terms)
    g.add_argument("--docs", type=int, default=sd.n_regular_docs, help="regular documents")
    g.add_argument("--outliers", type=int, default=sd.n_outliers)
    g.add_argument("--topics", type=int, default=sd.n_topics)
    g.add_argument("--doc-length", type=int, default=sd.doc_length_mean)
    g.add_argument("--overlap", type=float, default=sd.outlier_vocab_overlap)
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("sweep", parents=[common, matrix, solver],
                       help="AUC over an alpha x rank grid")
    s.add_argument("--labels", required=True)
    s.add_argument("--alphas", type=_float_list, default=[0.5, 1, 2, 4, 8])
    s.add_argument("--ranks", type=_int_list, default=[2, 5, 10, 20])
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "threads", 1) < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        # BLAS stays single-threaded so summation order never depends on --threads
        with threadpool_limits(limits=1):
            return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (FileNotFoundError, CorpusFormatError, LabelError, IsADirectoryError,
            PermissionError, UnicodeDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except LabelMismatch as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    except (NumericalError, FloatingPointError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (InfeasibleConfig, ValueError) as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
