"""Command-line interface: ``select``, ``benchmark`` and ``diagnose``.

Every flag can also be set through an environment variable named
``QUANT_<FLAG>`` (upper case, dashes as underscores); flags win.
Exit codes: 0 ok, 2 usage error, 3 data error, 4 solver size guard.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from contextlib import nullcontext
from pathlib import Path

import numpy as np

from . import __version__
from .exceptions import ConfigurationError, DataError, QuantError
from .estimator import build_setup
from .io import (
    DiagnosticReport, diagnose, file_digest, load_candidates, load_mixture, read_result,
    write_json, write_result,
)
from .selectors import ALGORITHMS, BATCH_STRATEGIES, SelectionConfig, select
from .solvers import SOLVERS
from .target import random_mixture
from .validation import split_points

ENV_PREFIX = "QUANT_"
_TRUE = {"1", "true", "yes", "on"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def _int_list(text):
    try:
        values = [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError(f"expected positive integers, got {text!r}")
    return values


def _str_list(text):
    return [v.strip() for v in str(text).split(",") if v.strip()]


def _global_flags(suppress=False):
    # Subcommand copies default to SUPPRESS so they never overwrite a value
    # given before the subcommand name.
    def dflt(value):
        return argparse.SUPPRESS if suppress else value

    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=dflt(0), help="master random seed (default 0)")
    g.add_argument("--threads", type=int, default=dflt(None),
                   help="cap on BLAS/OpenMP worker threads (also QUANT_THREADS)")
    g.add_argument("--output", default=dflt(None),
                   help="output file (select, diagnose) or directory (benchmark); stdout when omitted")
    g.add_argument("--format", choices=("json", "csv"), default=dflt("json"), help="result format (default json)")
    return p


def _kernel_flags(p, lengthscale="median"):
    p.add_argument("--kernel", choices=("se", "imq"), default=None,
                   help="base kernel: se (squared exponential) or imq (inverse multiquadric); "
                        "default se in mmd mode, imq in ksd mode")
    p.add_argument("--lengthscale", default=lengthscale,
                   help=f"'median' or a positive number (default {lengthscale})")
    p.add_argument("--median-subsample", type=int, default=1000,
                   help="points used by the median heuristic (default 1000)")


def _solver_flags(p):
    p.add_argument("--solver", choices=SOLVERS, default="auto",
                   help="per-iteration subset solver (default auto: exhaustive when small, else branch-and-bound)")
    p.add_argument("--time-limit", type=float, default=None,
                   help="seconds per branch-and-bound solve; when hit, the best selection found is used "
                        "and the iteration is counted as heuristic (default: no limit, exact)")
    p.add_argument("--binary", action="store_true", help="select each candidate at most once per iteration")
    p.add_argument("--batch", type=int, default=0, help="mini-batch size b (0 = full candidate set)")
    p.add_argument("--batch-strategy", choices=BATCH_STRATEGIES, default=BATCH_STRATEGIES[0],
                   help="how mini-batches are formed")
    p.add_argument("--gram-threshold", type=int, default=4096,
                   help="materialise the Gram matrix up to this many candidates")
    p.add_argument("--rank", type=int, default=None, help="relaxation factor rank (sdr; default min(n+1, 25))")
    p.add_argument("--draws", type=int, default=50, help="rounding draws R (sdr)")
    p.add_argument("--sdr-tol", type=float, default=1e-6, help="relaxation constraint tolerance (sdr)")
    p.add_argument("--sdr-max-iter", type=int, default=3000, help="relaxation iteration cap (sdr)")


def build_parser():
    parser = _Parser(prog="mmdquant", description="Greedy MMD/KSD quantisation of a candidate set.",
                     parents=[_global_flags()])
    common = _global_flags(suppress=True)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="{select,benchmark,diagnose}", parser_class=_Parser)
    sub.required = True

    sel = sub.add_parser("select", parents=[common], help="select representative points from a candidate file",
                         description="Select representative points from a CSV candidate file.")
    sel.add_argument("--candidates", help="CSV of candidate points, one per row")
    sel.add_argument("--scores", help="CSV of score vectors, same shape as the candidates (ksd mode)")
    sel.add_argument("--mixture", help="Gaussian mixture JSON (required in mmd mode)")
    sel.add_argument("--mode", choices=("mmd", "ksd"), default="mmd", help="discrepancy (default mmd)")
    sel.add_argument("--algorithm", choices=ALGORITHMS, default="nonmyopic", help="selection algorithm")
    sel.add_argument("--points", type=int, help="total number of points M to select")
    sel.add_argument("--s", type=int, default=1, help="points per iteration; must divide --points")
    _kernel_flags(sel)
    _solver_flags(sel)
    sel.add_argument("--manifest", default=None,
                     help="where to write the run manifest (default <output>.manifest.json when --output is set)")
    sel.add_argument("--replay", default=None, help="re-run the configuration stored in a manifest")
    sel.set_defaults(handler=cmd_select)

    bench = sub.add_parser("benchmark", parents=[common], help="seeded grid over s and algorithms",
                           description="Run a seeded grid of selections on samples from a Gaussian mixture.")
    bench.add_argument("--mixture", help="Gaussian mixture JSON (default: seeded random mixture)")
    bench.add_argument("--components", type=int, default=20, help="components of the random mixture")
    bench.add_argument("--dim", type=int, default=2, help="dimension of the random mixture")
    bench.add_argument("--n-candidates", type=int, default=1000, help="samples drawn per seed")
    bench.add_argument("--points", type=int, default=60, help="points selected per run")
    bench.add_argument("--s-values", type=_int_list, default=[1, 2, 4], help="comma-separated s grid")
    bench.add_argument("--seeds", type=int, default=10, help="number of replicate seeds")
    bench.add_argument("--algorithms", type=_str_list, default=["nonmyopic"],
                       help="comma-separated algorithms (default nonmyopic)")
    _kernel_flags(bench, lengthscale="0.25")
    _solver_flags(bench)
    bench.set_defaults(handler=cmd_benchmark, mode="mmd")

    diag = sub.add_parser("diagnose", parents=[common], help="check the fixed-candidate error bound for a run",
                          description="Report MMD^2 against Phi^2 + C^2 (1 + log m) / m for a completed run.")
    diag.add_argument("--manifest", help="run manifest written by select")
    diag.add_argument("--result", default=None, help="result file (default: the one named in the manifest)")
    diag.add_argument("--fw-tol", type=float, default=1e-8, help="Frank-Wolfe duality gap tolerance")
    diag.set_defaults(handler=cmd_diagnose)

    _apply_env(parser)
    for p in (sel, bench, diag):
        _apply_env(p, skip=("seed", "threads", "output", "format"))
    return parser


def _apply_env(parser, skip=()):
    """Use ``QUANT_<DEST>`` environment variables as defaults."""
    for action in parser._actions:
        if not action.option_strings or action.dest in ("help", "version", *skip):
            continue
        value = os.environ.get(ENV_PREFIX + action.dest.upper())
        if value is None:
            continue
        if isinstance(action, argparse._StoreTrueAction):
            parser.set_defaults(**{action.dest: value.strip().lower() in _TRUE})
        elif action.type is not None:
            try:
                parser.set_defaults(**{action.dest: action.type(value)})
            except (ValueError, argparse.ArgumentTypeError):
                parser.error(f"invalid value {value!r} in {ENV_PREFIX}{action.dest.upper()}")
        else:
            if action.choices is not None and value not in action.choices:
                parser.error(f"invalid value {value!r} in {ENV_PREFIX}{action.dest.upper()}")
            parser.set_defaults(**{action.dest: value})


def _thread_limit(threads):
    if threads is None:
        return nullcontext()
    if threads < 1:
        raise ConfigurationError("--threads must be at least 1")
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=threads)


def _config(args, m, s, seed):
    return SelectionConfig(
        m=m, s=s, b=args.batch, batch_strategy=args.batch_strategy, seed=seed, solver=args.solver,
        binary=args.binary, gram_threshold=args.gram_threshold, rank=args.rank, draws=args.draws,
        sdr_tol=args.sdr_tol, sdr_max_iter=args.sdr_max_iter, time_limit=args.time_limit,
    )


def _kernel_family(args, mode):
    return args.kernel or ("imq" if mode == "ksd" else "se")


_MANIFEST_KEYS = ("candidates", "scores", "mixture", "mode", "algorithm", "points", "s", "kernel", "lengthscale",
                  "median_subsample", "solver", "binary", "batch", "batch_strategy", "gram_threshold", "rank",
                  "draws", "sdr_tol", "sdr_max_iter", "time_limit", "seed", "format")


def _abspath(path):
    return None if path is None else str(Path(path).resolve())


def _load_inputs(args):
    if args.mode == "ksd" and not (args.scores or args.mixture):
        raise ConfigurationError("ksd mode needs --scores (score file for the candidates) or --mixture")
    if args.mode == "mmd" and not args.mixture:
        raise ConfigurationError("mmd mode needs --mixture (Gaussian mixture JSON with exact kernel means)")
    if not args.candidates:
        raise ConfigurationError("select needs --candidates")
    cands = load_candidates(args.candidates, score_path=args.scores if args.mode == "ksd" else None)
    mixture = load_mixture(args.mixture) if args.mixture else None
    return cands, mixture


def _setup_from_args(args):
    cands, mixture = _load_inputs(args)
    candidates, target, kernel, ell = build_setup(
        cands.points, cands.scores, mixture, args.mode, _kernel_family(args, args.mode), args.lengthscale,
        args.median_subsample, args.seed,
    )
    return candidates, target, kernel, ell


def _replay(args):
    import json

    try:
        with open(args.replay, encoding="utf-8") as fh:
            manifest = json.load(fh)
        stored = manifest["config"]
    except (OSError, ValueError, KeyError) as exc:
        raise DataError(f"cannot read manifest {args.replay}: {exc}") from exc
    for path, digest in manifest.get("inputs_sha256", {}).items():
        try:
            current = file_digest(path)
        except OSError as exc:
            raise DataError(f"replay input {path} is unreadable: {exc}") from exc
        if current != digest:
            raise DataError(f"replay input {path} changed since the manifest was written (sha256 mismatch)")
    for key in _MANIFEST_KEYS:
        if key in stored:
            setattr(args, key, stored[key])
    return args


def cmd_select(args):
    if args.replay:
        args = _replay(args)
    if args.points is None:
        raise ConfigurationError("select needs --points")
    m = split_points(args.points, args.s)
    if args.algorithm == "minibatch" and not args.batch:
        raise ConfigurationError("--algorithm minibatch needs --batch >= 1")
    if args.algorithm == "myopic" and args.s != 1:
        raise ConfigurationError("--algorithm myopic selects one point per iteration; use --s 1")
    candidates, target, kernel, ell = _setup_from_args(args)
    result = select(candidates, target, kernel, args.algorithm, _config(args, m, args.s, args.seed))
    result.config.update(mode=args.mode, kernel=_kernel_family(args, args.mode), lengthscale=ell, points=args.points)
    if result.config["heuristic_iterations"] and args.algorithm != "sdr":
        print(f"warning: {result.config['heuristic_iterations']} of {m} iterations hit --time-limit and are "
              "not proven optimal", file=sys.stderr)
    if args.output is None:
        sys.stdout.write(write_json(_result_doc(result)) if args.format == "json" else _csv_text(result))
        return 0
    write_result(result, args.output, args.format)
    manifest_path = args.manifest or f"{args.output}.manifest.json"
    config = {k: getattr(args, k) for k in _MANIFEST_KEYS}
    config.update(candidates=_abspath(args.candidates), scores=_abspath(args.scores),
                  mixture=_abspath(args.mixture), lengthscale=ell, kernel=_kernel_family(args, args.mode))
    inputs = {p: file_digest(p) for p in (config["candidates"], config["scores"], config["mixture"]) if p}
    write_json({
        "command": "select", "version": __version__, "config": config, "seeds": {"master": args.seed},
        "inputs_sha256": inputs, "result": _abspath(args.output),
    }, manifest_path)
    print(f"selected {result.pi.size} points in {m} iterations; final MMD^2 {result.final_mmd_squared:.6e}",
          file=sys.stderr)
    return 0


def _result_doc(result):
    from .io import result_document

    return result_document(result)


def _csv_text(result):
    import tempfile

    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "trace.csv"
        write_result(result, path, "csv")
        return path.read_text(encoding="utf-8")


def cmd_diagnose(args):
    import json

    if not args.manifest:
        raise ConfigurationError("diagnose needs --manifest")
    try:
        with open(args.manifest, encoding="utf-8") as fh:
            manifest = json.load(fh)
        stored = dict(manifest["config"])
    except (OSError, ValueError, KeyError) as exc:
        raise DataError(f"cannot read manifest {args.manifest}: {exc}") from exc
    ns = argparse.Namespace(**stored)
    result_path = args.result or manifest.get("result")
    if not result_path:
        raise ConfigurationError("manifest names no result file; pass --result")
    candidates, target, kernel, _ = _setup_from_args(ns)
    result = read_result(result_path)
    report: DiagnosticReport = diagnose(candidates, target, kernel, result, fw_tol=args.fw_tol)
    print(report.summary())
    text = write_json(report.to_dict(), args.output)
    print(text, end="")
    return 0


def _trace_rows(result):
    cum = result.cumulative_ms
    s = result.pi.shape[1]
    return [(i, (i + 1) * s, float(v), float(t)) for i, (v, t) in enumerate(zip(result.trace, cum))]


def cmd_benchmark(args):
    for name in args.algorithms:
        if name not in ALGORITHMS:
            raise ConfigurationError(f"unknown algorithm {name!r} in --algorithms; choose from {ALGORITHMS}")
        if name == "minibatch" and not args.batch:
            raise ConfigurationError("--algorithms minibatch needs --batch >= 1")
    for s in args.s_values:
        split_points(args.points, s)
    if args.seeds < 1:
        raise ConfigurationError("--seeds must be at least 1")
    out = Path(args.output or "benchmark")
    out.mkdir(parents=True, exist_ok=True)
    if args.mixture:
        mixture = load_mixture(args.mixture)
    else:
        mixture = random_mixture(args.components, args.dim, seed=args.seed)
        write_json(mixture.to_dict(), out / "mixture.json")
    family = _kernel_family(args, "mmd")
    long_rows, finals = [], {}
    for k in range(args.seeds):
        seed = args.seed + k
        X = mixture.sample(args.n_candidates, seed)
        candidates, target, kernel, ell = build_setup(X, None, mixture, "mmd", family, args.lengthscale,
                                                      args.median_subsample, seed)
        for algo in args.algorithms:
            for s in args.s_values:
                if algo == "myopic" and s != 1:
                    continue
                m = args.points // s
                result = select(candidates, target, kernel, algo, _config(args, m, s, seed))
                rows = _trace_rows(result)
                b = args.batch if algo in ("minibatch", "sdr") else 0
                with open(out / f"trace_{algo}_s{s}_seed{seed}.csv", "w", newline="", encoding="utf-8") as fh:
                    w = csv.writer(fh, lineterminator="\n")
                    w.writerow(["iteration", "points_selected", "mmd_squared", "cumulative_ms"])
                    w.writerows([(i, p, repr(v), repr(t)) for i, p, v, t in rows])
                long_rows += [(seed, algo, s, b, i, p, repr(v), repr(t)) for i, p, v, t in rows]
                finals.setdefault((algo, s), []).append(result.final_mmd_squared)
                print(f"seed {seed} {algo} s={s}: final MMD^2 {result.final_mmd_squared:.6e}", file=sys.stderr)
    with open(out / "long.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["seed", "algorithm", "s", "b", "iteration", "points", "mmd_squared", "cumulative_ms"])
        w.writerows(long_rows)
    with open(out / "summary.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["algorithm", "s", "n_seeds", "median_final_mmd_squared"])
        for (algo, s), vals in sorted(finals.items()):
            w.writerow([algo, s, len(vals), repr(float(np.median(vals)))])
    write_json({
        "command": "benchmark", "version": __version__, "seeds": list(range(args.seed, args.seed + args.seeds)),
        "config": {k: v for k, v in vars(args).items() if k != "handler"},
        "inputs_sha256": {_abspath(args.mixture): file_digest(args.mixture)} if args.mixture else {},
    }, out / "manifest.json")
    print((out / "summary.csv").read_text(encoding="utf-8"), end="")
    return 0


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        with _thread_limit(args.threads):
            return args.handler(args)
    except QuantError as exc:
        print(f"mmdquant: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except KeyError as exc:
        print(f"mmdquant: error: {exc}", file=sys.stderr)
        return DataError.exit_code
    except OSError as exc:
        print(f"mmdquant: error: {exc}", file=sys.stderr)
        return DataError.exit_code


if __name__ == "__main__":
    sys.exit(main())
