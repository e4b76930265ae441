"""Command-line front door: build, compact, score, filter, sort, eval, gen, sweep.

Machine output goes to stdout (JSON lines / CSV), diagnostics to stderr.
Every artifact embeds its effective configuration, and re-running a command
with the same configuration reproduces byte-identical machine output.

Exit codes: 0 ok, 1 usage, 2 I/O or parse failure, 3 data/invariant failure.
Relative output paths resolve under $ACLTREE_OUT when that variable is set.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import os
import sys
import time
from fractions import Fraction
from pathlib import Path

from .classify import similarity, sort_tests, train_stats
from .compaction import CompactedTree, CompactionParams, compact, pruned_mass_bound
from .errors import AclTreeError, FormatError
from .evaluation import (EvalParams, SynthSpec, gen_synthetic, planted_copy_counts,
                         sweep, window_eval)
from .index import SuffixIndex, build_memory_estimate
from .sequences import Sequence, load_sequences, write_fasta

_INDEX_MAGIC = b"ACLIDX1\n"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}")


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x]


def _fraction_list(text: str) -> list[Fraction]:
    return [_fraction(x) for x in text.split(",") if x]


def _out_path(path: str) -> Path:
    base = os.environ.get("ACLTREE_OUT")
    p = Path(path)
    if base and not p.is_absolute():
        return Path(base) / p
    return p


def _write_file(path: Path, write_fn) -> None:
    """Write through a temp file; a failure leaves no partial output behind."""
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    try:
        write_fn(tmp)
        os.replace(tmp, path)
    except BaseException:
        tmp.unlink(missing_ok=True)
        raise


def _config_dict(args, keys) -> dict:
    out = {}
    for key in keys:
        value = getattr(args, key)
        if isinstance(value, Fraction):
            value = str(value)
        elif isinstance(value, Path):
            value = str(value)
        elif isinstance(value, list):
            value = [str(v) if isinstance(v, Fraction) else v for v in value]
        out[key] = value
    return out


def _load_base(path: str):
    """An index file or a tree file, detected by magic."""
    with open(path, "rb") as fh:
        magic = fh.read(len(_INDEX_MAGIC))
    if magic == _INDEX_MAGIC:
        return SuffixIndex.load(path)
    return CompactedTree.load(path)


def _load_tests(paths, fmt) -> list[Sequence]:
    tests = []
    for path in paths:
        tests.extend(load_sequences(path, fmt))
    if not tests:
        raise FormatError("no test sequences given")
    return tests


def _emit(records, out_file):
    text = "\n".join(json.dumps(r, sort_keys=True) for r in records) + "\n"
    if out_file is None:
        sys.stdout.write(text)
    else:
        _write_file(_out_path(out_file), lambda p: p.write_text(text, encoding="utf-8"))


# -- commands ----------------------------------------------------------------

def cmd_build(args) -> int:
    if args.lmax is not None and args.lmax < 1:
        raise UsageError(f"--lmax must be >= 1, got {args.lmax}")
    y = _load_training(args)
    t0 = time.perf_counter()
    index = SuffixIndex.build(y, args.lmax)
    seconds = time.perf_counter() - t0
    config = _config_dict(args, ["training", "format", "lmax"])
    _write_file(_out_path(args.out), lambda p: index.save(p, config=config))
    est = build_memory_estimate(index.n, index.alphabet.size, index.l_max)
    print(f"built index: N'={index.n} alphabet={index.alphabet.symbols!r} "
          f"l_max={index.l_max} in {seconds:.2f}s "
          f"(resident ~{est['resident_bytes']} bytes)", file=sys.stderr)
    return 0


def _load_training(args) -> Sequence:
    seqs = load_sequences(args.training, args.format)
    if len(seqs) != 1:
        raise FormatError(f"training input must hold exactly one sequence, "
                          f"found {len(seqs)}")
    return seqs[0]


def cmd_compact(args) -> int:
    index = SuffixIndex.load(args.index)
    params = CompactionParams(args.epsilon, args.bigN, args.features_budget)
    tree = compact(index, params)
    for warning in tree.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    if not args.no_train_stats:
        y = index.training_sequence()
        stats = {}
        for mode in ("matched", "all"):
            try:
                stats[mode] = train_stats(tree, y, mode).l_y
            except AclTreeError:
                stats[mode] = None
        tree.train_stats.update(stats)
    leaf_count = tree.leaf_count()
    config = _config_dict(args, ["index", "epsilon", "bigN", "features_budget", "text"])
    saver = tree.save_text if args.text else tree.save_binary
    _write_file(_out_path(args.out), lambda p: saver(p, config=config))
    print(f"compacted: min_count={tree.min_count} leaf_count={leaf_count} "
          f"bound={params.leaf_bound}", file=sys.stderr)
    return 0


def _base_and_stats(args):
    base = _load_base(args.base)
    if isinstance(base, SuffixIndex):
        stats = train_stats(base, base.training_sequence(), args.avg_mode)
    elif not base.standalone:
        stats = train_stats(base, base.source_index.training_sequence(), args.avg_mode)
    else:
        stats = train_stats(base, None, args.avg_mode)
    return base, stats


def _score_reports(args) -> list:
    base, stats = _base_and_stats(args)
    tests = _load_tests(args.tests, args.format)
    t = args.threshold

    def score(x):
        return similarity(base, stats, x, t)

    if args.threads > 1 and len(tests) > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=args.threads) as pool:
            return list(pool.map(score, tests))
    return [score(x) for x in tests]


def _human_table(reports, stream) -> None:
    for r in reports:
        d = "-" if r.d is None else f"{float(r.d):+.6g}"
        print(f"{r.name or '-':<24} D={d:<12} "
              f"{'acceptable' if r.acceptable else 'not-acceptable'}", file=stream)


# --threads is deliberately left out of echoed configs: it cannot change any
# result, and outputs must be byte-identical across thread counts.
_SCORE_CONFIG_KEYS = ["base", "tests", "format", "threshold", "avg_mode"]


def cmd_score(args) -> int:
    reports = _score_reports(args)
    config = _config_dict(args, _SCORE_CONFIG_KEYS)
    records = [{"type": "config", **config}]
    records += [{"type": "report", **r.to_json_dict()} for r in reports]
    _emit(records, args.out)
    _human_table(reports, sys.stderr)
    return 0


def cmd_filter(args) -> int:
    return cmd_score(args)


def cmd_sort(args) -> int:
    base, stats = _base_and_stats(args)
    tests = _load_tests(args.tests, args.format)
    ranked = sort_tests(base, stats, tests, args.threshold)
    config = _config_dict(args, _SCORE_CONFIG_KEYS)
    records = [{"type": "config", **config}]
    records += [{"type": "rank", "rank": k + 1, **r.to_json_dict()}
                for k, r in enumerate(ranked)]
    _emit(records, args.out)
    _human_table(ranked, sys.stderr)
    return 0


def cmd_eval(args) -> int:
    if args.index:
        index = SuffixIndex.load(args.index)
        y = index.training_sequence()
    else:
        y = _load_training(args)
        index = SuffixIndex.build(y, args.lmax)
    params = EvalParams(n_window=args.bigN, t=args.threshold, epsilon=args.epsilon,
                        features_budget=args.features_budget, avg_mode=args.avg_mode,
                        record_windows=bool(args.details), seed=args.seed)
    tree = compact(index, params.compaction)
    report = window_eval(index, tree, y, params)
    diagnostic = pruned_mass_bound(index, params.compaction)
    config = _config_dict(args, ["training", "index", "format", "lmax", "epsilon",
                                 "bigN", "features_budget", "threshold", "avg_mode", "seed"])
    record = {"type": "eval", **report.to_json_dict(),
              "leaf_count": tree.leaf_count(),
              "pruned_mass_bound": [float(diagnostic), str(diagnostic)],
              "config": config}
    _emit([record], args.out)
    if args.details:
        win = report.windows
        lines = [json.dumps({"type": "config", **config}, sort_keys=True)]
        for k in range(report.window_count):
            lines.append(json.dumps({
                "start": int(win["start"][k]),
                "accept_ref": bool(win["accept_ref"][k]),
                "accept_cand": bool(win["accept_cand"][k]),
                "flipped": bool(win["flipped"][k]),
                "divergent_positions": int(win["divergent_positions"][k]),
            }, sort_keys=True))
        _write_file(_out_path(args.details),
                    lambda p: p.write_text("\n".join(lines) + "\n", encoding="utf-8"))
    status = "PASS" if report.passed else "FAIL"
    q = f"{float(report.q):.6g}"
    bound = "-" if report.bound is None else f"{float(report.bound):.6g}"
    print(f"windows={report.window_count} q={q} p_delta={float(report.p_delta):.6g} "
          f"bound={bound} {status}", file=sys.stderr)
    return 0


def cmd_gen(args) -> int:
    features = tuple(args.features.split(",")) if args.features else None
    spec = SynthSpec(alphabet_size=args.alphabet_size, length=args.length,
                     seed=args.seed, features=features,
                     feature_count=args.feature_count,
                     feature_len=tuple(args.feature_len),
                     density=args.density, background=args.background,
                     mix_rate=args.mix_rate)
    y, feats = gen_synthetic(spec)
    _write_file(_out_path(args.out), lambda p: write_fasta([y], p))
    if args.manifest:
        config = _config_dict(args, ["alphabet_size", "length", "seed", "features",
                                     "feature_count", "feature_len", "density",
                                     "background", "mix_rate", "out"])
        manifest = {
            "config": config,
            "alphabet": y.alphabet.symbols,
            "length": len(y),
            "seed": spec.seed,
            "features": list(feats.features),
            "planted_copies": planted_copy_counts(spec),
        }
        text = json.dumps(manifest, sort_keys=True, indent=2) + "\n"
        _write_file(_out_path(args.manifest),
                    lambda p: p.write_text(text, encoding="utf-8"))
    print(f"generated {len(y)} symbols over {y.alphabet.symbols!r} "
          f"with {len(feats)} features", file=sys.stderr)
    return 0


def cmd_sweep(args) -> int:
    if args.index:
        index = SuffixIndex.load(args.index)
    else:
        y = _load_training(args)
        index = SuffixIndex.build(y, args.lmax)
    rows = sweep(index, epsilons=args.epsilon, budgets=args.features_budget,
                 n_windows=args.bigN, ts=args.threshold,
                 avg_mode=args.avg_mode, seed=args.seed)
    config = _config_dict(args, ["training", "index", "format", "lmax", "epsilon",
                                 "bigN", "features_budget", "threshold",
                                 "avg_mode", "seed"])
    header = "epsilon,f,N,T,leaf_count,q,p_delta,bound,pass"
    lines = [f"# config: {json.dumps(config, sort_keys=True)}", header]
    details = [json.dumps({"type": "config", **config}, sort_keys=True)]
    violations = 0
    for row in rows:
        if row["error"] is not None:
            lines.append(f"{row['epsilon']},{row['f']},{row['N']},{row['T']},,,,,"
                         f"error:{row['error']}")
            details.append(json.dumps({"type": "error", "epsilon": str(row["epsilon"]),
                                       "f": row["f"], "N": row["N"], "T": str(row["T"]),
                                       "error": row["error"]}, sort_keys=True))
            continue
        bound = "" if row["bound"] is None else f"{float(row['bound']):.9g}"
        lines.append(f"{float(row['epsilon']):.9g},{row['f']},{row['N']},"
                     f"{float(row['T']):.9g},{row['leaf_count']},"
                     f"{float(row['q']):.9g},{float(row['p_delta']):.9g},"
                     f"{bound},{row['pass']}")
        if not row["pass"]:
            violations += 1
        details.append(json.dumps({"type": "cell", **row["report"].to_json_dict(),
                                   "leaf_count": row["leaf_count"]}, sort_keys=True))
    text = "\n".join(lines) + "\n"
    if args.out:
        _write_file(_out_path(args.out), lambda p: p.write_text(text, encoding="utf-8"))
    else:
        sys.stdout.write(text)
    if args.details:
        _write_file(_out_path(args.details),
                    lambda p: p.write_text("\n".join(details) + "\n", encoding="utf-8"))
    print(f"sweep: {len(rows)} cells, {violations} bound violations", file=sys.stderr)
    return 0


# -- parser -------------------------------------------------------------------

def _add_common_out(sp, required=True):
    sp.add_argument("--out", required=required, default=None,
                    help="output path (resolves under $ACLTREE_OUT if relative)")


def _build_parser() -> _Parser:
    parser = _Parser(prog="acltree", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="build a context-count index from a training sequence")
    p.add_argument("--training", required=True)
    p.add_argument("--format", choices=["plain", "fasta"], default="plain")
    p.add_argument("--lmax", type=int, default=None)
    _add_common_out(p)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("compact", help="prune an index into a compacted tree")
    p.add_argument("--index", required=True)
    p.add_argument("--epsilon", type=_fraction, required=True)
    p.add_argument("--bigN", type=int, required=True, help="test-sequence length N")
    p.add_argument("--features-budget", type=int, required=True, help="feature budget f")
    p.add_argument("--text", action="store_true", help="write the diffable text form")
    p.add_argument("--no-train-stats", action="store_true",
                   help="skip embedding training averages in the artifact")
    _add_common_out(p)
    p.set_defaults(func=cmd_compact)

    for name, fn in (("score", cmd_score), ("filter", cmd_filter), ("sort", cmd_sort)):
        p = sub.add_parser(name, help=f"{name} test sequences against a base")
        p.add_argument("--base", required=True, help="index or tree file")
        p.add_argument("--tests", required=True, nargs="+")
        p.add_argument("--format", choices=["plain", "fasta"], default="fasta")
        p.add_argument("--threshold", type=_fraction, default=Fraction(0))
        p.add_argument("--avg-mode", choices=["matched", "all"], default="matched")
        p.add_argument("--threads", type=int, default=1)
        _add_common_out(p, required=False)
        p.set_defaults(func=fn)

    p = sub.add_parser("eval", help="full-vs-compacted sliding-window evaluation")
    p.add_argument("--training", default=None)
    p.add_argument("--index", default=None)
    p.add_argument("--format", choices=["plain", "fasta"], default="plain")
    p.add_argument("--lmax", type=int, default=None)
    p.add_argument("--epsilon", type=_fraction, required=True)
    p.add_argument("--bigN", type=int, required=True)
    p.add_argument("--features-budget", type=int, required=True)
    p.add_argument("--threshold", type=_fraction, default=Fraction(0))
    p.add_argument("--avg-mode", choices=["matched", "all"], default="matched")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--details", default=None, help="write per-window JSON lines here")
    _add_common_out(p, required=False)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gen", help="generate a synthetic corpus with planted features")
    p.add_argument("--alphabet-size", type=int, default=4)
    p.add_argument("--length", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--features", default=None, help="comma-separated explicit features")
    p.add_argument("--feature-count", type=int, default=4)
    p.add_argument("--feature-len", type=_int_list, default=[3, 8], metavar="MIN,MAX")
    p.add_argument("--density", type=float, default=0.3)
    p.add_argument("--background", choices=["iid", "mix"], default="iid")
    p.add_argument("--mix-rate", type=float, default=0.05)
    p.add_argument("--manifest", default=None)
    _add_common_out(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("sweep", help="window_eval over a parameter grid, CSV out")
    p.add_argument("--training", default=None)
    p.add_argument("--index", default=None)
    p.add_argument("--format", choices=["plain", "fasta"], default="plain")
    p.add_argument("--lmax", type=int, default=None)
    p.add_argument("--epsilon", type=_fraction_list, required=True)
    p.add_argument("--bigN", type=_int_list, required=True)
    p.add_argument("--features-budget", type=_int_list, required=True)
    p.add_argument("--threshold", type=_fraction_list, default=[Fraction(0)])
    p.add_argument("--avg-mode", choices=["matched", "all"], default="matched")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--details", default=None)
    _add_common_out(p, required=False)
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help and friends
        return 0 if exc.code in (0, None) else 1
    try:
        if getattr(args, "training", None) is None and getattr(args, "index", "") is None:
            raise UsageError("one of --training or --index is required")
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (OSError, json.JSONDecodeError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2
    except FormatError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    except (AclTreeError, AssertionError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
