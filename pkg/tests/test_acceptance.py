"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest -s tests/test_acceptance.py` to see the per-criterion lines.
Criterion 9 builds a 100M-symbol index and takes ~1 minute and ~2.5 GB RAM.
"""

import inspect
import json
import math
import threading
import time
from fractions import Fraction

import numpy as np
import pytest

from acltree import (Alphabet, CompactedTree, FeatureSet, Sequence, SuffixIndex,
                     compact, match_profile, pruned_mass_bound, similarity,
                     train_stats, window_eval)
from acltree.cli import main as cli_main
from acltree.compaction import CompactionParams
from acltree.evaluation import EvalParams, SynthSpec, gen_synthetic

from conftest import PAPER_FEATURES, PAPER_X, PAPER_Y, random_sequence
from oracles import context_counts, match_lengths as oracle_match_lengths


def _report(num: int, name: str, ok: bool, extra: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    tail = f"  ({extra})" if extra else ""
    print(f"\nACCEPTANCE {num} {name}: {status}{tail}", flush=True)


def test_criterion_1_golden_example_reproduction():
    alphabet = Alphabet("ABCDE")
    fs = FeatureSet(PAPER_FEATURES, alphabet)
    x = Sequence.from_text(PAPER_X, alphabet, name="X")
    t0 = time.perf_counter()
    profile = match_profile(fs, x)
    matched = fs.matched_features(x)
    elapsed = time.perf_counter() - t0
    ok = (matched == ["A", "A", "BA", "A", "A"]
          and list(profile.lengths) == [1, 1, 2, 0, 1, 0, 1, 0]
          and elapsed < 1.0)
    _report(1, "golden example reproduction", ok,
            f"features={matched}, profile={list(profile.lengths)}, {elapsed:.3f}s")
    assert matched == ["A", "A", "BA", "A", "A"]
    assert list(profile.lengths) == [1, 1, 2, 0, 1, 0, 1, 0]
    assert elapsed < 1.0


def test_criterion_2_eq1_arithmetic():
    alphabet = Alphabet("ABCDE")
    fs = FeatureSet(PAPER_FEATURES, alphabet)
    y = Sequence.from_text(PAPER_Y, alphabet, name="Y")
    x = Sequence.from_text(PAPER_X, alphabet, name="X")
    stats = train_stats(fs, y)
    report = similarity(fs, stats, x, Fraction(0))
    ok = (stats.l_y == Fraction(7, 5)
          and report.l_x_given_y == Fraction(6, 5)
          and report.d == Fraction(-1, 10))
    _report(2, "Eq.1 exact arithmetic", ok,
            f"L_Y={stats.l_y}, L_X={report.l_x_given_y}, D={report.d}")
    assert stats.l_y == Fraction(7, 5)
    assert report.l_x_given_y == Fraction(6, 5)
    assert report.d == Fraction(-1, 10)


def test_criterion_3_leaf_bound_randomized():
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    cases = 0
    for k in range(210):
        if k % 21 == 0:
            n = int(rng.integers(30_000, 100_001))
        else:
            n = int(rng.integers(50, 5_000))
        a = int(rng.choice([2, 4, 20]))
        y = random_sequence(rng, n, a)
        l_max = int(rng.integers(1, 9 if a < 20 else 5))
        l_max = min(l_max, n - 1)
        index = SuffixIndex.build(y, l_max)
        eps = Fraction(int(rng.integers(1, 100)), 100)
        params = CompactionParams(eps, int(rng.integers(1, 50)),
                                  int(rng.integers(1, 9)))
        tree = compact(index, params)
        bound = math.ceil(params.big_n * params.features_budget / params.epsilon)
        assert tree.leaf_count() <= bound, (n, a, l_max, str(eps), params)
        cases += 1
    elapsed = time.perf_counter() - t0
    ok = cases >= 200 and elapsed < 120
    _report(3, "Theorem-1 leaf bound (randomized)", ok,
            f"{cases} cases, 0 violations, {elapsed:.1f}s")
    assert cases >= 200
    assert elapsed < 120


# Theorem-1 desk-scale corpus.  The grid is tuned (as the criterion allows)
# so every swept min_count sits far below the worst-case context count at
# the chosen depth: background mass floors every context's count, so pruning
# removes only genuinely negligible mass.  Two pinned stress runs use a
# harsher density where the diagnostic is strictly positive yet still under
# epsilon, keeping the check non-vacuous.
_T1_GRID = [
    # (length, l_max, background, seed, density, feature_len, epsilons, budgets)
    (100_000, 5, "iid", 1234, 0.15, (4, 6), ("0.01", "0.05", "0.1"), (2, 4)),
    (100_000, 5, "mix", 1234, 0.15, (4, 6), ("0.01", "0.05", "0.1"), (2, 4)),
    (300_000, 6, "iid", 1234, 0.15, (4, 6), ("0.01", "0.05", "0.1"), (2, 4)),
    (300_000, 6, "mix", 1234, 0.15, (4, 6), ("0.01", "0.05", "0.1"), (2, 4)),
    (1_000_000, 6, "iid", 1234, 0.15, (4, 6), ("0.01", "0.1"), (2,)),
    (1_000_000, 6, "mix", 1234, 0.15, (4, 6), ("0.01", "0.1"), (2,)),
]
_T1_STRESS = [
    (300_000, 6, "iid", 1, 0.3, (3, 6), ("0.1",), (2,)),
    (300_000, 6, "mix", 2, 0.3, (3, 6), ("0.1",), (2,)),
]


def test_criterion_4_theorem1_error_bound_desk_scale():
    t_threshold = Fraction(-1, 200)
    t0 = time.perf_counter()
    runs = 0
    violations = []
    stress_diags = []
    for grid, stress in ((_T1_GRID, False), (_T1_STRESS, True)):
        for length, l_max, background, seed, density, flen, epsilons, budgets in grid:
            spec = SynthSpec(alphabet_size=4, length=length, seed=seed,
                             feature_count=4, feature_len=flen, density=density,
                             background=background)
            y, _ = gen_synthetic(spec)
            index = SuffixIndex.build(y, l_max)
            for eps in epsilons:
                for f in budgets:
                    params = EvalParams(n_window=1000, t=t_threshold,
                                        epsilon=Fraction(eps), features_budget=f,
                                        seed=seed)
                    tree = compact(index, params.compaction)
                    report = window_eval(index, tree, y, params)
                    diagnostic = report.diagnostic_mean
                    assert pruned_mass_bound(index, params.compaction) == diagnostic
                    runs += 1
                    label = (length, background, eps, f, seed)
                    if report.q < Fraction(1, 2):
                        violations.append(("q", label, float(report.q)))
                    if not report.vacuous and report.p_delta > report.bound:
                        violations.append(("p_delta", label, float(report.p_delta)))
                    if diagnostic > params.epsilon:
                        violations.append(("diagnostic", label, float(diagnostic)))
                    if stress:
                        stress_diags.append(diagnostic)
    elapsed = time.perf_counter() - t0
    nonvacuous = all(d > 0 for d in stress_diags)
    ok = not violations and runs >= 24 and nonvacuous and elapsed < 600
    _report(4, "Theorem-1 error bound at desk scale", ok,
            f"{runs} runs, violations={violations}, "
            f"stress diagnostics={[float(d) for d in stress_diags]}, {elapsed:.0f}s")
    assert not violations, violations
    assert runs >= 24
    assert nonvacuous, "stress runs should prune nonzero mass"
    assert elapsed < 600


def test_criterion_5_oracle_equivalence():
    rng = np.random.default_rng(555)
    count_checks = 0
    match_checks = 0
    for case in range(50):
        n = int(rng.integers(2, 2001))
        a = int(rng.integers(2, 5))
        y = random_sequence(rng, n, a)
        l_max = min(8, n - 1) if n > 1 else 1
        l_max = max(1, l_max)
        index = SuffixIndex.build(y, l_max)
        text = y.text()
        counts = context_counts(text, l_max)
        for _ in range(20):
            wl = int(rng.integers(1, l_max + 1))
            if rng.random() < 0.5 and n > wl:
                i = int(rng.integers(wl, n + 1))
                w = text[i - wl:i][::-1]
            else:
                w = "".join(y.alphabet.symbols[c] for c in rng.integers(0, a, wl))
            assert index.count(w) == counts.get(w, 0)
            count_checks += 1
        x = random_sequence(rng, int(rng.integers(5, 60)), a)
        min_count = int(rng.integers(1, 4))
        got = list(index.match_lengths(x, min_count=min_count))
        want = oracle_match_lengths(counts, x.text(), l_max, min_count)
        assert got == want
        match_checks += len(got)
    ok = count_checks >= 1000 and match_checks > 0
    _report(5, "oracle equivalence (count + longest_match)", ok,
            f"{count_checks} count checks, {match_checks} longest_match checks, "
            f"100% agreement")
    assert count_checks >= 1000


def test_criterion_6_universality_and_epsilon_monotonicity():
    # compact() takes no feature-set input at all, and its output is a pure
    # function of (counts, params).
    sig_params = list(inspect.signature(compact).parameters)
    assert sig_params == ["index", "params"]

    rng = np.random.default_rng(66)
    y = random_sequence(rng, 2_000, 4, name="y")
    index = SuffixIndex.build(y, 6)
    params = CompactionParams(Fraction(1, 10), 20, 2)
    before = compact(index, params).leaves()
    FeatureSet(["ABC", "BB"], y.alphabet)          # unrelated feature sets,
    FeatureSet(["DDDD", "CA", "B"], y.alphabet)    # built in between
    after = compact(index, params).leaves()
    universal = before == after

    grid = [Fraction(1, 100), Fraction(3, 100), Fraction(1, 10),
            Fraction(3, 10), Fraction(9, 10)]
    trees = [compact(index, CompactionParams(e, 20, 2)) for e in grid]
    retained = [set(t.retained_strings()) for t in trees]
    nested = all(retained[i + 1] <= retained[i] for i in range(len(grid) - 1))
    strict = retained[-1] < retained[0]  # the grid actually prunes something

    ok = universal and nested and strict
    _report(6, "compaction universality & epsilon monotonicity", ok,
            f"retained sizes along grid: {[len(r) for r in retained]}")
    assert universal
    assert nested
    assert strict


def test_criterion_7_noop_compaction_equivalence():
    rng = np.random.default_rng(70)
    spec = SynthSpec(alphabet_size=4, length=50_000, seed=7, density=0.2)
    y, _ = gen_synthetic(spec)
    index = SuffixIndex.build(y, 6)
    params = EvalParams(n_window=500, t=Fraction(0), epsilon=Fraction(1, 1000),
                        features_budget=4)
    tree = compact(index, params.compaction)
    assert tree.min_count == 1
    stats_index = train_stats(index, y)
    stats_tree = train_stats(tree, y)
    same_decisions = True
    for k in range(100):
        x = random_sequence(rng, int(rng.integers(10, 200)), 4, name=f"t{k}")
        ri = similarity(index, stats_index, x, Fraction(0))
        rt = similarity(tree, stats_tree, x, Fraction(0))
        if (ri.acceptable, ri.d) != (rt.acceptable, rt.d):
            same_decisions = False
            break
    report = window_eval(index, tree, y, params)
    ok = same_decisions and report.p_delta == 0
    _report(7, "no-op compaction equivalence", ok,
            f"100 test sequences identical, p_delta={report.p_delta}")
    assert same_decisions
    assert report.p_delta == 0


def test_criterion_8_determinism_and_persistence(tmp_path):
    # corpora: same seed + config => byte-identical FASTA and manifest
    # (identical argv both times; the echoed config includes the out paths)
    a, ma = tmp_path / "a.fasta", tmp_path / "a.json"
    args = ["gen", "--length", "20000", "--seed", "31", "--density", "0.25",
            "--background", "mix", "--out", str(a), "--manifest", str(ma)]
    assert cli_main(args) == 0
    first = (a.read_bytes(), ma.read_bytes())
    assert cli_main(args) == 0
    corpora_identical = first == (a.read_bytes(), ma.read_bytes())

    # index round-trip: 10^4 sampled queries answered identically
    rng = np.random.default_rng(81)
    y = random_sequence(rng, 30_000, 4, name="y")
    index = SuffixIndex.build(y, 8)
    index_path = tmp_path / "y.aclx"
    index.save(index_path)
    loaded = SuffixIndex.load(index_path)
    text = y.text()
    queries_identical = True
    for _ in range(5_000):
        i = int(rng.integers(1, 30_001))
        j = int(rng.integers(1, min(i, 8) + 1))
        w = text[i - j:i][::-1]
        if loaded.count(w) != index.count(w):
            queries_identical = False
            break
    x = random_sequence(rng, 5_000, 4)
    if not np.array_equal(loaded.match_lengths(x), index.match_lengths(x)):
        queries_identical = False

    # tree round-trip through both forms answers retained/match identically
    tree = compact(index, CompactionParams(Fraction(1, 10), 100, 2))
    tpath, xpath = tmp_path / "t.aclt", tmp_path / "t.tsv"
    tree.save_binary(tpath)
    tree.save_text(xpath)
    solo_bin = CompactedTree.load(tpath)
    solo_txt = CompactedTree.load(xpath)
    probe = random_sequence(rng, 2_000, 4)
    tree_identical = (
        np.array_equal(solo_bin.match_lengths(probe), tree.match_lengths(probe))
        and np.array_equal(solo_txt.match_lengths(probe), tree.match_lengths(probe))
        and solo_bin.leaves() == tree.leaves() == solo_txt.leaves())

    # reports: bit-identical across repeated runs
    params = EvalParams(n_window=300, t=Fraction(-1, 100), epsilon=Fraction(1, 20),
                        features_budget=2, seed=31)
    r1 = window_eval(index, tree, y, params).to_json_dict()
    r2 = window_eval(index, tree, y, params).to_json_dict()
    reports_identical = json.dumps(r1, sort_keys=True) == json.dumps(r2, sort_keys=True)

    ok = corpora_identical and queries_identical and tree_identical and reports_identical
    _report(8, "determinism & persistence round-trips", ok,
            f"corpora={corpora_identical} queries={queries_identical} "
            f"tree={tree_identical} reports={reports_identical}")
    assert corpora_identical
    assert queries_identical
    assert tree_identical
    assert reports_identical


# Documented budget for the scale run: the build peak is dominated by the
# packed 8-byte sort key plus the 8-byte argsort output (~17 bytes/symbol
# transient); the resident index is 5 bytes/symbol.  4 GiB leaves ~1.7 GiB
# of headroom over the predicted ~2.3 GiB peak at N' = 1e8.
_SCALE_N = 100_000_000
_SCALE_BUDGET_BYTES = 4 << 30


@pytest.mark.scale
def test_criterion_9_scale_smoke_100m():
    psutil = pytest.importorskip("psutil")
    import os
    proc = psutil.Process(os.getpid())
    peak = [0]
    stop = threading.Event()

    def sample():
        while not stop.is_set():
            peak[0] = max(peak[0], proc.memory_info().rss)
            time.sleep(0.05)

    sampler = threading.Thread(target=sample, daemon=True)
    sampler.start()
    try:
        t0 = time.perf_counter()
        rng = np.random.default_rng(77)
        y = Sequence(rng.integers(0, 4, _SCALE_N, dtype=np.uint8),
                     Alphabet("ACGT"), name="scale")
        t_gen = time.perf_counter() - t0

        t1 = time.perf_counter()
        index = SuffixIndex.build(y, 16)
        t_build = time.perf_counter() - t1

        t2 = time.perf_counter()
        x = Sequence(rng.integers(0, 4, 1_000_000, dtype=np.uint8),
                     Alphabet("ACGT"), name="x")
        lengths = index.match_lengths(x)  # one longest_match per position
        t_query = time.perf_counter() - t2
        assert len(lengths) == 1_000_000
        assert int(lengths.min()) >= 1  # every single symbol occurs in Y
        assert int(lengths.max()) <= 16

        t3 = time.perf_counter()
        params = CompactionParams(Fraction(1, 20), 1000, 4)
        tree = compact(index, params)
        leaf_count = tree.leaf_count()  # leaf-bound invariant asserted inside
        t_compact = time.perf_counter() - t3
        assert leaf_count <= params.leaf_bound
    finally:
        stop.set()
        sampler.join(timeout=2)

    peak_gib = peak[0] / (1 << 30)
    ok = peak[0] <= _SCALE_BUDGET_BYTES
    _report(9, "scale smoke test (N'=1e8)", ok,
            f"gen={t_gen:.1f}s build={t_build:.1f}s queries(1e6)={t_query:.1f}s "
            f"compact+leaves={t_compact:.1f}s leaves={leaf_count} "
            f"bound={params.leaf_bound} peak_rss={peak_gib:.2f}GiB "
            f"budget={_SCALE_BUDGET_BYTES / (1 << 30):.0f}GiB")
    assert peak[0] <= _SCALE_BUDGET_BYTES, f"peak RSS {peak_gib:.2f} GiB over budget"
