"""Sliding-window evaluation harness and synthetic corpus generation.

The harness slides every length-N window along the training sequence,
scores each window as a standalone test sequence under a reference base and
a candidate base, and reports:

* ``q``       -- fraction of windows the reference base accepts,
* ``p_delta`` -- fraction of those that the candidate rejects,
* ``bound``   -- epsilon / q, which the compaction guarantee says p_delta
                 must not exceed,
* the counting diagnostic: mean number of in-window positions whose match
  shortens under the candidate (asserted against epsilon upstream).

Everything is exact: q, p_delta and the bound are fractions, and window
decisions are made by integer comparisons equivalent to the fraction test
(with an automatic fallback to per-window fractions if magnitudes could
overflow int64).  Reports are bit-identical across runs for a fixed seed
and parameter set.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .classify import FeatureSet, avg_train_length
from .compaction import CompactionParams, compact, window_divergence_counts
from .errors import FormatError, UndefinedAverageError
from .sequences import Alphabet, Sequence

_INT64_GUARD = 1 << 62


@dataclass(frozen=True)
class EvalParams:
    """Window length, decision threshold and compaction settings for one run."""

    n_window: int
    t: Fraction
    epsilon: Fraction
    features_budget: int
    avg_mode: str = "matched"
    record_windows: bool = False
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "t", Fraction(self.t))
        object.__setattr__(self, "epsilon", Fraction(self.epsilon))
        if self.n_window < 1:
            raise ValueError("window length must be >= 1")

    @property
    def compaction(self) -> CompactionParams:
        return CompactionParams(self.epsilon, self.n_window, self.features_budget)


@dataclass
class EvalReport:
    window_count: int
    accepted_ref: int
    flips: int
    q: Fraction
    p_delta: Fraction
    bound: Fraction | None
    passed: bool
    vacuous: bool
    diagnostic_mean: Fraction
    l_y_ref: Fraction | None
    l_y_cand: Fraction | None
    params: EvalParams
    min_count_cand: int | None = None
    leaf_count: int | None = None
    windows: dict | None = field(default=None, repr=False)

    def to_json_dict(self) -> dict:
        def pair(v):
            return None if v is None else [float(v), str(v)]

        out = {
            "window_count": self.window_count,
            "accepted_ref": self.accepted_ref,
            "flips": self.flips,
            "q": pair(self.q),
            "p_delta": pair(self.p_delta),
            "bound": pair(self.bound),
            "pass": self.passed,
            "vacuous": self.vacuous,
            "diagnostic_mean": pair(self.diagnostic_mean),
            "L_Y_ref": pair(self.l_y_ref),
            "L_Y_cand": pair(self.l_y_cand),
            "N": self.params.n_window,
            "T": pair(self.params.t),
            "epsilon": pair(self.params.epsilon),
            "features_budget": self.params.features_budget,
            "avg_mode": self.params.avg_mode,
            "seed": self.params.seed,
        }
        if self.min_count_cand is not None:
            out["min_count_cand"] = self.min_count_cand
        if self.leaf_count is not None:
            out["leaf_count"] = self.leaf_count
        return out


def window_profile_sums(g: np.ndarray, n_window: int, l_max: int) -> tuple[np.ndarray, np.ndarray]:
    """Matched totals and matched counts for every window, from global lengths.

    The in-window match at 1-based offset ``i`` is ``min(g[p], i)``; offsets
    past ``l_max`` never clip (g <= l_max), so totals decompose into one
    cumulative-sum bulk plus ``l_max - 1`` shifted edge passes.  A position
    is matched in-window iff it is matched globally.
    """
    n = len(g)
    w = n - n_window
    if w <= 0:
        raise FormatError("window length must be smaller than the sequence")
    sums = np.zeros(w, dtype=np.int64)
    if n_window >= l_max:
        cg = np.concatenate([[0], np.cumsum(g, dtype=np.int64)])
        sums += cg[n_window:n_window + w] - cg[l_max - 1:l_max - 1 + w]
    for e in range(min(l_max - 1, n_window)):
        sums += np.minimum(g[e:e + w], e + 1).astype(np.int64)
    ind = np.concatenate([[0], np.cumsum((g >= 1).astype(np.int64))])
    ms = ind[n_window:n_window + w] - ind[:w]
    return sums, ms


def window_accept_mask(sums: np.ndarray, ms: np.ndarray, l_y: Fraction | None,
                       t: Fraction, l_max: int, n_window: int,
                       avg_mode: str = "matched") -> np.ndarray:
    """Acceptance decision per window, exactly D > T.

    D > T  <=>  total/m > T*l_max + L_Y, compared as integers.  ``l_y=None``
    (an undefined training average) rejects everything.
    """
    if l_y is None:
        return np.zeros(len(sums), dtype=bool)
    rhs = Fraction(t) * l_max + l_y
    num, den = rhs.numerator, rhs.denominator
    denom_counts = ms if avg_mode == "matched" else np.full_like(ms, n_window)
    max_sum = int(n_window) * int(l_max)
    if abs(num) * int(n_window) < _INT64_GUARD and abs(den) * max_sum < _INT64_GUARD:
        mask = sums * den > denom_counts * num
    else:
        mask = np.fromiter((int(s) * den > int(m) * num
                            for s, m in zip(sums, denom_counts)),
                           dtype=bool, count=len(sums))
    if avg_mode == "matched":
        mask &= ms > 0
    return mask


def _train_average(g: np.ndarray, avg_mode: str) -> Fraction | None:
    total = int(g.sum())
    if avg_mode == "matched":
        m = int(np.count_nonzero(g))
        return Fraction(total, m) if m else None
    return Fraction(total, len(g))


def window_eval(ref_base, cand_base, y: Sequence, params: EvalParams) -> EvalReport:
    """Slide all N'-N windows of ``y``; measure the candidate against the reference.

    Both bases must be built over the same training sequence and depth cap.
    ``q = 0`` produces a vacuous, flagged report instead of an error.
    """
    if ref_base.match_cap != cand_base.match_cap:
        raise FormatError(f"mismatched bases: caps {ref_base.match_cap} != {cand_base.match_cap}")
    if getattr(ref_base, "alphabet", None) != getattr(cand_base, "alphabet", None):
        raise FormatError("mismatched bases: different alphabets")
    n = len(y)
    n_window = params.n_window
    if n_window >= n:
        raise FormatError(f"window length {n_window} must be < N' = {n}")
    l_max = ref_base.match_cap
    w = n - n_window

    g_ref = np.asarray(ref_base.match_lengths(y))
    g_cand = np.asarray(cand_base.match_lengths(y))
    l_y_ref = _train_average(g_ref, params.avg_mode)
    l_y_cand = _train_average(g_cand, params.avg_mode)

    sums_ref, ms_ref = window_profile_sums(g_ref, n_window, l_max)
    sums_cand, ms_cand = window_profile_sums(g_cand, n_window, l_max)
    accept_ref = window_accept_mask(sums_ref, ms_ref, l_y_ref, params.t,
                                    l_max, n_window, params.avg_mode)
    accept_cand = window_accept_mask(sums_cand, ms_cand, l_y_cand, params.t,
                                     l_max, n_window, params.avg_mode)

    divergence = window_divergence_counts(g_ref, g_cand, n_window, l_max)
    accepted = int(accept_ref.sum())
    flip_mask = accept_ref & ~accept_cand
    flips = int(flip_mask.sum())
    q = Fraction(accepted, w)
    vacuous = accepted == 0
    p_delta = Fraction(0) if vacuous else Fraction(flips, accepted)
    bound = None if vacuous else params.epsilon / q
    passed = True if vacuous else p_delta <= bound

    windows = None
    if params.record_windows:
        windows = {
            "start": np.arange(1, w + 1, dtype=np.int64),
            "sum_ref": sums_ref, "m_ref": ms_ref,
            "sum_cand": sums_cand, "m_cand": ms_cand,
            "accept_ref": accept_ref, "accept_cand": accept_cand,
            "flipped": flip_mask,
            "divergent_positions": divergence,
        }

    return EvalReport(
        window_count=w, accepted_ref=accepted, flips=flips, q=q,
        p_delta=p_delta, bound=bound, passed=passed, vacuous=vacuous,
        diagnostic_mean=Fraction(int(divergence.sum()), w),
        l_y_ref=l_y_ref, l_y_cand=l_y_cand, params=params,
        min_count_cand=getattr(cand_base, "min_count", None),
        windows=windows,
    )


def error_rate(base, y: Sequence, n_window: int, t: Fraction,
               accept_set, avg_mode: str = "matched") -> Fraction:
    """Fraction of the given windows (1-based starts) that ``base`` rejects."""
    starts = sorted(set(int(s) for s in accept_set))
    if not starts:
        raise UndefinedAverageError("error rate undefined for an empty accept set")
    w = len(y) - n_window
    if starts[0] < 1 or starts[-1] > w:
        raise FormatError(f"accept set contains starts outside 1..{w}")
    g = np.asarray(base.match_lengths(y))
    l_max = base.match_cap
    sums, ms = window_profile_sums(g, n_window, l_max)
    try:
        l_y = avg_train_length(base, y, avg_mode)
    except UndefinedAverageError:
        l_y = None
    accept = window_accept_mask(sums, ms, l_y, t, l_max, n_window, avg_mode)
    idx = np.array(starts, dtype=np.int64) - 1
    rejected = int(np.count_nonzero(~accept[idx]))
    return Fraction(rejected, len(starts))


# ---------------------------------------------------------------------------
# Synthetic corpora with planted features.

@dataclass(frozen=True)
class SynthSpec:
    """Recipe for a synthetic training sequence with planted features.

    ``density`` is the fraction of symbols that belong to planted feature
    copies; the rest is background, either i.i.d. uniform or "mix"
    (i.i.d. runs interleaved with copies of random earlier blocks, which
    creates repeat structure).  Feature strings are in backward-context
    orientation, so each planted copy is written reversed into the symbol
    stream and is then found by backward matching.
    """

    alphabet_size: int
    length: int
    seed: int
    features: tuple[str, ...] | None = None
    feature_count: int = 4
    feature_len: tuple[int, int] = (3, 8)
    density: float = 0.3
    background: str = "iid"
    mix_rate: float = 0.05
    mix_block: tuple[int, int] = (4, 20)

    def __post_init__(self):
        if self.alphabet_size < 2 or self.alphabet_size > 64:
            raise FormatError("alphabet size must be in 2..64")
        if self.length < 2:
            raise FormatError("length must be >= 2")
        if not 0 <= self.density <= 1:
            raise FormatError(f"density {self.density} out of range [0, 1]")
        if self.background not in ("iid", "mix"):
            raise FormatError(f"unknown background mode {self.background!r}")
        if self.features is not None:
            object.__setattr__(self, "features", tuple(self.features))


_SYMBOLS = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/"


def _synth_alphabet(size: int) -> Alphabet:
    return Alphabet(_SYMBOLS[:size])


def _gen_features(spec: SynthSpec, rng: np.random.Generator, alphabet: Alphabet) -> list[str]:
    if spec.features is not None:
        for f in spec.features:
            if len(f) > spec.length:
                raise FormatError(f"feature {f!r} longer than the sequence")
            for ch in f:
                if ch not in alphabet:
                    raise FormatError(f"feature symbol {ch!r} outside alphabet")
        return list(spec.features)
    lo, hi = spec.feature_len
    if lo < 1 or hi < lo:
        raise FormatError(f"bad feature length range {spec.feature_len}")
    if hi > spec.length:
        raise FormatError("feature length range exceeds the sequence length")
    out: set[str] = set()
    while len(out) < spec.feature_count:
        ln = int(rng.integers(lo, hi + 1))
        out.add("".join(alphabet.symbols[c] for c in rng.integers(0, alphabet.size, ln)))
    return sorted(out)


def _background(spec: SynthSpec, rng: np.random.Generator, length: int) -> np.ndarray:
    if length <= 0:
        return np.zeros(0, dtype=np.uint8)
    if spec.background == "iid":
        return rng.integers(0, spec.alphabet_size, length, dtype=np.uint8)
    lo, hi = spec.mix_block
    parts: list[np.ndarray] = []
    done = 0
    buf = np.zeros(0, dtype=np.uint8)
    while done < length:
        run = int(rng.geometric(min(max(spec.mix_rate, 1e-9), 1.0)))
        parts.append(rng.integers(0, spec.alphabet_size, run, dtype=np.uint8))
        done += run
        if done >= length:
            break
        buf = np.concatenate(parts)
        bl = int(rng.integers(lo, hi + 1))
        bl = min(bl, len(buf))
        start = int(rng.integers(0, len(buf) - bl + 1))
        parts = [buf, buf[start:start + bl].copy()]
        done = len(buf) + bl
    return np.concatenate(parts)[:length]


def gen_synthetic(spec: SynthSpec) -> tuple[Sequence, FeatureSet]:
    """Deterministically generate (training sequence, ground-truth features).

    Per-feature copy counts are ``floor(density * N' / (f * len))`` so the
    planted symbol budget is split evenly across features.
    """
    rng = np.random.default_rng(spec.seed)
    alphabet = _synth_alphabet(spec.alphabet_size)
    features = _gen_features(spec, rng, alphabet)
    n = spec.length
    f = len(features)

    copies = {}
    planted_total = 0
    for feat in features:
        k = int(spec.density * n / (f * len(feat)))
        copies[feat] = k
        planted_total += k * len(feat)
    if planted_total > n:
        raise FormatError("planted features exceed the sequence length; lower density")

    background = _background(spec, rng, n - planted_total)
    # Each copy is the reversed feature so backward contexts read the feature.
    blocks = []
    for feat in features:
        block = alphabet.encode(feat)[::-1]
        blocks.extend([block] * copies[feat])
    order = rng.permutation(len(blocks)) if blocks else []
    offsets = np.sort(rng.integers(0, len(background) + 1, len(blocks)))

    parts = []
    prev = 0
    for k, block_idx in enumerate(order):
        off = int(offsets[k])
        parts.append(background[prev:off])
        parts.append(blocks[int(block_idx)])
        prev = off
    parts.append(background[prev:])
    codes = np.concatenate(parts) if parts else background
    assert len(codes) == n
    y = Sequence(codes.astype(np.uint8), alphabet, name=f"synthetic-{spec.seed}")
    return y, FeatureSet(features, alphabet)


def planted_copy_counts(spec: SynthSpec) -> dict[str, int]:
    """The copy counts gen_synthetic plants, without generating the sequence."""
    rng = np.random.default_rng(spec.seed)
    alphabet = _synth_alphabet(spec.alphabet_size)
    features = _gen_features(spec, rng, alphabet)
    f = len(features)
    return {feat: int(spec.density * spec.length / (f * len(feat))) for feat in features}


# ---------------------------------------------------------------------------
# Parameter sweeps.

def sweep(index, *, epsilons, budgets, n_windows, ts,
          avg_mode: str = "matched", seed: int | None = None,
          count_leaves: bool = True) -> list[dict]:
    """One window_eval per grid cell; per-cell failures are recorded, not raised."""
    y = index.training_sequence()
    rows = []
    for eps in epsilons:
        for f in budgets:
            for n_window in n_windows:
                for t in ts:
                    row = {"epsilon": Fraction(eps), "f": int(f),
                           "N": int(n_window), "T": Fraction(t),
                           "seed": seed, "error": None}
                    try:
                        params = EvalParams(n_window=int(n_window), t=Fraction(t),
                                            epsilon=Fraction(eps), features_budget=int(f),
                                            avg_mode=avg_mode, seed=seed)
                        tree = compact(index, params.compaction)
                        report = window_eval(index, tree, y, params)
                        row.update({
                            "leaf_count": tree.leaf_count() if count_leaves else None,
                            "min_count": tree.min_count,
                            "q": report.q, "p_delta": report.p_delta,
                            "bound": report.bound, "pass": report.passed,
                            "vacuous": report.vacuous,
                            "diagnostic_mean": report.diagnostic_mean,
                            "report": report,
                        })
                    except Exception as exc:  # record and continue
                        row["error"] = f"{type(exc).__name__}: {exc}"
                    rows.append(row)
    return rows
