"""Average-common-length similarity classification.

A *base* is anything that can report, for every position of a sequence, the
length of the longest backward context it recognizes: a full index, a
compacted tree, or an explicit feature set.  From the per-position lengths
the classifier forms the average matched length over the training sequence
(L_Y) and over a test sequence (L_X), and decides

    D = (L_X - L_Y) / L_max  >  T   =>  acceptable

with all arithmetic exact (fractions end to end; floats only appear when a
report is rendered).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence as PySequence

import numpy as np

from .errors import FormatError, UndefinedAverageError
from .sequences import Alphabet, Sequence

AVG_MODES = ("matched", "all")


class FeatureSet:
    """An explicit set of feature strings, matched as backward contexts.

    Features are stored sorted and deduplicated.  Prefix-freeness and
    full-tree-ness are checked and reported, never enforced: longest-match
    semantics keep matching deterministic either way.
    """

    def __init__(self, features: Iterable[str], alphabet: Alphabet | None = None):
        feats = sorted(set(features))
        if not feats:
            raise FormatError("feature set must be nonempty")
        if any(len(f) == 0 for f in feats):
            raise FormatError("features must have length >= 1")
        self.features: tuple[str, ...] = tuple(feats)
        self.alphabet = alphabet or Alphabet.infer("".join(feats))
        for f in feats:
            for ch in f:
                if ch not in self.alphabet:
                    raise FormatError(f"feature {f!r} uses symbol {ch!r} "
                                      f"outside alphabet {self.alphabet.symbols!r}")
        self.l_max = max(len(f) for f in feats)
        self._trie: dict = {}
        for f in feats:
            node = self._trie
            for ch in f:
                node = node.setdefault(ch, {})
            node[""] = f  # terminal marker, keyed off the empty string

    def __len__(self) -> int:
        return len(self.features)

    def __contains__(self, f: str) -> bool:
        return f in self.features

    def __repr__(self) -> str:
        return f"FeatureSet({list(self.features)!r})"

    @property
    def match_cap(self) -> int:
        return self.l_max

    def prefix_violations(self) -> list[tuple[str, str]]:
        """Pairs (shorter, longer) where one feature is a prefix of another."""
        out = []
        for a, b in zip(self.features, self.features[1:]):
            if b.startswith(a):
                out.append((a, b))
        return out

    @property
    def is_prefix_free(self) -> bool:
        return not self.prefix_violations()

    @property
    def is_full_tree(self) -> bool:
        """Whether the features are exactly the leaves of a full |A|-ary tree."""
        if not self.is_prefix_free:
            return False

        def full(node: dict) -> bool:
            children = [k for k in node if k != ""]
            if not children:
                return True
            if len(children) != self.alphabet.size:
                return False
            return all(full(node[c]) for c in children)

        return full(self._trie)

    def _walk(self, text: str, p: int, cap: int):
        """Longest feature ending backwards at 0-based ``p``, or None."""
        node = self._trie
        best = None
        limit = min(p + 1, cap)
        depth = 0
        while depth < limit:
            node = node.get(text[p - depth])
            if node is None:
                break
            depth += 1
            if "" in node:
                best = node[""]
        return best

    def match_lengths(self, x, cap: int | None = None) -> np.ndarray:
        """Length of the longest feature matching at each position (0 if none)."""
        text = x.text() if isinstance(x, Sequence) else str(x)
        cap = self.l_max if cap is None else min(cap, self.l_max)
        out = np.zeros(len(text), dtype=np.int32)
        for p in range(len(text)):
            best = self._walk(text, p, cap)
            if best is not None:
                out[p] = len(best)
        return out

    def matched_features(self, x, cap: int | None = None) -> list[str]:
        """The longest matching feature at each matched position, in order."""
        text = x.text() if isinstance(x, Sequence) else str(x)
        cap = self.l_max if cap is None else min(cap, self.l_max)
        out = []
        for p in range(len(text)):
            best = self._walk(text, p, cap)
            if best is not None:
                out.append(best)
        return out


@dataclass(frozen=True)
class MatchProfile:
    """Per-position match lengths for one sequence against one base."""

    lengths: np.ndarray

    @property
    def matched_positions(self) -> int:
        return int(np.count_nonzero(self.lengths))

    @property
    def total_length(self) -> int:
        return int(self.lengths.sum())

    def average(self, avg_mode: str = "matched") -> Fraction:
        """Average match length; 'matched' divides by matched positions only."""
        if avg_mode == "matched":
            m = self.matched_positions
            if m == 0:
                raise UndefinedAverageError("no matched positions: average undefined")
            return Fraction(self.total_length, m)
        if avg_mode == "all":
            return Fraction(self.total_length, len(self.lengths))
        raise ValueError(f"unknown avg_mode {avg_mode!r}")


def match_profile(base, s, cap: int | None = None) -> MatchProfile:
    return MatchProfile(base.match_lengths(s, cap=cap))


def avg_train_length(base, y: Sequence, avg_mode: str = "matched") -> Fraction:
    """L(Y): average match length of the base's contexts sliding along Y."""
    return match_profile(base, y).average(avg_mode)


def avg_test_length(base, x: Sequence, avg_mode: str = "matched") -> Fraction:
    """L(X|Y): the same average taken along a test sequence."""
    return match_profile(base, x).average(avg_mode)


@dataclass(frozen=True)
class TrainStats:
    """Precomputed training-side average for a base."""

    l_y: Fraction
    l_max: int
    avg_mode: str = "matched"


def train_stats(base, y: Sequence | None = None, avg_mode: str = "matched") -> TrainStats:
    """Compute L(Y) for ``base``, or recover it from a standalone tree.

    A compacted tree carries its training stats in its artifact, so ``y`` may
    be omitted; everything else needs the training sequence.
    """
    if avg_mode not in AVG_MODES:
        raise ValueError(f"unknown avg_mode {avg_mode!r}")
    if y is None:
        stored = getattr(base, "train_stats", None) or {}
        l_y = stored.get(avg_mode)
        if l_y is None:
            raise UndefinedAverageError(
                f"base carries no stored {avg_mode!r} training stats and no "
                f"training sequence was given")
        return TrainStats(l_y, base.match_cap, avg_mode)
    return TrainStats(avg_train_length(base, y, avg_mode), base.match_cap, avg_mode)


@dataclass(frozen=True)
class SimilarityReport:
    name: str | None
    l_y: Fraction
    l_x_given_y: Fraction | None
    l_max: int
    d: Fraction | None
    t: Fraction
    acceptable: bool
    matched_positions: int
    total_length: int
    no_match: bool = False
    foreign_symbols: bool = False

    def to_json_dict(self) -> dict:
        def frac(v):
            return None if v is None else float(v)

        def exact(v):
            return None if v is None else str(v)

        out = {
            "name": self.name,
            "L_Y": frac(self.l_y), "L_Y_exact": exact(self.l_y),
            "L_X_given_Y": frac(self.l_x_given_y), "L_X_given_Y_exact": exact(self.l_x_given_y),
            "L_max": self.l_max,
            "D": frac(self.d), "D_exact": exact(self.d),
            "T": frac(self.t), "T_exact": exact(self.t),
            "decision": "acceptable" if self.acceptable else "not-acceptable",
            "matched_positions": self.matched_positions,
            "profile_summary": {"matched": self.matched_positions,
                                "total_length": self.total_length},
        }
        if self.no_match:
            out["no_match"] = True
        if self.foreign_symbols:
            out["foreign_symbols"] = True
        return out


def _has_foreign_symbols(base, x) -> bool:
    alpha = getattr(base, "alphabet", None)
    if alpha is None or not isinstance(x, Sequence) or x.alphabet == alpha:
        return False
    return any(ch not in alpha for ch in set(x.text()))


def similarity(base, stats: TrainStats, x: Sequence, t: Fraction) -> SimilarityReport:
    """Score one test sequence: D = (L(X|Y) - L(Y)) / L_max, acceptable iff D > T.

    A test with no recognized context at all cannot have an average in
    'matched' mode; it is reported not-acceptable with ``no_match`` set.
    """
    t = Fraction(t)
    profile = match_profile(base, x, cap=stats.l_max)
    foreign = _has_foreign_symbols(base, x)
    if stats.avg_mode == "matched" and profile.matched_positions == 0:
        return SimilarityReport(x.name, stats.l_y, None, stats.l_max, None, t,
                                acceptable=False,
                                matched_positions=0, total_length=0,
                                no_match=True, foreign_symbols=foreign)
    l_x = profile.average(stats.avg_mode)
    d = Fraction(l_x - stats.l_y, stats.l_max)
    return SimilarityReport(x.name, stats.l_y, l_x, stats.l_max, d, t,
                            acceptable=d > t,
                            matched_positions=profile.matched_positions,
                            total_length=profile.total_length,
                            foreign_symbols=foreign)


def sort_tests(base, stats: TrainStats, tests: PySequence[Sequence],
               t: Fraction = Fraction(0)) -> list[SimilarityReport]:
    """Rank tests by D, descending, stable on ties; unscorable ones sink last."""
    reports = [similarity(base, stats, x, t) for x in tests]
    return sorted(reports, key=lambda r: (1, Fraction(0)) if r.d is None else (0, -r.d))
