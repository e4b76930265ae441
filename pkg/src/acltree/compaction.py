"""Frequency-pruned compaction of the full index into a small suffix tree.

The pruning rule keeps exactly the contexts whose empirical probability
``count(w) / N'`` is at least ``epsilon / (N * f)``; equivalently, whose
count is at least ``min_count = ceil(threshold * N')``.  The rule reads
nothing but counts: it never sees a feature set.  Retained contexts are
prefix-closed (a prefix of a frequent string is at least as frequent), the
maximal ones are the tree's leaves, and because leaves are prefix-free their
probabilities sum to at most 1, which caps the leaf count at ``N * f / epsilon``.

A compacted tree answers the same retained/longest-match queries either
through the index it was pruned from (cheap, reference-style) or standalone
from its exported leaf list (the genuinely small artifact); both give
identical answers.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import FormatError
from .index import SuffixIndex
from .sequences import Alphabet, Sequence

_TREE_MAGIC = b"ACLTRE1\n"
_TREE_FORMAT_VERSION = 1
_TEXT_PREFIX = "#acltree-tree\t"


@dataclass(frozen=True)
class CompactionParams:
    """Pruning parameters: tolerance, test length, and feature budget."""

    epsilon: Fraction
    big_n: int
    features_budget: int

    def __post_init__(self):
        eps = Fraction(self.epsilon)
        object.__setattr__(self, "epsilon", eps)
        if eps <= 0:
            raise ValueError(f"epsilon must be positive, got {eps}")
        if self.big_n < 1:
            raise ValueError(f"test length N must be >= 1, got {self.big_n}")
        if self.features_budget < 1:
            raise ValueError(f"feature budget must be >= 1, got {self.features_budget}")

    @property
    def threshold(self) -> Fraction:
        """Minimum retained empirical probability, epsilon / (N * f), exact."""
        return self.epsilon / (self.big_n * self.features_budget)

    @property
    def leaf_bound(self) -> int:
        """ceil(N * f / epsilon), the guaranteed cap on leaf count."""
        return math.ceil(self.big_n * self.features_budget / self.epsilon)

    def min_count(self, n_train: int) -> int:
        """Smallest count c with c / n_train >= threshold."""
        return math.ceil(self.threshold * n_train)


def threshold(params: CompactionParams) -> Fraction:
    return params.threshold


class CompactedTree:
    """The pruned context tree: retained-set and longest-match queries.

    Backed either by the source index plus ``min_count`` or, after loading an
    exported artifact, by a trie of the leaf strings alone.
    """

    def __init__(self, alphabet: Alphabet, n_train: int, l_max: int,
                 params: CompactionParams, min_count: int,
                 index: SuffixIndex | None = None,
                 leaf_data: list[tuple[str, int]] | None = None,
                 warnings: tuple[str, ...] = (),
                 train_stats: dict[str, Fraction | None] | None = None):
        if index is None and leaf_data is None:
            raise ValueError("tree needs an index or a leaf list")
        self.alphabet = alphabet
        self.n_train = n_train
        self.l_max = l_max
        self.params = params
        self.min_count = min_count
        self.warnings = warnings
        self.train_stats = train_stats or {}
        self._index = index
        self._leaf_data = leaf_data
        self._trie: dict | None = None

    # -- queries ------------------------------------------------------------

    @property
    def match_cap(self) -> int:
        return self.l_max

    @property
    def standalone(self) -> bool:
        return self._index is None

    @property
    def source_index(self) -> SuffixIndex:
        if self._index is None:
            raise FormatError("standalone tree has no source index")
        return self._index

    def retained(self, w) -> bool:
        """Whether context ``w`` survived pruning (1 <= |w| <= l_max)."""
        if len(w) == 0 or len(w) > self.l_max:
            return False
        if self._index is not None:
            return self._index.count(w) >= self.min_count
        node = self._ensure_trie()
        text = w if isinstance(w, str) else self.alphabet.decode(np.asarray(w, dtype=np.uint8))
        for ch in text:
            code = self.alphabet._code_of.get(ch)
            if code is None or code not in node:
                return False
            node = node[code]
        return True

    def longest_match(self, x, i: int, cap: int | None = None) -> int:
        if self._index is not None:
            return self._index.longest_match(x, i, self.min_count, cap)
        lengths = self.match_lengths(x, cap)
        if not 1 <= i <= len(lengths):
            raise IndexError(f"position {i} out of range 1..{len(lengths)}")
        return int(lengths[i - 1])

    def match_lengths(self, x, cap: int | None = None) -> np.ndarray:
        """Per-position longest retained context along ``x``."""
        if self._index is not None:
            return self._index.match_lengths(x, self.min_count, cap)
        cap = self.l_max if cap is None else cap
        trie = self._ensure_trie()
        codes = self._aligned_codes(x)
        n = len(codes)
        out = np.zeros(n, dtype=np.int32)
        for p in range(n):
            node = trie
            depth = 0
            limit = min(p + 1, cap)
            while depth < limit:
                c = codes[p - depth]
                if c not in node:
                    break
                node = node[c]
                depth += 1
            out[p] = depth
        return out

    def _aligned_codes(self, x):
        if isinstance(x, Sequence):
            if x.alphabet == self.alphabet:
                return [int(c) for c in x.codes]
            return [self.alphabet._code_of.get(ch, -1) for ch in x.text()]
        return [int(c) for c in np.asarray(x)]

    def _ensure_trie(self) -> dict:
        if self._trie is None:
            trie: dict = {}
            for text, _count in self.leaves():
                node = trie
                for ch in text:
                    node = node.setdefault(self.alphabet.code(ch), {})
            self._trie = trie
        return self._trie

    # -- leaves ---------------------------------------------------------------

    def leaves(self) -> list[tuple[str, int]]:
        """Maximal retained contexts with their counts, lexicographic order.

        Enumerated lazily from the index on first use (a DFS over suffix-array
        intervals); the leaf-bound invariant is asserted here on every
        enumeration.
        """
        if self._leaf_data is None:
            self._leaf_data = _enumerate_leaves(self._index, self.min_count)
            if len(self._leaf_data) > self.params.leaf_bound:
                raise AssertionError(
                    f"leaf bound violated: {len(self._leaf_data)} leaves > "
                    f"ceil(N*f/eps) = {self.params.leaf_bound}")
        return self._leaf_data

    def leaf_count(self) -> int:
        return len(self.leaves())

    def retained_strings(self) -> list[str]:
        """Every retained context (prefixes of leaves); small trees only."""
        out = set()
        for text, _ in self.leaves():
            for j in range(1, len(text) + 1):
                out.add(text[:j])
        return sorted(out)

    # -- persistence ----------------------------------------------------------

    def _header(self, extra_config: dict | None = None) -> dict:
        header = {
            "format_version": _TREE_FORMAT_VERSION,
            "alphabet": self.alphabet.symbols,
            "n_train": self.n_train,
            "l_max": self.l_max,
            "big_n": self.params.big_n,
            "epsilon": str(self.params.epsilon),
            "features_budget": self.params.features_budget,
            "min_count": self.min_count,
            "leaf_count": self.leaf_count(),
            "warnings": list(self.warnings),
            "train_stats": {mode: (str(v) if v is not None else None)
                            for mode, v in self.train_stats.items()},
        }
        if extra_config:
            header["config"] = extra_config
        return header

    def save_text(self, path, config: dict | None = None) -> None:
        """Canonical diffable form: header line, then one `leaf\\tcount` row."""
        if any(ch.isspace() for ch in self.alphabet.symbols):
            raise FormatError("text export needs non-whitespace alphabet symbols")
        header = json.dumps(self._header(config), sort_keys=True, separators=(",", ":"))
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(_TEXT_PREFIX + header + "\n")
            for text, count in self.leaves():
                fh.write(f"{text}\t{count}\n")

    def save_binary(self, path, config: dict | None = None) -> None:
        blob = json.dumps(self._header(config), sort_keys=True,
                          separators=(",", ":")).encode()
        with open(path, "wb") as fh:
            fh.write(_TREE_MAGIC)
            fh.write(struct.pack("<I", len(blob)))
            fh.write(blob)
            for text, count in self.leaves():
                codes = self.alphabet.encode(text)
                fh.write(struct.pack("<H", len(codes)))
                fh.write(codes.tobytes())
                fh.write(struct.pack("<Q", count))

    @classmethod
    def _from_loaded(cls, header: dict, leaf_data: list[tuple[str, int]]) -> "CompactedTree":
        params = CompactionParams(Fraction(header["epsilon"]), int(header["big_n"]),
                                  int(header["features_budget"]))
        stats = {mode: (Fraction(v) if v is not None else None)
                 for mode, v in header.get("train_stats", {}).items()}
        return cls(Alphabet(header["alphabet"]), int(header["n_train"]),
                   int(header["l_max"]), params, int(header["min_count"]),
                   leaf_data=leaf_data, warnings=tuple(header.get("warnings", ())),
                   train_stats=stats)

    @classmethod
    def load(cls, path) -> "CompactedTree":
        """Load a standalone tree from either the text or the binary form."""
        with open(path, "rb") as fh:
            magic = fh.read(len(_TREE_MAGIC))
            if magic == _TREE_MAGIC:
                (hlen,) = struct.unpack("<I", fh.read(4))
                header = json.loads(fh.read(hlen).decode())
                if header.get("format_version") != _TREE_FORMAT_VERSION:
                    raise FormatError(f"{path}: unsupported tree format version")
                alphabet = Alphabet(header["alphabet"])
                leaf_data = []
                for _ in range(int(header["leaf_count"])):
                    raw = fh.read(2)
                    if len(raw) < 2:
                        raise FormatError(f"{path}: truncated tree file")
                    (ln,) = struct.unpack("<H", raw)
                    codes = np.frombuffer(fh.read(ln), dtype=np.uint8)
                    (count,) = struct.unpack("<Q", fh.read(8))
                    leaf_data.append((alphabet.decode(codes), int(count)))
                return cls._from_loaded(header, leaf_data)
        with open(path, "r", encoding="utf-8") as fh:
            first = fh.readline()
            if not first.startswith(_TEXT_PREFIX):
                raise FormatError(f"{path}: not an acltree tree file")
            header = json.loads(first[len(_TEXT_PREFIX):])
            if header.get("format_version") != _TREE_FORMAT_VERSION:
                raise FormatError(f"{path}: unsupported tree format version")
            leaf_data = []
            for line in fh:
                line = line.rstrip("\n")
                if not line:
                    continue
                text, count = line.split("\t")
                leaf_data.append((text, int(count)))
            if len(leaf_data) != int(header["leaf_count"]):
                raise FormatError(f"{path}: leaf count mismatch "
                                  f"({len(leaf_data)} rows, header says {header['leaf_count']})")
        return cls._from_loaded(header, leaf_data)


def compact(index: SuffixIndex, params: CompactionParams) -> CompactedTree:
    """Prune ``index`` down to the contexts meeting the params threshold.

    Pure function of (counts, params): no feature set is consulted.  An
    unattainable threshold yields a warning-bearing empty tree rather than an
    error.  O(1); leaves are enumerated on demand.
    """
    min_count = params.min_count(index.n)
    warnings = []
    if params.threshold > 1:
        warnings.append(f"threshold {params.threshold} exceeds 1; tree is empty")
    elif min_count > index.max_symbol_count():
        warnings.append(f"min_count {min_count} exceeds the most frequent symbol "
                        f"({index.max_symbol_count()}); tree is empty")
    return CompactedTree(index.alphabet, index.n, index.l_max, params, min_count,
                         index=index, warnings=tuple(warnings))


def _enumerate_leaves(index: SuffixIndex, min_count: int) -> list[tuple[str, int]]:
    """DFS over suffix-array intervals; a leaf is a retained context with no
    retained extension (or one at the depth cap)."""
    out: list[tuple[str, int]] = []
    size = index.alphabet.size
    l_max = index.l_max
    decode = index.alphabet.symbols

    def children(lo: int, hi: int, depth: int):
        kids = []
        for c in range(size):
            l2, h2 = index.refine(lo, hi, depth, c)
            if h2 - l2 >= min_count:
                kids.append((c, l2, h2))
        return kids

    # stack of (lo, hi, depth, path); children pushed reversed for lex order
    stack = [(c, l2, h2, 1, decode[c]) for c, l2, h2 in
             reversed(children(0, index.n, 0))]
    while stack:
        c, lo, hi, depth, path = stack.pop()
        kids = children(lo, hi, depth) if depth < l_max else []
        if not kids:
            out.append((path, hi - lo))
            continue
        for kc, l2, h2 in reversed(kids):
            stack.append((kc, l2, h2, depth + 1, path + decode[kc]))
    return out


def pruned_mass_bound(index: SuffixIndex, params: CompactionParams) -> Fraction:
    """Average number of positions per N-window where pruning shortens the match.

    This is the computable proxy for a window containing a pruned context:
    a position diverges exactly when its deepest full-index context fell
    under the threshold.  The evaluation harness asserts the returned mean
    against epsilon.
    """
    n_window = params.big_n
    if n_window >= index.n:
        raise FormatError(f"window length {n_window} must be < N' = {index.n}")
    y = index.training_sequence()
    g_full = index.match_lengths(y, min_count=1)
    min_count = params.min_count(index.n)
    if min_count == 1:
        return Fraction(0)
    g_pruned = index.match_lengths(y, min_count=min_count)
    counts = window_divergence_counts(g_full, g_pruned, n_window, index.l_max)
    return Fraction(int(counts.sum()), index.n - n_window)


def window_divergence_counts(g_full: np.ndarray, g_pruned: np.ndarray,
                             n_window: int, l_max: int) -> np.ndarray:
    """Per-window count of positions whose in-window match shortens.

    Window-local match length at in-window 1-based offset ``i`` is
    ``min(g[p], i)`` (contexts cannot cross the window start), so a position
    diverges locally iff ``g_pruned[p] < min(g_full[p], i)``.  Offsets
    ``i >= l_max`` cannot clip anything (g <= l_max), which allows one
    cumulative-sum pass for the bulk plus l_max-1 shifted edge passes.
    """
    n = len(g_full)
    w = n - n_window
    if w <= 0:
        raise FormatError("window length must be smaller than the sequence")
    out = np.zeros(w, dtype=np.int64)
    if n_window >= l_max:
        div = (g_pruned < g_full).astype(np.int64)
        c = np.concatenate([[0], np.cumsum(div)])
        out += c[n_window:n_window + w] - c[l_max - 1:l_max - 1 + w]
    for e in range(min(l_max - 1, n_window)):
        clipped = np.minimum(g_full[e:e + w], e + 1)
        out += g_pruned[e:e + w] < clipped
    return out
