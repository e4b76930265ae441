"""Occurrence-count index over all backward contexts of a training sequence.

The index answers, for any string ``w`` with ``1 <= |w| <= l_max``, how many
positions ``i`` of the training sequence have ``context_at(Y, i, |w|) == w``.
A backward context of ``Y`` is exactly a forward substring of ``reverse(Y)``,
so the index stores the reversed code array together with a suffix array of
it sorted to depth ``l_max`` (ties beyond ``l_max`` keep position order, which
makes the artifact deterministic).  All queries are interval refinements on
that array: extending a context by one symbol shrinks the current suffix-array
interval via two binary searches, so ``count`` walks ``O(|w| log N')`` and
``longest_match`` performs one refinement step per matched symbol.

Query kernels are numba-compiled and release the GIL; a built index is
immutable and safe to share across threads.

Persistence format (little-endian, deterministic bytes)::

    magic  b"ACLIDX1\\n"
    u32    header length in bytes
    bytes  header JSON: {"format_version", "kind", "alphabet", "n", "l_max"}
    bytes  reversed code array  (n bytes, uint8)
    bytes  suffix array         (4n bytes, int32)
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
from numba import njit

from .errors import AlphabetError, DepthExceededError, FormatError
from .sequences import Alphabet, Sequence

DEFAULT_L_MAX = 64
_MAGIC = b"ACLIDX1\n"
_FORMAT_VERSION = 1
_STRUCTURE_KIND = "depth_sorted_suffix_array"

# Sentinel query code: never equal to any alphabet code, so it matches nothing.
FOREIGN = 1 << 15


@njit(nogil=True, cache=True)
def _refine(codes, sa, lo, hi, depth, c):
    """Shrink [lo, hi) to the suffixes whose symbol at ``depth`` equals ``c``.

    Suffixes shorter than depth+1 sort first inside the interval and are
    treated as symbol -1.
    """
    n = codes.shape[0]
    a, b = lo, hi
    while a < b:
        m = (a + b) >> 1
        p = sa[m] + depth
        s = np.int64(codes[p]) if p < n else np.int64(-1)
        if s < c:
            a = m + 1
        else:
            b = m
    new_lo = a
    b = hi
    while a < b:
        m = (a + b) >> 1
        p = sa[m] + depth
        s = np.int64(codes[p]) if p < n else np.int64(-1)
        if s <= c:
            a = m + 1
        else:
            b = m
    return new_lo, a


@njit(nogil=True, cache=True)
def _count_kernel(codes, sa, w):
    lo, hi = np.int64(0), np.int64(sa.shape[0])
    for d in range(w.shape[0]):
        lo, hi = _refine(codes, sa, lo, hi, d, np.int64(w[d]))
        if lo >= hi:
            return np.int64(0)
    return hi - lo


@njit(nogil=True, cache=True)
def _interval_kernel(codes, sa, w):
    lo, hi = np.int64(0), np.int64(sa.shape[0])
    for d in range(w.shape[0]):
        lo, hi = _refine(codes, sa, lo, hi, d, np.int64(w[d]))
        if lo >= hi:
            return np.int64(0), np.int64(0)
    return lo, hi


@njit(nogil=True, cache=True)
def _match_length_at(codes, sa, x, p, cap, min_count):
    # largest j <= min(p+1, cap) with occurrences(context) >= min_count;
    # counts only shrink as the context grows, so stop at the first miss.
    lo, hi = np.int64(0), np.int64(sa.shape[0])
    jmax = p + 1 if p + 1 < cap else cap
    best = 0
    for j in range(1, jmax + 1):
        lo, hi = _refine(codes, sa, lo, hi, j - 1, np.int64(x[p - j + 1]))
        if hi - lo >= min_count:
            best = j
        else:
            break
    return best


@njit(nogil=True, cache=True)
def _match_lengths_kernel(codes, sa, x, cap, min_count):
    out = np.empty(x.shape[0], dtype=np.int32)
    for p in range(x.shape[0]):
        out[p] = _match_length_at(codes, sa, x, p, cap, min_count)
    return out


@dataclass(frozen=True)
class EmpiricalProb:
    """Occurrence count over training length, kept exact."""

    count: int
    total: int

    @property
    def value(self) -> Fraction:
        return Fraction(self.count, self.total)

    def __float__(self) -> float:
        return self.count / self.total


def _pack_keys(codes_rev: np.ndarray, alphabet_size: int, l_max: int) -> list[np.ndarray]:
    """Pack the first ``l_max`` symbols of every suffix into uint64 sort keys.

    Symbol values are shifted by +1 so that 0 marks past-the-end, which makes
    shorter suffixes sort before their extensions.
    """
    n = len(codes_rev)
    bits = int(alphabet_size).bit_length()
    per_word = 64 // bits
    ext_dtype = np.uint16 if alphabet_size >= 256 else np.uint8
    ext = np.zeros(n + l_max, dtype=ext_dtype)
    ext[:n] = codes_rev
    ext[:n] += 1
    words = []
    for w in range((l_max + per_word - 1) // per_word):
        key = np.zeros(n, dtype=np.uint64)
        for t in range(w * per_word, min((w + 1) * per_word, l_max)):
            key <<= np.uint64(bits)
            key |= ext[t:t + n].astype(np.uint64)
        # left-align a partial last word so it compares like the others
        short = per_word - (min((w + 1) * per_word, l_max) - w * per_word)
        if short:
            key <<= np.uint64(bits * short)
        words.append(key)
    return words


class SuffixIndex:
    """Exact occurrence counts for all backward contexts up to ``l_max``.

    Also serves directly as a classifier base: ``match_lengths`` with the
    default ``min_count=1`` is full-index matching, larger ``min_count``
    values give the pruned behaviour (see the compaction module).
    """

    def __init__(self, alphabet: Alphabet, codes_rev: np.ndarray, sa: np.ndarray,
                 l_max: int):
        self.alphabet = alphabet
        self.n = len(codes_rev)
        self.l_max = l_max
        self._codes_rev = codes_rev
        self._sa = sa
        self._codes_rev.setflags(write=False)
        self._sa.setflags(write=False)
        self._symbol_counts = np.bincount(codes_rev, minlength=alphabet.size)

    # -- construction -------------------------------------------------------

    @classmethod
    def build(cls, y: Sequence, l_max: int | None = None) -> "SuffixIndex":
        """Build the index for training sequence ``y``.

        ``l_max`` defaults to ``min(64, len(y) - 1)`` and must satisfy
        ``1 <= l_max < len(y)``.
        """
        n = len(y)
        if n >= 2 ** 31:
            raise FormatError("training sequence too long for int32 suffix array")
        if l_max is None:
            l_max = min(DEFAULT_L_MAX, n - 1)
        if not 1 <= l_max < n:
            raise FormatError(f"l_max={l_max} out of range 1..{n - 1}")
        codes_rev = y.codes[::-1].copy()
        words = _pack_keys(codes_rev, y.alphabet.size, l_max)
        if len(words) == 1:
            sa = np.argsort(words[0], kind="stable")
        else:
            sa = np.lexsort(tuple(reversed(words)))
        return cls(y.alphabet, codes_rev, sa.astype(np.int32), l_max)

    # -- basic queries ------------------------------------------------------

    @property
    def match_cap(self) -> int:
        return self.l_max

    @property
    def min_count(self) -> int:
        return 1

    def _encode_query(self, w) -> np.ndarray | None:
        """Encode a query string; None when a symbol cannot occur at all."""
        if isinstance(w, str):
            if not w:
                raise ValueError("empty query string")
            codes = self.alphabet.try_encode(w)
            if codes is None:
                return None
            return codes
        w = np.asarray(w)
        if w.size == 0:
            raise ValueError("empty query string")
        return w

    def count(self, w) -> int:
        """Number of positions of Y whose backward context equals ``w``.

        Raises DepthExceededError beyond ``l_max``; a string containing a
        symbol absent from the alphabet simply counts 0.
        """
        length = len(w)
        if length > self.l_max:
            raise DepthExceededError(f"|w|={length} exceeds index depth {self.l_max}")
        codes = self._encode_query(w)
        if codes is None:
            return 0
        return int(_count_kernel(self._codes_rev, self._sa, codes))

    def empirical_prob(self, w) -> EmpiricalProb:
        """count(w) / N' as an exact ratio."""
        return EmpiricalProb(self.count(w), self.n)

    def _aligned_codes(self, x) -> np.ndarray:
        """Test-sequence codes as int32, with foreign symbols made unmatchable."""
        if isinstance(x, Sequence):
            if x.alphabet == self.alphabet:
                return x.codes.astype(np.int32)
            out = np.empty(len(x), dtype=np.int32)
            for k, ch in enumerate(x.text()):
                out[k] = self.alphabet._code_of.get(ch, FOREIGN)
            return out
        return np.asarray(x).astype(np.int32)

    def longest_match(self, x, i: int, min_count: int = 1,
                      cap: int | None = None) -> int:
        """Longest ``j <= min(i, cap)`` whose context at 1-based ``i`` of ``x``
        occurs at least ``min_count`` times in Y; 0 when even ``j=1`` misses."""
        codes = self._aligned_codes(x)
        if not 1 <= i <= len(codes):
            raise IndexError(f"position {i} out of range 1..{len(codes)}")
        cap = self._check_cap(cap)
        if min_count < 1:
            raise ValueError("min_count must be >= 1")
        return int(_match_length_at(self._codes_rev, self._sa, codes, i - 1,
                                    cap, min_count))

    def match_lengths(self, x, min_count: int = 1, cap: int | None = None) -> np.ndarray:
        """longest_match at every position of ``x`` (int32 array)."""
        codes = self._aligned_codes(x)
        cap = self._check_cap(cap)
        if min_count < 1:
            raise ValueError("min_count must be >= 1")
        return _match_lengths_kernel(self._codes_rev, self._sa, codes, cap, min_count)

    def _check_cap(self, cap: int | None) -> int:
        if cap is None:
            return self.l_max
        if not 1 <= cap <= self.l_max:
            raise DepthExceededError(f"cap={cap} out of range 1..{self.l_max}")
        return cap

    def interval(self, w) -> tuple[int, int]:
        """Suffix-array interval of ``w`` (internal face used by compaction)."""
        codes = self._encode_query(w)
        if codes is None:
            return 0, 0
        lo, hi = _interval_kernel(self._codes_rev, self._sa, codes)
        return int(lo), int(hi)

    def refine(self, lo: int, hi: int, depth: int, code: int) -> tuple[int, int]:
        lo2, hi2 = _refine(self._codes_rev, self._sa, lo, hi, depth, code)
        return int(lo2), int(hi2)

    def symbol_count(self, code: int) -> int:
        return int(self._symbol_counts[code])

    def max_symbol_count(self) -> int:
        return int(self._symbol_counts.max())

    def training_sequence(self, name: str | None = "training") -> Sequence:
        """The forward training sequence recovered from the stored codes."""
        return Sequence(self._codes_rev[::-1].copy(), self.alphabet, name)

    # -- persistence --------------------------------------------------------

    def save(self, path, config: dict | None = None) -> None:
        header = {
            "format_version": _FORMAT_VERSION,
            "kind": _STRUCTURE_KIND,
            "alphabet": self.alphabet.symbols,
            "n": self.n,
            "l_max": self.l_max,
        }
        if config:
            header["config"] = config
        blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<I", len(blob)))
            fh.write(blob)
            fh.write(self._codes_rev.tobytes())
            fh.write(self._sa.astype("<i4").tobytes())

    @classmethod
    def load(cls, path, expected_alphabet: Alphabet | None = None) -> "SuffixIndex":
        with open(path, "rb") as fh:
            magic = fh.read(len(_MAGIC))
            if magic != _MAGIC:
                raise FormatError(f"{path}: not an acltree index file")
            (hlen,) = struct.unpack("<I", fh.read(4))
            header = json.loads(fh.read(hlen).decode())
            if header.get("format_version") != _FORMAT_VERSION:
                raise FormatError(f"{path}: unsupported index format version "
                                  f"{header.get('format_version')}")
            if header.get("kind") != _STRUCTURE_KIND:
                raise FormatError(f"{path}: unknown index structure {header.get('kind')!r}")
            alphabet = Alphabet(header["alphabet"])
            if expected_alphabet is not None and alphabet != expected_alphabet:
                raise AlphabetError(f"{path}: index alphabet {alphabet.symbols!r} does not "
                                    f"match expected {expected_alphabet.symbols!r}")
            n = int(header["n"])
            codes_rev = np.frombuffer(fh.read(n), dtype=np.uint8)
            sa = np.frombuffer(fh.read(4 * n), dtype="<i4").astype(np.int32)
            if len(codes_rev) != n or len(sa) != n:
                raise FormatError(f"{path}: truncated index file")
        return cls(alphabet, codes_rev.copy(), sa, int(header["l_max"]))


def build_index(y: Sequence, l_max: int | None = None) -> SuffixIndex:
    """Module-level alias for SuffixIndex.build."""
    return SuffixIndex.build(y, l_max)


def build_memory_estimate(n: int, alphabet_size: int, l_max: int) -> dict:
    """Rough byte budget for building and holding an index of length ``n``.

    Build peak is dominated by the packed sort keys (8 bytes per word per
    symbol) plus the argsort output (8 bytes); the resident index afterwards
    is 5 bytes per symbol (codes + int32 suffix array).
    """
    bits = int(alphabet_size).bit_length()
    words = (l_max + (64 // bits) - 1) // (64 // bits)
    return {
        "resident_bytes": 5 * n,
        "build_peak_bytes": n * (8 * words + 8 + 2 + 5),
        "key_words": words,
    }
