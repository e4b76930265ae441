"""Alphabets, symbol sequences, backward contexts and sliding windows.

Conventions used throughout the package:

* Symbols are single characters; codes are dense integers ``[0, A)`` stored
  in uint8 arrays (alphabet size is capped at 256).
* Public position arguments are 1-based, matching the usual notation for
  training/test sequences; internally everything is 0-based.
* A *context* of length ``j`` at position ``i`` is the string read
  backwards: ``(s_i, s_{i-1}, ..., s_{i-j+1})``.  All matching in this
  package uses this backward orientation.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, TextIO

import numpy as np

from .errors import AlphabetError, FormatError

MAX_ALPHABET = 256


class Alphabet:
    """An ordered set of distinct single-character symbols with dense codes."""

    __slots__ = ("symbols", "_code_of")

    def __init__(self, symbols: Iterable[str]):
        syms = list(symbols)
        if len(syms) != len(set(syms)):
            raise AlphabetError("alphabet contains duplicate symbols")
        if any(len(s) != 1 for s in syms):
            raise AlphabetError("alphabet symbols must be single characters")
        if len(syms) < 2:
            raise AlphabetError(f"alphabet needs at least 2 symbols, got {len(syms)}")
        if len(syms) > MAX_ALPHABET:
            raise AlphabetError(f"alphabet size {len(syms)} exceeds {MAX_ALPHABET}")
        self.symbols: str = "".join(syms)
        self._code_of = {s: k for k, s in enumerate(syms)}

    @classmethod
    def infer(cls, text: str) -> "Alphabet":
        """Alphabet of the distinct symbols in ``text``, in sorted order."""
        return cls(sorted(set(text)))

    @property
    def size(self) -> int:
        return len(self.symbols)

    def __len__(self) -> int:
        return len(self.symbols)

    def __contains__(self, symbol: str) -> bool:
        return symbol in self._code_of

    def __eq__(self, other) -> bool:
        return isinstance(other, Alphabet) and self.symbols == other.symbols

    def __hash__(self) -> int:
        return hash(self.symbols)

    def __repr__(self) -> str:
        return f"Alphabet({self.symbols!r})"

    def code(self, symbol: str) -> int:
        try:
            return self._code_of[symbol]
        except KeyError:
            raise AlphabetError(f"symbol {symbol!r} not in alphabet {self.symbols!r}") from None

    def encode(self, text: str) -> np.ndarray:
        """Encode a string to a uint8 code array; unknown symbols raise."""
        try:
            codes = [self._code_of[c] for c in text]
        except KeyError as exc:
            raise AlphabetError(f"symbol {exc.args[0]!r} not in alphabet {self.symbols!r}") from None
        return np.array(codes, dtype=np.uint8)

    def try_encode(self, text: str) -> np.ndarray | None:
        """Like encode(), but returns None if any symbol is unknown."""
        cof = self._code_of
        if any(c not in cof for c in text):
            return None
        return np.array([cof[c] for c in text], dtype=np.uint8)

    def decode(self, codes: np.ndarray) -> str:
        return "".join(self.symbols[int(c)] for c in codes)


@dataclass(frozen=True)
class Sequence:
    """An immutable symbol sequence over a fixed alphabet.

    Construction validates that every code is below the alphabet size and
    that the sequence is nonempty; the code array is frozen afterwards.
    """

    codes: np.ndarray
    alphabet: Alphabet
    name: str | None = None

    def __post_init__(self):
        if self.codes.ndim != 1 or self.codes.dtype != np.uint8:
            raise AlphabetError("sequence codes must be a 1-d uint8 array")
        if len(self.codes) < 1:
            raise FormatError("sequence must have length >= 1")
        if len(self.codes) and int(self.codes.max()) >= self.alphabet.size:
            raise AlphabetError("sequence contains codes outside the alphabet")
        self.codes.setflags(write=False)

    @classmethod
    def from_text(cls, text: str, alphabet: Alphabet | None = None,
                  name: str | None = None) -> "Sequence":
        if not text:
            raise FormatError("empty sequence text")
        if alphabet is None:
            alphabet = Alphabet.infer(text)
        return cls(alphabet.encode(text), alphabet, name)

    def __len__(self) -> int:
        return len(self.codes)

    def __eq__(self, other) -> bool:
        return (isinstance(other, Sequence) and self.alphabet == other.alphabet
                and np.array_equal(self.codes, other.codes))

    def text(self) -> str:
        return self.alphabet.decode(self.codes)

    def symbol(self, i: int) -> str:
        """Symbol at 1-based position ``i``."""
        if not 1 <= i <= len(self):
            raise IndexError(f"position {i} out of range 1..{len(self)}")
        return self.alphabet.symbols[int(self.codes[i - 1])]


def context_at(s: Sequence, i: int, j: int) -> str:
    """The backward context of length ``j`` ending at 1-based position ``i``.

    Returns the string ``(s_i, s_{i-1}, ..., s_{i-j+1})``; requires
    ``1 <= j <= i <= len(s)`` so the context never runs off the left edge.
    """
    if not 1 <= i <= len(s):
        raise IndexError(f"position {i} out of range 1..{len(s)}")
    if not 1 <= j <= i:
        raise IndexError(f"context length {j} out of range 1..{i} at position {i}")
    return s.alphabet.decode(s.codes[i - j:i][::-1])


def windows(s: Sequence, n: int) -> Iterator[tuple[int, Sequence]]:
    """Slide a length-``n`` window along ``s``.

    Yields exactly ``len(s) - n`` windows ``(start, window)`` with 1-based
    starts ``1 .. len(s) - n``, each window a zero-copy view of ``s``.
    """
    if not 1 <= n < len(s):
        raise FormatError(f"window length {n} must satisfy 1 <= n < {len(s)}")
    base = s.name or "seq"
    for start0 in range(len(s) - n):
        view = s.codes[start0:start0 + n]
        yield start0 + 1, Sequence(view, s.alphabet, f"{base}[{start0 + 1}:{start0 + n}]")


def window_count(s: Sequence, n: int) -> int:
    if not 1 <= n < len(s):
        raise FormatError(f"window length {n} must satisfy 1 <= n < {len(s)}")
    return len(s) - n


# ---------------------------------------------------------------------------
# I/O: plain text (one sequence, whitespace ignored) and FASTA-like files
# (one sequence per '>' record; records are never concatenated).

def _read_records(stream: TextIO) -> list[tuple[str | None, str]]:
    header = None
    chunks: list[str] = []
    records: list[tuple[str | None, str]] = []
    saw_header = False
    for line in stream:
        line = line.strip()
        if not line:
            continue
        if line.startswith(">"):
            if saw_header or chunks:
                records.append((header, "".join(chunks)))
            header = line[1:].split()[0] if len(line) > 1 else ""
            chunks = []
            saw_header = True
        else:
            chunks.append(line)
    if saw_header or chunks:
        records.append((header, "".join(chunks)))
    return records


def parse_sequences(text: str, fmt: str = "plain", alphabet: Alphabet | None = None,
                    default_name: str | None = None) -> list[Sequence]:
    """Parse sequences out of raw text.

    ``fmt='plain'``: whole input is one sequence, whitespace ignored.
    ``fmt='fasta'``: one sequence per record; case-sensitive symbols.
    An explicit ``alphabet`` makes out-of-alphabet symbols an error;
    otherwise each sequence infers its own.
    """
    if fmt == "plain":
        body = "".join(text.split())
        if not body:
            raise FormatError("empty input: no symbols after stripping whitespace")
        return [Sequence.from_text(body, alphabet, default_name)]
    if fmt == "fasta":
        records = _read_records(io.StringIO(text))
        if not records:
            raise FormatError("empty input: no FASTA records")
        out = []
        for k, (header, body) in enumerate(records):
            if not body:
                raise FormatError(f"FASTA record {header!r} has no sequence data")
            out.append(Sequence.from_text(body, alphabet, header or default_name or f"record{k}"))
        return out
    raise FormatError(f"unknown format {fmt!r} (expected 'plain' or 'fasta')")


def load_sequences(source, fmt: str = "plain",
                   alphabet: Alphabet | None = None) -> list[Sequence]:
    """Load sequences from a path or a readable text stream."""
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            text = fh.read()
        default_name = Path(source).name
    else:
        text = source.read()
        default_name = getattr(source, "name", None)
    return parse_sequences(text, fmt, alphabet, default_name)


def load_sequence(source, fmt: str = "plain",
                  alphabet: Alphabet | None = None) -> Sequence:
    """Load exactly one sequence; a multi-record FASTA file is an error."""
    seqs = load_sequences(source, fmt, alphabet)
    if len(seqs) != 1:
        raise FormatError(f"expected exactly one sequence, found {len(seqs)} records")
    return seqs[0]


def write_plain(seq: Sequence, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(seq.text())
        fh.write("\n")


def write_fasta(seqs: Iterable[Sequence], path, width: int = 70) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for k, seq in enumerate(seqs):
            fh.write(f">{seq.name or f'seq{k}'}\n")
            text = seq.text()
            for off in range(0, len(text), width):
                fh.write(text[off:off + width])
                fh.write("\n")
