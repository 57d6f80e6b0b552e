"""Reading dependency-parsed corpora and deterministic dataset splitting.

Input files are CoNLL-style: one token per line, tab-separated columns,
blank line between sentences. Column positions are 1-based and configurable;
the defaults match CoNLL-X/CoNLL-U layouts (form=2, pos=5, head=7, deprel=8).
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .errors import DataError

DEFAULT_MAX_LEN = 50


@dataclass(frozen=True)
class ColumnLayout:
    """1-based column positions of the fields we consume."""

    form: int = 2
    pos: int = 5
    head: int = 7
    deprel: int = 8

    def max_column(self) -> int:
        return max(self.form, self.pos, self.head, self.deprel)


@dataclass(frozen=True)
class Token:
    index: int  # 1-based position in the sentence
    form: str
    lower: str
    pos: str
    head: int  # 1-based head position, 0 = root
    deprel: str


@dataclass(frozen=True)
class Sentence:
    id: str  # stable identifier: "<file name>:<first line>-<last line>"
    tokens: tuple[Token, ...]

    def __len__(self) -> int:
        return len(self.tokens)

    def token(self, index: int) -> Token:
        """Token at 1-based position `index`."""
        return self.tokens[index - 1]


class Split(enum.Enum):
    TRAIN = "train"
    VALID = "valid"
    TEST = "test"


@dataclass(frozen=True)
class SplitAssignment:
    """Train/valid/test fractions plus the hash seed that fixes the split."""

    train_frac: float = 0.09
    valid_frac: float = 0.01
    test_frac: float = 0.90
    seed: int = 1

    def __post_init__(self) -> None:
        fracs = (self.train_frac, self.valid_frac, self.test_frac)
        if any(f < 0 or f > 1 for f in fracs):
            raise ValueError(f"split fractions must lie in [0,1]: {fracs}")
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise ValueError(f"split fractions must sum to 1: {fracs}")


@dataclass
class ReadStats:
    """Counts accumulated while reading one or more CoNLL files."""

    sentences: int = 0
    dropped_malformed: int = 0
    dropped_too_long: int = 0
    warnings: list[str] = field(default_factory=list)

    def warn(self, message: str) -> None:
        self.warnings.append(message)


def _hash_unit(seed: int, key: str) -> float:
    """Map (seed, key) to a float in [0, 1), stable across platforms."""
    digest = hashlib.blake2b(f"{seed}:{key}".encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") / 2**64


def assign_split(sentence_id: str, split: SplitAssignment) -> Split:
    """Deterministically assign a sentence id to TRAIN/VALID/TEST.

    Pure function of (id, seed): no global state, and marginal fractions
    converge to the configured ones as the id population grows. Enlarging
    the train fraction with the same seed keeps previous train ids in train.
    """
    u = _hash_unit(split.seed, sentence_id)
    if u < split.train_frac:
        return Split.TRAIN
    if u < split.train_frac + split.valid_frac:
        return Split.VALID
    return Split.TEST


def _parse_block(
    lines: list[tuple[int, str]],
    sentence_id: str,
    columns: ColumnLayout,
) -> Sentence:
    """Parse one blank-line-delimited block. Raises DataError if malformed."""
    tokens = []
    for line_no, line in lines:
        cols = line.split("\t")
        if len(cols) < columns.max_column():
            raise DataError(f"line {line_no}: expected >= {columns.max_column()} columns")
        form = cols[columns.form - 1]
        pos = cols[columns.pos - 1]
        head_text = cols[columns.head - 1]
        deprel = cols[columns.deprel - 1]
        try:
            head = int(head_text)
        except ValueError:
            raise DataError(f"line {line_no}: head column not an integer: {head_text!r}")
        if head < 0:
            raise DataError(f"line {line_no}: negative head {head}")
        if not pos:
            raise DataError(f"line {line_no}: empty POS tag")
        index = len(tokens) + 1
        if head == index:
            raise DataError(f"line {line_no}: token {index} is its own head")
        tokens.append(
            Token(index=index, form=form, lower=form.lower(), pos=pos, head=head, deprel=deprel)
        )
    n = len(tokens)
    if n == 0:
        raise DataError("empty sentence block")
    if not any(t.head == 0 for t in tokens):
        raise DataError("sentence has no root (no token with head 0)")
    for t in tokens:
        if t.head > n:
            raise DataError(f"token {t.index}: head {t.head} out of range (n={n})")
    return Sentence(id=sentence_id, tokens=tuple(tokens))


def read_conll(
    path: str | Path,
    columns: ColumnLayout = ColumnLayout(),
    max_len: int | None = DEFAULT_MAX_LEN,
    stats: ReadStats | None = None,
) -> Iterator[Sentence]:
    """Stream Sentences from a CoNLL-style file.

    Malformed blocks are skipped and recorded in `stats` with the line
    number; sentences longer than `max_len` tokens are dropped (pass
    max_len=None to disable the length filter). An unreadable file is fatal.
    """
    path = Path(path)
    if stats is None:
        stats = ReadStats()
    try:
        handle = path.open("r", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read corpus file {path}: {exc}") from exc

    with handle:
        block: list[tuple[int, str]] = []
        for line_no, raw in enumerate(handle, start=1):
            line = raw.rstrip("\n")
            if line.startswith("#"):
                continue
            if line.strip():
                block.append((line_no, line))
                continue
            if block:
                yield from _finish_block(block, path.name, columns, max_len, stats)
                block = []
        if block:
            yield from _finish_block(block, path.name, columns, max_len, stats)


def _finish_block(
    block: list[tuple[int, str]],
    file_name: str,
    columns: ColumnLayout,
    max_len: int | None,
    stats: ReadStats,
) -> Iterator[Sentence]:
    first, last = block[0][0], block[-1][0]
    sentence_id = f"{file_name}:{first}-{last}"
    try:
        sentence = _parse_block(block, sentence_id, columns)
    except DataError as exc:
        stats.dropped_malformed += 1
        stats.warn(f"{file_name}: dropped block at lines {first}-{last}: {exc}")
        return
    if max_len is not None and len(sentence) > max_len:
        stats.dropped_too_long += 1
        return
    stats.sentences += 1
    yield sentence


def read_corpus(
    paths: Iterable[str | Path],
    columns: ColumnLayout = ColumnLayout(),
    max_len: int | None = DEFAULT_MAX_LEN,
    stats: ReadStats | None = None,
) -> Iterator[Sentence]:
    """Stream Sentences from several files in order."""
    for path in paths:
        yield from read_conll(path, columns=columns, max_len=max_len, stats=stats)


def to_conll(sentence: Sentence, columns: ColumnLayout = ColumnLayout()) -> str:
    """Render a Sentence back to CoNLL columns (unused columns hold "_").

    Reading the result back yields a Sentence with identical tokens.
    """
    width = max(columns.max_column(), columns.form)
    used = {columns.form, columns.pos, columns.head, columns.deprel}
    lines = []
    for t in sentence.tokens:
        cols = ["_"] * width
        if 1 not in used:
            cols[0] = str(t.index)
        cols[columns.form - 1] = t.form
        cols[columns.pos - 1] = t.pos
        cols[columns.head - 1] = str(t.head)
        cols[columns.deprel - 1] = t.deprel
        lines.append("\t".join(cols))
    return "\n".join(lines) + "\n"
