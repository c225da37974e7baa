"""Reader for msnbc.com style sequence logs.

Each data row lists the page categories one user requested, in order, as
whitespace separated 1-based integer codes::

    % Different categories found in input file:

    frontpage news tech local ...

    % Sequences:

    1 1
    2
    3 2 2 4 2 2 2 3 3
"""

from __future__ import annotations

import io
import re
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from typing import Iterable, Sequence

__all__ = [
    "MSNBC_CATEGORIES",
    "CategoryDictionary",
    "Session",
    "SessionDataset",
    "DatasetStats",
    "SessionLogError",
    "ParseError",
    "ValidationError",
    "EmptyDatasetError",
    "msnbc_dictionary",
    "parse_log",
    "read_log",
    "format_log",
    "dataset_stats",
    "table1_path",
]

MSNBC_CATEGORIES = (
    "frontpage", "news", "tech", "local", "opinion", "on-air", "misc",
    "weather", "health", "living", "business", "sports", "summary", "bbs",
    "travel", "msn-news", "msn-sports",
)


class SessionLogError(ValueError):
    """Base class for everything that can go wrong reading a log."""

    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ParseError(SessionLogError):
    """A token could not be read as a category code."""


class ValidationError(SessionLogError):
    """A row parsed but violates the dictionary (e.g. code out of range)."""

    def __init__(self, message: str, line: int | None = None,
                 code: int | None = None) -> None:
        self.code = code
        super().__init__(message, line)


class EmptyDatasetError(SessionLogError):
    """The log holds no data rows."""


@dataclass(frozen=True)
class CategoryDictionary:
    """Ordered category names; the code of a name is its 1-based position."""

    names: tuple[str, ...]

    def __post_init__(self) -> None:
        names = tuple(self.names)
        object.__setattr__(self, "names", names)
        if not names:
            raise ValueError("category dictionary is empty")
        if any(not n for n in names):
            raise ValueError("category names must be non-empty")
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise ValueError(f"duplicate category names: {dupes}")

    def __len__(self) -> int:
        return len(self.names)

    def name(self, code: int) -> str:
        if not 1 <= code <= len(self.names):
            raise KeyError(code)
        return self.names[code - 1]

    def code(self, name: str) -> int:
        return self.names.index(name) + 1


def msnbc_dictionary() -> CategoryDictionary:
    """The 17 msnbc.com page categories."""
    return CategoryDictionary(MSNBC_CATEGORIES)


@dataclass(frozen=True)
class Session:
    id: int
    visits: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.visits)


@dataclass(frozen=True)
class SessionDataset:
    dictionary: CategoryDictionary
    sessions: tuple[Session, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "sessions", tuple(self.sessions))
        for expected, s in enumerate(self.sessions, start=1):
            if s.id != expected:
                raise ValueError(f"session ids must run 1..n, got {s.id} at position {expected}")
            if not s.visits:
                raise ValueError(f"session {s.id} has no visits")

    def __len__(self) -> int:
        return len(self.sessions)

    def __iter__(self):
        return iter(self.sessions)

    @property
    def num_categories(self) -> int:
        return len(self.dictionary)

    @property
    def ids(self) -> tuple[int, ...]:
        return tuple(s.id for s in self.sessions)


@dataclass(frozen=True)
class DatasetStats:
    num_sessions: int
    avg_visits: float
    num_categories: int
    length_min: int
    length_max: int
    total_visits: int

    def as_dict(self) -> dict:
        return {
            "num_sessions": self.num_sessions,
            "avg_visits": self.avg_visits,
            "num_categories": self.num_categories,
            "length_min": self.length_min,
            "length_max": self.length_max,
            "total_visits": self.total_visits,
        }


_ROW = re.compile(r"[0-9]+(?:[ \t]+[0-9]+)*", re.ASCII)


def _is_int_token(tok: str) -> bool:
    return tok.isascii() and tok.isdigit()


def _lines(text: str | bytes | Iterable[str]) -> Iterable[str]:
    if isinstance(text, (bytes, bytearray)):
        # latin-1 maps every byte, so decoding never fails
        text = bytes(text).decode("latin-1")
    if isinstance(text, str):
        return io.StringIO(text)
    return text


def _row_codes(stripped: str, lineno: int, ncat: int) -> tuple[int, ...]:
    if _ROW.fullmatch(stripped):
        codes = tuple(map(int, stripped.split()))
        if 1 <= min(codes) and max(codes) <= ncat:
            return codes
    for tok in stripped.split():
        if not _is_int_token(tok):
            raise ParseError(f"not a category code: {tok!r}", lineno)
        code = int(tok)
        if not 1 <= code <= ncat:
            raise ValidationError(f"category code {code} outside 1..{ncat}", lineno, code=code)
    # only reachable for unusual whitespace between valid tokens
    return tuple(int(tok) for tok in stripped.split())


def parse_log(text: str | bytes | Iterable[str],
              dictionary: CategoryDictionary | Sequence[str] | None = None) -> SessionDataset:
    """Parse a sequence log.

    Args:
        text: the log contents, as a string, raw bytes, or an iterable of lines
            (an open text file works).
        dictionary: category names to validate codes against. When ``None``
            the dictionary is read from the file itself: the last non-comment
            line before the first all-integer row.

    Returns:
        SessionDataset with one session per non-blank data row, ids from 1.

    Raises:
        ParseError: a data row holds a non-integer token.
        ValidationError: a code is 0 or exceeds the dictionary size, or no
            embedded dictionary was found.
        EmptyDatasetError: the log contains no data rows.
    """
    external = dictionary is not None
    if external and not isinstance(dictionary, CategoryDictionary):
        dictionary = CategoryDictionary(tuple(dictionary))

    header: list[str] | None = None
    header_line = None
    sessions: list[Session] = []
    ncat = 0
    for lineno, raw in enumerate(_lines(text), start=1):
        stripped = raw.strip()
        if not stripped or stripped[0] == "%":
            continue
        if not sessions:
            tokens = stripped.split()
            if not all(_is_int_token(t) for t in tokens):
                if external and any(_is_int_token(t) for t in tokens):
                    bad = next(t for t in tokens if not _is_int_token(t))
                    raise ParseError(f"not a category code: {bad!r}", lineno)
                header, header_line = tokens, lineno
                continue
            if not external:
                if header is None:
                    raise ValidationError(
                        "no category-name line before the first sequence row; "
                        "supply an external dictionary", lineno)
                try:
                    dictionary = CategoryDictionary(tuple(header))
                except ValueError as exc:
                    raise ValidationError(str(exc), header_line) from None
            ncat = len(dictionary)
        sessions.append(Session(len(sessions) + 1, _row_codes(stripped, lineno, ncat)))

    if not sessions:
        raise EmptyDatasetError("no sequence rows found")
    return SessionDataset(dictionary, tuple(sessions))


def read_log(path, dictionary: CategoryDictionary | Sequence[str] | None = None) -> SessionDataset:
    with open(path, "r", encoding="latin-1", newline=None) as fh:
        return parse_log(fh, dictionary)


def format_log(data: SessionDataset) -> str:
    """Render ``data`` in the canonical msnbc layout; ``parse_log`` inverts it."""
    out = ["% Different categories found in input file:", "",
           " ".join(data.dictionary.names), "", "% Sequences:", ""]
    out.extend(" ".join(map(str, s.visits)) for s in data.sessions)
    return "\n".join(out) + "\n"


def dataset_stats(data: SessionDataset) -> DatasetStats:
    if not data.sessions:
        raise EmptyDatasetError("dataset has no sessions")
    lengths = [len(s.visits) for s in data.sessions]
    total = sum(lengths)
    return DatasetStats(
        num_sessions=len(lengths),
        avg_visits=float(Fraction(total, len(lengths))),
        num_categories=len(data.dictionary),
        length_min=min(lengths),
        length_max=max(lengths),
        total_visits=total,
    )


def table1_path():
    """Path of the bundled 13-session fixture."""
    return resources.files("sessionclust") / "data" / "table1.seq"
