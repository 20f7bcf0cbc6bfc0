"""File parsing and geographic filtering for severity and document inputs.

Severity comes from ``dsci.csv`` (``week_start,dsci``), documents from
JSONL dumps with ``id``/``timestamp``/``text`` per line, and the
state-specific location entities from a plain text file.  Real dumps
contain junk lines, so JSONL parsing is lenient by default and counts
what it drops; a strict flag turns every malformed line into an error.
"""

from __future__ import annotations

import json
import logging
import math
import re
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta

from .core import DSCI_MAX, DSCI_MIN, Document, SeveritySeries, Source, TimeStep
from .errors import ParseError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EntityList:
    """Lowercased, deduplicated location entities for one state."""

    entities: frozenset[str]

    def __post_init__(self):
        if not self.entities:
            raise ValueError("entity list must not be empty")

    @classmethod
    def from_terms(cls, terms) -> "EntityList":
        cleaned = {t.strip().lower() for t in terms if t.strip()}
        return cls(frozenset(cleaned))

    @classmethod
    def from_file(cls, path) -> "EntityList":
        terms = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.split("#", 1)[0].strip()
                if line:
                    terms.append(line)
        if not terms:
            raise ParseError(f"{path}: no entities found")
        return cls.from_terms(terms)


def load_severity(path) -> SeveritySeries:
    """Parse a ``week_start,dsci`` CSV into a weekly severity series.

    Dates must be ISO-8601, strictly ascending in exact 7-day steps; a
    gap or duplicate is an error rather than something to impute, since
    a silently missing week would shift every downstream window.
    Values outside [0, 500] are clamped with a warning.

    Raises:
        ParseError: structural problems, with the offending line number.
    """
    steps: list[TimeStep] = []
    values: list[float] = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").rstrip("\r")
        if [c.strip() for c in header.split(",")] != ["week_start", "dsci"]:
            raise ParseError(f"{path}:1: expected header 'week_start,dsci', got {header!r}")
        prev: date | None = None
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            if len(cells) != 2:
                raise ParseError(f"{path}:{lineno}: expected 2 columns, got {len(cells)}")
            try:
                day = date.fromisoformat(cells[0].strip())
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: bad date {cells[0]!r}: {exc}") from exc
            try:
                value = float(cells[1])
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: bad DSCI value {cells[1]!r}") from exc
            if not math.isfinite(value):
                raise ParseError(f"{path}:{lineno}: non-finite DSCI value {cells[1]!r}")
            if prev is not None:
                if day == prev:
                    raise ParseError(f"{path}:{lineno}: duplicate date {day.isoformat()}")
                if day < prev:
                    raise ParseError(
                        f"{path}:{lineno}: dates not ascending ({day} after {prev})"
                    )
                if day - prev != timedelta(days=7):
                    raise ParseError(
                        f"{path}:{lineno}: gap between {prev} and {day}; "
                        "missing weeks are rejected, not imputed"
                    )
            if value < DSCI_MIN or value > DSCI_MAX:
                clamped = min(max(value, DSCI_MIN), DSCI_MAX)
                log.warning("%s:%d: DSCI %s clamped to %s", path, lineno, value, clamped)
                value = clamped
            steps.append(TimeStep(index=len(steps), week_start=day))
            values.append(value)
            prev = day
    if not steps:
        raise ParseError(f"{path}: no data rows")
    return SeveritySeries(steps=tuple(steps), values=tuple(values))


@dataclass
class DocumentLoadResult:
    """Documents plus counters for everything the lenient parser dropped."""

    documents: list[Document] = field(default_factory=list)
    malformed_count: int = 0
    empty_text_count: int = 0
    out_of_range_count: int = 0


def _parse_timestamp(raw: str) -> datetime:
    text = raw.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    return datetime.fromisoformat(text)


def load_documents(
    path, source: Source, series: SeveritySeries, strict: bool = False
) -> DocumentLoadResult:
    """Read one JSONL document dump and bucket rows into weekly timesteps.

    Each document lands in the timestep whose week contains its
    timestamp; documents outside the severity date range and documents
    with empty text are dropped and counted.  Malformed lines are
    counted in lenient mode and fatal in strict mode.
    """
    result = DocumentLoadResult()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                doc_id = str(row["id"])
                stamp = _parse_timestamp(str(row["timestamp"]))
                text = str(row["text"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                if strict:
                    raise ParseError(f"{path}:{lineno}: malformed document line: {exc}") from exc
                result.malformed_count += 1
                continue
            if not text.strip():
                result.empty_text_count += 1
                continue
            timestep = series.timestep_of(stamp.date())
            if timestep is None:
                result.out_of_range_count += 1
                continue
            result.documents.append(
                Document(id=doc_id, timestep=timestep, text=text, source=source)
            )
    if result.malformed_count:
        log.info("%s: skipped %d malformed lines", path, result.malformed_count)
    return result


def geofilter(docs: list[Document], entities: EntityList) -> list[Document]:
    """Keep documents that mention at least one location entity.

    Matching is case-insensitive at token boundaries, so the entity
    "dallas" does not match "dallastown".  Order is preserved; filtering
    twice equals filtering once.
    """
    alternatives = "|".join(re.escape(e) for e in sorted(entities.entities))
    pattern = re.compile(r"(?<![a-z0-9])(?:" + alternatives + r")(?![a-z0-9])")
    return [d for d in docs if pattern.search(d.text.lower())]
