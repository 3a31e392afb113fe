"""Streaming reader for structured-paper corpus files and paper eligibility.

Input files are newline-delimited records, one JSON object per line:

    {
      "paper_id": str,
      "abstract": str | null,
      "body_text": [{"section": str, "text": str,
                     "cite_spans": [{"start": int, "end": int, "ref_id": str}]}],
      "bib_entries": object | null,
      "has_tables_figures": bool,
      "venue": str | null,
      "inbound_citations": int,
      "mag_field_of_study": [str, ...]
    }

See the README for the mapping of these fields onto the S2ORC 20200705v1
release. ``read_corpus`` is single-consumer sequential and keeps only one
record in memory at a time; the records it yields are immutable and safe to
hand to parallel workers.
"""

from __future__ import annotations

import io
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Callable, Iterable, Iterator

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CiteSpan:
    """A span of citation text inside a paragraph (offsets in scalar values)."""

    start: int
    end: int
    ref_id: str = ""


@dataclass(frozen=True)
class Paragraph:
    section_title: str
    text: str
    cite_spans: tuple[CiteSpan, ...] = ()


@dataclass(frozen=True)
class PaperRecord:
    paper_id: str
    has_abstract: bool
    has_bibliography: bool
    has_tables_figures: bool
    has_venue: bool
    has_inbound_citations: bool
    mag_fields: frozenset[str]
    paragraphs: tuple[Paragraph, ...]
    source_line: int = 0


@dataclass(frozen=True)
class Diagnostic:
    """One malformed input line, reported on the diagnostics channel."""

    line: int
    message: str


class MalformedRecordError(ValueError):
    pass


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise MalformedRecordError(message)


def _parse_cite_span(raw: object) -> CiteSpan:
    _require(isinstance(raw, dict), "cite span is not an object")
    _require(isinstance(raw.get("start"), int) and not isinstance(raw["start"], bool),
             "cite span 'start' is not an integer")
    _require(isinstance(raw.get("end"), int) and not isinstance(raw["end"], bool),
             "cite span 'end' is not an integer")
    ref_id = raw.get("ref_id", "")
    _require(ref_id is None or isinstance(ref_id, str), "cite span 'ref_id' is not a string")
    return CiteSpan(start=raw["start"], end=raw["end"], ref_id=ref_id or "")


def _parse_paragraph(raw: object) -> Paragraph:
    _require(isinstance(raw, dict), "body_text entry is not an object")
    _require(isinstance(raw.get("section"), str), "paragraph 'section' is not a string")
    _require(isinstance(raw.get("text"), str), "paragraph 'text' is not a string")
    spans_raw = raw.get("cite_spans", [])
    _require(isinstance(spans_raw, list), "paragraph 'cite_spans' is not a list")
    spans = tuple(sorted((_parse_cite_span(s) for s in spans_raw), key=lambda s: (s.start, s.end)))
    return Paragraph(section_title=raw["section"], text=raw["text"], cite_spans=spans)


def parse_record(raw: object, source_line: int = 0) -> PaperRecord:
    """Build a PaperRecord from one decoded input object.

    Raises MalformedRecordError when the object does not follow the input
    schema. Offset consistency of cite spans is checked downstream, where it
    is a hard error rather than a skipped line.
    """
    _require(isinstance(raw, dict), "record is not an object")
    paper_id = raw.get("paper_id")
    _require(isinstance(paper_id, str) and paper_id != "", "missing or empty 'paper_id'")

    abstract = raw.get("abstract")
    _require(abstract is None or isinstance(abstract, str), "'abstract' is not a string")
    body = raw.get("body_text", [])
    _require(isinstance(body, list), "'body_text' is not a list")
    bib = raw.get("bib_entries")
    _require(bib is None or isinstance(bib, dict), "'bib_entries' is not an object")
    _require(isinstance(raw.get("has_tables_figures"), bool), "'has_tables_figures' is not a bool")
    venue = raw.get("venue")
    _require(venue is None or isinstance(venue, str), "'venue' is not a string")
    inbound = raw.get("inbound_citations", 0)
    _require(isinstance(inbound, int) and not isinstance(inbound, bool),
             "'inbound_citations' is not an integer")
    fields = raw.get("mag_field_of_study") or []
    _require(isinstance(fields, list) and all(isinstance(f, str) for f in fields),
             "'mag_field_of_study' is not a list of strings")

    return PaperRecord(
        paper_id=paper_id,
        has_abstract=bool(abstract),
        has_bibliography=bool(bib),
        has_tables_figures=raw["has_tables_figures"],
        has_venue=bool(venue),
        has_inbound_citations=inbound >= 1,
        mag_fields=frozenset(fields),
        paragraphs=tuple(_parse_paragraph(p) for p in body),
        source_line=source_line,
    )


def read_corpus(
    stream: BinaryIO | Iterable[str],
    on_malformed: Callable[[Diagnostic], None] | None = None,
) -> Iterator[PaperRecord]:
    """Stream PaperRecords from a newline-delimited corpus.

    ``stream`` may be a binary file object or an iterable of decoded lines.
    Malformed lines (bad JSON, schema violations, blank lines) are reported
    through ``on_malformed`` with their 1-based line number and skipped; an
    undecodable byte stream raises UnicodeDecodeError. Every input line is
    accounted for: it yields a record or produces exactly one diagnostic.
    """
    if isinstance(stream, io.TextIOBase):
        lines: Iterable[str] = stream
    elif hasattr(stream, "read"):
        lines = io.TextIOWrapper(stream, encoding="utf-8")
    else:
        lines = stream

    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped:
            _emit(on_malformed, Diagnostic(lineno, "blank line"))
            continue
        try:
            raw = json.loads(stripped)
        except json.JSONDecodeError as exc:
            _emit(on_malformed, Diagnostic(lineno, f"invalid JSON: {exc.msg}"))
            continue
        try:
            yield parse_record(raw, source_line=lineno)
        except MalformedRecordError as exc:
            _emit(on_malformed, Diagnostic(lineno, str(exc)))


def read_corpus_path(
    path: str | Path,
    on_malformed: Callable[[Diagnostic], None] | None = None,
) -> Iterator[PaperRecord]:
    """``read_corpus`` over a file path."""
    with open(path, "rb") as fh:
        yield from read_corpus(fh, on_malformed=on_malformed)


def _emit(on_malformed: Callable[[Diagnostic], None] | None, diag: Diagnostic) -> None:
    if on_malformed is not None:
        on_malformed(diag)
    else:
        logger.warning("line %d: %s", diag.line, diag.message)


def paper_eligible(paper: PaperRecord) -> bool:
    """True when all seven availability signals are present.

    Required: abstract, body text (at least one paragraph), bibliography,
    tables/figures, venue information, inbound citations (count >= 1), and at
    least one subject-category name.
    """
    return (
        paper.has_abstract
        and len(paper.paragraphs) >= 1
        and paper.has_bibliography
        and paper.has_tables_figures
        and paper.has_venue
        and paper.has_inbound_citations
        and len(paper.mag_fields) >= 1
    )
