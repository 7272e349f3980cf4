"""In-memory publication corpus, JSONL ingestion, and citation indices.

The corpus file is JSON Lines, one publication per line, UTF-8:

    {"id": 17, "year": 2008, "journal": "J0", "type": "article",
     "lang": "en", "authors": 3, "countries": ["NL", "BE"], "refs": [4, 9]}

An optional journal file maps journal ids to names, one ``{"id": ...,
"name": ...}`` object per line.

Loading normalizes each record: ``type`` strings other than "article" /
"review" collapse to OTHER, repeated country codes are deduplicated and
the distinct countries share equal weight, duplicate and self references
are dropped, and references whose target id is not in the corpus are kept
apart in ``external_refs`` (source normalization later needs to know that
these references exist but can never be active).

A loaded corpus is immutable and safe for concurrent reads. Both citation
directions are materialized: ``forward_index`` (citing -> cited) equals
each publication's resolved reference list, ``reverse_index`` is its exact
transpose.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping


class CorpusError(Exception):
    """Base class for corpus ingestion failures."""


class CorpusParseError(CorpusError):
    """A line of the corpus or journal file does not match the schema."""

    def __init__(self, path, line_no: int, message: str):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = path
        self.line_no = line_no


class CorpusIntegrityError(CorpusError):
    """The file parses but violates a uniqueness constraint."""


class DocType(Enum):
    ARTICLE = "article"
    REVIEW = "review"
    OTHER = "other"

    @classmethod
    def from_string(cls, raw: str) -> "DocType":
        try:
            return cls(raw)
        except ValueError:
            return cls.OTHER


@dataclass(frozen=True)
class Publication:
    """One publication record.

    ``countries`` holds (country code, weight) pairs with equal weights
    summing to 1, or is empty when no address data exists. ``references``
    contains only within-corpus targets, sorted, without duplicates or
    self references; unresolvable targets live in ``external_refs``.
    """

    id: int
    year: int
    journal_id: str
    doc_type: DocType
    language: str
    author_count: int
    countries: tuple[tuple[str, float], ...] = ()
    references: tuple[int, ...] = ()
    external_refs: tuple[int, ...] = ()

    @property
    def external_reference_count(self) -> int:
        return len(self.external_refs)


@dataclass(frozen=True)
class Journal:
    id: str
    name: str


@dataclass(frozen=True)
class Corpus:
    """Immutable corpus with both citation directions materialized."""

    publications: dict[int, Publication]
    journals: dict[str, Journal]
    year_range: tuple[int, int] | None
    forward_index: dict[int, tuple[int, ...]]
    reverse_index: dict[int, tuple[int, ...]]
    journal_pubs: dict[str, tuple[int, ...]]

    def __len__(self) -> int:
        return len(self.publications)

    @property
    def edge_count(self) -> int:
        return sum(len(refs) for refs in self.forward_index.values())


@dataclass(frozen=True)
class ValidationIssue:
    code: str
    subject: str
    message: str


@dataclass
class ValidationReport:
    issues: list[ValidationIssue] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.issues

    def add(self, code: str, subject, message: str) -> None:
        self.issues.append(ValidationIssue(code, str(subject), message))

    def __str__(self) -> str:
        if self.ok:
            return "corpus valid"
        lines = [f"{len(self.issues)} issue(s):"]
        lines += [f"  [{i.code}] {i.subject}: {i.message}" for i in self.issues]
        return "\n".join(lines)


_REQUIRED_FIELDS = ("id", "year", "journal", "type", "lang", "authors", "countries", "refs")

WEIGHT_SUM_TOL = 1e-9


def _check_int(value, name: str) -> int:
    # bool is an int subclass; reject it explicitly
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValueError(f"field '{name}' must be an integer, got {value!r}")
    return value


def _parse_record(obj: dict, where: tuple) -> dict:
    if not isinstance(obj, dict):
        raise ValueError("line is not a JSON object")
    unknown = set(obj) - set(_REQUIRED_FIELDS)
    if unknown:
        raise ValueError(f"unknown field(s): {', '.join(sorted(unknown))}")
    missing = [k for k in _REQUIRED_FIELDS if k not in obj]
    if missing:
        raise ValueError(f"missing field(s): {', '.join(missing)}")
    rec = {
        "id": _check_int(obj["id"], "id"),
        "year": _check_int(obj["year"], "year"),
        "journal": obj["journal"],
        "type": obj["type"],
        "lang": obj["lang"],
        "authors": _check_int(obj["authors"], "authors"),
    }
    if not isinstance(rec["journal"], str) or not rec["journal"]:
        raise ValueError("field 'journal' must be a non-empty string")
    if not isinstance(rec["type"], str):
        raise ValueError("field 'type' must be a string")
    if not isinstance(rec["lang"], str):
        raise ValueError("field 'lang' must be a string")
    if rec["authors"] < 0:
        raise ValueError("field 'authors' must be >= 0")
    countries = obj["countries"]
    if not isinstance(countries, list) or any(not isinstance(c, str) for c in countries):
        raise ValueError("field 'countries' must be an array of strings")
    refs = obj["refs"]
    if not isinstance(refs, list):
        raise ValueError("field 'refs' must be an array of integers")
    rec["countries"] = countries
    rec["refs"] = [_check_int(r, "refs") for r in refs]
    return rec


def build_corpus(records: Iterable[dict], journals: Mapping[str, str] | None = None) -> Corpus:
    """Assemble a corpus from parsed record dicts (the JSONL schema).

    Shared by the file loader and the synthetic generator so both produce
    byte-for-byte identical normalization behavior. ``journals`` maps
    journal id to name; journals referenced by publications but absent
    from the mapping are created with their id as name.
    """
    raw: dict[int, dict] = {}
    for rec in records:
        pid = rec["id"]
        if pid in raw:
            raise CorpusIntegrityError(f"duplicate publication id {pid}")
        raw[pid] = rec

    id_set = raw.keys()
    publications: dict[int, Publication] = {}
    reverse: dict[int, list[int]] = {pid: [] for pid in raw}
    journal_pubs: dict[str, list[int]] = {}

    for pid in sorted(raw):
        rec = raw[pid]
        distinct_countries = sorted(set(rec["countries"]))
        if distinct_countries:
            w = 1.0 / len(distinct_countries)
            countries = tuple((c, w) for c in distinct_countries)
        else:
            countries = ()
        internal = sorted({r for r in rec["refs"] if r in id_set and r != pid})
        external = sorted({r for r in rec["refs"] if r not in id_set})
        pub = Publication(
            id=pid,
            year=rec["year"],
            journal_id=rec["journal"],
            doc_type=DocType.from_string(rec["type"]),
            language=rec["lang"],
            author_count=rec["authors"],
            countries=countries,
            references=tuple(internal),
            external_refs=tuple(external),
        )
        publications[pid] = pub
        journal_pubs.setdefault(pub.journal_id, []).append(pid)
        for target in internal:
            reverse[target].append(pid)

    journal_map: dict[str, Journal] = {}
    if journals:
        for jid in sorted(journals):
            journal_map[jid] = Journal(id=jid, name=journals[jid])
    for jid in sorted(journal_pubs):
        journal_map.setdefault(jid, Journal(id=jid, name=jid))

    years = [p.year for p in publications.values()]
    year_range = (min(years), max(years)) if years else None

    return Corpus(
        publications=publications,
        journals=journal_map,
        year_range=year_range,
        forward_index={pid: publications[pid].references for pid in publications},
        reverse_index={pid: tuple(citers) for pid, citers in reverse.items()},
        journal_pubs={jid: tuple(pids) for jid, pids in journal_pubs.items()},
    )


def load_journals(path) -> dict[str, str]:
    """Load the optional journal file: JSON Lines of {"id":..., "name":...}."""
    names: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                if not isinstance(obj, dict) or set(obj) != {"id", "name"}:
                    raise ValueError("expected exactly fields 'id' and 'name'")
                jid, name = obj["id"], obj["name"]
                if not isinstance(jid, str) or not isinstance(name, str):
                    raise ValueError("'id' and 'name' must be strings")
            except (json.JSONDecodeError, ValueError) as exc:
                raise CorpusParseError(path, line_no, str(exc)) from exc
            if jid in names:
                raise CorpusIntegrityError(f"duplicate journal id {jid!r}")
            names[jid] = name
    return names


def load_corpus(path, journals_path=None) -> Corpus:
    """Load and index a corpus file; see module docstring for the schema.

    Raises CorpusParseError with the offending line number on malformed
    input and CorpusIntegrityError on duplicate ids.
    """
    records = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(_parse_record(json.loads(line), (path, line_no)))
            except (json.JSONDecodeError, ValueError) as exc:
                raise CorpusParseError(path, line_no, str(exc)) from exc
    journals = load_journals(journals_path) if journals_path else None
    return build_corpus(records, journals)


def save_corpus(corpus: Corpus, path, journals_path=None) -> None:
    """Serialize a corpus back to the JSONL schema, order-normalized.

    Publications are written sorted by id with sorted reference and
    country lists, so load -> save -> load reproduces an identical
    corpus. Country weights are implicit (the schema stores codes only;
    equal split is reapplied at load), which is lossless for any corpus
    produced by load_corpus or the synthetic generator.
    """
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for pid in sorted(corpus.publications):
            p = corpus.publications[pid]
            obj = {
                "id": p.id,
                "year": p.year,
                "journal": p.journal_id,
                "type": p.doc_type.value,
                "lang": p.language,
                "authors": p.author_count,
                "countries": [c for c, _ in p.countries],
                "refs": sorted(p.references + p.external_refs),
            }
            fh.write(json.dumps(obj, ensure_ascii=False, separators=(",", ":")) + "\n")
    if journals_path is not None:
        with open(journals_path, "w", encoding="utf-8", newline="\n") as fh:
            for jid in sorted(corpus.journals):
                j = corpus.journals[jid]
                fh.write(json.dumps({"id": j.id, "name": j.name}, ensure_ascii=False,
                                    separators=(",", ":")) + "\n")


def validate_corpus(corpus: Corpus) -> ValidationReport:
    """Check every publication and index invariant; findings go in the report.

    Never raises: an empty report means the corpus is valid.
    """
    report = ValidationReport()
    lo, hi = corpus.year_range if corpus.year_range else (None, None)

    for pid, pub in corpus.publications.items():
        if pub.countries:
            total = sum(w for _, w in pub.countries)
            if any(w <= 0 for _, w in pub.countries):
                report.add("country-weight-positive", pid, "non-positive country weight")
            if abs(total - 1.0) > WEIGHT_SUM_TOL:
                report.add("country-weight-sum", pid, f"weights sum to {total!r}, expected 1")
            codes = [c for c, _ in pub.countries]
            if len(set(codes)) != len(codes):
                report.add("country-duplicate", pid, "repeated country code")
        if pid in pub.references:
            report.add("self-reference", pid, "publication references itself")
        if len(set(pub.references)) != len(pub.references):
            report.add("duplicate-reference", pid, "duplicate reference targets")
        if lo is not None and not lo <= pub.year <= hi:
            report.add("year-out-of-range", pid, f"year {pub.year} outside [{lo}, {hi}]")
        if pub.journal_id not in corpus.journals:
            report.add("unknown-journal", pid, f"journal {pub.journal_id!r} not in journal table")
        if corpus.forward_index.get(pid) != pub.references:
            report.add("forward-index-mismatch", pid, "forward index differs from references")

    # transpose exactness, both directions
    rebuilt: dict[int, list[int]] = {pid: [] for pid in corpus.publications}
    for pid, targets in corpus.forward_index.items():
        for t in targets:
            if t in rebuilt:
                rebuilt[t].append(pid)
    for pid in corpus.publications:
        expected = tuple(sorted(rebuilt[pid]))
        actual = tuple(sorted(corpus.reverse_index.get(pid, ())))
        if expected != actual:
            report.add("transpose-violation", pid,
                       f"reverse index {actual} is not the transpose {expected}")
    return report
