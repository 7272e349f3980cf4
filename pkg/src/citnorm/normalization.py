"""Per-publication citation scores: raw counts, field-normalized, and
source-normalized.

Five scores per publication, citations counted through a census year:

* cs     raw citation count;
* ncs    cs divided by the expected count e, where e is the mean cs of
         the publication's (field, year) cell under a classification
         system; multiple fields combine by the harmonic mean of the
         cell means;
* sncs1  each citation weighted by 1 / a, with a the mean number of
         active references over all publications of the citing
         journal-year;
* sncs2  each citation weighted by 1 / r, with r the citing
         publication's own active-reference count (r = 0 gives no
         credit);
* sncs3  each citation weighted by 1 / (p * r), with p the share of the
         citing journal-year's publications having at least one active
         reference.

An active reference points to a publication in a core journal and falls
inside a reference window whose length always equals the citation window
of the publication being scored: a publication from 2008 scored with
census year 2011 has a four-year window, so a citation it receives from
2010 is weighted by referencing behavior measured over 2007-2010.

The journal-year statistics a and p average over all publications of the
scored document types in that journal and year, including those with no
active references. Citing journal-years with a = 0 (and citers with
r = 0) contribute nothing; such drops are counted in the score table's
anomaly counters rather than raising.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .corpus import Corpus, DocType
from .classification import ClassificationSystem

log = logging.getLogger(__name__)

SCORED_DOC_TYPES = frozenset({DocType.ARTICLE, DocType.REVIEW})

SCORE_COLUMNS = ("cs", "ncs", "sncs1", "sncs2", "sncs3")


@dataclass(frozen=True)
class WindowSpec:
    """Citation window of a scored publication; also the matching
    reference-window length used for its citers' active references."""

    census_year: int
    pub_year: int

    @property
    def length(self) -> int:
        n = self.census_year - self.pub_year + 1
        if n < 1:
            raise ValueError(f"publication year {self.pub_year} after census "
                             f"year {self.census_year}")
        return n


def citations(corpus: Corpus, pub_id: int, census_year: int) -> int:
    """Citations received up to and including the census year.

    Citing publications dated before the cited one are data noise and are
    dropped (with a warning).
    """
    year = corpus.publications[pub_id].year
    count = 0
    for citer in corpus.reverse_index.get(pub_id, ()):
        cy = corpus.publications[citer].year
        if cy < year:
            log.warning("citation from %d (year %d) predates %d (year %d); dropped",
                        citer, cy, pub_id, year)
            continue
        if cy <= census_year:
            count += 1
    return count


def active_refs(corpus: Corpus, pub_id: int, window_length: int, core: set[str]) -> int:
    """References to core-journal publications within the window.

    A reference from a year-y publication is active when the target sits
    in a core journal and its year falls in [y - window_length + 1, y].
    """
    if window_length < 1:
        raise ValueError("window_length must be >= 1")
    pub = corpus.publications[pub_id]
    count = 0
    for target in pub.references:
        t = corpus.publications[target]
        if t.journal_id in core and pub.year - window_length + 1 <= t.year <= pub.year:
            count += 1
    return count


def sncs2_weights(
    corpus: Corpus, pub_id: int, window_length: int, core: set[str]
) -> dict[int, Fraction]:
    """Exact credit each active reference of one publication receives.

    Weights are Fractions so the conservation property (they sum to
    exactly 1 whenever any active reference exists) holds without
    floating-point slack; the scoring path evaluates the same weights in
    floats.
    """
    pub = corpus.publications[pub_id]
    targets = [
        t for t in pub.references
        if corpus.publications[t].journal_id in core
        and pub.year - window_length + 1 <= corpus.publications[t].year <= pub.year
    ]
    if not targets:
        return {}
    share = Fraction(1, len(targets))
    return {t: share for t in targets}


@dataclass(frozen=True)
class JournalYearStats:
    mean_active_refs: float
    share_with_active: float
    pub_count: int


class ProfileTable:
    """Active-reference statistics per (journal, year, window length).

    Built in one pass per window length over the whole corpus:
    ``active_ref_count`` is defined for every publication, while the
    journal-year means only average publications of the scored document
    types (others cite, but do not shape the journal's profile).
    """

    def __init__(self, corpus: Corpus, core: set[str], lengths: set[int],
                 doc_types: frozenset = SCORED_DOC_TYPES):
        self.core = set(core)
        self.lengths = set(lengths)
        self.doc_types = doc_types
        self._arr = _CorpusArrays.get(corpus)
        arr = self._arr
        self._r: dict[int, np.ndarray] = {}
        self._a: dict[int, np.ndarray] = {}
        self._p: dict[int, np.ndarray] = {}
        core_flag = np.array([j in core for j in arr.journal_ids], dtype=bool)
        edge_core = core_flag[arr.jcode[arr.dst]]
        profiled = np.isin(arr.doc_code, [_DOC_CODES[d] for d in doc_types])
        self._n_cell = np.bincount(arr.cell[profiled], minlength=arr.n_cells)
        gap = arr.year[arr.src] - arr.year[arr.dst]
        for length in sorted(self.lengths):
            active = edge_core & (gap >= 0) & (gap <= length - 1)
            r = np.bincount(arr.src[active], minlength=len(arr.ids)).astype(np.int64)
            self._r[length] = r
            sum_r = np.bincount(arr.cell[profiled], weights=r[profiled],
                                minlength=arr.n_cells)
            n_active = np.bincount(arr.cell[profiled], weights=(r[profiled] > 0),
                                   minlength=arr.n_cells)
            with np.errstate(invalid="ignore", divide="ignore"):
                self._a[length] = np.where(self._n_cell > 0, sum_r / np.maximum(self._n_cell, 1), 0.0)
                self._p[length] = np.where(self._n_cell > 0, n_active / np.maximum(self._n_cell, 1), 0.0)

    def active_ref_count(self, pub_id: int, length: int) -> int:
        return int(self._r[length][self._arr.index[pub_id]])

    def _cell_of(self, journal_id: str, year: int) -> int | None:
        arr = self._arr
        if journal_id not in arr.jindex:
            return None
        offset = year - arr.year_lo
        if not 0 <= offset < arr.n_years:
            return None
        return arr.jindex[journal_id] * arr.n_years + offset

    def pub_count(self, journal_id: str, year: int) -> int:
        cell = self._cell_of(journal_id, year)
        return int(self._n_cell[cell]) if cell is not None else 0

    def mean_active_refs(self, journal_id: str, year: int, length: int) -> float:
        cell = self._cell_of(journal_id, year)
        return float(self._a[length][cell]) if cell is not None else 0.0

    def share_with_active(self, journal_id: str, year: int, length: int) -> float:
        cell = self._cell_of(journal_id, year)
        return float(self._p[length][cell]) if cell is not None else 0.0


_DOC_CODES = {DocType.ARTICLE: 0, DocType.REVIEW: 1, DocType.OTHER: 2}


class _CorpusArrays:
    """Flat numpy view of a corpus, cached per corpus object."""

    _cache: dict[int, tuple[object, "_CorpusArrays"]] = {}

    def __init__(self, corpus: Corpus):
        ids = sorted(corpus.publications)
        self.ids = np.array(ids, dtype=np.int64)
        self.index = {pid: i for i, pid in enumerate(ids)}
        self.year = np.array([corpus.publications[p].year for p in ids], dtype=np.int64)
        self.journal_ids = sorted(corpus.journals)
        self.jindex = {j: i for i, j in enumerate(self.journal_ids)}
        self.jcode = np.array(
            [self.jindex[corpus.publications[p].journal_id] for p in ids], dtype=np.int64
        )
        self.doc_code = np.array(
            [_DOC_CODES[corpus.publications[p].doc_type] for p in ids], dtype=np.int8
        )
        if len(ids):
            self.year_lo = int(self.year.min())
            self.n_years = int(self.year.max()) - self.year_lo + 1
        else:
            self.year_lo, self.n_years = 0, 1
        self.cell = self.jcode * self.n_years + (self.year - self.year_lo)
        self.n_cells = len(self.journal_ids) * self.n_years
        src, dst = [], []
        for pid in ids:
            i = self.index[pid]
            for target in corpus.forward_index[pid]:
                src.append(i)
                dst.append(self.index[target])
        self.src = np.array(src, dtype=np.int64)
        self.dst = np.array(dst, dtype=np.int64)

    @classmethod
    def get(cls, corpus: Corpus) -> "_CorpusArrays":
        key = id(corpus)
        hit = cls._cache.get(key)
        if hit is not None and hit[0] is corpus:
            return hit[1]
        arrays = cls(corpus)
        cls._cache = {key: (corpus, arrays)}  # cache of one; corpora are large
        return arrays


def _profiles_for(corpus, census_year, core, pub_id, profiles):
    if profiles is None:
        length = WindowSpec(census_year, corpus.publications[pub_id].year).length
        profiles = ProfileTable(corpus, core, {length})
    return profiles


def sncs1(corpus: Corpus, pub_id: int, census_year: int, core: set[str],
          profiles: ProfileTable | None = None) -> float:
    """Sum over citations of 1 / (citing journal-year mean active refs)."""
    pub = corpus.publications[pub_id]
    length = WindowSpec(census_year, pub.year).length
    profiles = _profiles_for(corpus, census_year, core, pub_id, profiles)
    total = 0.0
    for citer in corpus.reverse_index.get(pub_id, ()):
        c = corpus.publications[citer]
        if not pub.year <= c.year <= census_year:
            continue
        a = profiles.mean_active_refs(c.journal_id, c.year, length)
        if a > 0:
            total += 1.0 / a
    return total


def sncs2(corpus: Corpus, pub_id: int, census_year: int, core: set[str],
          profiles: ProfileTable | None = None) -> float:
    """Sum over citations of 1 / (citing publication's active refs)."""
    pub = corpus.publications[pub_id]
    length = WindowSpec(census_year, pub.year).length
    profiles = _profiles_for(corpus, census_year, core, pub_id, profiles)
    total = 0.0
    for citer in corpus.reverse_index.get(pub_id, ()):
        c = corpus.publications[citer]
        if not pub.year <= c.year <= census_year:
            continue
        r = profiles.active_ref_count(citer, length)
        if r > 0:
            total += 1.0 / r
    return total


def sncs3(corpus: Corpus, pub_id: int, census_year: int, core: set[str],
          profiles: ProfileTable | None = None) -> float:
    """Sum over citations of 1 / (p * r); see module docstring for p, r."""
    pub = corpus.publications[pub_id]
    length = WindowSpec(census_year, pub.year).length
    profiles = _profiles_for(corpus, census_year, core, pub_id, profiles)
    total = 0.0
    for citer in corpus.reverse_index.get(pub_id, ()):
        c = corpus.publications[citer]
        if not pub.year <= c.year <= census_year:
            continue
        r = profiles.active_ref_count(citer, length)
        if r == 0:
            continue
        p = profiles.share_with_active(c.journal_id, c.year, length)
        if p > 0:
            total += 1.0 / (p * r)
        else:
            log.warning("citer %d has %d active refs but journal-year share 0", citer, r)
    return total


class ExpectedCitationTable:
    """Mean citation count per (field, year) cell of a classification.

    Cells average over assigned publications of the scored document
    types; a publication in several fields contributes its full count to
    each of them.
    """

    def __init__(self, corpus: Corpus, system: ClassificationSystem, census_year: int,
                 doc_types: frozenset = SCORED_DOC_TYPES):
        self.census_year = census_year
        sums: dict[tuple, int] = {}
        counts: dict[tuple, int] = {}
        for pid in sorted(system.assignment):
            pub = corpus.publications.get(pid)
            if pub is None or pub.doc_type not in doc_types or pub.year > census_year:
                continue
            c = citations(corpus, pid, census_year)
            for f in system.assignment[pid]:
                key = (f, pub.year)
                sums[key] = sums.get(key, 0) + c
                counts[key] = counts.get(key, 0) + 1
        self.cell_mean = {key: sums[key] / counts[key] for key in sums}

    def expected(self, system: ClassificationSystem, pub_id: int, year: int) -> float | None:
        """Harmonic mean of the publication's cell means; None when any
        cell is entirely uncited (score undefined)."""
        fields_ = system.assignment.get(pub_id)
        if not fields_:
            return None
        means = [self.cell_mean.get((f, year)) for f in fields_]
        if any(m is None for m in means):
            return None
        if len(means) == 1:
            return means[0]
        if any(m == 0.0 for m in means):
            return None
        return len(means) / sum(1.0 / m for m in means)


def ncs(corpus: Corpus, system: ClassificationSystem, pub_id: int, census_year: int,
        expected: ExpectedCitationTable | None = None) -> float:
    """Citations over the expected count; NaN when the expectation is
    zero (an entirely uncited cell) and the ratio is undefined."""
    if pub_id not in system.assignment:
        raise KeyError(f"publication {pub_id} not assigned in system {system.name!r}")
    if expected is None:
        expected = ExpectedCitationTable(corpus, system, census_year)
    pub = corpus.publications[pub_id]
    c = citations(corpus, pub_id, census_year)
    e = expected.expected(system, pub_id, pub.year)
    if e is None or e == 0.0:
        return float("nan")
    return c / e


@dataclass
class ScoreTable:
    """Write-once score columns for the scored publications, id-sorted."""

    pub_ids: np.ndarray
    years: np.ndarray
    cs: np.ndarray
    ncs: np.ndarray
    sncs1: np.ndarray
    sncs2: np.ndarray
    sncs3: np.ndarray
    census_year: int
    ncs_system: str = ""
    anomalies: dict[str, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.pub_ids)

    def column(self, name: str) -> np.ndarray:
        if name not in SCORE_COLUMNS:
            raise KeyError(name)
        return getattr(self, name)

    def row(self, pub_id: int) -> dict[str, float]:
        i = int(np.searchsorted(self.pub_ids, pub_id))
        if i >= len(self.pub_ids) or self.pub_ids[i] != pub_id:
            raise KeyError(pub_id)
        return {name: float(self.column(name)[i]) for name in SCORE_COLUMNS}


def score_all(
    corpus: Corpus,
    ncs_system: ClassificationSystem,
    census_year: int,
    core: set[str],
    years: tuple[int, int] | None = None,
    doc_types: frozenset = SCORED_DOC_TYPES,
) -> ScoreTable:
    """Score every publication of the scored document types in ``years``.

    ``years`` defaults to the full corpus range capped at the census
    year. Publications not assigned in ``ncs_system`` (or sitting in an
    entirely uncited cell) get NaN in the ncs column; everything else is
    dense. Vectorized; equal to the per-publication functions.
    """
    if corpus.year_range is None:
        raise ValueError("cannot score an empty corpus")
    lo, hi = years if years is not None else corpus.year_range
    hi = min(hi, census_year)
    arr = _CorpusArrays.get(corpus)

    scored_type = np.isin(arr.doc_code, [_DOC_CODES[d] for d in doc_types])
    scored = scored_type & (arr.year >= lo) & (arr.year <= hi)
    positions = np.flatnonzero(scored)
    n = len(positions)
    pub_ids = arr.ids[positions]
    pub_years = arr.year[positions]
    pos_to_row = np.full(len(arr.ids), -1, dtype=np.int64)
    pos_to_row[positions] = np.arange(n)

    lengths = {census_year - int(y) + 1 for y in np.unique(pub_years)}
    profiles = ProfileTable(corpus, core, lengths, doc_types)

    # citation edges into scored publications, census-capped
    year_src = arr.year[arr.src]
    year_dst = arr.year[arr.dst]
    cite = scored[arr.dst] & (year_src >= year_dst) & (year_src <= census_year)
    c_src = arr.src[cite]
    c_dst_row = pos_to_row[arr.dst[cite]]
    c_dst_year = year_dst[cite]

    cs = np.bincount(c_dst_row, minlength=n).astype(np.int64)
    sncs1_col = np.zeros(n)
    sncs2_col = np.zeros(n)
    sncs3_col = np.zeros(n)
    anomalies = {"zero_mean_active_refs": 0, "zero_share_with_active": 0}

    for length in sorted(lengths):
        scored_year = census_year - length + 1
        mask = c_dst_year == scored_year
        if not mask.any():
            continue
        src_l = c_src[mask]
        dst_l = c_dst_row[mask]
        a = profiles._a[length][arr.cell[src_l]]
        ok = a > 0
        anomalies["zero_mean_active_refs"] += int((~ok).sum())
        sncs1_col += np.bincount(dst_l[ok], weights=1.0 / a[ok], minlength=n)
        r = profiles._r[length][src_l]
        rk = r > 0
        sncs2_col += np.bincount(dst_l[rk], weights=1.0 / r[rk], minlength=n)
        p = profiles._p[length][arr.cell[src_l]]
        pk = rk & (p > 0)
        anomalies["zero_share_with_active"] += int((rk & ~pk).sum())
        sncs3_col += np.bincount(dst_l[pk], weights=1.0 / (p[pk] * r[pk]), minlength=n)

    expected = ExpectedCitationTable(corpus, ncs_system, census_year, doc_types)
    ncs_col = np.full(n, np.nan)
    for i in range(n):
        pid = int(pub_ids[i])
        e = expected.expected(ncs_system, pid, int(pub_years[i]))
        if e is not None and e > 0.0:
            ncs_col[i] = cs[i] / e

    return ScoreTable(
        pub_ids=pub_ids,
        years=pub_years,
        cs=cs,
        ncs=ncs_col,
        sncs1=sncs1_col,
        sncs2=sncs2_col,
        sncs3=sncs3_col,
        census_year=census_year,
        ncs_system=ncs_system.name,
        anomalies=anomalies,
    )


def save_scores_csv(table: ScoreTable, path) -> None:
    """Full-precision score rows, one per publication, id-sorted."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("pub_id,year,cs,ncs,sncs1,sncs2,sncs3\n")
        for i in range(len(table)):
            ncs_val = table.ncs[i]
            ncs_txt = "" if np.isnan(ncs_val) else repr(float(ncs_val))
            fh.write(
                f"{int(table.pub_ids[i])},{int(table.years[i])},{int(table.cs[i])},"
                f"{ncs_txt},{repr(float(table.sncs1[i]))},{repr(float(table.sncs2[i]))},"
                f"{repr(float(table.sncs3[i]))}\n"
            )


def load_scores_csv(path, census_year: int = 0) -> ScoreTable:
    rows = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "pub_id,year,cs,ncs,sncs1,sncs2,sncs3":
            raise ValueError(f"unexpected score CSV header: {header!r}")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            pid, year, cs_, ncs_, s1, s2, s3 = line.split(",")
            rows.append((int(pid), int(year), int(cs_),
                         float(ncs_) if ncs_ else float("nan"),
                         float(s1), float(s2), float(s3)))
    rows.sort()
    cols = list(zip(*rows)) if rows else [[], [], [], [], [], [], []]
    return ScoreTable(
        pub_ids=np.array(cols[0], dtype=np.int64),
        years=np.array(cols[1], dtype=np.int64),
        cs=np.array(cols[2], dtype=np.int64),
        ncs=np.array(cols[3], dtype=float),
        sncs1=np.array(cols[4], dtype=float),
        sncs2=np.array(cols[5], dtype=float),
        sncs3=np.array(cols[6], dtype=float),
        census_year=census_year,
    )
