"""Core-journal selection: eligibility, internationality, citation fixpoint.

Three sequential filters produce the set of "core" journals whose
publications enter all downstream scoring:

1. eligibility: articles/reviews, at least one author, English, within a
   year window;
2. internationality: a journal's country distribution (pooled from its
   publications' addresses and the addresses of their citing
   publications) is compared against the corpus-wide distribution with a
   Kullback-Leibler divergence; journals at or above the threshold are
   dropped. The default threshold 1.3260 is the largest value that still
   excludes every journal focused entirely on one country;
3. recent-citation fixpoint: a journal stays only while at least half of
   its publications cite at least one publication, in a journal still in
   the set, that appeared at most ``recent_gap`` years earlier. Removals
   are batched per round, so the result is independent of journal
   iteration order and equals the unique greatest stable subset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .corpus import Corpus, DocType

INTERNATIONALITY_THRESHOLD = 1.3260

# A country distribution is a plain dict country code -> weight, with
# weights summing to 1 (or the empty dict when no data exists).
CountryDistribution = dict[str, float]


class DivergenceUndefinedError(ValueError):
    """KL divergence hit p > 0 where the reference weight q is 0."""


@dataclass(frozen=True)
class JournalProfile:
    journal_id: str
    distribution: CountryDistribution
    kl: float
    publication_count: int


@dataclass
class JournalAudit:
    """Per-journal trace of the selection run, one row of the output CSV."""

    journal_id: str
    kl: float | None = None
    kept_step2: bool = False
    ratios: list[float] = field(default_factory=list)
    final_ratio: float | None = None
    removal_round: int = -1
    kept_step3: bool = False


@dataclass
class FixpointResult:
    core_journal_ids: set[str]
    iterations: int
    final_ratios: dict[str, float]
    removal_round: dict[str, int]
    ratio_history: dict[str, list[float]]


@dataclass
class CoreSelectionResult:
    eligible_pub_ids: set[int]
    international_journal_ids: set[str]
    core_journal_ids: set[str]
    iterations: int
    audits: dict[str, JournalAudit]


def step1_filter(corpus: Corpus, year_lo: int, year_hi: int, language: str = "en") -> set[int]:
    """Publications eligible for selection: article/review, authored,
    in ``language``, published within [year_lo, year_hi]."""
    if year_lo > year_hi:
        raise ValueError(f"year_lo {year_lo} > year_hi {year_hi}")
    lang = language.lower()
    return {
        p.id
        for p in corpus.publications.values()
        if p.doc_type in (DocType.ARTICLE, DocType.REVIEW)
        and p.author_count >= 1
        and p.language.lower() == lang
        and year_lo <= p.year <= year_hi
    }


def publication_country_distribution(
    corpus: Corpus, pub_id: int, eligible: set[int] | None = None
) -> CountryDistribution:
    """Country distribution of one publication, pooled with its citers.

    The publication's own address countries and those of each citing
    publication contribute with equal mass per contributing publication;
    publications without address data are skipped on both sides. When
    ``eligible`` is given, only eligible citers contribute. Returns the
    empty dict when no country data is available anywhere.
    """
    pub = corpus.publications[pub_id]
    contributors = [pub.countries]
    for citer in corpus.reverse_index.get(pub_id, ()):
        if eligible is not None and citer not in eligible:
            continue
        contributors.append(corpus.publications[citer].countries)
    contributors = [c for c in contributors if c]
    if not contributors:
        return {}
    share = 1.0 / len(contributors)
    pooled: CountryDistribution = {}
    for countries in contributors:
        for code, weight in countries:
            pooled[code] = pooled.get(code, 0.0) + weight * share
    return pooled


def mean_distribution(distributions: list[CountryDistribution]) -> CountryDistribution:
    """Unweighted mean of non-empty distributions (empty ones are ignored)."""
    rows = [d for d in distributions if d]
    if not rows:
        return {}
    share = 1.0 / len(rows)
    out: CountryDistribution = {}
    for dist in rows:
        for code, weight in dist.items():
            out[code] = out.get(code, 0.0) + weight * share
    return out


def kl_divergence(p: CountryDistribution, q: CountryDistribution) -> float:
    """Sum of p(x) * ln(p(x)/q(x)) over the support of p, with 0 ln 0 = 0."""
    total = 0.0
    for code, pw in p.items():
        if pw == 0.0:
            continue
        qw = q.get(code, 0.0)
        if qw == 0.0:
            raise DivergenceUndefinedError(
                f"country {code!r} has weight {pw} but zero reference weight"
            )
        total += pw * math.log(pw / qw)
    return total


def overall_country_distribution(
    corpus: Corpus, eligible: set[int]
) -> CountryDistribution:
    """Corpus-wide reference distribution: mean of the pooled per-publication
    distributions over all eligible publications with country data."""
    return mean_distribution(
        [publication_country_distribution(corpus, pid, eligible) for pid in sorted(eligible)]
    )


def journal_profile(
    corpus: Corpus,
    journal_id: str,
    eligible: set[int],
    overall: CountryDistribution,
) -> JournalProfile:
    """Profile one journal against the overall distribution.

    The journal distribution is the unweighted mean of its eligible
    publications' pooled distributions; each publication counts once no
    matter how often it was cited. Journals whose publications carry no
    country data at all get an empty distribution and divergence 0.
    """
    pubs = [p for p in corpus.journal_pubs.get(journal_id, ()) if p in eligible]
    dists = [publication_country_distribution(corpus, pid, eligible) for pid in sorted(pubs)]
    dist = mean_distribution(dists)
    return JournalProfile(
        journal_id=journal_id,
        distribution=dist,
        kl=kl_divergence(dist, overall) if dist else 0.0,
        publication_count=len(pubs),
    )


def select_international(
    profiles: list[JournalProfile], threshold: float = INTERNATIONALITY_THRESHOLD
) -> set[str]:
    """Journals whose divergence is strictly below the threshold."""
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    return {p.journal_id for p in profiles if p.kl < threshold}


def core_fixpoint(
    corpus: Corpus,
    candidate_journals: set[str],
    recent_gap: int = 4,
    ratio: float = 0.5,
    citing_pubs: set[int] | None = None,
    cited_pubs: set[int] | None = None,
) -> FixpointResult:
    """Iteratively drop journals failing the recent-citation requirement.

    For each journal, the active-citation ratio is the fraction of its
    publications in scope (``citing_pubs``, default: all publications in
    candidate journals) that reference at least one publication in a
    journal of the current set with 0 <= citing year - cited year <=
    ``recent_gap``. All journals below ``ratio`` are removed together,
    then ratios are recomputed; that repeats until a round removes
    nothing or the set empties. Journals with no publications in scope
    count as ratio 0. ``iterations`` is the number of rounds executed.
    """
    current = set(candidate_journals)

    journal_of = {pid: p.journal_id for pid, p in corpus.publications.items()}
    members: dict[str, list[int]] = {j: [] for j in current}
    for pid, pub in corpus.publications.items():
        if pub.journal_id in members and (citing_pubs is None or pid in citing_pubs):
            members[pub.journal_id].append(pid)

    # per publication: journals (deduplicated) holding a recent-enough reference
    recent_ref_journals: dict[int, tuple[str, ...]] = {}
    for j in current:
        for pid in members[j]:
            pub = corpus.publications[pid]
            hit = set()
            for target in pub.references:
                if cited_pubs is not None and target not in cited_pubs:
                    continue
                gap = pub.year - corpus.publications[target].year
                if 0 <= gap <= recent_gap:
                    hit.add(journal_of[target])
            recent_ref_journals[pid] = tuple(hit)

    history: dict[str, list[float]] = {j: [] for j in candidate_journals}
    final_ratios: dict[str, float] = {}
    removal_round: dict[str, int] = {j: -1 for j in candidate_journals}
    iterations = 0

    while current:
        iterations += 1
        ratios = {}
        for j in current:
            pubs = members[j]
            if pubs:
                good = sum(
                    1 for pid in pubs if any(t in current for t in recent_ref_journals[pid])
                )
                ratios[j] = good / len(pubs)
            else:
                ratios[j] = 0.0
            history[j].append(ratios[j])
            final_ratios[j] = ratios[j]
        removals = {j for j in current if ratios[j] < ratio}
        if not removals:
            break
        for j in removals:
            removal_round[j] = iterations
        current -= removals

    return FixpointResult(
        core_journal_ids=current,
        iterations=iterations,
        final_ratios=final_ratios,
        removal_round=removal_round,
        ratio_history=history,
    )


def select_core_journals(
    corpus: Corpus,
    year_lo: int,
    year_hi: int,
    language: str = "en",
    threshold: float = INTERNATIONALITY_THRESHOLD,
    recent_gap: int = 4,
    ratio: float = 0.5,
    citing_year_lo: int | None = None,
    citing_year_hi: int | None = None,
) -> CoreSelectionResult:
    """Run the full three-step selection and collect per-journal audits.

    ``citing_year_lo/hi`` optionally narrow which publications are tested
    in step 3 (the analysis period); reference targets may come from the
    whole eligible window, so older publications can still satisfy the
    recency test.
    """
    eligible = step1_filter(corpus, year_lo, year_hi, language)
    overall = overall_country_distribution(corpus, eligible)

    with_eligible = sorted(
        j for j, pubs in corpus.journal_pubs.items() if any(p in eligible for p in pubs)
    )
    profiles = [journal_profile(corpus, j, eligible, overall) for j in with_eligible]
    international = select_international(profiles, threshold)

    citing = {
        pid
        for pid in eligible
        if corpus.publications[pid].journal_id in international
        and (citing_year_lo is None or corpus.publications[pid].year >= citing_year_lo)
        and (citing_year_hi is None or corpus.publications[pid].year <= citing_year_hi)
    }
    fix = core_fixpoint(
        corpus,
        international,
        recent_gap=recent_gap,
        ratio=ratio,
        citing_pubs=citing,
        cited_pubs=eligible,
    )

    audits: dict[str, JournalAudit] = {}
    for profile in profiles:
        j = profile.journal_id
        audits[j] = JournalAudit(
            journal_id=j,
            kl=profile.kl,
            kept_step2=j in international,
            ratios=fix.ratio_history.get(j, []),
            final_ratio=fix.final_ratios.get(j),
            removal_round=fix.removal_round.get(j, -1),
            kept_step3=j in fix.core_journal_ids,
        )

    return CoreSelectionResult(
        eligible_pub_ids=eligible,
        international_journal_ids=international,
        core_journal_ids=fix.core_journal_ids,
        iterations=fix.iterations,
        audits=audits,
    )


def write_core_csv(result: CoreSelectionResult, path) -> None:
    """One audit row per profiled journal, sorted by journal id."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("journal_id,d_i,kept_after_step2,final_ratio,kept_after_step3,removal_round\n")
        for jid in sorted(result.audits):
            a = result.audits[jid]
            final_ratio = "" if a.final_ratio is None else repr(a.final_ratio)
            fh.write(
                f"{jid},{repr(a.kl)},{int(a.kept_step2)},{final_ratio},"
                f"{int(a.kept_step3)},{a.removal_round}\n"
            )
