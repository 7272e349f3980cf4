"""Deterministic synthetic corpora with controllable citation cultures.

Fields differ in reference-list length, citation locality, and growth,
which is exactly what the normalization scores are supposed to iron out,
so a generated corpus plus its ground-truth field labels lets every
normalization property be checked at desk scale.

Generation is reproducible for a fixed seed: publications are laid out
year by year, then references are wired backwards in time. A share of
publications carries no references at all (they will have zero active
references at any window length), and a share of references points to
synthetic ids outside the corpus (they resolve to nothing and can never
be active). All remaining references land on an earlier-or-same-year
publication, within the citing field with probability
``within_field_preference`` and uniformly over the other fields
otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .classification import ClassificationSystem, save_classification_csv
from .corpus import Corpus, build_corpus, save_corpus

DEFAULT_COUNTRY_POOL = ("US", "GB", "DE", "FR", "NL", "CN", "JP", "BR", "IN", "AU")


class ConfigError(ValueError):
    """The generator configuration is inconsistent or infeasible."""


@dataclass
class SynthConfig:
    """Knobs of the generator; see module docstring for semantics.

    ``field_sizes`` is the number of publications per field in the first
    year; later years scale by ``growth_rate``. ``mean_refs`` is the
    expected reference-list length of reference-carrying publications
    (Poisson). ``ref_age_weights`` is the relative preference for citing
    0, 1, 2, ... year old work, renormalized over the years that exist.
    """

    seed: int = 0
    year_min: int = 2007
    year_max: int = 2010
    field_sizes: tuple[int, ...] = (300, 300)
    mean_refs: tuple[float, ...] = (6.0, 6.0)
    growth_rate: float = 1.0
    within_field_preference: float = 0.9
    non_core_ref_share: float = 0.0
    zero_active_ref_share: float = 0.0
    journals_per_field: int = 2
    countries_per_journal: int = 3
    country_pool: tuple[str, ...] = DEFAULT_COUNTRY_POOL
    review_share: float = 0.0
    ref_age_weights: tuple[float, ...] = (0.35, 0.30, 0.20, 0.15)

    @property
    def n_fields(self) -> int:
        return len(self.field_sizes)

    def validate(self) -> None:
        if self.year_min > self.year_max:
            raise ConfigError("year_min must not exceed year_max")
        if self.n_fields == 0:
            raise ConfigError("at least one field is required")
        if len(self.mean_refs) != self.n_fields:
            raise ConfigError("mean_refs must have one entry per field")
        if any(s < 0 for s in self.field_sizes):
            raise ConfigError("field sizes must be >= 0")
        if any(m < 0 for m in self.mean_refs):
            raise ConfigError("mean reference lengths must be >= 0")
        if self.growth_rate <= 0:
            raise ConfigError("growth_rate must be positive")
        for name in ("within_field_preference", "non_core_ref_share",
                     "zero_active_ref_share", "review_share"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1]")
        if self.journals_per_field < 1:
            raise ConfigError("journals_per_field must be >= 1")
        if not self.ref_age_weights or sum(self.ref_age_weights) <= 0:
            raise ConfigError("ref_age_weights must have positive total")
        if min(self.ref_age_weights) < 0:
            raise ConfigError("ref_age_weights must be non-negative")


@dataclass
class SynthResult:
    corpus: Corpus
    truth: ClassificationSystem
    config: SynthConfig


def _cell_size(cfg: SynthConfig, field_idx: int, year: int) -> int:
    scale = cfg.growth_rate ** (year - cfg.year_min)
    return int(round(cfg.field_sizes[field_idx] * scale))


def generate(cfg: SynthConfig) -> SynthResult:
    """Generate a corpus and its ground-truth classification."""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    years = list(range(cfg.year_min, cfg.year_max + 1))

    journal_countries: dict[str, list[str]] = {}
    journal_of_field: list[list[str]] = []
    for f in range(cfg.n_fields):
        names = [f"J{f}_{k}" for k in range(cfg.journals_per_field)]
        journal_of_field.append(names)
        for name in names:
            k = min(cfg.countries_per_journal, len(cfg.country_pool))
            picks = rng.choice(len(cfg.country_pool), size=k, replace=False)
            journal_countries[name] = [cfg.country_pool[i] for i in sorted(picks)]

    # lay out ids year-major so references can only point backwards or sideways
    pub_field: dict[int, int] = {}
    pub_year: dict[int, int] = {}
    cell_pubs: dict[tuple[int, int], list[int]] = {}
    next_id = 1
    for year in years:
        for f in range(cfg.n_fields):
            size = _cell_size(cfg, f, year)
            ids = list(range(next_id, next_id + size))
            next_id += size
            cell_pubs[(f, year)] = ids
            for pid in ids:
                pub_field[pid] = f
                pub_year[pid] = year

    if not pub_field:
        raise ConfigError("configuration generates no publications")

    # cumulative in-field pools for feasibility checks
    pool_until: dict[tuple[int, int], int] = {}
    for f in range(cfg.n_fields):
        total = 0
        for year in years:
            total += len(cell_pubs[(f, year)])
            pool_until[(f, year)] = total

    # per-year cumulative age-preference table for fast sampling
    age_cum: dict[int, np.ndarray] = {}
    for year in years:
        ages = range(year - cfg.year_min + 1)
        base = cfg.ref_age_weights
        w = np.array([base[a] if a < len(base) else 0.0 for a in ages], dtype=float)
        if w.sum() <= 0:
            w = np.ones(len(w))
        age_cum[year] = np.cumsum(w / w.sum())

    external_next = 10 ** 9
    records = []
    for pid in sorted(pub_field):
        f = pub_field[pid]
        year = pub_year[pid]
        journal = journal_of_field[f][int(rng.integers(len(journal_of_field[f])))]
        mix = journal_countries[journal]
        n_countries = 1 + int(rng.integers(min(2, len(mix))))
        picks = rng.choice(len(mix), size=n_countries, replace=False)
        countries = [mix[i] for i in sorted(picks)]
        doc_type = "review" if rng.random() < cfg.review_share else "article"
        refs: list[int] = []
        if rng.random() >= cfg.zero_active_ref_share:
            k = int(rng.poisson(cfg.mean_refs[f]))
            if k > 0:
                if k > max(1, pool_until[(f, year)] // 2):
                    raise ConfigError(
                        f"mean reference length {cfg.mean_refs[f]} is infeasible for "
                        f"field {f}: requested {k} references with only "
                        f"{pool_until[(f, year)]} potential targets"
                    )
                refs = _draw_refs(cfg, rng, pid, f, year, k, cell_pubs, age_cum[year])
                for i, r in enumerate(refs):
                    if r < 0:
                        refs[i] = external_next
                        external_next += 1
        records.append({
            "id": pid,
            "year": year,
            "journal": journal,
            "type": doc_type,
            "lang": "en",
            "authors": 1 + int(rng.poisson(2.0)),
            "countries": countries,
            "refs": refs,
        })

    corpus = build_corpus(records, journals={j: f"Journal {j}" for j in journal_countries})
    truth = ClassificationSystem(
        name="truth",
        assignment={pid: frozenset({pub_field[pid] + 1}) for pid in pub_field},
        multi_assignment=False,
    )
    return SynthResult(corpus=corpus, truth=truth, config=cfg)


def _draw_refs(cfg, rng, pid, f, year, k, cell_pubs, age_cum) -> list[int]:
    """Draw k distinct reference targets for one publication.

    Negative placeholders mark out-of-corpus references (replaced with
    unique external ids by the caller).
    """
    chosen: set[int] = set()
    refs: list[int] = []
    externals = 0
    attempts = 0
    while len(refs) < k:
        attempts += 1
        if attempts > 50 * k + 100:
            raise ConfigError(
                f"cannot place {k} distinct references for publication {pid}; "
                "reference length likely exceeds available targets"
            )
        if rng.random() < cfg.non_core_ref_share:
            refs.append(-1 - externals)  # placeholder for an external id
            externals += 1
            continue
        if rng.random() < cfg.within_field_preference or cfg.n_fields == 1:
            target_field = f
        else:
            others = [g for g in range(cfg.n_fields) if g != f]
            target_field = others[int(rng.integers(len(others)))]
        age = int(np.searchsorted(age_cum, rng.random(), side="right"))
        age = min(age, len(age_cum) - 1)
        pool = cell_pubs[(target_field, year - age)]
        if not pool or (len(pool) == 1 and pool[0] == pid):
            continue
        target = pool[int(rng.integers(len(pool)))]
        if target == pid or target in chosen:
            continue
        chosen.add(target)
        refs.append(target)
    return refs


def write_outputs(result: SynthResult, out_dir) -> dict[str, Path]:
    """Write corpus.jsonl, journals.jsonl, and truth.csv into a directory."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "corpus": out / "corpus.jsonl",
        "journals": out / "journals.jsonl",
        "truth": out / "truth.csv",
    }
    save_corpus(result.corpus, paths["corpus"], paths["journals"])
    save_classification_csv(result.truth, paths["truth"])
    return paths
