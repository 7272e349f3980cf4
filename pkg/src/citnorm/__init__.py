"""citnorm: field- and age-normalized citation impact scoring.

Batch engine for computing classification-based and source-normalized
citation scores over a publication corpus, building the supporting
artifacts (core-journal selection, citation-graph field classifications),
and judging each normalization by how well it equalizes citation
distributions across fields and years (quantile-wise Theil inequality and
its decomposition).
"""

__version__ = "0.1.0"

from .corpus import (
    Corpus,
    CorpusError,
    CorpusIntegrityError,
    CorpusParseError,
    DocType,
    Journal,
    Publication,
    ValidationReport,
    build_corpus,
    load_corpus,
    load_journals,
    save_corpus,
    validate_corpus,
)
from .core_selection import (
    INTERNATIONALITY_THRESHOLD,
    CoreSelectionResult,
    JournalProfile,
    core_fixpoint,
    journal_profile,
    kl_divergence,
    overall_country_distribution,
    publication_country_distribution,
    select_core_journals,
    select_international,
    step1_filter,
)
from .classification import (
    PRESETS,
    CitationGraph,
    ClassificationSystem,
    ClusteringParams,
    attach_remainder,
    build_classification,
    build_graph,
    cluster,
    largest_component,
    load_external_classification,
    partition_quality,
    save_classification_csv,
)
from .normalization import (
    SCORE_COLUMNS,
    ExpectedCitationTable,
    ProfileTable,
    ScoreTable,
    WindowSpec,
    active_refs,
    citations,
    ncs,
    score_all,
    sncs1,
    sncs2,
    sncs2_weights,
    sncs3,
)
from .evaluation import (
    CellStats,
    DecompositionResult,
    QuantileAggregate,
    assign_quantiles,
    decompose,
    inequality_curve,
    theil,
    yearly_means,
)
from .synthgen import ConfigError, SynthConfig, SynthResult, generate

__all__ = [name for name in dir() if not name.startswith("_")]
