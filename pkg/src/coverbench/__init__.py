"""coverbench: build and evaluate robustness benchmarks for cover version
identification from noisy web-video candidate pools."""

from .agreement import (
    AgreementReport,
    AlphaLevel,
    agreement_report,
    kendall_tau,
    krippendorff_alpha,
)
from .annotation import (
    Assignment,
    CurationRow,
    Hit,
    QualityCheck,
    RejectReason,
    ValidationResult,
    ValidationStatus,
    VoteResult,
    aggregate_votes,
    build_hits,
    majority_vote,
    merge_curation,
    validate_assignment,
)
from .errors import (
    ConfigError,
    DataMismatchError,
    LockError,
    MatcherError,
    MissingEmbeddingError,
    MissingInputError,
    SchemaError,
    ToolkitError,
)
from .evaluation import (
    BenchmarkSet,
    BenchmarkVariant,
    ClassStats,
    EvalReport,
    GroupStats,
    RetrievalResult,
    SimilarityMatrix,
    assemble_benchmark,
    average_precision,
    classify_pair,
    evaluate,
    grouped_uncertainty_stats,
    mean_rank_first_relevant,
    pair_class_stats,
    rank_for_query,
    sims_from_embeddings,
    welch_t_test,
)
from .model import (
    PairClass,
    RelevanceLabel,
    SamplingGroup,
    Scope,
    Source,
    TaxonomyCode,
    UncertaintyClass,
    VersionRecord,
    compare_relevance,
    is_relevant,
    uncertainty_class,
    uncertainty_classes,
    version_sort_key,
)
from .sampling import (
    Direction,
    GroupAssignment,
    WorkScoreCloud,
    clouds_from_scores,
    disagreement_rank,
    mutual_center,
    mutual_rank,
    sample_dataset,
    select_groups,
)
from .scoring import (
    ExternalMatcher,
    FuzzyMatcher,
    ScoreRecord,
    WorkQuerySet,
    aggregate_music,
    aggregate_text,
    cosine,
    fuzzy_match,
    run_external_matcher,
    score_dataset,
    score_work,
    work_query_set,
)
from .store import (
    CrawlRecord,
    Dataset,
    EmbeddingStore,
    LabelRecord,
    formulate_queries,
    load_embeddings,
    parse_crawl,
    read_dataset,
    save_embeddings,
    write_dataset,
)

__version__ = "0.1.0"
