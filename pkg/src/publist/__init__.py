"""Compose a trustworthy publication list for one researcher.

The pipeline: ingest exports from several bibliographic sources, merge
duplicate records into canonical ones, score every name-matching
candidate along five evidence dimensions, tier the results, and let a
curator resolve the uncertain remainder — each decision feeding back
into the scores of what is left. Batch work goes through the CLI
(`publist`), interactive curation through the HTTP service.
"""

from .core import (
    AddressKey,
    AuthorName,
    Config,
    FormatError,
    OverrideRequired,
    PublicationRecord,
    PublistError,
    ResearcherProfile,
    SourceTag,
    UnknownRecordError,
    ValidationError,
    derive_record_id,
    make_record,
    title_fingerprint,
    validate_record,
)
from .disambiguate import (
    CandidateAssignment,
    RescoreDelta,
    apply_decision_pure,
    candidate_pool,
    combine,
    recursive_coauthor_inclusion,
    score_all,
    select_seeds,
)
from .ingest import (
    IngestReport,
    match_keys,
    normalize_name,
    parse_ris,
    parse_table,
    parse_trajectory,
    profile_from_data,
    serialize_ris,
)
from .merge import MergeCluster, dedup, is_duplicate, merge_cluster, title_similarity
from .report import (
    MethodComparison,
    compare_methods,
    descriptive_stats,
    export_list,
    match_gold,
    run_method_address,
    run_method_cluster,
)
from .session import Session
from .stylometry import StyleVector, burrows_delta, corpus_stats, style_features

__version__ = "0.1.0"

__all__ = [
    "AddressKey",
    "AuthorName",
    "CandidateAssignment",
    "Config",
    "FormatError",
    "IngestReport",
    "MergeCluster",
    "MethodComparison",
    "OverrideRequired",
    "PublicationRecord",
    "PublistError",
    "RescoreDelta",
    "ResearcherProfile",
    "Session",
    "SourceTag",
    "StyleVector",
    "UnknownRecordError",
    "ValidationError",
    "apply_decision_pure",
    "burrows_delta",
    "candidate_pool",
    "combine",
    "compare_methods",
    "corpus_stats",
    "dedup",
    "derive_record_id",
    "descriptive_stats",
    "export_list",
    "is_duplicate",
    "make_record",
    "match_gold",
    "match_keys",
    "merge_cluster",
    "normalize_name",
    "parse_ris",
    "parse_table",
    "parse_trajectory",
    "profile_from_data",
    "recursive_coauthor_inclusion",
    "run_method_address",
    "run_method_cluster",
    "score_all",
    "select_seeds",
    "serialize_ris",
    "style_features",
    "title_fingerprint",
    "title_similarity",
    "validate_record",
]
