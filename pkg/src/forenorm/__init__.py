"""Normalize forensic tool output into 5W1H trace and event objects."""

__version__ = "0.1.0"

from .classify import (  # noqa: E402
    CategoryRule,
    FilterExpr,
    classify,
    classify_collection,
    default_category_rules,
    filter_collection,
    tag_domains,
)
from .correlate import (  # noqa: E402
    DerivationRule,
    ProfileReport,
    correlate,
    default_rules,
    derive_events,
    load_rules,
    profile_subject,
)
from .exchange import export_stix_bundle, parse, serialize  # noqa: E402
from .ingest import (  # noqa: E402
    MappingProfile,
    default_profile,
    ingest_delimited,
    ingest_eventlog_export,
    ingest_relational_export,
    ingest_timeline_csv,
    load_profile,
)
from .model import (  # noqa: E402
    Category,
    Collection,
    Domain,
    EventObject,
    Timestamp,
    TraceObject,
    render_sentence,
    validate_collection,
)
from .verify import compare_tools, render_matrix  # noqa: E402

__all__ = [
    "CategoryRule",
    "FilterExpr",
    "classify",
    "classify_collection",
    "default_category_rules",
    "filter_collection",
    "tag_domains",
    "DerivationRule",
    "ProfileReport",
    "correlate",
    "default_rules",
    "derive_events",
    "load_rules",
    "profile_subject",
    "export_stix_bundle",
    "parse",
    "serialize",
    "MappingProfile",
    "default_profile",
    "ingest_delimited",
    "ingest_eventlog_export",
    "ingest_relational_export",
    "ingest_timeline_csv",
    "load_profile",
    "Category",
    "Collection",
    "Domain",
    "EventObject",
    "Timestamp",
    "TraceObject",
    "render_sentence",
    "validate_collection",
    "compare_tools",
    "render_matrix",
]
