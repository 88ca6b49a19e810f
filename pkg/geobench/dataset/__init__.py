from .filtering import (
    EmbeddingProvider,
    EmbeddingVector,
    FilterDecision,
    FilterResult,
    HttpEmbeddingProvider,
    TableEmbeddingProvider,
    cosine_similarity,
    filter_records,
    indoor_filter,
)
from .records import (
    CountryArea,
    ImageRecord,
    Localizability,
    ingest_manifest,
    load_country_areas,
    write_manifest,
)
from .sampling import SplitManifest, apportion, sample_by_area, split

__all__ = [
    "CountryArea",
    "EmbeddingProvider",
    "EmbeddingVector",
    "FilterDecision",
    "FilterResult",
    "HttpEmbeddingProvider",
    "ImageRecord",
    "Localizability",
    "SplitManifest",
    "TableEmbeddingProvider",
    "apportion",
    "cosine_similarity",
    "filter_records",
    "indoor_filter",
    "ingest_manifest",
    "load_country_areas",
    "sample_by_area",
    "split",
    "write_manifest",
]
