__version__ = '0.1.0'

from .cache import (  # noqa: F401
    Cache
)
from .drivers import (  # noqa: F401
    Driver, HttpDriver, OfflineDriver, fetch_memento
)
from .dtypes import (  # noqa: F401
    NewsflowError, FlowError, ConfigError, FetchError, HttpError, TooManyRedirects, FetchTimeout, EmptyDocument, CorpusTooSmall,
    DayFailed, OutputUnwritable, MementoRecord, TimeMap, FetchPolicy, FetchResult, RuleSet, SiteConfig, Story, DailyResult
)
from .extractor import (  # noqa: F401
    extract_stories, load_sites, normalize_story_uri, resolve_rules
)
from .flow import (  # noqa: F401
    Flow, IterableSource, Map, Filter, FlatMap, Reduce, ConcurrentMap, build_flow
)
from .pipeline import (  # noqa: F401
    Pipeline, RunConfig, load_config, report_archival, run_day, run_range
)
from .similarity import (  # noqa: F401
    CollectionScore, SimilarityMatrix, collection_score, cosine, frobenius_norm, pairwise_matrix
)
from .text import (  # noqa: F401
    CleanDocument, Corpus, TermVector, build_tfidf, strip_boilerplate, tokenize
)
from .timemap import (  # noqa: F401
    archival_histogram, offset_stats, parse_timemap, select_nearest, serialize_timemap
)
from .writers import (  # noqa: F401
    emit_series
)
