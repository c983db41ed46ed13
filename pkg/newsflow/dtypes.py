from datetime import date, datetime
from typing import Dict, List, Optional

from .utils import parse_date, parse_http_datetime, to_utc

# Reason codes recorded for every excluded URI, site or score row.
HTTP_ERROR = 'http-error'
REDIRECT_LOOP = 'redirect-loop'
TIMEOUT = 'timeout'
EMPTY_DOCUMENT = 'empty-document'
NO_STORIES = 'no-stories'
NO_MEMENTOS = 'no-mementos'
OFFSET_EXCEEDED = 'offset-exceeded'
CORPUS_TOO_SMALL = 'corpus-too-small'

OK = 'ok'
FAILED = 'failed'


class NewsflowError(Exception):
    pass


class FlowError(NewsflowError):
    pass


class ConfigError(NewsflowError):
    pass


class NoApplicableRules(ConfigError):
    pass


class TimeMapError(NewsflowError):
    pass


class MalformedTimeMap(TimeMapError):
    pass


class EmptyTimeMap(TimeMapError):
    reason = NO_MEMENTOS


class FetchError(NewsflowError):
    reason = HTTP_ERROR

    def __init__(self, message, uri=None):
        super().__init__(message)
        self.uri = uri


class HttpError(FetchError):
    reason = HTTP_ERROR

    def __init__(self, status, uri=None):
        super().__init__(f'Got HTTP {status} for {uri}', uri)
        self.status = status


class TooManyRedirects(FetchError):
    reason = REDIRECT_LOOP


class FetchTimeout(FetchError):
    reason = TIMEOUT


class ExtractionError(NewsflowError):
    pass


class NoStoriesExtracted(ExtractionError):
    reason = NO_STORIES


class MalformedArchiveUri(ExtractionError):
    pass


class EmptyDocument(NewsflowError):
    reason = EMPTY_DOCUMENT


class EmptyInput(NewsflowError, ValueError):
    pass


class CorpusTooSmall(NewsflowError):
    reason = CORPUS_TOO_SMALL


class DimensionMismatch(NewsflowError):
    pass


class InvalidSimilarityMatrix(NewsflowError):
    pass


class DayFailed(NewsflowError):
    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class OutputUnwritable(NewsflowError):
    pass


def format_iso(dt: Optional[datetime]) -> Optional[str]:
    if dt is None:
        return None
    return to_utc(dt).strftime('%Y-%m-%dT%H:%M:%SZ')


def _parse_iso(value: Optional[str]) -> Optional[datetime]:
    if value is None:
        return None
    return parse_http_datetime(value)


class MementoRecord:
    """One archived snapshot of an original URI.

    :param uri_m: Absolute URI of the archived copy.
    :param original_uri: Absolute URI of the resource that was archived.
    :param capture_datetime: Capture time, UTC, second precision.
    """

    def __init__(self, uri_m: str, original_uri: str, capture_datetime: datetime):
        self.uri_m = uri_m
        self.original_uri = original_uri
        self.capture_datetime = to_utc(capture_datetime).replace(microsecond=0)

    def __eq__(self, other):
        if not isinstance(other, MementoRecord):
            return False
        return self.uri_m == other.uri_m and self.original_uri == other.original_uri and \
            self.capture_datetime == other.capture_datetime

    def __hash__(self):
        return hash((self.uri_m, self.capture_datetime))

    def __repr__(self):
        return f'MementoRecord({self.uri_m!r}, {format_iso(self.capture_datetime)})'

    def to_dict(self):
        return {'uri_m': self.uri_m, 'original_uri': self.original_uri, 'capture_datetime': format_iso(self.capture_datetime)}

    @staticmethod
    def from_dict(data):
        return MementoRecord(data['uri_m'], data['original_uri'], _parse_iso(data['capture_datetime']))


class TimeMap:
    """Ordered list of the mementos of one original URI, ascending by capture time."""

    def __init__(self, original_uri: str, mementos: Optional[List[MementoRecord]] = None):
        self.original_uri = original_uri
        self.mementos = mementos or []

    def __len__(self):
        return len(self.mementos)

    def __iter__(self):
        return iter(self.mementos)

    def __repr__(self):
        return f'TimeMap({self.original_uri!r}, {len(self.mementos)} mementos)'


class OffsetSummary:
    def __init__(self, offsets: List[float], minimum: float, mean: float, maximum: float):
        self.offsets = offsets
        self.min = minimum
        self.mean = mean
        self.max = maximum

    def __repr__(self):
        return f'OffsetSummary(n={len(self.offsets)}, min={self.min}, mean={self.mean}, max={self.max})'


class ArchivalStats:
    """Capture density per hour of day plus the offsets of the mementos selected for each site-day."""

    def __init__(self, hour_histogram: Dict[int, int], offset_minutes: List[float], summary: Optional[OffsetSummary]):
        self.hour_histogram = hour_histogram
        self.offset_minutes = offset_minutes
        self.summary = summary


class FetchPolicy:
    """
    Limits applied when fetching a memento.

    :param max_redirects: Maximum redirect hops followed before giving up. Defaults to 10.
    :param timeout: Total seconds allowed per request. Defaults to 30.
    """

    def __init__(self, max_redirects: int = 10, timeout: float = 30.0):
        if max_redirects < 0:
            raise ConfigError('max_redirects cannot be negative')
        if timeout <= 0:
            raise ConfigError('timeout must be positive')
        self.max_redirects = max_redirects
        self.timeout = timeout


class RawResponse:
    """A single hop as returned by a driver. Redirects are not followed at this level."""

    def __init__(self, status: int, body: bytes = b'', content_type: Optional[str] = None, location: Optional[str] = None):
        self.status = status
        self.body = body
        self.content_type = content_type
        self.location = location


class FetchResult:
    def __init__(self, status: int, final_uri: str, body: bytes, content_type: Optional[str] = None):
        self.status = status
        self.final_uri = final_uri
        self.body = body
        self.content_type = content_type

    def __repr__(self):
        return f'FetchResult({self.status}, {self.final_uri!r}, {len(self.body)} bytes)'


class RuleSet:
    """
    Date-scoped CSS selector rules for one site.

    :param hero_selectors: Selectors tried in order; the first match is the Hero story.
    :param headline_selectors: Selectors whose matches, in document order, give the subsequent headlines.
    :param priority: Higher priority rule sets win when several cover the same date.
    :param valid_from: First date (inclusive) the rules apply to. None for unbounded.
    :param valid_to: Last date (inclusive) the rules apply to. None for unbounded.
    :param link_attribute: Attribute holding the story URI. Defaults to href.
    :param title_source: 'text' for element text, or the name of an attribute holding the title.
    :param name: Label used in logs and manifests.
    """

    _keys = {'name', 'valid_from', 'valid_to', 'priority', 'hero_selectors', 'headline_selectors', 'link_attribute', 'title_source'}

    def __init__(self, hero_selectors: Optional[List[str]] = None, headline_selectors: Optional[List[str]] = None, priority: int = 0,
                 valid_from: Optional[date] = None, valid_to: Optional[date] = None, link_attribute: str = 'href',
                 title_source: str = 'text', name: Optional[str] = None):
        self.hero_selectors = list(hero_selectors or [])
        self.headline_selectors = list(headline_selectors or [])
        if not self.hero_selectors and not self.headline_selectors:
            raise ConfigError('A rule set needs at least one hero or headline selector')
        self.valid_from = parse_date(valid_from) if valid_from is not None else None
        self.valid_to = parse_date(valid_to) if valid_to is not None else None
        if self.valid_from and self.valid_to and self.valid_from > self.valid_to:
            raise ConfigError(f'valid_from {self.valid_from} is after valid_to {self.valid_to}')
        if not isinstance(priority, int):
            raise ConfigError(f'priority must be an integer, got {priority!r}')
        self.priority = priority
        self.link_attribute = link_attribute
        self.title_source = title_source
        self.name = name or ('default' if self.unbounded else f'{self.valid_from}..{self.valid_to}')

    @property
    def unbounded(self):
        return self.valid_from is None and self.valid_to is None

    def covers(self, day: date) -> bool:
        if self.valid_from and day < self.valid_from:
            return False
        if self.valid_to and day > self.valid_to:
            return False
        return True

    def __repr__(self):
        return f'RuleSet({self.name!r}, priority={self.priority})'

    @staticmethod
    def from_dict(data):
        unknown = set(data) - RuleSet._keys
        if unknown:
            raise ConfigError(f'Got unexpected rule set keys: {sorted(unknown)}')
        try:
            return RuleSet(**data)
        except (TypeError, ValueError) as ex:
            raise ConfigError(f'Invalid rule set {data.get("name")!r}: {ex}') from ex

    def to_dict(self):
        return {'name': self.name, 'valid_from': self.valid_from and self.valid_from.isoformat(),
                'valid_to': self.valid_to and self.valid_to.isoformat(), 'priority': self.priority,
                'hero_selectors': self.hero_selectors, 'headline_selectors': self.headline_selectors,
                'link_attribute': self.link_attribute, 'title_source': self.title_source}


class SiteConfig:
    """
    Extraction configuration for one news site.

    :param site_id: Short unique name, e.g. usatoday.
    :param homepage_uri: URI of the homepage whose mementos are analysed.
    :param rule_sets: Rule sets; kept ordered by priority, highest first. At least one must have no date bounds.
    :param max_stories: Optional per-site cap applied in addition to k. Defaults to no cap.
    """

    _keys = {'site_id', 'homepage_uri', 'rule_sets', 'max_stories'}

    def __init__(self, site_id: str, homepage_uri: str, rule_sets: List[RuleSet], max_stories: Optional[int] = None):
        if not site_id:
            raise ConfigError('site_id cannot be empty')
        self.site_id = site_id
        self.homepage_uri = homepage_uri
        self.rule_sets = sorted(rule_sets, key=lambda rule_set: -rule_set.priority)
        if not any(rule_set.unbounded for rule_set in self.rule_sets):
            raise ConfigError(f'Site {site_id} needs a default rule set without date bounds')
        if max_stories is not None and max_stories < 1:
            raise ConfigError(f'max_stories must be >= 1 for site {site_id}')
        self.max_stories = max_stories

    def __repr__(self):
        return f'SiteConfig({self.site_id!r})'

    @staticmethod
    def from_dict(data):
        unknown = set(data) - SiteConfig._keys
        if unknown:
            raise ConfigError(f'Got unexpected site keys: {sorted(unknown)}')
        for key in ('site_id', 'homepage_uri', 'rule_sets'):
            if key not in data:
                raise ConfigError(f'{key} must be specified for every site')
        rule_sets = [RuleSet.from_dict(rule_set) for rule_set in data['rule_sets']]
        return SiteConfig(data['site_id'], data['homepage_uri'], rule_sets, data.get('max_stories'))

    def to_dict(self):
        return {'site_id': self.site_id, 'homepage_uri': self.homepage_uri, 'max_stories': self.max_stories,
                'rule_sets': [rule_set.to_dict() for rule_set in self.rule_sets]}


class Story:
    """A ranked headline extracted from one homepage memento. Rank 1 is the Hero story."""

    def __init__(self, rank: int, title: str, uri: str, original_uri: str, site_id: str, capture_datetime: datetime):
        self.rank = rank
        self.title = title
        self.uri = uri
        self.original_uri = original_uri
        self.site_id = site_id
        self.capture_datetime = to_utc(capture_datetime)

    @property
    def is_hero(self):
        return self.rank == 1

    def __eq__(self, other):
        if not isinstance(other, Story):
            return False
        return self.to_dict() == other.to_dict()

    def __repr__(self):
        return f'Story({self.site_id}#{self.rank}, {self.title!r}, {self.original_uri!r})'

    def to_dict(self):
        return {'rank': self.rank, 'title': self.title, 'uri': self.uri, 'original_uri': self.original_uri, 'is_hero': self.is_hero,
                'site_id': self.site_id, 'capture_datetime': format_iso(self.capture_datetime)}

    @staticmethod
    def from_dict(data):
        return Story(data['rank'], data['title'], data['uri'], data['original_uri'], data['site_id'], _parse_iso(data['capture_datetime']))


class Exclusion:
    """A URI left out of a day's computation, with a machine-readable reason code."""

    def __init__(self, uri: str, reason: str, site_id: Optional[str] = None, rank: Optional[int] = None, detail: Optional[str] = None):
        self.uri = uri
        self.reason = reason
        self.site_id = site_id
        self.rank = rank
        self.detail = detail

    def __repr__(self):
        return f'Exclusion({self.uri!r}, {self.reason})'

    def to_dict(self):
        return {'uri': self.uri, 'reason': self.reason, 'site_id': self.site_id, 'rank': self.rank, 'detail': self.detail}

    @staticmethod
    def from_dict(data):
        return Exclusion(data['uri'], data['reason'], data.get('site_id'), data.get('rank'), data.get('detail'))


class KResult:
    """Score of one day's collection for one value of k. score is None when fewer than two documents remain."""

    def __init__(self, k: int, score: Optional[float], n_documents: int, attempted: int, documents: List[str],
                 excluded: List[Exclusion], reason: Optional[str] = None):
        self.k = k
        self.score = score
        self.n_documents = n_documents
        self.attempted = attempted
        self.documents = documents
        self.excluded = excluded
        self.reason = reason

    @property
    def n_excluded(self):
        return len(self.excluded)

    def to_dict(self):
        return {'k': self.k, 'score': self.score, 'n_documents': self.n_documents, 'attempted': self.attempted,
                'documents': self.documents, 'excluded': [exclusion.to_dict() for exclusion in self.excluded], 'reason': self.reason}

    @staticmethod
    def from_dict(data):
        return KResult(data['k'], data['score'], data['n_documents'], data['attempted'], data['documents'],
                       [Exclusion.from_dict(exclusion) for exclusion in data['excluded']], data.get('reason'))


class SiteDayResult:
    """What happened for one site on one day: the memento used, its offset, the rule set and the stories."""

    def __init__(self, site_id: str, status: str = OK, target: Optional[datetime] = None, memento: Optional[MementoRecord] = None,
                 offset_minutes: Optional[float] = None, rule_set: Optional[str] = None, stories: Optional[List[Story]] = None,
                 detail: Optional[str] = None):
        self.site_id = site_id
        self.status = status
        self.target = target
        self.memento = memento
        self.offset_minutes = offset_minutes
        self.rule_set = rule_set
        self.stories = stories or []
        self.detail = detail

    @property
    def ok(self):
        return self.status == OK

    def to_dict(self):
        return {'site_id': self.site_id, 'status': self.status, 'target': format_iso(self.target),
                'memento': self.memento.to_dict() if self.memento else None, 'offset_minutes': self.offset_minutes,
                'rule_set': self.rule_set, 'stories': [story.to_dict() for story in self.stories], 'detail': self.detail}

    @staticmethod
    def from_dict(data):
        memento = MementoRecord.from_dict(data['memento']) if data.get('memento') else None
        return SiteDayResult(data['site_id'], data['status'], _parse_iso(data.get('target')), memento, data.get('offset_minutes'),
                             data.get('rule_set'), [Story.from_dict(story) for story in data.get('stories', [])], data.get('detail'))


class DailyResult:
    """Everything computed for one date: per-site extraction detail and one KResult per k."""

    def __init__(self, day: date, sites: List[SiteDayResult], k_results: List[KResult], status: str = OK):
        self.date = day
        self.sites = sites
        self.k_results = k_results
        self.status = status

    @property
    def failed(self):
        return self.status == FAILED

    def result_for(self, k):
        for k_result in self.k_results:
            if k_result.k == k:
                return k_result
        raise KeyError(k)

    def __repr__(self):
        scores = {k_result.k: k_result.score for k_result in self.k_results}
        return f'DailyResult({self.date}, {self.status}, {scores})'

    def to_dict(self):
        return {'date': self.date.isoformat(), 'status': self.status, 'sites': [site.to_dict() for site in self.sites],
                'k_results': [k_result.to_dict() for k_result in self.k_results]}

    @staticmethod
    def from_dict(data):
        return DailyResult(parse_date(data['date']), [SiteDayResult.from_dict(site) for site in data['sites']],
                           [KResult.from_dict(k_result) for k_result in data['k_results']], data['status'])
