import asyncio
import json
import logging
import os
from datetime import date, timedelta
from typing import Dict, List, Optional, Tuple, Union

from .cache import Cache
from .drivers import Driver, HttpDriver, OfflineDriver, fetch_memento
from .dtypes import (CORPUS_TOO_SMALL, FAILED, OFFSET_EXCEEDED, OK, ConfigError, CorpusTooSmall, DailyResult, DayFailed, EmptyDocument,
                     Exclusion, ExtractionError, FetchError, FetchPolicy, KResult, NoStoriesExtracted, SiteConfig, SiteDayResult, Story,
                     TimeMap, TimeMapError)
from .extractor import extract_stories, load_sites, resolve_rules
from .flow import ConcurrentMap, Filter, FlatMap, IterableSource, Map, Reduce, build_flow
from .similarity import collection_score, pairwise_matrix
from .text import CleanDocument, Corpus, build_tfidf, clean_document
from .timemap import archival_histogram, default_timemap_template, parse_timemap, select_nearest, timemap_uri
from .utils import date_range, minutes_between, parse_date, parse_k_values, parse_target_time, parse_utc_offset, target_instant
from .writers import merge_results, read_manifest, write_manifest, write_matrix

logger = logging.getLogger(__name__)

config_version = 1
default_archive_host = 'https://web.archive.org'
default_k_values = [1, 3, 10]

_run_keys = {'from', 'to', 'target_time', 'utc_offset', 'k', 'max_offset_minutes', 'mask_intra_site', 'parallelism',
             'min_host_interval', 'timeout', 'max_redirects'}
_archive_keys = {'host', 'timemap_template'}
_config_keys = {'version', 'archive', 'run', 'sites'}


class RunConfig:
    """
    Parameters of a run over a date range.

    :param sites: Sites to analyse, in output order.
    :param start: First date (inclusive).
    :param end: Last date (inclusive). Defaults to start.
    :param target_time: HH:MMZ for a UTC time of day, or HH:MM for local time at utc_offset. Defaults to 01:00Z.
    :param utc_offset: Fixed offset of the local timezone, e.g. -5 or "-05:00". Also the display timezone of archival reports.
    :param k_values: Numbers of top stories per site to score. Defaults to 1, 3 and 10.
    :param cache_dir: Cache directory. Defaults to the NEWSFLOW_CACHE_DIR environment variable, if set.
    :param offline: Serve every request from offline-index.json in cache_dir instead of the network.
    :param out_dir: Directory for run outputs.
    :param archive_host: Archive to query. Defaults to NEWSFLOW_ARCHIVE_HOST or the Internet Archive.
    :param timemap_template: TimeMap endpoint template with {host} and {uri} placeholders.
    :param max_offset_minutes: Optional limit on the distance between a selected memento and the target time.
    :param mask_intra_site: Leave pairs of stories from the same site out of the collection score.
    :param parallelism: Maximum concurrent fetches.
    :param min_host_interval: Minimum seconds between two requests to one host.
    :param timeout: Seconds allowed per request.
    :param max_redirects: Redirect hops followed per fetch.
    :param force: Recompute days already present in the output manifest.
    :param dump_matrices: Write each similarity matrix under out_dir/matrices.
    """

    def __init__(self, sites: List[SiteConfig], start: Union[str, date], end: Union[str, date, None] = None, target_time: str = '01:00Z',
                 utc_offset: Union[str, int, float, timedelta] = -5, k_values: Union[str, List[int], None] = None,
                 cache_dir: Optional[str] = None, offline: bool = False, out_dir: Optional[str] = None, archive_host: Optional[str] = None,
                 timemap_template: str = default_timemap_template, max_offset_minutes: Optional[float] = None,
                 mask_intra_site: bool = False, parallelism: int = 8, min_host_interval: float = 1.0, timeout: float = 30.0,
                 max_redirects: int = 10, force: bool = False, dump_matrices: bool = False):
        if not sites:
            raise ConfigError('At least one site must be configured')
        self.sites = sites
        try:
            self.start = parse_date(start)
            self.end = parse_date(end) if end is not None else self.start
            self.target_time, self.target_is_utc = parse_target_time(target_time)
            self.utc_offset = parse_utc_offset(utc_offset)
            self.k_values = parse_k_values(k_values if k_values is not None else default_k_values)
        except ValueError as ex:
            raise ConfigError(str(ex)) from ex
        if self.end < self.start:
            raise ConfigError(f'Empty date range {self.start} to {self.end}')
        if max_offset_minutes is not None and max_offset_minutes < 0:
            raise ConfigError('max_offset_minutes cannot be negative')
        if parallelism < 1:
            raise ConfigError('parallelism must be positive')
        self.cache_dir = cache_dir or os.getenv('NEWSFLOW_CACHE_DIR')
        self.offline = offline
        if offline and not self.cache_dir:
            raise ConfigError('Offline runs need a cache directory')
        self.out_dir = out_dir
        self.archive_host = (archive_host or os.getenv('NEWSFLOW_ARCHIVE_HOST') or default_archive_host).rstrip('/')
        self.timemap_template = timemap_template
        self.max_offset_minutes = max_offset_minutes
        self.mask_intra_site = mask_intra_site
        self.parallelism = parallelism
        self.min_host_interval = min_host_interval
        self.policy = FetchPolicy(max_redirects, timeout)
        self.force = force
        self.dump_matrices = dump_matrices

    @property
    def days(self) -> List[date]:
        return list(date_range(self.start, self.end))

    @property
    def max_k(self) -> int:
        return self.k_values[-1]

    def target_for(self, day: date):
        return target_instant(day, self.target_time, self.target_is_utc, self.utc_offset)

    def run_summary(self) -> dict:
        """Parameters recorded in the output manifest. Paths and wall-clock values are left out."""
        offset_minutes = int(self.utc_offset.total_seconds() // 60)
        return {'archive_host': self.archive_host, 'from': self.start.isoformat(), 'to': self.end.isoformat(),
                'target_time': self.target_time.strftime('%H:%M') + ('Z' if self.target_is_utc else ''),
                'utc_offset_minutes': offset_minutes, 'k': self.k_values, 'max_offset_minutes': self.max_offset_minutes,
                'mask_intra_site': self.mask_intra_site, 'sites': [site.site_id for site in self.sites]}

    def __repr__(self):
        return f'RunConfig({self.start}..{self.end}, k={self.k_values}, sites={[site.site_id for site in self.sites]})'


def _check_keys(section: dict, allowed: set, name: str):
    if not isinstance(section, dict):
        raise ConfigError(f'{name} must be an object')
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f'Got unexpected {name} keys: {sorted(unknown)}')


def config_from_dict(data: dict, **overrides) -> RunConfig:
    """
    Builds a RunConfig from a parsed config file. Keyword overrides (e.g. from the command line) take precedence over the
    run section; overrides that are None are ignored.
    """
    _check_keys(data, _config_keys, 'config')
    if data.get('version') != config_version:
        raise ConfigError(f'Unsupported config version {data.get("version")!r}, expected {config_version}')
    archive = data.get('archive', {})
    _check_keys(archive, _archive_keys, 'archive')
    run = dict(data.get('run', {}))
    _check_keys(run, _run_keys, 'run')

    kwargs = {'archive_host': archive.get('host'), 'timemap_template': archive.get('timemap_template', default_timemap_template)}
    renames = {'from': 'start', 'to': 'end', 'k': 'k_values'}
    for key, value in run.items():
        kwargs[renames.get(key, key)] = value
    for key, value in overrides.items():
        if value is not None:
            kwargs[key] = value
    if kwargs.get('start') is None:
        raise ConfigError('A start date must be given in the config run section or with --from')
    sites = load_sites(data.get('sites'))
    try:
        return RunConfig(sites, **kwargs)
    except TypeError as ex:
        raise ConfigError(str(ex)) from ex


def load_config(path: str, **overrides) -> RunConfig:
    try:
        with open(path, encoding='utf-8') as f:
            data = json.load(f)
    except (OSError, ValueError) as ex:
        raise ConfigError(f'Failed to read config {path}: {ex}') from ex
    return config_from_dict(data, **overrides)


class _Outcome:
    """A story together with its clean document, or the reason it was left out."""

    def __init__(self, story: Story, document: Optional[CleanDocument] = None, exclusion: Optional[Exclusion] = None):
        self.story = story
        self.document = document
        self.exclusion = exclusion


class ArchivalReport:
    """Per-site capture histograms, selected-memento offsets and monthly memento counts."""

    def __init__(self):
        self.histograms: Dict[str, Dict[int, int]] = {}
        self.offsets: Dict[str, List[float]] = {}
        self.counts: Dict[str, Dict[str, int]] = {}
        self.failures: Dict[str, str] = {}


class Pipeline:
    """
    Runs the per-day analysis for a RunConfig.

    For every site the TimeMap is fetched once per pipeline, the memento nearest the day's target time is selected, and the
    homepage is fetched and its stories extracted. Story pages are then fetched and cleaned, and one collection score is
    computed per k over the stories of rank k or better. Failures of a site or story exclude it and never abort the day.

    :param config: Run parameters.
    :param driver: Transport. Defaults to an OfflineDriver over the cache directory for offline runs, else an HttpDriver.
    :param cache: Fetch cache. Defaults to a Cache in config.cache_dir, if set.
    """

    def __init__(self, config: RunConfig, driver: Optional[Driver] = None, cache: Optional[Cache] = None):
        self.config = config
        self._owns_driver = driver is None
        if driver is None:
            if config.offline:
                driver = OfflineDriver(config.cache_dir)
            else:
                driver = HttpDriver(config.parallelism, config.min_host_interval)
        self._driver = driver
        if cache is None and config.cache_dir:
            cache = Cache(config.cache_dir)
        self._cache = cache
        self._timemaps: Dict[str, Union[TimeMap, Exception]] = {}
        self._timemap_locks: Dict[str, asyncio.Lock] = {}

    async def close(self):
        if self._owns_driver:
            await self._driver.close()

    async def timemap(self, site: SiteConfig) -> TimeMap:
        """The TimeMap of the site homepage. Fetched at most once per pipeline; failures are remembered too."""
        lock = self._timemap_locks.setdefault(site.site_id, asyncio.Lock())
        async with lock:
            if site.site_id not in self._timemaps:
                uri = timemap_uri(site.homepage_uri, self.config.archive_host, self.config.timemap_template)
                try:
                    result = await fetch_memento(uri, self.config.policy, self._driver, self._cache)
                    self._timemaps[site.site_id] = parse_timemap(result.body, site.homepage_uri)
                except (FetchError, TimeMapError) as ex:
                    self._timemaps[site.site_id] = ex
        cached = self._timemaps[site.site_id]
        if isinstance(cached, Exception):
            raise cached
        return cached

    async def extract_site(self, site: SiteConfig, day: date) -> SiteDayResult:
        """Selects the homepage memento of site for day and extracts up to max(k) stories from it."""
        target = self.config.target_for(day)
        try:
            tm = await self.timemap(site)
        except (FetchError, TimeMapError) as ex:
            logger.warning('No TimeMap for %s on %s: %s', site.site_id, day, ex)
            return SiteDayResult(site.site_id, getattr(ex, 'reason', FAILED), target, detail=str(ex))

        memento = select_nearest(tm, target)
        offset = minutes_between(memento.capture_datetime, target)
        result = SiteDayResult(site.site_id, OK, target, memento, offset)
        max_offset = self.config.max_offset_minutes
        if max_offset is not None and abs(offset) > max_offset:
            logger.warning('Memento of %s for %s is %.1f minutes from target, excluding site', site.site_id, day, offset)
            result.status = OFFSET_EXCEEDED
            result.detail = f'offset {offset:.1f} minutes exceeds {max_offset}'
            return result

        result.rule_set = resolve_rules(site, memento.capture_datetime).name
        try:
            homepage = await fetch_memento(memento.uri_m, self.config.policy, self._driver, self._cache)
            result.stories = extract_stories(homepage.body, site, memento.capture_datetime, homepage.final_uri, self.config.max_k,
                                             archive_host=self.config.archive_host)
        except (FetchError, NoStoriesExtracted) as ex:
            logger.warning('Excluding %s on %s (%s): %s', site.site_id, day, ex.reason, ex)
            result.status = ex.reason
            result.detail = str(ex)
        except ExtractionError as ex:
            logger.warning('Excluding %s on %s: %s', site.site_id, day, ex)
            result.status = FAILED
            result.detail = str(ex)
        return result

    async def fetch_document(self, story: Story) -> _Outcome:
        """Fetches a story page and strips it down to its main text."""
        try:
            page = await fetch_memento(story.uri, self.config.policy, self._driver, self._cache)
            document = clean_document((story.site_id, story.rank, story.capture_datetime.date()), page.body, story.uri)
        except (FetchError, EmptyDocument) as ex:
            logger.warning('Excluding %s of %s (%s): %s', story.uri, story.site_id, ex.reason, ex)
            return _Outcome(story, exclusion=Exclusion(story.uri, ex.reason, story.site_id, story.rank, str(ex)))
        if self._cache is not None:
            self._cache.store_text(story.uri, document.text)
        return _Outcome(story, document)

    async def extract_day(self, day: date) -> List[SiteDayResult]:
        """Per-site extraction for day, in site configuration order."""
        async def extract(site):
            return await self.extract_site(site, day)

        sites = build_flow([
            IterableSource(self.config.sites),
            ConcurrentMap(extract, max_in_flight=self.config.parallelism, name='extract'),
            Reduce([], lambda acc, site_result: acc + [site_result]),
        ])
        return await sites.run_async()

    async def collect_documents(self, site_results: List[SiteDayResult]) -> List[_Outcome]:
        """Fetches and cleans every extracted story, in site then rank order."""
        stories = build_flow([
            IterableSource(site_results),
            Filter(lambda site_result: site_result.ok),
            FlatMap(lambda site_result: site_result.stories),
            ConcurrentMap(self.fetch_document, max_in_flight=self.config.parallelism, name='fetch-stories'),
            Reduce([], lambda acc, outcome: acc + [outcome]),
        ])
        return await stories.run_async()

    def score_k(self, day: date, k: int, outcomes: List[_Outcome]) -> KResult:
        """Scores the collection made of the stories of rank k or better."""
        attempted = [outcome for outcome in outcomes if outcome.story.rank <= k]
        kept = [outcome for outcome in attempted if outcome.document is not None]
        excluded = [outcome.exclusion for outcome in attempted if outcome.exclusion is not None]
        documents = [outcome.story.uri for outcome in kept]
        groups = [outcome.story.site_id for outcome in kept] if self.config.mask_intra_site else None
        try:
            vectors = build_tfidf(Corpus([outcome.document for outcome in kept]))
            matrix = pairwise_matrix(vectors)
            score = collection_score(matrix, groups)
        except CorpusTooSmall as ex:
            logger.warning('No score for %s k=%d: %s', day, k, ex)
            return KResult(k, None, len(kept), len(attempted), documents, excluded, CORPUS_TOO_SMALL)
        if self.config.dump_matrices and self.config.out_dir:
            write_matrix(self.config.out_dir, day, k, matrix, documents)
        logger.info('Score for %s k=%d: %.6f over %d documents', day, k, score.s, len(kept))
        return KResult(k, score.s, len(kept), len(attempted), documents, excluded)

    async def run_day(self, day: date) -> DailyResult:
        """
        Runs the full analysis for one date.

        :raises DayFailed: no k had at least two documents. The partial DailyResult is attached.
        """
        day = parse_date(day)
        site_results = await self.extract_day(day)
        outcomes = await self.collect_documents(site_results)
        scoring = build_flow([
            IterableSource(self.config.k_values),
            Map(lambda k: self.score_k(day, k, outcomes)),
            Reduce([], lambda acc, k_result: acc + [k_result]),
        ])
        k_results = await scoring.run_async()
        result = DailyResult(day, site_results, k_results)
        if all(k_result.score is None for k_result in k_results):
            result.status = FAILED
            raise DayFailed(f'Fewer than 2 documents for every k on {day}', result)
        return result

    def _reusable(self, previous: Optional[DailyResult]) -> bool:
        if previous is None or self.config.force:
            return False
        return [k_result.k for k_result in previous.k_results] == self.config.k_values

    async def run_range(self) -> List[DailyResult]:
        """
        Runs every date of the configured range, in order. Days already in the output manifest are reused unless forced.
        A failed day is kept with status failed and does not affect the others.
        """
        previous = read_manifest(self.config.out_dir) if self.config.out_dir else {}
        results = []
        for day in self.config.days:
            done = previous.get(day.isoformat())
            if self._reusable(done):
                logger.info('Skipping %s, already in manifest', day)
                results.append(done)
                continue
            try:
                result = await self.run_day(day)
            except DayFailed as ex:
                logger.warning('Day failed: %s', ex)
                result = ex.result
            results.append(result)
            if self.config.out_dir:
                write_manifest(self.config.out_dir, merge_results(previous, results), self.config.run_summary())
        return results

    async def populate(self) -> Tuple[int, int]:
        """Fetches TimeMaps, homepages and story pages for every day without scoring. Returns (site-days, documents)."""
        site_days = documents = 0
        for day in self.config.days:
            site_results = await self.extract_day(day)
            outcomes = await self.collect_documents(site_results)
            site_days += sum(1 for site_result in site_results if site_result.ok)
            documents += sum(1 for outcome in outcomes if outcome.document is not None)
        return site_days, documents

    async def extract_range(self) -> List[DailyResult]:
        """Story extraction only: one DailyResult per day with site detail and no scores."""
        return [DailyResult(day, await self.extract_day(day), []) for day in self.config.days]

    async def report(self, month: Optional[Tuple[int, int]] = None) -> ArchivalReport:
        """Capture-hour histograms, selection offsets over the date range and monthly counts for every site."""
        report = ArchivalReport()
        for site in self.config.sites:
            try:
                tm = await self.timemap(site)
            except (FetchError, TimeMapError) as ex:
                logger.warning('Leaving %s out of the archival report: %s', site.site_id, ex)
                report.failures[site.site_id] = getattr(ex, 'reason', FAILED)
                continue
            report.histograms[site.site_id] = archival_histogram([tm], month, self.config.utc_offset)
            report.offsets[site.site_id] = [minutes_between(select_nearest(tm, target).capture_datetime, target)
                                            for target in map(self.config.target_for, self.config.days)]
            counts = {}
            for record in tm.mementos:
                year_month = record.capture_datetime.strftime('%Y-%m')
                counts[year_month] = counts.get(year_month, 0) + 1
            report.counts[site.site_id] = counts
        return report


def _run(config: RunConfig, driver: Optional[Driver], cache: Optional[Cache], method: str, *args):
    async def main():
        pipeline = Pipeline(config, driver, cache)
        try:
            return await getattr(pipeline, method)(*args)
        finally:
            await pipeline.close()

    return asyncio.run(main())


def run_day(config: RunConfig, day: Union[str, date], driver: Optional[Driver] = None, cache: Optional[Cache] = None) -> DailyResult:
    return _run(config, driver, cache, 'run_day', parse_date(day))


def run_range(config: RunConfig, driver: Optional[Driver] = None, cache: Optional[Cache] = None) -> List[DailyResult]:
    return _run(config, driver, cache, 'run_range')


def report_archival(config: RunConfig, month: Optional[Tuple[int, int]] = None, driver: Optional[Driver] = None,
                    cache: Optional[Cache] = None) -> ArchivalReport:
    return _run(config, driver, cache, 'report', month)
