import logging
import re
from datetime import datetime
from typing import List, Optional, Tuple
from urllib.parse import urldefrag, urljoin, urlsplit

from bs4 import BeautifulSoup
from soupsieve import SelectorSyntaxError

from .dtypes import ConfigError, MalformedArchiveUri, NoApplicableRules, NoStoriesExtracted, RuleSet, SiteConfig, Story
from .utils import decode_html, format_archive_timestamp, to_utc

logger = logging.getLogger(__name__)

_replay_pattern = re.compile(r'^(https?)://([^/]+)/web/(\d{14})(?:[a-z]{2}_)?/(.*)$', re.IGNORECASE)
_allowed_schemes = ('http', 'https')


def resolve_rules(config: SiteConfig, capture_date) -> RuleSet:
    """Returns the highest priority rule set of config whose date range contains capture_date."""
    if isinstance(capture_date, datetime):
        capture_date = to_utc(capture_date).date()
    for rule_set in config.rule_sets:
        if rule_set.covers(capture_date):
            return rule_set
    raise NoApplicableRules(f'No rule set of {config.site_id} applies to {capture_date}')


def _archive_base(archive_host: str) -> str:
    if '://' not in archive_host:
        archive_host = f'https://{archive_host}'
    return archive_host.rstrip('/')


def normalize_story_uri(uri: str, archive_host: str, capture_datetime: datetime) -> Tuple[str, str]:
    """
    Splits or builds the archive form of a story URI.

    :param uri: Absolute story URI, either an archive replay URI or a live-web URI.
    :param archive_host: Archive host, with or without scheme (https assumed).
    :param capture_datetime: Capture time of the homepage memento; used to build archive URIs for live-web links.
    :returns: (archive URI, original URI)
    """
    base = _archive_base(archive_host)
    match = _replay_pattern.match(uri)
    if match and match.group(2).lower() == urlsplit(base).netloc.lower():
        original = match.group(4)
        parts = urlsplit(original)
        if parts.scheme.lower() not in _allowed_schemes or not parts.netloc:
            raise MalformedArchiveUri(f'Archive URI {uri} does not wrap an absolute URI')
        return uri, original
    return f'{base}/web/{format_archive_timestamp(capture_datetime)}/{uri}', uri


def dedup_key(uri: str) -> str:
    """Identity of a story: scheme, trailing slash and fragment are ignored."""
    parts = urlsplit(uri)
    key = parts.netloc.lower() + parts.path.rstrip('/')
    if parts.query:
        key += '?' + parts.query
    return key


def _resolve_link(href: str, base_uri: str, archive_host: str, homepage_uri: str) -> str:
    """
    Absolute form of a story link. Root-relative links on a replayed page land on the archive host itself; those are
    resolved against the original URI of the page instead.
    """
    absolute = urljoin(base_uri, href)
    archive_netloc = urlsplit(_archive_base(archive_host)).netloc.lower()
    if urlsplit(absolute).netloc.lower() == archive_netloc and not _replay_pattern.match(absolute):
        base = _replay_pattern.match(base_uri)
        absolute = urljoin(base.group(4) if base else homepage_uri, href)
    return urldefrag(absolute)[0]


def _select(soup, selector):
    try:
        return soup.select(selector)
    except SelectorSyntaxError as ex:
        raise ConfigError(f'Invalid CSS selector {selector!r}: {ex}') from ex


def _link_of(element, link_attribute):
    if element.has_attr(link_attribute):
        return element[link_attribute]
    inner = element.find(lambda tag: tag.has_attr(link_attribute))
    if inner is not None:
        return inner[link_attribute]
    outer = element.find_parent(lambda tag: tag.has_attr(link_attribute))
    if outer is not None:
        return outer[link_attribute]
    return None


def _candidate(element, rule_set: RuleSet) -> Optional[Tuple[str, str]]:
    href = _link_of(element, rule_set.link_attribute)
    if isinstance(href, list):
        href = ' '.join(href)
    if not href or not href.strip():
        return None
    if rule_set.title_source == 'text':
        title = element.get_text(' ')
    else:
        title = element.get(rule_set.title_source) or ''
    title = ' '.join(title.split())
    if not title:
        return None
    return title, href.strip()


def extract_stories(html, config: SiteConfig, capture_datetime: datetime, base_uri: str, k: int,
                    archive_host: Optional[str] = None) -> List[Story]:
    """
    Extracts up to k ranked stories from a homepage memento.

    The first usable match of the hero selectors, tried in order, becomes rank 1. Headline selector matches follow, selector by
    selector, each in document order. When no hero selector matches, the first headline is promoted to Hero. Stories sharing a
    dedup key keep their lowest rank; links with non-HTTP(S) schemes are dropped.

    :param html: Homepage bytes.
    :param config: Site configuration; the rule set is resolved for the capture date.
    :param capture_datetime: Capture time of the homepage memento.
    :param base_uri: URI relative links resolve against, normally the memento URI.
    :param k: Maximum number of stories.
    :param archive_host: Archive host for story URIs. Defaults to the scheme and host of base_uri.
    """
    if k < 1:
        raise ValueError(f'k must be >= 1, got {k}')
    capture_datetime = to_utc(capture_datetime)
    if archive_host is None:
        parts = urlsplit(base_uri)
        archive_host = f'{parts.scheme}://{parts.netloc}'
    rule_set = resolve_rules(config, capture_datetime.date())
    soup = BeautifulSoup(decode_html(html), 'html.parser')

    hero = None
    for selector in rule_set.hero_selectors:
        for element in _select(soup, selector):
            hero = _candidate(element, rule_set)
            if hero:
                break
        if hero:
            break
    if hero is None and rule_set.hero_selectors:
        logger.debug('No hero match for %s with %s, promoting first headline', config.site_id, rule_set)

    candidates = [hero] if hero else []
    for selector in rule_set.headline_selectors:
        for element in _select(soup, selector):
            candidate = _candidate(element, rule_set)
            if candidate:
                candidates.append(candidate)

    limit = min(k, config.max_stories) if config.max_stories else k
    stories = []
    seen = set()
    for title, href in candidates:
        absolute = _resolve_link(href, base_uri, archive_host, config.homepage_uri)
        if urlsplit(absolute).scheme.lower() not in _allowed_schemes:
            continue
        try:
            uri, original = normalize_story_uri(absolute, archive_host, capture_datetime)
        except MalformedArchiveUri as ex:
            logger.warning('Skipping story link of %s: %s', config.site_id, ex)
            continue
        key = dedup_key(original)
        if key in seen:
            continue
        seen.add(key)
        stories.append(Story(len(stories) + 1, title, uri, original, config.site_id, capture_datetime))
        if len(stories) == limit:
            break

    if not stories:
        raise NoStoriesExtracted(f'No stories extracted for {config.site_id} at {capture_datetime} with {rule_set}')
    return stories


def load_sites(data: List[dict]) -> List[SiteConfig]:
    """Builds SiteConfig objects from the sites array of a config file. site_id must be unique."""
    if not isinstance(data, list) or not data:
        raise ConfigError('sites must be a non-empty list')
    sites = [SiteConfig.from_dict(site) for site in data]
    site_ids = [site.site_id for site in sites]
    duplicates = sorted({site_id for site_id in site_ids if site_ids.count(site_id) > 1})
    if duplicates:
        raise ConfigError(f'Duplicate site_id values: {duplicates}')
    return sites
