import logging
import re
import statistics
from datetime import datetime, timedelta
from typing import Dict, List, Optional, Tuple
from urllib.parse import quote

from .dtypes import ArchivalStats, EmptyInput, EmptyTimeMap, MalformedTimeMap, MementoRecord, OffsetSummary, TimeMap
from .utils import format_http_datetime, minutes_between, parse_archive_timestamp, parse_http_datetime, parse_utc_offset, to_utc

logger = logging.getLogger(__name__)

default_timemap_template = '{host}/web/timemap/link/{uri}'

# Archive path timestamp, optionally followed by a replay modifier such as id_.
_uri_m_timestamp_pattern = re.compile(r'/(\d{14})(?:[a-z]{2}_)?/')
_excluded_relations = {'original', 'self', 'timegate', 'timemap'}


def timemap_uri(original_uri: str, host: str, template: str = default_timemap_template) -> str:
    """Expands a TimeMap endpoint template for one original URI."""
    return template.format(host=host.rstrip('/'), uri=quote(original_uri, safe=':/?&=%#~+,;@'))


def _skip_whitespace(body, pos):
    while pos < len(body) and body[pos].isspace():
        pos += 1
    return pos


def _parse_link_entries(body: str) -> List[Tuple[str, Dict[str, str]]]:
    """Splits link-format text into (target, attributes) pairs.

    Quoted values may contain commas and semicolons (RFC 1123 datetimes do), so the text is scanned rather than split.
    """
    entries = []
    pos = _skip_whitespace(body, 0)
    while pos < len(body):
        if body[pos] != '<':
            raise MalformedTimeMap(f'Expected "<" at offset {pos}')
        end = body.find('>', pos)
        if end == -1:
            raise MalformedTimeMap(f'Unterminated link target at offset {pos}')
        target = body[pos + 1:end].strip()
        pos = _skip_whitespace(body, end + 1)
        attributes = {}
        while pos < len(body) and body[pos] == ';':
            pos = _skip_whitespace(body, pos + 1)
            equals = body.find('=', pos)
            if equals == -1:
                raise MalformedTimeMap(f'Expected attribute at offset {pos}')
            name = body[pos:equals].strip().lower()
            if not name or any(char in name for char in ',;<>"'):
                raise MalformedTimeMap(f'Bad attribute name {name!r} at offset {pos}')
            pos = _skip_whitespace(body, equals + 1)
            if pos < len(body) and body[pos] == '"':
                close = body.find('"', pos + 1)
                if close == -1:
                    raise MalformedTimeMap(f'Unterminated quoted value at offset {pos}')
                value = body[pos + 1:close]
                pos = close + 1
            else:
                start = pos
                while pos < len(body) and body[pos] not in ';,' and not body[pos].isspace():
                    pos += 1
                value = body[start:pos]
            attributes[name] = value
            pos = _skip_whitespace(body, pos)
        entries.append((target, attributes))
        if pos < len(body):
            if body[pos] != ',':
                raise MalformedTimeMap(f'Expected "," at offset {pos}')
            pos = _skip_whitespace(body, pos + 1)
    return entries


def _capture_datetime(uri_m: str, attributes: Dict[str, str]) -> datetime:
    from_path = None
    match = _uri_m_timestamp_pattern.search(uri_m)
    if match:
        from_path = parse_archive_timestamp(match.group(1))
    from_attribute = None
    if 'datetime' in attributes:
        try:
            from_attribute = parse_http_datetime(attributes['datetime'])
        except ValueError as ex:
            raise MalformedTimeMap(str(ex)) from ex
    if from_path and from_attribute and from_path != from_attribute.replace(microsecond=0):
        raise MalformedTimeMap(f'Path timestamp {from_path} and datetime attribute {from_attribute} disagree for {uri_m}')
    capture = from_attribute or from_path
    if capture is None:
        raise MalformedTimeMap(f'No capture datetime for {uri_m}')
    return capture


def parse_timemap(body: str, original_uri: str) -> TimeMap:
    """
    Parses an RFC 7089 link-format TimeMap.

    :param body: link-format text.
    :param original_uri: URI the TimeMap was requested for; every record is attributed to it.
    :returns: TimeMap with the memento entries sorted ascending by capture datetime.
    """
    if isinstance(body, bytes):
        body = body.decode('utf-8', errors='replace')
    if not body or not body.strip():
        raise MalformedTimeMap(f'Empty TimeMap body for {original_uri}')
    mementos = []
    seen = set()
    for target, attributes in _parse_link_entries(body):
        relations = attributes.get('rel', '').lower().split()
        if 'memento' not in relations or _excluded_relations.intersection(relations):
            continue
        record = MementoRecord(target, original_uri, _capture_datetime(target, attributes))
        key = (record.uri_m, record.capture_datetime)
        if key in seen:
            continue
        seen.add(key)
        mementos.append(record)
    if not mementos:
        raise EmptyTimeMap(f'No mementos for {original_uri}')
    mementos.sort(key=lambda record: record.capture_datetime)
    logger.debug('Parsed %d mementos for %s', len(mementos), original_uri)
    return TimeMap(original_uri, mementos)


def serialize_timemap(tm: TimeMap) -> str:
    """Serializes a TimeMap back to link-format: the original entry followed by one memento entry per record."""
    lines = [f'<{tm.original_uri}>; rel="original"']
    for record in tm.mementos:
        lines.append(f'<{record.uri_m}>; rel="memento"; datetime="{format_http_datetime(record.capture_datetime)}"')
    return ',\n'.join(lines) + '\n'


def select_nearest(tm: TimeMap, target: datetime) -> MementoRecord:
    """Returns the memento closest in time to target. On an exact tie the earlier capture wins."""
    if not tm.mementos:
        raise EmptyTimeMap(f'No mementos for {tm.original_uri}')
    target = to_utc(target)
    best = None
    best_distance = None
    for record in tm.mementos:
        distance = abs(record.capture_datetime - target)
        # Strict comparison keeps the earlier record of a tie since mementos are ascending.
        if best is None or distance < best_distance:
            best = record
            best_distance = distance
    return best


def filter_month(tm: TimeMap, year: int, month: int) -> List[MementoRecord]:
    return [record for record in tm.mementos if record.capture_datetime.year == year and record.capture_datetime.month == month]


def archival_histogram(tms: List[TimeMap], month: Optional[Tuple[int, int]] = None, utc_offset=timedelta(0)) -> Dict[int, int]:
    """
    Counts mementos per hour of day after shifting them into a fixed-offset display timezone.

    :param tms: TimeMaps to count.
    :param month: Optional (year, month) filter, applied to the UTC capture datetime.
    :param utc_offset: Fixed offset of the display timezone, e.g. -5 hours for US Eastern standard time.
    :returns: Dict with all 24 hours as keys.
    """
    utc_offset = parse_utc_offset(utc_offset)
    histogram = {hour: 0 for hour in range(24)}
    for tm in tms:
        records = filter_month(tm, *month) if month else tm.mementos
        for record in records:
            histogram[(record.capture_datetime + utc_offset).hour] += 1
    return histogram


def offset_stats(selections: List[Tuple[MementoRecord, datetime]]) -> OffsetSummary:
    """Signed offsets in minutes of the selected mementos from their targets. Negative when the capture precedes the target."""
    if not selections:
        raise EmptyInput('offset_stats needs at least one selection')
    offsets = [minutes_between(record.capture_datetime, target) for record, target in selections]
    return OffsetSummary(offsets, min(offsets), statistics.mean(offsets), max(offsets))


def archival_stats(tms: List[TimeMap], selections: List[Tuple[MementoRecord, datetime]], month: Optional[Tuple[int, int]] = None,
                   utc_offset=timedelta(0)) -> ArchivalStats:
    summary = offset_stats(selections) if selections else None
    return ArchivalStats(archival_histogram(tms, month, utc_offset), summary.offsets if summary else [], summary)
