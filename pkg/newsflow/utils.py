import hashlib
import re
from datetime import date, datetime, time, timedelta, timezone
from email.utils import format_datetime, parsedate_to_datetime
from typing import Iterator, List, Tuple, Union

archive_timestamp_format = '%Y%m%d%H%M%S'
_archive_timestamp_pattern = re.compile(r'^\d{14}$')
_utc_offset_pattern = re.compile(r'^([+-])?(\d{1,2})(?::?(\d{2}))?$')
_target_time_pattern = re.compile(r'^(\d{1,2}):(\d{2})(Z?)$')


def parse_archive_timestamp(timestamp: str) -> datetime:
    """Parses a 14 digit archive path timestamp (YYYYMMDDhhmmss) into an aware UTC datetime."""
    if not _archive_timestamp_pattern.match(timestamp):
        raise ValueError(f'Failed to parse archive timestamp "{timestamp}"')
    return datetime.strptime(timestamp, archive_timestamp_format).replace(tzinfo=timezone.utc)


def format_archive_timestamp(dt: datetime) -> str:
    return to_utc(dt).strftime(archive_timestamp_format)


def parse_http_datetime(value: str) -> datetime:
    """Parses a link-format datetime attribute. RFC 1123 is the norm, ISO 8601 is tolerated."""
    value = value.strip()
    if value.endswith('Z') or 'T' in value:
        try:
            return to_utc(datetime.fromisoformat(value.replace('Z', '+00:00')))
        except ValueError:
            pass
    try:
        parsed = parsedate_to_datetime(value)
    except (TypeError, ValueError, IndexError):
        parsed = None
    if parsed is None:
        raise ValueError(f'Failed to parse datetime "{value}"')
    return to_utc(parsed)


def format_http_datetime(dt: datetime) -> str:
    return format_datetime(to_utc(dt), usegmt=True)


def to_utc(dt: datetime) -> datetime:
    if dt.tzinfo is None:
        return dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def parse_date(value: Union[str, date]) -> date:
    if isinstance(value, datetime):
        return to_utc(value).date()
    if isinstance(value, date):
        return value
    try:
        return date.fromisoformat(value)
    except (TypeError, ValueError):
        raise ValueError(f'Failed to parse date "{value}"')


def parse_utc_offset(value: Union[str, int, float, timedelta]) -> timedelta:
    """Parses a fixed UTC offset such as -5, +5:30 or -05:00. No DST rules are applied."""
    if isinstance(value, timedelta):
        return value
    if isinstance(value, (int, float)):
        return timedelta(hours=value)
    match = _utc_offset_pattern.match(value.strip())
    if not match:
        raise ValueError(f'Failed to parse UTC offset "{value}"')
    sign, hours, minutes = match.groups()
    offset = timedelta(hours=int(hours), minutes=int(minutes or 0))
    if offset > timedelta(hours=14):
        raise ValueError(f'UTC offset out of range "{value}"')
    return -offset if sign == '-' else offset


def parse_target_time(value: str) -> Tuple[time, bool]:
    """Parses HH:MM or HH:MMZ. Returns the time of day and whether it is UTC (trailing Z)."""
    match = _target_time_pattern.match(value.strip())
    if not match:
        raise ValueError(f'Failed to parse target time "{value}"')
    hours, minutes, zulu = match.groups()
    if int(hours) > 23 or int(minutes) > 59:
        raise ValueError(f'Target time out of range "{value}"')
    return time(int(hours), int(minutes)), bool(zulu)


def target_instant(day: date, target_time: time, is_utc: bool, utc_offset: timedelta) -> datetime:
    """The UTC instant to select mementos around for one run date."""
    naive = datetime.combine(day, target_time)
    if is_utc:
        return naive.replace(tzinfo=timezone.utc)
    return (naive - utc_offset).replace(tzinfo=timezone.utc)


def parse_k_values(value: Union[str, List[int]]) -> List[int]:
    if isinstance(value, str):
        try:
            value = [int(part) for part in value.split(',') if part.strip()]
        except ValueError:
            raise ValueError(f'Failed to parse k values "{value}"')
    k_values = sorted(set(value))
    if not k_values or k_values[0] < 1:
        raise ValueError(f'k values must be a non-empty list of integers >= 1, got {value}')
    return k_values


def date_range(start: date, end: date) -> Iterator[date]:
    day = start
    while day <= end:
        yield day
        day += timedelta(days=1)


def minutes_between(later: datetime, earlier: datetime) -> float:
    """Signed minutes from earlier to later."""
    return (to_utc(later) - to_utc(earlier)).total_seconds() / 60


def uri_hash(uri: str) -> str:
    return hashlib.sha256(uri.encode('utf-8')).hexdigest()


def decode_html(body) -> str:
    """Decodes a fetched body as UTF-8, replacing undecodable bytes."""
    if isinstance(body, str):
        return body
    return body.decode('utf-8', errors='replace')
