from datetime import datetime, timedelta, timezone

import pytest

from newsflow.dtypes import EmptyInput, EmptyTimeMap, MalformedTimeMap, MementoRecord, TimeMap
from newsflow.timemap import archival_histogram, archival_stats, offset_stats, parse_timemap, select_nearest, serialize_timemap, \
    timemap_uri

from tests import corpus

original = 'http://www.example.com/'


def utc(*args):
    return datetime(*args, tzinfo=timezone.utc)


def record(dt):
    return MementoRecord(f'https://web.archive.org/web/{dt.strftime("%Y%m%d%H%M%S")}/{original}', original, dt)


def timemap_of(*dts):
    return TimeMap(original, [record(dt) for dt in dts])


def test_parse_two_mementos():
    body = f'''<{original}>; rel="original",
<https://web.archive.org/web/timemap/link/{original}>; rel="self"; type="application/link-format",
<https://web.archive.org/web/20161101010000/{original}>; rel="first memento"; datetime="Tue, 01 Nov 2016 01:00:00 GMT",
<https://web.archive.org/web/20161101020000/{original}>; rel="last memento"; datetime="Tue, 01 Nov 2016 02:00:00 GMT"
'''
    tm = parse_timemap(body, original)
    assert [m.capture_datetime for m in tm] == [utc(2016, 11, 1, 1), utc(2016, 11, 1, 2)]
    assert all(m.original_uri == original for m in tm)


def test_parse_sorts_and_dedupes():
    body = (f'<https://web.archive.org/web/20161101020000/{original}>; rel="memento"; datetime="Tue, 01 Nov 2016 02:00:00 GMT",'
            f'<https://web.archive.org/web/20161101010000/{original}>; rel="memento"; datetime="Tue, 01 Nov 2016 01:00:00 GMT",'
            f'<https://web.archive.org/web/20161101020000/{original}>; rel="memento"; datetime="Tue, 01 Nov 2016 02:00:00 GMT"')
    tm = parse_timemap(body, original)
    assert [m.capture_datetime.hour for m in tm] == [1, 2]


def test_parse_datetime_from_path_only():
    tm = parse_timemap(f'<https://web.archive.org/web/20161101013000id_/{original}>; rel="memento"', original)
    assert tm.mementos[0].capture_datetime == utc(2016, 11, 1, 1, 30)


def test_parse_only_original_is_empty():
    with pytest.raises(EmptyTimeMap):
        parse_timemap(f'<{original}>; rel="original"', original)


@pytest.mark.parametrize('body', ['', 'not a timemap', f'<{original}; rel="memento"', f'<{original}>; rel="memento'])
def test_parse_malformed(body):
    with pytest.raises(MalformedTimeMap):
        parse_timemap(body, original)


def test_parse_disagreeing_datetimes():
    body = f'<https://web.archive.org/web/20161101010000/{original}>; rel="memento"; datetime="Tue, 01 Nov 2016 03:00:00 GMT"'
    with pytest.raises(MalformedTimeMap):
        parse_timemap(body, original)


def test_round_trip_on_corpus_timemaps():
    for site_id in corpus.site_ids:
        tm = parse_timemap(corpus.timemap_body(site_id), corpus.homepage_uri(site_id))
        assert len(tm) == len(corpus.days) * len(corpus.capture_minutes)
        assert parse_timemap(serialize_timemap(tm), tm.original_uri).mementos == tm.mementos


def test_select_nearest():
    tm = timemap_of(utc(2016, 11, 1, 0, 45), utc(2016, 11, 1, 1, 20))
    assert select_nearest(tm, utc(2016, 11, 1, 1)).capture_datetime == utc(2016, 11, 1, 0, 45)


def test_select_nearest_tie_takes_earlier():
    tm = timemap_of(utc(2016, 11, 1, 0, 50), utc(2016, 11, 1, 1, 10))
    assert select_nearest(tm, utc(2016, 11, 1, 1)).capture_datetime == utc(2016, 11, 1, 0, 50)


def test_select_nearest_single():
    tm = timemap_of(utc(2010, 1, 1))
    assert select_nearest(tm, utc(2016, 11, 1, 1)) == tm.mementos[0]


def test_select_nearest_empty():
    with pytest.raises(EmptyTimeMap):
        select_nearest(TimeMap(original), utc(2016, 11, 1))


def test_select_nearest_is_minimal_on_corpus():
    tm = parse_timemap(corpus.timemap_body('alpha'), corpus.homepage_uri('alpha'))
    for minutes in range(0, 4 * 24 * 60, 17):
        target = utc(2016, 11, 1) + timedelta(minutes=minutes)
        selected = select_nearest(tm, target)
        distance = abs(selected.capture_datetime - target)
        assert all(distance <= abs(m.capture_datetime - target) for m in tm)
        assert select_nearest(tm, target) == selected


def test_archival_histogram():
    tm = timemap_of(utc(2016, 11, 1, 1, 5), utc(2016, 11, 1, 1, 40), utc(2016, 11, 1, 13))
    histogram = archival_histogram([tm], utc_offset=timedelta(hours=-5))
    assert histogram[20] == 2
    assert histogram[8] == 1
    assert sum(histogram.values()) == 3
    assert len(histogram) == 24


def test_archival_histogram_empty():
    assert archival_histogram([]) == {hour: 0 for hour in range(24)}


def test_archival_histogram_month_filter():
    tm = timemap_of(utc(2016, 10, 31, 23), utc(2016, 11, 1, 1))
    histogram = archival_histogram([tm], month=(2016, 11))
    assert histogram[1] == 1
    assert sum(histogram.values()) == 1


def test_archival_histogram_argmax_on_corpus():
    tms = [parse_timemap(corpus.timemap_body(site_id), corpus.homepage_uri(site_id)) for site_id in corpus.site_ids]
    histogram = archival_histogram(tms, utc_offset='-5')
    assert max(histogram, key=histogram.get) == 20


def test_offset_stats():
    target = utc(2016, 11, 1, 1)
    summary = offset_stats([(record(target - timedelta(minutes=10)), target), (record(target + timedelta(minutes=20)), target)])
    assert summary.offsets == [-10, 20]
    assert summary.min == -10
    assert summary.max == 20
    assert summary.mean == 5.0


def test_offset_stats_exact():
    target = utc(2016, 11, 1, 1)
    assert offset_stats([(record(target), target)]).mean == 0.0


def test_offset_stats_empty():
    with pytest.raises(EmptyInput):
        offset_stats([])


def test_offset_stats_on_corpus_selections():
    tm = parse_timemap(corpus.timemap_body('beta'), corpus.homepage_uri('beta'))
    targets = [utc(day.year, day.month, day.day, 1) for day in corpus.days]
    summary = offset_stats([(select_nearest(tm, target), target) for target in targets])
    assert summary.offsets == [5.0, 5.0, 5.0]
    assert summary.mean == 5.0


def test_archival_stats():
    tm = timemap_of(utc(2016, 11, 1, 1, 5))
    stats = archival_stats([tm], [(tm.mementos[0], utc(2016, 11, 1, 1))])
    assert stats.hour_histogram[1] == 1
    assert stats.offset_minutes == [5.0]
    assert stats.summary.mean == 5.0


def test_timemap_uri():
    assert timemap_uri(original, 'https://web.archive.org/') == f'https://web.archive.org/web/timemap/link/{original}'
