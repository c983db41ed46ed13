import asyncio
import json
import os

import pytest

from newsflow import Cache, FetchPolicy, HttpError, OfflineDriver, TooManyRedirects, fetch_memento
from newsflow.dtypes import FetchResult, FetchTimeout, RawResponse
from newsflow.drivers import Driver

from tests.corpus import MockDriver

uri = 'https://web.archive.org/web/20161101010500/http://www.example.com/'


def fetch(uri_m, driver, cache=None, policy=None, refresh=False):
    return asyncio.run(fetch_memento(uri_m, policy or FetchPolicy(), driver, cache, refresh))


def test_fetch_ok():
    driver = MockDriver({uri: RawResponse(200, b'<html>hello</html>', 'text/html')})
    result = fetch(uri, driver)
    assert result.status == 200
    assert result.body == b'<html>hello</html>'
    assert result.final_uri == uri
    assert result.content_type == 'text/html'


def test_fetch_404():
    driver = MockDriver({})
    with pytest.raises(HttpError) as info:
        fetch(uri, driver)
    assert info.value.status == 404
    assert info.value.reason == 'http-error'
    assert info.value.uri == uri


def test_fetch_follows_redirects():
    second = 'https://web.archive.org/web/20161101010501/http://www.example.com/'
    driver = MockDriver({
        uri: RawResponse(302, location='/web/20161101010501/http://www.example.com/'),
        second: RawResponse(200, b'moved'),
    })
    result = fetch(uri, driver)
    assert result.final_uri == second
    assert result.body == b'moved'


def test_fetch_self_redirect_stops_after_ten_hops():
    driver = MockDriver({uri: RawResponse(301, location=uri)})
    with pytest.raises(TooManyRedirects) as info:
        fetch(uri, driver)
    assert info.value.reason == 'redirect-loop'
    # The original request plus ten followed hops.
    assert driver.count(uri) == 11


def test_fetch_redirect_limit_is_configurable():
    chain = {f'{uri}{i}': RawResponse(302, location=f'{uri}{i + 1}') for i in range(3)}
    chain[f'{uri}3'] = RawResponse(200, b'end')
    assert fetch(f'{uri}0', MockDriver(chain), policy=FetchPolicy(max_redirects=3)).body == b'end'
    with pytest.raises(TooManyRedirects):
        fetch(f'{uri}0', MockDriver(chain), policy=FetchPolicy(max_redirects=2))


def test_fetch_rejects_relative_uri():
    with pytest.raises(ValueError):
        fetch('/web/20161101010500/http://www.example.com/', MockDriver({}))


def test_cache_hit_is_byte_identical_and_offline(tmpdir):
    body = bytes(range(256)) * 4
    cache = Cache(str(tmpdir))
    driver = MockDriver({uri: RawResponse(200, body, 'text/html')})
    first = fetch(uri, driver, cache)
    second = fetch(uri, driver, cache)
    assert driver.count(uri) == 1
    assert first.body == second.body == body
    assert uri in cache
    assert len(cache) == 1

    # A fresh cache object reads the entry from disk.
    third = fetch(uri, MockDriver({}), Cache(str(tmpdir)))
    assert third.body == body


def test_cache_replays_errors(tmpdir):
    cache = Cache(str(tmpdir))
    loop_uri = uri + 'loop'
    driver = MockDriver({loop_uri: RawResponse(302, location=loop_uri)})
    with pytest.raises(HttpError):
        fetch(uri, driver, cache)
    with pytest.raises(TooManyRedirects):
        fetch(loop_uri, driver, cache)
    calls = len(driver.calls)
    with pytest.raises(HttpError):
        fetch(uri, driver, cache)
    with pytest.raises(TooManyRedirects):
        fetch(loop_uri, driver, cache)
    assert len(driver.calls) == calls
    assert cache.entry(uri)['error'] == 'http-error'
    assert cache.entry(uri)['status'] == 404


def test_cache_refresh(tmpdir):
    cache = Cache(str(tmpdir))
    cache.store(uri, FetchResult(200, uri, b'old'))
    driver = MockDriver({uri: RawResponse(200, b'new')})
    assert fetch(uri, driver, cache).body == b'old'
    assert fetch(uri, driver, cache, refresh=True).body == b'new'
    assert fetch(uri, MockDriver({}), cache).body == b'new'


class TimingOutDriver(Driver):
    def __init__(self):
        self.calls = 0

    async def request(self, uri, timeout):
        self.calls += 1
        raise FetchTimeout(f'Timed out fetching {uri}', uri)


def test_timeouts_are_not_cached(tmpdir):
    cache = Cache(str(tmpdir))
    driver = TimingOutDriver()
    for _ in range(2):
        with pytest.raises(FetchTimeout) as info:
            fetch(uri, driver, cache)
        assert info.value.reason == 'timeout'
    assert driver.calls == 2
    assert uri not in cache


def test_cache_layout(tmpdir):
    cache = Cache(str(tmpdir))
    cache.store(uri, FetchResult(200, uri, b'body', 'text/html'))
    cache.store_text(uri, 'clean text')
    objects = os.path.join(str(tmpdir), 'objects')
    (name,) = [name for name in os.listdir(objects) if name.endswith('.json')]
    key = name[:-len('.json')]
    assert len(key) == 64
    with open(os.path.join(objects, name)) as f:
        entry = json.load(f)
    assert entry['version'] == 1
    assert entry['uri'] == uri
    assert os.path.exists(os.path.join(objects, f'{key}.body'))
    assert sorted(os.listdir(str(tmpdir))) == ['objects', 'text']
    assert cache.load_text(uri) == 'clean text'
    assert cache.load_text(uri + 'other') is None
    assert not [name for name in os.listdir(objects) if name.startswith('.tmp-')]


def test_cache_store_writes_one_entry_per_uri(tmpdir):
    cache = Cache(str(tmpdir))
    uris = [f'{uri}story-{i}' for i in range(50)]
    for i, story_uri in enumerate(uris):
        cache.store(story_uri, FetchResult(200, story_uri, f'body {i}'.encode()))
    cache.store(uri, error=HttpError(404, uri))
    objects = os.path.join(str(tmpdir), 'objects')
    assert len([name for name in os.listdir(objects) if name.endswith('.json')]) == 51
    fresh = Cache(str(tmpdir))
    assert len(fresh) == 51
    assert fresh.replay(uris[7]).body == b'body 7'
    assert fresh.entry(uri)['error'] == 'http-error'


def test_cache_store_needs_one_outcome(tmpdir):
    with pytest.raises(ValueError):
        Cache(str(tmpdir)).store(uri)


def test_offline_driver(tmpdir):
    root = str(tmpdir)
    with open(os.path.join(root, 'page.html'), 'wb') as f:
        f.write(b'<p>offline</p>')
    index = {uri: {'status': 200, 'file': 'page.html', 'content_type': 'text/html'},
             uri + 'moved': {'status': 301, 'location': uri}}
    with open(os.path.join(root, 'offline-index.json'), 'w') as f:
        json.dump(index, f)
    driver = OfflineDriver(root)
    assert fetch(uri + 'moved', driver).body == b'<p>offline</p>'
    with pytest.raises(HttpError):
        fetch(uri + 'missing', driver)


def test_offline_driver_without_index(tmpdir):
    with pytest.raises(HttpError):
        fetch(uri, OfflineDriver(str(tmpdir)))
