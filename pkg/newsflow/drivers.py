import asyncio
import json
import logging
import os
from typing import Dict, Optional
from urllib.parse import urljoin, urlsplit

import aiohttp

from .cache import Cache
from .dtypes import FetchError, FetchPolicy, FetchResult, FetchTimeout, HttpError, RawResponse, TooManyRedirects

logger = logging.getLogger(__name__)

offline_index_file_name = 'offline-index.json'
default_user_agent = 'newsflow/0.1 (+https://github.com/newsflow/newsflow)'


class Driver:
    """Transport for single HTTP hops. Redirects are returned to the caller, never followed."""

    async def request(self, uri: str, timeout: float) -> RawResponse:
        raise NotImplementedError()

    async def close(self):
        pass


class HttpDriver(Driver):
    """
    Network transport backed by aiohttp.

    :param parallelism: Maximum number of concurrent connections. Defaults to 8.
    :param min_host_interval: Minimum seconds between the starts of two requests to the same host. Defaults to 1.
    :param user_agent: User-Agent header. If not set, the NEWSFLOW_USER_AGENT environment variable or a default is used.
    """

    def __init__(self, parallelism: int = 8, min_host_interval: float = 1.0, user_agent: Optional[str] = None):
        if parallelism < 1:
            raise ValueError('parallelism must be positive')
        self._parallelism = parallelism
        self._min_host_interval = min_host_interval
        self._user_agent = user_agent or os.getenv('NEWSFLOW_USER_AGENT') or default_user_agent
        self._client_session = None
        self._host_locks: Dict[str, asyncio.Lock] = {}
        self._host_last_request: Dict[str, float] = {}

    def _lazy_init(self):
        if not self._client_session:
            connector = aiohttp.TCPConnector(limit=self._parallelism)
            self._client_session = aiohttp.ClientSession(connector=connector, headers={'User-Agent': self._user_agent})

    async def _wait_for_host(self, host):
        if self._min_host_interval <= 0:
            return
        lock = self._host_locks.setdefault(host, asyncio.Lock())
        async with lock:
            loop = asyncio.get_running_loop()
            last = self._host_last_request.get(host)
            if last is not None:
                delay = last + self._min_host_interval - loop.time()
                if delay > 0:
                    await asyncio.sleep(delay)
            self._host_last_request[host] = loop.time()

    async def request(self, uri, timeout):
        self._lazy_init()
        await self._wait_for_host(urlsplit(uri).netloc)
        try:
            async with self._client_session.get(uri, allow_redirects=False, timeout=aiohttp.ClientTimeout(total=timeout)) as response:
                body = await response.read()
                return RawResponse(response.status, body, response.content_type, response.headers.get('Location'))
        except asyncio.TimeoutError as ex:
            raise FetchTimeout(f'Timed out after {timeout}s fetching {uri}', uri) from ex
        except aiohttp.ClientError as ex:
            raise FetchError(f'Failed to fetch {uri}: {ex}', uri) from ex

    async def close(self):
        if self._client_session:
            await self._client_session.close()
            self._client_session = None


class OfflineDriver(Driver):
    """
    File-based transport for hermetic runs. Serves hops described by offline-index.json in root, which maps each URI to
    {"status": ..., "file": ..., "content_type": ..., "location": ...}. URIs missing from the index answer 404.

    :param root: Directory holding offline-index.json and the body files it references.
    """

    def __init__(self, root: str):
        self._root = root
        self._index = None

    def _load(self):
        if self._index is None:
            path = os.path.join(self._root, offline_index_file_name)
            if os.path.exists(path):
                with open(path, encoding='utf-8') as f:
                    self._index = json.load(f)
            else:
                self._index = {}
        return self._index

    async def request(self, uri, timeout):
        entry = self._load().get(uri)
        if entry is None:
            logger.debug('Offline miss for %s', uri)
            return RawResponse(404)
        body = b''
        if entry.get('file'):
            with open(os.path.join(self._root, entry['file']), 'rb') as f:
                body = f.read()
        return RawResponse(entry.get('status', 200), body, entry.get('content_type', 'text/html'), entry.get('location'))


async def fetch_memento(uri_m: str, policy: FetchPolicy, driver: Driver, cache: Optional[Cache] = None,
                        refresh: bool = False) -> FetchResult:
    """
    Fetches a memento, following up to policy.max_redirects redirect hops.

    :param uri_m: Absolute URI of the memento.
    :param policy: Redirect and timeout limits.
    :param driver: Transport used for each hop.
    :param cache: Optional cache. Cached outcomes, including HTTP errors and redirect loops, are replayed without network access.
    :param refresh: Ignore cached outcomes and fetch again.
    :returns: FetchResult of the terminal 2xx response.
    :raises HttpError: terminal status other than 2xx.
    :raises TooManyRedirects: the redirect chain is longer than policy.max_redirects.
    :raises FetchTimeout: a hop timed out.
    """
    if urlsplit(uri_m).scheme not in ('http', 'https'):
        raise ValueError(f'Expected an absolute http(s) URI, got {uri_m!r}')
    if cache is not None and not refresh:
        cached = cache.replay(uri_m)
        if cached is not None:
            return cached

    current = uri_m
    hops = 0
    try:
        while True:
            response = await driver.request(current, policy.timeout)
            if 300 <= response.status < 400 and response.location:
                if hops >= policy.max_redirects:
                    raise TooManyRedirects(f'More than {policy.max_redirects} redirects fetching {uri_m}', uri_m)
                hops += 1
                current = urljoin(current, response.location)
                logger.debug('Redirect %d for %s to %s', hops, uri_m, current)
                continue
            if not 200 <= response.status < 300:
                raise HttpError(response.status, uri_m)
            result = FetchResult(response.status, current, response.body, response.content_type)
            break
    except (HttpError, TooManyRedirects) as ex:
        if cache is not None:
            cache.store(uri_m, error=ex)
        raise

    if cache is not None:
        cache.store(uri_m, result=result)
    return result
