import json
import logging
import os
import tempfile
from datetime import datetime, timezone
from typing import Dict, Optional

from .dtypes import FetchError, FetchResult, HttpError, TooManyRedirects, format_iso
from .utils import uri_hash

logger = logging.getLogger(__name__)

entry_version = 1


def atomic_write(path: str, data: bytes):
    """Writes data to a temporary file next to path, then renames it over path."""
    directory = os.path.dirname(path) or '.'
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix='.tmp-')
    try:
        with os.fdopen(fd, 'wb') as f:
            f.write(data)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


class Cache:
    """
    Content-addressed disk cache of fetched URIs.

    Every URI is stored under objects/, named by its SHA-256: <hash>.json records the URI, terminal status, final URI,
    content type, retrieval time and the error (if the fetch failed), and <hash>.body holds the body of a successful fetch.
    Failed fetches are therefore replayed without touching the network. The metadata file is written last, so an
    interrupted store reads as a miss. Clean article text is stored under text/ for inspection.

    :param cache_dir: Root directory of the cache. Created on the first store.
    """

    def __init__(self, cache_dir: str):
        self._dir = cache_dir
        self._objects_dir = os.path.join(cache_dir, 'objects')
        self._text_dir = os.path.join(cache_dir, 'text')
        self._entries: Dict[str, dict] = {}

    @property
    def path(self):
        return self._dir

    def _entry_path(self, key):
        return os.path.join(self._objects_dir, f'{key}.json')

    def _body_path(self, key):
        return os.path.join(self._objects_dir, f'{key}.body')

    def _text_path(self, key):
        return os.path.join(self._text_dir, f'{key}.txt')

    def _entry(self, key) -> Optional[dict]:
        if key not in self._entries:
            path = self._entry_path(key)
            if not os.path.exists(path):
                return None
            with open(path, encoding='utf-8') as f:
                entry = json.load(f)
            if entry.get('version') != entry_version:
                raise ValueError(f'Unsupported cache entry version {entry.get("version")} in {path}')
            self._entries[key] = entry
        return self._entries[key]

    def __contains__(self, uri):
        return self._entry(uri_hash(uri)) is not None

    def __len__(self):
        if not os.path.isdir(self._objects_dir):
            return 0
        return sum(1 for name in os.listdir(self._objects_dir) if name.endswith('.json'))

    def entry(self, uri: str) -> Optional[dict]:
        return self._entry(uri_hash(uri))

    def replay(self, uri: str) -> Optional[FetchResult]:
        """Returns the cached result for uri, raises the cached error if the fetch had failed, or returns None on a miss."""
        key = uri_hash(uri)
        entry = self._entry(key)
        if entry is None:
            return None
        error = entry.get('error')
        if error == TooManyRedirects.reason:
            raise TooManyRedirects(f'Cached redirect loop for {uri}', uri)
        if error:
            raise HttpError(entry['status'], uri)
        with open(self._body_path(key), 'rb') as f:
            body = f.read()
        logger.debug('Cache hit for %s', uri)
        return FetchResult(entry['status'], entry['final_uri'], body, entry.get('content_type'))

    def store(self, uri: str, result: Optional[FetchResult] = None, error: Optional[FetchError] = None):
        """Records a terminal outcome for uri: either a successful result or an HttpError/TooManyRedirects."""
        if (result is None) == (error is None):
            raise ValueError('Exactly one of result and error must be given')
        key = uri_hash(uri)
        entry = {'version': entry_version, 'uri': uri, 'retrieved_at': format_iso(datetime.now(timezone.utc))}
        if result is not None:
            atomic_write(self._body_path(key), result.body)
            entry.update(status=result.status, final_uri=result.final_uri, content_type=result.content_type, error=None)
        else:
            entry.update(status=getattr(error, 'status', None), final_uri=None, content_type=None, error=error.reason)
        atomic_write(self._entry_path(key), json.dumps(entry, sort_keys=True).encode('utf-8'))
        self._entries[key] = entry

    def store_text(self, uri: str, text: str):
        atomic_write(self._text_path(uri_hash(uri)), text.encode('utf-8'))

    def load_text(self, uri: str) -> Optional[str]:
        path = self._text_path(uri_hash(uri))
        if not os.path.exists(path):
            return None
        with open(path, encoding='utf-8') as f:
            return f.read()
