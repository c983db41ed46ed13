"""
Brute-force recomputation of collection scores.

Shares no code with the scoring path: tokenization, weighting, cosine and the masked norm are all written out as plain
loops over the clean texts kept in the cache, so a disagreement points at a bug on one side or the other.
"""
import logging
import math
from typing import Dict, List, Optional

from .cache import Cache
from .writers import read_manifest, read_manifest_run

logger = logging.getLogger(__name__)

default_tolerance = 1e-9


class OracleMismatch:
    def __init__(self, day: str, k: int, expected: Optional[float], actual: Optional[float], detail: str = ''):
        self.day = day
        self.k = k
        self.expected = expected
        self.actual = actual
        self.detail = detail

    def __repr__(self):
        return f'OracleMismatch({self.day}, k={self.k}, expected={self.expected}, actual={self.actual}, {self.detail})'


def words(text: str) -> List[str]:
    result = []
    current = ''
    for char in text:
        if char.isalnum():
            current += char
        else:
            if current:
                result.append(current)
            current = ''
    if current:
        result.append(current)
    return [word.lower() for word in result if len(word.lower()) >= 2]


def score_texts(texts: List[str], groups: Optional[List[str]] = None) -> float:
    n = len(texts)
    counts = []
    for text in texts:
        count = {}
        for word in words(text):
            count[word] = count.get(word, 0) + 1
        counts.append(count)
    df = {}
    for count in counts:
        for word in count:
            df[word] = df.get(word, 0) + 1
    weights = [{word: tf * math.log(n / df[word]) for word, tf in count.items()} for count in counts]

    def cos(a, b):
        dot = sum(a[word] * b[word] for word in a if word in b)
        norm_a = math.sqrt(sum(value * value for value in a.values()))
        norm_b = math.sqrt(sum(value * value for value in b.values()))
        if norm_a == 0 or norm_b == 0:
            return 0.0
        return dot / (norm_a * norm_b)

    total = 0.0
    pairs = 0
    for i in range(n):
        for j in range(n):
            if i == j or (groups is not None and groups[i] == groups[j]):
                continue
            total += cos(weights[i], weights[j]) ** 2
            pairs += 1
    return math.sqrt(total) / math.sqrt(pairs)


def verify(out_dir: str, cache_dir: str, tolerance: float = default_tolerance) -> List[OracleMismatch]:
    """Recomputes every score in the manifest of out_dir from the texts in cache_dir. Returns the scores that disagree."""
    cache = Cache(cache_dir)
    run = read_manifest_run(out_dir)
    mismatches = []
    checked = 0
    for day, result in sorted(read_manifest(out_dir).items()):
        site_of: Dict[str, str] = {story.uri: site.site_id for site in result.sites for story in site.stories}
        for k_result in result.k_results:
            if k_result.score is None:
                continue
            texts = [cache.load_text(uri) for uri in k_result.documents]
            if any(text is None for text in texts):
                mismatches.append(OracleMismatch(day, k_result.k, None, k_result.score, 'clean text missing from cache'))
                continue
            groups = [site_of.get(uri) for uri in k_result.documents] if run.get('mask_intra_site') else None
            expected = score_texts(texts, groups)
            checked += 1
            if abs(expected - k_result.score) > tolerance:
                mismatches.append(OracleMismatch(day, k_result.k, expected, k_result.score))
    logger.info('Checked %d scores, %d mismatches', checked, len(mismatches))
    return mismatches
