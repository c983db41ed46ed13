import random

import pytest

from newsflow import ConcurrentMap, IterableSource, Reduce, build_flow, build_tfidf, collection_score, pairwise_matrix
from newsflow.text import CleanDocument, Corpus, strip_boilerplate

from tests import corpus

vocabulary = [f'term{i}' for i in range(2000)]


def random_documents(n, words=400):
    rng = random.Random(n)
    return [CleanDocument(('site', i + 1, None), ' '.join(rng.choice(vocabulary) for _ in range(words))) for i in range(n)]


@pytest.mark.parametrize('n', [3, 30, 300])
def test_tfidf_n_documents(benchmark, n):
    documents = Corpus(random_documents(n))
    benchmark(build_tfidf, documents)


@pytest.mark.parametrize('n', [3, 30, 300])
def test_score_n_documents(benchmark, n):
    vectors = build_tfidf(Corpus(random_documents(n)))

    def inner():
        return collection_score(pairwise_matrix(vectors)).s

    benchmark(inner)


def test_strip_boilerplate(benchmark):
    html = corpus.story_html('alpha', corpus.days[0], 1)
    benchmark(strip_boilerplate, html)


@pytest.mark.parametrize('n', [0, 1, 1000])
def test_concurrent_map_n_events(benchmark, n):
    async def double(x):
        return x * 2

    def inner():
        return build_flow([
            IterableSource(range(n)),
            ConcurrentMap(double, max_in_flight=8),
            Reduce(0, lambda acc, x: acc + x),
        ]).run()

    benchmark(inner)
