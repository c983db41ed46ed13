import logging
import math
import re
from collections import Counter
from typing import Dict, List, Optional, Tuple

import numpy as np
from bs4 import BeautifulSoup, NavigableString
from bs4.element import CData, Comment, Declaration, Doctype, ProcessingInstruction

from .dtypes import CorpusTooSmall, DimensionMismatch, EmptyDocument
from .utils import decode_html

logger = logging.getLogger(__name__)

min_block_words = 10
max_link_density = 0.33

_token_pattern = re.compile(r'[^\W_]+')

_dropped_tags = ['script', 'style', 'noscript', 'template', 'nav', 'header', 'footer', 'aside', 'head', 'title']
_block_tags = ['address', 'article', 'blockquote', 'body', 'dd', 'div', 'dl', 'dt', 'figcaption', 'figure', 'form', 'h1', 'h2', 'h3',
               'h4', 'h5', 'h6', 'html', 'li', 'main', 'ol', 'p', 'pre', 'section', 'table', 'td', 'th', 'tr', 'ul']
_non_text_strings = (Comment, CData, Declaration, Doctype, ProcessingInstruction)


class _Block:
    def __init__(self):
        self.strings = []
        self.linked_words = 0

    @property
    def text(self):
        return ' '.join(''.join(self.strings).split())

    def keep(self):
        words = len(self.text.split())
        if words < min_block_words:
            return False
        return self.linked_words / words < max_link_density


def strip_boilerplate(html) -> str:
    """
    Extracts the main content text of an HTML page.

    The page is segmented at block-level elements after script, style, navigation, header, footer and aside subtrees are
    removed. A block is kept when it has at least 10 words and fewer than a third of them are link text. The text of the
    title element, if any, is prepended.

    :param html: Page bytes or text. Undecodable bytes are replaced.
    :raises EmptyDocument: no block qualifies.
    """
    soup = BeautifulSoup(decode_html(html), 'html.parser')
    title = ''
    if soup.title is not None:
        title = ' '.join(soup.title.get_text(' ').split())
    for element in soup.find_all(_dropped_tags):
        element.decompose()

    blocks: Dict[int, _Block] = {}
    for string in soup.find_all(string=True):
        if isinstance(string, _non_text_strings) or not isinstance(string, NavigableString):
            continue
        parent = string.find_parent(_block_tags)
        block = blocks.setdefault(id(parent), _Block())
        block.strings.append(str(string))
        if string.find_parent('a') is not None:
            block.linked_words += len(string.split())

    kept = [block.text for block in blocks.values() if block.keep()]
    if not kept:
        raise EmptyDocument('No content block survived boilerplate removal')
    if title:
        kept.insert(0, title)
    return '\n'.join(kept)


def tokenize(text: str) -> List[str]:
    """Lowercased runs of Unicode letters and digits. Tokens shorter than two characters are dropped; no stopwords."""
    tokens = []
    for match in _token_pattern.findall(text):
        token = match.lower()
        if len(token) >= 2:
            tokens.append(token)
    return tokens


class CleanDocument:
    """
    Main-content text of one story.

    :param story_ref: (site_id, rank, capture date) of the story the text belongs to.
    :param text: Text left after boilerplate removal.
    :param uri: Archive URI the text was fetched from, if known.
    """

    def __init__(self, story_ref: Tuple, text: str, uri: Optional[str] = None):
        self.story_ref = story_ref
        self.text = text
        self.uri = uri
        self.tokens = tokenize(text)

    @property
    def token_count(self):
        return len(self.tokens)

    def __repr__(self):
        return f'CleanDocument({self.story_ref}, {self.token_count} tokens)'


def clean_document(story_ref: Tuple, html, uri: Optional[str] = None) -> CleanDocument:
    return CleanDocument(story_ref, strip_boilerplate(html), uri)


class Corpus:
    """The documents of one day's collection, with the term statistics TF-IDF weighting needs."""

    def __init__(self, documents: List[CleanDocument]):
        self.documents = list(documents)
        self.term_counts = [Counter(document.tokens) for document in self.documents]
        df = Counter()
        for counts in self.term_counts:
            df.update(counts.keys())
        self.df = dict(df)
        self.vocabulary = sorted(df)
        self.index = {term: i for i, term in enumerate(self.vocabulary)}

    @property
    def n(self):
        return len(self.documents)

    def __len__(self):
        return len(self.documents)


class TermVector:
    """
    Sparse TF-IDF vector over a corpus vocabulary.

    :param entries: Term index to weight. Zero weights may be omitted.
    :param dimension: Size of the vocabulary the indices refer to.
    """

    def __init__(self, entries: Dict[int, float], dimension: int):
        for index, weight in entries.items():
            if weight < 0:
                raise ValueError(f'Negative weight {weight} at index {index}')
            if not 0 <= index < dimension:
                raise DimensionMismatch(f'Index {index} out of range for dimension {dimension}')
        self.entries = entries
        self.dimension = dimension
        self._norm = None

    @property
    def norm(self):
        if self._norm is None:
            self._norm = math.sqrt(math.fsum(weight * weight for weight in self.entries.values()))
        return self._norm

    def dot(self, other: 'TermVector') -> float:
        if self.dimension != other.dimension:
            raise DimensionMismatch(f'Cannot combine vectors of dimension {self.dimension} and {other.dimension}')
        small, large = (self, other) if len(self.entries) <= len(other.entries) else (other, self)
        return math.fsum(weight * large.entries[index] for index, weight in small.entries.items() if index in large.entries)

    def to_array(self) -> np.ndarray:
        array = np.zeros(self.dimension)
        for index, weight in self.entries.items():
            array[index] = weight
        return array

    def __repr__(self):
        return f'TermVector({len(self.entries)}/{self.dimension} nonzero, norm={self.norm})'


def build_tfidf(corpus: Corpus) -> List[TermVector]:
    """
    Weights every document of corpus by raw term count times ln(n / df).

    Terms present in every document weigh 0 and are left out of the sparse entries.

    :raises CorpusTooSmall: the corpus has fewer than two documents.
    """
    n = corpus.n
    if n < 2:
        raise CorpusTooSmall(f'Need at least 2 documents, got {n}')
    idf = {term: math.log(n / df) for term, df in corpus.df.items()}
    dimension = len(corpus.vocabulary)
    vectors = []
    for counts in corpus.term_counts:
        entries = {}
        for term in sorted(counts):
            weight = counts[term] * idf[term]
            if weight > 0:
                entries[corpus.index[term]] = weight
        vectors.append(TermVector(entries, dimension))
    logger.debug('Built %d TF-IDF vectors over %d terms', n, dimension)
    return vectors
