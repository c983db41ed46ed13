import json
from typing import Hashable, List, Optional, Sequence

import numpy as np

from .dtypes import CorpusTooSmall, DimensionMismatch, InvalidSimilarityMatrix
from .text import TermVector

range_tolerance = 1e-9


class SimilarityMatrix:
    """
    Symmetric matrix of pairwise cosine similarities of a collection.

    :param values: n x n array. The diagonal is 1 for nonzero vectors and 0 for zero vectors.
    """

    def __init__(self, values):
        values = np.asarray(values, dtype=float)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise DimensionMismatch(f'Expected a square matrix, got shape {values.shape}')
        if values.size and (values.min() < -range_tolerance or values.max() > 1 + range_tolerance):
            raise InvalidSimilarityMatrix(f'Entries must lie in [0, 1], got range [{values.min()}, {values.max()}]')
        self.values = values

    @property
    def n(self):
        return self.values.shape[0]

    def __getitem__(self, item):
        return self.values[item]

    def to_dict(self):
        return {'n': self.n, 'values': self.values.tolist()}


class CollectionScore:
    """Collection similarity s, the ratio of the masked Frobenius norm of D to that of the mask itself."""

    def __init__(self, s: float, n: int, masked_norm: float, mask_norm: float):
        self.s = s
        self.n = n
        self.masked_norm = masked_norm
        self.mask_norm = mask_norm

    def __float__(self):
        return self.s

    def __repr__(self):
        return f'CollectionScore(s={self.s}, n={self.n})'


def cosine(a: TermVector, b: TermVector) -> float:
    """Cosine of the angle between a and b, or 0 if either is a zero vector."""
    if a.dimension != b.dimension:
        raise DimensionMismatch(f'Cannot compare vectors of dimension {a.dimension} and {b.dimension}')
    if a.norm == 0 or b.norm == 0:
        return 0.0
    return min(a.dot(b) / (a.norm * b.norm), 1.0)


def pairwise_matrix(vectors: List[TermVector]) -> SimilarityMatrix:
    """
    Computes the full cosine similarity matrix of vectors.

    :raises CorpusTooSmall: fewer than two vectors.
    :raises DimensionMismatch: the vectors do not share one vocabulary.
    """
    n = len(vectors)
    if n < 2:
        raise CorpusTooSmall(f'Need at least 2 vectors, got {n}')
    dimensions = {vector.dimension for vector in vectors}
    if len(dimensions) > 1:
        raise DimensionMismatch(f'Vectors have differing dimensions {sorted(dimensions)}')

    dense = np.vstack([vector.to_array() for vector in vectors])
    norms = np.array([vector.norm for vector in vectors])
    nonzero = norms > 0
    unit = np.zeros_like(dense)
    unit[nonzero] = dense[nonzero] / norms[nonzero, None]
    values = unit @ unit.T
    values = (values + values.T) / 2
    np.clip(values, 0.0, 1.0, out=values)
    np.fill_diagonal(values, np.where(nonzero, 1.0, 0.0))
    return SimilarityMatrix(values)


def frobenius_norm(matrix) -> float:
    """Square root of the sum of the squared entries of matrix."""
    values = np.asarray(matrix.values if isinstance(matrix, SimilarityMatrix) else matrix, dtype=float)
    return float(np.sqrt(np.sum(np.square(values))))


def pair_mask(n: int, groups: Optional[Sequence[Hashable]] = None) -> np.ndarray:
    """Ones everywhere except the diagonal and, when groups are given, pairs whose documents share a group."""
    mask = np.ones((n, n)) - np.eye(n)
    if groups is not None:
        if len(groups) != n:
            raise DimensionMismatch(f'Got {len(groups)} groups for {n} documents')
        for i in range(n):
            for j in range(n):
                if groups[i] == groups[j]:
                    mask[i, j] = 0.0
    return mask


def collection_score(matrix: SimilarityMatrix, groups: Optional[Sequence[Hashable]] = None) -> CollectionScore:
    """
    Scores how similar the documents of a collection are to each other.

    The similarity matrix is multiplied elementwise by a mask that is 0 on the diagonal and 1 elsewhere, and the Frobenius
    norm of the product is divided by that of the mask. Identical documents score 1 and documents without shared vocabulary
    score 0. When groups is given (one label per document, e.g. the site), same-group pairs are masked out as well.

    :raises CorpusTooSmall: the matrix has order below 2, or masking leaves no pair.
    """
    if not isinstance(matrix, SimilarityMatrix):
        matrix = SimilarityMatrix(matrix)
    n = matrix.n
    if n < 2:
        raise CorpusTooSmall(f'Need a matrix of order >= 2, got {n}')
    mask = pair_mask(n, groups)
    mask_norm = frobenius_norm(mask)
    if mask_norm == 0:
        raise CorpusTooSmall('No document pairs remain after masking')
    masked_norm = frobenius_norm(mask * matrix.values)
    s = min(masked_norm / mask_norm, 1.0)
    return CollectionScore(s, n, masked_norm, mask_norm)


def dump_matrix(matrix: SimilarityMatrix, documents: Optional[List[str]] = None) -> str:
    """Row-major JSON rendering of matrix at full precision, for debugging."""
    data = matrix.to_dict()
    if documents is not None:
        data['documents'] = documents
    return json.dumps(data, indent=1, sort_keys=True)
