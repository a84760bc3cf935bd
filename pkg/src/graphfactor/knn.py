"""Binary K-nearest-neighbor proximity view built from node features.

For every node, the K most cosine-similar other nodes (strictly positive
similarity only) become directed out-edges. Ties are broken toward the
lowest node index so results are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .dataio import FeatureMatrix, _iter_records, _parse_id
from .errors import DataError, ParseError

__all__ = [
    "SimilarityMatrix",
    "KnnView",
    "cosine_similarity",
    "top_k_select",
    "build_knn_view",
    "save_knn_edge_list",
    "load_directed_edge_list",
]


@dataclass(frozen=True)
class SimilarityMatrix:
    """Dense pairwise cosine similarities in [0, 1] with a zero diagonal."""

    values: np.ndarray

    @property
    def num_nodes(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class KnnView:
    """Directed proximity view: per-node neighbors in selection order."""

    num_nodes: int
    k: int
    out_edges: tuple

    @property
    def directed_edge_count(self) -> int:
        return sum(len(nbrs) for nbrs in self.out_edges)

    def deficient_nodes(self):
        """Nodes with fewer than k strictly positive similarities."""
        return [v for v, nbrs in enumerate(self.out_edges) if len(nbrs) < self.k]

    def to_csr(self) -> sp.csr_matrix:
        rows, cols = [], []
        for v, nbrs in enumerate(self.out_edges):
            rows.extend([v] * len(nbrs))
            cols.extend(nbrs)
        vals = np.ones(len(rows))
        mat = sp.coo_matrix((vals, (rows, cols)), shape=(self.num_nodes, self.num_nodes))
        return mat.tocsr()


def _row_norms(matrix: sp.csr_matrix) -> np.ndarray:
    sq = np.asarray(matrix.multiply(matrix).sum(axis=1)).ravel()
    return np.sqrt(sq)


def cosine_similarity(features: FeatureMatrix) -> SimilarityMatrix:
    """Pairwise cosine similarity of feature rows, diagonal forced to 0.

    Rows with zero norm get similarity 0 against every node rather than
    dividing by zero.
    """
    if features.num_nodes < 2:
        raise ValueError("cosine similarity needs at least 2 nodes")
    mat = features.matrix
    norms = _row_norms(mat)
    dots = (mat @ mat.T).toarray()
    denom = np.outer(norms, norms)
    values = np.divide(dots, denom, out=np.zeros_like(dots), where=denom > 0)
    np.fill_diagonal(values, 0.0)
    np.clip(values, 0.0, 1.0, out=values)
    return SimilarityMatrix(values=values)


def _select_row(row: np.ndarray, k: int):
    """Indices of the k largest strictly positive entries, ties by index."""
    order = np.argsort(-row, kind="stable")
    picked = []
    for idx in order[:k]:
        if row[idx] <= 0.0:
            break
        picked.append(int(idx))
    return tuple(picked)


def top_k_select(sim: SimilarityMatrix, k: int) -> KnnView:
    """Per-row selection of the k most similar nodes.

    Rows with fewer than k strictly positive similarities select all of
    them; a zero similarity never becomes an edge.
    """
    n = sim.num_nodes
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k >= n:
        raise ValueError(f"k={k} must be smaller than the node count {n}")
    out = tuple(_select_row(sim.values[v], k) for v in range(n))
    return KnnView(num_nodes=n, k=k, out_edges=out)


def build_knn_view(features: FeatureMatrix, k: int,
                   block_rows: int | None = None) -> KnnView:
    """Cosine similarity followed by per-row top-k selection.

    With ``block_rows`` the similarity matrix is computed in row blocks
    so only a block of the dense V x V matrix is held at a time; the
    result is identical to the unblocked path.
    """
    n = features.num_nodes
    if n < 2:
        raise ValueError("need at least 2 nodes to build a proximity view")
    if block_rows is None:
        return top_k_select(cosine_similarity(features), k)
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k >= n:
        raise ValueError(f"k={k} must be smaller than the node count {n}")
    if block_rows < 1:
        raise ValueError("block_rows must be >= 1")
    mat = features.matrix
    norms = _row_norms(mat)
    out = []
    for start in range(0, n, block_rows):
        stop = min(start + block_rows, n)
        dots = (mat[start:stop] @ mat.T).toarray()
        denom = np.outer(norms[start:stop], norms)
        block = np.divide(dots, denom, out=np.zeros_like(dots), where=denom > 0)
        np.clip(block, 0.0, 1.0, out=block)
        for offset in range(stop - start):
            row = block[offset]
            row[start + offset] = 0.0
            out.append(_select_row(row, k))
    return KnnView(num_nodes=n, k=k, out_edges=tuple(out))


def save_knn_edge_list(view: KnnView, path) -> None:
    """Write the view as a directed edge list, neighbors in selection order."""
    lines = []
    for v, nbrs in enumerate(view.out_edges):
        for u in nbrs:
            lines.append(f"{v} {u}")
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def load_directed_edge_list(path, num_nodes: int | None = None) -> sp.csr_matrix:
    """Read a directed binary edge list into a sparse matrix."""
    rows, cols = [], []
    max_id = -1
    for line_no, tokens in _iter_records(path):
        if len(tokens) != 2:
            raise ParseError(path, line_no, f"expected 'u v', got {len(tokens)} fields")
        u = _parse_id(tokens[0], path, line_no, "node id")
        v = _parse_id(tokens[1], path, line_no, "node id")
        rows.append(u)
        cols.append(v)
        max_id = max(max_id, u, v)
    if not rows:
        raise DataError(f"{path}: directed edge list is empty")
    inferred = max_id + 1
    if num_nodes is None:
        num_nodes = inferred
    elif inferred > num_nodes:
        raise DataError(f"{path}: node id {max_id} exceeds declared node count {num_nodes}")
    vals = np.ones(len(rows))
    mat = sp.coo_matrix((vals, (rows, cols)), shape=(num_nodes, num_nodes)).tocsr()
    mat.sum_duplicates()
    mat.data[:] = 1.0
    return mat
