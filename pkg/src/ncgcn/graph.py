"""Sparse graph storage and the propagation kernels built on it.

Everything here is immutable after construction: arrays are flagged
read-only so that the two model channels can share one adjacency safely.
Node masks are plain boolean numpy arrays of length ``n``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, InputError


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class CsrMatrix:
    """Compressed sparse row matrix with strictly increasing columns per row."""

    n_rows: int
    n_cols: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "row_ptr", _frozen(np.asarray(self.row_ptr, dtype=np.int64)))
        object.__setattr__(self, "col_idx", _frozen(np.asarray(self.col_idx, dtype=np.int64)))
        object.__setattr__(self, "values", _frozen(np.asarray(self.values, dtype=np.float64)))
        if self.row_ptr.shape != (self.n_rows + 1,):
            raise InputError(f"row_ptr must have length {self.n_rows + 1}, got {self.row_ptr.shape}")
        if self.row_ptr[0] != 0 or self.row_ptr[-1] != len(self.col_idx):
            raise InputError("row_ptr must start at 0 and end at nnz")
        if len(self.values) != len(self.col_idx):
            raise InputError("values and col_idx lengths differ")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rows, self.n_cols)

    @property
    def nnz(self) -> int:
        return len(self.col_idx)

    def row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.row_ptr[i], self.row_ptr[i + 1]
        return self.col_idx[lo:hi], self.values[lo:hi]

    def row_ids(self) -> np.ndarray:
        """Row index of every stored entry (COO expansion of row_ptr)."""
        return np.repeat(np.arange(self.n_rows), np.diff(self.row_ptr))

    def degrees(self) -> np.ndarray:
        """Row sums; the DegreeVector of this matrix."""
        return np.bincount(self.row_ids(), weights=self.values, minlength=self.n_rows)

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape)
        out[self.row_ids(), self.col_idx] = self.values
        return out

    @cached_property
    def _scipy(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.values, self.col_idx, self.row_ptr), shape=self.shape)

    def transpose(self) -> CsrMatrix:
        return from_scipy(self._scipy.T.tocsr())

    def check(self) -> None:
        """Validate the structural invariants; raises InputError on violation."""
        if np.any(np.diff(self.row_ptr) < 0):
            raise InputError("row_ptr is not non-decreasing")
        if self.nnz:
            if self.col_idx.min() < 0 or self.col_idx.max() >= self.n_cols:
                raise InputError("column index out of range")
            step = np.diff(self.col_idx)
            same_row = np.diff(self.row_ids()) == 0
            if np.any(step[same_row] <= 0):
                raise InputError("columns within a row must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise InputError("non-finite stored value")


def from_scipy(m: sp.spmatrix) -> CsrMatrix:
    m = sp.csr_matrix(m)
    m.sum_duplicates()
    m.sort_indices()
    return CsrMatrix(m.shape[0], m.shape[1], m.indptr, m.indices, m.data)


def identity_csr(n: int) -> CsrMatrix:
    return CsrMatrix(n, n, np.arange(n + 1), np.arange(n), np.ones(n))


def zeros_csr(n_rows: int, n_cols: int) -> CsrMatrix:
    return CsrMatrix(n_rows, n_cols, np.zeros(n_rows + 1, dtype=np.int64), [], [])


def build_csr(edges: Iterable[Sequence[int]], n: int, symmetrize: bool = True) -> CsrMatrix:
    """Binary adjacency from an edge list.

    Duplicate edges collapse to a single 1.0 entry and self-loops are dropped;
    with ``symmetrize`` every (u, v) also stores (v, u).
    """
    e = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges, dtype=np.int64)
    if e.size == 0:
        return zeros_csr(n, n)
    e = e.reshape(-1, 2)
    if e.min() < 0 or e.max() >= n:
        bad = e[(e < 0).any(axis=1) | (e >= n).any(axis=1)][0]
        raise InputError(f"edge {tuple(bad)} has a node id outside [0, {n})")
    e = e[e[:, 0] != e[:, 1]]
    if symmetrize:
        e = np.concatenate([e, e[:, ::-1]])
    # unique over (row, col) gives lexicographic order: sorted rows, sorted cols
    keys = np.unique(e[:, 0] * n + e[:, 1])
    rows, cols = np.divmod(keys, n)
    row_ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n), out=row_ptr[1:])
    return CsrMatrix(n, n, row_ptr, cols, np.ones(len(cols)))


def symmetric_normalize(A: CsrMatrix, add_self_loop: bool = True) -> CsrMatrix:
    """D^-1/2 A D^-1/2, on A + I when ``add_self_loop``.

    Isolated rows get a scale factor of 0, so they come out empty.
    """
    if A.n_rows != A.n_cols:
        raise InputError(f"normalization needs a square matrix, got {A.shape}")
    m = A._scipy
    if add_self_loop:
        m = m + sp.identity(A.n_rows, format="csr")
    deg = np.asarray(m.sum(axis=1)).ravel()
    scale = np.zeros_like(deg)
    pos = deg > 0
    scale[pos] = 1.0 / np.sqrt(deg[pos])
    m = sp.csr_matrix(m)
    m.sort_indices()
    rows = np.repeat(np.arange(A.n_rows), np.diff(m.indptr))
    vals = m.data * scale[rows] * scale[m.indices]
    return CsrMatrix(A.n_rows, A.n_cols, m.indptr, m.indices, vals)


def apply_mask(P: CsrMatrix, mask: np.ndarray, side: str = "rows") -> CsrMatrix:
    """Zero the rows (target masking) or columns (source masking) where mask is False.

    Masked entries are dropped rather than stored as zeros.
    """
    mask = np.asarray(mask, dtype=bool)
    if side == "rows":
        if mask.shape != (P.n_rows,):
            raise InputError(f"row mask has length {mask.size}, matrix has {P.n_rows} rows")
        keep = mask[P.row_ids()]
    elif side == "cols":
        if mask.shape != (P.n_cols,):
            raise InputError(f"column mask has length {mask.size}, matrix has {P.n_cols} columns")
        keep = mask[P.col_idx]
    else:
        raise InputError(f"side must be 'rows' or 'cols', got {side!r}")
    counts = np.bincount(P.row_ids()[keep], minlength=P.n_rows)
    row_ptr = np.zeros(P.n_rows + 1, dtype=np.int64)
    np.cumsum(counts, out=row_ptr[1:])
    return CsrMatrix(P.n_rows, P.n_cols, row_ptr, P.col_idx[keep], P.values[keep])


def spmm(S: CsrMatrix, X: np.ndarray) -> np.ndarray:
    """Sparse-dense product S @ X.

    Each output row accumulates its stored entries in ascending column order,
    so results are reproducible bit for bit.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != S.n_cols:
        raise InputError(f"cannot multiply {S.shape} sparse by {X.shape} dense")
    return np.asarray(S._scipy @ X)


def check_partition(low: np.ndarray, high: np.ndarray) -> bool:
    low = np.asarray(low, dtype=bool)
    high = np.asarray(high, dtype=bool)
    return low.shape == high.shape and bool(np.all(low ^ high))


@dataclass(frozen=True, eq=False)
class KHopIndex:
    """Per-node sorted neighbor ids within ``k`` hops, the node itself excluded.

    Stored CSR-style: neighbors of i are ``indices[indptr[i]:indptr[i+1]]``.
    """

    k: int
    indptr: np.ndarray
    indices: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "indptr", _frozen(np.asarray(self.indptr, dtype=np.int64)))
        object.__setattr__(self, "indices", _frozen(np.asarray(self.indices, dtype=np.int64)))

    @property
    def n(self) -> int:
        return len(self.indptr) - 1

    def __len__(self) -> int:
        return self.n

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def sizes(self) -> np.ndarray:
        return np.diff(self.indptr)

    def owners(self) -> np.ndarray:
        return np.repeat(np.arange(self.n), self.sizes())

    @classmethod
    def from_lists(cls, neighbor_lists: Sequence[Iterable[int]], k: int = 1) -> KHopIndex:
        """Build directly from explicit neighbor lists (sorted and deduplicated here)."""
        lists = [np.unique(np.asarray(list(nb), dtype=np.int64)) for nb in neighbor_lists]
        for i, nb in enumerate(lists):
            if np.any(nb == i):
                raise InputError(f"node {i} lists itself as a neighbor")
        indptr = np.zeros(len(lists) + 1, dtype=np.int64)
        np.cumsum([len(nb) for nb in lists], out=indptr[1:])
        indices = np.concatenate(lists) if lists else np.zeros(0, dtype=np.int64)
        return cls(k, indptr, indices)


def khop_index(A: CsrMatrix, k: int) -> KHopIndex:
    """Index of all nodes within 1..k hops of each node.

    For k=2 the reachability pattern of A + A@A is taken with the diagonal
    removed; the sparse product is the keyed lookup that replaces a per-node
    hash of 2-hop neighbors.
    """
    if k not in (1, 2):
        raise ConfigError(f"hop count k must be 1 or 2, got {k}")
    m = A._scipy.astype(bool).astype(np.int64)
    if k == 2:
        m = m + m @ m
    m = sp.coo_matrix(m)
    off = m.row != m.col
    m = sp.csr_matrix((np.ones(off.sum()), (m.row[off], m.col[off])), shape=m.shape)
    m.sort_indices()
    return KHopIndex(k, m.indptr, m.indices)
