"""
Readers and writers for term-document matrices and outlier labels.

Matrices are held as ``scipy.sparse.csc_matrix`` with terms on the rows and
documents on the columns. Every loader funnels through
:func:`as_term_doc`, which enforces the storage invariants the solver relies
on: no explicit zeros, sorted row indices, finite nonnegative values.
"""

import os

import numpy as np
import scipy.io
import scipy.sparse as sp


class CorpusFormatError(ValueError):
    """Raised when an input file does not follow its declared format."""

    def __init__(self, path, message, lineno=None):
        self.path = str(path)
        self.lineno = lineno
        where = f"{path}:{lineno}" if lineno is not None else f"{path}"
        super().__init__(f"{where}: {message}")


class LabelError(ValueError):
    """Raised for label files that are malformed or do not match the corpus."""


def as_term_doc(A, copy=True):
    """Canonicalize a matrix into a validated term-document CSC matrix.

    Duplicate coordinates are summed and explicit zeros dropped.

    Parameters
    ----------
    A : array_like or sparse matrix, shape (n_terms, n_docs)
    copy : bool
        Copy the data even when ``A`` is already CSC.

    Returns
    -------
    scipy.sparse.csc_matrix of float64
    """
    if sp.issparse(A):
        M = sp.csc_matrix(A, dtype=np.float64, copy=copy)
    else:
        arr = np.asarray(A, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"term-document matrix must be 2-D, got ndim={arr.ndim}")
        M = sp.csc_matrix(arr)
    M.sum_duplicates()
    if not np.all(np.isfinite(M.data)):
        raise ValueError("term-document matrix has non-finite entries")
    if np.any(M.data < 0):
        raise ValueError("negative entry in term-document matrix")
    M.eliminate_zeros()
    M.sort_indices()
    return M


def check_term_doc(A):
    """Raise ``ValueError`` unless ``A`` satisfies the CSC storage invariants."""
    if not sp.isspmatrix_csc(A):
        raise ValueError("expected a scipy.sparse CSC matrix")
    m, n = A.shape
    ptr, idx, val = A.indptr, A.indices, A.data
    if ptr.shape[0] != n + 1 or ptr[0] != 0 or np.any(np.diff(ptr) < 0):
        raise ValueError("column pointer array is not monotone of length n+1")
    if idx.size and (idx.min() < 0 or idx.max() >= m):
        raise ValueError("row index out of bounds")
    if np.any(val <= 0) or not np.all(np.isfinite(val)):
        raise ValueError("stored values must be finite and strictly positive")
    for j in range(n):
        col = idx[ptr[j]:ptr[j + 1]]
        if col.size > 1 and np.any(np.diff(col) <= 0):
            raise ValueError(f"row indices of column {j} are not strictly increasing")


def tfidf(A):
    """Return a tf-idf weighted copy of ``A``.

    Uses ``tf * log(n_docs / df)``; terms present in every document get weight
    zero and are dropped from storage.
    """
    A = as_term_doc(A)
    n = A.shape[1]
    df = np.bincount(A.indices, minlength=A.shape[0])
    idf = np.zeros(A.shape[0])
    nz = df > 0
    idf[nz] = np.log(n / df[nz])
    B = A.copy()
    B.data = B.data * idf[B.indices]
    return as_term_doc(B, copy=False)


def _open_text(path):
    if not os.path.exists(path):
        raise FileNotFoundError(f"no such file: {path}")
    return open(path, "r", encoding="utf-8")


def _header_int(path, lineno, line, name):
    tok = line.split()
    if len(tok) != 1:
        raise CorpusFormatError(path, f"expected a single integer for {name}", lineno)
    try:
        value = int(tok[0])
    except ValueError:
        raise CorpusFormatError(path, f"malformed header value for {name}: {tok[0]!r}", lineno)
    if value < 0:
        raise CorpusFormatError(path, f"{name} must be nonnegative", lineno)
    return value


def load_bow(path):
    """Load a UCI-style bag-of-words file.

    The file has three header lines (document count, vocabulary size,
    number of entries) followed by ``docID termID count`` triples, all
    1-indexed. Duplicate ``(doc, term)`` pairs are summed.

    Parameters
    ----------
    path : str or path-like

    Returns
    -------
    scipy.sparse.csc_matrix, shape (vocab_size, doc_count)
    """
    path = os.fspath(path)
    with _open_text(path) as fh:
        lines = fh.read().splitlines()

    # skip blank lines but keep original numbering for error messages
    numbered = [(i + 1, ln) for i, ln in enumerate(lines) if ln.strip()]
    if len(numbered) < 3:
        raise CorpusFormatError(path, "malformed header: expected D, W and NNZ lines")
    n_docs = _header_int(path, *numbered[0], "D")
    n_terms = _header_int(path, *numbered[1], "W")
    nnz = _header_int(path, *numbered[2], "NNZ")
    body = numbered[3:]
    if len(body) != nnz:
        raise CorpusFormatError(path, f"header declares {nnz} entries, found {len(body)}")

    rows = np.empty(nnz, dtype=np.int64)
    cols = np.empty(nnz, dtype=np.int64)
    vals = np.empty(nnz, dtype=np.float64)
    for k, (lineno, line) in enumerate(body):
        tok = line.split()
        if len(tok) != 3:
            raise CorpusFormatError(path, "expected 'docID termID count'", lineno)
        try:
            d, t = int(tok[0]), int(tok[1])
            c = float(tok[2])
        except ValueError:
            raise CorpusFormatError(path, "non-numeric entry", lineno)
        if not 1 <= d <= n_docs:
            raise CorpusFormatError(path, f"docID {d} outside 1..{n_docs}", lineno)
        if not 1 <= t <= n_terms:
            raise CorpusFormatError(path, f"termID {t} outside 1..{n_terms}", lineno)
        if not np.isfinite(c) or c <= 0:
            raise CorpusFormatError(path, f"non-positive count {tok[2]}", lineno)
        rows[k], cols[k], vals[k] = t - 1, d - 1, c

    A = sp.coo_matrix((vals, (rows, cols)), shape=(n_terms, n_docs))
    return as_term_doc(A, copy=False)


def _format_count(v):
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def save_bow(A, path):
    """Write ``A`` in the bag-of-words triple format, ordered by document then term."""
    A = as_term_doc(A)
    m, n = A.shape
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{n}\n{m}\n{A.nnz}\n")
        for j in range(n):
            lo, hi = A.indptr[j], A.indptr[j + 1]
            for i, v in zip(A.indices[lo:hi], A.data[lo:hi]):
                fh.write(f"{j + 1} {i + 1} {_format_count(v)}\n")


def load_matrix_market(path):
    """Load a coordinate MatrixMarket file as a term-document matrix.

    Only ``real`` or ``integer`` general matrices are accepted; pattern
    matrices carry no counts and negative values break the nonnegative
    model, so both are rejected.
    """
    path = os.fspath(path)
    if not os.path.exists(path):
        raise FileNotFoundError(f"no such file: {path}")
    try:
        rows, cols, _, fmt, field, symmetry = scipy.io.mminfo(path)
    except Exception as exc:
        raise CorpusFormatError(path, f"malformed MatrixMarket header ({exc})")
    if fmt != "coordinate":
        raise CorpusFormatError(path, f"expected coordinate format, got {fmt}")
    if field not in ("real", "integer"):
        raise CorpusFormatError(path, f"unsupported field {field!r}; need real or integer")
    if symmetry != "general":
        raise CorpusFormatError(path, f"unsupported symmetry {symmetry!r}; need general")
    try:
        M = scipy.io.mmread(path)
    except Exception as exc:
        raise CorpusFormatError(path, f"unreadable MatrixMarket body ({exc})")
    M = sp.coo_matrix(M)
    if np.any(M.data < 0):
        raise CorpusFormatError(path, "negative entry")
    if not np.all(np.isfinite(M.data)):
        raise CorpusFormatError(path, "non-finite entry")
    return as_term_doc(M, copy=False)


def save_matrix_market(A, path, comment=""):
    """Write ``A`` as a coordinate real general MatrixMarket file."""
    A = as_term_doc(A).tocoo()
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("%%MatrixMarket matrix coordinate real general\n")
        for line in comment.splitlines():
            fh.write(f"% {line}\n")
        fh.write(f"{A.shape[0]} {A.shape[1]} {A.nnz}\n")
        order = np.lexsort((A.row, A.col))
        for i, j, v in zip(A.row[order], A.col[order], A.data[order]):
            fh.write(f"{i + 1} {j + 1} {float(v)!r}\n")


def save_dense_matrix_market(X, path, comment=""):
    """Write a dense matrix in MatrixMarket ``array`` format (column-major)."""
    X = np.asarray(X, dtype=np.float64)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("%%MatrixMarket matrix array real general\n")
        for line in comment.splitlines():
            fh.write(f"% {line}\n")
        fh.write(f"{X.shape[0]} {X.shape[1]}\n")
        for v in X.ravel(order="F"):
            fh.write(f"{float(v):.17g}\n")


def load_matrix(path, fmt="bow"):
    """Dispatch to :func:`load_bow` (``fmt='bow'``) or :func:`load_matrix_market` (``'mm'``)."""
    if fmt == "bow":
        return load_bow(path)
    if fmt == "mm":
        return load_matrix_market(path)
    raise ValueError(f"unknown matrix format {fmt!r}")


def load_labels(path, n_docs=None):
    """Read one 0/1 flag per line; line ``i`` labels document ``i - 1``.

    Returns
    -------
    numpy.ndarray of int8
    """
    path = os.fspath(path)
    with _open_text(path) as fh:
        lines = [ln.strip() for ln in fh.read().splitlines()]
    while lines and not lines[-1]:
        lines.pop()
    labels = np.empty(len(lines), dtype=np.int8)
    for k, tok in enumerate(lines):
        if tok not in ("0", "1"):
            raise LabelError(f"{path}:{k + 1}: label must be 0 or 1, got {tok!r}")
        labels[k] = int(tok)
    if n_docs is not None and labels.size != n_docs:
        raise LabelError(
            f"{path}: {labels.size} labels for {n_docs} documents (length mismatch)")
    return labels


def save_labels(labels, path):
    labels = np.asarray(labels)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for v in labels:
            fh.write(f"{int(v)}\n")
