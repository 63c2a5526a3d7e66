"""Columnar predictor storage, correlation scans and column resampling."""

import io
import math
import os
import struct
from functools import cached_property

import numpy as np

from ._config import get_n_jobs, parallel_map
from .exceptions import DataError, DegenerateResponse, FormatError, ParseError

SVM1_MAGIC = b"SVM1"
_SVM1_HEADER = struct.Struct("<4sQQ")

# fixed so a scan's per-column values never depend on the worker count
SCAN_CHUNK = 4096


def column_moments(a):
    """Per-column mean and population standard deviation (divisor n).

    Uses the corrected two-pass scheme: a pairwise-summed mean refined by
    the mean of its own residuals, then the residual sum of squares minus
    the squared residual sum. Constant columns get their exact value as
    mean and a standard deviation of exactly zero.
    """
    n = a.shape[0]
    const = np.all(a == a[0], axis=0)
    mean = a.sum(axis=0) / n
    dev = a - mean
    corr = dev.sum(axis=0)
    mean += corr / n
    dev -= corr / n
    ss = np.einsum("ij,ij->j", dev, dev) - dev.sum(axis=0) ** 2 / n
    std = np.sqrt(np.maximum(ss, 0.0) / n)
    mean[const] = a[0, const]
    std[const] = 0.0
    return mean, std


def _first_nonfinite(a):
    if np.isfinite(a).all():
        return None
    bad = np.argwhere(~np.isfinite(a))
    return tuple(int(v) for v in bad[0]) if len(bad) else None


class DataMatrix:
    """Immutable n x p predictor matrix stored column-major.

    Parameters
    ----------
    values : array-like of shape (n, p)
        Predictor observations, one column per predictor.
    names : sequence of str, optional
        Column names, e.g. from a CSV header.

    Attributes
    ----------
    col_mean : ndarray of shape (p,)
        Compensated-sum column means.
    col_std : ndarray of shape (p,)
        Population (divisor n) column standard deviations; zero exactly for
        constant columns.
    """

    def __init__(self, values, names=None):
        values = np.array(values, dtype=np.float64, order="F", copy=True)
        if values.ndim != 2:
            raise DataError(f"expected a 2-D matrix, got {values.ndim}-D")
        n, p = values.shape
        if n < 2 or p < 1:
            raise DataError(f"matrix must have n >= 2 rows and p >= 1 columns, got {n}x{p}")
        loc = _first_nonfinite(values)
        if loc is not None:
            raise DataError(f"non-finite value at row {loc[0]}, column {loc[1]}", *loc)
        if names is not None:
            names = [str(s) for s in names]
            if len(names) != p:
                raise DataError(f"{len(names)} column names for {p} columns")
        values.setflags(write=False)
        self._values = values
        self._n = n
        self.names = names
        self.col_mean, self.col_std = column_moments(values)
        self.col_mean.setflags(write=False)
        self.col_std.setflags(write=False)

    @property
    def values(self):
        if self._values is None:
            parent, idx = self._source
            values = np.asfortranarray(parent.values[:, idx])
            values.setflags(write=False)
            self._values = values
        return self._values

    @property
    def n(self):
        return self._n

    @property
    def p(self):
        return self.col_mean.shape[0]

    @property
    def shape(self):
        return (self.n, self.p)

    def column(self, j):
        return self.values[:, j]

    @cached_property
    def is_constant(self):
        return self.col_std == 0.0

    @cached_property
    def standardized(self):
        """Columns centered and scaled to unit Euclidean norm; constant columns are 0."""
        scale = self.col_std * math.sqrt(self.n)
        scale = np.where(scale > 0, scale, np.inf)
        z = np.asfortranarray((self.values - self.col_mean) / scale)
        z.setflags(write=False)
        return z

    def take(self, idx):
        """DataMatrix of columns ``idx`` sharing this matrix's moments.

        The standardized columns are gathered now; raw values only when a
        caller asks for them (bootstrap resampling).
        """
        idx = check_subset(idx, self.p)
        sub = object.__new__(DataMatrix)
        sub._values = None
        sub._n = self.n
        sub._source = (self, idx)
        z = np.asfortranarray(self.standardized[:, idx])
        z.setflags(write=False)
        sub.__dict__["standardized"] = z
        sub.names = [self.names[j] for j in idx] if self.names is not None else None
        sub.col_mean = self.col_mean[idx]
        sub.col_std = self.col_std[idx]
        return sub

    def __repr__(self):
        return f"DataMatrix(n={self.n}, p={self.p})"


class ResponseVector:
    """Response observations with their mean and centered norm."""

    def __init__(self, values):
        values = np.array(values, dtype=np.float64, copy=True).ravel()
        loc = _first_nonfinite(values[:, None])
        if loc is not None:
            raise DataError(f"non-finite response value at row {loc[0]}", loc[0], None)
        values.setflags(write=False)
        self.values = values
        if np.all(values == values[0]):
            self.mean = float(values[0])
            self.centered = np.zeros_like(values)
            self.centered_norm = 0.0
        else:
            self.mean = math.fsum(values) / len(values)
            self.centered = values - self.mean
            self.centered_norm = math.sqrt(math.fsum(self.centered * self.centered))
        self.centered.setflags(write=False)

    @property
    def n(self):
        return len(self.values)

    def __len__(self):
        return len(self.values)

    def __repr__(self):
        return f"ResponseVector(n={self.n}, mean={self.mean:.6g})"


def as_response(y):
    return y if isinstance(y, ResponseVector) else ResponseVector(y)


def as_matrix(X):
    return X if isinstance(X, DataMatrix) else DataMatrix(X)


def check_subset(subset, p):
    """Validate a predictor index set and return it as an intp array."""
    if subset is None:
        return np.arange(p, dtype=np.intp)
    idx = np.asarray(subset, dtype=np.intp).ravel()
    if idx.size and (idx.min() < 0 or idx.max() >= p):
        raise IndexError(f"predictor index out of range [0, {p})")
    if idx.size > 1 and not np.all(idx[1:] > idx[:-1]) and np.unique(idx).size != idx.size:
        raise ValueError("duplicate predictor indices in subset")
    return idx


def correlation_scan(X, Y, subset=None):
    """Pearson correlation of ``Y`` with each column of ``X`` in ``subset``.

    Returns an array aligned with ``subset`` (all columns when ``None``).
    Constant columns give 0. Raises :class:`DegenerateResponse` when ``Y``
    is constant.
    """
    Y = as_response(Y)
    if Y.n != X.n:
        raise DataError(f"response has {Y.n} rows, matrix has {X.n}")
    if Y.centered_norm == 0.0:
        raise DegenerateResponse("response vector is constant")
    u = Y.centered / Y.centered_norm
    z = X.standardized
    if subset is None:
        m = X.p
        blocks = [slice(i, min(i + SCAN_CHUNK, m)) for i in range(0, m, SCAN_CHUNK)]
        cols = blocks
    else:
        idx = check_subset(subset, X.p)
        if 2 * idx.size >= X.p:
            # gathering most columns costs more than scanning them all
            return correlation_scan(X, Y)[idx]
        m = idx.size
        blocks = [slice(i, min(i + SCAN_CHUNK, m)) for i in range(0, m, SCAN_CHUNK)]
        cols = [idx[b] for b in blocks]
    out = np.empty(m)

    def work(k):
        out[blocks[k]] = z[:, cols[k]].T @ u

    parallel_map(work, range(len(blocks)), n_jobs=min(get_n_jobs(), len(blocks)))
    np.clip(out, -1.0, 1.0, out=out)
    return out


def resample_column(X, j, rng):
    """Draw n values i.i.d. with replacement from column ``j``."""
    if not 0 <= j < X.p:
        raise IndexError(f"column {j} out of range [0, {X.p})")
    return X.values[rng.integers(0, X.n, size=X.n), j]


# -- file formats -------------------------------------------------------------


def _is_float(tok):
    try:
        float(tok)
    except ValueError:
        return False
    return True


def _open_source(source, mode):
    if isinstance(source, (str, os.PathLike)):
        return open(source, mode), True
    return source, False


def _read_csv(text):
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ParseError("empty CSV input", row=0)
    names = None
    first = [t.strip() for t in lines[0].split(",")]
    if not all(_is_float(t) for t in first):
        names = first
        lines = lines[1:]
    width = len(names) if names is not None else len(first)
    rows = []
    for i, line in enumerate(lines):
        toks = line.split(",")
        if len(toks) != width:
            raise ParseError(f"row {i} has {len(toks)} fields, expected {width}", row=i)
        try:
            rows.append([float(t) for t in toks])
        except ValueError as exc:
            raise ParseError(f"row {i}: {exc}", row=i) from None
    if not rows:
        raise ParseError("CSV input has no data rows", row=0)
    values = np.array(rows, dtype=np.float64)
    loc = _first_nonfinite(values)
    if loc is not None:
        raise DataError(f"non-finite value at row {loc[0]}, column {loc[1]}", *loc)
    return values, names


def _read_svm1(buf):
    if len(buf) < _SVM1_HEADER.size:
        raise FormatError("file too short for an SVM1 header")
    magic, n, p = _SVM1_HEADER.unpack_from(buf)
    if magic != SVM1_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {SVM1_MAGIC!r}")
    payload = len(buf) - _SVM1_HEADER.size
    if payload != 8 * n * p:
        raise FormatError(f"header declares {n}x{p} ({8 * n * p} bytes), payload has {payload} bytes")
    flat = np.frombuffer(buf, dtype="<f8", offset=_SVM1_HEADER.size, count=n * p)
    return flat.reshape((n, p), order="F")


def read_table(source, format=None):
    """Read a raw ``(values, names)`` pair without building a DataMatrix."""
    fh, close = _open_source(source, "rb")
    try:
        data = fh.read()
    finally:
        if close:
            fh.close()
    if isinstance(data, str):
        data = data.encode()
    if format is None:
        format = "svm1" if data[:4] == SVM1_MAGIC else "csv"
    if format == "csv":
        return _read_csv(data.decode())
    if format in ("svm1", "binary-f64"):
        values = _read_svm1(data)
        loc = _first_nonfinite(values)
        if loc is not None:
            raise DataError(f"non-finite value at row {loc[0]}, column {loc[1]}", *loc)
        return values, None
    raise FormatError(f"unknown matrix format {format!r}")


def load_matrix(source, format=None):
    """Load a :class:`DataMatrix` from a path or binary stream.

    ``format`` is ``"csv"`` or ``"svm1"`` (alias ``"binary-f64"``); when
    omitted it is sniffed from the SVM1 magic bytes.
    """
    values, names = read_table(source, format)
    return DataMatrix(values, names=names)


def save_matrix(X, dest, format="svm1"):
    """Write ``X`` in CSV or SVM1 layout. SVM1 round-trips bit-exactly."""
    fh, close = _open_source(dest, "wb")
    try:
        if format in ("svm1", "binary-f64"):
            fh.write(_SVM1_HEADER.pack(SVM1_MAGIC, X.n, X.p))
            fh.write(np.asarray(X.values, dtype="<f8").tobytes(order="F"))
        elif format == "csv":
            out = io.StringIO()
            if X.names is not None:
                out.write(",".join(X.names) + "\n")
            for row in X.values:
                out.write(",".join(repr(float(v)) for v in row) + "\n")
            fh.write(out.getvalue().encode())
        else:
            raise FormatError(f"unknown matrix format {format!r}")
    finally:
        if close:
            fh.close()
