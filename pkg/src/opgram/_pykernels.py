"""Numpy implementations of the hot loops; the fallback when ``_ckernels`` is missing.

Every function here has a twin of the same name and signature in
``_ckernels.pyx``. Both sum class terms in class-index order using the
same ``xlogx`` lookup table, so the information-gain kernels agree bit for
bit; the SGD kernel agrees to rounding.

Column inputs are CSC slices: ``indptr`` (local, starting at 0), ``rows``
(instance index per stored entry) and, for frequency mode, ``values``
sorted ascending within each column.
"""
import numpy as np

NAME = "python"


def _sum_xlogx(counts, xlogx):
    # sequential over classes, matching the compiled kernel's order
    acc = np.zeros(counts.shape[0])
    for c in range(counts.shape[1]):
        acc = acc + xlogx[counts[:, c]]
    return acc


def _split_ig(left, n_left, class_totals, xlogx):
    """IG of binary splits; ``left`` is (n_splits, n_classes) counts."""
    N = int(class_totals.sum())
    hnum = xlogx[N] - _sum_xlogx(class_totals[None, :], xlogx)[0]
    right = class_totals[None, :] - left
    lnum = xlogx[n_left] - _sum_xlogx(left, xlogx)
    rnum = xlogx[N - n_left] - _sum_xlogx(right, xlogx)
    ig = (hnum - (lnum + rnum)) / N
    h = hnum / N
    return np.minimum(np.maximum(ig, 0.0), h)


def _present_counts(indptr, rows, y, n_classes):
    ncol = len(indptr) - 1
    nnz = np.diff(indptr)
    col = np.repeat(np.arange(ncol, dtype=np.int64), nnz)
    flat = np.bincount(col * n_classes + y[rows], minlength=ncol * n_classes)
    return flat.reshape(ncol, n_classes), nnz, col


def ig_binary(indptr, rows, y, class_totals, xlogx):
    indptr = np.asarray(indptr, dtype=np.int64)
    rows = np.asarray(rows, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    class_totals = np.asarray(class_totals, dtype=np.int64)
    present, nnz, _ = _present_counts(indptr, rows, y, len(class_totals))
    return _split_ig(present, nnz, class_totals, xlogx)


def ig_frequency(indptr, rows, values, y, class_totals, xlogx):
    """Best single-threshold split per column: returns (ig, threshold).

    Candidate thresholds are midpoints between consecutive distinct values,
    0 standing for instances without the feature. The first (smallest)
    threshold wins ties. Columns with a single distinct value get IG 0 and
    a NaN threshold.
    """
    indptr = np.asarray(indptr, dtype=np.int64)
    rows = np.asarray(rows, dtype=np.int64)
    values = np.asarray(values, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    class_totals = np.asarray(class_totals, dtype=np.int64)
    n_classes = len(class_totals)
    N = int(class_totals.sum())
    ncol = len(indptr) - 1
    ig = np.zeros(ncol)
    thr = np.full(ncol, np.nan)
    if ncol == 0:
        return ig, thr

    present, nnz, col = _present_counts(indptr, rows, y, n_classes)
    absent = class_totals[None, :] - present
    n_absent = N - nnz
    starts = indptr[:-1]

    # split between "absent" and the smallest stored value
    a_cols = np.flatnonzero((n_absent > 0) & (nnz > 0))
    a_left = absent[a_cols]
    a_n = n_absent[a_cols]
    a_thr = values[starts[a_cols]] / 2.0

    # splits after each run of equal values that is not the column's last
    e = np.arange(len(values) - 1, dtype=np.int64)
    same_col = col[:-1] == col[1:]
    ends = e[same_col & (values[:-1] != values[1:])]
    onehot = np.zeros((len(values), n_classes), dtype=np.int64)
    onehot[np.arange(len(values)), y[rows]] = 1
    cum = np.cumsum(onehot, axis=0)
    base = np.zeros((ncol, n_classes), dtype=np.int64)
    has_prev = starts > 0
    base[has_prev] = cum[starts[has_prev] - 1]
    g_cols = col[ends]
    g_left = absent[g_cols] + cum[ends] - base[g_cols]
    g_n = n_absent[g_cols] + (ends - starts[g_cols] + 1)
    g_thr = (values[ends] + values[ends + 1]) / 2.0

    c_cols = np.concatenate([a_cols, g_cols])
    if len(c_cols) == 0:
        return ig, thr
    c_left = np.concatenate([a_left, g_left])
    c_n = np.concatenate([a_n, g_n])
    c_thr = np.concatenate([a_thr, g_thr])
    order = np.lexsort((c_thr, c_cols))
    c_cols, c_left, c_n, c_thr = c_cols[order], c_left[order], c_n[order], c_thr[order]

    c_ig = _split_ig(c_left, c_n, class_totals, xlogx)
    seg_starts = np.flatnonzero(np.r_[True, c_cols[1:] != c_cols[:-1]])
    best = np.maximum.reduceat(c_ig, seg_starts)
    owner = c_cols[seg_starts]
    col_best = np.full(ncol, -1.0)
    col_best[owner] = best
    winners = np.flatnonzero(c_ig == col_best[c_cols])
    win_cols, first = np.unique(c_cols[winners], return_index=True)
    ig[win_cols] = c_ig[winners[first]]
    thr[win_cols] = c_thr[winners[first]]
    return ig, thr


def sgd_hinge(indptr, indices, data, ysign, order, lam, w, t0):
    """Pegasos-style SGD on the hinge loss, updating ``w`` in place.

    ``w`` has one slot per feature plus a trailing bias slot; the bias is
    treated as a constant feature of value 1. ``order`` lists the instance
    index visited at each step. Returns the final step counter.
    """
    d = len(w) - 1
    v = np.array(w, dtype=np.float64)
    s = 1.0
    t = int(t0)
    for i in order:
        t += 1
        eta = 1.0 / (lam * t)
        a, b = indptr[i], indptr[i + 1]
        idx = indices[a:b]
        x = data[a:b]
        acc = 0.0
        for vj, xj in zip(v[idx].tolist(), x.tolist()):
            acc += vj * xj
        acc += v[d]
        dot = s * acc
        s *= 1.0 - eta * lam
        if s == 0.0:
            v[:] = 0.0
            s = 1.0
        yi = ysign[i]
        if yi * dot < 1.0:
            step = eta * yi / s
            v[idx] += step * x
            v[d] += step
    w[:] = s * v
    return t
