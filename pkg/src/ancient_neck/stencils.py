"""Finite-difference weights on nonuniform grids."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp


def fornberg_weights(x0: float, x: np.ndarray, m: int) -> np.ndarray:
    """Weights for derivatives of order 0..m at ``x0`` from nodes ``x``.

    Returns an array of shape (m + 1, len(x)); row k approximates the
    k-th derivative. Fornberg's recursion, valid for arbitrary distinct nodes.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    c = np.zeros((m + 1, n))
    c[0, 0] = 1.0
    c1 = 1.0
    c4 = x[0] - x0
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - x0
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[k, i] = c1 * (k * c[k - 1, i - 1] - c5 * c[k, i - 1]) / c2
                c[0, i] = -c1 * c5 * c[0, i - 1] / c2
            for k in range(mn, 0, -1):
                c[k, j] = (c4 * c[k, j] - k * c[k - 1, j]) / c3
            c[0, j] = c4 * c[0, j] / c3
        c1 = c2
    return c


def node_stencil(x: np.ndarray, i: int, even_tip: bool = False, width: int = 5):
    """Indices and weights (first and second derivative) at node ``i``.

    Interior nodes use a centered stencil of ``width`` points; nodes near an end
    use the nearest ``width`` nodes. With ``even_tip`` the grid starts at 0 and the
    function is extended evenly, so mirrored ghost nodes fold back onto real ones.
    """
    n = len(x)
    half = width // 2
    if even_tip:
        offsets = np.arange(i - half, i + half + 1)
        if offsets[-1] >= n:
            offsets = offsets - (offsets[-1] - (n - 1))
        idx = np.abs(offsets)
        pts = np.sign(offsets) * x[idx]
        w = fornberg_weights(x[i], pts, 2)[1:]
        out = np.zeros((2, n))
        np.add.at(out[0], idx, w[0])
        np.add.at(out[1], idx, w[1])
        used = np.unique(idx)
        return used, out[:, used]
    lo = min(max(i - half, 0), n - width)
    idx = np.arange(lo, lo + width)
    return idx, fornberg_weights(x[i], x[idx], 2)[1:]


def derivative_matrices(x: np.ndarray, even_tip: bool = False, width: int = 5):
    """Sparse first- and second-derivative matrices on the grid ``x``."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    if n < width:
        raise ValueError(f"need at least {width} nodes, got {n}")
    rows, cols, v1, v2 = [], [], [], []
    for i in range(n):
        idx, w = node_stencil(x, i, even_tip, width)
        rows.extend([i] * len(idx))
        cols.extend(idx)
        v1.extend(w[0])
        v2.extend(w[1])
    d1 = sp.csr_matrix((v1, (rows, cols)), shape=(n, n))
    d2 = sp.csr_matrix((v2, (rows, cols)), shape=(n, n))
    return d1, d2
