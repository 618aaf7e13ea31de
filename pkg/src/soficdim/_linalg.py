"""Small linear-algebra helpers shared across modules.

Rank computations follow two routes: floating point row reduction with a
relative pivot threshold, and exact Fraction elimination when the input is
rational (used by the transfer-operator and loop-spanning checks, where the
vectors are integer chain coefficients).
"""

from fractions import Fraction

import numpy as np

DEFAULT_PIVOT_RTOL = 1e-10


def float_rank(rows, rtol=DEFAULT_PIVOT_RTOL):
    """Rank of a stack of float vectors by row reduction.

    The pivot threshold is ``rtol`` relative to the largest entry of the
    input, so an all-tiny matrix still has rank 0.
    """
    a = np.array(rows, dtype=float)
    if a.size == 0:
        return 0
    a = np.atleast_2d(a)
    scale = np.max(np.abs(a))
    if scale == 0.0:
        return 0
    tol = rtol * scale
    m, n = a.shape
    rank = 0
    col = 0
    while rank < m and col < n:
        piv = rank + np.argmax(np.abs(a[rank:, col]))
        if abs(a[piv, col]) <= tol:
            col += 1
            continue
        a[[rank, piv]] = a[[piv, rank]]
        a[rank] = a[rank] / a[rank, col]
        mask = np.arange(m) != rank
        a[mask] -= np.outer(a[mask, col], a[rank])
        rank += 1
        col += 1
    return rank


def rational_rank(rows):
    """Exact rank of a stack of rational vectors (Fraction elimination)."""
    a = [[Fraction(x) for x in row] for row in rows]
    if not a:
        return 0
    m, n = len(a), len(a[0])
    rank = 0
    col = 0
    while rank < m and col < n:
        piv = None
        for r in range(rank, m):
            if a[r][col] != 0:
                piv = r
                break
        if piv is None:
            col += 1
            continue
        a[rank], a[piv] = a[piv], a[rank]
        inv = Fraction(1, 1) / a[rank][col]
        a[rank] = [x * inv for x in a[rank]]
        for r in range(m):
            if r != rank and a[r][col] != 0:
                f = a[r][col]
                a[r] = [x - f * y for x, y in zip(a[r], a[rank])]
        rank += 1
        col += 1
    return rank


def orthonormal_columns(mat, rtol=1e-12):
    """Orthonormal basis for the column space of ``mat`` (thin SVD)."""
    a = np.atleast_2d(np.asarray(mat, dtype=float))
    if a.size == 0:
        return np.zeros((a.shape[0], 0))
    u, s, _ = np.linalg.svd(a, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((a.shape[0], 0))
    keep = s > rtol * s[0]
    return u[:, keep]


def operator_p_norm(mat, p, in_weights=None, out_weights=None, iters=60, seed=0):
    """Operator norm of ``mat`` between weighted l^p spaces.

    ``in_weights``/``out_weights`` are the atom masses of the domain and
    codomain norms ``(sum w |x|^p)^(1/p)``; uniform when omitted.  p = 2 is
    exact (spectral norm); other p use Boyd's fixed-point iteration, which
    is exact for p = 1 and a sharp estimate in between.
    """
    a = np.atleast_2d(np.asarray(mat, dtype=float))
    if a.size == 0:
        return 0.0
    m, n = a.shape
    win = np.ones(n) if in_weights is None else np.asarray(in_weights, dtype=float)
    wout = np.ones(m) if out_weights is None else np.asarray(out_weights, dtype=float)
    # reduce to an unweighted p -> p norm
    b = (wout[:, None] ** (1.0 / p)) * a * (win[None, :] ** (-1.0 / p))
    if p == 2.0:
        return float(np.linalg.norm(b, 2))
    if p == 1.0:
        return float(np.max(np.sum(np.abs(b), axis=0)))
    q = p / (p - 1.0)
    rng = np.random.default_rng(seed)
    x = np.abs(rng.standard_normal(n)) + 1e-3
    x /= np.linalg.norm(x, p)
    val = 0.0
    for _ in range(iters):
        y = b @ x
        ny = np.linalg.norm(y, p)
        if ny == 0.0:
            return 0.0
        val = ny
        z = np.sign(y) * np.abs(y) ** (p - 1)
        w = b.T @ z
        nw = np.linalg.norm(w, q)
        if nw == 0.0:
            break
        x = np.sign(w) * np.abs(w) ** (q - 1)
        x /= np.linalg.norm(x, p)
    return float(val)
