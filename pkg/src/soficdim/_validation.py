"""Input validation helpers.

All loaders and estimators funnel through these so that a bad model file or
parameter fails with a diagnostic naming the offending field, in the spirit
of scikit-learn's check_* utilities.
"""

from fractions import Fraction

import numpy as np

WEIGHT_SUM_TOL = 1e-12


class ModelError(ValueError):
    """A model file or in-memory model violates a structural invariant."""


class ParameterError(ValueError):
    """A numerical parameter is outside its documented domain."""


def check_p(p):
    p = float(p)
    if not p >= 1.0:
        raise ParameterError(f"p must satisfy p >= 1, got {p}")
    return p


def check_epsilon(eps, upper=1.0):
    eps = float(eps)
    if not (0.0 < eps < upper):
        raise ParameterError(f"epsilon must lie in (0, {upper}), got {eps}")
    return eps


def as_weight(x):
    """Parse one atom weight; accepts floats and 'p/q' strings."""
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    return float(x)


def check_weights(weights, field="weights"):
    """Validate atom masses: positive, summing to one within 1e-12.

    Returns (float array, exact Fractions or None).
    """
    if not weights:
        raise ModelError(f"{field}: must be a nonempty list")
    parsed = [as_weight(w) for w in weights]
    exact = parsed if all(isinstance(w, (Fraction, int)) for w in parsed) else None
    arr = np.array([float(w) for w in parsed], dtype=float)
    if np.any(arr <= 0.0):
        i = int(np.argmin(arr))
        raise ModelError(f"{field}[{i}]: atom weight must be > 0, got {arr[i]}")
    if abs(arr.sum() - 1.0) > WEIGHT_SUM_TOL:
        raise ModelError(f"{field}: weights sum to {float(arr.sum())!r}, expected 1 within {WEIGHT_SUM_TOL}")
    if exact is not None and sum(exact) != 1:
        exact = None
    return arr, exact


def check_blocks(blocks, n_atoms, field="blocks"):
    """Validate that blocks partition range(n_atoms); returns canonical form."""
    seen = set()
    out = []
    for bi, block in enumerate(blocks):
        if not block:
            raise ModelError(f"{field}[{bi}]: empty block")
        for x in block:
            if not isinstance(x, (int, np.integer)) or not (0 <= x < n_atoms):
                raise ModelError(f"{field}[{bi}]: atom index {x!r} out of range 0..{n_atoms - 1}")
            if x in seen:
                raise ModelError(f"{field}[{bi}]: atom {x} appears in more than one block")
            seen.add(x)
        out.append(tuple(sorted(block)))
    if len(seen) != n_atoms:
        missing = sorted(set(range(n_atoms)) - seen)
        raise ModelError(f"{field}: atoms {missing} not covered by any block")
    return tuple(sorted(out))


def check_pairs(pairs, size, field="pairs"):
    """Validate an injective partial assignment on range(size)."""
    srcs, dsts = set(), set()
    out = []
    for k, pair in enumerate(pairs):
        if len(pair) != 2:
            raise ModelError(f"{field}[{k}]: expected [src, dst], got {pair!r}")
        s, t = int(pair[0]), int(pair[1])
        if not (0 <= s < size) or not (0 <= t < size):
            raise ModelError(f"{field}[{k}]: indices ({s},{t}) out of range 0..{size - 1}")
        if s in srcs:
            raise ModelError(f"{field}[{k}]: source {s} repeated")
        if t in dsts:
            raise ModelError(f"{field}[{k}]: destination {t} repeated (map not injective)")
        srcs.add(s)
        dsts.add(t)
        out.append((s, t))
    return tuple(sorted(out))
