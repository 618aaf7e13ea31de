"""l^p norms, geometric product norms, vector fields and generation checks.

Vector fields assign a finite-dimensional fiber vector to every atom; the
weighted p-integral of the Euclidean fiber norms is the norm of the ambient
representation space.  Product norms on bounded sequences are represented by
a finite prefix plus a certified tail bound, so comparisons against a cut
threshold are interval-safe and can never flip due to truncation.
"""

from dataclasses import dataclass

import numpy as np

from ._linalg import float_rank
from ._validation import ModelError, check_p

SUPPORT_TOL = 1e-14


def lp_norm(v, p, weights=None, normalized=False):
    """(sum w_i |v_i|^p)^(1/p); uniform weights 1/d when ``normalized``."""
    p = check_p(p)
    v = np.asarray(v, dtype=float)
    if weights is None:
        w = np.full(v.shape, 1.0 / v.size) if normalized else np.ones(v.shape)
    else:
        w = np.asarray(weights, dtype=float)
    return float(np.sum(w * np.abs(v) ** p) ** (1.0 / p))


@dataclass(frozen=True)
class VectorField:
    """One fiber vector per atom; fiber dimensions may vary."""

    space: object
    fibers: tuple

    @staticmethod
    def make(space, fibers):
        if len(fibers) != space.n_atoms:
            raise ModelError(f"fibers: expected {space.n_atoms} entries, got {len(fibers)}")
        return VectorField(space, tuple(tuple(float(x) for x in f) for f in fibers))

    @property
    def fiber_dims(self):
        return tuple(len(f) for f in self.fibers)

    def fiber(self, atom):
        return np.array(self.fibers[atom], dtype=float)

    def zero_like(self):
        return VectorField(self.space, tuple(tuple(0.0 for _ in f) for f in self.fibers))


def direct_integral_norm(field: VectorField, p) -> float:
    """(sum_atoms mu(x) ||v_x||^p)^(1/p) with Euclidean fiber norms."""
    p = check_p(p)
    w = field.space.weight_array()
    fiber_norms = np.array([np.linalg.norm(field.fiber(a)) for a in range(field.space.n_atoms)])
    return float(np.sum(w * fiber_norms**p) ** (1.0 / p))


def support(v: VectorField):
    """Atoms whose fiber has any entry above the support tolerance."""
    return tuple(
        a
        for a in range(v.space.n_atoms)
        if v.fibers[a] and np.max(np.abs(v.fiber(a))) > SUPPORT_TOL
    )


@dataclass(frozen=True)
class ProductNorm:
    """Monotone norm rho(f) = (sum_j base^-j |f(j)|^p)^(1/p), j = 1, 2, ...

    The geometric weights keep tail sums in closed form, which is what makes
    the interval evaluation certified.
    """

    p: float = 1.0
    base: float = 2.0

    def __post_init__(self):
        check_p(self.p)
        if not self.base > 1.0:
            raise ModelError(f"product norm base must exceed 1, got {self.base}")

    def weight(self, j):
        """Weight of coordinate j, 1-indexed."""
        return self.base ** (-j)

    def weights(self, n):
        return self.base ** (-np.arange(1, n + 1, dtype=float))

    def tail_weight(self, n):
        """sum_{j>n} base^-j."""
        return self.base ** (-float(n)) / (self.base - 1.0)

    def eval_interval(self, prefix, tail_bound=0.0):
        """Enclosure [lower, upper] of rho(f) for f = prefix + bounded tail."""
        prefix = np.asarray(prefix, dtype=float)
        if not np.isfinite(tail_bound) or tail_bound < 0.0:
            raise ModelError(f"tail bound must be finite and >= 0, got {tail_bound}")
        n = prefix.size
        head = float(np.sum(self.weights(n) * np.abs(prefix) ** self.p))
        lo = head ** (1.0 / self.p)
        hi = (head + self.tail_weight(n) * tail_bound**self.p) ** (1.0 / self.p)
        return lo, hi

    def eval_exact(self, prefix):
        """rho of a finitely supported sequence."""
        return self.eval_interval(prefix, 0.0)[0]


def is_dynamically_generating(fields, rel, cocycle=None, rtol=1e-10) -> bool:
    """True iff the orbit-translates of the fields span every fiber.

    Fiber transport within an orbit is the identity unless ``cocycle``
    supplies an invertible basis matrix b_x per atom, in which case the
    transport x <- y is b_x b_y^{-1}.  Fiber dimensions must be constant on
    each orbit.
    """
    if not fields:
        return False
    for f in fields:
        if f.space.n_atoms != rel.n_atoms:
            raise ModelError("fields must live over the relation's atom space")
    dims = fields[0].fiber_dims
    for f in fields:
        if f.fiber_dims != dims:
            raise ModelError("fields disagree on fiber dimensions")
    for block in rel.blocks:
        block_dims = {dims[a] for a in block}
        if len(block_dims) != 1:
            raise ModelError(f"fiber dimension varies on orbit {block}")
        k = block_dims.pop()
        if k == 0:
            continue
        rows = []
        for y in block:
            for f in fields:
                vec = f.fiber(y)
                if cocycle is not None:
                    vec = np.linalg.solve(np.asarray(cocycle[y], dtype=float), vec)
                rows.append(vec)
        if float_rank(rows, rtol=rtol) < k:
            return False
    return True
