"""Finite measured equivalence relations and the partial-bijection algebra.

A finite weighted atom space stands in for the underlying probability space;
orbits are an explicit partition of the atoms; and the role of the partial
morphisms is played by injective partial maps of {0..d-1}.  Everything else
in the package is built on the trace and the normalized Hilbert-Schmidt
norm defined here.
"""

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.sparse as sp

from ._validation import ModelError, check_blocks, check_pairs, check_weights

DENSE_CUTOFF = 1024


@dataclass(frozen=True)
class AtomSpace:
    """Finite probability space: one positive mass per atom, total mass 1."""

    weights: tuple
    exact_weights: tuple = field(default=None, compare=False)

    @staticmethod
    def make(weights):
        arr, exact = check_weights(list(weights))
        return AtomSpace(tuple(arr.tolist()), None if exact is None else tuple(exact))

    @staticmethod
    def uniform(n):
        return AtomSpace.make([Fraction(1, n)] * n)

    @property
    def n_atoms(self):
        return len(self.weights)

    def weight_array(self):
        return np.array(self.weights, dtype=float)

    def mass(self, atoms):
        """Total mass of a set of atom indices."""
        return float(sum(self.weights[a] for a in atoms))

    def exact_mass(self, atoms):
        if self.exact_weights is None:
            return Fraction(self.mass(atoms)).limit_denominator(10**12)
        return sum((self.exact_weights[a] for a in atoms), Fraction(0))


@dataclass(frozen=True)
class PartialMap:
    """Injective partial self-map of {0..size-1}, stored as sorted pairs."""

    size: int
    pairs: tuple

    @staticmethod
    def make(size, pairs):
        return PartialMap(int(size), check_pairs(pairs, int(size)))

    @staticmethod
    def identity(size):
        return PartialMap(size, tuple((i, i) for i in range(size)))

    @staticmethod
    def diagonal(size, subset):
        return PartialMap(size, tuple((i, i) for i in sorted(set(subset))))

    @staticmethod
    def cycle(size, points=None):
        """Cyclic permutation of ``points`` (default: all of {0..size-1})."""
        pts = list(range(size)) if points is None else list(points)
        return PartialMap.make(size, [(pts[i], pts[(i + 1) % len(pts)]) for i in range(len(pts))])

    def as_dict(self):
        return dict(self.pairs)

    @property
    def domain(self):
        return tuple(s for s, _ in self.pairs)

    @property
    def range(self):
        return tuple(sorted(t for _, t in self.pairs))

    def __call__(self, x):
        return self.as_dict().get(x)

    def fixed_points(self):
        return tuple(s for s, t in self.pairs if s == t)

    def is_identity_on_domain(self):
        return all(s == t for s, t in self.pairs)


def compose(f: PartialMap, g: PartialMap) -> PartialMap:
    """(f o g)(x) = f(g(x)), defined exactly where both legs are."""
    if f.size != g.size:
        raise ModelError(f"compose: size mismatch {f.size} != {g.size}")
    fd = f.as_dict()
    pairs = []
    for s, mid in g.pairs:
        t = fd.get(mid)
        if t is not None:
            pairs.append((s, t))
    return PartialMap(f.size, tuple(sorted(pairs)))


def inverse(f: PartialMap) -> PartialMap:
    return PartialMap(f.size, tuple(sorted((t, s) for s, t in f.pairs)))


def compose_word(maps):
    """Left-to-right composition m[0] o m[1] o ... (empty word = identity).

    A nonempty word must supply the common size; the empty word has no size
    of its own, so callers pass at least one map or use PartialMap.identity.
    """
    maps = list(maps)
    if not maps:
        raise ModelError("compose_word: empty sequence; use PartialMap.identity(d)")
    out = maps[-1]
    for m in reversed(maps[:-1]):
        out = compose(m, out)
    return out


@dataclass(frozen=True)
class FinRel:
    """A finite relation: atom space plus the orbit partition."""

    space: AtomSpace
    blocks: tuple

    @staticmethod
    def make(space, blocks):
        return FinRel(space, check_blocks(list(blocks), space.n_atoms))

    @property
    def n_atoms(self):
        return self.space.n_atoms

    def orbit_of(self, atom):
        for b in self.blocks:
            if atom in b:
                return b
        raise ModelError(f"atom {atom} not in any block")

    def orbit_index(self, atom):
        for i, b in enumerate(self.blocks):
            if atom in b:
                return i
        raise ModelError(f"atom {atom} not in any block")

    def orbit_mass(self, block_index):
        return self.space.mass(self.blocks[block_index])


class AlgebraElement:
    """A d x d array with the normalized trace tr = Tr/d.

    Holds a dense or sparse complex matrix; partial-isometry inputs coming
    from PartialMap stay sparse above DENSE_CUTOFF.
    """

    def __init__(self, data):
        if sp.issparse(data):
            self.data = data.tocsr()
        else:
            self.data = np.atleast_2d(np.asarray(data))
        if self.data.shape[0] != self.data.shape[1]:
            raise ModelError(f"AlgebraElement must be square, got shape {self.data.shape}")
        if not sp.issparse(self.data) and not np.all(np.isfinite(self.data)):
            raise ModelError("AlgebraElement entries must be finite")

    @property
    def size(self):
        return self.data.shape[0]

    def toarray(self):
        return self.data.toarray() if sp.issparse(self.data) else np.asarray(self.data)

    def adjoint(self):
        return AlgebraElement(self.data.conj().T)

    def __matmul__(self, other):
        return AlgebraElement(self.data @ other.data)

    def __sub__(self, other):
        return AlgebraElement(self.data - other.data)

    def __add__(self, other):
        return AlgebraElement(self.data + other.data)


def trace(x: AlgebraElement):
    """Normalized trace (1/d) sum of the diagonal."""
    d = x.size
    diag = x.data.diagonal()
    t = complex(np.sum(diag)) / d
    return t.real if abs(t.imag) < 1e-15 else t


def two_norm(x: AlgebraElement) -> float:
    """tr(x* x)^(1/2); equals the Frobenius norm divided by sqrt(d)."""
    if sp.issparse(x.data):
        fro2 = float(np.sum(np.abs(x.data.data) ** 2))
    else:
        fro2 = float(np.sum(np.abs(x.data) ** 2))
    return float(np.sqrt(fro2 / x.size))


def as_matrix(f: PartialMap, dense=None) -> AlgebraElement:
    """0/1 partial-isometry matrix with entry (dst, src) = 1 per pair."""
    if dense is None:
        dense = f.size <= DENSE_CUTOFF
    if dense:
        m = np.zeros((f.size, f.size))
        for s, t in f.pairs:
            m[t, s] = 1.0
        return AlgebraElement(m)
    rows = [t for _, t in f.pairs]
    cols = [s for s, _ in f.pairs]
    m = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(f.size, f.size))
    return AlgebraElement(m)


def pm_two_norm_diff(f: PartialMap, g: PartialMap) -> float:
    """||v_f - v_g||_2 computed on the pair sets, no matrices built.

    A column where both maps are defined and disagree contributes 2 to the
    squared Frobenius norm; a column defined in exactly one map contributes 1.
    """
    if f.size != g.size:
        raise ModelError(f"two-norm diff: size mismatch {f.size} != {g.size}")
    fd, gd = f.as_dict(), g.as_dict()
    sq = 0
    for s, t in fd.items():
        u = gd.get(s)
        if u is None:
            sq += 1
        elif u != t:
            sq += 2
    sq += sum(1 for s in gd if s not in fd)
    return float(np.sqrt(sq / f.size))


def pm_trace(f: PartialMap) -> float:
    """Normalized trace of as_matrix(f): fixed points over d."""
    return len(f.fixed_points()) / f.size


@dataclass(frozen=True)
class Model:
    """A finite relation together with atom-level generator maps.

    Generators are partial bijections of the atoms that stay inside orbits
    and respect atom masses; they are what a sofic approximation assigns
    matrix images to.
    """

    rel: FinRel
    generators: tuple

    @staticmethod
    def make(rel: FinRel, generators, weight_rtol=1e-12):
        gens = []
        for gi, g in enumerate(generators):
            if g.size != rel.n_atoms:
                raise ModelError(f"generators[{gi}]: size {g.size} != n_atoms {rel.n_atoms}")
            for s, t in g.pairs:
                if rel.orbit_index(s) != rel.orbit_index(t):
                    raise ModelError(f"generators[{gi}]: pair ({s},{t}) crosses orbits")
                if abs(rel.space.weights[s] - rel.space.weights[t]) > weight_rtol:
                    raise ModelError(
                        f"generators[{gi}]: pair ({s},{t}) joins atoms of unequal mass"
                    )
            gens.append(g)
        return Model(rel, tuple(gens))

    @property
    def n_atoms(self):
        return self.rel.n_atoms

    def generates_blocks(self) -> bool:
        """True iff the generators connect every orbit of the relation."""
        n = self.rel.n_atoms
        parent = list(range(n))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for g in self.generators:
            for s, t in g.pairs:
                rs, rt = find(s), find(t)
                if rs != rt:
                    parent[rs] = rt
        for block in self.rel.blocks:
            roots = {find(a) for a in block}
            if len(roots) != 1:
                return False
        return True
