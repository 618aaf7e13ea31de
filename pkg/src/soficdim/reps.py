"""Stock representations of finite relations for experiments and tests.

These are the presentations the dimension estimator is exercised on: the
pair-space representation of the relation itself (fibers indexed by orbit
members), its corner under a diagonal projection, and constant
finite-dimensional fiber fields.
"""

from ._validation import ModelError
from .homdim import GeneratedRepresentation
from .norms import VectorField
from .relations import Model


def _orbit_positions(rel):
    pos = {}
    for block in rel.blocks:
        for i, a in enumerate(sorted(block)):
            pos[a] = i
    return pos


def pair_space_representation(model: Model, translates=1, name="pair-space") -> GeneratedRepresentation:
    """Square-integrable functions on the relation, fibered over atoms.

    The fiber over an atom is spanned by its orbit members; the generating
    field is the diagonal indicator, optionally padded with its images
    under powers of the first generator (richer sequences spread each
    degree of freedom over more coordinates).
    """
    rel = model.rel
    pos = _orbit_positions(rel)
    dims = [len(rel.orbit_of(a)) for a in range(rel.n_atoms)]

    def field_from_assignment(assign):
        fibers = []
        for a in range(rel.n_atoms):
            v = [0.0] * dims[a]
            if a in assign:
                v[assign[a]] = 1.0
            fibers.append(v)
        return VectorField.make(rel.space, fibers)

    diag = {a: pos[a] for a in range(rel.n_atoms)}
    fields = [field_from_assignment(diag)]
    if translates > 1:
        if not model.generators:
            raise ModelError("translates > 1 needs at least one generator")
        g = model.generators[0]
        current = dict(diag)
        for _ in range(translates - 1):
            moved = {}
            for a, r in current.items():
                b = g(a)
                if b is not None:
                    moved[b] = r
            fields.append(field_from_assignment(moved))
            current = moved
    return GeneratedRepresentation.make(model, fields, name=name)


def projected_pair_representation(model: Model, atoms, translates=4, name="pair-corner") -> GeneratedRepresentation:
    """Corner of the pair-space representation under a diagonal projection.

    Fibers keep only the orbit members inside ``atoms``; the generating
    sequence is the cut diagonal indicator and its translates under the
    first generator.  The trace of the projection is the mass of ``atoms``.
    """
    rel = model.rel
    atoms = sorted(set(int(a) for a in atoms))
    inside = {}
    for block in rel.blocks:
        kept = [a for a in sorted(block) if a in atoms]
        if not kept:
            raise ModelError(f"orbit {block} misses the projection; corner fibers would vanish")
        for i, a in enumerate(kept):
            inside[a] = i
    dims = [len([x for x in rel.orbit_of(a) if x in atoms]) for a in range(rel.n_atoms)]

    def field_from_assignment(assign):
        fibers = []
        for a in range(rel.n_atoms):
            v = [0.0] * dims[a]
            if a in assign:
                v[assign[a]] = 1.0
            fibers.append(v)
        return VectorField.make(rel.space, fibers)

    diag = {a: inside[a] for a in inside}
    fields = [field_from_assignment(diag)]
    if translates > 1:
        if not model.generators:
            raise ModelError("translates > 1 needs at least one generator")
        g = model.generators[0]
        current = dict(diag)
        for _ in range(translates - 1):
            moved = {}
            for a, r in current.items():
                b = g(a)
                if b is not None:
                    moved[b] = r
            fields.append(field_from_assignment(moved))
            current = moved
    return GeneratedRepresentation.make(model, fields, name=name)


def constant_fiber_representation(model: Model, k: int, name=None) -> GeneratedRepresentation:
    """Constant C^k fibers with the k coordinate fields as generators."""
    rel = model.rel
    if k < 1:
        raise ModelError(f"fiber dimension must be >= 1, got {k}")
    fields = []
    for r in range(k):
        fibers = []
        for _ in range(rel.n_atoms):
            v = [0.0] * k
            v[r] = 1.0
            fibers.append(v)
        fields.append(VectorField.make(rel.space, fibers))
    return GeneratedRepresentation.make(model, fields, name=name or f"constant-{k}")


def direct_sum(rep_a: GeneratedRepresentation, rep_b: GeneratedRepresentation, name=None):
    """Direct sum of two representations over the same model.

    Fields of each summand are zero-padded into the combined fibers, so the
    union of the two generating sequences generates the sum.
    """
    if rep_a.model != rep_b.model:
        raise ModelError("direct sum requires a common model")
    rel = rep_a.model.rel
    da = rep_a.fiber_dims
    db = rep_b.fiber_dims

    def pad(f, left):
        fibers = []
        for a in range(rel.n_atoms):
            va = list(f.fiber(a)) if left else [0.0] * da[a]
            vb = [0.0] * db[a] if left else list(f.fiber(a))
            fibers.append(va + vb)
        return VectorField.make(rel.space, fibers)

    fields = [pad(f, True) for f in rep_a.fields] + [pad(f, False) for f in rep_b.fields]
    kernels = [pad(f, True) for f in rep_a.kernel_fields] + [pad(f, False) for f in rep_b.kernel_fields]
    return GeneratedRepresentation.make(
        rep_a.model, fields, kernel_fields=kernels, name=name or f"{rep_a.name}+{rep_b.name}"
    )


def cyclic_model(n_orbits: int, orbit_size: int) -> Model:
    """Uniform atoms in ``n_orbits`` orbits of equal size, one cycle generator."""
    from fractions import Fraction

    from .relations import AtomSpace, FinRel, PartialMap

    n = n_orbits * orbit_size
    space = AtomSpace.make([Fraction(1, n)] * n)
    blocks = [tuple(range(o * orbit_size, (o + 1) * orbit_size)) for o in range(n_orbits)]
    rel = FinRel.make(space, blocks)
    pairs = []
    for o in range(n_orbits):
        base = o * orbit_size
        pairs.extend((base + i, base + (i + 1) % orbit_size) for i in range(orbit_size))
    return Model.make(rel, (PartialMap.make(n, pairs),))
