"""Graphings of finite relations: fibered graphs, cost, loop presentations,
transfer operators between graphings, and the cycle-quotient dimension.

A graphing is a family of partial atom bijections staying inside orbits; on
each orbit it induces a graph, and the representation whose fibers are the
orbit edge spaces modulo their cycle spaces is what the dimension estimator
consumes.  At finite scale the quotient has an exact per-orbit formula, so
the same quantity is available both in closed form and through the
estimator.
"""

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ._linalg import float_rank, rational_rank
from ._validation import ModelError
from .graphcoh import Graph, cycle_space_basis, path_chain, spanning_forest, tree_path
from .homdim import DimEstimate, EstimatorGrid, GeneratedRepresentation, estimate_dimension
from .norms import VectorField
from .relations import FinRel, Model

COST_CONSISTENCY_TOL = 1e-12


class ConsistencyError(ModelError):
    """The two cost formulas disagreed; the graphing is degenerate."""


@dataclass(frozen=True)
class Graphing:
    """Partial atom bijections generating (part of) a finite relation."""

    rel: FinRel
    morphisms: tuple

    @staticmethod
    def make(rel, morphisms):
        # Model.make performs the orbit and mass-preservation validation
        checked = Model.make(rel, tuple(morphisms))
        return Graphing(rel, checked.generators)

    @staticmethod
    def from_model(model: Model):
        return Graphing(model.rel, model.generators)

    def as_model(self) -> Model:
        return Model(self.rel, self.morphisms)

    @property
    def n_atoms(self):
        return self.rel.n_atoms


def cost(phi: Graphing, exact=False):
    """Total domain mass of the generators; cross-checked against the
    half-integral of the fiber degree (with edge multiplicity).

    The two formulas agree exactly unless a morphism fixes atoms (such
    pairs induce no edge); disagreement raises ConsistencyError naming the
    gap, never returns a silently wrong number.
    """
    space = phi.rel.space
    dom_mass = 0.0
    for m in phi.morphisms:
        dom_mass += space.mass(m.domain)
    multideg = np.zeros(phi.n_atoms)
    for m in phi.morphisms:
        for s, t in m.pairs:
            if s != t:
                multideg[s] += 1
                multideg[t] += 1
    half_deg = float(0.5 * np.sum(space.weight_array() * multideg))
    if abs(dom_mass - half_deg) > COST_CONSISTENCY_TOL:
        raise ConsistencyError(
            f"cost formulas disagree: sum of domain masses {dom_mass!r} vs "
            f"half-degree integral {half_deg!r} (fixed points in a morphism?)"
        )
    if exact:
        total = Fraction(0)
        half = Fraction(0)
        for m in phi.morphisms:
            total += space.exact_mass(m.domain)
        for a in range(phi.n_atoms):
            half += space.exact_mass([a]) * int(multideg[a])
        half = half / 2
        if total != half:
            raise ConsistencyError(
                f"exact cost formulas disagree: {total} vs {half}"
            )
        return total
    return dom_mass


def fiber_graph(phi: Graphing, block_index: int):
    """The orbit's graph with multi-edges merged; returns (Graph, atom list).

    Vertices are the orbit's atoms in sorted order, relabeled 0..k-1.
    """
    block = phi.rel.blocks[block_index]
    atoms = sorted(block)
    pos = {a: i for i, a in enumerate(atoms)}
    edges = set()
    for m in phi.morphisms:
        for s, t in m.pairs:
            if s in pos and t in pos and s != t:
                edges.add((min(pos[s], pos[t]), max(pos[s], pos[t])))
    return Graph.make(len(atoms), sorted(edges)), atoms


@dataclass(frozen=True)
class CycleQuotientValue:
    """Per-orbit formula value for dim of edge functions modulo cycles."""

    value: float
    exact: Fraction  # None when atom masses are not exact rationals
    generates: bool
    per_orbit_components: tuple


def cycle_quotient_dim_exact(phi: Graphing) -> CycleQuotientValue:
    """Closed-form dimension of the relation's edge space modulo cycles.

    Each orbit contributes mass(orbit) * (size - components(fiber graph)) /
    size; when the graphing connects every orbit this collapses to
    1 - sum mass(orbit)/size.  Non-generating graphings are reported with
    generates=False rather than rejected.
    """
    rel = phi.rel
    comps = []
    value = 0.0
    exact = Fraction(0) if rel.space.exact_weights is not None else None
    for bi, block in enumerate(rel.blocks):
        g, atoms = fiber_graph(phi, bi)
        c = g.n_components
        comps.append(c)
        size = len(atoms)
        mass = rel.space.mass(block)
        value += mass * (size - c) / size
        if exact is not None:
            exact += rel.space.exact_mass(block) * (size - c) / size
    return CycleQuotientValue(
        value=value,
        exact=exact,
        generates=all(c == 1 for c in comps),
        per_orbit_components=tuple(comps),
    )


# ---------------------------------------------------------------------------
# transfer operators


def bfs_path_family(source: Graph, target: Graph):
    """For each edge of ``source``, a path in ``target`` joining its ends.

    Breadth-first with lexicographic tie-breaking; only the reference
    orientation is stored, the reverse path is the negation.
    """
    parent, _ = spanning_forest(target)
    family = {}
    for u, v in source.edges:
        family[(u, v)] = tree_path(target, parent, u, v)
    return family


def transfer_operator(source: Graph, target: Graph, paths=None):
    """Matrix of f -> sum_e f(e) * (path chain for e) on edge functions."""
    if source.n != target.n:
        raise ModelError(f"vertex count mismatch: {source.n} != {target.n}")
    if paths is None:
        paths = bfs_path_family(source, target)
    cols = []
    for u, v in source.edges:
        if (u, v) in paths:
            path = paths[(u, v)]
        elif (v, u) in paths:
            path = list(reversed(paths[(v, u)]))
        else:
            raise ModelError(f"path family misses edge ({u},{v})")
        if path[0] != u or path[-1] != v:
            raise ModelError(f"path for ({u},{v}) joins {path[0]}..{path[-1]}")
        cols.append(path_chain(target, path))
    if not cols:
        return np.zeros((target.n_edges, 0))
    return np.stack(cols, axis=1)


def transfer_spanning_identity(source: Graph, target: Graph, loops=None):
    """Check: transferred loops plus path-defect chains span target cycles.

    Loops default to the fundamental cycle basis of ``source``.  Returns
    (holds, achieved rank, cycle rank of target); computed in exact rational
    arithmetic since every chain here has integer coefficients.
    """
    S = transfer_operator(source, target)
    loops = cycle_space_basis(source) if loops is None else loops
    rows = [S @ np.asarray(l, dtype=float) for l in loops]
    back = bfs_path_family(target, source)
    for i, (v, w) in enumerate(target.edges):
        chain = path_chain(source, back[(v, w)])
        defect = S @ chain
        defect[i] -= 1.0
        rows.append(defect)
    int_rows = [[int(round(x)) for x in r] for r in rows]
    for r, rr in zip(rows, int_rows):
        if np.max(np.abs(np.asarray(r) - np.asarray(rr, dtype=float))) > 1e-9:
            raise ModelError("transfer chains were expected to be integral")
    rank = rational_rank(int_rows) if int_rows else 0
    cycle_rank = target.n_edges - target.n + target.n_components
    return rank == cycle_rank, rank, cycle_rank


# ---------------------------------------------------------------------------
# loop fields and finite presentation mass


@dataclass(frozen=True)
class LoopField:
    """Per-atom closed path (as an atom sequence) in the orbit fiber graph."""

    loops: tuple  # one tuple of atoms (possibly empty) per atom

    @staticmethod
    def make(rel: FinRel, loops):
        loops = tuple(tuple(int(x) for x in l) for l in loops)
        if len(loops) != rel.n_atoms:
            raise ModelError(f"expected {rel.n_atoms} loop entries, got {len(loops)}")
        for a, loop in enumerate(loops):
            if loop and loop[0] != loop[-1]:
                raise ModelError(f"loop at atom {a} is not closed")
        return LoopField(loops)

    def support(self):
        return tuple(a for a, l in enumerate(self.loops) if len(l) > 1)


def presentation_mass(phi: Graphing, loop_fields):
    """Total support mass of the loop fields plus a per-orbit spanning audit.

    Returns (mass, spanning_ok, per-orbit deficiency list); the deficiency
    is cycle rank minus the rank achieved by the translated loops.
    """
    rel = phi.rel
    mass = 0.0
    for lf in loop_fields:
        mass += rel.space.mass(lf.support())
    deficiencies = []
    for bi, block in enumerate(rel.blocks):
        g, atoms = fiber_graph(phi, bi)
        pos = {a: i for i, a in enumerate(atoms)}
        cycle_rank = g.n_edges - g.n + g.n_components
        rows = []
        for lf in loop_fields:
            for a in block:
                loop = lf.loops[a]
                if len(loop) > 1:
                    verts = [pos[x] for x in loop]
                    rows.append(path_chain(g, verts))
        achieved = float_rank(rows) if rows else 0
        deficiencies.append(cycle_rank - achieved)
    return mass, all(d == 0 for d in deficiencies), tuple(deficiencies)


# ---------------------------------------------------------------------------
# the quotient representation and its estimator


def edge_quotient_representation(phi: Graphing, name="edge-quotient") -> GeneratedRepresentation:
    """Representation with fibers the orbit edge spaces, kernel the cycles.

    Generating fields are the morphism edge indicators (supported on the
    morphism domains, so the support bound of the estimator is exactly the
    cost); kernel fields are the fundamental cycles, constant along each
    orbit; the domain projector quotients candidate maps onto the cut
    space so they kill the kernel exactly.
    """
    rel = phi.rel
    n = rel.n_atoms
    graphs = []
    atom_lists = []
    for bi in range(len(rel.blocks)):
        g, atoms = fiber_graph(phi, bi)
        graphs.append(g)
        atom_lists.append(atoms)
    fiber_dim = [0] * n
    for g, atoms in zip(graphs, atom_lists):
        for a in atoms:
            fiber_dim[a] = g.n_edges

    def empty_fibers():
        return [[0.0] * fiber_dim[a] for a in range(n)]

    fields = []
    for m in phi.morphisms:
        fib = empty_fibers()
        for s, t in m.pairs:
            if s == t:
                continue
            bi = rel.orbit_index(s)
            g, atoms = graphs[bi], atom_lists[bi]
            pos = {a: i for i, a in enumerate(atoms)}
            e = (min(pos[s], pos[t]), max(pos[s], pos[t]))
            vec = [0.0] * g.n_edges
            vec[g.edge_index[e]] = 1.0
            fib[s] = vec
        fields.append(VectorField.make(rel.space, fib))

    kernel_fields = []
    for bi, (g, atoms) in enumerate(zip(graphs, atom_lists)):
        for basis_vec in cycle_space_basis(g):
            fib = empty_fibers()
            for a in atoms:
                fib[a] = list(map(float, basis_vec))
            kernel_fields.append(VectorField.make(rel.space, fib))

    total = sum(fiber_dim)
    projector = np.zeros((total, total))
    offsets = np.concatenate([[0], np.cumsum(fiber_dim)]).astype(int)
    for bi, (g, atoms) in enumerate(zip(graphs, atom_lists)):
        basis = cycle_space_basis(g)
        k = g.n_edges
        if k == 0:
            continue
        if basis:
            C = np.stack(basis)
            q, _ = np.linalg.qr(C.T)
            block = np.eye(k) - q @ q.T
        else:
            block = np.eye(k)
        for a in atoms:
            lo = offsets[a]
            projector[lo: lo + k, lo: lo + k] = block

    return GeneratedRepresentation.make(
        Model(rel, phi.morphisms),
        fields,
        kernel_fields=kernel_fields,
        name=name,
        domain_projector=projector,
    )


def estimate_cycle_quotient_dim(
    phi: Graphing, sigma_seq, grid: EstimatorGrid = EstimatorGrid(), samples=200, seed=0, **kw
) -> DimEstimate:
    """Run the dimension estimator on the edge-modulo-cycles representation."""
    rep = edge_quotient_representation(phi)
    return estimate_dimension(rep, sigma_seq, grid=grid, samples=samples, seed=seed, **kw)
