"""Sofic approximations of finite relations at a fixed matrix size.

A sofic approximation is stored on generators only: partial bijections for
the graphing labels, 0/1 diagonals for the projection labels.  Words are
always evaluated by composing generator images, mirroring how the maps are
generated by a finite set in the first place.  The exact model blows each
atom up to a block of points and acts by parallel transport, which makes
every defect vanish; `perturb` then produces controlled inexact
approximations for exercising tolerances.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from ._validation import ModelError
from .relations import (
    Model,
    PartialMap,
    compose,
    inverse,
    pm_trace,
    pm_two_norm_diff,
)

INVERSE_SUFFIX = "^-1"


def generator_label(i):
    return f"g{i}"


def projection_label(i):
    return f"p{i}"


def base_label(label):
    """Strip a trailing inverse marker; returns (label, inverted?)."""
    if label.endswith(INVERSE_SUFFIX):
        return label[: -len(INVERSE_SUFFIX)], True
    return label, False


def invert_label(label):
    base, inverted = base_label(label)
    return base if inverted else base + INVERSE_SUFFIX


@dataclass(frozen=True)
class SoficApprox:
    """Generator images at one matrix size d.

    images maps graphing labels to PartialMap and projection labels to 0/1
    diagonal tuples.  atom_blocks, when present, records the contiguous
    point block of each model atom; exact models and their perturbations
    and compressions carry it, and it is what lets quality_report compare
    word images against the honest blow-up.
    """

    d: int
    images: dict
    atom_blocks: tuple = None
    weight_discrepancy: float = 0.0
    meta: dict = field(default_factory=dict, compare=False)

    def graphing_labels(self):
        return tuple(sorted(k for k, v in self.images.items() if isinstance(v, PartialMap)))

    def projection_labels(self):
        return tuple(sorted(k for k, v in self.images.items() if not isinstance(v, PartialMap)))

    def image(self, label) -> PartialMap:
        base, inverted = base_label(label)
        if base not in self.images:
            raise ModelError(f"unknown generator label {label!r}")
        img = self.images[base]
        if not isinstance(img, PartialMap):
            # diagonal projections are self-adjoint
            return PartialMap.diagonal(self.d, [i for i, b in enumerate(img) if b])
        return inverse(img) if inverted else img

    def diagonal(self, label):
        img = self.images[label]
        if isinstance(img, PartialMap):
            raise ModelError(f"label {label!r} is not a projection")
        return np.array(img, dtype=int)

    def with_projection(self, label, diag):
        diag = tuple(int(bool(b)) for b in diag)
        if len(diag) != self.d:
            raise ModelError(f"projection {label!r}: length {len(diag)} != d={self.d}")
        images = dict(self.images)
        images[label] = diag
        return replace(self, images=images)

    def atom_of_points(self):
        """Per-point atom index, or None when no blow-up structure is known."""
        if self.atom_blocks is None:
            return None
        out = np.empty(self.d, dtype=int)
        for a, (lo, hi) in enumerate(self.atom_blocks):
            out[lo:hi] = a
        return out

    def blowup(self, atom_map: PartialMap) -> PartialMap:
        """Parallel-transport blow-up of an atom-level partial map."""
        if self.atom_blocks is None:
            raise ModelError("blow-up requires atom block structure (exact-model lineage)")
        pairs = []
        for a, b in atom_map.pairs:
            lo_a, hi_a = self.atom_blocks[a]
            lo_b, hi_b = self.atom_blocks[b]
            if hi_a - lo_a != hi_b - lo_b:
                raise ModelError(f"blow-up: atoms {a} and {b} have mismatched block sizes")
            pairs.extend((lo_a + t, lo_b + t) for t in range(hi_a - lo_a))
        return PartialMap(self.d, tuple(sorted(pairs)))


def _apportion_counts(weights, d):
    """Integer point counts per atom summing to d, equal counts for equal weights."""
    weights = list(weights)
    classes = {}
    for i, w in enumerate(weights):
        classes.setdefault(w, []).append(i)
    keys = sorted(classes)
    sizes = np.array([len(classes[k]) for k in keys])
    ideal = np.array([float(k) * d for k in keys])
    base = np.floor(ideal + 1e-9).astype(int)
    deficit = d - int(np.sum(base * sizes))
    per_member = base.copy()
    if deficit > 0:
        # whole-class bumps by largest remainder keep equal weights aligned
        order = np.argsort(-(ideal - base))
        for idx in order:
            step = int(sizes[idx])
            if deficit >= step:
                per_member[idx] += 1
                deficit -= step
            if deficit == 0:
                break
    counts = np.empty(len(weights), dtype=int)
    for k, cnt in zip(keys, per_member):
        for i in classes[k]:
            counts[i] = cnt
    if deficit != 0:
        # class-uniform assignment cannot hit d exactly; fall back per atom
        remainders = np.array([w * d - c for w, c in zip(weights, counts)])
        order = np.argsort(-remainders)
        for i in order[:deficit]:
            counts[i] += 1
    return counts


def exact_model(model: Model, copies: int) -> SoficApprox:
    """Honest blow-up model: d = copies * n_atoms, zero word defects.

    Each atom receives a contiguous block of points proportional to its
    mass (up to rounding), and every generator acts by the parallel map
    between blocks.  Per-atom projections are exposed as labels p0, p1, ...
    The residual weight rounding is recorded on the result, never silently
    absorbed, and must stay within 1/(2*copies*n_atoms).
    """
    if copies < 1:
        raise ModelError(f"copies must be >= 1, got {copies}")
    rel = model.rel
    n = rel.n_atoms
    d = copies * n
    counts = _apportion_counts(rel.space.weights, d)
    if int(counts.sum()) != d:
        raise ModelError("internal apportionment failure")
    tol = 1.0 / (2.0 * copies * n) + 1e-12
    disc = float(np.max(np.abs(counts / d - rel.space.weight_array())))
    if disc > tol:
        raise ModelError(
            f"weight rounding infeasible at copies={copies}: discrepancy {disc:.3e} "
            f"exceeds 1/(2*{copies}*{n}); increase copies"
        )
    offsets = np.concatenate([[0], np.cumsum(counts)])
    blocks = tuple((int(offsets[a]), int(offsets[a + 1])) for a in range(n))
    proto = SoficApprox(d=d, images={}, atom_blocks=blocks)

    images = {}
    for a in range(n):
        diag = [0] * d
        for t in range(blocks[a][0], blocks[a][1]):
            diag[t] = 1
        images[projection_label(a)] = tuple(diag)
    for gi, gen in enumerate(model.generators):
        for a, b in gen.pairs:
            if counts[a] != counts[b]:
                raise ModelError(
                    f"generator {gi} maps atom {a} to atom {b} with unequal point "
                    f"counts {counts[a]} != {counts[b]}; equalize weights or raise copies"
                )
        images[generator_label(gi)] = proto.blowup(gen)

    return SoficApprox(
        d=d, images=images, atom_blocks=blocks, weight_discrepancy=disc, meta={"copies": copies}
    )


def word_image(sigma: SoficApprox, word) -> PartialMap:
    """Image of a word of generator labels; the empty word is the identity."""
    word = list(word)
    if not word:
        return PartialMap.identity(sigma.d)
    out = sigma.image(word[-1])
    for label in reversed(word[:-1]):
        out = compose(sigma.image(label), out)
    return out


def atom_word_map(model: Model, word) -> PartialMap:
    """Atom-level partial map of a word, evaluated in the finite relation."""
    n = model.n_atoms
    out = PartialMap.identity(n)
    for label in reversed(list(word)):
        base, inverted = base_label(label)
        if base.startswith("p"):
            m = PartialMap.diagonal(n, [int(base[1:])])
        else:
            m = model.generators[int(base[1:])]
            if inverted:
                m = inverse(m)
        out = compose(m, out)
    return out


def enumerate_words(labels, max_len, limit=512, seed=0):
    """Words up to max_len over labels and their inverses, sampled above limit.

    The empty word is always kept; it anchors the direct comparison of each
    generator image against its reference.
    """
    alphabet = []
    for lab in labels:
        alphabet.append(lab)
        alphabet.append(lab + INVERSE_SUFFIX)
    words = [()]
    frontier = [()]
    for _ in range(max_len):
        nxt = []
        for w in frontier:
            for a in alphabet:
                nxt.append(w + (a,))
        words.extend(nxt)
        frontier = nxt
        if len(words) > 4 * limit:
            break
    if len(words) > limit:
        rng = np.random.default_rng(seed)
        keep = rng.choice(len(words) - 1, size=limit - 1, replace=False) + 1
        words = [()] + [words[i] for i in sorted(keep)]
    return [list(w) for w in words]


@dataclass(frozen=True)
class QualityReport:
    """Worst-case defects of a sofic approximation over sampled words."""

    mult_defect: float
    adj_defect: float
    trace_defect: float
    op_norm_bound: float
    words_checked: int
    pairs_checked: int


def quality_report(sigma: SoficApprox, model: Model, word_length: int, word_limit=64, seed=0) -> QualityReport:
    """Defects of sigma against the finite relation over words up to word_length.

    Trace defects compare tr of each word image with exact orbit counting in
    the relation.  Multiplicativity compares sigma(w1)sigma(w2) against the
    honest blow-up of the atom-level composition, which requires the model's
    block structure (exact-model lineage); without it only trace and adjoint
    defects are populated.  Images are partial isometries or diagonal
    projections, so the reported operator-norm bound is 1 by construction.
    """
    if word_length < 1:
        raise ModelError(f"word_length must be >= 1, got {word_length}")
    labels = [generator_label(i) for i in range(len(model.generators))]
    words = enumerate_words(labels, word_length, limit=word_limit, seed=seed)

    weights = model.rel.space.weight_array()
    trace_defect = 0.0
    adj_defect = 0.0
    images = {}
    atom_maps = {}
    for w in words:
        tw = tuple(w)
        img = word_image(sigma, w)
        images[tw] = img
        am = atom_word_map(model, w)
        atom_maps[tw] = am
        fixed = [s for s, t in am.pairs if s == t]
        tau = float(np.sum(weights[fixed])) if fixed else 0.0
        trace_defect = max(trace_defect, abs(pm_trace(img) - tau))
        rev = [invert_label(lab) for lab in reversed(w)]
        adj_defect = max(adj_defect, pm_two_norm_diff(word_image(sigma, rev), inverse(img)))

    mult_defect = 0.0
    pairs_checked = 0
    if sigma.atom_blocks is not None:
        word_list = list(images)
        pairs = [
            (w1, w2)
            for w1 in word_list
            for w2 in word_list
            if len(w1) + len(w2) <= word_length
        ]
        if len(pairs) > 4 * word_limit:
            rng = np.random.default_rng(seed + 1)
            idx = rng.choice(len(pairs), size=4 * word_limit, replace=False)
            pairs = [pairs[i] for i in sorted(idx)]
        for w1, w2 in pairs:
            product = compose(images[w1], images[w2])
            reference = sigma.blowup(compose(atom_maps[w1], atom_maps[w2]))
            mult_defect = max(mult_defect, pm_two_norm_diff(reference, product))
            pairs_checked += 1

    return QualityReport(
        mult_defect=mult_defect,
        adj_defect=adj_defect,
        trace_defect=trace_defect,
        op_norm_bound=1.0,
        words_checked=len(words),
        pairs_checked=pairs_checked,
    )


def compress(sigma: SoficApprox, projection: str) -> SoficApprox:
    """Corner of the approximation by a projection label.

    Every generator image is conjugated by the diagonal and the surviving
    coordinates are reindexed, so the result is again a model whose
    underlying set is the projection's points.
    """
    if projection not in sigma.images:
        raise ModelError(f"unknown projection label {projection!r}")
    diag = sigma.diagonal(projection)
    keep = np.flatnonzero(diag)
    pos = {int(p): i for i, p in enumerate(keep)}
    d_new = len(keep)

    def cut_map(pm):
        pairs = [(pos[s], pos[t]) for s, t in pm.pairs if s in pos and t in pos]
        return PartialMap(d_new, tuple(sorted(pairs)))

    images = {}
    for label, img in sigma.images.items():
        if isinstance(img, PartialMap):
            images[label] = cut_map(img)
        else:
            images[label] = tuple(int(img[p]) for p in keep)

    # atoms whose block is entirely cut disappear from the compressed model,
    # so the surviving blocks are renumbered in order
    atom_blocks = None
    if sigma.atom_blocks is not None:
        spans = []
        contiguous = True
        for lo, hi in sigma.atom_blocks:
            inside = [p for p in range(lo, hi) if p in pos]
            if not inside:
                continue
            lo2, hi2 = pos[inside[0]], pos[inside[-1]] + 1
            if hi2 - lo2 != len(inside):
                contiguous = False
                break
            spans.append((lo2, hi2))
        if contiguous:
            atom_blocks = tuple(spans)

    return SoficApprox(
        d=d_new,
        images=images,
        atom_blocks=atom_blocks,
        weight_discrepancy=sigma.weight_discrepancy,
        meta={"compressed_from": sigma.d, "projection": projection},
    )


def perturb(sigma: SoficApprox, rate: float, seed: int) -> SoficApprox:
    """Rewire each partial-bijection image on ceil(rate*d) points.

    Rewired sources are sent injectively to free destinations, avoiding
    their original targets whenever possible, so a rewired point is a
    genuinely changed point.  Deterministic in seed.
    """
    if not 0.0 <= rate <= 1.0:
        raise ModelError(f"rate must lie in [0, 1], got {rate}")
    if rate == 0.0:
        return sigma
    rng = np.random.default_rng(seed)
    k_target = int(np.ceil(rate * sigma.d))
    images = {}
    for label in sorted(sigma.images):
        img = sigma.images[label]
        if not isinstance(img, PartialMap) or not img.pairs:
            images[label] = img
            continue
        pairs = list(img.pairs)
        k = min(k_target, len(pairs))
        chosen = set(int(c) for c in rng.choice(len(pairs), size=k, replace=False))
        kept = [p for i, p in enumerate(pairs) if i not in chosen]
        moved = [p for i, p in enumerate(pairs) if i in chosen]
        used_dst = {t for _, t in kept}
        free = [t for t in range(sigma.d) if t not in used_dst]
        rng.shuffle(free)
        new_pairs = list(kept)
        for s, old_t in moved:
            pick = next((j for j, cand in enumerate(free) if cand != old_t), 0 if free else None)
            if pick is None:
                continue
            new_pairs.append((s, free.pop(pick)))
        images[label] = PartialMap(sigma.d, tuple(sorted(new_pairs)))
    return SoficApprox(
        d=sigma.d,
        images=images,
        atom_blocks=sigma.atom_blocks,
        weight_discrepancy=sigma.weight_discrepancy,
        meta={"perturbed": rate, "seed": seed},
    )
