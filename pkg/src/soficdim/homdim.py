"""Almost-equivariant map spaces and the end-to-end dimension estimator.

A finite direct-integral representation is presented by generating vector
fields over the model's atoms with identity fiber transport along orbits.
Random candidate maps into l^p(d) are drawn by slicing a uniform ball
vector along carrier atoms and transporting the slices with the sofic
images; each candidate is screened by the almost-equivariance check, the
accepted images form a point cloud, and the dimension estimate brackets the
normalized covering dimension of that cloud from above (principal-direction
covering plus the support mass) and below (volume packing applied to the
measured acceptance fraction).

Scale caveats the tables make explicit rather than hiding: the acceptance
fraction feeds the packing bound through the root the bound is stated for,
the span fraction of the cloud is reported as the feasible-mass factor, and
no extrapolation in d, epsilon, or word length is ever applied silently.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ._linalg import float_rank, operator_p_norm
from ._validation import ModelError, ParameterError, check_epsilon, check_p
from .covering import (
    PointCloud,
    covering_dim_greedy,
    packing_lower_bound,
    product_norm_selector,
    projected_packing_lower_bound,
)
from .norms import VectorField, support
from .relations import Model, PartialMap, compose, inverse
from .sofic import atom_word_map, enumerate_words, generator_label, word_image

PER_SCALE_COLUMNS = ("d", "epsilon", "F_size", "m", "delta", "deps_over_d", "alpha_hat", "kappa_lower")


# ---------------------------------------------------------------------------
# representations


@dataclass(frozen=True)
class GeneratedRepresentation:
    """Direct integral of per-atom fibers with a generating field sequence.

    Fiber transport along orbits is the identity, so fiber dimensions must
    be constant on each orbit.  ``kernel_fields`` span a collapsed quotient
    kernel; candidate maps must be small on them.
    """

    model: Model
    fields: tuple
    kernel_fields: tuple = ()
    name: str = ""
    domain_projector: object = field(default=None, compare=False)

    @staticmethod
    def make(model, fields, kernel_fields=(), name="", domain_projector=None):
        rep = GeneratedRepresentation(model, tuple(fields), tuple(kernel_fields), name, domain_projector)
        rep._validate()
        return rep

    def _validate(self):
        rel = self.model.rel
        if not self.fields:
            raise ModelError("a representation needs at least one generating field")
        dims = self.fields[0].fiber_dims
        for f in self.fields + self.kernel_fields:
            if f.space.n_atoms != rel.n_atoms:
                raise ModelError("field lives over a different atom space")
            if f.fiber_dims != dims:
                raise ModelError("fields disagree on fiber dimensions")
        for block in rel.blocks:
            if len({dims[a] for a in block}) != 1:
                raise ModelError(f"fiber dimension varies on orbit {block}")
        if not self.model.generates_blocks():
            raise ModelError("model generators do not connect every orbit")
        # generation check: translates of the fields plus the kernel span each fiber
        for block in rel.blocks:
            k = dims[block[0]]
            if k == 0:
                continue
            rows = []
            for y in block:
                for f in self.fields + self.kernel_fields:
                    rows.append(f.fiber(y))
            if float_rank(rows) < k:
                raise ModelError(f"fields do not dynamically generate on orbit {block}")

    @property
    def fiber_dims(self):
        return self.fields[0].fiber_dims

    @property
    def atom_offsets(self):
        dims = self.fiber_dims
        off = [0]
        for k in dims:
            off.append(off[-1] + k)
        return tuple(off)

    @property
    def total_dim(self):
        return self.atom_offsets[-1]

    def total_vector(self, vf: VectorField):
        out = np.zeros(self.total_dim)
        off = self.atom_offsets
        for a in range(self.model.n_atoms):
            fib = vf.fiber(a)
            out[off[a]: off[a] + len(fib)] = fib
        return out

    def coordinate_weights(self):
        """Atom mass per total-space coordinate (Euclidean fibers)."""
        w = self.model.rel.space.weight_array()
        return np.repeat(w, self.fiber_dims)

    def act_word(self, atom_map: PartialMap, vec):
        """Total-space action of a word's atom-level map (identity transport)."""
        out = np.zeros_like(vec)
        off = self.atom_offsets
        dims = self.fiber_dims
        for src, dst in atom_map.pairs:
            if dims[src] != dims[dst]:
                raise ModelError(f"action maps fibers of unequal dimension: {src}->{dst}")
            out[off[dst]: off[dst] + dims[dst]] = vec[off[src]: off[src] + dims[src]]
        return out


def support_upper_bound(rep: GeneratedRepresentation) -> float:
    """Sum over generating fields of the mass of their supports."""
    total = 0.0
    for f in rep.fields:
        total += rep.model.rel.space.mass(support(f))
    return total


def finite_orbit_dim_exact(rep: GeneratedRepresentation):
    """Closed-form dimension of a finite direct integral, orbit by orbit.

    Each orbit contributes mass(orbit) * effective fiber dim / orbit size,
    where the effective dimension discounts the kernel fields' span.
    Returns a Fraction when the atom masses are exact, else a float.
    """
    rel = rep.model.rel
    dims = rep.fiber_dims
    exact = rel.space.exact_weights is not None
    total = Fraction(0) if exact else 0.0
    for block in rel.blocks:
        k = dims[block[0]]
        kernel_rank = 0
        if rep.kernel_fields and k:
            rows = []
            for y in block:
                for f in rep.kernel_fields:
                    rows.append(f.fiber(y))
            kernel_rank = float_rank(rows)
        eff = k - kernel_rank
        if exact:
            total += rel.space.exact_mass(block) * eff / len(block)
        else:
            total += rel.space.mass(block) * eff / len(block)
    return total


# ---------------------------------------------------------------------------
# transport plans and candidate map sampling


@dataclass(frozen=True)
class TransportPlan:
    """Per-atom generator words and carrier slots for the ball-slice sampler.

    Words are breadth-first over the generator atom maps (finest partition:
    one block per atom).  Channel (orbit, fiber coordinate r) is carried by
    the orbit's (r mod size)-th atom, in ball bank r div size.
    """

    words: tuple  # per atom: tuple of labels from the orbit base to the atom
    base_atoms: tuple  # per orbit index
    carriers: tuple  # per orbit index: tuple of (atom, bank) per fiber coord
    n_banks: int


def build_transport_plan(rep: GeneratedRepresentation) -> TransportPlan:
    model = rep.model
    rel = model.rel
    n = rel.n_atoms
    labels = []
    for gi, g in enumerate(model.generators):
        labels.append((generator_label(gi), g))
        labels.append((generator_label(gi) + "^-1", inverse(g)))
    words = [None] * n
    base_atoms = []
    for block in rel.blocks:
        base = min(block)
        base_atoms.append(base)
        words[base] = ()
        frontier = [base]
        while frontier:
            nxt = []
            for a in frontier:
                for lab, g in labels:
                    b = g(a)
                    if b is not None and words[b] is None:
                        words[b] = (lab,) + words[a]
                        nxt.append(b)
            frontier = nxt
        for a in block:
            if words[a] is None:
                raise ModelError(f"generators do not reach atom {a} from {base}")
    dims = rep.fiber_dims
    carriers = []
    n_banks = 1
    for bi, block in enumerate(rel.blocks):
        k = dims[block[0]]
        atoms = sorted(block)
        slots = tuple((atoms[r % len(atoms)], r // len(atoms)) for r in range(k))
        n_banks = max(n_banks, 1 + max((b for _, b in slots), default=0))
        carriers.append(slots)
    return TransportPlan(tuple(words), tuple(base_atoms), tuple(carriers), n_banks)


class SamplerContext:
    """Precomputed gather indices so drawing one candidate map is cheap."""

    def __init__(self, rep, sigma, plan=None):
        self.rep = rep
        self.sigma = sigma
        self.plan = plan or build_transport_plan(rep)
        self.d = sigma.d
        rel = rep.model.rel
        off = rep.atom_offsets
        dims = rep.fiber_dims
        if sigma.atom_blocks is None:
            raise ModelError("sampling requires a sofic model with atom blocks")
        atom_maps = {a: word_image(sigma, list(self.plan.words[a])) for a in range(rel.n_atoms)}
        atom_diag = {}
        for a in range(rel.n_atoms):
            lo, hi = sigma.atom_blocks[a]
            atom_diag[a] = PartialMap.diagonal(sigma.d, range(lo, hi))
        self.columns = []  # (total coordinate, bank, src points, dst points)
        for bi, block in enumerate(rel.blocks):
            atoms = sorted(block)
            k = dims[atoms[0]]
            for r in range(k):
                carrier, bank = self.plan.carriers[bi][r]
                m_c = atom_maps[carrier]
                for a in atoms:
                    # transport carrier block -> atom block through the words
                    t = compose(atom_diag[a], compose(compose(atom_maps[a], inverse(m_c)), atom_diag[carrier]))
                    src = np.array([s for s, _ in t.pairs], dtype=int)
                    dst = np.array([u for _, u in t.pairs], dtype=int)
                    self.columns.append((off[a] + r, bank, src, dst))
        self.in_weights = rep.coordinate_weights()
        self.out_weights = np.full(self.d, 1.0 / self.d)

    def sample(self, xi_banks):
        """Candidate map matrix (d x total_dim) from ball vectors per bank."""
        T = np.zeros((self.d, self.rep.total_dim))
        for col, bank, src, dst in self.columns:
            T[dst, col] = xi_banks[bank][src]
        if self.rep.domain_projector is not None:
            T = T @ self.rep.domain_projector
        return T


def uniform_ball_vector(d, rng):
    """Uniform draw from the unit ball of l^2(d, uniform atom masses)."""
    g = rng.standard_normal(d)
    norm = math.sqrt(float(g @ g) / d)
    radius = rng.uniform() ** (1.0 / d)
    return g * (radius / norm) if norm > 0 else g


def sample_transport_map(xi_banks, rep, sigma, plan=None, context=None):
    """The ball-slice transport map for explicit xi data.

    xi_banks: one l^2-ball vector per carrier bank (a single vector is
    promoted to one bank).  Empty carrier blocks raise a model error.
    """
    ctx = context or SamplerContext(rep, sigma, plan)
    if isinstance(xi_banks, np.ndarray) and xi_banks.ndim == 1:
        xi_banks = [xi_banks]
    for b, xi in enumerate(xi_banks):
        if len(xi) != ctx.d:
            raise ModelError(f"xi bank {b} has length {len(xi)}, expected {ctx.d}")
    for col, bank, src, dst in ctx.columns:
        if len(src) == 0:
            raise ModelError("a carrier block is empty; increase copies")
    return ctx.sample(xi_banks)


# ---------------------------------------------------------------------------
# the almost-equivariance check


@dataclass(frozen=True)
class HomParams:
    """Word-length / tolerance / covering-scale box for one grid cell."""

    generator_labels: tuple
    m: int
    delta: float
    eps: float
    p: float = 2.0

    def __post_init__(self):
        if self.m < 1:
            raise ParameterError(f"word length m must be >= 1, got {self.m}")
        if not self.delta > 0:
            raise ParameterError(f"delta must be > 0, got {self.delta}")
        check_epsilon(self.eps)
        check_p(self.p)


@dataclass
class EquivarianceWitness:
    kept: np.ndarray  # coordinate subset A as a boolean mask
    worst_defect: float
    kernel_norm: float
    norm_scale: float  # the division applied to enforce ||T|| <= 1


@dataclass
class EquivarianceFailure:
    binding_word: tuple
    field_index: int
    defect: float
    kernel_norm: float


class EquivarianceChecker:
    """Reusable word images and field vectors for one (rep, sigma, params)."""

    def __init__(self, rep, sigma, params, word_limit=128, seed=0):
        self.rep = rep
        self.sigma = sigma
        self.params = params
        self.words = [
            w
            for w in enumerate_words(list(params.generator_labels), params.m, limit=word_limit, seed=seed)
            if w
        ]
        self.n_fields = min(params.m, len(rep.fields))
        self.field_vecs = [rep.total_vector(f) for f in rep.fields[: self.n_fields]]
        self.moved_vecs = []  # per word: list of acted field vectors
        self.point_maps = []  # per word: (src, dst) arrays of the sigma image
        for w in self.words:
            am = atom_word_map(rep.model, w)
            self.moved_vecs.append([rep.act_word(am, v) for v in self.field_vecs])
            img = word_image(sigma, w)
            src = np.array([s for s, _ in img.pairs], dtype=int)
            dst = np.array([t for _, t in img.pairs], dtype=int)
            self.point_maps.append((src, dst))
        self.kernel_vecs = [rep.total_vector(f) for f in rep.kernel_fields]
        self.in_weights = rep.coordinate_weights()
        self.out_weights = np.full(sigma.d, 1.0 / sigma.d)

    def operator_norm(self, T):
        return operator_p_norm(T, self.params.p, self.in_weights, self.out_weights)

    def defect_rows(self, T):
        """One residual row per (word, field): T(w v) - sigma(w) T(v)."""
        rows = np.empty((len(self.words) * self.n_fields, self.sigma.d))
        base_images = [T @ v for v in self.field_vecs]
        k = 0
        for (src, dst), moved in zip(self.point_maps, self.moved_vecs):
            for j in range(self.n_fields):
                rhs = np.zeros(self.sigma.d)
                rhs[dst] = base_images[j][src]
                rows[k] = T @ moved[j] - rhs
                k += 1
        return rows

    def kernel_operator_norm(self, T):
        if not self.kernel_vecs:
            return 0.0
        K = np.stack(self.kernel_vecs, axis=1)  # (total_dim, k)
        # orthonormalize in the weighted fiber inner product, then measure
        Kw = K * np.sqrt(self.in_weights)[:, None]
        q, _ = np.linalg.qr(Kw)
        restricted = T @ (q / np.sqrt(self.in_weights)[:, None])
        return operator_p_norm(restricted, self.params.p, None, self.out_weights)

    def check(self, T):
        """Witness search by greedy coordinate deletion, or the binding defect."""
        d = self.sigma.d
        delta = self.params.delta
        p = self.params.p
        scale = 1.0
        norm = self.operator_norm(T)
        if norm > 1.0:
            scale = norm
            T = T / norm
        kn = self.kernel_operator_norm(T)
        if kn > delta:
            return EquivarianceFailure(binding_word=("kernel",), field_index=-1, defect=kn, kernel_norm=kn), T, scale
        rows = self.defect_rows(T)
        contrib = np.abs(rows) ** p / d  # per-row, per-coordinate mass
        kept = np.ones(d, dtype=bool)
        budget = d - int(math.ceil((1.0 - delta) * d - 1e-9))
        row_mass = contrib.sum(axis=1)
        for _ in range(budget):
            bad = row_mass ** (1.0 / p) >= delta
            if not np.any(bad):
                break
            col_mass = contrib[bad].sum(axis=0) * kept
            worst = int(np.argmax(col_mass))
            if col_mass[worst] <= 0.0:
                break
            kept[worst] = False
            row_mass = np.maximum(row_mass - contrib[:, worst], 0.0)
            contrib[:, worst] = 0.0
        worst_defect = float(np.max(row_mass) ** (1.0 / p)) if len(row_mass) else 0.0
        if worst_defect < delta:
            return EquivarianceWitness(kept=kept, worst_defect=worst_defect, kernel_norm=kn, norm_scale=scale), T, scale
        k = int(np.argmax(row_mass))
        return (
            EquivarianceFailure(
                binding_word=tuple(self.words[k // self.n_fields]),
                field_index=k % self.n_fields,
                defect=worst_defect,
                kernel_norm=kn,
            ),
            T,
            scale,
        )


def check_almost_equivariant(T, rep, sigma, params, word_limit=128, seed=0):
    """Single-map interface over EquivarianceChecker; see its docstring."""
    checker = EquivarianceChecker(rep, sigma, params, word_limit=word_limit, seed=seed)
    result, _, _ = checker.check(np.asarray(T, dtype=float))
    return result


def repair_map(T, checker, delta):
    """One round of coordinate-deletion defect repair: zero the worst rows.

    Coordinates count as defective only above a significance floor well
    below the tolerance, so exactly equivariant maps (including those that
    only carry projector roundoff) come back untouched.  Repaired maps must
    still pass the check or be discarded by the caller.
    """
    rows = checker.defect_rows(T)
    p = checker.params.p
    contrib = np.sum(np.abs(rows) ** p, axis=0)
    floor_mass = (1e-6 * delta) ** p / checker.sigma.d
    budget = int(math.floor(delta * checker.sigma.d / 4.0))
    if budget <= 0 or float(np.max(contrib)) <= floor_mass:
        return T
    worst = np.argsort(-contrib)[:budget]
    worst = worst[contrib[worst] > floor_mass]
    if len(worst) == 0:
        return T
    T = T.copy()
    T[worst, :] = 0.0
    return T


# ---------------------------------------------------------------------------
# the estimator


@dataclass(frozen=True)
class EstimatorGrid:
    """Grid arrays for the word/tolerance/scale sweep."""

    m_values: tuple = (2,)
    delta_values: tuple = (0.1,)
    eps_values: tuple = (0.05, 0.1, 0.2)
    p: float = 2.0
    product_base: float = 2.0
    generator_labels: tuple = None  # default: every generator of the model


@dataclass
class DimEstimate:
    upper: float
    lower: float
    per_scale: list
    alpha_hat: float
    support_bound: float
    feasible_mass: float
    lower_clamped: bool = False
    mean_op_norm: float = float("nan")
    diagnostics: dict = field(default_factory=dict)

    def rows(self):
        return [tuple(r[c] for c in PER_SCALE_COLUMNS) for r in self.per_scale]


def _kappa_for_cell(fraction, eps, p, qhat, d):
    """Packing lower bound for one grid cell, fraction measured on the ball.

    Full-span clouds use the plain bound at the 2d-th root of the fraction;
    proper-span clouds use the projected bound at the d-th root, scaled by
    the span fraction.  Cells whose span fraction is not above eps carry no
    projected bound and report 0.
    """
    if fraction <= 0.0:
        return 0.0, 0.0
    if qhat >= 1.0 - 1.0 / max(d, 2):
        alpha = min(1.0, fraction ** (1.0 / (2 * d)))
        kappa = packing_lower_bound(alpha, eps, p).value
        return kappa, kappa
    alpha = min(1.0, fraction ** (1.0 / d))
    if qhat <= eps:
        return 0.0, 0.0
    kappa = projected_packing_lower_bound(alpha, eps, qhat).value
    return kappa, qhat * kappa


def estimate_dimension(
    rep: GeneratedRepresentation,
    sigma_seq,
    grid: EstimatorGrid = EstimatorGrid(),
    samples: int = 200,
    seed: int = 0,
    word_limit: int = 128,
    max_cover_points: int = 800,
) -> DimEstimate:
    """Bracket the normalized dimension of the representation.

    For every sofic model and every (F, m, delta) cell, ``samples``
    candidate maps are drawn with per-index seeds, repaired once, screened,
    and their generating-field images collected into a cloud.  Upper bound:
    for each covering scale the worst cell is taken, the scales are then
    maximized (the dimension is the small-scale limit), and the support
    mass caps the result.  Lower bound: best packing bound over cells, from
    the measured acceptance fraction and span fraction.  Everything that
    went into the aggregation is returned as per-scale rows.
    """
    if samples < 1:
        raise ParameterError(f"samples must be >= 1, got {samples}")
    labels = grid.generator_labels or tuple(
        generator_label(i) for i in range(len(rep.model.generators))
    )
    sup_bound = support_upper_bound(rep)
    selector = product_norm_selector(p=grid.p, base=grid.product_base)
    rows = []
    per_eps_min = {}
    best_lower = 0.0
    best_fraction = 0.0
    best_q = 0.0
    norm_sum, norm_count = 0.0, 0
    sample_counter = 0
    for sigma in sigma_seq:
        ctx = SamplerContext(rep, sigma)
        d = sigma.d
        for m in grid.m_values:
            for delta in grid.delta_values:
                params = HomParams(tuple(labels), int(m), float(delta), float(grid.eps_values[0]), grid.p)
                checker = EquivarianceChecker(rep, sigma, params, word_limit=word_limit, seed=seed)
                images = []
                passes = 0
                for s in range(samples):
                    rng = np.random.default_rng([seed, sample_counter])
                    sample_counter += 1
                    banks = [uniform_ball_vector(d, rng) for _ in range(ctx.plan.n_banks)]
                    T = ctx.sample(banks)
                    T = repair_map(T, checker, delta)
                    outcome, T_scaled, scale = checker.check(T)
                    norm_sum += scale
                    norm_count += 1
                    if isinstance(outcome, EquivarianceWitness):
                        passes += 1
                        images.append(
                            np.stack([T_scaled @ v for v in checker.field_vecs[: min(m, len(rep.fields))]])
                        )
                fraction = passes / samples
                if passes == 0:
                    for eps in grid.eps_values:
                        rows.append(_row(d, eps, len(labels), m, delta, float("nan"), 0.0, 0.0, 0.0))
                    continue
                cloud = PointCloud.make(np.stack(images), p=grid.p)
                flat = cloud.points.reshape(passes, -1)
                svals = np.linalg.svd(flat, compute_uv=False)
                rank = int(np.sum(svals > 1e-8 * svals[0])) if svals.size and svals[0] > 0 else 0
                span_ratio = rank / d  # may exceed 1 for stacked clouds
                qhat = min(1.0, span_ratio)
                for eps in grid.eps_values:
                    deps = covering_dim_greedy(
                        cloud, eps, norm=selector, max_cover_points=max_cover_points, seed=seed
                    )
                    kappa_raw, kappa_lower = _kappa_for_cell(fraction, eps, grid.p, qhat, d)
                    rows.append(_row(d, eps, len(labels), m, delta, deps / d, fraction, kappa_lower, span_ratio, kappa_raw))
                    per_eps_min.setdefault(eps, []).append(deps / d)
                    best_lower = max(best_lower, kappa_lower)
                best_fraction = max(best_fraction, fraction)
                best_q = max(best_q, span_ratio)
    covering_upper = max((min(v) for v in per_eps_min.values()), default=float("nan"))
    upper = min(sup_bound, covering_upper) if per_eps_min else sup_bound
    clamped = best_lower > upper
    lower = min(best_lower, upper) if clamped else best_lower
    return DimEstimate(
        upper=float(upper),
        lower=float(lower),
        per_scale=rows,
        alpha_hat=float(best_fraction),
        support_bound=float(sup_bound),
        feasible_mass=float(best_q),
        lower_clamped=clamped,
        mean_op_norm=norm_sum / norm_count if norm_count else float("nan"),
        diagnostics={"samples": samples, "seed": seed},
    )


def _row(d, eps, F_size, m, delta, deps_over_d, alpha_hat, kappa_lower, qhat, kappa_raw=0.0):
    return {
        "d": d,
        "epsilon": eps,
        "F_size": F_size,
        "m": m,
        "delta": delta,
        "deps_over_d": deps_over_d,
        "alpha_hat": alpha_hat,
        "kappa_lower": kappa_lower,
        "feasible_mass": qhat,
        "kappa_raw": kappa_raw,
    }


# ---------------------------------------------------------------------------
# periodic-partition sampler


def find_period_map(model: Model):
    """A generator acting as one cycle on every orbit, or None."""
    sizes = {len(b) for b in model.rel.blocks}
    if len(sizes) != 1:
        return None
    n = sizes.pop()
    for gi, g in enumerate(model.generators):
        if len(g.pairs) != model.n_atoms or g.fixed_points() and n > 1:
            continue
        ok = True
        for block in model.rel.blocks:
            x = block[0]
            seen = {x}
            for _ in range(n - 1):
                x = g(x)
                if x is None or x in seen:
                    ok = False
                    break
                seen.add(x)
            if not ok or g(x) != block[0]:
                ok = False
            if not ok:
                break
        if ok:
            return gi
    return None


def sample_transport_map_periodic(xi, rep, sigma, level, alpha_index=None):
    """Level-N averaging sampler for constant-orbit-size scalar models.

    Partitions a transversal (the least atom of each orbit) into ``level``
    mass-blocks; the candidate map averages the input over each block and
    each power of the period map, then transports one ball vector through
    the corresponding sofic images.  Requires one-dimensional fibers and a
    generator that is a single cycle on every orbit.
    """
    model = rep.model
    sizes = {len(b) for b in model.rel.blocks}
    if len(sizes) != 1:
        raise ParameterError("periodic sampler requires constant orbit size")
    if set(rep.fiber_dims) != {1}:
        raise ParameterError("periodic sampler requires one-dimensional fibers")
    n = sizes.pop()
    gi = alpha_index if alpha_index is not None else find_period_map(model)
    if gi is None:
        raise ParameterError("no generator acts as a single cycle on every orbit")
    alpha = model.generators[gi]
    if sigma.atom_blocks is None:
        raise ModelError("periodic sampler requires a sofic model with atom blocks")

    rel = model.rel
    weights = rel.space.weight_array()
    transversal = sorted(min(b) for b in rel.blocks)
    level = max(1, min(int(level), len(transversal)))
    blocks = [list(chunk) for chunk in np.array_split(np.array(transversal), level)]
    if any(len(b) == 0 for b in blocks):
        raise ModelError("empty transversal block")

    # point-level images of alpha powers and block diagonals
    alpha_img = word_image(sigma, [generator_label(gi)])
    powers = [PartialMap.identity(sigma.d)]
    for _ in range(n - 1):
        powers.append(compose(alpha_img, powers[-1]))

    d = sigma.d
    off = rep.atom_offsets
    T = np.zeros((d, rep.total_dim))
    inv_alpha = inverse(alpha)
    for k, block in enumerate(blocks):
        mass = float(np.sum(weights[block]))
        base_vec = np.zeros(d)
        for a in block:
            lo, hi = sigma.atom_blocks[a]
            base_vec[lo:hi] = xi[lo:hi]
        for j in range(n):
            moved = np.zeros(d)
            src = np.array([s for s, _ in powers[j].pairs], dtype=int)
            dst = np.array([t for _, t in powers[j].pairs], dtype=int)
            moved[dst] = base_vec[src]
            # E over the block of f(alpha^j x): column of each atom alpha^j(a)
            x_atoms = block
            for a in x_atoms:
                b = a
                for _ in range(j):
                    b = alpha(b)
                T[:, off[b]] += (weights[a] / mass) * moved
    return T
