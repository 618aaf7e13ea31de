import numpy as np
import pytest

from soficdim._validation import ModelError
from soficdim.relations import (
    AtomSpace,
    FinRel,
    Model,
    PartialMap,
    compose,
    pm_trace,
    pm_two_norm_diff,
)
from soficdim.reps import cyclic_model
from soficdim.sofic import (
    SoficApprox,
    compress,
    exact_model,
    perturb,
    quality_report,
    word_image,
)


@pytest.fixture
def orbit2():
    sp = AtomSpace.make(["1/2", "1/2"])
    rel = FinRel.make(sp, [(0, 1)])
    swap = PartialMap.make(2, [(0, 1), (1, 0)])
    return Model.make(rel, [swap])


class TestExactModel:
    def test_three_copies_of_a_transposition(self, orbit2):
        sig = exact_model(orbit2, 3)
        assert sig.d == 6
        img = sig.images["g0"]
        # three disjoint transpositions: composing with itself gives identity
        assert compose(img, img) == PartialMap.identity(6)
        assert len(img.pairs) == 6
        assert not img.fixed_points()

    def test_projection_traces_match_masses_exactly(self):
        sp = AtomSpace.make(["1/4", "1/4", "1/2"])
        rel = FinRel.make(sp, [(0, 1), (2,)])
        model = Model.make(rel, [PartialMap.make(3, [(0, 1), (1, 0)])])
        sig = exact_model(model, 4)
        for a, w in enumerate(sp.weights):
            assert pm_trace(sig.image(f"p{a}")) == pytest.approx(w, abs=1e-15)
        assert sig.weight_discrepancy == 0.0

    def test_word_of_generator_and_inverse_is_domain_diagonal(self, orbit2):
        sig = exact_model(orbit2, 2)
        w = word_image(sig, ["g0", "g0^-1"])
        dom = sig.images["g0"].domain
        assert w == PartialMap.diagonal(sig.d, dom)

    def test_infeasible_rounding_raises(self):
        sp = AtomSpace.make([0.2, 0.2, 0.6])
        rel = FinRel.make(sp, [(0,), (1,), (2,)])
        model = Model.make(rel, [])
        with pytest.raises(ModelError, match="copies"):
            exact_model(model, 1)
        # feasible at a finer blow-up
        sig = exact_model(model, 5)
        assert sig.d == 15

    def test_empty_word_is_identity(self, orbit2):
        sig = exact_model(orbit2, 2)
        assert word_image(sig, []) == PartialMap.identity(4)

    def test_unknown_label(self, orbit2):
        sig = exact_model(orbit2, 2)
        with pytest.raises(ModelError, match="unknown"):
            word_image(sig, ["nope"])


class TestQuality:
    def test_exact_model_has_zero_defects(self):
        model = cyclic_model(2, 3)
        sig = exact_model(model, 4)
        rep = quality_report(sig, model, word_length=3)
        assert rep.mult_defect == 0.0
        assert rep.adj_defect == 0.0
        assert rep.trace_defect <= 1e-15
        assert rep.op_norm_bound == 1.0

    def test_word_defect_of_random_word_vanishes_on_exact_model(self):
        model = cyclic_model(1, 5)
        sig = exact_model(model, 6)
        rng = np.random.default_rng(0)
        labels = ["g0", "g0^-1"]
        word = [labels[rng.integers(2)] for _ in range(3)]
        prod = word_image(sig, word)
        letterwise = PartialMap.identity(sig.d)
        for lab in reversed(word):
            letterwise = compose(sig.image(lab), letterwise)
        assert pm_two_norm_diff(prod, letterwise) == 0.0

    def test_corrupted_generator_detected(self):
        model = cyclic_model(1, 4)
        sig = exact_model(model, 25)  # d = 100
        d = sig.d
        k = 10
        img = sig.images["g0"]
        # rewire the first k sources to shifted targets (стays injective)
        pairs = dict(img.pairs)
        srcs = sorted(pairs)[:k]
        olds = [pairs[s] for s in srcs]
        for i, s in enumerate(srcs):
            pairs[s] = olds[(i + 1) % k]
        corrupted = SoficApprox(
            d=d,
            images={**sig.images, "g0": PartialMap.make(d, sorted(pairs.items()))},
            atom_blocks=sig.atom_blocks,
        )
        rep = quality_report(corrupted, model, word_length=2)
        assert rep.mult_defect >= np.sqrt(2 * (k - 1) / d) - 1e-12

    def test_perturb_defect_grows_with_rate_on_average(self):
        model = cyclic_model(1, 4)
        sig = exact_model(model, 10)
        rates = [0.05, 0.2, 0.5]
        means = []
        for rate in rates:
            vals = [
                quality_report(perturb(sig, rate, seed=s), model, word_length=2).mult_defect
                for s in range(20)
            ]
            means.append(np.mean(vals))
        assert means[0] <= means[1] <= means[2]

    def test_op_norm_bound_for_partial_isometries(self, orbit2):
        sig = exact_model(orbit2, 2)
        assert quality_report(sig, orbit2, 1).op_norm_bound == 1.0


class TestPerturb:
    def test_rate_zero_is_identity(self, orbit2):
        sig = exact_model(orbit2, 3)
        assert perturb(sig, 0.0, seed=1) is sig

    def test_full_rate_rewires_transposition(self):
        sp = AtomSpace.make(["1/2", "1/2"])
        rel = FinRel.make(sp, [(0, 1)])
        model = Model.make(rel, [PartialMap.make(2, [(0, 1), (1, 0)])])
        sig = exact_model(model, 1)
        pert = perturb(sig, 1.0, seed=0)
        assert pert.images["g0"] != sig.images["g0"]
        assert quality_report(pert, model, 2).mult_defect > 0.0

    def test_deterministic_in_seed(self, orbit2):
        sig = exact_model(orbit2, 5)
        a = perturb(sig, 0.3, seed=42)
        b = perturb(sig, 0.3, seed=42)
        assert a.images == b.images
        c = perturb(sig, 0.3, seed=43)
        assert any(a.images[k] != c.images[k] for k in a.images)

    def test_preserves_injectivity(self):
        model = cyclic_model(1, 6)
        sig = exact_model(model, 8)
        for s in range(5):
            pert = perturb(sig, 0.4, seed=s)
            img = pert.images["g0"]
            dsts = [t for _, t in img.pairs]
            assert len(dsts) == len(set(dsts))


class TestCompress:
    def test_full_projection_is_identity_on_maps(self, orbit2):
        sig = exact_model(orbit2, 3)
        full = sig.with_projection("all", [1] * sig.d)
        comp = compress(full, "all")
        assert comp.d == sig.d
        assert comp.images["g0"] == sig.images["g0"]

    def test_compressed_identity_has_trace_one(self, orbit2):
        sig = exact_model(orbit2, 3)
        comp = compress(sig, "p0")
        assert pm_trace(word_image(comp, [])) == 1.0

    def test_compressed_exact_model_matches_exact_model_of_compression(self):
        # orbit of 2 atoms with a swap; compressing by one atom leaves the
        # trivial relation on a point, whose exact model has an empty
        # generator corner and the same block structure
        sp = AtomSpace.make(["1/2", "1/2"])
        rel = FinRel.make(sp, [(0, 1)])
        model = Model.make(rel, [PartialMap.make(2, [(0, 1), (1, 0)])])
        sig = exact_model(model, 4)
        comp = compress(sig, "p0")

        point_sp = AtomSpace.make(["1/1"])
        point_rel = FinRel.make(point_sp, [(0,)])
        point_model = Model.make(point_rel, [PartialMap.make(1, [])])
        ref = exact_model(point_model, 4)
        assert comp.d == ref.d
        assert comp.images["g0"] == ref.images["g0"]
        assert tuple(comp.images["p0"]) == tuple(ref.images["p0"])

    def test_missing_projection_label(self, orbit2):
        sig = exact_model(orbit2, 2)
        with pytest.raises(ModelError, match="unknown projection"):
            compress(sig, "p9")
