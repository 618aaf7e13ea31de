import numpy as np
import pytest

from soficdim._validation import ModelError, ParameterError
from soficdim.norms import (
    ProductNorm,
    VectorField,
    direct_integral_norm,
    is_dynamically_generating,
    lp_norm,
    support,
)
from soficdim.relations import AtomSpace, FinRel


@pytest.fixture
def two_atom_space():
    return AtomSpace.make(["1/2", "1/2"])


class TestLpNorm:
    def test_unit_vector_normalized(self):
        v = np.zeros(4)
        v[0] = 1.0
        assert lp_norm(v, 2, normalized=True) == pytest.approx(0.5)

    def test_all_ones_normalized_is_one(self):
        for p in (1.0, 1.5, 2.0, 3.0):
            assert lp_norm(np.ones(7), p, normalized=True) == pytest.approx(1.0)

    def test_pythagoras(self):
        assert lp_norm([3.0, 4.0], 2) == pytest.approx(5.0)

    def test_p_below_one_rejected(self):
        with pytest.raises(ParameterError):
            lp_norm([1.0], 0.5)


class TestDirectIntegral:
    def test_two_unit_fibers(self, two_atom_space):
        f = VectorField.make(two_atom_space, [[1.0], [1.0]])
        assert direct_integral_norm(f, 2) == pytest.approx(1.0)

    def test_arithmetic(self, two_atom_space):
        f = VectorField.make(two_atom_space, [[0.0], [2.0]])
        assert direct_integral_norm(f, 2) == pytest.approx(np.sqrt(2.0))

    def test_zero_field(self, two_atom_space):
        f = VectorField.make(two_atom_space, [[0.0, 0.0], [0.0]])
        assert direct_integral_norm(f, 3) == 0.0

    def test_triangle_inequality_random(self):
        rng = np.random.default_rng(0)
        sp = AtomSpace.make([0.2, 0.3, 0.5])
        for p in (1.0, 1.7, 2.0):
            for _ in range(20):
                a = [list(rng.standard_normal(3)) for _ in range(3)]
                b = [list(rng.standard_normal(3)) for _ in range(3)]
                fa = VectorField.make(sp, a)
                fb = VectorField.make(sp, b)
                fs = VectorField.make(sp, [[x + y for x, y in zip(ra, rb)] for ra, rb in zip(a, b)])
                assert direct_integral_norm(fs, p) <= (
                    direct_integral_norm(fa, p) + direct_integral_norm(fb, p) + 1e-10
                )


class TestProductNorm:
    def test_first_coordinate_weight(self):
        rho = ProductNorm(p=1.0, base=2.0)
        lo, hi = rho.eval_interval([1.0], tail_bound=0.0)
        assert lo == hi == pytest.approx(0.5)

    def test_geometric_series_of_ones(self):
        rho = ProductNorm(p=1.0, base=2.0)
        # all-ones sequence: prefix of length n plus tail bound 1
        lo, hi = rho.eval_interval([1.0] * 20, tail_bound=1.0)
        assert lo <= 1.0 <= hi
        assert hi - lo <= rho.tail_weight(20) + 1e-15

    def test_zero_sequence(self):
        rho = ProductNorm(p=2.0, base=2.0)
        assert rho.eval_exact(np.zeros(5)) == 0.0

    def test_interval_width_bounded_by_tail(self):
        rho = ProductNorm(p=2.0, base=3.0)
        lo, hi = rho.eval_interval([0.3, -0.2], tail_bound=0.7)
        assert hi >= lo >= 0.0
        assert hi**rho.p - lo**rho.p <= rho.tail_weight(2) * 0.7**rho.p + 1e-15

    def test_monotone_on_dominated_pairs(self):
        rng = np.random.default_rng(1)
        rho = ProductNorm(p=1.5, base=2.0)
        for _ in range(50):
            g = rng.uniform(0, 1, size=8)
            f = g * rng.uniform(0, 1, size=8)
            assert rho.eval_exact(f) <= rho.eval_exact(g)

    def test_infinite_tail_rejected(self):
        rho = ProductNorm()
        with pytest.raises(ModelError):
            rho.eval_interval([1.0], tail_bound=float("inf"))


class TestSupport:
    def test_zero_field_empty(self, two_atom_space):
        f = VectorField.make(two_atom_space, [[0.0], [0.0]])
        assert support(f) == ()

    def test_single_atom(self, two_atom_space):
        f = VectorField.make(two_atom_space, [[0.3], [0.0]])
        assert support(f) == (0,)

    def test_full_support_has_mass_one(self):
        sp = AtomSpace.make([0.1, 0.2, 0.7])
        f = VectorField.make(sp, [[1.0], [2.0], [3.0]])
        assert sp.mass(support(f)) == pytest.approx(1.0)

    def test_minimality(self, two_atom_space):
        f = VectorField.make(two_atom_space, [[1.0], [0.0]])
        sup = support(f)
        # zeroing a support atom changes the field, zeroing the rest does not
        for a in range(2):
            zeroed = list(list(x) for x in f.fibers)
            zeroed[a] = [0.0 for _ in zeroed[a]]
            changed = zeroed != [list(x) for x in f.fibers]
            assert changed == (a in sup)


class TestDynamicalGeneration:
    def test_basis_fields_generate(self):
        sp = AtomSpace.make(["1/2", "1/2"])
        rel = FinRel.make(sp, [(0, 1)])
        fields = [
            VectorField.make(sp, [[1.0, 0.0], [1.0, 0.0]]),
            VectorField.make(sp, [[0.0, 1.0], [0.0, 1.0]]),
        ]
        assert is_dynamically_generating(fields, rel)

    def test_zero_fields_do_not(self):
        sp = AtomSpace.make(["1/2", "1/2"])
        rel = FinRel.make(sp, [(0, 1)])
        fields = [VectorField.make(sp, [[0.0], [0.0]])]
        assert not is_dynamically_generating(fields, rel)

    def test_one_sided_field_spans_across_orbit(self):
        # a single field vanishing on one atom of a 2-orbit still generates:
        # the translate from the other atom spans the fiber
        sp = AtomSpace.make(["1/2", "1/2"])
        rel = FinRel.make(sp, [(0, 1)])
        f = VectorField.make(sp, [[2.0], [0.0]])
        assert is_dynamically_generating([f], rel)

    def test_invariant_under_fiberwise_basis_change(self):
        rng = np.random.default_rng(4)
        sp = AtomSpace.make(["1/2", "1/2"])
        rel = FinRel.make(sp, [(0, 1)])
        fields = [
            VectorField.make(sp, [[1.0, 0.0], [0.0, 0.0]]),
            VectorField.make(sp, [[0.0, 0.0], [0.0, 1.0]]),
        ]
        assert is_dynamically_generating(fields, rel)
        for _ in range(5):
            b = rng.standard_normal((2, 2)) + 2 * np.eye(2)
            changed = [
                VectorField.make(sp, [list(b @ f.fiber(0)), list(b @ f.fiber(1))])
                for f in fields
            ]
            assert is_dynamically_generating(changed, rel)

    def test_fiber_dim_mismatch_rejected(self):
        sp = AtomSpace.make(["1/2", "1/2"])
        rel = FinRel.make(sp, [(0, 1)])
        f = VectorField.make(sp, [[1.0, 0.0], [1.0]])
        with pytest.raises(ModelError, match="varies"):
            is_dynamically_generating([f], rel)
