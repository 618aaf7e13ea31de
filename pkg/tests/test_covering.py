import math

import numpy as np
import pytest

from soficdim._validation import ParameterError
from soficdim.covering import (
    OracleScopeError,
    PointCloud,
    alpha_from_fraction,
    covering_dim_exact,
    covering_dim_greedy,
    epsilon_contains,
    packing_lower_bound,
    plain_norm,
    product_norm_selector,
    projected_packing_lower_bound,
    replay_witness,
)

L2 = plain_norm(2.0)


def ball_points(rng, n, d):
    g = rng.standard_normal((n, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True) / np.sqrt(d)
    return g * rng.uniform(size=(n, 1)) ** (1.0 / d)


class TestEpsilonContains:
    def test_point_equal_to_basis_vector(self):
        e1 = np.zeros(4)
        e1[0] = 1.0
        res = epsilon_contains(np.array([e1]), np.array([e1]), 0.3, norm=L2)
        assert res.success
        assert res.per_point[0].residual < 1e-12
        assert res.per_point[0].deleted == ()

    def test_orthogonal_point_fails(self):
        e1 = np.zeros(6)
        e1[0] = 1.0
        e2 = np.zeros(6)
        e2[1] = 1.0
        # budget floor(0.1*6)=0 deletions; e2 stays orthogonal
        res = epsilon_contains(np.array([e2]), np.array([e1]), 0.1, norm=L2)
        assert not res.success
        assert res.failing_point == 0

    def test_agreement_up_to_cut_fraction(self):
        d = 10
        basis = np.zeros(d)
        basis[:5] = 1.0
        pt = basis.copy()
        pt[9] = 7.0  # one bad coordinate, within the floor(0.2*10)=2 budget
        res = epsilon_contains(np.array([pt]), np.array([basis]), 0.2, norm=L2)
        assert res.success
        assert 9 in res.per_point[0].deleted

    def test_bound_M_limits_the_fit(self):
        pt = np.full(4, 10.0)
        basis = np.ones(4)
        free = epsilon_contains(np.array([pt]), np.array([basis]), 0.2, norm=L2)
        assert free.success
        capped = epsilon_contains(np.array([pt]), np.array([basis]), 0.2, M=0.1, norm=L2)
        assert not capped.success

    def test_self_certification(self):
        rng = np.random.default_rng(2)
        pts = ball_points(rng, 12, 6)
        basis = pts[:3]
        res = epsilon_contains(pts, basis, 0.45, norm=L2)
        if res.success:
            assert replay_witness(PointCloud.make(pts), res, 0.45, norm=L2)

    def test_tie_counts_as_failure(self):
        # residual engineered exactly at eps, deletion budget zero
        pt = np.zeros(4)
        pt[0] = 0.4  # normalized l2 norm = 0.2
        res = epsilon_contains(np.array([pt]), None, 0.2, norm=L2)
        assert not res.success
        assert res.failing_residual == pytest.approx(0.2, abs=1e-15)


class TestGreedy:
    def test_exact_subspace_recovered(self):
        rng = np.random.default_rng(3)
        d, r = 12, 4
        basis = rng.standard_normal((r, d))
        pts = rng.standard_normal((30, r)) @ basis
        # eps small enough that floor(eps*d) = 0 and the points stay visible
        assert covering_dim_greedy(pts, 0.05, norm=L2) == r

    def test_unit_basis_small_eps_needs_everything(self):
        d = 8
        assert covering_dim_greedy(np.eye(d), 0.05, norm=L2) == d

    def test_monotone_in_eps(self):
        rng = np.random.default_rng(4)
        pts = ball_points(rng, 24, 8)
        dims = [covering_dim_greedy(pts, e, norm=L2) for e in (0.05, 0.1, 0.2, 0.35)]
        assert all(a >= b for a, b in zip(dims, dims[1:]))

    def test_stacked_points_supported(self):
        rng = np.random.default_rng(5)
        pts = rng.standard_normal((10, 3, 6))
        dim = covering_dim_greedy(pts, 0.2, norm=product_norm_selector(2.0))
        assert 0 <= dim <= 18


class TestExactOracle:
    def test_zero_cloud(self):
        assert covering_dim_exact(np.zeros((3, 4)), 0.2, norm=L2) == 0

    def test_collinear_points(self):
        pts = np.zeros((2, 4))
        pts[0, 0] = 1.0
        pts[1, 0] = 2.0
        assert covering_dim_exact(pts, 0.1, norm=L2) == 1

    def test_planted_two_dim_cloud_with_noise(self):
        # construction oracle: points in span{e1, e2} of l2(4), noise of
        # norm eps/4 stays inside the residual budget, so the planted
        # dimension is the answer (eps < 1/d keeps the cut budget at zero)
        rng = np.random.default_rng(6)
        eps = 0.2
        d = 4
        pts = []
        for _ in range(8):
            c = rng.standard_normal(2)
            c /= np.linalg.norm(c) / np.sqrt(2)
            noise = rng.standard_normal(d)
            noise *= (eps / 4) / (np.linalg.norm(noise) / np.sqrt(d))
            v = np.zeros(d)
            v[:2] = c
            pts.append(v + noise)
        assert covering_dim_exact(np.array(pts), eps, norm=L2) == 2

    def test_greedy_never_below_exact(self):
        rng = np.random.default_rng(7)
        for trial in range(100):
            d = int(rng.integers(3, 7))
            n = int(rng.integers(3, 10))
            r = int(rng.integers(1, d))
            basis = rng.standard_normal((r, d))
            pts = rng.standard_normal((n, r)) @ basis
            pts += 0.01 * rng.standard_normal((n, d))
            eps = float(rng.uniform(0.08, 0.3))
            exact = covering_dim_exact(pts, eps, norm=L2)
            greedy = covering_dim_greedy(pts, eps, norm=L2)
            assert greedy >= exact

    def test_regime_guard(self):
        with pytest.raises(OracleScopeError):
            covering_dim_exact(np.zeros((2, 9)), 0.1, norm=L2)
        with pytest.raises(OracleScopeError):
            covering_dim_exact(np.zeros((33, 4)), 0.1, norm=L2)


class TestPackingBounds:
    def test_frozen_value(self):
        # frozen from an independent bisection of the displayed inequality
        assert packing_lower_bound(0.5, 0.01).value == pytest.approx(0.6512444591, abs=1e-8)

    def test_tends_to_one_as_eps_shrinks(self):
        vals = [packing_lower_bound(0.5, e).value for e in (0.1, 0.01, 1e-3, 1e-4, 1e-6)]
        assert all(a < b for a, b in zip(vals, vals[1:]))
        # the approach to 1 is logarithmic in eps; measured values recorded
        assert vals[-1] > 0.85

    def test_boundary_alpha_returns_zero_with_flag(self):
        res = packing_lower_bound(1e-12, 0.05)
        assert res.value == 0.0
        assert res.at_boundary

    def test_nondecreasing_in_alpha(self):
        for eps in (0.3, 0.1, 0.02):
            vals = [packing_lower_bound(a, eps).value for a in np.linspace(0.05, 1.0, 12)]
            assert all(b - a >= -1e-6 for a, b in zip(vals, vals[1:]))

    def test_domain_checks(self):
        with pytest.raises(ParameterError):
            packing_lower_bound(0.5, 0.7)
        with pytest.raises(ParameterError):
            packing_lower_bound(1.5, 0.1)
        with pytest.raises(ParameterError):
            projected_packing_lower_bound(0.5, 0.2, 0.1)

    def test_projected_reduction_at_full_trace(self):
        # independent root-solve of the q=1 specialization of the projected
        # inequality: alpha = 4^k 2 eps^{1-k} / (eps^eps (1-eps)^{2(1-eps)})
        def reduced(alpha, eps):
            def log_rhs(k):
                return (
                    k * math.log(4.0)
                    + math.log(2.0)
                    + (1 - k) * math.log(eps)
                    - eps * math.log(eps)
                    - 2 * (1 - eps) * math.log(1 - eps)
                )

            lo, hi = 0.0, 1.0
            target = math.log(alpha)
            if target <= log_rhs(0.0):
                return 0.0
            for _ in range(200):
                mid = (lo + hi) / 2
                if log_rhs(mid) < target:
                    lo = mid
                else:
                    hi = mid
            return (lo + hi) / 2

        for alpha in (0.3, 0.7, 0.95):
            for eps in (0.02, 0.05, 0.2):
                assert projected_packing_lower_bound(alpha, eps, 1.0).value == pytest.approx(
                    reduced(alpha, eps), abs=1e-9
                )

    def test_projected_tends_to_one(self):
        vals = [projected_packing_lower_bound(0.9, e, 0.5).value for e in (0.1, 0.01, 1e-4, 1e-6)]
        assert all(a < b for a, b in zip(vals, vals[1:]))

    def test_projected_boundary(self):
        res = projected_packing_lower_bound(1e-12, 0.05, 0.5)
        assert res.value == 0.0 and res.at_boundary

    def test_alpha_from_fraction(self):
        assert alpha_from_fraction(1.0, 100) == 1.0
        assert alpha_from_fraction(0.0, 100) == 0.0
        assert alpha_from_fraction(0.5, 100) == pytest.approx(0.5 ** (1 / 200))
        assert alpha_from_fraction(0.5, 100, projected=True) == pytest.approx(0.5 ** (1 / 100))


class TestPackingConsistencySmall:
    def test_full_ball_clouds_respect_the_bound(self):
        # small-scale version of the packing consistency check: uniform ball
        # clouds occupy fraction about 1, and the certified covering
        # dimension must not undercut the packing bound minus the slack
        rng = np.random.default_rng(8)
        for d in (4, 5):
            for eps in (0.05, 0.1):
                for _ in range(5):
                    pts = ball_points(rng, 14, d)
                    exact = covering_dim_exact(pts, eps, norm=L2)
                    bound = packing_lower_bound(0.9, eps).value
                    assert exact / d >= bound - 0.15


class TestCoveringCurve:
    def test_rows_and_csv_emit(self, tmp_path):
        from soficdim.covering import covering_curve_rows
        from soficdim.io import write_csv_atomic

        rng = np.random.default_rng(9)
        pts = ball_points(rng, 10, 5)
        rows = covering_curve_rows(pts, [0.05, 0.1, 0.2], norm=L2, alpha=0.8)
        assert [r[0] for r in rows] == [0.05, 0.1, 0.2]
        uppers = [r[1] for r in rows]
        assert all(a >= b for a, b in zip(uppers, uppers[1:]))
        for eps, upper, exact, kl, d in rows:
            assert exact is None or exact <= upper
            assert 0.0 <= kl <= 1.0
            assert d == 5
        out = tmp_path / "curve.csv"
        write_csv_atomic(out, ("epsilon", "dim_upper", "dim_exact", "kappa_lower", "d"), rows)
        lines = out.read_text().splitlines()
        assert lines[1] == "epsilon,dim_upper,dim_exact,kappa_lower,d"
        assert len(lines) == 5


class TestDegenerateClouds:
    def test_empty_cloud_contained_everywhere(self):
        pts = np.zeros((0, 4))
        assert epsilon_contains(pts, None, 0.2, norm=L2).success
        assert covering_dim_greedy(pts, 0.2, norm=L2) == 0

    def test_single_zero_point(self):
        assert covering_dim_greedy(np.zeros((1, 6)), 0.1, norm=L2) == 0
