"""Epsilon-containment, covering dimensions, and volume-packing bounds.

A family of points is contained at scale eps in a subspace when every point,
after deleting its own worst eps-fraction of coordinates, sits within eps of
the subspace in the chosen norm.  The covering dimension at scale eps is the
least dimension of such a subspace; an exhaustive oracle certifies it at toy
sizes and a principal-direction greedy upper-bounds it at experiment sizes.
Volume-packing converts a measured volume fraction into a lower bound on the
normalized covering dimension.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np

from ._validation import ParameterError, check_epsilon, check_p

STRICT_TIE_TOL = 1e-12


class OracleScopeError(ParameterError):
    """The exhaustive covering oracle was asked to leave its certified regime."""


# ---------------------------------------------------------------------------
# norms on stacked tuples


@dataclass(frozen=True)
class ResidualNorm:
    """Weighted p-norm on stacked (components x coordinates) arrays.

    base=None gives the plain l^p norm with every component weighted 1;
    otherwise component j (0-indexed) carries weight base**-(j+1), the
    geometric product-norm profile.  Coordinates carry mass 1/d when
    ``normalized``.
    """

    p: float = 2.0
    base: float = None
    normalized: bool = True

    def __post_init__(self):
        check_p(self.p)

    def component_weights(self, n_components):
        if self.base is None:
            return np.ones(n_components)
        return np.asarray(self.base, dtype=float) ** -np.arange(1, n_components + 1, dtype=float)

    def weights(self, shape):
        j, d = shape
        w = np.repeat(self.component_weights(j)[:, None], d, axis=1)
        if self.normalized:
            w = w / d
        return w

    def norm(self, arr):
        arr = np.atleast_2d(np.asarray(arr, dtype=float))
        w = self.weights(arr.shape)
        return float(np.sum(w * np.abs(arr) ** self.p) ** (1.0 / self.p))


def plain_norm(p=2.0, normalized=True):
    return ResidualNorm(p=p, base=None, normalized=normalized)


def product_norm_selector(p=2.0, base=2.0, normalized=True):
    return ResidualNorm(p=p, base=base, normalized=normalized)


# ---------------------------------------------------------------------------
# point clouds and containment


@dataclass(frozen=True)
class PointCloud:
    """Finite family of stacked points sharing an ambient size and exponent."""

    points: np.ndarray  # (n_points, n_components, d)
    p: float = 2.0

    @staticmethod
    def make(points, p=2.0):
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 2:
            pts = pts[:, None, :]
        if pts.ndim != 3:
            raise ParameterError(f"points must be (n, d) or (n, J, d), got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ParameterError("points must have finite entries")
        return PointCloud(pts, check_p(p))

    @property
    def n_points(self):
        return self.points.shape[0]

    @property
    def n_components(self):
        return self.points.shape[1]

    @property
    def d(self):
        return self.points.shape[2]


@dataclass
class PointWitness:
    index: int
    coeffs: np.ndarray  # coordinates of g in the basis
    deleted: tuple  # coordinate indices cut out
    residual: float


@dataclass
class CoveringResult:
    success: bool
    dim: int
    basis: np.ndarray  # (r, J, d) raw-coordinate spanning set
    per_point: list
    failing_point: int = None
    failing_residual: float = None

    def kept_size(self, d, eps):
        return required_kept(d, eps)


def required_kept(d, eps):
    """|C| >= ceil((1-eps) d), computed with a float-safety nudge."""
    return int(math.ceil((1.0 - eps) * d - 1e-9))


def deletion_budget(d, eps):
    return d - required_kept(d, eps)


def _as_stack(arr, n_components, d):
    a = np.asarray(arr, dtype=float)
    if a.ndim == 1:
        a = a[None, None, :]
    elif a.ndim == 2:
        a = a[:, None, :]
    if a.shape[1] != n_components or a.shape[2] != d:
        raise ParameterError(f"basis shape {a.shape} incompatible with cloud ({n_components},{d})")
    return a


def epsilon_contains(cloud, basis, eps, M=None, norm=None, refit=True):
    """Witness that every cloud point is eps-close to span(basis) after cuts.

    For each point a best approximant g in the span is fitted (bounded by M
    in the selector norm when given), the budgeted worst coordinates of the
    residual are cut, and the remaining mass is compared against eps with a
    strict margin: residuals within 1e-12 of eps count as failures.  Returns
    a CoveringResult either way; failure carries the first offending point.
    """
    cloud = cloud if isinstance(cloud, PointCloud) else PointCloud.make(cloud)
    eps = check_epsilon(eps)
    norm = norm or plain_norm(p=cloud.p)
    n, J, d = cloud.points.shape
    B = _as_stack(basis, J, d) if basis is not None and np.size(basis) else np.zeros((0, J, d))
    r = B.shape[0]
    w = norm.weights((J, d))
    sw = np.sqrt(w).ravel()
    budget = deletion_budget(d, eps)

    Bw = (B.reshape(r, -1) * sw[None, :]).T if r else np.zeros((J * d, 0))
    q = np.linalg.qr(Bw, mode="reduced")[0] if r else Bw
    witnesses = []
    for idx in range(n):
        f = cloud.points[idx]
        fw = f.ravel() * sw
        if r:
            coeffs_w = q.T @ fw
            gw = q @ coeffs_w
        else:
            gw = np.zeros_like(fw)
        res = (fw - gw) / np.where(sw == 0.0, 1.0, sw)
        res = res.reshape(J, d)
        deleted = _worst_coordinates(res, w, norm.p, budget)
        if refit and r and budget:
            mask = np.ones(d, dtype=bool)
            mask[list(deleted)] = False
            keep = np.repeat(mask[None, :], J, axis=0).ravel()
            sol, *_ = np.linalg.lstsq(q[keep], fw[keep], rcond=None)
            gw = q @ sol
            res = ((fw - gw) / np.where(sw == 0.0, 1.0, sw)).reshape(J, d)
            deleted = _worst_coordinates(res, w, norm.p, budget)
        g_raw = (gw / np.where(sw == 0.0, 1.0, sw)).reshape(J, d)
        if M is not None:
            gn = norm.norm(g_raw)
            if gn > M:
                g_raw = g_raw * (M / gn)
                res = f - g_raw
                deleted = _worst_coordinates(res, w, norm.p, budget)
        masked = res.copy()
        if deleted:
            masked[:, list(deleted)] = 0.0
        rho = norm.norm(masked)
        if not rho < eps - STRICT_TIE_TOL:
            return CoveringResult(
                success=False, dim=r, basis=B, per_point=witnesses,
                failing_point=idx, failing_residual=rho,
            )
        coeffs = coeffs_w if r else np.zeros(0)
        witnesses.append(PointWitness(index=idx, coeffs=coeffs, deleted=deleted, residual=rho))
    return CoveringResult(success=True, dim=r, basis=B, per_point=witnesses)


def _worst_coordinates(res, w, p, budget):
    if budget <= 0:
        return ()
    contrib = np.sum(w * np.abs(res) ** p, axis=0)
    worst = np.argpartition(contrib, -budget)[-budget:]
    worst = worst[contrib[worst] > 0.0]
    return tuple(int(i) for i in worst)


def replay_witness(cloud, result, eps, norm=None):
    """Re-check a CoveringResult's own witnesses (self-certification)."""
    cloud = cloud if isinstance(cloud, PointCloud) else PointCloud.make(cloud)
    norm = norm or plain_norm(p=cloud.p)
    if not result.success:
        return False
    r = result.dim
    if r:
        J, d = result.basis.shape[1:]
        sw = np.sqrt(norm.weights((J, d))).ravel()
        Bw = (result.basis.reshape(r, -1) * sw[None, :]).T
        q = np.linalg.qr(Bw, mode="reduced")[0]
        frame = (q / np.where(sw[:, None] == 0.0, 1.0, sw[:, None])).T
    for wit in result.per_point:
        f = cloud.points[wit.index]
        g = (wit.coeffs @ frame).reshape(f.shape) if r else np.zeros_like(f)
        res = f - g
        if wit.deleted:
            res[:, list(wit.deleted)] = 0.0
        if not norm.norm(res) < eps - STRICT_TIE_TOL:
            return False
    return True


# ---------------------------------------------------------------------------
# greedy upper bound


def _chain_from_cloud(Fw):
    """Principal directions of the weighted cloud, residual-by-residual.

    One SVD of the stacked cloud delivers all the directions the iterative
    extraction would: each singular vector is the top principal direction of
    the residuals after projecting out the previous ones.
    """
    u, s, _ = np.linalg.svd(Fw, full_matrices=False)
    if s.size and s[0] > 0:
        keep = s > 1e-13 * s[0]
        return u[:, keep]
    return u[:, :0]


def covering_dim_greedy(points, eps, norm=None, max_cover_points=800, seed=0, return_result=False):
    """Upper bound for the covering dimension at scale eps.

    Builds the principal-direction chain of the cloud once, then finds the
    shortest prefix that passes the containment check (binary search plus a
    short downward verification scan).  The returned subspace always passes
    epsilon_contains, so the bound is certified even though it need not be
    minimal.
    """
    cloud = points if isinstance(points, PointCloud) else PointCloud.make(points)
    eps = check_epsilon(eps)
    norm = norm or plain_norm(p=cloud.p)
    n, J, d = cloud.points.shape
    if n == 0:
        return (0, np.zeros((0, J, d))) if return_result else 0
    pts = cloud.points
    if n > max_cover_points:
        rng = np.random.default_rng(seed)
        pick = np.sort(rng.choice(n, size=max_cover_points, replace=False))
        pts = pts[pick]
        n = max_cover_points
    w = norm.weights((J, d))
    sw = np.sqrt(w).ravel()
    F = pts.reshape(n, -1) * sw[None, :]
    chain = _chain_from_cloud(F.T)
    coeffs = chain.T @ F.T  # (chain, n)
    budget = deletion_budget(d, eps)
    kmax = chain.shape[1]

    def feasible(r):
        if r:
            resw = F.T - chain[:, :r] @ coeffs[:r]
        else:
            resw = F.T
        res = resw / np.where(sw[:, None] == 0.0, 1.0, sw[:, None])
        res = np.abs(res.T.reshape(n, J, d))
        contrib = np.sum(w[None, :, :] * res**norm.p, axis=1)  # (n, d)
        total = np.sum(contrib, axis=1)
        if budget > 0:
            cut = np.sum(
                np.partition(contrib, d - budget, axis=1)[:, d - budget:], axis=1
            )
        else:
            cut = 0.0
        rho = (total - cut) ** (1.0 / norm.p)
        return bool(np.all(rho < eps - STRICT_TIE_TOL))

    lo, hi = 0, kmax
    if feasible(0):
        hi = 0
    else:
        lo = 1
        while lo < hi:
            mid = (lo + hi) // 2
            if feasible(mid):
                hi = mid
            else:
                lo = mid + 1
    # guard against non-monotone blips just below the search answer
    r = hi
    while r > 0 and feasible(r - 1):
        r -= 1
    if not return_result:
        return r
    basis = (chain[:, :r].T / sw[None, :]).reshape(r, J, d) if r else np.zeros((0, J, d))
    return r, basis


# ---------------------------------------------------------------------------
# exact oracle


def covering_dim_exact(points, eps, norm=None, max_checks=400_000):
    """Certified covering dimension over the documented witness family.

    Regime: ambient size at most 8 and at most 32 points.  Candidate
    subspaces at dimension r are spans of r cloud points, each optionally
    cut on a subset of its budgeted largest coordinates, together with the
    greedy chain prefixes (so the oracle never exceeds the greedy bound).
    At these sizes a minimizing subspace can be perturbed onto such a
    witness without changing strict feasibility; boundary ties are already
    treated as failures by the strict containment margin.
    """
    cloud = points if isinstance(points, PointCloud) else PointCloud.make(points)
    eps = check_epsilon(eps)
    norm = norm or plain_norm(p=cloud.p)
    n, J, d = cloud.points.shape
    if d > 8 or n > 32 or J != 1:
        raise OracleScopeError(
            f"exact oracle limited to flat clouds with d <= 8 and <= 32 points, "
            f"got d={d}, n={n}, components={J}"
        )
    pts = cloud.points[:, 0, :]
    budget = deletion_budget(d, eps)

    variants = []
    for i in range(n):
        v = pts[i]
        vs = [v]
        if budget > 0:
            top = np.argsort(-np.abs(v))[:budget]
            for k in range(1, budget + 1):
                for cut in itertools.combinations(top, k):
                    vv = v.copy()
                    vv[list(cut)] = 0.0
                    vs.append(vv)
        variants.append(vs)

    greedy_r, greedy_basis = covering_dim_greedy(cloud, eps, norm=norm, return_result=True)

    checks = 0
    for r in range(0, d + 1):
        if r == 0:
            if epsilon_contains(cloud, None, eps, norm=norm).success:
                return 0
            continue
        if r >= greedy_r:
            return greedy_r
        for subset in itertools.combinations(range(n), r):
            for choice in itertools.product(*(range(len(variants[i])) for i in subset)):
                checks += 1
                if checks > max_checks:
                    raise OracleScopeError(
                        f"exact oracle exceeded {max_checks} candidate checks; "
                        "shrink the cloud or the cut budget"
                    )
                basis = np.stack([variants[i][c] for i, c in zip(subset, choice)])
                if epsilon_contains(cloud, basis, eps, norm=norm, refit=True).success:
                    return r
    return greedy_r


# ---------------------------------------------------------------------------
# volume packing bounds


@dataclass(frozen=True)
class PackingBound:
    """Root of the packing inequality, clamped to [0, 1] with a boundary flag."""

    value: float
    at_boundary: bool = False

    def __float__(self):
        return self.value


BISECT_TOL = 1e-10
BISECT_MAX_ITER = 200


def _bisect_increasing(fn, target, lo=0.0, hi=1.0):
    flo, fhi = fn(lo), fn(hi)
    if target <= flo:
        return PackingBound(lo, at_boundary=True)
    if target >= fhi:
        return PackingBound(hi, at_boundary=True)
    for _ in range(BISECT_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if hi - lo < BISECT_TOL:
            break
        if fn(mid) < target:
            lo = mid
        else:
            hi = mid
    return PackingBound(0.5 * (lo + hi))


def packing_lower_bound(alpha, eps, p=2.0):
    """Least admissible normalized covering dimension for volume ratio alpha.

    Solves, for the unique kappa in [0, 1],
        alpha = sqrt(2) eps^{(1-kappa)-eps} (2+4 eps)^kappa
                (1/eps)^eps (1/(1-eps))^{1-eps};
    the right-hand side is strictly increasing in kappa, so any covering of
    a set with (2d-th root) volume ratio alpha needs dimension fraction at
    least kappa.  The bound is uniform in p at this scale; p is accepted for
    interface symmetry.  Out-of-range targets return the clamped endpoint
    with the boundary flag set.
    """
    check_p(p)
    eps = check_epsilon(eps, upper=0.5)
    alpha = float(alpha)
    if not 0.0 < alpha <= 1.0:
        raise ParameterError(f"alpha must lie in (0, 1], got {alpha}")

    le = math.log(eps)

    def log_rhs(k):
        return (
            0.5 * math.log(2.0)
            + ((1.0 - k) - eps) * le
            + k * math.log(2.0 + 4.0 * eps)
            - eps * le
            - (1.0 - eps) * math.log(1.0 - eps)
        )

    return _bisect_increasing(log_rhs, math.log(alpha))


def projected_packing_lower_bound(alpha, eps, q):
    """Packing bound under a trace-q projection.

    Solves for kappa in
        alpha = ((1-q)^{1-q} / ((q-eps)^{q-eps} eps^eps (1-eps)^{1-eps}))
                4^{kappa q} 2^q eps^{(1-kappa) q};
    the covering dimension of the projected set is then at least
    kappa * q * d.  Requires q > eps.
    """
    eps = check_epsilon(eps, upper=0.5)
    q = float(q)
    if not (eps < q <= 1.0):
        raise ParameterError(f"q must lie in (eps, 1], got q={q}, eps={eps}")
    alpha = float(alpha)
    if not 0.0 < alpha <= 1.0:
        raise ParameterError(f"alpha must lie in (0, 1], got {alpha}")

    le = math.log(eps)
    const = (
        ((1.0 - q) * math.log(1.0 - q) if q < 1.0 else 0.0)
        - (q - eps) * math.log(q - eps)
        - eps * le
        - (1.0 - eps) * math.log(1.0 - eps)
        + q * math.log(2.0)
    )

    def log_rhs(k):
        return const + k * q * math.log(4.0) + (1.0 - k) * q * le

    return _bisect_increasing(log_rhs, math.log(alpha))


def alpha_from_fraction(fraction, d, projected=False):
    """Convert a measured volume fraction into the packing bound's alpha.

    The plain bound is stated for the 2d-th root of the fraction, the
    projected one for the d-th root.
    """
    fraction = float(fraction)
    if fraction <= 0.0:
        return 0.0
    if fraction > 1.0:
        raise ParameterError(f"volume fraction must lie in [0, 1], got {fraction}")
    root = d if projected else 2 * d
    return min(1.0, fraction ** (1.0 / root))


def covering_curve_rows(cloud, eps_list, norm=None, alpha=None, p=2.0):
    """Rows (epsilon, dim_upper, dim_exact-or-None, kappa_lower, d) for CSV."""
    cloud = cloud if isinstance(cloud, PointCloud) else PointCloud.make(cloud)
    rows = []
    for eps in eps_list:
        upper = covering_dim_greedy(cloud, eps, norm=norm)
        try:
            exact = covering_dim_exact(cloud, eps, norm=norm)
        except OracleScopeError:
            exact = None
        kl = packing_lower_bound(alpha, eps, p).value if alpha else 0.0
        rows.append((eps, upper, exact, kl, cloud.d))
    return rows
