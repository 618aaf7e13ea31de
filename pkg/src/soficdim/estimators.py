"""scikit-learn style estimator facades.

The dimension estimators are configured in the constructor, fitted on a
model (or graphing), and expose their results as trailing-underscore
attributes, so they compose with sklearn tooling (get_params/set_params,
clone, grid search over tolerances).
"""

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import ModelError
from .covering import PointCloud, ResidualNorm, covering_dim_greedy
from .graphings import Graphing, cycle_quotient_dim_exact, estimate_cycle_quotient_dim
from .homdim import EstimatorGrid, estimate_dimension
from .relations import Model
from .reps import (
    constant_fiber_representation,
    pair_space_representation,
    projected_pair_representation,
)
from .sofic import exact_model


def _sigma_sequence(model, copies):
    return [exact_model(model, int(c)) for c in copies]


class LpDimensionEstimator(BaseEstimator):
    """Bracket the normalized dimension of a representation of a finite relation.

    Parameters mirror the estimation protocol: matrix sizes via ``copies``
    (d = copies * number of atoms), word length ``m``, tolerance ``delta``,
    covering scales ``epsilon``, exponent ``p``, and the presentation of
    the representation (``representation`` in {"pair", "constant",
    "pair-corner"} with ``fiber_dim`` / ``atoms`` / ``translates``).

    After ``fit(model)``: ``upper_``, ``lower_``, ``alpha_hat_``,
    ``per_scale_``, ``estimate_``.
    """

    def __init__(
        self,
        copies=(30,),
        m=2,
        delta=0.1,
        epsilon=(0.05, 0.1, 0.2),
        p=2.0,
        product_base=2.0,
        samples=200,
        seed=0,
        representation="pair",
        fiber_dim=1,
        atoms=None,
        translates=1,
        max_cover_points=800,
    ):
        self.copies = copies
        self.m = m
        self.delta = delta
        self.epsilon = epsilon
        self.p = p
        self.product_base = product_base
        self.samples = samples
        self.seed = seed
        self.representation = representation
        self.fiber_dim = fiber_dim
        self.atoms = atoms
        self.translates = translates
        self.max_cover_points = max_cover_points

    def _representation(self, model):
        if self.representation == "pair":
            return pair_space_representation(model, translates=self.translates)
        if self.representation == "pair-corner":
            if self.atoms is None:
                raise ModelError("representation='pair-corner' needs atoms")
            return projected_pair_representation(model, self.atoms, translates=max(1, self.translates))
        if self.representation == "constant":
            return constant_fiber_representation(model, self.fiber_dim)
        raise ModelError(f"unknown representation {self.representation!r}")

    def fit(self, X, y=None):
        model = X if isinstance(X, Model) else X.as_model()
        rep = self._representation(model)
        grid = EstimatorGrid(
            m_values=(self.m,),
            delta_values=(self.delta,),
            eps_values=tuple(self.epsilon),
            p=self.p,
            product_base=self.product_base,
        )
        est = estimate_dimension(
            rep,
            _sigma_sequence(model, self.copies),
            grid=grid,
            samples=self.samples,
            seed=self.seed,
            max_cover_points=self.max_cover_points,
        )
        self.estimate_ = est
        self.upper_ = est.upper
        self.lower_ = est.lower
        self.alpha_hat_ = est.alpha_hat
        self.per_scale_ = est.per_scale
        return self


class CycleQuotientDimensionEstimator(BaseEstimator):
    """Estimate the dimension of a graphing's edge space modulo cycles.

    ``fit`` accepts a Graphing (or a Model, whose generators then serve as
    the graphing).  Attributes: ``upper_``, ``lower_``, ``exact_``
    (closed-form finite value), ``estimate_``.
    """

    def __init__(
        self,
        copies=(30,),
        m=2,
        delta=0.1,
        epsilon=(0.02, 0.05, 0.1),
        p=2.0,
        product_base=2.0,
        samples=200,
        seed=0,
        max_cover_points=800,
    ):
        self.copies = copies
        self.m = m
        self.delta = delta
        self.epsilon = epsilon
        self.p = p
        self.product_base = product_base
        self.samples = samples
        self.seed = seed
        self.max_cover_points = max_cover_points

    def fit(self, X, y=None):
        phi = X if isinstance(X, Graphing) else Graphing.from_model(X)
        grid = EstimatorGrid(
            m_values=(self.m,),
            delta_values=(self.delta,),
            eps_values=tuple(self.epsilon),
            p=self.p,
            product_base=self.product_base,
        )
        est = estimate_cycle_quotient_dim(
            phi,
            _sigma_sequence(phi.as_model(), self.copies),
            grid=grid,
            samples=self.samples,
            seed=self.seed,
            max_cover_points=self.max_cover_points,
        )
        self.estimate_ = est
        self.upper_ = est.upper
        self.lower_ = est.lower
        self.exact_ = cycle_quotient_dim_exact(phi).value
        return self


class CoveringDimension(BaseEstimator):
    """Fit the smallest greedy subspace that eps-contains a point cloud.

    ``fit(X)`` on an (n, d) or (n, J, d) array sets ``dim_`` and ``basis_``;
    ``transform`` projects points onto the fitted subspace.
    """

    def __init__(self, epsilon=0.1, p=2.0, product_base=None, normalized=True, max_cover_points=2000, seed=0):
        self.epsilon = epsilon
        self.p = p
        self.product_base = product_base
        self.normalized = normalized
        self.max_cover_points = max_cover_points
        self.seed = seed

    def _norm(self):
        return ResidualNorm(p=self.p, base=self.product_base, normalized=self.normalized)

    def fit(self, X, y=None):
        cloud = PointCloud.make(np.asarray(X, dtype=float), p=self.p)
        dim, basis = covering_dim_greedy(
            cloud,
            self.epsilon,
            norm=self._norm(),
            max_cover_points=self.max_cover_points,
            seed=self.seed,
            return_result=True,
        )
        self.dim_ = dim
        self.basis_ = basis
        self.n_components_shape_ = cloud.points.shape[1:]
        return self

    def transform(self, X):
        cloud = PointCloud.make(np.asarray(X, dtype=float), p=self.p)
        if self.basis_.shape[0] == 0:
            return np.zeros_like(cloud.points)
        norm = self._norm()
        J, d = cloud.points.shape[1:]
        sw = np.sqrt(norm.weights((J, d))).ravel()
        r = self.basis_.shape[0]
        Bw = (self.basis_.reshape(r, -1) * sw[None, :]).T
        q = np.linalg.qr(Bw, mode="reduced")[0]
        out = []
        for i in range(cloud.n_points):
            fw = cloud.points[i].ravel() * sw
            gw = q @ (q.T @ fw)
            out.append((gw / np.where(sw == 0.0, 1.0, sw)).reshape(J, d))
        return np.stack(out)
