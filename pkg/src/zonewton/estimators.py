"""Zeroth-order derivative estimators.

The Hessian estimate is built incrementally: each probed direction u
contributes a rank-one correction H <- H + (c - u^T H u) u u^T, where c is
the central-difference curvature along u, so that after the update the
estimate matches the probed curvature exactly along u. In expectation (over
directions uniform on the sphere) the squared Frobenius error contracts by
eta = 1 - 2/(d^2 + 2d) per update, and the recursion can be warm-started
from the previous iterate's estimate.

The gradient is estimated along the first d (orthonormal) probe directions
by central differences, reusing the Hessian probe values at no extra
evaluation cost, with deterministic error at most d * L2 * mu^2 / 6 for an
L2-Hessian-Lipschitz objective.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .oracle import Oracle, ProbeResult
from .sampling import DirectionSet

__all__ = [
    "GradientEstimate",
    "HessianEstimate",
    "directional_curvature",
    "estimate_gradient",
    "estimate_hessian",
    "gradient_error_bound",
    "update_rate_bound",
]

_UNIT_TOL = 1e-10


@dataclass
class HessianEstimate:
    """Symmetric d x d curvature estimate with incremental update state.

    ``matrix`` stays exactly symmetric because every update adds a scalar
    multiple of u u^T. ``updates_applied`` counts every rank-one update the
    estimate has absorbed, including those inherited through warm starts.
    ``last_center`` is the iterate at which the most recent updates were
    probed; callers that distrust stale warm starts can inspect it.
    """

    matrix: np.ndarray
    updates_applied: int = 0
    last_center: Optional[np.ndarray] = None

    def __post_init__(self):
        self.matrix = np.array(self.matrix, dtype=float)
        if self.matrix.ndim != 2 or self.matrix.shape[0] != self.matrix.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {self.matrix.shape}")
        if not np.array_equal(self.matrix, self.matrix.T):
            raise ValueError("initial Hessian estimate must be symmetric")

    @classmethod
    def zero(cls, d: int) -> "HessianEstimate":
        return cls(np.zeros((d, d)))

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def copy(self) -> "HessianEstimate":
        lc = None if self.last_center is None else self.last_center.copy()
        return HessianEstimate(self.matrix.copy(), self.updates_applied, lc)

    def update(self, u, curvature: float) -> None:
        """Apply H <- H + (curvature - u^T H u) u u^T for a unit direction u.

        Raises if u is not unit norm: silent normalization would rescale the
        probed curvature and corrupt the estimator's contraction rate, so the
        caller must normalize explicitly.
        """
        u = np.asarray(u, dtype=float)
        if u.shape != (self.dimension,):
            raise ValueError(f"direction has shape {u.shape}, expected ({self.dimension},)")
        nrm = np.linalg.norm(u)
        if abs(nrm - 1.0) > _UNIT_TOL:
            raise ValueError(f"direction must be unit norm, got ||u|| = {nrm!r}")
        residual = float(curvature) - float(u @ self.matrix @ u)
        self.matrix += residual * np.outer(u, u)
        self.updates_applied += 1


@dataclass
class GradientEstimate:
    """Central-difference gradient along an orthonormal basis."""

    g: np.ndarray
    mu_used: float
    basis: DirectionSet

    def __post_init__(self):
        self.g = np.asarray(self.g, dtype=float)
        if self.basis.r < len(self.g) or not self.basis.orthonormal:
            raise ValueError("gradient basis must hold d orthonormal directions")

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.g))


def directional_curvature(probe: ProbeResult, j: int) -> float:
    """Second central difference (f+ - 2 f0 + f-) / mu^2 along direction j."""
    if not 0 <= j < probe.r:
        raise IndexError(f"direction index {j} out of range for r={probe.r}")
    return (probe.plus_values[j] - 2.0 * probe.center_value
            + probe.minus_values[j]) / probe.mu**2


def estimate_hessian(oracle: Oracle, x, directions: DirectionSet, mu: float,
                     warm_start: Optional[HessianEstimate] = None,
                     ) -> tuple[HessianEstimate, ProbeResult]:
    """Probe all directions in one batch and apply the rank-one updates.

    Starts from ``warm_start`` (copied, the input is left untouched) or the
    zero matrix, consumes exactly 2r+1 evaluations, and applies the r updates
    in direction order. Returns the probe as well so the gradient estimator
    can reuse the same function values for free.
    """
    x = np.asarray(x, dtype=float)
    if warm_start is None:
        est = HessianEstimate.zero(oracle.dimension)
    else:
        if warm_start.dimension != oracle.dimension:
            raise ValueError("warm start dimension does not match the oracle")
        est = warm_start.copy()
    probe = oracle.probe_batch(x, directions, mu)
    for j in range(directions.r):
        est.update(directions.vectors[j], directional_curvature(probe, j))
    est.last_center = x.copy()
    return est, probe


def estimate_gradient(probe: ProbeResult) -> GradientEstimate:
    """Gradient from the first d orthonormal directions of a probe batch.

    g = sum_j (f(x + mu u_j) - f(x - mu u_j)) / (2 mu) * u_j over an
    orthonormal basis u_1..u_d. Consumes zero additional evaluations. Raises
    when the probe's direction set is not flagged orthonormal or holds fewer
    than d directions; in that case the caller must enlarge r to at least d.
    """
    ds = probe.directions
    d = ds.dimension
    if not ds.orthonormal or ds.r < d:
        raise ValueError(
            "gradient reuse needs a full orthonormal basis: probe along at "
            f"least d={d} orthonormal directions (got r={ds.r}, "
            f"orthonormal={ds.orthonormal})")
    coeffs = (probe.plus_values[:d] - probe.minus_values[:d]) / (2.0 * probe.mu)
    g = coeffs @ ds.vectors[:d]
    return GradientEstimate(g=g, mu_used=probe.mu, basis=ds)


def update_rate_bound(d: int) -> float:
    """Expected per-update contraction factor of the squared Frobenius error.

    For directions uniform on the unit sphere the incremental update
    satisfies E||H_k - A||_F^2 <= (1 - 2/(d^2 + 2d)) ||H_{k-1} - A||_F^2.
    """
    if d < 1:
        raise ValueError(f"d must be positive, got {d}")
    return 1.0 - 2.0 / (d * d + 2.0 * d)


def gradient_error_bound(d: int, L2: float, mu: float) -> float:
    """Deterministic bound d * L2 * mu^2 / 6 on the gradient estimate error.

    Valid for any orthonormal probe basis when the objective's Hessian is
    L2-Lipschitz; quadratics (L2 = 0) are estimated exactly.
    """
    if d < 1:
        raise ValueError(f"d must be positive, got {d}")
    if L2 < 0 or mu < 0:
        raise ValueError("L2 and mu must be non-negative")
    return d * L2 * mu * mu / 6.0
