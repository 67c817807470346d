"""Derivative-free Newton-type solver.

Each iteration (i) probes one orthonormal frame of d directions and builds
the gradient estimate from it, (ii) checks the zeroth-order stopping
criterion when the problem constants are known, (iii) picks the iteration's
direction count r_k (fixed or adaptive) and probes the remaining r_k - d
directions, feeding all r_k curvatures to the warm-started incremental
Hessian estimate, and (iv) clips the estimate's spectrum into
[lambda_min, lambda_max], inverts it, and takes the damped Newton step
x <- x - alpha * Z * g. The center value f(x) is shared between the two
probe phases, so one iteration costs exactly 2 r_k + 1 evaluations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .estimators import (
    GradientEstimate,
    HessianEstimate,
    directional_curvature,
    estimate_gradient,
    gradient_error_bound,
    update_rate_bound,
)
from .oracle import BudgetExhaustedError, Oracle
from .sampling import RngStream, stiefel_sample

__all__ = [
    "AdaptiveDirections",
    "FixedDirections",
    "RunTrace",
    "SolverConfig",
    "SolverState",
    "TraceRecord",
    "RUNNING",
    "STOPPED_BUDGET",
    "STOPPED_MAX_ITER",
    "STOPPED_ZO_FLOOR",
    "adaptive_direction_count",
    "contraction_gamma",
    "eigenvalue_clip",
    "iterate",
    "newton_step",
    "optimal_stepsize",
    "run",
    "zo_floor_stop",
]

RUNNING = "running"
STOPPED_ZO_FLOOR = "stopped_zo_floor"
STOPPED_MAX_ITER = "stopped_max_iter"
STOPPED_BUDGET = "stopped_budget"


@dataclass(frozen=True)
class FixedDirections:
    """Use the same direction count r at every iteration (r >= d)."""

    r: int


@dataclass(frozen=True)
class AdaptiveDirections:
    """Pick r_k per iteration from the gradient norm and a curvature-residual
    error proxy, clamped to [d, r_max].

    ``delta`` is the failure-probability knob of the high-probability
    analysis; the implemented rule does not consume it (the analysis defers
    the explicit direction-count bound), but it is accepted and recorded in
    traces for forward compatibility.
    """

    r_max: int
    delta: float = 0.1


RPolicy = Union[FixedDirections, AdaptiveDirections]


@dataclass
class SolverConfig:
    """Solver parameters; regularity constants are optional and only enable
    the features that need them (adaptive r, the stopping criterion, the
    rate-optimal stepsize)."""

    mu: float
    r_policy: RPolicy
    alpha: Optional[float] = None
    lambda_min: float = 1e-6
    lambda_max: float = 1e6
    max_iterations: int = 100
    L0: Optional[float] = None
    L1: Optional[float] = None
    L2: Optional[float] = None
    m: Optional[float] = None
    stop_on_zo_floor: bool = True

    def __post_init__(self):
        if self.mu <= 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if not 0 < self.lambda_min <= self.lambda_max:
            raise ValueError(
                f"need 0 < lambda_min <= lambda_max, got "
                f"[{self.lambda_min}, {self.lambda_max}]")
        if self.alpha is not None and self.alpha <= 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")

    def resolved_alpha(self) -> float:
        """Explicit alpha wins; else lambda_min / L1 when L1 is known
        (the rate-optimal global stepsize); else 1 (the local Newton regime)."""
        if self.alpha is not None:
            return self.alpha
        if self.L1 is not None:
            return self.lambda_min / self.L1
        return 1.0


@dataclass
class SolverState:
    x: np.ndarray
    hessian: HessianEstimate
    gradient: Optional[GradientEstimate]
    iteration: int
    evals: int
    status: str = RUNNING

    @classmethod
    def initial(cls, x0, d: int) -> "SolverState":
        x0 = np.asarray(x0, dtype=float)
        if x0.shape != (d,):
            raise ValueError(f"x0 has shape {x0.shape}, expected ({d},)")
        return cls(x=x0.copy(), hessian=HessianEstimate.zero(d),
                   gradient=None, iteration=0, evals=0)


@dataclass
class TraceRecord:
    """One iteration's worth of trace data.

    The first twelve fields are the CSV columns; the trailing fields are
    in-memory extras for the verification harness (the iterate itself, the
    spectral Hessian error, whether eigenvalue clipping was active, and the
    stopping-criterion guarantee when it fired).
    """

    iteration: int
    evals: int
    f_value: float
    f_gap: Optional[float] = None
    grad_norm_est: Optional[float] = None
    r_used: Optional[int] = None
    alpha: Optional[float] = None
    step_norm: Optional[float] = None
    x_err: Optional[float] = None
    hess_err_fro: Optional[float] = None
    up_scalars: Optional[int] = None
    down_scalars: Optional[int] = None
    x: Optional[np.ndarray] = None
    hess_err_spec: Optional[float] = None
    clipped: Optional[bool] = None
    zo_bound: Optional[float] = None


@dataclass
class RunTrace:
    records: list
    status: str
    x_final: np.ndarray
    extra: dict = field(default_factory=dict)

    @property
    def total_evals(self) -> int:
        return self.records[-1].evals if self.records else 0


def eigenvalue_clip(h: np.ndarray, lambda_min: float, lambda_max: float,
                    return_info: bool = False):
    """Clamp the spectrum of a symmetric matrix into [lambda_min, lambda_max]
    and invert: Z = Q clamp(Lambda)^(-1) Q^T.

    Every eigenvalue of Z then lies in [1/lambda_max, 1/lambda_min], and when
    the input spectrum already sits inside the bounds Z is exactly the
    inverse. With ``return_info`` also returns a dict with the raw
    eigenvalues and whether any clamping occurred.
    """
    if not 0 < lambda_min <= lambda_max:
        raise ValueError(f"need 0 < lambda_min <= lambda_max, got "
                         f"[{lambda_min}, {lambda_max}]")
    h = np.asarray(h, dtype=float)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {h.shape}")
    fro = np.linalg.norm(h)
    if np.linalg.norm(h - h.T) > 1e-8 * (1.0 + fro):
        raise ValueError("matrix must be symmetric")
    w, q = np.linalg.eigh(0.5 * (h + h.T))
    clipped = bool(w[0] < lambda_min or w[-1] > lambda_max)
    w_clamped = np.clip(w, lambda_min, lambda_max)
    z = (q * (1.0 / w_clamped)) @ q.T
    z = 0.5 * (z + z.T)
    if return_info:
        return z, {"eigenvalues": w, "clipped": clipped}
    return z


def newton_step(x, z, g, alpha: float) -> np.ndarray:
    """Damped Newton update x - alpha * Z g."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    g = np.asarray(g, dtype=float)
    if z.shape != (len(x), len(x)) or g.shape != x.shape:
        raise ValueError("dimension mismatch in newton_step")
    return x - alpha * (z @ g)


def optimal_stepsize(lambda_min: float, L1: float) -> float:
    """Stepsize lambda_min / L1 maximizing the global contraction factor."""
    if L1 <= 0:
        raise ValueError(f"L1 must be positive, got {L1}")
    return lambda_min / L1


def contraction_gamma(alpha: float, m: float, L1: float,
                      lambda_min: float, lambda_max: float) -> float:
    """Per-iteration f-gap contraction exponent gamma(alpha).

    gamma = (2 m alpha / lambda_max) * (1 - L1 alpha / (2 lambda_min));
    at alpha = lambda_min / L1 this equals m lambda_min / (L1 lambda_max).
    """
    return (2.0 * m * alpha / lambda_max) * (1.0 - L1 * alpha / (2.0 * lambda_min))


def zo_floor_stop(g_norm: float, d: int, L2: float, mu: float,
                  m: float) -> Optional[float]:
    """Zeroth-order stopping criterion.

    Once the estimated gradient norm falls to the estimator's own error
    floor d L2 mu^2 / 6, the iterate is already within d L2 mu^2 / (3 m) of
    the minimizer; returns that guarantee (signal to stop) or None.
    """
    threshold = gradient_error_bound(d, L2, mu)
    if g_norm <= threshold:
        return d * L2 * mu * mu / (3.0 * m)
    return None


def adaptive_direction_count(g_norm: float, d: int, L1: float, L2: float,
                             mu: float, eta: float, error_proxy: float,
                             r_max: int) -> int:
    """Direction count needed to push the Hessian error below the accuracy
    target epsilon_k = (||g_k|| - d L2 mu^2 / 6) / L1.

    Starting from a Hessian-error proxy rho, the expected squared error
    contracts by eta per update, so s = ceil(log(eps^2 / rho^2) / log(eta))
    extra updates (beyond the d gradient directions) are prescribed; the
    result is clamped to [d, r_max].
    """
    if r_max < d:
        raise ValueError(f"r_max must be at least d, got r_max={r_max} < d={d}")
    epsilon = (g_norm - gradient_error_bound(d, L2, mu)) / L1
    if epsilon <= 0:
        # Caller should have stopped already; be conservative.
        return r_max
    if error_proxy <= epsilon:
        s = 0
    else:
        ratio = (epsilon / error_proxy) ** 2
        if ratio <= 0:
            return r_max
        s = math.ceil(math.log(ratio) / math.log(eta))
    return max(d, min(d + s, r_max))


def _validate_run_inputs(oracle: Oracle, config: SolverConfig):
    d = oracle.dimension
    policy = config.r_policy
    if isinstance(policy, FixedDirections):
        if policy.r < d:
            raise ValueError(
                f"fixed direction count r={policy.r} is below d={d}; the "
                "gradient estimator needs a full orthonormal frame")
    elif isinstance(policy, AdaptiveDirections):
        if policy.r_max < d:
            raise ValueError(f"r_max={policy.r_max} is below d={d}")
        if config.L1 is None:
            raise ValueError("the adaptive direction policy needs L1")
    else:
        raise TypeError(f"unknown r policy {policy!r}")


def iterate(state: SolverState, oracle: Oracle, config: SolverConfig,
            rng: RngStream) -> tuple[SolverState, TraceRecord]:
    """Run one solver iteration; returns the new state and its trace record.

    Budget exhaustion inside either probe phase propagates as
    :class:`BudgetExhaustedError`; the caller keeps the trace collected so
    far and marks the run stopped_budget.
    """
    if state.status != RUNNING:
        raise ValueError(f"cannot iterate a solver in status {state.status!r}")
    d = oracle.dimension
    x = state.x
    alpha = config.resolved_alpha()

    # (i) one orthonormal frame: gradient + the first d Hessian updates.
    frame = stiefel_sample(d, d, rng)
    probe = oracle.probe_batch(x, frame, config.mu)
    grad = estimate_gradient(probe)
    g_norm = grad.norm

    hess = state.hessian.copy()
    sq_residuals = np.empty(d)
    for j in range(d):
        c = directional_curvature(probe, j)
        u = frame.vectors[j]
        sq_residuals[j] = (c - float(u @ hess.matrix @ u)) ** 2
        hess.update(u, c)
    hess.last_center = x.copy()

    # (ii) zeroth-order floor check, when the constants are known.
    if (config.stop_on_zo_floor and config.L2 is not None
            and config.m is not None):
        bound = zo_floor_stop(g_norm, d, config.L2, config.mu, config.m)
        if bound is not None:
            new_state = SolverState(
                x=x.copy(), hessian=hess, gradient=grad,
                iteration=state.iteration + 1, evals=oracle.eval_count,
                status=STOPPED_ZO_FLOOR)
            record = TraceRecord(
                iteration=state.iteration, evals=oracle.eval_count,
                f_value=probe.center_value, grad_norm_est=g_norm,
                r_used=d, alpha=alpha, step_norm=0.0, x=x.copy(),
                zo_bound=bound)
            return new_state, record

    # (iii) direction count for this iteration; probe the remaining
    # r_k - d directions, sharing the already-known center value.
    policy = config.r_policy
    if isinstance(policy, FixedDirections):
        r_k = policy.r
    else:
        rho = math.sqrt(float(np.mean(sq_residuals)))
        proxy = rho * math.sqrt(d * (d + 2) / 2.0)
        r_k = adaptive_direction_count(
            g_norm, d, config.L1, config.L2 if config.L2 is not None else 0.0,
            config.mu, update_rate_bound(d), proxy, policy.r_max)
    if r_k > d:
        extra = stiefel_sample(d, r_k - d, rng)
        probe2 = oracle.probe_batch(x, extra, config.mu,
                                    center=probe.center_value)
        for j in range(r_k - d):
            hess.update(extra.vectors[j], directional_curvature(probe2, j))

    # (iv) clip, invert, step.
    z, info = eigenvalue_clip(hess.matrix, config.lambda_min,
                              config.lambda_max, return_info=True)
    x_new = newton_step(x, z, grad.g, alpha)

    new_state = SolverState(
        x=x_new, hessian=hess, gradient=grad,
        iteration=state.iteration + 1, evals=oracle.eval_count,
        status=RUNNING)
    record = TraceRecord(
        iteration=state.iteration, evals=oracle.eval_count,
        f_value=probe.center_value, grad_norm_est=g_norm, r_used=r_k,
        alpha=alpha, step_norm=float(np.linalg.norm(x_new - x)),
        x=x.copy(), clipped=info["clipped"])
    return new_state, record


def run(x0, oracle: Oracle, config: SolverConfig, rng: RngStream,
        x_star=None, f_star: Optional[float] = None,
        hessian_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        ) -> RunTrace:
    """Iterate until the zeroth-order floor, the budget, or the iteration cap
    stops the run; returns the per-iteration trace.

    Ground-truth arguments are optional and only enrich the trace: ``x_star``
    fills the x_err column, ``f_star`` the f_gap column, and ``hessian_fn``
    the Frobenius/spectral Hessian-error fields.
    """
    _validate_run_inputs(oracle, config)
    if x_star is not None:
        x_star = np.asarray(x_star, dtype=float)
    state = SolverState.initial(x0, oracle.dimension)
    records = []
    status = STOPPED_MAX_ITER
    for _ in range(config.max_iterations):
        try:
            state, record = iterate(state, oracle, config, rng)
        except BudgetExhaustedError:
            status = STOPPED_BUDGET
            break
        if x_star is not None:
            record.x_err = float(np.linalg.norm(record.x - x_star))
        if f_star is not None:
            record.f_gap = record.f_value - f_star
        if hessian_fn is not None:
            diff = state.hessian.matrix - hessian_fn(record.x)
            record.hess_err_fro = float(np.linalg.norm(diff))
            record.hess_err_spec = float(np.linalg.norm(diff, 2))
        records.append(record)
        if state.status != RUNNING:
            status = state.status
            break
    return RunTrace(records=records, status=status, x_final=state.x.copy(),
                    extra={"r_policy": config.r_policy})
