"""
Block coordinate descent for the l1,2-regularized outlier factorization

    min_{W>=0, H>=0, Z}  1/2 ||A - W H - Z||_F^2 + alpha ||Z||_{1,2} + beta ||H||_1

where ``||Z||_{1,2}`` sums the Euclidean norms of the columns of ``Z``.

Each outer iteration first solves for ``Z`` in closed form, one column at a
time, then runs HALS sweeps (one row of ``H`` or one column of ``W`` at a
time) on ``A - Z``. The column norms of ``Z`` are the outlier scores.
"""

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .sparse_core import (
    FactorPair,
    ImplicitAbar,
    column_residual_norms,
    gram,
)

logger = logging.getLogger(__name__)


class NumericalError(FloatingPointError):
    """The objective or an intermediate quantity became non-finite."""


@dataclass(frozen=True)
class SolverConfig:
    """Parameters of the factorization.

    ``beta=None`` resolves to ``0.1 * alpha``. The stopping rules are
    relative objective change below ``tol_outer`` (or ``max_outer`` outer
    iterations) and relative Frobenius change of ``H`` below ``tol_inner``
    (or ``max_inner`` sweeps). With ``n_restarts > 1`` the fit is repeated
    from independent random starts and the one with the lowest final
    objective is kept; the first start always uses ``seed`` itself.
    """

    rank: int = 10
    alpha: float = 20.0
    beta: float | None = None
    gamma: float = 1.0
    max_outer: int = 50
    max_inner: int = 10
    tol_outer: float = 1e-4
    tol_inner: float = 1e-3
    seed: int = 0
    epsilon_col: float = 1e-12
    n_restarts: int = 1

    def __post_init__(self):
        if self.beta is None:
            object.__setattr__(self, "beta", 0.1 * self.alpha)
        if int(self.rank) != self.rank or self.rank < 1:
            raise ValueError(f"rank must be a positive integer, got {self.rank}")
        if not (np.isfinite(self.alpha) and self.alpha >= 0):
            raise ValueError(f"alpha must be finite and >= 0, got {self.alpha}")
        if not (np.isfinite(self.beta) and self.beta >= 0):
            raise ValueError(f"beta must be finite and >= 0, got {self.beta}")
        if not (np.isfinite(self.gamma) and self.gamma > 0):
            raise ValueError(f"gamma must be > 0, got {self.gamma}")
        if self.max_outer < 0 or self.max_inner < 1:
            raise ValueError("max_outer must be >= 0 and max_inner >= 1")
        if int(self.n_restarts) != self.n_restarts or self.n_restarts < 1:
            raise ValueError(f"n_restarts must be a positive integer, got {self.n_restarts}")
        if self.tol_outer <= 0 or self.tol_inner <= 0 or self.epsilon_col <= 0:
            raise ValueError("tolerances must be positive")

    @property
    def shrink_threshold(self):
        return self.alpha / self.gamma


@dataclass
class OutlierState:
    """Implicit ``Z``: column ``i`` is ``scales[i] * (a_i - W h_i)``.

    ``scores[i]`` is ``||z_i||_2``.
    """

    scales: np.ndarray
    residual_norms: np.ndarray
    scores: np.ndarray


@dataclass
class SolveResult:
    factors: FactorPair
    state: OutlierState
    objective_trace: list = field(default_factory=list)
    iterations_used: int = 0
    converged: bool = False
    degenerate_events: int = 0

    @property
    def scores(self):
        return self.state.scores


def shrink_column(a, C):
    """Generalized shrinkage ``max(||a|| - C, 0) a / ||a||``.

    This is the minimizer of ``1/2 ||z - a||^2 + C ||z||_2``.

    Returns
    -------
    z : ndarray
    scale : float
        ``z == scale * a``.
    """
    a = np.asarray(a, dtype=np.float64)
    if C < 0:
        raise ValueError("shrinkage threshold must be nonnegative")
    norm = float(np.linalg.norm(a))
    scale = 1.0 - C / norm if norm > C else 0.0
    return scale * a, scale


def update_z(A, f, cfg):
    """Closed-form Z-step for every document column.

    Each residual ``a_i - W h_i`` is shrunk with threshold ``alpha / gamma``.
    Only the scale factors and norms are kept.
    """
    res = column_residual_norms(A, f)
    if not np.all(np.isfinite(res)):
        j = int(np.flatnonzero(~np.isfinite(res))[0])
        raise NumericalError(f"non-finite residual norm in column {j}")
    C = cfg.shrink_threshold
    scores = np.maximum(res - C, 0.0)
    scales = np.zeros_like(res)
    pos = scores > 0
    scales[pos] = scores[pos] / res[pos]
    return OutlierState(scales=scales, residual_norms=res, scores=scores)


def _reseed_column(W, j, rng):
    W[:, j] = rng.uniform(size=W.shape[0])


def update_h(ab, W, H, beta, rng=None, epsilon_col=1e-12):
    """One HALS sweep over the rows of ``H``, in place.

    Row ``j`` becomes the exact minimizer of
    ``1/2 ||Abar - sum_k w_k h_k^T||^2 + beta ||h_j||_1`` over ``h_j >= 0``
    with every other block held at its latest value.

    A column ``w_j`` with squared norm below ``epsilon_col`` makes the row
    subproblem ill-posed. Then ``h_j`` is zeroed (the product ``w_j h_j^T``
    already vanishes, so the fit is unchanged), ``w_j`` is redrawn uniformly
    and the row is solved against the fresh column.

    Returns
    -------
    int
        Number of degenerate columns encountered.
    """
    AbtW = ab.rmatmat(W)
    WtW = gram(W)
    events = 0
    for j in range(W.shape[1]):
        if WtW[j, j] < epsilon_col:
            if rng is None:
                rng = np.random.default_rng(0)
            H[j, :] = 0.0
            _reseed_column(W, j, rng)
            col = W.T @ W[:, j]
            WtW[j, :] = col
            WtW[:, j] = col
            AbtW[:, j] = ab.rmatmat(W[:, j:j + 1]).ravel()
            events += 1
        step = AbtW[:, j] - H.T @ WtW[:, j] - beta
        H[j, :] = np.maximum(H[j, :] + step / WtW[j, j], 0.0)
    return events


def update_w(ab, W, H, epsilon_col=1e-12):
    """One HALS sweep over the columns of ``W``, in place.

    Column ``j`` becomes the exact nonnegative least-squares minimizer with
    the other blocks fixed. When ``||h_j||^2 < epsilon_col`` the column does
    not affect the fit, so it is left unchanged (still a minimizer) and
    counted as degenerate; the next ``update_h`` reseeds it if needed.
    """
    AbHt = ab.matmat(H.T)
    HHt = gram(H.T)
    events = 0
    for j in range(W.shape[1]):
        d = HHt[j, j]
        if d < epsilon_col:
            events += 1
            continue
        step = AbHt[:, j] - W @ HHt[:, j]
        W[:, j] = np.maximum(W[:, j] + step / d, 0.0)
    return events


def objective(A, f, state, cfg):
    """Objective value when ``state`` was computed from the factors ``f``.

    Uses ``||abar_i - z_i|| = (1 - c_i) ||abar_i|| = min(||abar_i||, alpha/gamma)``.
    """
    fit = np.minimum(state.residual_norms, cfg.shrink_threshold)
    return float(0.5 * np.dot(fit, fit)
                 + cfg.alpha * state.scores.sum()
                 + cfg.beta * np.abs(f.H).sum())


def full_objective(ab, W, H, state, cfg):
    """Objective for factors ``W, H`` with ``Z`` held at the one encoded by ``ab``."""
    res_sq = ab.residual_sq_norms(W, H)
    return float(0.5 * res_sq.sum()
                 + cfg.alpha * state.scores.sum()
                 + cfg.beta * np.abs(H).sum())


def initialize(A, cfg):
    rng = np.random.default_rng(cfg.seed)
    m, n = A.shape
    W = rng.uniform(size=(m, cfg.rank))
    H = rng.uniform(size=(cfg.rank, n))
    mean = A.sum() / (m * n)
    if mean > 0:
        # E[(WH)_ij] = rank / 4 for unit uniforms; match it to mean(A)
        s = np.sqrt(4.0 * mean / cfg.rank)
        W *= s
        H *= s
    return FactorPair(W, H), rng


def _rel_change(new, old):
    return abs(old - new) / max(abs(old), np.finfo(float).tiny)


def restart_seed(seed, i):
    """Seed of random start ``i``; start 0 is ``seed`` itself."""
    if i == 0:
        return seed
    return int(np.random.SeedSequence([seed, i]).generate_state(1)[0])


def solve(A, cfg, init=None):
    """Run the outer/inner block coordinate descent.

    Parameters
    ----------
    A : scipy.sparse.csc_matrix, shape (m, n)
        Nonnegative term-document matrix.
    cfg : SolverConfig
    init : FactorPair, optional
        Starting factors; drawn uniformly from ``cfg.seed`` when omitted.
        Given factors disable restarts.

    Returns
    -------
    SolveResult
        ``objective_trace[k]`` is the objective after outer iteration ``k``.
        The returned outlier state is the last Z-step, so the returned
        ``(W, H, Z)`` triple is exactly the one the final trace entry scores.
    """
    m, n = A.shape
    if cfg.rank > min(m, n):
        logger.warning("rank %d exceeds min(m, n) = %d", cfg.rank, min(m, n))
    if init is not None or cfg.n_restarts == 1:
        return _solve_once(A, cfg, init)
    best = None
    for i in range(cfg.n_restarts):
        res = _solve_once(A, replace(cfg, seed=restart_seed(cfg.seed, i)), None)
        final = res.objective_trace[-1] if res.objective_trace else np.inf
        logger.debug("restart %d final objective %.10g", i, final)
        if best is None or final < best[0]:
            best = (final, res)
    return best[1]


def _solve_once(A, cfg, init):
    m, n = A.shape
    if init is None:
        f, rng = initialize(A, cfg)
    else:
        if init.W.shape != (m, cfg.rank) or init.H.shape != (cfg.rank, n):
            raise ValueError("initial factors do not match A and cfg.rank")
        f = init.copy()
        rng = np.random.default_rng(cfg.seed)
    W, H = f.W, f.H

    res0 = column_residual_norms(A, f)
    state = OutlierState(np.zeros(n), res0, np.zeros(n))
    prev = float(0.5 * np.dot(res0, res0) + cfg.beta * H.sum())
    result = SolveResult(factors=f, state=state)

    for k in range(cfg.max_outer):
        state = update_z(A, FactorPair(W, H), cfg)
        ab = ImplicitAbar(A, FactorPair(W, H), state.scales)
        for _ in range(cfg.max_inner):
            H_old = H.copy()
            result.degenerate_events += update_h(ab, W, H, cfg.beta, rng, cfg.epsilon_col)
            result.degenerate_events += update_w(ab, W, H, cfg.epsilon_col)
            dH = np.linalg.norm(H - H_old)
            if dH <= cfg.tol_inner * max(np.linalg.norm(H_old), np.finfo(float).tiny):
                break
        obj = full_objective(ab, W, H, state, cfg)
        if not np.isfinite(obj):
            raise NumericalError(f"objective became non-finite at outer iteration {k}")
        result.objective_trace.append(obj)
        result.iterations_used = k + 1
        result.state = state
        logger.debug("outer %d objective %.10g", k, obj)
        if _rel_change(obj, prev) < cfg.tol_outer:
            result.converged = True
            break
        prev = obj

    if result.degenerate_events:
        logger.info("%d degenerate factor columns/rows handled", result.degenerate_events)
    result.factors = FactorPair(W, H)
    return result

