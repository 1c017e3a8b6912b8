"""Tensor completion with nuclear-norm-regularized CP factors, solved by ADMM.

The completion variable X must match the observed entries exactly while its
CP reconstruction ``U1 o U2 o U3`` stays close to X; low rank is encouraged
by penalizing the nuclear norms of the (small) factor matrices instead of
the full mode unfoldings, so every SVD in the iteration runs on an
``I_n x R`` matrix.

Each iteration sweeps four blocks:

1. factor matrices ``U_n`` - ridge-regularized least squares against the
   current completion (Gauss-Seidel over n = 1, 2, 3),
2. auxiliary matrices ``M_n`` - singular value thresholding of
   ``U_n - Y_n / mu`` at threshold ``alpha_n / mu``,
3. completion ``X`` - observed entries from the data, the rest from the CP
   reconstruction,
4. multipliers ``Y_n += mu * (M_n - U_n)``,

with the penalty ``mu`` growing geometrically up to a cap. Iteration stops
when the relative change ``||X_new - X_old||_F / ||X_0||_F`` drops to the
configured tolerance.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .tensor_ops import as_mask, as_tensor, cp_reconstruct, fro_norm, khatri_rao, project, unfold


class NumericalError(RuntimeError):
    """Raised when a solve produces non-finite values or an SVD fails."""


@dataclass(frozen=True)
class SolverConfig:
    """Hyperparameters for :func:`complete`.

    rank: column count R of the factor matrices; ``None`` resolves to
        ``min(20, min(dims))`` at solve time.
    alpha: per-mode nuclear-norm weights, must sum to 1.
    lam: weight of the coupling between X and its CP reconstruction.
    mu0, rho, mu_max: penalty schedule ``mu <- min(rho * mu, mu_max)``.
    epsilon: relative-change stopping tolerance, in (0, 1).
    dual_sign: sign of the multiplier offset inside the thresholding
        argument ``U_n + dual_sign * Y_n / mu``; -1 is the augmented-
        Lagrangian form, +1 is provided as a diagnostic switch.
    """

    rank: int | None = None
    alpha: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)
    lam: float = 1.0
    mu0: float = 1e-4
    rho: float = 1.05
    mu_max: float = 1e10
    epsilon: float = 1e-4
    max_iters: int = 500
    seed: int = 0
    dual_sign: float = -1.0

    def __post_init__(self):
        object.__setattr__(self, "alpha", tuple(float(a) for a in self.alpha))
        if self.rank is not None and self.rank < 1:
            raise ValueError("rank must be a positive integer")
        if len(self.alpha) != 3 or any(a < 0 for a in self.alpha):
            raise ValueError("alpha must be three nonnegative weights")
        if abs(sum(self.alpha) - 1.0) > 1e-12:
            raise ValueError("alpha weights must sum to 1")
        if self.lam <= 0:
            raise ValueError("lam must be positive")
        if self.mu0 <= 0 or self.mu_max <= 0:
            raise ValueError("mu0 and mu_max must be positive")
        if self.rho < 1:
            raise ValueError("rho must be >= 1")
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")
        if self.dual_sign not in (-1.0, 1.0):
            raise ValueError("dual_sign must be -1 or +1")


@dataclass(frozen=True, eq=False)
class FactorSet:
    """Solver state: factor matrices U, auxiliaries M, multipliers Y.

    All nine matrices share one column count R; row counts per mode match
    the tensor dims.
    """

    U: tuple[np.ndarray, np.ndarray, np.ndarray]
    M: tuple[np.ndarray, np.ndarray, np.ndarray]
    Y: tuple[np.ndarray, np.ndarray, np.ndarray]

    def __post_init__(self):
        mats = (*self.U, *self.M, *self.Y)
        if len(self.U) != 3 or len(self.M) != 3 or len(self.Y) != 3:
            raise ValueError("FactorSet needs three matrices per group")
        ranks = {m.shape[1] for m in mats if m.ndim == 2}
        if any(m.ndim != 2 for m in mats) or len(ranks) != 1:
            raise ValueError("all factor matrices must be 2-D with one shared column count")
        for n in range(3):
            if not (self.U[n].shape == self.M[n].shape == self.Y[n].shape):
                raise ValueError(f"mode-{n + 1} matrices disagree on shape")

    @property
    def rank(self) -> int:
        return self.U[0].shape[1]

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(u.shape[0] for u in self.U)


@dataclass(frozen=True, eq=False)
class CompletionReport:
    """Outcome of one completion solve.

    residual_history holds the per-iteration relative change of X;
    svd_shapes lists the distinct matrix shapes submitted to SVD.
    """

    completed: np.ndarray
    iterations: int
    converged: bool
    residual_history: tuple[float, ...]
    wall_time: float
    svd_shapes: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if len(self.residual_history) != self.iterations:
            raise ValueError("residual_history length must equal iterations")


def svt(m: np.ndarray, tau: float) -> np.ndarray:
    """Singular value thresholding: shrink every singular value by tau.

    Returns ``U diag(max(s - tau, 0)) V^T`` from the thin SVD of m.
    """
    if tau < 0:
        raise ValueError("threshold must be nonnegative")
    m = np.asarray(m, dtype=np.float64)
    try:
        u, s, vt = np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError as err:
        raise NumericalError(f"SVD failed: {err}") from err
    return (u * np.maximum(s - tau, 0.0)) @ vt


def _kr_others(factors, n: int) -> np.ndarray:
    """Khatri-Rao product of the factors other than mode n (0-based), higher mode first."""
    a, b = (factors[k] for k in (2, 1, 0) if k != n)
    return khatri_rao(a, b)


def init_factors(dims, rank: int, rng: np.random.Generator) -> FactorSet:
    """Seeded i.i.d. normal factors scaled by 1/sqrt(R); M copies U, Y is zero."""
    u = tuple(rng.standard_normal((int(d), rank)) / np.sqrt(rank) for d in dims)
    return FactorSet(
        U=u,
        M=tuple(f.copy() for f in u),
        Y=tuple(np.zeros_like(f) for f in u),
    )


def update_factors(state: FactorSet, x: np.ndarray, lam: float, mu: float) -> FactorSet:
    """One Gauss-Seidel sweep of the factor subproblems.

    Each U_n is the exact minimizer of its ridge-regularized least-squares
    subproblem given the other factors; modes 1, 2, 3 are updated in order,
    later modes seeing the already-updated earlier ones.
    """
    u = list(state.U)
    for n in range(3):
        kr = _kr_others(u, n)
        rhs = lam * (unfold(x, n + 1) @ kr) + mu * state.M[n] + state.Y[n]
        gram = lam * (kr.T @ kr) + mu * np.eye(kr.shape[1])
        if not (np.all(np.isfinite(gram)) and np.all(np.isfinite(rhs))):
            raise NumericalError(f"mode-{n + 1} factor update produced non-finite values")
        u[n] = scipy.linalg.solve(gram, rhs.T, assume_a="pos").T
    return FactorSet(U=tuple(u), M=state.M, Y=state.Y)


def update_auxiliary(state: FactorSet, alpha, mu: float, dual_sign: float = -1.0) -> FactorSet:
    """Shrink each ``U_n + dual_sign * Y_n / mu`` at threshold ``alpha_n / mu``."""
    m = tuple(
        svt(state.U[n] + dual_sign * state.Y[n] / mu, alpha[n] / mu) for n in range(3)
    )
    return FactorSet(U=state.U, M=m, Y=state.Y)


def update_completion(state: FactorSet, truth: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Observed entries copied from the data, the rest from the CP reconstruction."""
    truth = np.asarray(truth, dtype=np.float64)
    mask = as_mask(mask, truth.shape)
    if state.dims != truth.shape:
        raise ValueError(f"factor dims {state.dims} do not match tensor {truth.shape}")
    return np.where(mask, truth, cp_reconstruct(state.U))


def update_multipliers(state: FactorSet, mu: float) -> FactorSet:
    """Dual ascent: ``Y_n += mu * (M_n - U_n)``."""
    y = tuple(state.Y[n] + mu * (state.M[n] - state.U[n]) for n in range(3))
    return FactorSet(U=state.U, M=state.M, Y=y)


def complete(truth, mask, cfg: SolverConfig | None = None) -> CompletionReport:
    """Complete a partially observed tensor; deterministic for a fixed seed.

    ``truth`` supplies the observed entries (values elsewhere are ignored);
    ``mask`` marks the observed positions and must select at least one entry.
    """
    cfg = cfg if cfg is not None else SolverConfig()
    t = as_tensor(truth)
    m = as_mask(mask, t.shape)
    if not m.any():
        raise ValueError("mask selects no observed entries")
    rank = cfg.rank if cfg.rank is not None else min(20, min(t.shape))

    rng = np.random.default_rng(cfg.seed)
    state = init_factors(t.shape, rank, rng)
    x = project(t, m)
    denom = fro_norm(x) or 1.0
    mu = cfg.mu0
    history: list[float] = []
    converged = False

    start = time.perf_counter()
    for k in range(cfg.max_iters):
        try:
            state = update_factors(state, x, cfg.lam, mu)
            state = update_auxiliary(state, cfg.alpha, mu, cfg.dual_sign)
            x_new = update_completion(state, t, m)
            state = update_multipliers(state, mu)
        except NumericalError as err:
            raise NumericalError(f"iteration {k + 1}: {err}") from err
        if not np.all(np.isfinite(x_new)):
            raise NumericalError(f"iteration {k + 1}: completion diverged to non-finite values")
        resid = fro_norm(x_new - x) / denom
        history.append(resid)
        x = x_new
        mu = min(cfg.rho * mu, cfg.mu_max)
        if resid <= cfg.epsilon:
            converged = True
            break
    wall = time.perf_counter() - start

    return CompletionReport(
        completed=x,
        iterations=len(history),
        converged=converged,
        residual_history=tuple(history),
        wall_time=wall,
        svd_shapes=tuple((int(d), rank) for d in t.shape),
    )
