"""Unfolding-based low-rank tensor completion comparator.

Classic high-accuracy LRTC: ADMM over one auxiliary low-rank matrix per
mode-n unfolding, with singular value thresholding applied to the full
``I_n x (prod of other dims)`` matrices. Kept API-compatible with the
CP-factor solver so benchmarks can swap methods; the structural difference
is the size of the matrices each method sends to SVD.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .cpd_lrtc import CompletionReport, NumericalError, svt
from .tensor_ops import as_mask, as_tensor, fold, fro_norm, project, unfold


@dataclass(frozen=True)
class HalrtcConfig:
    """Hyperparameters for :func:`complete_halrtc`.

    mu0=None picks a scale-adaptive start, ``1 / ||X_0||_F``, which places
    the initial SVT threshold near the data's singular-value range; a fixed
    mu0 is honored as given.
    """

    alpha: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)
    mu0: float | None = None
    rho: float = 1.1
    mu_max: float = 1e10
    epsilon: float = 1e-4
    max_iters: int = 500

    def __post_init__(self):
        object.__setattr__(self, "alpha", tuple(float(a) for a in self.alpha))
        if len(self.alpha) != 3 or any(a < 0 for a in self.alpha):
            raise ValueError("alpha must be three nonnegative weights")
        if abs(sum(self.alpha) - 1.0) > 1e-12:
            raise ValueError("alpha weights must sum to 1")
        if self.mu0 is not None and self.mu0 <= 0:
            raise ValueError("mu0 must be positive")
        if self.rho < 1:
            raise ValueError("rho must be >= 1")
        if self.mu_max <= 0:
            raise ValueError("mu_max must be positive")
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")


def complete_halrtc(truth, mask, cfg: HalrtcConfig | None = None) -> CompletionReport:
    """Complete a partially observed tensor by unfolding-based ADMM.

    Per iteration and mode n: shrink ``unfold(X, n) + unfold(Y_n, n) / mu``,
    average the refolded estimates into X, re-impose the observed entries,
    then step the duals by the remaining mode residuals.
    """
    cfg = cfg if cfg is not None else HalrtcConfig()
    t = as_tensor(truth)
    m = as_mask(mask, t.shape)
    if not m.any():
        raise ValueError("mask selects no observed entries")
    dims = t.shape

    x = project(t, m)
    denom = fro_norm(x) or 1.0
    mu = cfg.mu0 if cfg.mu0 is not None else 1.0 / max(fro_norm(x), 1e-12)
    ys = [np.zeros(dims) for _ in range(3)]
    history: list[float] = []
    converged = False

    start = time.perf_counter()
    for k in range(cfg.max_iters):
        blended = np.zeros(dims)
        folded = []
        try:
            for n in range(3):
                yn = unfold(ys[n], n + 1)
                mn = svt(unfold(x, n + 1) + yn / mu, cfg.alpha[n] / mu)
                folded.append(fold(mn, n + 1, dims))
                blended += fold(mn - yn / mu, n + 1, dims)
        except NumericalError as err:
            raise NumericalError(f"iteration {k + 1}: {err}") from err
        x_new = np.where(m, t, blended / 3.0)
        for n in range(3):
            ys[n] = ys[n] + mu * (x_new - folded[n])
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

    sizes = tuple(
        (dims[n], int(np.prod([d for j, d in enumerate(dims) if j != n]))) for n in range(3)
    )
    return CompletionReport(
        completed=x,
        iterations=len(history),
        converged=converged,
        residual_history=tuple(history),
        wall_time=wall,
        svd_shapes=sizes,
    )
