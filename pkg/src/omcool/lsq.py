"""Small damped least-squares core shared by the spectrum fitters."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class LsqResult:
    x: np.ndarray
    covariance: np.ndarray
    residual_norm: float
    n_iterations: int
    converged: bool

    def __post_init__(self) -> None:
        self.x.setflags(write=False)
        self.covariance.setflags(write=False)


def _numeric_jacobian(residual: Callable[[np.ndarray], np.ndarray], x: np.ndarray) -> np.ndarray:
    r0 = residual(x)
    jac = np.empty((r0.size, x.size))
    for k in range(x.size):
        step = 1e-7 * max(abs(x[k]), 1e-30)
        xp = x.copy()
        xp[k] += step
        jac[:, k] = (residual(xp) - r0) / step
    return jac


def levenberg_marquardt(
    residual: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    jacobian: Callable[[np.ndarray], np.ndarray] | None = None,
    accept: Callable[[np.ndarray], bool] | None = None,
    max_iter: int = 200,
    xtol: float = 1e-12,
) -> LsqResult:
    """Minimize |residual(x)|^2 with a damped Gauss-Newton iteration.

    accept rejects candidate steps that leave the valid domain (for
    positivity constraints). Covariance is the usual linearized estimate
    s^2 (J^T J)^-1 at the solution.
    """
    x = np.asarray(x0, dtype=float).copy()
    if accept is not None and not accept(x):
        raise ValueError("initial point rejected by domain constraint")
    r = residual(x)
    cost = float(r @ r)
    lam = 1e-3
    converged = False
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        jac = jacobian(x) if jacobian is not None else _numeric_jacobian(residual, x)
        jtj = jac.T @ jac
        jtr = jac.T @ r
        stepped = False
        for _ in range(40):
            damped = jtj + lam * np.diag(np.maximum(np.diag(jtj), 1e-300))
            try:
                delta = np.linalg.solve(damped, -jtr)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            x_try = x + delta
            if accept is not None and not accept(x_try):
                lam *= 10.0
                continue
            r_try = residual(x_try)
            cost_try = float(r_try @ r_try)
            if cost_try <= cost:
                rel_step = np.max(np.abs(delta) / np.maximum(np.abs(x), 1e-30))
                x, r, cost = x_try, r_try, cost_try
                lam = max(lam / 3.0, 1e-12)
                stepped = True
                if rel_step < xtol:
                    converged = True
                break
            lam *= 10.0
        if converged or not stepped:
            converged = converged or not stepped
            break

    jac = jacobian(x) if jacobian is not None else _numeric_jacobian(residual, x)
    jtj = jac.T @ jac
    dof = max(r.size - x.size, 1)
    sigma2 = cost / dof
    try:
        cov = sigma2 * np.linalg.inv(jtj)
    except np.linalg.LinAlgError:
        cov = sigma2 * np.linalg.pinv(jtj)
    return LsqResult(
        x=x,
        covariance=cov,
        residual_norm=float(np.sqrt(cost)),
        n_iterations=n_iter,
        converged=converged,
    )
