"""
Box-constrained quadratic program solved by projected Newton
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from app.utils.errors import BoxQPError, RegularizationError
from config import Config

logger = logging.getLogger(__name__)

RESULT_MESSAGES = {
    1: 'maximum main iterations exceeded',
    2: 'maximum line-search iterations exceeded',
    3: 'no bounds, returning Newton point',
    4: 'improvement smaller than tolerance',
    5: 'gradient norm smaller than tolerance',
    6: 'all dimensions are clamped',
}


@dataclass
class BoxQPResult:
    x: np.ndarray
    free: np.ndarray
    factor: Optional[tuple]
    iterations: int
    result: int


def solve_boxqp(H: np.ndarray, g: np.ndarray, lower: np.ndarray, upper: np.ndarray,
                x0: Optional[np.ndarray] = None,
                max_iter: int = Config.BOXQP_MAX_ITER) -> BoxQPResult:
    """
    Minimize 0.5 x'Hx + g'x subject to lower <= x <= upper.

    Args:
        H: Positive definite Hessian
        g: Gradient
        lower, upper: Bounds, possibly infinite
        x0: Warm start, clipped into the box

    Returns:
        BoxQPResult whose ``factor`` is the Cholesky factor of the free block
    """
    n = g.shape[0]
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    x = np.clip(x, lower, upper)

    if np.all(np.isinf(lower)) and np.all(np.isinf(upper)):
        factor = _cholesky(H)
        return BoxQPResult(-cho_solve(factor, g), np.ones(n, dtype=bool), factor, 0, 3)

    value = x @ g + 0.5 * x @ H @ x
    free = np.ones(n, dtype=bool)
    factor = None
    result = 0
    iteration = 0
    old_value = 0.0

    for iteration in range(1, max_iter + 1):
        if iteration > 1 and (old_value - value) < Config.BOXQP_MIN_REL_IMPROVE * abs(old_value):
            result = 4
            break
        old_value = value

        grad = g + H @ x
        clamped = ((x <= lower) & (grad > 0)) | ((x >= upper) & (grad < 0))
        old_free = free
        free = ~clamped
        if np.all(clamped):
            result = 6
            break
        if iteration == 1 or np.any(old_free != free):
            factor = _cholesky(H[np.ix_(free, free)])

        grad_norm = np.linalg.norm(grad[free])
        if grad_norm < Config.BOXQP_MIN_GRAD:
            result = 5
            break

        grad_clamped = g + H @ (x * clamped)
        search = np.zeros(n)
        search[free] = -cho_solve(factor, grad_clamped[free]) - x[free]

        sdotg = search @ grad
        if sdotg >= 0:
            break

        step = 1.0
        candidate = np.clip(x + step * search, lower, upper)
        cand_value = candidate @ g + 0.5 * candidate @ H @ candidate
        while (cand_value - old_value) / (step * sdotg) < Config.BOXQP_ARMIJO:
            step *= Config.BOXQP_STEP_DEC
            candidate = np.clip(x + step * search, lower, upper)
            cand_value = candidate @ g + 0.5 * candidate @ H @ candidate
            if step < Config.BOXQP_MIN_STEP:
                result = 2
                break
        if result == 2:
            break
        x = candidate
        value = cand_value
    else:
        result = 1

    if result == 1:
        raise BoxQPError(f"Box QP did not converge in {max_iter} iterations")

    x, free, factor = _polish(H, g, lower, upper, x, free, factor)
    return BoxQPResult(x, free, factor, iteration, result)


def _cholesky(H: np.ndarray):
    try:
        return cho_factor(H, lower=False, check_finite=True)
    except (LinAlgError, ValueError) as e:
        raise RegularizationError(f"Hessian is not positive definite: {e}") from e


def _polish(H, g, lower, upper, x, free, factor):
    """Exact Newton solve on the free set once the active set has settled"""
    grad = g + H @ x
    clamped = ((x <= lower) & (grad > 0)) | ((x >= upper) & (grad < 0))
    free = ~clamped
    if not np.any(free):
        return x, free, None
    factor = _cholesky(H[np.ix_(free, free)])
    polished = x.copy()
    rhs = g[free] + H[np.ix_(free, clamped)] @ x[clamped]
    polished[free] = -cho_solve(factor, rhs)
    if np.all(polished >= lower - 1e-12) and np.all(polished <= upper + 1e-12):
        polished = np.clip(polished, lower, upper)
        return polished, free, factor
    return x, free, factor


def boxqp_feedforward(Q_uu: np.ndarray, Q_u: np.ndarray, u: np.ndarray,
                      u_lo: np.ndarray, u_hi: np.ndarray,
                      k_init: Optional[np.ndarray] = None) -> BoxQPResult:
    """
    Feedforward step k minimizing the control Q-function inside the box.

    The bounds on k are u_lo - u and u_hi - u, so u + k stays feasible.
    Raises RegularizationError when Q_uu (or its free block) is not
    positive definite.
    """
    Q_uu = 0.5 * (Q_uu + Q_uu.T)
    return solve_boxqp(Q_uu, Q_u, u_lo - u, u_hi - u, k_init)
