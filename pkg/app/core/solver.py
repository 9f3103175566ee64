"""
Box-constrained feasibility-driven DDP
"""
import logging
import time
from typing import Optional, Tuple

import numpy as np
from scipy.linalg import cho_solve

from app.core.boxqp import boxqp_feedforward
from app.core.ocp import OCProblem
from app.models.result import BackwardPassTerms, SolverOptions, SolverResult
from app.utils.errors import BoxQPError, RegularizationError, RolloutError

logger = logging.getLogger(__name__)


class BoxFDDPSolver:
    """
    Gauss-Newton DDP that accepts infeasible warm starts.

    Defect gaps between the rolled-out and the given states are closed
    geometrically: a step of size alpha keeps (1 - alpha) of every gap.
    """

    def __init__(self, problem: OCProblem, options: Optional[SolverOptions] = None):
        self.problem = problem
        self.model = problem.model
        self.options = options or SolverOptions()

    def gaps(self, X: np.ndarray, U: np.ndarray) -> np.ndarray:
        """f(X_t, U_t) - X_{t+1}, plus the initial-state gap as row 0"""
        dynamics = self.model.step(X[:-1], U) - X[1:]
        return np.vstack([self.problem.x0 - X[0], dynamics])

    def is_feasible(self, X: np.ndarray, U: np.ndarray) -> bool:
        gap = self.gaps(X, U)
        return bool(np.all(np.isfinite(gap)) and np.max(np.abs(gap)) <= self.options.gap_tol)

    def backward_pass(self, X: np.ndarray, U: np.ndarray, reg: float,
                      k_prev: Optional[np.ndarray] = None) -> BackwardPassTerms:
        """
        Riccati-like recursion with gap-corrected value gradients.

        Raises RegularizationError when Q_uu + reg*I is not positive definite.
        """
        p = self.problem
        m, c = p.state_dim, p.control_dim
        steps = X.shape[0] - 1
        gaps = self.model.step(X[:-1], U) - X[1:]
        FX, FU = self.model.jacobians(X[:-1], U)
        lx, lu, lxx, luu, lux = p.running_derivatives(X[:-1], U)
        Vx, Vxx = p.terminal_derivatives(X[-1])

        k = np.zeros((steps, c))
        K = np.zeros((steps, c, m))
        free_all = np.ones((steps, c), dtype=bool)
        grad_sq = 0.0
        d1 = d2 = 0.0
        eye = np.eye(c)

        for t in range(steps - 1, -1, -1):
            Vx_next = Vx + Vxx @ gaps[t]
            fx, fu = FX[t], FU[t]
            Qx = lx[t] + fx.T @ Vx_next
            Qu = lu[t] + fu.T @ Vx_next
            Vxx_fx = Vxx @ fx
            Qxx = lxx[t] + fx.T @ Vxx_fx
            Quu = luu[t] + fu.T @ Vxx @ fu
            Qux = lux[t] + fu.T @ Vxx_fx

            try:
                qp = boxqp_feedforward(Quu + reg * eye, Qu, U[t], self.model.u_lo,
                                       self.model.u_hi,
                                       None if k_prev is None else k_prev[t])
            except BoxQPError as e:
                raise RegularizationError(str(e)) from e
            kt = qp.x
            Kt = np.zeros((c, m))
            if qp.factor is not None and np.any(qp.free):
                Kt[qp.free] = -cho_solve(qp.factor, Qux[qp.free])
            k[t] = kt
            K[t] = Kt
            free_all[t] = qp.free

            at_lo = (U[t] <= self.model.u_lo) & (Qu > 0)
            at_hi = (U[t] >= self.model.u_hi) & (Qu < 0)
            projected = np.where(at_lo | at_hi, 0.0, Qu)
            grad_sq += float(projected @ projected)

            d1 += float(kt @ Qu)
            d2 += float(0.5 * kt @ Quu @ kt)
            Vx = Qx + Kt.T @ Quu @ kt + Kt.T @ Qu + Qux.T @ kt
            Vxx = Qxx + Kt.T @ Quu @ Kt + Kt.T @ Qux + Qux.T @ Kt
            Vxx = 0.5 * (Vxx + Vxx.T)

        return BackwardPassTerms(k, K, Vx, Vxx, (d1, d2), float(np.sqrt(grad_sq)), free_all)

    def forward_pass(self, X: np.ndarray, U: np.ndarray, terms: BackwardPassTerms,
                     alpha: float) -> Tuple[np.ndarray, np.ndarray, float]:
        """
        Closed-loop rollout with step alpha and gap contraction by (1 - alpha).

        Raises RolloutError on a non-finite state.
        """
        p = self.problem
        gaps = self.model.step(X[:-1], U) - X[1:]
        X_new = np.empty_like(X)
        U_new = np.empty_like(U)
        x = X[0] + alpha * (p.x0 - X[0])
        for t in range(U.shape[0]):
            u = self.model.clamp(U[t] + alpha * terms.k[t] + terms.K[t] @ (x - X[t]))
            X_new[t] = x
            U_new[t] = u
            x = self.model.step(x, u) - (1.0 - alpha) * gaps[t]
            if not np.all(np.isfinite(x)):
                raise RolloutError(f"Non-finite state at step {t + 1} (alpha={alpha:g})")
        X_new[-1] = x
        cost = p.cost(X_new, U_new)
        if not np.isfinite(cost):
            raise RolloutError(f"Non-finite cost (alpha={alpha:g})")
        return X_new, U_new, cost

    def sufficient_decrease(self, cost: float, new_cost: float, terms: BackwardPassTerms,
                            alpha: float) -> bool:
        """
        Armijo test against the predicted decrease -(alpha*d1 + alpha^2*d2).

        The realized decrease must be strictly above accept_ratio times the
        prediction; the default ratio of 0 accepts any strict decrease.
        """
        return cost - new_cost > self.options.accept_ratio * predicted_decrease(terms, alpha)

    def solve(self, X_init: Optional[np.ndarray] = None,
              U_init: Optional[np.ndarray] = None) -> SolverResult:
        """
        Iterate backward and forward passes from a warm start.

        Missing X is the initial state repeated, missing U the neutral
        control. Never raises on numerical failure; the reason is recorded
        in ``failure_reason`` instead.
        """
        p = self.problem
        opts = self.options
        T = p.horizon
        X = np.tile(p.x0, (T, 1)) if X_init is None else np.array(X_init, dtype=float)
        U = np.tile(p.model.neutral_control(), (T - 1, 1)) if U_init is None \
            else np.array(U_init, dtype=float)
        p.check_trajectory(X, U)
        U = self.model.clamp(U)

        started = time.perf_counter()
        trace = []
        feasible = self.is_feasible(X, U)
        cost = p.cost(X, U) if np.all(np.isfinite(X)) else np.inf
        if feasible:
            trace.append((cost, 0.0))

        reg = opts.reg_init
        iterations = 0
        converged = False
        reason = None
        k_prev = None

        while True:
            if iterations >= opts.max_iter:
                reason = 'max_iterations'
                break
            try:
                terms = self.backward_pass(X, U, reg, k_prev)
            except RegularizationError:
                reg = _increase(reg, opts)
                if reg > opts.reg_max:
                    reason = 'regularization_limit'
                    break
                continue
            except (FloatingPointError, ValueError):
                reason = 'non_finite'
                break

            if feasible and terms.gradient_norm < opts.grad_tol:
                converged = True
                break

            accepted = None
            for alpha in opts.step_sizes:
                try:
                    X_new, U_new, new_cost = self.forward_pass(X, U, terms, alpha)
                except RolloutError:
                    continue
                if not feasible or self.sufficient_decrease(cost, new_cost, terms, alpha):
                    accepted = (X_new, U_new, new_cost, alpha)
                    break

            if accepted is None:
                reg = _increase(reg, opts)
                if reg > opts.reg_max:
                    reason = 'line_search'
                    break
                logger.debug("Line search failed; regularization raised to %.3g", reg)
                continue

            X, U, new_cost, alpha = accepted
            predicted = predicted_decrease(terms, alpha)
            if predicted > 0:
                logger.debug("Step realized %.3g of the predicted decrease",
                             (cost - new_cost) / predicted)
            was_feasible = feasible
            feasible = feasible or alpha == 1.0 or self.is_feasible(X, U)
            delta = cost - new_cost
            cost = new_cost
            iterations += 1
            k_prev = terms.k
            reg = max(reg / opts.reg_decrease, opts.reg_min)
            if feasible:
                trace.append((cost, time.perf_counter() - started))
            logger.debug("Iteration %d: cost %.6g alpha %g reg %.3g", iterations, cost, alpha, reg)

            if was_feasible and abs(delta) < opts.cost_tol:
                converged = True
                break

        if not np.isfinite(cost):
            reason = reason or 'non_finite'
        return SolverResult(X, U, iterations, converged, float(cost), trace,
                            None if converged else reason, feasible)


def predicted_decrease(terms: BackwardPassTerms, alpha: float) -> float:
    d1, d2 = terms.expected_decrease
    return -(alpha * d1 + alpha * alpha * d2)


def _increase(reg: float, opts: SolverOptions) -> float:
    return max(reg, opts.reg_min, 1e-12) * opts.reg_increase


def backward_pass(problem: OCProblem, X, U, reg: float) -> BackwardPassTerms:
    return BoxFDDPSolver(problem).backward_pass(np.asarray(X, float), np.asarray(U, float), reg)


def forward_pass(problem: OCProblem, X, U, terms: BackwardPassTerms, alpha: float):
    return BoxFDDPSolver(problem).forward_pass(np.asarray(X, float), np.asarray(U, float),
                                               terms, alpha)


def solve(problem: OCProblem, X_init=None, U_init=None,
          options: Optional[SolverOptions] = None) -> SolverResult:
    return BoxFDDPSolver(problem, options).solve(X_init, U_init)
