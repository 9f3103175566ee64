"""
Discrete-time dynamics models
"""
import logging
from typing import Optional, Sequence, Tuple

import numpy as np

from app.utils.errors import DimensionError, RolloutError
from config import Config

logger = logging.getLogger(__name__)


class DynamicsModel:
    """
    Base class: x' = f(x, u) over one step of length dt.

    Subclasses supply ``continuous``; the step integrates it with RK4.
    Every method accepts a leading batch dimension.
    """

    state_dim = 0
    control_dim = 0
    name = 'model'

    def __init__(self, dt: float, u_lo: Sequence[float], u_hi: Sequence[float],
                 fd_step: float = Config.FD_STEP):
        if not dt > 0:
            raise ValueError(f"dt must be positive: {dt}")
        self.dt = float(dt)
        self.u_lo = np.asarray(u_lo, dtype=float)
        self.u_hi = np.asarray(u_hi, dtype=float)
        if self.u_lo.shape != (self.control_dim,) or self.u_hi.shape != (self.control_dim,):
            raise DimensionError(f"Control bounds must have shape ({self.control_dim},)")
        if np.any(self.u_lo > self.u_hi):
            raise ValueError("Lower control bound exceeds upper bound")
        self.fd_step = fd_step

    def continuous(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def neutral_control(self) -> np.ndarray:
        return np.clip(np.zeros(self.control_dim), self.u_lo, self.u_hi)

    def clamp(self, u: np.ndarray) -> np.ndarray:
        return np.clip(u, self.u_lo, self.u_hi)

    def _check(self, x, u):
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        if x.shape[-1] != self.state_dim or u.shape[-1] != self.control_dim:
            raise DimensionError(
                f"{self.name} expects state dim {self.state_dim} and control dim "
                f"{self.control_dim}, got {x.shape} and {u.shape}")
        return x, u

    def step(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        x, u = self._check(x, u)
        h = self.dt
        k1 = self.continuous(x, u)
        k2 = self.continuous(x + 0.5 * h * k1, u)
        k3 = self.continuous(x + 0.5 * h * k2, u)
        k4 = self.continuous(x + h * k3, u)
        return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    def jacobians(self, X: np.ndarray, U: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Central finite-difference step Jacobians for a batch of (x, u) pairs"""
        X, U = self._check(X, U)
        X = np.atleast_2d(X)
        U = np.atleast_2d(U)
        n, m, c = X.shape[0], self.state_dim, self.control_dim
        h = self.fd_step

        eye = np.eye(m + c) * h
        z = np.concatenate([X, U], axis=1)                       # (n, m+c)
        plus = z[:, None, :] + eye[None]                         # (n, m+c, m+c)
        minus = z[:, None, :] - eye[None]
        stacked = np.concatenate([plus, minus], axis=1).reshape(-1, m + c)
        out = self.step(stacked[:, :m], stacked[:, m:]).reshape(n, 2, m + c, m)
        jac = (out[:, 0] - out[:, 1]) / (2.0 * h)                # (n, m+c, m)
        jac = np.swapaxes(jac, 1, 2)                             # (n, m, m+c)
        return jac[:, :, :m], jac[:, :, m:]

    def derivatives(self, x: np.ndarray, u: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        fx, fu = self.jacobians(np.asarray(x)[None], np.asarray(u)[None])
        return fx[0], fu[0]

    def rollout(self, x0: np.ndarray, U: np.ndarray) -> np.ndarray:
        U = np.asarray(U, dtype=float)
        X = np.empty((U.shape[0] + 1, self.state_dim))
        X[0] = x0
        for t in range(U.shape[0]):
            X[t + 1] = self.step(X[t], U[t])
            if not np.all(np.isfinite(X[t + 1])):
                raise RolloutError(f"{self.name} rollout diverged at step {t}")
        return X

    def __repr__(self):
        return f"<{type(self).__name__} dt={self.dt:g} M={self.state_dim} C={self.control_dim}>"


class CartpoleModel(DynamicsModel):
    """
    Cart with a free pole; theta = 0 hangs down, theta = pi is upright.

    State (x, theta, x_dot, theta_dot); control is the horizontal force.
    """

    state_dim = 4
    control_dim = 1
    name = 'cartpole'

    def __init__(self, dt: float = 0.02, u_lo=(-10.0,), u_hi=(10.0,),
                 mass_cart: float = Config.CARTPOLE_MASS_CART,
                 mass_pole: float = Config.CARTPOLE_MASS_POLE,
                 length: float = Config.CARTPOLE_POLE_LENGTH,
                 gravity: float = Config.GRAVITY):
        super().__init__(dt, u_lo, u_hi)
        self.mc = mass_cart
        self.mp = mass_pole
        self.l = length
        self.g = gravity

    def continuous(self, x, u):
        theta, x_dot, theta_dot = x[..., 1], x[..., 2], x[..., 3]
        f = u[..., 0]
        s, c = np.sin(theta), np.cos(theta)
        denom = self.mc + self.mp * s ** 2
        x_acc = (f + self.mp * s * (self.l * theta_dot ** 2 + self.g * c)) / denom
        theta_acc = (-f * c - self.mp * self.l * theta_dot ** 2 * c * s
                     - (self.mc + self.mp) * self.g * s) / (self.l * denom)
        return np.stack([x_dot, theta_dot, x_acc, theta_acc], axis=-1)

    def energy(self, x: np.ndarray) -> float:
        """Total mechanical energy, potential zero at the pivot height"""
        _, theta, x_dot, theta_dot = x
        kinetic = (0.5 * (self.mc + self.mp) * x_dot ** 2
                   + self.mp * self.l * x_dot * theta_dot * np.cos(theta)
                   + 0.5 * self.mp * self.l ** 2 * theta_dot ** 2)
        return float(kinetic - self.mp * self.g * self.l * np.cos(theta))


class QuadrotorModel(DynamicsModel):
    """
    Rigid-body quadrotor with four rotor thrusts.

    State: position (3), ZYX Euler angles (roll, pitch, yaw), world-frame
    velocity (3) and body-frame angular rate (3).
    """

    state_dim = 12
    control_dim = 4
    name = 'quadrotor'

    def __init__(self, dt: float = 0.05, u_lo=(0.0,) * 4, u_hi=(5.0,) * 4,
                 mass: float = Config.QUADROTOR_MASS,
                 arm: float = Config.QUADROTOR_ARM,
                 inertia: Sequence[float] = Config.QUADROTOR_INERTIA,
                 torque_coeff: float = Config.QUADROTOR_TORQUE_COEFF,
                 gravity: float = Config.GRAVITY):
        super().__init__(dt, u_lo, u_hi)
        self.mass = mass
        self.arm = arm
        self.inertia = np.asarray(inertia, dtype=float)
        self.torque_coeff = torque_coeff
        self.g = gravity

    @property
    def hover_thrust(self) -> np.ndarray:
        return np.full(4, self.mass * self.g / 4.0)

    def neutral_control(self) -> np.ndarray:
        return self.clamp(self.hover_thrust)

    def continuous(self, x, u):
        phi, theta, psi = x[..., 3], x[..., 4], x[..., 5]
        vel = x[..., 6:9]
        p, q, r = x[..., 9], x[..., 10], x[..., 11]
        f1, f2, f3, f4 = u[..., 0], u[..., 1], u[..., 2], u[..., 3]

        sphi, cphi = np.sin(phi), np.cos(phi)
        sth, cth = np.sin(theta), np.cos(theta)
        spsi, cpsi = np.sin(psi), np.cos(psi)

        thrust = (f1 + f2 + f3 + f4) / self.mass
        acc = np.stack([
            thrust * (cpsi * sth * cphi + spsi * sphi),
            thrust * (spsi * sth * cphi - cpsi * sphi),
            thrust * cth * cphi - self.g,
        ], axis=-1)

        phi_dot = p + (sphi * q + cphi * r) * sth / cth
        theta_dot = cphi * q - sphi * r
        psi_dot = (sphi * q + cphi * r) / cth

        jx, jy, jz = self.inertia
        tau_x = self.arm * (f2 - f4)
        tau_y = self.arm * (f3 - f1)
        tau_z = self.torque_coeff * (f1 - f2 + f3 - f4)
        p_dot = (tau_x - (jz - jy) * q * r) / jx
        q_dot = (tau_y - (jx - jz) * p * r) / jy
        r_dot = (tau_z - (jy - jx) * p * q) / jz

        return np.concatenate([
            vel,
            np.stack([phi_dot, theta_dot, psi_dot], axis=-1),
            acc,
            np.stack([p_dot, q_dot, r_dot], axis=-1),
        ], axis=-1)


class LinearModel(DynamicsModel):
    """x' = x + dt (A x + B u), with exact Jacobians"""

    name = 'linear'

    def __init__(self, A, B, dt: float = 1.0, u_lo=None, u_hi=None):
        A = np.asarray(A, dtype=float)
        B = np.asarray(B, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or B.ndim != 2 or B.shape[0] != A.shape[0]:
            raise DimensionError(f"Incompatible A {A.shape} and B {B.shape}")
        self.state_dim = A.shape[0]
        self.control_dim = B.shape[1]
        self.A = A
        self.B = B
        u_lo = np.full(self.control_dim, -np.inf) if u_lo is None else u_lo
        u_hi = np.full(self.control_dim, np.inf) if u_hi is None else u_hi
        super().__init__(dt, u_lo, u_hi)
        self.F = np.eye(self.state_dim) + self.dt * A
        self.G = self.dt * B

    def neutral_control(self) -> np.ndarray:
        return self.clamp(np.zeros(self.control_dim))

    def step(self, x, u):
        x, u = self._check(x, u)
        return x @ self.F.T + u @ self.G.T

    def jacobians(self, X, U):
        X, U = self._check(X, U)
        n = np.atleast_2d(X).shape[0]
        return np.broadcast_to(self.F, (n,) + self.F.shape).copy(), \
            np.broadcast_to(self.G, (n,) + self.G.shape).copy()


def make_model(name: str, settings: Optional[dict] = None) -> DynamicsModel:
    """Dynamics model for a task settings block"""
    settings = settings or {}
    bounds = settings.get('control_bounds')
    kwargs = {'dt': settings['dt']} if 'dt' in settings else {}
    if bounds is not None:
        kwargs['u_lo'], kwargs['u_hi'] = bounds
    if name == 'cartpole':
        return CartpoleModel(**kwargs)
    if name == 'quadrotor':
        return QuadrotorModel(**kwargs)
    raise ValueError(f"Unknown dynamics model: {name}")
