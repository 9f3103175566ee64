"""
Geometry Manager
Segment distances, resampling and the weighted state embedding
"""
import logging
from typing import Optional

import numpy as np
from scipy.interpolate import CubicSpline

from app.models.trajectory import (FILTRATION_MODES, ScalingWeights, Segment,
                                   StateLayout, Trajectory)
from app.utils.errors import DimensionError
from config import Config

logger = logging.getLogger(__name__)


class GeometryManager:
    """Distance and embedding primitives used to build filtrations"""

    @staticmethod
    def segment_distance(s1: Segment, s2: Segment) -> float:
        """
        Minimum Euclidean distance between two closed segments.

        Args:
            s1: First segment
            s2: Second segment (same dimension)

        Returns:
            Distance >= 0; parallel segments resolve to s=0 on the first
        """
        if s1.a.shape != s2.a.shape:
            raise DimensionError(f"Segment dimensions differ: {s1.a.shape} vs {s2.a.shape}")
        d = GeometryManager.segment_distance_matrix(
            s1.a[None], s1.b[None], s2.a[None], s2.b[None])
        return float(d[0, 0])

    @staticmethod
    def segment_distance_matrix(a_start: np.ndarray, a_end: np.ndarray,
                                b_start: np.ndarray, b_end: np.ndarray,
                                block_rows: int = Config.DISTANCE_BLOCK_ROWS) -> np.ndarray:
        """
        Pairwise distances between two families of segments.

        Rows are filled in blocks of ``block_rows`` so memory stays at
        block_rows x n_b x M.
        """
        a_start = np.atleast_2d(np.asarray(a_start, dtype=float))
        a_end = np.atleast_2d(np.asarray(a_end, dtype=float))
        b_start = np.atleast_2d(np.asarray(b_start, dtype=float))
        b_end = np.atleast_2d(np.asarray(b_end, dtype=float))
        if a_start.shape != a_end.shape or b_start.shape != b_end.shape:
            raise DimensionError("Segment start and end arrays must have the same shape")
        if a_start.shape[1] != b_start.shape[1]:
            raise DimensionError(
                f"Segment dimensions differ: {a_start.shape[1]} vs {b_start.shape[1]}")

        out = np.empty((a_start.shape[0], b_start.shape[0]))
        for lo in range(0, a_start.shape[0], block_rows):
            hi = min(lo + block_rows, a_start.shape[0])
            out[lo:hi] = _closest_distance_block(a_start[lo:hi], a_end[lo:hi], b_start, b_end)
        return out

    @staticmethod
    def resample(traj: Trajectory, knots: int) -> Trajectory:
        """
        Cubic resampling onto ``knots`` uniformly spaced knots.

        Endpoints are kept exactly; dt becomes duration / (knots - 1).
        """
        if knots < 2:
            raise ValueError(f"Resampling needs at least 2 knots, got {knots}")
        if knots == traj.horizon:
            return traj.with_states(traj.states.copy(), traj.controls.copy())

        times = traj.times
        new_times = np.linspace(0.0, traj.duration, knots)
        states = CubicSpline(times, traj.states, axis=0)(new_times)
        states[0] = traj.states[0]
        states[-1] = traj.states[-1]

        if traj.control_dim == 0:
            controls = np.zeros((knots - 1, 0))
        elif traj.controls.shape[0] == 1:
            controls = np.repeat(traj.controls, knots - 1, axis=0)
        else:
            controls = CubicSpline(times[:-1], traj.controls, axis=0)(new_times[:-1])
            controls[0] = traj.controls[0]
            if knots > 2:
                controls[-1] = traj.controls[-1]

        return traj.with_states(states, controls, traj.duration / (knots - 1))

    @staticmethod
    def default_weights(layout: StateLayout, mode: str) -> ScalingWeights:
        """Position and orientation columns get 1, velocity columns 0.5"""
        weights = [Config.VELOCITY_WEIGHT if kind == 'velocity' else Config.POSITION_WEIGHT
                   for kind in layout.embedded_kinds(mode)]
        return ScalingWeights.of(weights)

    @staticmethod
    def embed(traj: Trajectory, weights: Optional[ScalingWeights] = None,
              mode: str = 'full_state', layout: Optional[StateLayout] = None) -> Trajectory:
        """
        Map states into the filtration space.

        Angles go to (cos, sin); the selected columns are scaled by ``weights``.
        """
        if mode not in FILTRATION_MODES:
            raise ValueError(f"Unknown filtration mode: {mode}")
        layout = layout or StateLayout.for_task(traj.task, traj.state_dim)
        if layout.state_dim != traj.state_dim:
            raise DimensionError(
                f"Layout covers {layout.state_dim} dimensions, trajectory has {traj.state_dim}")

        columns = []
        for i in layout.indices(mode):
            if i in layout.angular:
                columns.extend([np.cos(traj.states[:, i]), np.sin(traj.states[:, i])])
            else:
                columns.append(traj.states[:, i])
        embedded = np.column_stack(columns)

        weights = weights or GeometryManager.default_weights(layout, mode)
        w = weights.as_array()
        if w.shape[0] != embedded.shape[1]:
            raise DimensionError(
                f"Got {w.shape[0]} weights for {embedded.shape[1]} embedded dimensions")
        return traj.with_states(embedded * w)


def _closest_distance_block(p1, q1, p2, q2) -> np.ndarray:
    """Clamped closest-point parameters for every pair of one row block"""
    eps = Config.SEGMENT_EPS
    d1 = q1 - p1                      # (n1, M)
    d2 = q2 - p2                      # (n2, M)
    r = p1[:, None, :] - p2[None, :, :]

    a = np.einsum('im,im->i', d1, d1)[:, None]
    e = np.einsum('jm,jm->j', d2, d2)[None, :]
    b = d1 @ d2.T
    c = np.einsum('ijm,im->ij', r, d1)
    f = np.einsum('ijm,jm->ij', r, d2)

    a_pt = a <= eps
    e_pt = e <= eps
    a_safe = np.where(a_pt, 1.0, a)
    e_safe = np.where(e_pt, 1.0, e)
    denom = a * e - b * b

    with np.errstate(divide='ignore', invalid='ignore'):
        parallel = denom <= eps * a * e
        s = np.where(parallel, 0.0, (b * f - c * e) / np.where(parallel, 1.0, denom))
        s = np.clip(s, 0.0, 1.0)
        t = (b * s + f) / e_safe
        s = np.where(t < 0.0, np.clip(-c / a_safe, 0.0, 1.0), s)
        s = np.where(t > 1.0, np.clip((b - c) / a_safe, 0.0, 1.0), s)
        t = np.clip(t, 0.0, 1.0)

    # degenerate cases: a point against a segment, or two points
    s_pt_a = np.zeros_like(s)
    t_pt_a = np.clip(f / e_safe, 0.0, 1.0)
    s_pt_e = np.clip(-c / a_safe, 0.0, 1.0)
    t_pt_e = np.zeros_like(t)
    s = np.where(a_pt, s_pt_a, np.where(e_pt, s_pt_e, s))
    t = np.where(a_pt, np.where(e_pt, 0.0, t_pt_a), np.where(e_pt, t_pt_e, t))

    diff = r + s[..., None] * d1[:, None, :] - t[..., None] * d2[None, :, :]
    return np.sqrt(np.einsum('ijm,ijm->ij', diff, diff))
