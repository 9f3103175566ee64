"""
Shared fixtures
"""
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from app import create_app
from app.models.trajectory import Trajectory
from config import TestingConfig


@pytest.fixture
def app():
    return create_app(TestingConfig)


@pytest.fixture
def runner(app):
    return app.test_cli_runner()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def arc_family(signs, amplitudes, knots=11, radius=2.0):
    """
    Planar arcs from (-radius, 0, 0) to (radius, 0, 0) bulging to +y or -y.

    Every arc is a 3-D position-only trajectory.
    """
    s = np.linspace(0.0, 1.0, knots)
    trajs = []
    for sign, amp in zip(signs, amplitudes):
        states = np.column_stack([
            -radius + 2 * radius * s,
            sign * amp * np.sin(np.pi * s),
            np.zeros_like(s),
        ])
        trajs.append(Trajectory(states, None, 0.1, {'sign': sign}))
    return trajs


@pytest.fixture
def two_families():
    """Three arcs on each side of the origin"""
    return arc_family([1, 1, 1, -1, -1, -1], [1.0, 1.1, 1.2, 1.0, 1.1, 1.2])
