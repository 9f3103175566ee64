"""
Toy sine-pair study
Touching and crossing trajectory pairs, analysed at full and at coarse resolution
"""
import sys
import os
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from typing import Dict, List, Optional

import numpy as np

from app.core.clustering import ClusterManager
from app.core.geometry import GeometryManager
from app.core.persistence import PersistenceManager
from app.models.cluster import ClusterConfig
from app.models.diagram import PersistenceDiagram
from app.models.trajectory import ScalingWeights, Trajectory
from config import Config


def make_sine_pair(kind: str, settings: Optional[dict] = None) -> List[Trajectory]:
    """
    Two planar trajectories with states (x, y, vx, vy) and constant x-velocity.

    'touching' pairs meet at start, middle and end (two holes between them);
    'crossing' pairs meet only at start and end and cross in the middle.
    """
    settings = settings or Config.TASKS['toy']
    duration = settings['duration']
    knots = settings['knots']
    speed = settings['speed']
    amp = settings['amplitude']
    t = np.linspace(0.0, duration, knots)
    omega = 2 * np.pi / duration

    if kind == 'touching':
        y = amp * np.sin(omega * t) ** 2
        vy = amp * omega * np.sin(2 * omega * t)
    elif kind == 'crossing':
        y = amp * np.sin(omega * t)
        vy = amp * omega * np.cos(omega * t)
    else:
        raise ValueError(f"Unknown toy pair: {kind}")

    x = speed * t
    vx = np.full_like(t, speed)
    dt = duration / (knots - 1)
    pair = []
    for sign in (1.0, -1.0):
        states = np.column_stack([x, sign * y, vx, sign * vy])
        pair.append(Trajectory(states, None, dt, {'task': 'toy', 'pair': kind, 'sign': sign}))
    return pair


class ToySineSimulation:
    """Runs the toy study and records what happened"""

    def __init__(self, settings: Optional[dict] = None, cluster_config: Optional[ClusterConfig] = None,
                 coarse_knots: int = 5, verbose: bool = True):
        self.settings = settings or Config.TASKS['toy']
        self.cluster_config = cluster_config or ClusterConfig()
        self.coarse_knots = coarse_knots
        self.verbose = verbose
        self.event_log = []
        self.diagrams: Dict[str, PersistenceDiagram] = {}

    def log_event(self, event_type: str, description: str):
        self.event_log.append({'type': event_type, 'description': description})
        if self.verbose:
            print(f"{event_type}: {description}")

    def analyze_pair(self, kind: str, knots: Optional[int] = None) -> dict:
        pair = make_sine_pair(kind, self.settings)
        if knots is not None:
            pair = [GeometryManager.resample(t, knots) for t in pair]
        weights = ScalingWeights.of(self.settings['weights'])
        embedded = [GeometryManager.embed(t, weights, self.settings['mode']) for t in pair]

        matrix = PersistenceManager.build_filtration_matrix(
            embedded, self.settings['connect_endpoints'])
        diagram = PersistenceManager.rips_persistence(matrix, max_dim=1)
        num_classes = ClusterManager.extract_num_classes(diagram, self.cluster_config)
        label = kind if knots is None else f"{kind}_T{knots}"
        self.diagrams[label] = diagram

        verdict = {
            'pair': label,
            'knots': pair[0].horizon,
            'h0_essential': diagram.essential_count(0),
            'h1_features': len(diagram.in_dim(1)),
            'h1_retained': num_classes - 1,
            'num_classes': num_classes,
            'h1_lifetimes': diagram.lifetimes(1),
            'separating_distance': PersistenceManager.separating_distance(
                diagram, self.cluster_config),
        }
        self.log_event('PAIR', f"{label}: {verdict['h1_retained']} retained H1 "
                               f"({verdict['h1_features']} total), separating distance "
                               f"{verdict['separating_distance']:.3f}")
        return verdict

    def run(self) -> Dict[str, dict]:
        if self.verbose:
            print("=" * 60)
            print("TOY SINE PAIRS")
            print("=" * 60)
        verdicts = {}
        for kind in ('touching', 'crossing'):
            verdicts[kind] = self.analyze_pair(kind)
            coarse = self.analyze_pair(kind, self.coarse_knots)
            verdicts[coarse['pair']] = coarse
        if self.verbose:
            print("=" * 60)
            for label, verdict in verdicts.items():
                print(f"  {label:14s} retained H1 = {verdict['h1_retained']}")
        return verdicts


if __name__ == '__main__':
    ToySineSimulation().run()
