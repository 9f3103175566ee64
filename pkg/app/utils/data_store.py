"""
On-disk artifact store shared by the pipeline stages
"""
import csv
import json
import logging
from pathlib import Path
from typing import Dict, List, Sequence, Type

import numpy as np

from app.core.learn import KNNRegressor, MLPRegressor, MoEModel
from app.models.cluster import ClusterLabels
from app.models.diagram import DistanceMatrix, FiltrationMatrix, PersistenceDiagram
from app.models.trajectory import Trajectory
from app.utils.errors import ArtifactError

logger = logging.getLogger(__name__)

MODEL_TYPES = {cls.kind: cls for cls in (MLPRegressor, KNNRegressor, MoEModel)}


class ArtifactStore:
    """Reads and writes the files that connect one stage to the next"""

    DATASET = 'dataset.jsonl'
    FILTRATION = 'filtration.twfm'
    DIAGRAM = 'diagram.json'
    LABELS = 'labels.json'
    TRAJECTORY_DISTANCES = 'trajectory_distances.twfm'
    MODELS_DIR = 'models'
    REPORT = 'report.json'
    REPORT_TRACES = 'report_traces.csv'
    SCALING = 'scaling.csv'

    def __init__(self, root):
        self.root = Path(root)

    def path(self, name: str) -> Path:
        return self.root / name

    def exists(self, name: str) -> bool:
        return self.path(name).exists()

    def require(self, name: str) -> Path:
        path = self.path(name)
        if not path.exists():
            raise ArtifactError(f"Missing artifact: {path}")
        return path

    def _prepare(self, name: str) -> Path:
        path = self.path(name)
        path.parent.mkdir(parents=True, exist_ok=True)
        return path

    # Dataset operations
    def write_dataset(self, trajs: Sequence[Trajectory], name: str = DATASET) -> Path:
        path = self._prepare(name)
        with path.open('w', encoding='utf-8') as fh:
            for traj in trajs:
                fh.write(json.dumps(traj.to_dict(), sort_keys=True) + '\n')
        logger.info("Wrote %d trajectories to %s", len(trajs), path)
        return path

    def read_dataset(self, name: str = DATASET) -> List[Trajectory]:
        path = self.require(name)
        trajs = []
        with path.open(encoding='utf-8') as fh:
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    trajs.append(Trajectory.from_dict(json.loads(line)))
                except (json.JSONDecodeError, KeyError, ValueError) as e:
                    raise ArtifactError(f"{path}:{line_no}: bad trajectory record: {e}") from e
        if not trajs:
            raise ArtifactError(f"Dataset is empty: {path}")
        return trajs

    # Matrix operations
    def write_matrix(self, matrix: DistanceMatrix, name: str = FILTRATION) -> Path:
        path = self._prepare(name)
        path.write_bytes(matrix.to_bytes())
        return path

    def read_matrix(self, name: str = FILTRATION,
                    cls: Type[DistanceMatrix] = FiltrationMatrix) -> DistanceMatrix:
        try:
            return cls(DistanceMatrix.parse_bytes(self.require(name).read_bytes()))
        except ValueError as e:
            raise ArtifactError(f"Invalid matrix in {self.path(name)}: {e}") from e

    # Diagram operations
    def write_diagram(self, diagram: PersistenceDiagram, name: str = DIAGRAM) -> Path:
        path = self._prepare(name)
        path.write_text(json.dumps(diagram.to_list(), indent=2))
        return path

    def read_diagram(self, name: str = DIAGRAM) -> PersistenceDiagram:
        try:
            data = json.loads(self.require(name).read_text())
        except json.JSONDecodeError as e:
            raise ArtifactError(f"Invalid JSON in {self.path(name)}: {e}") from e
        return PersistenceDiagram.from_list(data)

    # Label operations
    def write_labels(self, labels: ClusterLabels, name: str = LABELS) -> Path:
        path = self._prepare(name)
        path.write_text(json.dumps(labels.to_dict()))
        return path

    def read_labels(self, name: str = LABELS) -> ClusterLabels:
        try:
            data = json.loads(self.require(name).read_text())
        except json.JSONDecodeError as e:
            raise ArtifactError(f"Invalid JSON in {self.path(name)}: {e}") from e
        return ClusterLabels.from_dict(data)

    # Model operations
    def write_model(self, name: str, model) -> Path:
        """JSON header plus a little-endian float64 parameter blob"""
        header_path = self._prepare(f"{self.MODELS_DIR}/{name}.json")
        blob_path = self.path(f"{self.MODELS_DIR}/{name}.bin")
        params = np.ascontiguousarray(model.parameter_vector(), dtype='<f8')
        header = dict(model.to_header(), parameter_count=int(params.size))
        header_path.write_text(json.dumps(header, indent=2))
        blob_path.write_bytes(params.tobytes())
        return header_path

    def read_model(self, name: str):
        header_path = self.require(f"{self.MODELS_DIR}/{name}.json")
        blob_path = self.require(f"{self.MODELS_DIR}/{name}.bin")
        try:
            header = json.loads(header_path.read_text())
            params = np.frombuffer(blob_path.read_bytes(), dtype='<f8').astype(float)
            if params.size != header['parameter_count']:
                raise ArtifactError(
                    f"{blob_path} holds {params.size} values, header says "
                    f"{header['parameter_count']}")
            return MODEL_TYPES[header['type']].from_header(header, params)
        except (json.JSONDecodeError, KeyError, ValueError) as e:
            raise ArtifactError(f"Invalid model {name}: {e}") from e

    # Report operations
    def write_json(self, name: str, data) -> Path:
        path = self._prepare(name)
        path.write_text(json.dumps(data, indent=2, default=_json_default))
        return path

    def read_json(self, name: str):
        try:
            return json.loads(self.require(name).read_text())
        except json.JSONDecodeError as e:
            raise ArtifactError(f"Invalid JSON in {self.path(name)}: {e}") from e

    def write_csv(self, name: str, header: Sequence[str], rows: Sequence[Sequence]) -> Path:
        path = self._prepare(name)
        with path.open('w', newline='', encoding='utf-8') as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
        return path

    def get_stats(self) -> Dict[str, bool]:
        """Which stage artifacts are present"""
        names = [self.DATASET, self.FILTRATION, self.DIAGRAM, self.LABELS,
                 self.TRAJECTORY_DISTANCES, self.REPORT]
        stats = {name: self.exists(name) for name in names}
        stats['models'] = all(self.exists(f"{self.MODELS_DIR}/{m}.json")
                              for m in ('mlp', 'knn', 'moe'))
        return stats


def _json_default(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"Not JSON serializable: {type(value).__name__}")
