"""
Training Service
Fits the three warm-start predictors on a labelled dataset
"""
import logging
from dataclasses import dataclass
from typing import Optional, Sequence

from app.core.learn import (KNNRegressor, MLPRegressor, MoEModel, matched_hidden_size,
                            moe_parameter_count, train_moe)
from app.models.cluster import ClusterLabels
from app.models.dataset import WarmStartDataset
from app.models.run_config import TrainingOptions
from app.models.trajectory import Trajectory

logger = logging.getLogger(__name__)


@dataclass
class WarmStartModels:
    mlp: MLPRegressor
    knn: KNNRegressor
    moe: MoEModel

    def items(self):
        return [('mlp', self.mlp), ('knn', self.knn), ('moe', self.moe)]


class TrainingService:
    """Service for training warm-start models"""

    def __init__(self, options: Optional[TrainingOptions] = None, expert_hidden: int = 50,
                 gating_hidden: int = 50, single_hidden: Optional[int] = None,
                 knn_max_k: int = 10, val_fraction: float = 0.15, test_fraction: float = 0.15):
        self.options = options or TrainingOptions()
        self.expert_hidden = expert_hidden
        self.gating_hidden = gating_hidden
        self.single_hidden = single_hidden
        self.knn_max_k = knn_max_k
        self.val_fraction = val_fraction
        self.test_fraction = test_fraction

    def build_dataset(self, trajs: Sequence[Trajectory], labels: ClusterLabels
                      ) -> WarmStartDataset:
        if len(labels) != len(trajs):
            raise ValueError(f"{len(labels)} labels for {len(trajs)} trajectories")
        return WarmStartDataset.from_trajectories(trajs, labels.labels, self.options.seed,
                                                  self.val_fraction, self.test_fraction)

    def single_mlp_width(self, dataset: WarmStartDataset, k: int) -> int:
        if self.single_hidden is not None:
            return self.single_hidden
        target = moe_parameter_count(dataset.input_dim, dataset.output_dim, k,
                                     self.expert_hidden, self.gating_hidden)
        return matched_hidden_size(dataset.input_dim, dataset.output_dim, target)

    def train_all(self, dataset: WarmStartDataset, k: int) -> WarmStartModels:
        """
        Train the single MLP, the KNN baseline and the mixture of experts.

        The single MLP defaults to the width whose parameter count matches
        the mixture.
        """
        train_x, train_y = dataset.split('train')
        val_x, val_y = dataset.split('val')
        val_labels = dataset.labels[dataset.val_idx]
        train_labels = dataset.labels[dataset.train_idx]

        width = self.single_mlp_width(dataset, k)
        mlp = MLPRegressor(dataset.input_dim, dataset.output_dim, width, self.options.seed)
        mlp.fit(train_x, train_y, val_x, val_y, self.options)

        knn = KNNRegressor().fit(train_x, train_y)
        knn.select_k(val_x, val_y, self.knn_max_k)

        moe = train_moe(train_x, train_y, train_labels, k, dataset.shape,
                        (val_x, val_y, val_labels), self.options,
                        self.expert_hidden, self.gating_hidden)
        logger.info("Trained MLP (%d parameters), KNN (k=%d) and MoE (%d parameters)",
                    mlp.parameter_count(), knn.k, moe.parameter_count())
        return WarmStartModels(mlp, knn, moe)
