"""
Warm-start predictors: single MLP, k-nearest neighbours and mixture of experts
"""
import copy
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import torch
from scipy.spatial import cKDTree
from torch import nn
from torch.nn.utils import parameters_to_vector, vector_to_parameters

from app.models.run_config import TrainingOptions
from app.models.trajectory import TrajectoryShape
from app.utils.errors import DimensionError, TrainingError

logger = logging.getLogger(__name__)

DTYPE = torch.float64


class MLP(nn.Module):
    """Fully connected ReLU network in float64"""

    def __init__(self, layer_sizes: Sequence[int]):
        super().__init__()
        if len(layer_sizes) < 2 or any(int(s) < 1 for s in layer_sizes):
            raise ValueError(f"Invalid layer sizes: {layer_sizes}")
        self.layer_sizes = [int(s) for s in layer_sizes]
        layers: List[nn.Module] = []
        for i, (n_in, n_out) in enumerate(zip(self.layer_sizes[:-1], self.layer_sizes[1:])):
            layers.append(nn.Linear(n_in, n_out, dtype=DTYPE))
            if i < len(self.layer_sizes) - 2:
                layers.append(nn.ReLU())
        self.net = nn.Sequential(*layers)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.net(x)

    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.parameters())

    def parameter_vector(self) -> np.ndarray:
        return parameters_to_vector(self.parameters()).detach().numpy().copy()

    def load_parameter_vector(self, vector: np.ndarray):
        vector = np.asarray(vector, dtype=float)
        if vector.shape != (self.parameter_count(),):
            raise DimensionError(
                f"Expected {self.parameter_count()} parameters, got {vector.shape}")
        vector_to_parameters(torch.as_tensor(vector, dtype=DTYPE), self.parameters())


def mlp_parameter_count(layer_sizes: Sequence[int]) -> int:
    return sum((a + 1) * b for a, b in zip(layer_sizes[:-1], layer_sizes[1:]))


def matched_hidden_size(n_in: int, n_out: int, target: int) -> int:
    """Width of a one-hidden-layer MLP whose parameter count is closest to ``target``"""
    per_unit = n_in + 1 + n_out
    width = max(1, int(round((target - n_out) / per_unit)))
    candidates = [w for w in (width - 1, width, width + 1) if w >= 1]
    return min(candidates, key=lambda w: (abs(mlp_parameter_count([n_in, w, n_out]) - target), w))


@dataclass
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, data: np.ndarray) -> 'Standardizer':
        data = np.asarray(data, dtype=float)
        std = data.std(axis=0)
        return cls(data.mean(axis=0), np.where(std < 1e-8, 1.0, std))

    def transform(self, data: np.ndarray) -> np.ndarray:
        return (np.asarray(data, dtype=float) - self.mean) / self.std

    def inverse(self, data: np.ndarray) -> np.ndarray:
        return np.asarray(data, dtype=float) * self.std + self.mean

    def to_dict(self) -> dict:
        return {'mean': self.mean.tolist(), 'std': self.std.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> 'Standardizer':
        return cls(np.asarray(data['mean'], dtype=float), np.asarray(data['std'], dtype=float))


@dataclass
class TrainingResult:
    train_loss: float
    val_loss: Optional[float]
    epochs_run: int
    best_epoch: int
    history: List[float] = field(default_factory=list)


def _fit(net: nn.Module, inputs: torch.Tensor, targets: torch.Tensor,
         val_inputs: Optional[torch.Tensor], val_targets: Optional[torch.Tensor],
         loss_fn: nn.Module, opts: TrainingOptions) -> TrainingResult:
    n = inputs.shape[0]
    if n == 0:
        raise TrainingError("Empty training set")
    generator = torch.Generator().manual_seed(opts.seed)
    optimizer = torch.optim.Adam(net.parameters(), lr=opts.learning_rate,
                                 betas=(0.9, 0.999), eps=1e-8)
    has_val = val_inputs is not None and val_inputs.shape[0] > 0

    def evaluate(x, y) -> float:
        with torch.no_grad():
            return float(loss_fn(net(x), y))

    best_val = evaluate(val_inputs, val_targets) if has_val else None
    best_state = copy.deepcopy(net.state_dict())
    best_epoch = 0
    history = []
    epoch = 0

    for epoch in range(1, opts.max_epochs + 1):
        net.train()
        perm = torch.randperm(n, generator=generator)
        for lo in range(0, n, opts.batch_size):
            batch = perm[lo:lo + opts.batch_size]
            optimizer.zero_grad()
            loss = loss_fn(net(inputs[batch]), targets[batch])
            if not torch.isfinite(loss):
                raise TrainingError(f"Loss became non-finite at epoch {epoch}: {float(loss)}")
            loss.backward()
            optimizer.step()
        net.eval()

        if has_val:
            val = evaluate(val_inputs, val_targets)
            history.append(val)
            if val < best_val:
                best_val = val
                best_epoch = epoch
                best_state = copy.deepcopy(net.state_dict())
            elif epoch - best_epoch >= opts.patience:
                logger.debug("Early stopping at epoch %d (best %d)", epoch, best_epoch)
                break
        else:
            history.append(evaluate(inputs, targets))

    if has_val:
        net.load_state_dict(best_state)
    else:
        best_epoch = epoch
    net.eval()
    return TrainingResult(evaluate(inputs, targets), best_val, epoch, best_epoch, history)


def _tensor(data) -> torch.Tensor:
    return torch.as_tensor(np.asarray(data, dtype=float), dtype=DTYPE)


def train_mlp(net: MLP, inputs, targets, val_inputs=None, val_targets=None,
              opts: Optional[TrainingOptions] = None) -> TrainingResult:
    """Adam on mean squared error with early stopping on the validation loss"""
    opts = opts or TrainingOptions()
    torch.manual_seed(opts.seed)
    return _fit(net, _tensor(inputs), _tensor(targets),
                None if val_inputs is None else _tensor(val_inputs),
                None if val_targets is None else _tensor(val_targets),
                nn.MSELoss(), opts)


def train_classifier(net: MLP, inputs, labels, val_inputs=None, val_labels=None,
                     opts: Optional[TrainingOptions] = None) -> TrainingResult:
    """Adam on cross-entropy; the network outputs one logit per class"""
    opts = opts or TrainingOptions()
    labels = torch.as_tensor(np.asarray(labels), dtype=torch.long)
    val = None if val_labels is None else torch.as_tensor(np.asarray(val_labels), dtype=torch.long)
    return _fit(net, _tensor(inputs), labels,
                None if val_inputs is None else _tensor(val_inputs), val,
                nn.CrossEntropyLoss(), opts)


class MLPRegressor:
    """One-hidden-layer MLP with input and target standardization"""

    kind = 'mlp'

    def __init__(self, n_in: int, n_out: int, hidden: int, seed: int = 0):
        torch.manual_seed(seed)
        self.net = MLP([n_in, hidden, n_out])
        self.input_norm = Standardizer(np.zeros(n_in), np.ones(n_in))
        self.target_norm = Standardizer(np.zeros(n_out), np.ones(n_out))

    @property
    def layer_sizes(self) -> List[int]:
        return self.net.layer_sizes

    def parameter_count(self) -> int:
        return self.net.parameter_count()

    def fit(self, inputs, targets, val_inputs=None, val_targets=None,
            opts: Optional[TrainingOptions] = None) -> TrainingResult:
        self.input_norm = Standardizer.fit(inputs)
        self.target_norm = Standardizer.fit(targets)
        has_val = val_inputs is not None and len(val_inputs) > 0
        result = train_mlp(
            self.net, self.input_norm.transform(inputs), self.target_norm.transform(targets),
            self.input_norm.transform(val_inputs) if has_val else None,
            self.target_norm.transform(val_targets) if has_val else None, opts)
        logger.info("MLP %s trained: train %.4g val %s after %d epochs", self.layer_sizes,
                    result.train_loss, result.val_loss, result.epochs_run)
        return result

    def predict(self, inputs) -> np.ndarray:
        inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
        with torch.no_grad():
            out = self.net(_tensor(self.input_norm.transform(inputs))).numpy()
        return self.target_norm.inverse(out)

    def to_header(self) -> dict:
        return {'type': self.kind, 'layer_sizes': self.layer_sizes,
                'input_norm': self.input_norm.to_dict(),
                'target_norm': self.target_norm.to_dict()}

    def parameter_vector(self) -> np.ndarray:
        return self.net.parameter_vector()

    @classmethod
    def from_header(cls, header: dict, params: np.ndarray) -> 'MLPRegressor':
        n_in, hidden, n_out = header['layer_sizes']
        model = cls(n_in, n_out, hidden)
        model.net.load_parameter_vector(params)
        model.input_norm = Standardizer.from_dict(header['input_norm'])
        model.target_norm = Standardizer.from_dict(header['target_norm'])
        return model


class KNNRegressor:
    """Mean target of the k nearest training inputs (Euclidean)"""

    kind = 'knn'

    def __init__(self, k: int = 1):
        if k < 1:
            raise ValueError(f"k must be at least 1, got {k}")
        self.k = k
        self.inputs = None
        self.targets = None
        self.tree = None

    def fit(self, inputs, targets) -> 'KNNRegressor':
        self.inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
        self.targets = np.atleast_2d(np.asarray(targets, dtype=float))
        if self.inputs.shape[0] == 0:
            raise TrainingError("Empty training set")
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise DimensionError("Inputs and targets differ in length")
        self.tree = cKDTree(self.inputs)
        return self

    def predict(self, inputs, k: Optional[int] = None) -> np.ndarray:
        if self.tree is None:
            raise TrainingError("KNN model has not been fitted")
        k = min(k or self.k, self.inputs.shape[0])
        query = np.atleast_2d(np.asarray(inputs, dtype=float))
        _, idx = self.tree.query(query, k=k)
        idx = np.asarray(idx).reshape(query.shape[0], k)
        return self.targets[idx].mean(axis=1)

    def select_k(self, val_inputs, val_targets, max_k: int = 10) -> int:
        """Smallest k in 1..max_k with the lowest validation error"""
        if val_inputs is None or len(val_inputs) == 0:
            return self.k
        val_targets = np.atleast_2d(np.asarray(val_targets, dtype=float))
        errors = []
        for k in range(1, min(max_k, self.inputs.shape[0]) + 1):
            errors.append(float(np.mean((self.predict(val_inputs, k) - val_targets) ** 2)))
        self.k = int(np.argmin(errors)) + 1
        logger.info("KNN selected k=%d (validation errors %s)", self.k,
                    ', '.join(f"{e:.4g}" for e in errors))
        return self.k

    def to_header(self) -> dict:
        return {'type': self.kind, 'k': self.k, 'inputs_shape': list(self.inputs.shape),
                'targets_shape': list(self.targets.shape)}

    def parameter_vector(self) -> np.ndarray:
        return np.concatenate([self.inputs.ravel(), self.targets.ravel()])

    @classmethod
    def from_header(cls, header: dict, params: np.ndarray) -> 'KNNRegressor':
        n_inputs = int(np.prod(header['inputs_shape']))
        inputs = params[:n_inputs].reshape(header['inputs_shape'])
        targets = params[n_inputs:].reshape(header['targets_shape'])
        return cls(header['k']).fit(inputs, targets)


def knn_predict(train_inputs, train_targets, query, k: int) -> np.ndarray:
    return KNNRegressor(k).fit(train_inputs, train_targets).predict(query)[0]


class MoEModel:
    """
    One expert per homotopy class and a softmax gate over them.

    Prediction takes the hard argmax of the gate, so the output is always
    one expert's trajectory and never a blend across classes.
    """

    kind = 'moe'

    def __init__(self, experts: List[MLPRegressor], gating: MLP, input_norm: Standardizer,
                 shape: TrajectoryShape):
        if len(experts) != gating.layer_sizes[-1]:
            raise DimensionError(
                f"Gate has {gating.layer_sizes[-1]} outputs for {len(experts)} experts")
        self.experts = experts
        self.gating = gating
        self.input_norm = input_norm
        self.shape = shape

    @property
    def k(self) -> int:
        return len(self.experts)

    def parameter_count(self) -> int:
        return self.gating.parameter_count() + sum(e.parameter_count() for e in self.experts)

    def gate_probabilities(self, inputs) -> np.ndarray:
        inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
        with torch.no_grad():
            logits = self.gating(_tensor(self.input_norm.transform(inputs)))
            return torch.softmax(logits, dim=1).numpy()

    def select(self, inputs) -> np.ndarray:
        return np.argmax(self.gate_probabilities(inputs), axis=1)

    def predict(self, inputs) -> np.ndarray:
        inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
        choice = self.select(inputs)
        out = np.empty((inputs.shape[0], self.shape.size))
        for expert_id in np.unique(choice):
            rows = choice == expert_id
            out[rows] = self.experts[expert_id].predict(inputs[rows])
        return out

    def to_header(self) -> dict:
        return {'type': self.kind, 'k': self.k, 'shape': self.shape.to_dict(),
                'gating_layer_sizes': self.gating.layer_sizes,
                'input_norm': self.input_norm.to_dict(),
                'experts': [e.to_header() for e in self.experts]}

    def parameter_vector(self) -> np.ndarray:
        return np.concatenate([self.gating.parameter_vector()]
                              + [e.parameter_vector() for e in self.experts])

    @classmethod
    def from_header(cls, header: dict, params: np.ndarray) -> 'MoEModel':
        gating = MLP(header['gating_layer_sizes'])
        offset = gating.parameter_count()
        gating.load_parameter_vector(params[:offset])
        experts = []
        for expert_header in header['experts']:
            count = mlp_parameter_count(expert_header['layer_sizes'])
            experts.append(MLPRegressor.from_header(expert_header, params[offset:offset + count]))
            offset += count
        return cls(experts, gating, Standardizer.from_dict(header['input_norm']),
                   TrajectoryShape(**header['shape']))


def moe_parameter_count(n_in: int, n_out: int, k: int, expert_hidden: int,
                        gating_hidden: int) -> int:
    return (k * mlp_parameter_count([n_in, expert_hidden, n_out])
            + mlp_parameter_count([n_in, gating_hidden, k]))


def train_moe(inputs, targets, labels, k: int, shape: TrajectoryShape,
              val: Optional[Tuple[np.ndarray, np.ndarray, np.ndarray]] = None,
              opts: Optional[TrainingOptions] = None, expert_hidden: int = 50,
              gating_hidden: int = 50) -> MoEModel:
    """
    Train one expert per cluster and a gate that predicts the cluster.

    Args:
        inputs, targets, labels: Training split
        k: Number of clusters
        shape: Layout of the flattened targets
        val: Optional (inputs, targets, labels) validation split

    Returns:
        MoEModel
    """
    opts = opts or TrainingOptions()
    inputs = np.asarray(inputs, dtype=float)
    targets = np.asarray(targets, dtype=float)
    labels = np.asarray(labels, dtype=int)
    if inputs.shape[0] == 0:
        raise TrainingError("Empty training set")
    if labels.shape[0] != inputs.shape[0]:
        raise DimensionError("One label per training input is required")
    if labels.min() < 0 or labels.max() >= k:
        raise ValueError(f"Labels must lie in [0, {k})")

    experts = []
    for cluster in range(k):
        rows = labels == cluster
        if not np.any(rows):
            raise TrainingError(f"Cluster {cluster} has no training members")
        expert = MLPRegressor(inputs.shape[1], targets.shape[1], expert_hidden,
                              seed=opts.seed + cluster)
        val_rows = None if val is None else val[2] == cluster
        expert.fit(inputs[rows], targets[rows],
                   None if val is None else val[0][val_rows],
                   None if val is None else val[1][val_rows], opts)
        experts.append(expert)

    input_norm = Standardizer.fit(inputs)
    torch.manual_seed(opts.seed)
    gating = MLP([inputs.shape[1], gating_hidden, k])
    if k > 1:
        train_classifier(gating, input_norm.transform(inputs), labels,
                         None if val is None or len(val[0]) == 0 else input_norm.transform(val[0]),
                         None if val is None or len(val[0]) == 0 else val[2], opts)
    model = MoEModel(experts, gating, input_norm, shape)
    logger.info("Mixture of %d experts trained (%d parameters)", k, model.parameter_count())
    return model


def moe_predict(model: MoEModel, x) -> Tuple[np.ndarray, np.ndarray]:
    """Warm start (X, U) for one start state"""
    return model.shape.unflatten(model.predict(x)[0])
