"""Two-layer graph convolutional classifier with hand-derived gradients.

The architecture is fixed: propagate, linear, ReLU, propagate, linear, with
inverted dropout on the input of each layer during training. Gradients are
written out by hand for exactly this composition; there is no autodiff.

    X_d = Drop(X)            H = ReLU(A_hat @ X_d @ W1 + b1)
    H_d = Drop(H)            Z = A_hat @ H_d @ W2 + b2
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.sparse as sp

from . import metrics, scoring
from .objectives import ObjectiveSpec, binary_head_loss, objective_loss

_TENSOR_NAMES = ("w1", "b1", "w2", "b2")

# RNG stream tags, offset away from the split streams in graph.py.
_STREAM_DROPOUT = 101
_STREAM_HEAD_INIT = 102


@dataclass
class GcnParams:
    w1: np.ndarray  # (d, h)
    b1: np.ndarray  # (h,)
    w2: np.ndarray  # (h, k_out)
    b2: np.ndarray  # (k_out,)

    def tensors(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in _TENSOR_NAMES}

    def copy(self) -> "GcnParams":
        return GcnParams(**{k: v.copy() for k, v in self.tensors().items()})

    @property
    def input_dim(self) -> int:
        return self.w1.shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.w1.shape[1]

    @property
    def output_dim(self) -> int:
        return self.w2.shape[1]


@dataclass
class ForwardTrace:
    """Intermediates cached by a forward pass for the matching backward pass."""

    logits: np.ndarray        # (n, k_out)
    hidden: np.ndarray        # (n, h) post-ReLU, pre-dropout
    prop_input: np.ndarray    # A_hat @ Drop(X)
    prop_hidden: np.ndarray   # A_hat @ Drop(hidden)
    relu_mask: np.ndarray     # (n, h) float 0/1
    adjacency: sp.spmatrix
    training: bool
    drop_mask_input: np.ndarray | None = None   # scaled masks: 0 or 1/(1-p)
    drop_mask_hidden: np.ndarray | None = None


def init_params(input_dim: int, hidden_dim: int, output_dim: int,
                seed: int) -> GcnParams:
    """Glorot-uniform weights, zero biases, deterministic per seed."""
    if min(input_dim, hidden_dim, output_dim) < 1:
        raise ValueError("all dimensions must be >= 1")
    rng = np.random.default_rng(seed)

    def glorot(fan_in: int, fan_out: int) -> np.ndarray:
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-limit, limit, size=(fan_in, fan_out))

    return GcnParams(
        w1=glorot(input_dim, hidden_dim),
        b1=np.zeros(hidden_dim),
        w2=glorot(hidden_dim, output_dim),
        b2=np.zeros(output_dim),
    )


def forward(params: GcnParams, adjacency: sp.spmatrix, features: np.ndarray,
            *, training: bool = False, dropout: float = 0.0,
            rng: np.random.Generator | None = None) -> ForwardTrace:
    """Full-batch forward pass; eval mode is deterministic and dropout-free."""
    if features.shape[1] != params.input_dim:
        raise ValueError(
            f"feature dim {features.shape[1]} != parameter input dim {params.input_dim}"
        )
    use_dropout = training and dropout > 0.0
    if use_dropout and rng is None:
        raise ValueError("training-mode dropout needs an rng")
    keep = 1.0 - dropout

    mask_in = None
    x = features
    if use_dropout:
        mask_in = (rng.random(features.shape) < keep).astype(np.float64) / keep
        x = features * mask_in
    prop_input = adjacency @ x
    pre_act = prop_input @ params.w1 + params.b1
    relu_mask = (pre_act > 0).astype(np.float64)
    hidden = pre_act * relu_mask

    mask_h = None
    h = hidden
    if use_dropout:
        mask_h = (rng.random(hidden.shape) < keep).astype(np.float64) / keep
        h = hidden * mask_h
    prop_hidden = adjacency @ h
    logits = prop_hidden @ params.w2 + params.b2
    if not np.all(np.isfinite(logits)):
        raise FloatingPointError("non-finite logits in forward pass")

    return ForwardTrace(
        logits=logits, hidden=hidden, prop_input=prop_input,
        prop_hidden=prop_hidden, relu_mask=relu_mask, adjacency=adjacency,
        training=use_dropout, drop_mask_input=mask_in, drop_mask_hidden=mask_h,
    )


def backward(params: GcnParams, trace: ForwardTrace, grad_logits: np.ndarray,
             weight_decay: float = 0.0) -> dict[str, np.ndarray]:
    """Gradients of loss(logits) + (wd/2)*(|W1|^2 + |W2|^2) w.r.t. parameters.

    Weight decay touches the weight matrices only, never the biases.
    """
    if grad_logits.shape != trace.logits.shape:
        raise ValueError("grad_logits shape does not match trace logits")
    grad_w2 = trace.prop_hidden.T @ grad_logits
    grad_b2 = grad_logits.sum(axis=0)
    g = grad_logits @ params.w2.T
    g = trace.adjacency.T @ g
    if trace.drop_mask_hidden is not None:
        g = g * trace.drop_mask_hidden
    g = g * trace.relu_mask
    grad_w1 = trace.prop_input.T @ g
    grad_b1 = g.sum(axis=0)
    if weight_decay:
        grad_w1 = grad_w1 + weight_decay * params.w1
        grad_w2 = grad_w2 + weight_decay * params.w2
    return {"w1": grad_w1, "b1": grad_b1, "w2": grad_w2, "b2": grad_b2}


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def init_adam(params: GcnParams | dict[str, np.ndarray]) -> AdamState:
    tensors = params.tensors() if isinstance(params, GcnParams) else params
    return AdamState(
        m={k: np.zeros_like(v) for k, v in tensors.items()},
        v={k: np.zeros_like(v) for k, v in tensors.items()},
    )


def adam_step(state: AdamState, params: GcnParams | dict[str, np.ndarray],
              grads: dict[str, np.ndarray], learning_rate: float) -> None:
    """One bias-corrected Adam update, in place."""
    tensors = params.tensors() if isinstance(params, GcnParams) else params
    state.t += 1
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t
    for name, p in tensors.items():
        g = grads[name]
        state.m[name] = state.beta1 * state.m[name] + (1.0 - state.beta1) * g
        state.v[name] = state.beta2 * state.v[name] + (1.0 - state.beta2) * (g * g)
        m_hat = state.m[name] / bc1
        v_hat = state.v[name] / bc2
        p -= learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)


def gradient_check(
    objective: Callable[[GcnParams], tuple[float, dict[str, np.ndarray]]],
    params: GcnParams,
    *,
    step: float = 1e-4,
    rng: np.random.Generator | None = None,
    max_coords_per_tensor: int = 24,
) -> float:
    """Max relative error between analytic gradients and central differences.

    The objective must be deterministic (eval-mode forward or frozen masks).
    A subset of coordinates is probed per tensor when tensors are large.
    """
    if step <= 0:
        raise ValueError("invalid step")
    if rng is None:
        rng = np.random.default_rng(0)
    loss0, grads = objective(params)
    if not np.isfinite(loss0):
        raise ValueError("non-finite loss")

    worst = 0.0
    for name, tensor in params.tensors().items():
        flat = tensor.reshape(-1)
        size = flat.size
        if size <= max_coords_per_tensor:
            coords = np.arange(size)
        else:
            coords = rng.choice(size, size=max_coords_per_tensor, replace=False)
        analytic_flat = grads[name].reshape(-1)
        for i in coords:
            original = flat[i]
            flat[i] = original + step
            loss_plus, _ = objective(params)
            flat[i] = original - step
            loss_minus, _ = objective(params)
            flat[i] = original
            numeric = (loss_plus - loss_minus) / (2.0 * step)
            analytic = analytic_flat[i]
            rel = abs(analytic - numeric) / max(1e-8, abs(analytic) + abs(numeric))
            worst = max(worst, rel)
    return worst


@dataclass
class TrainConfig:
    """Hyperparameters for classifier training and exposure regularization."""

    hidden_dim: int = 32
    learning_rate: float = 0.01
    dropout: float = 0.5
    weight_decay: float = 5e-4
    exposure_weight: float = 0.05
    margin_id: float = -5.0
    margin_ood: float = -1.0
    max_epochs: int = 200
    patience: int = 20
    seed: int = 0

    def validate(self) -> None:
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.patience > self.max_epochs:
            raise ValueError("patience must not exceed max_epochs")
        if not self.margin_ood > self.margin_id:
            raise ValueError("margin_ood must exceed margin_id")

    def to_dict(self) -> dict:
        return {
            "hidden_dim": self.hidden_dim,
            "learning_rate": self.learning_rate,
            "dropout": self.dropout,
            "weight_decay": self.weight_decay,
            "exposure_weight": self.exposure_weight,
            "margin_id": self.margin_id,
            "margin_ood": self.margin_ood,
            "max_epochs": self.max_epochs,
            "patience": self.patience,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        return cls(**{k: data[k] for k in cls().to_dict() if k in data})


@dataclass
class TrainResult:
    params: GcnParams
    history: list[dict]
    best_epoch: int
    best_val_score: float


def _validation_scores(params: GcnParams, adjacency, features, spec: ObjectiveSpec,
                       row_stochastic, prop_alpha: float, prop_iterations: int,
                       ) -> tuple[ForwardTrace, np.ndarray]:
    trace = forward(params, adjacency, features)
    scores = scoring.score_nodes(
        trace.logits, spec.val_scorer, row_stochastic=row_stochastic,
        alpha=prop_alpha, iterations=prop_iterations,
    )
    return trace, scores


def train_classifier(
    features: np.ndarray,
    adjacency: sp.spmatrix,
    labels: np.ndarray,
    split,
    config: TrainConfig,
    spec: ObjectiveSpec,
    *,
    output_dim: int,
    id_class_count: int,
    row_stochastic: sp.spmatrix | None = None,
    prop_alpha: float = 0.5,
    prop_iterations: int = 2,
) -> TrainResult:
    """Full-batch training with early stopping on val accuracy + val AUROC.

    Keeps the parameters of the best epoch (ties resolved to the earliest)
    and stops after ``config.patience`` consecutive non-improving epochs.
    """
    config.validate()
    spec.validate()
    train_ids = np.asarray(split.train_id)
    if train_ids.size == 0:
        raise ValueError("empty training set")

    params = init_params(features.shape[1], config.hidden_dim, output_dim, config.seed)
    state = init_adam(params)
    rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(_STREAM_DROPOUT,)))

    best_score = -np.inf
    best_params = params.copy()
    best_epoch = 0
    bad_epochs = 0
    history: list[dict] = []

    for epoch in range(1, config.max_epochs + 1):
        trace = forward(params, adjacency, features,
                        training=True, dropout=config.dropout, rng=rng)
        loss, grad_logits = objective_loss(trace.logits, labels, train_ids, spec)
        if not np.isfinite(loss):
            raise FloatingPointError(
                f"non-finite loss at epoch {epoch} (objective {spec.kind})"
            )
        grads = backward(params, trace, grad_logits, weight_decay=config.weight_decay)
        adam_step(state, params, grads, config.learning_rate)

        eval_trace, scores = _validation_scores(
            params, adjacency, features, spec, row_stochastic, prop_alpha, prop_iterations,
        )
        val_acc = metrics.id_accuracy(eval_trace.logits, labels, split.val_id,
                                      id_class_count=id_class_count)
        val_auroc = metrics.auroc(scores[split.val_id], scores[split.val_ood])
        val_score = val_acc + val_auroc
        history.append({
            "epoch": epoch, "loss": loss,
            "val_acc": val_acc, "val_auroc": val_auroc, "val_score": val_score,
        })

        if val_score > best_score:
            best_score = val_score
            best_params = params.copy()
            best_epoch = epoch
            bad_epochs = 0
        else:
            bad_epochs += 1
        if bad_epochs >= config.patience:
            break

    return TrainResult(params=best_params, history=history,
                       best_epoch=best_epoch, best_val_score=best_score)


@dataclass
class BinaryHeadResult:
    weights: np.ndarray
    history: list[dict]
    best_epoch: int
    best_val_score: float


def train_binary_head(
    hidden: np.ndarray,
    id_ids: np.ndarray,
    ood_ids: np.ndarray,
    split,
    config: TrainConfig,
    *,
    backbone_val_acc: float,
) -> BinaryHeadResult:
    """Fit a linear OOD head on frozen hidden features.

    The backbone's validation accuracy is constant during this stage, so the
    early-stopping criterion reduces to validation AUROC plus that constant.
    """
    config.validate()
    id_ids = np.asarray(id_ids)
    ood_ids = np.asarray(ood_ids)
    if id_ids.size == 0 or ood_ids.size == 0:
        raise ValueError("empty node set for binary head")

    h = hidden.shape[1]
    rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(_STREAM_HEAD_INIT,)))
    limit = np.sqrt(6.0 / (h + 1))
    weights = {"w": rng.uniform(-limit, limit, size=h)}
    state = init_adam(weights)

    best_score = -np.inf
    best_w = weights["w"].copy()
    best_epoch = 0
    bad_epochs = 0
    history: list[dict] = []

    for epoch in range(1, config.max_epochs + 1):
        z = hidden @ weights["w"]
        loss, grad_z = binary_head_loss(z, id_ids, ood_ids)
        if not np.isfinite(loss):
            raise FloatingPointError(f"non-finite head loss at epoch {epoch}")
        grads = {"w": hidden.T @ grad_z}
        adam_step(state, weights, grads, config.learning_rate)

        scores = scoring.binary_head_score(hidden, weights["w"])
        val_auroc = metrics.auroc(scores[split.val_id], scores[split.val_ood])
        val_score = backbone_val_acc + val_auroc
        history.append({"epoch": epoch, "loss": loss,
                        "val_auroc": val_auroc, "val_score": val_score})

        if val_score > best_score:
            best_score = val_score
            best_w = weights["w"].copy()
            best_epoch = epoch
            bad_epochs = 0
        else:
            bad_epochs += 1
        if bad_epochs >= config.patience:
            break

    return BinaryHeadResult(weights=best_w, history=history,
                            best_epoch=best_epoch, best_val_score=best_score)


def save_params(params: GcnParams, path: Path | str) -> None:
    """params.bin: u32 d, u32 h, u32 k_out header, then f32 tensors in order."""
    with Path(path).open("wb") as fh:
        fh.write(struct.pack("<III", params.input_dim, params.hidden_dim,
                             params.output_dim))
        for tensor in params.tensors().values():
            fh.write(np.ascontiguousarray(tensor, dtype="<f4").tobytes())


def load_params(path: Path | str) -> GcnParams:
    raw = Path(path).read_bytes()
    d, h, k_out = struct.unpack("<III", raw[:12])
    shapes = [(d, h), (h,), (h, k_out), (k_out,)]
    offset = 12
    tensors = []
    for shape in shapes:
        count = int(np.prod(shape))
        arr = np.frombuffer(raw, dtype="<f4", count=count, offset=offset)
        tensors.append(arr.reshape(shape).astype(np.float64))
        offset += count * 4
    if offset != len(raw):
        raise ValueError("params.bin has trailing bytes")
    return GcnParams(*tensors)
