"""Tension classification head over frozen embeddings.

Blocks of linear -> ReLU -> layer norm -> dropout, a final linear producing
one logit, weighted binary cross entropy, exact analytic backpropagation and
an adaptive-moment optimizer with decoupled weight decay. Everything is plain
numpy so gradients can be checked against finite differences.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

LAYERNORM_EPS = 1e-5
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
BATCH_SIZE = 32


@dataclass(frozen=True)
class HeadConfig:
    input_dim: int
    blocks: int = 1
    hidden_dim: int = 256
    dropout_p: float = 0.4
    pos_weight: float = 2.0
    learning_rate: float = 0.0005
    weight_decay: float = 0.0001
    epochs: int = 12
    seed: int = 0
    threshold: float = 0.5

    def __post_init__(self):
        if self.input_dim < 1 or self.hidden_dim < 1:
            raise ValueError("dimensions must be positive")
        if self.blocks < 0:
            raise ValueError("blocks must be >= 0")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ValueError("dropout_p must lie in [0,1)")
        if self.pos_weight <= 0 or self.learning_rate <= 0:
            raise ValueError("pos_weight and learning_rate must be > 0")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be >= 0")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must lie in (0,1)")


@dataclass
class BlockParams:
    weight: np.ndarray  # (hidden, in)
    bias: np.ndarray  # (hidden,)
    ln_gain: np.ndarray  # (hidden,)
    ln_bias: np.ndarray  # (hidden,)


@dataclass
class TensionModelParams:
    config: HeadConfig
    blocks: list[BlockParams]
    final_weight: np.ndarray  # (last_dim,)
    final_bias: float

    def named_arrays(self):
        """(name, array) pairs over every trainable parameter, fixed order."""
        for i, block in enumerate(self.blocks):
            yield f"block{i}.weight", block.weight
            yield f"block{i}.bias", block.bias
            yield f"block{i}.ln_gain", block.ln_gain
            yield f"block{i}.ln_bias", block.ln_bias
        yield "final.weight", self.final_weight

    def copy(self) -> "TensionModelParams":
        return TensionModelParams(
            config=self.config,
            blocks=[
                BlockParams(
                    b.weight.copy(), b.bias.copy(), b.ln_gain.copy(), b.ln_bias.copy()
                )
                for b in self.blocks
            ],
            final_weight=self.final_weight.copy(),
            final_bias=self.final_bias,
        )


def init_params(config: HeadConfig) -> TensionModelParams:
    """Seeded initialization: Glorot-uniform linear weights, zero biases,
    unit layer-norm gain."""
    rng = np.random.default_rng(config.seed)
    blocks = []
    in_dim = config.input_dim
    for _ in range(config.blocks):
        limit = math.sqrt(6.0 / (in_dim + config.hidden_dim))
        blocks.append(
            BlockParams(
                weight=rng.uniform(-limit, limit, size=(config.hidden_dim, in_dim)),
                bias=np.zeros(config.hidden_dim),
                ln_gain=np.ones(config.hidden_dim),
                ln_bias=np.zeros(config.hidden_dim),
            )
        )
        in_dim = config.hidden_dim
    limit = math.sqrt(6.0 / (in_dim + 1))
    return TensionModelParams(
        config=config,
        blocks=blocks,
        final_weight=rng.uniform(-limit, limit, size=in_dim),
        final_bias=0.0,
    )


def _dropout_masks(config: HeadConfig, batch_size: int, seed: int) -> list[np.ndarray]:
    """Masks fixed by the mode seed and shapes only, so finite differences
    see a deterministic loss surface."""
    rng = np.random.default_rng(seed)
    keep = 1.0 - config.dropout_p
    masks = []
    for _ in range(config.blocks):
        if config.dropout_p == 0.0:
            masks.append(np.ones((batch_size, config.hidden_dim)))
        else:
            masks.append(
                (rng.random((batch_size, config.hidden_dim)) < keep) / keep
            )
    return masks


def _forward_batch(
    params: TensionModelParams,
    x: np.ndarray,
    masks: list[np.ndarray] | None,
):
    """Forward pass on a batch (B, D); returns logits and a tape for backward."""
    config = params.config
    if x.ndim != 2 or x.shape[1] != config.input_dim:
        raise ValueError(
            f"input shape {x.shape} does not match input_dim {config.input_dim}"
        )
    tape = []
    h = x
    for i, block in enumerate(params.blocks):
        z = h @ block.weight.T + block.bias
        a = np.maximum(z, 0.0)
        mu = a.mean(axis=1, keepdims=True)
        var = a.var(axis=1, keepdims=True)
        inv_std = 1.0 / np.sqrt(var + LAYERNORM_EPS)
        x_hat = (a - mu) * inv_std
        y = block.ln_gain * x_hat + block.ln_bias
        mask = masks[i] if masks is not None else None
        out = y * mask if mask is not None else y
        tape.append(dict(inp=h, z=z, a=a, mu=mu, inv_std=inv_std, x_hat=x_hat, mask=mask))
        h = out
    logits = h @ params.final_weight + params.final_bias
    return logits, tape, h


def forward(
    params: TensionModelParams,
    x: np.ndarray,
    train_seed: int | None = None,
) -> float | np.ndarray:
    """Compute logits; eval mode (train_seed None) is deterministic."""
    single = np.asarray(x).ndim == 1
    batch = np.atleast_2d(np.asarray(x, dtype=np.float64))
    masks = (
        _dropout_masks(params.config, batch.shape[0], train_seed)
        if train_seed is not None
        else None
    )
    logits, _, _ = _forward_batch(params, batch, masks)
    return float(logits[0]) if single else logits


def _softplus(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def weighted_bce_loss(
    logits: float | np.ndarray, labels: int | np.ndarray, pos_weight: float
) -> float:
    """Mean weighted binary cross entropy, log-sum-exp stable form.

    L = w*y*softplus(-z) + (1-y)*(z + softplus(-z)).
    """
    if pos_weight <= 0:
        raise ValueError("pos_weight must be > 0")
    z = np.atleast_1d(np.asarray(logits, dtype=np.float64))
    y = np.atleast_1d(np.asarray(labels, dtype=np.float64))
    losses = pos_weight * y * _softplus(-z) + (1.0 - y) * (z + _softplus(-z))
    return float(losses.mean())


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def backward(
    params: TensionModelParams,
    x: np.ndarray,
    labels: np.ndarray,
    train_seed: int | None = None,
) -> dict[str, np.ndarray]:
    """Exact gradients of the mean weighted loss w.r.t. every parameter."""
    if len(x) == 0:
        raise ValueError("batch must be non-empty")
    config = params.config
    batch = np.asarray(x, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    masks = (
        _dropout_masks(config, batch.shape[0], train_seed)
        if train_seed is not None
        else None
    )
    logits, tape, h_final = _forward_batch(params, batch, masks)

    n = batch.shape[0]
    sig = _sigmoid(logits)
    dz_logit = (config.pos_weight * y * (sig - 1.0) + (1.0 - y) * sig) / n

    grads: dict[str, np.ndarray] = {}
    grads["final.weight"] = h_final.T @ dz_logit
    grads["final.bias"] = np.array(dz_logit.sum())
    dh = np.outer(dz_logit, params.final_weight)

    for i in reversed(range(len(params.blocks))):
        block = params.blocks[i]
        t = tape[i]
        if t["mask"] is not None:
            dh = dh * t["mask"]
        # layer norm backward over the hidden dimension
        x_hat, inv_std = t["x_hat"], t["inv_std"]
        hdim = x_hat.shape[1]
        grads[f"block{i}.ln_gain"] = (dh * x_hat).sum(axis=0)
        grads[f"block{i}.ln_bias"] = dh.sum(axis=0)
        dxhat = dh * block.ln_gain
        da = (
            inv_std
            / hdim
            * (
                hdim * dxhat
                - dxhat.sum(axis=1, keepdims=True)
                - x_hat * (dxhat * x_hat).sum(axis=1, keepdims=True)
            )
        )
        dz = da * (t["z"] > 0)
        grads[f"block{i}.weight"] = dz.T @ t["inp"]
        grads[f"block{i}.bias"] = dz.sum(axis=0)
        dh = dz @ block.weight
    return grads


# ---------------------------------------------------------------------------
# Datasets


@dataclass
class LabelledItem:
    embedding: np.ndarray
    label: int
    paragraph_id: str = ""
    session: str = ""
    ordinal: int = 0

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError("labels must be binary")


@dataclass
class LabelledDataset:
    items: list[LabelledItem] = field(default_factory=list)

    def __len__(self):
        return len(self.items)

    def matrices(self) -> tuple[np.ndarray, np.ndarray]:
        x = np.stack([item.embedding for item in self.items])
        y = np.array([item.label for item in self.items], dtype=np.float64)
        return x, y


def split_dataset(
    dataset: LabelledDataset, ratio: float, seed: int, stratified: bool = True
) -> tuple[LabelledDataset, LabelledDataset]:
    """Deterministic train/test split; stratification keeps per-class
    proportions within one item."""
    if not 0.0 < ratio < 1.0:
        raise ValueError("ratio must lie strictly between 0 and 1")
    rng = np.random.default_rng(seed)
    indices = np.arange(len(dataset.items))
    train_idx: list[int] = []
    test_idx: list[int] = []
    if stratified:
        for label in (0, 1):
            class_idx = indices[[dataset.items[i].label == label for i in indices]]
            if len(class_idx) == 0:
                raise ValueError(f"stratified split with empty class {label}")
            shuffled = rng.permutation(class_idx)
            n_train = int(round(ratio * len(shuffled)))
            train_idx.extend(shuffled[:n_train])
            test_idx.extend(shuffled[n_train:])
    else:
        shuffled = rng.permutation(indices)
        n_train = int(round(ratio * len(shuffled)))
        train_idx = list(shuffled[:n_train])
        test_idx = list(shuffled[n_train:])
    train = LabelledDataset([dataset.items[i] for i in sorted(train_idx)])
    test = LabelledDataset([dataset.items[i] for i in sorted(test_idx)])
    return train, test


def undersample_drop_intro(dataset: LabelledDataset, n: int = 20) -> LabelledDataset:
    """Drop the first n paragraphs of each session document (clamped)."""
    return LabelledDataset([item for item in dataset.items if item.ordinal >= n])


def undersample_random_negative(
    dataset: LabelledDataset, fraction: float, seed: int
) -> LabelledDataset:
    """Drop the given fraction of negative items uniformly at random."""
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("fraction must lie in [0,1]")
    negatives = [i for i, item in enumerate(dataset.items) if item.label == 0]
    rng = np.random.default_rng(seed)
    n_drop = int(round(fraction * len(negatives)))
    dropped = set(rng.choice(negatives, size=n_drop, replace=False)) if n_drop else set()
    return LabelledDataset(
        [item for i, item in enumerate(dataset.items) if i not in dropped]
    )


# ---------------------------------------------------------------------------
# Metrics


@dataclass
class Metrics:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp > 0 else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn > 0 else 0.0

    @property
    def accuracy(self) -> float:
        total = self.tp + self.fp + self.fn + self.tn
        return (self.tp + self.tn) / total if total > 0 else 0.0

    def as_dict(self) -> dict:
        return dict(
            tp=self.tp,
            fp=self.fp,
            fn=self.fn,
            tn=self.tn,
            precision=self.precision,
            recall=self.recall,
            accuracy=self.accuracy,
        )


def evaluate(
    params: TensionModelParams, dataset: LabelledDataset, threshold: float | None = None
) -> Metrics:
    """Confusion counts and derived metrics at the decision threshold."""
    threshold = params.config.threshold if threshold is None else threshold
    if len(dataset) == 0:
        return Metrics(0, 0, 0, 0)
    x, y = dataset.matrices()
    probs = _sigmoid(np.atleast_1d(forward(params, x)))
    predictions = probs >= threshold
    actual = y >= 0.5
    tp = int(np.sum(predictions & actual))
    fp = int(np.sum(predictions & ~actual))
    fn = int(np.sum(~predictions & actual))
    tn = int(np.sum(~predictions & ~actual))
    return Metrics(tp, fp, fn, tn)


def predict_scores(params: TensionModelParams, x: np.ndarray) -> np.ndarray:
    """Tension probabilities in [0,1] for a batch of embeddings."""
    return _sigmoid(np.atleast_1d(forward(params, x)))


# ---------------------------------------------------------------------------
# Training


class TrainingDiverged(RuntimeError):
    pass


def train(
    dataset: LabelledDataset,
    config: HeadConfig,
    init: TensionModelParams | None = None,
) -> tuple[TensionModelParams, list[dict]]:
    """Mini-batch gradient descent with adaptive per-parameter moments and
    decoupled weight decay; full shuffle per epoch, seeded end to end."""
    if len(dataset) == 0:
        raise ValueError("dataset must be non-empty")
    if init is not None:
        if init.config.input_dim != config.input_dim or init.config.blocks != config.blocks:
            raise ValueError("init params shapes do not match config")
        params = init.copy()
        params.config = config
    else:
        params = init_params(config)

    x_all, y_all = dataset.matrices()
    rng = np.random.default_rng(config.seed)
    moment1 = {name: np.zeros_like(arr) for name, arr in params.named_arrays()}
    moment1["final.bias"] = np.zeros(())
    moment2 = {name: np.zeros_like(arr) for name, arr in params.named_arrays()}
    moment2["final.bias"] = np.zeros(())
    step = 0
    history: list[dict] = []

    for epoch in range(config.epochs):
        order = rng.permutation(len(dataset))
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, len(order), BATCH_SIZE):
            batch_idx = order[start : start + BATCH_SIZE]
            xb, yb = x_all[batch_idx], y_all[batch_idx]
            mode_seed = int(rng.integers(2**31)) if config.dropout_p > 0 else None
            logits = forward(params, xb, train_seed=mode_seed)
            loss = weighted_bce_loss(logits, yb, config.pos_weight)
            if not math.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite loss {loss} at epoch {epoch}, step {step}"
                )
            epoch_loss += loss
            n_batches += 1
            grads = backward(params, xb, yb, train_seed=mode_seed)

            step += 1
            arrays = dict(params.named_arrays())
            arrays["final.bias"] = None  # scalar handled below
            for name in moment1:
                grad = grads[name]
                moment1[name] = ADAM_BETA1 * moment1[name] + (1 - ADAM_BETA1) * grad
                moment2[name] = ADAM_BETA2 * moment2[name] + (1 - ADAM_BETA2) * grad**2
                m_hat = moment1[name] / (1 - ADAM_BETA1**step)
                v_hat = moment2[name] / (1 - ADAM_BETA2**step)
                update = config.learning_rate * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
                if name == "final.bias":
                    params.final_bias -= float(update)
                else:
                    arr = arrays[name]
                    arr -= update
                    if name.endswith(".weight"):
                        arr -= config.learning_rate * config.weight_decay * arr

        train_metrics = evaluate(params, dataset)
        history.append(
            dict(
                epoch=epoch,
                loss=epoch_loss / max(n_batches, 1),
                metrics=train_metrics.as_dict(),
            )
        )
    return params, history


# ---------------------------------------------------------------------------
# Checkpoints and external labelled data

_CHECKPOINT_MAGIC = b"TCKP"
_CHECKPOINT_VERSION = 1


class CheckpointError(RuntimeError):
    pass


def save_checkpoint(params: TensionModelParams, path: str | Path) -> None:
    """Versioned binary record: config + arrays, sha256 integrity checksum."""
    path = Path(path)
    arrays = {name: arr for name, arr in params.named_arrays()}
    arrays["final.bias"] = np.array(params.final_bias)
    buffer = io.BytesIO()
    np.savez(buffer, **{name.replace(".", "__"): arr for name, arr in arrays.items()})
    payload = json.dumps(asdict(params.config)).encode("utf-8")
    body = len(payload).to_bytes(4, "little") + payload + buffer.getvalue()
    checksum = hashlib.sha256(body).digest()
    header = _CHECKPOINT_MAGIC + _CHECKPOINT_VERSION.to_bytes(4, "little") + checksum
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(header + body)
    tmp.replace(path)


def load_checkpoint(path: str | Path) -> TensionModelParams:
    raw = Path(path).read_bytes()
    if len(raw) < 40 or raw[:4] != _CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    version = int.from_bytes(raw[4:8], "little")
    if version > _CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    checksum, body = raw[8:40], raw[40:]
    if hashlib.sha256(body).digest() != checksum:
        raise CheckpointError(f"{path}: checksum mismatch, file corrupted")
    config_len = int.from_bytes(body[:4], "little")
    config = HeadConfig(**json.loads(body[4 : 4 + config_len].decode("utf-8")))
    npz = np.load(io.BytesIO(body[4 + config_len :]))
    blocks = []
    for i in range(config.blocks):
        blocks.append(
            BlockParams(
                weight=npz[f"block{i}__weight"],
                bias=npz[f"block{i}__bias"],
                ln_gain=npz[f"block{i}__ln_gain"],
                ln_bias=npz[f"block{i}__ln_bias"],
            )
        )
    return TensionModelParams(
        config=config,
        blocks=blocks,
        final_weight=npz["final__weight"],
        final_bias=float(npz["final__bias"]),
    )


def load_labelled_csv(path: str | Path) -> list[tuple[str, int]]:
    """Read external labelled data: CSV with a text,label header."""
    rows = []
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None or not {"text", "label"} <= set(reader.fieldnames):
            raise ValueError(f"{path}: expected columns text,label")
        for record in reader:
            label = int(record["label"])
            if label not in (0, 1):
                raise ValueError(f"{path}: label must be 0 or 1, got {label}")
            rows.append((record["text"], label))
    return rows
