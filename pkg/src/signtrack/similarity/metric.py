"""Trainable feed-forward pair scorer with hand-derived backpropagation.

The network is deliberately tiny (input -> 64 -> 32 -> 1, tanh hidden
units, sigmoid output) and trained with Adam on binary cross entropy.
Feature columns span wildly different scales (meters, degrees, pixels),
so the trainer standardizes inputs using train-split statistics; the
standardization is an affine map, and before returning it is folded
into the first layer's weights and bias so the stored model consumes
raw feature vectors and remains nothing but weight matrices and biases.

Columns sharing a physical unit share one pooled scale factor instead
of per-column ones.  Per-column scaling would warp the geometry: the
discriminative signal is mostly the *difference* between a's and b's
GPS offsets, and dividing the two offsets by different sigmas turns
that difference into something no single linear unit can recover.
With pooled scales a first-layer unit can still compute a scaled
physical difference directly, which in practice is the difference
between converging in a few epochs and not converging at all.

Class embedding rows ride along as extra trainable parameters: pair
vectors arrive with their embedding slots zeroed, the trainer fills
them from its table each batch, and the input gradient for those slots
flows back into the table.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from ..losses import PROB_CEIL, PROB_FLOOR
from .features import (
    A_EMBED,
    A_SCALARS,
    B_EMBED,
    B_SCALARS,
    PAIR_FEATURE_LEN,
    SUMMARY_A,
    SUMMARY_B,
    ClassEmbedding,
)

HIDDEN_LAYER_SIZES = (64, 32)
BATCH_SIZE = 32
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
TRAIN_FRACTION = 0.8
VAL_FRACTION = 0.1
MIN_TRAINING_PAIRS = 100
DEFAULT_PERCENTILES = (50, 75, 90, 95, 99, 100)


@dataclass
class MetricModel:
    """Weight matrices and bias vectors, plus the trained class table.

    weights[i] has shape (n_in, n_out); the forward pass is
    tanh(x @ W + b) through the hidden layers and a sigmoid on the last.
    """

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    embedding: ClassEmbedding | None = field(default=None)

    def __post_init__(self) -> None:
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("weights and biases must be nonempty parallel lists")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise ValueError(f"layer {i}: weight {w.shape} and bias {b.shape} disagree")
            if i and self.weights[i - 1].shape[1] != w.shape[0]:
                raise ValueError(
                    f"layer {i}: input width {w.shape[0]} does not chain from "
                    f"previous output {self.weights[i - 1].shape[1]}"
                )
        if self.weights[-1].shape[1] != 1:
            raise ValueError("final layer must have a single output")

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return tuple(w.shape[0] for w in self.weights) + (1,)

    @classmethod
    def zeros(cls, sizes=(PAIR_FEATURE_LEN, *HIDDEN_LAYER_SIZES, 1)) -> "MetricModel":
        weights = [np.zeros((a, b)) for a, b in zip(sizes, sizes[1:])]
        biases = [np.zeros(b) for b in sizes[1:]]
        return cls(weights, biases)


def _forward_batch(weights, biases, x: np.ndarray):
    """Return (hidden activations including input, clamped output)."""
    acts = [x]
    h = x
    for w, b in zip(weights[:-1], biases[:-1]):
        h = np.tanh(h @ w + b)
        acts.append(h)
    z = h @ weights[-1] + biases[-1]
    # Plain clip rather than a validating clamp: a NaN from bad inputs
    # must flow through to the trainer's divergence guard.
    return acts, np.clip(expit(z), PROB_FLOOR, PROB_CEIL)


def _loss_and_gradients(weights, biases, x: np.ndarray, y: np.ndarray):
    """Mean BCE and its gradients for one batch.

    Returns (loss, weight grads, bias grads, input grad); the input
    grad is what routes into the embedding table.
    """
    acts, p = _forward_batch(weights, biases, x)
    n = len(x)
    loss = float(np.mean(-y * np.log(p) - (1.0 - y) * np.log(1.0 - p)))
    d_ws = [None] * len(weights)
    d_bs = [None] * len(biases)
    dz = (p - y) / n
    for layer in range(len(weights) - 1, -1, -1):
        d_ws[layer] = acts[layer].T @ dz
        d_bs[layer] = dz.sum(axis=0)
        dh = dz @ weights[layer].T
        if layer:
            dz = dh * (1.0 - acts[layer] ** 2)
    return loss, d_ws, d_bs, dh


class _Adam:
    def __init__(self, shape, lr: float):
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        self.lr = lr

    def step(self, param: np.ndarray, grad: np.ndarray, t: int) -> None:
        self.m = ADAM_BETA1 * self.m + (1.0 - ADAM_BETA1) * grad
        self.v = ADAM_BETA2 * self.v + (1.0 - ADAM_BETA2) * grad**2
        m_hat = self.m / (1.0 - ADAM_BETA1**t)
        v_hat = self.v / (1.0 - ADAM_BETA2**t)
        param -= self.lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)


def _fill_embeddings(x: np.ndarray, rows_a, rows_b, table: np.ndarray) -> np.ndarray:
    filled = x.copy()
    filled[:, A_EMBED] = table[rows_a]
    filled[:, B_EMBED] = table[rows_b]
    return filled


def _unit_groups() -> tuple[np.ndarray, ...]:
    """Column index groups sharing one physical unit, hence one scale.

    Scalar block layout: cam east/north (m), heading (deg), gps
    east/north (m), then four pixel coordinates.  Snapshot summaries
    interleave [class, north, east, confidence] means then maxes, so
    their meter-valued entries sit at offsets 1, 2, 5, 6.
    """
    a0, b0 = A_SCALARS.start, B_SCALARS.start
    meters = [a0 + k for k in (0, 1, 3, 4)] + [b0 + k for k in (0, 1, 3, 4)]
    for s in (SUMMARY_A.start, SUMMARY_B.start):
        meters += [s + 1, s + 2, s + 5, s + 6]
    pixels = [a0 + k for k in (5, 6, 7, 8)] + [b0 + k for k in (5, 6, 7, 8)]
    heading = [a0 + 2, b0 + 2]
    return np.array(meters), np.array(pixels), np.array(heading)


def _standardization(x_train: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-column mean and unit-group-pooled scale; zero scales become 1."""
    mu = x_train.mean(axis=0)
    sigma = x_train.std(axis=0)
    for group in _unit_groups():
        pooled = float(np.sqrt(np.mean(x_train[:, group].var(axis=0))))
        if pooled > 0.0:
            sigma[group] = pooled
    sigma[sigma == 0.0] = 1.0
    return mu, sigma


def train_similarity_model(
    pairs,
    epochs: int = 20,
    lr: float = 0.01,
    rng: np.random.Generator | None = None,
) -> MetricModel:
    """Train the pair scorer and return the best-validation-loss model.

    The pair list is consumed in order: first 80% train, next 10%
    validation, rest held out untouched (callers report on it).  A
    fixed generator makes the whole run, including final weights,
    reproducible bit for bit.  Non-finite loss aborts with
    RuntimeError.
    """
    if len(pairs) < MIN_TRAINING_PAIRS:
        raise ValueError(f"need at least {MIN_TRAINING_PAIRS} pairs, got {len(pairs)}")
    if epochs < 1:
        raise ValueError(f"epochs must be >= 1, got {epochs}")
    if not lr > 0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    if rng is None:
        rng = np.random.default_rng(0)

    x_all = np.stack([p.features for p in pairs]).astype(float)
    y_all = np.array([[float(p.label)] for p in pairs])
    if x_all.shape[1] != PAIR_FEATURE_LEN:
        raise ValueError(
            f"feature length {x_all.shape[1]} does not match schema {PAIR_FEATURE_LEN}"
        )

    universe = sorted({p.class_a for p in pairs} | {p.class_b for p in pairs})
    embedding = ClassEmbedding(universe)
    rows_a = np.array([embedding.row_index(p.class_a) for p in pairs])
    rows_b = np.array([embedding.row_index(p.class_b) for p in pairs])

    n = len(pairs)
    n_train = int(TRAIN_FRACTION * n)
    n_val = int(VAL_FRACTION * n)
    train_idx = np.arange(0, n_train)
    val_idx = np.arange(n_train, n_train + n_val)

    # Standardization statistics come from the train split with the
    # initial embedding filled in; constant columns get sigma 1 so they
    # contribute nothing after centering.
    x_train_init = _fill_embeddings(
        x_all[train_idx], rows_a[train_idx], rows_b[train_idx], embedding.matrix
    )
    mu, sigma = _standardization(x_train_init)

    sizes = (PAIR_FEATURE_LEN, *HIDDEN_LAYER_SIZES, 1)
    weights = []
    biases = []
    for fan_in, fan_out in zip(sizes, sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))

    opts = [_Adam(w.shape, lr) for w in weights]
    opt_biases = [_Adam(b.shape, lr) for b in biases]
    opt_table = _Adam(embedding.matrix.shape, lr)

    def val_loss() -> float:
        xv = _fill_embeddings(
            x_all[val_idx], rows_a[val_idx], rows_b[val_idx], embedding.matrix
        )
        xv = (xv - mu) / sigma
        _, p = _forward_batch(weights, biases, xv)
        yv = y_all[val_idx]
        return float(np.mean(-yv * np.log(p) - (1.0 - yv) * np.log(1.0 - p)))

    best = np.inf
    best_state = None
    t = 0
    for _ in range(epochs):
        order = rng.permutation(n_train)
        for start in range(0, n_train, BATCH_SIZE):
            batch = train_idx[order[start : start + BATCH_SIZE]]
            xb = _fill_embeddings(x_all[batch], rows_a[batch], rows_b[batch], embedding.matrix)
            xb = (xb - mu) / sigma
            loss, d_ws, d_bs, dx = _loss_and_gradients(weights, biases, xb, y_all[batch])
            if not np.isfinite(loss):
                raise RuntimeError("training diverged: loss is not finite")
            t += 1
            for w, g, opt in zip(weights, d_ws, opts):
                opt.step(w, g, t)
            for b, g, opt in zip(biases, d_bs, opt_biases):
                opt.step(b, g, t)
            # Route the input gradient of the embedding slots back into
            # the table, undoing the standardization scale.
            d_table = np.zeros_like(embedding.matrix)
            np.add.at(d_table, rows_a[batch], dx[:, A_EMBED] / sigma[A_EMBED])
            np.add.at(d_table, rows_b[batch], dx[:, B_EMBED] / sigma[B_EMBED])
            opt_table.step(embedding.matrix, d_table, t)

        current = val_loss()
        if current < best:
            best = current
            best_state = (
                [w.copy() for w in weights],
                [b.copy() for b in biases],
                embedding.matrix.copy(),
            )

    if not np.isfinite(best) or best_state is None:
        raise RuntimeError("training diverged: validation loss is not finite")

    best_weights, best_biases, best_table = best_state
    # Fold the standardization into the first layer: the returned model
    # consumes raw features.
    folded_w0 = best_weights[0] / sigma[:, None]
    folded_b0 = best_biases[0] - (mu / sigma) @ best_weights[0]
    return MetricModel(
        weights=[folded_w0] + best_weights[1:],
        biases=[folded_b0] + best_biases[1:],
        embedding=ClassEmbedding.from_matrix(universe, best_table),
    )


def model_score(model: MetricModel, features: np.ndarray) -> float:
    """Forward one pair vector through the model; output in (0, 1)."""
    arr = np.asarray(features, dtype=float)
    if arr.shape != (model.layer_sizes[0],):
        raise ValueError(
            f"feature shape {arr.shape} does not match model input "
            f"({model.layer_sizes[0]},)"
        )
    _, p = _forward_batch(model.weights, model.biases, arr[None, :])
    return float(p[0, 0])


def error_percentiles(
    model: MetricModel, pairs, percentiles=DEFAULT_PERCENTILES
) -> dict[int, float]:
    """Percentiles of |score - label| over a pair set.

    Embedding slots are filled from the model's own table when it has
    one (the usual case for pairs straight out of the generator); a
    model without a table scores the vectors as given.
    """
    if not pairs:
        raise ValueError("cannot compute percentiles of an empty pair set")
    for q in percentiles:
        if not 0 <= q <= 100:
            raise ValueError(f"percentile {q} outside [0, 100]")
    x = np.stack([p.features for p in pairs]).astype(float)
    if model.embedding is not None:
        rows_a = [model.embedding.row_index(p.class_a) for p in pairs]
        rows_b = [model.embedding.row_index(p.class_b) for p in pairs]
        x = _fill_embeddings(x, np.array(rows_a), np.array(rows_b), model.embedding.matrix)
    _, p = _forward_batch(model.weights, model.biases, x)
    errors = np.abs(p[:, 0] - np.array([float(pr.label) for pr in pairs]))
    return {int(q): float(np.percentile(errors, q)) for q in percentiles}
