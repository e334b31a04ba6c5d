"""Trainable distributional semantic memory over task items.

A one-hidden-layer network maps an item to a probability distribution over
likely combination partners: e = E[x], h = relu(W1.T e), y = softmax(W2.T h).
Training pairs come from co-occurrence inside successful combinations, so
items used in similar contexts end up with similar embedding rows in E.

The per-pair SGD loop and the forward pass are jitted with numba when it is
available (the simulator calls them millions of times); the pure-numpy
fallback computes exactly the same updates.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def deco(fn):
            return fn

        return deco

#: (input item id, target item id)
TrainingPair = tuple

DEFAULT_EMBED_DIM = 16
DEFAULT_HIDDEN_DIM = 16
DEFAULT_LEARNING_RATE = 0.1
INIT_SCALE = 0.3
#: Per-block L2 cap on one step's gradient; keeps long training runs finite.
GRAD_CLIP = 4.0


class EmbeddingNet:
    """Semantic memory of a single agent. Exclusively owned; mutated by train()."""

    __slots__ = ("vocab_size", "embed_dim", "hidden_dim", "learning_rate", "E", "W1", "W2")

    def __init__(self, vocab_size: int, embed_dim: int, hidden_dim: int,
                 E: np.ndarray, W1: np.ndarray, W2: np.ndarray,
                 learning_rate: float = DEFAULT_LEARNING_RATE):
        self.vocab_size = vocab_size
        self.embed_dim = embed_dim
        self.hidden_dim = hidden_dim
        self.learning_rate = learning_rate
        self.E = E
        self.W1 = W1
        self.W2 = W2

    def copy(self) -> "EmbeddingNet":
        return EmbeddingNet(self.vocab_size, self.embed_dim, self.hidden_dim,
                            self.E.copy(), self.W1.copy(), self.W2.copy(), self.learning_rate)


def init_net(vocab_size: int, embed_dim: int = DEFAULT_EMBED_DIM, hidden_dim: int = DEFAULT_HIDDEN_DIM,
             seed: int = 0, learning_rate: float = DEFAULT_LEARNING_RATE) -> EmbeddingNet:
    """Fresh net with weights ~ U[-INIT_SCALE, INIT_SCALE], deterministic in seed."""
    if vocab_size < 1 or embed_dim < 1 or hidden_dim < 1:
        raise ValueError("all network dimensions must be >= 1")
    rng = np.random.default_rng(seed)
    E = rng.uniform(-INIT_SCALE, INIT_SCALE, size=(vocab_size, embed_dim))
    W1 = rng.uniform(-INIT_SCALE, INIT_SCALE, size=(embed_dim, hidden_dim))
    W2 = rng.uniform(-INIT_SCALE, INIT_SCALE, size=(hidden_dim, vocab_size))
    return EmbeddingNet(vocab_size, embed_dim, hidden_dim, E, W1, W2, learning_rate)


@njit(cache=True)
def _forward_kernel(E, W1, W2, x):
    embed_dim, hidden_dim = W1.shape
    vocab = W2.shape[1]
    pre = np.zeros(hidden_dim)
    for j in range(hidden_dim):
        acc = 0.0
        for i in range(embed_dim):
            acc += W1[i, j] * E[x, i]
        pre[j] = acc if acc > 0.0 else 0.0
    z = np.zeros(vocab)
    zmax = -1e300
    for k in range(vocab):
        acc = 0.0
        for j in range(hidden_dim):
            acc += W2[j, k] * pre[j]
        z[k] = acc
        if acc > zmax:
            zmax = acc
    total = 0.0
    for k in range(vocab):
        z[k] = math.exp(z[k] - zmax)
        total += z[k]
    for k in range(vocab):
        z[k] /= total
    return z


@njit(cache=True)
def _train_kernel(E, W1, W2, xs, targets, epochs, lr, clip):
    """Per-pair SGD with per-block gradient-norm clipping; returns epoch losses."""
    n_pairs = xs.shape[0]
    embed_dim, hidden_dim = W1.shape
    vocab = W2.shape[1]
    losses = np.zeros(epochs)
    pre = np.zeros(hidden_dim)
    h = np.zeros(hidden_dim)
    y = np.zeros(vocab)
    dh = np.zeros(hidden_dim)
    dpre = np.zeros(hidden_dim)
    de = np.zeros(embed_dim)
    for ep in range(epochs):
        total = 0.0
        for p in range(n_pairs):
            x = xs[p]
            tgt = targets[p]
            zmax = -1e300
            for j in range(hidden_dim):
                acc = 0.0
                for i in range(embed_dim):
                    acc += W1[i, j] * E[x, i]
                pre[j] = acc
                h[j] = acc if acc > 0.0 else 0.0
            for k in range(vocab):
                acc = 0.0
                for j in range(hidden_dim):
                    acc += W2[j, k] * h[j]
                y[k] = acc
                if acc > zmax:
                    zmax = acc
            zsum = 0.0
            for k in range(vocab):
                y[k] = math.exp(y[k] - zmax)
                zsum += y[k]
            for k in range(vocab):
                y[k] /= zsum
            prob = y[tgt] if y[tgt] > 1e-300 else 1e-300
            total += -math.log(prob)
            if lr == 0.0:
                continue
            # y now doubles as dz = y - onehot(target)
            y[tgt] -= 1.0
            dz_sq = 0.0
            for k in range(vocab):
                dz_sq += y[k] * y[k]
            h_sq = 0.0
            for j in range(hidden_dim):
                acc = 0.0
                for k in range(vocab):
                    acc += W2[j, k] * y[k]
                dh[j] = acc
                h_sq += h[j] * h[j]
            dpre_sq = 0.0
            e_sq = 0.0
            for j in range(hidden_dim):
                dpre[j] = dh[j] if pre[j] > 0.0 else 0.0
                dpre_sq += dpre[j] * dpre[j]
            for i in range(embed_dim):
                acc = 0.0
                for j in range(hidden_dim):
                    acc += W1[i, j] * dpre[j]
                de[i] = acc
                e_sq += E[x, i] * E[x, i]
            s2 = lr
            norm2 = math.sqrt(h_sq * dz_sq)
            if norm2 > clip:
                s2 = lr * clip / norm2
            s1 = lr
            norm1 = math.sqrt(e_sq * dpre_sq)
            if norm1 > clip:
                s1 = lr * clip / norm1
            se = lr
            de_sq = 0.0
            for i in range(embed_dim):
                de_sq += de[i] * de[i]
            norme = math.sqrt(de_sq)
            if norme > clip:
                se = lr * clip / norme
            for j in range(hidden_dim):
                hj = h[j]
                if hj != 0.0:
                    for k in range(vocab):
                        W2[j, k] -= s2 * hj * y[k]
            for i in range(embed_dim):
                ei = E[x, i]
                for j in range(hidden_dim):
                    W1[i, j] -= s1 * ei * dpre[j]
            for i in range(embed_dim):
                E[x, i] -= se * de[i]
        losses[ep] = total / n_pairs
    return losses


def forward(net: EmbeddingNet, x: int) -> np.ndarray:
    """Probability distribution over all items as combination partners of x."""
    if not 0 <= x < net.vocab_size:
        raise IndexError(f"item id {x} out of range for vocab of {net.vocab_size}")
    return _forward_kernel(net.E, net.W1, net.W2, x)


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max()
    ez = np.exp(z)
    return ez / ez.sum()


def train(net: EmbeddingNet, pairs: Sequence[TrainingPair], epochs: int = 1,
          learning_rate: float | None = None) -> list[float]:
    """Per-pair SGD over the pair list; returns the per-epoch mean cross-entropy."""
    if len(pairs) == 0:
        raise ValueError("training requires at least one pair")
    lr = net.learning_rate if learning_rate is None else learning_rate
    if lr < 0:
        raise ValueError("learning rate must be >= 0")
    xs = np.fromiter((p[0] for p in pairs), dtype=np.int64, count=len(pairs))
    targets = np.fromiter((p[1] for p in pairs), dtype=np.int64, count=len(pairs))
    if xs.min() < 0 or max(xs.max(), targets.max()) >= net.vocab_size:
        raise IndexError("training pair references an item outside the vocabulary")
    losses = _train_kernel(net.E, net.W1, net.W2, xs, targets, int(epochs), float(lr), GRAD_CLIP)
    return [float(v) for v in losses]


def loss_and_grads(net: EmbeddingNet, x: int, target: int):
    """Cross-entropy and analytic gradients for one pair, without updating.

    Returns (loss, dE_x, dW1, dW2); the reference implementation for
    gradient-checking tests (no clipping: these are the raw gradients).
    """
    e = net.E[x]
    pre = net.W1.T @ e
    h = np.maximum(pre, 0.0)
    y = _softmax(net.W2.T @ h)
    loss = -np.log(max(y[target], 1e-300))
    dz = y.copy()
    dz[target] -= 1.0
    dW2 = np.outer(h, dz)
    dh = net.W2 @ dz
    dpre = np.where(pre > 0, dh, 0.0)
    dW1 = np.outer(e, dpre)
    dE_x = net.W1 @ dpre
    return float(loss), dE_x, dW1, dW2


def pairs_from_combination(combination: Sequence[int], product: int | None = None,
                           include_product: bool = False) -> list[TrainingPair]:
    """Skip-gram pairs: every ordered pair of distinct positions in the combination.

    The product is excluded unless include_product is set (ablation flag), in
    which case it joins the context window as one extra position.
    """
    window = list(combination)
    if include_product and product is not None:
        window.append(product)
    return [(a, b) for i, a in enumerate(window) for j, b in enumerate(window) if i != j]


def predict_partner(net: EmbeddingNet, x: int, candidates: Iterable[int], mode: str = "sample",
                    rng: np.random.Generator | None = None) -> int:
    """Most likely combination partner of x among the candidate items.

    argmax: highest renormalized probability, ties to the lowest id.
    sample: draw from the renormalized distribution (needs rng).
    """
    if isinstance(candidates, np.ndarray):
        cand = np.unique(candidates)
    else:
        cand = np.fromiter(sorted(set(candidates)), dtype=np.int64)
    if len(cand) == 0:
        raise ValueError("candidate set must be non-empty")
    y = forward(net, x)
    weights = y[cand]
    if mode == "argmax":
        return int(cand[int(np.argmax(weights))])
    if mode == "sample":
        if rng is None:
            raise ValueError("sample mode requires an rng")
        cum = np.cumsum(weights)
        idx = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
        return int(cand[min(idx, len(cand) - 1)])
    raise ValueError(f"unknown prediction mode {mode!r}")


def similarity(net: EmbeddingNet, i: int, j: int) -> float:
    """Cosine similarity of the embedding rows; 0 if either row has zero norm."""
    a, b = net.E[i], net.E[j]
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def perturb_net(net: EmbeddingNet, sd: float, rng: np.random.Generator) -> EmbeddingNet:
    """Copy with i.i.d. N(0, sd^2) noise on every weight (noisy inheritance)."""
    if sd < 0:
        raise ValueError("noise sd must be >= 0")
    out = net.copy()
    if sd > 0:
        out.E += rng.normal(0.0, sd, size=out.E.shape)
        out.W1 += rng.normal(0.0, sd, size=out.W1.shape)
        out.W2 += rng.normal(0.0, sd, size=out.W2.shape)
    return out


def export_similarity_matrix(net: EmbeddingNet) -> np.ndarray:
    """Full pairwise cosine matrix over the vocabulary (zero-norm rows map to 0)."""
    norms = np.linalg.norm(net.E, axis=1)
    safe = np.where(norms == 0.0, 1.0, norms)
    unit = net.E / safe[:, None]
    sim = np.clip(unit @ unit.T, -1.0, 1.0)
    np.fill_diagonal(sim, np.where(norms == 0.0, 0.0, 1.0))
    return sim


def save_similarity_csv(matrix: np.ndarray, path: str | Path, labels: Sequence[str] | None = None) -> None:
    n = matrix.shape[0]
    labels = list(labels) if labels is not None else [str(i) for i in range(n)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(labels)
        for row in matrix:
            writer.writerow([f"{v:.10g}" for v in row])


def load_similarity_csv(path: str | Path) -> np.ndarray:
    """Read a header-labeled square similarity matrix (e.g. an external reference)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty similarity CSV")
    n = len(rows[0])
    data = rows[1:]
    if len(data) != n or any(len(r) != n for r in data):
        raise ValueError(f"{path}: similarity CSV must be square with one header row")
    return np.array([[float(v) for v in row] for row in data])
