"""Small sentence CNN with manual backpropagation.

Frozen word embeddings -> 1-D convolutions (widths 2/3/4, 20 maps each) ->
ReLU -> max-over-time pooling -> linear layer -> softmax. Documents shorter
than the widest filter are zero-padded to length 4.
"""

from __future__ import annotations

import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .corpus import Document

WIDTHS = (2, 3, 4)
N_MAPS = 20
MIN_LEN = 4
MAGIC = b"JCNN"
VERSION = 1


class ModelFormatError(ValueError):
    pass


@dataclass
class CnnHyperparams:
    lr: float = 1e-3
    batch_size: int = 16
    pretrain_epochs: int = 5
    max_self_train_epochs: int = 50
    min_improvement: float = 1e-4
    change_threshold: float = 0.001
    seed: int = 0

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError("learning rate must be > 0")
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")
        if self.pretrain_epochs < 0 or self.max_self_train_epochs < 1:
            raise ValueError("epoch counts out of range")


@dataclass
class CnnModel:
    embeddings: np.ndarray          # (V, dim), frozen
    filters: list[np.ndarray]       # per width: (maps, width, dim)
    biases: list[np.ndarray]        # per width: (maps,)
    out_w: np.ndarray               # (maps * len(widths), C)
    out_b: np.ndarray               # (C,)
    widths: tuple[int, ...] = WIDTHS
    fallback_class: int = 0

    def __post_init__(self):
        self.widths = tuple(self.widths)
        if self.n_classes < 2:
            raise ValueError("a classifier head needs at least 2 classes")
        if self.out_w.shape[0] != self.n_features:
            raise ValueError("output layer does not match pooled feature length")
        self._table = None

    @classmethod
    def initialize(cls, embeddings, n_classes, rng, widths=WIDTHS, n_maps=N_MAPS):
        embeddings = np.asarray(embeddings, dtype=np.float64)
        dim = embeddings.shape[1]
        filters, biases = [], []
        for w in widths:
            bound = np.sqrt(6.0 / (w * dim + n_maps))
            filters.append(rng.uniform(-bound, bound, size=(n_maps, w, dim)))
            biases.append(np.zeros(n_maps))
        n_feat = n_maps * len(widths)
        bound = np.sqrt(6.0 / (n_feat + n_classes))
        return cls(embeddings.copy(), filters, biases,
                   rng.uniform(-bound, bound, size=(n_feat, n_classes)), np.zeros(n_classes),
                   tuple(widths))

    @property
    def n_classes(self) -> int:
        return self.out_b.shape[0]

    @property
    def n_maps(self) -> int:
        return self.filters[0].shape[0]

    @property
    def n_features(self) -> int:
        return sum(f.shape[0] for f in self.filters)

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]

    def params(self) -> dict[str, np.ndarray]:
        """Trainable parameters by name (views, not copies)."""
        out = {}
        for w, f, b in zip(self.widths, self.filters, self.biases):
            out[f"filter{w}"] = f
            out[f"bias{w}"] = b
        out["out_w"] = self.out_w
        out["out_b"] = self.out_b
        return out

    def copy(self) -> "CnnModel":
        return CnnModel(self.embeddings, [f.copy() for f in self.filters],
                        [b.copy() for b in self.biases], self.out_w.copy(), self.out_b.copy(),
                        self.widths, self.fallback_class)

    # embedding table with a trailing zero row for padding
    def lookup_table(self):
        if self._table is None or self._table.shape[0] != self.embeddings.shape[0] + 1:
            self._table = np.vstack([self.embeddings, np.zeros((1, self.dim))])
        return self._table

    # -- serialization -----------------------------------------------------

    def save(self, path):
        head = MAGIC + bytes([VERSION]) + struct.pack(
            "<iiiii", self.embeddings.shape[0], self.dim, len(self.widths), self.n_maps,
            self.n_classes)
        head += struct.pack(f"<{len(self.widths)}i", *self.widths)
        head += struct.pack("<i", self.fallback_class)
        blocks = [self.embeddings]
        for f, b in zip(self.filters, self.biases):
            blocks += [f, b]
        blocks += [self.out_w, self.out_b]
        with open(path, "wb") as fh:
            fh.write(head)
            for blk in blocks:
                fh.write(np.ascontiguousarray(blk, dtype="<f4").tobytes())

    @classmethod
    def load(cls, path) -> "CnnModel":
        with open(path, "rb") as fh:
            data = fh.read()
        if len(data) < 25 or data[:4] != MAGIC:
            raise ModelFormatError(f"{path}: not a JCNN file")
        if data[4] != VERSION:
            raise ModelFormatError(f"{path}: unsupported version {data[4]}")
        n_v, dim, n_w, n_maps, n_c = struct.unpack_from("<iiiii", data, 5)
        pos = 25
        if not (0 < n_w <= 16) or min(n_v, dim, n_maps, n_c) <= 0:
            raise ModelFormatError(f"{path}: corrupt dimensions")
        try:
            widths = struct.unpack_from(f"<{n_w}i", data, pos)
            pos += 4 * n_w
            (fallback,) = struct.unpack_from("<i", data, pos)
            pos += 4
        except struct.error as exc:
            raise ModelFormatError(f"{path}: truncated header") from exc
        shapes = [(n_v, dim)]
        for w in widths:
            shapes += [(n_maps, w, dim), (n_maps,)]
        shapes += [(n_maps * n_w, n_c), (n_c,)]
        need = sum(int(np.prod(s)) for s in shapes) * 4
        if len(data) - pos != need:
            raise ModelFormatError(f"{path}: expected {need} parameter bytes, found {len(data) - pos}")
        arrays = []
        for s in shapes:
            n = int(np.prod(s))
            arrays.append(np.frombuffer(data, dtype="<f4", count=n, offset=pos).astype(np.float64).reshape(s))
            pos += 4 * n
        if not all(np.isfinite(a).all() for a in arrays):
            raise ModelFormatError(f"{path}: non-finite parameters")
        if not 0 <= fallback < n_c:
            raise ModelFormatError(f"{path}: fallback class out of range")
        return cls(arrays[0], arrays[1:-2:2], arrays[2:-2:2], arrays[-2], arrays[-1],
                   tuple(widths), fallback)


# ---------------------------------------------------------------------------
# forward / backward


def _as_ids(doc):
    return doc.token_ids if isinstance(doc, Document) else doc


def _pad(docs, n_vocab):
    lengths = np.array([max(len(_as_ids(d)), MIN_LEN) for d in docs], dtype=np.int64)
    width = int(lengths.max()) if len(docs) else MIN_LEN
    ids = np.full((len(docs), width), n_vocab, dtype=np.int64)  # n_vocab -> zero row
    for i, d in enumerate(docs):
        t = _as_ids(d)
        ids[i, :len(t)] = t
    return ids, lengths


def _unfold(X, w):
    # (B, L, dim) -> (B, L - w + 1, w * dim)
    P = X.shape[1] - w + 1
    return np.concatenate([X[:, j:j + P, :] for j in range(w)], axis=2)


def _forward(model: CnnModel, docs):
    ids, lengths = _pad(docs, model.embeddings.shape[0])
    X = model.lookup_table()[ids]
    B = X.shape[0]
    feats, cache = [], []
    for w, f, b in zip(model.widths, model.filters, model.biases):
        U = _unfold(X, w)
        conv = U @ f.reshape(f.shape[0], -1).T + b          # (B, P, maps)
        act = np.maximum(conv, 0.0)
        valid = np.arange(U.shape[1])[None, :] <= (lengths - w)[:, None]
        act[~valid] = 0.0
        idx = act.argmax(axis=1)                            # (B, maps)
        pooled = np.take_along_axis(act, idx[:, None, :], axis=1)[:, 0, :]
        feats.append(pooled)
        cache.append((U, idx, pooled))
    H = np.concatenate(feats, axis=1) if B else np.zeros((0, model.n_features))
    logits = H @ model.out_w + model.out_b
    logits -= logits.max(axis=1, keepdims=True)
    q = np.exp(logits)
    q /= q.sum(axis=1, keepdims=True)
    return q, (H, cache)


def predict_batch(docs, model: CnnModel, batch_size: int = 512, threads: int = 1) -> np.ndarray:
    """Class probabilities for every document, shape (n_docs, C)."""
    docs = list(docs)
    if not docs:
        return np.zeros((0, model.n_classes))
    chunks = [docs[i:i + batch_size] for i in range(0, len(docs), batch_size)]
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(lambda c: _forward(model, c)[0], chunks))
    else:
        parts = [_forward(model, c)[0] for c in chunks]
    return np.vstack(parts)


def forward(doc, model: CnnModel) -> np.ndarray:
    return _forward(model, [doc])[0][0]


def cross_entropy(targets: np.ndarray, q: np.ndarray) -> float:
    """Mean over rows of ``-sum_t p_t log q_t``."""
    logq = np.log(np.where(targets > 0, q, 1.0))
    return float(-(targets * logq).sum(axis=1).mean())


def loss_and_grads(model: CnnModel, docs, targets):
    """Mean distillation cross-entropy over the batch and its gradients."""
    targets = np.asarray(targets, dtype=np.float64)
    q, (H, cache) = _forward(model, docs)
    B = q.shape[0]
    loss = cross_entropy(targets, q)
    dlogits = (q - targets) / B
    grads = {"out_w": H.T @ dlogits, "out_b": dlogits.sum(axis=0)}
    dH = dlogits @ model.out_w.T
    col = 0
    for w, f, (U, idx, pooled) in zip(model.widths, model.filters, cache):
        maps = f.shape[0]
        dpool = dH[:, col:col + maps] * (pooled > 0)
        col += maps
        Ug = np.take_along_axis(U, idx[:, :, None], axis=1)   # (B, maps, w*dim)
        gf = np.einsum("bmk,bm->mk", Ug, dpool)
        grads[f"filter{w}"] = gf.reshape(f.shape)
        grads[f"bias{w}"] = dpool.sum(axis=0)
    return loss, grads


def distill_step(model: CnnModel, docs, targets, lr: float) -> float:
    """One plain-SGD step on the batch; returns the pre-update mean loss."""
    loss, grads = loss_and_grads(model, docs, targets)
    params = model.params()
    for name, g in grads.items():
        params[name] -= lr * g
    return loss


def train_epoch(model: CnnModel, docs, targets, hp: CnnHyperparams, rng) -> float:
    """Shuffled mini-batch SGD over all documents; returns mean batch loss."""
    targets = np.asarray(targets, dtype=np.float64)
    order = rng.permutation(len(docs))
    total, n_batches = 0.0, 0
    for start in range(0, len(order), hp.batch_size):
        sel = order[start:start + hp.batch_size]
        total += distill_step(model, [docs[i] for i in sel], targets[sel], hp.lr)
        n_batches += 1
    return total / max(n_batches, 1)
