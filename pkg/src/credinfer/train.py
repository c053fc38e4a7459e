"""Output heads, the joint objective, and full-batch gradient descent."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from credinfer import numgrad as ng
from credinfer.features import (
    EncodedText,
    HfluParams,
    PAD_INDEX,
    Vocab,
    encode_text,
    explicit_matrix,
    latent_features,
)
from credinfer.gdu import DiffusionState, GduParams, GraphIndex, diffuse, load_arrays, save_arrays
from credinfer.graph import NODE_TYPES, CredLabel, Hsn, subseed

log = logging.getLogger(__name__)

MODES = ("bi", "multi")


@dataclass(frozen=True)
class TrainConfig:
    d: int = 200
    e_dim: int = 64
    hidden_dim: int = 64
    latent_dim: int = 64
    state_dim: int = 64
    q: int = 48
    K: int = 2
    alpha: float = 1e-4
    learning_rate: float = 0.5
    momentum: float = 0.9
    epochs: int = 100
    grad_clip: float = 1.0
    per_node_step: bool = True
    seed: int = 0
    mode: str = "bi"
    train_space: str = "matched"
    fold: int = 0
    theta: float = 1.0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        if self.K < 1:
            raise ValueError("K must be at least 1")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.train_space not in ("matched", "multi"):
            raise ValueError("train_space must be 'matched' or 'multi'")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        for name in ("d", "e_dim", "hidden_dim", "latent_dim", "state_dim", "q"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")

    @property
    def n_classes(self) -> int:
        return 2 if self.mode == "bi" and self.train_space == "matched" else 6


class NonFiniteLossError(RuntimeError):
    def __init__(self, epoch: int, norms: Mapping[str, float]):
        worst = sorted(norms.items(), key=lambda kv: -kv[1] if math.isfinite(kv[1]) else -math.inf)[:5]
        super().__init__(f"non-finite loss at epoch {epoch}; largest parameter norms {worst}")
        self.epoch = epoch
        self.norms = dict(norms)


def class_index(label: CredLabel, n_classes: int) -> int:
    """Training target: 0 positive / 1 negative for two classes, else 0..5."""
    if n_classes == 2:
        return 0 if label.positive else 1
    return label.index


@dataclass
class ModelParams:
    hflu: dict[str, HfluParams]
    gdu: dict[str, GduParams]
    heads: dict[str, tuple]
    config: TrainConfig
    vocab_size: int

    @classmethod
    def init(cls, config: TrainConfig, vocab_size: int) -> "ModelParams":
        rng = subseed(config.seed, "train/init")
        hflu = {nt: HfluParams.init(rng, vocab_size, config.e_dim, config.hidden_dim, config.latent_dim)
                for nt in NODE_TYPES}
        in_dim = config.d + config.latent_dim
        gdu = {nt: GduParams.init(rng, in_dim, config.state_dim) for nt in NODE_TYPES}
        C = config.n_classes
        heads = {nt: (ng.glorot_uniform(rng, (C, config.state_dim)), np.zeros(C)) for nt in NODE_TYPES}
        return cls(hflu, gdu, heads, config, vocab_size)

    def named(self) -> list[tuple[str, object]]:
        out = []
        for nt in NODE_TYPES:
            out += [(f"{nt}.hflu.{n}", v) for n, v in self.hflu[nt].named()]
        for nt in NODE_TYPES:
            out += [(f"{nt}.gdu.{n}", v) for n, v in self.gdu[nt].named()]
        for nt in NODE_TYPES:
            W, b = self.heads[nt]
            out += [(f"{nt}.head.W", W), (f"{nt}.head.b", b)]
        return out

    def map(self, fn) -> "ModelParams":
        """Copy with every array replaced by ``fn(full_name, value)``."""
        hflu = {nt: self.hflu[nt].map(lambda n, v, nt=nt: fn(f"{nt}.hflu.{n}", v)) for nt in NODE_TYPES}
        gdu = {nt: self.gdu[nt].map(lambda n, v, nt=nt: fn(f"{nt}.gdu.{n}", v)) for nt in NODE_TYPES}
        heads = {nt: (fn(f"{nt}.head.W", self.heads[nt][0]), fn(f"{nt}.head.b", self.heads[nt][1]))
                 for nt in NODE_TYPES}
        return ModelParams(hflu, gdu, heads, self.config, self.vocab_size)

    def track(self, tape: ng.Tape) -> "ModelParams":
        return self.map(lambda name, v: tape.watch(v, name))

    def arrays(self) -> dict[str, np.ndarray]:
        return {n: (v.data if isinstance(v, ng.Tensor) else v) for n, v in self.named()}

    def copy(self) -> "ModelParams":
        return self.map(lambda _, v: np.array(v.data if isinstance(v, ng.Tensor) else v, copy=True))

    def save(self, path) -> None:
        header = {"config": asdict(self.config), "vocab_size": self.vocab_size}
        save_arrays(path, header, list(self.arrays().items()))

    @classmethod
    def load(cls, path) -> "ModelParams":
        meta, arrays = load_arrays(path)
        config = TrainConfig(**meta["config"])
        model = cls.init(config, meta["vocab_size"])
        table = dict(arrays)
        expected = [n for n, _ in model.named()]
        if [n for n, _ in arrays] != expected:
            raise ValueError(f"{path}: parameter layout does not match the configuration")
        return model.map(lambda name, v: table[name])


def weight_matrices(params: ModelParams) -> list:
    """Everything regularised: 2-D arrays (biases are 1-D and excluded)."""
    return [v for _, v in params.named() if np.ndim(v.data if isinstance(v, ng.Tensor) else v) == 2]


@dataclass
class FoldData:
    """Per-fold constant inputs: texts encoded once, explicit counts fixed."""

    hsn: Hsn
    vocab: Vocab
    index: GraphIndex
    explicit: dict[str, np.ndarray]
    encoded: dict[str, list[EncodedText]]
    train_ids: dict[str, tuple[str, ...]]

    @classmethod
    def build(cls, hsn: Hsn, vocab: Vocab, train_ids: Mapping[str, Sequence[str]], q: int) -> "FoldData":
        explicit, encoded = {}, {}
        for nt in NODE_TYPES:
            texts = [hsn.text_of(nt, nid) for nid in hsn.ids(nt)]
            explicit[nt] = explicit_matrix(texts, vocab.wordsets[nt], vocab.tokenizer)
            encoded[nt] = [encode_text(t, vocab, q) for t in texts]
        return cls(hsn, vocab, GraphIndex.build(hsn), explicit, encoded,
                   {nt: tuple(train_ids[nt]) for nt in NODE_TYPES})


def node_features(params: ModelParams, data: FoldData) -> dict[str, ng.Tensor]:
    return {
        nt: ng.concat([data.explicit[nt], latent_features(data.encoded[nt], params.hflu[nt])])
        for nt in NODE_TYPES
    }


def predict(states: DiffusionState, params: ModelParams) -> dict[str, ng.Tensor]:
    """Per node type, row-wise ``softmax(W h + b)`` with that type's head."""
    out = {}
    for nt in NODE_TYPES:
        W, b = params.heads[nt]
        out[nt] = ng.softmax(ng.affine(W, states.by_type(nt), b))
    return out


def forward(params: ModelParams, data: FoldData) -> tuple[DiffusionState, dict[str, ng.Tensor]]:
    states = diffuse(data.index, node_features(params, data), params.gdu, params.config.K)
    return states, predict(states, params)


def predicted_classes(probs: np.ndarray) -> np.ndarray:
    """Arg-max per row; ties go to the lowest class index."""
    return np.argmax(probs, axis=-1)


def loss(predictions: Mapping[str, ng.Tensor], hsn: Hsn, train_ids: Mapping[str, Sequence[str]],
         params: ModelParams, alpha: float) -> ng.Tensor:
    """Summed cross-entropy over training nodes of all types plus alpha * L2.

    Only labels of nodes in ``train_ids`` are read.
    """
    terms = []
    for nt in NODE_TYPES:
        probs = predictions[nt]
        pos = hsn.position(nt)
        if probs.shape[0] != len(pos):
            raise ValueError(f"{nt} predictions cover {probs.shape[0]} of {len(pos)} nodes")
        ids = list(train_ids[nt])
        if not ids:
            continue
        missing = [n for n in ids if n not in pos]
        if missing:
            raise ValueError(f"no {nt} prediction for training node {missing[0]!r}")
        C = probs.shape[1]
        rows = np.array([pos[n] for n in ids], dtype=np.int64)
        target = np.zeros((len(ids), C))
        for i, nid in enumerate(ids):
            label = hsn.label_of(nt, nid)
            if label is None:
                raise ValueError(f"training {nt} {nid!r} has no label")
            target[i, class_index(label, C)] = 1.0
        terms.append(ng.cross_entropy(ng.take_rows(probs, rows), target))
    total = terms[0] if terms else ng.Tensor(np.asarray(0.0))
    for t in terms[1:]:
        total = ng.add(total, t)
    if alpha > 0:
        reg = None
        for W in weight_matrices(params):
            sq = ng.sum_squares(W)
            reg = sq if reg is None else ng.add(reg, sq)
        total = ng.add(total, ng.scale(reg, alpha))
    return total


@dataclass
class TrainResult:
    params: ModelParams
    trace: list[tuple[int, float, float]] = field(default_factory=list)


def fit(hsn: Hsn, vocab: Vocab, train_ids: Mapping[str, Sequence[str]], config: TrainConfig,
        data: FoldData | None = None, init: ModelParams | None = None) -> TrainResult:
    """Full-batch gradient descent (optionally with momentum) on the joint loss.

    Returns the final parameters and a per-epoch trace of
    ``(epoch, loss, gradient norm)``, where the loss is the value before
    that epoch's update.
    """
    if data is None:
        data = FoldData.build(hsn, vocab, train_ids, config.q)
    params = init.copy() if init is not None else ModelParams.init(config, len(vocab))
    arrays = params.arrays()
    velocity = {n: np.zeros_like(a) for n, a in arrays.items()} if config.momentum else None
    n_train = sum(len(v) for v in data.train_ids.values())
    step_scale = 1.0 / max(n_train, 1) if config.per_node_step else 1.0
    trace = []
    for epoch in range(config.epochs):
        tape = ng.Tape()
        tracked = params.track(tape)
        _, probs = forward(tracked, data)
        L = loss(probs, hsn, data.train_ids, tracked, config.alpha)
        value = float(L.data)
        if not math.isfinite(value):
            raise NonFiniteLossError(epoch, {n: float(np.linalg.norm(a)) for n, a in arrays.items()})
        grads = tape.backward(L)
        named_grads = {leaf.name: g for leaf, g in grads.items()}
        for nt in NODE_TYPES:
            named_grads[f"{nt}.hflu.embedding"][PAD_INDEX] = 0.0
        gnorm = math.sqrt(sum(float(np.sum(g * g)) for g in named_grads.values()))
        trace.append((epoch, value, gnorm))
        log.debug("epoch %d loss %.6f grad_norm %.4g", epoch, value, gnorm)
        factor = step_scale
        if config.grad_clip > 0 and gnorm * step_scale > config.grad_clip:
            factor = config.grad_clip / gnorm
        for name, a in arrays.items():
            g = named_grads[name] * factor
            if velocity is not None:
                v = velocity[name]
                v *= config.momentum
                v -= config.learning_rate * g
                a += v
            else:
                a -= config.learning_rate * g
    return TrainResult(params, trace)


def infer(params: ModelParams, data: FoldData) -> dict[str, np.ndarray]:
    """Class probabilities per node type (rows in canonical order), no tape."""
    _, probs = forward(params, data)
    return {nt: p.data for nt, p in probs.items()}


def write_trace(path, trace) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "loss", "grad_norm"])
        for epoch, value, gnorm in trace:
            w.writerow([epoch, repr(value), repr(gnorm)])


# ---------------------------------------------------------------------------
# gradient verification on a toy graph
# ---------------------------------------------------------------------------


def toy_graph() -> Hsn:
    """Three articles, one creator and one subject (five nodes)."""
    from credinfer.graph import Article, Creator, Subject

    articles = {
        "a1": Article("a1", "tax cut plan jobs", CredLabel.TRUE),
        "a2": Article("a2", "tax hoax jobs", CredLabel.FALSE),
        "a3": Article("a3", "plan hoax cut", CredLabel.HALF_TRUE),
    }
    creators = {"c1": Creator("c1", "senator plan", CredLabel.MOSTLY_TRUE)}
    subjects = {"s1": Subject("s1", "economy tax", CredLabel.HALF_TRUE)}
    return Hsn(articles, creators, subjects, {a: "c1" for a in articles},
               {a: frozenset({"s1"}) for a in articles})


def gradient_suite(K: int = 1, dim: int = 2, d: int = 3, mode: str = "bi", seed: int = 0,
                   alpha: float = 1e-2, report: dict | None = None) -> float:
    """Max relative error of tape vs central-difference gradients of the full loss.

    Every parameter of every node type is perturbed. The weights are
    drawn at a larger scale than the usual initialisation so that no
    gradient is trivially tiny.
    """
    from credinfer.features import build_vocab

    hsn = toy_graph()
    vocab = build_vocab(hsn, d)
    cfg = TrainConfig(d=d, e_dim=dim, hidden_dim=dim, latent_dim=dim, state_dim=dim, q=4, K=K,
                      alpha=alpha, mode=mode, seed=seed)
    train_ids = {nt: tuple(hsn.ids(nt)) for nt in NODE_TYPES}
    data = FoldData.build(hsn, vocab, train_ids, cfg.q)
    rng = subseed(seed, "gradcheck")
    base = ModelParams.init(cfg, len(vocab)).map(
        lambda name, v: rng.normal(0.0, 0.8, size=np.shape(v)))
    base.hflu = {nt: p.map(lambda n, v: _zero_pad(v) if n == "embedding" else v)
                 for nt, p in base.hflu.items()}

    def objective(tensors):
        model = base.map(lambda name, _: tensors[name])
        _, probs = forward(model, data)
        return loss(probs, hsn, train_ids, model, alpha)

    return ng.finite_diff_check(objective, base.arrays(), report=report)


def _zero_pad(emb: np.ndarray) -> np.ndarray:
    emb = emb.copy()
    emb[PAD_INDEX] = 0.0
    return emb
