"""Hybrid text features: explicit word counts plus GRU-encoded latent vectors.

Each node category (article, creator, subject) has its own discriminative
word set and its own encoder parameters. The explicit part counts the
occurrences of each selected word; the latent part runs a GRU over the
token sequence and squashes the fused sum of hidden states through a
sigmoid.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field, fields
from typing import Iterable, Mapping, Sequence

import numpy as np

from credinfer import numgrad as ng
from credinfer.graph import NODE_TYPES, Hsn

UNK = "<unk>"
PAD_INDEX = 0

DEFAULT_STOP_WORDS = frozenset(
    """a about above after again against all am an and any are as at be because been before
    being below between both but by can could did do does doing down during each few for from
    further had has have having he her here hers herself him himself his how i if in into is it
    its itself just me more most my myself no nor not now of off on once only or other our ours
    ourselves out over own same she should so some such than that the their theirs them
    themselves then there these they this those through to too under until up very was we were
    what when where which while who whom why will with would you your yours yourself
    yourselves""".split()
)

_NON_ALNUM = re.compile(r"[^0-9A-Za-z]+")


@dataclass(frozen=True)
class TokenizerConfig:
    lowercase: bool = True
    stop_words: frozenset[str] = DEFAULT_STOP_WORDS


def tokenize(text: str, config: TokenizerConfig | None = None) -> list[str]:
    """Lowercase, replace non-alphanumerics with spaces, split, drop stop words."""
    config = config or TokenizerConfig()
    if config.lowercase:
        text = text.lower()
    return [t for t in _NON_ALNUM.sub(" ", text).split() if t not in config.stop_words]


@dataclass(frozen=True)
class Vocab:
    """Full token list plus one discriminative word set per node category.

    ``tokens[0]`` is the reserved unknown-token entry. Encoded sequence
    indices are ``position + 1`` so that 0 stays free for padding.
    """

    tokens: tuple[str, ...]
    wordsets: dict[str, tuple[str, ...]]
    tokenizer: TokenizerConfig = field(default_factory=TokenizerConfig, compare=False)
    _pos: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if not self.tokens or self.tokens[0] != UNK:
            raise ValueError("vocabulary must start with the unknown-token entry")
        self._pos.update({t: i for i, t in enumerate(self.tokens)})
        if len(self._pos) != len(self.tokens):
            raise ValueError("duplicate tokens in vocabulary")
        for cat, ws in self.wordsets.items():
            missing = [w for w in ws if w not in self._pos]
            if missing:
                raise ValueError(f"{cat} word set contains unknown tokens {missing[:3]}")

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def d(self) -> int:
        return len(next(iter(self.wordsets.values())))

    def position(self, token: str) -> int:
        return self._pos.get(token, 0)

    def encode_token(self, token: str) -> int:
        return self.position(token) + 1

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("[W]\n")
            fh.writelines(t + "\n" for t in self.tokens)
            for cat in NODE_TYPES:
                if cat in self.wordsets:
                    fh.write(f"[W_{cat}]\n")
                    fh.writelines(t + "\n" for t in self.wordsets[cat])

    @classmethod
    def load(cls, path, tokenizer: TokenizerConfig | None = None) -> "Vocab":
        sections: dict[str, list[str]] = {}
        current = None
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if line.startswith("[") and line.endswith("]"):
                    current = line[1:-1]
                    sections[current] = []
                elif current is None:
                    raise ValueError(f"{path}: token before any section header")
                else:
                    sections[current].append(line)
        tokens = tuple(sections.pop("W"))
        wordsets = {name[2:]: tuple(v) for name, v in sections.items()}
        return cls(tokens, wordsets, tokenizer or TokenizerConfig())


def contrast_scores(pos_counts: Counter, neg_counts: Counter, candidates: Iterable[str]) -> dict[str, float]:
    """log((count_true + 1) / (count_false + 1)) for each candidate."""
    return {t: math.log((pos_counts[t] + 1) / (neg_counts[t] + 1)) for t in candidates}


def rank_discriminative(pos_counts: Counter, neg_counts: Counter, candidates: Sequence[str], d: int) -> tuple[str, ...]:
    """Top ``d`` candidates by absolute contrast; ties broken lexicographically."""
    scores = contrast_scores(pos_counts, neg_counts, candidates)
    ranked = sorted(candidates, key=lambda t: (-abs(scores[t]), t))
    return tuple(ranked[:d])


def build_vocab(
    hsn: Hsn,
    d: int,
    tokenizer_config: TokenizerConfig | None = None,
    train_ids: Mapping[str, Iterable[str]] | None = None,
) -> Vocab:
    """Vocabulary over every text in the graph; word sets from training labels.

    ``train_ids`` restricts, per node type, which nodes' labels and texts
    feed the word-set ranking (default: every labelled node). Labels are
    grouped into the positive/negative polarity classes.
    """
    cfg = tokenizer_config or TokenizerConfig()
    if d < 1:
        raise ValueError("d must be at least 1")
    all_tokens: set[str] = set()
    for nt in NODE_TYPES:
        for nid in hsn.ids(nt):
            all_tokens.update(tokenize(hsn.text_of(nt, nid), cfg))
    candidates = sorted(all_tokens - {UNK})
    if d > len(candidates):
        raise ValueError(f"d={d} exceeds the {len(candidates)} distinct tokens available")
    wordsets = {}
    for nt in NODE_TYPES:
        ids = hsn.ids(nt) if train_ids is None else sorted(train_ids[nt])
        pos, neg = Counter(), Counter()
        for nid in ids:
            label = hsn.label_of(nt, nid)
            if label is None:
                continue
            (pos if label.positive else neg).update(tokenize(hsn.text_of(nt, nid), cfg))
        wordsets[nt] = rank_discriminative(pos, neg, candidates, d)
    return Vocab((UNK, *candidates), wordsets, cfg)


def explicit_features(text: str, wordset: Sequence[str], tokenizer_config: TokenizerConfig | None = None) -> np.ndarray:
    counts = Counter(tokenize(text, tokenizer_config))
    return np.array([counts[w] for w in wordset], dtype=np.float64)


def explicit_matrix(texts: Sequence[str], wordset: Sequence[str], tokenizer_config=None) -> np.ndarray:
    out = np.zeros((len(texts), len(wordset)))
    col = {w: j for j, w in enumerate(wordset)}
    for i, text in enumerate(texts):
        for tok in tokenize(text, tokenizer_config):
            j = col.get(tok)
            if j is not None:
                out[i, j] += 1.0
    return out


@dataclass(frozen=True)
class EncodedText:
    indices: tuple[int, ...]
    true_length: int


def encode_text(text: str, vocab: Vocab, q: int) -> EncodedText:
    """First ``q`` tokens as vocabulary indices, zero-padded to length ``q``."""
    if q < 1:
        raise ValueError("q must be at least 1")
    toks = tokenize(text, vocab.tokenizer)[:q]
    idx = [vocab.encode_token(t) for t in toks]
    return EncodedText(tuple(idx + [PAD_INDEX] * (q - len(idx))), len(idx))


@dataclass
class HfluParams:
    """Embedding, GRU and fusion weights of one node category.

    Fields hold numpy arrays, or tensors while a tape is recording.
    """

    embedding: object
    W_z: object
    U_z: object
    b_z: object
    W_r: object
    U_r: object
    b_r: object
    W_h: object
    U_h: object
    b_h: object
    W_i: object
    b_i: object

    @classmethod
    def init(cls, rng, vocab_size: int, e_dim: int, hidden_dim: int, latent_dim: int) -> "HfluParams":
        emb = ng.glorot_uniform(rng, (vocab_size + 1, e_dim))
        emb[PAD_INDEX] = 0.0
        g = lambda shape: ng.glorot_uniform(rng, shape)  # noqa: E731
        z = np.zeros
        return cls(
            emb,
            g((hidden_dim, e_dim)), g((hidden_dim, hidden_dim)), z(hidden_dim),
            g((hidden_dim, e_dim)), g((hidden_dim, hidden_dim)), z(hidden_dim),
            g((hidden_dim, e_dim)), g((hidden_dim, hidden_dim)), z(hidden_dim),
            g((latent_dim, hidden_dim)), z(latent_dim),
        )

    def named(self):
        return [(f.name, getattr(self, f.name)) for f in fields(self)]

    def map(self, fn) -> "HfluParams":
        return HfluParams(**{name: fn(name, v) for name, v in self.named()})

    @property
    def hidden_dim(self) -> int:
        return np.shape(_data(self.U_z))[0]

    @property
    def latent_dim(self) -> int:
        return np.shape(_data(self.W_i))[0]


def _data(x):
    return x.data if isinstance(x, ng.Tensor) else x


def gru_step(x, h, p: HfluParams) -> ng.Tensor:
    """One GRU update for a batch of rows (or a single vector)."""
    z = ng.sigmoid(ng.add(ng.affine(p.W_z, x, p.b_z), ng.affine(p.U_z, h)))
    r = ng.sigmoid(ng.add(ng.affine(p.W_r, x, p.b_r), ng.affine(p.U_r, h)))
    c = ng.tanh(ng.add(ng.affine(p.W_h, x, p.b_h), ng.affine(p.U_h, ng.hadamard(r, h))))
    return ng.interpolate(z, c, h)


def latent_features(enc, params: HfluParams) -> ng.Tensor:
    """Sigmoid-fused sum of GRU states over the real (unpadded) tokens.

    ``enc`` is one :class:`EncodedText` (vector result) or a sequence of
    them (one row per text). Padding steps are skipped, so an empty text
    yields ``sigmoid(b_i)``.
    """
    single = isinstance(enc, EncodedText)
    batch = [enc] if single else list(enc)
    H = params.hidden_dim
    emb_rows = np.shape(_data(params.embedding))[0]
    lengths = np.array([e.true_length for e in batch], dtype=np.int64)
    T = int(lengths.max()) if len(batch) else 0
    idx = np.array([e.indices[:T] for e in batch], dtype=np.int64).reshape(len(batch), T)
    if idx.size and idx.max() >= emb_rows:
        raise ng.DimensionError(f"token index {idx.max()} outside embedding table of {emb_rows} rows")
    h = ng.Tensor(np.zeros((len(batch), H)))
    total = h
    for t in range(T):
        active = lengths > t
        x = ng.take_rows(params.embedding, idx[:, t])
        h_new = gru_step(x, h, params)
        if active.all():
            h = h_new
            total = ng.add(total, h)
        else:
            mask = np.repeat(active[:, None].astype(np.float64), H, axis=1)
            h = ng.interpolate(mask, h_new, h)
            total = ng.add(total, ng.hadamard(mask, h))
    out = ng.sigmoid(ng.affine(params.W_i, total, params.b_i))
    return ng.row(out, 0) if single else out


@dataclass(frozen=True)
class HfluFeature:
    explicit: np.ndarray
    latent: ng.Tensor
    combined: ng.Tensor


def hflu(text: str, category: str, vocab: Vocab, params: HfluParams, q: int) -> HfluFeature:
    """Explicit + latent feature vector for one node's text."""
    explicit = explicit_features(text, vocab.wordsets[category], vocab.tokenizer)
    latent = latent_features(encode_text(text, vocab, q), params)
    return HfluFeature(explicit, latent, ng.concat([explicit, latent]))


def hflu_batch(texts: Sequence[str], category: str, vocab: Vocab, params: HfluParams, q: int,
               explicit: np.ndarray | None = None, encoded: Sequence[EncodedText] | None = None) -> ng.Tensor:
    """Row-stacked combined features for many texts of one category."""
    if explicit is None:
        explicit = explicit_matrix(texts, vocab.wordsets[category], vocab.tokenizer)
    if encoded is None:
        encoded = [encode_text(t, vocab, q) for t in texts]
    return ng.concat([explicit, latent_features(encoded, params)])
