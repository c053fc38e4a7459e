"""Gated diffusive unit and the synchronous diffusion over the news graph.

A unit takes a node feature ``x`` and two neighbour-state ports ``z``
and ``t``. The forget gate scales ``z``, the adjust gate scales ``t``,
and two selection gates ``g``/``r`` mix four tanh transforms of the
original and gated port combinations:

    f = σ(W_f[x;z;t])   z~ = f ⊙ z
    e = σ(W_e[x;z;t])   t~ = e ⊙ t
    g = σ(W_g[x;z;t])   r  = σ(W_r[x;z;t])
    h = g⊙r⊙tanh(W_u[x;z~;t~]) + (1-g)⊙r⊙tanh(W_u[x;z;t~])
      + g⊙(1-r)⊙tanh(W_u[x;z~;t]) + (1-g)⊙(1-r)⊙tanh(W_u[x;z;t])

Articles read subjects on ``z`` and their creator on ``t``; creators and
subjects read their articles on ``z`` and zero on ``t``.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from credinfer import numgrad as ng
from credinfer.graph import Hsn

GATES = ("f", "e", "g", "r", "u")


@dataclass
class GduParams:
    W_f: object
    b_f: object
    W_e: object
    b_e: object
    W_g: object
    b_g: object
    W_r: object
    b_r: object
    W_u: object
    b_u: object

    @classmethod
    def init(cls, rng, in_dim: int, state_dim: int) -> "GduParams":
        width = in_dim + 2 * state_dim
        kw = {}
        for gate in GATES:
            kw[f"W_{gate}"] = ng.glorot_uniform(rng, (state_dim, width))
            kw[f"b_{gate}"] = np.zeros(state_dim)
        return cls(**kw)

    def named(self):
        return [(f.name, getattr(self, f.name)) for f in fields(self)]

    def map(self, fn) -> "GduParams":
        return GduParams(**{name: fn(name, v) for name, v in self.named()})

    @property
    def state_dim(self) -> int:
        return np.shape(_data(self.W_f))[0]

    @property
    def in_dim(self) -> int:
        return np.shape(_data(self.W_f))[1] - 2 * self.state_dim


def _data(x):
    return x.data if isinstance(x, ng.Tensor) else x


def _check_dims(x, z, t, p: GduParams) -> None:
    S = p.state_dim
    width = np.shape(_data(p.W_f))[1]
    for name, _ in p.named():
        shape = np.shape(_data(getattr(p, name)))
        want = (S, width) if name.startswith("W") else (S,)
        if shape != want:
            raise ng.DimensionError(f"GDU matrix {name} has shape {shape}, expected {want}")
    xs, zs, ts = (np.shape(_data(v)) for v in (x, z, t))
    if zs[-1] != S or ts[-1] != S or xs[-1] + 2 * S != width or not (xs[:-1] == zs[:-1] == ts[:-1]):
        raise ng.DimensionError(
            f"GDU inputs x{xs}, z{zs}, t{ts} do not fit W_f {(S, width)} (state_dim {S})"
        )


def gdu_forward(x, z, t, p: GduParams, return_gates: bool = False):
    """Output state for input ``x`` and port states ``z`` (subjects/articles) and ``t``.

    Works on single vectors or row batches. With ``return_gates`` the
    dict of gate tensors ``f, e, g, r`` is returned as well.
    """
    _check_dims(x, z, t, p)
    xzt = ng.concat([x, z, t])
    f = ng.sigmoid(ng.affine(p.W_f, xzt, p.b_f))
    e = ng.sigmoid(ng.affine(p.W_e, xzt, p.b_e))
    g = ng.sigmoid(ng.affine(p.W_g, xzt, p.b_g))
    r = ng.sigmoid(ng.affine(p.W_r, xzt, p.b_r))
    z_t = ng.hadamard(f, z)
    t_t = ng.hadamard(e, t)
    both = ng.tanh(ng.affine(p.W_u, ng.concat([x, z_t, t_t]), p.b_u))
    adj_only = ng.tanh(ng.affine(p.W_u, ng.concat([x, z, t_t]), p.b_u))
    fgt_only = ng.tanh(ng.affine(p.W_u, ng.concat([x, z_t, t]), p.b_u))
    plain = ng.tanh(ng.affine(p.W_u, xzt, p.b_u))
    h = ng.inside_unit(ng.gdu_mix(g, r, both, adj_only, fgt_only, plain))
    if return_gates:
        return h, {"f": f, "e": e, "g": g, "r": r}
    return h


def aggregate_neighbors(states: Mapping[str, np.ndarray], ids, state_dim: int | None = None) -> np.ndarray:
    """Mean of the states named by ``ids``; the zero vector when ``ids`` is empty."""
    ids = list(ids)
    for nid in ids:
        if nid not in states:
            raise KeyError(f"no state for node {nid!r}")
    if not ids:
        if state_dim is None:
            state_dim = len(next(iter(states.values())))
        return np.zeros(state_dim)
    return np.mean([np.asarray(states[n], dtype=np.float64) for n in ids], axis=0)


@dataclass(frozen=True)
class Csr:
    indptr: np.ndarray
    indices: np.ndarray

    @classmethod
    def from_lists(cls, lists: Sequence[Sequence[int]]) -> "Csr":
        indptr = np.zeros(len(lists) + 1, dtype=np.int64)
        indptr[1:] = np.cumsum([len(x) for x in lists])
        indices = np.fromiter((i for x in lists for i in x), dtype=np.int64, count=int(indptr[-1]))
        return cls(indptr, indices)


@dataclass(frozen=True)
class GraphIndex:
    """Row-index adjacency in canonical node order, for batched diffusion."""

    n_articles: int
    n_creators: int
    n_subjects: int
    article_creator: np.ndarray
    article_subjects: Csr
    creator_articles: Csr
    subject_articles: Csr

    @classmethod
    def build(cls, hsn: Hsn) -> "GraphIndex":
        apos, cpos, spos = (hsn.position(t) for t in ("article", "creator", "subject"))
        aids = hsn.ids("article")
        art_creator = np.array([cpos[hsn.authorship[a]] for a in aids], dtype=np.int64)
        art_subj = [sorted(spos[s] for s in hsn.subject_links.get(a, ())) for a in aids]
        by_c = hsn.articles_of_creator()
        by_s = hsn.articles_of_subject()
        cr_art = [sorted(apos[a] for a in by_c[c]) for c in hsn.ids("creator")]
        sb_art = [sorted(apos[a] for a in by_s[s]) for s in hsn.ids("subject")]
        return cls(
            len(aids), len(cpos), len(spos), art_creator,
            Csr.from_lists(art_subj), Csr.from_lists(cr_art), Csr.from_lists(sb_art),
        )


@dataclass
class DiffusionState:
    """Per-category row-stacked states in canonical node order."""

    article: ng.Tensor
    creator: ng.Tensor
    subject: ng.Tensor
    iteration: int

    def by_type(self, node_type: str) -> ng.Tensor:
        return getattr(self, node_type)

    def as_dict(self, hsn: Hsn) -> dict[str, np.ndarray]:
        out = {}
        for nt in ("article", "creator", "subject"):
            data = self.by_type(nt).data
            for i, nid in enumerate(hsn.ids(nt)):
                out[nid] = data[i]
        return out


def diffuse(index: GraphIndex, features: Mapping[str, object], params: Mapping[str, GduParams], K: int) -> DiffusionState:
    """``K`` synchronous rounds of GDU updates from all-zero states.

    ``features`` maps each node type to its row-stacked feature matrix
    (canonical order). Every round reads only the previous round's states.
    """
    if K < 1:
        raise ValueError("K must be at least 1")
    S = params["article"].state_dim
    for nt in ("creator", "subject"):
        if params[nt].state_dim != S:
            raise ng.DimensionError("all categories must share one state_dim")
    h_a = ng.Tensor(np.zeros((index.n_articles, S)))
    h_c = ng.Tensor(np.zeros((index.n_creators, S)))
    h_s = ng.Tensor(np.zeros((index.n_subjects, S)))
    zero_c = np.zeros((index.n_creators, S))
    zero_s = np.zeros((index.n_subjects, S))
    for _ in range(K):
        z_a = ng.segment_mean(h_s, index.article_subjects.indptr, index.article_subjects.indices)
        t_a = ng.take_rows(h_c, index.article_creator)
        z_c = ng.segment_mean(h_a, index.creator_articles.indptr, index.creator_articles.indices)
        z_s = ng.segment_mean(h_a, index.subject_articles.indptr, index.subject_articles.indices)
        h_a, h_c, h_s = (
            gdu_forward(features["article"], z_a, t_a, params["article"]),
            gdu_forward(features["creator"], z_c, zero_c, params["creator"]),
            gdu_forward(features["subject"], z_s, zero_s, params["subject"]),
        )
    return DiffusionState(h_a, h_c, h_s, K)


# ---------------------------------------------------------------------------
# checkpoint format
# ---------------------------------------------------------------------------

MAGIC = b"GDUCKPT1"


def save_arrays(path, header: dict, arrays: Sequence[tuple[str, np.ndarray]]) -> None:
    """Flat binary checkpoint.

    Layout: 8-byte magic, little-endian uint32 header length, UTF-8 JSON
    header (caller fields plus the name and shape of every matrix), then
    every matrix as float64 little-endian in declaration order.
    """
    meta = dict(header)
    meta["arrays"] = [[name, list(np.shape(a))] for name, a in arrays]
    blob = json.dumps(meta, sort_keys=True).encode("utf-8")
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", len(blob)))
    buf.write(blob)
    for _, a in arrays:
        buf.write(np.ascontiguousarray(a, dtype="<f8").tobytes())
    Path(path).write_bytes(buf.getvalue())


def load_arrays(path) -> tuple[dict, list[tuple[str, np.ndarray]]]:
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise ValueError(f"{path}: not a checkpoint file")
    (n,) = struct.unpack("<I", raw[8:12])
    meta = json.loads(raw[12 : 12 + n].decode("utf-8"))
    off = 12 + n
    arrays = []
    for name, shape in meta.pop("arrays"):
        count = int(np.prod(shape)) if shape else 1
        a = np.frombuffer(raw, dtype="<f8", count=count, offset=off).reshape(shape).astype(np.float64)
        off += 8 * count
        arrays.append((name, a))
    if off != len(raw):
        raise ValueError(f"{path}: {len(raw) - off} trailing bytes")
    return meta, arrays
