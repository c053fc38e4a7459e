"""News graph data model: articles, creators, subjects and their links.

Records are read from line-delimited JSON files (one object per line):

* articles: ``{"id", "text", "label"}``
* creators: ``{"id", "profile", "label"?}``
* subjects: ``{"id", "description", "label"?}``
* edges: ``{"kind": "authorship" | "subject", "article", "other"}``

Labels use the dashed names in :data:`LABEL_NAMES`.
"""

from __future__ import annotations

import enum
import json
import math
import zlib
from collections import Counter
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

NODE_TYPES = ("article", "creator", "subject")
DATA_FILES = {
    "articles": "articles.jsonl",
    "creators": "creators.jsonl",
    "subjects": "subjects.jsonl",
    "edges": "edges.jsonl",
}


class CredLabel(enum.Enum):
    """Six-level credibility rating; the value is the numeric score."""

    TRUE = 6
    MOSTLY_TRUE = 5
    HALF_TRUE = 4
    MOSTLY_FALSE = 3
    FALSE = 2
    PANTS_ON_FIRE = 1

    @property
    def score(self) -> int:
        return self.value

    @property
    def index(self) -> int:
        """Class index 0..5, most credible first."""
        return 6 - self.value

    @property
    def positive(self) -> bool:
        return self.value >= 4

    @property
    def wire_name(self) -> str:
        return LABEL_NAMES[self]

    @classmethod
    def from_score(cls, score: int) -> "CredLabel":
        return cls(int(score))

    @classmethod
    def from_index(cls, index: int) -> "CredLabel":
        return cls(6 - int(index))

    @classmethod
    def parse(cls, name: str) -> "CredLabel":
        try:
            return _BY_NAME[name]
        except KeyError:
            raise ValueError(f"unknown label {name!r}") from None


LABEL_NAMES = {
    CredLabel.TRUE: "true",
    CredLabel.MOSTLY_TRUE: "mostly-true",
    CredLabel.HALF_TRUE: "half-true",
    CredLabel.MOSTLY_FALSE: "mostly-false",
    CredLabel.FALSE: "false",
    CredLabel.PANTS_ON_FIRE: "pants-on-fire",
}
_BY_NAME = {v: k for k, v in LABEL_NAMES.items()}


@dataclass(frozen=True)
class Article:
    id: str
    text: str
    label: CredLabel | None


@dataclass(frozen=True)
class Creator:
    id: str
    profile: str
    label: CredLabel | None = None


@dataclass(frozen=True)
class Subject:
    id: str
    description: str
    label: CredLabel | None = None


class HsnError(ValueError):
    """Graph construction or loading failed; carries file/line context."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(where + message)
        self.path = path
        self.line = line


@dataclass(frozen=True)
class Hsn:
    """Heterogeneous news graph. Treat as immutable once built.

    Node collections are dicts keyed by id; ``authorship`` maps each
    article to its single creator and ``subject_links`` maps each article
    to the set of subjects it is tagged with.
    """

    articles: dict[str, Article]
    creators: dict[str, Creator]
    subjects: dict[str, Subject]
    authorship: dict[str, str]
    subject_links: dict[str, frozenset[str]]
    _index: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        for aid in self.articles:
            if aid not in self.authorship:
                raise HsnError(f"article {aid!r} has no creator")
        for aid, cid in self.authorship.items():
            if aid not in self.articles:
                raise HsnError(f"authorship references unknown article {aid!r}")
            if cid not in self.creators:
                raise HsnError(f"authorship references unknown creator {cid!r}")
        for aid, sids in self.subject_links.items():
            if aid not in self.articles:
                raise HsnError(f"subject link references unknown article {aid!r}")
            for sid in sids:
                if sid not in self.subjects:
                    raise HsnError(f"subject link references unknown subject {sid!r}")
        authors = set(self.authorship.values())
        for cid in self.creators:
            if cid not in authors:
                raise HsnError(f"creator {cid!r} authors no article")
        tagged = set().union(*self.subject_links.values()) if self.subject_links else set()
        for sid in self.subjects:
            if sid not in tagged:
                raise HsnError(f"subject {sid!r} tags no article")

    # -- canonical ordering -------------------------------------------------

    def ids(self, node_type: str) -> list[str]:
        """Node ids of one type in canonical (sorted) order."""
        key = ("ids", node_type)
        if key not in self._index:
            self._index[key] = sorted(self.nodes(node_type))
        return self._index[key]

    def position(self, node_type: str) -> dict[str, int]:
        key = ("pos", node_type)
        if key not in self._index:
            self._index[key] = {nid: i for i, nid in enumerate(self.ids(node_type))}
        return self._index[key]

    def nodes(self, node_type: str) -> Mapping:
        return {"article": self.articles, "creator": self.creators, "subject": self.subjects}[node_type]

    def text_of(self, node_type: str, node_id: str) -> str:
        node = self.nodes(node_type)[node_id]
        if node_type == "article":
            return node.text
        return node.profile if node_type == "creator" else node.description

    def label_of(self, node_type: str, node_id: str) -> CredLabel | None:
        return self.nodes(node_type)[node_id].label

    def articles_of_creator(self) -> dict[str, list[str]]:
        key = "by_creator"
        if key not in self._index:
            out: dict[str, list[str]] = {cid: [] for cid in self.creators}
            for aid in self.ids("article"):
                out[self.authorship[aid]].append(aid)
            self._index[key] = out
        return self._index[key]

    def articles_of_subject(self) -> dict[str, list[str]]:
        key = "by_subject"
        if key not in self._index:
            out: dict[str, list[str]] = {sid: [] for sid in self.subjects}
            for aid in self.ids("article"):
                for sid in self.subject_links.get(aid, ()):
                    out[sid].append(aid)
            self._index[key] = out
        return self._index[key]

    def n_subject_links(self) -> int:
        return sum(len(s) for s in self.subject_links.values())

    def counts(self) -> dict[str, int]:
        return {
            "articles": len(self.articles),
            "creators": len(self.creators),
            "subjects": len(self.subjects),
            "authorship_links": len(self.authorship),
            "subject_links": self.n_subject_links(),
        }

    def with_labels(self, node_type: str, labels: Mapping[str, CredLabel | None]) -> "Hsn":
        """Copy with labels of ``node_type`` nodes replaced from ``labels``."""
        nodes = dict(self.nodes(node_type))
        for nid, lab in labels.items():
            nodes[nid] = replace(nodes[nid], label=lab)
        kw = {"article": "articles", "creator": "creators", "subject": "subjects"}[node_type]
        return Hsn(
            **{
                "articles": self.articles,
                "creators": self.creators,
                "subjects": self.subjects,
                kw: nodes,
                "authorship": self.authorship,
                "subject_links": self.subject_links,
            }
        )


# ---------------------------------------------------------------------------
# ingestion
# ---------------------------------------------------------------------------


def _records(path: Path) -> Iterable[tuple[int, dict]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise HsnError(f"malformed JSON ({exc.msg})", str(path), lineno) from None
            if not isinstance(obj, dict):
                raise HsnError("record is not an object", str(path), lineno)
            yield lineno, obj


def _field(obj: dict, key: str, path: Path, lineno: int, optional: bool = False):
    if key not in obj or obj[key] is None:
        if optional:
            return None
        raise HsnError(f"missing field {key!r}", str(path), lineno)
    val = obj[key]
    if not isinstance(val, str):
        raise HsnError(f"field {key!r} must be a string", str(path), lineno)
    return val


def _label(obj, path, lineno, optional):
    name = _field(obj, "label", path, lineno, optional)
    if name is None:
        return None
    try:
        return CredLabel.parse(name)
    except ValueError as exc:
        raise HsnError(str(exc), str(path), lineno) from None


def load_hsn(article_path, creator_path, subject_path, edge_path) -> Hsn:
    """Read and validate a graph from the four record files."""
    article_path, creator_path = Path(article_path), Path(creator_path)
    subject_path, edge_path = Path(subject_path), Path(edge_path)

    def collect(path, text_key, make, label_optional):
        out = {}
        for lineno, obj in _records(path):
            nid = _field(obj, "id", path, lineno)
            if nid in out:
                raise HsnError(f"duplicate id {nid!r}", str(path), lineno)
            text = _field(obj, text_key, path, lineno)
            if text_key == "text" and not text.strip():
                raise HsnError(f"article {nid!r} has empty text", str(path), lineno)
            out[nid] = make(nid, text, _label(obj, path, lineno, label_optional))
        return out

    articles = collect(article_path, "text", Article, False)
    creators = collect(creator_path, "profile", Creator, True)
    subjects = collect(subject_path, "description", Subject, True)

    authorship: dict[str, str] = {}
    links: dict[str, set[str]] = {}
    for lineno, obj in _records(edge_path):
        kind = _field(obj, "kind", edge_path, lineno)
        aid = _field(obj, "article", edge_path, lineno)
        other = _field(obj, "other", edge_path, lineno)
        if aid not in articles:
            raise HsnError(f"edge references unknown article {aid!r}", str(edge_path), lineno)
        if kind == "authorship":
            if other not in creators:
                raise HsnError(f"edge references unknown creator {other!r}", str(edge_path), lineno)
            if aid in authorship:
                raise HsnError(f"article {aid!r} has more than one creator", str(edge_path), lineno)
            authorship[aid] = other
        elif kind == "subject":
            if other not in subjects:
                raise HsnError(f"edge references unknown subject {other!r}", str(edge_path), lineno)
            links.setdefault(aid, set()).add(other)
        else:
            raise HsnError(f"unknown edge kind {kind!r}", str(edge_path), lineno)

    try:
        return Hsn(articles, creators, subjects, authorship, {a: frozenset(s) for a, s in links.items()})
    except HsnError as exc:
        raise HsnError(str(exc), str(edge_path)) from None


def load_dir(directory) -> Hsn:
    d = Path(directory)
    return load_hsn(*(d / DATA_FILES[k] for k in ("articles", "creators", "subjects", "edges")))


def save_dir(hsn: Hsn, directory) -> None:
    """Write ``hsn`` in the record format; output is deterministic."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)

    def dump(name, rows):
        with open(d / DATA_FILES[name], "w", encoding="utf-8", newline="\n") as fh:
            for row in rows:
                fh.write(json.dumps(row, ensure_ascii=False, sort_keys=True) + "\n")

    def lab(x):
        return None if x is None else x.wire_name

    dump("articles", ({"id": a, "text": hsn.articles[a].text, "label": lab(hsn.articles[a].label)}
                      for a in hsn.ids("article")))
    dump("creators", ({"id": c, "profile": hsn.creators[c].profile, "label": lab(hsn.creators[c].label)}
                      for c in hsn.ids("creator")))
    dump("subjects", ({"id": s, "description": hsn.subjects[s].description,
                       "label": lab(hsn.subjects[s].label)} for s in hsn.ids("subject")))
    edges = []
    for aid in hsn.ids("article"):
        edges.append({"kind": "authorship", "article": aid, "other": hsn.authorship[aid]})
        for sid in sorted(hsn.subject_links.get(aid, ())):
            edges.append({"kind": "subject", "article": aid, "other": sid})
    dump("edges", edges)


# ---------------------------------------------------------------------------
# derived labels
# ---------------------------------------------------------------------------


def round_half_up(x: Fraction) -> int:
    return math.floor(x + Fraction(1, 2))


def weighted_score(labels: Iterable[CredLabel]) -> Fraction:
    """Class-fraction weighted score, i.e. the mean article score."""
    counts = Counter(labels)
    n = sum(counts.values())
    return sum((Fraction(c, n) * lab.score for lab, c in counts.items()), Fraction(0))


def derive_entity_labels(hsn: Hsn) -> Hsn:
    """Fill missing creator/subject labels from their articles' labels.

    The score is the class-fraction weighted article score, rounded half
    up and mapped back to a label. Existing labels are kept.
    """
    missing = [a for a, art in hsn.articles.items() if art.label is None]
    if missing:
        raise HsnError(f"{len(missing)} articles lack labels (e.g. {missing[0]!r})")
    out = hsn
    for node_type, groups in (("creator", hsn.articles_of_creator()), ("subject", hsn.articles_of_subject())):
        fill = {}
        for nid, aids in groups.items():
            if hsn.label_of(node_type, nid) is None:
                score = weighted_score(hsn.articles[a].label for a in aids)
                fill[nid] = CredLabel.from_score(round_half_up(score))
        if fill:
            out = out.with_labels(node_type, fill)
    return out


# ---------------------------------------------------------------------------
# folds
# ---------------------------------------------------------------------------

THETA_GRID = tuple(round(0.1 * i, 1) for i in range(1, 11))


def subseed(seed: int, name: str) -> np.random.Generator:
    """Independent generator for a named consumer of the master seed."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), zlib.crc32(name.encode())]))


def sample_size(theta: float, n: int) -> int:
    # half-up rounding; the epsilon absorbs binary error in e.g. 0.3 * 90
    return int(math.floor(theta * n + 0.5 + 1e-9))


@dataclass(frozen=True)
class Fold:
    train: dict[str, tuple[str, ...]]
    test: dict[str, tuple[str, ...]]
    sampled: dict[str, tuple[str, ...]]


@dataclass(frozen=True)
class Split:
    k: int
    theta: float
    seed: int
    folds: tuple[Fold, ...]


def split_folds(hsn: Hsn, k: int = 10, theta: float = 1.0, seed: int = 0) -> Split:
    """k-fold partition of every node type plus a theta-subsample of training.

    The partition depends only on ``seed``; the subsample also depends on
    ``theta`` and the fold index.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    if not 0 < theta <= 1:
        raise ValueError(f"theta must be in (0, 1], got {theta}")
    parts = {}
    for nt in NODE_TYPES:
        ids = hsn.ids(nt)
        if len(ids) < k:
            raise ValueError(f"{len(ids)} {nt} nodes cannot be split into {k} folds")
        order = subseed(seed, f"partition/{nt}").permutation(len(ids))
        parts[nt] = [tuple(sorted(ids[i] for i in chunk)) for chunk in np.array_split(order, k)]
    folds = []
    for f in range(k):
        train, test, sampled = {}, {}, {}
        for nt in NODE_TYPES:
            test[nt] = parts[nt][f]
            train[nt] = tuple(sorted(x for g, chunk in enumerate(parts[nt]) if g != f for x in chunk))
            m = sample_size(theta, len(train[nt]))
            rng = subseed(seed, f"sample/{nt}/{f}/{theta:.6f}")
            pick = rng.choice(len(train[nt]), size=m, replace=False)
            sampled[nt] = tuple(sorted(train[nt][i] for i in pick))
        folds.append(Fold(train, test, sampled))
    return Split(k, float(theta), int(seed), tuple(folds))
