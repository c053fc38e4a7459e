"""Synthetic news graphs with planted credibility signal.

Creators own a Zipf-distributed number of articles and a latent
reliability; article labels are drawn from the author's reliability.
Article text mixes a shared background vocabulary with class marker
words, and ``signal_strength`` scales the marker share (0 makes all
class-conditional word distributions identical). Subjects carry a
latent lean, and articles prefer subjects whose lean matches their
polarity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from credinfer.graph import Article, CredLabel, Creator, Hsn, Subject, subseed

_POS = (CredLabel.TRUE, CredLabel.MOSTLY_TRUE, CredLabel.HALF_TRUE)
_NEG = (CredLabel.PANTS_ON_FIRE, CredLabel.FALSE, CredLabel.MOSTLY_FALSE)


@dataclass(frozen=True)
class VocabSpec:
    n_common: int = 400
    n_polarity_markers: int = 20
    n_class_markers: int = 8
    min_words: int = 8
    max_words: int = 20
    max_marker_share: float = 0.1
    n_roles: int = 30
    n_topics: int = 40


@dataclass(frozen=True)
class SyntheticLatents:
    reliability: dict[str, float]
    subject_lean: dict[str, int]
    label_probs: dict[str, np.ndarray]


def label_distribution(reliability: float) -> np.ndarray:
    """Probabilities over class indices 0..5 for a creator's articles.

    Polarity is positive with probability ``reliability``; within a
    polarity the distance from the boundary class is Binomial(2, .).
    """
    rho = float(reliability)
    # within each polarity, ordered from most to least credible
    sub = np.array([rho * rho, 2 * rho * (1 - rho), (1 - rho) ** 2])
    return np.concatenate([rho * sub, (1 - rho) * sub])


def _zipf_sizes(rng, n_items: int, n_groups: int, exponent: float) -> np.ndarray:
    p = np.arange(1, n_groups + 1, dtype=np.float64) ** -exponent
    p /= p.sum()
    return 1 + rng.multinomial(n_items - n_groups, p)


def generate_synthetic(
    n_articles: int,
    n_creators: int,
    n_subjects: int,
    vocab_spec: VocabSpec | None = None,
    signal_strength: float = 0.8,
    seed: int = 0,
    zipf_exponent: float = 1.6,
    subject_affinity: float = 2.0,
    return_latents: bool = False,
):
    """Build a labelled synthetic graph; deterministic per ``seed``."""
    spec = vocab_spec or VocabSpec()
    if not 1 <= n_creators <= n_articles:
        raise ValueError("need 1 <= n_creators <= n_articles")
    if n_subjects < 1 or n_subjects > 5 * n_articles:
        raise ValueError("need 1 <= n_subjects <= 5 * n_articles")
    if not 0.0 <= signal_strength <= 1.0:
        raise ValueError("signal_strength must lie in [0, 1]")
    if spec.min_words < 1 or spec.max_words < spec.min_words:
        raise ValueError("invalid article length range")

    rng = subseed(seed, "synth/graph")
    text_rng = subseed(seed, "synth/text")

    common = [f"w{i:03d}" for i in range(spec.n_common)]
    common_p = np.arange(1, spec.n_common + 1, dtype=np.float64) ** -1.0
    common_p /= common_p.sum()
    pol_markers = {
        True: [f"pmark{i:02d}" for i in range(spec.n_polarity_markers)],
        False: [f"nmark{i:02d}" for i in range(spec.n_polarity_markers)],
    }
    cls_markers = {
        lab: [f"c{lab.score}mark{i:02d}" for i in range(spec.n_class_markers)] for lab in CredLabel
    }
    roles = [f"role{i:02d}" for i in range(spec.n_roles)]
    topics = [f"topic{i:02d}" for i in range(spec.n_topics)]

    creator_ids = [f"u{i:04d}" for i in range(n_creators)]
    subject_ids = [f"s{i:03d}" for i in range(n_subjects)]
    article_ids = [f"n{i:05d}" for i in range(n_articles)]

    sizes = _zipf_sizes(rng, n_articles, n_creators, zipf_exponent)
    owner = np.repeat(np.arange(n_creators), sizes)
    rng.shuffle(owner)
    reliability = rng.beta(0.5, 0.5, size=n_creators)

    lean = np.where(np.arange(n_subjects) % 2 == 0, 1, -1)
    rng.shuffle(lean)
    popularity = np.arange(1, n_subjects + 1, dtype=np.float64) ** -0.8
    rng.shuffle(popularity)

    label_probs = [label_distribution(r) for r in reliability]
    labels = []
    subj_sets: list[set[int]] = []
    for i in range(n_articles):
        lab = CredLabel.from_index(rng.choice(6, p=label_probs[owner[i]]))
        labels.append(lab)
        match = lean == (1 if lab.positive else -1)
        w = popularity * np.where(match, 1.0 + subject_affinity, 1.0)
        m = min(1 + rng.binomial(4, 0.625), n_subjects)
        subj_sets.append(set(rng.choice(n_subjects, size=m, replace=False, p=w / w.sum()).tolist()))

    used = set().union(*subj_sets)
    for s in range(n_subjects):
        if s in used:
            continue
        open_rows = [i for i in range(n_articles) if len(subj_sets[i]) < 5]
        subj_sets[open_rows[rng.integers(len(open_rows))] if open_rows else rng.integers(n_articles)].add(s)

    share = spec.max_marker_share * signal_strength
    articles = {}
    for i, aid in enumerate(article_ids):
        lab = labels[i]
        n_words = int(text_rng.integers(spec.min_words, spec.max_words + 1))
        words = []
        for _ in range(n_words):
            if text_rng.random() < share:
                pool = pol_markers[lab.positive] if text_rng.random() < 0.5 else cls_markers[lab]
                words.append(pool[int(text_rng.integers(len(pool)))])
            else:
                words.append(common[int(text_rng.choice(spec.n_common, p=common_p))])
        articles[aid] = Article(aid, " ".join(words), lab)

    creators = {}
    for c, cid in enumerate(creator_ids):
        picks = text_rng.choice(len(roles), size=2, replace=False)
        creators[cid] = Creator(cid, " ".join([f"name{cid}"] + [roles[p] for p in picks]))
    subjects = {}
    for s, sid in enumerate(subject_ids):
        picks = text_rng.choice(len(topics), size=2, replace=False)
        subjects[sid] = Subject(sid, " ".join([f"name{sid}"] + [topics[p] for p in picks]))

    authorship = {aid: creator_ids[owner[i]] for i, aid in enumerate(article_ids)}
    links = {aid: frozenset(subject_ids[s] for s in subj_sets[i]) for i, aid in enumerate(article_ids)}
    hsn = Hsn(articles, creators, subjects, authorship, links)
    if not return_latents:
        return hsn
    latents = SyntheticLatents(
        reliability={cid: float(reliability[c]) for c, cid in enumerate(creator_ids)},
        subject_lean={sid: int(lean[s]) for s, sid in enumerate(subject_ids)},
        label_probs={cid: label_probs[c] for c, cid in enumerate(creator_ids)},
    )
    return hsn, latents
