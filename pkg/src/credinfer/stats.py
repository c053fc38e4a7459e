"""Descriptive dataset statistics written as CSV tables."""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from credinfer.features import TokenizerConfig, contrast_scores, tokenize
from credinfer.graph import LABEL_NAMES, CredLabel, Hsn

# prefixed so the six-way counts never collide with the "true"/"false" totals
LABEL_COLUMNS = tuple("label_" + LABEL_NAMES[label] for label in CredLabel)


@dataclass
class StatsReport:
    summary: dict[str, int]
    true_tokens: list[tuple[str, int, int, float]]
    false_tokens: list[tuple[str, int, int, float]]
    creator_ratios: list[tuple[str, int, int, int]]
    creator_histogram: list[tuple[int, int]]
    power_law_slope: float | None
    top_subjects: list[dict]
    empty_sections: list[str] = field(default_factory=list)

    def write(self, directory) -> list[Path]:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        written = []

        def dump(name, header, rows):
            path = d / name
            with open(path, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(header)
                w.writerows(rows)
            written.append(path)

        dump("summary.csv", ["key", "value"], sorted(self.summary.items()))
        tok_header = ["token", "count_true", "count_false", "contrast"]
        dump("tokens_true.csv", tok_header, [(t, a, b, repr(s)) for t, a, b, s in self.true_tokens])
        dump("tokens_false.csv", tok_header, [(t, a, b, repr(s)) for t, a, b, s in self.false_tokens])
        dump("creator_ratios.csv", ["creator", "articles", "true", "false"], self.creator_ratios)
        dump("creator_power_law.csv", ["articles_per_creator", "creators"], self.creator_histogram)
        dump("creator_power_law_fit.csv", ["slope"],
             [[repr(self.power_law_slope) if self.power_law_slope is not None else ""]])
        dump("top_subjects.csv", ["subject", "articles", "true", "false", *LABEL_COLUMNS],
             [[s["subject"], s["articles"], s["true"], s["false"], *(s[n] for n in LABEL_COLUMNS)]
              for s in self.top_subjects])
        return written


def _token_counts(hsn: Hsn, cfg: TokenizerConfig) -> tuple[Counter, Counter]:
    pos, neg = Counter(), Counter()
    for a in hsn.articles.values():
        (pos if a.label.positive else neg).update(tokenize(a.text, cfg))
    return pos, neg


def loglog_slope(histogram: list[tuple[int, int]]) -> float | None:
    """Least-squares slope of log(count) against log(size); None below two buckets."""
    if len(histogram) < 2:
        return None
    x = np.log([s for s, _ in histogram])
    y = np.log([c for _, c in histogram])
    return float(np.polyfit(x, y, 1)[0])


def compute_stats(hsn: Hsn, top_k: int = 20, top_subjects: int = 20,
                  tokenizer_config: TokenizerConfig | None = None) -> StatsReport:
    """Token contrast, creator ratios, creator-size power law and top subjects."""
    cfg = tokenizer_config or TokenizerConfig()
    arts = hsn.articles
    n_true = sum(1 for a in arts.values() if a.label.positive)
    summary = {
        "articles": len(arts),
        "creators": len(hsn.creators),
        "subjects": len(hsn.subjects),
        "authorship_links": len(hsn.authorship),
        "article_subject_links": hsn.n_subject_links(),
        "articles_true": n_true,
        "articles_false": len(arts) - n_true,
    }
    for label in CredLabel:
        summary[f"articles_{label.wire_name}"] = sum(1 for a in arts.values() if a.label is label)

    empty = []
    pos, neg = _token_counts(hsn, cfg)
    if not pos:
        empty.append("tokens_true")
    if not neg:
        empty.append("tokens_false")
    vocab = sorted(set(pos) | set(neg))
    scores = contrast_scores(pos, neg, vocab)
    true_side = sorted((t for t in vocab if scores[t] > 0), key=lambda t: (-scores[t], t))[:top_k]
    false_side = sorted((t for t in vocab if scores[t] < 0), key=lambda t: (scores[t], t))[:top_k]
    true_tokens = [(t, pos[t], neg[t], scores[t]) for t in true_side] if pos else []
    false_tokens = [(t, pos[t], neg[t], scores[t]) for t in false_side] if neg else []

    by_creator = hsn.articles_of_creator()
    ratios = []
    for cid in hsn.ids("creator"):
        labels = [arts[a].label for a in by_creator[cid]]
        t = sum(1 for lb in labels if lb.positive)
        ratios.append((cid, len(labels), t, len(labels) - t))
    ratios.sort(key=lambda r: (-r[1], r[0]))
    sizes = Counter(r[1] for r in ratios if r[1] > 0)
    histogram = sorted(sizes.items())

    by_subject = hsn.articles_of_subject()
    rows = []
    for sid in hsn.ids("subject"):
        labels = [arts[a].label for a in by_subject[sid]]
        row = {"subject": sid, "articles": len(labels),
               "true": sum(1 for lb in labels if lb.positive)}
        row["false"] = row["articles"] - row["true"]
        per = Counter("label_" + lb.wire_name for lb in labels)
        row.update({n: per[n] for n in LABEL_COLUMNS})
        rows.append(row)
    rows.sort(key=lambda r: (-r["articles"], r["subject"]))
    if not rows:
        empty.append("top_subjects")

    return StatsReport(summary, true_tokens, false_tokens, ratios, histogram,
                       loglog_slope(histogram), rows[:top_subjects], empty)


def format_summary(report: StatsReport) -> str:
    s = report.summary
    lines = [f"{k}: {s[k]:,}" for k in ("articles", "creators", "subjects", "article_subject_links")]
    if report.top_subjects:
        top = report.top_subjects[0]
        lines.append(f"top subject: {top['subject']} {top['articles']:,} articles "
                     f"({top['true']:,} true / {top['false']:,} false)")
    if report.power_law_slope is not None and math.isfinite(report.power_law_slope):
        lines.append(f"creator size log-log slope: {report.power_law_slope:.3f}")
    return "\n".join(lines)
