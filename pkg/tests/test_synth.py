import numpy as np
import pytest

from credinfer.features import tokenize
from credinfer.graph import derive_entity_labels, save_dir
from credinfer.synth import VocabSpec, generate_synthetic, label_distribution


@pytest.fixture(scope="module")
def planted():
    return generate_synthetic(600, 100, 20, signal_strength=0.8, seed=7, return_latents=True)


def test_counts_and_validity(planted):
    hsn, _ = planted
    assert (len(hsn.articles), len(hsn.creators), len(hsn.subjects)) == (600, 100, 20)
    hsn.validate()


def test_creator_sizes_are_skewed(planted):
    hsn, _ = planted
    sizes = np.array([len(v) for v in hsn.articles_of_creator().values()])
    assert sizes.max() >= 10 * np.median(sizes)


def test_subjects_per_article(planted):
    hsn, _ = planted
    per = np.array([len(hsn.subject_links[a]) for a in hsn.ids("article")])
    assert per.min() >= 1 and per.max() <= 5
    assert 3.0 <= per.mean() <= 4.0


def test_labels_follow_reliability(planted):
    hsn, latents = planted
    by_c = hsn.articles_of_creator()
    big = [c for c, arts in by_c.items() if len(arts) >= 20]
    assert big
    for c in big:
        frac = np.mean([hsn.articles[a].label.positive for a in by_c[c]])
        assert abs(frac - latents.reliability[c]) < 0.25


def test_label_distribution_is_a_distribution():
    for rho in (0.0, 0.3, 0.5, 1.0):
        p = label_distribution(rho)
        assert p.shape == (6,) and np.all(p >= 0)
        assert p.sum() == pytest.approx(1.0)
        assert p[:3].sum() == pytest.approx(rho)


def test_zero_strength_has_no_text_signal():
    hsn = generate_synthetic(200, 20, 10, signal_strength=0.0, seed=1)
    for a in hsn.articles.values():
        assert all(tok.startswith("w") for tok in tokenize(a.text))


def test_strength_controls_marker_share():
    spec = VocabSpec()
    hsn = generate_synthetic(300, 30, 10, signal_strength=1.0, seed=2)
    toks = [t for a in hsn.articles.values() for t in tokenize(a.text)]
    share = np.mean(["mark" in t for t in toks])
    assert abs(share - spec.max_marker_share) < 0.03


def test_deterministic_files(tmp_path):
    for name in ("a", "b"):
        save_dir(generate_synthetic(120, 15, 8, seed=7), tmp_path / name)
    for f in ("articles", "creators", "subjects", "edges"):
        assert (tmp_path / "a" / f"{f}.jsonl").read_bytes() == (tmp_path / "b" / f"{f}.jsonl").read_bytes()


def test_seed_changes_output():
    a = generate_synthetic(50, 5, 5, seed=1)
    b = generate_synthetic(50, 5, 5, seed=2)
    assert a.articles != b.articles


def test_labels_derivable():
    hsn = derive_entity_labels(generate_synthetic(80, 10, 6, seed=3))
    assert all(c.label is not None for c in hsn.creators.values())
    assert all(s.label is not None for s in hsn.subjects.values())


@pytest.mark.parametrize("kw", [dict(n_articles=5, n_creators=6, n_subjects=2),
                                dict(n_articles=5, n_creators=2, n_subjects=0),
                                dict(n_articles=5, n_creators=2, n_subjects=2, signal_strength=1.5)])
def test_infeasible_parameters(kw):
    with pytest.raises(ValueError):
        generate_synthetic(**kw)
