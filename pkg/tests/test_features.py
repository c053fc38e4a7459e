import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from credinfer import numgrad as ng
from credinfer.features import (
    PAD_INDEX,
    UNK,
    EncodedText,
    HfluParams,
    TokenizerConfig,
    Vocab,
    build_vocab,
    encode_text,
    explicit_features,
    hflu,
    hflu_batch,
    latent_features,
    tokenize,
)
from credinfer.graph import Article, CredLabel, Creator, Hsn, Subject

WORDS = st.sampled_from(["tax", "gun", "obama", "plan", "jobs", "the", "Health", "care!"])


def corpus_hsn(texts_and_labels, creator_text="writer", subject_text="topic"):
    articles = {f"n{i}": Article(f"n{i}", t, lab) for i, (t, lab) in enumerate(texts_and_labels)}
    return Hsn(articles, {"u": Creator("u", creator_text, CredLabel.HALF_TRUE)},
               {"s": Subject("s", subject_text, CredLabel.HALF_TRUE)},
               {a: "u" for a in articles}, {a: frozenset({"s"}) for a in articles})


def random_params(seed, vocab_size=6, e=3, h=4, latent=2, scale=0.8):
    rng = np.random.default_rng(seed)
    base = HfluParams.init(rng, vocab_size, e, h, latent)
    p = base.map(lambda n, v: rng.normal(0, scale, size=np.shape(v)))
    p.embedding[PAD_INDEX] = 0.0
    return p


def test_tokenize():
    assert tokenize("The GUN-ban, and taxes!") == ["gun", "ban", "taxes"]
    assert tokenize("The Gun", TokenizerConfig(lowercase=False, stop_words=frozenset())) == ["The", "Gun"]


# --- vocabulary -----------------------------------------------------------


def test_false_only_word_is_selected():
    hsn = corpus_hsn([
        ("gun ban now", CredLabel.FALSE), ("gun owners rally", CredLabel.PANTS_ON_FIRE),
        ("jobs report strong", CredLabel.TRUE), ("budget report released", CredLabel.MOSTLY_TRUE),
    ])
    vocab = build_vocab(hsn, 1)
    assert vocab.wordsets["article"] == ("gun",)


def test_identical_corpora_tie_break_lexicographic():
    hsn = corpus_hsn([("zeta alpha mid", CredLabel.TRUE), ("zeta alpha mid", CredLabel.FALSE)])
    assert build_vocab(hsn, 2).wordsets["article"] == ("alpha", "mid")


def test_vocab_invariants(toy_hsn):
    from credinfer.graph import derive_entity_labels

    hsn = derive_entity_labels(toy_hsn)
    all_tokens = sorted({t for nt in ("article", "creator", "subject") for i in hsn.ids(nt)
                         for t in tokenize(hsn.text_of(nt, i))})
    vocab = build_vocab(hsn, len(all_tokens))
    assert vocab.tokens[0] == UNK
    assert list(vocab.tokens[1:]) == all_tokens
    for ws in vocab.wordsets.values():
        assert sorted(ws) == all_tokens
    assert [vocab.position(t) for t in vocab.tokens] == list(range(len(vocab)))
    with pytest.raises(ValueError, match=f"{len(all_tokens)} distinct tokens"):
        build_vocab(hsn, len(all_tokens) + 1)
    with pytest.raises(ValueError):
        build_vocab(hsn, 0)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.lists(WORDS, min_size=1, max_size=5), st.sampled_from(list(CredLabel))),
                min_size=4, max_size=10), st.randoms())
def test_vocab_ignores_test_labels(rows, rnd):
    texts = [(" ".join(w) or "tax", lab) for w, lab in rows]
    hsn = corpus_hsn(texts)
    ids = hsn.ids("article")
    train = {"article": ids[: len(ids) // 2], "creator": ["u"], "subject": ["s"]}
    test_ids = ids[len(ids) // 2:]
    labels = [hsn.articles[i].label for i in test_ids]
    rnd.shuffle(labels)
    permuted = hsn.with_labels("article", dict(zip(test_ids, labels)))
    try:
        a = build_vocab(hsn, 3, train_ids=train)
    except ValueError:
        return
    assert a.wordsets == build_vocab(permuted, 3, train_ids=train).wordsets


def test_vocab_file_roundtrip(tmp_path, toy_hsn):
    from credinfer.graph import derive_entity_labels

    vocab = build_vocab(derive_entity_labels(toy_hsn), 4)
    vocab.save(tmp_path / "vocab.txt")
    again = Vocab.load(tmp_path / "vocab.txt")
    assert again.tokens == vocab.tokens and again.wordsets == vocab.wordsets
    assert (tmp_path / "vocab.txt").read_text().startswith("[W]\n<unk>\n")


# --- explicit features ----------------------------------------------------


def test_explicit_examples():
    np.testing.assert_array_equal(explicit_features("tax tax gun", ["tax", "gun", "obama"]), [2, 1, 0])
    np.testing.assert_array_equal(explicit_features("", ["tax", "gun"]), [0, 0])
    np.testing.assert_array_equal(explicit_features("hello world", ["tax", "gun"]), [0, 0])


@settings(max_examples=200, deadline=None)
@given(st.lists(WORDS, max_size=8), st.lists(WORDS, max_size=8))
def test_explicit_additive(a, b):
    ws = ["tax", "gun", "obama", "health", "care"]
    left, right = " ".join(a), " ".join(b)
    np.testing.assert_array_equal(explicit_features(left + " " + right, ws),
                                  explicit_features(left, ws) + explicit_features(right, ws))


# --- encoding -------------------------------------------------------------


def test_encode_examples():
    vocab = Vocab((UNK, "a1", "b2", "c3"), {"article": ("a1",)})
    e = encode_text("a1 b2 c3", vocab, 5)
    assert e == EncodedText((2, 3, 4, 0, 0), 3)
    e = encode_text(" ".join(["a1"] * 10), vocab, 5)
    assert e.indices == (2,) * 5 and e.true_length == 5
    assert encode_text("", vocab, 4) == EncodedText((0, 0, 0, 0), 0)
    assert encode_text("zzz", vocab, 2).indices == (1, 0)
    with pytest.raises(ValueError):
        encode_text("a1", vocab, 0)


# --- latent features ------------------------------------------------------


def test_zero_weights_give_half():
    p = random_params(0).map(lambda n, v: np.zeros_like(v))
    out = latent_features(EncodedText((3, 4, 2, 0), 3), p).data
    np.testing.assert_array_equal(out, [0.5, 0.5])
    np.testing.assert_array_equal(latent_features(EncodedText((0, 0), 0), random_params(1).map(
        lambda n, v: np.zeros_like(v) if n == "b_i" else v)).data, [0.5, 0.5])


def test_gru_matches_scalar_oracle_seed_42():
    p = random_params(42)
    enc = EncodedText((3, 1, 6, 2), 4)
    want = oracles.gru_latent(enc.indices, oracles.tolist(dict(p.named())))
    np.testing.assert_allclose(latent_features(enc, p).data, want, rtol=0, atol=1e-10)


def test_padding_extension_is_exact():
    p = random_params(5)
    short = latent_features(EncodedText((3, 1, 6, 2), 4), p).data
    long = latent_features(EncodedText((3, 1, 6, 2, 0, 0, 0, 0, 0), 4), p).data
    np.testing.assert_array_equal(short, long)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.lists(st.integers(1, 6), max_size=6), min_size=1, max_size=5), st.integers(0, 1000))
def test_batch_matches_single(seqs, seed):
    p = random_params(seed)
    q = 6
    encs = [EncodedText(tuple(s) + (0,) * (q - len(s)), len(s)) for s in seqs]
    batch = latent_features(encs, p).data
    for enc, row in zip(encs, batch):
        np.testing.assert_allclose(row, latent_features(enc, p).data, rtol=0, atol=1e-14)
        assert np.all((row > 0) & (row < 1))


def test_index_outside_table():
    with pytest.raises(ng.DimensionError):
        latent_features(EncodedText((9,), 1), random_params(0))


# --- hflu ---------------------------------------------------------------


def test_hflu_lengths_and_zero_params():
    vocab = Vocab((UNK, "tax", "gun", "jobs"), {"article": ("tax", "gun")})
    p = HfluParams.init(np.random.default_rng(0), len(vocab), 3, 4, 3).map(lambda n, v: np.zeros_like(v))
    feat = hflu("tax tax jobs", "article", vocab, p, q=5)
    assert feat.combined.shape == (5,)
    np.testing.assert_array_equal(feat.combined.data, [2, 0, 0.5, 0.5, 0.5])
    np.testing.assert_array_equal(feat.explicit, [2, 0])


def test_hflu_deterministic_and_batch_consistent():
    vocab = Vocab((UNK, "tax", "gun", "jobs"), {"article": ("tax", "gun")})
    p = random_params(3, vocab_size=len(vocab), latent=3)
    a = hflu("gun jobs tax", "article", vocab, p, q=5).combined.data
    b = hflu("gun jobs tax", "article", vocab, p, q=5).combined.data
    np.testing.assert_array_equal(a, b)
    batch = hflu_batch(["gun jobs tax", "tax"], "article", vocab, p, 5).data
    np.testing.assert_allclose(batch[0], a, atol=1e-14)


def test_latent_part_on_tape():
    vocab = Vocab((UNK, "tax", "gun"), {"article": ("tax",)})
    p = random_params(4, vocab_size=len(vocab))
    tape = ng.Tape()
    tracked = p.map(lambda n, v: tape.watch(v, n))
    feat = hflu("tax gun", "article", vocab, tracked, q=3)
    assert feat.latent.tracked and not isinstance(feat.explicit, ng.Tensor)
    grads = tape.backward(ng.sum_squares(feat.combined))
    assert np.any(grads[tracked.W_i] != 0)
