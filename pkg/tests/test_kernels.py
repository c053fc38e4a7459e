import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from credinfer import kernels

try:
    kernels.load_backend("cython")
    HAVE_CYTHON = True
except ImportError:
    HAVE_CYTHON = False

BACKENDS = ["python"] + (["cython"] if HAVE_CYTHON else [])


def reference_mix(g, r, a, b, c, d):
    return g * r * a + (1 - g) * r * b + g * (1 - r) * c + (1 - g) * (1 - r) * d


def random_csr(rng, n_seg, n_rows):
    lists = [rng.choice(n_rows, size=rng.integers(0, min(n_rows, 5) + 1), replace=False) for _ in range(n_seg)]
    indptr = np.concatenate([[0], np.cumsum([len(x) for x in lists])]).astype(np.int64)
    indices = np.concatenate(lists + [np.zeros(0, dtype=np.int64)]).astype(np.int64)
    return lists, indptr, indices


def test_active_backend_is_known():
    assert kernels.BACKEND in ("cython", "python")
    with pytest.raises(ValueError):
        kernels.load_backend("fortran")


@pytest.mark.parametrize("name", BACKENDS)
def test_gdu_mix_matches_formula(name):
    impl = kernels.load_backend(name)
    rng = np.random.default_rng(0)
    args = [rng.uniform(0, 1, (7, 5)) for _ in range(2)] + [rng.normal(size=(7, 5)) for _ in range(4)]
    np.testing.assert_allclose(kernels.gdu_mix(*args, impl=impl), reference_mix(*args), rtol=0, atol=1e-15)
    vec_args = [a[0] for a in args]
    assert kernels.gdu_mix(*vec_args, impl=impl).shape == (5,)


@pytest.mark.parametrize("name", BACKENDS)
def test_gdu_mix_grad_matches_analytic(name):
    impl = kernels.load_backend(name)
    rng = np.random.default_rng(1)
    g, r = rng.uniform(0, 1, (2, 4, 3))
    a, b, c, d, gh = rng.normal(size=(5, 4, 3))
    dg, dr, da, db, dc, dd = kernels.gdu_mix_grad(g, r, a, b, c, d, gh, impl=impl)
    np.testing.assert_allclose(dg, gh * (r * a - r * b + (1 - r) * c - (1 - r) * d), atol=1e-14)
    np.testing.assert_allclose(dr, gh * (g * a + (1 - g) * b - g * c - (1 - g) * d), atol=1e-14)
    np.testing.assert_allclose(da, gh * g * r, atol=1e-15)
    np.testing.assert_allclose(db, gh * (1 - g) * r, atol=1e-15)
    np.testing.assert_allclose(dc, gh * g * (1 - r), atol=1e-15)
    np.testing.assert_allclose(dd, gh * (1 - g) * (1 - r), atol=1e-15)


@pytest.mark.parametrize("name", BACKENDS)
def test_segment_mean_and_gradient(name):
    impl = kernels.load_backend(name)
    rng = np.random.default_rng(2)
    values = rng.normal(size=(6, 3))
    lists, indptr, indices = random_csr(rng, 5, 6)
    out = kernels.segment_mean(values, indptr, indices, impl=impl)
    for s, rows in enumerate(lists):
        want = values[rows].mean(axis=0) if len(rows) else np.zeros(3)
        np.testing.assert_allclose(out[s], want, atol=1e-15)
    g = rng.normal(size=(5, 3))
    back = kernels.segment_mean_grad(g, indptr, indices, 6, impl=impl)
    want = np.zeros((6, 3))
    for s, rows in enumerate(lists):
        for row in rows:
            want[row] += g[s] / len(rows)
    np.testing.assert_allclose(back, want, atol=1e-15)


@pytest.mark.parametrize("name", BACKENDS)
def test_scatter_add_rows(name):
    impl = kernels.load_backend(name)
    src = np.arange(12, dtype=float).reshape(4, 3)
    out = kernels.scatter_add_rows(3, np.array([2, 0, 2, 2]), src, impl=impl)
    np.testing.assert_array_equal(out, [[3, 4, 5], [0, 0, 0], [0 + 6 + 9, 1 + 7 + 10, 2 + 8 + 11]])


@pytest.mark.skipif(not HAVE_CYTHON, reason="compiled extension not built")
@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 20), st.integers(1, 9))
def test_backends_agree_bitwise(seed, n, m):
    py, cy = kernels.load_backend("python"), kernels.load_backend("cython")
    rng = np.random.default_rng(seed)
    g, r = rng.uniform(0, 1, (2, n, m))
    a, b, c, d, gh = rng.normal(size=(5, n, m))
    np.testing.assert_array_equal(kernels.gdu_mix(g, r, a, b, c, d, impl=py),
                                  kernels.gdu_mix(g, r, a, b, c, d, impl=cy))
    for x, y in zip(kernels.gdu_mix_grad(g, r, a, b, c, d, gh, impl=py),
                    kernels.gdu_mix_grad(g, r, a, b, c, d, gh, impl=cy)):
        np.testing.assert_allclose(x, y, rtol=0, atol=1e-15)
    _, indptr, indices = random_csr(rng, n, n)
    np.testing.assert_allclose(kernels.segment_mean(a, indptr, indices, impl=py),
                               kernels.segment_mean(a, indptr, indices, impl=cy), rtol=0, atol=1e-15)
    np.testing.assert_allclose(kernels.segment_mean_grad(b, indptr, indices, n, impl=py),
                               kernels.segment_mean_grad(b, indptr, indices, n, impl=cy), rtol=0, atol=1e-15)
    idx = rng.integers(0, n, size=2 * n)
    src = rng.normal(size=(2 * n, m))
    np.testing.assert_array_equal(kernels.scatter_add_rows(n, idx, src, impl=py),
                                  kernels.scatter_add_rows(n, idx, src, impl=cy))


def test_set_backend_switches_and_restores():
    before = kernels.BACKEND
    prev = kernels.set_backend("python")
    try:
        assert kernels.BACKEND == "python"
        assert prev == before
    finally:
        kernels.set_backend(before)
    assert kernels.BACKEND == before
