import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from graphite import kernels

BACKENDS = sorted(kernels.BACKENDS)
compiled = pytest.mark.skipif("cython" not in kernels.BACKENDS, reason="compiled kernels not built")


def random_csr(rng, n=15, m=9, density=0.3):
    x = sp.random(n, m, density=density, random_state=rng, format="csr", data_rvs=lambda k: np.ones(k))
    x.sort_indices()
    return x


def csr_messages(rng, n, e):
    tgt = np.sort(rng.integers(0, n, e))
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(tgt, minlength=n), out=indptr[1:])
    return indptr, rng.integers(0, n, e).astype(np.int64), rng.normal(size=e)


@pytest.mark.parametrize("name", BACKENDS)
@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_spmm_matches_dense(name, seed):
    k = kernels.get(name)
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 12))
    indptr, cols, w = csr_messages(rng, n, int(rng.integers(0, 30)))
    h = rng.normal(size=(n, 3))
    dense = np.zeros((n, n))
    tgt = np.repeat(np.arange(n), np.diff(indptr))
    np.add.at(dense, (tgt, cols), w)
    np.testing.assert_allclose(k.spmm(indptr, cols, w, h), dense @ h, atol=1e-12)
    gout = rng.normal(size=(n, 3))
    gw, gh = k.spmm_backward(indptr, cols, w, h, gout)
    np.testing.assert_allclose(gh, dense.T @ gout, atol=1e-12)
    np.testing.assert_allclose(gw, np.einsum("ij,ij->i", gout[tgt], h[cols]), atol=1e-12)


@compiled
@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_backends_agree(seed):
    rng = np.random.default_rng(seed)
    c, p = kernels.get("cython"), kernels.get("python")
    x = random_csr(rng)
    ip, ix = x.indptr.astype(np.int64), x.indices.astype(np.int64)
    eu = rng.integers(0, 15, 20).astype(np.int64)
    ev = rng.integers(0, 15, 20).astype(np.int64)
    np.testing.assert_array_equal(c.rows_intersect(ip, ix, eu, ev), p.rows_intersect(ip, ix, eu, ev))
    d = x.data.astype(np.float64) * rng.normal(size=x.nnz)
    np.testing.assert_allclose(c.rows_dot(ip, ix, d, eu, ev), p.rows_dot(ip, ix, d, eu, ev), atol=1e-12)
    xt = x.T.tocsr()
    xt.sort_indices()
    args = (ip, ix, xt.indptr.astype(np.int64), xt.indices.astype(np.int64))
    np.testing.assert_array_equal(c.cooccurrence_pairs(*args), p.cooccurrence_pairs(*args))


@pytest.mark.parametrize("name", BACKENDS)
def test_empty_inputs(name):
    k = kernels.get(name)
    e = np.zeros(0, dtype=np.int64)
    x = sp.csr_matrix((3, 2))
    ip, ix = x.indptr.astype(np.int64), x.indices.astype(np.int64)
    assert len(k.rows_intersect(ip, ix, e, e)) == 0
    xt = x.T.tocsr()
    assert k.cooccurrence_pairs(ip, ix, xt.indptr.astype(np.int64), xt.indices.astype(np.int64)).shape == (0, 2)


def test_backend_selection():
    assert kernels.BACKEND in kernels.BACKENDS
    assert "python" in kernels.BACKENDS
