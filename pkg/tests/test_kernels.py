import importlib

import numpy as np
import pytest

from adrisk import _kernels
from adrisk.dtmc import expand, transient_curve


def random_chain(rng, n, fanout=4):
    indptr = [0]
    indices, data = [], []
    for _ in range(n):
        k = rng.integers(1, fanout + 1)
        js = rng.choice(n, size=k, replace=False)
        w = rng.random(k)
        indices += list(js)
        data += list(w / w.sum())
        indptr.append(len(indices))
    return np.array(indptr), np.array(indices), np.array(data)


@pytest.fixture
def restore_backend():
    before = _kernels.backend()
    yield
    _kernels.set_backend(before)


@pytest.mark.skipif(not _kernels.HAVE_NUMBA, reason="numba not installed")
@pytest.mark.parametrize("seed", range(5))
def test_propagate_backends_agree(seed, restore_backend):
    rng = np.random.default_rng(seed)
    indptr, indices, data = random_chain(rng, 50)
    start = np.zeros(50)
    start[0] = 1
    mask = rng.random(50) < 0.3
    _kernels.set_backend("numba")
    a = _kernels.propagate(indptr, indices, data, start, mask, 40)
    _kernels.set_backend("numpy")
    b = _kernels.propagate(indptr, indices, data, start, mask, 40)
    assert a.shape == (41,)
    assert np.allclose(a, b, atol=1e-13)


@pytest.mark.skipif(not _kernels.HAVE_NUMBA, reason="numba not installed")
def test_moments_backends_agree(restore_backend):
    values = np.random.default_rng(0).random((37, 11))
    _kernels.set_backend("numba")
    s1, s2 = _kernels.batch_moments(values)
    _kernels.set_backend("numpy")
    t1, t2 = _kernels.batch_moments(values)
    assert np.allclose(s1, t1) and np.allclose(s2, t2)


def test_mass_is_conserved(restore_backend):
    rng = np.random.default_rng(9)
    indptr, indices, data = random_chain(rng, 30)
    start = np.zeros(30)
    start[3] = 1
    everything = np.ones(30, dtype=bool)
    for name in ("numpy",) + (("numba",) if _kernels.HAVE_NUMBA else ()):
        _kernels.set_backend(name)
        assert np.allclose(_kernels.propagate(indptr, indices, data, start, everything, 25), 1.0)


def test_transient_curve_same_on_both_backends(or3, restore_backend):
    d = expand(or3)
    _kernels.set_backend("numpy")
    ref = transient_curve(d, "goal", 30)
    if _kernels.HAVE_NUMBA:
        _kernels.set_backend("numba")
        assert np.allclose(transient_curve(d, "goal", 30), ref, atol=1e-14)


def test_unknown_backend():
    with pytest.raises(ValueError):
        _kernels.set_backend("fortran")


def test_env_flag_selects_numpy(monkeypatch):
    monkeypatch.setenv("ADRISK_NUMBA", "0")
    module = importlib.reload(_kernels)
    try:
        assert module.backend() == "numpy"
    finally:
        monkeypatch.delenv("ADRISK_NUMBA")
        importlib.reload(_kernels)
