import os
import subprocess
import sys

import numpy as np
import pytest

from tvstokes import kernels
from tvstokes.projection import project_global

py = kernels.python_backend()
compiled = pytest.mark.skipif(kernels.BACKEND == "python", reason="compiled extension not built")


def test_backend_is_known():
    assert kernels.BACKEND in ("cython", "python")
    assert py.BACKEND == "python"


def test_environment_forces_numpy_backend():
    env = dict(os.environ, TVSTOKES_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from tvstokes import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


@compiled
def test_update_kernels_agree(rng):
    p = rng.normal(size=(2, 2, 7, 6))
    psi = rng.normal(size=(2, 2, 7, 6))
    theta = rng.uniform(size=(7, 6))
    theta[0] = 0.0
    np.testing.assert_allclose(kernels.chambolle_update(p, psi, 0.125),
                               py.chambolle_update(p, psi, 0.125), rtol=1e-15, atol=1e-15)
    np.testing.assert_allclose(kernels.weighted_update(p, psi, theta, 0.125),
                               py.weighted_update(p, psi, theta, 0.125), rtol=1e-15, atol=1e-15)
    v = rng.normal(size=(2, 7, 6))
    np.testing.assert_allclose(kernels.weighted_update(v, v, theta, 0.1),
                               py.weighted_update(v, v, theta, 0.1), rtol=1e-15, atol=1e-15)


@compiled
def test_chambolle_loops_agree(rng):
    f = rng.normal(size=(12, 9))
    p1, e1 = kernels.ir_chambolle(np.zeros((2, 12, 9)), f, 1.0, 0.125, 300, 0.0)
    p2, e2 = py.ir_chambolle(np.zeros((2, 12, 9)), f, 1.0, 0.125, 300, 0.0)
    np.testing.assert_allclose(e1, e2, rtol=1e-11)
    np.testing.assert_allclose(p1, p2, atol=1e-10)
    w = project_global(rng.normal(size=(2, 10, 11)))
    p1, e1 = kernels.tfs_chambolle(np.zeros((2, 2, 10, 11)), w, 1.0, 0.125, 200, 0.0)
    p2, e2 = py.tfs_chambolle(np.zeros((2, 2, 10, 11)), w, 1.0, 0.125, 200, 0.0)
    np.testing.assert_allclose(e1, e2, rtol=1e-11)
    np.testing.assert_allclose(p1, p2, atol=1e-10)


@pytest.mark.parametrize("impl", [kernels, py], ids=["selected", "numpy"])
def test_read_only_inputs_accepted(impl, rng):
    p = rng.normal(size=(2, 4, 4))
    p.setflags(write=False)
    theta = np.broadcast_to(np.float64(0.5), (4, 4))
    out = impl.weighted_update(p, p, theta, 0.125)
    assert out.shape == (2, 4, 4)
    assert out.flags.writeable


@pytest.mark.parametrize("impl", [kernels, py], ids=["selected", "numpy"])
def test_weighted_update_bound(impl, rng):
    v = rng.normal(size=(2, 2, 6, 6))
    psi = 5 * rng.normal(size=(2, 2, 6, 6))
    theta = rng.uniform(size=(6, 6))
    theta[2] = 0.0
    for _ in range(20):
        v = impl.weighted_update(v if _ else np.clip(v, -0.1, 0.1) * theta, psi, theta, 0.125)
        mag = np.sqrt((v ** 2).sum(axis=1))
        assert np.all(mag <= theta + 1e-15)
        assert not v[..., 2, :].any()


@pytest.mark.parametrize("impl", [kernels, py], ids=["selected", "numpy"])
@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_detected(impl):
    f = np.zeros((4, 4))
    f[0, 0] = np.nan
    with pytest.raises(kernels.NumericalDivergence):
        impl.ir_chambolle(np.zeros((2, 4, 4)), f, 1.0, 0.125, 3, 0.0)
