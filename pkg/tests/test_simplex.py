import numba
import numpy as np

from machopt.simplex import nelder_mead


def _rosen(x, params):
    return (1 - x[0]) ** 2 + 100 * (x[1] - x[0] ** 2) ** 2


_rosen_jit = numba.njit(_rosen)


def test_rosenbrock_python_and_compiled_agree():
    a = nelder_mead(_rosen, np.array([-1.2, 1.0]), step=0.5, max_iter=5000, xtol=1e-12)
    b = nelder_mead(_rosen_jit, np.array([-1.2, 1.0]), step=0.5, max_iter=5000, xtol=1e-12)
    assert np.allclose(a.x, [1, 1], atol=1e-5)
    assert a.x.tobytes() == b.x.tobytes() and a.n_iter == b.n_iter


def test_respects_bounds():
    f = lambda x, p: float(np.sum((x - 5.0) ** 2))
    res = nelder_mead(f, np.array([0.2, 0.3]), step=0.3, lower=np.zeros(2), upper=np.ones(2))
    assert np.all(res.x >= 0) and np.all(res.x <= 1)
    assert np.allclose(res.x, [1, 1], atol=1e-6)


def test_stop_value_and_max_iter():
    f = lambda x, p: float(x[0] ** 2)
    res = nelder_mead(f, np.array([3.0]), step=1.0, stop_value=1.0)
    assert res.fun <= 1.0 and res.n_iter < 10
    capped = nelder_mead(_rosen, np.array([-1.2, 1.0]), max_iter=7)
    assert capped.n_iter == 7


def test_params_are_passed():
    f = lambda x, p: float((x[0] - p[0]) ** 2)
    res = nelder_mead(f, np.array([0.0]), params=np.array([2.5]), step=0.5)
    assert abs(res.x[0] - 2.5) < 1e-6
