import importlib
import os
import subprocess
import sys

import numpy as np
import pytest

from sparsecc import kernels

cython = pytest.importorskip("sparsecc._core", reason="compiled kernel not built")


def _problem(seed, N=60, M=8, lam=0.05):
    rng = np.random.default_rng(seed)
    Z = np.asfortranarray(rng.standard_normal((N, M)))
    w = rng.uniform(0.05, 0.25, N)
    g = rng.normal(scale=0.2, size=M)
    coef = np.where(rng.random(M) < 0.5, rng.normal(size=M), 0.0)
    return Z, w, g, float(rng.normal(scale=0.1)), coef, lam


def _model_value(Z, w, g, g0, b0, dd, b, lam):
    u = dd + Z @ (b - b0)
    return g0 * dd + g @ (b - b0) + 0.5 * np.mean(w * u * u) + lam * np.abs(b).sum()


@pytest.mark.parametrize("seed", range(10))
def test_backends_agree(seed):
    Z, w, g, g0, coef, lam = _problem(seed)
    outs = []
    for impl in (kernels.get_backend("python"), kernels.get_backend("cython")):
        c = coef.copy()
        u = np.zeros(Z.shape[0])
        dd, sweeps = impl.cd_solve(Z, w, g, g0, c, u, lam, 10_000, 1e-13)
        outs.append((dd, c, u, sweeps))
    (d1, c1, u1, s1), (d2, c2, u2, s2) = outs
    assert s1 == s2
    assert d1 == pytest.approx(d2, abs=1e-12)
    np.testing.assert_allclose(c1, c2, atol=1e-12)
    np.testing.assert_allclose(u1, u2, atol=1e-12)


@pytest.mark.parametrize("backend", ["python", "cython"])
def test_kernel_minimizes_model(backend):
    Z, w, g, g0, coef, lam = _problem(42)
    impl = kernels.get_backend(backend)
    b = coef.copy()
    u = np.zeros(Z.shape[0])
    dd, _ = impl.cd_solve(Z, w, g, g0, b, u, lam, 100_000, 1e-14)
    np.testing.assert_allclose(u, dd + Z @ (b - coef), atol=1e-10)
    best = _model_value(Z, w, g, g0, coef, dd, b, lam)
    rng = np.random.default_rng(0)
    for _ in range(200):
        db = rng.normal(scale=1e-3, size=b.size)
        trial = _model_value(Z, w, g, g0, coef, dd + rng.normal(scale=1e-3), b + db, lam)
        assert trial >= best - 1e-12


@pytest.mark.parametrize("backend", ["python", "cython"])
def test_large_penalty_gives_zero(backend):
    Z, w, g, g0, _, _ = _problem(3)
    b = np.zeros(Z.shape[1])
    u = np.zeros(Z.shape[0])
    kernels.get_backend(backend).cd_solve(Z, w, g, g0, b, u, 1e6, 1000, 1e-12)
    assert np.all(b == 0.0)


def test_active_backend_is_compiled():
    assert kernels.BACKEND == "cython"


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


def test_environment_forces_fallback():
    env = dict(os.environ, SPARSECC_BACKEND="python")
    out = subprocess.run([sys.executable, "-c", "from sparsecc import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_fallback_solver_matches_compiled(small_data, monkeypatch):
    from sparsecc.solver import fit_l1_logistic, lambda_max

    lam = 0.1 * lambda_max(small_data)
    a = fit_l1_logistic(small_data, lam)
    monkeypatch.setattr(kernels, "_impl", kernels.get_backend("python"))
    b = fit_l1_logistic(small_data, lam)
    np.testing.assert_allclose(a.coefficients, b.coefficients, atol=1e-9)
    assert a.active_set == b.active_set
