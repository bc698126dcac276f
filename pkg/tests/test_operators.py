import mpmath
import numpy as np
import pytest
from scipy import integrate

from hhilab.errors import SpectralError
from hhilab.geometry import Grid1D, ModelParams, build_model
from hhilab.operators import (
    apply_matrix_function,
    assemble_epsilon_squared,
    assemble_from_samples,
    op_norm,
    spectral_decompose,
    stable_coth,
    stable_csch,
)

XS = np.array([1e-9, 1e-5, 9.99e-5, 1e-4, 0.01, 0.5, 1.0, 5.0, 20.0, 400.0, 800.0])


def test_stable_coth_matches_mpmath():
    ref = np.array([float(mpmath.coth(mpmath.mpf(x))) for x in XS])
    assert np.allclose(stable_coth(XS), ref, rtol=1e-14, atol=0)


def test_stable_csch_matches_mpmath():
    ref = np.array([float(mpmath.csch(mpmath.mpf(x))) for x in XS])
    assert np.allclose(stable_csch(XS), ref, rtol=1e-14, atol=0)


def test_coth_csch_identity():
    x = np.geomspace(1e-3, 30, 50)
    assert np.allclose(stable_coth(x) ** 2 - stable_csch(x) ** 2, 1.0, rtol=0, atol=1e-9)


def test_large_arguments_do_not_overflow():
    with np.errstate(over="raise", invalid="raise", divide="raise"):
        assert stable_coth(np.array([1e4]))[0] == 1.0
        assert stable_csch(np.array([1e4]))[0] == 0.0


def _flat_operator(n, L=3.0, m=0.7):
    g = Grid1D.uniform_half_line(L, n)
    return assemble_from_samples(g, np.ones(n), np.full(n, m), np.ones(n + 1), None)


@pytest.mark.parametrize("n", [40, 200])
def test_assembled_operator_is_w_symmetric(n):
    op = assemble_epsilon_squared(build_model(ModelParams(N=n, mass_profile="bump")))
    assert op.symmetry_residual() < 1e-14


def test_unit_lapse_spectrum_converges_at_order_two():
    # unit lapse: -d^2 + m, free end on the face h/2 (inner cell dropped), Dirichlet at L
    L, m = 3.0, 0.7
    errs = []
    for n in (50, 100, 200, 400):
        h = L / (n + 1)
        exact = ((np.arange(3) + 0.5) * np.pi / (L - h / 2)) ** 2 + m
        vals = spectral_decompose(_flat_operator(n, L, m)).eigenvalues[:3]
        errs.append(np.max(np.abs(vals - exact)))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 1.8)


def _rindler_form_exact(f, df, L, m):
    # Q(u, u) for Rindler v = s: int s (d(s^{1/2} u))^2 + s^2 m u^2 ds
    def integrand(s):
        w_prime = 0.5 * s**-0.5 * f(s) + s**0.5 * df(s)
        return s * w_prime**2 + s**2 * m * f(s) ** 2

    return integrate.quad(integrand, 0, L, limit=200)[0]


def test_rindler_form_converges_at_order_two():
    L, m = 10.0, 1.0
    f = lambda s: np.exp(-((s - 4.0) ** 2))  # noqa: E731
    df = lambda s: -2 * (s - 4.0) * f(s)  # noqa: E731
    exact = _rindler_form_exact(f, df, L, m)
    errs = []
    for n in (100, 200, 400, 800):
        op = assemble_epsilon_squared(build_model(ModelParams(N=n, L=L, mass=m)))
        u = f(op_grid(n, L))
        errs.append(abs(u @ op.form @ u - exact) / exact)
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert orders[-1] > 1.8


def op_grid(n, L):
    return Grid1D.uniform_half_line(L, n).nodes


def test_rindler_lowest_eigenvalue_drifts_down():
    # continuous spectrum reaching 0 on the half-line: the bottom keeps moving
    mus = [
        spectral_decompose(assemble_epsilon_squared(build_model(ModelParams(N=n)))).roots[0]
        for n in (100, 200, 400)
    ]
    assert mus[0] > mus[1] > mus[2] > 0


def test_spectral_decomposition_residuals(small_spec):
    assert small_spec.orthonormality_residual() < 1e-12
    assert small_spec.reconstruction_residual() < 1e-12


def test_eigenvector_sign_convention(small_spec):
    e = small_spec.eigenvectors
    pivot = np.argmax(np.abs(e), axis=0)
    assert np.all(e[pivot, np.arange(e.shape[1])] > 0)


def test_not_positive_definite_raises():
    g = Grid1D.uniform_half_line(1.0, 5)
    op = assemble_from_samples(g, np.ones(5), -np.ones(5), derivative=False)
    with pytest.raises(SpectralError):
        spectral_decompose(op)


def test_apply_matrix_function_inverse(small_spec, rng):
    op = small_spec.provenance
    x = rng.normal(size=small_spec.n)
    y = apply_matrix_function(small_spec, lambda lam: 1.0 / lam, op.matrix @ x)
    assert np.allclose(y, x, rtol=1e-9, atol=1e-9)


def test_matrix_function_is_w_symmetric(small_spec):
    m = small_spec.matrix(np.sqrt(small_spec.eigenvalues))
    wm = small_spec.weights[:, None] * m
    assert np.max(np.abs(wm - wm.T)) < 1e-10 * np.max(np.abs(wm))


def test_op_norm_matches_svd(rng):
    a = rng.normal(size=(30, 30))
    w = rng.uniform(0.5, 2.0, size=30)
    sw = np.sqrt(w)
    ref = np.linalg.norm(sw[:, None] * a / sw[None, :], 2)
    assert op_norm(a, w, iters=300) == pytest.approx(ref, rel=1e-6)
