"""Weighted Sturm-Liouville operator and its spectral functional calculus.

The operator is assembled from its quadratic form

    Q(u, u) = int |v| rho^{-1} (d/ds (|v|^{1/2} u))^2 ds + int v^2 m u^2 rho ds

in the nodal basis. With ``w = |v|^{1/2} u`` the derivative term is a weighted
stiffness matrix on ``w`` with the weight sampled at cell midpoints. The cell
touching B carries no term (natural end: the form weight vanishes there); the
cell at ``s = L`` sees ``w = 0`` (Dirichlet). Dividing the form matrix by the
quadrature weights gives the operator, symmetric with respect to ``W``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GridMismatchError, SpectralError
from .geometry import Grid1D

SERIES_CUTOFF = 1e-4


def stable_coth(x):
    """``coth(x)`` for ``x > 0`` as ``1 + 2/(e^{2x} - 1)``; series below 1e-4."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = x < SERIES_CUTOFF
    with np.errstate(over="ignore"):
        xb = x[~small]
        out[~small] = 1.0 + 2.0 / np.expm1(2.0 * xb)
    xs = x[small]
    out[small] = 1.0 / xs + xs / 3.0 - xs**3 / 45.0
    return out


def stable_csch(x):
    """``1/sinh(x)`` for ``x > 0`` as ``2 e^{-x} / (1 - e^{-2x})``."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = x < SERIES_CUTOFF
    xb = x[~small]
    out[~small] = 2.0 * np.exp(-xb) / -np.expm1(-2.0 * xb)
    xs = x[small]
    out[small] = 1.0 / xs - xs / 6.0 + 7.0 * xs**3 / 360.0
    return out


def stable_tanh(x):
    return 1.0 / stable_coth(x)


@dataclass(frozen=True, eq=False)
class SymmetricOperator:
    """Dense operator, symmetric with respect to ``diag(inner_product)``."""

    matrix: np.ndarray
    inner_product: np.ndarray
    form: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def symmetry_residual(self) -> float:
        wa = self.inner_product[:, None] * self.matrix
        scale = max(np.max(np.abs(wa)), np.finfo(float).tiny)
        return float(np.max(np.abs(wa - wa.T)) / scale)


@dataclass(frozen=True, eq=False)
class SpectralData:
    """W-orthonormal eigenbasis of a :class:`SymmetricOperator`.

    ``eigenvalues`` are those of the decomposed operator (for the model
    operator these are the ``mu_k^2``); ``roots`` gives their square roots.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    weights: np.ndarray
    provenance: SymmetricOperator | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.eigenvalues.size

    @property
    def roots(self) -> np.ndarray:
        return np.sqrt(self.eigenvalues)

    def coefficients(self, rhs) -> np.ndarray:
        """Coordinates ``<e_k, rhs>_W``; ``rhs`` may hold several columns."""
        rhs = np.asarray(rhs, dtype=float)
        w = self.weights if rhs.ndim == 1 else self.weights[:, None]
        return self.eigenvectors.T @ (w * rhs)

    def matrix(self, values) -> np.ndarray:
        """Matrix ``sum_k values_k e_k e_k^T W`` of a spectral multiplier."""
        e = self.eigenvectors
        return (e * values) @ (e.T * self.weights)

    def orthonormality_residual(self) -> float:
        e = self.eigenvectors
        g = e.T @ (self.weights[:, None] * e)
        return float(np.max(np.abs(g - np.eye(self.n))))

    def reconstruction_residual(self) -> float:
        if self.provenance is None:
            raise SpectralError("no source operator recorded")
        a = self.provenance.matrix
        r = self.matrix(self.eigenvalues) - a
        return float(np.linalg.norm(r, 2) / np.linalg.norm(a, 2))


def assemble_from_samples(
    grid: Grid1D,
    lapse,
    potential,
    lapse_mid=None,
    metric_weight_mid=None,
    *,
    derivative: bool = True,
) -> SymmetricOperator:
    """Assemble the operator from sampled coefficients (see module docstring)."""
    n = grid.n
    v = np.abs(np.asarray(lapse, dtype=float))
    m = np.asarray(potential, dtype=float)
    w = grid.quad_weights
    if v.shape != (n,) or m.shape != (n,):
        raise GridMismatchError("coefficient samples do not match the grid")
    if np.any(w == 0):
        raise SpectralError("singular assembly: zero quadrature weight")

    form = np.diag(w * v**2 * m)
    if derivative:
        vm = np.abs(np.asarray(lapse_mid, dtype=float))
        rho = np.ones(n + 1) if metric_weight_mid is None else np.asarray(metric_weight_mid)
        a = vm / (rho * grid.spacing)
        a[0] = 0.0  # natural end at B
        diag = a[:-1] + a[1:]
        stiff = np.diag(diag) - np.diag(a[1:-1], 1) - np.diag(a[1:-1], -1)
        x = np.sqrt(v)
        form = form + x[:, None] * stiff * x[None, :]
    form = 0.5 * (form + form.T)
    return SymmetricOperator(matrix=form / w[:, None], inner_product=w.copy(), form=form)


def assemble_epsilon_squared(model) -> SymmetricOperator:
    """Operator ``epsilon^2`` of a :class:`~hhilab.geometry.HorizonModel`."""
    return assemble_from_samples(
        model.grid,
        model.lapse,
        model.potential,
        model.lapse_mid,
        model.metric_weight_mid,
    )


def spectral_decompose(op: SymmetricOperator) -> SpectralData:
    """Eigen-decompose via the symmetric similarity ``W^{1/2} A W^{-1/2}``."""
    w = op.inner_product
    sw = np.sqrt(w)
    sym = sw[:, None] * op.matrix / sw[None, :]
    sym = 0.5 * (sym + sym.T)
    try:
        vals, vecs = np.linalg.eigh(sym)
    except np.linalg.LinAlgError as exc:
        raise SpectralError(f"eigen-solver did not converge: {exc}") from exc
    if not np.all(np.isfinite(vals)):
        raise SpectralError("eigen-solver returned non-finite eigenvalues")
    if vals[0] <= 0:
        raise SpectralError(f"operator is not positive definite (min eigenvalue {vals[0]!r})")
    e = vecs / sw[:, None]
    # deterministic sign: largest-magnitude component positive
    pivot = np.argmax(np.abs(e), axis=0)
    signs = np.sign(e[pivot, np.arange(e.shape[1])])
    e = e * signs
    return SpectralData(vals, e, w.copy(), provenance=op)


def apply_matrix_function(spec: SpectralData, fn, rhs) -> np.ndarray:
    """``sum_k fn(lambda_k) e_k <e_k, rhs>_W`` for a scalar map ``fn``."""
    vals = np.asarray(fn(spec.eigenvalues), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise SpectralError("matrix function is not finite on the spectrum")
    c = spec.coefficients(rhs)
    if c.ndim == 1:
        return spec.eigenvectors @ (vals * c)
    return spec.eigenvectors @ (vals[:, None] * c)


def weighted_inner_product(a, b, grid: Grid1D):
    """``sum_i w_i conj(a_i) b_i`` on ``grid``."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape[-1] != grid.n or b.shape[-1] != grid.n:
        raise GridMismatchError("surface functions do not match the grid")
    return np.sum(grid.quad_weights * np.conj(a) * b, axis=-1)


def op_norm(matrix, weights=None, *, iters: int = 30, seed: int = 0) -> float:
    """Operator norm in ``L^2(W)`` by power iteration on ``M^T M``.

    ``M = W^{1/2} A W^{-1/2}``; ``weights`` default to the identity.
    """
    a = np.asarray(matrix, dtype=float)
    if weights is not None:
        sw = np.sqrt(np.asarray(weights, dtype=float))
        a = sw[:, None] * a / sw[None, :]
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(a.shape[1])
    x /= np.linalg.norm(x)
    est = 0.0
    for _ in range(iters):
        y = a.T @ (a @ x)
        ny = np.linalg.norm(y)
        if ny == 0.0:
            return 0.0
        x = y / ny
        est = np.sqrt(ny)
    return float(est)
