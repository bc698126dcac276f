"""Double beta-KMS Cauchy-surface covariances and their projections.

Two block layouts are used for operators on the doubled surface (right wedge
plus the reflected left wedge, each sampled on the model grid):

* ``"sigma"``  -- index ``(slot, wedge, node)``; covariances and ``c^\\pm``.
* ``"copies"`` -- index ``(copy, slot, node)``; Calderon projectors, with copy
  0 the boundary ``tau = 0`` and copy 1 the boundary ``tau = beta/2``.

Because the left wedge is stored through the wedge reflection, conjugation by
the identification map is a pure re-indexing between the two layouts.

Convention: all matrices are real. ``c^+ = [[1/2, b0], [b1, 1/2]]`` with
``b0 = 1/2 |v|^{1/2} eps^{-1}(coth + T csch)|v|^{1/2}`` and
``b1 = 1/2 |v|^{-1/2} eps (coth - T csch)|v|^{-1/2}``, and the covariances are
``lambda^+ = q c^+``, ``lambda^- = lambda^+ - q``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import GridMismatchError, LayoutError
from .geometry import Grid1D
from .operators import SpectralData, op_norm, stable_coth, stable_csch

LAYOUTS = ("sigma", "copies")
UNDERFLOW_BETA_MU = 1400.0


@dataclass(frozen=True, eq=False)
class BlockOperator:
    """Dense operator on the doubled surface with a declared layout."""

    matrix: np.ndarray
    layout: str
    grid: Grid1D

    def __post_init__(self):
        if self.layout not in LAYOUTS:
            raise LayoutError(f"unknown layout {self.layout!r}")
        if self.matrix.shape != (4 * self.grid.n, 4 * self.grid.n):
            raise GridMismatchError("block matrix size does not match 4 * n")

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def weights(self) -> np.ndarray:
        return np.tile(self.grid.quad_weights, 4)

    def block(self, a: int, b: int, c: int, d: int) -> np.ndarray:
        """Sub-block for outer indices ``(a, b)`` (row) and ``(c, d)`` (column).

        In ``"sigma"`` layout these are ``(slot, wedge)``, in ``"copies"``
        ``(copy, slot)``.
        """
        n = self.n
        r = (2 * a + b) * n
        s = (2 * c + d) * n
        return self.matrix[r : r + n, s : s + n]

    def norm(self) -> float:
        return op_norm(self.matrix, self.weights)

    def apply(self, x) -> np.ndarray:
        return self.matrix @ np.asarray(x, dtype=float)

    def with_matrix(self, m) -> "BlockOperator":
        return BlockOperator(np.asarray(m), self.layout, self.grid)


def _layout_permutation(n: int) -> np.ndarray:
    """Index map taking a sigma-ordered vector to copies order.

    The map swaps the two outer indices, so it is its own inverse.
    """
    idx = np.arange(4 * n).reshape(2, 2, n)
    return idx.transpose(1, 0, 2).ravel()


@dataclass(frozen=True, eq=False)
class ChargeForm:
    """Charge form ``q = [[0, 1], [1, 0]]`` on pairs ``(f_0, f_1)``."""

    grid: Grid1D

    @property
    def matrix(self) -> np.ndarray:
        n2 = 2 * self.grid.n
        q = np.zeros((2 * n2, 2 * n2))
        q[:n2, n2:] = np.eye(n2)
        q[n2:, :n2] = np.eye(n2)
        return q

    def apply(self, f) -> np.ndarray:
        f = np.asarray(f)
        n2 = 2 * self.grid.n
        return np.concatenate([f[n2:], f[:n2]])

    def form(self, f, g) -> float:
        """``<f, q g>`` with the canonical weighted pairing."""
        w = np.tile(self.grid.quad_weights, 4)
        return float(np.sum(w * np.asarray(f) * self.apply(g)))


@dataclass(frozen=True, eq=False)
class CovariancePair:
    """Covariances ``lambda^\\pm`` in sigma layout with the charge form."""

    lambda_plus: BlockOperator
    lambda_minus: BlockOperator
    charge: ChargeForm
    beta: float | None
    provenance: str
    blocks: dict = field(default_factory=dict, repr=False)

    @property
    def grid(self) -> Grid1D:
        return self.lambda_plus.grid


def _spectral_blocks(spec: SpectralData, beta: float):
    mu = spec.roots
    x = 0.5 * beta * mu
    if beta * mu[0] > UNDERFLOW_BETA_MU:
        warnings.warn(
            f"beta*mu_1 = {beta * mu[0]:.4g} > {UNDERFLOW_BETA_MU}: coth is 1 to machine precision",
            RuntimeWarning,
            stacklevel=3,
        )
    coth = stable_coth(x)
    csch = stable_csch(x)
    return {
        "inv_coth": spec.matrix(coth / mu),
        "inv_csch": spec.matrix(csch / mu),
        "eps_coth": spec.matrix(mu * coth),
        "eps_csch": spec.matrix(mu * csch),
    }


def kms_covariances(spec: SpectralData, model, beta: float) -> CovariancePair:
    """Double beta-KMS covariances on two copies of the right wedge surface."""
    if not beta > 0:
        raise ValueError("beta must be > 0")
    grid = model.grid
    if spec.n != grid.n:
        raise GridMismatchError("spectral data does not match the model grid")
    n = grid.n
    sb = _spectral_blocks(spec, beta)
    xv = np.sqrt(np.abs(model.lapse))
    outer = xv[:, None] * xv[None, :]
    inner = 1.0 / outer

    # per-wedge pieces: same-copy ("c") and swap ("s") parts
    b0_same = 0.5 * outer * sb["inv_coth"]
    b0_swap = 0.5 * outer * sb["inv_csch"]
    b1_same = 0.5 * inner * sb["eps_coth"]
    b1_swap = -0.5 * inner * sb["eps_csch"]

    b0 = np.block([[b0_same, b0_swap], [b0_swap, b0_same]])
    b1 = np.block([[b1_same, b1_swap], [b1_swap, b1_same]])
    half = 0.5 * np.eye(2 * n)
    lam_plus = np.block([[b1, half], [half, b0]])
    charge = ChargeForm(grid)
    lam_minus = lam_plus - charge.matrix

    blocks = {
        "b0_same": b0_same,
        "b0_swap": b0_swap,
        "b1_same": b1_same,
        "b1_swap": b1_swap,
        "mu": spec.roots.copy(),
    }
    return CovariancePair(
        lambda_plus=BlockOperator(lam_plus, "sigma", grid),
        lambda_minus=BlockOperator(lam_minus, "sigma", grid),
        charge=charge,
        beta=float(beta),
        provenance="double-kms",
        blocks=blocks,
    )


def covariance_projections(pair: CovariancePair):
    """Return ``(c^+, c^-)`` with ``c^\\pm = \\pm q^{-1} lambda^\\pm``."""
    n2 = 2 * pair.grid.n
    lp = pair.lambda_plus.matrix
    lm = pair.lambda_minus.matrix
    # q^{-1} = q swaps the two slot rows; no arithmetic involved
    cp = np.concatenate([lp[n2:], lp[:n2]])
    cm = -np.concatenate([lm[n2:], lm[:n2]])
    return (
        BlockOperator(cp, "sigma", pair.grid),
        BlockOperator(cm, "sigma", pair.grid),
    )


def conjugate_by_rhat(c: BlockOperator) -> BlockOperator:
    """Re-index between the sigma and copies layouts (an involution)."""
    if c.layout not in LAYOUTS:
        raise LayoutError(f"unknown layout {c.layout!r}")
    p = _layout_permutation(c.n)
    target = "copies" if c.layout == "sigma" else "sigma"
    return BlockOperator(c.matrix[np.ix_(p, p)], target, c.grid)


def swap_operator(grid: Grid1D) -> np.ndarray:
    """Wedge reflection ``T`` on one slot of the doubled surface."""
    n = grid.n
    z = np.zeros((n, n))
    i = np.eye(n)
    return np.block([[z, i], [i, z]])


def weighted_eigvalsh(matrix, weights) -> np.ndarray:
    """Eigenvalues of an operator self-adjoint in ``L^2(W)``."""
    sw = np.sqrt(weights)
    m = sw[:, None] * matrix / sw[None, :]
    return np.linalg.eigvalsh(0.5 * (m + m.T))


def hermiticity_residual(matrix, weights) -> float:
    wm = weights[:, None] * matrix
    scale = max(np.max(np.abs(wm)), np.finfo(float).tiny)
    return float(np.max(np.abs(wm - wm.T)) / scale)


@dataclass
class ValidationReport:
    """Residuals of the quasi-free state conditions for a covariance pair."""

    hermiticity_plus: float
    hermiticity_minus: float
    min_eig_plus: float
    min_eig_minus: float
    norm_plus: float
    norm_minus: float
    charge_residual: float
    purity_residual: float
    norm_c_plus: float
    positivity_tol: float = 1e-8
    hermiticity_tol: float = 1e-10
    purity_tol: float = 1e-9

    @property
    def positivity_plus(self) -> float:
        """Negative part of the spectrum relative to the norm (0 if PSD)."""
        return max(0.0, -self.min_eig_plus / self.norm_plus)

    @property
    def positivity_minus(self) -> float:
        return max(0.0, -self.min_eig_minus / self.norm_minus)

    @property
    def relative_purity(self) -> float:
        return self.purity_residual / self.norm_c_plus

    def checks(self):
        """``(name, residual, tolerance)`` triples; pass iff residual <= tol."""
        return [
            ("charge_exact", self.charge_residual, 0.0),
            ("hermitian_plus", self.hermiticity_plus, self.hermiticity_tol),
            ("hermitian_minus", self.hermiticity_minus, self.hermiticity_tol),
            ("positive_plus", self.positivity_plus, self.positivity_tol),
            ("positive_minus", self.positivity_minus, self.positivity_tol),
            ("pure", self.relative_purity, self.purity_tol),
        ]

    @property
    def ok(self) -> bool:
        return all(r <= t for _, r, t in self.checks())


def validate_state(pair: CovariancePair) -> ValidationReport:
    """Measure hermiticity, positivity, the charge identity and purity."""
    w = pair.lambda_plus.weights
    lp = pair.lambda_plus.matrix
    lm = pair.lambda_minus.matrix
    ev_p = weighted_eigvalsh(lp, w)
    ev_m = weighted_eigvalsh(lm, w)
    charge_res = float(np.max(np.abs(lp - lm - pair.charge.matrix)))
    cp, _ = covariance_projections(pair)
    c = cp.matrix
    purity = op_norm(c @ c - c, w)
    return ValidationReport(
        hermiticity_plus=hermiticity_residual(lp, w),
        hermiticity_minus=hermiticity_residual(lm, w),
        min_eig_plus=float(ev_p[0]),
        min_eig_minus=float(ev_m[0]),
        norm_plus=float(np.max(np.abs(ev_p))),
        norm_minus=float(np.max(np.abs(ev_m))),
        charge_residual=charge_res,
        purity_residual=purity,
        norm_c_plus=cp.norm(),
    )


def cross_copy_decay(pair: CovariancePair):
    """Cross-copy to same-copy ratio of the field block against ``2 e^{-beta mu_1/2}``.

    Since ``csch(x) = coth(x)/cosh(x)`` and ``1/cosh(x) <= 2 e^{-x}``, the
    swap part of ``b0`` is bounded by ``2 e^{-beta mu_1 / 2}`` times the
    same-copy part.
    """
    w = pair.grid.quad_weights
    cross = op_norm(pair.blocks["b0_swap"], w)
    diag = op_norm(pair.blocks["b0_same"], w)
    mu1 = float(pair.blocks["mu"][0])
    bound = 2.0 * np.exp(-0.5 * pair.beta * mu1) * diag
    return cross, bound
