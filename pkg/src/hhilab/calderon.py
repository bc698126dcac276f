"""Calderon projector of the half-period slab ``(0, beta/2) x Sigma^+``.

Blocks ``D^{(i)(j)}_{kl}`` map source data of slot ``l`` on boundary copy ``j``
to trace slot ``k`` on copy ``i``. Copy 0 is ``tau = 0``, copy 1 is
``tau = beta/2``. Projectors are stored in the ``"copies"`` layout of
:mod:`hhilab.kms`.

Traces follow the exterior-normal convention

    gamma^{(0)} u      = (u, -|v|^{-1} d_tau u)   at tau -> 0+
    gamma^{(beta/2)} u = (u, +|v|^{-1} d_tau u)   at tau -> beta/2-
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import GridMismatchError, LayoutError
from .geometry import DoubledData, Grid1D
from .green import CylinderField, kernel_values
from .kms import BlockOperator
from .operators import SpectralData, op_norm, stable_coth, stable_csch

GREEN_ROUTES = ("analytic", "fourier", "fd")

# quadratic extrapolation from interior nodes at distance 1, 2, 3
_VALUE_STENCIL = np.array([3.0, -3.0, 1.0])
_SLOPE_STENCIL = np.array([-2.5, 4.0, -1.5])


@dataclass(frozen=True, eq=False)
class CalderonProjector:
    """Projector blocks with their provenance."""

    operator: BlockOperator
    provenance: str
    beta: float

    def __post_init__(self):
        if self.operator.layout != "copies":
            raise LayoutError("Calderon projectors are stored in the copies layout")

    @property
    def grid(self) -> Grid1D:
        return self.operator.grid

    @property
    def matrix(self) -> np.ndarray:
        return self.operator.matrix

    def block(self, i: int, j: int, k: int, l: int) -> np.ndarray:
        """``D^{(i)(j)}_{kl}`` with copies ``i, j`` and slots ``k, l`` in {0, 1}."""
        return self.operator.block(i, k, j, l)

    def apply(self, f: DoubledData) -> DoubledData:
        self.grid.check_same(f.grid)
        return DoubledData.from_copies_vector(self.grid, self.matrix @ f.to_copies_vector())

    def norm(self) -> float:
        return self.operator.norm()

    def idempotency_residual(self) -> float:
        """``||D^2 - D|| / ||D||`` in the weighted norm."""
        d = self.matrix
        w = self.operator.weights
        return op_norm(d @ d - d, w) / op_norm(d, w)


def _assemble(grid, d00, d01, d10, d11, provenance, beta):
    """Assemble from per-slot ``(same-copy, cross-copy)`` pairs."""
    n = grid.n
    m = np.zeros((4 * n, 4 * n))
    pieces = {(0, 0): d00, (0, 1): d01, (1, 0): d10, (1, 1): d11}
    for (k, l), (same, cross) in pieces.items():
        for i in range(2):
            for j in range(2):
                r = (2 * i + k) * n
                c = (2 * j + l) * n
                m[r : r + n, c : c + n] = same if i == j else cross
    return CalderonProjector(BlockOperator(m, "copies", grid), provenance, float(beta))


def assemble_calderon_closed_form(model, spec: SpectralData, beta: float) -> CalderonProjector:
    """Blocks from matrix functions of ``eps``."""
    grid = model.grid
    if spec.n != grid.n:
        raise GridMismatchError("spectral data does not match the model grid")
    mu = spec.roots
    x = 0.5 * beta * mu
    coth = stable_coth(x)
    csch = stable_csch(x)
    xv = np.sqrt(np.abs(model.lapse))
    outer = xv[:, None] * xv[None, :]
    inner = 1.0 / outer
    half = 0.5 * np.eye(grid.n)
    zero = np.zeros((grid.n, grid.n))
    d01 = (0.5 * outer * spec.matrix(coth / mu), 0.5 * outer * spec.matrix(csch / mu))
    d10 = (0.5 * inner * spec.matrix(mu * coth), -0.5 * inner * spec.matrix(mu * csch))
    return _assemble(grid, (half, zero), d01, d10, (half, zero), "closed-form", beta)


def _delta_response(route: str, mu, beta: float, n_tau: int, offsets, K_max: int):
    """Scalar response ``U_mu(d dtau)`` to a unit-mass nodal delta at offset 0.

    Returns shape ``(len(mu), len(offsets))``.
    """
    mu = np.asarray(mu, dtype=float)
    d = np.asarray(offsets)
    dtau = beta / n_tau
    if route == "analytic":
        # trapezoid convolution with a point mass samples F exactly
        return kernel_values(mu[:, None], beta, (d * dtau)[None, :])
    omega = 2.0 * np.pi / beta
    if route == "fourier":
        p = np.arange(1, K_max + 1)
        cosines = np.cos(np.outer(p, d) * omega * dtau)
        denom = (p[None, :] * omega) ** 2 + mu[:, None] ** 2
        return (1.0 / mu[:, None] ** 2 + 2.0 * (1.0 / denom) @ cosines) / beta
    if route == "fd":
        # periodic second difference diagonalized by the DFT
        p = np.arange(n_tau)
        lam = (2.0 / dtau * np.sin(np.pi * p / n_tau)) ** 2
        phases = np.cos(2.0 * np.pi * np.outer(p, d) / n_tau)
        return ((1.0 / (lam[None, :] + mu[:, None] ** 2)) @ phases) / beta
    raise ValueError(f"unknown green route {route!r}; expected one of {GREEN_ROUTES}")


def _one_sided(values, dtau):
    """Value and d/d(distance) at distance 0 from samples at distances 1, 2, 3."""
    return values @ _VALUE_STENCIL, (values @ _SLOPE_STENCIL) / dtau


def assemble_calderon_green_trace(
    model,
    spec: SpectralData,
    beta: float,
    green_route: str = "analytic",
    *,
    n_tau: int = 256,
    K_max: int = 512,
) -> CalderonProjector:
    """Blocks from boundary traces of the Green operator applied to nodal deltas.

    Slot-1 sources are ``delta_j(tau) |v|^{1/2} f``; slot-0 sources are
    ``d^{(j)}_tau delta_j(tau) |v|^{-1/2} f`` with ``d^{(0)} = -d_tau`` and
    ``d^{(beta/2)} = +d_tau``, both as centered differences of the nodal delta.
    The Green route only enters through the scalar response of each
    eigenmode to a delta in ``tau``, which is exact for separable operators.
    """
    if green_route not in GREEN_ROUTES:
        raise ValueError(f"unknown green route {green_route!r}; expected one of {GREEN_ROUTES}")
    if n_tau % 2 or n_tau < 8:
        raise ValueError("n_tau must be even and >= 8")
    grid = model.grid
    mu = spec.roots
    dtau = beta / n_tau
    h = n_tau // 2
    dist = np.array([1, 2, 3])

    # trace points: tau = 0 side at +dist, tau = beta/2 side at h - dist
    pts = {0: dist, 1: h - dist}
    src = {0: 0, 1: h}

    def point_source(j):
        """Responses at the trace points of both copies to a delta at copy j."""
        return [_delta_response(green_route, mu, beta, n_tau, pts[i] - src[j], K_max) for i in (0, 1)]

    def dipole_source(j):
        # -d_tau delta ~ (delta_{+1} - delta_{-1}) / (2 dtau); sign flips at beta/2
        sgn = 1.0 if j == 0 else -1.0
        out = []
        for i in (0, 1):
            plus = _delta_response(green_route, mu, beta, n_tau, pts[i] - src[j] - 1, K_max)
            minus = _delta_response(green_route, mu, beta, n_tau, pts[i] - src[j] + 1, K_max)
            out.append(sgn * (plus - minus) / (2.0 * dtau))
        return out

    xv = np.sqrt(np.abs(model.lapse))
    outer = xv[:, None] * xv[None, :]
    ratio = xv[:, None] / xv[None, :]

    n = grid.n
    m = np.zeros((4 * n, 4 * n))
    for j in (0, 1):
        resp = {1: point_source(j), 0: dipole_source(j)}
        for i in (0, 1):
            for l in (0, 1):
                val, slope = _one_sided(resp[l][i], dtau)
                # slope is the inward derivative on both copies, so the
                # exterior-normal trace is -|v|^{-1} slope
                scale_0 = outer if l == 1 else ratio
                scale_1 = ratio.T if l == 1 else 1.0 / outer
                for k, mult, scale in ((0, val, scale_0), (1, -slope, scale_1)):
                    r = (2 * i + k) * n
                    c = (2 * j + l) * n
                    m[r : r + n, c : c + n] = scale * spec.matrix(mult)
    return CalderonProjector(BlockOperator(m, "copies", grid), f"green-trace:{green_route}", float(beta))


@dataclass(frozen=True, eq=False)
class TraceData:
    """Cauchy data ``(gamma_0 u, gamma_1 u)`` on both boundary copies."""

    grid: Grid1D
    at_zero: np.ndarray
    at_half: np.ndarray

    def to_doubled(self) -> DoubledData:
        return DoubledData(self.grid, self.at_zero, self.at_half)


def boundary_traces(u: CylinderField, model) -> TraceData:
    """One-sided second-order traces of a cylinder field on the slab boundary."""
    model.grid.check_same(u.grid)
    h = u.n_tau // 2
    inv = 1.0 / np.abs(model.lapse)
    v0 = u.values[[1, 2, 3]]
    vh = u.values[[h - 1, h - 2, h - 3]]
    val0, slope0 = _VALUE_STENCIL @ v0, (_SLOPE_STENCIL @ v0) / u.dtau
    valh, slopeh = _VALUE_STENCIL @ vh, (_SLOPE_STENCIL @ vh) / u.dtau
    # slope0 = d_tau u at 0+, slopeh = -d_tau u at beta/2-
    g0 = np.stack([val0, -inv * slope0])
    gh = np.stack([valh, -inv * slopeh])
    return TraceData(u.grid, g0, gh)


def solution_traces(spec: SpectralData, model, beta: float, a, b, *, exterior: bool = False) -> DoubledData:
    """Exact Cauchy data of ``u = |v|^{1/2}(e^{-tau eps} a + e^{(tau - beta/2) eps} b)``.

    For ``exterior=True`` the same expression is read as a solution on the
    complementary slab ``(-beta/2, 0)`` (``a <-> e^{tau eps}``), whose traces
    differ only by the sign of the normal derivative.
    """
    xv = np.sqrt(np.abs(model.lapse))
    mu = spec.roots
    e = np.exp(-0.5 * beta * mu)
    ca = spec.coefficients(a)
    cb = spec.coefficients(b)
    vec = spec.eigenvectors
    g0 = np.stack([xv * (vec @ (ca + e * cb)), (vec @ (mu * (ca - e * cb))) / xv])
    gh = np.stack([xv * (vec @ (e * ca + cb)), (vec @ (mu * (cb - e * ca))) / xv])
    if exterior:
        g0[1] *= -1.0
        gh[1] *= -1.0
    return DoubledData(model.grid, g0, gh)


def jump_relation_check(D: CalderonProjector, f: DoubledData, *, interior: bool = True) -> float:
    """``||Df - f|| / ||f||`` for interior data, ``||Df|| / ||f||`` for exterior data."""
    df = D.apply(f)
    x = f.to_copies_vector()
    y = df.to_copies_vector()
    w = D.operator.weights
    r = y - x if interior else y
    return float(np.sqrt(np.sum(w * r * r) / np.sum(w * x * x)))


@dataclass(frozen=True, eq=False)
class HalfspaceProjector:
    """Calderon projector of the upper half plane for ``-Delta + m^2``.

    ``matrix`` acts on ``(f_0, f_1)`` stacked over the line grid.
    """

    matrix: np.ndarray
    grid: Grid1D
    omega: np.ndarray
    omega_inv: np.ndarray
    mass: float
    provenance: str = "halfspace-oracle"

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def weights(self) -> np.ndarray:
        return np.tile(self.grid.quad_weights, 2)

    def apply(self, f) -> np.ndarray:
        return self.matrix @ np.asarray(f, dtype=float).ravel()

    def norm(self) -> float:
        return op_norm(self.matrix, self.weights)

    def idempotency_residual(self) -> float:
        d = self.matrix
        return op_norm(d @ d - d, self.weights) / self.norm()


def line_frequency_operator(mass: float, line: Grid1D):
    """Eigen-data of ``-d_X^2 + m^2`` with Dirichlet ends on a uniform line grid."""
    h = np.diff(line.edges)
    if not np.allclose(h, h[0], rtol=1e-12, atol=0):
        raise GridMismatchError("flat-line operator needs a uniform grid")
    h = h[0]
    n = line.n
    diag = np.full(n, 2.0 / h**2 + mass**2)
    off = np.full(n - 1, -1.0 / h**2)
    vals, vecs = eigh_tridiagonal(diag, off)
    return vals, vecs


def halfspace_calderon(mass: float, line_grid: Grid1D) -> HalfspaceProjector:
    """``D = [[1/2, 1/2 w^{-1}], [1/2 w, 1/2]]`` with ``w = (-d_X^2 + m^2)^{1/2}``."""
    if not mass > 0:
        raise ValueError("mass must be > 0")
    vals, vecs = line_frequency_operator(mass, line_grid)
    root = np.sqrt(vals)
    omega = (vecs * root) @ vecs.T
    omega_inv = (vecs / root) @ vecs.T
    n = line_grid.n
    half = 0.5 * np.eye(n)
    m = np.block([[half, 0.5 * omega_inv], [0.5 * omega, half]])
    return HalfspaceProjector(m, line_grid, omega, omega_inv, float(mass))
