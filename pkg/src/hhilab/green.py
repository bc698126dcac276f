"""Green operator of ``-d_tau^2 + eps^2`` on the Euclidean cylinder.

Fields on the cylinder are sampled on the periodic grid ``tau_j = j beta/N_tau``
times the spatial grid. Three routes are provided:

* ``apply_green_analytic``: convolution with the closed-form kernel ``F``.
  The default ``"product"`` rule integrates ``F`` exactly against the
  trigonometric interpolant of the samples; ``"trapezoid"`` is the plain
  trapezoid convolution.
* ``apply_green_fourier_oracle``: the Fourier series of the resolvent.
* ``apply_green_fd_oracle``: a sparse direct solve of the periodic
  finite-difference discretization.

All routes act on the rescaled field ``u~ = |v|^{-1/2} u``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import GridMismatchError, SpectralError, SupportError
from .geometry import Grid1D
from .operators import SpectralData, SymmetricOperator, assemble_epsilon_squared

FD_UNKNOWN_CAP = 200_000


@dataclass(frozen=True, eq=False)
class CylinderField:
    """Samples ``u(tau_j, s_i)``, stored with shape ``(N_tau, n)``."""

    values: np.ndarray
    beta: float
    grid: Grid1D

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[1] != self.grid.n:
            raise GridMismatchError(f"field must have shape (N_tau, {self.grid.n})")
        if v.shape[0] % 2:
            raise GridMismatchError("N_tau must be even")
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains non-finite values")
        if not self.beta > 0:
            raise ValueError("beta must be > 0")
        object.__setattr__(self, "values", v)

    @property
    def n_tau(self) -> int:
        return self.values.shape[0]

    @property
    def dtau(self) -> float:
        return self.beta / self.n_tau

    @property
    def taus(self) -> np.ndarray:
        return np.arange(self.n_tau) * self.dtau

    @classmethod
    def from_function(cls, fn, beta: float, grid: Grid1D, n_tau: int) -> "CylinderField":
        """Sample ``fn(tau[:, None], s[None, :])``."""
        tau = np.arange(n_tau) * (beta / n_tau)
        vals = np.broadcast_to(fn(tau[:, None], grid.nodes[None, :]), (n_tau, grid.n))
        return cls(np.array(vals, dtype=float), beta, grid)

    def with_values(self, values) -> "CylinderField":
        return CylinderField(values, self.beta, self.grid)

    def reflected(self) -> "CylinderField":
        """``(Ru)(tau) = u(-tau)``."""
        idx = (-np.arange(self.n_tau)) % self.n_tau
        return self.with_values(self.values[idx])

    def pairing(self, other: "CylinderField") -> float:
        """``sum_j dtau <u(tau_j), w(tau_j)>_W``."""
        self._check(other)
        return float(self.dtau * np.sum(self.values * other.values * self.grid.quad_weights))

    def _check(self, other: "CylinderField"):
        self.grid.check_same(other.grid)
        if other.n_tau != self.n_tau or other.beta != self.beta:
            raise GridMismatchError("cylinder fields live on different tau grids")


def fold_tau(tau, beta: float):
    """Map ``tau`` into ``[0, beta/2]`` using periodicity and evenness."""
    t = np.mod(np.asarray(tau, dtype=float), beta)
    return np.minimum(t, beta - t)


def kernel_values(mu, beta: float, tau):
    """Scalar kernel ``F_mu(tau)``; broadcasts over ``mu`` and ``tau``."""
    mu = np.asarray(mu, dtype=float)
    t = fold_tau(tau, beta)
    assert np.all((t >= 0) & (t <= beta))
    denom = 2.0 * mu * -np.expm1(-beta * mu)
    return (np.exp(-t * mu) + np.exp((t - beta) * mu)) / denom


def kernel_F(spec: SpectralData, beta: float, tau: float) -> SymmetricOperator:
    """Matrix ``F(tau) = (e^{-|tau| eps} + e^{(|tau|-beta) eps}) / (2 eps (1 - e^{-beta eps}))``."""
    vals = kernel_values(spec.roots, beta, tau)
    return SymmetricOperator(spec.matrix(vals), spec.weights.copy())


def _mode_coefficients(spec: SpectralData, u: CylinderField) -> np.ndarray:
    if spec.n != u.grid.n:
        raise GridMismatchError("spectral data does not match the field grid")
    return spec.coefficients(u.values.T)  # (modes, N_tau)


def _from_modes(spec: SpectralData, c: np.ndarray) -> np.ndarray:
    return (spec.eigenvectors @ c).T


def _band_multiply(spec, u, multipliers):
    """Apply per-mode Fourier multipliers ``multipliers[k, p]`` (p >= 0)."""
    c = _mode_coefficients(spec, u)
    chat = np.fft.rfft(c, axis=1)
    out = np.fft.irfft(chat * multipliers, n=u.n_tau, axis=1)
    return u.with_values(_from_modes(spec, out))


def kernel_fourier_integrals(mu, beta: float, p):
    """``int_0^beta F_mu(sigma) e^{-i p omega sigma} d sigma`` from the exponential form of ``F``."""
    mu = np.asarray(mu, dtype=float)[:, None]
    z = 1j * (2.0 * np.pi / beta) * np.asarray(p, dtype=float)[None, :]
    one_minus = -np.expm1(-beta * mu)
    # the two exponentials of F integrated over one period
    first = one_minus / (mu + z)
    second = one_minus / (mu - z)
    return ((first + second) / (2.0 * mu * one_minus)).real


def apply_green_analytic(spec: SpectralData, beta: float, u: CylinderField, *, rule: str = "product") -> CylinderField:
    """``(G~u)(tau) = int F(tau - tau') u(tau') dtau'``."""
    if u.beta != beta:
        raise GridMismatchError("field beta differs from the kernel beta")
    if rule == "product":
        p = np.arange(u.n_tau // 2 + 1)
        return _band_multiply(spec, u, kernel_fourier_integrals(spec.roots, beta, p))
    if rule == "trapezoid":
        f = kernel_values(spec.roots[:, None], beta, u.taus[None, :])
        c = _mode_coefficients(spec, u)
        conv = np.fft.irfft(np.fft.rfft(f, axis=1) * np.fft.rfft(c, axis=1), n=u.n_tau, axis=1)
        return u.with_values(_from_modes(spec, u.dtau * conv))
    raise ValueError(f"unknown quadrature rule {rule!r}")


def apply_green_fourier_oracle(spec: SpectralData, beta: float, u: CylinderField, K_max: int = 512) -> CylinderField:
    """Truncated series ``sum_{|k| <= K_max} e^{i k omega tau} ((k omega)^2 + eps^2)^{-1}``.

    Modes above the grid Nyquist index are not representable and are absent
    whenever ``K_max >= N_tau/2``; smaller ``K_max`` truncates.
    """
    if u.beta != beta:
        raise GridMismatchError("field beta differs from the kernel beta")
    if K_max < 0:
        raise ValueError("K_max must be >= 0")
    p = np.arange(u.n_tau // 2 + 1)
    omega = 2.0 * np.pi / beta
    mult = 1.0 / ((p[None, :] * omega) ** 2 + spec.eigenvalues[:, None])
    mult[:, p > K_max] = 0.0
    return _band_multiply(spec, u, mult)


def periodic_second_difference(n_tau: int, dtau: float) -> sp.csr_matrix:
    e = np.ones(n_tau)
    d2 = sp.diags([e[:-1], -2 * e, e[:-1]], [-1, 0, 1], format="lil")
    d2[0, n_tau - 1] = 1.0
    d2[n_tau - 1, 0] = 1.0
    return d2.tocsr() / dtau**2


class FDGreen:
    """Factorized periodic finite-difference operator on the cylinder."""

    def __init__(self, model, beta: float, n_tau: int, *, cap: int = FD_UNKNOWN_CAP):
        n = model.grid.n
        if n * n_tau > cap:
            raise ValueError(f"{n * n_tau} unknowns exceed the configured cap {cap}")
        op = assemble_epsilon_squared(model)
        w = op.inner_product
        form = sp.csr_matrix(np.where(np.abs(op.form) > 0, op.form, 0.0))
        dtau = beta / n_tau
        lap = -periodic_second_difference(n_tau, dtau)
        # symmetric form: (-D2 x W) + (I x Q)
        system = sp.kron(lap, sp.diags(w)) + sp.kron(sp.identity(n_tau), form)
        try:
            self._lu = spla.splu(system.tocsc(), permc_spec="COLAMD")
        except RuntimeError as exc:
            raise SpectralError(f"sparse factorization failed: {exc}") from exc
        self.grid = model.grid
        self.beta = beta
        self.n_tau = n_tau
        self.weights = w

    def solve(self, u: CylinderField) -> CylinderField:
        if u.n_tau != self.n_tau or u.beta != self.beta:
            raise GridMismatchError("field does not match the factorized tau grid")
        self.grid.check_same(u.grid)
        rhs = (u.values * self.weights).ravel()
        x = self._lu.solve(rhs)
        if not np.all(np.isfinite(x)):
            raise SpectralError("sparse solve returned non-finite values")
        return u.with_values(x.reshape(self.n_tau, -1))


def apply_green_fd_oracle(model, beta: float, u: CylinderField, N_tau: int | None = None, *, cap: int = FD_UNKNOWN_CAP) -> CylinderField:
    """Solve the periodic finite-difference system for ``u`` directly."""
    n_tau = u.n_tau if N_tau is None else int(N_tau)
    if n_tau != u.n_tau:
        raise GridMismatchError("N_tau does not match the field")
    return FDGreen(model, beta, n_tau, cap=cap).solve(u)


@dataclass(frozen=True)
class ReflectionPairing:
    convolution: float
    proof_identity: float

    @property
    def relative_gap(self) -> float:
        scale = max(abs(self.convolution), abs(self.proof_identity), 1e-300)
        return abs(self.convolution - self.proof_identity) / scale


def _check_half_support(u: CylinderField):
    half = u.n_tau // 2
    if np.any(u.values[half + 1 :] != 0.0):
        raise SupportError("field is not supported in [0, beta/2]")


def reflection_pairing(spec: SpectralData, beta: float, u: CylinderField) -> ReflectionPairing:
    """``<Ru, G~u>`` by trapezoid convolution and by the half-period factorization."""
    _check_half_support(u)
    if u.beta != beta:
        raise GridMismatchError("field beta differs from the kernel beta")
    conv = u.reflected().pairing(apply_green_analytic(spec, beta, u, rule="trapezoid"))
    return ReflectionPairing(conv, _proof_value(spec, beta, u))


def _proof_value(spec, beta, u):
    mu = spec.roots
    half = u.n_tau // 2
    tau = u.taus[: half + 1]
    c = spec.coefficients(u.values[: half + 1].T)  # (modes, half+1)
    u0 = u.dtau * np.sum(np.exp(-np.outer(mu, tau)) * c, axis=1)
    ub = u.dtau * np.sum(np.exp(np.outer(mu, tau - 0.5 * beta)) * c, axis=1)
    k = 1.0 / (2.0 * mu * -np.expm1(-beta * mu))
    return float(np.sum(k * (u0**2 + ub**2)))


class ReflectionBatch:
    """Vectorized reflection pairings for many fields on one grid.

    ``convolution`` uses the Hankel sums ``sum F(tau + tau') c(tau) c(tau')``
    per eigenmode; ``proof_identity`` uses the ``u_0, u_beta`` factorization.
    """

    def __init__(self, spec: SpectralData, beta: float, n_tau: int):
        self.spec = spec
        self.beta = beta
        self.n_tau = n_tau
        self.dtau = beta / n_tau
        half = n_tau // 2
        tau = np.arange(half + 1) * self.dtau
        mu = spec.roots
        self._hankel = kernel_values(mu[:, None, None], beta, (tau[:, None] + tau[None, :])[None])
        self._e0 = np.exp(-np.outer(mu, tau))
        self._eb = np.exp(np.outer(mu, tau - 0.5 * beta))
        self._k = 1.0 / (2.0 * mu * -np.expm1(-beta * mu))

    def evaluate(self, values):
        """``values`` has shape ``(batch, half+1, n)``; returns two arrays."""
        v = np.asarray(values, dtype=float)
        b, t, n = v.shape
        proj = self.spec.eigenvectors * self.spec.weights[:, None]
        c = (v.reshape(b * t, n) @ proj).reshape(b, t, -1).transpose(0, 2, 1)
        conv = np.zeros(v.shape[0])
        for k in range(c.shape[1]):
            ck = c[:, k, :]
            conv += np.sum((ck @ self._hankel[k]) * ck, axis=1)
        conv *= self.dtau**2
        u0 = self.dtau * np.einsum("kt,bkt->bk", self._e0, c)
        ub = self.dtau * np.einsum("kt,bkt->bk", self._eb, c)
        proof = (u0**2 + ub**2) @ self._k
        return conv, proof


def physical_green(spec: SpectralData, model, u: CylinderField) -> CylinderField:
    """``G = |v|^{1/2} G~ |v|^{3/2}`` applied to ``u``."""
    x = np.sqrt(np.abs(model.lapse))
    g = apply_green_analytic(spec, u.beta, u.with_values(u.values * x**3))
    return g.with_values(x * g.values)


def physical_form(spec: SpectralData, model, a: CylinderField, b: CylinderField) -> float:
    """Spectral quadratic form ``sum_p <a~_p, ((p omega)^2 + eps^2) b~_p>``.

    ``a~ = |v|^{-1/2} a``; the sum runs over the discrete Fourier modes.
    """
    x = np.sqrt(np.abs(model.lapse))
    ca = spec.coefficients((a.values / x).T)
    cb = spec.coefficients((b.values / x).T)
    n_tau = a.n_tau
    fa = np.fft.fft(ca, axis=1)
    fb = np.fft.fft(cb, axis=1)
    p = np.fft.fftfreq(n_tau, d=1.0 / n_tau)
    omega = 2.0 * np.pi / a.beta
    sym = (p[None, :] * omega) ** 2 + spec.eigenvalues[:, None]
    return float(a.dtau * np.real(np.sum(np.conj(fa) * sym * fb)) / n_tau)


def weight_conjugation_check(spec: SpectralData, model, v: CylinderField, w: CylinderField):
    """Residual of ``Q(Gv, w) = (v|w)`` with the volume weight ``|v|``.

    Returns ``(relative_residual, condition)``, the latter being the spread of
    the ``|v|^{3/2}`` and ``|v|^{-1/2}`` conjugation factors.
    """
    gv = physical_green(spec, model, v)
    lhs = physical_form(spec, model, gv, w)
    lap = np.abs(model.lapse)
    rhs = v.dtau * float(np.sum(v.values * w.values * lap * v.grid.quad_weights))
    cond = float(np.max(lap**1.5) / np.min(lap**1.5) * np.max(lap**-0.5) / np.min(lap**-0.5))
    return abs(lhs - rhs) / max(abs(rhs), 1e-300), cond
