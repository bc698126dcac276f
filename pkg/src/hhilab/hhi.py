"""Hartle-Hawking-Israel covariances from the flat smooth extension.

At ``beta = 2 pi / kappa`` the Rindler cylinder closes into the Euclidean
plane with polar angle ``theta = kappa tau``; the two slab boundaries become
the two halves of the X-axis. The extended projector is the half-plane
Calderon projector on the full line ``Sigma^- u B u Sigma^+`` and the HHI
covariances are ``lambda^+ = q D_ext``, ``lambda^- = lambda^+ - q``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .calderon import HalfspaceProjector, halfspace_calderon, line_frequency_operator
from .errors import BetaMismatch, ConicSingularity, ModelError, SupportError
from .geometry import DoubledData, Grid1D, HorizonModel, rhat_identify
from .kms import covariance_projections, kms_covariances, weighted_eigvalsh
from .operators import SpectralData, assemble_epsilon_squared, spectral_decompose

HAWKING_ATOL = 1e-12


@dataclass(frozen=True, eq=False)
class ExtendedModel:
    """Full-line surface for the smooth extension across B."""

    line: Grid1D
    half: HorizonModel
    mass: float
    kappa: float
    flat: bool

    @property
    def n(self) -> int:
        return self.line.n


def extend_model(model: HorizonModel, *, include_origin: bool = True) -> ExtendedModel:
    """Mirror a half-line model; the flat flag needs a Rindler lapse and constant mass."""
    line = Grid1D.symmetric_line(model.grid, include_origin=include_origin)
    flat = model.is_rindler and model.params.mass_profile == "constant"
    return ExtendedModel(line, model, float(model.mass_floor), float(model.kappa), flat)


def check_hawking(kappa: float, beta: float, atol: float = HAWKING_ATOL):
    """Raise :class:`ConicSingularity` unless ``kappa * beta = 2 pi`` within ``atol``."""
    angle = kappa * beta
    if abs(angle - 2.0 * math.pi) > atol:
        raise ConicSingularity(angle, kappa=kappa, beta=beta)


@dataclass(frozen=True, eq=False)
class HHICovariances:
    """``lambda^+ = q D_ext`` and ``lambda^- = lambda^+ - q`` on the full line."""

    lambda_plus: np.ndarray
    lambda_minus: np.ndarray
    charge: np.ndarray
    projector: HalfspaceProjector
    beta: float

    @property
    def grid(self) -> Grid1D:
        return self.projector.grid

    @property
    def weights(self) -> np.ndarray:
        return self.projector.weights


def line_charge(n: int) -> np.ndarray:
    z = np.zeros((n, n))
    i = np.eye(n)
    return np.block([[z, i], [i, z]])


def build_hhi_covariances(ext: ExtendedModel, beta: float) -> HHICovariances:
    """HHI covariances; only the flat Rindler extension at the Hawking beta exists."""
    check_hawking(ext.kappa, beta)
    if not ext.flat:
        raise ModelError("only the flat Rindler extension (constant mass) is realized")
    proj = halfspace_calderon(ext.mass, ext.line)
    q = line_charge(ext.n)
    n = ext.n
    d = proj.matrix
    # q D swaps the two slot rows
    lam_plus = np.concatenate([d[n:], d[:n]])
    return HHICovariances(lam_plus, lam_plus - q, q, proj, float(beta))


@dataclass
class HHIValidation:
    charge_residual: float
    purity: float
    min_eig: float
    norm: float

    @property
    def positivity(self) -> float:
        return max(0.0, -self.min_eig / self.norm)


def validate_hhi(cov: HHICovariances) -> HHIValidation:
    w = cov.weights
    ev = weighted_eigvalsh(cov.lambda_plus, w)
    return HHIValidation(
        charge_residual=float(np.max(np.abs(cov.lambda_plus - cov.lambda_minus - cov.charge))),
        purity=cov.projector.idempotency_residual(),
        min_eig=float(ev[0]),
        norm=float(np.max(np.abs(ev))),
    )


def reflection_positivity_form(cov: HHICovariances, f) -> tuple[float, float]:
    """``(f | q D_ext f)`` directly and through the reflection-positivity factorization.

    A source ``delta(Y) f_1 - delta'(Y) f_0`` placed just outside the upper
    half plane propagates to ``u_0 = f_1 + w f_0`` at the axis, and the
    pairing with its reflection is ``<u_0, (2 w)^{-1} u_0>``, a sum of
    non-negative terms in the eigenbasis of ``w``.
    """
    proj = cov.projector
    n = proj.n
    f = np.asarray(f, dtype=float).ravel()
    w = np.tile(cov.grid.quad_weights, 2)
    direct = float(np.sum(w * f * (cov.lambda_plus @ f)))

    vals, vecs = line_frequency_operator(proj.mass, proj.grid)
    root = np.sqrt(vals)
    sw = np.sqrt(cov.grid.quad_weights)
    c0 = vecs.T @ (sw * f[:n])
    c1 = vecs.T @ (sw * f[n:])
    u0 = c1 + root * c0
    rp = float(np.sum(u0**2 / (2.0 * root)))
    return direct, rp


def compact_bump(s, center: float, radius: float):
    """Smooth bump ``exp(1 - 1/(1 - x^2))`` with support ``|s - center| < radius``."""
    x = (np.asarray(s, dtype=float) - center) / radius
    out = np.zeros_like(x)
    inside = np.abs(x) < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - x[inside] ** 2))
    return out


def random_bump_data(grid: Grid1D, rng, lo: float, hi: float) -> DoubledData:
    """Doubled data made of a few random compact bumps inside ``[lo, hi]``."""
    data = np.zeros((2, 2, grid.n))
    for _ in range(int(rng.integers(1, 4))):
        radius = rng.uniform(0.08, 0.3) * (hi - lo)
        center = rng.uniform(lo + radius, hi - radius)
        copy = int(rng.integers(0, 2))
        slot = int(rng.integers(0, 2))
        data[copy, slot] += rng.normal() * compact_bump(grid.nodes, center, radius)
    return DoubledData(grid, data[0], data[1])


def _check_support(f: DoubledData, lo: float, hi: float):
    s = f.grid.nodes
    outside = (s < lo) | (s > hi)
    if np.any(f.copy_0[:, outside] != 0) or np.any(f.copy_half[:, outside] != 0):
        raise SupportError(f"probe data must vanish outside [{lo}, {hi}]")


@dataclass(frozen=True)
class RestrictionResult:
    kms_side: float
    extended_side: float

    @property
    def relative_difference(self) -> float:
        return abs(self.kms_side - self.extended_side) / max(abs(self.kms_side), abs(self.extended_side), 1e-12)


class RestrictionProbe:
    """Compares ``(g | c^+ f)`` on the half line with ``(g_ext | D_ext f_ext)``."""

    def __init__(self, ext: ExtendedModel, beta: float, *, spec: SpectralData | None = None,
                 margins: tuple[float, float] = (0.3, 0.7)):
        check_hawking(ext.kappa, beta)
        model = ext.half
        if spec is None:
            spec = spectral_decompose(assemble_epsilon_squared(model))
        pair = kms_covariances(spec, model, beta)
        self.c_plus, _ = covariance_projections(pair)
        self.hhi = build_hhi_covariances(ext, beta)
        self.ext = ext
        L = model.grid.right
        self.support = (margins[0] * L, margins[1] * L)

    def pairings(self, f: DoubledData, g: DoubledData) -> RestrictionResult:
        _check_support(f, *self.support)
        _check_support(g, *self.support)
        w = self.c_plus.weights
        left = float(np.sum(w * g.to_sigma_vector() * (self.c_plus.matrix @ f.to_sigma_vector())))
        fe = rhat_identify(f, self.ext.line).ravel()
        ge = rhat_identify(g, self.ext.line).ravel()
        we = self.hhi.weights
        right = float(np.sum(we * ge * (self.hhi.projector.matrix @ fe)))
        return RestrictionResult(left, right)


def restriction_agreement(ext: ExtendedModel, model: HorizonModel, f: DoubledData, g: DoubledData,
                          beta: float, *, spec: SpectralData | None = None) -> RestrictionResult:
    """Both sides of the restriction identity for one pair of probes."""
    if ext.half is not model and not ext.half.grid.same_as(model.grid):
        raise ModelError("extended model does not restrict to the given half-line model")
    return RestrictionProbe(ext, beta, spec=spec).pairings(f, g)


def restriction_study(ext: ExtendedModel, beta: float, *, n_pairs: int = 64, seed: int = 0,
                      margins=(0.3, 0.7), spec: SpectralData | None = None):
    """Relative differences for ``n_pairs`` seeded random bump pairs."""
    probe = RestrictionProbe(ext, beta, spec=spec, margins=margins)
    rng = np.random.default_rng(seed)
    lo, hi = probe.support
    out = []
    for _ in range(n_pairs):
        f = random_bump_data(ext.half.grid, rng, lo, hi)
        g = random_bump_data(ext.half.grid, rng, lo, hi)
        out.append(probe.pairings(f, g))
    return out


def uniqueness_probe(ext: ExtendedModel, beta: float, *, n_pairs: int = 64, seed: int = 1,
                     margins=(0.3, 0.7), spec: SpectralData | None = None) -> float:
    """Sup over probe pairs of the relative gap between the two ``lambda^+`` constructions.

    One side is ``q D_ext``, the other the pushforward of ``q c^+`` from the
    half-line double-KMS state.
    """
    if abs(ext.kappa * beta - 2.0 * math.pi) > HAWKING_ATOL:
        raise BetaMismatch(f"uniqueness probe needs the Hawking beta, got kappa*beta = {ext.kappa * beta!r}")
    probe = RestrictionProbe(ext, beta, spec=spec, margins=margins)
    rng = np.random.default_rng(seed)
    lo, hi = probe.support
    worst = 0.0
    for _ in range(n_pairs):
        f = random_bump_data(ext.half.grid, rng, lo, hi)
        g = random_bump_data(ext.half.grid, rng, lo, hi)
        # q swaps slots of g: (g | q c f) = (q g | c f)
        qg = DoubledData(g.grid, g.copy_0[::-1], g.copy_half[::-1])
        worst = max(worst, probe.pairings(f, qg).relative_difference)
    return worst


@dataclass
class SymbolReport:
    frequencies: np.ndarray
    ratios: np.ndarray
    decay_rate: float

    @property
    def max_deviation(self) -> float:
        return float(np.max(np.abs(self.ratios - 1.0)))


def symbol_decay_probe(block: np.ndarray, grid: Grid1D, mass: float, window: tuple[int, int],
                       *, n_freq: int = 12) -> SymbolReport:
    """Symbol ratio of a ``(1,0)`` block against ``1/2 sqrt(xi^2 + m^2)``.

    Windowed plane waves ``chi(s) cos(xi s)`` are used for ``xi`` in the
    decade below a quarter of the grid Nyquist frequency. The decay rate is
    the fitted exponential rate of the kernel ``|K(s_c, s')|`` away from the
    window center.
    """
    i0, i1 = window
    s = grid.nodes
    w = grid.quad_weights
    h = float(np.min(np.diff(s)))
    xi_max = 0.25 * math.pi / h
    xis = np.geomspace(0.1 * xi_max, xi_max, n_freq)
    center = 0.5 * (s[i0] + s[i1 - 1])
    radius = 0.5 * (s[i1 - 1] - s[i0])
    chi = compact_bump(s, center, radius)
    ratios = []
    for xi in xis:
        phi = chi * np.cos(xi * s)
        num = np.sum(w * phi * (block @ phi))
        ratios.append(num / (0.5 * math.sqrt(xi**2 + mass**2) * np.sum(w * phi * phi)))

    ic = (i0 + i1) // 2
    kernel = np.abs(block[ic] / w)
    dist = np.abs(s - s[ic])
    sel = (dist > 5 * h) & (dist < radius) & (kernel > 0)
    rate = float("nan")
    if np.count_nonzero(sel) >= 3:
        rate = float(-np.polyfit(dist[sel], np.log(kernel[sel]), 1)[0])
    return SymbolReport(xis, np.array(ratios), rate)


def hhi_symbol_block(cov: HHICovariances) -> np.ndarray:
    """The ``(1,0)`` block ``1/2 w`` of ``D_ext``."""
    n = cov.projector.n
    return cov.projector.matrix[n:, :n]


def kms_symbol_block(c_plus) -> np.ndarray:
    """Same-copy ``(1,0)`` block of ``c^+`` in sigma layout."""
    return c_plus.block(1, 0, 0, 0)
