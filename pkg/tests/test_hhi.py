import math

import numpy as np
import pytest

from hhilab.errors import BetaMismatch, ConicSingularity, ModelError, SupportError
from hhilab.geometry import DoubledData, ModelParams, build_model
from hhilab.hhi import (
    RestrictionProbe,
    build_hhi_covariances,
    check_hawking,
    compact_bump,
    extend_model,
    hhi_symbol_block,
    kms_symbol_block,
    random_bump_data,
    reflection_positivity_form,
    restriction_agreement,
    restriction_study,
    symbol_decay_probe,
    uniqueness_probe,
    validate_hhi,
)
from hhilab.kms import covariance_projections, kms_covariances

BETA_H = 2 * math.pi


@pytest.fixture(scope="module")
def ext_small():
    return extend_model(build_model(ModelParams(N=100)))


@pytest.fixture(scope="module")
def ext_base(base_model):
    return extend_model(base_model)


def test_hawking_gate_accepts_and_rejects():
    check_hawking(1.0, BETA_H)
    check_hawking(2.0, math.pi)
    with pytest.raises(ConicSingularity) as exc:
        check_hawking(1.0, math.pi)
    assert exc.value.angle == pytest.approx(math.pi)


def test_gate_tolerance_is_tight():
    with pytest.raises(ConicSingularity):
        check_hawking(1.0, BETA_H + 1e-11)
    check_hawking(1.0, BETA_H + 1e-13)


def test_builder_refuses_wrong_beta(ext_small):
    with pytest.raises(ConicSingularity):
        build_hhi_covariances(ext_small, 3.0)


def test_non_flat_extension_is_refused():
    ext = extend_model(build_model(ModelParams(N=50, mass_profile="bump")))
    assert not ext.flat
    with pytest.raises(ModelError):
        build_hhi_covariances(ext, BETA_H)


def test_extended_grid_mirrors_half_line(ext_small):
    assert ext_small.n == 2 * ext_small.half.grid.n + 1
    assert np.allclose(ext_small.line.nodes, -ext_small.line.nodes[::-1])


def test_hhi_state_is_pure_and_positive(ext_small):
    cov = build_hhi_covariances(ext_small, BETA_H)
    v = validate_hhi(cov)
    assert v.charge_residual == 0.0
    assert v.purity < 1e-9
    assert v.positivity < 1e-8


def test_reflection_positivity_route_agrees(ext_small, rng):
    cov = build_hhi_covariances(ext_small, BETA_H)
    for _ in range(5):
        f = rng.normal(size=2 * ext_small.n)
        direct, rp = reflection_positivity_form(cov, f)
        assert rp >= 0
        assert direct == pytest.approx(rp, rel=1e-9)


def test_compact_bump_support():
    s = np.linspace(0, 4, 401)
    b = compact_bump(s, 2.0, 1.0)
    assert b[200] == pytest.approx(1.0)
    assert np.all(b[np.abs(s - 2.0) >= 1.0] == 0.0)
    assert np.all(b[np.abs(s - 2.0) < 0.99] > 0.0)


def test_random_bumps_respect_support(ext_small, rng):
    g = ext_small.half.grid
    for _ in range(20):
        f = random_bump_data(g, rng, 3.0, 7.0)
        outside = (g.nodes < 3.0) | (g.nodes > 7.0)
        assert not np.any(f.copy_0[:, outside]) and not np.any(f.copy_half[:, outside])


def test_restriction_error_decreases_with_refinement():
    worst = []
    for n in (100, 200, 400):
        ext = extend_model(build_model(ModelParams(N=n)))
        worst.append(max(r.relative_difference for r in restriction_study(ext, BETA_H, n_pairs=16)))
    assert worst[0] > worst[1] > worst[2]
    assert worst[2] < 5e-3


def test_restriction_agreement_single_pair(ext_base, base_model, base_spec, rng):
    lo, hi = 3.0, 7.0
    f = random_bump_data(base_model.grid, rng, lo, hi)
    g = random_bump_data(base_model.grid, rng, lo, hi)
    r = restriction_agreement(ext_base, base_model, f, g, BETA_H, spec=base_spec)
    assert r.relative_difference < 5e-3


def test_restriction_rejects_other_model(ext_small, base_model, rng):
    f = DoubledData.zeros(base_model.grid)
    with pytest.raises(ModelError):
        restriction_agreement(ext_small, base_model, f, f, BETA_H)


def test_probe_outside_support_raises(ext_small):
    probe = RestrictionProbe(ext_small, BETA_H)
    g = ext_small.half.grid
    f = DoubledData.zeros(g)
    f.copy_0[0, 0] = 1.0
    with pytest.raises(SupportError):
        probe.pairings(f, f)


def test_uniqueness_probe(ext_small):
    assert uniqueness_probe(ext_small, BETA_H, n_pairs=8) < 1e-2
    with pytest.raises(BetaMismatch):
        uniqueness_probe(ext_small, 1.0)


def test_symbol_of_hhi_block(ext_base):
    cov = build_hhi_covariances(ext_base, BETA_H)
    n = ext_base.n
    rep = symbol_decay_probe(hhi_symbol_block(cov), ext_base.line, 1.0, (n // 2 - 60, n // 2 + 60))
    assert rep.max_deviation < 0.05
    assert np.all(np.diff(rep.frequencies) > 0)


def test_symbol_of_kms_block(base_model, base_spec):
    cp, _ = covariance_projections(kms_covariances(base_spec, base_model, BETA_H))
    rep = symbol_decay_probe(kms_symbol_block(cp), base_model.grid, 1.0, (120, 280))
    assert rep.max_deviation < 0.05
    assert rep.decay_rate > 0


def test_inverse_frequency_kernel_is_bessel_k0():
    # (xi^2 + m^2)^{-1/2} has kernel K0(m |x - y|) / pi, so the (0,1) block of D_ext is the axis
    # restriction of the flat Green function K0(m r) / (2 pi)
    from scipy.special import k0

    from hhilab.calderon import halfspace_calderon
    from hhilab.geometry import Grid1D

    errs = []
    for n in (200, 400):
        line = Grid1D.symmetric_line(Grid1D.uniform_half_line(10.0, n))
        d = halfspace_calderon(1.0, line)
        c = line.n // 2
        x = line.nodes
        dist = np.abs(x - x[c])
        sel = (dist > 0.5) & (dist < 3.0)
        kernel = d.omega_inv[c] / line.quad_weights
        ref = k0(dist[sel]) / math.pi
        errs.append(np.max(np.abs(kernel[sel] - ref) / ref))
    assert errs[1] < 2e-4
    assert errs[0] / errs[1] > 3.5


def test_flat_green_function_inverts_discrete_operator():
    # <G, K phi> = phi(0) up to quadrature error, G = K0(m r) / (2 pi) sampled off the origin
    from scipy.special import k0

    errs = []
    for n in (100, 200):
        h = 8.0 / n
        g = np.arange(-n // 2, n // 2 + 1) * h
        x, y = np.meshgrid(g, g, indexing="ij")
        r = np.hypot(x, y)
        green = np.where(r > 0, k0(np.where(r > 0, r, 1.0)), 0.0) / (2 * math.pi)
        phi = np.exp(-((r / 0.8) ** 2))
        kphi = np.zeros_like(phi)
        c = phi[1:-1, 1:-1]
        kphi[1:-1, 1:-1] = (4 * c - phi[2:, 1:-1] - phi[:-2, 1:-1] - phi[1:-1, 2:] - phi[1:-1, :-2]) / h**2 + c
        errs.append(abs(np.sum(green * kphi) * h * h - 1.0))
    assert errs[1] < 0.02
    assert errs[0] > errs[1]
