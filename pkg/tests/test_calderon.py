import math

import numpy as np
import pytest

from hhilab.calderon import (
    CalderonProjector,
    assemble_calderon_closed_form,
    assemble_calderon_green_trace,
    boundary_traces,
    halfspace_calderon,
    jump_relation_check,
    line_frequency_operator,
    solution_traces,
)
from hhilab.checks import _ScalarModel, scalar_spectrum
from hhilab.errors import LayoutError
from hhilab.geometry import Grid1D, ModelParams, build_model
from hhilab.green import CylinderField, FDGreen
from hhilab.kms import BlockOperator, conjugate_by_rhat, covariance_projections, kms_covariances
from hhilab.operators import assemble_epsilon_squared, spectral_decompose

BETA = 2 * math.pi


@pytest.fixture(scope="module")
def tiny():
    model = build_model(ModelParams(N=12))
    return model, spectral_decompose(assemble_epsilon_squared(model))


@pytest.fixture(scope="module")
def closed(small_model, small_spec):
    return assemble_calderon_closed_form(small_model, small_spec, BETA)


def test_scalar_blocks_by_hand():
    d = assemble_calderon_closed_form(_ScalarModel(), scalar_spectrum(), 2 * math.log(3.0))
    expected = {
        (0, 0, 0, 0): 0.5, (0, 1, 0, 0): 0.0,
        (0, 0, 0, 1): 0.625, (1, 0, 0, 1): 0.375,
        (0, 0, 1, 0): 0.625, (1, 0, 1, 0): -0.375,
        (0, 0, 1, 1): 0.5, (1, 0, 1, 1): 0.0,
    }
    for (i, j, k, l), v in expected.items():
        assert d.block(i, j, k, l)[0, 0] == pytest.approx(v, abs=1e-15)


def test_closed_form_is_idempotent(closed):
    assert closed.idempotency_residual() < 1e-10


def test_closed_form_matches_conjugated_state(small_model, small_spec, closed):
    cp, _ = covariance_projections(kms_covariances(small_spec, small_model, BETA))
    conj = conjugate_by_rhat(cp)
    assert np.max(np.abs(closed.matrix - conj.matrix)) <= 1e-12 * np.max(np.abs(closed.matrix))


def test_projector_requires_copies_layout(closed):
    sigma = conjugate_by_rhat(closed.operator)
    with pytest.raises(LayoutError):
        CalderonProjector(sigma, "x", BETA)


def _smooth_probes(model):
    s = model.grid.nodes
    L = model.grid.right
    n = s.size
    x = np.zeros((4 * n, 4))
    for q in range(4):
        x[q * n : (q + 1) * n, q] = np.exp(-(((s - 0.5 * L) / (0.1 * L)) ** 2))
    return x


def _action_error(a, b, x):
    return np.linalg.norm((a - b) @ x) / np.linalg.norm(b @ x)


def test_green_trace_approaches_closed_form(small_model, small_spec, closed):
    x = _smooth_probes(small_model)
    errs = []
    for n_tau in (512, 1024, 2048):
        g = assemble_calderon_green_trace(small_model, small_spec, BETA, n_tau=n_tau)
        errs.append(_action_error(g.matrix, closed.matrix, x))
    assert errs[0] > errs[1] > errs[2]
    assert errs[1] / errs[2] > 3.0


def test_green_trace_diagonal_and_cross_value_blocks(small_model, small_spec):
    g = assemble_calderon_green_trace(small_model, small_spec, BETA, n_tau=2048)
    n = small_model.grid.n
    assert np.max(np.abs(g.block(0, 0, 0, 0) - 0.5 * np.eye(n))) < 1e-2
    assert np.max(np.abs(g.block(1, 0, 0, 0))) < 1e-2


def test_green_trace_fd_route_agrees_with_analytic(small_model, small_spec):
    a = assemble_calderon_green_trace(small_model, small_spec, BETA, "analytic", n_tau=512)
    b = assemble_calderon_green_trace(small_model, small_spec, BETA, "fd", n_tau=512)
    assert _action_error(b.matrix, a.matrix, _smooth_probes(small_model)) < 5e-3


def test_green_trace_fourier_route_converges_like_one_over_k(small_model, small_spec):
    # nodal deltas are not band-limited, so the truncated series has a Gibbs error ~ 1/K_max
    a = assemble_calderon_green_trace(small_model, small_spec, BETA, "analytic", n_tau=512)
    x = _smooth_probes(small_model)
    errs = [
        _action_error(assemble_calderon_green_trace(small_model, small_spec, BETA, "fourier", n_tau=512, K_max=k).matrix,
                      a.matrix, x)
        for k in (2048, 4096, 8192)
    ]
    assert np.allclose(np.array(errs[:-1]) / np.array(errs[1:]), 2.0, rtol=0.05)


def test_unknown_route(small_model, small_spec):
    with pytest.raises(ValueError, match="route"):
        assemble_calderon_green_trace(small_model, small_spec, BETA, "spline")


def _fd_column(model, fd, n_tau, copy, slot, node):
    """Traces of |v|^{1/2} G (source) solved directly on the FD cylinder."""
    n = model.grid.n
    xv = np.sqrt(np.abs(model.lapse))
    dtau = BETA / n_tau
    f = np.zeros(n)
    f[node] = 1.0
    h = n_tau // 2
    src = np.zeros((n_tau, n))
    base = 0 if copy == 0 else h
    if slot == 1:
        src[base] = xv * f / dtau
    else:
        sgn = 1.0 if copy == 0 else -1.0
        src[(base + 1) % n_tau] += sgn * f / xv / (2 * dtau * dtau)
        src[(base - 1) % n_tau] -= sgn * f / xv / (2 * dtau * dtau)
    g = fd.solve(CylinderField(src, BETA, model.grid))
    u = g.with_values(g.values * xv)
    return boundary_traces(u, model).to_doubled().to_copies_vector()


def test_fd_route_matches_direct_column_solves(tiny):
    model, spec = tiny
    n_tau = 64
    d = assemble_calderon_green_trace(model, spec, BETA, "fd", n_tau=n_tau)
    fd = FDGreen(model, BETA, n_tau)
    n = model.grid.n
    for copy, slot, node in [(0, 1, 3), (1, 1, 7), (0, 0, 5), (1, 0, 0)]:
        col = d.matrix[:, (2 * copy + slot) * n + node]
        direct = _fd_column(model, fd, n_tau, copy, slot, node)
        assert np.allclose(col, direct, rtol=1e-8, atol=1e-10 * np.max(np.abs(col)))


def test_boundary_traces_of_even_profile(small_model, small_spec):
    e = small_spec.eigenvectors[:, 0]
    u = CylinderField.from_function(lambda t, s: np.cos(math.pi * t / BETA) * e[None, :], BETA, small_model.grid, 512)
    tr = boundary_traces(u, small_model)
    dt = u.dtau
    # cos has zero slope at 0; the stencil error is O(dt^2)
    assert np.max(np.abs(tr.at_zero[1])) < 10 * dt**2 * np.max(np.abs(e / small_model.lapse))
    assert np.allclose(tr.at_zero[0], e, atol=10 * dt**3)


def test_boundary_traces_exact_on_linear_profile(small_model, small_spec):
    e = small_spec.eigenvectors[:, 1]
    v = np.abs(small_model.lapse)
    u = CylinderField.from_function(lambda t, s: t * e[None, :], BETA, small_model.grid, 64)
    tr = boundary_traces(u, small_model)
    assert np.allclose(tr.at_zero[0], 0.0, atol=1e-13)
    assert np.allclose(tr.at_zero[1], -e / v, rtol=1e-11)
    assert np.allclose(tr.at_half[0], 0.5 * BETA * e, rtol=1e-11)
    assert np.allclose(tr.at_half[1], e / v, rtol=1e-11)


def test_solution_traces_match_sampled_solution(small_model, small_spec, rng):
    # low modes only, so that mu dtau is small for every term
    low = small_spec.eigenvectors[:, :6]
    a = low @ rng.normal(size=6)
    b = low @ rng.normal(size=6)
    exact = solution_traces(small_spec, small_model, BETA, a, b)
    xv = np.sqrt(np.abs(small_model.lapse))
    mu = small_spec.roots
    vec = small_spec.eigenvectors
    ca, cb = small_spec.coefficients(a), small_spec.coefficients(b)

    def fn(t, s):
        t = t[:, 0]
        modes = np.exp(-np.outer(t, mu)) * ca + np.exp(np.outer(t - BETA / 2, mu)) * cb
        return xv * (modes @ vec.T)

    n_tau = 8192
    tau = np.arange(n_tau) * BETA / n_tau
    u = CylinderField(fn(tau[:, None], None), BETA, small_model.grid)
    num = boundary_traces(u, small_model).to_doubled()
    rel = np.linalg.norm(num.to_copies_vector() - exact.to_copies_vector()) / np.linalg.norm(exact.to_copies_vector())
    assert rel < 1e-3


def test_jump_identity_and_negative_control(small_model, small_spec, closed, rng):
    a = rng.normal(size=small_model.grid.n)
    b = rng.normal(size=small_model.grid.n)
    inner = solution_traces(small_spec, small_model, BETA, a, b)
    outer = solution_traces(small_spec, small_model, BETA, a, b, exterior=True)
    assert jump_relation_check(closed, inner) < 1e-10
    assert jump_relation_check(closed, outer, interior=False) < 1e-10
    assert jump_relation_check(closed, outer) > 0.1


def test_halfspace_per_mode_blocks():
    line = Grid1D.symmetric_line(Grid1D.uniform_half_line(10.0, 100))
    d = halfspace_calderon(1.0, line)
    vals, vecs = line_frequency_operator(1.0, line)
    w = np.sqrt(vals)
    n = line.n
    big = np.block([[vecs, np.zeros_like(vecs)], [np.zeros_like(vecs), vecs]])
    modal = big.T @ d.matrix @ big
    for k in (0, 5, 50):
        blk = modal[np.ix_([k, n + k], [k, n + k])]
        assert np.allclose(blk, [[0.5, 0.5 / w[k]], [0.5 * w[k], 0.5]], atol=1e-12)
    low = modal[np.ix_([0, n], [0, n])]
    assert np.allclose(low, 0.5, atol=1e-2)


def test_halfspace_projector_properties():
    line = Grid1D.symmetric_line(Grid1D.uniform_half_line(5.0, 40))
    d = halfspace_calderon(2.0, line)
    assert d.idempotency_residual() < 1e-12
    n = line.n
    m = d.matrix
    schur = m[:n, :n] - m[:n, n:] @ np.linalg.solve(m[n:, n:], m[n:, :n])
    assert np.max(np.abs(schur)) < 1e-12
    with pytest.raises(ValueError):
        halfspace_calderon(0.0, line)


def test_apply_uses_copies_layout(closed, rng):
    from hhilab.geometry import DoubledData

    g = closed.grid
    f = DoubledData(g, rng.normal(size=(2, g.n)), rng.normal(size=(2, g.n)))
    out = closed.apply(f)
    assert np.allclose(out.copy_0[0], 0.5 * f.copy_0[0] + closed.block(0, 0, 0, 1) @ f.copy_0[1]
                       + closed.block(0, 1, 0, 1) @ f.copy_half[1])
