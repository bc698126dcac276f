"""Discretized static horizon models.

The right wedge surface is sampled on a grid of positive nodes in (0, L); the
bifurcation point B sits at s = 0 and is never a node. The left wedge surface
is represented as a second copy of the right one through the wedge reflection
(r*h = h, r*v = -v), so no separate grid exists for it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GridMismatchError, ModelError

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True, eq=False)
class Grid1D:
    """Nodes of a 1-d surface with cell widths and quadrature weights.

    ``left``/``right`` are the excluded end points. For a half-line grid the
    left end is B (s = 0, zero form weight) and the right end carries the
    Dirichlet truncation. ``quad_weights`` approximate the induced density
    ``|h|^{1/2} ds`` at each node.
    """

    nodes: np.ndarray
    left: float
    right: float
    quad_weights: np.ndarray
    half_line: bool = True

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 1:
            raise ModelError("grid needs a non-empty 1-d node array")
        if np.any(np.diff(nodes) <= 0):
            raise ModelError("grid nodes must be strictly increasing")
        if self.half_line and nodes[0] <= 0:
            raise ModelError("half-line nodes must be > 0 (B is excluded)")
        if not (self.left < nodes[0] and nodes[-1] < self.right):
            raise ModelError("grid end points must bracket the nodes")
        w = np.asarray(self.quad_weights, dtype=float)
        if w.shape != nodes.shape or np.any(w <= 0):
            raise ModelError("quad_weights must be positive, one per node")
        nodes.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "quad_weights", w)

    @property
    def n(self) -> int:
        return self.nodes.size

    @property
    def edges(self) -> np.ndarray:
        """Nodes with both end points appended."""
        return np.concatenate([[self.left], self.nodes, [self.right]])

    @property
    def spacing(self) -> np.ndarray:
        """Cell widths, one per cell between consecutive edges (n + 1 cells)."""
        return np.diff(self.edges)

    @property
    def midpoints(self) -> np.ndarray:
        e = self.edges
        return 0.5 * (e[1:] + e[:-1])

    def same_as(self, other: "Grid1D") -> bool:
        return self is other or (
            self.n == other.n
            and self.half_line == other.half_line
            and np.array_equal(self.nodes, other.nodes)
            and np.array_equal(self.quad_weights, other.quad_weights)
        )

    def check_same(self, other: "Grid1D"):
        if not self.same_as(other):
            raise GridMismatchError("objects live on different grids")

    @classmethod
    def uniform_half_line(cls, L: float, n: int, metric_weight=None) -> "Grid1D":
        """``n`` equispaced nodes ``s_i = i L / (n + 1)``."""
        h = L / (n + 1)
        nodes = h * np.arange(1, n + 1)
        dual = np.full(n, h)
        rho = np.ones(n) if metric_weight is None else metric_weight(nodes)
        return cls(nodes, 0.0, float(L), dual * rho, half_line=True)

    @classmethod
    def symmetric_line(cls, half: "Grid1D", include_origin: bool = True) -> "Grid1D":
        """Mirror a half-line grid to ``[-L, L]``; node ``0`` (B) is optional."""
        s = half.nodes
        mid = [0.0] if include_origin else []
        nodes = np.concatenate([-s[::-1], mid, s])
        w = half.quad_weights
        w0 = [s[0]] if include_origin else []
        weights = np.concatenate([w[::-1], w0, w])
        return cls(nodes, -half.right, half.right, weights, half_line=False)


def _rindler(kappa):
    return lambda s: kappa * s


def _sin(kappa):
    return lambda s: np.sin(kappa * s)


def _tanh(kappa):
    return lambda s: np.tanh(kappa * s)


LAPSE_PROFILES = {"rindler": _rindler, "sin": _sin, "tanh": _tanh}
MASS_PROFILES = ("constant", "bump")


@dataclass(frozen=True)
class ModelParams:
    """Model section of a scenario: everything :func:`build_model` needs."""

    kappa: float = 1.0
    L: float = 10.0
    N: int = 400
    mass: float = 1.0
    mass_profile: str = "constant"
    mass_bump_amplitude: float = 0.5
    mass_bump_center: float = 5.0
    mass_bump_width: float = 1.0
    lapse: str = "rindler"
    kappa_tolerance: float = 1.0

    def mass_function(self):
        if self.mass_profile == "constant":
            return lambda s: np.full_like(np.asarray(s, dtype=float), self.mass)
        if self.mass_profile == "bump":
            a, c, w = self.mass_bump_amplitude, self.mass_bump_center, self.mass_bump_width
            return lambda s: self.mass + a * np.exp(-(((s - c) / w) ** 2))
        raise ModelError(f"unknown mass profile {self.mass_profile!r}")


@dataclass(frozen=True, eq=False)
class HorizonModel:
    """Lapse, metric weight and potential sampled on the right wedge surface."""

    grid: Grid1D
    lapse: np.ndarray
    metric_weight: np.ndarray
    potential: np.ndarray
    kappa: float
    mass_floor: float
    lapse_mid: np.ndarray
    metric_weight_mid: np.ndarray
    lapse_profile: str = "rindler"
    params: ModelParams = field(default_factory=ModelParams)

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def is_rindler(self) -> bool:
        return self.lapse_profile == "rindler"


def build_model(params: ModelParams) -> HorizonModel:
    """Instantiate a :class:`HorizonModel` and enforce its invariants."""
    bad = []
    if not params.kappa > 0:
        bad.append("kappa must be > 0")
    if not params.L > 0:
        bad.append("L must be > 0")
    if int(params.N) != params.N or params.N < 8:
        bad.append("N must be an integer >= 8")
    if not params.mass > 0:
        bad.append("mass floor must be > 0")
    if params.lapse not in LAPSE_PROFILES:
        bad.append(f"unknown lapse profile {params.lapse!r}")
    if bad:
        raise ModelError("; ".join(bad))

    grid = Grid1D.uniform_half_line(params.L, int(params.N))
    lapse_fn = LAPSE_PROFILES[params.lapse](params.kappa)
    v = np.asarray(lapse_fn(grid.nodes), dtype=float)
    v_mid = np.asarray(lapse_fn(grid.midpoints), dtype=float)
    # last midpoint lies inside the Dirichlet cell; it is still sampled
    if np.any(v <= 0) or np.any(v_mid[1:] <= 0):
        raise ModelError(f"lapse {params.lapse!r} is not positive on (0, L]")

    s1 = grid.nodes[0]
    slope = v[0] / s1
    if abs(slope - params.kappa) > params.kappa_tolerance * params.kappa * s1:
        raise ModelError(
            f"lapse does not vanish linearly at B with rate kappa: "
            f"v(s1)/s1 = {slope!r}, kappa = {params.kappa!r}"
        )

    m = params.mass_function()(grid.nodes)
    if np.any(m < params.mass * (1 - 1e-14)):
        raise ModelError("mass profile drops below the configured floor")

    return HorizonModel(
        grid=grid,
        lapse=v,
        metric_weight=np.ones(grid.n),
        potential=np.asarray(m, dtype=float),
        kappa=float(params.kappa),
        mass_floor=float(params.mass),
        lapse_mid=v_mid,
        metric_weight_mid=np.ones(grid.n + 1),
        lapse_profile=params.lapse,
        params=params,
    )


def hawking_beta(model) -> float:
    """Inverse Hawking temperature ``2 pi / kappa``."""
    kappa = model.kappa if hasattr(model, "kappa") else float(model)
    if not kappa > 0:
        raise ModelError("kappa must be > 0")
    return TWO_PI / kappa


@dataclass(frozen=True)
class ConeAngle:
    """Total angle of the Euclidean cone at B and a metric-side cross-check."""

    angle: float
    circumference_ratio: float
    kappa_estimate: float
    smooth: bool
    deficit: float
    nonlinear_lapse: bool

    def describe(self) -> str:
        if self.smooth:
            return "smooth"
        return f"conic deficit {self.deficit!r}"


def cone_angle(model: HorizonModel, beta: float, *, atol: float = 1e-12) -> ConeAngle:
    """Return ``kappa * beta`` with the circumference ratio at ``r = s_1``.

    The circle ``{s = s_1}`` in the Euclidean metric ``v^2 dtau^2 + ds^2`` has
    circumference ``beta * v(s_1)``; divided by ``s_1`` it tends to
    ``kappa * beta`` as ``s_1 -> 0``.
    """
    if not beta > 0:
        raise ModelError("beta must be > 0")
    angle = model.kappa * beta
    s1 = model.grid.nodes[0]
    ratio = beta * model.lapse[0] / s1
    kappa_est = model.lapse[0] / s1
    tol = model.params.kappa_tolerance * model.kappa * s1
    nonlinear = abs(kappa_est - model.kappa) > tol
    return ConeAngle(
        angle=angle,
        circumference_ratio=ratio,
        kappa_estimate=kappa_est,
        smooth=abs(angle - TWO_PI) <= atol,
        deficit=TWO_PI - angle,
        nonlinear_lapse=nonlinear,
    )


def embed_point(s, tau, beta):
    """Cartesian image ``(X, Y)`` of ``(tau, s)`` under the cone embedding.

    Uses the angle ``2 pi tau / beta`` so that one period in ``tau`` wraps once.
    """
    theta = TWO_PI * np.asarray(tau) / beta
    return s * np.cos(theta), s * np.sin(theta)


@dataclass(frozen=True, eq=False)
class DoubledData:
    """Boundary data on two copies of the right wedge surface.

    ``copy_0`` and ``copy_half`` are ``(2, n)`` arrays holding the pair
    ``(f_0, f_1)``. ``copy_half`` is the left-wedge data pulled back by the
    wedge reflection.
    """

    grid: Grid1D
    copy_0: np.ndarray
    copy_half: np.ndarray

    def __post_init__(self):
        for name in ("copy_0", "copy_half"):
            a = np.asarray(getattr(self, name), dtype=float)
            if a.shape != (2, self.grid.n):
                raise GridMismatchError(f"{name} must have shape (2, {self.grid.n})")
            object.__setattr__(self, name, a)

    @classmethod
    def zeros(cls, grid: Grid1D) -> "DoubledData":
        return cls(grid, np.zeros((2, grid.n)), np.zeros((2, grid.n)))

    def to_copies_vector(self) -> np.ndarray:
        """Flatten in the (copy, slot, node) order used by Calderon blocks."""
        return np.concatenate([self.copy_0.ravel(), self.copy_half.ravel()])

    def to_sigma_vector(self) -> np.ndarray:
        """Flatten in the (slot, wedge, node) order used by covariances."""
        return np.concatenate(
            [self.copy_0[0], self.copy_half[0], self.copy_0[1], self.copy_half[1]]
        )

    @classmethod
    def from_copies_vector(cls, grid: Grid1D, x) -> "DoubledData":
        x = np.asarray(x, dtype=float).reshape(2, 2, grid.n)
        return cls(grid, x[0], x[1])

    @classmethod
    def from_sigma_vector(cls, grid: Grid1D, x) -> "DoubledData":
        x = np.asarray(x, dtype=float).reshape(2, 2, grid.n)
        return cls(grid, x[:, 0, :], x[:, 1, :])

    def pairing(self, other: "DoubledData") -> float:
        """Canonical L2 pairing summed over both slots and both copies."""
        self.grid.check_same(other.grid)
        w = self.grid.quad_weights
        return float(np.sum(w * (self.copy_0 * other.copy_0 + self.copy_half * other.copy_half)))


def rhat_identify(data: DoubledData, line: Grid1D) -> np.ndarray:
    """Push doubled data onto the full surface ``Sigma^- u B u Sigma^+``.

    ``copy_0`` lands on ``X = +s_i``, ``copy_half`` on ``X = -s_i`` (the
    reflected left wedge); the node at B, if present, receives zero. Returns a
    ``(2, line.n)`` array.
    """
    n = data.grid.n
    if line.half_line or line.n not in (2 * n, 2 * n + 1):
        raise GridMismatchError("line grid is not the mirror of the data grid")
    if not np.array_equal(line.nodes[-n:], data.grid.nodes) or not np.array_equal(
        line.nodes[:n], -data.grid.nodes[::-1]
    ):
        raise GridMismatchError("line grid nodes do not mirror the half-line nodes")
    out = np.zeros((2, line.n))
    out[:, -n:] = data.copy_0
    out[:, :n] = data.copy_half[:, ::-1]
    return out


def rhat_restore(values, half: Grid1D, line: Grid1D) -> DoubledData:
    """Inverse of :func:`rhat_identify` (values at B are dropped)."""
    values = np.asarray(values, dtype=float)
    n = half.n
    if values.shape != (2, line.n):
        raise GridMismatchError(f"expected shape (2, {line.n})")
    return DoubledData(half, values[:, -n:].copy(), values[:, :n][:, ::-1].copy())
