"""Unit-cell geometry: periodic interface curves, walls, artificial
boundaries, particle boundaries, and random particle placement.

All curves are discretized at equispaced parameter nodes except the cell
walls, which carry Gauss-Legendre nodes.  Interface curves are graphs
y(x) = mean + sum_j A_j sin(2 pi j x / d) + B_j cos(2 pi j x / d) sampled
with nodes offset half a spacing so none lands on x = +-d/2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .quadrature import gauss_legendre


class PlacementError(RuntimeError):
    """Raised when rejection sampling cannot place a particle."""


@dataclass
class DiscretizedCurve:
    """Parametrized quadrature curve.

    weights are parameter-space weights; arclength integrals use
    weights * speeds.  For closure "open_periodic" the parametrization
    extends to all real t, advancing by `period_translation` per period
    (one period of a grating interface).
    """

    t: np.ndarray
    nodes: np.ndarray
    normals: np.ndarray
    speeds: np.ndarray
    weights: np.ndarray
    closure: str
    param_period: float = 0.0
    period_translation: np.ndarray = field(default_factory=lambda: np.zeros(2))
    param_eval: object = None
    # param_diff(s, tau) -> x(s) - x(tau) evaluated without catastrophic
    # cancellation; used for kernel evaluation at near-diagonal nodes
    param_diff: object = None

    @property
    def n(self) -> int:
        return self.nodes.shape[0]

    @property
    def dt(self) -> float:
        return self.param_period / self.n

    @property
    def arc_weights(self) -> np.ndarray:
        return self.weights * self.speeds

    def translated(self, shift) -> "DiscretizedCurve":
        shift = np.asarray(shift, dtype=float)
        return DiscretizedCurve(self.t, self.nodes + shift, self.normals,
                                self.speeds, self.weights, self.closure,
                                self.param_period, self.period_translation,
                                self.param_eval)


@dataclass(frozen=True)
class InterfaceSpec:
    """Trigonometric graph description of one periodic interface."""

    mean: float
    sin_coeffs: tuple = ()
    cos_coeffs: tuple = ()

    def height(self, x, d: float = 1.0):
        x = np.asarray(x, dtype=float)
        y = np.full_like(x, self.mean)
        for j, a in enumerate(self.sin_coeffs, start=1):
            y = y + a * np.sin(2 * np.pi * j * x / d)
        for j, b in enumerate(self.cos_coeffs, start=1):
            y = y + b * np.cos(2 * np.pi * j * x / d)
        return y

    def slope(self, x, d: float = 1.0):
        x = np.asarray(x, dtype=float)
        dy = np.zeros_like(x)
        for j, a in enumerate(self.sin_coeffs, start=1):
            dy = dy + a * (2 * np.pi * j / d) * np.cos(2 * np.pi * j * x / d)
        for j, b in enumerate(self.cos_coeffs, start=1):
            dy = dy - b * (2 * np.pi * j / d) * np.sin(2 * np.pi * j * x / d)
        return dy

    def extremes(self, d: float = 1.0, samples: int = 4096):
        x = np.linspace(-0.5 * d, 0.5 * d, samples, endpoint=False)
        y = self.height(x, d)
        return float(np.min(y)), float(np.max(y))


@dataclass(frozen=True)
class ParticleShape:
    """Star-shaped inclusion boundary r(t) = base + bump * cos(lobes * t)."""

    base_radius: float
    bump_amplitude: float
    lobes: int

    def __post_init__(self):
        if not (0 <= self.bump_amplitude < self.base_radius):
            raise ValueError("bump amplitude must be smaller than the base radius")

    @property
    def enclosing_radius(self) -> float:
        return self.base_radius + self.bump_amplitude


@dataclass
class ParticleSet:
    centers: np.ndarray          # (M, 2)
    rotations: np.ndarray        # (M,)
    shape: ParticleShape
    period: float

    @property
    def count(self) -> int:
        return self.centers.shape[0]

    @property
    def radius(self) -> float:
        return self.shape.enclosing_radius

    def min_gap(self) -> float:
        """Smallest center distance over all pairs and their +-d copies,
        minus 2R; negative means overlapping enclosing disks."""
        if self.count < 2:
            return np.inf
        c = self.centers
        best = np.inf
        for l in (-1.0, 0.0, 1.0):
            diff = c[:, None, :] - c[None, :, :] - np.array([l * self.period, 0.0])
            dist = np.hypot(diff[..., 0], diff[..., 1])
            if l == 0.0:
                dist[np.arange(self.count), np.arange(self.count)] = np.inf
            best = min(best, float(np.min(dist)))
        return best - 2.0 * self.radius


def sample_interface(spec: InterfaceSpec, n: int, d: float) -> DiscretizedCurve:
    """Discretize a graph interface with n nodes equispaced in x, offset by
    half a spacing so no node sits on the cell walls."""
    if n < 16 or n % 2:
        raise ValueError("need an even node count >= 16")
    t = (np.arange(n) + 0.5) / n

    def evaluate(tau):
        tau = np.asarray(tau, dtype=float)
        x = d * (tau - 0.5)
        y = spec.height(x, d)
        dy = spec.slope(x, d)
        pts = np.stack([x, y], axis=-1)
        tang = np.stack([np.full_like(x, d), d * dy], axis=-1)
        nrm = np.stack([-dy, np.ones_like(x)], axis=-1)
        nrm /= np.hypot(nrm[..., 0], nrm[..., 1])[..., None]
        return pts, tang, nrm

    def diff(s, tau):
        s = np.asarray(s, dtype=float)
        tau = np.asarray(tau, dtype=float)
        dy = np.zeros(np.broadcast_shapes(s.shape, tau.shape))
        for j, a in enumerate(spec.sin_coeffs, start=1):
            dy = dy + 2 * a * np.cos(np.pi * j * (s + tau - 1.0)) * np.sin(np.pi * j * (s - tau))
        for j, b in enumerate(spec.cos_coeffs, start=1):
            dy = dy - 2 * b * np.sin(np.pi * j * (s + tau - 1.0)) * np.sin(np.pi * j * (s - tau))
        return np.stack([d * (s - tau), dy], axis=-1)

    pts, tang, nrm = evaluate(t)
    speeds = np.hypot(tang[:, 0], tang[:, 1])
    return DiscretizedCurve(t, pts, nrm, speeds, np.full(n, 1.0 / n),
                            "open_periodic", 1.0, np.array([d, 0.0]), evaluate, diff)


def sample_particle(shape: ParticleShape, center, rotation: float, n: int) -> DiscretizedCurve:
    """Closed star-shaped particle boundary, equispaced in parameter."""
    if n < 64:
        raise ValueError("need at least 64 nodes on a particle boundary")
    center = np.asarray(center, dtype=float)
    a1, a2, a3 = shape.base_radius, shape.bump_amplitude, shape.lobes
    cr, sr = math.cos(rotation), math.sin(rotation)
    rot = np.array([[cr, -sr], [sr, cr]])

    def evaluate(tau):
        tau = np.asarray(tau, dtype=float)
        rho = a1 + a2 * np.cos(a3 * tau)
        drho = -a2 * a3 * np.sin(a3 * tau)
        ct, st = np.cos(tau), np.sin(tau)
        pts = np.stack([rho * ct, rho * st], axis=-1) @ rot.T + center
        tang = np.stack([drho * ct - rho * st, drho * st + rho * ct], axis=-1) @ rot.T
        speeds = np.hypot(tang[..., 0], tang[..., 1])
        nrm = np.stack([tang[..., 1], -tang[..., 0]], axis=-1) / speeds[..., None]
        return pts, tang, nrm

    def diff(s, tau):
        s = np.asarray(s, dtype=float)
        tau = np.asarray(tau, dtype=float)
        rho_s = a1 + a2 * np.cos(a3 * s)
        drho = -2 * a2 * np.sin(0.5 * a3 * (s + tau)) * np.sin(0.5 * a3 * (s - tau))
        half_sum, half_diff = 0.5 * (s + tau), 0.5 * (s - tau)
        dcos = -2 * np.sin(half_sum) * np.sin(half_diff)
        dsin = 2 * np.cos(half_sum) * np.sin(half_diff)
        ux = rho_s * dcos + drho * np.cos(tau)
        uy = rho_s * dsin + drho * np.sin(tau)
        return np.stack([ux, uy], axis=-1) @ rot.T

    t = 2 * np.pi * np.arange(n) / n
    pts, tang, nrm = evaluate(t)
    speeds = np.hypot(tang[:, 0], tang[:, 1])
    return DiscretizedCurve(t, pts, nrm, speeds, np.full(n, 2 * np.pi / n),
                            "closed", 2 * np.pi, np.zeros(2), evaluate, diff)


def _wall(x: float, y_lo: float, y_hi: float, n: int) -> DiscretizedCurve:
    y, w = gauss_legendre(n, y_lo, y_hi)
    pts = np.stack([np.full(n, x), y], axis=-1)
    nrm = np.tile([1.0, 0.0], (n, 1))
    return DiscretizedCurve(y, pts, nrm, np.ones(n), w, "open")


def _lid(y: float, n: int, d: float) -> DiscretizedCurve:
    x = -0.5 * d + d * (np.arange(n) + 0.5) / n
    pts = np.stack([x, np.full(n, y)], axis=-1)
    nrm = np.tile([0.0, 1.0], (n, 1))
    return DiscretizedCurve(x, pts, nrm, np.ones(n), np.full(n, d / n), "open")


def wall_node_count(height: float, d: float, per_unit: int = 24) -> int:
    return max(20, math.ceil(per_unit * height / d))


def sample_walls_and_lids(config) -> dict:
    """Left/right wall segments for the three truncated layers plus the
    artificial boundaries at +-y0.  Right walls are exact +d translates of
    the left walls; all wall normals point in +x."""
    d, y0 = config.period, config.y0
    y_top = float(config.interface_top.height(-0.5 * d, d))
    y_bot = float(config.interface_bottom.height(-0.5 * d, d))
    per_unit = config.wall_nodes_per_unit
    curves = {}
    for name, lo, hi in (("1", y_top, y0), ("2", y_bot, y_top), ("3", -y0, y_bot)):
        nw = wall_node_count(hi - lo, d, per_unit)
        left = _wall(-0.5 * d, lo, hi, nw)
        curves["L" + name] = left
        curves["R" + name] = left.translated([d, 0.0])
    curves["Gu"] = _lid(y0, config.lid_nodes, d)
    curves["Gd"] = _lid(-y0, config.lid_nodes, d)
    return curves


def _curve_polyline(spec: InterfaceSpec, d: float, samples: int = 3000) -> np.ndarray:
    """Dense polyline over three periods, for distance queries."""
    x = np.linspace(-1.5 * d, 1.5 * d, samples)
    return np.stack([x, spec.height(x, d)], axis=-1)


def place_random_particles(config, m: int, standoff: float) -> ParticleSet:
    """Rejection-sample m particle centers and rotations.

    Enclosing disks stay `standoff` clear of both interfaces and pairwise
    disjoint including +-d phased copies.  Unless the configuration allows
    wall overlap, disks also stay strictly inside the cell walls.  The
    draw is deterministic for a fixed config seed.
    """
    rng = np.random.default_rng(config.seed)
    d = config.period
    shape = config.particle_shape
    radius = shape.enclosing_radius
    clear = standoff + radius
    poly_top = _curve_polyline(config.interface_top, d)
    poly_bot = _curve_polyline(config.interface_bottom, d)
    lo_top, _ = config.interface_top.extremes(d)
    _, hi_bot = config.interface_bottom.extremes(d)
    y_lo, y_hi = hi_bot + clear, lo_top - clear
    if y_hi <= y_lo:
        raise PlacementError("middle layer too thin for the requested standoff")
    if config.allow_wall_overlap:
        x_lo, x_hi = -0.5 * d, 0.5 * d
    else:
        x_lo, x_hi = -0.5 * d + radius, 0.5 * d - radius
        if x_hi <= x_lo:
            raise PlacementError("cell too narrow for the particle radius")

    centers = np.empty((0, 2))
    max_attempts = 20000 + 5000 * m
    attempts = 0
    while centers.shape[0] < m:
        if attempts >= max_attempts:
            raise PlacementError(
                f"could not place particle {centers.shape[0]} after {attempts} attempts")
        attempts += 1
        c = np.array([rng.uniform(x_lo, x_hi), rng.uniform(y_lo, y_hi)])
        if np.min(np.hypot(*(poly_top - c).T)) < clear:
            continue
        if np.min(np.hypot(*(poly_bot - c).T)) < clear:
            continue
        if centers.shape[0]:
            ok = True
            for l in (-d, 0.0, d):
                diff = centers - c - np.array([l, 0.0])
                if np.min(np.hypot(diff[:, 0], diff[:, 1])) <= 2.0 * radius:
                    ok = False
                    break
            if not ok:
                continue
        centers = np.vstack([centers, c])
    rotations = rng.uniform(0.0, 2 * np.pi, size=m)
    return ParticleSet(centers, rotations, shape, d)


@dataclass
class ProblemConfig:
    """Full problem description with the solver discretization knobs."""

    period: float = 1.0
    k1: float = 10.0
    k2: float = 8.0
    k3: float = 10.0
    kp: float = 30.0
    incident_angle: float = -1.0899767364885713
    interface_top: InterfaceSpec = field(default_factory=lambda: InterfaceSpec(1.0, (0.1,)))
    interface_bottom: InterfaceSpec = field(default_factory=lambda: InterfaceSpec(-1.0, (), (0.2,)))
    artificial_boundary: float | None = None   # y0; None -> 1.6 * max interface |y|
    near_field_copies: int = 1                 # P
    j_expansion_order: int = 36                # Q; 2Q+1 terms per layer
    rb_modes_per_direction: int = 41
    multipole_order: int = 10                  # p
    interface_nodes: int = 120
    lid_nodes: int = 50
    wall_nodes_per_unit: int = 48
    particle_nodes: int = 300
    regularization: float = 1e-10
    gmres_tol: float = 1e-10
    gmres_maxit: int = 150
    alpert_order: int = 16
    seed: int = 0
    particle_count: int = 0
    particle_shape: ParticleShape | None = None
    particle_standoff: float = 0.3
    allow_wall_overlap: bool = False

    def __post_init__(self):
        if not (-np.pi < self.incident_angle < 0.0):
            raise ValueError("incident angle must lie in (-pi, 0)")
        for k in (self.k1, self.k2, self.k3, self.kp, self.period):
            if k <= 0:
                raise ValueError("period and wavenumbers must be positive")
        lo1, hi1 = self.interface_top.extremes(self.period)
        lo2, hi2 = self.interface_bottom.extremes(self.period)
        if lo1 <= hi2:
            raise ValueError("top interface must lie strictly above the bottom one")
        if self.artificial_boundary is None:
            self.artificial_boundary = 1.6 * max(abs(hi1), abs(lo1), abs(hi2), abs(lo2))
        if self.artificial_boundary <= max(abs(hi1), abs(lo2)):
            raise ValueError("artificial boundary must clear both interfaces")
        if self.rb_modes_per_direction % 2 == 0:
            raise ValueError("Rayleigh-Bloch mode count must be odd (symmetric orders)")

    @property
    def y0(self) -> float:
        return self.artificial_boundary

    @property
    def kappa(self) -> float:
        return self.k1 * math.cos(self.incident_angle)

    @property
    def bloch_phase(self) -> complex:
        return complex(np.exp(1j * self.kappa * self.period))

    @property
    def rb_orders(self) -> np.ndarray:
        half = self.rb_modes_per_direction // 2
        return np.arange(-half, half + 1)

    @property
    def j_orders(self) -> np.ndarray:
        q = self.j_expansion_order
        return np.arange(-q, q + 1)

    def kappa_n(self, orders=None) -> np.ndarray:
        if orders is None:
            orders = self.rb_orders
        return self.kappa + 2 * np.pi * np.asarray(orders) / self.period

    def vertical_wavenumber(self, k: float, orders=None) -> np.ndarray:
        """k_{j,n} = sqrt(k^2 - kappa_n^2), positive real or positive
        imaginary branch."""
        kapn = self.kappa_n(orders)
        return np.sqrt((k ** 2 - kapn ** 2).astype(complex))

    def expansion_centers(self) -> dict:
        lo1, hi1 = self.interface_top.extremes(self.period)
        lo2, hi2 = self.interface_bottom.extremes(self.period)
        mid = 0.5 * (self.interface_top.mean + self.interface_bottom.mean)
        return {
            1: np.array([0.0, 0.5 * (self.y0 + hi1)]),
            2: np.array([0.0, mid]),
            3: np.array([0.0, -0.5 * (self.y0 + abs(lo2))]),
        }
