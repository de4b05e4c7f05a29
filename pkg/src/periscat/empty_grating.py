"""Assembly and least-squares solution of the periodized block system for
the inclusion-free three-layer grating.

The scattered field in each truncated layer is represented by phased
free-space layer potentials on the near-field copies of its bounding
interfaces plus one regular (Fourier-Bessel) expansion per layer; the
radiated field above/below the artificial boundaries is a Rayleigh-Bloch
mode sum.  Stacking the interface continuity rows, the wall discrepancy
rows, and the artificial-boundary matching rows over the unknowns

    [mu1, sigma1, mu2, sigma2, a2, a1, a3, c, d]

gives a rectangular, exponentially ill-conditioned but consistent system
solved by a regularized SVD pseudoinverse.  Columns of the regular and
Rayleigh-Bloch expansions are rescaled to unit max magnitude before
factorization; the scaling is undone on recovery so solutions are always
in physical units.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import layerpot, specialfn
from .geometry import DiscretizedCurve, ProblemConfig, sample_interface, sample_walls_and_lids
from .quadrature import ALPERT_RULES


def incident_field(config: ProblemConfig, points, normals=None):
    """Plane wave exp(i k1 (cos(theta) x + sin(theta) y)) and, when normals
    are given, its normal derivative."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    kvec = config.k1 * np.array([np.cos(config.incident_angle),
                                 np.sin(config.incident_angle)])
    vals = np.exp(1j * (points @ kvec))
    if normals is None:
        return vals
    normals = np.atleast_2d(np.asarray(normals, dtype=float))
    return vals, 1j * (normals @ kvec) * vals


def rb_basis(config: ProblemConfig, points, direction: str):
    """Rayleigh-Bloch mode values and y-derivatives at points on (or off)
    the artificial boundaries; one column per order."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    kapn = config.kappa_n()
    k = config.k1 if direction == "up" else config.k3
    kyn = config.vertical_wavenumber(k)
    x = points[:, 0:1]
    y = points[:, 1:2]
    phase = np.exp(1j * x * kapn[None, :])
    if direction == "up":
        vert = np.exp(1j * kyn[None, :] * (y - config.y0))
        dvert = 1j * kyn[None, :] * vert
    else:
        vert = np.exp(1j * kyn[None, :] * (-y - config.y0))
        dvert = -1j * kyn[None, :] * vert
    return phase * vert, phase * dvert


@dataclass
class EmptyGratingSystem:
    config: ProblemConfig
    curves: dict
    centers: dict
    matrix: np.ndarray            # column-rescaled block matrix
    rhs: np.ndarray
    col_scale: np.ndarray         # physical = col_scale * scaled unknowns
    cols: dict = field(default_factory=dict)
    rows: dict = field(default_factory=dict)
    svd: tuple | None = None

    @property
    def shape(self):
        return self.matrix.shape

    def singular_values(self) -> np.ndarray:
        if self.svd is None:
            raise RuntimeError("system not factorized")
        return self.svd[1]


@dataclass
class EmptySolution:
    system: EmptyGratingSystem
    vec: np.ndarray               # physical unknown vector
    residual: float
    timings: dict = field(default_factory=dict)

    def part(self, name: str) -> np.ndarray:
        return self.vec[self.system.cols[name]]

    @property
    def c(self) -> np.ndarray:
        return self.part("c")

    @property
    def d(self) -> np.ndarray:
        return self.part("d")


def _slices(counts):
    out, start = {}, 0
    for name, cnt in counts:
        out[name] = slice(start, start + cnt)
        start += cnt
    return out, start


def build_geometry(config: ProblemConfig) -> dict:
    curves = {"g1": sample_interface(config.interface_top, config.interface_nodes,
                                     config.period),
              "g2": sample_interface(config.interface_bottom, config.interface_nodes,
                                     config.period)}
    curves.update(sample_walls_and_lids(config))
    return curves


def _regular_block(k, center, orders, curve):
    vals, grads = specialfn.regular_wave_block(k, center, orders, curve.nodes)
    ders = np.einsum("ijk,ik->ij", grads, curve.normals)
    return vals, ders


def _interface_block(source, target, k, alpha, copies, k_sub=None, rule=None):
    """[[D, S], [T, N]] stack mapping [mu; sigma] to values and normal
    derivatives (Mueller difference blocks when k_sub is given)."""
    mats = layerpot.boundary_operator_matrices(
        source, target, k, which=("S", "D", "N", "T"), phase=alpha,
        copies=copies, k_subtract=k_sub, rule=rule)
    top = np.hstack([mats["D"], mats["S"]])
    bot = np.hstack([mats["T"], mats["N"]])
    return np.vstack([top, bot])


def assemble_empty_system(config: ProblemConfig, curves: dict | None = None) -> EmptyGratingSystem:
    if curves is None:
        curves = build_geometry(config)
    rule = ALPERT_RULES[config.alpert_order]
    alpha = config.bloch_phase
    copies = config.near_field_copies
    d = config.period
    g1, g2 = curves["g1"], curves["g2"]
    centers = config.expansion_centers()
    jn = config.j_orders
    nrb = config.rb_modes_per_direction
    n1, n2 = g1.n, g2.n
    nw1, nw2, nw3 = curves["L1"].n, curves["L2"].n, curves["L3"].n
    nu = curves["Gu"].n

    cols, ncols = _slices([("mu1", n1), ("sigma1", n1), ("mu2", n2), ("sigma2", n2),
                           ("a2", len(jn)), ("a1", len(jn)), ("a3", len(jn)),
                           ("c", nrb), ("d", nrb)])
    rows, nrows = _slices([("g1_val", n1), ("g1_der", n1), ("g2_val", n2), ("g2_der", n2),
                           ("w2_val", nw2), ("w2_der", nw2), ("w1_val", nw1), ("w1_der", nw1),
                           ("w3_val", nw3), ("w3_der", nw3), ("gu_val", nu), ("gu_der", nu),
                           ("gd_val", nu), ("gd_der", nu)])
    A = np.zeros((nrows, ncols), dtype=complex)

    def put(rv, rd, cname, top, bot):
        A[rows[rv], cols[cname]] = top
        A[rows[rd], cols[cname]] = bot

    # interface continuity rows
    ident1 = np.eye(n1)
    blk = _interface_block(g1, g1, config.k1, alpha, copies, k_sub=config.k2, rule=rule)
    A[rows["g1_val"], cols["mu1"]] = blk[:n1, :n1] + ident1
    A[rows["g1_val"], cols["sigma1"]] = blk[:n1, n1:]
    A[rows["g1_der"], cols["mu1"]] = blk[n1:, :n1]
    A[rows["g1_der"], cols["sigma1"]] = blk[n1:, n1:] - ident1

    blk = _interface_block(g2, g1, config.k2, alpha, copies)
    A[rows["g1_val"], cols["mu2"]] = -blk[:n1, :n2]
    A[rows["g1_val"], cols["sigma2"]] = -blk[:n1, n2:]
    A[rows["g1_der"], cols["mu2"]] = -blk[n1:, :n2]
    A[rows["g1_der"], cols["sigma2"]] = -blk[n1:, n2:]

    ident2 = np.eye(n2)
    blk = _interface_block(g2, g2, config.k2, alpha, copies, k_sub=config.k3, rule=rule)
    A[rows["g2_val"], cols["mu2"]] = blk[:n2, :n2] + ident2
    A[rows["g2_val"], cols["sigma2"]] = blk[:n2, n2:]
    A[rows["g2_der"], cols["mu2"]] = blk[n2:, :n2]
    A[rows["g2_der"], cols["sigma2"]] = blk[n2:, n2:] - ident2

    blk = _interface_block(g1, g2, config.k2, alpha, copies)
    A[rows["g2_val"], cols["mu1"]] = blk[:n2, :n1]
    A[rows["g2_val"], cols["sigma1"]] = blk[:n2, n1:]
    A[rows["g2_der"], cols["mu1"]] = blk[n2:, :n1]
    A[rows["g2_der"], cols["sigma1"]] = blk[n2:, n1:]

    # regular-expansion traces on the interfaces
    v2, d2 = _regular_block(config.k2, centers[2], jn, g1)
    put("g1_val", "g1_der", "a2", -v2, -d2)
    v1, d1 = _regular_block(config.k1, centers[1], jn, g1)
    put("g1_val", "g1_der", "a1", v1, d1)
    v2, d2 = _regular_block(config.k2, centers[2], jn, g2)
    put("g2_val", "g2_der", "a2", v2, d2)
    v3, d3 = _regular_block(config.k3, centers[3], jn, g2)
    put("g2_val", "g2_der", "a3", -v3, -d3)

    # wall discrepancy rows (telescoped phased sums for the densities, a
    # direct left-minus-right difference for the regular expansions)
    def wall_rows(wname, rv, rd, sources, k, aexp, center):
        wall = curves["L" + wname]
        for src, mu_name, sg_name in sources:
            blocks = layerpot.wall_discrepancy_blocks(src, wall, k, alpha, copies)
            A[rows[rv], cols[mu_name]] = blocks["D_val"]
            A[rows[rv], cols[sg_name]] = blocks["S_val"]
            A[rows[rd], cols[mu_name]] = blocks["D_der"]
            A[rows[rd], cols[sg_name]] = blocks["S_der"]
        right = curves["R" + wname]
        vl, gl = specialfn.regular_wave_block(k, center, jn, wall.nodes)
        vr, gr = specialfn.regular_wave_block(k, center, jn, right.nodes)
        A[rows[rv], cols[aexp]] = alpha * vl - vr
        A[rows[rd], cols[aexp]] = alpha * gl[:, :, 0] - gr[:, :, 0]

    wall_rows("2", "w2_val", "w2_der", [(g1, "mu1", "sigma1"), (g2, "mu2", "sigma2")],
              config.k2, "a2", centers[2])
    wall_rows("1", "w1_val", "w1_der", [(g1, "mu1", "sigma1")], config.k1, "a1", centers[1])
    wall_rows("3", "w3_val", "w3_der", [(g2, "mu2", "sigma2")], config.k3, "a3", centers[3])

    # artificial-boundary rows: representation minus Rayleigh-Bloch sum
    for lid, rv, rd, src, mu_name, sg_name, k, aexp, center, direction, cname in (
            ("Gu", "gu_val", "gu_der", g1, "mu1", "sigma1", config.k1, "a1", centers[1], "up", "c"),
            ("Gd", "gd_val", "gd_der", g2, "mu2", "sigma2", config.k3, "a3", centers[3], "down", "d")):
        target = curves[lid]
        blk = _interface_block(src, target, k, alpha, copies)
        n_t, n_s = target.n, src.n
        A[rows[rv], cols[mu_name]] = blk[:n_t, :n_s]
        A[rows[rv], cols[sg_name]] = blk[:n_t, n_s:]
        A[rows[rd], cols[mu_name]] = blk[n_t:, :n_s]
        A[rows[rd], cols[sg_name]] = blk[n_t:, n_s:]
        v, dv = _regular_block(k, center, jn, target)
        put(rv, rd, aexp, v, dv)
        basis_v, basis_d = rb_basis(config, target.nodes, direction)
        put(rv, rd, cname, -basis_v, -basis_d)

    # right-hand side: incident trace on the top interface
    f = np.zeros(nrows, dtype=complex)
    ui, dui = incident_field(config, g1.nodes, g1.normals)
    f[rows["g1_val"]] = -ui
    f[rows["g1_der"]] = -dui

    # rescale expansion and Rayleigh-Bloch columns to unit max magnitude
    col_scale = np.ones(ncols)
    for name in ("a2", "a1", "a3", "c", "d"):
        sl = cols[name]
        mx = np.max(np.abs(A[:, sl]), axis=0)
        mx[mx == 0] = 1.0
        A[:, sl] /= mx[None, :]
        col_scale[sl] = 1.0 / mx

    return EmptyGratingSystem(config, curves, centers, A, f, col_scale, cols, rows)


def factorize(system: EmptyGratingSystem) -> None:
    u, s, vh = np.linalg.svd(system.matrix, full_matrices=False)
    system.svd = (u, s, vh)


def apply_pinv(system: EmptyGratingSystem, g: np.ndarray) -> np.ndarray:
    """V Sigma^+ U* g with Sigma^+_jj = min(1/sigma_j, 1/eps), mapped back
    to physical (unscaled) unknowns."""
    if system.svd is None:
        raise RuntimeError("system not factorized; call factorize() first")
    u, s, vh = system.svd
    eps = system.config.regularization
    inv = np.minimum(1.0 / s, 1.0 / eps)
    y = vh.conj().T @ (inv * (u.conj().T @ g))
    return system.col_scale * y


def solve_empty(config: ProblemConfig, system: EmptyGratingSystem | None = None):
    """Assemble, factorize, and least-squares solve the empty grating."""
    timings = {}
    t0 = time.perf_counter()
    if system is None:
        system = assemble_empty_system(config)
    timings["assembly"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    if system.svd is None:
        factorize(system)
    timings["factorization"] = time.perf_counter() - t0
    x = apply_pinv(system, system.rhs)
    scaled = x / system.col_scale
    residual = np.linalg.norm(system.matrix @ scaled - system.rhs) / np.linalg.norm(system.rhs)
    return EmptySolution(system, x, float(residual), timings)


def _upsampled_density_curve(curve: DiscretizedCurve, values, alpha, factor: int):
    """Refine nodal density values by trigonometric interpolation.  For a
    one-period interface trace the quasi-periodic extension is the smooth
    object, so the Bloch phase is divided out before interpolating."""
    n = curve.n
    src_off = curve.t[0] / curve.dt
    dt_f = curve.param_period / (n * factor)
    tf = src_off * dt_f + np.arange(n * factor) * dt_f
    if curve.closure == "open_periodic":
        # divide out the per-period Bloch phase so the interpolated object
        # is periodic and smooth, then restore it on the fine grid
        kappa_d = np.angle(alpha)
        dephase = np.exp(-1j * kappa_d * curve.t / curve.param_period)
        fine_vals = layerpot.trig_interp(values * dephase, factor, src_off, src_off)
        fine_vals = fine_vals * np.exp(1j * kappa_d * tf / curve.param_period)
    else:
        fine_vals = layerpot.trig_interp(values, factor, src_off, src_off)
    pts, tang, nrm = curve.param_eval(tf)
    speeds = np.hypot(tang[:, 0], tang[:, 1])
    fine = DiscretizedCurve(tf, pts, nrm, speeds,
                            np.full(n * factor, curve.dt / factor), curve.closure,
                            curve.param_period, curve.period_translation,
                            curve.param_eval, curve.param_diff)
    return fine, fine_vals


def phased_layer_field(curve, mu, sigma, k, alpha, copies, points, normals=None,
                       upsample: int = 1):
    """Sum over the 2P+1 phased copies of the single+double layer field."""
    if upsample > 1:
        fine, mu_f = _upsampled_density_curve(curve, mu, alpha, upsample)
        _, sg_f = _upsampled_density_curve(curve, sigma, alpha, upsample)
        curve, mu, sigma = fine, mu_f, sg_f
    total = 0.0
    total_n = 0.0
    for l in range(-copies, copies + 1):
        shifted = curve.translated(l * curve.period_translation)
        dens_s = layerpot.Density(shifted, sigma, "single")
        dens_d = layerpot.Density(shifted, mu, "double")
        coef = alpha ** l
        if normals is None:
            total = total + coef * (layerpot.eval_layer_potentials(dens_s, k, points)
                                    + layerpot.eval_layer_potentials(dens_d, k, points))
        else:
            vs, ds = layerpot.eval_layer_potentials(dens_s, k, points, normals)
            vd, dd = layerpot.eval_layer_potentials(dens_d, k, points, normals)
            total = total + coef * (vs + vd)
            total_n = total_n + coef * (ds + dd)
    return total if normals is None else (total, total_n)


def classify_layer(config: ProblemConfig, points) -> np.ndarray:
    """1 above the top interface, 3 below the bottom one, else 2."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    y1 = config.interface_top.height(points[:, 0], config.period)
    y2 = config.interface_bottom.height(points[:, 0], config.period)
    out = np.full(points.shape[0], 2, dtype=int)
    out[points[:, 1] > y1] = 1
    out[points[:, 1] < y2] = 3
    return out


def eval_empty_field(solution: EmptySolution, points, total: bool = True,
                     upsample: int = 1) -> np.ndarray:
    """Scattered (or total) field of the empty-grating solution, evaluated
    per point with the representation of the layer containing it."""
    config = solution.system.config
    curves = solution.system.curves
    centers = solution.system.centers
    alpha = config.bloch_phase
    copies = config.near_field_copies
    jn = config.j_orders
    points = np.atleast_2d(np.asarray(points, dtype=float))
    layer = classify_layer(config, points)
    out = np.zeros(points.shape[0], dtype=complex)

    layer_data = {
        1: ((curves["g1"], "mu1", "sigma1", config.k1),),
        2: ((curves["g1"], "mu1", "sigma1", config.k2),
            (curves["g2"], "mu2", "sigma2", config.k2)),
        3: ((curves["g2"], "mu2", "sigma2", config.k3),),
    }
    aexp = {1: ("a1", config.k1, centers[1]), 2: ("a2", config.k2, centers[2]),
            3: ("a3", config.k3, centers[3])}
    for lay in (1, 2, 3):
        sel = layer == lay
        if not np.any(sel):
            continue
        pts = points[sel]
        acc = np.zeros(pts.shape[0], dtype=complex)
        for curve, mu_name, sg_name, k in layer_data[lay]:
            acc += phased_layer_field(curve, solution.part(mu_name),
                                      solution.part(sg_name), k, alpha, copies,
                                      pts, upsample=upsample)
        name, k, center = aexp[lay]
        vals, _ = specialfn.regular_wave_block(k, center, jn, pts)
        acc += vals @ solution.part(name)
        if total and lay == 1:
            acc += incident_field(config, pts)
        out[sel] = acc
    return out


def wall_discrepancy_residual(solution: EmptySolution, extra_field=None,
                              n_fresh: int = 31) -> float:
    """Max discrepancy |alpha u(L) - u(R)| of the computed representation at
    fresh (non-collocation) wall points, values and x-derivatives.

    extra_field(points, normals) -> (vals, ders) adds the particle
    contribution when checking a coupled solution.
    """
    from .quadrature import gauss_legendre

    config = solution.system.config
    alpha = config.bloch_phase
    d = config.period
    # keep probes clear of the wall-interface junctions so plain smooth
    # quadrature (with upsampling) is reliable
    inset = 6.0 * d / config.interface_nodes
    worst = 0.0
    for wname in ("1", "2", "3"):
        wall = solution.system.curves["L" + wname]
        ylo, yhi = float(np.min(wall.nodes[:, 1])), float(np.max(wall.nodes[:, 1]))
        ys, _ = gauss_legendre(n_fresh, ylo + inset, yhi - inset)
        left = np.stack([np.full(n_fresh, -0.5 * d), ys], axis=-1)
        nx = np.tile([1.0, 0.0], (n_fresh, 1))
        both = np.vstack([left, left + [d, 0.0]])
        nrm = np.vstack([nx, nx])
        # matched-resolution evaluation: its quadrature artifacts are the
        # ones the solved expansion coefficients compensate, so the
        # discrepancy of the discrete representation telescopes cleanly
        vals = eval_empty_field(solution, both, total=False)
        vals_n = _x_derivative_of_representation(solution, both, nrm)
        if extra_field is not None:
            ev, ed = extra_field(both, nrm)
            vals = vals + ev
            vals_n = vals_n + ed
        for arr in (vals, vals_n):
            disc = alpha * arr[:n_fresh] - arr[n_fresh:]
            worst = max(worst, float(np.max(np.abs(disc))))
    return worst


def _x_derivative_of_representation(solution: EmptySolution, points, normals,
                                    upsample: int = 1):
    config = solution.system.config
    curves = solution.system.curves
    centers = solution.system.centers
    alpha = config.bloch_phase
    copies = config.near_field_copies
    jn = config.j_orders
    points = np.atleast_2d(points)
    layer = classify_layer(config, points)
    out = np.zeros(points.shape[0], dtype=complex)
    layer_data = {
        1: ((curves["g1"], "mu1", "sigma1", config.k1),),
        2: ((curves["g1"], "mu1", "sigma1", config.k2),
            (curves["g2"], "mu2", "sigma2", config.k2)),
        3: ((curves["g2"], "mu2", "sigma2", config.k3),),
    }
    aexp = {1: ("a1", config.k1, centers[1]), 2: ("a2", config.k2, centers[2]),
            3: ("a3", config.k3, centers[3])}
    for lay in (1, 2, 3):
        sel = layer == lay
        if not np.any(sel):
            continue
        pts, nrm = points[sel], np.atleast_2d(normals)[sel]
        acc = np.zeros(pts.shape[0], dtype=complex)
        for curve, mu_name, sg_name, k in layer_data[lay]:
            _, der = phased_layer_field(curve, solution.part(mu_name),
                                        solution.part(sg_name), k, alpha, copies,
                                        pts, normals=nrm, upsample=upsample)
            acc += der
        name, k, center = aexp[lay]
        _, grads = specialfn.regular_wave_block(k, center, jn, pts)
        acc += np.einsum("ijk,ik->ij", grads, nrm) @ solution.part(name)
        out[sel] = acc
    return out
