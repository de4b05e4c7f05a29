"""Helmholtz layer potentials: free-space kernels, off-curve evaluation,
on-curve Nystrom matrices, and phased lattice sums.

Kernel values follow G_k(x, y) = (i/4) H_0^(1)(k |x - y|).  The four
boundary operators are

    S  value of the single layer          (weakly singular)
    D  value of the double layer          d/dn_y
    N  target-normal derivative of S      d/dn_x
    T  target-normal derivative of D      d^2/dn_x dn_y  (hypersingular)

A lone T is only available between disjoint curves; on its own curve it
must be requested as a two-wavenumber difference, whose kernel is weakly
singular and handled by the same log-class corrections.

Jump relations with respect to the stored curve normals (the + side):

    (S sigma)^+-   = S sigma
    (S sigma)_n^+- = (-+ 1/2 + N) sigma
    (D mu)^+-      = (+- 1/2 + D) mu
    (D mu)_n^+-    = T mu
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.special as sps

from .quadrature import DEFAULT_RULE, UnsupportedKernelError, nystrom_selfmatrix

OPERATORS = ("S", "D", "N", "T")


@dataclass
class Density:
    curve: object
    values: np.ndarray
    kind: str  # "single" | "double"

    def __post_init__(self):
        if len(self.values) != self.curve.n:
            raise ValueError("density length does not match the curve")
        if self.kind not in ("single", "double"):
            raise ValueError("kind must be 'single' or 'double'")


def greens_kernel(k: float, x, y, nx=None, ny=None):
    """G, dG/dn_y, dG/dn_x, d2G/dn_x dn_y at a single point pair."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.allclose(x, y):
        raise ValueError("Green's kernel is singular at coincident points")
    nx = np.array([1.0, 0.0]) if nx is None else np.asarray(nx, dtype=float)
    ny = np.array([1.0, 0.0]) if ny is None else np.asarray(ny, dtype=float)
    vals = _kernel_values(("S", "D", "N", "T"), k, x[None, :], nx[None, :],
                          y[None, :], ny[None, :])
    return tuple(complex(vals[op][0]) for op in ("S", "D", "N", "T"))


def _kernel_values(ops, k, tx, tn, sx, sn):
    """Elementwise kernel values for the requested operators; inputs
    broadcast over leading axes with a trailing length-2 axis."""
    return _kernel_values_diff(ops, k, tx[..., 0] - sx[..., 0],
                               tx[..., 1] - sx[..., 1], tn, sn)


def _kernel_values_diff(ops, k, u0, u1, tn, sn):
    """Kernel values from the precomputed target-minus-source vector; used
    with stably evaluated differences near the singular diagonal."""
    r = np.hypot(u0, u1)
    h0 = sps.hankel1(0, k * r)
    h1 = sps.hankel1(1, k * r)
    out = {}
    if "S" in ops:
        out["S"] = 0.25j * h0
    if "D" in ops or "T" in ops:
        udotny = (u0 * sn[..., 0] + u1 * sn[..., 1]) / r
    if "N" in ops or "T" in ops:
        udotnx = (u0 * tn[..., 0] + u1 * tn[..., 1]) / r
    if "D" in ops:
        out["D"] = 0.25j * k * h1 * udotny
    if "N" in ops:
        out["N"] = -0.25j * k * h1 * udotnx
    if "T" in ops:
        nxny = tn[..., 0] * sn[..., 0] + tn[..., 1] * sn[..., 1]
        h1p = h0 - h1 / (k * r)
        out["T"] = 0.25j * k * (k * h1p * udotnx * udotny
                                + h1 * (nxny - udotnx * udotny) / r)
    return out


_PSI_SUM = None


def _y1_series_coeffs(terms: int = 14) -> np.ndarray:
    global _PSI_SUM
    if _PSI_SUM is None:
        m = np.arange(terms)
        _PSI_SUM = (sps.digamma(m + 1) + sps.digamma(m + 2)) / (
            sps.factorial(m) * sps.factorial(m + 1))
    return _PSI_SUM


def _t_difference(ka, kb, u0, u1, tn, sn):
    """T^{ka} - T^{kb} with the wavenumber-independent 1/r^2 singularity
    removed analytically, so near-diagonal values carry no cancellation.

    Writing P = (u.n_x)(u.n_y)/r^2, a single T kernel is
        (i/4) [ k^2 H_0(kr) P + (k H_1(kr)/r) (n_x.n_y - 2P) ]
    and k Y_1(kr)/r = -2/(pi r^2) + smooth(k, r); the -2/(pi r^2) parts
    cancel in the difference and are never formed for small kr.
    """
    r = np.hypot(u0, u1)
    p = ((u0 * tn[..., 0] + u1 * tn[..., 1]) *
         (u0 * sn[..., 0] + u1 * sn[..., 1])) / r ** 2
    nxny = tn[..., 0] * sn[..., 0] + tn[..., 1] * sn[..., 1]
    h0_term = (ka ** 2 * sps.hankel1(0, ka * r) - kb ** 2 * sps.hankel1(0, kb * r))
    wj = (ka * sps.jv(1, ka * r) - kb * sps.jv(1, kb * r)) / r

    small = np.maximum(ka, kb) * r < 1.0
    wy = np.empty_like(r)
    if np.any(~small):
        rl = np.where(small, 1.0, r)
        wy_l = (ka * sps.yv(1, ka * rl) - kb * sps.yv(1, kb * rl)) / rl
        wy = np.where(small, 0.0, wy_l)
    if np.any(small):
        coeffs = _y1_series_coeffs()
        rs = np.where(small, r, 1.0)

        def smooth_part(k):
            z = k * rs
            series = np.zeros_like(rs)
            for m, c in enumerate(coeffs):
                series += c * (-0.25 * z * z) ** m
            return (2.0 / np.pi) * k ** 2 * np.log(0.5 * z) * (sps.jv(1, z) / z) \
                - k ** 2 / (2.0 * np.pi) * series

        wy = np.where(small, smooth_part(ka) - smooth_part(kb), wy)
    return 0.25j * (h0_term * p + (wj + 1j * wy) * (nxny - 2.0 * p))


class HelmholtzKernel:
    """Split-form kernel: full off-diagonal values plus singularity class."""

    def __init__(self, op: str, k: float, k_subtract: float | None = None):
        if op not in OPERATORS:
            raise ValueError(f"unknown operator {op!r}")
        self.op = op
        self.k = k
        self.k_subtract = k_subtract
        if op == "T" and k_subtract is None:
            self.singularity = "finite-part"
        else:
            self.singularity = "log"

    def values(self, tx, tn, sx, sn):
        return self.values_diff(tx - sx, tn, sn)

    def values_diff(self, u, tn, sn):
        if self.op == "T" and self.k_subtract is not None:
            return _t_difference(self.k, self.k_subtract, u[..., 0], u[..., 1], tn, sn)
        v = _kernel_values_diff((self.op,), self.k, u[..., 0], u[..., 1], tn, sn)[self.op]
        if self.k_subtract is not None:
            v = v - _kernel_values_diff((self.op,), self.k_subtract,
                                        u[..., 0], u[..., 1], tn, sn)[self.op]
        return v


def boundary_operator_matrices(source, target, k, which=OPERATORS,
                               phase: complex = 1.0, copies: int = 0,
                               k_subtract: float | None = None,
                               rule=DEFAULT_RULE) -> dict:
    """Nystrom matrices of the requested boundary operators.

    Returns sum_{l=-P}^{P} phase^l Op(target, source translated by l
    periods).  Identical source and target trigger the singular
    self-interaction path with near-diagonal corrections and the
    quasi-periodic wrap of the correction stencils; `k_subtract` then
    selects the two-wavenumber difference operator.
    """
    out = {}
    if source is target:
        for op in which:
            kern = HelmholtzKernel(op, k, k_subtract)
            if kern.singularity != "log":
                raise UnsupportedKernelError(
                    "hypersingular operator on its own curve is only supported "
                    "as a two-wavenumber difference")
            out[op] = nystrom_selfmatrix(kern, source, phase, copies, rule)
        return out

    aw = source.arc_weights
    tx = target.nodes[:, None, :]
    tn = target.normals[:, None, :]
    for op in which:
        mats = 0.0
        for l in range(-copies, copies + 1):
            shift = l * source.period_translation
            sx = (source.nodes + shift)[None, :, :]
            sn = source.normals[None, :, :]
            vals = _kernel_values((op,), k, tx, tn, sx, sn)[op]
            if k_subtract is not None:
                vals = vals - _kernel_values((op,), k_subtract, tx, tn, sx, sn)[op]
            mats = mats + (phase ** l) * vals
        out[op] = mats * aw[None, :]
    return out


def wall_discrepancy_blocks(source, wall, k, phase: complex, copies: int) -> dict:
    """Wall rows of the phased near-field sum for densities on `source`.

    The discrepancy alpha * u(L) - u(R) of the 2P+1 phased copies
    telescopes, leaving only the two extreme translates evaluated at the
    left-wall nodes:

        alpha^(P+1) Op(wall, source + P d) - alpha^(-P) Op(wall, source - (P+1) d)

    Returns value and x-derivative rows for the S and D operators.
    """
    alpha = complex(phase)
    aw = source.arc_weights
    tx = wall.nodes[:, None, :]
    tn = wall.normals[:, None, :]  # +x by construction
    out = {"S_val": 0.0, "S_der": 0.0, "D_val": 0.0, "D_der": 0.0}
    for l, coef in ((copies, alpha ** (copies + 1)), (-(copies + 1), alpha ** (-copies))):
        shift = l * source.period_translation
        sx = (source.nodes + shift)[None, :, :]
        sn = source.normals[None, :, :]
        vals = _kernel_values(OPERATORS, k, tx, tn, sx, sn)
        sign = 1.0 if l == copies else -1.0
        out["S_val"] += sign * coef * vals["S"]
        out["S_der"] += sign * coef * vals["N"]
        out["D_val"] += sign * coef * vals["D"]
        out["D_der"] += sign * coef * vals["T"]
    return {key: mat * aw[None, :] for key, mat in out.items()}


def eval_layer_potentials(density: Density, k: float, targets,
                          target_normals=None):
    """Off-curve potential values (and normal derivatives when target
    normals are supplied) by plain smooth quadrature.

    Callers keep targets at least ~5 node spacings away from the source
    curve; nearer evaluation is outside this routine's contract.
    """
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    tx = targets[:, None, :]
    sx = density.curve.nodes[None, :, :]
    sn = density.curve.normals[None, :, :]
    aw = density.curve.arc_weights * density.values
    ops = ["S" if density.kind == "single" else "D"]
    if target_normals is not None:
        tn = np.atleast_2d(np.asarray(target_normals, dtype=float))[:, None, :]
        ops.append("N" if density.kind == "single" else "T")
    else:
        tn = np.zeros_like(tx)
    vals = _kernel_values(tuple(ops), k, tx, tn, sx, sn)
    value = vals[ops[0]] @ aw
    if target_normals is None:
        return value
    return value, vals[ops[1]] @ aw


def trig_interp(values: np.ndarray, factor: int, src_offset: float = 0.0,
                dst_offset: float = 0.0) -> np.ndarray:
    """Trigonometric interpolation of periodic samples onto a refined grid.

    Input samples sit at (j + src_offset) / n of the period; the output's
    n * factor samples sit at (m + dst_offset) / (n * factor).  Offsets are
    in units of the respective grid spacings.
    """
    n = len(values)
    m = n * factor
    half = n // 2
    freq = np.fft.fftfreq(n, 1.0 / n)
    chat = np.fft.fft(values) * np.exp(-2j * np.pi * freq * src_offset / n) / n
    pad = np.zeros(m, dtype=complex)
    if n % 2 == 0:
        pad[:half] = chat[:half]
        pad[m - half + 1:] = chat[half + 1:]
        pad[half] = 0.5 * chat[half]
        pad[m - half] = 0.5 * chat[half]
    else:
        pad[:half + 1] = chat[:half + 1]
        pad[m - half:] = chat[half + 1:]
    freq_m = np.fft.fftfreq(m, 1.0 / m)
    pad *= np.exp(2j * np.pi * freq_m * dst_offset / m)
    return np.fft.ifft(pad) * m
