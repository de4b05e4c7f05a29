"""Cylindrical special functions and cylindrical-wave evaluation.

Conventions used throughout the package:

    regular wave   J_n(k r) e^{i n theta}
    outgoing wave  H^(1)_n(k r) e^{i n theta}

with (r, theta) polar coordinates of the target about a given center.
Scalar entry points validate a declared supported range (|n| <= 200,
x <= 1e4); the vectorized block evaluators used in matrix assembly skip
those checks for speed.
"""

from __future__ import annotations

import numpy as np
import scipy.special as sps

MAX_ORDER = 200
MAX_ARGUMENT = 1.0e4


def _check_order(n: int) -> None:
    if abs(int(n)) > MAX_ORDER:
        raise ValueError(f"order {n} outside supported range |n| <= {MAX_ORDER}")


def bessel_j(n: int, x: float) -> float:
    """Bessel function of the first kind J_n(x) for integer order."""
    _check_order(n)
    if x < 0 or x > MAX_ARGUMENT:
        raise ValueError(f"argument {x} outside supported range [0, {MAX_ARGUMENT}]")
    return float(sps.jv(int(n), x))


def bessel_y(n: int, x: float) -> float:
    """Bessel function of the second kind Y_n(x); x must be positive."""
    _check_order(n)
    if x <= 0 or x > MAX_ARGUMENT:
        raise ValueError(f"argument {x} outside supported range (0, {MAX_ARGUMENT}]")
    return float(sps.yv(int(n), x))


def hankel1(n: int, x: float) -> complex:
    """Outgoing Hankel function H^(1)_n(x) = J_n(x) + i Y_n(x)."""
    _check_order(n)
    if x <= 0:
        raise ValueError("hankel1 requires x > 0 (singular at the origin)")
    if x > MAX_ARGUMENT:
        raise ValueError(f"argument {x} outside supported range (0, {MAX_ARGUMENT}]")
    return complex(sps.hankel1(int(n), x))


def hankel1_orders(nmax: int, z: np.ndarray) -> np.ndarray:
    """H^(1)_n(z) for n = 0..nmax, stacked on a new leading axis.

    Upward recurrence from the order-0 and order-1 values; stable because
    the Y_n part dominates and grows with n.
    """
    z = np.asarray(z, dtype=float)
    out = np.empty((nmax + 1,) + z.shape, dtype=complex)
    out[0] = sps.hankel1(0, z)
    if nmax >= 1:
        out[1] = sps.hankel1(1, z)
    for n in range(1, nmax):
        out[n + 1] = (2.0 * n / z) * out[n] - out[n - 1]
    return out


def bessel_j_orders(nmax: int, z: np.ndarray) -> np.ndarray:
    """J_n(z) for n = 0..nmax on a new leading axis (scipyamos per order)."""
    z = np.asarray(z, dtype=float)
    out = np.empty((nmax + 1,) + z.shape, dtype=float)
    for n in range(nmax + 1):
        out[n] = sps.jv(n, z)
    return out


def _signed_order(table: np.ndarray, n: int) -> np.ndarray:
    """Pick order n from a 0..nmax table using C_{-n} = (-1)^n C_n."""
    if n >= 0:
        return table[n]
    return table[-n] if (-n) % 2 == 0 else -table[-n]


def regular_wave_block(k: float, center, orders, targets) -> tuple[np.ndarray, np.ndarray]:
    """Values and Cartesian gradients of J_n(k r) e^{i n theta} about `center`.

    Returns (values, grads) with shapes (nt, n_orders) and (nt, n_orders, 2).
    Targets coinciding with the center are handled by the series limit.
    """
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    orders = np.asarray(orders, dtype=int)
    dx = targets[:, 0] - center[0]
    dy = targets[:, 1] - center[1]
    r = np.hypot(dx, dy)
    at_center = r == 0
    rs = np.where(at_center, 1.0, r)
    theta = np.arctan2(dy, dx)
    nmax = int(np.max(np.abs(orders))) if orders.size else 0
    jt = bessel_j_orders(nmax + 1, k * rs)

    nt = targets.shape[0]
    vals = np.empty((nt, orders.size), dtype=complex)
    grads = np.empty((nt, orders.size, 2), dtype=complex)
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    for j, n in enumerate(orders):
        jn = _signed_order(jt, n)
        jn_p1 = _signed_order(jt, n + 1)
        phase = np.exp(1j * n * theta)
        vals[:, j] = jn * phase
        # dJ_n(kr)/dr = k (J_{n-1} - J_{n+1})/2 = k (n/(kr) J_n - J_{n+1})
        dr = k * (n * jn / (k * rs) - jn_p1) * phase
        dth = 1j * n * jn * phase / rs
        grads[:, j, 0] = dr * cos_t - dth * sin_t
        grads[:, j, 1] = dr * sin_t + dth * cos_t
        if np.any(at_center):
            vals[at_center, j] = 1.0 if n == 0 else 0.0
            if n == 1:
                grads[at_center, j, :] = 0.5 * k * np.array([1.0, 1j])
            elif n == -1:
                grads[at_center, j, :] = -0.5 * k * np.array([1.0, -1j])
            else:
                grads[at_center, j, :] = 0.0
    return vals, grads


def outgoing_wave_block(k: float, center, orders, targets) -> tuple[np.ndarray, np.ndarray]:
    """Values and gradients of H^(1)_n(k r) e^{i n theta} about `center`."""
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    orders = np.asarray(orders, dtype=int)
    dx = targets[:, 0] - center[0]
    dy = targets[:, 1] - center[1]
    r = np.hypot(dx, dy)
    if np.any(r == 0):
        raise ValueError("outgoing wave is singular at its center")
    theta = np.arctan2(dy, dx)
    nmax = int(np.max(np.abs(orders))) if orders.size else 0
    ht = hankel1_orders(nmax + 1, k * r)

    nt = targets.shape[0]
    vals = np.empty((nt, orders.size), dtype=complex)
    grads = np.empty((nt, orders.size, 2), dtype=complex)
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    for j, n in enumerate(orders):
        hn = _signed_order(ht, n)
        hn_p1 = _signed_order(ht, n + 1)
        phase = np.exp(1j * n * theta)
        vals[:, j] = hn * phase
        dr = k * (n * hn / (k * r) - hn_p1) * phase
        dth = 1j * n * hn * phase / r
        grads[:, j, 0] = dr * cos_t - dth * sin_t
        grads[:, j, 1] = dr * sin_t + dth * cos_t
    return vals, grads


def eval_regular_wave(n: int, k: float, center, target) -> tuple[complex, np.ndarray]:
    """Value and gradient of the regular wave J_n(k r) e^{i n theta}."""
    _check_order(n)
    vals, grads = regular_wave_block(k, center, [int(n)], [target])
    return complex(vals[0, 0]), grads[0, 0]


def eval_outgoing_wave(n: int, k: float, center, target) -> tuple[complex, np.ndarray]:
    """Value and gradient of the outgoing wave H^(1)_n(k r) e^{i n theta}."""
    _check_order(n)
    vals, grads = outgoing_wave_block(k, center, [int(n)], [target])
    return complex(vals[0, 0]), grads[0, 0]
