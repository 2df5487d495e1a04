"""Independent reference computations for the test suite.

Nothing here calls the package's quadrature, convolution or harmonic code;
each oracle uses a different discretization or a closed form.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate, special

TWO_PI = 2.0 * math.pi


def gl(n, a, b):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * (x + 1.0) + a, 0.5 * (b - a) * w


def sphere_integral(func, n_theta=64, n_phi=128):
    """``∫ func dσ`` with Gauss-Legendre in the polar angle ``θ`` and a uniform azimuth."""
    th, wt = gl(n_theta, 0.0, math.pi)
    ph = TWO_PI * np.arange(n_phi) / n_phi
    T, P = np.meshgrid(th, ph, indexing="ij")
    pts = np.stack([np.sin(T) * np.cos(P), np.sin(T) * np.sin(P), np.cos(T)], axis=-1)
    vals = np.asarray(func(pts.reshape(-1, 3))).reshape(T.shape)
    return float(np.sum(vals * (wt * np.sin(th))[:, None]) * TWO_PI / n_phi)


def _frame(w):
    """Orthonormal frame perpendicular to each row of ``w`` via QR (unrelated to the package's)."""
    out1, out2 = np.empty_like(w), np.empty_like(w)
    for i, v in enumerate(w):
        q, _ = np.linalg.qr(np.column_stack([v, [0.3, -0.7, 0.2], [0.5, 0.1, 0.9]]))
        out1[i], out2[i] = q[:, 1], q[:, 2]
    return out1, out2


def conv_density(f, g, x, m=2048):
    """``(fσ*gσ)(x)`` by a dense trapezoid rule on the intersection circle."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    t = np.linalg.norm(x, axis=1)
    w = x / t[:, None]
    e1, e2 = _frame(w)
    ph = TWO_PI * (np.arange(m) + 0.37) / m
    rad = np.sqrt(np.maximum(1.0 - t * t / 4.0, 0.0))
    y = (0.5 * t)[:, None, None] * w[:, None, :] + rad[:, None, None] * (
        np.cos(ph)[None, :, None] * e1[:, None, :] + np.sin(ph)[None, :, None] * e2[:, None, :])
    fv = f(y.reshape(-1, 3)).reshape(-1, m)
    gv = g((x[:, None, :] - y).reshape(-1, 3)).reshape(-1, m)
    out = (TWO_PI / m) * np.sum(fv * gv, axis=1) / t
    return np.where(t < 2.0, out, 0.0)


def zonal_conv_norm_sq(f, g, n_t=160, n_theta=160, m=1024, t_range=(0.0, 2.0),
                       theta_range=(0.0, math.pi)):
    """``‖fσ*gσ‖₂²`` for functions invariant under rotation about the z axis.

    The density depends only on ``(|x|, polar angle)``; both are integrated
    with Gauss-Legendre nodes over the given ranges (which must contain the
    support) and the circle by a dense trapezoid rule.
    """
    ts, wt = gl(n_t, *t_range)
    th, wth = gl(n_theta, *theta_range)
    total = 0.0
    for t, w in zip(ts, wt):
        x = t * np.stack([np.sin(th), np.zeros_like(th), np.cos(th)], axis=1)
        d = conv_density(f, g, x, m)
        total += w * t * t * TWO_PI * float(np.sum(wth * np.sin(th) * d * d))
    return total


def cap_area(r):
    if r == 1.0:
        return TWO_PI
    return -TWO_PI * math.expm1(0.5 * math.log1p(-r * r))


def cap_indicator(center, r):
    center = np.asarray(center, dtype=float) / np.linalg.norm(center)
    h = math.sqrt(1.0 - r * r)
    return lambda p: (p @ center > h).astype(float)


def real_ylm(l, m, p):
    """Orthonormal real spherical harmonic from scipy's complex ``sph_harm`` (phase removed)."""
    p = np.atleast_2d(p)
    theta = np.arccos(np.clip(p[:, 2], -1.0, 1.0))
    phi = np.arctan2(p[:, 1], p[:, 0])
    try:
        Y = special.sph_harm_y(l, abs(m), theta, phi)
    except AttributeError:  # scipy < 1.15
        Y = special.sph_harm(abs(m), l, phi, theta)
    cs = (-1.0) ** abs(m)  # undo the Condon-Shortley phase
    if m == 0:
        return Y.real
    if m > 0:
        return cs * math.sqrt(2.0) * Y.real
    return cs * math.sqrt(2.0) * Y.imag


def legendre(k, t):
    return special.eval_legendre(k, t)


def funk_hecke(K, k):
    """``2π ∫ K(t) P_k(t) dt`` by adaptive quadrature with a singularity hint."""
    val, _ = integrate.quad(lambda t: K(t) * special.eval_legendre(k, t), -1.0, 1.0,
                            limit=500, epsabs=1e-13, epsrel=1e-12)
    return TWO_PI * val


def w0(t, xr):
    z = 1.0 + 1j * t
    return TWO_PI / z * np.exp(-np.asarray(xr) ** 2 / (2.0 * z))


def w_eps_quad(eps, t, xr):
    """``w_ε`` by adaptive quadrature of real and imaginary parts (slow, small ``|t|`` only)."""
    def f(rho, part):
        v = special.j0(xr * rho) * np.exp(-(1 + 1j * t) * (rho**2 / 2 + eps * rho**4 / 8)) \
            * (1 + eps * rho**2 / 2) * rho
        return v.real if part == 0 else v.imag

    re, _ = integrate.quad(f, 0, 14, args=(0,), limit=400, epsabs=1e-13)
    im, _ = integrate.quad(f, 0, 14, args=(1,), limit=400, epsabs=1e-13)
    return TWO_PI * (re + 1j * im)


def disk_low_freq_mass(A):
    """``∫_{|ξ|≤A} |χ̂_disk|²`` with ``χ̂(ξ) = 2π J₁(|ξ|)/|ξ|``."""
    val, _ = integrate.quad(lambda s: (TWO_PI * special.j1(s) / s) ** 2 * TWO_PI * s
                            if s > 0 else 0.0, 0.0, A, epsabs=1e-13, epsrel=1e-12)
    return val


def brute_force_threshold(values, weights):
    """Smallest sample value ``R`` with ``Σ_{v ≤ R} w v ≥ ½ Σ w v`` by scanning every candidate."""
    total = float(np.sum(weights * values))
    for R in np.sort(np.unique(values)):
        if float(np.sum(weights * values * (values <= R))) >= 0.5 * total * (1 - 1e-15):
            return float(R)
    raise AssertionError("no threshold found")
