"""Paraboloid comparison: ``μ*μ``, Gaussian extremals and cap-concentration trials.

The paraboloid is ``{(y, |y|²/2)}`` with measure ``μ = dy₁dy₂``. Then
``μ*μ = π χ_Ω`` on ``Ω = {z₃ > |z'|²/4}``, and for ``z ∈ Ω`` with
``R_c = √(z₃ - |z'|²/4)``

    (Fμ * Gμ)(z) = ½ ∫₀^{2π} F(z'/2 + R_c e^{iφ}) G(z'/2 - R_c e^{iφ}) dφ.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate

from .errors import DegenerateInputError, ParameterError
from .plane import PlaneFunction
from .sphere import Pointwise

TWO_PI = 2.0 * math.pi
#: Limit of ``Φ`` along cap-concentrating trial functions: (3/2)·π.
CAP_LIMIT = 1.5 * math.pi


@dataclass(frozen=True)
class ParabolaPoint:
    """Point ``(y, |y|²/2)`` of the paraboloid."""

    y: tuple

    @property
    def height(self) -> float:
        return 0.5 * (self.y[0] ** 2 + self.y[1] ** 2)

    def as_array(self) -> np.ndarray:
        return np.array([self.y[0], self.y[1], self.height])


def parab_conv(F: PlaneFunction, G: PlaneFunction, z, m: int = 64) -> np.ndarray:
    """``(Fμ*Gμ)(z)`` for points ``z`` of shape ``(N, 3)``."""
    if m < 16:
        raise ParameterError("need at least 16 circle nodes")
    z = np.asarray(z, dtype=float).reshape(-1, 3)
    zp = z[:, :2]
    s = z[:, 2] - 0.25 * np.sum(zp * zp, axis=1)
    out = np.zeros(z.shape[0])
    ok = s > 0
    if not np.any(ok):
        return out
    rc = np.sqrt(s[ok])
    ph = TWO_PI * np.arange(m) / m
    e = np.stack([np.cos(ph), np.sin(ph)], axis=1)
    c = 0.5 * zp[ok][:, None, :]
    y1 = c + rc[:, None, None] * e[None, :, :]
    y2 = c - rc[:, None, None] * e[None, :, :]
    out[ok] = 0.5 * (TWO_PI / m) * np.sum(F(y1) * G(y2), axis=1)
    return out


def parab_conv_at(F: PlaneFunction, G: PlaneFunction, z, m: int = 64) -> float:
    """``(Fμ*Gμ)(z)`` at a single point; zero outside ``Ω``."""
    return float(parab_conv(F, G, np.asarray(z, dtype=float).reshape(1, 3), m)[0])


def parab_functional(F: PlaneFunction, rho_max: float = 7.5, s_max: float = 12.0,
                     n_rho: int = 64, n_s: int = 48, n_beta: int = 16, m: int = 64) -> float:
    """``‖Fμ*Fμ‖₂² / ‖F‖₂⁴``.

    ``Ω`` is parameterized by ``z' = ρ(cos β, sin β)`` and
    ``s = z₃ - ρ²/4 ∈ (0, s_max)``, so ``dz = ρ dρ dβ ds``.
    """
    n2 = F.l2_norm_sq()
    if not n2 > 0.0:
        raise DegenerateInputError("the zero function has no paraboloid functional")
    xr, wr = np.polynomial.legendre.leggauss(n_rho)
    rho = 0.5 * rho_max * (xr + 1.0)
    wr = 0.5 * rho_max * wr * rho
    xs, ws = np.polynomial.legendre.leggauss(n_s)
    s = 0.5 * s_max * (xs + 1.0)
    ws = 0.5 * s_max * ws
    beta = TWO_PI * np.arange(n_beta) / n_beta
    R, S, B = np.meshgrid(rho, s, beta, indexing="ij")
    z = np.stack([R * np.cos(B), R * np.sin(B), S + 0.25 * R * R], axis=-1).reshape(-1, 3)
    D = parab_conv(F, F, z, m).reshape(R.shape)
    total = np.einsum("i,j,ijk->", wr, ws, D * D) * TWO_PI / n_beta
    return float(total) / (n2 * n2)


# ---------------------------------------------------------------- cap trials

def _gaussian_cap_norm_sq(r: float) -> float:
    """``∫ e^{-|x'|²/r²} dσ`` over the north cap ``|x'| < √r``."""
    val, _ = integrate.quad(
        lambda s: math.exp(-s * s / (r * r)) * TWO_PI * s / math.sqrt(1.0 - s * s),
        0.0, math.sqrt(r), epsabs=0.0, epsrel=1e-13, limit=200,
    )
    return val


def cap_trial(r: float, profile: str = "gaussian") -> Pointwise:
    """Even, nonnegative, unit-norm trial function concentrating on two antipodal caps.

    Its pullback under the rescaling map of ``C(north, r)`` is proportional
    to ``e^{-|y|²/2}`` on ``|y| < r^{-1/2}``; the antipodal copy makes it even.
    """
    if profile != "gaussian":
        raise ParameterError(f"unknown trial profile {profile!r}")
    if not (0.0 < r <= 0.5):
        raise ParameterError(f"cap trials need r in (0, 1/2], got {r}")
    scale = 1.0 / math.sqrt(2.0 * _gaussian_cap_norm_sq(r))
    cut = r  # |x'|² < (r · r^{-1/2})² = r

    def func(p):
        s2 = p[:, 0] ** 2 + p[:, 1] ** 2
        return np.where(s2 < cut, scale * np.exp(-0.5 * s2 / (r * r)), 0.0)

    return Pointwise(func, norm_sq=1.0)
