"""Convolutions of measures ``fσ`` on the sphere and zonal kernel operators.

For ``|x| = t ∈ (0, 2)`` the pairs ``(y, x - y)`` of sphere points lie on
the circle ``y·x̂ = t/2`` of axis radius ``√(1 - t²/4)``, and

    (fσ * gσ)(x) = t⁻¹ ∮ f(y(φ)) g(x - y(φ)) dφ.

Radial integrals use ``t = 2 sin α`` with Gauss-Legendre nodes in
``α ∈ (0, π/2)``; the circle uses ``m`` equispaced nodes (``m`` even, so the
partner ``x - y_j`` is the node ``y_{j + m/2}``).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate

from .errors import IntegrabilityError, ParameterError, SingularPointError
from .sphere import (
    Cap,
    GridSamples,
    Harmonic,
    QuadratureRule,
    SphereFunction,
    degree_of_index,
    default_rule,
    legendre_p,
    make_quadrature,
    n_coeffs,
    orthonormal_frame,
    sh_basis,
    unit_vector,
)

TWO_PI = 2.0 * math.pi
_BASIS_CACHE_LIMIT = 2.5e7


# ---------------------------------------------------------------- ball grid

@dataclass(frozen=True, eq=False)
class BallGrid:
    """Quadrature on the ball ``|x| < 2``: radial nodes × angular rule × circles."""

    alpha: np.ndarray
    alpha_weights: np.ndarray
    rule: QuadratureRule
    n_circle: int
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @classmethod
    def make(cls, n_radial: int = 64, n_theta: int = 48, n_phi: int = 97, n_circle: int = 96):
        if n_radial < 1 or n_circle < 2 or n_circle % 2:
            raise ParameterError("need n_radial >= 1 and an even n_circle >= 2")
        x, w = np.polynomial.legendre.leggauss(int(n_radial))
        alpha = 0.25 * math.pi * (x + 1.0)
        return cls(alpha, 0.25 * math.pi * w, make_quadrature(n_theta, n_phi), int(n_circle))

    @classmethod
    def for_degrees(cls, pair_degree: int, total_degree: int) -> "BallGrid":
        """Grid exact for products of two densities.

        ``pair_degree`` bounds ``deg f + deg g`` inside one density and
        ``total_degree`` the sum of all four degrees in an inner product.
        """
        n_circle = pair_degree + 2 - pair_degree % 2
        n_radial = int(math.ceil(0.4 * (total_degree + 1))) + 12
        return cls.make(n_radial, max(2, total_degree // 2 + 1), max(4, total_degree + 1), n_circle)

    @classmethod
    def for_band_limit(cls, L: int) -> "BallGrid":
        """Grid exact for ``⟨f₁σ*f₂σ, f₃σ*f₄σ⟩`` with all degrees ≤ ``L``."""
        return cls.for_degrees(2 * L, 4 * L)

    @property
    def t(self) -> np.ndarray:
        return 2.0 * np.sin(self.alpha)

    @property
    def t_weights(self) -> np.ndarray:
        """Weights for ``∫₀² h(t) dt``."""
        return 2.0 * np.cos(self.alpha) * self.alpha_weights

    @property
    def volume_weights(self) -> np.ndarray:
        """``w_i t_i² w_j`` for ``∫_{|x|<2} h dx``, shape ``(n_radial, n_nodes)``."""
        return np.outer(self.t_weights * self.t**2, self.rule.weights)

    @property
    def n_points(self) -> int:
        return self.alpha.size * self.rule.size * self.n_circle

    def circle_points(self, i: int) -> np.ndarray:
        """Circle nodes for every angular node at radial node ``i``, ``(n_nodes, m, 3)``."""
        key = ("frame",)
        if key not in self._cache:
            e1, e2 = orthonormal_frame(self.rule.nodes)
            ph = TWO_PI * np.arange(self.n_circle) / self.n_circle
            ring = (np.cos(ph)[None, :, None] * e1[:, None, :]
                    + np.sin(ph)[None, :, None] * e2[:, None, :])
            self._cache[key] = ring
        a = self.alpha[i]
        return math.sin(a) * self.rule.nodes[:, None, :] + math.cos(a) * self._cache[key]

    def harmonic_basis(self, L: int) -> Optional[np.ndarray]:
        """Cached basis of degree ``L`` at all circle points, if small enough."""
        nb = n_coeffs(L)
        if self.n_points * nb > _BASIS_CACHE_LIMIT:
            return None
        key = ("basis", L)
        if key not in self._cache:
            hit = [k for k in self._cache if k[0] == "basis" and k[1] >= L]
            if hit:
                return self._cache[min(hit, key=lambda k: k[1])][:, :nb]
            pts = np.concatenate([self.circle_points(i).reshape(-1, 3)
                                  for i in range(self.alpha.size)])
            self._cache[key] = sh_basis(L, pts)
        return self._cache[key]


_DEFAULT_BALL: list = []


def default_ball_grid() -> BallGrid:
    if not _DEFAULT_BALL:
        _DEFAULT_BALL.append(BallGrid.make())
    return _DEFAULT_BALL[0]


def _auto_grid(pairs: Sequence[tuple]) -> BallGrid:
    funcs = [f for pair in pairs for f in pair]
    if all(isinstance(f, Harmonic) for f in funcs):
        degs = [sum(f.L for f in pair) for pair in pairs]
        total = 2 * degs[0] if len(pairs) == 1 else sum(degs)
        return _cached_grid(max(max(degs), 1), max(total, 2))
    return default_ball_grid()


_GRID_CACHE: dict = {}


def _cached_grid(pair: int, total: int) -> BallGrid:
    key = (pair, total)
    if key not in _GRID_CACHE:
        if len(_GRID_CACHE) > 16:
            _GRID_CACHE.clear()
        _GRID_CACHE[key] = BallGrid.for_degrees(pair, total)
    return _GRID_CACHE[key]


def _densities(grid: BallGrid, pairs: Sequence[tuple]) -> list:
    """Densities ``(fσ*gσ)(t_i ω_j)`` for every pair, each ``(n_radial, n_nodes)``."""
    funcs: list = []
    for pair in pairs:
        for f in pair:
            if not any(f is g for g in funcs):
                funcs.append(f)
    slot = [[next(k for k, g in enumerate(funcs) if g is f) for f in pair] for pair in pairs]
    nr, nn, m = grid.alpha.size, grid.rule.size, grid.n_circle
    half = m // 2
    out = [np.empty((nr, nn)) for _ in pairs]
    bases = {}
    for k, f in enumerate(funcs):
        if isinstance(f, Harmonic):
            B = grid.harmonic_basis(f.L)
            if B is not None:
                bases[k] = (B @ f.coeffs).reshape(nr, nn, m)
    scale = (TWO_PI / m) / grid.t
    for i in range(nr):
        pts = None
        vals = {}
        for k, f in enumerate(funcs):
            if k in bases:
                vals[k] = bases[k][i]
            else:
                if pts is None:
                    pts = grid.circle_points(i).reshape(-1, 3)
                vals[k] = f.evaluate(pts).reshape(nn, m)
        for p, (a, b) in enumerate(slot):
            vb = np.roll(vals[b], -half, axis=1)
            out[p][i] = scale[i] * np.einsum("ij,ij->i", vals[a], vb)
    return out


# ---------------------------------------------------------------- densities

def conv_density(f: SphereFunction, g: SphereFunction, x, m: int = 96) -> np.ndarray:
    """``(fσ*gσ)(x)`` for an array of points ``x`` of shape ``(N, 3)``."""
    if m < 2 or m % 2:
        raise ParameterError("circle node count must be even and >= 2")
    x = np.asarray(x, dtype=float).reshape(-1, 3)
    t = np.linalg.norm(x, axis=1)
    if np.any(t == 0):
        raise SingularPointError("the convolution density is singular at x = 0")
    out = np.zeros(x.shape[0])
    ok = t < 2.0
    if not np.any(ok):
        return out
    xs, ts = x[ok], t[ok]
    w = xs / ts[:, None]
    e1, e2 = orthonormal_frame(w)
    ph = TWO_PI * np.arange(m) / m
    rad = np.sqrt(1.0 - ts * ts / 4.0)
    y = (0.5 * ts)[:, None, None] * w[:, None, :] + rad[:, None, None] * (
        np.cos(ph)[None, :, None] * e1[:, None, :] + np.sin(ph)[None, :, None] * e2[:, None, :]
    )
    fv = f.evaluate(y.reshape(-1, 3)).reshape(-1, m)
    gv = g.evaluate((xs[:, None, :] - y).reshape(-1, 3)).reshape(-1, m)
    out[ok] = (TWO_PI / m) * np.sum(fv * gv, axis=1) / ts
    return out


def conv_density_at(f: SphereFunction, g: SphereFunction, x, m: int = 96) -> float:
    """``(fσ*gσ)(x)`` at a single point; zero for ``|x| ≥ 2``."""
    return float(conv_density(f, g, np.asarray(x, dtype=float).reshape(1, 3), m)[0])


def conv_l2_norm(f: SphereFunction, g: SphereFunction, grid: Optional[BallGrid] = None) -> float:
    """``‖fσ*gσ‖_{L²(ℝ³)}``.

    Without ``grid``, band-limited inputs get a grid that is exact for
    their degrees and other inputs get the default grid.
    """
    grid = grid or _auto_grid([(f, g)])
    (D,) = _densities(grid, [(f, g)])
    return math.sqrt(max(float(np.sum(grid.volume_weights * D * D)), 0.0))


def conv_inner(f1, f2, f3, f4, grid: Optional[BallGrid] = None) -> float:
    """``⟨f₁σ*f₂σ, f₃σ*f₄σ⟩`` over the ball grid."""
    grid = grid or _auto_grid([(f1, f2), (f3, f4)])
    D12, D34 = _densities(grid, [(f1, f2), (f3, f4)])
    return float(np.sum(grid.volume_weights * D12 * D34))


# ---------------------------------------------------------------- triple convolution

class TripleConvOperator:
    """Galerkin form of ``T(f)(z) = ∫ (fσ*fσ)(z - y) f(y) dσ(y)`` for degree ``L``.

    ``T(f)`` of a degree-``L`` function has degree ≤ ``3L``; its coefficients
    are ``⟨T f, Y⟩ = ⟨fσ*fσ, Yσ*f̃σ⟩`` with ``f̃(x) = f(-x)``, evaluated on a
    grid that is exact for total degree ``6L``. With ``even=True`` only even
    degrees are represented.
    """

    def __init__(self, L: int, even: bool = False):
        if L < 0:
            raise ParameterError("band limit must be nonnegative")
        self.L = int(L)
        self.even = bool(even)
        self.grid = BallGrid.for_degrees(max(4 * L, 1), max(6 * L, 2))
        deg = degree_of_index(3 * self.L)
        self.cols = np.flatnonzero(deg % 2 == 0) if even else np.arange(deg.size)
        self.n_low = n_coeffs(self.L)
        self.low_cols = self.cols[self.cols < self.n_low]
        self._B = None
        nb = n_coeffs(3 * self.L)
        if self.grid.n_points * self.cols.size <= 3 * _BASIS_CACHE_LIMIT:
            pts = np.concatenate([self.grid.circle_points(i).reshape(-1, 3)
                                  for i in range(self.grid.alpha.size)])
            self._B = sh_basis(3 * self.L, pts)[:, self.cols] if nb else None
        self._W = self.grid.volume_weights

    def _basis(self, i: int) -> np.ndarray:
        if self._B is not None:
            nn, m = self.grid.rule.size, self.grid.n_circle
            return self._B[i * nn * m:(i + 1) * nn * m]
        pts = self.grid.circle_points(i).reshape(-1, 3)
        return sh_basis(3 * self.L, pts)[:, self.cols]

    def apply(self, c) -> tuple[float, np.ndarray]:
        """Return ``Ψ(f) = ‖fσ*fσ‖²`` and the degree-``3L`` coefficients of ``T(f)``."""
        c = np.asarray(c, dtype=float)
        full = np.zeros(n_coeffs(3 * self.L))
        full[:c.size] = c
        sign = np.where(degree_of_index(3 * self.L) % 2, -1.0, 1.0)
        cr = (full * sign)[self.cols]
        cf = full[self.cols]
        g = self.grid
        nn, m = g.rule.size, g.n_circle
        half = m // 2
        scale = (TWO_PI / m) / g.t
        psi = 0.0
        out = np.zeros(self.cols.size)
        nlow = np.searchsorted(self.cols, self.n_low)
        for i in range(g.alpha.size):
            B = self._basis(i)
            fv = (B[:, :nlow] @ cf[:nlow]).reshape(nn, m)
            fr = fv if self.even else (B[:, :nlow] @ cr[:nlow]).reshape(nn, m)
            D = scale[i] * np.einsum("ij,ij->i", fv, np.roll(fv, -half, axis=1))
            psi += float(np.dot(self._W[i], D * D))
            omega = (self._W[i] * D * scale[i])[:, None] * np.roll(fr, -half, axis=1)
            out += B.T @ omega.ravel()
        T = np.zeros(n_coeffs(3 * self.L))
        T[self.cols] = out
        return psi, T


_OPERATORS: dict = {}


def triple_conv_operator(L: int, even: bool = False) -> TripleConvOperator:
    key = (int(L), bool(even))
    if key not in _OPERATORS:
        if len(_OPERATORS) > 6:
            _OPERATORS.clear()
        _OPERATORS[key] = TripleConvOperator(L, even)
    return _OPERATORS[key]


def triple_conv_at(f: SphereFunction, z, n_alpha: int = 48, n_gamma: int = 64, m: int = 64) -> np.ndarray:
    """Direct quadrature of ``T(f)`` at the points ``z`` (shape ``(N, 3)``).

    Writing ``y`` at polar angle ``β = 2α`` from ``z``, the factor
    ``sin β / |z - y|`` equals ``cos α``, so the integrand is bounded.
    """
    z = unit_vector(np.asarray(z, dtype=float).reshape(-1, 3))
    xa, wa = np.polynomial.legendre.leggauss(n_alpha)
    alpha = 0.25 * math.pi * (xa + 1.0)
    wa = 0.25 * math.pi * wa
    gam = TWO_PI * np.arange(n_gamma) / n_gamma
    ph = TWO_PI * np.arange(m) / m
    half = m // 2
    out = np.empty(z.shape[0])
    e1z, e2z = orthonormal_frame(z)
    for s in range(z.shape[0]):
        zz, u, v = z[s], e1z[s], e2z[s]
        beta = 2.0 * alpha
        dirs = np.cos(gam)[:, None] * u + np.sin(gam)[:, None] * v
        y = (np.cos(beta)[:, None, None] * zz
             + np.sin(beta)[:, None, None] * dirs[None, :, :])
        xv = zz - y
        xh = xv / np.linalg.norm(xv, axis=-1, keepdims=True)
        f1, f2 = orthonormal_frame(xh.reshape(-1, 3))
        f1 = f1.reshape(xh.shape)
        f2 = f2.reshape(xh.shape)
        ca = np.cos(alpha)[:, None, None, None]
        circ = (0.5 * xv[:, :, None, :]
                + ca * (np.cos(ph)[None, None, :, None] * f1[:, :, None, :]
                        + np.sin(ph)[None, None, :, None] * f2[:, :, None, :]))
        fc = f.evaluate(circ.reshape(-1, 3)).reshape(circ.shape[:-1])
        dens = (TWO_PI / m) * np.sum(fc * np.roll(fc, -half, axis=2), axis=2)
        fy = f.evaluate(y.reshape(-1, 3)).reshape(y.shape[:-1])
        inner = (TWO_PI / n_gamma) * np.sum(fy * dens, axis=1)
        out[s] = np.sum(wa * 2.0 * np.cos(alpha) * inner)
    return out


def triple_conv_on_sphere(f: SphereFunction, rule: Optional[QuadratureRule] = None,
                          **quad) -> SphereFunction:
    """``T(f) = (fσ*fσ*fσ)|_{S²}``.

    Band-limited input returns exact degree-``3L`` coefficients; any other
    input returns samples from :func:`triple_conv_at` on ``rule``.
    """
    if isinstance(f, Harmonic):
        even = f.odd_norm() == 0.0
        _, T = triple_conv_operator(f.L, even).apply(f.coeffs)
        return Harmonic(T)
    rule = rule or make_quadrature(12, 24)
    return GridSamples(rule, triple_conv_at(f, rule.nodes, **quad))


# ---------------------------------------------------------------- circle averages

def t_rho(f: SphereFunction, rho: float, rule: Optional[QuadratureRule] = None,
          m: Optional[int] = None) -> GridSamples:
    """Average of ``f`` over the circle ``{y: |y - x| = ρ}`` at every node ``x``."""
    if not (0.0 < rho < 2.0):
        raise ParameterError(f"rho must lie in (0, 2), got {rho}")
    if rule is None:
        rule = default_rule()
    if m is None:
        m = max(64, (f.L + 2) if isinstance(f, Harmonic) else 0)
    x = rule.nodes
    c = 1.0 - 0.5 * rho * rho
    s = math.sqrt(max(1.0 - c * c, 0.0))
    e1, e2 = orthonormal_frame(x)
    ph = TWO_PI * np.arange(m) / m
    pts = (c * x[:, None, :] + s * (np.cos(ph)[None, :, None] * e1[:, None, :]
                                    + np.sin(ph)[None, :, None] * e2[:, None, :]))
    vals = f.evaluate(pts.reshape(-1, 3)).reshape(x.shape[0], m).mean(axis=1)
    return GridSamples(rule, vals)


# ---------------------------------------------------------------- Funk-Hecke

@dataclass(frozen=True)
class Kernel1D:
    """Zonal kernel ``K(x·y)``; ``singular_at`` is ``+1``, ``-1`` or ``None``.

    ``func_u`` optionally evaluates ``K`` directly in the endpoint variable
    ``u = √(2 ∓ 2t)``, which avoids the cancellation in ``2 ∓ 2t`` near the
    singular endpoint.
    """

    func: Callable[[np.ndarray], np.ndarray]
    singular_at: Optional[int] = None
    func_u: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if self.singular_at not in (None, 1, -1):
            raise ParameterError("singular_at must be +1, -1 or None")

    def __call__(self, t):
        return self.func(np.asarray(t, dtype=float))

    def t_of_u(self, u):
        """Endpoint substitution ``u = √(2 ∓ 2t)``; ``dt = ∓u du``."""
        return self.singular_at * (1.0 - 0.5 * u * u)

    def weighted_u(self, u: float) -> float:
        """``K(t(u)) u``, the integrand after the endpoint substitution."""
        if u <= 0.0:
            return 0.0
        k = self.func_u(u) if self.func_u is not None else self(self.t_of_u(u))
        v = float(k) * u
        return v if math.isfinite(v) else 0.0

    def check_integrable(self) -> float:
        """Return ``∫|K|`` or raise :class:`IntegrabilityError`.

        At a singular endpoint the tails ``∫_δ`` are compared for
        ``δ = 10⁻¹ … 10⁻⁴``; increments that fail to shrink mean divergence.
        """
        opts = dict(limit=400, epsabs=1e-14, epsrel=1e-12)
        if self.singular_at is None:
            x, _ = np.polynomial.legendre.leggauss(64)
            if not np.all(np.isfinite(self(x))):
                raise IntegrabilityError("kernel is not finite on [-1, 1]")
            val, _ = integrate.quad(lambda t: abs(float(self(t))), -1, 1, **opts)
            return val

        def tail(delta):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", integrate.IntegrationWarning)
                val, _ = integrate.quad(lambda u: abs(self.weighted_u(u)), delta, 2.0,
                                        points=[min(2 * delta, 1.0)], **opts)
            return val

        vals = [tail(10.0 ** (-j)) for j in range(1, 5)]
        if not np.all(np.isfinite(vals)):
            raise IntegrabilityError("kernel integral is not finite")
        d = np.diff(vals)
        if d[-1] > 1e-12 * (1.0 + vals[-1]) and d[-1] > 0.1 * d[0]:
            raise IntegrabilityError("kernel is not integrable at the singular endpoint")
        return vals[-1]


DISTANCE_KERNEL = Kernel1D(
    lambda t: 1.0 / np.sqrt(2.0 - 2.0 * t), 1, func_u=lambda u: 1.0 / u
)
ANTIPODAL_DISTANCE_KERNEL = Kernel1D(
    lambda t: 1.0 / np.sqrt(2.0 + 2.0 * t), -1, func_u=lambda u: 1.0 / u
)


def funk_hecke_multiplier(K: Kernel1D, k: int) -> float:
    """``λ_k = 2π ∫_{-1}^{1} K(t) P_k(t) dt``."""
    if k < 0:
        raise ParameterError("degree must be nonnegative")
    K.check_integrable()
    opts = dict(limit=400, epsabs=1e-14, epsrel=1e-13)
    if K.singular_at is None:
        val, _ = integrate.quad(lambda t: float(K(t)) * legendre_p(k, t), -1.0, 1.0, **opts)
    else:
        val, _ = integrate.quad(
            lambda u: K.weighted_u(u) * legendre_p(k, K.t_of_u(u)), 0.0, 2.0, **opts
        )
    return TWO_PI * val


def kernel_conv(f: SphereFunction, K: Kernel1D) -> Harmonic:
    """``x ↦ ∫ K(x·y) f(y) dσ(y)``, acting diagonally on harmonic coefficients."""
    if not isinstance(f, Harmonic):
        raise ParameterError("kernel_conv needs a band-limited (Harmonic) input")
    lam = np.array([funk_hecke_multiplier(K, l) for l in range(f.L + 1)])
    return Harmonic(f.coeffs * lam[degree_of_index(f.L)])


# ---------------------------------------------------------------- cap interactions

def _arc_overlap(c1, h1, c2, h2):
    d = np.mod(c2 - c1, TWO_PI)

    def line(dd):
        return np.maximum(0.0, np.minimum(h1, dd + h2) - np.maximum(-h1, dd - h2))

    return line(d) + line(d - TWO_PI)


def _arc(A, B, kappa):
    """Half-width of ``{φ: A + B cos φ > κ}`` (an arc centered at 0)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        c = (kappa - A) / B
    h = np.arccos(np.clip(c, -1.0, 1.0))
    h = np.where(B > 0, h, np.where(A > kappa, math.pi, 0.0))
    return h


def cap_pair_density(c1: Cap, c2: Cap, x) -> np.ndarray:
    """Exact ``(χ_{C₁}σ * χ_{C₂}σ)(x)`` from arc intersections."""
    x = np.asarray(x, dtype=float).reshape(-1, 3)
    t = np.linalg.norm(x, axis=1)
    out = np.zeros(x.shape[0])
    ok = (t > 0) & (t < 2.0)
    xs, ts = x[ok], t[ok]
    w = xs / ts[:, None]
    e1, e2 = orthonormal_frame(w)
    rad = np.sqrt(1.0 - ts * ts / 4.0)
    arcs = []
    for cap in (c1, c2):
        z = cap.center
        A = 0.5 * ts * (w @ z)
        b1, b2 = e1 @ z, e2 @ z
        B = rad * np.hypot(b1, b2)
        arcs.append((np.arctan2(b2, b1), _arc(A, B, cap.height)))
    (p1, h1), (p2, h2) = arcs
    # the partner of y(φ) is y(φ + π)
    out[ok] = _arc_overlap(p1, h1, p2 + math.pi, h2) / ts
    return out


def _cap_polar_nodes(cap: Cap, n_beta: int, n_gamma: int):
    bmax = math.asin(cap.radius) if cap.radius < 1.0 else 0.5 * math.pi
    xb, wb = np.polynomial.legendre.leggauss(n_beta)
    beta = 0.5 * bmax * (xb + 1.0)
    wb = 0.5 * bmax * wb * np.sin(beta)
    gam = TWO_PI * (np.arange(n_gamma) + 0.5) / n_gamma
    u, v = orthonormal_frame(cap.center[None, :])
    dirs = np.cos(gam)[:, None] * u + np.sin(gam)[:, None] * v
    pts = (np.cos(beta)[:, None, None] * cap.center
           + np.sin(beta)[:, None, None] * dirs[None, :, :]).reshape(-1, 3)
    wts = np.repeat(wb * TWO_PI / n_gamma, n_gamma)
    return pts, wts


def cap_interaction(c1: Cap, c2: Cap, n_beta: int = 24, n_gamma: int = 48,
                    normalized: bool = True) -> float:
    """``‖χ_{C₁}σ * χ_{C₂}σ‖₂``, optionally divided by ``√(|C₁||C₂|)``.

    Uses ``‖μ*ν‖² = ∬ (μ*ν)(a + b) dμ(a) dν(b)`` with the exact density.
    """
    pa, wa = _cap_polar_nodes(c1, n_beta, n_gamma)
    pb, wb = _cap_polar_nodes(c2, n_beta, n_gamma)
    total = 0.0
    for k in range(pa.shape[0]):
        dens = cap_pair_density(c1, c2, pa[k] + pb)
        total += wa[k] * float(np.dot(wb, dens))
    val = math.sqrt(max(total, 0.0))
    if normalized:
        val /= math.sqrt(c1.area * c2.area)
    return val
