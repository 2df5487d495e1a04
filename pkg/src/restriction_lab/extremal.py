"""The quartic functional Φ, symmetrization, second variation and extremizer search.

``Φ(f) = ‖fσ*fσ‖₂² / ‖f‖₂⁴``; constants give ``Φ(1) = 32π³/(4π)² = 2π``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import optimize

from .convolution import (
    DISTANCE_KERNEL,
    BallGrid,
    conv_l2_norm,
    funk_hecke_multiplier,
    triple_conv_at,
    triple_conv_operator,
)
from .errors import (
    AdmissibilityError,
    DegenerateInputError,
    ParameterError,
    SearchDivergence,
    SignError,
)
from .sphere import (
    FOUR_PI,
    GridSamples,
    Harmonic,
    Pointwise,
    QuadratureRule,
    SphereFunction,
    default_rule,
    degree_of_index,
    make_quadrature,
    n_coeffs,
    quadrature_for_degree,
    sh_analyze,
    sh_basis,
)

HALF_PI = 0.5 * math.pi


# ---------------------------------------------------------------- Φ

def _norm_sq(f: SphereFunction) -> float:
    n2 = f.l2_norm_sq()
    if not n2 > 0.0:
        raise DegenerateInputError("the zero function has no Φ value")
    return n2


def psi_functional(f: SphereFunction, grid: Optional[BallGrid] = None) -> float:
    """``Ψ(f) = ‖fσ*fσ‖₂²``."""
    return conv_l2_norm(f, f, grid) ** 2


def phi_functional(f: SphereFunction, grid: Optional[BallGrid] = None) -> float:
    """``Φ(f) = ‖fσ*fσ‖₂² / ‖f‖₂⁴``."""
    n2 = _norm_sq(f)
    return psi_functional(f, grid) / (n2 * n2)


def zonal_ball_grid(n_radial: int = 256, n_theta: int = 256, n_circle: int = 256) -> BallGrid:
    """Ball grid for functions invariant under rotations about the vertical axis.

    The density of such functions is axially symmetric, so a single
    azimuth per ring integrates the angular variable exactly.
    """
    if n_circle % 2:
        raise ParameterError("n_circle must be even")
    u, wu = np.polynomial.legendre.leggauss(int(n_theta))
    nodes = np.stack([np.sqrt(1 - u * u), np.zeros_like(u), u], axis=1)
    rule = QuadratureRule(
        n_theta=int(n_theta), n_phi=1, cos_theta=u, phi=np.zeros(1),
        nodes=nodes, weights=2.0 * math.pi * wu, exactness_degree=0,
    )
    x, w = np.polynomial.legendre.leggauss(int(n_radial))
    return BallGrid(0.25 * math.pi * (x + 1.0), 0.25 * math.pi * w, rule, int(n_circle))


# ---------------------------------------------------------------- symmetrization

def antipodal_symmetrize(f: SphereFunction, rule: Optional[QuadratureRule] = None) -> SphereFunction:
    """``f⋆(x) = √((f(x)² + f(-x)²)/2)`` for nonnegative ``f``."""
    if isinstance(f, GridSamples) and f.rule.antipodal_index is not None:
        v = f.values
        if v.min() < -1e-12:
            raise SignError("antipodal symmetrization needs f >= 0")
        v = np.maximum(v, 0.0)
        return GridSamples(f.rule, np.sqrt(0.5 * (v * v + v[f.rule.antipodal_index] ** 2)))
    check = f.samples(rule or default_rule())
    if check.min() < -1e-12:
        raise SignError("antipodal symmetrization needs f >= 0")

    def func(p, f=f):
        a = np.maximum(f.evaluate(p), 0.0)
        b = np.maximum(f.evaluate(-p), 0.0)
        return np.sqrt(0.5 * (a * a + b * b))

    return Pointwise(func, norm_sq=f._known_norm_sq(), rule=rule)


@dataclass(frozen=True)
class SymmetrizationOrbit:
    """Angles ``(φ, ψ, α, β)`` in the box ``[0, π/2]⁴``."""

    phi: float
    psi: float
    alpha: float
    beta: float

    def __post_init__(self):
        for name in ("phi", "psi", "alpha", "beta"):
            v = getattr(self, name)
            if not (-1e-15 <= v <= HALF_PI + 1e-15):
                raise ParameterError(f"angle {name}={v} outside [0, π/2]")

    def as_array(self) -> np.ndarray:
        return np.array([self.phi, self.psi, self.alpha, self.beta])


def gamma_values(phi, psi, alpha, beta):
    """Vectorized ``Γ``."""
    return (np.cos(phi) * np.cos(psi) * np.cos(alpha) * np.cos(beta)
            + np.sin(phi) * np.sin(psi) * np.sin(alpha) * np.sin(beta)
            + np.sin(phi + psi) * np.sin(alpha + beta))


def gamma(o: SymmetrizationOrbit) -> float:
    return float(gamma_values(o.phi, o.psi, o.alpha, o.beta))


def gamma_max_search(grid_n: int = 64, fixed_phi: Optional[float] = None,
                     refine: bool = True) -> tuple[float, np.ndarray]:
    """Maximize ``Γ`` over the box by a dense scan plus local refinement.

    ``fixed_phi`` restricts the search to the face ``φ = fixed_phi``.
    """
    if grid_n < 8:
        raise ParameterError("grid_n must be at least 8")
    a = np.linspace(0.0, HALF_PI, grid_n)
    best, arg = -np.inf, None
    phis = a if fixed_phi is None else np.array([fixed_phi])
    P, A, B = np.meshgrid(a, a, a, indexing="ij")
    for ph in phis:
        v = gamma_values(ph, P, A, B)
        k = int(np.argmax(v))
        if v.flat[k] > best:
            best = float(v.flat[k])
            arg = np.array([ph, P.flat[k], A.flat[k], B.flat[k]])
    if refine:
        free = slice(0, 4) if fixed_phi is None else slice(1, 4)

        def neg(x):
            full = arg.copy()
            full[free] = x
            return -float(gamma_values(*full))

        res = optimize.minimize(neg, arg[free], method="L-BFGS-B",
                                bounds=[(0.0, HALF_PI)] * len(arg[free]),
                                options=dict(ftol=1e-15, gtol=1e-12))
        if -res.fun > best:
            best = -float(res.fun)
            arg = arg.copy()
            arg[free] = res.x
    return best, arg


# ---------------------------------------------------------------- second variation

def second_variation(g: SphereFunction, L: Optional[int] = None,
                     rule: Optional[QuadratureRule] = None) -> float:
    """Quadratic coefficient ``q(g)`` of ``Φ(1 + εg)·‖1‖₂⁴`` at ``ε = 0``.

    ``q = Σ_{even l ≥ 2} (12π λ_l - 16π²) ‖g_l‖²`` with ``λ_l`` the
    multipliers of the kernel ``(2 - 2t)^{-1/2}``. Requires ``g`` even and
    mean zero.
    """
    if not isinstance(g, Harmonic):
        if L is None:
            raise ParameterError("L is required for non-harmonic input")
        g = sh_analyze(g, L, rule or quadrature_for_degree(2 * L))
    norm = math.sqrt(g.l2_norm_sq())
    if g.odd_norm() > 1e-10 * max(1.0, norm):
        raise AdmissibilityError("second variation needs an even function")
    if abs(g.coeffs[0] * math.sqrt(FOUR_PI)) > 1e-8:
        raise AdmissibilityError("second variation needs a mean-zero function")
    deg = degree_of_index(g.L)
    q = 0.0
    for l in range(2, g.L + 1, 2):
        gl2 = float(np.sum(g.coeffs[deg == l] ** 2))
        if gl2:
            lam = funk_hecke_multiplier(DISTANCE_KERNEL, l)
            q += (12.0 * math.pi * lam - 16.0 * math.pi**2) * gl2
    return q


# ---------------------------------------------------------------- EL equation

def el_residual(f: SphereFunction, rule: Optional[QuadratureRule] = None,
                **quad) -> tuple[float, float]:
    """Return ``(‖T f - λ f‖₂ / ‖T f‖₂, λ)`` with ``λ = ⟨T f, f⟩ / ‖f‖₂²``."""
    if isinstance(f, Harmonic):
        c = f.coeffs
        n2 = float(c @ c)
        if n2 == 0.0:
            raise DegenerateInputError("the zero function has no EL residual")
        _, T = triple_conv_operator(f.L, f.odd_norm() == 0.0).apply(c)
        cf = f.padded(3 * f.L)
        lam = float(T @ cf) / n2
        return float(np.linalg.norm(T - lam * cf) / np.linalg.norm(T)), lam
    rule = rule or make_quadrature(12, 24)
    fv = f.samples(rule)
    n2 = rule.integrate(fv * fv)
    if n2 == 0.0:
        raise DegenerateInputError("the zero function has no EL residual")
    T = triple_conv_at(f, rule.nodes, **quad)
    lam = rule.integrate(T * fv) / n2
    return math.sqrt(rule.integrate((T - lam * fv) ** 2) / rule.integrate(T * T)), lam


@dataclass
class SearchTrace:
    """Per-iterate ``(Φ, EL residual, λ)``; ``final`` is the last iterate."""

    iterates: list = field(default_factory=list)
    terminated_by: str = "max_iter"
    final: Optional[Harmonic] = None
    damping: float = 0.5

    @property
    def phi(self) -> np.ndarray:
        return np.array([it[0] for it in self.iterates])

    @property
    def residual(self) -> np.ndarray:
        return np.array([it[1] for it in self.iterates])

    @property
    def converged(self) -> bool:
        return self.terminated_by == "tolerance"


def _as_even_harmonic(f0: SphereFunction, L: Optional[int]) -> Harmonic:
    if isinstance(f0, Harmonic) and (L is None or L == f0.L):
        h = f0
    else:
        L = L if L is not None else (f0.L if isinstance(f0, Harmonic) else 4)
        h = sh_analyze(f0, L, quadrature_for_degree(2 * L + 40))
    return h.even_part()


def extremizer_search(f0: SphereFunction, max_iter: int = 200, tol: float = 1e-6,
                      damping: float = 0.5, L: Optional[int] = None,
                      phi_tol: Optional[float] = None,
                      clamp_rule: Optional[QuadratureRule] = None) -> SearchTrace:
    """Damped Euler-Lagrange fixed-point iteration on even band-limited functions.

    Each step maps ``f ↦ normalize((1-θ) f + θ P_L T(f)/λ)``, removes odd
    degrees, clamps at zero on ``clamp_rule`` and re-projects to degree
    ``L``. It stops when the residual drops below ``tol`` or when ``Φ``
    increases by less than ``phi_tol`` (default ``tol²``). Five
    consecutive decreases of ``Φ`` raise :class:`SearchDivergence`.
    """
    if not (0.0 < damping <= 1.0):
        raise ParameterError("damping must lie in (0, 1]")
    h = _as_even_harmonic(f0, L)
    c = h.coeffs.copy()
    n = math.sqrt(float(c @ c))
    if n == 0.0:
        raise DegenerateInputError("the search needs a nonzero start")
    c /= n
    L = h.L
    phi_tol = tol * tol if phi_tol is None else phi_tol
    op = triple_conv_operator(L, even=True)
    nb = n_coeffs(L)
    rule = clamp_rule or quadrature_for_degree(2 * L + 12)
    B = sh_basis(L, rule.nodes)
    odd = degree_of_index(L) % 2 == 1
    trace = SearchTrace(damping=damping)
    drops = 0
    for it in range(max_iter):
        psi, T = op.apply(c)
        phi = psi  # ‖c‖ = 1
        lam = float(T[:nb] @ c)
        res = float(np.linalg.norm(T - lam * np.pad(c, (0, T.size - nb))) / np.linalg.norm(T))
        prev = trace.iterates[-1][0] if trace.iterates else None
        trace.iterates.append((phi, res, lam))
        trace.final = Harmonic(c.copy())
        if res < tol:
            trace.terminated_by = "tolerance"
            return trace
        if prev is not None:
            if 0.0 <= phi - prev < phi_tol:
                trace.terminated_by = "tolerance"
                return trace
            drops = drops + 1 if phi < prev else 0
            if drops >= 5:
                raise SearchDivergence(
                    f"Φ decreased on 5 consecutive steps (last {phi:.6g})", trace
                )
        c = (1.0 - damping) * c + damping * T[:nb] / lam
        c[odd] = 0.0
        v = B @ c
        if v.min() < 0.0:
            c = B.T @ (rule.weights * np.maximum(v, 0.0))
            c[odd] = 0.0
        c /= np.linalg.norm(c)
    trace.terminated_by = "max_iter"
    return trace


def random_even_start(rng: np.random.Generator, L: int = 4) -> Harmonic:
    """Random nonnegative even function of degree ``L`` (shifted random harmonic)."""
    c = rng.standard_normal(n_coeffs(L))
    c[degree_of_index(L) % 2 == 1] = 0.0
    rule = quadrature_for_degree(2 * L + 12)
    v = sh_basis(L, rule.nodes) @ c
    lo, hi = v.min(), v.max()
    c[0] += (-lo + 0.1 * (hi - lo)) * math.sqrt(FOUR_PI)
    return Harmonic(c)


def gamma_secondary_max(center, exclude: float, grid_n: int = 64) -> float:
    """Largest scan value of ``Γ`` at grid points farther than ``exclude`` (sup norm) from ``center``."""
    a = np.linspace(0.0, HALF_PI, grid_n)
    center = np.asarray(center, dtype=float)
    P, A, B = np.meshgrid(a, a, a, indexing="ij")
    near3 = (np.abs(P - center[1]) <= exclude) & (np.abs(A - center[2]) <= exclude) \
        & (np.abs(B - center[3]) <= exclude)
    best = -np.inf
    for ph in a:
        v = gamma_values(ph, P, A, B)
        if abs(ph - center[0]) <= exclude:
            v = np.where(near3, -np.inf, v)
        best = max(best, float(v.max()))
    return best
