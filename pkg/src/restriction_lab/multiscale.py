"""Cap-based concentration diagnostics on the sphere and spectral splits on the plane.

Cap integrals are quadrature sums over the nodes inside a cap. Cap
measures are the quadrature measure of the same node set, so cap
averages of constants are exact and ``Λ ≤ 1`` holds by Cauchy-Schwarz.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np
from scipy import sparse

from .convolution import BallGrid, conv_l2_norm
from .errors import (
    DecompositionUnderflow,
    DegenerateInputError,
    ParameterError,
    ResolutionError,
    SignError,
)
from .plane import PlaneFunction
from .sphere import (
    Cap,
    CapFamily,
    GridSamples,
    QuadratureRule,
    SphereFunction,
    _chord,
    cap_quotient_distance,
    make_quadrature,
    maximal_cap_centers,
)

TWO_PI = 2.0 * math.pi
DEFAULT_S_EST = (2.0 * math.pi) ** 0.25


# ---------------------------------------------------------------- cap levels

def family_candidate_rule(k: int) -> QuadratureRule:
    """Candidate nodes for the level-``k`` family (spacing just below ``2^{-k-1}``)."""
    n = int(math.ceil(1.1 * math.pi * 2.0 ** (k + 1))) + 2
    return make_quadrature(n, 2 * n)


_FAMILIES: dict = {}


def cap_family(k: int) -> CapFamily:
    """Deterministic level-``k`` family, cached."""
    if k not in _FAMILIES:
        _FAMILIES[k] = maximal_cap_centers(k, family_candidate_rule(k))
    return _FAMILIES[k]


@dataclass(frozen=True, eq=False)
class CapLevels:
    """Families of levels ``0..k_max`` with node memberships on ``rule``.

    ``membership[k]`` is a sparse 0/1 matrix of shape ``(caps, nodes)`` and
    ``measure[k]`` the quadrature measure of every cap.
    """

    rule: QuadratureRule
    families: tuple
    membership: tuple
    measure: tuple

    @property
    def k_max(self) -> int:
        return len(self.families) - 1

    def cap(self, k: int, j: int) -> Cap:
        return self.families[k].cap(j)

    def nodes_in(self, k: int, j: int) -> np.ndarray:
        return self.membership[k].getrow(j).indices


def auto_k_max(rule: QuadratureRule, limit: int = 6) -> int:
    """Deepest level whose caps are at least three node spacings wide."""
    k = int(math.floor(math.log2(2.0 / (3.0 * rule.spacing))))
    return max(0, min(limit, k))


_LEVELS: dict = {}


def cap_levels(rule: QuadratureRule, k_max: Optional[int] = None) -> CapLevels:
    k_max = auto_k_max(rule) if k_max is None else int(k_max)
    if k_max < 0:
        raise ParameterError("k_max must be nonnegative")
    key = (id(rule), k_max)
    hit = _LEVELS.get(key)
    if hit is not None and hit.rule is rule:
        return hit
    fams, mems, meas = [], [], []
    for k in range(k_max + 1):
        fam = cap_family(k)
        h = math.sqrt(1.0 - fam.cap_radius**2)
        hits = rule.tree.query_ball_point(fam.centers, _chord(fam.cap_radius) + 1e-12)
        rows, cols = [], []
        for j, idx in enumerate(hits):
            idx = np.asarray(idx, dtype=int)
            if idx.size:
                idx = np.sort(idx[rule.nodes[idx] @ fam.centers[j] > h])
            rows.append(np.full(idx.size, j))
            cols.append(idx)
        r = np.concatenate(rows) if rows else np.zeros(0, int)
        c = np.concatenate(cols) if cols else np.zeros(0, int)
        M = sparse.csr_matrix((np.ones(r.size), (r, c)), shape=(len(fam), rule.size))
        fams.append(fam)
        mems.append(M)
        meas.append(M @ rule.weights)
    lv = CapLevels(rule, tuple(fams), tuple(mems), tuple(meas))
    if len(_LEVELS) > 8:
        _LEVELS.clear()
    _LEVELS[key] = lv
    return lv


def _samples(f: SphereFunction, rule: QuadratureRule) -> np.ndarray:
    return np.asarray(f.samples(rule), dtype=float)


# ---------------------------------------------------------------- X_p and Λ

def xp_level_terms(f: SphereFunction, p: float, levels: CapLevels) -> np.ndarray:
    """``Σ_j 2^{-4k} (|C|⁻¹ ∫_C |f|^p)^{4/p}`` for every level ``k``."""
    if not (1.0 <= p < 2.0):
        raise ParameterError(f"p must lie in [1, 2), got {p}")
    v = np.abs(_samples(f, levels.rule)) ** p * levels.rule.weights
    out = np.zeros(levels.k_max + 1)
    for k in range(levels.k_max + 1):
        meas = levels.measure[k]
        ok = meas > 0
        avg = (levels.membership[k] @ v)[ok] / meas[ok]
        out[k] = 2.0 ** (-4 * k) * float(np.sum(avg ** (4.0 / p)))
    return out


def xp_norm(f: SphereFunction, p: float, k_max: Optional[int] = None,
            levels: Optional[CapLevels] = None, rule: Optional[QuadratureRule] = None) -> float:
    """Truncated ``‖f‖_{X_p}`` over levels ``k ≤ k_max``."""
    if levels is None:
        rule = rule or (f.rule if isinstance(f, GridSamples) else make_quadrature(96, 192))
        levels = cap_levels(rule, k_max)
    elif k_max is not None and k_max != levels.k_max:
        raise ParameterError("k_max disagrees with the supplied levels")
    return float(np.sum(xp_level_terms(f, p, levels))) ** 0.25


def xp_tail_fraction(f: SphereFunction, p: float, levels: CapLevels) -> float:
    """Share of ``‖f‖⁴_{X_p}`` carried by the deepest computed level."""
    t = xp_level_terms(f, p, levels)
    s = float(np.sum(t))
    return float(t[-1] / s) if s > 0 else 0.0


def lambda_all(f: SphereFunction, levels: CapLevels) -> list:
    """``Λ_{k,j}(f)`` for every cap of every level."""
    v = _samples(f, levels.rule)
    w = levels.rule.weights
    n2 = float(np.dot(w, v * v))
    if not n2 > 0.0:
        raise DegenerateInputError("Λ is undefined for the zero function")
    av = np.abs(v) * w
    out = []
    for k in range(levels.k_max + 1):
        meas = levels.measure[k]
        integ = levels.membership[k] @ av
        with np.errstate(divide="ignore", invalid="ignore"):
            lam = np.where(meas > 0, integ / np.sqrt(meas * n2), 0.0)
        out.append(lam)
    return out


def lambda_kj(f: SphereFunction, k: int, j: int, levels: CapLevels) -> float:
    """``Λ_{k,j}(f) = (|C|⁻¹∫_C|f|)(|C|⁻¹∫|f|²)^{-1/2}``."""
    if not (0 <= k <= levels.k_max) or not (0 <= j < len(levels.families[k])):
        raise ParameterError(f"no cap ({k}, {j}) in the computed levels")
    return float(lambda_all(f, levels)[k][j])


# ---------------------------------------------------------------- MVV split

class MVVSplit(NamedTuple):
    g: GridSamples
    h: GridSamples
    cap: Cap
    threshold: float
    paired: bool
    level: int
    index: int


def is_even_samples(v: np.ndarray, rule: QuadratureRule, tol: float = 1e-12) -> bool:
    idx = rule.antipodal_index
    if idx is None:
        return False
    scale = max(float(np.max(np.abs(v))), 1e-300)
    return float(np.max(np.abs(v - v[idx]))) <= tol * scale


def mvv_split(f: SphereFunction, levels: CapLevels, even: Optional[bool] = None) -> MVVSplit:
    """Split ``f = g + h`` with ``g`` supported on the cap of largest ``Λ``.

    ``g = f χ_E`` with ``E = {x ∈ C: f(x) ≤ R}`` and ``R`` the smallest sample
    value for which ``E`` carries half of ``∫_C f``. Even inputs use the cap
    pair ``C ∪ -C`` so that ``g`` and ``h`` stay even.
    """
    rule = levels.rule
    v = _samples(f, rule)
    if v.min() < -1e-12 * max(1.0, float(np.abs(v).max())):
        raise SignError("mvv_split needs a nonnegative function")
    lams = lambda_all(f, levels)
    best, kb, jb = -1.0, 0, 0
    for k, lam in enumerate(lams):
        if lam.size:
            j = int(np.argmax(lam))
            if lam[j] > best:
                best, kb, jb = float(lam[j]), k, j
    cap = levels.cap(kb, jb)
    region = np.zeros(rule.size, dtype=bool)
    region[levels.nodes_in(kb, jb)] = True
    paired = is_even_samples(v, rule) if even is None else bool(even)
    key = v
    if paired:
        idx = rule.antipodal_index
        if idx is None:
            raise ParameterError("even splitting needs an antipodally closed rule")
        region |= region[idx]
        key = np.maximum(v, v[idx])
    w = rule.weights
    ids = np.flatnonzero(region)
    order = ids[np.argsort(key[ids], kind="stable")]
    mass = np.cumsum(w[order] * v[order])
    total = mass[-1] if mass.size else 0.0
    pos = int(np.searchsorted(mass, 0.5 * total * (1.0 - 1e-15), side="left"))
    pos = min(pos, order.size - 1)
    R = float(key[order[pos]])
    E = region & (key <= R)
    g = np.where(E, v, 0.0)
    h = np.where(E, 0.0, v)
    return MVVSplit(GridSamples(rule, g), GridSamples(rule, h), cap, R, paired, kb, jb)


# ---------------------------------------------------------------- decomposition

@dataclass
class DecompositionPiece:
    function: GridSamples
    cap: Cap
    eps_star: float
    paired: bool = False

    @property
    def l2_mass(self) -> float:
        return self.function.l2_norm_sq()


@dataclass
class DecompositionResult:
    """Ordered pieces ``(f_ν, C_ν, ε_ν⋆)`` and the remainder ``G``."""

    pieces: list
    remainder: GridSamples
    steps: int
    terminated_by: str
    norm_sq: float
    conv_norms: list = field(default_factory=list)

    @property
    def eps_star(self) -> np.ndarray:
        return np.array([p.eps_star for p in self.pieces])

    def reconstruction_error(self, f: SphereFunction) -> float:
        rule = self.remainder.rule
        total = self.remainder.values.copy()
        for p in self.pieces:
            total = total + p.function.values
        d = _samples(f, rule) - total
        return math.sqrt(rule.integrate(d * d))

    def max_piece_distance(self, min_mass: float = 0.05) -> float:
        """Largest ``ϱ(C_j, C_k)`` among pieces with relative mass ≥ ``min_mass``."""
        caps = [p.cap for p in self.pieces if p.l2_mass >= min_mass * self.norm_sq]
        best = 0.0
        for a in range(len(caps)):
            for b in range(a + 1, len(caps)):
                best = max(best, cap_quotient_distance(caps[a], caps[b]))
        return best


_COARSE_BALL: list = []


def coarse_ball_grid() -> BallGrid:
    """Small ball grid for the convolution-norm thresholds of :func:`decompose`."""
    if not _COARSE_BALL:
        _COARSE_BALL.append(BallGrid.make(24, 16, 33, 32))
    return _COARSE_BALL[0]


def decompose(f: SphereFunction, s_est: float = DEFAULT_S_EST, max_steps: int = 50,
              stop_norm: float = 1e-6, levels: Optional[CapLevels] = None,
              ball_grid: Optional[BallGrid] = None) -> DecompositionResult:
    """Greedy cap decomposition starting from ``G₀ = f`` and ``ε₀ = 1/2``.

    At step ``ν`` the scale ``ε`` is halved until
    ``‖G_ν σ * G_ν σ‖₂ ≥ ε² S² ‖f‖₂²``; that ``ε`` is recorded as ``ε_ν⋆``
    and ``G_ν`` is split by :func:`mvv_split`.
    """
    if not (s_est > 0 and math.isfinite(s_est)):
        raise ParameterError("S_est must be positive and finite")
    if levels is None:
        rule = f.rule if isinstance(f, GridSamples) else make_quadrature(64, 128)
        levels = cap_levels(rule)
    rule = levels.rule
    grid = ball_grid or coarse_ball_grid()
    G = GridSamples(rule, _samples(f, rule))
    n2 = G.l2_norm_sq()
    if not n2 > 0.0:
        raise DegenerateInputError("cannot decompose the zero function")
    eps = 0.5
    pieces, norms = [], []
    reason = "max_steps"
    for step in range(max_steps):
        if math.sqrt(G.l2_norm_sq()) < stop_norm:
            reason = "stop_norm"
            break
        N = conv_l2_norm(G, G, grid)
        norms.append(N)
        if N == 0.0:
            reason = "zero_convolution"
            break
        while N < eps * eps * s_est * s_est * n2:
            eps *= 0.5
            if eps * eps * s_est * s_est * n2 == 0.0:
                raise DecompositionUnderflow(
                    "epsilon halving fell below the floating point floor",
                    dict(step=step, eps=eps, conv_norm=N, remainder_norm_sq=G.l2_norm_sq()),
                )
        split = mvv_split(G, levels)
        pieces.append(DecompositionPiece(split.g, split.cap, eps, split.paired))
        G = split.h
    if reason == "max_steps" and math.sqrt(G.l2_norm_sq()) < stop_norm:
        reason = "stop_norm"
    return DecompositionResult(pieces, G, len(pieces), reason, n2, norms)


# ---------------------------------------------------------------- metric partition

def metric_partition(points: Sequence, metric: Callable, s1: Optional[int] = None,
                     s2: Optional[int] = None) -> tuple[list, list]:
    """Split a finite metric space into two sets at distance ≥ ``diameter / 2N``.

    Balls around ``s1`` of radii ``k r/2N`` are scanned for the first empty
    annulus; ``s1`` ends in the first set and ``s2`` in the second.
    """
    n = len(points)
    if n < 2:
        raise ParameterError("need at least two points")
    if s1 is None or s2 is None:
        best = -1.0
        for a in range(n):
            for b in range(a + 1, n):
                d = metric(points[a], points[b])
                if d > best:
                    best, s1, s2 = d, a, b
    if s1 == s2:
        raise ParameterError("s1 and s2 must differ")
    r = float(metric(points[s1], points[s2]))
    if not r > 0:
        raise ParameterError("the diameter must be positive")
    d = np.array([metric(points[s1], p) for p in points], dtype=float)
    step = r / (2 * n)
    for k in range(1, 2 * n):
        lo, hi = k * step, (k + 1) * step
        if not np.any((d >= lo) & (d < hi)):
            first = [i for i in range(n) if d[i] < lo]
            second = [i for i in range(n) if d[i] >= hi]
            return first, second
    raise RuntimeError("pigeonhole failed; the metric is not symmetric or s1, s2 is not a diameter")


# ---------------------------------------------------------------- tail gauges

@dataclass
class GaugeProfile:
    R: np.ndarray
    height_tail: np.ndarray
    spatial_tail: np.ndarray
    cap: Cap


def tail_gauge(f: SphereFunction, cap: Cap, R_grid, even: bool = False,
               rule: Optional[QuadratureRule] = None) -> GaugeProfile:
    """Height tails ``∫_{|f| ≥ R/r} f²`` and spatial tails ``∫_{|x-z| ≥ Rr} f²``.

    ``even`` measures distance to the nearer of ``z`` and ``-z``.
    """
    R = np.asarray(R_grid, dtype=float)
    if np.any(R < 1.0):
        raise ParameterError("R values must be at least 1")
    if rule is None:
        rule = f.rule if isinstance(f, GridSamples) else make_quadrature(128, 256)
    v = _samples(f, rule)
    w = rule.weights * v * v
    z, r = cap.center, cap.radius
    dist = np.linalg.norm(rule.nodes - z, axis=1)
    if even:
        dist = np.minimum(dist, np.linalg.norm(rule.nodes + z, axis=1))
    av = np.abs(v)
    height = np.array([float(np.sum(w[av >= Ri / r])) for Ri in R])
    spatial = np.array([float(np.sum(w[dist >= Ri * r])) for Ri in R])
    return GaugeProfile(R, height, spatial, cap)


# ---------------------------------------------------------------- plane spectra

def spectral_ladder(levels: int) -> np.ndarray:
    """``ρ₁ = 2``, ``ρ_{j+1} = ρ_j³``."""
    if levels < 2:
        raise ParameterError("need at least two ladder levels")
    rho = [2.0]
    for _ in range(levels - 1):
        rho.append(rho[-1] ** 3)
    return np.array(rho)


@dataclass
class SpectralProfile:
    ladder: np.ndarray
    masses: np.ndarray
    total: float

    def annulus(self, j: int) -> tuple[float, float]:
        return float(self.ladder[j]), float(self.ladder[j + 1])


class GapResult(NamedTuple):
    s: float
    S: float
    gap_mass: float
    profile: SpectralProfile


def spectral_profile(g: PlaneFunction, levels: int) -> SpectralProfile:
    """Masses ``∫_{ρ_j ≤ |ξ| < ρ_{j+1}} |ĝ|²`` from the discrete Fourier transform."""
    ladder = spectral_ladder(levels)
    if math.pi / g.h < ladder[-1]:
        raise ResolutionError(
            f"grid spacing {g.h} resolves |ξ| ≤ {math.pi / g.h:.4g}, below ρ = {ladder[-1]:.4g}"
        )
    n = g.n
    F = g.h * g.h * np.fft.fft2(g.samples)
    k = TWO_PI * np.fft.fftfreq(n, d=g.h)
    dxi = TWO_PI / (n * g.h)
    mag = np.hypot(k[:, None], k[None, :])
    P = np.abs(F) ** 2 * dxi * dxi
    masses = np.array([
        float(np.sum(P[(mag >= ladder[j]) & (mag < ladder[j + 1])]))
        for j in range(levels - 1)
    ])
    return SpectralProfile(ladder, masses, float(np.sum(P)))


def freq_gap_finder(g: PlaneFunction, levels: int) -> Optional[GapResult]:
    """Ladder annulus ``[ρ_j, ρ_j³]`` of least spectral mass, or ``None`` for ``g = 0``."""
    prof = spectral_profile(g, levels)
    if prof.total == 0.0:
        return None
    j = int(np.argmin(prof.masses))
    s, S = prof.annulus(j)
    return GapResult(s, S, float(prof.masses[j]), prof)


class LowFreqMass(NamedTuple):
    mass: float
    t: np.ndarray
    pairings: np.ndarray


def fourier_transform_at(g: PlaneFunction, xi: np.ndarray) -> np.ndarray:
    """``ĝ(ξ) = ∫ e^{-ix·ξ} g(x) dx`` by direct summation over the samples."""
    s = g.samples
    rows = np.flatnonzero(np.any(s != 0, axis=1))
    cols = np.flatnonzero(np.any(s != 0, axis=0))
    if rows.size == 0:
        return np.zeros(xi.shape[0], dtype=complex)
    x = g.coords
    sub = s[rows[0]:rows[-1] + 1, cols[0]:cols[-1] + 1]
    xa, xb = x[rows[0]:rows[-1] + 1], x[cols[0]:cols[-1] + 1]
    E1 = np.exp(-1j * np.outer(xa, xi[:, 0]))
    E2 = np.exp(-1j * np.outer(xb, xi[:, 1]))
    M = sub @ E2
    return g.h * g.h * np.sum(E1 * M, axis=0)


def low_freq_mass(g: PlaneFunction, A: float, t_grid=None, n_s: int = 40,
                  n_beta: int = 64) -> LowFreqMass:
    """``∫_{|ξ| ≤ A} |ĝ|²`` plus the pairings ``∫ g e^{-t|y|²/2}`` on ``t_grid``."""
    if not A > 0:
        raise ParameterError("A must be positive")
    if g.samples.min() < -1e-12:
        raise SignError("low_freq_mass needs a nonnegative function")
    if not g.l2_norm_sq() > 0:
        raise DegenerateInputError("low_freq_mass needs a nonzero function")
    xs, ws = np.polynomial.legendre.leggauss(n_s)
    s = 0.5 * A * (xs + 1.0)
    ws = 0.5 * A * ws * s
    beta = TWO_PI * np.arange(n_beta) / n_beta
    xi = np.stack([np.outer(s, np.cos(beta)).ravel(), np.outer(s, np.sin(beta)).ravel()], axis=1)
    G = fourier_transform_at(g, xi).reshape(n_s, n_beta)
    mass = float(np.sum(ws[:, None] * np.abs(G) ** 2) * TWO_PI / n_beta)
    t = np.array([0.25, 0.5, 1.0, 2.0, 4.0]) if t_grid is None else np.asarray(t_grid, float)
    x = g.coords
    r2 = x[:, None] ** 2 + x[None, :] ** 2
    pair = np.array([g.h * g.h * float(np.sum(g.samples * np.exp(-0.5 * ti * r2))) for ti in t])
    return LowFreqMass(mass, t, pair)


# ---------------------------------------------------------------- neckpain diagnostic

def neckpain_ratio(f: SphereFunction, p: float, gamma: float, levels: CapLevels) -> float:
    """``‖f‖_{X_p} / (‖f‖₂ · sup_{k,j} Λ_{k,j}(f)^γ)``."""
    lam = max(float(l.max()) for l in lambda_all(f, levels) if l.size)
    n = math.sqrt(float(np.dot(levels.rule.weights, _samples(f, levels.rule) ** 2)))
    return xp_norm(f, p, levels=levels) / (n * lam**gamma)


def fit_neckpain_gamma(fs: Sequence[SphereFunction], p: float, levels: CapLevels,
                       gammas=None) -> tuple[float, float]:
    """``γ`` in ``(0, 1]`` minimizing the sample maximum of :func:`neckpain_ratio`."""
    gammas = np.linspace(0.05, 1.0, 20) if gammas is None else np.asarray(gammas)
    xs, lams = [], []
    for f in fs:
        lam = max(float(l.max()) for l in lambda_all(f, levels) if l.size)
        n = math.sqrt(float(np.dot(levels.rule.weights, _samples(f, levels.rule) ** 2)))
        xs.append(xp_norm(f, p, levels=levels) / n)
        lams.append(lam)
    xs, lams = np.array(xs), np.array(lams)
    worst = np.array([float(np.max(xs / lams**g)) for g in gammas])
    i = int(np.argmin(worst))
    return float(gammas[i]), float(worst[i])
