"""Geometry, quadrature and harmonic analysis on the unit sphere S².

Real spherical harmonics are orthonormal (``∫ Y² dσ = 1``), carry no
Condon-Shortley phase and are stored in the flat order ``l² + l + m``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import numpy as np
from scipy.spatial import cKDTree

from .errors import ParameterError

FOUR_PI = 4.0 * math.pi
_EVAL_CHUNK = 200_000
_SNAP = 1e-10


# ---------------------------------------------------------------- points

def unit_vector(v) -> np.ndarray:
    """Normalize a vector (or an array of row vectors) to unit length."""
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(n == 0):
        raise ParameterError("cannot normalize the zero vector")
    return v / n


def random_unit_vectors(rng: np.random.Generator, n: int) -> np.ndarray:
    """Uniformly distributed points on S² as an ``(n, 3)`` array."""
    return unit_vector(rng.standard_normal((n, 3)))


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Haar-random rotation matrix with determinant +1."""
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def orthonormal_frame(v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic orthonormal pair ``(e1, e2)`` perpendicular to unit rows ``v``.

    ``e1`` is Gram-Schmidt of the coordinate axis on which ``|v|`` is
    smallest, and ``e2 = v × e1``.
    """
    v = np.asarray(v, dtype=float)
    axis = np.argmin(np.abs(v), axis=-1)
    a = np.zeros_like(v)
    np.put_along_axis(a, axis[..., None], 1.0, axis=-1)
    e1 = a - np.sum(a * v, axis=-1, keepdims=True) * v
    e1 /= np.linalg.norm(e1, axis=-1, keepdims=True)
    e2 = np.cross(v, e1)
    return e1, e2


# ---------------------------------------------------------------- caps

@dataclass(frozen=True)
class Cap:
    """Cap ``C(z, r)``: points ``y`` with ``y·z > 0`` and ``|y - (y·z)z| < r``."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = unit_vector(np.asarray(self.center, dtype=float).reshape(3))
        object.__setattr__(self, "center", c)
        r = float(self.radius)
        if not (0.0 < r <= 1.0):
            raise ParameterError(f"cap radius must lie in (0, 1], got {r}")
        object.__setattr__(self, "radius", r)

    @property
    def area(self) -> float:
        r = self.radius
        # 1 - sqrt(1 - r²) written without cancellation
        return 2.0 * math.pi * r * r / (1.0 + math.sqrt(1.0 - r * r))

    @property
    def height(self) -> float:
        """Threshold ``√(1 - r²)`` on ``y·z`` describing the cap."""
        return math.sqrt(1.0 - self.radius**2)

    def contains(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        d = y @ self.center
        perp = y - d[..., None] * self.center
        return (d > 0) & (np.linalg.norm(perp, axis=-1) < self.radius)

    def antipode(self) -> "Cap":
        return Cap(-self.center, self.radius)


def _cap_point(c: Cap) -> np.ndarray:
    return np.concatenate([c.center / c.radius, [math.log(1.0 / c.radius)]])


def cap_distance(c1: Cap, c2: Cap) -> float:
    """Euclidean distance between the points ``(z/r, log(1/r))`` of two caps."""
    return float(np.linalg.norm(_cap_point(c1) - _cap_point(c2)))


def cap_quotient_distance(c1: Cap, c2: Cap) -> float:
    """Distance on caps modulo the identification ``C ≡ -C``."""
    return min(cap_distance(c1, c2), cap_distance(c1.antipode(), c2))


# ---------------------------------------------------------------- quadrature

@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Product rule: Gauss-Legendre in ``cos θ`` times uniform ``φ``.

    Nodes are ordered ring by ring from south to north, ``φ`` increasing
    within a ring; the flat node index is ``i * n_phi + j``.
    """

    n_theta: int
    n_phi: int
    cos_theta: np.ndarray
    phi: np.ndarray
    nodes: np.ndarray
    weights: np.ndarray
    exactness_degree: int

    @property
    def size(self) -> int:
        return self.nodes.shape[0]

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, np.asarray(values, dtype=float)))

    @cached_property
    def spacing(self) -> float:
        """Upper bound for the angular gap between neighbouring nodes."""
        theta = np.arccos(self.cos_theta)[::-1]
        gaps = np.diff(np.concatenate([[0.0], theta, [math.pi]]))
        return float(max(gaps.max(), 2.0 * math.pi / self.n_phi))

    @cached_property
    def antipodal_index(self) -> Optional[np.ndarray]:
        """Index of ``-x`` for every node, or ``None`` if the rule is not closed."""
        if self.n_phi % 2:
            return None
        i = np.arange(self.n_theta)[::-1]
        j = (np.arange(self.n_phi) + self.n_phi // 2) % self.n_phi
        return (i[:, None] * self.n_phi + j[None, :]).ravel()

    @cached_property
    def tree(self) -> cKDTree:
        return cKDTree(self.nodes)


def make_quadrature(n_theta: int, n_phi: int) -> QuadratureRule:
    """Build the product rule with ``n_theta`` rings and ``n_phi`` nodes per ring."""
    if int(n_theta) != n_theta or int(n_phi) != n_phi:
        raise ParameterError("quadrature sizes must be integers")
    n_theta, n_phi = int(n_theta), int(n_phi)
    if n_theta < 2 or n_phi < 4:
        raise ParameterError(f"need n_theta >= 2 and n_phi >= 4, got ({n_theta}, {n_phi})")
    u, wu = np.polynomial.legendre.leggauss(n_theta)
    phi = 2.0 * math.pi * np.arange(n_phi) / n_phi
    s = np.sqrt(1.0 - u * u)
    nodes = np.stack(
        [
            np.outer(s, np.cos(phi)).ravel(),
            np.outer(s, np.sin(phi)).ravel(),
            np.repeat(u, n_phi),
        ],
        axis=1,
    )
    weights = np.repeat(wu * (2.0 * math.pi / n_phi), n_phi)
    return QuadratureRule(
        n_theta=n_theta,
        n_phi=n_phi,
        cos_theta=u,
        phi=phi,
        nodes=nodes,
        weights=weights,
        exactness_degree=min(2 * n_theta - 1, n_phi - 1),
    )


def quadrature_for_degree(degree: int, even_phi: bool = False) -> QuadratureRule:
    """Smallest product rule integrating polynomials of ``degree`` exactly."""
    n_theta = max(2, degree // 2 + 1)
    n_phi = max(4, degree + 1)
    if even_phi and n_phi % 2:
        n_phi += 1
    return make_quadrature(n_theta, n_phi)


# ---------------------------------------------------------------- harmonics

def legendre_p(k: int, t):
    """Legendre polynomial ``P_k(t)`` by the three-term recurrence."""
    if k < 0 or int(k) != k:
        raise ParameterError(f"degree must be a nonnegative integer, got {k}")
    t_arr = np.asarray(t, dtype=float)
    if np.any(np.abs(t_arr) > 1.0 + 1e-14):
        raise ParameterError("Legendre argument outside [-1, 1]")
    t_arr = np.clip(t_arr, -1.0, 1.0)
    p_prev, p = np.ones_like(t_arr), t_arr.copy()
    if k == 0:
        p = p_prev
    else:
        for n in range(1, int(k)):
            p_prev, p = p, ((2 * n + 1) * t_arr * p - n * p_prev) / (n + 1)
    return float(p) if np.ndim(p) == 0 else p


def sh_index(l: int, m: int) -> int:
    return l * l + l + m


def n_coeffs(L: int) -> int:
    return (L + 1) ** 2


def degree_of_index(L: int) -> np.ndarray:
    """Degree ``l`` of every flat coefficient index up to band limit ``L``."""
    return np.repeat(np.arange(L + 1), 2 * np.arange(L + 1) + 1)


def sh_basis(L: int, points) -> np.ndarray:
    """Real orthonormal harmonics of degree ≤ ``L`` at ``points``, shape ``(N, (L+1)²)``."""
    p = np.asarray(points, dtype=float).reshape(-1, 3)
    x, y, z = p[:, 0], p[:, 1], p[:, 2]
    r = np.sqrt(x * x + y * y + z * z)
    ct = z / r
    st = np.sqrt(x * x + y * y) / r
    ph = np.arctan2(y, x)
    out = np.empty((p.shape[0], n_coeffs(L)))
    pmm = np.full(p.shape[0], 1.0 / math.sqrt(FOUR_PI))
    for m in range(L + 1):
        if m > 0:
            pmm = pmm * math.sqrt((2 * m + 1) / (2 * m)) * st
            cm, sm = math.sqrt(2.0) * np.cos(m * ph), math.sqrt(2.0) * np.sin(m * ph)

        def store(l, val):
            if m == 0:
                out[:, sh_index(l, 0)] = val
            else:
                out[:, sh_index(l, m)] = val * cm
                out[:, sh_index(l, -m)] = val * sm

        store(m, pmm)
        if m == L:
            continue
        p1, p2 = math.sqrt(2 * m + 3) * ct * pmm, pmm
        store(m + 1, p1)
        for l in range(m + 2, L + 1):
            a = math.sqrt((4 * l * l - 1) / (l * l - m * m))
            b = math.sqrt(((l - 1) ** 2 - m * m) / (4 * (l - 1) ** 2 - 1))
            p1, p2 = a * (ct * p1 - b * p2), p1
            store(l, p1)
    return out


def sh_synthesize(c, points) -> np.ndarray | float:
    """Evaluate the expansion with flat coefficients ``c`` at ``points``."""
    c = np.asarray(c, dtype=float)
    L = int(round(math.sqrt(c.size))) - 1
    if n_coeffs(L) != c.size:
        raise ParameterError(f"coefficient length {c.size} is not a square")
    pts = np.asarray(points, dtype=float)
    flat = pts.reshape(-1, 3)
    out = np.empty(flat.shape[0])
    for s in range(0, flat.shape[0], _EVAL_CHUNK):
        out[s:s + _EVAL_CHUNK] = sh_basis(L, flat[s:s + _EVAL_CHUNK]) @ c
    if pts.ndim == 1:
        return float(out[0])
    return out.reshape(pts.shape[:-1])


def sh_analyze(f, L: int, rule: QuadratureRule) -> "Harmonic":
    """Project ``f`` onto harmonics of degree ≤ ``L`` with the quadrature ``rule``."""
    if rule.exactness_degree < 2 * L:
        raise ParameterError(
            f"rule exactness {rule.exactness_degree} is below 2L = {2 * L}"
        )
    if isinstance(f, Harmonic):
        c = np.zeros(n_coeffs(L))
        k = min(c.size, f.coeffs.size)
        c[:k] = f.coeffs[:k]
        return Harmonic(c)
    vals = f.samples(rule) if isinstance(f, SphereFunction) else np.asarray(f(rule.nodes), float)
    return Harmonic(sh_basis(L, rule.nodes).T @ (rule.weights * vals))


# ---------------------------------------------------------------- functions

DEFAULT_RULE_SIZE = (48, 97)


@dataclass(frozen=True, eq=False)
class SphereFunction:
    """Real function on S². Subclasses define ``evaluate``."""

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, points):
        pts = np.asarray(points, dtype=float)
        vals = self.evaluate(pts.reshape(-1, 3))
        if pts.ndim == 1:
            return float(vals[0])
        return vals.reshape(pts.shape[:-1])

    def samples(self, rule: QuadratureRule) -> np.ndarray:
        return self.evaluate(rule.nodes)

    def l2_norm_sq(self, rule: Optional[QuadratureRule] = None) -> float:
        rule = rule or default_rule()
        return rule.integrate(self.samples(rule) ** 2)

    def l2_norm(self, rule: Optional[QuadratureRule] = None) -> float:
        return math.sqrt(self.l2_norm_sq(rule))

    def reflected(self) -> "SphereFunction":
        """The function ``x ↦ f(-x)``."""
        return Pointwise(lambda p, f=self: f.evaluate(-p), norm_sq=self._known_norm_sq())

    def _known_norm_sq(self) -> Optional[float]:
        return None


_DEFAULT_RULE: list = []


def default_rule() -> QuadratureRule:
    if not _DEFAULT_RULE:
        _DEFAULT_RULE.append(make_quadrature(*DEFAULT_RULE_SIZE))
    return _DEFAULT_RULE[0]


@dataclass(frozen=True, eq=False)
class Harmonic(SphereFunction):
    """Band-limited function given by flat real-harmonic coefficients."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float).ravel()
        L = int(round(math.sqrt(c.size))) - 1
        if c.size == 0 or n_coeffs(L) != c.size:
            raise ParameterError(f"coefficient length {c.size} is not (L+1)²")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def L(self) -> int:
        return int(round(math.sqrt(self.coeffs.size))) - 1

    @classmethod
    def zeros(cls, L: int) -> "Harmonic":
        return cls(np.zeros(n_coeffs(L)))

    @classmethod
    def from_terms(cls, terms: dict, L: Optional[int] = None) -> "Harmonic":
        """Build from ``{(l, m): value}``."""
        L = max([l for l, _ in terms] + [0]) if L is None else L
        c = np.zeros(n_coeffs(L))
        for (l, m), v in terms.items():
            if abs(m) > l or l > L:
                raise ParameterError(f"invalid harmonic index ({l}, {m})")
            c[sh_index(l, m)] = v
        return cls(c)

    @classmethod
    def constant(cls, value: float = 1.0) -> "Harmonic":
        return cls([value * math.sqrt(FOUR_PI)])

    @classmethod
    def ylm(cls, l: int, m: int) -> "Harmonic":
        return cls.from_terms({(l, m): 1.0})

    def coefficient(self, l: int, m: int) -> float:
        if l > self.L:
            return 0.0
        return float(self.coeffs[sh_index(l, m)])

    def padded(self, L: int) -> np.ndarray:
        c = np.zeros(n_coeffs(L))
        k = min(c.size, self.coeffs.size)
        c[:k] = self.coeffs[:k]
        return c

    def evaluate(self, points):
        return np.atleast_1d(sh_synthesize(self.coeffs, points))

    def l2_norm_sq(self, rule=None) -> float:
        return float(np.dot(self.coeffs, self.coeffs))

    def _known_norm_sq(self):
        return self.l2_norm_sq()

    def reflected(self) -> "Harmonic":
        sign = np.where(degree_of_index(self.L) % 2, -1.0, 1.0)
        return Harmonic(self.coeffs * sign)

    def even_part(self) -> "Harmonic":
        return Harmonic(np.where(degree_of_index(self.L) % 2, 0.0, self.coeffs))

    def odd_norm(self) -> float:
        return float(np.linalg.norm(self.coeffs[degree_of_index(self.L) % 2 == 1]))

    def __add__(self, other):
        if isinstance(other, Harmonic):
            L = max(self.L, other.L)
            return Harmonic(self.padded(L) + other.padded(L))
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, Harmonic):
            return self + (-1.0) * other
        return NotImplemented

    def __mul__(self, s):
        if np.isscalar(s):
            return Harmonic(self.coeffs * float(s))
        return NotImplemented

    __rmul__ = __mul__

    def rotated(self, R: np.ndarray, rule: Optional[QuadratureRule] = None) -> "Harmonic":
        """The function ``x ↦ f(R x)``, exact through analysis on a fine rule."""
        rule = rule or quadrature_for_degree(2 * self.L)
        return sh_analyze(Pointwise(lambda p: self.evaluate(p @ R.T)), self.L, rule)


@dataclass(frozen=True, eq=False)
class GridSamples(SphereFunction):
    """Samples at the nodes of a product rule, bilinear in ``(cos θ, φ)``."""

    rule: QuadratureRule
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float).ravel()
        if v.size != self.rule.size:
            raise ParameterError(f"expected {self.rule.size} samples, got {v.size}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def samples(self, rule: QuadratureRule) -> np.ndarray:
        if rule is self.rule:
            return self.values
        return self.evaluate(rule.nodes)

    def l2_norm_sq(self, rule=None) -> float:
        return self.rule.integrate(self.values**2)

    def _known_norm_sq(self):
        return self.l2_norm_sq()

    def reflected(self) -> "SphereFunction":
        idx = self.rule.antipodal_index
        if idx is None:
            return super().reflected()
        return GridSamples(self.rule, self.values[idx])

    def evaluate(self, points):
        rule = self.rule
        nt, nph = rule.n_theta, rule.n_phi
        grid = self.values.reshape(nt, nph)
        p = np.asarray(points, dtype=float).reshape(-1, 3)
        r = np.linalg.norm(p, axis=1)
        u = np.clip(p[:, 2] / r, -1.0, 1.0)
        ph = np.mod(np.arctan2(p[:, 1], p[:, 0]), 2.0 * math.pi)
        # ring values extended by the pole values (ring means) at u = ±1
        knots = np.concatenate([[-1.0], rule.cos_theta, [1.0]])
        ext = np.vstack([np.full(nph, grid[0].mean()), grid, np.full(nph, grid[-1].mean())])
        i = np.clip(np.searchsorted(knots, u, side="right") - 1, 0, nt)
        a = (u - knots[i]) / (knots[i + 1] - knots[i])
        dphi = 2.0 * math.pi / nph
        jf = ph / dphi
        j = np.floor(jf).astype(int) % nph
        b = jf - np.floor(jf)
        # snap round-off so that evaluation at a node returns the stored value
        j = np.where(b > 1.0 - _SNAP, (j + 1) % nph, j)
        b = np.where((b < _SNAP) | (b > 1.0 - _SNAP), 0.0, b)
        i = np.where((a > 1.0 - _SNAP) & (i < nt), i + 1, i)
        a = np.where((a < _SNAP) | (a > 1.0 - _SNAP), 0.0, a)
        j1 = (j + 1) % nph
        lo = (1 - b) * ext[i, j] + b * ext[i, j1]
        hi = (1 - b) * ext[i + 1, j] + b * ext[i + 1, j1]
        return (1 - a) * lo + a * hi

    @classmethod
    def from_function(cls, f, rule: QuadratureRule) -> "GridSamples":
        vals = f.samples(rule) if isinstance(f, SphereFunction) else f(rule.nodes)
        return cls(rule, vals)


@dataclass(frozen=True, eq=False)
class Pointwise(SphereFunction):
    """Function given by a vectorized callable on ``(N, 3)`` arrays.

    ``norm_sq`` may carry an exactly known ``‖f‖₂²``; otherwise norms use
    ``rule`` (or the default rule).
    """

    func: Callable[[np.ndarray], np.ndarray]
    norm_sq: Optional[float] = None
    rule: Optional[QuadratureRule] = None

    def evaluate(self, points):
        return np.asarray(self.func(np.asarray(points, dtype=float)), dtype=float)

    def l2_norm_sq(self, rule=None) -> float:
        if self.norm_sq is not None and rule is None:
            return float(self.norm_sq)
        return super().l2_norm_sq(rule or self.rule)

    def _known_norm_sq(self):
        return self.norm_sq

    def scaled(self, s: float) -> "Pointwise":
        ns = None if self.norm_sq is None else self.norm_sq * s * s
        return Pointwise(lambda p: s * self.func(p), norm_sq=ns, rule=self.rule)


def cap_indicator(cap: Cap, normalized: bool = False) -> Pointwise:
    """Indicator of ``cap``; ``normalized`` scales it to unit L² norm."""
    s = 1.0 / math.sqrt(cap.area) if normalized else 1.0
    return Pointwise(
        lambda p: s * cap.contains(p).astype(float), norm_sq=s * s * cap.area
    )


def random_harmonic(rng: np.random.Generator, L: int, even: bool = False) -> Harmonic:
    """Gaussian random coefficients with unit variance up to degree ``L``."""
    c = rng.standard_normal(n_coeffs(L))
    if even:
        c[degree_of_index(L) % 2 == 1] = 0.0
    return Harmonic(c)


# ---------------------------------------------------------------- cap families

def _chord(r: float) -> float:
    """Chordal radius of the cap ``C(z, r)`` around its center."""
    return math.sqrt(2.0 - 2.0 * math.sqrt(1.0 - min(r, 1.0) ** 2))


@dataclass(frozen=True, eq=False)
class CapFamily:
    """Dyadic family ``{z_k^j}`` and caps ``C(z_k^j, 2^{-k+1})``.

    At levels 0 and 1 the nominal radius ``2^{-k+1} ≥ 1`` is clamped to
    the largest admissible cap radius 1 (a hemisphere).
    """

    level: int
    centers: np.ndarray

    @property
    def separation(self) -> float:
        return 2.0 ** (-self.level)

    @property
    def cap_radius(self) -> float:
        return min(2.0 ** (-self.level + 1), 1.0)

    def __len__(self) -> int:
        return self.centers.shape[0]

    def cap(self, j: int) -> Cap:
        return Cap(self.centers[j], self.cap_radius)

    def caps(self) -> list:
        return [self.cap(j) for j in range(len(self))]


def candidate_rule(k: int) -> QuadratureRule:
    """A product rule fine enough to seed ``maximal_cap_centers`` at level ``k``."""
    n = int(math.ceil(2.0 * math.pi * 2.0 ** (k + 1))) + 2
    return make_quadrature(n, 2 * n)


def maximal_cap_centers(k: int, candidate_grid: QuadratureRule) -> CapFamily:
    """Greedy maximal ``2^{-k}``-separated subset of the candidate nodes.

    Candidates are visited by descending weight, then by node index.
    """
    if k < 0 or int(k) != k:
        raise ParameterError("level must be a nonnegative integer")
    sep = 2.0 ** (-k)
    if candidate_grid.spacing >= sep / 2:
        raise ParameterError(
            f"candidate spacing {candidate_grid.spacing:.4g} is not below 2^(-k-1) = {sep / 2:.4g}"
        )
    nodes = candidate_grid.nodes
    order = np.lexsort((np.arange(nodes.shape[0]), -candidate_grid.weights))
    tree = candidate_grid.tree
    blocked = np.zeros(nodes.shape[0], dtype=bool)
    chosen = []
    for i in order:
        if blocked[i]:
            continue
        chosen.append(i)
        blocked[tree.query_ball_point(nodes[i], sep * (1.0 - 1e-12))] = True
    return CapFamily(level=int(k), centers=nodes[np.array(chosen)].copy())


def cap_overlap_counts(family: CapFamily, points: np.ndarray) -> np.ndarray:
    """Number of caps of ``family`` containing each point."""
    tree = cKDTree(family.centers)
    hits = tree.query_ball_point(points, _chord(family.cap_radius) + 1e-12)
    h = family.cap_radius
    counts = np.zeros(points.shape[0], dtype=int)
    for i, js in enumerate(hits):
        if js:
            d = family.centers[js] @ points[i]
            counts[i] = int(np.sum(d > math.sqrt(1.0 - h * h)))
    return counts


# ---------------------------------------------------------------- rescaling

def rotation_to_north(z) -> np.ndarray:
    """Rotation ``R`` with ``R z = e₃`` of minimal angle, about the axis ``z × e₃``."""
    z = unit_vector(np.asarray(z, dtype=float).reshape(3))
    e3 = np.array([0.0, 0.0, 1.0])
    axis = np.cross(z, e3)
    s = np.linalg.norm(axis)
    c = float(z @ e3)
    if s < 1e-15:
        if c > 0:
            return np.eye(3)
        # antipodal tie: half turn about the first coordinate axis
        return np.diag([1.0, -1.0, -1.0])
    k = axis / s
    K = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + s * K + (1 - c) * (K @ K)


def rescaling_map(cap: Cap, y) -> np.ndarray:
    """``φ_C``: plane points ``y`` (shape ``(..., 2)``) to points of the cap."""
    y = np.asarray(y, dtype=float)
    r = cap.radius
    rr = r * r * np.sum(y * y, axis=-1)
    if np.any(rr > 1.0):
        raise ParameterError("rescaling map evaluated outside |y| ≤ 1/r")
    north = np.stack([r * y[..., 0], r * y[..., 1], np.sqrt(1.0 - rr)], axis=-1)
    return north @ rotation_to_north(cap.center)


def inverse_rescaling_map(cap: Cap, x) -> np.ndarray:
    """``ψ_C = φ_C⁻¹`` on the hemisphere of the cap center."""
    x = np.asarray(x, dtype=float)
    north = x @ rotation_to_north(cap.center).T
    return north[..., :2] / cap.radius


def cap_pullback(cap: Cap, f: SphereFunction, extent: float = 1.0, h: float = 0.02):
    """Pullback ``y ↦ r f(φ_C(y))`` on the disk ``|y| < extent``.

    Returns a :class:`~restriction_lab.plane.PlaneFunction` that keeps the
    exact callable and grid samples of spacing ``h``.
    """
    from .plane import PlaneFunction

    r = cap.radius
    if r > 0.5:
        raise ParameterError(f"pullbacks need r <= 1/2, got {r}")
    if extent > 1.0 / r:
        raise ParameterError("pullback extent exceeds the domain of the rescaling map")

    def func(y, cap=cap, f=f, extent=extent):
        y = np.asarray(y, dtype=float)
        inside = np.sum(y * y, axis=-1) < extent * extent
        out = np.zeros(y.shape[:-1])
        if np.any(inside):
            out[inside] = r * f.evaluate(rescaling_map(cap, y[inside]))
        return out

    return PlaneFunction.from_callable(func, extent=extent, h=h)
