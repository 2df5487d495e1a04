"""Command-line entry point ``restriction-lab``.

Commands: ``verify``, ``search``, ``trials``, ``decompose`` and
``scan-perturbation``. Exit codes: 0 success, 2 usage or configuration
error, 3 numerical failure (including a failed verification suite).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import os
import re
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .errors import LabError, ParameterError

SCHEMA = "v1"
EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3
SUITES = ("constants", "harmonics", "identities", "symmetrization", "perturbation")
TRIAL_KINDS = ("cap_concentration", "cap_interaction")
SEARCH_STARTS = ("constant", "random", "cappair")
#: Random numbers come from numpy's PCG64 bit generator seeded with the run seed.
RNG_NAME = "numpy PCG64"


class ConfigError(Exception):
    """Invalid configuration, function spec or input file (exit code 2)."""


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


# ---------------------------------------------------------------- configuration

@dataclass
class RunConfig:
    """All tunable inputs of a run; serialized as a flat JSON object."""

    n_theta: int = 48
    n_phi: int = 97
    n_radial: int = 64
    n_circle: int = 96
    band_limit: int = 4
    s_est: float = (2.0 * math.pi) ** 0.25
    seed: int = 0
    out: Optional[str] = None
    start: str = "constant"
    max_iter: int = 200
    tol: float = 1e-6
    damping: float = 0.5
    input: str = "constant"
    max_steps: int = 50
    piece_mass_threshold: float = 0.05
    eps_max: float = 0.2
    n_eps: int = 5
    fd_step: float = 0.02
    r_values: list = field(default_factory=lambda: [0.5, 0.25, 0.125])
    interaction_steps: int = 8
    tolerances: dict = field(default_factory=dict)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        for name in ("n_theta", "n_phi", "n_radial", "n_circle", "band_limit", "max_iter",
                     "max_steps", "n_eps", "interaction_steps"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v <= 0:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError(f"seed must be a nonnegative integer, got {self.seed!r}")
        for name in ("s_est", "tol", "damping", "eps_max", "fd_step", "piece_mass_threshold"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not v > 0:
                raise ConfigError(f"{name} must be positive, got {v!r}")
            setattr(self, name, float(v))
        if self.n_circle % 2:
            raise ConfigError("n_circle must be even")
        if self.damping > 1.0:
            raise ConfigError("damping must lie in (0, 1]")
        if self.eps_max > 0.5:
            raise ConfigError("eps_max must be at most 0.5")
        if self.n_eps < 2:
            raise ConfigError("n_eps must be at least 2")
        if self.start not in SEARCH_STARTS:
            raise ConfigError(f"start must be one of {SEARCH_STARTS}, got {self.start!r}")
        if not isinstance(self.input, str):
            raise ConfigError("input must be a function spec string")
        if self.out is not None and not isinstance(self.out, str):
            raise ConfigError("out must be a path string")
        if not isinstance(self.r_values, list) or not self.r_values or any(
            isinstance(r, bool) or not isinstance(r, (int, float)) or not 0 < r <= 0.5
            for r in self.r_values
        ):
            raise ConfigError("r_values must be a nonempty list of radii in (0, 1/2]")
        self.r_values = [float(r) for r in self.r_values]
        if not isinstance(self.tolerances, dict) or any(
            not isinstance(k, str) or isinstance(v, bool) or not isinstance(v, (int, float)) or v < 0
            for k, v in self.tolerances.items()
        ):
            raise ConfigError("tolerances must map check names to nonnegative numbers")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["schema"] = SCHEMA
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigError("the config must be a JSON object")
        d = dict(d)
        schema = d.pop("schema", SCHEMA)
        if schema != SCHEMA:
            raise ConfigError(f"unsupported config schema {schema!r}")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path: str) -> "RunConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data)

    def tolerance(self, name: str, default: float) -> float:
        return float(self.tolerances.get(name, default))


# ---------------------------------------------------------------- output

def fmt(x: float) -> str:
    """Scientific notation with 12 significant digits."""
    return f"{float(x):.11e}"


_FLOAT_TAG = re.compile(r'"\\u0000F([^"\\]*)\\u0000"')


def _tag_floats(obj):
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return obj
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return "\0F" + fmt(v) + "\0" if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, dict):
        return {str(k): _tag_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_tag_floats(v) for v in obj]
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj) -> str:
    """JSON text with every float in 12-digit scientific notation."""
    text = json.dumps(_tag_floats(obj), indent=2)
    return _FLOAT_TAG.sub(r"\1", text) + "\n"


def csv_text(header: list, rows: list, comments: tuple = ()) -> str:
    buf = io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def write_atomic(path: str, text: str) -> None:
    """Write via a temporary file in the target directory, then rename."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit(text: str, path: Optional[str], stream=None) -> None:
    if path is None:
        (stream or sys.stdout).write(text)
    else:
        write_atomic(path, text)


# ---------------------------------------------------------------- check reports

@dataclass
class Check:
    """A single verification; ``comparison`` is ``close``, ``at_least`` or ``at_most``."""

    name: str
    expected: float
    actual: float
    rel_tol: float = 0.0
    abs_tol: float = 0.0
    comparison: str = "close"

    @property
    def passed(self) -> bool:
        a, e = float(self.actual), float(self.expected)
        if not math.isfinite(a):
            return False
        slack = self.abs_tol + self.rel_tol * abs(e)
        if self.comparison == "close":
            return abs(a - e) <= slack
        if self.comparison == "at_least":
            return a >= e - slack
        if self.comparison == "at_most":
            return a <= e + slack
        raise ValueError(f"unknown comparison {self.comparison!r}")

    def to_dict(self) -> dict:
        return dict(name=self.name, expected=float(self.expected), actual=float(self.actual),
                    rel_tol=float(self.rel_tol), abs_tol=float(self.abs_tol),
                    comparison=self.comparison, **{"pass": self.passed})


@dataclass
class CheckReport:
    suite: str
    checks: list = field(default_factory=list)

    @property
    def overall_pass(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, cfg: RunConfig, name: str, expected: float, actual: float,
              rel_tol: float = 0.0, abs_tol: float = 0.0, comparison: str = "close") -> Check:
        c = Check(name, expected, actual, cfg.tolerance(name, rel_tol), abs_tol, comparison)
        self.checks.append(c)
        return c

    def to_dict(self) -> dict:
        return dict(schema=SCHEMA, suite=self.suite, overall_pass=self.overall_pass,
                    checks=[c.to_dict() for c in self.checks])


# ---------------------------------------------------------------- function specs

_SPEC = re.compile(r"^\s*([a-z]+)\s*(?:\((.*)\))?\s*$")


def _numbers(arg: Optional[str], count: int, name: str) -> list:
    parts = [] if not arg or not arg.strip() else [p.strip() for p in arg.split(",")]
    if len(parts) != count:
        raise ConfigError(f"{name} takes {count} arguments, got {len(parts)}")
    try:
        return [float(p) for p in parts]
    except ValueError as exc:
        raise ConfigError(f"bad argument in {name}(...): {exc}") from exc


def _integer(v: float, name: str) -> int:
    if v != int(v):
        raise ConfigError(f"{name} needs integer arguments")
    return int(v)


def random_nonneg_harmonic(rng: np.random.Generator, L: int):
    """Random harmonic of degree ``L`` shifted to be nonnegative with a positive floor."""
    from .sphere import Harmonic, quadrature_for_degree, random_harmonic

    h = random_harmonic(rng, L)
    v = h.samples(quadrature_for_degree(2 * L + 12))
    shift = -v.min() + 0.1 * (v.max() - v.min())
    return h + Harmonic.constant(shift)


def _load_samples(path: str):
    from .sphere import GridSamples, make_quadrature

    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        rule = make_quadrature(int(data["n_theta"]), int(data["n_phi"]))
        values = np.asarray(data["values"], dtype=float)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"cannot read sample file {path}: {exc}") from exc
    if values.shape != (rule.size,) or not np.all(np.isfinite(values)):
        raise ConfigError(f"sample file {path} needs {rule.size} finite values")
    return GridSamples(rule, values)


def parse_function(spec: str):
    """Build a sphere function from a builtin spec or a JSON sample file.

    Builtins: ``constant``, ``harmonic(l,m)``, ``cap(x,y,z,r)``,
    ``cappair(r)``, ``gaussiancap(r)`` and ``random(L,seed)``. Any other
    string is read as a JSON file ``{"n_theta", "n_phi", "values"}``
    holding samples on the product rule.
    """
    from .paraboloid import cap_trial
    from .sphere import Cap, Harmonic, Pointwise

    m = _SPEC.match(spec)
    name, arg = (m.group(1), m.group(2)) if m else (None, None)
    try:
        if name == "constant" and not arg:
            return Harmonic.constant(1.0)
        if name == "harmonic":
            l, mm = (_integer(v, name) for v in _numbers(arg, 2, name))
            return Harmonic.ylm(l, mm)
        if name == "cap":
            x, y, z, r = _numbers(arg, 4, name)
            cap = Cap(np.array([x, y, z]) / np.linalg.norm([x, y, z]), r)
            return Pointwise(lambda p: cap.contains(p).astype(float), norm_sq=cap.area)
        if name == "cappair":
            (r,) = _numbers(arg, 1, name)
            cap = Cap(np.array([0.0, 0.0, 1.0]), r)
            return Pointwise(
                lambda p: (cap.contains(p) | cap.contains(-p)).astype(float), norm_sq=2.0 * cap.area
            )
        if name == "gaussiancap":
            (r,) = _numbers(arg, 1, name)
            return cap_trial(r)
        if name == "random":
            L, seed = (_integer(v, name) for v in _numbers(arg, 2, name))
            if L < 0 or seed < 0:
                raise ConfigError("random(L, seed) needs nonnegative integers")
            return random_nonneg_harmonic(make_rng(seed), L)
    except (ParameterError, ZeroDivisionError) as exc:
        raise ConfigError(f"invalid function spec {spec!r}: {exc}") from exc
    if name is not None and name in ("constant", "harmonic", "cap", "cappair", "gaussiancap", "random"):
        raise ConfigError(f"invalid function spec {spec!r}")
    if os.path.exists(spec):
        return _load_samples(spec)
    raise ConfigError(f"unknown function spec {spec!r}")


# ---------------------------------------------------------------- verify suites

def suite_constants(cfg: RunConfig) -> CheckReport:
    from .convolution import BallGrid
    from .extremal import phi_functional, psi_functional
    from .paraboloid import parab_functional
    from .plane import PlaneFunction
    from .sphere import Harmonic, make_quadrature

    rep = CheckReport("constants")
    rule = make_quadrature(cfg.n_theta, cfg.n_phi)
    grid = BallGrid.make(cfg.n_radial, cfg.n_theta, cfg.n_phi, cfg.n_circle)
    one = Harmonic.constant(1.0)
    rep.check(cfg, "sphere_area", 4 * math.pi, rule.integrate(np.ones(rule.size)), 1e-10)
    rep.check(cfg, "norm_sigma_conv_sq", 32 * math.pi**3, psi_functional(one, grid), 1e-4)
    phi1 = phi_functional(one, grid)
    rep.check(cfg, "phi_constant", 2 * math.pi, phi1, 1e-4)
    pg = parab_functional(PlaneFunction.gaussian(1.0))
    rep.check(cfg, "paraboloid_gaussian", math.pi, pg, 1e-4)
    rep.check(cfg, "sphere_paraboloid_ratio", 2.0, phi1 / pg, 1e-3)
    return rep


def suite_harmonics(cfg: RunConfig) -> CheckReport:
    from .convolution import DISTANCE_KERNEL, Kernel1D, funk_hecke_multiplier, kernel_conv
    from .extremal import phi_functional, second_variation
    from .sphere import Harmonic, quadrature_for_degree, random_harmonic, sh_analyze

    rep = CheckReport("harmonics")
    for k in range(11):
        rep.check(cfg, f"lambda_{k}", 4 * math.pi / (2 * k + 1),
                  funk_hecke_multiplier(DISTANCE_KERNEL, k), 1e-8)

    rng = make_rng(cfg.seed)
    f = random_harmonic(rng, 6)
    # smooth zonal kernel: the direct quadrature is an independent oracle
    K = Kernel1D(lambda t: np.exp(t), None)
    g = kernel_conv(f, K)
    rule = quadrature_for_degree(60)
    pts = rule.nodes[:: max(1, rule.size // 200)]
    direct = np.exp(pts @ rule.nodes.T) @ (rule.weights * f.samples(rule))
    rep.check(cfg, "kernel_conv_diagonality", 0.0,
              float(np.max(np.abs(g.evaluate(pts) - direct)) / np.max(np.abs(direct))),
              abs_tol=1e-8, comparison="at_most")
    back = sh_analyze(f.evaluate, f.L, quadrature_for_degree(2 * f.L))
    rep.check(cfg, "sh_round_trip", 0.0, float(np.max(np.abs(back.coeffs - f.coeffs))),
              abs_tol=1e-10, comparison="at_most")

    y2 = Harmonic.ylm(2, 0)
    q = second_variation(y2)
    rep.check(cfg, "second_variation_Y2", -32 * math.pi**2 / 5, q / y2.l2_norm_sq(), 1e-4)
    h = 1e-2
    one = Harmonic.constant(1.0)
    fd = (phi_functional(one + y2 * h) - 2 * phi_functional(one) + phi_functional(one - y2 * h)) / h**2
    norm1 = (4 * math.pi) ** 2
    rep.check(cfg, "fd_second_derivative_Y2", 2 * q / norm1, fd, 0.02)
    rep.check(cfg, "fd_second_derivative_negative", 0.0, fd, comparison="at_most")
    return rep


def suite_identities(cfg: RunConfig, n_trials: int = 100) -> CheckReport:
    from .convolution import conv_inner, conv_l2_norm
    from .sphere import Harmonic, random_harmonic

    rep = CheckReport("identities")
    rng = make_rng(cfg.seed)
    refl = swap = 0.0
    for _ in range(n_trials):
        Ls = rng.integers(1, 5, size=4)
        f1, f2, f3, f4 = (random_harmonic(rng, int(L)) for L in Ls)
        a, b = conv_l2_norm(f1, f2), conv_l2_norm(f1, f2.reflected())
        refl = max(refl, abs(a - b) / max(a, 1e-300))
        c = conv_inner(f1, f2, f3, f4)
        d = conv_inner(f1, f3.reflected(), f2.reflected(), f4)
        scale = conv_l2_norm(f1, f2) * conv_l2_norm(f3, f4)
        swap = max(swap, abs(c - d) / max(scale, 1e-300))
    rep.check(cfg, "reflection_identity", 0.0, refl, abs_tol=1e-6, comparison="at_most")
    rep.check(cfg, "swap_identity", 0.0, swap, abs_tol=1e-6, comparison="at_most")
    y2, one = Harmonic.ylm(2, 0), Harmonic.constant(1.0)
    rep.check(cfg, "inner_Y2_Y2_1_1", 8 * math.pi**2 / 5, conv_inner(y2, y2, one, one), 1e-8)
    return rep


def suite_symmetrization(cfg: RunConfig, n_trials: int = 200) -> CheckReport:
    from .extremal import (
        HALF_PI, SymmetrizationOrbit, antipodal_symmetrize, gamma, gamma_max_search,
        gamma_secondary_max, phi_functional,
    )
    from .multiscale import coarse_ball_grid

    rep = CheckReport("symmetrization")
    grid_n = 64
    best, arg = gamma_max_search(grid_n)
    rep.check(cfg, "gamma_max", 1.5, best, 1e-6)
    step = HALF_PI / (grid_n - 1)
    rep.check(cfg, "gamma_argmax_distance", 0.0,
              float(np.max(np.abs(arg - 0.25 * math.pi))), abs_tol=step, comparison="at_most")
    second = gamma_secondary_max(np.full(4, 0.25 * math.pi), 2 * step, grid_n)
    rep.check(cfg, "gamma_secondary_max", 1.5 - 1e-6, second, comparison="at_most")
    rep.check(cfg, "gamma_origin", 1.0, gamma(SymmetrizationOrbit(0.0, 0.0, 0.0, 0.0)))

    rng = make_rng(cfg.seed)
    grid = coarse_ball_grid()
    worst = math.inf
    for _ in range(n_trials):
        f = random_nonneg_harmonic(rng, int(rng.integers(1, 4)))
        gap = phi_functional(antipodal_symmetrize(f), grid) - phi_functional(f, grid)
        worst = min(worst, gap)
    rep.check(cfg, "symmetrization_gain", 0.0, worst, abs_tol=1e-6, comparison="at_least")
    return rep


def suite_perturbation(cfg: RunConfig) -> CheckReport:
    from .perturbation import g_eps_norm, g_eps_norm_derivative, psi_scan

    rep = CheckReport("perturbation")
    scan = psi_scan([0.0], fd_step=cfg.fd_step)
    rep.check(cfg, "w0_l4_norm", 8 * math.pi**6, float(scan.w_l4[0]), 1e-4)
    rep.check(cfg, "g0_l2sq", math.pi, g_eps_norm(0.0), 1e-10)
    rep.check(cfg, "exp_psi_0", (2 * math.pi) ** 3 * math.pi, math.exp(scan.psi[0]), 1e-3)
    rep.check(cfg, "psi_prime_0", 0.25, scan.derivative, 0.08)
    rep.check(cfg, "g_norm_derivative_0", 0.0, g_eps_norm_derivative(0.0), abs_tol=1e-6)
    return rep


SUITE_FUNCS: dict[str, Callable[[RunConfig], CheckReport]] = dict(
    constants=suite_constants, harmonics=suite_harmonics, identities=suite_identities,
    symmetrization=suite_symmetrization, perturbation=suite_perturbation,
)


def cmd_verify(cfg: RunConfig, suite: str) -> tuple[CheckReport, int]:
    if suite not in SUITE_FUNCS:
        raise ConfigError(f"unknown suite {suite!r}; choose from {', '.join(SUITES)}")
    rep = SUITE_FUNCS[suite](cfg)
    emit(dumps(rep.to_dict()), cfg.out)
    return rep, EXIT_OK if rep.overall_pass else EXIT_NUMERIC


# ---------------------------------------------------------------- search

def search_start(cfg: RunConfig):
    from .extremal import random_even_start
    from .sphere import Harmonic

    if cfg.start == "constant":
        return Harmonic.constant(1.0)
    if cfg.start == "random":
        return random_even_start(make_rng(cfg.seed), cfg.band_limit)
    return parse_function("cappair(0.3)")


def _trace_csv(trace) -> str:
    rows = [(i, phi, res, lam) for i, (phi, res, lam) in enumerate(trace.iterates)]
    return csv_text(["iter", "phi", "residual", "lambda"], rows)


def _summary_path(out: Optional[str]) -> Optional[str]:
    if out is None:
        return None
    p = Path(out)
    if p.suffix == ".json":
        raise ConfigError("the search trace is CSV; --out must not end in .json")
    return str(p.with_suffix(".json"))


def cmd_search(cfg: RunConfig) -> int:
    from .errors import SearchDivergence
    from .extremal import extremizer_search

    summary_path = _summary_path(cfg.out)
    f0 = search_start(cfg)
    status = EXIT_OK
    try:
        trace = extremizer_search(f0, max_iter=cfg.max_iter, tol=cfg.tol,
                                  damping=cfg.damping, L=cfg.band_limit)
    except SearchDivergence as exc:
        trace, status = exc.trace, EXIT_NUMERIC
        trace.terminated_by = "divergence"
    phi = trace.phi
    summary = dict(
        schema=SCHEMA, start=cfg.start, seed=cfg.seed, band_limit=cfg.band_limit,
        iterations=len(trace.iterates), terminated_by=trace.terminated_by,
        initial_phi=float(phi[0]), final_phi=float(phi[-1]),
        final_residual=float(trace.residual[-1]),
        best_lower_bound_S4=max(2 * math.pi, float(phi.max())),
        rng=RNG_NAME,
    )
    emit(_trace_csv(trace), cfg.out)
    emit(dumps(summary), summary_path, sys.stderr)
    return status


# ---------------------------------------------------------------- trials

def cap_concentration_rows(r_values) -> list:
    from .extremal import phi_functional, zonal_ball_grid
    from .paraboloid import CAP_LIMIT, cap_trial

    grid = zonal_ball_grid()
    rows = []
    for r in r_values:
        phi = phi_functional(cap_trial(r), grid)
        rows.append((r, phi, abs(phi - CAP_LIMIT)))
    return rows


def cap_interaction_rows(steps: int, base_radius: float = 0.5) -> list:
    """Concentric caps ``C(N, r₀)`` and ``C(N, r₀ 2^{-s})`` for ``s = 0..steps-1``."""
    from .convolution import cap_interaction
    from .sphere import Cap, cap_quotient_distance

    north = np.array([0.0, 0.0, 1.0])
    base = Cap(north, base_radius)
    rows = []
    for s in range(steps):
        other = Cap(north, base_radius * 2.0 ** (-s))
        rows.append((cap_quotient_distance(base, other), cap_interaction(base, other)))
    return rows


def cmd_trials(cfg: RunConfig, kind: str) -> int:
    if kind == "cap_concentration":
        text = csv_text(["r", "phi", "limit_gap"], cap_concentration_rows(cfg.r_values))
    elif kind == "cap_interaction":
        text = csv_text(["rho", "normalized_interaction"],
                        cap_interaction_rows(cfg.interaction_steps))
    else:
        raise ConfigError(f"unknown trial kind {kind!r}; choose from {', '.join(TRIAL_KINDS)}")
    emit(text, cfg.out)
    return EXIT_OK


# ---------------------------------------------------------------- decompose

def decomposition_report(res, cfg: RunConfig) -> dict:
    n2 = res.norm_sq
    pieces = [
        dict(l2_mass=p.l2_mass / n2,
             cap=dict(center=[float(v) for v in p.cap.center], radius=float(p.cap.radius)),
             eps_star=float(p.eps_star))
        for p in res.pieces
    ]
    return dict(
        schema=SCHEMA, input=cfg.input, s_est=cfg.s_est, steps=res.steps,
        terminated_by=res.terminated_by, pieces=pieces,
        remainder_mass=res.remainder.l2_norm_sq() / n2,
        piece_mass_threshold=cfg.piece_mass_threshold,
        max_piece_distance=res.max_piece_distance(cfg.piece_mass_threshold),
    )


def cmd_decompose(cfg: RunConfig) -> int:
    from .multiscale import decompose

    f = parse_function(cfg.input)
    res = decompose(f, s_est=cfg.s_est, max_steps=cfg.max_steps)
    emit(dumps(decomposition_report(res, cfg)), cfg.out)
    return EXIT_OK


# ---------------------------------------------------------------- perturbation scan

def cmd_scan_perturbation(cfg: RunConfig) -> int:
    from .perturbation import psi_scan

    eps = np.linspace(0.0, cfg.eps_max, cfg.n_eps)
    scan = psi_scan(eps, fd_step=cfg.fd_step)
    rows = list(zip(scan.eps, scan.w_l4, scan.g_l2sq, scan.psi))
    comments = (f"derivative_estimate={fmt(scan.derivative)}", f"fd_step={fmt(scan.fd_step)}")
    emit(csv_text(["eps", "w_l4", "g_l2sq", "psi"], rows, comments), cfg.out)
    return EXIT_OK


# ---------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="restriction-lab",
                                description="Numerical experiments for sphere convolution inequalities.")
    p.add_argument("command", choices=["verify", "search", "trials", "decompose", "scan-perturbation"])
    p.add_argument("--config", help="JSON config file (flat RunConfig object)")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--suite", help=f"verify suite: {', '.join(SUITES)}")
    p.add_argument("--kind", help=f"trial kind: {', '.join(TRIAL_KINDS)}")
    return p


def thread_limit() -> Optional[int]:
    raw = os.environ.get("RESTRICTION_LAB_THREADS")
    if raw is None or raw == "":
        return None
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n <= 0:
        raise ConfigError(f"RESTRICTION_LAB_THREADS must be a positive integer, got {raw!r}")
    return n


def run(args: argparse.Namespace) -> int:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out = args.out
    cfg.validate()
    if args.command == "verify":
        return cmd_verify(cfg, args.suite or "")[1]
    if args.command == "trials":
        return cmd_trials(cfg, args.kind or "")
    if args.command == "search":
        return cmd_search(cfg)
    if args.command == "decompose":
        return cmd_decompose(cfg)
    return cmd_scan_perturbation(cfg)


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        limit = thread_limit()
        if limit is None:
            return run(args)
        from threadpoolctl import threadpool_limits

        with threadpool_limits(limits=limit):
            return run(args)
    except ConfigError as exc:
        print(f"restriction-lab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (LabError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"restriction-lab: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
