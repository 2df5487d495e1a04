"""Functions on the plane sampled on a uniform symmetric grid."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ParameterError


@dataclass(frozen=True, eq=False)
class PlaneFunction:
    """Samples on ``[-X, X]²`` with spacing ``h``, zero outside the box.

    ``samples[a, b]`` is the value at ``(x_a, x_b)`` with ``x_a = -X + a h``.
    When ``func`` is given, pointwise evaluation uses it instead of
    bilinear interpolation.
    """

    samples: np.ndarray
    extent: float
    h: float
    func: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        s = np.array(self.samples, dtype=float)
        n = int(round(2 * self.extent / self.h)) + 1
        if s.shape != (n, n):
            raise ParameterError(f"expected samples of shape ({n}, {n}), got {s.shape}")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def coords(self) -> np.ndarray:
        return -self.extent + self.h * np.arange(self.n)

    @classmethod
    def from_callable(cls, func, extent: float = 12.0, h: float = 0.05, keep_func: bool = True):
        if extent <= 0 or h <= 0:
            raise ParameterError("extent and spacing must be positive")
        n = int(round(2 * extent / h)) + 1
        x = -extent + h * np.arange(n)
        X, Y = np.meshgrid(x, x, indexing="ij")
        vals = np.asarray(func(np.stack([X, Y], axis=-1)), dtype=float)
        return cls(vals, extent, h, func if keep_func else None)

    @classmethod
    def gaussian(cls, a: float = 1.0, extent: float = 12.0, h: float = 0.05):
        """``e^{-a|y|²/2}``."""
        return cls.from_callable(
            lambda y: np.exp(-0.5 * a * np.sum(y * y, axis=-1)), extent, h
        )

    def l2_norm_sq(self) -> float:
        return float(self.h**2 * np.sum(self.samples**2))

    def scaled(self, s: float) -> "PlaneFunction":
        f = None if self.func is None else (lambda y, g=self.func: s * g(y))
        return PlaneFunction(s * self.samples, self.extent, self.h, f)

    def __call__(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if self.func is not None:
            return np.asarray(self.func(y), dtype=float)
        return self._interpolate(y)

    def _interpolate(self, y):
        u = (y[..., 0] + self.extent) / self.h
        v = (y[..., 1] + self.extent) / self.h
        n = self.n
        inside = (u >= 0) & (u <= n - 1) & (v >= 0) & (v <= n - 1)
        i = np.clip(np.floor(u).astype(int), 0, n - 2)
        j = np.clip(np.floor(v).astype(int), 0, n - 2)
        a, b = u - i, v - j
        s = self.samples
        out = ((1 - a) * (1 - b) * s[i, j] + a * (1 - b) * s[i + 1, j]
               + (1 - a) * b * s[i, j + 1] + a * b * s[i + 1, j + 1])
        return np.where(inside, out, 0.0)


def radial_l2_norm_sq(profile: Callable[[np.ndarray], np.ndarray], rmax: float, n: int = 200) -> float:
    """``∫_{ℝ²} |F|²`` for a radial profile, Gauss-Legendre on ``[0, rmax]``."""
    x, w = np.polynomial.legendre.leggauss(n)
    r = 0.5 * rmax * (x + 1.0)
    return float(0.5 * rmax * np.sum(w * profile(r) ** 2 * 2 * math.pi * r))
