"""Seeded generators for the synthetic datasets.

Every generator is a pure function of its arguments; the same seed always
reproduces the same cloud bit for bit.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericEscapeError, ParameterError
from .geometry import PointCloud

FAMILIES = ("line-toy", "circle", "swiss-roll", "henon", "gaussian")

HENON_A = 1.4
HENON_B = 0.3
HENON_ESCAPE = 10.0


def _check_n(n):
    if int(n) != n or n < 3:
        raise ParameterError(f"n must be an integer >= 3, got {n}", module="synthetic_data")
    return int(n)


def _check_sigma(sigma):
    if not np.isfinite(sigma) or sigma < 0:
        raise ParameterError(f"noise sigma must be finite and >= 0, got {sigma}", module="synthetic_data")
    return float(sigma)


def gen_line_toy(n: int = 100, sigma: float = 0.03, seed=0) -> PointCloud:
    """Uniform points on the unit segment of the x axis with vertical normal noise."""
    n, sigma = _check_n(n), _check_sigma(sigma)
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.0, 1.0, n)
    noise = rng.standard_normal(n)
    y = sigma * noise if sigma > 0 else np.zeros(n)
    return PointCloud(np.column_stack([x, y]))


def gen_circle(n: int = 100, ambient: int = 2, seed=0, noise_std: float = 0.5, radius: float = 5.0) -> PointCloud:
    """Noisy circle ``(r sin l, r cos l) + eps`` with ``l ~ U(0, 2 pi)``.

    ``eps`` has standard deviation ``noise_std`` (variance 0.25 by default).
    With ``ambient=6`` four extra pure-noise coordinates are appended.
    """
    n = _check_n(n)
    if ambient not in (2, 6):
        raise ParameterError(f"ambient must be 2 or 6, got {ambient}", module="synthetic_data")
    noise_std = _check_sigma(noise_std)
    rng = np.random.default_rng(seed)
    lam = rng.uniform(0.0, 2 * np.pi, n)
    eps = noise_std * rng.standard_normal((n, ambient))
    pts = eps.copy()
    pts[:, 0] += radius * np.sin(lam)
    pts[:, 1] += radius * np.cos(lam)
    return PointCloud(pts)


def swiss_roll_surface(n: int, seed=0):
    """Noiseless roll points and their parameters ``(t, h)``."""
    rng = np.random.default_rng(seed)
    t = rng.uniform(1.5 * np.pi, 4.5 * np.pi, n)
    h = rng.uniform(0.0, 21.0, n)
    return np.column_stack([t * np.cos(t), h, t * np.sin(t)]), t, h


def gen_swiss_roll(n: int = 1000, sigma: float = 0.0, seed=0) -> PointCloud:
    """Swiss roll ``(t cos t, h, t sin t)`` plus isotropic normal noise of std ``sigma``."""
    n, sigma = _check_n(n), _check_sigma(sigma)
    pts, _, _ = swiss_roll_surface(n, seed)
    if sigma > 0:
        # noise stream is separate so the underlying surface sample does not depend on sigma
        noise = np.random.default_rng([int(seed), 1]).standard_normal(pts.shape)
        pts = pts + sigma * noise
    return PointCloud(pts)


def henon_orbit(n: int, burn_in: int = 100, a: float = HENON_A, b: float = HENON_B) -> np.ndarray:
    """Noise-free Henon iterates started from the origin.

    The origin itself is not part of the orbit: the first iterate is (1, 0).
    The first ``burn_in`` iterates are dropped and the next ``n`` returned.
    """
    total = burn_in + n
    out = np.empty((total, 2))
    x = y = 0.0
    for i in range(total):
        x, y = y + 1.0 - a * x * x, b * x
        if abs(x) > HENON_ESCAPE:
            raise NumericEscapeError(f"Henon orbit escaped at iterate {i + 1} (x={x})")
        out[i] = x, y
    return out[burn_in:]


def gen_henon(n: int = 1000, burn_in: int = 100, sigma: float = 0.0, seed=0) -> PointCloud:
    """Henon attractor sample with additive 2-d normal observation noise."""
    n, sigma = _check_n(n), _check_sigma(sigma)
    if burn_in < 0:
        raise ParameterError("burn_in must be >= 0", module="synthetic_data")
    pts = henon_orbit(n, burn_in)
    if sigma > 0:
        pts = pts + sigma * np.random.default_rng(seed).standard_normal(pts.shape)
    return PointCloud(pts)


def gen_gaussian(n: int, d: int, seed=0) -> PointCloud:
    """I.i.d. standard normal sample."""
    n = _check_n(n)
    return PointCloud(np.random.default_rng(seed).standard_normal((n, int(d))))


@dataclass
class GeneratorSpec:
    family: str
    n: int = 100
    sigma: float = 0.0
    d: int = 2
    seed: int = 0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ParameterError(f"unknown family {self.family!r}; expected one of {FAMILIES}",
                                 module="synthetic_data")
        _check_n(self.n)
        _check_sigma(self.sigma)

    def generate(self) -> PointCloud:
        f = self.family
        if f == "line-toy":
            return gen_line_toy(self.n, self.sigma, self.seed)
        if f == "circle":
            return gen_circle(self.n, ambient=self.d, seed=self.seed, **self.params)
        if f == "swiss-roll":
            return gen_swiss_roll(self.n, self.sigma, self.seed)
        if f == "henon":
            return gen_henon(self.n, burn_in=int(self.params.get("burn_in", 100)), sigma=self.sigma, seed=self.seed)
        return gen_gaussian(self.n, self.d, self.seed)


def generate(family: str, **kwargs) -> PointCloud:
    return GeneratorSpec(family, **kwargs).generate()
