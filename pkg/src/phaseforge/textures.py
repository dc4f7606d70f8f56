"""Procedural grayscale textures.

A small self-contained corpus used by the test-suite, the demos and as a
default training set when no image directory is supplied.  Every
generator maps ``(size, rng)`` to an array in ``[0, 1]``.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .rng import make_rng


def _normalize(a: np.ndarray) -> np.ndarray:
    lo, hi = a.min(), a.max()
    if hi - lo < 1e-12:
        return np.full_like(a, 0.5)
    return (a - lo) / (hi - lo)


def _grid(n: int):
    return np.mgrid[0:n, 0:n].astype(np.float64)


def _fractal_noise(n: int, rng: np.random.Generator, slope: float = 1.5) -> np.ndarray:
    f = np.fft.fftfreq(n)
    r = np.hypot(*np.meshgrid(f, f, indexing="ij"))
    r[0, 0] = 1.0
    spec = np.fft.fft2(rng.standard_normal((n, n))) / r**slope
    spec[0, 0] = 0.0
    return np.fft.ifft2(spec).real


def gratings(n, rng):
    y, x = _grid(n)
    out = np.zeros((n, n))
    for _ in range(3):
        a, f = rng.uniform(0, np.pi), rng.uniform(0.05, 0.25)
        out += np.cos(f * (np.cos(a) * x + np.sin(a) * y) + rng.uniform(0, 2 * np.pi))
    return _normalize(out)


def checker(n, rng):
    y, x = _grid(n)
    p = int(rng.integers(6, 14))
    a = rng.uniform(-0.3, 0.3)
    u = np.cos(a) * x + np.sin(a) * y
    v = -np.sin(a) * x + np.cos(a) * y
    c = ((np.floor(u / p) + np.floor(v / p)) % 2).astype(np.float64)
    return _normalize(ndimage.gaussian_filter(c, 0.7))


def wood(n, rng):
    y, x = _grid(n)
    cx, cy = rng.uniform(-0.5 * n, 1.5 * n, 2)
    r = np.hypot(x - cx, y - cy) + 6.0 * _normalize(_fractal_noise(n, rng, 2.0))
    return _normalize(np.sin(r / rng.uniform(2.0, 4.0)) ** 2)


def bricks(n, rng):
    y, x = _grid(n)
    bh = int(rng.integers(8, 14))
    bw = 2 * bh
    row = np.floor(y / bh)
    xs = x + (row % 2) * bw / 2
    mortar = (np.mod(y, bh) < 2) | (np.mod(xs, bw) < 2)
    shade = rng.uniform(0.5, 1.0, (n // bh + 2, n // bw + 3))
    tone = shade[row.astype(int), np.floor(xs / bw).astype(int)]
    img = np.where(mortar, 0.15, tone) + 0.05 * _fractal_noise(n, rng, 1.0) / 3
    return _normalize(ndimage.gaussian_filter(img, 0.6))


def blobs(n, rng):
    img = ndimage.gaussian_filter(rng.standard_normal((n, n)), n / 24)
    return _normalize(np.tanh(4 * img / img.std()))


def pink_noise(n, rng):
    return _normalize(_fractal_noise(n, rng, 1.0))


def voronoi(n, rng):
    pts = rng.uniform(0, n, (max(8, n * n // 256), 2))
    y, x = _grid(n)
    d = np.full((n, n), np.inf)
    d2 = np.full((n, n), np.inf)
    for py, px in pts:
        dist = np.hypot(y - py, x - px)
        d2 = np.minimum(d2, np.maximum(d, dist))
        d = np.minimum(d, dist)
    return _normalize(np.minimum(d2 - d, 6.0))


def marble(n, rng):
    y, x = _grid(n)
    a = rng.uniform(0, np.pi)
    turb = _normalize(_fractal_noise(n, rng, 1.8))
    return _normalize(np.sin((np.cos(a) * x + np.sin(a) * y) / 6.0 + 8.0 * turb))


def weave(n, rng):
    y, x = _grid(n)
    p = rng.uniform(7, 11)
    h = np.sin(2 * np.pi * x / p) ** 2
    v = np.sin(2 * np.pi * y / p) ** 2
    over = ((np.floor(x / p) + np.floor(y / p)) % 2) == 0
    return _normalize(np.where(over, h, v) + 0.1 * rng.standard_normal((n, n)))


def dots(n, rng):
    y, x = _grid(n)
    p = rng.uniform(8, 14)
    r = np.hypot(np.mod(x, p) - p / 2, np.mod(y + 0.5 * p * (np.floor(x / p) % 2), p) - p / 2)
    return _normalize(ndimage.gaussian_filter((r < p / 3.2).astype(float), 0.8))


def polygons(n, rng):
    y, x = _grid(n)
    img = np.zeros((n, n))
    for _ in range(int(rng.integers(10, 18))):
        cx, cy = rng.uniform(0, n, 2)
        r = rng.uniform(n / 16, n / 5)
        k = int(rng.integers(3, 7))
        ang = np.arctan2(y - cy, x - cx) + rng.uniform(0, 2 * np.pi)
        # polygon via the polar distance to its nearest edge
        edge = r * np.cos(np.pi / k) / np.cos(np.mod(ang, 2 * np.pi / k) - np.pi / k)
        img = np.where(np.hypot(x - cx, y - cy) < edge, rng.uniform(0.1, 1.0), img)
    return _normalize(ndimage.gaussian_filter(img, 0.6))


def scene(n, rng):
    """A piecewise-smooth 'natural-like' image: sky gradient, hills, a disc and texture."""
    y, x = _grid(n) / n
    img = 0.8 - 0.4 * y
    ridge = 0.55 + 0.1 * np.sin(2 * np.pi * (x * rng.uniform(1, 2) + rng.uniform()))
    img = np.where(y > ridge, 0.3 + 0.15 * _normalize(_fractal_noise(n, rng, 1.2)), img)
    cx, cy = rng.uniform(0.2, 0.8), rng.uniform(0.15, 0.4)
    img = np.where(np.hypot(x - cx, y - cy) < 0.1, 0.95, img)
    return _normalize(ndimage.gaussian_filter(img, 0.8))


GENERATORS = {
    "gratings": gratings,
    "checker": checker,
    "wood": wood,
    "bricks": bricks,
    "blobs": blobs,
    "pink_noise": pink_noise,
    "voronoi": voronoi,
    "marble": marble,
    "weave": weave,
    "dots": dots,
    "polygons": polygons,
    "scene": scene,
}


def texture(name: str, size: int = 64, seed: int = 0) -> np.ndarray:
    if name not in GENERATORS:
        raise ValueError(f"unknown texture {name!r}; choose from {sorted(GENERATORS)}")
    return GENERATORS[name](int(size), make_rng(seed, "texture:" + name))


def corpus(size: int = 64, seed: int = 0, names=None) -> dict:
    """All (or the named) textures at one size, keyed by name."""
    return {k: texture(k, size, seed) for k in (names or GENERATORS)}
