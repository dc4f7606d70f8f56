"""Global phase deviation seen through local (STFT) coefficients, in 1-D.

Rotating the phase of one DFT bin ``f0`` by ``eta`` adds to every STFT
coefficient the term ``(exp(j eta) - 1) x_f0 z(f; t0, f0)``, which is
``j eta x_f0 z`` to first order, with

    z(f; t0, f0) = sum_t w(t - t0) exp(j 2 pi (f0 - f) t / N).

``|z|`` does not depend on ``t0``.  Conventions: ``x(t) = sum_f x_f
exp(j 2 pi f t / N)`` (so ``x_f = DFT(x)[f] / N``); the STFT is
``X(t0, f) = sum_t x(t) w(t - t0) exp(-j 2 pi f t / N)`` with a circular,
centered, unit-energy Hann window; phase rotations are in radians.
For a real signal the mirror bin ``-f0`` is rotated by ``-eta``, and the
prediction includes its conjugate term.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.signal import get_window

from .numerics import wrap_phase


def _as_signal(x) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 1 or a.size < 2:
        raise ValueError("expected a 1-D signal with at least 2 samples")
    if not np.all(np.isfinite(a)):
        raise ValueError("signal contains non-finite values")
    return a


def perturb_one_frequency(x, f0: int, eta: float) -> np.ndarray:
    """Rotate DFT bin ``f0`` by ``eta`` radians (and its mirror by ``-eta``).

    A self-conjugate bin (0 or N/2) cannot carry an arbitrary phase in a
    real signal; there the rotation is applied and the real part kept,
    which scales that bin by ``cos(eta)``.
    """
    x = _as_signal(x)
    n = x.size
    if not 0 <= f0 < n:
        raise ValueError(f"f0 must lie in [0, {n})")
    if eta == 0:
        return x.copy()
    X = np.fft.fft(x)
    X[f0] *= np.exp(1j * eta)
    mirror = (-f0) % n
    if mirror != f0:
        X[mirror] *= np.exp(-1j * eta)
    return np.fft.ifft(X).real


@dataclass(frozen=True)
class StftGrid:
    window: np.ndarray
    hop: int
    frames: np.ndarray
    coefficients: np.ndarray


def hann_window(length: int) -> np.ndarray:
    """Periodic Hann window of unit energy."""
    w = get_window("hann", length, fftbins=True)
    return w / np.sqrt(np.sum(w**2))


def _placed_window(n: int, window: np.ndarray, t0: int) -> np.ndarray:
    """Length-``n`` circular window centered on ``t0``."""
    half = window.size // 2
    out = np.zeros(n)
    out[(t0 - half + np.arange(window.size)) % n] = window
    return out


def stft(x, window: np.ndarray | None = None, hop: int | None = None) -> StftGrid:
    """Circular STFT on the global frequency grid (one length-N DFT per frame)."""
    x = _as_signal(x)
    n = x.size
    if window is None:
        window = hann_window(max(2, n // 8))
    if window.size > n:
        raise ValueError("window longer than the signal")
    hop = hop or max(1, n // 16)
    frames = np.arange(0, n, hop)
    coeffs = np.stack([np.fft.fft(x * _placed_window(n, window, t0)) for t0 in frames])
    return StftGrid(window, hop, frames, coeffs)


def z_factor(n: int, window: np.ndarray, t0: int, f0: int) -> np.ndarray:
    """``z(f; t0, f0)`` for all ``f`` in ``0 .. n-1``."""
    t = np.arange(n)
    w = _placed_window(n, window, t0)
    f = np.arange(n)[:, None]
    return np.sum(w[None, :] * np.exp(2j * np.pi * (f0 - f) * t[None, :] / n), axis=1)


@dataclass(frozen=True)
class StftResidual:
    measured: np.ndarray
    predicted: np.ndarray
    deviation: float
    frames: np.ndarray


def stft_perturbation_residual(x, f0: int, eta: float, window: np.ndarray | None = None,
                               hop: int | None = None, include_mirror: bool = True) -> StftResidual:
    """Measured STFT change vs. its first-order prediction.

    ``deviation`` is the largest absolute difference over the grid; it
    shrinks like ``eta**2``.
    """
    if abs(eta) > 0.5:
        raise ValueError("|eta| must be <= 0.5 for the small-angle analysis")
    x = _as_signal(x)
    n = x.size
    base = stft(x, window, hop)
    pert = stft(perturb_one_frequency(x, f0, eta), base.window, base.hop)
    measured = pert.coefficients - base.coefficients
    xf = np.fft.fft(x) / n
    mirror = (-f0) % n
    predicted = np.empty_like(measured)
    for i, t0 in enumerate(base.frames):
        p = 1j * eta * xf[f0] * z_factor(n, base.window, t0, f0)
        if include_mirror and mirror != f0:
            p += -1j * eta * xf[mirror] * z_factor(n, base.window, t0, mirror)
        predicted[i] = p
    return StftResidual(measured, predicted, float(np.max(np.abs(measured - predicted))), base.frames)


def deviation_slope(x, f0: int, etas, **kwargs) -> tuple[float, np.ndarray]:
    """Log-log slope of deviation against ``eta``; also returns the deviations."""
    etas = np.asarray(etas, dtype=np.float64)
    dev = np.array([stft_perturbation_residual(x, f0, e, **kwargs).deviation for e in etas])
    slope = np.polyfit(np.log(etas), np.log(dev), 1)[0]
    return float(slope), dev


def step_signal(n: int = 256) -> np.ndarray:
    """``+1`` for ``t >= 0`` and ``-1`` for ``t < 0`` on a circular grid centered at 0."""
    x = -np.ones(n)
    x[: n // 2] = 1.0
    return x


@dataclass(frozen=True)
class StepEdgeReport:
    eta: float
    f0: int
    local_phase_error: float
    correction: float
    residual: float


def _local_phase(x: np.ndarray, window: np.ndarray, f0: int, t0: int = 0) -> float:
    return float(np.angle(np.sum(x * _placed_window(x.size, window, t0) * np.exp(-2j * np.pi * f0 * np.arange(x.size) / x.size))))


def step_edge_demo(eta: float, n: int = 256, f0: int = 3, enforcement_error: float = 0.0,
                   window: np.ndarray | None = None) -> StepEdgeReport:
    """Perturb the step at ``f0`` and undo it by restoring the local phase at ``t0 = 0``.

    The correction ``c`` rotating bin ``f0`` back is found by root-finding
    on the local phase, targeting the clean value plus
    ``enforcement_error``.  ``residual = eta - c`` is the global phase
    deviation left after enforcement.
    """
    if abs(eta) > 0.5:
        raise ValueError("|eta| must be <= 0.5")
    x = step_signal(n)
    window = hann_window(n // 8) if window is None else window
    ref = _local_phase(x, window, f0)
    xp = perturb_one_frequency(x, f0, eta)
    before = float(wrap_phase(_local_phase(xp, window, f0) - ref))

    def g(c):
        return float(wrap_phase(_local_phase(perturb_one_frequency(xp, f0, -c), window, f0) - ref - enforcement_error))

    grid = eta + np.linspace(-1.0, 1.0, 41)
    vals = np.array([g(c) for c in grid])
    if np.any(vals == 0):
        c = float(grid[np.flatnonzero(vals == 0)[0]])
    else:
        idx = np.flatnonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))
        # a wrap jump also flips the sign; keep brackets with a small step in g
        idx = [i for i in idx if abs(vals[i] - vals[i + 1]) < np.pi]
        if not idx:
            raise RuntimeError("local phase could not be matched around eta")
        i = min(idx, key=lambda j: abs(grid[j] - eta))
        c = float(brentq(g, grid[i], grid[i + 1], xtol=1e-14))
    return StepEdgeReport(float(eta), f0, before, c, float(eta - c))


def write_slope_csv(path, etas, deviations, slope: float, tolerance: float = 0.2) -> bool:
    ok = abs(slope - 2.0) <= tolerance
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["eta", "deviation"])
        for e, d in zip(etas, deviations):
            w.writerow([repr(float(e)), repr(float(d))])
        w.writerow(["slope", repr(slope)])
        w.writerow(["pass", "true" if ok else "false"])
    return ok
