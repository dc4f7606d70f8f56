"""Half-quadratic-splitting restoration under the local-phase prior.

The MAP problem for ``y = H x + n`` is split with an auxiliary phase
field ``z`` tied to the detail phases ``a_w`` of the wavelet
representation ``w``:

    L = beta ||H W^-1 w - y||^2 + alpha ||a_w - z||^2 - log P(z)

and minimized by alternating a projected-gradient w-step (gradient on the
fidelity, then ``angle(w) := z`` on detail coefficients) with a
closed-form z-step, for an increasing sequence of ``alpha``.

The prior term uses, for every coefficient, the Gaussian component
``k_hat`` that is most probable for its sub-tree at the start of the
stage; only the center slot of that component enters the coefficient's
own estimate, as in the phase denoiser.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import dtcwt, graph
from .model import PhaseGmm
from .numerics import as_real_image


class HqsDivergence(RuntimeError):
    """Raised when the fidelity gradient loop blows up."""

    def __init__(self, message: str, trace):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class DegradationOperator:
    """Identity or circular convolution with an odd-sized kernel."""

    kind: str = "identity"
    kernel: np.ndarray | None = None

    def __post_init__(self):
        if self.kind == "identity":
            if self.kernel is not None:
                raise ValueError("identity operator takes no kernel")
            return
        if self.kind != "convolution":
            raise ValueError(f"unknown operator kind {self.kind!r}")
        k = np.asarray(self.kernel, dtype=np.float64)
        if k.ndim != 2 or k.size == 0 or not np.all(np.isfinite(k)):
            raise ValueError("kernel must be a finite non-empty 2-D array")
        if k.shape[0] % 2 == 0 or k.shape[1] % 2 == 0:
            raise ValueError(f"kernel dimensions must be odd, got {k.shape}")
        object.__setattr__(self, "kernel", k)

    @classmethod
    def identity(cls) -> "DegradationOperator":
        return cls()

    @classmethod
    def convolution(cls, kernel) -> "DegradationOperator":
        return cls("convolution", kernel)

    @classmethod
    def from_file(cls, path) -> "DegradationOperator":
        return cls.convolution(np.atleast_2d(np.loadtxt(path, dtype=np.float64)))

    def apply(self, x: np.ndarray) -> np.ndarray:
        if self.kind == "identity":
            return x.copy()
        return ndimage.convolve(x, self.kernel, mode="wrap")

    def adjoint(self, x: np.ndarray) -> np.ndarray:
        if self.kind == "identity":
            return x.copy()
        return ndimage.correlate(x, self.kernel, mode="wrap")


def gaussian_kernel(size: int = 5, sigma: float = 1.0) -> np.ndarray:
    """Normalized separable Gaussian taps of odd ``size``."""
    r = np.arange(size) - (size - 1) / 2
    g = np.exp(-0.5 * (r / sigma) ** 2)
    g /= g.sum()
    return np.outer(g, g)


@dataclass(frozen=True)
class HqsSchedule:
    alphas: tuple = (1.0, 4.0, 16.0, 64.0)
    beta_fidelity: float = 1.0
    lam: float = 1.0
    inner_iters: int = 20
    alternations: int = 3
    noise_sigma: float = 0.0

    def __post_init__(self):
        a = np.asarray(self.alphas, dtype=np.float64)
        if a.size == 0 or np.any(a <= 0) or np.any(np.diff(a) <= 0):
            raise ValueError("alphas must be positive and strictly increasing")
        if not self.lam > 0:
            raise ValueError("lambda must be > 0")
        if not self.beta_fidelity > 0:
            raise ValueError("beta_fidelity must be > 0")
        if not self.noise_sigma >= 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.inner_iters < 1 or self.alternations < 1:
            raise ValueError("inner_iters and alternations must be >= 1")
        object.__setattr__(self, "alphas", tuple(float(v) for v in a))

    @classmethod
    def for_noise(cls, sigma: float, **kwargs) -> "HqsSchedule":
        """Schedule with ``beta_fidelity = 1 / (2 sigma^2)``."""
        if not sigma > 0:
            raise ValueError("noise sigma must be > 0")
        return cls(beta_fidelity=1.0 / (2.0 * sigma**2), noise_sigma=sigma, **kwargs)


def _phases(w: dtcwt.Pyramid) -> list:
    return [np.angle(hp) for hp in w.highpasses]


def enforce_phase(w: dtcwt.Pyramid, z) -> dtcwt.Pyramid:
    """Set every detail phase to ``z`` keeping magnitudes (lowpass untouched)."""
    return w.with_highpasses([np.abs(hp) * np.exp(1j * zz) for hp, zz in zip(w.highpasses, z)])


def fidelity(w: dtcwt.Pyramid, y: np.ndarray, H: DegradationOperator) -> float:
    r = H.apply(dtcwt.inverse(w)) - y
    return float(np.sum(r * r))


def _gradient(w: dtcwt.Pyramid, y: np.ndarray, H: DegradationOperator) -> dtcwt.Pyramid:
    # gradient of 0.5 ||H W^-1 w - y||^2, with the analysis transform standing in for
    # the synthesis adjoint (the frame is only nearly tight)
    r = H.adjoint(H.apply(dtcwt.inverse(w)) - y)
    return dtcwt.forward(r, w.levels)


def _axpy(w: dtcwt.Pyramid, g: dtcwt.Pyramid, lam: float) -> dtcwt.Pyramid:
    return dtcwt.Pyramid(
        w.lowpass - lam * g.lowpass,
        tuple(a - lam * b for a, b in zip(w.highpasses, g.highpasses)),
        w.original_shape, w.pad, w.filters)


def _energy(w: dtcwt.Pyramid) -> float:
    return float(np.sum(w.lowpass**2) + sum(np.sum(np.abs(h) ** 2) for h in w.highpasses))


@dataclass(frozen=True)
class WStep:
    w: dtcwt.Pyramid
    free_phases: list
    fidelity: tuple
    steps: tuple


def w_update(w: dtcwt.Pyramid, y, H: DegradationOperator, z, lam: float = 1.0,
             inner_iters: int = 20, max_halvings: int = 30, target: float = 0.0) -> WStep:
    """Projected gradient descent on the fidelity with detail phases pinned to ``z``.

    Each inner iteration takes a gradient step, backtracking (halving from
    ``lam``) until the phase-enforced result does not increase the
    fidelity.  ``free_phases`` are the detail phases of the last accepted
    gradient step before enforcement.  The loop stops early once the
    fidelity is at or below ``target`` (the expected noise energy), so the
    descent does not fit the noise.

    Raises
    ------
    HqsDivergence
        If the coefficient energy grows more than tenfold.
    """
    y = as_real_image(y, "y")
    cur = enforce_phase(w, z)
    f = fidelity(cur, y, H)
    e0 = max(_energy(cur), 1e-300)
    trace, steps = [f], []
    free = _phases(cur)
    for _ in range(inner_iters):
        if f <= target:
            break
        g = _gradient(cur, y, H)
        step = lam
        accepted = False
        for _ in range(max_halvings):
            raw = _axpy(cur, g, step)
            cand = enforce_phase(raw, z)
            fc = fidelity(cand, y, H)
            if fc <= f:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            steps.append(0.0)
            trace.append(f)
            continue
        cur, f = cand, fc
        free = _phases(raw)
        steps.append(step)
        trace.append(f)
        if _energy(cur) > 10.0 * e0:
            raise HqsDivergence("coefficient energy grew more than 10x in the w-update", trace)
    return WStep(cur, free, tuple(trace), tuple(steps))


def _center_components(model: PhaseGmm, phases, child_map: str = "dyadic") -> list:
    """Most probable component per coefficient from its (possibly partial) sub-tree."""
    out = []
    for level in range(1, len(phases) + 1):
        nb = graph.stack_neighbors(phases, level, child_map)
        present = ~np.isnan(nb)
        flat = np.where(present, nb, 0.0).reshape(-1, 10)
        pres = present.reshape(-1, 10)
        k = np.empty(flat.shape[0], dtype=np.int64)
        patterns, inverse = np.unique(pres, axis=0, return_inverse=True)
        inverse = inverse.ravel()
        for j, pat in enumerate(patterns):
            rows = inverse == j
            lj = model.log_joint(flat[rows], None if pat.all() else np.broadcast_to(pat, flat[rows].shape))
            k[rows] = np.argmax(lj, axis=1)
        out.append(k.reshape(phases[level - 1].shape))
    return out


def z_closed_form(a, mu, var, alpha: float, printed: bool = False):
    """Coordinatewise minimizer of ``alpha (a - z)^2 + (z - mu)^2 / (2 var)``.

    ``printed=True`` evaluates ``(var + alpha)^-1 (var a + alpha mu)``
    instead, which tends to ``mu`` (not ``a``) as ``alpha`` grows.
    """
    a, mu, var = np.asarray(a, float), np.asarray(mu, float), np.asarray(var, float)
    if printed:
        return (var * a + alpha * mu) / (var + alpha)
    return (2.0 * alpha * var * a + mu) / (2.0 * alpha * var + 1.0)


def z_update_vectors(a_w, model: PhaseGmm, alpha: float, present=None,
                     printed: bool = False, k_hat=None) -> tuple[np.ndarray, np.ndarray]:
    """MAP ``z`` for sub-tree phase vectors ``(n, 10)`` under component ``k_hat``.

    ``k_hat`` defaults to the posterior argmax on ``a_w``.  Returns
    ``(z, k_hat)``.
    """
    if not alpha > 0:
        raise ValueError("alpha must be > 0")
    a = np.atleast_2d(np.asarray(a_w, dtype=np.float64))
    if k_hat is None:
        k_hat = np.argmax(model.log_joint(a, present), axis=1)
    k_hat = np.asarray(k_hat)
    z = z_closed_form(a, model.means[k_hat], model.variances[k_hat], alpha, printed)
    return z, k_hat


def z_update(a_w, model: PhaseGmm | None, alpha: float, k_hat=None, printed: bool = False) -> list:
    """Per-coefficient z-step over a per-level phase field.

    With ``model=None`` the prior is dropped and ``z = a_w``.
    """
    if not alpha > 0:
        raise ValueError("alpha must be > 0")
    if model is None:
        return [np.array(a, dtype=np.float64) for a in a_w]
    if k_hat is None:
        k_hat = _center_components(model, a_w)
    return [z_closed_form(a, model.means[k, 0], model.variances[k, 0], alpha, printed)
            for a, k in zip(a_w, k_hat)]


def surrogate(w: dtcwt.Pyramid, z, y, H: DegradationOperator, model: PhaseGmm | None,
              k_hat, alpha: float, beta: float) -> float:
    """``beta*fid + alpha*||a_w - z||^2 + sum (z - mu_khat)^2 / (2 var_khat)``."""
    val = beta * fidelity(w, y, H)
    for a, zz in zip(_phases(w), z):
        val += alpha * float(np.sum((a - zz) ** 2))
    if model is not None:
        for zz, k in zip(z, k_hat):
            val += float(np.sum((zz - model.means[k, 0]) ** 2 / (2.0 * model.variances[k, 0])))
    return val


@dataclass
class HqsResult:
    image: np.ndarray
    objective: list = field(default_factory=list)
    stage_objective: list = field(default_factory=list)
    fidelity: list = field(default_factory=list)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["stage", "alpha", "alternation", "objective", "fidelity"])
            for row in self.objective:
                w.writerow([row[0], repr(row[1]), row[2], repr(row[3]), repr(row[4])])


def hqs_restore(y, H: DegradationOperator, model: PhaseGmm | None,
                schedule: HqsSchedule | None = None, levels: int = 4,
                printed: bool = False) -> HqsResult:
    """Restore ``y`` by half-quadratic splitting over an increasing ``alpha`` schedule.

    Within a stage ``k_hat`` is fixed and each alternation is a w-step
    followed by a z-step fed with the free (pre-enforcement) phases.  An
    alternation that would raise the surrogate objective is rejected and
    ends the stage, so the recorded objective never increases within a
    stage.
    """
    y = as_real_image(y, "y")
    schedule = schedule or HqsSchedule()
    beta = schedule.beta_fidelity
    target = y.size * schedule.noise_sigma**2
    w = dtcwt.forward(y, levels)
    result = HqsResult(y)
    for s, alpha in enumerate(schedule.alphas):
        a = _phases(w)
        k_hat = None if model is None else _center_components(model, a)
        z = [p.copy() for p in a]
        cur = surrogate(w, z, y, H, model, k_hat, alpha, beta)
        result.objective.append((s, alpha, 0, cur, fidelity(w, y, H)))
        for t in range(1, schedule.alternations + 1):
            step = w_update(w, y, H, z, schedule.lam, schedule.inner_iters, target=target)
            z_new = z_update(step.free_phases, model, alpha, k_hat, printed)
            val = surrogate(step.w, z_new, y, H, model, k_hat, alpha, beta)
            if val > cur:
                # fall back to the exact z-minimizer for the new w, which cannot increase L
                z_new = z_update(_phases(step.w), model, alpha, k_hat, printed)
                val = surrogate(step.w, z_new, y, H, model, k_hat, alpha, beta)
            if val > cur:
                break
            w, z, cur = step.w, z_new, val
            result.objective.append((s, alpha, t, cur, fidelity(w, y, H)))
        result.stage_objective.append(cur)
        result.fidelity.append(fidelity(w, y, H))
    result.image = dtcwt.inverse(w)
    return result
