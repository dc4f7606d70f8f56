"""Phase retrieval from Fourier magnitude: HIO and local-phase HIO.

An ``N x N`` object is zero-padded to ``2N x 2N``; the support is the
top-left ``N x N`` block.  Each iteration

1. synthesizes ``I = Re F^-1(|I_hat| exp(j phi))``,
2. finds the violation set (outside the support or negative),
3. applies the hybrid input-output correction ``I_prev - beta * I`` there,
4. (LPHIO only, every ``n_est`` iterations) denoises the local phase of
   the top-left crop under the mixture prior with noise variance
   ``a * exp(-b * i / T)``,
5. refreshes ``phi`` from the forward transform of the updated image.

The reported estimate of iteration ``t`` is the support/positivity
projection of the step-1 image, and ``eps_t`` is its Fourier error.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import dtcwt
from .denoise import denoise_pyramid_phase
from .model import PhaseGmm
from .numerics import QualityScore, as_real_image, psnr, rotate180, ssim
from .rng import make_rng

LOG_FLOOR = 1e-300


def fourier_error(reference_magnitude, candidate) -> float:
    """``sum (|I_hat| - |F candidate|)^2`` over all bins."""
    ref = np.asarray(reference_magnitude, dtype=np.float64)
    cand = as_real_image(candidate, "candidate")
    if ref.shape != cand.shape:
        raise ValueError(f"size mismatch: magnitude {ref.shape} vs candidate {cand.shape}")
    return float(np.sum((ref - np.abs(np.fft.fft2(cand))) ** 2))


def pad_image(image) -> np.ndarray:
    """Zero-pad an ``N x N`` image to ``2N x 2N`` (object in the top-left)."""
    x = as_real_image(image)
    out = np.zeros((2 * x.shape[0], 2 * x.shape[1]))
    out[: x.shape[0], : x.shape[1]] = x
    return out


def noise_variance(i: int, T: int, a: float, b: float) -> float:
    return float(a * math.exp(-b * i / T))


@dataclass(frozen=True)
class RetrievalConfig:
    magnitude: np.ndarray
    support: np.ndarray
    T: int = 1500
    n_est: int = 50
    a: float = 2.0
    b: float = 5.0
    beta: float = 0.9
    seed: int = 0
    init: int = 0
    levels: int | None = None
    init_phase: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        mag = np.asarray(self.magnitude, dtype=np.float64)
        sup = np.asarray(self.support, dtype=bool)
        if mag.ndim != 2 or mag.shape != sup.shape:
            raise ValueError("magnitude and support must be 2-D arrays of equal shape")
        if not np.all(np.isfinite(mag)) or np.any(mag < 0):
            raise ValueError("magnitude must be finite and nonnegative")
        if not sup.any():
            raise ValueError("support is empty")
        if self.T < 1 or self.n_est < 1:
            raise ValueError("T and n_est must be >= 1")
        if not self.a > 0 or self.b < 0:
            raise ValueError("need a > 0 and b >= 0")
        if not 0 < self.beta <= 1:
            raise ValueError("beta must lie in (0, 1]")
        object.__setattr__(self, "magnitude", mag)
        object.__setattr__(self, "support", sup)

    @classmethod
    def from_image(cls, image, **kwargs) -> "RetrievalConfig":
        padded = pad_image(image)
        support = np.zeros(padded.shape, dtype=bool)
        n, m = np.asarray(image).shape
        support[:n, :m] = True
        return cls(np.abs(np.fft.fft2(padded)), support, **kwargs)

    @property
    def object_shape(self) -> tuple:
        rows = np.flatnonzero(self.support.any(axis=1))
        cols = np.flatnonzero(self.support.any(axis=0))
        return int(rows[-1] + 1), int(cols[-1] + 1)

    def dtcwt_levels(self) -> int:
        if self.levels is not None:
            return self.levels
        return 4 if min(self.object_shape) >= 128 else 3

    def params(self) -> dict:
        return {"T": self.T, "n_est": self.n_est, "a": self.a, "b": self.b, "beta": self.beta,
                "seed": self.seed, "init": self.init, "levels": self.dtcwt_levels()}


@dataclass(frozen=True)
class RetrievalTrace:
    errors: np.ndarray
    image: np.ndarray
    iterate: np.ndarray
    iterations: int
    estimation_steps: tuple = ()

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "fourier_error"])
            for i, e in enumerate(self.errors, 1):
                w.writerow([i, repr(float(e))])


def initial_phase(config: RetrievalConfig) -> np.ndarray:
    """Uniform random phase with Hermitian symmetry (phase of white noise's DFT)."""
    if config.init_phase is not None:
        return np.asarray(config.init_phase, dtype=np.float64)
    rng = make_rng(config.seed, "retrieval-init", config.init)
    return np.angle(np.fft.fft2(rng.standard_normal(config.magnitude.shape)))


def project(image: np.ndarray, support: np.ndarray) -> np.ndarray:
    """Support and positivity projection."""
    return np.where(support & (image >= 0), image, 0.0)


def _estimate_local_phase(iterate: np.ndarray, config: RetrievalConfig, model: PhaseGmm,
                          sigma2: float) -> np.ndarray:
    n, m = config.object_shape
    crop = iterate[:n, :m]
    pyr = dtcwt.forward(crop, config.dtcwt_levels())
    out = iterate.copy()
    out[:n, :m] = dtcwt.inverse(denoise_pyramid_phase(pyr, model, sigma2))
    return out


def _run(config: RetrievalConfig, model: PhaseGmm | None) -> RetrievalTrace:
    mag, sup = config.magnitude, config.support
    phase = initial_phase(config)
    prev = np.zeros(mag.shape)
    errors = np.empty(config.T)
    fired = []
    for i in range(1, config.T + 1):
        img = np.fft.ifft2(mag * np.exp(1j * phase)).real
        estimate = project(img, sup)
        errors[i - 1] = fourier_error(mag, estimate)
        viol = ~sup | (img < 0)
        img = np.where(viol, prev - config.beta * img, img)
        if model is not None and i % config.n_est == 0:
            s2 = noise_variance(i, config.T, config.a, config.b)
            img = _estimate_local_phase(img, config, model, s2)
            fired.append(i)
        prev = img
        phase = np.angle(np.fft.fft2(img))
    n, m = config.object_shape
    final = estimate[:n, :m]
    return RetrievalTrace(errors, final, prev, config.T, tuple(fired))


def hio_run(config: RetrievalConfig) -> RetrievalTrace:
    return _run(config, None)


def lphio_run(config: RetrievalConfig, model: PhaseGmm) -> RetrievalTrace:
    """HIO with periodic local-phase estimation under ``model``.

    Raises
    ------
    ValueError
        If the model is not a 10-slot phase model.
    """
    if model.dim != 10:
        raise ValueError(f"LPHIO needs a 10-dim phase model, got dim {model.dim}")
    n, m = config.object_shape
    lv = config.dtcwt_levels()
    if 2**lv > min(n, m):
        raise ValueError(f"object {n}x{m} too small for {lv} DTCWT levels")
    return _run(config, model)


def score_reconstruction(truth, reconstruction) -> QualityScore:
    """Best PSNR and SSIM over the reconstruction and its 180-degree rotation.

    The two maxima are taken independently; ``rotated`` reports the branch
    that won on PSNR.
    """
    t = as_real_image(truth, "truth")
    r = as_real_image(reconstruction, "reconstruction")
    if t.shape != r.shape:
        raise ValueError(f"shape mismatch: {t.shape} vs {r.shape}")
    rr = rotate180(r)
    p0, p1 = psnr(t, r), psnr(t, rr)
    s0, s1 = ssim(t, r), ssim(t, rr)
    return QualityScore(max(p0, p1), max(s0, s1), rotated=p1 > p0)


@dataclass(frozen=True)
class PairResult:
    image: int
    init: int
    error_hio: float
    error_lphio: float
    psnr_hio: float
    psnr_lphio: float
    ssim_hio: float
    ssim_lphio: float
    d_f: float
    d_p: float
    floored: bool


@dataclass
class PairReport:
    results: list
    traces: dict = field(default_factory=dict, repr=False)

    @property
    def d_f(self) -> np.ndarray:
        return np.array([r.d_f for r in self.results])

    @property
    def d_p(self) -> np.ndarray:
        return np.array([r.d_p for r in self.results])

    def summary(self) -> dict:
        return {
            "n": len(self.results),
            "d_f_mean": float(self.d_f.mean()), "d_f_std": float(self.d_f.std()),
            "d_p_mean": float(self.d_p.mean()), "d_p_std": float(self.d_p.std()),
        }

    def write_csv(self, directory, bins: int = 10) -> list:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        per_run = directory / "pairs.csv"
        with open(per_run, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(list(PairResult.__dataclass_fields__))
            for r in self.results:
                w.writerow([repr(v) if isinstance(v, float) else v for v in r.__dict__.values()])
        summ = directory / "summary.csv"
        s = self.summary()
        with open(summ, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["statistic", "d_f", "d_p"])
            w.writerow(["mean", repr(s["d_f_mean"]), repr(s["d_p_mean"])])
            w.writerow(["std", repr(s["d_f_std"]), repr(s["d_p_std"])])
            w.writerow(["n", s["n"], s["n"]])
        hist = directory / "histogram.csv"
        with open(hist, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["quantity", "bin_low", "bin_high", "count"])
            for name, v in (("d_f", self.d_f), ("d_p", self.d_p)):
                counts, edges = np.histogram(v, bins=bins)
                for c, lo, hi in zip(counts, edges[:-1], edges[1:]):
                    w.writerow([name, repr(float(lo)), repr(float(hi)), int(c)])
        return [per_run, summ, hist]


def _log_error(e: float) -> tuple[float, bool]:
    return (math.log(LOG_FLOOR), True) if e < LOG_FLOOR else (math.log(e), False)


def _pair_task(task):
    k, p, img, cfg, model, keep = task
    th, tl = hio_run(cfg), lphio_run(cfg, model)
    eh, fh_ = _log_error(float(th.errors[-1]))
    el, fl_ = _log_error(float(tl.errors[-1]))
    sh, sl = score_reconstruction(img, th.image), score_reconstruction(img, tl.image)
    res = PairResult(k, p, float(th.errors[-1]), float(tl.errors[-1]), sh.psnr, sl.psnr,
                     sh.ssim, sl.ssim, el - eh, sl.psnr - sh.psnr, fh_ or fl_)
    return res, ((th, tl) if keep else None)


def evaluate_pair(images, model: PhaseGmm, inits: int = 1, seed: int = 0,
                  keep_traces: bool = False, jobs: int = 1, **config_kwargs) -> PairReport:
    """Paired HIO/LPHIO runs sharing initial phases; ``d_F`` and ``d_P`` per run.

    ``d_F = log eps_LPHIO - log eps_HIO`` at the final iteration and
    ``d_P = PSNR_LPHIO - PSNR_HIO`` after resolving the 180-degree
    ambiguity.  Negative ``d_F`` and positive ``d_P`` favour LPHIO.
    Zero errors are floored at 1e-300 before the log and flagged.
    Results do not depend on ``jobs``.
    """
    images = [as_real_image(im) for im in images]
    if not images:
        raise ValueError("need at least one image")
    tasks = []
    for k, img in enumerate(images):
        base = RetrievalConfig.from_image(img, seed=seed, **config_kwargs)
        for p in range(inits):
            tasks.append((k, p, img, replace(base, init=p + k * inits), model, keep_traces))
    if jobs > 1 and len(tasks) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as ex:
            out = list(ex.map(_pair_task, tasks))
    else:
        out = [_pair_task(t) for t in tasks]
    report = PairReport([r for r, _ in out])
    if keep_traces:
        report.traces = {(r.image, r.init): tr for r, tr in out}
    return report
