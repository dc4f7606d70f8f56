"""Image containers, Fourier transforms, quality metrics and phase helpers.

Images are plain 2-D numpy arrays: ``float64`` for real images and
``complex128`` for spectra.  Every public function validates its input
with :func:`as_real_image` / :func:`as_complex_image` so that non-finite
data is rejected at the boundary instead of propagating NaNs.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

__all__ = [
    "QualityScore",
    "as_real_image",
    "as_complex_image",
    "dft2",
    "idft2",
    "wrap_phase",
    "decompose",
    "recompose",
    "perturb_global_phase",
    "randomize_global_phase",
    "hermitian_noise",
    "psnr",
    "ssim",
    "quality",
    "kurtosis",
    "rotate180",
    "read_image",
    "write_image",
]


@dataclass(frozen=True)
class QualityScore:
    psnr: float
    ssim: float
    rotated: bool = False


def _check_finite(a: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{what} contains non-finite values")


def as_real_image(image, name: str = "image") -> np.ndarray:
    """Return ``image`` as a finite 2-D float64 array or raise ``ValueError``."""
    a = np.asarray(image)
    if np.iscomplexobj(a):
        raise ValueError(f"{name} must be real, got {a.dtype}")
    a = a.astype(np.float64, copy=False)
    if a.ndim != 2 or min(a.shape) < 1:
        raise ValueError(f"{name} must be a non-empty 2-D array, got shape {a.shape}")
    _check_finite(a, name)
    return a


def as_complex_image(image, name: str = "spectrum") -> np.ndarray:
    a = np.asarray(image).astype(np.complex128, copy=False)
    if a.ndim != 2 or min(a.shape) < 1:
        raise ValueError(f"{name} must be a non-empty 2-D array, got shape {a.shape}")
    _check_finite(a, name)
    return a


def dft2(image) -> np.ndarray:
    """Unnormalized 2-D DFT, ``X[u, v] = sum x[m, n] exp(-2j*pi*(um/H + vn/W))``."""
    a = np.asarray(image)
    a = as_complex_image(a, "image") if np.iscomplexobj(a) else as_real_image(a)
    return np.fft.fft2(a)


def idft2(spectrum) -> np.ndarray:
    """Inverse of :func:`dft2` (carries the ``1/(HW)`` factor); returns complex."""
    return np.fft.ifft2(as_complex_image(spectrum))


def wrap_phase(phi):
    """Wrap angles into ``(-pi, pi]``."""
    w = np.mod(np.asarray(phi, dtype=np.float64) + np.pi, 2 * np.pi) - np.pi
    # np.mod maps odd multiples of pi to -pi; move them to +pi
    return np.where(w <= -np.pi, np.pi, w)


def decompose(spectrum) -> tuple[np.ndarray, np.ndarray]:
    """Split a spectrum into ``(magnitude, phase)`` with phase in ``(-pi, pi]``.

    Zero-magnitude bins get phase 0.
    """
    X = as_complex_image(spectrum)
    mag = np.abs(X)
    phase = np.where(mag > 0, np.angle(X), 0.0)
    phase = np.where(phase <= -np.pi, np.pi, phase)
    return mag, phase


def recompose(magnitude, phase) -> np.ndarray:
    return np.asarray(magnitude, dtype=np.float64) * np.exp(1j * np.asarray(phase, dtype=np.float64))


def hermitian_noise(shape, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Gaussian phase noise that is odd under ``k -> -k``.

    Noise is drawn independently per bin and antisymmetrized, which is the
    same as drawing on the non-redundant half-spectrum and mirroring with a
    sign flip.  Self-conjugate bins (DC, Nyquist) receive no noise so that
    the perturbed spectrum still belongs to a real image.
    """
    n = rng.standard_normal(shape)
    mirrored = np.roll(np.flip(n, axis=(0, 1)), 1, axis=(0, 1))
    return sigma * (n - mirrored) / np.sqrt(2.0)


def _perturbed_inverse(image: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    mag, phase = decompose(dft2(image))
    return idft2(recompose(mag, phase + hermitian_noise(image.shape, sigma, rng)))


def perturb_global_phase(image, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Add i.i.d. Gaussian noise of std ``sigma`` (radians) to the Fourier phase."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    image = as_real_image(image)
    if sigma == 0:
        return image.copy()
    return _perturbed_inverse(image, sigma, rng).real


def randomize_global_phase(image, fraction: float, rng: np.random.Generator) -> np.ndarray:
    """Replace the phase of the lowest-magnitude ``fraction`` of DFT bins by uniform noise."""
    image = as_real_image(image)
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("fraction must lie in [0, 1]")
    mag, phase = decompose(dft2(image))
    n_rand = int(round(fraction * mag.size))
    if n_rand == 0:
        return image.copy()
    order = np.argsort(mag, axis=None, kind="stable")
    mask = np.zeros(mag.size, dtype=bool)
    mask[order[:n_rand]] = True
    mask = mask.reshape(mag.shape)
    # keep the selection closed under k -> -k so the output stays real
    mask |= np.roll(np.flip(mask, axis=(0, 1)), 1, axis=(0, 1))
    random_phase = np.angle(np.fft.fft2(rng.standard_normal(image.shape)))
    new_phase = np.where(mask, random_phase, phase)
    return idft2(recompose(mag, new_phase)).real


def rotate180(image) -> np.ndarray:
    return np.asarray(image)[::-1, ::-1].copy()


def psnr(a, b, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB; ``inf`` for identical images."""
    a = as_real_image(a, "a")
    b = as_real_image(b, "b")
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return float("inf")
    return float(10.0 * np.log10(peak**2 / mse))


def ssim(a, b, data_range: float = 1.0, sigma: float = 1.5, win_size: int = 11,
         k1: float = 0.01, k2: float = 0.03) -> float:
    """Mean structural similarity with a Gaussian window.

    Local statistics use an ``win_size x win_size`` Gaussian window of std
    ``sigma`` with reflective borders; the mean is taken over pixels whose
    window lies fully inside the image.
    """
    a = as_real_image(a, "a")
    b = as_real_image(b, "b")
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    radius = (win_size - 1) // 2
    truncate = radius / sigma

    def filt(x):
        return ndimage.gaussian_filter(x, sigma=sigma, truncate=truncate, mode="reflect")

    mu_a, mu_b = filt(a), filt(b)
    s_aa = filt(a * a) - mu_a * mu_a
    s_bb = filt(b * b) - mu_b * mu_b
    s_ab = filt(a * b) - mu_a * mu_b
    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2
    num = (2 * mu_a * mu_b + c1) * (2 * s_ab + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (s_aa + s_bb + c2)
    smap = num / den
    if min(a.shape) > 2 * radius:
        smap = smap[radius:-radius, radius:-radius]
    return float(smap.mean())


def quality(reference, image) -> QualityScore:
    return QualityScore(psnr(reference, image), ssim(reference, image))


def kurtosis(samples) -> float:
    """Fourth standardized moment (3 for a Gaussian)."""
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size < 4:
        raise ValueError("kurtosis needs at least 4 samples")
    _check_finite(x, "samples")
    d = x - x.mean()
    # rescale before powering to avoid overflow on wide-range data
    scale = np.max(np.abs(d))
    if scale == 0:
        raise ValueError("kurtosis undefined for zero variance")
    d = d / scale
    m2 = np.mean(d**2)
    if m2 == 0:
        raise ValueError("kurtosis undefined for zero variance")
    return float(np.mean(d**4) / m2**2)


def read_image(path) -> np.ndarray:
    """Load an 8-bit PGM/PNG (color converted to BT.601 luma) into ``[0, 1]``."""
    from PIL import Image

    with Image.open(path) as im:
        if im.mode not in ("L", "I;16", "I", "F"):
            im = im.convert("L")
        if im.mode != "L":
            arr = np.asarray(im, dtype=np.float64)
            return arr / max(arr.max(), 1.0)
        return np.asarray(im, dtype=np.float64) / 255.0


def write_image(path, image, clip: bool = True) -> None:
    """Write ``image`` (nominally in ``[0, 1]``) as 8-bit PGM or PNG by suffix."""
    from PIL import Image

    a = as_real_image(image)
    if clip:
        a = np.clip(a, 0.0, 1.0)
    data = np.round(a * 255.0).astype(np.uint8)
    path = Path(path)
    fmt = "PPM" if path.suffix.lower() in (".pgm", ".pnm") else "PNG"
    Image.fromarray(data).save(path, format=fmt)
