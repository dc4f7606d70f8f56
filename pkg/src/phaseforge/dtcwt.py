"""Two-dimensional dual-tree complex wavelet transform.

Level 1 uses the near-symmetric 13,19-tap biorthogonal pair and levels
2 and up use the 14-tap Q-shift pair.  Each detail level holds six
complex sub-bands stacked along the last axis, ordered by orientation

    index 0..5  ->  +15, +45, +75, -75, -45, -15 degrees

and level 1 is the finest.  Borders use half-sample symmetric extension.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field, replace

import numpy as np

from .numerics import as_real_image

__all__ = [
    "FILTER_SET",
    "ORIENTATIONS_DEG",
    "Pyramid",
    "forward",
    "inverse",
    "shift_invariance_probe",
    "pyramid_to_bytes",
    "pyramid_from_bytes",
]

FILTER_SET = "near_sym_b+qshift_b"
ORIENTATIONS_DEG = (15, 45, 75, -75, -45, -15)

# Level-1 analysis (h) and synthesis (g) filters, near_sym_b.
_H0O = np.array([
    -0.0017578125, 0.0, 0.022265625, -0.046875, -0.0482421875, 0.296875,
    0.55546875, 0.296875, -0.0482421875, -0.046875, 0.022265625, 0.0,
    -0.0017578125,
])
_G0O = np.array([
    7.062639508928571e-05, 0.0, -0.0013419015066964285, -0.0018833705357142855,
    0.007156808035714285, 0.023856026785714284, -0.05564313616071428,
    -0.05168805803571428, 0.29975760323660716, 0.5594308035714286,
    0.29975760323660716, -0.05168805803571428, -0.05564313616071428,
    0.023856026785714284, 0.007156808035714285, -0.0018833705357142855,
    -0.0013419015066964285, 0.0, 7.062639508928571e-05,
])
_H1O = _G0O * np.where(np.arange(_G0O.size) % 2 == 0, -1.0, 1.0)
_G1O = _H0O * np.where(np.arange(_H0O.size) % 2 == 0, 1.0, -1.0)

# Q-shift prototype (qshift_b); every other filter is a reversal or
# alternating-sign modulation of it.
_QSHIFT_B = np.array([
    0.003253142763653182, -0.00388321199915849, 0.03466034684485349,
    -0.03887280126882779, -0.11720388769911527, 0.27529538466888204,
    0.7561456438925225, 0.5688104207121227, 0.011866092033797,
    -0.1067118046866654, 0.023825384794920298, 0.01702522388155399,
    -0.005439475937274115, -0.004556895628475491,
])
_H0A = _QSHIFT_B
_H0B = _QSHIFT_B[::-1].copy()
_H1A = _H0B * np.where(np.arange(14) % 2 == 0, 1.0, -1.0)
_H1B = _H1A[::-1].copy()
_G0A, _G0B = _H0B, _H0A
_G1A, _G1B = _H1B, _H1A


def _sym_index(idx: np.ndarray, n: int) -> np.ndarray:
    """Half-sample symmetric extension: ..., 1, 0 | 0, 1, ..., n-1 | n-1, ..."""
    m = np.mod(idx, 2 * n)
    return np.where(m >= n, 2 * n - 1 - m, m)


def _convolve_valid(x: np.ndarray, h: np.ndarray) -> np.ndarray:
    m = h.size
    n_out = x.shape[0] - m + 1
    out = np.zeros((n_out,) + x.shape[1:], dtype=x.dtype)
    for k in range(m):
        if h[k] != 0.0:
            out += h[k] * x[m - 1 - k: m - 1 - k + n_out]
    return out


def _colfilter(x: np.ndarray, h: np.ndarray) -> np.ndarray:
    r = x.shape[0]
    m2 = h.size // 2
    xe = _sym_index(np.arange(-m2, r + m2), r)
    return _convolve_valid(x[xe], h)


def _coldfilt(x: np.ndarray, ha: np.ndarray, hb: np.ndarray) -> np.ndarray:
    r = x.shape[0]
    if r % 4:
        raise ValueError("row count must be a multiple of 4 for q-shift filtering")
    m = ha.size
    xe = _sym_index(np.arange(-m, r + m), r)
    t = np.arange(5, r + 2 * m - 2, 4)
    y = np.zeros((r // 2,) + x.shape[1:], dtype=x.dtype)
    if np.sum(ha * hb) > 0:
        s1, s2 = slice(0, r // 2, 2), slice(1, r // 2, 2)
    else:
        s1, s2 = slice(1, r // 2, 2), slice(0, r // 2, 2)
    y[s1] = _convolve_valid(x[xe[t - 1]], ha[0::2]) + _convolve_valid(x[xe[t - 3]], ha[1::2])
    y[s2] = _convolve_valid(x[xe[t]], hb[0::2]) + _convolve_valid(x[xe[t - 2]], hb[1::2])
    return y


def _colifilt(x: np.ndarray, ha: np.ndarray, hb: np.ndarray) -> np.ndarray:
    r = x.shape[0]
    m = ha.size
    m2 = m // 2
    y = np.zeros((2 * r,) + x.shape[1:], dtype=x.dtype)
    xe = _sym_index(np.arange(-m2, r + m2), r)
    hao, hae, hbo, hbe = ha[0::2], ha[1::2], hb[0::2], hb[1::2]
    s = np.arange(0, 2 * r, 4)
    if m2 % 2 == 0:
        t = np.arange(3, r + m, 2)
        ta, tb = (t, t - 1) if np.sum(ha * hb) > 0 else (t - 1, t)
        y[s] = _convolve_valid(x[xe[tb - 2]], hae)
        y[s + 1] = _convolve_valid(x[xe[ta - 2]], hbe)
        y[s + 2] = _convolve_valid(x[xe[tb]], hao)
        y[s + 3] = _convolve_valid(x[xe[ta]], hbo)
    else:
        t = np.arange(2, r + m - 1, 2)
        ta, tb = (t, t - 1) if np.sum(ha * hb) > 0 else (t - 1, t)
        y[s] = _convolve_valid(x[xe[tb]], hao)
        y[s + 1] = _convolve_valid(x[xe[ta]], hbo)
        y[s + 2] = _convolve_valid(x[xe[tb]], hae)
        y[s + 3] = _convolve_valid(x[xe[ta]], hbe)
    return y


def _q2c(y: np.ndarray) -> np.ndarray:
    """Quads of real samples -> pair of complex sub-bands, shape (h, w, 2)."""
    s = np.sqrt(0.5)
    p = (y[0::2, 0::2] + 1j * y[0::2, 1::2]) * s
    q = (y[1::2, 1::2] - 1j * y[1::2, 0::2]) * s
    return np.dstack((p - q, p + q))


def _c2q(w: np.ndarray) -> np.ndarray:
    x = np.zeros((2 * w.shape[0], 2 * w.shape[1]))
    s = np.sqrt(0.5)
    p = (w[:, :, 0] + w[:, :, 1]) * s
    q = (w[:, :, 0] - w[:, :, 1]) * s
    x[0::2, 0::2] = p.real
    x[0::2, 1::2] = p.imag
    x[1::2, 0::2] = q.imag
    x[1::2, 1::2] = -q.real
    return x


@dataclass(frozen=True)
class Pyramid:
    """A DTCWT decomposition.

    ``highpasses[i - 1]`` is detail level ``i`` (1 = finest) with shape
    ``(h, w, 6)``; ``lowpass`` is the real approximation band.  ``pad`` is
    the number of rows/columns appended (symmetrically) before the forward
    transform and removed again by :func:`inverse`.
    """

    lowpass: np.ndarray
    highpasses: tuple
    original_shape: tuple
    pad: tuple = (0, 0)
    filters: str = field(default=FILTER_SET)

    @property
    def levels(self) -> int:
        return len(self.highpasses)

    def band(self, level: int, orientation: int) -> np.ndarray:
        """Sub-band at 1-based ``level`` and 1-based ``orientation``."""
        return self.highpasses[level - 1][:, :, orientation - 1]

    def magnitudes(self) -> list:
        return [np.abs(h) for h in self.highpasses]

    def phases(self) -> list:
        return [np.angle(h) for h in self.highpasses]

    def with_highpasses(self, highpasses) -> "Pyramid":
        highpasses = tuple(np.asarray(h, dtype=np.complex128) for h in highpasses)
        if len(highpasses) != self.levels or any(
            a.shape != b.shape for a, b in zip(highpasses, self.highpasses)
        ):
            raise ValueError("replacement sub-bands do not match the pyramid layout")
        return replace(self, highpasses=highpasses)

    def with_phases(self, phases) -> "Pyramid":
        """Keep magnitudes, replace every detail phase."""
        return self.with_highpasses(
            [np.abs(h) * np.exp(1j * np.asarray(p)) for h, p in zip(self.highpasses, phases)]
        )

    def scaled(self, factor: float) -> "Pyramid":
        return replace(
            self,
            lowpass=self.lowpass * factor,
            highpasses=tuple(h * factor for h in self.highpasses),
        )

    def zeros_like(self) -> "Pyramid":
        return replace(
            self,
            lowpass=np.zeros_like(self.lowpass),
            highpasses=tuple(np.zeros_like(h) for h in self.highpasses),
        )


def forward(image, levels: int = 4) -> Pyramid:
    """Decompose a real image into ``levels`` detail levels plus a lowpass band."""
    x = as_real_image(image)
    if levels < 1:
        raise ValueError("levels must be >= 1")
    h, w = x.shape
    if 2**levels > min(h, w):
        raise ValueError(f"{levels} levels is too many for a {h}x{w} image")
    step = 2**levels
    pad = ((-h) % step, (-w) % step)
    if any(pad):
        x = np.pad(x, ((0, pad[0]), (0, pad[1])), mode="symmetric")

    highpasses = []
    lo = _colfilter(x, _H0O).T
    hi = _colfilter(x, _H1O).T
    lolo = _colfilter(lo, _H0O).T
    band = np.zeros((lolo.shape[0] // 2, lolo.shape[1] // 2, 6), dtype=np.complex128)
    band[:, :, [0, 5]] = _q2c(_colfilter(hi, _H0O).T)
    band[:, :, [2, 3]] = _q2c(_colfilter(lo, _H1O).T)
    band[:, :, [1, 4]] = _q2c(_colfilter(hi, _H1O).T)
    highpasses.append(band)

    for _ in range(1, levels):
        lo = _coldfilt(lolo, _H0B, _H0A).T
        hi = _coldfilt(lolo, _H1B, _H1A).T
        lolo = _coldfilt(lo, _H0B, _H0A).T
        band = np.zeros((lolo.shape[0] // 2, lolo.shape[1] // 2, 6), dtype=np.complex128)
        band[:, :, [0, 5]] = _q2c(_coldfilt(hi, _H0B, _H0A).T)
        band[:, :, [2, 3]] = _q2c(_coldfilt(lo, _H1B, _H1A).T)
        band[:, :, [1, 4]] = _q2c(_coldfilt(hi, _H1B, _H1A).T)
        highpasses.append(band)

    return Pyramid(lolo, tuple(highpasses), (h, w), pad)


def inverse(pyramid: Pyramid) -> np.ndarray:
    """Synthesize the image from a (possibly modified) pyramid."""
    hp = pyramid.highpasses
    if len(hp) < 1:
        raise ValueError("pyramid has no detail levels")
    for i in range(1, len(hp)):
        if hp[i].shape[:2] != (hp[i - 1].shape[0] // 2, hp[i - 1].shape[1] // 2) or hp[i].shape[2] != 6:
            raise ValueError("sub-band sizes do not halve between levels")
    if tuple(pyramid.lowpass.shape) != (2 * hp[-1].shape[0], 2 * hp[-1].shape[1]) or hp[0].shape[2] != 6:
        raise ValueError("lowpass band does not match the coarsest detail level")

    z = np.asarray(pyramid.lowpass, dtype=np.float64)
    for level in range(len(hp), 1, -1):
        band = hp[level - 1]
        lh = _c2q(band[:, :, [0, 5]])
        hl = _c2q(band[:, :, [2, 3]])
        hh = _c2q(band[:, :, [1, 4]])
        y1 = _colifilt(z, _G0B, _G0A) + _colifilt(lh, _G1B, _G1A)
        y2 = _colifilt(hl, _G0B, _G0A) + _colifilt(hh, _G1B, _G1A)
        z = (_colifilt(y1.T, _G0B, _G0A) + _colifilt(y2.T, _G1B, _G1A)).T

    band = hp[0]
    lh = _c2q(band[:, :, [0, 5]])
    hl = _c2q(band[:, :, [2, 3]])
    hh = _c2q(band[:, :, [1, 4]])
    y1 = _colfilter(z, _G0O) + _colfilter(lh, _G1O)
    y2 = _colfilter(hl, _G0O) + _colfilter(hh, _G1O)
    z = (_colfilter(y1.T, _G0O) + _colfilter(y2.T, _G1O)).T

    h, w = pyramid.original_shape
    return z[:h, :w].copy()


def level_energies(pyramid: Pyramid) -> np.ndarray:
    return np.array([np.sum(np.abs(h) ** 2) for h in pyramid.highpasses])


def shift_invariance_probe(image, translation=(1, 1), levels: int = 4,
                           transform=None) -> np.ndarray:
    """Per-level detail energy of the circularly shifted image over the original.

    ``transform`` maps ``(image, levels)`` to a list of per-level energies;
    it defaults to this module's DTCWT and exists so other transforms can
    be probed the same way.
    """
    x = as_real_image(image)
    if transform is None:
        def transform(img, n):
            return level_energies(forward(img, n))
    base = np.asarray(transform(x, levels), dtype=np.float64)
    if tuple(translation) == (0, 0):
        return np.ones_like(base)
    moved = np.asarray(transform(np.roll(x, tuple(translation), axis=(0, 1)), levels), dtype=np.float64)
    return moved / base


_MAGIC = b"DTCP"
_VERSION = 1


def pyramid_to_bytes(pyramid: Pyramid) -> bytes:
    """Serialize as ``DTCP`` container: little-endian header then f64 payload."""
    buf = io.BytesIO()
    buf.write(_MAGIC)
    buf.write(struct.pack("<HH", _VERSION, pyramid.levels))
    buf.write(struct.pack("<4I", *pyramid.original_shape, *pyramid.pad))
    buf.write(struct.pack("<2I", *pyramid.lowpass.shape))
    for hp in pyramid.highpasses:
        buf.write(struct.pack("<2I", *hp.shape[:2]))
    buf.write(np.ascontiguousarray(pyramid.lowpass, dtype="<f8").tobytes())
    for hp in pyramid.highpasses:
        # band-major, each band row-major, re/im interleaved
        bands = np.ascontiguousarray(np.moveaxis(hp, 2, 0), dtype="<c16")
        buf.write(bands.tobytes())
    return buf.getvalue()


def pyramid_from_bytes(data: bytes) -> Pyramid:
    if data[:4] != _MAGIC:
        raise ValueError("not a DTCP pyramid container")
    off = 4
    version, levels = struct.unpack_from("<HH", data, off)
    off += 4
    if version != _VERSION:
        raise ValueError(f"unsupported DTCP version {version}")
    oh, ow, ph, pw = struct.unpack_from("<4I", data, off)
    off += 16
    lh, lw = struct.unpack_from("<2I", data, off)
    off += 8
    dims = []
    for _ in range(levels):
        dims.append(struct.unpack_from("<2I", data, off))
        off += 8
    low = np.frombuffer(data, dtype="<f8", count=lh * lw, offset=off).reshape(lh, lw)
    off += 8 * lh * lw
    highs = []
    for bh, bw in dims:
        n = 6 * bh * bw
        bands = np.frombuffer(data, dtype="<c16", count=n, offset=off).reshape(6, bh, bw)
        off += 16 * n
        highs.append(np.moveaxis(bands, 0, 2).astype(np.complex128))
    if off != len(data):
        raise ValueError("trailing bytes in DTCP container")
    return Pyramid(low.astype(np.float64), tuple(highs), (oh, ow), (ph, pw))
