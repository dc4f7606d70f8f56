"""Graph view of a DTCWT pyramid.

Every detail coefficient ``c(level, orientation, x, y)`` is a node with up
to nine neighbours: four spatial neighbours on the same level, four
children on the next finer level and one parent on the next coarser
level.  ``x`` indexes rows and ``y`` columns of a sub-band; level 1 is the
finest.  The 10-slot neighbourhood vector is ordered

    [c(x,y), c(x-1,y), c(x,y-1), c(x+1,y), c(x,y+1),
     child_1 .. child_4, parent]

Children follow the dyadic cover ``(2x+dx, 2y+dy)`` by default; the
``"cross"`` map uses ``(2x-1,2y), (2x,2y-1), (2x+1,2y), (2x,2y+1)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dtcwt
from .numerics import as_real_image, kurtosis, wrap_phase, write_image

CHILD_OFFSETS = {
    "dyadic": ((0, 0), (0, 1), (1, 0), (1, 1)),
    "cross": ((-1, 0), (0, -1), (1, 0), (0, 1)),
}
SPATIAL_OFFSETS = ((-1, 0), (0, -1), (1, 0), (0, 1))

CENTER, PARENT = 0, 9
SPATIAL = slice(1, 5)
CHILDREN = slice(5, 9)


@dataclass(frozen=True, order=True)
class NodeId:
    level: int
    orientation: int
    x: int
    y: int


@dataclass(frozen=True)
class SubTree:
    center: NodeId
    phases: np.ndarray
    magnitudes: np.ndarray


@dataclass(frozen=True)
class SubTreeSet:
    """Column-stacked sub-trees; ``nodes`` rows are ``(level, orientation, x, y)``."""

    nodes: np.ndarray
    phases: np.ndarray
    magnitudes: np.ndarray

    def __len__(self) -> int:
        return len(self.nodes)

    def __getitem__(self, i: int) -> SubTree:
        return SubTree(NodeId(*(int(v) for v in self.nodes[i])), self.phases[i], self.magnitudes[i])

    @staticmethod
    def concatenate(sets) -> "SubTreeSet":
        sets = list(sets)
        if not sets:
            return SubTreeSet(np.zeros((0, 4), int), np.zeros((0, 10)), np.zeros((0, 10)))
        return SubTreeSet(
            np.concatenate([s.nodes for s in sets]),
            np.concatenate([s.phases for s in sets]),
            np.concatenate([s.magnitudes for s in sets]),
        )


def _shifted(band: np.ndarray, dx: int, dy: int) -> np.ndarray:
    """``out[x, y] = band[x + dx, y + dy]``, NaN outside the band."""
    h, w = band.shape[:2]
    out = np.full(band.shape, np.nan, dtype=band.dtype)
    xs_out = slice(max(0, -dx), min(h, h - dx))
    ys_out = slice(max(0, -dy), min(w, w - dy))
    xs_in = slice(max(0, dx), min(h, h + dx))
    ys_in = slice(max(0, dy), min(w, w + dy))
    out[xs_out, ys_out] = band[xs_in, ys_in]
    return out


def stack_neighbors(bands, level: int, child_map: str = "dyadic") -> np.ndarray:
    """Neighbourhood stack ``(h, w, 6, 10)`` of per-level arrays ``(h, w, 6)``.

    ``bands`` is any list shaped like a pyramid's detail levels (complex
    coefficients, real phases, ...).  Missing neighbours (band border, no
    finer or coarser level) are NaN.
    """
    if child_map not in CHILD_OFFSETS:
        raise ValueError(f"unknown child map {child_map!r}")
    dtype = np.result_type(bands[level - 1].dtype, np.float64)
    band = np.asarray(bands[level - 1], dtype=dtype)
    h, w = band.shape[:2]
    out = np.full((h, w, 6, 10), np.nan, dtype=dtype)
    out[..., CENTER] = band
    for k, (dx, dy) in enumerate(SPATIAL_OFFSETS):
        out[..., 1 + k] = _shifted(band, dx, dy)
    if level > 1:
        finer = np.asarray(bands[level - 2], dtype=dtype)
        for k, (dx, dy) in enumerate(CHILD_OFFSETS[child_map]):
            out[..., 5 + k] = _shifted(finer, dx, dy)[0::2, 0::2][:h, :w]
    if level < len(bands):
        coarser = bands[level]
        out[..., PARENT] = np.repeat(np.repeat(coarser, 2, axis=0), 2, axis=1)[:h, :w]
    return out


def neighborhood(pyramid: dtcwt.Pyramid, level: int, child_map: str = "dyadic") -> np.ndarray:
    """Complex neighbourhood stack of shape ``(h, w, 6, 10)`` for one level."""
    return stack_neighbors(pyramid.highpasses, level, child_map)


def full_node_mask(pyramid: dtcwt.Pyramid, level: int) -> np.ndarray:
    """Boolean ``(h, w)`` map of nodes owning all nine neighbours."""
    h, w = pyramid.highpasses[level - 1].shape[:2]
    m = np.zeros((h, w), dtype=bool)
    if 1 < level < pyramid.levels:
        m[1:h - 1, 1:w - 1] = True
    return m


@dataclass(frozen=True)
class EnergyMask:
    """Per-level boolean selection over detail coefficients, shape ``(h, w, 6)`` each."""

    masks: tuple
    count: int
    fraction: float | None = None

    def __len__(self) -> int:
        return int(sum(int(m.sum()) for m in self.masks))

    def complement(self) -> "EnergyMask":
        masks = tuple(~m for m in self.masks)
        return EnergyMask(masks, int(sum(int(m.sum()) for m in masks)), None)

    def __and__(self, other: "EnergyMask") -> "EnergyMask":
        masks = tuple(a & b for a, b in zip(self.masks, other.masks))
        return EnergyMask(masks, int(sum(int(m.sum()) for m in masks)), None)

    @staticmethod
    def empty(pyramid: dtcwt.Pyramid) -> "EnergyMask":
        return EnergyMask(tuple(np.zeros(h.shape, bool) for h in pyramid.highpasses), 0, 0.0)


def _canonical(arrays) -> np.ndarray:
    """Flatten per-level ``(h, w, 6)`` arrays in (level, orientation, x, y) order."""
    return np.concatenate([np.moveaxis(a, 2, 0).ravel() for a in arrays])


def _uncanonical(flat: np.ndarray, like) -> tuple:
    out, off = [], 0
    for a in like:
        h, w, o = a.shape
        n = h * w * o
        out.append(np.moveaxis(flat[off:off + n].reshape(o, h, w), 0, 2))
        off += n
    return tuple(out)


def threshold_top_energy(pyramid: dtcwt.Pyramid, count: int | None = None,
                         fraction: float | None = None, eligible=None) -> EnergyMask:
    """Select the ``count`` (or ``fraction``) largest-magnitude detail coefficients.

    Ties at the cut go to the lower :class:`NodeId`.  ``eligible`` is an
    optional per-level boolean list restricting the candidates; the
    fraction is then taken of the eligible count.  The lowpass band is
    never selected.
    """
    if (count is None) == (fraction is None):
        raise ValueError("give exactly one of count or fraction")
    mags = _canonical(pyramid.magnitudes())
    if eligible is None:
        ok = np.ones(mags.size, dtype=bool)
    else:
        ok = _canonical([np.broadcast_to(
            e[..., None] if e.ndim == 2 else e, h.shape) for e, h in zip(eligible, pyramid.highpasses)])
    n_ok = int(ok.sum())
    if fraction is not None:
        if not 0.0 <= fraction <= 1.0:
            raise ValueError("fraction must lie in [0, 1]")
        count = int(round(fraction * n_ok))
    if count < 0 or count > n_ok:
        raise ValueError(f"count {count} exceeds the {n_ok} candidate coefficients")
    key = np.where(ok, -mags, np.inf)
    order = np.argsort(key, kind="stable")
    sel = np.zeros(mags.size, dtype=bool)
    sel[order[:count]] = True
    return EnergyMask(_uncanonical(sel, pyramid.highpasses), count, fraction)


def threshold_per_band(pyramid: dtcwt.Pyramid, fraction: float) -> EnergyMask:
    """Select the top ``fraction`` of magnitudes within every (level, orientation) band.

    Detail magnitudes grow with scale, so a single global cut mostly
    picks coarse coefficients; a per-band cut gives every scale its own
    strong class.  Ties go to the lower spatial index.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("fraction must lie in [0, 1]")
    masks = []
    for hp in pyramid.highpasses:
        h, w, n_o = hp.shape
        m = np.zeros(hp.shape, dtype=bool)
        k = int(round(fraction * h * w))
        for o in range(n_o):
            order = np.argsort(-np.abs(hp[:, :, o]).ravel(), kind="stable")
            flat = np.zeros(h * w, dtype=bool)
            flat[order[:k]] = True
            m[:, :, o] = flat.reshape(h, w)
        masks.append(m)
    return EnergyMask(tuple(masks), int(sum(int(m.sum()) for m in masks)), fraction)


def extract_subtrees(pyramid: dtcwt.Pyramid, orientation: int | None = None,
                     mask: EnergyMask | None = None, min_magnitude: float = 0.0,
                     child_map: str = "dyadic") -> SubTreeSet:
    """Collect the 10-slot phase/magnitude vectors of every full node.

    Centers come from the intermediate levels ``2 .. L-1`` with the band
    border dropped.  ``orientation`` (1-based) restricts to one band;
    ``mask`` keeps only selected centers; centers with magnitude not
    exceeding ``min_magnitude`` are skipped.
    """
    if pyramid.levels < 3:
        raise ValueError("sub-tree extraction needs at least 3 levels")
    sets = []
    orients = range(6) if orientation is None else [orientation - 1]
    for level in range(2, pyramid.levels):
        nb = neighborhood(pyramid, level, child_map)
        full = full_node_mask(pyramid, level)
        for o in orients:
            keep = full & (np.abs(nb[:, :, o, CENTER]) > min_magnitude)
            if mask is not None:
                keep &= mask.masks[level - 1][:, :, o]
            xs, ys = np.nonzero(keep)
            vec = nb[xs, ys, o, :]
            nodes = np.column_stack([np.full(xs.size, level), np.full(xs.size, o + 1), xs, ys])
            sets.append(SubTreeSet(nodes.astype(np.int64), _phase(vec), np.abs(vec)))
    return SubTreeSet.concatenate(sets)


def _phase(c: np.ndarray) -> np.ndarray:
    p = np.angle(c)
    return np.where(p <= -np.pi, np.pi, p)


def _uniform_phase(rng: np.random.Generator, size) -> np.ndarray:
    # uniform on (-pi, pi]
    return np.pi - rng.uniform(0.0, 2 * np.pi, size)


def randomize_phase_local(pyramid: dtcwt.Pyramid, mask: EnergyMask,
                          rng: np.random.Generator) -> dtcwt.Pyramid:
    """Redraw the phase of every masked coefficient uniformly; magnitudes kept."""
    out = []
    for hp, m in zip(pyramid.highpasses, mask.masks):
        n = int(m.sum())
        if n == 0:
            out.append(hp)
            continue
        new = hp.copy()
        new[m] = np.abs(hp[m]) * np.exp(1j * _uniform_phase(rng, n))
        out.append(new)
    return pyramid.with_highpasses(out)


@dataclass(frozen=True)
class PathSet:
    """Coarse-to-fine paths anchored on finest-level nodes.

    Row ``i`` is the path of orientation ``orientation[i]`` (1-based)
    through ``(x[i] >> (l-1), y[i] >> (l-1))`` on each level ``l``;
    ``phases``/``magnitudes`` have one column per level, finest first.
    """

    orientation: np.ndarray
    x: np.ndarray
    y: np.ndarray
    phases: np.ndarray
    magnitudes: np.ndarray

    def __len__(self) -> int:
        return len(self.orientation)

    @property
    def mean_magnitude(self) -> np.ndarray:
        return self.magnitudes.mean(axis=1)


def all_paths(pyramid: dtcwt.Pyramid) -> PathSet:
    h, w = pyramid.highpasses[0].shape[:2]
    o, x, y = np.meshgrid(np.arange(6), np.arange(h), np.arange(w), indexing="ij")
    o, x, y = o.ravel(), x.ravel(), y.ravel()
    coeffs = np.stack(
        [hp[x >> lvl, y >> lvl, o] for lvl, hp in enumerate(pyramid.highpasses)], axis=1)
    return PathSet(o + 1, x, y, _phase(coeffs), np.abs(coeffs))


def low_energy_paths(pyramid: dtcwt.Pyramid, threshold: float) -> PathSet:
    """Paths whose mean magnitude is strictly below ``threshold``."""
    paths = all_paths(pyramid)
    keep = paths.mean_magnitude < threshold
    return PathSet(paths.orientation[keep], paths.x[keep], paths.y[keep],
                   paths.phases[keep], paths.magnitudes[keep])


def path_threshold_for_fraction(pyramid: dtcwt.Pyramid, fraction: float) -> float:
    """Threshold selecting (up to ties) ``fraction`` of all paths."""
    means = np.sort(all_paths(pyramid).mean_magnitude)
    k = int(round(fraction * means.size))
    if k >= means.size:
        return float("inf")
    if k <= 0:
        return 0.0
    return float(means[k])


def path_mask(pyramid: dtcwt.Pyramid, paths: PathSet) -> EnergyMask:
    masks = [np.zeros(hp.shape, dtype=bool) for hp in pyramid.highpasses]
    o = paths.orientation - 1
    for lvl, m in enumerate(masks):
        m[paths.x >> lvl, paths.y >> lvl, o] = True
    return EnergyMask(tuple(masks), int(sum(int(m.sum()) for m in masks)))


def randomize_paths(pyramid: dtcwt.Pyramid, paths: PathSet,
                    rng: np.random.Generator) -> dtcwt.Pyramid:
    """Redraw every phase lying on any of ``paths`` (shared nodes drawn once)."""
    return randomize_phase_local(pyramid, path_mask(pyramid, paths), rng)


def ks_uniform(phases) -> float:
    """Kolmogorov-Smirnov distance of phase samples against U(-pi, pi)."""
    x = np.sort(np.asarray(phases, dtype=np.float64).ravel())
    n = x.size
    if n == 0:
        raise ValueError("no samples")
    cdf = np.clip((x + np.pi) / (2 * np.pi), 0.0, 1.0)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - cdf), np.max(cdf - (i - 1) / n)))


@dataclass
class StrongWeakReport:
    """Statistics of strong vs weak coefficients.

    ``ks[cls][(scale, orientation)]`` is the KS distance of the phase
    marginal from uniform; ``joint[cls][orientation]`` is the normalized
    64x64 histogram of wrapped phase differences between consecutive
    scales; ``max_frequency`` and ``kurtosis`` are keyed the same way.
    """

    scales: tuple
    ks: dict
    counts: dict
    joint: dict
    max_frequency: dict
    kurtosis: dict

    def rows(self):
        for cls in ("strong", "weak"):
            for (s, o), d in sorted(self.ks[cls].items()):
                yield {
                    "class": cls, "scale": s, "orientation": o, "ks_distance": d,
                    "count": self.counts[cls][(s, o)],
                    "max_frequency": self.max_frequency[cls].get(o, float("nan")),
                    "kurtosis": self.kurtosis[cls].get(o, float("nan")),
                }

    def to_csv(self, path) -> None:
        import csv

        rows = list(self.rows())
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            writer.writerows(rows)

    def write_heatmaps(self, directory) -> list:
        directory = Path(directory)
        written = []
        for cls, per_o in self.joint.items():
            for o, hist in per_o.items():
                p = directory / f"joint_{cls}_o{o}.pgm"
                peak = hist.max()
                write_image(p, hist / peak if peak > 0 else hist)
                written.append(p)
        return written


def joint_phase_differences(pyramid: dtcwt.Pyramid, scales=(2, 3, 4)):
    """Wrapped differences along ``scales`` for every node of the first scale.

    Returns ``(d1, d2)`` each shaped like the first scale's band, with
    ``d1 = phase(s1) - phase(s2)`` and ``d2 = phase(s2) - phase(s3)``.
    """
    s1, s2, s3 = scales
    if s3 > pyramid.levels:
        raise ValueError(f"pyramid has {pyramid.levels} levels, scales {scales} requested")
    p = pyramid.phases()
    h, w = p[s1 - 1].shape[:2]
    x, y = np.mgrid[0:h, 0:w]
    a = p[s1 - 1]
    b = p[s2 - 1][x >> (s2 - s1), y >> (s2 - s1)]
    c = p[s3 - 1][x >> (s3 - s1), y >> (s3 - s1)]
    return wrap_phase(a - b), wrap_phase(b - c)


def strong_weak_statistics(pyramid: dtcwt.Pyramid, mask: EnergyMask, scales=(2, 3, 4),
                           bins: int = 64, match_sizes: bool = False,
                           rng: np.random.Generator | None = None) -> StrongWeakReport:
    """Marginal KS distances and joint phase-difference histograms per class.

    The maximal frequency of a histogram with few samples is inflated by
    counting noise, and the strong class is normally the smaller one.
    With ``match_sizes`` the larger class is randomly subsampled (per
    orientation) to the size of the smaller before histogramming, which
    removes that bias.
    """
    if match_sizes and rng is None:
        raise ValueError("match_sizes needs an rng")
    classes = {"strong": mask.masks, "weak": mask.complement().masks}
    ks, counts, joint, maxf, kurt = {}, {}, {}, {}, {}
    phases = pyramid.phases()
    d1, d2 = joint_phase_differences(pyramid, scales) if scales[-1] <= pyramid.levels else (None, None)
    edges = np.linspace(-np.pi, np.pi, bins + 1)
    for cls, masks in classes.items():
        ks[cls], counts[cls], joint[cls], maxf[cls], kurt[cls] = {}, {}, {}, {}, {}
        used = [s for s in scales if s <= pyramid.levels]
        if not any(masks[s - 1].any() for s in used):
            raise ValueError(f"empty {cls} class over scales {tuple(used)}")
        for s in used:
            for o in range(6):
                # a global threshold can empty single cells (e.g. coarse bands all strong)
                sel = masks[s - 1][:, :, o]
                n = int(sel.sum())
                ks[cls][(s, o + 1)] = ks_uniform(phases[s - 1][:, :, o][sel]) if n else float("nan")
                counts[cls][(s, o + 1)] = n
        if d1 is None:
            continue
        for o in range(6):
            sel = masks[scales[0] - 1][:, :, o]
            a, b = d1[:, :, o][sel], d2[:, :, o][sel]
            if match_sizes:
                n_min = min(int(sel.sum()), int((~sel).sum()))
                if a.size > n_min:
                    pick = np.sort(rng.choice(a.size, n_min, replace=False))
                    a, b = a[pick], b[pick]
            hist, _, _ = np.histogram2d(a, b, bins=[edges, edges])
            total = hist.sum()
            if total == 0:
                joint[cls][o + 1] = hist
                maxf[cls][o + 1] = float("nan")
                kurt[cls][o + 1] = float("nan")
                continue
            joint[cls][o + 1] = hist / total
            maxf[cls][o + 1] = float(hist.max() / total)
            samples = np.concatenate([a, b])
            kurt[cls][o + 1] = kurtosis(samples) if samples.size >= 4 and np.ptp(samples) > 0 else float("nan")
    return StrongWeakReport(tuple(scales), ks, counts, joint, maxf, kurt)


def max_frequency_sweep(pyramid: dtcwt.Pyramid, fractions=None, scales=(2, 3, 4), bins: int = 64,
                        scope: str = "band", match_sizes: bool = False, seed: int = 0):
    """Strong/weak maximal joint-histogram frequency over a threshold sweep.

    ``scope`` is ``"band"`` (per-band cut, :func:`threshold_per_band`) or
    ``"global"`` (:func:`threshold_top_energy`).  Returns ``(fractions,
    strong, weak)`` with ``strong``/``weak`` of shape ``(len(fractions), 6)``.
    """
    from .rng import make_rng

    if scope not in ("band", "global"):
        raise ValueError(f"unknown threshold scope {scope!r}")
    if fractions is None:
        fractions = np.round(np.arange(0.07, 0.2001, 0.01), 2)
    strong = np.zeros((len(fractions), 6))
    weak = np.zeros((len(fractions), 6))
    rng = make_rng(seed, "strong-weak") if match_sizes else None
    for i, f in enumerate(fractions):
        if scope == "band":
            mask = threshold_per_band(pyramid, float(f))
        else:
            mask = threshold_top_energy(pyramid, fraction=float(f))
        rep = strong_weak_statistics(pyramid, mask, scales, bins, match_sizes, rng)
        strong[i] = [rep.max_frequency["strong"][o] for o in range(1, 7)]
        weak[i] = [rep.max_frequency["weak"][o] for o in range(1, 7)]
    return np.asarray(fractions), strong, weak


def project_local_phase(degraded, reference: dtcwt.Pyramid) -> np.ndarray:
    """Impose the reference pyramid's detail phases on ``degraded``."""
    x = as_real_image(degraded, "degraded")
    if x.shape != tuple(reference.original_shape):
        raise ValueError(f"image {x.shape} does not match pyramid {reference.original_shape}")
    pyr = dtcwt.forward(x, reference.levels)
    new = [np.abs(a) * np.exp(1j * np.angle(b)) for a, b in zip(pyr.highpasses, reference.highpasses)]
    return dtcwt.inverse(pyr.with_highpasses(new))


@dataclass(frozen=True)
class GaussianityReport:
    kurtosis: float
    psnr: float
    ssim: float
    distorted: np.ndarray


def gaussianity_diagnostic(image, rng: np.random.Generator, sigma: float = 1.0,
                           levels: int = 4) -> GaussianityReport:
    """Kurtosis of the detail-coefficient marginal and the damage of global phase noise.

    The kurtosis pools the real parts of all detail coefficients; the
    image is then distorted with global Fourier phase noise of std
    ``sigma`` and scored against the original.
    """
    from .numerics import perturb_global_phase, psnr, ssim

    x = as_real_image(image)
    pyr = dtcwt.forward(x, levels)
    samples = np.concatenate([hp.real.ravel() for hp in pyr.highpasses])
    k = kurtosis(samples)
    deg = perturb_global_phase(x, sigma, rng)
    return GaussianityReport(k, psnr(x, deg), ssim(x, deg), deg)
