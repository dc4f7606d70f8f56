"""Gaussian-mixture prior over 10-slot local-phase vectors.

Phases are treated as plain reals in ``(-pi, pi]`` (no circular
statistics) and every component has a diagonal covariance.  Components
are indexed from 0 in this API; slot numbers in docstrings follow the
1-based neighbourhood order of :mod:`phaseforge.graph`.
"""

from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from . import dtcwt, graph

log = logging.getLogger(__name__)

FORMAT = "phase-gmm/1"
DIM = 10
VAR_FLOOR = 1e-4
MIN_R_PARAMS = 50.0
MARK_THRESHOLD = 0.8


class BudgetError(ValueError):
    """Too few samples per trainable parameter."""

    def __init__(self, budget: "TrainingBudget"):
        super().__init__(
            f"r_params = {budget.r_params:.2f} <= {MIN_R_PARAMS:g} "
            f"({budget.n_samples} samples, {budget.n_params} parameters)")
        self.budget = budget


@dataclass(frozen=True)
class TrainingBudget:
    n_samples: int
    k: int
    m: int = DIM
    r: int = 1

    @property
    def n_params(self) -> int:
        return (self.m**self.r + self.m) * self.k + self.k

    @property
    def r_params(self) -> float:
        return self.n_samples / self.n_params


@dataclass(frozen=True)
class PhaseGmm:
    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    training_meta: dict = field(default_factory=dict)
    trace: tuple = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64)
        mu = np.array(self.means, dtype=np.float64)
        var = np.array(self.variances, dtype=np.float64)
        if mu.ndim != 2 or var.shape != mu.shape or w.shape != (mu.shape[0],):
            raise ValueError(f"inconsistent shapes: weights {w.shape}, means {mu.shape}, variances {var.shape}")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(mu)) and np.all(np.isfinite(var))):
            raise ValueError("non-finite model parameters")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("weights must be nonnegative and sum to 1")
        if np.any(var <= 0):
            raise ValueError("variances must be positive")
        for name, a in (("weights", w), ("means", mu), ("variances", var)):
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def k(self) -> int:
        return self.weights.size

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def log_joint(self, x, present=None, extra_var: float = 0.0) -> np.ndarray:
        """``log(pi_k N(x; mu_k, Sigma_k + extra_var I))`` of shape ``(n, K)``.

        With a boolean ``present`` mask (same shape as ``x``) absent
        coordinates are marginalized out, which for a diagonal covariance
        is just dropping them.
        """
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.dim:
            raise ValueError(f"expected {self.dim}-dim vectors, got {x.shape[1]}")
        var = self.variances + extra_var
        prec = 1.0 / var
        if present is None:
            quad = (x * x) @ prec.T - 2.0 * x @ (self.means * prec).T + np.sum(self.means**2 * prec, axis=1)
            logdet = np.sum(np.log(2 * np.pi * var), axis=1)
            return np.log(self.weights) - 0.5 * (quad + logdet)
        m = np.asarray(present, dtype=np.float64)
        xz = np.where(m > 0, x, 0.0)
        quad = (xz * xz) @ prec.T - 2.0 * xz @ (self.means * prec).T + m @ (self.means**2 * prec).T
        logdet = m @ np.log(2 * np.pi * var).T
        return np.log(self.weights) - 0.5 * (quad + logdet)

    def log_likelihood(self, x) -> float:
        """Mean per-sample log-likelihood."""
        return float(np.mean(logsumexp(self.log_joint(x), axis=1)))

    def posteriors(self, x, present=None) -> np.ndarray:
        lj = self.log_joint(x, present)
        return np.exp(lj - logsumexp(lj, axis=1, keepdims=True))

    def to_dict(self) -> dict:
        return {
            "format": FORMAT,
            "K": self.k,
            "dim": self.dim,
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "diag_covariances": self.variances.tolist(),
            "training_meta": self.training_meta,
        }

    @classmethod
    def from_dict(cls, doc: dict, allow_any_dim: bool = False) -> "PhaseGmm":
        if doc.get("format") != FORMAT:
            raise ValueError(f"unsupported model format {doc.get('format')!r}")
        model = cls(doc["weights"], doc["means"], doc["diag_covariances"], dict(doc.get("training_meta", {})))
        if model.k != doc["K"] or model.dim != doc["dim"]:
            raise ValueError("K/dim header disagrees with parameter arrays")
        if model.dim != DIM and not allow_any_dim:
            raise ValueError(f"model dim {model.dim} != {DIM}")
        return model


def save(model: PhaseGmm, path) -> None:
    Path(path).write_text(dumps(model))


def dumps(model: PhaseGmm) -> str:
    return json.dumps(model.to_dict(), indent=1, sort_keys=True) + "\n"


def load(path, allow_any_dim: bool = False) -> PhaseGmm:
    return PhaseGmm.from_dict(json.loads(Path(path).read_text()), allow_any_dim)


def _kmeans_pp(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    centers = [x[rng.integers(x.shape[0])]]
    d2 = np.sum((x - centers[0]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        idx = rng.choice(x.shape[0], p=d2 / total) if total > 0 else rng.integers(x.shape[0])
        centers.append(x[idx])
        d2 = np.minimum(d2, np.sum((x - x[idx]) ** 2, axis=1))
    return np.array(centers)


def _initial_model(x: np.ndarray, k: int, rng: np.random.Generator, subset: int, floor: float):
    sub = x if x.shape[0] <= subset else x[rng.choice(x.shape[0], subset, replace=False)]
    centers = _kmeans_pp(sub, k, rng)
    d2 = np.sum(x**2, axis=1)[:, None] - 2 * x @ centers.T + np.sum(centers**2, axis=1)
    label = np.argmin(d2, axis=1)
    counts = np.bincount(label, minlength=k).astype(np.float64)
    means = centers.copy()
    var = np.tile(np.maximum(x.var(axis=0), floor), (k, 1))
    for j in np.flatnonzero(counts > 0):
        xj = x[label == j]
        means[j] = xj.mean(axis=0)
        if xj.shape[0] > 1:
            var[j] = np.maximum(xj.var(axis=0), floor)
    # keep empty clusters alive with a tiny share
    weights = np.maximum(counts, 1.0)
    return weights / weights.sum(), means, var


def em_fit(samples, k: int, max_iters: int = 500, tol: float = 1e-6, seed: int = 0,
           var_floor: float = VAR_FLOOR, force: bool = False, init_subset: int = 10_000,
           meta: dict | None = None) -> PhaseGmm:
    """Fit a diagonal-covariance GMM by expectation-maximization.

    Initialisation is k-means++ on a random subset followed by one Lloyd
    assignment over all samples.  The M-step clamps every variance at
    ``var_floor``; the clamped update is still the constrained maximiser,
    so the mean log-likelihood in ``model.trace`` never decreases.

    Raises
    ------
    BudgetError
        If fewer than 50 samples per parameter are available and ``force``
        is false.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("samples must be a non-empty (n, dim) array")
    if not np.all(np.isfinite(x)):
        raise ValueError("samples contain non-finite values")
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > x.shape[0]:
        raise ValueError(f"k = {k} exceeds the {x.shape[0]} samples")
    budget = TrainingBudget(x.shape[0], k, x.shape[1])
    if budget.r_params <= MIN_R_PARAMS:
        if not force:
            raise BudgetError(budget)
        warnings.warn(str(BudgetError(budget)), RuntimeWarning, stacklevel=2)

    from .rng import make_rng

    rng = make_rng(seed, "em-init")
    w, mu, var = _initial_model(x, k, rng, init_subset, var_floor)
    model = PhaseGmm(w, mu, var)
    lj = model.log_joint(x)
    lse = logsumexp(lj, axis=1, keepdims=True)
    trace = [float(lse.mean())]
    floored = 0
    x2 = x * x
    for _ in range(max_iters):
        resp = np.exp(lj - lse)
        nk = resp.sum(axis=0)
        nk_safe = np.maximum(nk, 1e-300)
        w = nk / nk.sum()
        mu = (resp.T @ x) / nk_safe[:, None]
        var = (resp.T @ x2) / nk_safe[:, None] - mu**2
        hit = var < var_floor
        if hit.any():
            floored += int(hit.sum())
            var = np.where(hit, var_floor, var)
        dead = nk < 1e-10
        if dead.any():
            # a vanished component keeps its last parameters at negligible weight
            mu[dead], var[dead] = model.means[dead], model.variances[dead]
            w = np.where(dead, 1e-300, w)
            w = w / w.sum()
        model = PhaseGmm(w, mu, var)
        lj = model.log_joint(x)
        lse = logsumexp(lj, axis=1, keepdims=True)
        trace.append(float(lse.mean()))
        if abs(trace[-1] - trace[-2]) <= tol * abs(trace[-2]):
            break
    if floored:
        log.info("variance floor %.1e applied %d times", var_floor, floored)
    info = {
        "n_samples": int(x.shape[0]),
        "n_params": budget.n_params,
        "r_params": budget.r_params,
        "iterations": len(trace) - 1,
        "log_likelihood": trace[-1],
        "seed": int(seed),
        "variance_floor_hits": floored,
    }
    info.update(meta or {})
    return PhaseGmm(model.weights, model.means, model.variances, info, tuple(trace))


@dataclass(frozen=True)
class CrossValidation:
    ks: np.ndarray
    scores: np.ndarray
    fold_scores: np.ndarray

    def to_rows(self):
        return [{"K": int(k), "heldout_log_likelihood": float(s)} for k, s in zip(self.ks, self.scores)]


def fold_indices(n: int, folds: int, seed: int) -> list:
    from .rng import make_rng

    perm = make_rng(seed, "cv-folds").permutation(n)
    return np.array_split(perm, folds)


def cross_validate(samples, ks, folds: int = 10, seed: int = 0, **em_kwargs) -> CrossValidation:
    """Mean held-out log-likelihood per candidate K over ``folds`` random splits."""
    x = np.asarray(samples, dtype=np.float64)
    ks = np.asarray(list(ks), dtype=int)
    if folds < 2:
        raise ValueError("need at least 2 folds")
    need = folds * int(ks.max()) * x.shape[1]
    if x.shape[0] < need:
        raise ValueError(f"cross-validation needs >= {need} samples, got {x.shape[0]}")
    parts = fold_indices(x.shape[0], folds, seed)
    em_kwargs.setdefault("force", True)
    fold_scores = np.zeros((ks.size, folds))
    for j, held in enumerate(parts):
        train = np.concatenate([p for i, p in enumerate(parts) if i != j])
        for i, k in enumerate(ks):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                m = em_fit(x[train], int(k), seed=seed, **em_kwargs)
            fold_scores[i, j] = m.log_likelihood(x[held])
    return CrossValidation(ks, fold_scores.mean(axis=1), fold_scores)


def _line_sse(t: np.ndarray, s: np.ndarray) -> float:
    if t.size <= 2:
        return 0.0
    coef = np.polyfit(t, s, 1)
    return float(np.sum((np.polyval(coef, t) - s) ** 2))


def find_elbow(scores, ks=None) -> int:
    """Breakpoint of the best two-segment linear fit.

    Both segments contain the breakpoint; candidates are the interior
    points and ties go to the smallest K.  ``ks`` defaults to the indices
    ``0 .. n-1``.
    """
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim != 1 or s.size < 4:
        raise ValueError("find_elbow needs at least 4 points")
    t = np.arange(s.size, dtype=np.float64) if ks is None else np.asarray(ks, dtype=np.float64)
    if t.shape != s.shape:
        raise ValueError("ks and scores differ in length")
    sse = np.array([_line_sse(t[:b + 1], s[:b + 1]) + _line_sse(t[b:], s[b:]) for b in range(1, s.size - 1)])
    slack = 1e-12 * max(1.0, float(np.sum((s - s.mean()) ** 2)))
    b = 1 + int(np.flatnonzero(sse <= sse.min() + slack)[0])
    return int(t[b]) if ks is not None else b


def congruency_from_eta(eta) -> float:
    eta = np.asarray(eta, dtype=np.float64)
    return float(abs(np.mean(np.cos(eta - eta.mean()))))


def scale_phases(mean: np.ndarray) -> np.ndarray:
    """Scale-normalized phases ``(2*parent, center, mean(children)/2)``."""
    mean = np.asarray(mean, dtype=np.float64)
    return np.array([2.0 * mean[9], mean[0], 0.5 * np.mean(mean[5:9])])


def average_congruency(model: PhaseGmm, k: int) -> float:
    """Average congruency of component ``k`` (0-based), a value in [0, 1]."""
    if not 0 <= k < model.k:
        raise IndexError(f"component {k} out of range for K = {model.k}")
    return congruency_from_eta(scale_phases(model.means[k]))


def posterior_component(model: PhaseGmm, v) -> tuple[int, float]:
    p = model.posteriors(np.asarray(v, dtype=np.float64)[None, :])[0]
    k = int(np.argmax(p))
    return k, float(p[k])


@dataclass(frozen=True)
class CongruencyDemo:
    """Marker maps per component, ranked by average congruency.

    ``maps[k][level]`` is a boolean ``(h, w, 6)`` array over the detail
    band of that level (all False outside intermediate levels).
    """

    order: tuple
    congruency: tuple
    maps: dict

    def marker_count(self, k: int) -> int:
        return int(sum(int(m.sum()) for m in self.maps[k].values()))


def congruency_demo(model: PhaseGmm, image, levels: int = 4, fraction: float = 0.2,
                    threshold: float = MARK_THRESHOLD, min_magnitude: float = 1e-8) -> CongruencyDemo:
    """Mark strong coefficients whose sub-tree posterior exceeds ``threshold``."""
    pyr = image if isinstance(image, dtcwt.Pyramid) else dtcwt.forward(image, levels)
    ag = np.array([average_congruency(model, k) for k in range(model.k)])
    order = tuple(int(i) for i in np.argsort(-ag, kind="stable"))
    maps = {k: {lvl: np.zeros(hp.shape, bool) for lvl, hp in enumerate(pyr.highpasses, 1)}
            for k in range(model.k)}
    mask = graph.threshold_top_energy(pyr, fraction=fraction)
    trees = graph.extract_subtrees(pyr, mask=mask, min_magnitude=min_magnitude)
    if len(trees):
        post = model.posteriors(trees.phases)
        best = np.argmax(post, axis=1)
        keep = post[np.arange(len(trees)), best] > threshold
        for (lvl, o, x, y), k in zip(trees.nodes[keep], best[keep]):
            maps[int(k)][int(lvl)][x, y, o - 1] = True
    return CongruencyDemo(order, tuple(float(ag[i]) for i in order), maps)


def collect_samples(images, levels: int = 4, per_image: int | None = None,
                    orientation: int | None = None, child_map: str = "dyadic") -> graph.SubTreeSet:
    """Top-energy full sub-trees from each image (default ``h*w/64`` per image)."""
    sets = []
    for img in images:
        pyr = dtcwt.forward(img, levels)
        eligible = []
        for lvl in range(1, levels + 1):
            e = np.broadcast_to(graph.full_node_mask(pyr, lvl)[..., None], pyr.highpasses[lvl - 1].shape).copy()
            if orientation is not None:
                e[..., [o for o in range(6) if o != orientation - 1]] = False
            eligible.append(e)
        n_ok = int(sum(int(e.sum()) for e in eligible))
        want = per_image if per_image is not None else img.shape[0] * img.shape[1] // 64
        mask = graph.threshold_top_energy(pyr, count=min(want, n_ok), eligible=eligible)
        sets.append(graph.extract_subtrees(pyr, orientation=orientation, mask=mask, child_map=child_map))
    return graph.SubTreeSet.concatenate(sets)
