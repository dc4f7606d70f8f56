"""Command-line entry point: ``phaseforge <command> [options]``.

Every command writes its outputs atomically into ``--out`` together with a
``run.json`` holding the resolved configuration; ``phaseforge replay
run.json --out DIR`` re-runs it and produces byte-identical files.

Exit codes: 0 success, 2 invalid input or configuration, 3 guard
violation, 4 numerical abort.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import appendixcheck, denoise, dtcwt, graph, hqs, model, numerics, retrieval, textures
from .rng import make_rng

IMAGE_SUFFIXES = (".png", ".pgm", ".pnm", ".tif", ".tiff", ".jpg", ".jpeg", ".bmp")

EXIT_OK, EXIT_INPUT, EXIT_GUARD, EXIT_NUMERIC = 0, 2, 3, 4


class GuardError(Exception):
    """A request the tool refuses to carry out (e.g. evaluating on training data)."""


# ---------------------------------------------------------------- output helpers

def _atomic(path: Path, write) -> Path:
    """Call ``write(tmp_path)`` then rename over ``path``; the temp name keeps the suffix."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.stem}.", suffix=path.suffix, dir=path.parent)
    os.close(fd)
    try:
        write(tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _write_text(path: Path, text: str) -> Path:
    def w(tmp):
        with open(tmp, "w", newline="") as fh:
            fh.write(text)
    return _atomic(path, w)


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if np.isnan(v):
            return "nan"
        if np.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    if isinstance(v, np.integer):
        return int(v)
    return v


def _write_csv(path: Path, header, rows) -> Path:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return _write_text(path, buf.getvalue())


def _write_json(path: Path, doc) -> Path:
    return _write_text(path, json.dumps(doc, indent=1, sort_keys=True) + "\n")


def _write_image(path: Path, image) -> Path:
    return _atomic(path, lambda tmp: numerics.write_image(tmp, image))


def _move_into(tmpdir: Path, out: Path) -> None:
    for p in sorted(tmpdir.iterdir()):
        os.replace(p, out / p.name)


# ---------------------------------------------------------------- input helpers

def image_digest(image) -> str:
    """SHA-256 of an image's 8-bit quantization and shape."""
    a = np.round(np.clip(np.asarray(image, dtype=np.float64), 0, 1) * 255).astype(np.uint8)
    h = hashlib.sha256(np.asarray(a.shape, dtype="<u4").tobytes())
    h.update(np.ascontiguousarray(a).tobytes())
    return h.hexdigest()


def center_crop(image: np.ndarray, size: int | None) -> np.ndarray:
    if size is None:
        return image
    h, w = image.shape
    if size < 1 or size > h or size > w:
        raise ValueError(f"crop of {size}x{size} does not fit a {h}x{w} image")
    r, c = (h - size) // 2, (w - size) // 2
    return image[r : r + size, c : c + size]


def _resolve_images(paths) -> list:
    out = []
    for p in paths:
        p = Path(p).resolve()
        if p.is_dir():
            out.extend(sorted(q for q in p.iterdir() if q.suffix.lower() in IMAGE_SUFFIXES))
        elif p.exists():
            out.append(p)
        else:
            raise ValueError(f"no such image: {p}")
    return [str(p) for p in out]


def _corpus_paths(images) -> list | None:
    """Explicit ``--images``, else files under ``$PHASEFORGE_DATA``, else None."""
    if images:
        return _resolve_images(images)
    root = os.environ.get("PHASEFORGE_DATA")
    if root:
        found = _resolve_images([root])
        if not found:
            raise ValueError(f"PHASEFORGE_DATA={root} contains no images")
        return found
    return None


def _load(path: str) -> np.ndarray:
    try:
        return numerics.read_image(path)
    except (OSError, SyntaxError) as exc:
        raise ValueError(f"cannot decode {path}: {exc}") from exc


def _load_corpus(cfg: dict) -> list:
    """``(name, full image, crop)`` triples for a resolved config."""
    if cfg["images"] is None:
        corp = textures.corpus(cfg["size"] or 128, cfg["seed"])
        return [(name, img, img) for name, img in corp.items()]
    out = []
    for p in cfg["images"]:
        img = _load(p)
        out.append((Path(p).stem, img, center_crop(img, cfg["size"])))
    return out


def _parse_list(text: str, kind=float) -> list:
    try:
        return [kind(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ValueError(f"cannot parse list {text!r}") from exc


def _parse_range(text: str) -> list:
    """``"2:15"`` (inclusive) or ``"2,4,8"``."""
    if ":" in text:
        lo, hi = (int(v) for v in text.split(":"))
        if lo < 1 or hi < lo:
            raise ValueError(f"bad K range {text!r}")
        return list(range(lo, hi + 1))
    return _parse_list(text, int)


# ---------------------------------------------------------------- commands

def cmd_train(cfg: dict, out: Path) -> None:
    corpus = _load_corpus(cfg)
    crops = [c for _, _, c in corpus]
    samples = model.collect_samples(crops, levels=cfg["levels"], per_image=cfg["per_image"],
                                    orientation=cfg["orientation"])
    x = samples.phases
    meta = {
        "training_images": sorted({image_digest(full) for _, full, _ in corpus}
                                  | {image_digest(c) for c in crops}),
        "levels": cfg["levels"],
        "n_images": len(crops),
    }
    report = {"n_images": len(crops), "n_samples": int(x.shape[0]), "seed": cfg["seed"]}
    k = cfg["k"]
    if cfg["k_range"] is not None:
        ks = _parse_range(cfg["k_range"])
        cv = model.cross_validate(x, ks, folds=cfg["folds"], seed=cfg["seed"],
                                  max_iters=cfg["max_iters"])
        k = model.find_elbow(cv.scores, cv.ks)
        _write_csv(out / "elbow.csv", ["K", "heldout_log_likelihood"],
                   [(r["K"], r["heldout_log_likelihood"]) for r in cv.to_rows()])
        report["elbow"] = {"ks": [int(v) for v in cv.ks], "scores": [float(s) for s in cv.scores],
                           "selected_k": int(k)}
    m = model.em_fit(x, int(k), max_iters=cfg["max_iters"], seed=cfg["seed"], force=cfg["force"],
                     meta=meta)
    budget = model.TrainingBudget(int(x.shape[0]), int(k))
    report.update({"k": int(k), "n_params": budget.n_params, "r_params": budget.r_params,
                   "iterations": m.training_meta["iterations"],
                   "log_likelihood": m.training_meta["log_likelihood"]})
    _write_text(out / "model.json", model.dumps(m))
    _write_json(out / "report.json", report)
    print(f"trained K={k} on {x.shape[0]} sub-trees (r_params={budget.r_params:.1f})")


def _load_model(path: str) -> model.PhaseGmm:
    try:
        return model.load(path)
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        raise ValueError(f"cannot load model {path}: {exc}") from exc


def cmd_denoise(cfg: dict, out: Path) -> None:
    m = _load_model(cfg["model"])
    seen = set(m.training_meta.get("training_images", ()))
    rows = []
    for i, path in enumerate(cfg["images"]):
        img = center_crop(_load(path), cfg["size"])
        if image_digest(img) in seen or image_digest(_load(path)) in seen:
            raise GuardError(f"{path} was used to train the model; refusing to evaluate on it")
        rng = make_rng(cfg["seed"], "noise", i)
        res = denoise.phase_denoising_experiment(img, m, cfg["sigma"], rng, levels=cfg["levels"],
                                                 wrapped=cfg["wrapped"])
        stem = Path(path).stem
        _write_image(out / f"{stem}_degraded.png", res.degraded)
        _write_image(out / f"{stem}_restored.png", res.restored)
        rows.append((stem, cfg["sigma"], res.psnr_deg, res.ssim_deg, res.psnr_rec, res.ssim_rec))
        print(f"{stem}: ssim {res.ssim_deg:.4f} -> {res.ssim_rec:.4f}")
    _write_csv(out / "metrics.csv", ["image", "sigma", "psnr_deg", "ssim_deg", "psnr_rec", "ssim_rec"], rows)


def _retrieval_kwargs(cfg: dict) -> dict:
    return {k: cfg[k] for k in ("T", "n_est", "a", "b", "beta", "levels")}


def cmd_retrieve(cfg: dict, out: Path) -> None:
    m = _load_model(cfg["model"])
    kw = _retrieval_kwargs(cfg)
    if cfg["magnitude"] is not None:
        mag = np.load(cfg["magnitude"])
        if mag.ndim != 2 or mag.shape[0] % 2 or mag.shape[1] % 2:
            raise ValueError("magnitude must be a 2-D array with even sides (padded 2N x 2N)")
        sup = np.zeros(mag.shape, dtype=bool)
        sup[: mag.shape[0] // 2, : mag.shape[1] // 2] = True
        rows = []
        for p in range(cfg["inits"]):
            conf = retrieval.RetrievalConfig(mag, sup, seed=cfg["seed"], init=p, **kw)
            th, tl = retrieval.hio_run(conf), retrieval.lphio_run(conf, m)
            for name, tr in (("hio", th), ("lphio", tl)):
                _atomic(out / f"trace_0_{p}_{name}.csv", tr.write_csv)
                _write_image(out / f"recon_0_{p}_{name}.png", tr.image)
            d_f = np.log(max(tl.errors[-1], retrieval.LOG_FLOOR)) - np.log(max(th.errors[-1], retrieval.LOG_FLOOR))
            rows.append((0, p, th.errors[-1], tl.errors[-1], d_f))
        _write_csv(out / "pairs.csv", ["image", "init", "error_hio", "error_lphio", "d_f"], rows)
        d = np.array([r[4] for r in rows])
        _write_csv(out / "summary.csv", ["statistic", "d_f", "d_p"],
                   [("mean", d.mean(), float("nan")), ("std", d.std(), float("nan")), ("n", len(d), len(d))])
        return
    images = [center_crop(_load(p), cfg["size"]) for p in cfg["images"]]
    report = retrieval.evaluate_pair(images, m, inits=cfg["inits"], seed=cfg["seed"],
                                     keep_traces=True, jobs=cfg["jobs"], **kw)
    for (k, p), (th, tl) in sorted(report.traces.items()):
        for name, tr in (("hio", th), ("lphio", tl)):
            _atomic(out / f"trace_{k}_{p}_{name}.csv", tr.write_csv)
            _write_image(out / f"recon_{k}_{p}_{name}.png", tr.image)
    with tempfile.TemporaryDirectory(dir=out) as tmp:
        report.write_csv(tmp)
        _move_into(Path(tmp), out)
    s = report.summary()
    print(f"{s['n']} paired runs: mean d_F = {s['d_f_mean']:.4f}, mean d_P = {s['d_p_mean']:.4f} dB")


def _analyze_one(stem: str, img: np.ndarray, cfg: dict, rng_base: int, out: Path) -> list:
    levels = cfg["levels"]
    pyr = dtcwt.forward(img, levels)
    rows = []
    # strong/weak statistics at a single threshold, then the sweep
    if cfg["threshold_scope"] == "band":
        strong = graph.threshold_per_band(pyr, cfg["strong_fraction"])
    else:
        strong = graph.threshold_top_energy(pyr, fraction=cfg["strong_fraction"])
    rep = graph.strong_weak_statistics(pyr, strong)
    _atomic(out / f"{stem}_strong_weak.csv", rep.to_csv)
    sub = out / f"{stem}_heatmaps"
    sub.mkdir(exist_ok=True)
    with tempfile.TemporaryDirectory(dir=out) as tmp:
        rep.write_heatmaps(tmp)
        _move_into(Path(tmp), sub)
    fr, sf, wf = graph.max_frequency_sweep(pyr, scope=cfg["threshold_scope"])
    _, sm, wm = graph.max_frequency_sweep(pyr, scope=cfg["threshold_scope"], match_sizes=True,
                                          seed=cfg["seed"])
    _write_csv(out / f"{stem}_max_frequency.csv",
               ["fraction", "orientation", "strong", "weak", "strong_matched", "weak_matched"],
               [(f, o + 1, sf[i, o], wf[i, o], sm[i, o], wm[i, o]) for i, f in enumerate(fr) for o in range(6)])
    rows.append((stem, "max_frequency_strong_wins", float(np.mean(sf > wf)), float("nan"), float("nan")))
    rows.append((stem, "max_frequency_strong_wins_matched", float(np.mean(sm > wm)), float("nan"), float("nan")))

    # local vs global randomization of 80% of the phases
    rng = make_rng(cfg["seed"], "analyze", rng_base)
    local = graph.threshold_top_energy(pyr, fraction=0.2).complement()
    loc = dtcwt.inverse(graph.randomize_phase_local(pyr, local, rng))
    glob = numerics.randomize_global_phase(img, 0.8, rng)
    for name, im in (("local_random_80", loc), ("global_random_80", glob)):
        _write_image(out / f"{stem}_{name}.png", im)
        rows.append((stem, name, 0.8, numerics.psnr(img, im), numerics.ssim(img, im)))
    for pct in cfg["path_percents"]:
        thr = graph.path_threshold_for_fraction(pyr, pct / 100.0)
        paths = graph.low_energy_paths(pyr, thr)
        im = dtcwt.inverse(graph.randomize_paths(pyr, paths, rng))
        _write_image(out / f"{stem}_path_random_{pct:g}.png", im)
        rows.append((stem, f"path_random_{pct:g}", len(paths) / len(graph.all_paths(pyr)),
                     numerics.psnr(img, im), numerics.ssim(img, im)))

    # global phase noise and its local-phase projection
    deg = numerics.perturb_global_phase(img, cfg["projection_sigma"], rng)
    proj = graph.project_local_phase(deg, pyr)
    _write_image(out / f"{stem}_global_noise.png", deg)
    _write_image(out / f"{stem}_projected.png", proj)
    rows.append((stem, "global_noise", cfg["projection_sigma"], numerics.psnr(img, deg), numerics.ssim(img, deg)))
    rows.append((stem, "projected", cfg["projection_sigma"], numerics.psnr(img, proj), numerics.ssim(img, proj)))

    gauss = graph.gaussianity_diagnostic(img, rng, sigma=1.0, levels=levels)
    _write_image(out / f"{stem}_global_sigma1.png", gauss.distorted)
    rows.append((stem, "global_sigma1", 1.0, gauss.psnr, gauss.ssim))
    rows.append((stem, "coefficient_kurtosis", float("nan"), gauss.kurtosis, float("nan")))
    return rows


def cmd_analyze(cfg: dict, out: Path) -> None:
    corpus = _load_corpus(cfg)
    rows = []
    for i, (stem, _, img) in enumerate(corpus):
        rows.extend(_analyze_one(stem, img, cfg, i, out))
    _write_csv(out / "analysis.csv", ["image", "experiment", "parameter", "psnr", "ssim"], rows)
    print(f"analyzed {len(corpus)} image(s)")


def cmd_restore(cfg: dict, out: Path) -> None:
    if cfg["kernel"] is None:
        H = hqs.DegradationOperator.identity()
    else:
        H = hqs.DegradationOperator.from_file(cfg["kernel"])
    truth = None if cfg["truth"] is None else _load(cfg["truth"])
    if cfg["image"] is not None:
        y = _load(cfg["image"])
    elif truth is not None:
        rng = make_rng(cfg["seed"], "noise")
        y = H.apply(truth) + cfg["noise"] * rng.standard_normal(truth.shape)
        _write_image(out / "degraded.png", y)
    else:
        raise ValueError("need --image or --truth")
    m = None if cfg["model"] is None else _load_model(cfg["model"])
    sched_kw = {"alphas": tuple(_parse_list(cfg["alphas"])), "alternations": cfg["alternations"],
                "inner_iters": cfg["inner_iters"]}
    sched = hqs.HqsSchedule.for_noise(cfg["noise"], **sched_kw) if cfg["noise"] > 0 else hqs.HqsSchedule(**sched_kw)
    res = hqs.hqs_restore(y, H, m, sched, levels=cfg["levels"], printed=cfg["printed_z"])
    _write_image(out / "restored.png", res.image)
    _atomic(out / "objective.csv", res.write_csv)
    if truth is not None:
        _write_csv(out / "metrics.csv", ["image", "psnr", "ssim"],
                   [("degraded", numerics.psnr(truth, y), numerics.ssim(truth, y)),
                    ("restored", numerics.psnr(truth, res.image), numerics.ssim(truth, res.image))])
    print(f"restored {y.shape[0]}x{y.shape[1]}; final objective {res.stage_objective[-1]:.6g}")


def cmd_appendix_check(cfg: dict, out: Path) -> None:
    etas = np.asarray(_parse_list(cfg["etas"]))
    if etas.size < 2 or np.any(etas <= 0) or np.any(etas > 0.5):
        raise ValueError("need at least two etas in (0, 0.5]")
    n = cfg["n"]
    if cfg["signal"] == "step":
        x = appendixcheck.step_signal(n)
    else:
        x = make_rng(cfg["seed"], "appendix").standard_normal(n)
    slope, dev = appendixcheck.deviation_slope(x, cfg["f0"], etas)
    _atomic(out / "appendix.csv",
            lambda tmp: appendixcheck.write_slope_csv(tmp, etas, dev, slope, cfg["tolerance"]))
    ok = abs(slope - 2.0) <= cfg["tolerance"]
    print(f"slope {slope:.4f}: {'pass' if ok else 'fail'}")


COMMANDS = {
    "train": cmd_train,
    "denoise": cmd_denoise,
    "retrieve": cmd_retrieve,
    "analyze": cmd_analyze,
    "restore": cmd_restore,
    "appendix-check": cmd_appendix_check,
}

# resolved-config keys that name input files (made absolute)
_PATH_KEYS = ("model", "image", "truth", "kernel", "magnitude")
# keys that never affect outputs and so stay out of run.json
_VOLATILE = ("out", "jobs", "command", "func")


def _resolve(args: argparse.Namespace) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k not in _VOLATILE}
    for k in _PATH_KEYS:
        if cfg.get(k) is not None:
            p = Path(cfg[k]).resolve()
            if not p.exists():
                raise ValueError(f"no such file: {p}")
            cfg[k] = str(p)
    if "images" in cfg:
        if args.command == "train" or args.command == "analyze":
            cfg["images"] = _corpus_paths(cfg["images"])
        else:
            if not cfg["images"]:
                if args.command == "retrieve" and cfg.get("magnitude"):
                    cfg["images"] = []
                else:
                    raise ValueError("--images is required")
            else:
                cfg["images"] = _resolve_images(cfg["images"])
    return cfg


def execute(command: str, cfg: dict, out: Path, jobs: int = 1) -> None:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "run.json", {"command": command, "config": cfg, "format": "phaseforge-run/1"})
    run_cfg = dict(cfg, jobs=jobs)
    COMMANDS[command](run_cfg, out)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="root seed for all random streams")
    p.add_argument("--jobs", type=int, default=1, help="worker processes (results do not depend on it)")
    p.add_argument("--out", default=".", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="phaseforge", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit the sub-tree phase mixture on a corpus")
    _common(p)
    p.add_argument("--images", nargs="*", help="image files or directories (default: $PHASEFORGE_DATA, then procedural textures)")
    p.add_argument("--size", type=int, default=256, help="center crop N (procedural textures are generated at N)")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--k-range", help='candidate K values, "2:15" or "2,4,8"; runs cross-validation and the elbow rule')
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--levels", type=int, default=4)
    p.add_argument("--per-image", type=int, default=None, help="sub-trees per image (default N^2/64)")
    p.add_argument("--orientation", type=int, default=None, choices=range(1, 7))
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument("--force", action="store_true", help="skip the r_params > 50 budget check")

    p = sub.add_parser("denoise", help="local-phase denoising experiment")
    _common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--images", "--image", nargs="+", dest="images")
    p.add_argument("--sigma", type=float, default=2.0)
    p.add_argument("--size", type=int, default=None)
    p.add_argument("--levels", type=int, default=4)
    p.add_argument("--wrapped", action="store_true", help="estimate from wrapped instead of unwrapped phases")

    p = sub.add_parser("retrieve", help="paired HIO / LPHIO phase retrieval")
    _common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--images", "--image", nargs="*", dest="images", default=[])
    p.add_argument("--magnitude", help=".npy Fourier magnitude of a 2N x 2N padded object (no truth)")
    p.add_argument("--size", type=int, default=None)
    p.add_argument("--T", type=int, default=1500)
    p.add_argument("--n-est", type=int, default=50)
    p.add_argument("--a", type=float, default=2.0)
    p.add_argument("--b", type=float, default=5.0)
    p.add_argument("--beta", type=float, default=0.9)
    p.add_argument("--inits", type=int, default=1)
    p.add_argument("--levels", type=int, default=None)

    p = sub.add_parser("analyze", help="strong/weak statistics and randomization experiments")
    _common(p)
    p.add_argument("--images", "--image", nargs="*", dest="images")
    p.add_argument("--size", type=int, default=None)
    p.add_argument("--levels", type=int, default=4)
    p.add_argument("--strong-fraction", type=float, default=0.1)
    p.add_argument("--threshold-scope", choices=("band", "global"), default="band",
                   help="strong/weak cut per (level, orientation) band or over the whole pyramid")
    p.add_argument("--path-percents", type=lambda s: _parse_list(s), default=[29.0, 76.0, 97.0])
    p.add_argument("--projection-sigma", type=float, default=1.5)

    p = sub.add_parser("restore", help="half-quadratic-splitting restoration")
    _common(p)
    p.add_argument("--image", help="degraded observation y")
    p.add_argument("--truth", help="clean image; used for metrics, or to synthesize y when --image is absent")
    p.add_argument("--kernel", help="plain-text 2-D kernel taps (odd sides); identity when absent")
    p.add_argument("--noise", type=float, default=0.0, help="noise std of y")
    p.add_argument("--alphas", default="1,4,16,64")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--model")
    g.add_argument("--no-model", action="store_const", const=None, dest="model")
    p.add_argument("--levels", type=int, default=4)
    p.add_argument("--alternations", type=int, default=3)
    p.add_argument("--inner-iters", type=int, default=20)
    p.add_argument("--printed-z", action="store_true", help="use the (Sigma+alpha)^-1 (Sigma a + alpha mu) z-step")

    p = sub.add_parser("appendix-check", help="1-D check of the small-rotation STFT expansion")
    _common(p)
    p.add_argument("--n", type=int, default=256)
    p.add_argument("--f0", type=int, default=3)
    p.add_argument("--signal", choices=("random", "step"), default="random")
    p.add_argument("--etas", default=",".join(repr(float(v)) for v in np.geomspace(0.025, 0.4, 9)))
    p.add_argument("--tolerance", type=float, default=0.2)

    p = sub.add_parser("replay", help="re-run a command from its run.json")
    p.add_argument("run_json")
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "replay":
            try:
                doc = json.loads(Path(args.run_json).read_text())
                command, cfg = doc["command"], doc["config"]
            except (OSError, KeyError, json.JSONDecodeError) as exc:
                raise ValueError(f"unreadable run file: {exc}") from exc
            if command not in COMMANDS:
                raise ValueError(f"unknown command {command!r} in run file")
        else:
            command, cfg = args.command, _resolve(args)
        execute(command, cfg, Path(args.out), args.jobs)
    except GuardError as exc:
        print(f"phaseforge: refused: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except model.BudgetError as exc:
        print(f"phaseforge: {exc} (r_params = {exc.budget.r_params:.2f})", file=sys.stderr)
        return EXIT_INPUT
    except (hqs.HqsDivergence, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"phaseforge: numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"phaseforge: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
