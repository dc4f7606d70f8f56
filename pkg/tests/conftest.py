"""Shared fixtures.

The "real texture" corpus is the 48 non-overlapping 128x128 tiles of the
brick, grass and gravel photographs bundled with scikit-image; it stands
in for the user-supplied training textures.  Procedural textures from
:mod:`phaseforge.textures` serve as held-out images and fixtures.
"""

import warnings

import numpy as np
import pytest

from phaseforge import model, textures


def real_texture_tiles(tile: int = 128) -> list:
    data = pytest.importorskip("skimage.data")
    tiles = []
    for name in ("brick", "grass", "gravel"):
        a = getattr(data, name)() / 255.0
        for i in range(0, a.shape[0] - tile + 1, tile):
            for j in range(0, a.shape[1] - tile + 1, tile):
                tiles.append(a[i : i + tile, j : j + tile])
    return tiles


def natural_images(size: int = 64) -> dict:
    """The five retrieval test images, converted to gray and resized."""
    data = pytest.importorskip("skimage.data")
    from skimage.color import rgb2gray
    from skimage.transform import resize

    out = {}
    for name in ("camera", "astronaut", "coins", "moon", "chelsea"):
        a = getattr(data, name)()
        a = rgb2gray(a) if a.ndim == 3 else a / 255.0
        out[name] = resize(a, (size, size), anti_aliasing=True)
    return out


@pytest.fixture(scope="session")
def real_samples():
    return model.collect_samples(real_texture_tiles()).phases


@pytest.fixture(scope="session")
def prior(real_samples):
    """K = 10 phase prior trained on the real-texture tiles."""
    return model.em_fit(real_samples, 10)


@pytest.fixture(scope="session")
def small_prior():
    """Quick K = 3 prior on procedural textures (budget check waived)."""
    imgs = list(textures.corpus(64, seed=5).values())
    x = model.collect_samples(imgs, levels=3).phases
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return model.em_fit(x, 3, force=True, max_iters=100)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_ACCEPTANCE: list = []


@pytest.fixture
def record():
    """``record(n, ok, detail)`` logs one acceptance line for the summary."""

    def _record(n: int, ok: bool, detail: str) -> None:
        _ACCEPTANCE.append((n, ok, detail))

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n, ok, detail in sorted(_ACCEPTANCE):
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
