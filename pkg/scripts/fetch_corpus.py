"""Export a small texture/natural-image corpus for the CLI.

The training corpus the method was designed around (Brodatz and McGill
texture photographs) cannot be redistributed, so it is not downloaded
here: obtain those images yourself, convert them to grayscale PNG and
point ``PHASEFORGE_DATA`` (or ``--images``) at the directory.

What this script does provide, offline, is a stand-in built from the
images bundled with scikit-image:

* ``train/``: non-overlapping tiles of the ``brick``, ``grass`` and
  ``gravel`` photographs (48 tiles at 128x128);
* ``test/``: ``camera``, ``astronaut``, ``coins``, ``moon`` and
  ``chelsea`` in grayscale, resized to ``--test-size``.

Usage::

    python scripts/fetch_corpus.py --out data
    PHASEFORGE_DATA=data/train phaseforge train --size 128 --k-range 1:15 --out run
"""

import argparse
from pathlib import Path

import numpy as np

from phaseforge.numerics import write_image


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    parser.add_argument("--out", default="data", help="output directory")
    parser.add_argument("--tile", type=int, default=128, help="training tile size")
    parser.add_argument("--test-size", type=int, default=64, help="side of the test images")
    args = parser.parse_args(argv)

    try:
        from skimage import data
        from skimage.color import rgb2gray
        from skimage.transform import resize
    except ImportError:
        parser.error("scikit-image is required: pip install scikit-image")

    out = Path(args.out)
    (out / "train").mkdir(parents=True, exist_ok=True)
    (out / "test").mkdir(parents=True, exist_ok=True)

    n = 0
    for name in ("brick", "grass", "gravel"):
        a = getattr(data, name)() / 255.0
        t = args.tile
        for i in range(0, a.shape[0] - t + 1, t):
            for j in range(0, a.shape[1] - t + 1, t):
                write_image(out / "train" / f"{name}_{i:04d}_{j:04d}.png", a[i : i + t, j : j + t])
                n += 1
    for name in ("camera", "astronaut", "coins", "moon", "chelsea"):
        a = getattr(data, name)()
        a = rgb2gray(a) if a.ndim == 3 else a / 255.0
        s = args.test_size
        write_image(out / "test" / f"{name}.png", np.clip(resize(a, (s, s), anti_aliasing=True), 0, 1))
    print(f"wrote {n} training tiles and 5 test images under {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
