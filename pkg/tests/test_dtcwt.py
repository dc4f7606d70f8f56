import numpy as np
import pytest

from phaseforge import dtcwt


@pytest.mark.parametrize("size", [64, 128, 256])
@pytest.mark.parametrize("levels", [1, 2, 3, 4, 5])
def test_perfect_reconstruction(size, levels):
    x = np.random.default_rng(size + levels).standard_normal((size, size))
    assert np.max(np.abs(dtcwt.inverse(dtcwt.forward(x, levels)) - x)) < 1e-9


def test_odd_sizes_are_padded_and_cropped():
    x = np.random.default_rng(0).random((50, 37))
    pyr = dtcwt.forward(x, 3)
    assert pyr.pad == (6, 3)
    assert np.max(np.abs(dtcwt.inverse(pyr) - x)) < 1e-9


def test_band_sizes():
    pyr = dtcwt.forward(np.random.default_rng(0).random((256, 256)), 4)
    assert pyr.highpasses[0].shape == (128, 128, 6)
    assert pyr.highpasses[3].shape == (16, 16, 6)
    assert pyr.band(4, 6).shape == (16, 16)


def test_zero_and_constant_images():
    z = dtcwt.forward(np.zeros((64, 64)), 4)
    assert all(np.all(h == 0) for h in z.highpasses) and np.all(z.lowpass == 0)
    assert np.all(dtcwt.inverse(z) == 0)
    c = dtcwt.forward(np.full((64, 64), 0.7), 4)
    # level 1 annihilates constants; the published Q-shift highpass taps sum
    # to about -9.3e-7 rather than 0, so deeper levels leak a little DC
    assert np.max(np.abs(c.highpasses[0])) < 1e-8 * 0.7
    for lvl, h in enumerate(c.highpasses[1:], 2):
        assert np.max(np.abs(h)) < 1e-6 * 2 ** (lvl - 1) * 0.7 * 2
    assert np.sum(c.lowpass**2) > 0


def test_too_many_levels_rejected():
    with pytest.raises(ValueError):
        dtcwt.forward(np.zeros((16, 16)), 5)
    with pytest.raises(ValueError):
        dtcwt.forward(np.zeros((16, 16)), 0)


def test_linearity():
    r = np.random.default_rng(1)
    x, y = r.random((64, 64)), r.random((64, 64))
    a, b = 2.5, -0.75
    lhs = dtcwt.forward(a * x + b * y, 3)
    px, py = dtcwt.forward(x, 3), dtcwt.forward(y, 3)
    for h, hx, hy in zip(lhs.highpasses, px.highpasses, py.highpasses):
        assert np.max(np.abs(h - (a * hx + b * hy))) < 1e-10


def test_mismatched_bands_rejected():
    pyr = dtcwt.forward(np.zeros((64, 64)), 3)
    with pytest.raises(ValueError):
        pyr.with_highpasses([np.zeros((8, 8, 6))] * 3)
    from dataclasses import replace

    bad = replace(pyr, highpasses=(pyr.highpasses[0], pyr.highpasses[0], pyr.highpasses[2]))
    with pytest.raises(ValueError):
        dtcwt.inverse(bad)


def test_single_atom_is_reproducible():
    pyr = dtcwt.forward(np.zeros((64, 64)), 3)
    hp = [h.copy() for h in pyr.highpasses]
    hp[1][8, 8, 2] = 1.0
    atom = dtcwt.inverse(pyr.with_highpasses(hp))
    e = np.sum(atom**2)
    assert 0 < e < np.inf
    assert np.sum(dtcwt.inverse(pyr.with_highpasses(hp)) ** 2) == e


@pytest.mark.parametrize("band,angle", [(0, 65), (1, 45), (2, 25), (3, 155), (4, 135), (5, 115)])
def test_orientation_selectivity(band, angle):
    # wave vector at `angle` degrees with x = column and y = row (downward)
    n = 128
    yy, xx = np.mgrid[0:n, 0:n]
    t = np.deg2rad(angle)
    g = np.cos(1.3 * (np.cos(t) * xx + np.sin(t) * yy))
    e = np.sum(np.abs(dtcwt.forward(g, 3).highpasses[1]) ** 2, axis=(0, 1))
    assert int(np.argmax(e)) == band


def _disc(n=128, r=30):
    yy, xx = np.mgrid[0:n, 0:n]
    return ((xx - n / 2) ** 2 + (yy - n / 2) ** 2 < r**2).astype(float)


def _haar_energies(img, levels):
    out, a = [], img
    for _ in range(levels):
        p, q, r, s = a[0::2, 0::2], a[0::2, 1::2], a[1::2, 0::2], a[1::2, 1::2]
        out.append(sum(np.sum(d**2) for d in ((p - q + r - s) / 2, (p + q - r - s) / 2, (p - q - r + s) / 2)))
        a = (p + q + r + s) / 2
    return out


def test_shift_invariance_probe_contrast():
    x = _disc()
    assert np.all(dtcwt.shift_invariance_probe(x, (0, 0)) == 1.0)
    ratios = dtcwt.shift_invariance_probe(x, (1, 1))
    assert np.all((ratios > 0.85) & (ratios < 1.15))
    haar = dtcwt.shift_invariance_probe(x, (1, 1), transform=_haar_energies)
    assert np.any((haar < 0.85) | (haar > 1.15))


def test_serialization_round_trip():
    pyr = dtcwt.forward(np.random.default_rng(2).random((48, 40)), 3)
    data = dtcwt.pyramid_to_bytes(pyr)
    assert data[:4] == b"DTCP"
    back = dtcwt.pyramid_from_bytes(data)
    assert back.original_shape == pyr.original_shape and back.pad == pyr.pad
    assert np.array_equal(back.lowpass, pyr.lowpass)
    assert all(np.array_equal(a, b) for a, b in zip(back.highpasses, pyr.highpasses))
    with pytest.raises(ValueError):
        dtcwt.pyramid_from_bytes(b"XXXX" + data[4:])


def test_matches_reference_package():
    ref = pytest.importorskip("dtcwt")
    x = np.random.default_rng(5).random((64, 64))
    t = ref.Transform2d(biort="near_sym_b", qshift="qshift_b").forward(x, nlevels=4)
    pyr = dtcwt.forward(x, 4)
    for a, b in zip(pyr.highpasses, t.highpasses):
        np.testing.assert_allclose(a, b, atol=1e-12)
    np.testing.assert_allclose(pyr.lowpass, t.lowpass, atol=1e-12)
