import numpy as np
import pytest
from scipy.integrate import trapezoid

from phaseforge import denoise, dtcwt, textures
from phaseforge.model import PhaseGmm
from phaseforge.numerics import ssim


def _random_model(r, k=3, dim=10):
    w = r.dirichlet(np.ones(k))
    return PhaseGmm(w, r.uniform(-2, 2, (k, dim)), r.uniform(0.1, 1.0, (k, dim)))


def test_zero_noise_is_identity():
    r = np.random.default_rng(0)
    m = _random_model(r)
    th = r.uniform(-np.pi, np.pi, (20, 10))
    assert np.array_equal(denoise.denoise_subtree(m, th, 0.0), th)


def test_infinite_noise_gives_prior_mean():
    r = np.random.default_rng(1)
    m = _random_model(r)
    th = r.uniform(-np.pi, np.pi, 10)
    est = denoise.denoise_subtree(m, th, 1e8)
    np.testing.assert_allclose(est, m.weights @ m.means, atol=1e-4)


def test_single_component_matches_gaussian_mmse():
    r = np.random.default_rng(2)
    for _ in range(100):
        mu, var = r.uniform(-2, 2, 10), r.uniform(0.05, 2.0, 10)
        s2, th = r.uniform(0.01, 3.0), r.uniform(-np.pi, np.pi, 10)
        m = PhaseGmm([1.0], mu[None], var[None])
        S = np.diag(var)
        expect = mu + S @ np.linalg.solve(S + s2 * np.eye(10), th - mu)
        np.testing.assert_allclose(denoise.denoise_subtree(m, th, s2), expect, atol=1e-10, rtol=0)


def _quadrature_mean(w, mu, var, theta, s2, n=801):
    """E[eta | theta] for a 2-D diagonal mixture prior by grid integration."""
    lo = np.minimum(mu.min(axis=0), theta) - 8 * np.sqrt(var.max() + s2)
    hi = np.maximum(mu.max(axis=0), theta) + 8 * np.sqrt(var.max() + s2)
    g0, g1 = np.linspace(lo[0], hi[0], n), np.linspace(lo[1], hi[1], n)
    e0, e1 = np.meshgrid(g0, g1, indexing="ij")
    prior = np.zeros_like(e0)
    for wk, mk, vk in zip(w, mu, var):
        prior += wk * np.exp(-0.5 * ((e0 - mk[0]) ** 2 / vk[0] + (e1 - mk[1]) ** 2 / vk[1])) / (2 * np.pi * np.sqrt(vk[0] * vk[1]))
    like = np.exp(-0.5 * ((theta[0] - e0) ** 2 + (theta[1] - e1) ** 2) / s2)
    p = prior * like
    z = trapezoid(trapezoid(p, g1, axis=1), g0)
    m0 = trapezoid(trapezoid(p * e0, g1, axis=1), g0)
    m1 = trapezoid(trapezoid(p * e1, g1, axis=1), g0)
    return np.array([m0, m1]) / z


def test_two_dim_restriction_matches_quadrature():
    r = np.random.default_rng(3)
    worst = 0.0
    for _ in range(50):
        m = _random_model(r, k=2, dim=10)
        s2 = r.uniform(0.1, 1.0)
        # draw eta from the mixture and observe it in noise
        k = r.choice(2, p=m.weights)
        eta = m.means[k] + np.sqrt(m.variances[k]) * r.standard_normal(10)
        theta = eta + np.sqrt(s2) * r.standard_normal(10)
        present = np.zeros(10, bool)
        present[[0, 5]] = True
        est = denoise.denoise_subtree(m, theta, s2, present)
        assert np.all(np.isnan(est[~present]))
        ref = _quadrature_mean(m.weights, m.means[:, [0, 5]], m.variances[:, [0, 5]], theta[[0, 5]], s2)
        worst = max(worst, float(np.max(np.abs(est[present] - ref))))
    assert worst < 1e-3


def test_posterior_weights_normalized():
    r = np.random.default_rng(4)
    m = _random_model(r, k=5)
    w = denoise.posterior_weights(m, r.uniform(-3, 3, (40, 10)), 0.5)
    np.testing.assert_allclose(w.sum(axis=1), 1.0, atol=1e-12)


def test_monotone_path_to_prior_mean():
    r = np.random.default_rng(5)
    m = _random_model(r)
    prior_mean = m.weights @ m.means
    for _ in range(20):
        th = r.uniform(-np.pi, np.pi, 10)
        d = [np.linalg.norm(denoise.denoise_subtree(m, th, s2) - prior_mean) for s2 in np.logspace(-3, 4, 5)]
        assert np.all(np.diff(d) <= 1e-12)


def test_continuity():
    r = np.random.default_rng(6)
    m = _random_model(r)
    th = r.uniform(-np.pi, np.pi, 10)
    a = denoise.denoise_subtree(m, th, 0.4)
    b = denoise.denoise_subtree(m, th + 1e-8, 0.4)
    assert np.max(np.abs(a - b)) < 1e-6


def test_observation_validation():
    r = np.random.default_rng(7)
    m = _random_model(r)
    with pytest.raises(ValueError):
        denoise.denoise_subtree(m, np.zeros(10), 0.5, np.zeros(10, bool))
    with pytest.raises(ValueError):
        denoise.denoise_subtree(m, np.zeros(9), 0.5)
    with pytest.raises(ValueError):
        denoise.denoise_subtree(m, np.zeros(10), -1)
    with pytest.raises(ValueError):
        denoise.NoisyPhaseObservation(np.zeros(10), 0.5, np.r_[False, np.ones(9, bool)])
    obs = denoise.NoisyPhaseObservation(np.zeros(10), 0.5)
    assert denoise.denoise_subtree(m, obs, None).shape == (10,)


def test_degrade_local_phase(rng):
    x = textures.texture("marble", 256, 0)
    pyr = dtcwt.forward(x, 4)
    assert denoise.degrade_local_phase(pyr, 0.0, rng) is pyr
    out = denoise.degrade_local_phase(pyr, 0.3, rng)
    assert out.lowpass is pyr.lowpass or np.array_equal(out.lowpass, pyr.lowpass)
    d = []
    for a, b in zip(out.highpasses, pyr.highpasses):
        assert np.max(np.abs(np.abs(a) - np.abs(b))) < 1e-12
        d.append(np.angle(a * np.conj(b)).ravel())
    d = np.concatenate(d)
    assert d.size > 1e5
    circ_sd = np.sqrt(-2 * np.log(np.abs(np.mean(np.exp(1j * d)))))
    assert circ_sd == pytest.approx(0.3, rel=0.05)


def test_image_pipeline_keeps_magnitudes(small_prior):
    x = textures.texture("weave", 64, 0)
    pyr = dtcwt.forward(x, 3)
    out = denoise.denoise_pyramid_phase(pyr, small_prior, 0.5)
    assert np.array_equal(out.lowpass, pyr.lowpass)
    for a, b in zip(out.highpasses, pyr.highpasses):
        assert np.max(np.abs(np.abs(a) - np.abs(b))) < 1e-12
    assert np.max(np.abs(denoise.denoise_image_phase(x, small_prior, 0.0, levels=3) - x)) < 1e-9


def test_estimate_phases_handles_borders(small_prior):
    pyr = dtcwt.forward(textures.texture("dots", 64, 0), 3)
    est = denoise.estimate_phases(pyr.phases(), small_prior, 0.3)
    assert all(np.all(np.isfinite(e)) for e in est)
    assert [e.shape for e in est] == [h.shape for h in pyr.highpasses]


def test_zero_sigma_experiment_is_exact(prior, rng):
    x = textures.texture("scene", 64, 0)
    res = denoise.phase_denoising_experiment(x, prior, 0.0, rng)
    assert res.psnr_rec == np.inf and res.ssim_rec == 1.0
    assert np.array_equal(res.restored, x)


def test_natural_image_improves(prior):
    data = pytest.importorskip("skimage.data")
    x = data.camera()[::4, ::4] / 255.0
    res = denoise.phase_denoising_experiment(x, prior, 2.0, np.random.default_rng(0))
    assert res.ssim_rec > res.ssim_deg
    assert ssim(x, res.restored) == pytest.approx(res.ssim_rec)


def test_wrapped_variant_runs(small_prior, rng):
    x = textures.texture("wood", 64, 0)
    res = denoise.phase_denoising_experiment(x, small_prior, 1.0, rng, levels=3, wrapped=True)
    assert np.isfinite(res.psnr_rec)
