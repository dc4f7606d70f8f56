import json

import numpy as np
import pytest

from phaseforge import dtcwt, model, textures
from phaseforge.model import PhaseGmm


def _mixture_samples(n, means, sd, seed=0, weights=None):
    r = np.random.default_rng(seed)
    means = np.asarray(means, float)
    k = means.shape[0]
    lab = r.choice(k, n, p=weights)
    return means[lab] + sd * r.standard_normal((n, means.shape[1])), lab


def test_budget_arithmetic():
    b = model.TrainingBudget(12_000, 10)
    assert b.n_params == 210
    b = model.TrainingBudget(393_000, 30)
    assert b.n_params == 630 and b.r_params == pytest.approx(623.8, abs=0.1)


def test_budget_guard():
    x = np.random.default_rng(0).standard_normal((1000, 10))
    with pytest.raises(model.BudgetError) as exc:
        model.em_fit(x, 10)
    assert exc.value.budget.r_params == pytest.approx(1000 / 210)
    with pytest.warns(RuntimeWarning):
        m = model.em_fit(x, 10, force=True, max_iters=5)
    assert m.k == 10


def test_single_gaussian_recovery():
    r = np.random.default_rng(1)
    mu = r.uniform(-1, 1, 10)
    sd = r.uniform(0.3, 1.0, 10)
    x = mu + sd * r.standard_normal((100_000, 10))
    m = model.em_fit(x, 1)
    se = sd / np.sqrt(x.shape[0])
    assert np.all(np.abs(m.means[0] - mu) < 3 * se)
    np.testing.assert_allclose(m.variances[0], sd**2, rtol=0.1)
    assert m.weights[0] == 1.0


@pytest.mark.parametrize("k", [1, 5, 10])
@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_em_trace_non_decreasing(k):
    x, _ = _mixture_samples(10_000, np.random.default_rng(2).uniform(-2, 2, (4, 10)), 0.5, seed=3)
    # 10^4 samples at K = 10 is just under the r_params > 50 budget
    m = model.em_fit(x, k, seed=4, force=k == 10)
    assert np.all(np.diff(m.trace) >= -1e-9)
    assert m.training_meta["iterations"] == len(m.trace) - 1


def test_em_is_bit_reproducible():
    x, _ = _mixture_samples(3000, [[0] * 10, [1] * 10], 0.3)
    a = model.em_fit(x, 2, seed=7, force=True)
    b = model.em_fit(x, 2, seed=7, force=True)
    assert model.dumps(a) == model.dumps(b)


def test_variance_floor_applied():
    x = np.zeros((12_000, 10))
    x[::2] = 1.0
    m = model.em_fit(x, 2)
    assert np.all(m.variances >= model.VAR_FLOOR)
    assert m.training_meta["variance_floor_hits"] > 0


def test_em_input_validation():
    with pytest.raises(ValueError):
        model.em_fit(np.full((100, 10), np.nan), 1, force=True)
    with pytest.raises(ValueError):
        model.em_fit(np.zeros((100, 10)), 0, force=True)


def test_model_invariants():
    with pytest.raises(ValueError):
        PhaseGmm([0.5, 0.6], np.zeros((2, 10)), np.ones((2, 10)))
    with pytest.raises(ValueError):
        PhaseGmm([1.0], np.zeros((1, 10)), np.zeros((1, 10)))
    m = PhaseGmm([1.0], np.zeros((1, 10)), np.ones((1, 10)))
    with pytest.raises(ValueError):
        m.means[0, 0] = 1.0


def test_serialization(tmp_path):
    m = PhaseGmm([0.25, 0.75], np.arange(20.0).reshape(2, 10) / 10, np.full((2, 10), 0.5), {"seed": 3})
    model.save(m, tmp_path / "m.json")
    doc = json.loads((tmp_path / "m.json").read_text())
    assert doc["format"] == "phase-gmm/1" and doc["K"] == 2 and doc["dim"] == 10
    back = model.load(tmp_path / "m.json")
    assert np.array_equal(back.means, m.means) and back.training_meta == {"seed": 3}
    small = PhaseGmm([1.0], np.zeros((1, 3)), np.ones((1, 3)))
    model.save(small, tmp_path / "s.json")
    with pytest.raises(ValueError):
        model.load(tmp_path / "s.json")
    assert model.load(tmp_path / "s.json", allow_any_dim=True).dim == 3
    doc["format"] = "other"
    with pytest.raises(ValueError):
        PhaseGmm.from_dict(doc)


def test_fold_partition():
    parts = model.fold_indices(1003, 10, seed=0)
    sizes = [p.size for p in parts]
    assert max(sizes) - min(sizes) <= 1
    allidx = np.concatenate(parts)
    assert np.array_equal(np.sort(allidx), np.arange(1003))


def test_cross_validation_three_components():
    centers = np.random.default_rng(5).uniform(-3, 3, (3, 10))
    x, _ = _mixture_samples(6000, centers, 0.4, seed=6)
    cv = model.cross_validate(x, range(1, 7), folds=5, max_iters=100)
    gains = np.diff(cv.scores)
    assert gains[0] > 1 and gains[1] > 1
    assert np.all(np.abs(gains[2:]) < 0.1 * gains[1])
    assert model.find_elbow(cv.scores, cv.ks) == 3
    again = model.cross_validate(x, range(1, 7), folds=5, max_iters=100)
    assert np.array_equal(cv.fold_scores, again.fold_scores)


def test_cross_validation_needs_samples():
    with pytest.raises(ValueError, match="needs"):
        model.cross_validate(np.zeros((100, 10)), [1, 5], folds=10)


def test_find_elbow_constructed():
    t = np.arange(12.0)
    s = np.where(t <= 5, 2 * t, 10 + 0.1 * (t - 5))
    assert model.find_elbow(s) == 5
    assert model.find_elbow(s, ks=t + 1) == 6
    assert model.find_elbow(3 * t + 1) == 1
    with pytest.raises(ValueError):
        model.find_elbow([1, 2, 3])


def _comp(mu10, mu1, children):
    m = np.zeros(10)
    m[9], m[0], m[5:9] = mu10, mu1, children
    return m


def test_average_congruency_hand_cases():
    cases = [
        (_comp(0.3, 0.6, 1.2), 1.0),                      # eta = 0.6 each
        (_comp(0.2, 0.4, 0.8), 1.0),
        (_comp(0.0, 2 * np.pi / 3, -4 * np.pi / 3), 0.0),  # eta = 0, 2pi/3, -2pi/3
    ]
    for mean, ag in cases:
        m = PhaseGmm([1.0], mean[None, :], np.ones((1, 10)))
        assert model.average_congruency(m, 0) == pytest.approx(ag, abs=1e-12)
    eta = np.array([0.1, 0.5, -0.3])
    m = PhaseGmm([1.0], _comp(eta[0] / 2, eta[1], 2 * eta[2])[None, :], np.ones((1, 10)))
    expect = abs(np.mean(np.cos(eta - eta.mean())))
    assert model.average_congruency(m, 0) == pytest.approx(expect, abs=1e-12)
    with pytest.raises(IndexError):
        model.average_congruency(m, 1)


def test_posterior_component():
    means = np.zeros((3, 10))
    means[1] += 5
    means[2] -= 5
    m = PhaseGmm([0.2, 0.3, 0.5], means, np.full((3, 10), 0.1))
    k, p = model.posterior_component(m, means[1])
    assert k == 1 and p > 0.99
    one = PhaseGmm([1.0], np.zeros((1, 10)), np.ones((1, 10)))
    assert model.posterior_component(one, np.full(10, 3.0)) == (0, 1.0)
    post = m.posteriors(np.random.default_rng(0).standard_normal((50, 10)))
    np.testing.assert_allclose(post.sum(axis=1), 1.0, atol=1e-12)


def test_congruency_demo_noise_component():
    # one tight coherent component and one broad "noise" component
    means = np.zeros((2, 10))
    var = np.vstack([np.full(10, 0.01), np.full(10, np.pi**2 / 3)])
    m = PhaseGmm([0.5, 0.5], means, var)
    means_noise = means.copy()
    means_noise[1] = [0, 2, -2, 2, -2, 1, -1, 1, -1, 3]  # low AG
    m = PhaseGmm([0.5, 0.5], means_noise, var)
    noise = np.random.default_rng(0).standard_normal((64, 64))
    demo = model.congruency_demo(m, noise)
    assert demo.order == (0, 1)
    assert demo.marker_count(1) > 10 * max(demo.marker_count(0), 1)
    blank = model.congruency_demo(m, np.zeros((64, 64)))
    assert blank.marker_count(0) == blank.marker_count(1) == 0


def test_congruency_demo_ranking(small_prior):
    demo = model.congruency_demo(small_prior, textures.texture("polygons", 64, 0), levels=3)
    c = np.array(demo.congruency)
    assert np.all(np.diff(c) <= 0) and np.all((c >= 0) & (c <= 1))


def test_collect_samples_counts():
    imgs = [textures.texture("wood", 128, 0), textures.texture("bricks", 128, 0)]
    s = model.collect_samples(imgs)
    assert len(s) == 2 * 128 * 128 // 64
    assert np.all(s.nodes[:, 0] >= 2) and np.all(s.nodes[:, 0] <= 3)
    o3 = model.collect_samples(imgs, orientation=3)
    assert np.all(o3.nodes[:, 1] == 3)
    pyr = dtcwt.forward(imgs[0], 4)
    lvl, o, x, y = s.nodes[0]
    assert s.phases[0, 0] == pytest.approx(np.angle(pyr.highpasses[lvl - 1][x, y, o - 1]))
