import numpy as np
import pytest

import nlh
from nlh.image import ColorImage, add_awgn, psnr, rgb_to_ycbcr
from nlh.params import PROFILES, NlhParams, check_profile_sigma, profile, profile_for_sigma
from nlh.pipeline import stage1, stage1_pass, stage2
from oracles import reference_stage1_pass, reference_stage2

SMALL = dict(patch_side=4, window=10, m1=16, q1=4, m2=16, q2=4, stride=2)


def small(**kw):
    return profile("custom", **{**SMALL, **kw})


@pytest.fixture(scope="module")
def crop():
    from conftest import suite_images
    return suite_images()["camera"][200:232, 220:252].copy()


def test_profiles_resolve_to_documented_values():
    base = dict(window=40, m1=16, q1=4, tau=2.0, lam=0.6)
    for name, expect in [("awgn-low", (8, 4)), ("awgn-high", (10, 5)), ("real", (7, 2))]:
        p = profile(name)
        assert (p.patch_side, p.iterations) == expect
        assert {k: getattr(p, k) for k in base} == base
    assert set(PROFILES) == {"awgn-low", "awgn-high", "real"}
    assert profile("real", stage2_small=True).m2 == 16 and profile("real", stage2_small=True).q2 == 4
    assert profile("real").m2 == 64 and profile("real").q2 == 8
    assert profile("real", tau=3.0, window=None).tau == 3.0
    with pytest.raises(ValueError):
        profile("fancy")


def test_profile_sigma_guard():
    check_profile_sigma("awgn-low", 49.9)
    check_profile_sigma("awgn-high", 50)
    with pytest.raises(ValueError, match="awgn-high"):
        check_profile_sigma("awgn-low", 50)
    with pytest.raises(ValueError):
        check_profile_sigma("awgn-high", 25)
    assert profile_for_sigma(25) == "awgn-low" and profile_for_sigma(75) == "awgn-high"


@pytest.mark.parametrize("kw", [dict(m1=12), dict(q2=3), dict(q1=1), dict(q2=128), dict(lam=1.5),
                                dict(iterations=0), dict(tau=-1), dict(threshold_law="x"),
                                dict(window=3), dict(stride=9), dict(sigma_override=-2)])
def test_invalid_params(kw):
    with pytest.raises(ValueError):
        NlhParams(**kw).validate()


def test_stage1_pass_matches_reference_oracle(crop):
    noisy = add_awgn(crop, 25, 4)
    for law in ("sigma", "sigma2"):
        p = small(threshold_law=law)
        fast = stage1_pass(noisy, 25 / 255, p)
        slow = reference_stage1_pass(noisy, 25 / 255, p)
        np.testing.assert_allclose(fast, slow, atol=1e-10)


def test_stage2_matches_reference_oracle(crop):
    noisy = add_awgn(crop, 25, 4)
    p = small()
    basic = stage1_pass(noisy, 25 / 255, p)
    np.testing.assert_allclose(stage2(noisy, basic, 25 / 255, p),
                               reference_stage2(noisy, basic, 25 / 255, p), atol=1e-10)


def test_stage1_pass_reduces_error(crop):
    noisy = add_awgn(crop, 25, 4)
    out = stage1_pass(noisy, 25 / 255, small())
    assert np.mean((out - crop) ** 2) < np.mean((noisy - crop) ** 2)


def test_constant_image_is_fixed_point():
    plane = np.full((24, 24), 0.3)
    np.testing.assert_allclose(stage1_pass(plane, 0.1, small()), plane, atol=1e-14)
    res = nlh.denoise_gray(plane, small())
    np.testing.assert_allclose(res.output, plane, atol=1e-14)


def test_zero_sigma_only_structural_zeroing(crop):
    # with no magnitude thresholding only the two finest row bands are removed
    p = small(q1=2)
    out = stage1_pass(crop, 0.0, p)
    np.testing.assert_allclose(out, reference_stage1_pass(crop, 0.0, p), atol=1e-12)
    assert not np.allclose(out, crop)


def test_stage1_iteration_rules(crop, monkeypatch):
    import nlh.pipeline as pl

    noisy = add_awgn(crop, 20, 2)
    seen = []
    real = pl._stage1_pass

    def spy(stack, sigmas, p, coords=None, workers=1):
        seen.append(stack.copy())
        out = real(stack, sigmas, p, coords, workers)
        seen.append(out.copy())
        return out

    monkeypatch.setattr(pl, "_stage1_pass", spy)
    stage1(noisy, small(iterations=1, lam=0.3))
    np.testing.assert_array_equal(seen[0][0], noisy)
    seen.clear()
    stage1(noisy, small(iterations=3, lam=0.0))
    for k in (0, 2, 4):
        np.testing.assert_array_equal(seen[k][0], noisy)
    seen.clear()
    stage1(noisy, small(iterations=2, lam=1.0))
    np.testing.assert_array_equal(seen[2], seen[1])


def test_stage1_reports_first_estimate(crop):
    noisy = add_awgn(crop, 20, 2)
    basic, est = stage1(noisy, small(iterations=2))
    assert est.sigma_global == pytest.approx(np.mean(est.sigma_locals))
    basic_re, est_re = stage1(noisy, small(iterations=2, reestimate_sigma_per_iter=True))
    assert est_re.sigma_global == est.sigma_global
    assert not np.array_equal(basic, basic_re)
    _, est_nb = stage1(noisy, small(sigma_override=20))
    assert est_nb.sigma_255 == pytest.approx(20)


def test_stage2_examples(crop):
    p = small()
    np.testing.assert_allclose(stage2(crop, crop, 0.0, p), crop, atol=1e-13)
    out = stage2(crop, np.zeros_like(crop), 0.1, p)
    assert np.all(out == 0)
    with pytest.raises(ValueError):
        stage2(crop, crop[:-1], 0.1, p)


def test_blind_mode_ignores_true_sigma(crop):
    noisy = add_awgn(crop, 30, 8)
    a = nlh.denoise_gray(noisy, small())
    b = nlh.denoise_gray(noisy, small(sigma_override=30))
    assert a.sigma_255[0] != pytest.approx(30, abs=1e-9)
    assert b.sigma_255[0] == pytest.approx(30)
    assert a.output.shape == a.basic.shape == crop.shape
    assert set(a.timings) >= {"estimate", "stage1", "stage2", "total"}


def test_clean_input_is_nearly_unchanged(images):
    img = images["camera"][:128, :128]
    res = nlh.denoise_gray(img, profile("awgn-low"))
    assert psnr(img, res.output) >= 45.0


def test_final_beats_basic_on_suite(images):
    wins = 0
    for name, img in images.items():
        crop = img[192:320, 192:320]
        res = nlh.denoise_gray(add_awgn(crop, 25, 0), profile("awgn-low"))
        wins += psnr(crop, res.output) >= psnr(crop, res.basic)
    assert wins >= 4


def test_range_sanity(images):
    for name in ("coins", "chelsea"):
        crop = images[name][:96, :96]
        res = nlh.denoise_gray(add_awgn(crop, 50, 1), profile("awgn-high"))
        for arr in (res.basic, res.output):
            assert arr.min() >= -0.1 and arr.max() <= 1.1, name


def test_gray_replicated_color_is_symmetric(crop):
    img = ColorImage(np.repeat(add_awgn(crop, 15, 3)[None], 3, axis=0))
    res = nlh.denoise_color(img, small())
    out = res.output.planes
    assert np.max(np.abs(out[0] - out[1])) < 1e-6 and np.max(np.abs(out[0] - out[2])) < 1e-6


def test_chromatic_noise_is_reduced(crop):
    rng = np.random.default_rng(9)
    clean = ColorImage(np.repeat(crop[None], 3, axis=0))
    noisy = ColorImage(clean.planes + rng.standard_normal(clean.planes.shape) * 15 / 255)
    res = nlh.denoise_color(noisy, small())
    before = rgb_to_ycbcr(noisy).planes[1:] - 0.5
    after = rgb_to_ycbcr(res.output).planes[1:] - 0.5
    assert np.std(after) <= 0.5 * np.std(before)


def test_color_requires_rgb(crop):
    img = rgb_to_ycbcr(ColorImage(np.repeat(crop[None], 3, axis=0)))
    with pytest.raises(ValueError):
        nlh.denoise_color(img, small())


def test_too_small_image():
    with pytest.raises(ValueError):
        nlh.denoise_gray(np.zeros((3, 3)), small())


def test_workers_and_repeat_bitwise(crop):
    rng = np.random.default_rng(2)
    img = ColorImage(np.clip(rng.random((3, 70, 80)) * 0.3 + crop[:1, :1].mean(), 0, 1))
    p = small(window=16)
    a = nlh.denoise(img, p, workers=1)
    b = nlh.denoise(img, p, workers=4)
    c = nlh.denoise(img, p, workers=1)
    np.testing.assert_array_equal(a.output.planes, b.output.planes)
    np.testing.assert_array_equal(a.output.planes, c.output.planes)
    np.testing.assert_array_equal(a.basic.planes, b.basic.planes)


def test_workers_env_fallback(monkeypatch):
    from nlh.parallel import resolve_workers

    monkeypatch.setenv("NLH_WORKERS", "3")
    assert resolve_workers(None) == 3
    assert resolve_workers(0) >= 1
    with pytest.raises(ValueError):
        resolve_workers(-1)
