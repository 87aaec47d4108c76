import numpy as np
import pytest

from crnl.synthetic import (SYNTHETIC_FUNCTIONS, add_noise, make_mask,
                            make_multiband_image, make_point_cloud,
                            sample_function, synthetic_function)


def test_function_pins():
    """Spot values recomputed by hand from the formulas."""
    f1 = synthetic_function("f1")
    assert f1(0.5, 0.5) == pytest.approx(1.0 / 3.0)
    assert f1(0.5 + 2.0 / 9.0, 0.5) == pytest.approx(np.exp(-1.0) / 3.0)

    f2 = synthetic_function("f2")
    assert f2(1.0 / 3.0, 0.0) == pytest.approx(2.25 / 6.0)

    f3 = synthetic_function("f3")
    # tanh(0) = 0 on the line x + y = 1
    assert f3(0.3, 0.7) == pytest.approx(1.0 / 9.0)
    assert f3(0.0, 0.0) == pytest.approx((np.tanh(9.0) + 1.0) / 9.0)

    f4 = synthetic_function("f4")
    assert f4(1.0 / 3.0, 1.0 / 3.0) == pytest.approx(
        2.0 - np.exp(-20.0 * 2.0 / 9.0))


def test_unknown_function_rejected():
    with pytest.raises(ValueError):
        synthetic_function("f9")


@pytest.mark.parametrize("name", sorted(SYNTHETIC_FUNCTIONS))
def test_sample_function_split_sizes(name):
    tr_p, tr_v, te_p, te_v = sample_function(name, 1000, seed=3,
                                             train_fraction=0.2)
    assert tr_p.shape == (200, 2) and te_p.shape == (800, 2)
    assert tr_v.shape == (200,) and te_v.shape == (800,)
    f = SYNTHETIC_FUNCTIONS[name]
    np.testing.assert_allclose(tr_v, f(tr_p[:, 0], tr_p[:, 1]))
    # same seed, same draw
    tr_p2, _, _, _ = sample_function(name, 1000, seed=3, train_fraction=0.2)
    np.testing.assert_array_equal(tr_p, tr_p2)


def test_sample_function_no_overlap():
    tr_p, _, te_p, _ = sample_function("f1", 500, seed=0)
    joined = np.concatenate([tr_p, te_p])
    assert np.unique(joined, axis=0).shape[0] == 500


def test_make_mask_exact_count():
    mask = make_mask((512, 512, 3), 0.05, seed=1)
    assert mask.sum() == round(0.05 * 512 * 512 * 3) == 39322
    assert mask.shape == (512, 512, 3)
    np.testing.assert_array_equal(mask, make_mask((512, 512, 3), 0.05, seed=1))
    assert (mask != make_mask((512, 512, 3), 0.05, seed=2)).any()


def test_make_mask_rate_bounds():
    assert make_mask((4, 4), 1.0, seed=0).all()
    with pytest.raises(ValueError):
        make_mask((4, 4), 0.0, seed=0)
    with pytest.raises(ValueError):
        make_mask((4, 4), 1.5, seed=0)


def test_add_noise_statistics():
    x = np.zeros((100, 100))
    noisy = add_noise(x, 0.2, seed=4)
    assert abs(noisy.std() - 0.2) < 0.01
    assert abs(noisy.mean()) < 0.01
    np.testing.assert_array_equal(noisy, add_noise(x, 0.2, seed=4))
    np.testing.assert_array_equal(add_noise(x, 0.0, seed=4), x)


def test_multiband_image_properties():
    img = make_multiband_image(32, 40, 5, seed=7)
    assert img.shape == (32, 40, 5)
    assert img.min() == 0.0 and img.max() == 1.0
    np.testing.assert_array_equal(img, make_multiband_image(32, 40, 5, seed=7))


def test_point_cloud_properties():
    xyz, rgb = make_point_cloud(300, seed=11)
    assert xyz.shape == (300, 3) and rgb.shape == (300, 3)
    assert rgb.min() >= 0.0 and rgb.max() <= 1.0
    np.testing.assert_array_equal(xyz, make_point_cloud(300, seed=11)[0])
