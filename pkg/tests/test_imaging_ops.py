import numpy as np
import pytest

from fscvpipe.errors import InvalidArgumentError
from fscvpipe.imaging import (
    gaussian_pyramid,
    max_pyramid_levels,
    resize_bilinear,
    to_grayscale,
)
from fscvpipe.imaging.ops import binomial_blur5, box_mean3, gabor_kernel, resize_plane
from fscvpipe.imaging.raster import ImageMatrix

from conftest import rand_image


# --- grayscale ------------------------------------------------------------

def test_grayscale_white_is_one():
    img = ImageMatrix(np.ones((2, 2, 3)))
    assert np.array_equal(to_grayscale(img).pixels, np.ones((2, 2)))


def test_grayscale_pure_red_is_one_third():
    px = np.zeros((1, 1, 3))
    px[0, 0, 0] = 1.0
    assert to_grayscale(ImageMatrix(px)).pixels[0, 0] == pytest.approx(1 / 3)


def test_grayscale_matches_per_pixel_mean(rng):
    img = rand_image(rng, 4, 4)
    expected = img.pixels.mean(axis=2)
    assert np.allclose(to_grayscale(img).pixels, expected, atol=1e-15)


def test_grayscale_passes_single_channel_through(rng):
    img = rand_image(rng, 4, 4, channels=1)
    assert to_grayscale(img) is img


# --- resize ----------------------------------------------------------------

def test_resize_identity_is_bit_exact(rng):
    img = rand_image(rng, 6, 5)
    out = resize_bilinear(img, 5, 6)
    assert np.array_equal(out.pixels, img.pixels)


def test_resize_constant_stays_constant():
    img = ImageMatrix(np.full((3, 3), 0.42))
    out = resize_bilinear(img, 10, 7)
    assert (out.height, out.width) == (7, 10)
    assert np.allclose(out.pixels, 0.42, atol=1e-12)


def test_resize_checkerboard_matches_hand_oracle():
    # 2x2 identity checkerboard doubled: half-pixel-center bilinear weights
    # worked out by hand.
    img = ImageMatrix(np.array([[1.0, 0.0], [0.0, 1.0]]))
    expected = np.array([
        [1.000, 0.750, 0.250, 0.000],
        [0.750, 0.625, 0.375, 0.250],
        [0.250, 0.375, 0.625, 0.750],
        [0.000, 0.250, 0.750, 1.000],
    ])
    out = resize_bilinear(img, 4, 4)
    assert np.allclose(out.pixels, expected, atol=1e-12)


def test_resize_rejects_zero_target():
    img = ImageMatrix(np.zeros((2, 2)))
    with pytest.raises(InvalidArgumentError):
        resize_bilinear(img, 0, 4)
    with pytest.raises(InvalidArgumentError):
        resize_bilinear(img, 4, 0)


def test_resize_values_stay_in_range(rng):
    img = rand_image(rng, 11, 4)
    out = resize_bilinear(img, 30, 7)
    assert out.pixels.min() >= 0.0 and out.pixels.max() <= 1.0


def test_resize_plane_handles_three_dimensional_stacks(rng):
    a = rng.random((5, 4, 3))
    out = resize_plane(a, 9, 7)
    for c in range(3):
        assert np.array_equal(out[:, :, c], resize_plane(a[:, :, c], 9, 7))


# --- pyramid ---------------------------------------------------------------

def test_pyramid_constant_is_constant_at_every_level():
    img = ImageMatrix(np.full((32, 32), 0.3))
    for level in gaussian_pyramid(img, 4):
        assert np.allclose(level.pixels, 0.3, atol=1e-12)


def test_pyramid_single_level_is_identity(rng):
    img = rand_image(rng, 8, 8, channels=1)
    levels = gaussian_pyramid(img, 1)
    assert len(levels) == 1
    assert np.array_equal(levels[0].pixels, img.pixels)


def test_pyramid_dims_halve_with_ceiling(rng):
    img = rand_image(rng, 21, 13, channels=1)
    levels = gaussian_pyramid(img, 3)
    h, w = 21, 13
    for lv in levels:
        assert (lv.height, lv.width) == (h, w)
        h, w = -(-h // 2), -(-w // 2)


def test_pyramid_impulse_matches_direct_convolution_oracle():
    a = np.zeros((64, 64))
    a[32, 32] = 1.0

    k = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0

    def blur_then_half(x):
        # separable 5-tap with mirrored edges, then keep even rows/cols
        pad = np.pad(x, 2, mode="symmetric")
        rows = sum(k[i] * pad[i : i + x.shape[0], 2:-2] for i in range(5))
        pad = np.pad(rows, ((0, 0), (2, 2)), mode="symmetric")
        full = sum(k[i] * pad[:, i : i + x.shape[1]] for i in range(5))
        return full[::2, ::2]

    expected = blur_then_half(blur_then_half(a))
    got = gaussian_pyramid(ImageMatrix(a), 3)[2].pixels
    assert np.allclose(got, np.clip(expected, 0, 1), atol=1e-12)


def test_pyramid_depth_limit():
    assert max_pyramid_levels(64, 512) == 6
    assert max_pyramid_levels(875, 600) == 9
    img = ImageMatrix(np.zeros((8, 8)))
    with pytest.raises(InvalidArgumentError):
        gaussian_pyramid(img, max_pyramid_levels(8, 8) + 1)


# --- small kernels ----------------------------------------------------------

def test_binomial_blur_preserves_total_mass_in_interior():
    a = np.zeros((9, 9))
    a[4, 4] = 1.0
    assert binomial_blur5(a).sum() == pytest.approx(1.0, abs=1e-12)


def test_box_mean3_on_flat_field():
    assert np.allclose(box_mean3(np.full((5, 5), 2.0)), 2.0, atol=1e-12)


def test_gabor_kernel_is_zero_mean_and_rotates():
    k0 = gabor_kernel(0.0)
    k90 = gabor_kernel(np.pi / 2)
    assert abs(k0.sum()) < 1e-10
    assert np.allclose(k0, k90.T, atol=1e-10)
