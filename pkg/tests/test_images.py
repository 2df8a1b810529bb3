import numpy as np
import pytest
from PIL import Image

from tvstokes.images import (PHANTOMS, ImageFormatError, NoiseSpec, add_noise, load_image, phantom,
                             save_image)


@pytest.mark.parametrize("suffix", [".png", ".pgm"])
def test_eight_bit_round_trip_is_exact(tmp_path, suffix, rng):
    raw = rng.integers(0, 256, size=(7, 9), dtype=np.uint8)
    path = tmp_path / f"a{suffix}"
    Image.fromarray(raw).save(path)
    field = load_image(path)
    out = tmp_path / f"b{suffix}"
    save_image(field, out)
    assert np.array_equal(np.asarray(Image.open(out)), raw)


def test_sixteen_bit_round_trip(tmp_path):
    ramp = np.linspace(0, 1, 40).reshape(5, 8)
    path = tmp_path / "r.png"
    save_image(ramp, path, bits=16)
    loaded = load_image(path)
    assert loaded.max() == 1.0
    np.testing.assert_allclose(loaded, ramp, atol=0.5 / 65535)


def test_black_png_is_zero(tmp_path):
    path = tmp_path / "k.png"
    Image.new("L", (6, 4)).save(path)
    field = load_image(path)
    assert field.shape == (4, 6)
    assert not field.any()


def test_save_clamps(tmp_path):
    path = tmp_path / "c.png"
    save_image(np.array([[-0.5, 0.5, 1.7]]), path)
    assert np.asarray(Image.open(path)).tolist() == [[0, 128, 255]]


def test_rejects_color_and_unknown_formats(tmp_path):
    rgb = tmp_path / "rgb.png"
    Image.new("RGB", (3, 3)).save(rgb)
    with pytest.raises(ImageFormatError):
        load_image(rgb)
    with pytest.raises(ImageFormatError):
        load_image(tmp_path / "x.jpg")
    bad = tmp_path / "bad.png"
    bad.write_bytes(b"not an image")
    with pytest.raises(ImageFormatError):
        load_image(bad)
    with pytest.raises(ImageFormatError):
        save_image(np.zeros((2, 2)), tmp_path / "x.png", bits=12)
    with pytest.raises(ImageFormatError):
        save_image(np.zeros((2, 2, 2)), tmp_path / "x.png")


def test_noise_variance_large_sample():
    gt = np.zeros((512, 512))
    noisy = add_noise(gt, NoiseSpec(0.01, seed=3))
    assert abs(np.var(noisy - gt) - 0.01) <= 0.05 * 0.01


def test_noise_is_seeded_and_unclipped():
    gt = np.full((32, 32), 0.99)
    a = add_noise(gt, NoiseSpec(0.09, seed=5))
    assert np.array_equal(a, add_noise(gt, NoiseSpec(0.09, seed=5)))
    assert not np.array_equal(a, add_noise(gt, NoiseSpec(0.09, seed=6)))
    assert a.max() > 1.0


def test_zero_variance_is_identity():
    gt = np.random.default_rng(0).uniform(size=(5, 5))
    assert np.array_equal(add_noise(gt, NoiseSpec(0.0)), gt)


def test_negative_variance_rejected():
    with pytest.raises(ValueError):
        NoiseSpec(-1.0)


@pytest.mark.parametrize("name", sorted(PHANTOMS))
def test_phantoms_in_range(name):
    img = phantom(name, 48)
    assert img.shape == (48, 48)
    assert 0.0 <= img.min() and img.max() <= 1.0
    assert img.std() > 0.05


def test_unknown_phantom():
    with pytest.raises(ValueError):
        phantom("nope")
