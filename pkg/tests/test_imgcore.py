import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from mstld import imgcore as ic
from conftest import ramp


def loop_ssim(a, b, peak=255.0, size=11, sigma=1.5):
    """Scalar reference: explicit windows, explicit sums."""
    g = ic.gaussian_window(size, sigma)
    w = np.outer(g, g)
    c1, c2 = (0.01 * peak) ** 2, (0.03 * peak) ** 2
    h, wd = a.shape
    total, count = 0.0, 0
    for i in range(h - size + 1):
        for j in range(wd - size + 1):
            pa = a[i:i + size, j:j + size]
            pb = b[i:i + size, j:j + size]
            mx = (w * pa).sum()
            my = (w * pb).sum()
            vx = (w * (pa - mx) ** 2).sum()
            vy = (w * (pb - my) ** 2).sum()
            cxy = (w * (pa - mx) * (pb - my)).sum()
            total += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
            count += 1
    return total / count


# ---------------------------------------------------------------- patches

def test_extract_constant():
    pm = ic.extract_patches(np.full((3, 3), 7.0), 2)
    assert pm.columns.shape == (4, 4)
    assert np.all(pm.columns == 0)
    assert np.all(pm.means == 7)


def test_extract_column_major_vectorisation():
    pm = ic.extract_patches(np.array([[1.0, 2.0], [3.0, 4.0]]), 2)
    np.testing.assert_array_equal(pm.columns[:, 0], np.array([1, 3, 2, 4]) - 2.5)
    assert pm.means[0] == 2.5


def test_extract_patch_too_large():
    with pytest.raises(ic.DimensionError):
        ic.extract_patches(np.zeros((3, 3)), 4)


def test_extract_layout(rng):
    img = rng.normal(size=(9, 7))
    p = 3
    pm = ic.extract_patches(img, p)
    assert pm.count == (9 - p + 1) * (7 - p + 1)
    assert len({tuple(o) for o in pm.origins}) == pm.count
    assert pm.origins.max(axis=0).tolist() == [9 - p, 7 - p]
    for j in (0, 5, pm.count - 1):
        r, c = pm.origins[j]
        patch = img[r:r + p, c:c + p]
        np.testing.assert_allclose(pm.columns[:, j] + pm.means[j], patch.ravel(order="F"))
    assert np.abs(pm.columns.mean(axis=0)).max() < 1e-9


def test_aggregate_single_patch(rng):
    img = rng.normal(size=(4, 4))
    pm = ic.extract_patches(img, 4)
    den = rng.normal(size=pm.columns.shape)
    out = ic.aggregate_patches(pm, den)
    np.testing.assert_allclose(out, (den[:, 0] + pm.means[0]).reshape(4, 4, order="F"))


def test_aggregate_constant_zero_columns():
    pm = ic.extract_patches(np.full((3, 3), 7.0), 2)
    np.testing.assert_array_equal(ic.aggregate_patches(pm, np.zeros_like(pm.columns)), np.full((3, 3), 7.0))


def test_aggregate_shape_mismatch():
    pm = ic.extract_patches(np.zeros((5, 5)), 2)
    with pytest.raises(ic.DimensionError):
        ic.aggregate_patches(pm, np.zeros((4, 3)))
    with pytest.raises(ic.DimensionError):
        ic.aggregate_patches(pm, pm.columns, width=6, height=5)


def test_aggregate_averages_overlaps():
    # loop oracle: average of (column + mean) over every covering patch
    rng = np.random.default_rng(3)
    img = rng.normal(size=(6, 5))
    pm = ic.extract_patches(img, 3)
    den = rng.normal(size=pm.columns.shape)
    acc = np.zeros(img.shape)
    cnt = np.zeros(img.shape)
    for j, (r, c) in enumerate(pm.origins):
        acc[r:r + 3, c:c + 3] += (den[:, j] + pm.means[j]).reshape(3, 3, order="F")
        cnt[r:r + 3, c:c + 3] += 1
    np.testing.assert_allclose(ic.aggregate_patches(pm, den), acc / cnt, atol=1e-12)


@given(h=st.integers(2, 20), w=st.integers(2, 20), p=st.integers(1, 6), seed=st.integers(0, 2**32 - 1))
def test_patch_round_trip(h, w, p, seed):
    p = min(p, h, w)
    img = np.random.default_rng(seed).uniform(-300, 300, (h, w))
    pm = ic.extract_patches(img, p)
    np.testing.assert_allclose(ic.aggregate_patches(pm, pm.columns), img, atol=1e-10)


# ---------------------------------------------------------------- noise

def test_noise_zero_sigma_is_identity(rng):
    img = rng.normal(size=(8, 8))
    out = ic.add_gaussian_noise(img, ic.NoiseSpec(0.0, 5))
    np.testing.assert_array_equal(out, img)
    assert out is not img


def test_noise_is_seeded_and_pure(rng):
    img = rng.normal(size=(16, 16))
    keep = img.copy()
    a = ic.add_gaussian_noise(img, ic.NoiseSpec(10.0, 42))
    b = ic.add_gaussian_noise(img, ic.NoiseSpec(10.0, 42))
    assert a.tobytes() == b.tobytes()
    np.testing.assert_array_equal(img, keep)
    assert not np.array_equal(a, ic.add_gaussian_noise(img, ic.NoiseSpec(10.0, 43)))


def test_noise_statistics():
    out = ic.add_gaussian_noise(np.zeros((512, 512)), ic.NoiseSpec(25.0, 7))
    assert abs(out.mean()) < 0.3
    assert abs(out.std() - 25.0) < 0.3


def test_noise_spec_rejects_negative():
    with pytest.raises(ValueError):
        ic.NoiseSpec(-1.0)


# ---------------------------------------------------------------- metrics

def test_psnr_values():
    a = np.zeros((4, 4))
    assert ic.psnr(a, a) == float("inf")
    assert ic.psnr(a, a + 1.0) == pytest.approx(48.1308036086791, abs=1e-4)
    assert ic.psnr(a, np.full((4, 4), 255.0)) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ic.DimensionError):
        ic.psnr(a, np.zeros((4, 5)))


@given(arrays(np.float64, (6, 7), elements=st.floats(-500, 500)),
       arrays(np.float64, (6, 7), elements=st.floats(-500, 500)))
def test_psnr_symmetric(a, b):
    assert ic.psnr(a, b) == ic.psnr(b, a)


def test_ssim_trivial_cases():
    a = ramp(32, 32)
    assert ic.ssim(a, a) == pytest.approx(1.0, abs=1e-12)
    c = np.full((20, 20), 128.0)
    assert ic.ssim(c, c) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ic.DimensionError):
        ic.ssim(np.zeros((10, 10)), np.zeros((10, 10)))
    with pytest.raises(ic.DimensionError):
        ic.ssim(np.zeros((20, 20)), np.zeros((20, 21)))


def test_ssim_matches_loop_oracle():
    ref = ramp(64, 64)
    test = ic.add_gaussian_noise(ref, ic.NoiseSpec(25.0, 11))
    got = ic.ssim(ref, test)
    assert 0 < got < 1
    assert got == pytest.approx(loop_ssim(ref, test), abs=1e-6)


@given(arrays(np.float64, (12, 13), elements=st.floats(0, 255)))
def test_ssim_self_is_one(a):
    assert ic.ssim(a, a) == pytest.approx(1.0, abs=1e-9)


def test_as_image_rejects_bad_input():
    with pytest.raises(ic.DimensionError):
        ic.as_image(np.zeros(5))
    with pytest.raises(ValueError):
        ic.as_image(np.array([[np.nan]]))


# ---------------------------------------------------------------- files

def test_raw_round_trip(tmp_path, rng):
    a = rng.normal(size=(5, 9))
    ic.write_raw(tmp_path / "a.f64", a)
    data = (tmp_path / "a.f64").read_bytes()
    assert data[:8] == np.array([9, 5], dtype="<u4").tobytes()
    assert len(data) == 8 + 8 * a.size
    np.testing.assert_array_equal(ic.read_raw(tmp_path / "a.f64"), a)


@pytest.mark.parametrize("suffix", [".pgm", ".png"])
def test_8bit_round_trip_clamps_and_rounds(tmp_path, suffix):
    a = np.array([[-5.0, 0.4, 0.6], [127.5, 254.6, 300.0]])
    ic.write_image(tmp_path / f"x{suffix}", a)
    back = ic.read_image(tmp_path / f"x{suffix}")
    np.testing.assert_array_equal(back, [[0, 0, 1], [128, 255, 255]])


def test_pgm_is_binary_p5(tmp_path):
    ic.write_image(tmp_path / "x.pgm", np.zeros((2, 3)))
    assert (tmp_path / "x.pgm").read_bytes()[:2] == b"P5"


def test_read_rejects_colour(tmp_path):
    from PIL import Image
    Image.new("RGB", (4, 4)).save(tmp_path / "c.png")
    with pytest.raises(ValueError):
        ic.read_image(tmp_path / "c.png")
