import numpy as np
import pytest

from alamp.errors import OutOfBounds
from alamp.imaging import Image, Rect
from alamp.saliency import SaliencyMap, compute_saliency, patch_saliency
from alamp.synthetic import random_image
from oracles import saliency_oracle


def test_constant_image_gives_zero_map():
    smap = compute_saliency(Image(np.full((32, 40, 3), 90, dtype=np.uint8)))
    assert smap.values.shape == (32, 40)
    assert not smap.values.any()


def test_bright_square_is_salient():
    px = np.full((64, 64, 3), 20, dtype=np.uint8)
    px[40:48, 12:20] = 240
    smap = compute_saliency(Image(px))
    r, c = np.unravel_index(np.argmax(smap.values), smap.values.shape)
    assert 40 <= r < 48 and 12 <= c < 20
    # the oracle's peak is in the square too (the peak plateau is symmetric,
    # so the exact argmax pixel may differ by rounding)
    ref = saliency_oracle(px, 64 / 16)
    rr, rc = np.unravel_index(np.argmax(ref), ref.shape)
    assert 40 <= rr < 48 and 12 <= rc < 20
    assert ref[r, c] == pytest.approx(ref.max(), abs=1e-12)


def test_matches_direct_formula(rng):
    for size in ((48, 48), (40, 64)):
        img = random_image(rng, 64)
        img = Image(img.pixels[: size[0], : size[1]])
        expected = saliency_oracle(img.pixels, min(size) / 16)
        np.testing.assert_allclose(compute_saliency(img).values, expected, atol=1e-12)


def test_range_and_determinism(rng):
    for _ in range(5):
        img = random_image(rng, 48)
        a, b = compute_saliency(img), compute_saliency(Image(img.pixels.copy()))
        assert a.values.min() >= 0.0 and a.values.max() <= 1.0
        assert a.values.tobytes() == b.values.tobytes()


def test_patch_saliency_uniform_map():
    smap = SaliencyMap.from_array(np.full((20, 30), 0.5))
    for r in (Rect(0, 0, 1, 1), Rect(3, 4, 10, 7), Rect(0, 0, 30, 20)):
        assert patch_saliency(smap, r) == pytest.approx(0.5, abs=1e-15)


def test_patch_saliency_full_rect_is_global_mean(rng):
    values = rng.random((17, 23))
    smap = SaliencyMap.from_array(values)
    assert patch_saliency(smap, Rect(0, 0, 23, 17)) == pytest.approx(values.mean(), rel=1e-12)


def test_patch_saliency_matches_naive_mean(rng):
    values = rng.random((24, 24))
    smap = SaliencyMap.from_array(values)
    for _ in range(50):
        w, h = rng.integers(1, 25, size=2)
        x, y = rng.integers(0, 25 - w), rng.integers(0, 25 - h)
        naive = sum(values[r, c] for r in range(y, y + h) for c in range(x, x + w)) / (w * h)
        s = patch_saliency(smap, Rect(int(x), int(y), int(w), int(h)))
        assert s == pytest.approx(naive, rel=1e-9, abs=1e-12)
        assert 0.0 <= s <= 1.0


def test_nested_rect_sums_are_monotone(rng):
    smap = SaliencyMap.from_array(rng.random((20, 20)))
    inner, outer = Rect(5, 5, 4, 4), Rect(3, 2, 10, 12)
    assert patch_saliency(smap, inner) * inner.area <= patch_saliency(smap, outer) * outer.area


def test_patch_saliency_out_of_bounds():
    with pytest.raises(OutOfBounds):
        patch_saliency(SaliencyMap.from_array(np.zeros((4, 4))), Rect(3, 3, 2, 2))
