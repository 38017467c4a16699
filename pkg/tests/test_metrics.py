import math

import numpy as np
import pytest

from anoscore.edges import CannyParams, canny, edge_count
from anoscore.metrics import (DEFAULT_ALPHA, DEFAULT_KAPPA, IdentityExtractor, ScoreBundle,
                              default_feature_extractor, score_all, score_baseline,
                              score_canny, score_feature, score_f_anogan, score_mse,
                              score_origin, score_pg_anogan, score_psnr, score_residual)
from shapes import aa_disk, random_gray


def px(*values):
    return np.array([values], dtype=np.uint8)


def test_default_weights():
    assert DEFAULT_KAPPA == 1.0
    assert DEFAULT_ALPHA == 0.05


def test_canny_score_identity_and_sign():
    disk = aa_disk(14)
    assert score_canny(disk, disk) == 0
    flat = np.full_like(disk, int(disk.mean()))  # featureless reconstruction
    n_disk = edge_count(canny(disk))
    assert score_canny(disk, flat) == n_disk > 0
    assert score_canny(flat, disk) == -n_disk


def test_canny_score_mismatch():
    with pytest.raises(ValueError):
        score_canny(np.zeros((64, 64), np.uint8), np.zeros((32, 32), np.uint8))


def test_mse_examples(rng):
    assert score_mse(px(7, 9), px(7, 9)) == 0.0
    assert score_mse(px(0), px(255)) == 65025.0
    a, b = random_gray(rng), random_gray(rng)
    assert score_mse(a, b) == score_mse(b, a)


def test_psnr_examples():
    assert score_psnr(px(3, 4), px(3, 4)) == math.inf
    assert score_psnr(px(0), px(255)) == 0.0
    # 100 pixels, one differing by 255 -> MSE = 65025 / 100
    a = np.zeros((10, 10), np.uint8)
    b = a.copy()
    b[0, 0] = 255
    assert score_mse(a, b) == pytest.approx(650.25)
    assert score_psnr(a, b) == pytest.approx(20.0, abs=1e-12)


def test_psnr_decreases_with_mse():
    base = np.full((8, 8), 100, np.uint8)
    values = [score_psnr(base, base + np.uint8(k)) for k in (1, 2, 5, 20, 100)]
    assert all(x > y for x, y in zip(values, values[1:]))


def test_residual_examples():
    assert score_residual(px(1, 5, 9), px(1, 5, 9)) == 0.0
    assert score_residual(px(0, 255), px(255, 0)) == pytest.approx(math.sqrt(2), abs=1e-15)
    assert score_residual(np.full((4, 4), 3, np.uint8), np.full((4, 4), 200, np.uint8)) == 0.0


def test_residual_ignores_contrast(rng):
    a = rng.integers(0, 100, (8, 8)).astype(np.uint8)
    assert score_residual(a, (a * 2 + 10).astype(np.uint8)) == pytest.approx(0.0, abs=1e-12)


def test_origin_examples(rng):
    assert score_origin(np.zeros(8)) == 0.0
    assert score_origin([3.0, 4.0]) == 5.0
    z = rng.standard_normal(8)
    assert score_origin(-2.5 * z) == pytest.approx(2.5 * score_origin(z), rel=1e-14)


def test_feature_with_identity_extractor(rng):
    ident = IdentityExtractor((64, 64))
    a, b = random_gray(rng), random_gray(rng)
    assert score_feature(a, a, ident) == 0.0
    assert score_feature(a, b, ident) * 255 ** 2 == pytest.approx(score_mse(a, b), abs=1e-9)


def test_default_extractor(rng):
    f = default_feature_extractor()
    assert f.feature_dim == 4096 + 1024 + 256 + 3 * 64
    a, b = random_gray(rng), random_gray(rng)
    assert f(a).shape == (f.feature_dim,)
    assert f(aa_disk(10)).shape == (f.feature_dim,)
    assert score_feature(a, a, f) == 0.0
    assert score_feature(a, b, f) == score_feature(b, a, f) > 0
    np.testing.assert_array_equal(f(a), f(a.copy()))


def test_feature_extractor_bad_output():
    class Broken:
        feature_dim = 3

        def __call__(self, img):
            return np.zeros(2)

    with pytest.raises(ValueError):
        score_feature(px(1), px(2), Broken())


def test_composites(rng):
    a, b = random_gray(rng), random_gray(rng)
    f = default_feature_extractor()
    assert score_f_anogan(a, a, f) == 0.0
    assert score_f_anogan(a, b, f, kappa=0.0) == score_mse(a, b)
    expected = score_mse(a, b) + 1.0 * score_feature(a, b, f)
    assert score_f_anogan(a, b, f) == pytest.approx(expected, abs=1e-12)

    z = rng.standard_normal(8)
    assert score_pg_anogan(a, b, z, alpha=1.0) == score_residual(a, b)
    assert score_pg_anogan(a, b, z, alpha=0.0) == score_origin(z)
    expected = 0.05 * score_residual(a, b) + 0.95 * score_origin(z)
    assert score_pg_anogan(a, b, z) == pytest.approx(expected, abs=1e-12)


def test_composite_arithmetic_examples(monkeypatch):
    import anoscore.metrics as m
    monkeypatch.setattr(m, "score_mse", lambda x, xh: 0.5)
    monkeypatch.setattr(m, "score_feature", lambda x, xh, f: 0.3)
    assert m.score_f_anogan(None, None, None) == pytest.approx(0.8, abs=1e-15)
    monkeypatch.setattr(m, "score_residual", lambda x, xh: 2.0)
    monkeypatch.setattr(m, "score_origin", lambda z: 1.0)
    assert m.score_pg_anogan(None, None, None) == pytest.approx(1.05, abs=1e-15)


def test_baseline():
    assert score_baseline(np.full((64, 64), 90, np.uint8)) == 0
    disk = aa_disk(16)
    assert score_baseline(disk) == edge_count(canny(disk, CannyParams()))
    assert 0.8 * 2 * np.pi * 16 <= score_baseline(disk) <= 1.2 * 2 * np.pi * 16


def test_score_all_partial_inputs(rng):
    x = random_gray(rng)
    only = score_all(x)
    assert only.a_mse is None and only.a_canny is None and only.psnr is None
    assert only.baseline_edges == score_baseline(x)

    full = score_all(x, x, np.zeros(8))
    assert full.a_canny == 0 and full.a_canny_abs == 0
    assert full.a_mse == 0.0 and full.a_res == 0.0 and full.a_d == 0.0
    assert full.psnr == math.inf
    assert full.a_pg_anogan == 0.0

    no_z = score_all(x, random_gray(rng))
    assert no_z.a_origin is None and no_z.a_pg_anogan is None
    assert no_z.a_f_anogan == pytest.approx(no_z.a_mse + no_z.a_d)
    assert isinstance(no_z, ScoreBundle)
