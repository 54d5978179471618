"""Smoke tests for the asbunet python module."""

import numpy as np
import pytest

import asbunet


def test_effective_kernel_values():
    assert asbunet.effective_kernel(3, 1) == 3
    assert asbunet.effective_kernel(3, 2) == 5
    assert asbunet.effective_kernel(3, 3) == 7
    assert asbunet.effective_kernel(3, 4) == 9
    assert asbunet.effective_kernel(3, 5) == 11


def test_encoder_rf_trace():
    rows = asbunet.encoder_rf_trace("1/16")
    assert rows[0]["name"] == "conv1"
    assert rows[-1]["rf"] == 393
    rows8 = asbunet.encoder_rf_trace("1/8")
    assert rows8[-1]["rf"] == 305

    rep = asbunet.linearity("1/16")
    assert rep["near_linear"]
    assert rep["max_ratio"] <= 2.0


def test_conv2d_identity_kernel():
    rng = np.random.default_rng(3)
    x = rng.random((1, 1, 6, 6))
    kernel = np.zeros((1, 1, 3, 3))
    kernel[0, 0, 1, 1] = 1.0
    y = asbunet.conv2d(x, kernel, np.zeros(1))
    np.testing.assert_allclose(y, x, atol=1e-12)


def test_conv2d_dilation_widens_support():
    x = np.zeros((1, 1, 11, 11))
    x[0, 0, 5, 5] = 1.0
    kernel = np.ones((1, 1, 3, 3))
    y = asbunet.conv2d(x, kernel, np.zeros(1), dilation=3)
    ys, xs = np.nonzero(y[0, 0])
    assert ys.max() - ys.min() + 1 == 7  # effective kernel 3*(3-1)+1


def test_segeval_worked_examples():
    label = np.zeros((16, 16), dtype=np.uint8)
    label[2:8, 2:8] = 1
    assert asbunet.score_with_penalty(label, label) == 1.0
    assert asbunet.masked_jaccard(label, label) == 1.0

    blob = label.copy()
    blob[13, 13] = 1
    blob[13, 14] = 1
    assert asbunet.score_with_penalty(label, blob) == 0.0

    counted = asbunet.ignore_band(label)
    assert counted.shape == (16, 16)
    banded = label ^ (1 - counted).astype(np.uint8)
    assert asbunet.masked_jaccard(label, banded) == 1.0


def test_generate_dataset_deterministic():
    a = asbunet.generate_dataset(2, image_size=32, seed=5)
    b = asbunet.generate_dataset(2, image_size=32, seed=5)
    assert len(a) == 2
    img, label = a[0]
    assert img.shape == (3, 32, 32)
    assert label.shape == (32, 32)
    assert img.min() >= 0.0 and img.max() <= 1.0
    assert set(np.unique(label)) <= {0, 1}
    np.testing.assert_array_equal(a[0][0], b[0][0])
    np.testing.assert_array_equal(a[1][1], b[1][1])


def test_build_infer_quantize_roundtrip(tmp_path):
    ckpt = tmp_path / "net.asbu"
    params = asbunet.build_and_save(str(ckpt), scaling="1/8", seed=3)
    assert params > 100_000
    assert "asbu-netspec-v1" in asbunet.spec_text("1/8")

    img, _ = asbunet.generate_dataset(1, image_size=32, seed=9)[0]
    mask = asbunet.infer(str(ckpt), img)
    assert mask.shape == (32, 32)
    assert mask.min() > 0.0 and mask.max() < 1.0

    qckpt = tmp_path / "net_int8.asbu"
    asbunet.quantize_checkpoint(str(ckpt), str(qckpt), calib_images=2, image_size=32)
    assert qckpt.stat().st_size < 0.30 * ckpt.stat().st_size
    qmask = asbunet.infer(str(qckpt), img)
    assert qmask.shape == (32, 32)
    assert np.abs(qmask - mask).mean() < 0.05


def test_shape_errors_surface_as_python_exceptions():
    with pytest.raises(ValueError):
        asbunet.conv2d(np.zeros((2, 2)), np.zeros((1, 1, 1, 1)), np.zeros(1))
    with pytest.raises(ValueError):
        asbunet.masked_jaccard(
            np.zeros((4, 4), dtype=np.uint8), np.zeros((5, 5), dtype=np.uint8)
        )
