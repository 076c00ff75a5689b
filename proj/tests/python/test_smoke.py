import numpy as np
import pytest

import latticecrf as lcrf


def column_rel_l2(approx, exact):
    num = np.sqrt(((approx - exact) ** 2).sum(axis=0))
    den = np.sqrt((exact**2).sum(axis=0))
    return (num / np.maximum(den, 1e-300)).max()


def two_region_fixture(h=24, w=24, flip=0.2, seed=7):
    rng = np.random.default_rng(seed)
    img = np.zeros((h, w, 3), np.uint8)
    img[:, : w // 2] = (60, 80, 190)
    img[:, w // 2 :] = (200, 120, 60)
    gt = np.zeros((h, w), np.int32)
    gt[:, w // 2 :] = 1

    costs = np.zeros((h, w, 2))
    costs[..., 0] = np.where(gt == 0, 0.0, 2.0)
    costs[..., 1] = np.where(gt == 1, 0.0, 2.0)
    mask = rng.random((h, w)) < flip
    costs[mask] = costs[mask][:, ::-1]
    return img, gt, costs


def test_lattice_filter_tracks_brute_force():
    rng = np.random.default_rng(11)
    points = rng.normal(size=(400, 3))
    values = rng.random((400, 2))
    stddevs = [0.5, 2.0, 1.0]

    lattice = lcrf.PermutohedralLattice(lcrf.whiten_features(points, stddevs))
    assert lattice.num_points == 400
    assert lattice.dim == 3
    assert lattice.num_vertices > 0
    assert np.all(lattice.normalization > 0)

    approx = lattice.filter(values, normalize=True)
    exact = lcrf.brute_force_filter(points, stddevs, values, normalize=True)
    assert column_rel_l2(approx, exact) <= 0.05


def test_inference_marginals_are_stochastic():
    rng = np.random.default_rng(13)
    img = rng.integers(0, 256, size=(16, 16, 3), dtype=np.uint8)
    unary = 3.0 * rng.random((16, 16, 3))

    crf = lcrf.DenseCRF(unary)
    assert crf.num_pixels == 256
    assert crf.num_labels == 3
    crf.add_appearance_kernel(img, weight=1.0, theta_alpha=6.0, theta_beta=30.0)
    crf.add_smoothness_kernel(weight=1.0, theta_gamma=1.5)

    for backend in ("lattice", "brute"):
        q = crf.run(5, backend=backend)
        assert q.shape == (16, 16, 3)
        assert np.all(q >= 0)
        assert np.allclose(q.sum(axis=-1), 1.0, atol=1e-9)

    labels = lcrf.map_labeling(crf.run(5))
    assert labels.shape == (16, 16)
    assert labels.dtype == np.int32
    assert np.all((labels >= 0) & (labels < 3))


def test_zero_weights_reduce_to_unary_softmax():
    rng = np.random.default_rng(17)
    img = rng.integers(0, 256, size=(10, 8, 3), dtype=np.uint8)
    unary = 4.0 * rng.random((10, 8, 3))

    crf = lcrf.DenseCRF(unary)
    crf.add_appearance_kernel(img, weight=0.0, theta_alpha=4.0, theta_beta=20.0)
    crf.add_smoothness_kernel(weight=0.0, theta_gamma=1.0)
    q = crf.run(7)

    e = np.exp(-(unary - unary.min(axis=-1, keepdims=True)))
    expect = e / e.sum(axis=-1, keepdims=True)
    assert np.allclose(q, expect, atol=1e-12)
    assert np.array_equal(lcrf.map_labeling(q), unary.argmin(axis=-1))


def test_inference_denoises_and_kl_decreases():
    img, gt, costs = two_region_fixture()
    crf = lcrf.DenseCRF(costs, "potts")
    crf.add_appearance_kernel(img, weight=1.5, theta_alpha=6.0, theta_beta=15.0)

    q, kl = crf.run(10, return_kl=True)
    assert len(kl) == 11
    assert kl[-1] < kl[0]
    assert crf.kl_estimate(q) == pytest.approx(kl[-1], rel=1e-9)

    pred = lcrf.map_labeling(q)
    unary_pred = costs.argmin(axis=-1).astype(np.int32)
    assert lcrf.global_accuracy(pred, gt) >= lcrf.global_accuracy(unary_pred, gt)

    energy_pred = crf.energy(pred)
    energy_unary = crf.energy(unary_pred)
    assert np.isfinite(energy_pred) and np.isfinite(energy_unary)


def test_metrics_identities():
    _, gt, _ = two_region_fixture(h=8, w=8)
    assert lcrf.global_accuracy(gt, gt) == 100.0
    assert lcrf.average_accuracy(gt, gt, 2) == 100.0

    band, errors, percent = lcrf.trimap_error(gt, gt, 1)
    assert band > 0 and errors == 0 and percent == 0.0

    per_class, valid, mean = lcrf.voc_iou(gt, gt, 3)
    assert mean == 100.0
    assert valid == [True, True, False]
    assert per_class[0] == 100.0 and per_class[1] == 100.0


def test_io_roundtrips(tmp_path):
    rng = np.random.default_rng(19)

    unary = rng.random((5, 6, 3)) * 9.0
    upath = str(tmp_path / "u.dcu")
    lcrf.save_unary(unary, upath)
    loaded = lcrf.load_unary(upath)
    assert np.array_equal(loaded, unary.astype(np.float32).astype(np.float64))

    labels = rng.integers(0, 4, size=(6, 7)).astype(np.int32)
    labels[0, 0] = -1
    lpath = str(tmp_path / "labels.png")
    lcrf.save_labelmap(labels, lpath)
    assert np.array_equal(lcrf.load_labelmap(lpath), labels)

    img = rng.integers(0, 256, size=(4, 5, 3), dtype=np.uint8)
    ipath = str(tmp_path / "img.ppm")
    lcrf.save_ppm(img, ipath)
    assert np.array_equal(lcrf.load_image(ipath), img)

    mu = np.array([[0.0, 0.5, 1.0], [0.5, 0.0, 0.25], [1.0, 0.25, 0.0]])
    cpath = str(tmp_path / "mu.txt")
    lcrf.save_compatibility(mu, cpath)
    assert np.array_equal(lcrf.load_compatibility(cpath), mu)


def test_error_translation():
    rng = np.random.default_rng(23)
    unary = rng.random((4, 4, 2))
    with pytest.raises(ValueError):
        lcrf.DenseCRF(unary, np.zeros((3, 3)))
    crf = lcrf.DenseCRF(unary)
    with pytest.raises(ValueError):
        crf.run(5, backend="mystery")
    with pytest.raises(RuntimeError):
        lcrf.load_unary("/nonexistent/file.dcu")
    gt = np.zeros((4, 4), np.int32)
    gt[:, 2:] = 1
    with pytest.raises(ValueError):
        lcrf.trimap_error(gt, gt, 0)
