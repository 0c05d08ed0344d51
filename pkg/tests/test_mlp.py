import numpy as np
import pytest

from cliplab.mlp import (
    DivergedLoss,
    MlpParams,
    TrainConfig,
    augment_views,
    bin_views,
    cosine_lr,
    forward,
    init_params,
    load_model,
    loss_and_grad,
    predict,
    save_model,
    softmax,
    train,
)
from cliplab.render import coord_array_from_plane
from cliplab.scene import Camera, PoseSpec, parse_view_spec
from cliplab.harness import class_views_at_poses, training_views_of

CAM = Camera()


def toy_problem(rng, n=20, dim=12, classes=5):
    X = rng.normal(size=(n, dim))
    y = rng.integers(classes, size=n)
    return X, y


# ---------------------------------------------------------------------------
# Initialization and forward pass

def test_init_deterministic_and_shapes():
    a = init_params([128, 256, 256, 256, 10], seed=3)
    b = init_params([128, 256, 256, 256, 10], seed=3)
    c = init_params([128, 256, 256, 256, 10], seed=4)
    assert a.sizes == [128, 256, 256, 256, 10]
    for wa, wb in zip(a.weights, b.weights):
        assert np.array_equal(wa, wb)
    assert not np.array_equal(a.weights[0], c.weights[0])
    assert all(np.all(bias == 0) for bias in a.biases)


def test_initial_loss_near_log_classes(rng):
    classes = 7
    params = init_params([16, 64, 64, 64, classes], seed=0)
    X = rng.normal(size=(64, 16)) * 0.1
    y = rng.integers(classes, size=64)
    loss, _ = loss_and_grad(params, X, y)
    assert loss == pytest.approx(np.log(classes), rel=0.05)


def test_he_init_preactivation_variance(rng):
    params = init_params([200, 400, 4, 4, 4], seed=1)
    X = rng.normal(size=(500, 200))  # unit-variance input
    z = X @ params.weights[0] + params.biases[0]
    assert np.var(z) == pytest.approx(2.0, rel=0.2)


def test_softmax_properties(rng):
    logits = rng.normal(size=(6, 9)) * 5
    p = softmax(logits)
    assert np.allclose(p.sum(axis=1), 1.0, atol=1e-9)
    assert np.allclose(softmax(logits + 123.4), p, atol=1e-12)


# ---------------------------------------------------------------------------
# Gradients

def test_gradient_matches_finite_differences(rng):
    """Central differences at 1e-5 step: max relative error < 1e-4."""
    sizes = [6, 8, 8, 8, 5]
    params = init_params(sizes, seed=0)
    X = rng.normal(size=(7, 6))
    y = rng.integers(5, size=7)
    wd = 1e-3
    _, grads = loss_and_grad(params, X, y, wd)
    eps = 1e-5
    worst = 0.0
    for arrays, grad_arrays in ((params.weights, grads.weights),
                                (params.biases, grads.biases)):
        for arr, g in zip(arrays, grad_arrays):
            flat = arr.ravel()
            gf = g.ravel()
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + eps
                up, _ = loss_and_grad(params, X, y, wd)
                flat[i] = orig - eps
                down, _ = loss_and_grad(params, X, y, wd)
                flat[i] = orig
                num = (up - down) / (2 * eps)
                rel = abs(num - gf[i]) / max(abs(num), abs(gf[i]), 1e-8)
                worst = max(worst, rel)
    assert worst < 1e-4


def test_duplicated_batch_gradient(rng):
    params = init_params([6, 8, 8, 8, 4], seed=2)
    X, y = toy_problem(rng, n=3, dim=6, classes=4)
    X2 = np.repeat(X, 2, axis=0)
    y2 = np.repeat(y, 2)
    loss1, g1 = loss_and_grad(params, X, y)
    loss2, g2 = loss_and_grad(params, X2, y2)
    assert loss2 == pytest.approx(loss1, abs=1e-12)
    for a, b in zip(g1.weights + g1.biases, g2.weights + g2.biases):
        assert np.allclose(a, b, atol=1e-12)


def test_zero_weight_decay_is_pure_cross_entropy(rng):
    params = init_params([6, 8, 8, 8, 4], seed=0)
    X, y = toy_problem(rng, n=10, dim=6, classes=4)
    loss0, _ = loss_and_grad(params, X, y, 0.0)
    loss1, _ = loss_and_grad(params, X, y, 1e-2)
    penalty = 0.5e-2 * sum(float(np.sum(W * W)) for W in params.weights)
    assert loss1 == pytest.approx(loss0 + penalty, abs=1e-12)


# ---------------------------------------------------------------------------
# Schedule, prediction, persistence

def test_cosine_schedule_endpoints():
    lrs = [cosine_lr(0.01, e, 300) for e in range(300)]
    assert lrs[0] == 0.01
    assert lrs[-1] == 0.0
    assert lrs[-1] < 1e-6 * lrs[0]
    assert all(a >= b for a, b in zip(lrs, lrs[1:]))
    assert cosine_lr(0.5, 0, 1) == 0.5


def test_predict_single_and_batch(rng):
    params = init_params([6, 8, 8, 8, 4], seed=0)
    X = rng.normal(size=(5, 6))
    preds, probs = predict(params, X)
    assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-9)
    one, prob1 = predict(params, X[0])
    assert one == preds[0]
    assert np.allclose(prob1, probs[0])


def test_model_file_round_trip(tmp_path):
    params = init_params([12, 16, 16, 16, 3], seed=9)
    path = str(tmp_path / "model.bin")
    save_model(params, path)
    back = load_model(path)
    for a, b in zip(params.weights + params.biases, back.weights + back.biases):
        assert np.array_equal(a, b)
    bad = tmp_path / "junk.bin"
    bad.write_bytes(b"NOTAMODEL___")
    with pytest.raises(ValueError):
        load_model(str(bad))


# ---------------------------------------------------------------------------
# Binning and augmentation

def test_bin_views_matches_coord_array(clips10, rng):
    poses = [PoseSpec("y", (float(rng.uniform(0, 360)),)) for _ in range(5)]
    views = class_views_at_poses(clips10, poses, CAM).reshape(-1, 8, 2)
    batched = bin_views(views, CAM, 64)
    stacked = np.stack([coord_array_from_plane(v, CAM, 64) for v in views])
    assert np.array_equal(batched, stacked)


def test_flip_reverses_x_half(rng):
    # Interior points away from bin boundaries: flipping the view in point
    # space reverses the x half of the array and preserves the y half.
    bins = 64
    width = CAM.scale / 2.0
    pts = rng.uniform(-0.9 * width, 0.9 * width, size=(8, 2))
    n = (CAM.image_size / 2 + pts * CAM.image_size / CAM.scale) / CAM.image_size
    pts = pts[None]
    arr = bin_views(pts, CAM, bins)[0]
    flipped = bin_views(pts * np.array([-1.0, 1.0]), CAM, bins)[0]
    assert not np.any(np.isclose(n * bins, np.round(n * bins)))  # no edge cases
    assert np.array_equal(flipped[:bins], arr[:bins][::-1])
    assert np.array_equal(flipped[bins:], arr[bins:])


def test_augment_views_flip_only(clips10, rng):
    views = class_views_at_poses(clips10, [PoseSpec("y", (0.0,))], CAM)[0]
    config = TrainConfig(flip=True)
    out = augment_views(views, np.random.default_rng(0), CAM, config)
    # Each view is either untouched or x-negated; y never changes.
    for a, b in zip(out, views):
        assert np.array_equal(a[:, 1], b[:, 1])
        assert np.array_equal(a[:, 0], b[:, 0]) or np.array_equal(a[:, 0], -b[:, 0])
    flipped = sum(not np.array_equal(a[:, 0], b[:, 0]) for a, b in zip(out, views))
    assert 0 < flipped < len(views)  # p=0.5 coin actually lands both ways


def test_augment_views_translation_stays_in_frame(clips10):
    views = class_views_at_poses(clips10, [PoseSpec("y", (0.0,))], CAM)[0]
    config = TrainConfig(flip=False, translation_jitter=1.0)
    out = augment_views(views, np.random.default_rng(3), CAM, config)
    half = CAM.scale / 2
    assert np.all(out >= -half - 1e-9) and np.all(out <= half + 1e-9)
    assert not np.allclose(out, views)


def test_augment_views_scale_jitter_bounds(clips10):
    views = class_views_at_poses(clips10, [PoseSpec("y", (0.0,))], CAM)[0]
    config = TrainConfig(flip=False, scale_jitter=(0.5, 0.8))
    out = augment_views(views, np.random.default_rng(4), CAM, config)
    ratio = np.abs(out) / np.maximum(np.abs(views), 1e-12)
    assert np.all(ratio < 0.8 + 1e-9) and np.all(ratio > 0.5 - 1e-9)


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(epochs=0)
    with pytest.raises(ValueError):
        TrainConfig(scale_jitter=(0.0, 1.0))
    with pytest.raises(ValueError):
        TrainConfig(translation_jitter=1.5)


# ---------------------------------------------------------------------------
# Training

def overfit_run(clips10):
    views, labels = training_views_of(clips10, parse_view_spec("y:0"), CAM)
    config = TrainConfig(flip=False, seed=0)
    return train(views, labels, 10, CAM, config)


def test_overfit_single_view(clips10):
    params, log = overfit_run(clips10)
    assert log.accuracy[-1] == 1.0
    views, labels = training_views_of(clips10, parse_view_spec("y:0"), CAM)
    pred, _ = predict(params, bin_views(views, CAM))
    assert np.array_equal(pred, labels)
    # Loss is non-increasing over every 20-epoch window, within 1% jitter.
    loss = np.array(log.loss)
    assert np.all(loss[20:] <= loss[:-20] * 1.01 + 1e-9)
    assert log.lr[-1] == 0.0


def test_train_determinism(clips10):
    views, labels = training_views_of(clips10, parse_view_spec("y:0,40"), CAM)
    config = TrainConfig(epochs=20, seed=11)
    p1, log1 = train(views, labels, 10, CAM, config)
    p2, log2 = train(views, labels, 10, CAM, config)
    for a, b in zip(p1.weights + p1.biases, p2.weights + p2.biases):
        assert np.array_equal(a, b)
    assert log1.loss == log2.loss
    p3, _ = train(views, labels, 10, CAM, TrainConfig(epochs=20, seed=12))
    assert not np.array_equal(p1.weights[0], p3.weights[0])


def test_train_rejects_bad_labels(clips10):
    views, labels = training_views_of(clips10, parse_view_spec("y:0"), CAM)
    with pytest.raises(ValueError):
        train(views, labels, 5, CAM, TrainConfig(epochs=1))


def test_train_divergence_detected(clips10):
    views, labels = training_views_of(clips10, parse_view_spec("y:0"), CAM)
    config = TrainConfig(epochs=50, lr=1e30, grad_clip_norm=0.0, weight_decay=1e-4,
                         flip=False)
    with np.errstate(over="ignore", invalid="ignore"), pytest.raises(DivergedLoss):
        train(views, labels, 10, CAM, config)
