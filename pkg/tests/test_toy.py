import numpy as np
import pytest

from seldkit import _accel

from seldkit.codec import ActiveEventSet, annotations_to_active_sets, decode_predictions
from seldkit.errors import DomainError, FormatError, TrainingError
from seldkit.features import FeatureTensor, compute_stats, extract_features, standardize
from seldkit.synth import static_source_scene
from seldkit.toy import (
    ToyModel, TrainConfig, _backward, _forward, forward, init_model, load_model, loss_and_grads,
    pool_frames, save_model, train,
)
from seldkit.adpit import adpit_loss_grad


@pytest.fixture(scope="module")
def scene():
    clip, table = static_source_scene()
    x = extract_features(clip)
    x = standardize(x, compute_stats([x]))
    return x, table, annotations_to_active_sets(table, x.n_frames // 5)


def test_init_deterministic():
    a, b = init_model(16, 3), init_model(16, 3)
    for p, q in zip(a.params(), b.params()):
        assert p.tobytes() == q.tobytes()
    assert not np.any(a.b1) and not np.any(a.b2)
    assert a.W1.shape == (16, 448) and a.W2.shape == (156, 16)
    s = np.sqrt(6 / (448 + 16))
    assert np.abs(a.W1).max() <= s
    with pytest.raises(DomainError):
        init_model(0)


def test_zero_input_gives_no_events():
    pred = forward(init_model(32, 0), FeatureTensor(np.zeros((7, 25, 64))))
    assert not np.any(pred)
    assert len(decode_predictions(pred)) == 0


def test_forward_shapes(rng):
    x = FeatureTensor(rng.normal(size=(7, 248, 64)))
    pred = forward(init_model(8, 1), x)
    assert pred.shape == (3, 13, 4, 49)


def test_pooling_is_mean_of_five(rng):
    v = rng.normal(size=(7, 12, 64))
    pooled = pool_frames(v)
    assert pooled.shape == (2, 448)
    np.testing.assert_allclose(pooled[1].reshape(7, 64), v[:, 5:10].mean(axis=1))


def test_head_is_linear(rng):
    x = FeatureTensor(rng.normal(size=(7, 20, 64)))
    m = init_model(8, 2)
    doubled = m.copy()
    doubled.W2 *= 2
    assert np.array_equal(forward(doubled, x), 2 * forward(m, x))


@pytest.mark.parametrize("optimizer", ["sgd", "adam"])
def test_zero_learning_rate(scene, optimizer):
    x, _, sets = scene
    m = init_model(16, 0)
    m2, curve = train(m, [x], [sets], TrainConfig(lr=0.0, epochs=5, optimizer=optimizer))
    for p, q in zip(m.params(), m2.params()):
        assert np.array_equal(p, q)
    assert np.all(curve == curve[0])


def test_zero_targets_from_zero_model(scene):
    x, _, _ = scene
    m = init_model(16, 0)
    for p in m.params():
        p[...] = 0.0
    _, curve = train(m, [x], [ActiveEventSet.empty(x.n_frames // 5)], TrainConfig(epochs=1))
    assert curve.tolist() == [0.0]


def test_composite_gradient_finite_differences(scene, rng):
    x, _, sets = scene
    m = init_model(12, 4)
    # move away from zero biases so every parameter block matters
    m.b2 += rng.normal(scale=0.3, size=m.b2.shape)
    m.b1 += rng.normal(scale=0.3, size=m.b1.shape)
    inputs = pool_frames(x)
    data = [(inputs, sets)]
    _, grads = loss_and_grads(m, data)
    h = 1e-4
    checked = 0
    for _ in range(32):
        k = int(rng.integers(4))
        p = m.params()[k]
        idx = tuple(int(rng.integers(s)) for s in p.shape)
        orig = p[idx]
        p[idx] = orig + h
        up, _ = loss_and_grads(m, data)
        p[idx] = orig - h
        down, _ = loss_and_grads(m, data)
        p[idx] = orig
        fd = (up - down) / (2 * h)
        g = grads[k][idx]
        if abs(g) < 1e-10 and abs(fd) < 1e-10:
            continue
        assert abs(fd - g) / max(abs(fd), abs(g)) < 1e-4, (k, idx, fd, g)
        checked += 1
    assert checked >= 16


def test_backward_matches_loss_gradient_chain(scene):
    x, _, sets = scene
    m = init_model(8, 0)
    inputs = pool_frames(x)
    pred, hidden = _forward(m, inputs)
    res = adpit_loss_grad(pred, sets)
    grads = _backward(m, inputs, hidden, res.gradient)
    assert [g.shape for g in grads] == [p.shape for p in m.params()]


def test_training_is_reproducible(scene):
    x, _, sets = scene
    cfg = TrainConfig(lr=1e-3, epochs=30, optimizer="adam")
    a, ca = train(init_model(16, 5), [x], [sets], cfg)
    b, cb = train(init_model(16, 5), [x], [sets], cfg)
    assert ca.tobytes() == cb.tobytes()
    for p, q in zip(a.params(), b.params()):
        assert p.tobytes() == q.tobytes()


@pytest.mark.skipif(not _accel.HAVE_NUMBA, reason="numba disabled")
def test_training_identical_across_backends(scene, monkeypatch):
    x, _, sets = scene
    cfg = TrainConfig(lr=1e-3, epochs=20, optimizer="adam")
    runs = []
    for flag in (True, False):
        monkeypatch.setattr(_accel, "use_numba", lambda flag=flag: flag)
        runs.append(train(init_model(16, 5), [x], [sets], cfg))
    (a, ca), (b, cb) = runs
    assert ca.tobytes() == cb.tobytes()
    for p, q in zip(a.params(), b.params()):
        assert p.tobytes() == q.tobytes()


def test_gradient_descent_loss_is_monotone(scene):
    x, _, sets = scene
    _, curve = train(init_model(128, 0), [x], [sets], TrainConfig(lr=1e-3, epochs=500))
    early = curve[1:11] / curve[:10]
    assert early.max() <= 1.05
    assert np.all(np.diff(curve[10:]) <= 0)


def test_divergence_raises(scene):
    x, _, sets = scene
    with pytest.raises(TrainingError) as info:
        with np.errstate(all="ignore"):
            train(init_model(16, 0), [x], [sets], TrainConfig(lr=1e12, epochs=50))
    assert info.value.epoch is not None and info.value.epoch > 0


def test_mismatched_inputs(scene):
    x, _, sets = scene
    with pytest.raises(DomainError):
        train(init_model(8), [x], [ActiveEventSet.empty(3)], TrainConfig(epochs=1))
    with pytest.raises(DomainError):
        TrainConfig(lr=-1.0)


def test_checkpoint_round_trip(tmp_path):
    m = init_model(8, 9)
    m.epoch = 12
    save_model(m, tmp_path / "m.bin")
    back = load_model(tmp_path / "m.bin")
    assert back.seed == 9 and back.epoch == 12
    for p, q in zip(m.params(), back.params()):
        assert np.array_equal(p.astype(np.float32), q)
    raw = (tmp_path / "m.bin").read_bytes()
    (tmp_path / "cut.bin").write_bytes(raw[:-4])
    with pytest.raises(FormatError):
        load_model(tmp_path / "cut.bin")
    (tmp_path / "junk.bin").write_bytes(b"nope")
    with pytest.raises(FormatError):
        load_model(tmp_path / "junk.bin")


def test_model_dataclass_copy_is_deep():
    m = init_model(4)
    c = m.copy()
    c.W1 += 1
    assert not np.array_equal(m.W1, c.W1)
    assert isinstance(c, ToyModel)
