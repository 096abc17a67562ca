import numpy as np
import pytest

from pointerseg.network import (
    ArchConfig,
    PointerSegNet,
    encode_pointer_map,
    encode_roi_map,
    load_checkpoint,
    predict_mask,
    save_checkpoint,
)


@pytest.fixture(scope="module")
def net():
    return PointerSegNet(ArchConfig(), seed=0)


def _inputs(seed=0, size=64):
    rng = np.random.default_rng(seed)
    image = rng.random((3, size, size)).astype(np.float32)
    roi = np.ones((size, size), dtype=bool)
    return image, roi


def test_parameter_budget(net):
    total = sum(p.data.size for p in net.params)
    assert total == 252_961
    assert len(net.params) == 42


def test_params_are_float32(net):
    assert all(p.dtype == np.float32 for p in net.params)


def test_forward_shape(net):
    image, roi = _inputs()
    logits = net.forward(image, (5, 9), roi)
    assert logits.shape == (1, 64, 64)


def test_init_identity_under_pointer_and_roi_changes():
    # zero pointer/roi merge weights with unit multiplier bias: a fresh
    # net must be a pure function of the image
    net = PointerSegNet(ArchConfig(), seed=123)
    image, roi = _inputs(1)
    base = net.forward(image, (0, 0), roi).data
    moved = net.forward(image, (63, 63), roi).data
    np.testing.assert_array_equal(base, moved)

    half = roi.copy()
    half[:, 32:] = False
    other_roi = net.forward(image, (0, 0), half).data
    np.testing.assert_array_equal(base, other_roi)


def test_seeded_init_is_reproducible():
    a = PointerSegNet(ArchConfig(), seed=9)
    b = PointerSegNet(ArchConfig(), seed=9)
    for pa, pb in zip(a.params, b.params):
        np.testing.assert_array_equal(pa.data, pb.data)
    c = PointerSegNet(ArchConfig(), seed=10)
    assert any(
        not np.array_equal(pa.data, pc.data) for pa, pc in zip(a.params, c.params))


def test_pointer_validation(net):
    image, roi = _inputs()
    with pytest.raises(ValueError, match="outside image"):
        net.forward(image, (64, 0), roi)
    with pytest.raises(ValueError, match="outside the ROI"):
        bad_roi = roi.copy()
        bad_roi[5, 9] = False
        net.forward(image, (5, 9), bad_roi)


def test_spatial_size_must_be_multiple_of_64(net):
    rng = np.random.default_rng(2)
    image = rng.random((3, 96, 96)).astype(np.float32)
    with pytest.raises(ValueError, match="multiple"):
        net.forward(image, (0, 0), np.ones((96, 96), dtype=bool))
    image, _ = _inputs(size=128)
    assert net.forward(image, (0, 0), np.ones((128, 128), dtype=bool)).shape \
        == (1, 128, 128)


def test_roi_shape_checked(net):
    image, _ = _inputs()
    with pytest.raises(ValueError, match="roi"):
        net.forward(image, (0, 0), np.ones((32, 32), dtype=bool))


def test_encode_pointer_map_is_one_hot():
    m = encode_pointer_map((2, 3), 4, 5)
    assert m.shape == (1, 4, 5)
    assert m.data.sum() == 1.0
    assert m.data[0, 2, 3] == 1.0
    with pytest.raises(ValueError):
        encode_pointer_map((4, 0), 4, 5)


def test_encode_roi_map_casts_bool():
    roi = np.zeros((4, 4), dtype=bool)
    roi[1, 1] = True
    m = encode_roi_map(roi)
    assert m.dtype == np.float32
    assert m.data.sum() == 1.0


def test_predict_mask_clips_to_roi():
    logits = np.full((1, 4, 4), 10.0)  # sigmoid ~ 1 everywhere
    roi = np.zeros((4, 4), dtype=bool)
    roi[0] = True
    mask = predict_mask(logits, roi)
    np.testing.assert_array_equal(mask, roi)


def test_predict_mask_threshold():
    logits = np.array([[[-1.0, 1.0]]])
    roi = np.ones((1, 2), dtype=bool)
    np.testing.assert_array_equal(predict_mask(logits, roi, threshold=0.5),
                                  [[False, True]])
    np.testing.assert_array_equal(predict_mask(logits, roi, threshold=0.9),
                                  [[False, False]])


def test_checkpoint_roundtrip(tmp_path, net):
    path = tmp_path / "model.psg"
    save_checkpoint(path, net)
    assert (tmp_path / "model.json").exists()
    restored = load_checkpoint(path)
    assert restored.arch == net.arch
    for p, q in zip(net.params, restored.params):
        assert p.name == q.name
        np.testing.assert_array_equal(p.data, q.data)
    image, roi = _inputs(3)
    np.testing.assert_array_equal(net.forward(image, (1, 1), roi).data,
                                  restored.forward(image, (1, 1), roi).data)


def test_checkpoint_rejects_wrong_architecture(tmp_path, net):
    path = tmp_path / "model.psg"
    save_checkpoint(path, net)
    import json
    doc = json.loads((tmp_path / "model.json").read_text())
    doc["arch"]["stem_channels"] = 8
    (tmp_path / "model.json").write_text(json.dumps(doc))
    with pytest.raises(ValueError, match="mismatch|match"):
        load_checkpoint(path)


def test_arch_config_json_roundtrip():
    arch = ArchConfig()
    assert ArchConfig.from_json(arch.to_json()) == arch
    assert arch.total_stride() == 8
    assert arch.size_multiple() == 64
