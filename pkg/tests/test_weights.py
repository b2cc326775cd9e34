"""Weight store tests: deterministic init, archive round trips, validation."""

import numpy as np
import pytest

from ssmcodec.nn import softplus
from ssmcodec.transforms import TransformConfig, parameter_specs
from ssmcodec.weights import (
    WeightFormatError,
    WeightStore,
    compute_model_id,
    init_weights,
)

# Identity of (config, seed) pairs; changing either the serialization of the
# config or the id hash breaks stored bitstreams, so these stay frozen.
FROZEN_MODEL_IDS = {
    ("tiny", 0): 0x55FED3F2,
    ("small", 0): 0x6C8835DC,
    ("full", 0): 0x9013105E,
    ("tiny", 1): 0x9954D36C,
}


def test_init_is_deterministic():
    cfg = TransformConfig.tiny()
    a = init_weights(cfg, seed=7)
    b = init_weights(cfg, seed=7)
    assert set(a.params) == set(b.params)
    for name in a.params:
        np.testing.assert_array_equal(a.params[name], b.params[name])


def test_different_seeds_differ():
    cfg = TransformConfig.tiny()
    a = init_weights(cfg, seed=0)
    b = init_weights(cfg, seed=1)
    assert any(
        not np.array_equal(a.params[n], b.params[n])
        for n in a.params
        if a.params[n].size and "ln" not in n  # layer-norm gains init constant
    )


def test_init_covers_every_spec():
    cfg = TransformConfig.tiny()
    store = init_weights(cfg, seed=0)
    specs = parameter_specs(cfg)
    assert set(store.params) == {s.name for s in specs}
    for s in specs:
        arr = store.params[s.name]
        assert arr.shape == s.shape and arr.dtype == np.float32
        assert arr.flags["C_CONTIGUOUS"]


def test_structured_init_rules():
    cfg = TransformConfig.tiny()
    store = init_weights(cfg, seed=3)
    # state matrix rows follow log(1..N) so A = -exp(a_log) spans -1..-N
    a_log = store.params["ga.s0.vss.l0.scan.d0.a_log"]
    want = np.log(np.arange(1, cfg.state_dim + 1, dtype=np.float32))
    np.testing.assert_allclose(a_log, np.tile(want, (a_log.shape[0], 1)), rtol=1e-6)
    # gate bias keeps softplus(b) inside the stable step-size band
    b_delta = store.params["ga.s0.vss.l0.scan.d0.b_delta"]
    sp = softplus(b_delta.astype(np.float64))
    assert np.all(sp >= 1e-3 - 1e-9) and np.all(sp <= 1e-1 + 1e-9)
    # norms start as identity maps
    assert np.all(store.params["ga.s0.vss.l0.ln1.g"] == 1.0)
    assert np.all(store.params["ga.s0.vss.l0.ln1.b"] == 0.0)


def test_frozen_model_ids():
    for (preset, seed), want in FROZEN_MODEL_IDS.items():
        got = compute_model_id(TransformConfig.preset(preset), seed)
        assert got == want, f"{preset} seed {seed}: {got:#010x} != {want:#010x}"


def test_model_id_depends_on_config_and_seed():
    tiny = TransformConfig.tiny()
    small = TransformConfig.small()
    assert compute_model_id(tiny, 0) != compute_model_id(small, 0)
    assert compute_model_id(tiny, 0) != compute_model_id(tiny, 1)


def test_archive_round_trip_bytes_identical():
    store = init_weights(TransformConfig.tiny(), seed=0)
    blob = store.to_bytes()
    again = WeightStore.from_bytes(blob)
    assert again.seed == store.seed
    assert again.config == store.config
    for name in store.params:
        np.testing.assert_array_equal(again.params[name], store.params[name])
    assert again.to_bytes() == blob


def test_save_load_file(tmp_path):
    store = init_weights(TransformConfig.tiny(), seed=5)
    path = tmp_path / "m.ssmw"
    store.save(path)
    again = WeightStore.load(path)
    assert again.model_id == store.model_id
    np.testing.assert_array_equal(
        again.params["gs.s3.deconv.w"], store.params["gs.s3.deconv.w"]
    )


def test_from_bytes_rejects_corruption():
    store = init_weights(TransformConfig.tiny(), seed=0)
    blob = store.to_bytes()
    with pytest.raises(WeightFormatError, match="magic"):
        WeightStore.from_bytes(b"XXXX" + blob[4:])
    with pytest.raises(WeightFormatError, match="version"):
        WeightStore.from_bytes(blob[:4] + bytes([99]) + blob[5:])
    with pytest.raises(WeightFormatError, match="truncated"):
        WeightStore.from_bytes(blob[:-3])
    with pytest.raises(WeightFormatError, match="trailing"):
        WeightStore.from_bytes(blob + b"\x00")
    with pytest.raises(WeightFormatError):
        WeightStore.from_bytes(b"")


def test_validate_catches_shape_and_set_errors():
    store = init_weights(TransformConfig.tiny(), seed=0)
    params = dict(store.params)
    params["ga.s0.conv.w"] = params["ga.s0.conv.w"][..., :-1]
    with pytest.raises(WeightFormatError, match="shape"):
        WeightStore(store.config, store.seed, params).validate()
    params = dict(store.params)
    del params["ga.s0.conv.w"]
    with pytest.raises(WeightFormatError, match="missing"):
        WeightStore(store.config, store.seed, params).validate()
    params = dict(store.params)
    params["bogus"] = np.zeros(1, dtype=np.float32)
    with pytest.raises(WeightFormatError, match="unexpected"):
        WeightStore(store.config, store.seed, params).validate()
    params = dict(store.params)
    params["ga.s0.conv.b"] = params["ga.s0.conv.b"].astype(np.float64)
    with pytest.raises(WeightFormatError, match="dtype"):
        WeightStore(store.config, store.seed, params).validate()


def test_init_rejects_bad_seed():
    with pytest.raises(ValueError):
        init_weights(TransformConfig.tiny(), seed=-1)
    with pytest.raises(ValueError):
        init_weights(TransformConfig.tiny(), seed=2 ** 64)


def test_model_property_builds_and_caches(tiny_store):
    m1 = tiny_store.model
    m2 = tiny_store.model
    assert m1 is m2
    assert m1.config == tiny_store.config
    assert len(m1.ga) == 4 and len(m1.ha) == 2 and len(m1.hs) == 2 and len(m1.gs) == 4
    assert len(m1.cam) == tiny_store.config.slices
