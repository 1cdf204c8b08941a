import os

import numpy as np
import pytest

import tinyface.pipeline as pl
from conftest import tiny_config, tiny_layout, tiny_red
from tinyface import degradation as deg
from tinyface.components import split
from tinyface.denoise import Denoiser
from tinyface.embedding import knn, solve_weights
from tinyface.pipeline import (LayerParams, PipelineConfig, PipelineError,
                               config_from_dict, config_to_dict, hallucinate,
                               load_model, save_model, train)
from tinyface.synthetic import make_corpus


def corpus(n, seed=7):
    return make_corpus(n, seed=seed, size=32)


def test_train_minimal_dataset():
    cfg = tiny_config(layers=((2, 0.04),))
    model = train(corpus(3), cfg)
    assert len(model.indices) == 1
    assert all(idx.n == 3 for idx in model.indices[0].values())
    assert model.metadata["n_train"] == 3


def test_train_insufficient_dataset_names_both():
    cfg = tiny_config(layers=((5, 0.04),))
    with pytest.raises(PipelineError, match="6.*3|3.*6"):
        train(corpus(3), cfg)


def test_train_rejects_wrong_canvas():
    cfg = tiny_config()
    bad = [np.zeros((16, 16, 1))] * 4
    with pytest.raises(PipelineError, match="canvas"):
        train(bad, cfg)


def test_identical_constant_images_degenerate():
    # step 1 is exact on constants, so every residual index is zero and
    # step 2 must be a no-op
    cfg = tiny_config(layers=((2, 0.04), (2, 0.04)))
    dataset = [np.full((32, 32, 1), 0.5)] * 4
    model = train(dataset, cfg)
    for layer in model.indices:
        for name, idx in layer.items():
            assert np.abs(idx.residuals).max() <= 1e-6, name
    lr = deg.apply(cfg.operator(), dataset[0])
    final, steps = hallucinate(model, lr)
    assert len(steps) == 3
    assert np.abs(final - steps[0]).max() <= 1e-6


def test_leave_one_out_discipline(monkeypatch):
    seen = []
    orig = pl.embed_component

    def spy(index, q, k, lam, exclude=None):
        res = knn(index, q, k, exclude=exclude)
        seen.append((exclude, res.indices.tolist()))
        return orig(index, q, k, lam, exclude=exclude)

    monkeypatch.setattr(pl, "embed_component", spy)
    train(corpus(4), tiny_config(layers=((2, 0.1),)))
    assert seen
    for exclude, indices in seen:
        assert exclude is not None
        assert exclude not in indices


def test_training_is_deterministic(tmp_path):
    cfg = tiny_config(layers=((3, 0.04), (3, 1e4)))
    data = corpus(5)
    m1 = train(data, cfg)
    m2 = train(data, cfg)
    d1, d2 = tmp_path / "m1", tmp_path / "m2"
    save_model(m1, d1)
    save_model(m2, d2)
    files = sorted(os.listdir(d1))
    assert files == sorted(os.listdir(d2))
    for f in files:
        assert (d1 / f).read_bytes() == (d2 / f).read_bytes(), f


def test_save_load_roundtrip_bit_identical(tmp_path):
    cfg = tiny_config(layers=((3, 0.04),))
    data = corpus(6)
    model = train(data, cfg)
    save_model(model, tmp_path / "m")
    again = load_model(tmp_path / "m")
    lr = deg.apply(cfg.operator(), data[0])
    out1, _ = hallucinate(model, lr)
    out2, _ = hallucinate(again, lr)
    np.testing.assert_array_equal(out1, out2)


def test_hallucinate_validates_input_size():
    model = train(corpus(4), tiny_config(layers=((2, 0.04),)))
    with pytest.raises(PipelineError, match="8x8"):
        hallucinate(model, np.zeros((16, 16, 1)))


def test_step2_is_residual_additive():
    cfg = tiny_config(layers=((3, 0.04),))
    data = corpus(6)
    model = train(data, cfg)
    lr = deg.apply(cfg.operator(), make_corpus(1, seed=99, size=32)[0])
    _, steps = hallucinate(model, lr)
    before = split(steps[0], cfg.layout)
    after = split(steps[1], cfg.layout)
    lp = cfg.layers[0]
    for name in cfg.layout.names:
        idx = model.indices[0][name]
        q = before.vectors[name]
        res = knn(idx, q, lp.k)
        w = solve_weights(q, idx.features[res.indices].astype(float),
                          res.dists, lp.lambda_emb)
        expect = idx.residuals[res.indices].astype(float).T @ w
        np.testing.assert_allclose(after.vectors[name] - q, expect, atol=1e-12)


def test_intermediates_count():
    cfg = tiny_config(layers=((2, 0.04), (2, 1e3), (2, 1e3)))
    model = train(corpus(4), cfg)
    lr = deg.apply(cfg.operator(), corpus(1)[0])
    final, steps = hallucinate(model, lr)
    assert len(steps) == len(cfg.layers) + 1
    np.testing.assert_array_equal(final, steps[-1])


def test_step1_cache(tmp_path):
    cfg = tiny_config(layers=((2, 0.04),))
    data = corpus(4)
    cache = tmp_path / "cache"
    m1 = train(data, cfg, cache_dir=str(cache))
    assert len(list(cache.glob("*.npy"))) == 4
    m2 = train(data, cfg, cache_dir=str(cache))
    for l1, l2 in zip(m1.indices, m2.indices):
        for name in l1:
            np.testing.assert_array_equal(l1[name].features, l2[name].features)


def test_model_load_errors(tmp_path):
    cfg = tiny_config(layers=((2, 0.04),))
    model = train(corpus(4), cfg)
    path = tmp_path / "m"
    save_model(model, path)

    meta = path / "model.json"
    good = meta.read_text()
    meta.write_text(good[: len(good) // 2])
    with pytest.raises(PipelineError, match="corrupt"):
        load_model(path)
    meta.write_text(good.replace('"version": 1', '"version": 42'))
    with pytest.raises(PipelineError, match="version"):
        load_model(path)
    meta.write_text(good)
    os.remove(path / "layer1_eyes.idx")
    with pytest.raises(PipelineError, match="missing"):
        load_model(path)


def test_config_dict_roundtrip():
    cfg = tiny_config(layers=((3, 0.04), (5, 2.0)))
    again = config_from_dict(config_to_dict(cfg))
    assert again == cfg


def test_config_validation():
    with pytest.raises(PipelineError):
        tiny_config(layers=())
    with pytest.raises(PipelineError):  # 32 not divisible by 5
        PipelineConfig(scale=5, red=tiny_red(), layout=tiny_layout(),
                       layers=(LayerParams(3, 0.04),),
                       denoiser=Denoiser("gaussian"))
