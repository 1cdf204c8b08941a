"""End-to-end two-step pipeline: global reconstruction followed by
multi-layer neighbor component embedding.

Training degrades every HR face, reconstructs it globally, then builds a
stack of per-component residual indices. Each layer re-embeds the whole
training set in leave-one-out mode, and the embedded outputs become the
inputs of the next layer, shrinking the gap between the degraded and HR
manifolds one layer at a time.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field, replace

import numpy as np

from . import degradation as deg
from .components import (ComponentLayout, default_layout, layout_from_json,
                         layout_to_json, merge, split)
from .denoise import Denoiser, NoiseSchedule
from .embedding import TrainingIndex, embed_component, load_index, save_index
from .metrics import psnr
from .red import RedConfig, red_solve

_MODEL_FORMAT = "tinyface-model"
_MODEL_VERSION = 1


class PipelineError(RuntimeError):
    pass


@dataclass(frozen=True)
class LayerParams:
    k: int = 9
    lambda_emb: float = 0.04


@dataclass(frozen=True)
class PipelineConfig:
    scale: int = 8
    red: RedConfig = field(default_factory=RedConfig)
    layout: ComponentLayout = field(default_factory=default_layout)
    layers: tuple = (LayerParams(), LayerParams(), LayerParams())
    denoiser: Denoiser = field(default_factory=lambda: Denoiser("gaussian"))
    kernel: str = "gaussian"
    kernel_sigma: float | None = None

    def __post_init__(self):
        if self.scale < 2:
            raise PipelineError("scale must be >= 2")
        if len(self.layers) < 1:
            raise PipelineError("need at least one embedding layer")
        cw, ch = self.layout.canvas
        if cw % self.scale or ch % self.scale:
            raise PipelineError("canvas must be divisible by scale")

    def operator(self) -> deg.DegradationOperator:
        return deg.make_operator(self.scale, self.kernel, self.kernel_sigma)


def config_to_dict(cfg: PipelineConfig) -> dict:
    sch = cfg.red.schedule
    return {
        "scale": cfg.scale,
        "kernel": cfg.kernel,
        "kernel_sigma": cfg.kernel_sigma,
        "red": {
            "lam": cfg.red.lam,
            "outer_iters": cfg.red.outer_iters,
            "cg_tol": cfg.red.cg_tol,
            "cg_max_iter": cfg.red.cg_max_iter,
            "init": cfg.red.init,
            "stop_tol": cfg.red.stop_tol,
            "schedule": {"sigma_start": sch.sigma_start,
                         "sigma_end": sch.sigma_end,
                         "steps": sch.steps,
                         "spacing": sch.spacing},
        },
        "layout": json.loads(layout_to_json(cfg.layout)),
        "layers": [{"k": lp.k, "lambda_emb": lp.lambda_emb}
                   for lp in cfg.layers],
        "denoiser": {"kind": cfg.denoiser.kind,
                     "params": dict(cfg.denoiser.params),
                     "noise_level": cfg.denoiser.noise_level},
    }


def config_from_dict(data: dict) -> PipelineConfig:
    red = data.get("red", {})
    sch = red.get("schedule", {})
    outer = red.get("outer_iters", 30)
    schedule = NoiseSchedule(
        sigma_start=sch.get("sigma_start", 12 / 255),
        sigma_end=sch.get("sigma_end", 2 / 255),
        steps=sch.get("steps", outer),
        spacing=sch.get("spacing", "log"))
    red_cfg = RedConfig(
        lam=red.get("lam", 0.23), outer_iters=outer, schedule=schedule,
        cg_tol=red.get("cg_tol", 1e-6), cg_max_iter=red.get("cg_max_iter", 200),
        init=red.get("init", "bicubic"), stop_tol=red.get("stop_tol", 1e-5))
    layout = (layout_from_json(json.dumps(data["layout"]))
              if "layout" in data else default_layout())
    layers = tuple(LayerParams(k=lp.get("k", 9),
                               lambda_emb=lp.get("lambda_emb", 0.04))
                   for lp in data.get("layers", [{}] * 3))
    dn = data.get("denoiser", {})
    denoiser = Denoiser(kind=dn.get("kind", "gaussian"),
                        params=dn.get("params", {}),
                        noise_level=dn.get("noise_level", 0.0))
    return PipelineConfig(
        scale=data.get("scale", 8), red=red_cfg, layout=layout,
        layers=layers, denoiser=denoiser,
        kernel=data.get("kernel", "gaussian"),
        kernel_sigma=data.get("kernel_sigma"))


@dataclass(frozen=True)
class PipelineModel:
    config: PipelineConfig
    indices: tuple   # per layer: dict component-name -> TrainingIndex
    metadata: dict = field(default_factory=dict)


def _image_hash(img: np.ndarray) -> str:
    return hashlib.sha256(
        np.ascontiguousarray(img, dtype=np.float64).tobytes()).hexdigest()


def _step1_cache_key(img: np.ndarray, cfg: PipelineConfig) -> str:
    cd = config_to_dict(cfg)
    red_part = json.dumps({"red": cd["red"], "scale": cd["scale"],
                           "kernel": cd["kernel"],
                           "kernel_sigma": cd["kernel_sigma"],
                           "denoiser": cd["denoiser"]}, sort_keys=True)
    return hashlib.sha256(
        (_image_hash(img) + red_part).encode()).hexdigest()


def _step1(lr: np.ndarray, hr: np.ndarray, cfg: PipelineConfig,
           op, cache_dir) -> np.ndarray:
    # cache key covers image + everything step 1 depends on; leave-one-out
    # only affects step 2, so cached entries are exact
    if cache_dir is not None:
        path = os.path.join(cache_dir, _step1_cache_key(hr, cfg) + ".npy")
        if os.path.exists(path):
            return np.load(path)
    out, _ = red_solve(lr, op, cfg.denoiser, cfg.red)
    if cache_dir is not None:
        os.makedirs(cache_dir, exist_ok=True)
        np.save(path, out)
    return out


def train(dataset, cfg: PipelineConfig, cache_dir=None) -> PipelineModel:
    """Build a PipelineModel from a list of HR images."""
    dataset = [np.asarray(im, dtype=np.float64) for im in dataset]
    cw, ch = cfg.layout.canvas
    for i, im in enumerate(dataset):
        if im.shape[0] != ch or im.shape[1] != cw:
            raise PipelineError(
                f"image {i} is {im.shape[1]}x{im.shape[0]}, canvas is {cw}x{ch}")
    n = len(dataset)
    kmax = max(lp.k for lp in cfg.layers)
    if n < kmax + 1:
        raise PipelineError(
            f"need at least K+1 = {kmax + 1} training images, got {n}")

    op = cfg.operator()
    current = [_step1(deg.apply(op, hr), hr, cfg, op, cache_dir)
               for hr in dataset]
    layer_psnr = [float(np.mean([psnr(f, hr)
                                 for f, hr in zip(current, dataset)]))]

    hr_parts = [split(hr, cfg.layout) for hr in dataset]
    names = cfg.layout.names
    all_indices = []
    for lp in cfg.layers:
        cur_parts = [split(f, cfg.layout) for f in current]
        layer_idx = {}
        for name in names:
            feats = np.stack([cp.vectors[name] for cp in cur_parts])
            resid = np.stack([hp.vectors[name] for hp in hr_parts]) - feats
            layer_idx[name] = TrainingIndex(component=name,
                                            features=feats, residuals=resid)
        nxt = []
        for i in range(n):
            vecs = {}
            for name in names:
                out = embed_component(layer_idx[name],
                                      cur_parts[i].vectors[name],
                                      lp.k, lp.lambda_emb, exclude=i)
                vecs[name] = out
            nxt.append(merge(replace(cur_parts[i], vectors=vecs)))
        current = nxt
        all_indices.append(layer_idx)
        layer_psnr.append(float(np.mean([psnr(f, hr)
                                         for f, hr in zip(current, dataset)])))

    meta = {
        "dataset_hash": hashlib.sha256(
            "".join(_image_hash(im) for im in dataset).encode()).hexdigest(),
        "n_train": n,
        "training_psnr_db": layer_psnr,  # step-1 then each embedding layer
    }
    return PipelineModel(config=cfg, indices=tuple(all_indices), metadata=meta)


def hallucinate(model: PipelineModel, y: np.ndarray):
    """Super-resolve one LR image; returns (final, intermediates).

    intermediates[0] is the step-1 output, followed by one image per
    embedding layer (the last one equals the final output).
    """
    cfg = model.config
    y = np.asarray(y, dtype=np.float64)
    if y.ndim == 2:
        y = y[:, :, None]
    cw, ch = cfg.layout.canvas
    if y.shape[0] != ch // cfg.scale or y.shape[1] != cw // cfg.scale:
        raise PipelineError(
            f"expected {cw // cfg.scale}x{ch // cfg.scale} input, "
            f"got {y.shape[1]}x{y.shape[0]}")
    x, _ = red_solve(y, cfg.operator(), cfg.denoiser, cfg.red)
    steps = [x]
    for lp, layer_idx in zip(cfg.layers, model.indices):
        parts = split(x, cfg.layout)
        vecs = {name: embed_component(layer_idx[name], parts.vectors[name],
                                      lp.k, lp.lambda_emb)
                for name in cfg.layout.names}
        x = merge(replace(parts, vectors=vecs))
        steps.append(x)
    return x, steps


def save_model(model: PipelineModel, path) -> None:
    """Write a model directory: model.json + one index file per layer
    and component."""
    os.makedirs(path, exist_ok=True)
    doc = {
        "format": _MODEL_FORMAT,
        "version": _MODEL_VERSION,
        "config": config_to_dict(model.config),
        "metadata": model.metadata,
    }
    with open(os.path.join(path, "model.json"), "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for l, layer_idx in enumerate(model.indices):
        for name, idx in layer_idx.items():
            save_index(idx, os.path.join(path, f"layer{l + 1}_{name}.idx"))


def load_model(path) -> PipelineModel:
    meta_path = os.path.join(path, "model.json")
    try:
        with open(meta_path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise PipelineError(f"corrupt model at {path}: {exc}") from exc
    if doc.get("format") != _MODEL_FORMAT:
        raise PipelineError(f"corrupt model at {path}: bad format marker")
    if doc.get("version") != _MODEL_VERSION:
        raise PipelineError(
            f"unsupported model version {doc.get('version')} at {path}")
    cfg = config_from_dict(doc["config"])
    indices = []
    n_ref = None
    for l in range(len(cfg.layers)):
        layer_idx = {}
        for name in cfg.layout.names:
            fpath = os.path.join(path, f"layer{l + 1}_{name}.idx")
            if not os.path.exists(fpath):
                raise PipelineError(f"corrupt model: missing {fpath}")
            idx = load_index(fpath, component=name)
            if n_ref is None:
                n_ref = idx.n
            elif idx.n != n_ref:
                raise PipelineError("corrupt model: index row counts differ")
            layer_idx[name] = idx
        indices.append(layer_idx)
    return PipelineModel(config=cfg, indices=tuple(indices),
                         metadata=doc.get("metadata", {}))
