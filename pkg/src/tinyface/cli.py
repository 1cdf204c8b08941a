"""Command line entry points: degrade, train, run, eval.

Every subcommand echoes the fully resolved configuration into its output
directory so any artifact can be reproduced from the files next to it.
Config files may be TOML or JSON mirroring the pipeline config schema.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import os
import sys

import numpy as np

from . import degradation as deg
from .image import ImageError, bicubic_resize, load_image, save_image
from .metrics import score_set
from .pipeline import (PipelineError, config_from_dict, config_to_dict,
                       hallucinate, load_model, save_model, train)

_IMG_EXTS = (".png", ".pgm", ".ppm")


def _load_config(path) -> dict:
    if path is None:
        return {}
    if str(path).endswith(".toml"):
        try:
            import tomllib as toml_lib
        except ImportError:
            import tomli as toml_lib
        with open(path, "rb") as fh:
            return toml_lib.load(fh)
    with open(path) as fh:
        return json.load(fh)


def _echo_config(out_dir, cfg_dict) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "config_resolved.json"), "w") as fh:
        json.dump(cfg_dict, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _list_images(in_dir):
    return sorted(f for f in os.listdir(in_dir)
                  if f.lower().endswith(_IMG_EXTS))


def _read_manifest(path):
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows


def cmd_degrade(args) -> int:
    cfg = {"scale": args.scale, "kernel": args.kernel,
           "kernel_sigma": args.kernel_sigma,
           "test_fraction": args.test_fraction}
    _echo_config(args.out_dir, cfg)
    names = _list_images(args.in_dir)
    if not names:
        print(f"no images found in {args.in_dir}", file=sys.stderr)
        return 1
    op = None
    if args.scale > 1:
        op = deg.make_operator(args.scale, args.kernel, args.kernel_sigma)
    n_test = int(round(args.test_fraction * len(names)))
    failures = 0
    manifest = []
    for i, name in enumerate(names):
        hr_path = os.path.join(args.in_dir, name)
        lr_path = os.path.join(args.out_dir, name)
        try:
            img = load_image(hr_path)
            lr = img if op is None else deg.apply(op, img)
            save_image(lr, lr_path)
        except (ImageError, deg.DegradationError) as exc:
            print(f"skipping {name}: {exc}", file=sys.stderr)
            failures += 1
            continue
        split = "test" if i >= len(names) - n_test else "train"
        manifest.append({"lr": lr_path, "hr": hr_path, "split": split})
    with open(os.path.join(args.out_dir, "manifest.jsonl"), "w") as fh:
        for row in manifest:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    print(f"degraded {len(manifest)} images ({failures} failed) "
          f"-> {args.out_dir}")
    return 1 if failures else 0


def cmd_train(args) -> int:
    cfg = config_from_dict(_load_config(args.config))
    rows = [r for r in _read_manifest(args.manifest) if r["split"] == "train"]
    dataset = [load_image(r["hr"]) for r in rows]
    model = train(dataset, cfg, cache_dir=args.cache_dir)
    save_model(model, args.model_out)
    _echo_config(args.model_out, config_to_dict(cfg))
    print("layer      mean train PSNR (dB)")
    labels = ["step1"] + [f"layer{i + 1}" for i in range(len(cfg.layers))]
    for label, val in zip(labels, model.metadata["training_psnr_db"]):
        print(f"{label:<10} {val:.3f}")
    return 0


def _strip(images, pad: int = 2) -> np.ndarray:
    h = max(im.shape[0] for im in images)
    c = max(im.shape[2] for im in images)
    cols = []
    for im in images:
        if im.shape[0] != h:
            im = bicubic_resize(im, im.shape[1] * h // im.shape[0], h)
        if im.shape[2] != c:
            im = np.repeat(im, c, axis=2)
        cols.append(im)
        cols.append(np.ones((h, pad, c)))
    return np.concatenate(cols[:-1], axis=1)


def cmd_run(args) -> int:
    model = load_model(args.model)
    _echo_config(args.out_dir, config_to_dict(model.config))
    if os.path.isdir(args.input):
        inputs = [os.path.join(args.input, f) for f in _list_images(args.input)]
    else:
        inputs = [args.input]
    gt = load_image(args.gt) if args.gt else None
    for path in inputs:
        lr = load_image(path)
        final, steps = hallucinate(model, lr)
        stem = os.path.splitext(os.path.basename(path))[0]
        save_image(final, os.path.join(args.out_dir, f"{stem}_sr.png"))
        if args.emit_steps:
            cw, ch = model.config.layout.canvas
            panels = [bicubic_resize(lr, cw, ch)] + steps
            if gt is not None:
                panels.append(gt)
            save_image(_strip(panels),
                       os.path.join(args.out_dir, f"{stem}_steps.png"))
    print(f"wrote {len(inputs)} results -> {args.out_dir}")
    return 0


def _eval_one(task):
    model, lr_path, hr_path = task
    hr = load_image(hr_path)
    if lr_path:
        lr = load_image(lr_path)
    else:
        lr = deg.apply(model.config.operator(), hr)
    final, _ = hallucinate(model, lr)
    cw, ch = model.config.layout.canvas
    baseline = bicubic_resize(lr, cw, ch)
    return final, baseline, hr


def cmd_eval(args) -> int:
    model = load_model(args.model)
    _echo_config(args.out_dir, config_to_dict(model.config))
    rows = [r for r in _read_manifest(args.manifest) if r["split"] == "test"]
    if not rows:
        print("manifest has no test split entries", file=sys.stderr)
        return 1
    tasks = [(model, r.get("lr"), r["hr"]) for r in rows]
    if args.jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(args.jobs) as ex:
            results = list(ex.map(_eval_one, tasks))
    else:
        results = [_eval_one(t) for t in tasks]
    names = [os.path.basename(r["hr"]) for r in rows]
    report = score_set([(f, hr) for f, _, hr in results], names)
    base = score_set([(b, hr) for _, b, hr in results], names)
    for fname, text in [
        ("report.json", report.to_json() + "\n"),
        ("report.csv", report.to_csv()),
        ("report_bicubic.json", base.to_json() + "\n"),
        ("report_bicubic.csv", base.to_csv()),
        ("survival_psnr.csv", report.curves_csv("psnr")),
        ("survival_ssim.csv", report.curves_csv("ssim")),
    ]:
        with open(os.path.join(args.out_dir, fname), "w") as fh:
            fh.write(text)
    print(f"pipeline: {report.mean_psnr:.3f} dB / {report.mean_ssim:.4f} SSIM"
          f"   bicubic: {base.mean_psnr:.3f} dB / {base.mean_ssim:.4f} SSIM")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="tinyface",
        description="Two-step tiny-face super-resolution pipeline")
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("degrade", help="downscale HR images and write a manifest")
    d.add_argument("in_dir")
    d.add_argument("out_dir")
    d.add_argument("--scale", type=int, default=8)
    d.add_argument("--kernel", default="bicubic",
                   choices=["gaussian", "bicubic", "box"])
    d.add_argument("--kernel-sigma", type=float, default=None)
    d.add_argument("--test-fraction", type=float, default=0.0)
    d.set_defaults(func=cmd_degrade)

    t = sub.add_parser("train", help="train a pipeline model from a manifest")
    t.add_argument("manifest")
    t.add_argument("model_out")
    t.add_argument("--config", default=None, help="TOML or JSON config file")
    t.add_argument("--cache-dir", default=None,
                   help="disk cache for step-1 reconstructions")
    t.set_defaults(func=cmd_train)

    r = sub.add_parser("run", help="hallucinate LR image(s) with a model")
    r.add_argument("model")
    r.add_argument("input", help="LR image file or directory")
    r.add_argument("out_dir")
    r.add_argument("--emit-steps", action="store_true",
                   help="also write a per-step comparison strip")
    r.add_argument("--gt", default=None, help="ground truth for the strip")
    r.set_defaults(func=cmd_run)

    e = sub.add_parser("eval", help="score a model on the manifest test split")
    e.add_argument("model")
    e.add_argument("manifest")
    e.add_argument("out_dir")
    e.add_argument("--jobs", type=int, default=1)
    e.set_defaults(func=cmd_eval)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (PipelineError, ImageError, deg.DegradationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
