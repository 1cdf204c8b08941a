"""Decomposition of an aligned face into five regions (eyebrows, eyes,
nose, mouth, remaining) and exact reassembly.

Regions are axis-aligned rectangles; overlap is resolved by list order
(earlier region wins), and "remaining" is everything left over, so every
canvas pixel belongs to exactly one region.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

REMAINING = "remaining"


class LayoutError(ValueError):
    pass


@dataclass(frozen=True)
class Region:
    name: str
    x: int
    y: int
    w: int
    h: int


@dataclass(frozen=True)
class ComponentLayout:
    """Canvas size plus ordered feature rectangles; pixels not covered by
    any rectangle form the implicit "remaining" region."""

    canvas: tuple  # (width, height)
    regions: tuple  # feature Regions, precedence by order

    def __post_init__(self):
        cw, ch = self.canvas
        if cw < 1 or ch < 1:
            raise LayoutError("canvas must be positive")
        for r in self.regions:
            if r.name == REMAINING:
                raise LayoutError('"remaining" is implicit, not a rectangle')
            if r.w < 0 or r.h < 0:
                raise LayoutError(f"negative extent in region {r.name}")
            if r.x < 0 or r.y < 0 or r.x + r.w > cw or r.y + r.h > ch:
                raise LayoutError(f"region {r.name} outside canvas")
        names = [r.name for r in self.regions]
        if len(set(names)) != len(names):
            raise LayoutError("duplicate region names")

    @property
    def names(self) -> list:
        return [r.name for r in self.regions] + [REMAINING]

    def labels(self) -> np.ndarray:
        """Per-pixel owner index; len(regions) denotes "remaining"."""
        cw, ch = self.canvas
        lab = np.full((ch, cw), len(self.regions), dtype=np.int32)
        unclaimed = np.ones((ch, cw), dtype=bool)
        for i, r in enumerate(self.regions):
            box = unclaimed[r.y:r.y + r.h, r.x:r.x + r.w]
            lab[r.y:r.y + r.h, r.x:r.x + r.w][box] = i
            unclaimed[r.y:r.y + r.h, r.x:r.x + r.w] = False
        return lab

    def owner(self, px: int, py: int) -> str:
        return self.names[self.labels()[py, px]]


@dataclass(frozen=True)
class ComponentSet:
    """Flattened per-region pixel vectors (row-major scan, channels
    interleaved) plus the layout and channel count needed to merge back."""

    layout: ComponentLayout
    channels: int
    vectors: dict  # name -> 1-D float array


def default_layout() -> ComponentLayout:
    """Fixed rectangles for a 128x128 aligned face."""
    return ComponentLayout(
        canvas=(128, 128),
        regions=(
            Region("eyebrows", 24, 34, 80, 14),
            Region("eyes", 24, 48, 80, 16),
            Region("noses", 48, 64, 32, 24),
            Region("mouths", 40, 88, 48, 18),
        ),
    )


def split(img: np.ndarray, layout: ComponentLayout) -> ComponentSet:
    """Extract each region as a flat vector; lossless with merge()."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 2:
        img = img[:, :, None]
    cw, ch = layout.canvas
    if img.shape[0] != ch or img.shape[1] != cw:
        raise LayoutError(
            f"image {img.shape[1]}x{img.shape[0]} != canvas {cw}x{ch}")
    lab = layout.labels()
    vectors = {}
    for i, name in enumerate(layout.names):
        vectors[name] = img[lab == i].ravel()
    return ComponentSet(layout=layout, channels=img.shape[2], vectors=vectors)


def merge(cset: ComponentSet) -> np.ndarray:
    """Exact inverse of split."""
    layout = cset.layout
    cw, ch = layout.canvas
    c = cset.channels
    missing = set(layout.names) - set(cset.vectors)
    if missing:
        raise LayoutError(f"incomplete component set, missing {sorted(missing)}")
    lab = layout.labels()
    out = np.empty((ch, cw, c))
    for i, name in enumerate(layout.names):
        mask = lab == i
        vec = np.asarray(cset.vectors[name], dtype=np.float64)
        if vec.size != mask.sum() * c:
            raise LayoutError(f"component {name!r} has wrong length")
        out[mask] = vec.reshape(-1, c)
    return out


def layout_to_json(layout: ComponentLayout) -> str:
    return json.dumps({
        "canvas": list(layout.canvas),
        "regions": [{"name": r.name, "x": r.x, "y": r.y, "w": r.w, "h": r.h}
                    for r in layout.regions],
    }, indent=2, sort_keys=True)


def layout_from_json(text: str) -> ComponentLayout:
    data = json.loads(text)
    regions = tuple(Region(r["name"], r["x"], r["y"], r["w"], r["h"])
                    for r in data["regions"] if r["name"] != REMAINING)
    return ComponentLayout(canvas=tuple(data["canvas"]), regions=regions)
