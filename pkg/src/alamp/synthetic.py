"""Synthetic images and detections for tests, demos and the learnability check.

Toy task: an image is high quality iff it contains a *textured* square
(stripes, as opposed to a flat square of the same mean colour) AND its
sidecar detections form a *spread* layout (two disjoint boxes side by side,
as opposed to two heavily overlapping boxes). The texture is only visible to
the patch branch and the layout only to the layout branch.
"""

from __future__ import annotations

import os

import numpy as np

from alamp.harness.manifest import write_manifest
from alamp.imaging import Image, Rect, save_png
from alamp.layout import Detection, dump_detections


def random_image(rng: np.random.Generator, size: int = 128, n_blobs: int = 4) -> Image:
    """Smooth background with a few coloured rectangles and mild noise."""
    yy, xx = np.mgrid[0:size, 0:size] / size
    c0, c1 = rng.uniform(40, 200, size=(2, 3))
    img = c0 + (c1 - c0) * (0.5 * xx + 0.5 * yy)[..., None]
    for _ in range(n_blobs):
        w, h = rng.integers(8, size // 3, size=2)
        x, y = rng.integers(0, size - w), rng.integers(0, size - h)
        img[y:y + h, x:x + w] = rng.uniform(0, 255, size=3)
        if rng.random() < 0.5:
            img[y:y + h:2, x:x + w] *= 0.5
    img += rng.normal(0, 3.0, size=img.shape)
    return Image(np.clip(np.rint(img), 0, 255).astype(np.uint8))


def random_detections(rng: np.random.Generator, dims, n: int) -> list[Detection]:
    width, height = dims
    dets = []
    for _ in range(n):
        w = float(rng.integers(1, width + 1))
        h = float(rng.integers(1, height + 1))
        x = float(rng.integers(0, width - int(w) + 1))
        y = float(rng.integers(0, height - int(h) + 1))
        dets.append(Detection(Rect(x, y, w, h), float(np.round(rng.random(), 3))))
    return dets


def toy_image(rng: np.random.Generator, textured: bool, size: int = 128, side: int = 32) -> Image:
    yy, xx = np.mgrid[0:size, 0:size] / size
    c0, c1 = rng.uniform(90, 150, size=(2, 3))
    img = c0 + (c1 - c0) * xx[..., None] * 0.5 + (c1 - c0) * yy[..., None] * 0.5
    x, y = rng.integers(4, size - side - 4, size=2)
    color = rng.uniform(0, 255, size=3)
    color[rng.integers(3)] = rng.choice([10.0, 245.0])
    other = np.clip(255.0 - color, 0, 255)
    if textured:
        rows = ((np.arange(side) // 2) % 2 == 0)[:, None, None]
        square = np.broadcast_to(np.where(rows, color, other), (side, side, 3))
        if rng.random() < 0.5:
            square = square.transpose(1, 0, 2)
    else:
        square = 0.5 * (color + other)
    img[y:y + side, x:x + side] = square
    img += rng.normal(0, 2.0, size=img.shape)
    return Image(np.clip(np.rint(img), 0, 255).astype(np.uint8))


def toy_detections(rng: np.random.Generator, spread: bool, size: int = 128) -> list[Detection]:
    w1, h1, w2, h2 = rng.integers(18, 34, size=4).astype(float)
    if spread:
        x1 = rng.uniform(2, size / 3 - w1 / 2)
        x2 = rng.uniform(2 * size / 3 - w2 / 2, size - w2 - 2)
        y1 = rng.uniform(size / 4, size * 3 / 4 - h1)
        y2 = float(np.clip(y1 + rng.uniform(-8, 8), 0, size - h2))
    else:
        x1 = rng.uniform(size / 4, size / 2)
        y1 = rng.uniform(size / 4, size / 2)
        x2 = float(np.clip(x1 + rng.uniform(-4, 4), 0, size - w2))
        y2 = float(np.clip(y1 + rng.uniform(-4, 4), 0, size - h2))
    s1, s2 = rng.uniform(0.5, 1.0, size=2)
    return [
        Detection(Rect(float(x1), float(y1), w1, h1), float(s1)),
        Detection(Rect(float(x2), float(y2), w2, h2), float(s2)),
    ]


def toy_dataset(n: int, seed: int, size: int = 128):
    """``n`` samples of ``(image, detections, label)``, half of them positive.

    Negatives are split evenly between the three other texture/layout
    combinations, so neither branch alone separates the classes.
    """
    rng = np.random.default_rng(seed)
    kinds = [(True, True)] * (n // 2)
    negatives = [(True, False), (False, True), (False, False)]
    kinds += [negatives[k % 3] for k in range(n - n // 2)]
    order = rng.permutation(n)
    out = []
    for k in order:
        textured, spread = kinds[k]
        img = toy_image(rng, textured, size)
        dets = toy_detections(rng, spread, size)
        out.append((img, dets, int(textured and spread)))
    return out


def write_dataset(root: str | os.PathLike, samples, name: str = "manifest.csv") -> str:
    """Write PNGs, ``.dets.json`` sidecars and a manifest; returns the manifest path."""
    os.makedirs(root, exist_ok=True)
    rows = []
    for k, (img, dets, label) in enumerate(samples):
        fname = f"img{k:04d}.png"
        save_png(os.path.join(root, fname), img.pixels)
        dump_detections(os.path.join(root, fname + ".dets.json"), dets)
        rows.append((fname, 7.0 if label else 3.0, None))
    path = os.path.join(root, name)
    write_manifest(path, rows)
    return path
