"""Generated 5-class texture corpus for experiments that need no real imagery.

Classes are separable by colour statistics and spatial frequency, and
deliberately indifferent to the augmentation set (transpose, flips,
small translations, RGB jitter), so augmented training cannot blur the
class boundaries:

    buildings_collapsed  low-frequency blobs, brown-grey palette
    flames_or_smoke      per-pixel noise, orange-red palette
    flood                near-smooth field, blue palette
    forests_rivers       mid-frequency texture, green palette
    urban_landscape      fine checkerboard grid, light grey palette

Images are written as binary PPM (P6) next to a ``manifest.csv``.
"""

from __future__ import annotations

import csv
import os

import numpy as np

from .data import CLASS_NAMES, Manifest, load_manifest, resize_bilinear, write_ppm
from .seeding import derived_rng
from .tensor import FLOAT, Tensor

# Per class: base RGB, pattern amplitude, pattern kind.
_CLASS_STYLES = (
    ((135.0, 110.0, 95.0), 60.0, "blobs"),
    ((205.0, 90.0, 40.0), 50.0, "noise"),
    ((70.0, 110.0, 185.0), 25.0, "smooth"),
    ((60.0, 145.0, 70.0), 45.0, "midband"),
    ((165.0, 165.0, 170.0), 55.0, "checker"),
)


def _pattern(kind: str, side: int, rng: np.random.Generator) -> Tensor:
    """A [side, side] field in [-1, 1] at the class's characteristic frequency."""
    if kind == "noise":
        return rng.uniform(-1.0, 1.0, size=(side, side)).astype(FLOAT)
    if kind == "checker":
        cell = 4
        yy, xx = np.meshgrid(np.arange(side), np.arange(side), indexing="ij")
        board = (((yy // cell) + (xx // cell)) % 2).astype(FLOAT) * 2.0 - 1.0
        return board * rng.uniform(0.8, 1.0)
    grid = {"blobs": 5, "smooth": 2, "midband": 16}[kind]
    coarse = rng.uniform(-1.0, 1.0, size=(1, grid, grid)).astype(FLOAT)
    return resize_bilinear(coarse, side, side)[0]


def make_image(label: int, side: int, rng: np.random.Generator) -> Tensor:
    """One [3, side, side] texture sample for ``label``, values in [0, 255]."""
    base, amplitude, kind = _CLASS_STYLES[label]
    tone = np.asarray(base, dtype=FLOAT) + rng.uniform(-14.0, 14.0, size=3).astype(FLOAT)
    field = _pattern(kind, side, rng) * amplitude
    grain = rng.normal(0.0, 4.0, size=(side, side)).astype(FLOAT)
    img = tone[:, None, None] + (field + grain)[None, :, :]
    return np.clip(img, 0.0, 255.0).astype(FLOAT)


def generate_dataset(
    out_dir, count: int = 500, side: int = 64, seed: int = 0
) -> Manifest:
    """Write ``count`` PPM images (balanced over the 5 classes) plus manifest.csv.

    Returns the loaded manifest.  Deterministic for a given seed.
    """
    os.makedirs(out_dir, exist_ok=True)
    manifest_path = os.path.join(out_dir, "manifest.csv")
    with open(manifest_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["path", "label"])
        for i in range(count):
            label = i % len(CLASS_NAMES)
            rng = derived_rng(seed, "synthetic", i)
            img = make_image(label, side, rng)
            name = f"{CLASS_NAMES[label]}_{i:04d}.ppm"
            write_ppm(img, os.path.join(out_dir, name))
            writer.writerow([name, CLASS_NAMES[label]])
    return load_manifest(manifest_path)
