"""Run one natural-looking photo through the classifier backbone.

Usage: forward_check.py <weights.cnwf> <scratch.png>

Renders an aerial-photo-like scene (sky gradient, sun, textured ground,
building blocks), preprocesses it for the default network, extracts
features with the given backbone, and prints:

    features <dim>
    finite <true|false>
    nonzero <count>
"""

import sys

import numpy as np
from PIL import Image, ImageDraw

from disasterlens.arch import default_arch
from disasterlens.data import decode_image, preprocess
from disasterlens.network import forward_features
from disasterlens.weights import load_weights


def render_photo(path: str, side: int = 224) -> None:
    rng = np.random.default_rng(42)
    yy = np.linspace(0.0, 1.0, side)[:, None]
    img = np.zeros((side, side, 3), dtype=np.float32)
    img[..., 0] = 110 + 70 * yy
    img[..., 1] = 150 + 45 * yy
    img[..., 2] = 235 - 80 * yy
    ground = slice(int(side * 0.62), side)
    rows = side - int(side * 0.62)
    img[ground, :, 0] = 90 + rng.normal(0, 12, (rows, side))
    img[ground, :, 1] = 125 + rng.normal(0, 14, (rows, side))
    img[ground, :, 2] = 70 + rng.normal(0, 10, (rows, side))
    pil = Image.fromarray(np.clip(img, 0, 255).astype(np.uint8))
    draw = ImageDraw.Draw(pil)
    draw.ellipse([150, 28, 186, 64], fill=(250, 242, 205))
    draw.rectangle([28, 108, 70, 139], fill=(152, 147, 142))
    draw.rectangle([88, 118, 122, 139], fill=(121, 116, 113))
    draw.rectangle([170, 124, 196, 139], fill=(136, 130, 126))
    pil.save(path)


def main() -> int:
    weights_path, png_path = sys.argv[1], sys.argv[2]
    render_photo(png_path)
    spec = default_arch()
    weights = load_weights(weights_path)
    x = preprocess(decode_image(png_path), target=spec.input_shape[1])
    feats = forward_features(spec, weights, x[None, ...])[0]
    print(f"features {feats.shape[0]}")
    print(f"finite {'true' if bool(np.isfinite(feats).all()) else 'false'}")
    print(f"nonzero {int(np.count_nonzero(feats))}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
