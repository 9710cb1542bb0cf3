"""Regenerate the grayscale PGM fixture tiles under tests/data from the
sample photographs bundled with scikit-image.

Each source is converted to luma, halved by 2x2 block averaging, and cut into
96x96 tiles at fixed offsets. Training and held-out tiles come from disjoint
source photographs.
"""
import os
import sys

import numpy as np
import skimage.data as skd
import skimage.io as skio

TILE = 96

TRAIN = {
    "astronaut.png": [(40, 60), (140, 120)],
    "coffee.png": [(20, 40), (90, 180)],
    "coins.png": [(10, 20), (50, 90)],
    "moon.png": [(30, 30), (140, 140)],
    "rocket.jpg": [(40, 20), (100, 200)],
    "motorcycle_left.png": [(30, 60), (120, 220)],
    "brick.png": [(60, 60)],
    "grass.png": [(20, 120)],
    "gravel.png": [(100, 40)],
    "hubble_deep_field.jpg": [(80, 90), (250, 300)],
    "ihc.png": [(30, 30), (140, 120)],
    "retina.jpg": [(250, 250), (400, 320)],
    "cell.png": [(100, 90), (200, 150)],
}

HELDOUT = {
    "camera.png": [(20, 80), (140, 130)],
    "chelsea.png": [(20, 30), (40, 120)],
    "clock_motion.png": [(20, 40)],
    "color.png": [(40, 40)],
}


def luma(img):
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 3:
        img = img[..., :3] @ np.array([0.299, 0.587, 0.114])
    return img


def halve(img):
    h, w = img.shape[0] // 2 * 2, img.shape[1] // 2 * 2
    img = img[:h, :w]
    return 0.25 * (img[0::2, 0::2] + img[1::2, 0::2] + img[0::2, 1::2] + img[1::2, 1::2])


def write_pgm(path, img):
    data = np.clip(np.floor(img + 0.5), 0, 255).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n255\n" % (data.shape[1], data.shape[0]))
        f.write(data.tobytes())


def emit(table, out_dir):
    base = os.path.dirname(skd.__file__)
    os.makedirs(out_dir, exist_ok=True)
    for name, offsets in table.items():
        img = halve(luma(skio.imread(os.path.join(base, name))))
        stem = os.path.splitext(name)[0]
        for i, (top, left) in enumerate(offsets):
            tile = img[top:top + TILE, left:left + TILE]
            assert tile.shape == (TILE, TILE), (name, tile.shape)
            write_pgm(os.path.join(out_dir, f"{stem}_{i}.pgm"), tile)


if __name__ == "__main__":
    root = sys.argv[1] if len(sys.argv) > 1 else os.path.join(os.path.dirname(__file__), "..", "tests", "data")
    emit(TRAIN, os.path.join(root, "train"))
    emit(HELDOUT, os.path.join(root, "heldout"))
