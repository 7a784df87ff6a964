"""Regenerates the cross-language fixtures consumed by the Rust tests.

    python -m repri_export.fixtures OUT_DIR
"""

import os
import sys

import numpy as np

from .container import image_arrays, write_container
from .downsample import downsample_mask
from .index import write_index

# (source shape, target shape); several cut source pixels fractionally
SHAPES = [((7, 5), (3, 2)), ((10, 10), (4, 4)), ((13, 9), (5, 4)), ((6, 6), (6, 6)), ((9, 12), (3, 5))]


def full_masks(rng):
    for (h0, w0), target in SHAPES:
        yield rng.random((h0, w0)) < rng.uniform(0.2, 0.8), target
    # exact half-coverage ties must go to foreground
    tie = np.zeros((4, 4), dtype=bool)
    tie[:, :2] = True
    yield tie, (1, 1)
    yield tie, (2, 1)


def generate(out):
    os.makedirs(out, exist_ok=True)
    rng = np.random.default_rng(2024)
    masks = {}
    for n, (full, (h, w)) in enumerate(full_masks(rng)):
        masks[f"full_{n}"] = full.astype(np.uint8)
        masks[f"small_{n}"] = downsample_mask(full, h, w)
    write_container(os.path.join(out, "masks.rpri"), masks)

    records = []
    for n in range(6):
        class_id = 3 + n % 2
        feats = rng.standard_normal((4, 5, 6)).astype(np.float32)
        full = rng.random((12, 15)) < 0.4
        full[n % 12, :] = True
        name = f"img_{n:05}.rpri"
        write_container(os.path.join(out, name), image_arrays(feats, downsample_mask(full, 4, 5)))
        records.append((class_id, f"image{n}", name))
    write_index(os.path.join(out, "index.tsv"), records)


if __name__ == "__main__":
    generate(sys.argv[1])
