"""Backbone feature export.

Config is a text file of ``key=value`` lines:

    backbone=resnet50
    layer=layer4
    resolution=417
    weights=/path/to/resnet50.pth
    out_dir=/path/to/out
    list=/path/to/images.tsv

The image list has one ``class_id<TAB>image_path<TAB>mask_path`` line per
image. Masks are read as binary (nonzero is foreground).
"""

import argparse
import logging
import os
from dataclasses import dataclass

import numpy as np

from .container import image_arrays, write_container
from .downsample import downsample_mask
from .index import write_index

log = logging.getLogger("repri_export")


@dataclass
class ExportConfig:
    backbone: str
    layer: str
    resolution: int
    weights: str
    out_dir: str
    items: list

    @classmethod
    def load(cls, path):
        kv = {}
        with open(path, encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if line and not line.startswith("#"):
                    k, _, v = line.partition("=")
                    kv[k.strip()] = v.strip()
        resolution = int(kv.get("resolution", 417))
        if resolution <= 0:
            raise ValueError("resolution must be positive")
        items = []
        with open(kv["list"], encoding="utf-8") as f:
            for line in f:
                if line.strip():
                    c, img, mask = line.rstrip("\n").split("\t")
                    for p in (img, mask):
                        if not os.path.exists(p):
                            raise FileNotFoundError(p)
                    items.append((int(c), img, mask))
        return cls(
            backbone=kv.get("backbone", "resnet50"),
            layer=kv.get("layer", "layer4"),
            resolution=resolution,
            weights=kv["weights"],
            out_dir=kv["out_dir"],
            items=items,
        )


def build_backbone(cfg):
    import torch
    import torchvision

    if not os.path.exists(cfg.weights):
        raise FileNotFoundError(f"missing weights {cfg.weights}")
    net = getattr(torchvision.models, cfg.backbone)(
        weights=None, replace_stride_with_dilation=[False, True, True]
    )
    net.load_state_dict(torch.load(cfg.weights, map_location="cpu"))
    net.eval()
    stages = ["conv1", "bn1", "relu", "maxpool", "layer1", "layer2", "layer3", "layer4"]
    body = torch.nn.Sequential(*[getattr(net, s) for s in stages[: stages.index(cfg.layer) + 1]])
    return body


def export_task_set(cfg):
    import torch
    from PIL import Image

    body = build_backbone(cfg)
    os.makedirs(cfg.out_dir, exist_ok=True)
    mean = np.array([0.485, 0.456, 0.406], dtype=np.float32)
    std = np.array([0.229, 0.224, 0.225], dtype=np.float32)
    records = []
    for n, (class_id, img_path, mask_path) in enumerate(cfg.items):
        try:
            img = Image.open(img_path).convert("RGB")
            mask = Image.open(mask_path).convert("L")
        except OSError as e:
            log.warning("skipping %s: %s", img_path, e)
            continue
        size = (cfg.resolution, cfg.resolution)
        x = (np.asarray(img.resize(size, Image.BILINEAR), dtype=np.float32) / 255 - mean) / std
        full = np.asarray(mask.resize(size, Image.NEAREST)) > 0
        with torch.no_grad():
            feats = body(torch.from_numpy(x.transpose(2, 0, 1))[None])[0]
        feats = feats.permute(1, 2, 0).numpy().astype(np.float32)
        small = downsample_mask(full, feats.shape[0], feats.shape[1])
        name = f"img_{n:05}.rpri"
        write_container(os.path.join(cfg.out_dir, name), image_arrays(feats, small))
        records.append((class_id, os.path.splitext(os.path.basename(img_path))[0], name))
    write_index(os.path.join(cfg.out_dir, "index.tsv"), records)
    return records


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("config")
    args = p.parse_args(argv)
    logging.basicConfig(level=logging.INFO)
    records = export_task_set(ExportConfig.load(args.config))
    log.info("exported %d images", len(records))


if __name__ == "__main__":
    main()
