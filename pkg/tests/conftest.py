"""Shared test helpers: synthetic datasets and a CLI harness."""

from __future__ import annotations

import contextlib
import io
import json

import numpy as np

from centerkit.cli import main


def run_cli(argv: list[str]) -> tuple[int, str, str]:
    """Run the CLI in-process, capturing exit code, stdout, and stderr."""
    out = io.StringIO()
    err = io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        try:
            code = main(argv)
        except SystemExit as e:  # argparse errors
            code = int(e.code or 0)
    return code, out.getvalue(), err.getvalue()


def coco_doc(images, annotations, categories) -> str:
    return json.dumps(
        {"images": images, "annotations": annotations, "categories": categories}
    )


def simple_dataset() -> str:
    """Two images, two categories, four boxes."""
    return coco_doc(
        images=[
            {"id": 1, "width": 100, "height": 80, "file_name": "a.png"},
            {"id": 2, "width": 64, "height": 64, "file_name": "b.png"},
        ],
        annotations=[
            {"id": 1, "image_id": 1, "category_id": 1, "bbox": [10, 10, 30, 20]},
            {"id": 2, "image_id": 1, "category_id": 2, "bbox": [50, 30, 40, 40]},
            {"id": 3, "image_id": 2, "category_id": 1, "bbox": [8, 8, 32, 16]},
            {"id": 4, "image_id": 2, "category_id": 1, "bbox": [8, 40, 48, 20]},
        ],
        categories=[
            {"id": 1, "name": "widget"},
            {"id": 2, "name": "gadget"},
        ],
    )


def clean_detection_dataset(
    n_images: int = 50,
    image_size: int = 320,
    stride: int = 4,
    seed: int = 2024,
) -> tuple[str, list[dict]]:
    """Synthetic dataset of well-separated boxes with side >= 8 * stride.

    Images are split into 2x2 quadrants; each quadrant holds at most one
    box with a margin, so boxes never overlap and centers sit far apart.
    Returns (coco json text, list of annotation dicts).
    """
    rng = np.random.default_rng(seed)
    half = image_size // 2
    min_side = 8 * stride
    max_side = half - 16
    images = []
    annotations = []
    aid = 0
    for iid in range(1, n_images + 1):
        images.append(
            {"id": iid, "width": image_size, "height": image_size, "file_name": f"{iid}.png"}
        )
        for q, (qx, qy) in enumerate(((0, 0), (half, 0), (0, half), (half, half))):
            if q > 0 and rng.random() < 0.3:
                continue
            w = int(rng.integers(min_side, max_side + 1))
            h = int(rng.integers(min_side, max_side + 1))
            x = qx + int(rng.integers(4, half - w - 4 + 1))
            y = qy + int(rng.integers(4, half - h - 4 + 1))
            aid += 1
            annotations.append(
                {
                    "id": aid,
                    "image_id": iid,
                    "category_id": 1 + (iid + q) % 3,
                    "bbox": [x, y, w, h],
                }
            )
    doc = coco_doc(
        images=images,
        annotations=annotations,
        categories=[
            {"id": 1, "name": "a"},
            {"id": 2, "name": "b"},
            {"id": 3, "name": "c"},
        ],
    )
    return doc, annotations
