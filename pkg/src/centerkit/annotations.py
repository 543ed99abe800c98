"""COCO-style annotation ingestion and per-box geometry.

Boxes are axis-aligned `[x, y, w, h]` rectangles in pixel coordinates with
the origin at the top-left corner. On parse they are clamped to the image
extent; zero-area boxes are retained because downstream stages define their
behaviour (a degenerate box still owns a center).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Any, Iterable, Mapping

from .errors import IntegrityError, ParseError

# COCO size-band area cutoffs (pixel^2). A box is small below 32^2, medium
# from 32^2 up to but not including 96^2, large from 96^2 on.
SMALL_AREA_MAX = 32.0 ** 2
MEDIUM_AREA_MAX = 96.0 ** 2
BANDS = ("small", "medium", "large")


@dataclass(frozen=True)
class ImageInfo:
    """One image record: identity plus pixel extent."""

    id: int
    width: float
    height: float
    file_name: str = ""

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise ValueError(
                f"image {self.id}: extent must be positive, got "
                f"{self.width}x{self.height}"
            )


@dataclass(frozen=True)
class BoundingBox:
    """One annotation: `[x, y, w, h]` plus owning image and category."""

    x: float
    y: float
    w: float
    h: float
    category_id: int
    image_id: int

    def __post_init__(self):
        if self.w < 0 or self.h < 0:
            raise ValueError(
                f"box on image {self.image_id}: negative size {self.w}x{self.h}"
            )
        if not all(math.isfinite(v) for v in (self.x, self.y, self.w, self.h)):
            raise ValueError(f"box on image {self.image_id}: non-finite geometry")

    @property
    def area(self) -> float:
        return self.w * self.h


@dataclass(frozen=True)
class Dataset:
    """Parsed annotation set. Immutable after construction."""

    images: tuple[ImageInfo, ...]
    boxes: tuple[BoundingBox, ...]
    categories: Mapping[int, str]
    _by_image: Mapping[int, ImageInfo] = field(repr=False, default=None)  # type: ignore[assignment]

    def __post_init__(self):
        object.__setattr__(self, "categories", MappingProxyType(dict(self.categories)))
        object.__setattr__(
            self, "_by_image", MappingProxyType({im.id: im for im in self.images})
        )

    def image(self, image_id: int) -> ImageInfo:
        try:
            return self._by_image[image_id]
        except KeyError:
            raise IntegrityError(f"unknown image id {image_id}") from None

    def boxes_of(self, image_id: int, category_id: int | None = None) -> list[BoundingBox]:
        return [
            b
            for b in self.boxes
            if b.image_id == image_id
            and (category_id is None or b.category_id == category_id)
        ]


def _require(obj: Mapping[str, Any], key: str, where: str) -> Any:
    if key not in obj:
        raise ParseError(f"{where}: missing required key {key!r}")
    return obj[key]


def _number(value: Any, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"{where}: expected a number, got {value!r}")
    out = float(value)
    if not math.isfinite(out):
        raise ParseError(f"{where}: non-finite number")
    return out


def parse_coco(raw: str | bytes) -> Dataset:
    """Parse a COCO-style JSON document into a Dataset.

    Requires top-level `images`, `annotations`, and `categories` arrays.
    Boxes are clamped to their image extent. Raises ParseError on malformed
    JSON or records, IntegrityError on dangling or duplicate ids.
    """
    if isinstance(raw, bytes):
        raw = raw.decode("utf-8", errors="replace")
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid JSON: {e.msg}", offset=e.pos) from None
    if not isinstance(doc, dict):
        raise ParseError("top level must be a JSON object")

    for key in ("images", "annotations", "categories"):
        if not isinstance(doc.get(key), list):
            raise ParseError(f"top level: missing or non-array {key!r}")

    categories: dict[int, str] = {}
    for k, rec in enumerate(doc["categories"]):
        where = f"categories[{k}]"
        if not isinstance(rec, dict):
            raise ParseError(f"{where}: expected an object")
        cid = _require(rec, "id", where)
        if not isinstance(cid, int) or isinstance(cid, bool):
            raise ParseError(f"{where}: id must be an integer")
        if cid in categories:
            raise IntegrityError(f"duplicate category id {cid}")
        categories[cid] = str(rec.get("name", ""))

    images: list[ImageInfo] = []
    seen_images: set[int] = set()
    for k, rec in enumerate(doc["images"]):
        where = f"images[{k}]"
        if not isinstance(rec, dict):
            raise ParseError(f"{where}: expected an object")
        iid = _require(rec, "id", where)
        if not isinstance(iid, int) or isinstance(iid, bool):
            raise ParseError(f"{where}: id must be an integer")
        if iid in seen_images:
            raise IntegrityError(f"duplicate image id {iid}")
        seen_images.add(iid)
        width = _number(_require(rec, "width", where), f"{where}.width")
        height = _number(_require(rec, "height", where), f"{where}.height")
        if width <= 0 or height <= 0:
            raise ParseError(f"{where}: non-positive extent {width}x{height}")
        images.append(
            ImageInfo(id=iid, width=width, height=height, file_name=str(rec.get("file_name", "")))
        )
    by_image = {im.id: im for im in images}

    boxes: list[BoundingBox] = []
    for k, rec in enumerate(doc["annotations"]):
        where = f"annotations[{k}]"
        if not isinstance(rec, dict):
            raise ParseError(f"{where}: expected an object")
        iid = _require(rec, "image_id", where)
        cid = _require(rec, "category_id", where)
        if iid not in by_image:
            raise IntegrityError(f"{where}: unknown image id {iid}")
        if cid not in categories:
            raise IntegrityError(f"{where}: unknown category id {cid}")
        bbox = _require(rec, "bbox", where)
        if not isinstance(bbox, list) or len(bbox) != 4:
            raise ParseError(f"{where}: bbox must be a 4-element array")
        x, y, w, h = (_number(v, f"{where}.bbox[{i}]") for i, v in enumerate(bbox))
        if w < 0 or h < 0:
            raise ParseError(f"{where}: negative box size {w}x{h}")
        im = by_image[iid]
        # clamp to the image extent; the box may collapse to zero area
        x0 = min(max(x, 0.0), im.width)
        y0 = min(max(y, 0.0), im.height)
        x1 = min(max(x + w, 0.0), im.width)
        y1 = min(max(y + h, 0.0), im.height)
        boxes.append(
            BoundingBox(x=x0, y=y0, w=x1 - x0, h=y1 - y0, category_id=cid, image_id=iid)
        )

    return Dataset(images=tuple(images), boxes=tuple(boxes), categories=categories)


def box_center(box: BoundingBox) -> tuple[float, float]:
    """Center of the box: (x + w/2, y + h/2)."""
    return box.x + box.w / 2.0, box.y + box.h / 2.0


def box_diagonal_threshold(box: BoundingBox) -> float:
    """Half the box diagonal, the distance cutoff used when refining matches."""
    return 0.5 * math.hypot(box.w, box.h)


def size_band(box: BoundingBox) -> str:
    """COCO size band of the box area: 'small', 'medium', or 'large'."""
    area = box.area
    if area < SMALL_AREA_MAX:
        return "small"
    if area < MEDIUM_AREA_MAX:
        return "medium"
    return "large"


def group_by_unit(boxes: Iterable[BoundingBox]) -> dict[tuple[int, int], list[BoundingBox]]:
    """Group boxes by (image_id, category_id), the unit of evaluation."""
    units: dict[tuple[int, int], list[BoundingBox]] = {}
    for box in boxes:
        units.setdefault((box.image_id, box.category_id), []).append(box)
    return units
