"""Scene-graph catalog ingestion and object-count image selection.

Catalogs arrive as line-delimited JSON records
``{"image_id": ..., "objects": [...], "uri": ...}``. Object names are
trimmed and empty entries dropped at ingest; the remaining count is what
selection filters on.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable

from .errors import ConflictError, ContractError, ParseError


@dataclass(frozen=True)
class ImageRecord:
    image_id: str
    object_names: tuple[str, ...]
    source: str = ""
    uri: str = ""

    def __post_init__(self) -> None:
        if not self.image_id:
            raise ContractError("image_id must be non-empty")
        for name in self.object_names:
            if not name.strip():
                raise ContractError(f"image {self.image_id!r}: empty object name")


@dataclass(frozen=True)
class SelectionCriteria:
    min_objects: int = 3
    max_objects: int = 10

    def __post_init__(self) -> None:
        if not 1 <= self.min_objects <= self.max_objects:
            raise ContractError(
                f"criteria require 1 <= min_objects <= max_objects, "
                f"got min={self.min_objects} max={self.max_objects}"
            )


def _record_from_obj(obj: object, index: int, source: str) -> ImageRecord:
    if not isinstance(obj, dict):
        raise ParseError(f"record index {index}: not a JSON object", index=index)
    image_id = obj.get("image_id")
    if not isinstance(image_id, str) or not image_id:
        raise ParseError(f"record index {index}: missing or empty image_id", index=index)
    objects = obj.get("objects")
    if not isinstance(objects, list) or not all(isinstance(o, str) for o in objects):
        raise ParseError(
            f"record index {index}: 'objects' must be a list of strings", index=index
        )
    uri = obj.get("uri", "")
    if not isinstance(uri, str):
        raise ParseError(f"record index {index}: 'uri' must be a string", index=index)
    names = tuple(o.strip() for o in objects if o.strip())
    return ImageRecord(image_id=image_id, object_names=names, source=source, uri=uri)


def ingest_catalog(lines: Iterable[str], source: str = "") -> list[ImageRecord]:
    """Parse a line-delimited record stream into ImageRecords.

    Raises ParseError at the first malformed record (carrying its 0-based
    index) and ConflictError on a duplicate image_id. Blank lines are skipped
    and do not consume a record index.
    """
    records: list[ImageRecord] = []
    seen: set[str] = set()
    index = 0
    for line in lines:
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(
                f"record index {index}: invalid JSON ({exc.msg})", index=index
            ) from exc
        record = _record_from_obj(obj, index, source)
        if record.image_id in seen:
            raise ConflictError(f"duplicate image_id {record.image_id!r}")
        seen.add(record.image_id)
        records.append(record)
        index += 1
    return records


def select_images(
    catalog: list[ImageRecord], criteria: SelectionCriteria
) -> list[ImageRecord]:
    """Pure filter: keep records whose object count lies in [min, max], order preserved."""
    return [
        r
        for r in catalog
        if criteria.min_objects <= len(r.object_names) <= criteria.max_objects
    ]


def record_to_dict(record: ImageRecord) -> dict:
    return {
        "image_id": record.image_id,
        "objects": list(record.object_names),
        "uri": record.uri,
    }
