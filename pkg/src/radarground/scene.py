"""Core scene types, dataset I/O, and evaluation-region filters.

Sensor frame convention used throughout the package:
  x: forward (longitudinal / depth), y: left (lateral), z: up, all meters.
Yaw is the rotation about z, normalized to (-pi, pi].

On-disk dataset layout (KITTI-style, one frame per sample id):
  <root>/radar/<id>.bin     flat little-endian float32 records, row-major
  <root>/lidar/<id>.bin     optional, same encoding
  <root>/label/<id>.txt     one box per line: "<class> x y z l w h yaw"
  <root>/prompts.json       {id: {"prompt": str, "referred": [box indices]}}
  <root>/schema.json        sidecar declaring point field names and units
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidInput, NotFoundError, ParseError, ValidationError

TWO_PI = 2.0 * math.pi

# Default per-point field sets. Units are declared in the sidecar schema.json.
RADAR_SCHEMA = ("x", "y", "z", "rcs", "v_r", "v_r_comp", "t")
LIDAR_SCHEMA = ("x", "y", "z", "intensity")

FIELD_UNITS = {
    "x": "m",
    "y": "m",
    "z": "m",
    "rcs": "dBsm",
    "v_r": "m/s",
    "v_r_comp": "m/s",
    "t": "s",
    "intensity": "unitless",
}


def normalize_yaw(yaw: float) -> float:
    """Wrap an angle into (-pi, pi]; -pi maps to +pi."""
    return math.pi - (math.pi - yaw) % TWO_PI


class ObjectClass(IntEnum):
    Car = 0
    Pedestrian = 1
    Cyclist = 2

    @classmethod
    def from_name(cls, name: str) -> "ObjectClass":
        try:
            return cls[name]
        except KeyError:
            raise InvalidInput(f"unknown object class {name!r}") from None


@dataclass(frozen=True)
class Box3D:
    """Oriented 3D box: center (x, y, z), dimensions (l, w, h), yaw about z."""

    x: float
    y: float
    z: float
    l: float
    w: float
    h: float
    yaw: float
    class_id: ObjectClass

    def __post_init__(self):
        for name in ("x", "y", "z", "l", "w", "h", "yaw"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise InvalidInput(f"Box3D.{name} must be finite, got {v}")
        if self.l <= 0 or self.w <= 0 or self.h <= 0:
            raise InvalidInput(
                f"Box3D dimensions must be positive, got l={self.l} w={self.w} h={self.h}"
            )
        object.__setattr__(self, "yaw", normalize_yaw(self.yaw))
        object.__setattr__(self, "class_id", ObjectClass(self.class_id))

    @property
    def depth(self) -> float:
        """Distance along the sensor forward axis."""
        return self.x

    @property
    def lateral(self) -> float:
        return self.y

    def bev_corners(self) -> np.ndarray:
        """(4, 2) corners of the yaw-rotated BEV rectangle, counter-clockwise."""
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        half = np.array(
            [[self.l / 2, self.w / 2],
             [-self.l / 2, self.w / 2],
             [-self.l / 2, -self.w / 2],
             [self.l / 2, -self.w / 2]]
        )
        rot = np.array([[c, -s], [s, c]])
        return half @ rot.T + np.array([self.x, self.y])


@dataclass
class RadarPointCloud:
    """Point set with a named per-point field schema; rows are points."""

    points: np.ndarray
    schema: tuple[str, ...] = RADAR_SCHEMA

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float32)
        if pts.size == 0:
            pts = pts.reshape(0, len(self.schema))
        if pts.ndim != 2 or pts.shape[1] != len(self.schema):
            raise InvalidInput(
                f"point array shape {pts.shape} does not match schema of length {len(self.schema)}"
            )
        if pts.size and not np.isfinite(pts).all():
            raise InvalidInput("point cloud contains non-finite values")
        self.points = pts
        self.schema = tuple(self.schema)

    def __len__(self) -> int:
        return self.points.shape[0]

    def column(self, name: str) -> np.ndarray:
        try:
            return self.points[:, self.schema.index(name)]
        except ValueError:
            raise InvalidInput(f"schema has no field {name!r}") from None

    def __eq__(self, other) -> bool:
        if not isinstance(other, RadarPointCloud):
            return NotImplemented
        return self.schema == other.schema and np.array_equal(self.points, other.points)


@dataclass
class ReferringSample:
    """One scene: point cloud(s), a prompt, and the boxes the prompt refers to."""

    sample_id: str
    radar: RadarPointCloud
    prompt: str
    referred_boxes: list[Box3D]
    all_boxes: list[Box3D]
    lidar: Optional[RadarPointCloud] = None

    def __post_init__(self):
        if not self.referred_boxes:
            raise ValidationError(f"sample {self.sample_id!r} has no referred boxes")
        for box in self.referred_boxes:
            if not any(box is b for b in self.all_boxes):
                raise ValidationError(
                    f"sample {self.sample_id!r}: referred box not present in all_boxes"
                )

    def referred_indices(self) -> list[int]:
        return [next(i for i, b in enumerate(self.all_boxes) if b is r)
                for r in self.referred_boxes]

    def __eq__(self, other) -> bool:
        if not isinstance(other, ReferringSample):
            return NotImplemented
        return (
            self.sample_id == other.sample_id
            and self.radar == other.radar
            and self.lidar == other.lidar
            and self.prompt == other.prompt
            and self.all_boxes == other.all_boxes
            and self.referred_indices() == other.referred_indices()
        )


@dataclass(frozen=True)
class RegionSpec:
    """Evaluation region: a lateral band over a longitudinal range.

    'eaa' (entire annotated area) keeps every box; 'dca' (driving corridor)
    defaults to |lateral| < 4 m and 0..25 m ahead, both configurable.
    """

    name: str = "eaa"
    lateral_bound: float = 4.0
    longitudinal_range: tuple[float, float] = (0.0, 25.0)

    def __post_init__(self):
        if self.name not in ("eaa", "dca", "custom"):
            raise InvalidInput(f"unknown region name {self.name!r}")
        lo, hi = self.longitudinal_range
        if not lo < hi:
            raise InvalidInput("longitudinal range must satisfy min < max")
        if self.lateral_bound <= 0:
            raise InvalidInput("lateral_bound must be positive")

    def contains(self, box: Box3D) -> bool:
        if self.name == "eaa":
            return True
        lo, hi = self.longitudinal_range
        return abs(box.lateral) < self.lateral_bound and lo <= box.depth <= hi


EAA = RegionSpec(name="eaa")
DCA = RegionSpec(name="dca", lateral_bound=4.0, longitudinal_range=(0.0, 25.0))

# Depth-stratified reporting buckets (meters); the last bucket is open-ended.
DEFAULT_DEPTH_EDGES = (0.0, 10.0, 20.0, 30.0, 40.0, 50.0)


def filter_boxes_by_region(boxes: Sequence[Box3D], region: RegionSpec) -> list[Box3D]:
    """Keep boxes whose center lies inside the region; order-preserving."""
    if region.name == "eaa":
        return list(boxes)
    return [b for b in boxes if region.contains(b)]


def depth_bucket(box: Box3D, edges: Sequence[float] = DEFAULT_DEPTH_EDGES) -> int:
    """Index of the half-open interval [e_i, e_{i+1}) containing the box depth.

    The last bucket is open-ended, so depth >= edges[-1] maps to len(edges)-1.
    """
    edges = list(edges)
    if any(b <= a for a, b in zip(edges, edges[1:])):
        raise InvalidInput("depth edges must be strictly increasing")
    d = box.depth
    if d < 0:
        raise InvalidInput(f"negative depth {d}")
    if d < edges[0]:
        raise InvalidInput(f"depth {d} below first edge {edges[0]}")
    for i in range(len(edges) - 1):
        if edges[i] <= d < edges[i + 1]:
            return i
    return len(edges) - 1


# ---------------------------------------------------------------------------
# Dataset I/O
# ---------------------------------------------------------------------------

def _point_file(root: Path, sensor: str, sample_id: str) -> Path:
    return root / sensor / f"{sample_id}.bin"


def _read_points(path: Path, schema: tuple[str, ...]) -> RadarPointCloud:
    raw = np.fromfile(path, dtype="<f4")
    width = len(schema)
    if raw.size % width != 0:
        raise ParseError(
            f"point file holds {raw.size} floats, not a multiple of record length {width}",
            path=path,
        )
    return RadarPointCloud(raw.reshape(-1, width), schema)


def _write_points(path: Path, pc: RadarPointCloud) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    pc.points.astype("<f4").tofile(path)


def _parse_label_line(line: str, path: Path, lineno: int) -> Box3D:
    parts = line.split()
    if len(parts) != 8:
        raise ParseError(
            f"label line has {len(parts)} fields, expected 8 (class + 7 box values)",
            path=path,
            line=lineno,
        )
    try:
        cls = ObjectClass.from_name(parts[0])
        vals = [float(p) for p in parts[1:]]
    except (InvalidInput, ValueError) as exc:
        raise ParseError(f"malformed label line: {exc}", path=path, line=lineno) from None
    return Box3D(*vals, class_id=cls)


def read_label_file(path: Path) -> list[Box3D]:
    boxes = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if line:
                boxes.append(_parse_label_line(line, path, lineno))
    return boxes


def _load_prompts(root: Path) -> dict:
    path = root / "prompts.json"
    if not path.exists():
        raise NotFoundError(f"missing prompts file {path}")
    with open(path) as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"bad prompts file: {exc.msg}", path=path, line=exc.lineno) from None


def load_schema(root: Path) -> dict[str, tuple[str, ...]]:
    """Read the sidecar schema.json; fall back to the package defaults."""
    path = Path(root) / "schema.json"
    if not path.exists():
        return {"radar": RADAR_SCHEMA, "lidar": LIDAR_SCHEMA}
    with open(path) as fh:
        decl = json.load(fh)
    return {
        sensor: tuple(f["name"] for f in spec["fields"])
        for sensor, spec in decl.items()
    }


def write_schema(root: Path, schemas: dict[str, tuple[str, ...]]) -> None:
    decl = {
        sensor: {"fields": [{"name": n, "unit": FIELD_UNITS.get(n, "unitless")} for n in names]}
        for sensor, names in schemas.items()
    }
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    with open(root / "schema.json", "w") as fh:
        json.dump(decl, fh, indent=1)


def load_sample(dataset_root, sample_id: str) -> ReferringSample:
    """Load one fully populated sample from the on-disk layout."""
    root = Path(dataset_root)
    schemas = load_schema(root)

    radar_path = _point_file(root, "radar", sample_id)
    if not radar_path.exists():
        raise NotFoundError(f"missing radar file {radar_path}")
    radar = _read_points(radar_path, schemas["radar"])

    lidar_path = _point_file(root, "lidar", sample_id)
    lidar = _read_points(lidar_path, schemas["lidar"]) if lidar_path.exists() else None

    label_path = root / "label" / f"{sample_id}.txt"
    if not label_path.exists():
        raise NotFoundError(f"missing label file {label_path}")
    all_boxes = read_label_file(label_path)

    prompts = _load_prompts(root)
    if sample_id not in prompts:
        raise NotFoundError(f"sample {sample_id!r} not present in prompts.json")
    entry = prompts[sample_id]
    try:
        referred = [all_boxes[i] for i in entry["referred"]]
    except (IndexError, KeyError, TypeError):
        raise ValidationError(
            f"sample {sample_id!r}: referred indices {entry.get('referred')} "
            f"invalid for {len(all_boxes)} boxes"
        ) from None

    return ReferringSample(
        sample_id=sample_id,
        radar=radar,
        lidar=lidar,
        prompt=entry["prompt"],
        referred_boxes=referred,
        all_boxes=all_boxes,
    )


def write_sample(dataset_root, sample: ReferringSample) -> None:
    """Write one sample into the on-disk layout, updating prompts.json in place."""
    root = Path(dataset_root)
    _write_points(_point_file(root, "radar", sample.sample_id), sample.radar)
    if sample.lidar is not None:
        _write_points(_point_file(root, "lidar", sample.sample_id), sample.lidar)

    label_dir = root / "label"
    label_dir.mkdir(parents=True, exist_ok=True)
    with open(label_dir / f"{sample.sample_id}.txt", "w") as fh:
        for b in sample.all_boxes:
            fh.write(
                f"{b.class_id.name} {b.x!r} {b.y!r} {b.z!r} {b.l!r} {b.w!r} {b.h!r} {b.yaw!r}\n"
            )

    prompts_path = root / "prompts.json"
    prompts = {}
    if prompts_path.exists():
        with open(prompts_path) as fh:
            prompts = json.load(fh)
    prompts[sample.sample_id] = {
        "prompt": sample.prompt,
        "referred": sample.referred_indices(),
    }
    with open(prompts_path, "w") as fh:
        json.dump(prompts, fh, indent=1, sort_keys=True)

    schema_decl = {"radar": sample.radar.schema}
    if sample.lidar is not None:
        schema_decl["lidar"] = sample.lidar.schema
    write_schema(root, schema_decl)


def list_samples(dataset_root) -> list[str]:
    """Sample ids present in prompts.json, sorted."""
    return sorted(_load_prompts(Path(dataset_root)).keys())
