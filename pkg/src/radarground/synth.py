"""Deterministic synthetic radar scenes with template prompts and a predicate oracle.

Every scene is a pure function of (config, scene_index): the generator seeds a
fresh RNG stream per scene, so datasets are reproducible byte-for-byte and
scenes can be generated in any order or in parallel.

Prompts come from a fixed template grammar whose slots are filled with values
conditioned on the scene, guaranteeing (up to a bounded retry budget) that the
rendered predicate selects a non-empty referent set. The same predicates are
evaluated by `evaluate_predicate`, which doubles as the ground-truth oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import GenerationRetryExhausted, InvalidInput, InvalidPredicate
from .metrics import rotated_iou_bev
from .scene import (
    LIDAR_SCHEMA,
    RADAR_SCHEMA,
    Box3D,
    ObjectClass,
    RadarPointCloud,
    ReferringSample,
    write_sample,
    write_schema,
)

# (length, width, height) ranges per class, meters.
CLASS_DIMS = {
    ObjectClass.Car: ((3.8, 4.8), (1.7, 2.0), (1.4, 1.8)),
    ObjectClass.Pedestrian: ((0.5, 0.8), (0.5, 0.8), (1.6, 1.9)),
    ObjectClass.Cyclist: ((1.6, 2.0), (0.5, 0.8), (1.6, 1.9)),
}

DEFAULT_RCS = {
    ObjectClass.Car: (10.0, 4.0),
    ObjectClass.Pedestrian: (-5.0, 3.0),
    ObjectClass.Cyclist: (0.0, 3.0),
}

CLASS_WORDS = {
    ObjectClass.Car: "car",
    ObjectClass.Pedestrian: "pedestrian",
    ObjectClass.Cyclist: "cyclist",
}

# Speed below which an object counts as stationary in prompts.
STATIC_SPEED = 0.5

CLUTTER_RCS = (-12.0, 3.0)


@dataclass(frozen=True)
class SynthConfig:
    n_scenes: int = 100
    objects_per_scene: tuple[int, int] = (1, 5)
    classes_enabled: tuple[ObjectClass, ...] = (
        ObjectClass.Car, ObjectClass.Pedestrian, ObjectClass.Cyclist,
    )
    # ((x_min, x_max), (y_min, y_max)); x is forward, y is lateral.
    scene_extent: tuple[tuple[float, float], tuple[float, float]] = ((2.0, 46.0), (-22.0, 22.0))
    points_per_object: tuple[int, int] = (4, 12)
    clutter_points: tuple[int, int] = (5, 20)
    velocity_range: tuple[float, float] = (2.0, 8.0)
    rcs_by_class: tuple[tuple[ObjectClass, tuple[float, float]], ...] = tuple(DEFAULT_RCS.items())
    template_set: tuple[str, ...] = ()  # empty = all templates
    seed: int = 0
    v_r_noise: float = 0.1
    static_fraction: float = 0.5
    min_center_distance: float = 2.5
    # Generate scenes around a same-class pair differing only in velocity or
    # position, with the prompt targeting exactly that contrast.
    paired_distractors: bool = False
    max_retries: int = 16
    sensor_schema: str = "radar"  # "radar" | "lidar"

    def __post_init__(self):
        if self.n_scenes <= 0:
            raise InvalidInput("n_scenes must be positive")
        if self.seed < 0:
            raise InvalidInput("seed must be a non-negative integer")
        for name in ("objects_per_scene", "points_per_object", "clutter_points",
                     "velocity_range"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise InvalidInput(f"{name} range has min > max")
        if self.objects_per_scene[0] < 1:
            raise InvalidInput("objects_per_scene minimum must be >= 1")
        if self.sensor_schema not in ("radar", "lidar"):
            raise InvalidInput(f"unknown sensor schema {self.sensor_schema!r}")
        object.__setattr__(
            self, "classes_enabled",
            tuple(ObjectClass(c) for c in self.classes_enabled),
        )

    @property
    def rcs(self) -> dict[ObjectClass, tuple[float, float]]:
        return dict(self.rcs_by_class)


# ---------------------------------------------------------------------------
# Predicates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Predicate:
    """Atomic box filter; prompts render a conjunction of these."""

    attribute: str
    comparator: str
    operands: tuple

    def __post_init__(self):
        object.__setattr__(self, "operands", tuple(self.operands))
        _validate_predicate(self)


_SIDES = ("left", "right")
_DIRECTIONS = ("toward", "away")
_RANKS = ("largest", "smallest")


def _validate_predicate(p: Predicate) -> None:
    a, c, ops = p.attribute, p.comparator, p.operands
    if a == "velocity_magnitude":
        if c not in ("gt", "lt") or len(ops) != 1 or ops[0] < 0:
            raise InvalidPredicate(f"bad velocity_magnitude predicate {p}")
    elif a == "motion_direction":
        if c != "gt" or len(ops) != 2 or ops[0] not in _DIRECTIONS or ops[1] < 0:
            raise InvalidPredicate(f"bad motion_direction predicate {p}")
    elif a == "depth_range":
        if c != "between" or len(ops) != 2 or not 0 <= ops[0] < ops[1]:
            raise InvalidPredicate(f"bad depth_range predicate {p}")
    elif a == "lateral_side":
        if c != "eq" or len(ops) != 1 or ops[0] not in _SIDES:
            raise InvalidPredicate(f"bad lateral_side predicate {p}")
    elif a == "class":
        if c != "eq" or len(ops) != 1:
            raise InvalidPredicate(f"bad class predicate {p}")
        ObjectClass(ops[0])
    elif a == "size_rank":
        if c != "rank" or len(ops) != 1 or ops[0] not in _RANKS:
            raise InvalidPredicate(f"bad size_rank predicate {p}")
    else:
        raise InvalidPredicate(f"unknown attribute {a!r}")


def _radial_speed(box: Box3D, vel: np.ndarray) -> float:
    """Signed line-of-sight speed at the box center; positive = away from ego."""
    r = math.hypot(box.x, box.y)
    if r == 0.0:
        return 0.0
    return float((vel[0] * box.x + vel[1] * box.y) / r)


def evaluate_predicate(pred: Predicate, boxes: Sequence[Box3D],
                       velocities: Sequence) -> list[int]:
    """Exact index set satisfying the predicate; rank ties break by index."""
    if len(boxes) != len(velocities):
        raise InvalidInput("boxes and velocities must align")
    vels = np.asarray(velocities, dtype=np.float64).reshape(len(boxes), -1)[:, :2]
    a, c, ops = pred.attribute, pred.comparator, pred.operands

    if a == "velocity_magnitude":
        speeds = np.hypot(vels[:, 0], vels[:, 1])
        keep = speeds > ops[0] if c == "gt" else speeds < ops[0]
        return [i for i in range(len(boxes)) if keep[i]]
    if a == "motion_direction":
        direction, min_speed = ops
        out = []
        for i, b in enumerate(boxes):
            s = _radial_speed(b, vels[i])
            directed = -s if direction == "toward" else s
            if directed > min_speed:
                out.append(i)
        return out
    if a == "depth_range":
        lo, hi = ops
        return [i for i, b in enumerate(boxes) if lo <= b.depth <= hi]
    if a == "lateral_side":
        if ops[0] == "left":
            return [i for i, b in enumerate(boxes) if b.lateral > 0]
        return [i for i, b in enumerate(boxes) if b.lateral < 0]
    if a == "class":
        cls = ObjectClass(ops[0])
        return [i for i, b in enumerate(boxes) if b.class_id == cls]
    if a == "size_rank":
        if not boxes:
            return []
        volumes = [b.l * b.w * b.h for b in boxes]
        pick = max if ops[0] == "largest" else min
        target = pick(volumes)
        return [volumes.index(target)]
    raise InvalidPredicate(f"unknown attribute {a!r}")


def evaluate_predicates(preds: Sequence[Predicate], boxes: Sequence[Box3D],
                        velocities: Sequence) -> list[int]:
    """Conjunction of predicates; rank predicates apply to the surviving subset."""
    plain = [p for p in preds if p.attribute != "size_rank"]
    ranks = [p for p in preds if p.attribute == "size_rank"]
    alive = list(range(len(boxes)))
    for p in plain:
        hits = set(evaluate_predicate(p, boxes, velocities))
        alive = [i for i in alive if i in hits]
    for p in ranks:
        if not alive:
            return []
        sub_boxes = [boxes[i] for i in alive]
        sub_vels = [velocities[i] for i in alive]
        picked = evaluate_predicate(p, sub_boxes, sub_vels)
        alive = [alive[i] for i in picked]
    return alive


# ---------------------------------------------------------------------------
# Prompt templates
# ---------------------------------------------------------------------------

def _round_half(v: float) -> float:
    return round(v * 2.0) / 2.0


def _class_pred(cls: ObjectClass) -> Predicate:
    return Predicate("class", "eq", (int(cls),))


def _template_moving(rng, boxes, vels, cls):
    idx = [i for i, b in enumerate(boxes) if b.class_id == cls]
    if not any(np.hypot(*vels[i]) > STATIC_SPEED for i in idx):
        return None
    text = f"the moving {CLASS_WORDS[cls]}(s)"
    return text, [_class_pred(cls), Predicate("velocity_magnitude", "gt", (STATIC_SPEED,))]


def _template_static(rng, boxes, vels, cls):
    idx = [i for i, b in enumerate(boxes) if b.class_id == cls]
    if not any(np.hypot(*vels[i]) < STATIC_SPEED for i in idx):
        return None
    text = f"the stationary {CLASS_WORDS[cls]}(s)"
    return text, [_class_pred(cls), Predicate("velocity_magnitude", "lt", (STATIC_SPEED,))]


def _template_toward_fast(rng, boxes, vels, cls):
    speeds = [-_radial_speed(b, vels[i]) for i, b in enumerate(boxes) if b.class_id == cls]
    top = max(speeds, default=0.0)
    if top <= 0.8:
        return None
    v = _round_half(max(0.5, top - rng.uniform(0.3, 2.0)))
    if v >= top:
        return None
    text = f"the {CLASS_WORDS[cls]}(s) moving toward ego faster than {v:.1f} m/s"
    return text, [_class_pred(cls), Predicate("motion_direction", "gt", ("toward", v))]


def _template_away(rng, boxes, vels, cls):
    hits = [i for i, b in enumerate(boxes)
            if b.class_id == cls and _radial_speed(b, vels[i]) > STATIC_SPEED]
    if not hits:
        return None
    text = f"the {CLASS_WORDS[cls]}(s) moving away from ego"
    return text, [_class_pred(cls), Predicate("motion_direction", "gt", ("away", STATIC_SPEED))]


def _template_left(rng, boxes, vels, cls):
    if not any(b.class_id == cls and b.lateral > 0.25 for b in boxes):
        return None
    text = f"the {CLASS_WORDS[cls]}(s) on the left side"
    return text, [_class_pred(cls), Predicate("lateral_side", "eq", ("left",))]


def _template_right(rng, boxes, vels, cls):
    if not any(b.class_id == cls and b.lateral < -0.25 for b in boxes):
        return None
    text = f"the {CLASS_WORDS[cls]}(s) on the right side"
    return text, [_class_pred(cls), Predicate("lateral_side", "eq", ("right",))]


def _template_near(rng, boxes, vels, cls):
    depths = [b.depth for b in boxes if b.class_id == cls]
    if not depths:
        return None
    d = float(math.ceil(min(depths) + rng.uniform(1.0, 5.0)))
    text = f"the {CLASS_WORDS[cls]}(s) closer than {d:.0f} m"
    return text, [_class_pred(cls), Predicate("depth_range", "between", (0.0, d))]


def _template_far(rng, boxes, vels, cls):
    depths = [b.depth for b in boxes if b.class_id == cls]
    if not depths:
        return None
    d = max(1.0, float(math.floor(max(depths) - rng.uniform(1.0, 5.0))))
    if d >= max(depths):
        return None
    text = f"the {CLASS_WORDS[cls]}(s) farther than {d:.0f} m"
    return text, [_class_pred(cls), Predicate("depth_range", "between", (d, 1.0e6))]


def _template_between(rng, boxes, vels, cls):
    depths = [b.depth for b in boxes if b.class_id == cls]
    if not depths:
        return None
    pivot = depths[int(rng.integers(len(depths)))]
    a = max(0.0, float(math.floor(pivot - rng.uniform(1.0, 4.0))))
    b = float(math.ceil(pivot + rng.uniform(1.0, 4.0)))
    text = f"the {CLASS_WORDS[cls]}(s) between {a:.0f} and {b:.0f} m away"
    return text, [_class_pred(cls), Predicate("depth_range", "between", (a, b))]


def _template_largest(rng, boxes, vels, cls):
    if not any(b.class_id == cls for b in boxes):
        return None
    return f"the largest {CLASS_WORDS[cls]}", [_class_pred(cls), Predicate("size_rank", "rank", ("largest",))]


def _template_smallest(rng, boxes, vels, cls):
    if not any(b.class_id == cls for b in boxes):
        return None
    return f"the smallest {CLASS_WORDS[cls]}", [_class_pred(cls), Predicate("size_rank", "rank", ("smallest",))]


def _template_fast(rng, boxes, vels, cls):
    speeds = [float(np.hypot(*vels[i])) for i, b in enumerate(boxes) if b.class_id == cls]
    top = max(speeds, default=0.0)
    if top <= 1.0:
        return None
    v = _round_half(max(0.5, top - rng.uniform(0.3, 2.0)))
    if v >= top:
        return None
    text = f"the {CLASS_WORDS[cls]}(s) faster than {v:.1f} m/s"
    return text, [_class_pred(cls), Predicate("velocity_magnitude", "gt", (v,))]


TEMPLATES = {
    "moving": _template_moving,
    "static": _template_static,
    "toward_fast": _template_toward_fast,
    "away": _template_away,
    "left": _template_left,
    "right": _template_right,
    "near": _template_near,
    "far": _template_far,
    "between": _template_between,
    "largest": _template_largest,
    "smallest": _template_smallest,
    "fast": _template_fast,
}

# Templates able to split a contrastive pair of each kind.
_PAIR_TEMPLATES = {
    "velocity": ("moving", "static", "toward_fast", "away", "fast"),
    "side": ("left", "right"),
    "depth": ("near", "far", "between"),
}


# ---------------------------------------------------------------------------
# Scene generation
# ---------------------------------------------------------------------------

@dataclass
class SceneTruth:
    """Generation-side ground truth kept out of the dataset sample."""

    velocities: np.ndarray          # (n_boxes, 2) BEV velocity, m/s
    predicates: list[Predicate]
    template: str
    point_spans: list[tuple[int, int]]  # per-box rows in the point array
    clutter_span: tuple[int, int]


def _sample_dims(rng, cls: ObjectClass) -> tuple[float, float, float]:
    (l0, l1), (w0, w1), (h0, h1) = CLASS_DIMS[cls]
    return (float(rng.uniform(l0, l1)), float(rng.uniform(w0, w1)),
            float(rng.uniform(h0, h1)))


def _place(rng, cfg: SynthConfig, dims, existing: list[Box3D], cls, yaw,
           y_sign: float = 0.0, margin: float = 1.0) -> Optional[tuple[float, float]]:
    (x0, x1), (y0, y1) = cfg.scene_extent
    l, w, h = dims
    for _ in range(64):
        x = float(rng.uniform(x0 + margin, x1 - margin))
        y = float(rng.uniform(y0 + margin, y1 - margin))
        if y_sign > 0:
            y = abs(y)
            y = max(y, 1.5)
        elif y_sign < 0:
            y = -abs(y)
            y = min(y, -1.5)
        cand = Box3D(x, y, h / 2, l, w, h, yaw, class_id=cls)
        ok = all(
            math.hypot(b.x - x, b.y - y) >= cfg.min_center_distance
            and rotated_iou_bev(cand, b) < 0.01
            for b in existing
        )
        if ok:
            return x, y
    return None


def _draw_velocity(rng, cfg: SynthConfig, yaw: float, moving: bool) -> np.ndarray:
    if not moving:
        return np.zeros(2)
    speed = float(rng.uniform(*cfg.velocity_range))
    return np.array([speed * math.cos(yaw), speed * math.sin(yaw)])


def _object_points(rng, cfg: SynthConfig, box: Box3D, vel: np.ndarray) -> np.ndarray:
    n = int(rng.integers(cfg.points_per_object[0], cfg.points_per_object[1] + 1))
    local = rng.uniform(-0.5, 0.5, size=(n, 3)) * np.array([box.l, box.w, box.h])
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    world = np.empty((n, 3))
    world[:, 0] = box.x + c * local[:, 0] - s * local[:, 1]
    world[:, 1] = box.y + s * local[:, 0] + c * local[:, 1]
    world[:, 2] = box.z + local[:, 2]

    if cfg.sensor_schema == "lidar":
        intensity = rng.uniform(0.0, 1.0, size=n)
        return np.column_stack([world, intensity]).astype(np.float32)

    r = np.linalg.norm(world[:, :2], axis=1)
    r = np.where(r == 0.0, 1.0, r)
    v_comp = (vel[0] * world[:, 0] + vel[1] * world[:, 1]) / r
    v_r = v_comp + rng.uniform(-cfg.v_r_noise, cfg.v_r_noise, size=n)
    mean, std = cfg.rcs[box.class_id]
    rcs = rng.normal(mean, std, size=n)
    t = np.zeros(n)
    return np.column_stack([world, rcs, v_r, v_comp, t]).astype(np.float32)


def _clutter_points(rng, cfg: SynthConfig) -> np.ndarray:
    n = int(rng.integers(cfg.clutter_points[0], cfg.clutter_points[1] + 1))
    (x0, x1), (y0, y1) = cfg.scene_extent
    xyz = np.column_stack([
        rng.uniform(x0, x1, size=n),
        rng.uniform(y0, y1, size=n),
        rng.uniform(0.0, 2.5, size=n),
    ])
    if cfg.sensor_schema == "lidar":
        return np.column_stack([xyz, rng.uniform(0.0, 0.3, size=n)]).astype(np.float32)
    rcs = rng.normal(CLUTTER_RCS[0], CLUTTER_RCS[1], size=n)
    v_r = rng.uniform(-cfg.v_r_noise, cfg.v_r_noise, size=n)
    v_comp = np.zeros(n)
    t = np.zeros(n)
    return np.column_stack([xyz, rcs, v_r, v_comp, t]).astype(np.float32)


def _build_objects(rng, cfg: SynthConfig) -> tuple[list[Box3D], np.ndarray, Optional[str], Optional[ObjectClass]]:
    """Boxes + velocities; for paired scenes also the contrast kind and class."""
    n_lo, n_hi = cfg.objects_per_scene
    n_obj = int(rng.integers(n_lo, n_hi + 1))
    boxes: list[Box3D] = []
    vels: list[np.ndarray] = []

    contrast = None
    pair_cls = None
    if cfg.paired_distractors:
        n_obj = max(n_obj, 2)
        pair_cls = ObjectClass(rng.choice(cfg.classes_enabled))
        contrast = ("velocity", "side", "depth")[int(rng.integers(3))]
        dims = _sample_dims(rng, pair_cls)
        yaw = float(rng.uniform(-math.pi, math.pi))

        if contrast == "velocity":
            signs = (0.0, 0.0)
            moving_flags = (True, False)
        elif contrast == "side":
            signs = (1.0, -1.0)
            both_move = rng.random() >= cfg.static_fraction
            moving_flags = (both_move, both_move)
        else:  # depth split: same lateral behavior, near/far along x
            signs = (0.0, 0.0)
            both_move = rng.random() >= cfg.static_fraction
            moving_flags = (both_move, both_move)

        for slot in range(2):
            pos = _place(rng, cfg, dims, boxes, pair_cls, yaw, y_sign=signs[slot])
            if pos is None:
                return [], np.zeros((0, 2)), None, None
            x, y = pos
            if contrast == "depth":
                (x0, x1), _ = cfg.scene_extent
                mid = 0.5 * (x0 + x1)
                x = float(rng.uniform(x0 + 1.0, mid - 2.0)) if slot == 0 else \
                    float(rng.uniform(mid + 2.0, x1 - 1.0))
            box = Box3D(x, y, dims[2] / 2, *dims, yaw, class_id=pair_cls)
            if boxes and not _separated(box, boxes, cfg):
                return [], np.zeros((0, 2)), None, None
            boxes.append(box)
            vels.append(_draw_velocity(rng, cfg, yaw, moving_flags[slot]))
        if contrast in ("side", "depth") and moving_flags[0]:
            vels[1] = vels[0].copy()  # identical velocity: position is the only contrast

        others = [c for c in cfg.classes_enabled if c != pair_cls]
        extra = min(max(0, n_obj - 2), len(others) and n_obj - 2)
        for _ in range(extra):
            if not others:
                break
            cls = ObjectClass(rng.choice(others))
            dims_e = _sample_dims(rng, cls)
            yaw_e = float(rng.uniform(-math.pi, math.pi))
            pos = _place(rng, cfg, dims_e, boxes, cls, yaw_e)
            if pos is None:
                continue
            boxes.append(Box3D(pos[0], pos[1], dims_e[2] / 2, *dims_e, yaw_e, class_id=cls))
            moving = rng.random() >= cfg.static_fraction
            vels.append(_draw_velocity(rng, cfg, yaw_e, moving))
    else:
        for _ in range(n_obj):
            cls = ObjectClass(rng.choice(cfg.classes_enabled))
            dims = _sample_dims(rng, cls)
            yaw = float(rng.uniform(-math.pi, math.pi))
            pos = _place(rng, cfg, dims, boxes, cls, yaw)
            if pos is None:
                continue
            boxes.append(Box3D(pos[0], pos[1], dims[2] / 2, *dims, yaw, class_id=cls))
            moving = rng.random() >= cfg.static_fraction
            vels.append(_draw_velocity(rng, cfg, yaw, moving))

    if not boxes:
        return [], np.zeros((0, 2)), None, None
    return boxes, np.stack(vels), contrast, pair_cls


def _separated(box: Box3D, others: Sequence[Box3D], cfg: SynthConfig) -> bool:
    return all(
        math.hypot(b.x - box.x, b.y - box.y) >= cfg.min_center_distance
        and rotated_iou_bev(box, b) < 0.01
        for b in others
    )


def scene_rng(config: SynthConfig, scene_index: int) -> np.random.Generator:
    """Per-scene RNG stream: independent of generation order."""
    return np.random.default_rng([config.seed, scene_index])


def generate_scene_with_truth(config: SynthConfig,
                              scene_index: int) -> tuple[ReferringSample, SceneTruth]:
    if scene_index < 0:
        raise InvalidInput("scene_index must be non-negative")
    rng = scene_rng(config, scene_index)

    boxes: list[Box3D] = []
    vels = np.zeros((0, 2))
    contrast = pair_cls = None
    for _ in range(8):
        boxes, vels, contrast, pair_cls = _build_objects(rng, config)
        if boxes:
            break
    if not boxes:
        raise GenerationRetryExhausted(
            f"scene {scene_index}: could not place any objects"
        )

    chunks = []
    spans = []
    cursor = 0
    for box, vel in zip(boxes, vels):
        pts = _object_points(rng, config, box, vel)
        chunks.append(pts)
        spans.append((cursor, cursor + len(pts)))
        cursor += len(pts)
    clutter = _clutter_points(rng, config)
    chunks.append(clutter)
    clutter_span = (cursor, cursor + len(clutter))
    points = np.concatenate(chunks, axis=0)
    schema = LIDAR_SCHEMA if config.sensor_schema == "lidar" else RADAR_SCHEMA
    cloud = RadarPointCloud(points, schema)

    if config.template_set:
        names = [n for n in config.template_set if n in TEMPLATES]
        if not names:
            raise InvalidInput(f"template_set {config.template_set} matches no templates")
    else:
        names = list(TEMPLATES)
    if config.paired_distractors and contrast is not None:
        names = [n for n in names if n in _PAIR_TEMPLATES[contrast]] or names

    prompt = None
    predicates: list[Predicate] = []
    template_name = ""
    for _ in range(config.max_retries):
        template_name = str(rng.choice(names))
        cls = pair_cls if pair_cls is not None else boxes[int(rng.integers(len(boxes)))].class_id
        built = TEMPLATES[template_name](rng, boxes, vels, cls)
        if built is None:
            continue
        text, preds = built
        hits = evaluate_predicates(preds, boxes, vels)
        if hits:
            prompt, predicates = text, preds
            break
    if prompt is None:
        raise GenerationRetryExhausted(
            f"scene {scene_index}: no template produced a non-empty referent set "
            f"after {config.max_retries} retries"
        )

    referred_idx = evaluate_predicates(predicates, boxes, vels)
    sample = ReferringSample(
        sample_id=f"{scene_index:06d}",
        radar=cloud,
        prompt=prompt,
        referred_boxes=[boxes[i] for i in referred_idx],
        all_boxes=boxes,
    )
    truth = SceneTruth(
        velocities=vels,
        predicates=predicates,
        template=template_name,
        point_spans=spans,
        clutter_span=clutter_span,
    )
    return sample, truth


def generate_scene(config: SynthConfig, scene_index: int) -> ReferringSample:
    sample, _ = generate_scene_with_truth(config, scene_index)
    return sample


def generate_dataset(config: SynthConfig, start: int = 0) -> list[ReferringSample]:
    return [generate_scene(config, i) for i in range(start, start + config.n_scenes)]


def write_dataset(config: SynthConfig, out_root) -> list[str]:
    """Materialize the configured scenes in the on-disk dataset layout."""
    out_root = Path(out_root)
    import json

    prompts = {}
    schema = LIDAR_SCHEMA if config.sensor_schema == "lidar" else RADAR_SCHEMA
    for i in range(config.n_scenes):
        sample = generate_scene(config, i)
        sensor_dir = out_root / "radar"
        sensor_dir.mkdir(parents=True, exist_ok=True)
        sample.radar.points.astype("<f4").tofile(sensor_dir / f"{sample.sample_id}.bin")
        label_dir = out_root / "label"
        label_dir.mkdir(parents=True, exist_ok=True)
        with open(label_dir / f"{sample.sample_id}.txt", "w") as fh:
            for b in sample.all_boxes:
                fh.write(f"{b.class_id.name} {b.x!r} {b.y!r} {b.z!r} "
                         f"{b.l!r} {b.w!r} {b.h!r} {b.yaw!r}\n")
        prompts[sample.sample_id] = {
            "prompt": sample.prompt,
            "referred": sample.referred_indices(),
        }
    with open(out_root / "prompts.json", "w") as fh:
        json.dump(prompts, fh, indent=1, sort_keys=True)
    write_schema(out_root, {"radar": schema})
    return sorted(prompts)
