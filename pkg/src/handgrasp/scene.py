"""Scene and protocol configuration.

A scene lists the tangible objects (position, bounding sphere, attached
gesture template files), the placement target, and the trial protocol
parameters. Configs are single JSON documents; template paths are
resolved relative to the config file so a scene directory is
self-contained and relocatable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .engine import DISTANCE_BUDGET, HOVER_RADIUS, RELEASE_DWELL, RELEASE_FACTOR, TemplateStore
from .errors import ParseError
from .streams import load_template

TARGET_DIAMETER = 0.5  # meters
DISAPPEAR_DELAY = 1.0  # seconds between a release and the next trial
GREEN_LIMIT = 0.02  # accuracy band edges, meters
YELLOW_LIMIT = 0.05
DEFAULT_REPEATS = 3


@dataclass(frozen=True)
class SceneObject:
    """A tangible object: where it starts and which gestures it carries."""

    object_id: str
    position: np.ndarray  # (3,) start position, world meters
    bounding_radius: float
    gesture_names: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=np.float64))


@dataclass(frozen=True)
class TargetSphere:
    center: np.ndarray  # (3,)
    diameter: float = TARGET_DIAMETER

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=np.float64))

    @property
    def radius(self) -> float:
        return self.diameter / 2.0

    def contains(self, point: np.ndarray) -> bool:
        return float(np.linalg.norm(np.asarray(point) - self.center)) <= self.radius


@dataclass(frozen=True)
class ProtocolSpec:
    """Trial protocol: every object placed `repeats` times, seeded targets."""

    repeats: int = DEFAULT_REPEATS
    seed: int = 0
    reach_min: np.ndarray = field(default_factory=lambda: np.array([-0.6, -0.3, 0.2]))
    reach_max: np.ndarray = field(default_factory=lambda: np.array([0.6, 0.3, 0.8]))
    disappear_delay: float = DISAPPEAR_DELAY

    def __post_init__(self):
        object.__setattr__(self, "reach_min", np.asarray(self.reach_min, dtype=np.float64))
        object.__setattr__(self, "reach_max", np.asarray(self.reach_max, dtype=np.float64))


@dataclass(frozen=True)
class ReleaseSpec:
    factor: float = RELEASE_FACTOR
    dwell: float = RELEASE_DWELL


@dataclass(frozen=True)
class Scene:
    scene_id: str
    objects: tuple[SceneObject, ...]
    target: TargetSphere | None = None
    protocol: ProtocolSpec | None = None
    release: ReleaseSpec = field(default_factory=ReleaseSpec)
    hover_radius: float = HOVER_RADIUS
    green_limit: float = GREEN_LIMIT
    yellow_limit: float = YELLOW_LIMIT

    def object_by_id(self, object_id: str) -> SceneObject:
        for obj in self.objects:
            if obj.object_id == object_id:
                return obj
        raise KeyError(object_id)


def _vec3(raw, field_name: str) -> np.ndarray:
    if not isinstance(raw, list) or len(raw) != 3:
        raise ParseError(f"field {field_name!r} must be [x, y, z]", field=field_name)
    return np.asarray([float(v) for v in raw], dtype=np.float64)


def load_scene(path: str | Path) -> tuple[Scene, TemplateStore]:
    """Load a scene config and every template file it references."""
    path = Path(path)
    try:
        document = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid scene JSON in {path}: {exc.msg}", field="json") from exc
    if not isinstance(document, dict):
        raise ParseError(f"scene config {path} must be a JSON object", field="json")

    store = TemplateStore()
    objects: list[SceneObject] = []
    try:
        scene_id = str(document["scene_id"])
        for entry in document.get("objects", []):
            names: list[str] = []
            for rel in entry.get("templates", []):
                template = load_template(path.parent / rel)
                store.add(template)
                names.append(template.name)
            objects.append(
                SceneObject(
                    object_id=str(entry["id"]),
                    position=_vec3(entry["position"], "position"),
                    bounding_radius=float(entry["bounding_radius"]),
                    gesture_names=tuple(names),
                )
            )

        target = None
        if "target" in document:
            target = TargetSphere(
                center=_vec3(document["target"]["center"], "target.center"),
                diameter=float(document["target"].get("diameter", TARGET_DIAMETER)),
            )

        protocol = None
        if "protocol" in document:
            raw = document["protocol"]
            protocol = ProtocolSpec(
                repeats=int(raw.get("repeats", DEFAULT_REPEATS)),
                seed=int(raw.get("seed", 0)),
                reach_min=_vec3(raw["reach_min"], "protocol.reach_min"),
                reach_max=_vec3(raw["reach_max"], "protocol.reach_max"),
                disappear_delay=float(raw.get("disappear_delay", DISAPPEAR_DELAY)),
            )

        release = ReleaseSpec()
        if "release" in document:
            raw = document["release"]
            release = ReleaseSpec(
                factor=float(raw.get("factor", RELEASE_FACTOR)),
                dwell=float(raw.get("dwell", RELEASE_DWELL)),
            )

        bands = document.get("color_bands", [GREEN_LIMIT, YELLOW_LIMIT])
        if not isinstance(bands, list) or len(bands) != 2:
            raise ParseError("field 'color_bands' must be [green, yellow]", field="color_bands")

        scene = Scene(
            scene_id=scene_id,
            objects=tuple(objects),
            target=target,
            protocol=protocol,
            release=release,
            hover_radius=float(document.get("hover_radius", HOVER_RADIUS)),
            green_limit=float(bands[0]),
            yellow_limit=float(bands[1]),
        )
    except KeyError as exc:
        raise ParseError(f"scene config {path} missing field {exc.args[0]!r}", field=str(exc.args[0])) from exc
    except (TypeError, ValueError) as exc:
        raise ParseError(f"bad value in scene config {path}: {exc}", field="scene") from exc

    if protocol is not None and target is None:
        raise ParseError(f"scene config {path} has a protocol but no target", field="target")
    return scene, store


def save_scene(
    path: str | Path,
    scene: Scene,
    template_paths: dict[str, str] | None = None,
) -> None:
    """Write a scene config; `template_paths` maps object id -> file names."""
    template_paths = template_paths or {}
    document: dict = {
        "scene_id": scene.scene_id,
        "hover_radius": scene.hover_radius,
        "color_bands": [scene.green_limit, scene.yellow_limit],
        "objects": [
            {
                "id": obj.object_id,
                "position": [float(v) for v in obj.position],
                "bounding_radius": obj.bounding_radius,
                "templates": template_paths.get(obj.object_id, []),
            }
            for obj in scene.objects
        ],
    }
    if scene.target is not None:
        document["target"] = {
            "center": [float(v) for v in scene.target.center],
            "diameter": scene.target.diameter,
        }
    if scene.protocol is not None:
        document["protocol"] = {
            "repeats": scene.protocol.repeats,
            "seed": scene.protocol.seed,
            "reach_min": [float(v) for v in scene.protocol.reach_min],
            "reach_max": [float(v) for v in scene.protocol.reach_max],
            "disappear_delay": scene.protocol.disappear_delay,
        }
    document["release"] = {"factor": scene.release.factor, "dwell": scene.release.dwell}
    Path(path).write_text(json.dumps(document, indent=2) + "\n")
