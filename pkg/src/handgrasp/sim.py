"""Grab-and-place interaction simulator.

A session replays a hand stream against a scene under one interaction
technique and emits a line-oriented event log: hover/unhover edges,
grabs and releases, pinch edges, and trial outcomes. The same
SessionEngine backs the in-process replay API, the CLI, and the TCP
service, so all three produce byte-identical logs for the same input.

Techniques:
  controller  grip bit edges grab/release the hovered object
  pinch       debounced thumb-index pinch grabs/releases
  grab        generic grab template, released by release-role templates
  custom      per-object authored templates, released by pose deviation

With a protocol configured, every release concludes the active trial:
inside the target sphere it counts as a placement, outside as a drop.
The next object appears a fixed delay later and the target moves to a
seeded random point in the reach volume after every trial.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .engine import (
    ContextRegistry,
    GrabTracker,
    TemplateStore,
    hover_update,
    surface_distance,
)
from .errors import IncompleteRun, InvalidArgument, ProtocolViolation
from .hand import HandFrame, RigidTransform, canonicalize, palm_frame
from .pinch import PinchState
from .scene import ProtocolSpec, Scene, SceneObject
from .stats import describe
from .streams import TrialResult

TECHNIQUES = ("controller", "pinch", "grab", "custom")


def color_band(distance: float, green_limit: float = 0.02, yellow_limit: float = 0.05) -> str:
    """Accuracy feedback band; edges belong to the worse band."""
    if distance < green_limit:
        return "green"
    if distance < yellow_limit:
        return "yellow"
    return "red"


def latin_square_order(condition_count: int, participant_index: int) -> list[int]:
    """Condition order for one participant from a balanced Latin square.

    Even counts need `n` rows; odd counts get the standard doubling
    where rows n..2n-1 are the reverses of rows 0..n-1. The participant
    index wraps around the row count.
    """
    n = condition_count
    if n < 2:
        raise InvalidArgument(f"need at least 2 conditions, got {n}")
    if participant_index < 0:
        raise InvalidArgument(f"participant_index must be >= 0, got {participant_index}")
    rows = n if n % 2 == 0 else 2 * n
    row = participant_index % rows
    reverse = row >= n
    if reverse:
        row -= n
    order = [(row + _zigzag(j)) % n for j in range(n)]
    if reverse:
        order.reverse()
    return order


def _zigzag(j: int) -> int:
    # 0, +1, -1, +2, -2, ... produces the row pattern 0, 1, n-1, 2, n-2, ...
    half = (j + 1) // 2
    return half if j % 2 == 1 else -half


def draw_target_centers(protocol: ProtocolSpec, initial_center: np.ndarray, count: int) -> list[np.ndarray]:
    """Target center for each trial: the configured center, then seeded draws."""
    rng = np.random.default_rng(protocol.seed)
    centers = [np.asarray(initial_center, dtype=np.float64)]
    for _ in range(max(count - 1, 0)):
        centers.append(rng.uniform(protocol.reach_min, protocol.reach_max))
    return centers


def _fmt(value: float) -> str:
    return repr(float(value))


@dataclass(frozen=True)
class RunSummary:
    technique: str
    trials: int
    placements: int
    drops: int
    accuracy_mean: float
    accuracy_sd: float
    tct_mean: float
    tct_sd: float

    def to_line(self) -> str:
        return (
            f"summary technique={self.technique} trials={self.trials} "
            f"placements={self.placements} drops={self.drops} "
            f"accuracy_mean={_fmt(self.accuracy_mean)} accuracy_sd={_fmt(self.accuracy_sd)} "
            f"tct_mean={_fmt(self.tct_mean)} tct_sd={_fmt(self.tct_sd)}"
        )


def summarize(results: list[TrialResult], technique: str) -> RunSummary:
    accuracies = [r.accuracy for r in results]
    tcts = [r.tct for r in results]
    acc = describe(accuracies) if accuracies else None
    tct = describe(tcts) if tcts else None
    return RunSummary(
        technique=technique,
        trials=len(results),
        placements=sum(1 for r in results if not r.dropped),
        drops=sum(1 for r in results if r.dropped),
        accuracy_mean=acc.mean if acc else float("nan"),
        accuracy_sd=acc.sd if acc else float("nan"),
        tct_mean=tct.mean if tct else float("nan"),
        tct_sd=tct.sd if tct else float("nan"),
    )


class SessionEngine:
    """One technique, one scene, one hand: frames in, event lines out."""

    def __init__(self, scene: Scene, store: TemplateStore, technique: str):
        if technique not in TECHNIQUES:
            raise InvalidArgument(f"unknown technique {technique!r}")
        self.scene = scene
        self.store = store
        self.technique = technique
        self.registry = ContextRegistry(scene.hover_radius)
        self.results: list[TrialResult] = []
        self.finished = False

        self.object_poses: dict[str, RigidTransform] = {
            obj.object_id: RigidTransform(np.eye(3), obj.position.copy())
            for obj in scene.objects
        }

        self._tracker: GrabTracker | None = None
        self._pinch: PinchState | None = None
        if technique in ("grab", "custom"):
            policy = "template" if technique == "grab" else "deviation"
            self._tracker = GrabTracker(
                store,
                release_policy=policy,
                release_factor=scene.release.factor,
                release_dwell=scene.release.dwell,
            )
        elif technique == "pinch":
            self._pinch = PinchState()
        self._grip_was = False
        # direct attachment state for pinch/controller grabs
        self._held_object: str | None = None
        self._held_offset: RigidTransform | None = None
        self._grab_time: float | None = None

        self._protocol = scene.protocol
        if self._protocol is not None:
            self._sequence = [
                obj for _ in range(self._protocol.repeats) for obj in scene.objects
            ]
            self._targets = draw_target_centers(
                self._protocol, scene.target.center, len(self._sequence)
            )
            self._trial = 0
            self._active: SceneObject | None = None
            self._next_trial_at: float | None = None
            self._begin_trial(self._sequence[0])

    # ── protocol bookkeeping ───────────────────────────────────────────

    def _begin_trial(self, obj: SceneObject) -> None:
        self._active = obj
        self._next_trial_at = None
        self.object_poses[obj.object_id] = RigidTransform(np.eye(3), obj.position.copy())

    def _present_objects(self) -> tuple[SceneObject, ...]:
        if self._protocol is None:
            objects = self.scene.objects
        else:
            objects = (self._active,) if self._active is not None else ()
        # hover tracks where the object is now, not where it started; a
        # held object rides the palm and must stay hovered in transit
        return tuple(
            replace(obj, position=self.object_poses[obj.object_id].translation)
            for obj in objects
        )

    def _finish_trial(self, object_id: str, timestamp: float) -> list[str]:
        center = self.object_poses[object_id].translation
        accuracy = float(np.linalg.norm(center - self._targets[self._trial]))
        dropped = accuracy > self.scene.target.radius
        band = color_band(accuracy, self.scene.green_limit, self.scene.yellow_limit)
        self.results.append(
            TrialResult(
                technique=self.technique,
                object_id=object_id,
                accuracy=accuracy,
                tct=timestamp - self._grab_time,
                dropped=dropped,
                band=band,
            )
        )
        kind = "dropped" if dropped else "placed"
        lines = [f"{kind} {object_id} {_fmt(accuracy)} {_fmt(timestamp)}"]
        self.registry.unregister(object_id)
        self._active = None
        self._trial += 1
        if self._trial >= len(self._sequence):
            self.finished = True
        else:
            self._next_trial_at = timestamp + self._protocol.disappear_delay
        return lines

    # ── frame stepping ─────────────────────────────────────────────────

    def feed(self, frame: HandFrame) -> list[str]:
        """Advance one frame; returns the event lines it produced."""
        if self.finished:
            raise ProtocolViolation("frame arrived after the run finished")
        if (
            self._protocol is not None
            and self._active is None
            and frame.timestamp >= self._next_trial_at
        ):
            self._begin_trial(self._sequence[self._trial])

        lines: list[str] = []
        present = self._present_objects()
        for event in hover_update(frame, present, self.registry):
            lines.append(f"{event.kind} {event.object_id} {_fmt(event.timestamp)}")

        if self._tracker is not None:
            lines.extend(self._feed_tracker(frame))
        elif self._pinch is not None:
            lines.extend(self._feed_pinch(frame))
        else:
            lines.extend(self._feed_controller(frame))
        return lines

    def _feed_tracker(self, frame: HandFrame) -> list[str]:
        lines: list[str] = []
        canonical = canonicalize(frame)
        for event in self._tracker.step(frame, canonical, self.registry, self.object_poses):
            if event.kind == "grab":
                self._grab_time = event.timestamp
                lines.append(
                    f"grab {event.object_id} {event.gesture} {_fmt(event.score)} "
                    f"{_fmt(event.timestamp)}"
                )
            else:
                lines.append(f"release {event.object_id} {_fmt(event.timestamp)}")
                if self._protocol is not None:
                    lines.extend(self._finish_trial(event.object_id, event.timestamp))
        return lines

    def _feed_pinch(self, frame: HandFrame) -> list[str]:
        lines: list[str] = []
        self._update_held(frame)
        event = self._pinch.update(frame)
        if event is not None:
            lines.append(f"{event.kind} {_fmt(event.timestamp)}")
            if event.kind == "pinch-start" and self._held_object is None:
                lines.extend(self._direct_grab(frame, "pinch"))
            elif event.kind == "pinch-end" and self._held_object is not None:
                lines.extend(self._direct_release(frame))
        return lines

    def _feed_controller(self, frame: HandFrame) -> list[str]:
        lines: list[str] = []
        self._update_held(frame)
        grip = bool(frame.grip) if frame.grip is not None else False
        rising = grip and not self._grip_was
        falling = self._grip_was and not grip
        self._grip_was = grip
        if rising and self._held_object is None:
            lines.extend(self._direct_grab(frame, "grip"))
        elif falling and self._held_object is not None:
            lines.extend(self._direct_release(frame))
        return lines

    def _update_held(self, frame: HandFrame) -> None:
        if self._held_object is not None:
            palm = palm_frame(frame)
            self.object_poses[self._held_object] = palm.compose(self._held_offset)

    def _nearest_hovered(self, frame: HandFrame) -> SceneObject | None:
        hovered = [
            obj
            for obj in self._present_objects()
            if self.registry.is_registered(obj.object_id)
        ]
        if not hovered:
            return None
        # ties resolved by object id through the stable sort
        hovered.sort(key=lambda obj: (surface_distance(frame, obj), obj.object_id))
        return hovered[0]

    def _direct_grab(self, frame: HandFrame, label: str) -> list[str]:
        obj = self._nearest_hovered(frame)
        if obj is None:
            return []
        palm = palm_frame(frame)
        self._held_object = obj.object_id
        self._held_offset = palm.inverse().compose(self.object_poses[obj.object_id])
        self._grab_time = frame.timestamp
        self._update_held(frame)
        return [f"grab {obj.object_id} {label} {_fmt(0.0)} {_fmt(frame.timestamp)}"]

    def _direct_release(self, frame: HandFrame) -> list[str]:
        object_id = self._held_object
        self._held_object = None
        self._held_offset = None
        lines = [f"release {object_id} {_fmt(frame.timestamp)}"]
        if self._protocol is not None:
            lines.extend(self._finish_trial(object_id, frame.timestamp))
        return lines

    def summary(self) -> RunSummary:
        return summarize(self.results, self.technique)


def run_replay(
    scene: Scene,
    store: TemplateStore,
    technique: str,
    frames,
) -> tuple[list[TrialResult], RunSummary, list[str]]:
    """Replay a frame stream; returns (results, summary, event lines).

    Frames past protocol completion are ignored. Raises IncompleteRun
    when the stream ends before the protocol does; partial results and
    summary ride on the exception.
    """
    engine = SessionEngine(scene, store, technique)
    lines: list[str] = []
    for frame in frames:
        if engine.finished:
            break
        lines.extend(engine.feed(frame))
    if scene.protocol is not None and not engine.finished:
        done = len(engine.results)
        raise IncompleteRun(
            f"stream ended after {done} of {len(engine._sequence)} trials",
            results=engine.results,
            summary=engine.summary(),
        )
    return engine.results, engine.summary(), lines
