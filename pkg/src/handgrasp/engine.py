"""Template store, hover gating, matching, capture, and grab tracking.

Recognition is distance-based: a live canonical hand matches a stored
template when the summed per-joint Euclidean distance stays within the
template's budget (default 0.05 m, boundary inclusive). Matching is
hover-gated: only templates attached to currently hovered objects are
ever evaluated. Authoring a template is a hold gesture: keep the hand
still near the target object for a fixed duration and the pose at the
completing frame becomes the template.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import HandLost, InvalidArgument
from .hand import (
    FINGERTIPS,
    JOINT_COUNT,
    CanonicalHand,
    HandFrame,
    JointId,
    RigidTransform,
    canonicalize,
    palm_frame,
)

DISTANCE_BUDGET = 0.05  # meters, summed over all 25 joints
HOVER_RADIUS = 0.10  # meters from the closest joint to the object surface
STILLNESS_TOLERANCE = 0.01  # meters of drift that still counts as "still"
STILLNESS_WINDOW = 10  # frames
HOLD_REQUIRED = 3.0  # seconds of stillness to author a template
TRACKING_TIMEOUT = 0.5  # seconds without a frame aborts a capture
RELEASE_FACTOR = 1.5  # deviation release fires above factor * budget
RELEASE_DWELL = 0.1  # seconds the deviation must persist

ROLE_GRAB = "grab"
ROLE_RELEASE = "release"

_STILLNESS_POINTS = [int(JointId.WRIST)] + [int(j) for j in FINGERTIPS]


@dataclass(frozen=True)
class GestureTemplate:
    """A stored canonical pose. The name doubles as the unique id."""

    name: str
    object_id: str
    role: str  # "grab" | "release"
    joints_local: np.ndarray  # (25, 3) canonical joints
    threshold_sum: float = DISTANCE_BUDGET

    def __post_init__(self):
        joints = np.asarray(self.joints_local, dtype=np.float64)
        if joints.shape != (JOINT_COUNT, 3):
            raise ValueError(f"joints_local must be ({JOINT_COUNT}, 3), got {joints.shape}")
        if self.role not in (ROLE_GRAB, ROLE_RELEASE):
            raise ValueError(f"role must be 'grab' or 'release', got {self.role!r}")
        object.__setattr__(self, "joints_local", joints)


def pose_distance(current: CanonicalHand, template: GestureTemplate) -> float:
    """Summed Euclidean distance over all 25 joints."""
    diff = current.joints_local - template.joints_local
    return float(np.sqrt((diff * diff).sum(axis=1)).sum())


def match_score(current: CanonicalHand, template: GestureTemplate) -> float | None:
    """Distance if the template matches, else None.

    Scalar evaluation with early exit: a single joint farther than the
    whole budget, or a running sum past the budget, already decides the
    outcome, so the loop stops there. Decisions are identical to the
    full-sum test.
    """
    budget = template.threshold_sum
    cur = current.joints_local
    ref = template.joints_local
    dists = np.empty(JOINT_COUNT)
    total = 0.0
    # The sequential running total can sit a few ulp above the pairwise
    # aggregate that pose_distance computes, so the running-sum exit
    # keeps a slack margin and borderline completions re-aggregate the
    # same way pose_distance does. A single joint past the budget is
    # always safe to discard: no float summation of nonnegative terms
    # lands below one of its terms.
    slack = budget + 1e-9
    for j in range(JOINT_COUNT):
        dx = cur[j, 0] - ref[j, 0]
        dy = cur[j, 1] - ref[j, 1]
        dz = cur[j, 2] - ref[j, 2]
        dist = math.sqrt(dx * dx + dy * dy + dz * dz)
        if dist > budget:
            return None
        total += dist
        if total > slack:
            return None
        dists[j] = dist
    score = float(dists.sum())
    return score if score <= budget else None


class TemplateStore:
    """Holds templates by name and serves stacked arrays for matching.

    Safe for shared concurrent reads once populated; do not add
    templates while other threads are matching against the store.
    """

    def __init__(self):
        self._templates: dict[str, GestureTemplate] = {}
        self._stacks: dict[tuple[str, ...], tuple[np.ndarray, np.ndarray]] = {}

    def add(self, template: GestureTemplate) -> None:
        if template.name in self._templates:
            raise InvalidArgument(f"duplicate template name {template.name!r}")
        self._templates[template.name] = template
        self._stacks.clear()

    def get(self, name: str) -> GestureTemplate:
        return self._templates[name]

    def __contains__(self, name: str) -> bool:
        return name in self._templates

    def __len__(self) -> int:
        return len(self._templates)

    def names(self) -> tuple[str, ...]:
        return tuple(sorted(self._templates))

    def by_object(self, object_id: str) -> tuple[GestureTemplate, ...]:
        return tuple(
            self._templates[name]
            for name in sorted(self._templates)
            if self._templates[name].object_id == object_id
        )

    def stack(self, names: tuple[str, ...]) -> tuple[np.ndarray, np.ndarray]:
        """(joints (n,25,3), budgets (n,)) for the given names, cached."""
        cached = self._stacks.get(names)
        if cached is None:
            joints = np.stack([self._templates[n].joints_local for n in names])
            budgets = np.array([self._templates[n].threshold_sum for n in names])
            cached = (joints, budgets)
            self._stacks[names] = cached
        return cached


@dataclass(frozen=True)
class Match:
    gesture: str
    object_id: str
    score: float


class ContextRegistry:
    """Tracks which objects are hovered and which gestures that enables."""

    def __init__(self, hover_radius: float = HOVER_RADIUS):
        self.hover_radius = hover_radius
        self._by_object: dict[str, tuple[str, ...]] = {}
        self._active: tuple[str, ...] | None = ()

    def register(self, object_id: str, gesture_names) -> None:
        if isinstance(gesture_names, str):
            gesture_names = (gesture_names,)
        self._by_object[object_id] = tuple(gesture_names)
        self._active = None

    def unregister(self, object_id: str) -> None:
        self._by_object.pop(object_id, None)
        self._active = None

    def is_registered(self, object_id: str) -> bool:
        return object_id in self._by_object

    def hovered_objects(self) -> tuple[str, ...]:
        return tuple(sorted(self._by_object))

    def registered_gestures(self) -> tuple[str, ...]:
        if self._active is None:
            names: set[str] = set()
            for gestures in self._by_object.values():
                names.update(gestures)
            self._active = tuple(sorted(names))
        return self._active


def surface_distance(frame: HandFrame, obj) -> float:
    """Closest joint to the object's bounding sphere surface, meters.

    Negative when a joint is inside the sphere. `obj` needs `position`
    and `bounding_radius` attributes.
    """
    dists = np.linalg.norm(frame.joints - np.asarray(obj.position, dtype=np.float64), axis=1)
    return float(dists.min() - obj.bounding_radius)


@dataclass(frozen=True)
class HoverEvent:
    kind: str  # "hover" | "unhover"
    object_id: str
    timestamp: float


def hover_update(frame: HandFrame, objects, registry: ContextRegistry) -> list[HoverEvent]:
    """Edge-triggered hover tracking over all listed objects.

    Entering the hover radius registers the object's gestures, leaving
    it unregisters them. Objects need `object_id`, `position`,
    `bounding_radius`, and `gesture_names` attributes.
    """
    events: list[HoverEvent] = []
    for obj in objects:
        hovered = surface_distance(frame, obj) <= registry.hover_radius
        was_hovered = registry.is_registered(obj.object_id)
        if hovered and not was_hovered:
            registry.register(obj.object_id, tuple(obj.gesture_names))
            events.append(HoverEvent("hover", obj.object_id, frame.timestamp))
        elif not hovered and was_hovered:
            registry.unregister(obj.object_id)
            events.append(HoverEvent("unhover", obj.object_id, frame.timestamp))
    return events


def recognize(
    current: CanonicalHand,
    registry: ContextRegistry,
    store: TemplateStore,
    role: str | None = None,
    object_id: str | None = None,
) -> Match | None:
    """Best matching registered template, or None.

    Only gestures registered via hover are evaluated. The lowest
    distance wins; exact ties go to the lexicographically smallest
    name. `role` and `object_id` narrow the candidate set (used for
    release detection on the grabbed object).
    """
    names = registry.registered_gestures()
    if role is not None or object_id is not None:
        names = tuple(
            n
            for n in names
            if (role is None or store.get(n).role == role)
            and (object_id is None or store.get(n).object_id == object_id)
        )
    if not names:
        return None
    joints, budgets = store.stack(names)
    diff = current.joints_local[np.newaxis, :, :] - joints
    dists = np.sqrt((diff * diff).sum(axis=2))
    sums = dists.sum(axis=1)
    matched = sums <= budgets  # any single joint past the budget implies sum > budget
    if not matched.any():
        return None
    candidates = np.flatnonzero(matched)
    best = candidates[np.argmin(sums[candidates])]
    name = names[best]
    return Match(name, store.get(name).object_id, float(sums[best]))


class StillnessWindow:
    """Sliding window over the wrist and five fingertips.

    A frame counts as still while none of the six tracked points has
    drifted more than the tolerance from where it was at the start of
    the current window (at most `capacity` consecutive frames). On a
    violation the window restarts at the offending frame.
    """

    def __init__(self, tolerance: float = STILLNESS_TOLERANCE, capacity: int = STILLNESS_WINDOW):
        self.tolerance = tolerance
        self._window: deque[np.ndarray] = deque(maxlen=capacity)

    def update(self, frame: HandFrame) -> bool:
        points = frame.joints[_STILLNESS_POINTS]
        self._window.append(points)
        start = self._window[0]
        drift = np.linalg.norm(points - start, axis=1)
        if (drift > self.tolerance).any():
            self._window.clear()
            self._window.append(points)
            return False
        return True

    def reset(self) -> None:
        self._window.clear()


@dataclass(frozen=True)
class CaptureEvent:
    kind: str  # "progress" | "reset" | "captured"
    progress: float
    template: GestureTemplate | None = None


class CaptureSession:
    """Authors a template by holding a still pose near the target object.

    Progress runs from 0 to 1 over the required hold time and drops
    back to 0 whenever the hand moves or leaves the hover radius. The
    pose at the completing frame becomes the template.
    """

    def __init__(
        self,
        target,
        template_name: str,
        role: str = ROLE_GRAB,
        hover_radius: float = HOVER_RADIUS,
        hold_required: float = HOLD_REQUIRED,
        tracking_timeout: float = TRACKING_TIMEOUT,
        threshold_sum: float = DISTANCE_BUDGET,
        stillness_tolerance: float = STILLNESS_TOLERANCE,
        stillness_window: int = STILLNESS_WINDOW,
    ):
        self.target = target
        self.template_name = template_name
        self.role = role
        self.hover_radius = hover_radius
        self.hold_required = hold_required
        self.tracking_timeout = tracking_timeout
        self.threshold_sum = threshold_sum
        self.state = "idle"
        self.progress = 0.0
        self._stillness = StillnessWindow(stillness_tolerance, stillness_window)
        self._hold_start: float | None = None
        self._last_timestamp: float | None = None

    def _reset(self) -> CaptureEvent:
        self.state = "idle"
        self.progress = 0.0
        self._hold_start = None
        self._stillness.reset()
        return CaptureEvent("reset", 0.0)

    def step(self, frame: HandFrame) -> CaptureEvent:
        if self.state == "captured":
            raise InvalidArgument("capture session already completed")
        if (
            self._last_timestamp is not None
            and frame.timestamp - self._last_timestamp > self.tracking_timeout
        ):
            self.state = "aborted"
            raise HandLost(
                f"no frame for {frame.timestamp - self._last_timestamp:.3f} s during capture"
            )
        self._last_timestamp = frame.timestamp

        if surface_distance(frame, self.target) > self.hover_radius:
            return self._reset()

        if not self._stillness.update(frame):
            # movement restarts the hold at this frame
            self.state = "idle"
            self.progress = 0.0
            self._hold_start = frame.timestamp
            return CaptureEvent("reset", 0.0)

        if self._hold_start is None:
            self._hold_start = frame.timestamp
        elapsed = frame.timestamp - self._hold_start
        self.progress = min(max(elapsed / self.hold_required, 0.0), 1.0)
        if self.progress >= 1.0:
            template = GestureTemplate(
                name=self.template_name,
                object_id=self.target.object_id,
                role=self.role,
                joints_local=canonicalize(frame).joints_local,
                threshold_sum=self.threshold_sum,
            )
            self.state = "captured"
            return CaptureEvent("captured", 1.0, template)
        self.state = "holding"
        return CaptureEvent("progress", self.progress)


@dataclass(frozen=True)
class GrabEvent:
    kind: str  # "grab" | "release"
    object_id: str
    gesture: str
    score: float
    timestamp: float


class GrabTracker:
    """Grab/release state machine for template-driven techniques.

    A grab starts at the first grab-role match on a hovered object and
    pins the object to the palm via a fixed rigid offset. Release is
    either `deviation` (the grabbing pose drifts past factor * budget
    for a full dwell) or `template` (a release-role template on the
    grabbed object matches; the closest match wins, so a partially
    open hand beats a fully open one when both fit).
    """

    def __init__(
        self,
        store: TemplateStore,
        release_policy: str = "deviation",
        release_factor: float = RELEASE_FACTOR,
        release_dwell: float = RELEASE_DWELL,
    ):
        if release_policy not in ("deviation", "template"):
            raise InvalidArgument(f"unknown release policy {release_policy!r}")
        self.store = store
        self.release_policy = release_policy
        self.release_factor = release_factor
        self.release_dwell = release_dwell
        self.grabbed_object: str | None = None
        self.grabbing_gesture: str | None = None
        self.grab_time: float | None = None
        self._offset: RigidTransform | None = None
        self._deviation_since: float | None = None

    @property
    def grabbed(self) -> bool:
        return self.grabbed_object is not None

    def step(
        self,
        frame: HandFrame,
        current: CanonicalHand,
        registry: ContextRegistry,
        object_poses: dict[str, RigidTransform],
    ) -> list[GrabEvent]:
        """Advance one frame; grabbed objects are repositioned in place."""
        events: list[GrabEvent] = []
        if not self.grabbed:
            match = recognize(current, registry, self.store, role=ROLE_GRAB)
            if match is not None:
                palm = palm_frame(frame)
                self.grabbed_object = match.object_id
                self.grabbing_gesture = match.gesture
                self.grab_time = frame.timestamp
                self._offset = palm.inverse().compose(object_poses[match.object_id])
                self._deviation_since = None
                events.append(
                    GrabEvent("grab", match.object_id, match.gesture, match.score, frame.timestamp)
                )
            return events

        palm = palm_frame(frame)
        object_poses[self.grabbed_object] = palm.compose(self._offset)
        if self._should_release(frame, current, registry):
            events.append(
                GrabEvent(
                    "release",
                    self.grabbed_object,
                    self.grabbing_gesture,
                    0.0,
                    frame.timestamp,
                )
            )
            self.grabbed_object = None
            self.grabbing_gesture = None
            self.grab_time = None
            self._offset = None
            self._deviation_since = None
        return events

    def _should_release(
        self, frame: HandFrame, current: CanonicalHand, registry: ContextRegistry
    ) -> bool:
        if self.release_policy == "template":
            match = recognize(
                current,
                registry,
                self.store,
                role=ROLE_RELEASE,
                object_id=self.grabbed_object,
            )
            return match is not None
        template = self.store.get(self.grabbing_gesture)
        score = pose_distance(current, template)
        if score > self.release_factor * template.threshold_sum:
            if self._deviation_since is None:
                self._deviation_since = frame.timestamp
            elif frame.timestamp - self._deviation_since >= self.release_dwell:
                return True
        else:
            self._deviation_since = None
        return False
