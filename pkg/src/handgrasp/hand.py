"""Hand skeleton model and wrist-anchored canonicalization.

A tracked hand is 25 joints in world space (meters). Recognition never
works on world coordinates directly: every frame is re-expressed in a
palm-local basis anchored at the wrist and divided by a per-hand size
factor, which makes the downstream template comparison invariant to
where the hand is, how it is rotated, and how large it is. Left hands
are mirrored onto right-hand convention so one template serves both.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .errors import DegenerateHand

JOINT_COUNT = 25
REFERENCE_LENGTH = 0.09  # wrist -> middle proximal, meters, defines size 1.0
DEGENERATE_EPS = 1e-9  # anchor collinearity / coincidence tolerance


class JointId(IntEnum):
    """Joint indices in the fixed 25-joint layout."""

    WRIST = 0
    THUMB_METACARPAL = 1
    THUMB_PROXIMAL = 2
    THUMB_DISTAL = 3
    THUMB_TIP = 4
    INDEX_METACARPAL = 5
    INDEX_PROXIMAL = 6
    INDEX_INTERMEDIATE = 7
    INDEX_DISTAL = 8
    INDEX_TIP = 9
    MIDDLE_METACARPAL = 10
    MIDDLE_PROXIMAL = 11
    MIDDLE_INTERMEDIATE = 12
    MIDDLE_DISTAL = 13
    MIDDLE_TIP = 14
    RING_METACARPAL = 15
    RING_PROXIMAL = 16
    RING_INTERMEDIATE = 17
    RING_DISTAL = 18
    RING_TIP = 19
    PINKY_METACARPAL = 20
    PINKY_PROXIMAL = 21
    PINKY_INTERMEDIATE = 22
    PINKY_DISTAL = 23
    PINKY_TIP = 24


FINGERTIPS = (
    JointId.THUMB_TIP,
    JointId.INDEX_TIP,
    JointId.MIDDLE_TIP,
    JointId.RING_TIP,
    JointId.PINKY_TIP,
)

KNUCKLES = (
    JointId.INDEX_PROXIMAL,
    JointId.MIDDLE_PROXIMAL,
    JointId.RING_PROXIMAL,
    JointId.PINKY_PROXIMAL,
)


@dataclass(frozen=True)
class HandFrame:
    """One tracked hand sample: timestamp, side, and 25 world joints."""

    timestamp: float
    side: str  # "left" | "right"
    joints: np.ndarray  # (25, 3) float64, world meters
    grip: bool | None = None  # controller grip bit, absent for bare hands

    def __post_init__(self):
        joints = np.asarray(self.joints, dtype=np.float64)
        if joints.shape != (JOINT_COUNT, 3):
            raise ValueError(f"joints must be ({JOINT_COUNT}, 3), got {joints.shape}")
        if self.side not in ("left", "right"):
            raise ValueError(f"side must be 'left' or 'right', got {self.side!r}")
        object.__setattr__(self, "joints", joints)


@dataclass(frozen=True)
class CanonicalHand:
    """Palm-local, size-normalized joints plus the size factor removed."""

    joints_local: np.ndarray  # (25, 3) float64, wrist at origin
    scale: float


@dataclass(frozen=True)
class RigidTransform:
    """Rotation + translation. Columns of `rotation` are the basis axes."""

    rotation: np.ndarray  # (3, 3) orthonormal, det +1
    translation: np.ndarray  # (3,)

    def apply(self, points: np.ndarray) -> np.ndarray:
        return points @ self.rotation.T + self.translation

    def compose(self, other: RigidTransform) -> RigidTransform:
        """Return self ∘ other (apply `other` first, then self)."""
        return RigidTransform(
            rotation=self.rotation @ other.rotation,
            translation=self.rotation @ other.translation + self.translation,
        )

    def inverse(self) -> RigidTransform:
        rot_t = self.rotation.T
        return RigidTransform(rotation=rot_t, translation=-(rot_t @ self.translation))


@dataclass
class _PalmAxes:
    lateral: np.ndarray
    normal: np.ndarray
    forward: np.ndarray


def _palm_axes(joints: np.ndarray) -> _PalmAxes:
    wrist = joints[JointId.WRIST]
    forward_raw = joints[JointId.MIDDLE_METACARPAL] - wrist
    span_raw = joints[JointId.INDEX_METACARPAL] - joints[JointId.PINKY_METACARPAL]

    forward_len = np.linalg.norm(forward_raw)
    span_len = np.linalg.norm(span_raw)
    if forward_len < DEGENERATE_EPS or span_len < DEGENERATE_EPS:
        raise DegenerateHand("palm anchors coincide")

    forward = forward_raw / forward_len
    normal_raw = np.cross(forward, span_raw / span_len)
    normal_len = np.linalg.norm(normal_raw)
    if normal_len < DEGENERATE_EPS:
        raise DegenerateHand("palm anchors are collinear")

    normal = normal_raw / normal_len
    lateral = np.cross(normal, forward)  # unit: normal ⟂ forward by construction
    return _PalmAxes(lateral=lateral, normal=normal, forward=forward)


def palm_frame(frame: HandFrame) -> RigidTransform:
    """Palm pose in world space: origin at the wrist, right-handed axes.

    Forward points from the wrist toward the middle metacarpal, the
    normal is perpendicular to the palm, and the lateral axis completes
    the basis (lateral x normal = forward).

    Raises DegenerateHand when the wrist and the index/middle/pinky
    metacarpals do not span a plane.
    """
    axes = _palm_axes(frame.joints)
    rotation = np.column_stack((axes.lateral, axes.normal, axes.forward))
    return RigidTransform(rotation=rotation, translation=frame.joints[JointId.WRIST].copy())


def hand_scale(frame: HandFrame) -> float:
    """Hand size factor: wrist-to-middle-proximal length over 0.09 m."""
    length = np.linalg.norm(frame.joints[JointId.MIDDLE_PROXIMAL] - frame.joints[JointId.WRIST])
    if length < DEGENERATE_EPS:
        raise DegenerateHand("wrist and middle proximal coincide")
    return float(length / REFERENCE_LENGTH)


def canonicalize(frame: HandFrame) -> CanonicalHand:
    """Express all joints in the palm basis, divided by the size factor.

    The wrist maps to the origin. Left hands get their palm-normal
    coordinate negated, which maps a left hand onto the right-hand
    convention: mirror-image poses canonicalize identically regardless
    of side.
    """
    axes = _palm_axes(frame.joints)
    scale = hand_scale(frame)
    offsets = frame.joints - frame.joints[JointId.WRIST]
    basis = np.column_stack((axes.lateral, axes.normal, axes.forward))
    local = (offsets @ basis) / scale
    if frame.side == "left":
        local = local.copy()
        local[:, 1] = -local[:, 1]
    return CanonicalHand(joints_local=local, scale=scale)


def palm_center(frame: HandFrame) -> np.ndarray:
    """Centroid of the wrist and the four finger knuckles, world space."""
    ids = (JointId.WRIST,) + KNUCKLES
    return frame.joints[list(ids)].mean(axis=0)
