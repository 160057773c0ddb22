"""File formats and synthetic hand streams.

Three formats live here. Frame streams (`.frames`) are one JSON object
per line so they can be replayed, tailed, and piped over sockets
without framing; floats round-trip exactly via repr. Templates
(`.gesture`) are single JSON documents with an explicit format
version. Trial results are plain CSV with a fixed header.

The synthetic side builds deterministic hand streams from a small set
of parametric key poses. A ScriptBuilder strings together hold / move
/ morph segments into a timestamped stream, which is how test fixtures
and the golden replays are produced: same seed, same bytes.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Iterator

import numpy as np

from .engine import DISTANCE_BUDGET, GestureTemplate
from .errors import CountError, ParseError
from .hand import JOINT_COUNT, HandFrame, JointId

logger = logging.getLogger(__name__)

TEMPLATE_FORMAT_VERSION = 1
RESULTS_HEADER = ("technique", "object", "accuracy_m", "tct_s", "dropped", "band")

_FRAME_FIELDS = {"t", "hand", "joints", "grip"}


# ── trial results ──────────────────────────────────────────────────────────


@dataclass(frozen=True)
class TrialResult:
    """Outcome of one grab-move-release cycle."""

    technique: str
    object_id: str
    accuracy: float  # object center to target center at release, meters
    tct: float  # grab to release, seconds
    dropped: bool  # released outside the target sphere
    band: str  # "green" | "yellow" | "red"


def write_results(path: str | Path, results: Iterable[TrialResult]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULTS_HEADER)
        for r in results:
            writer.writerow(
                [
                    r.technique,
                    r.object_id,
                    repr(r.accuracy),
                    repr(r.tct),
                    "true" if r.dropped else "false",
                    r.band,
                ]
            )


def read_results(path: str | Path) -> list[TrialResult]:
    results: list[TrialResult] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != RESULTS_HEADER:
            raise ParseError(f"bad results header in {path}", line_no=1, field="header")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(RESULTS_HEADER):
                raise ParseError(
                    f"expected {len(RESULTS_HEADER)} columns, got {len(row)}",
                    line_no=line_no,
                    field="row",
                )
            try:
                results.append(
                    TrialResult(
                        technique=row[0],
                        object_id=row[1],
                        accuracy=float(row[2]),
                        tct=float(row[3]),
                        dropped=row[4] == "true",
                        band=row[5],
                    )
                )
            except ValueError as exc:
                raise ParseError(str(exc), line_no=line_no, field="row") from exc
    return results


# ── frame streams ──────────────────────────────────────────────────────────


def format_frame_line(frame: HandFrame) -> str:
    record: dict = {
        "t": frame.timestamp,
        "hand": frame.side,
        "joints": [[float(v) for v in row] for row in frame.joints],
    }
    if frame.grip is not None:
        record["grip"] = 1 if frame.grip else 0
    return json.dumps(record, separators=(",", ":"))


def parse_frame_line(
    text: str,
    line_no: int = 0,
    on_warning: Callable[[str], None] | None = None,
) -> HandFrame:
    """Parse one stream line into a HandFrame.

    Unknown fields are ignored through the warning channel (default:
    module logger). Raises ParseError / CountError with the line number
    and field on malformed input.
    """
    warn = on_warning if on_warning is not None else logger.warning
    try:
        record = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", line_no=line_no, field="json") from exc
    if not isinstance(record, dict):
        raise ParseError("frame record must be an object", line_no=line_no, field="json")

    for key in record:
        if key not in _FRAME_FIELDS:
            warn(f"line {line_no}: ignoring unknown field {key!r}")

    try:
        timestamp = float(record["t"])
    except KeyError:
        raise ParseError("missing field 't'", line_no=line_no, field="t") from None
    except (TypeError, ValueError):
        raise ParseError("field 't' must be a number", line_no=line_no, field="t") from None

    side = record.get("hand")
    if side not in ("left", "right"):
        raise ParseError(f"field 'hand' must be left|right, got {side!r}", line_no=line_no, field="hand")

    joints_raw = record.get("joints")
    if not isinstance(joints_raw, list):
        raise ParseError("field 'joints' must be a list", line_no=line_no, field="joints")
    if len(joints_raw) != JOINT_COUNT:
        raise CountError(
            f"expected {JOINT_COUNT} joints, got {len(joints_raw)}",
            line_no=line_no,
            field="joints",
        )
    joints = np.empty((JOINT_COUNT, 3), dtype=np.float64)
    for i, entry in enumerate(joints_raw):
        if not isinstance(entry, list) or len(entry) != 3:
            raise CountError(
                f"joint {i} must be [x, y, z]", line_no=line_no, field=f"joints[{i}]"
            )
        try:
            joints[i] = [float(v) for v in entry]
        except (TypeError, ValueError):
            raise ParseError(
                f"joint {i} has a non-numeric component", line_no=line_no, field=f"joints[{i}]"
            ) from None

    grip_raw = record.get("grip")
    if grip_raw is None:
        grip = None
    elif isinstance(grip_raw, bool):
        grip = grip_raw
    elif grip_raw in (0, 1):
        grip = bool(grip_raw)
    else:
        raise ParseError(
            f"field 'grip' must be 0|1, got {grip_raw!r}", line_no=line_no, field="grip"
        )
    return HandFrame(timestamp=timestamp, side=side, joints=joints, grip=grip)


def write_frames(path: str | Path, frames: Iterable[HandFrame]) -> None:
    with open(path, "w") as fh:
        for frame in frames:
            fh.write(format_frame_line(frame))
            fh.write("\n")


def read_frames(
    path: str | Path, on_warning: Callable[[str], None] | None = None
) -> Iterator[HandFrame]:
    """Yield frames from a `.frames` file; blank lines are skipped."""
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            yield parse_frame_line(text, line_no=line_no, on_warning=on_warning)


# ── gesture template files ─────────────────────────────────────────────────


def save_template(path: str | Path, template: GestureTemplate) -> None:
    document = {
        "format_version": TEMPLATE_FORMAT_VERSION,
        "name": template.name,
        "object_id": template.object_id,
        "role": template.role,
        "threshold_sum": template.threshold_sum,
        "joints_local": [[float(v) for v in row] for row in template.joints_local],
    }
    with open(path, "w") as fh:
        json.dump(document, fh, separators=(",", ":"))
        fh.write("\n")


def load_template(path: str | Path) -> GestureTemplate:
    with open(path) as fh:
        try:
            document = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid template JSON in {path}: {exc.msg}", field="json") from exc
    version = document.get("format_version")
    if version != TEMPLATE_FORMAT_VERSION:
        raise ParseError(
            f"unsupported template format_version {version!r} in {path}",
            field="format_version",
        )
    joints_raw = document.get("joints_local")
    if not isinstance(joints_raw, list) or len(joints_raw) != JOINT_COUNT:
        raise CountError(
            f"template {path} must carry {JOINT_COUNT} joints", field="joints_local"
        )
    try:
        return GestureTemplate(
            name=document["name"],
            object_id=document["object_id"],
            role=document["role"],
            joints_local=np.asarray(joints_raw, dtype=np.float64),
            threshold_sum=float(document.get("threshold_sum", DISTANCE_BUDGET)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad template document in {path}: {exc}", field="template") from exc


# ── synthetic key poses ────────────────────────────────────────────────────

POSE_KINDS = ("open", "fist", "pinch", "relaxed", "partial_open")

PINCH_TIP_GAP = 0.015  # thumb tip to index tip in the pinch key pose
FIST_TIP_REACH = 0.04  # fingertips stay within this of the palm center

# Right-hand layout, wrist at the origin, fingers along +z, index side +x.
# The middle metacarpal sits on the z axis and all metacarpals have y = 0,
# which makes the palm basis of the unrotated pose exactly the identity.
_FINGERS = {
    "index": {
        "meta": (0.016, 0.0, 0.030),
        "knuckle": (0.025, 0.0, 0.088),
        "phalanges": (0.040, 0.024, 0.020),
        "base": (JointId.INDEX_METACARPAL, JointId.INDEX_PROXIMAL),
    },
    "middle": {
        "meta": (0.0, 0.0, 0.032),
        "knuckle": (0.0, 0.0, 0.090),
        "phalanges": (0.044, 0.027, 0.021),
        "base": (JointId.MIDDLE_METACARPAL, JointId.MIDDLE_PROXIMAL),
    },
    "ring": {
        "meta": (-0.012, 0.0, 0.030),
        "knuckle": (-0.018, 0.0, 0.085),
        "phalanges": (0.041, 0.025, 0.020),
        "base": (JointId.RING_METACARPAL, JointId.RING_PROXIMAL),
    },
    "pinky": {
        "meta": (-0.020, 0.0, 0.027),
        "knuckle": (-0.033, 0.0, 0.078),
        "phalanges": (0.032, 0.020, 0.018),
        "base": (JointId.PINKY_METACARPAL, JointId.PINKY_PROXIMAL),
    },
}

# Cumulative bend per phalanx segment, degrees, toward the palm.
_FINGER_CURL = {
    "open": (0.0, 0.0, 0.0),
    "relaxed": (20.0, 38.0, 52.0),
    "partial_open": (40.0, 70.0, 95.0),
    "fist": (90.0, 180.0, 270.0),
}
_PINCH_INDEX_CURL = (50.0, 95.0, 130.0)
_PINCH_OTHER_CURL = (30.0, 55.0, 75.0)

_THUMB_META = (0.020, 0.0, 0.022)
_THUMB_CHAINS = {
    "open": ((0.050, 0.000, 0.046), (0.068, 0.000, 0.066), (0.082, 0.000, 0.084)),
    "relaxed": ((0.046, -0.006, 0.048), (0.060, -0.012, 0.064), (0.070, -0.018, 0.078)),
    "partial_open": ((0.044, -0.008, 0.050), (0.056, -0.016, 0.062), (0.064, -0.024, 0.072)),
    "fist": ((0.042, -0.012, 0.055), (0.028, -0.022, 0.068), (0.012, -0.028, 0.072)),
}

_KEYPOSE_CACHE: dict[str, np.ndarray] = {}


def _finger_chain(knuckle, phalanges, curl_deg) -> list[np.ndarray]:
    points = [np.asarray(knuckle, dtype=np.float64)]
    for length, angle in zip(phalanges, curl_deg):
        rad = math.radians(angle)
        direction = np.array([0.0, -math.sin(rad), math.cos(rad)])
        points.append(points[-1] + length * direction)
    return points[1:]  # intermediate, distal, tip


def keypose(kind: str) -> np.ndarray:
    """The (25, 3) joint array of a named key pose (wrist at origin)."""
    if kind not in POSE_KINDS:
        raise ParseError(f"unknown pose kind {kind!r}", field="pose")
    cached = _KEYPOSE_CACHE.get(kind)
    if cached is None:
        cached = _build_keypose(kind)
        cached.flags.writeable = False
        _KEYPOSE_CACHE[kind] = cached
    return cached.copy()


def _build_keypose(kind: str) -> np.ndarray:
    joints = np.zeros((JOINT_COUNT, 3), dtype=np.float64)
    for finger, layout in _FINGERS.items():
        meta_id, knuckle_id = layout["base"]
        joints[meta_id] = layout["meta"]
        joints[knuckle_id] = layout["knuckle"]
        if kind == "pinch":
            curl = _PINCH_INDEX_CURL if finger == "index" else _PINCH_OTHER_CURL
        else:
            curl = _FINGER_CURL[kind]
        chain = _finger_chain(layout["knuckle"], layout["phalanges"], curl)
        joints[knuckle_id + 1 : knuckle_id + 4] = chain

    joints[JointId.THUMB_METACARPAL] = _THUMB_META
    if kind == "pinch":
        # thumb tip pinned to a fixed gap under the index tip
        index_tip = joints[JointId.INDEX_TIP]
        tip = index_tip + np.array([0.0, -PINCH_TIP_GAP, 0.0])
        meta = np.asarray(_THUMB_META)
        joints[JointId.THUMB_PROXIMAL] = meta + 0.40 * (tip - meta) + [0.010, 0.0, 0.006]
        joints[JointId.THUMB_DISTAL] = meta + 0.72 * (tip - meta) + [0.005, 0.0, 0.003]
        joints[JointId.THUMB_TIP] = tip
    else:
        prox, distal, tip = _THUMB_CHAINS[kind]
        joints[JointId.THUMB_PROXIMAL] = prox
        joints[JointId.THUMB_DISTAL] = distal
        joints[JointId.THUMB_TIP] = tip
    return joints


def pose_frame(
    kind: str,
    timestamp: float = 0.0,
    at=(0.0, 0.0, 0.0),
    side: str = "right",
    grip: bool | None = None,
) -> HandFrame:
    """One frame of a key pose with the wrist placed at `at`."""
    joints = keypose(kind)
    if side == "left":
        joints[:, 0] = -joints[:, 0]
    joints += np.asarray(at, dtype=np.float64)
    return HandFrame(timestamp=timestamp, side=side, joints=joints, grip=grip)


def synth_stream(
    kind: str,
    duration: float,
    rate: float = 90.0,
    sigma: float = 0.0,
    seed: int = 0,
    side: str = "right",
    at=(0.0, 0.0, 0.0),
) -> list[HandFrame]:
    """A held key pose sampled at `rate`, with optional Gaussian noise."""
    builder = ScriptBuilder(rate=rate, sigma=sigma, seed=seed, side=side, start=at)
    builder.hold(duration, kind=kind)
    return builder.frames()


@dataclass
class _Segment:
    duration: float
    kind_a: str
    kind_b: str
    pos_a: np.ndarray
    pos_b: np.ndarray
    grip: bool | None


class ScriptBuilder:
    """Composes hold / move / morph segments into a deterministic stream.

    Frames are stamped at i / rate from t = 0. Noise, when requested,
    is per-coordinate Gaussian displacement from one shared seeded
    generator, so the same script and seed always produce identical
    bytes.
    """

    def __init__(
        self,
        rate: float = 90.0,
        sigma: float = 0.0,
        seed: int = 0,
        side: str = "right",
        start=(0.0, 0.0, 0.0),
    ):
        self.rate = rate
        self.sigma = sigma
        self.seed = seed
        self.side = side
        self._segments: list[_Segment] = []
        self._pos = np.asarray(start, dtype=np.float64)
        self._kind = "open"

    def hold(self, duration: float, kind: str | None = None, grip: bool | None = None) -> "ScriptBuilder":
        if kind is not None:
            self._kind = kind
        self._segments.append(
            _Segment(duration, self._kind, self._kind, self._pos.copy(), self._pos.copy(), grip)
        )
        return self

    def move(
        self,
        to,
        duration: float,
        kind: str | None = None,
        grip: bool | None = None,
    ) -> "ScriptBuilder":
        if kind is not None:
            self._kind = kind
        target = np.asarray(to, dtype=np.float64)
        self._segments.append(
            _Segment(duration, self._kind, self._kind, self._pos.copy(), target.copy(), grip)
        )
        self._pos = target
        return self

    def morph(self, to_kind: str, duration: float, grip: bool | None = None) -> "ScriptBuilder":
        self._segments.append(
            _Segment(duration, self._kind, to_kind, self._pos.copy(), self._pos.copy(), grip)
        )
        self._kind = to_kind
        return self

    def total_duration(self) -> float:
        return sum(seg.duration for seg in self._segments)

    def frames(self) -> list[HandFrame]:
        total = self.total_duration()
        count = int(math.floor(total * self.rate))
        rng = np.random.default_rng(self.seed) if self.sigma > 0.0 else None
        out: list[HandFrame] = []
        bounds: list[tuple[float, _Segment]] = []
        t0 = 0.0
        for seg in self._segments:
            bounds.append((t0, seg))
            t0 += seg.duration
        seg_idx = 0
        for i in range(count):
            t = i / self.rate
            while seg_idx + 1 < len(bounds) and t >= bounds[seg_idx][0] + bounds[seg_idx][1].duration:
                seg_idx += 1
            seg_start, seg = bounds[seg_idx]
            u = (t - seg_start) / seg.duration if seg.duration > 0 else 0.0
            u = min(max(u, 0.0), 1.0)
            if seg.kind_a == seg.kind_b:
                pose = keypose(seg.kind_a)
            else:
                pose = (1.0 - u) * keypose(seg.kind_a) + u * keypose(seg.kind_b)
            if self.side == "left":
                pose[:, 0] = -pose[:, 0]
            if (seg.pos_a == seg.pos_b).all():
                position = seg.pos_a  # bit-identical frames while holding still
            else:
                position = (1.0 - u) * seg.pos_a + u * seg.pos_b
            joints = pose + position
            if rng is not None:
                joints = joints + rng.normal(0.0, self.sigma, size=(JOINT_COUNT, 3))
            out.append(HandFrame(timestamp=t, side=self.side, joints=joints, grip=seg.grip))
        return out
