"""Line-protocol TCP recognition service.

Each connection is one session. The client opens with a header line

    session <scene-id> <technique>

then streams frame lines in the `.frames` format. The server replies
with the same event lines the in-process SessionEngine produces, in
order, flushed before the next frame is read. Malformed lines get one

    err <code> <line-no>

reply (codes: header, scene, technique, joints, parse, degenerate,
finished) and the session continues; line numbers count every line in
the session including the header. An `end` line yields a single
summary line and closes the session. Sessions are fully isolated:
every connection gets its own engine, scenes and template stores are
shared read-only.
"""

from __future__ import annotations

import logging
import socketserver
import threading

from .errors import DegenerateHand, ParseError, CountError
from .scene import Scene
from .engine import TemplateStore
from .sim import SessionEngine, TECHNIQUES
from .streams import parse_frame_line

logger = logging.getLogger(__name__)


class _SessionHandler(socketserver.StreamRequestHandler):
    def _reply(self, line: str) -> None:
        self.wfile.write((line + "\n").encode("utf-8"))
        self.wfile.flush()

    def handle(self) -> None:
        header = self.rfile.readline()
        if not header:
            return
        parts = header.decode("utf-8", errors="replace").strip().split()
        if len(parts) != 3 or parts[0] != "session":
            self._reply("err header 1")
            return
        _, scene_id, technique = parts
        scenes = self.server.scenes
        if scene_id not in scenes:
            self._reply("err scene 1")
            return
        if technique not in TECHNIQUES:
            self._reply("err technique 1")
            return
        scene, store = scenes[scene_id]
        engine = SessionEngine(scene, store, technique)

        line_no = 1
        while True:
            raw = self.rfile.readline()
            if not raw:
                return  # client went away without an end line
            line_no += 1
            text = raw.decode("utf-8", errors="replace").strip()
            if not text:
                continue
            if text == "end":
                self._reply(engine.summary().to_line())
                return
            try:
                frame = parse_frame_line(text, line_no=line_no)
            except CountError:
                self._reply(f"err joints {line_no}")
                continue
            except ParseError:
                self._reply(f"err parse {line_no}")
                continue
            if engine.finished:
                self._reply(f"err finished {line_no}")
                continue
            try:
                events = engine.feed(frame)
            except DegenerateHand:
                self._reply(f"err degenerate {line_no}")
                continue
            for event in events:
                self._reply(event)


class _ThreadingServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True


class GraspServer:
    """Owns the listening socket; `scenes` maps id -> (Scene, TemplateStore)."""

    def __init__(
        self,
        scenes: dict[str, tuple[Scene, TemplateStore]],
        host: str = "127.0.0.1",
        port: int = 0,
    ):
        self._server = _ThreadingServer((host, port), _SessionHandler)
        self._server.scenes = scenes
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> tuple[str, int]:
        return self._server.server_address[:2]

    def serve_forever(self) -> None:
        self._server.serve_forever()

    def start(self) -> None:
        """Serve on a background thread (used by tests and embedders)."""
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5.0)
            self._thread = None
