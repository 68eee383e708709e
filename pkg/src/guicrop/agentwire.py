"""JSON-lines agent transport over stdio.

One request per line, one response per line:

    {"op": "enumerate" | "ground" | "refer", "image": path,
     "description"?: str, "bbox"?: [x1, y1, x2, y2]}
    {"ok": true, "descriptions"?: [...], "bbox"?: [...], "description"?: str}
    {"ok": false, "error": str}

``SubprocessAgent`` is the client side and satisfies the agent protocol used
by the dual loop; ``serve`` answers requests with any in-process agent.
"""

from __future__ import annotations

import json
import shlex
import subprocess
import sys

from .errors import AgentFailure, ProtocolError
from .srdl import BBox, ElementDescription

OPS = ("enumerate", "ground", "refer")


def _bbox_from(value) -> BBox:
    if (not isinstance(value, list) or len(value) != 4
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)):
        raise ProtocolError(f"bbox must be a list of 4 numbers, got {value!r}")
    try:
        return BBox(*value)
    except ValueError as exc:
        raise ProtocolError(f"degenerate bbox {value!r}: {exc}") from None


def _bbox_json(b: BBox) -> list:
    return [v if not float(v).is_integer() else int(v) for v in b.as_tuple()]


class SubprocessAgent:
    """Talks to an external agent process that speaks the JSON-lines protocol."""

    concurrent_safe = False

    def __init__(self, command, timeout: float | None = 30.0):
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        if not argv:
            raise ValueError("agent command is empty")
        self.argv = argv
        self.timeout = timeout
        self._proc = subprocess.Popen(argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                                      text=True, bufsize=1)

    def _call(self, request: dict) -> dict:
        proc = self._proc
        if proc.poll() is not None:
            raise ProtocolError(f"agent exited with status {proc.returncode}")
        try:
            proc.stdin.write(json.dumps(request) + "\n")
            proc.stdin.flush()
            line = proc.stdout.readline()
        except (BrokenPipeError, OSError) as exc:
            raise ProtocolError(f"agent pipe closed: {exc}") from None
        if not line:
            raise ProtocolError("agent closed its output")
        try:
            resp = json.loads(line)
        except json.JSONDecodeError:
            raise ProtocolError(f"agent sent malformed JSON: {line.strip()[:200]!r}") from None
        if not isinstance(resp, dict) or not isinstance(resp.get("ok"), bool):
            raise ProtocolError(f"response lacks boolean 'ok': {resp!r}")
        if not resp["ok"]:
            err = resp.get("error")
            if not isinstance(err, str):
                raise ProtocolError("failure response lacks an 'error' string")
            raise AgentFailure(err)
        return resp

    def enumerate(self, image) -> list[ElementDescription]:
        resp = self._call({"op": "enumerate", "image": str(image)})
        items = resp.get("descriptions")
        if not isinstance(items, list) or not all(isinstance(t, str) and t.strip() for t in items):
            raise ProtocolError("enumerate response needs 'descriptions': [nonempty str]")
        return [ElementDescription(t) for t in items]

    def ground(self, image, description) -> BBox:
        text = description.text if isinstance(description, ElementDescription) else str(description)
        resp = self._call({"op": "ground", "image": str(image), "description": text})
        return _bbox_from(resp.get("bbox"))

    def refer(self, image, bbox) -> ElementDescription:
        box = bbox if isinstance(bbox, BBox) else BBox(*bbox)
        resp = self._call({"op": "refer", "image": str(image), "bbox": _bbox_json(box)})
        text = resp.get("description")
        if not isinstance(text, str) or not text.strip():
            raise ProtocolError("refer response needs a nonempty 'description'")
        return ElementDescription(text, kind="referred", origin="agent")

    def close(self) -> None:
        proc = self._proc
        if proc.poll() is None:
            try:
                proc.stdin.close()
            except OSError:
                pass
            try:
                proc.wait(timeout=self.timeout)
            except subprocess.TimeoutExpired:
                proc.kill()
                proc.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def handle_request(agent, request) -> dict:
    """Answer one decoded request; every failure becomes an ``ok: false`` response."""
    if not isinstance(request, dict):
        return {"ok": False, "error": "request must be a JSON object"}
    op = request.get("op")
    image = request.get("image")
    if op not in OPS:
        return {"ok": False, "error": f"unknown op {op!r}"}
    if not isinstance(image, str):
        return {"ok": False, "error": "missing 'image' path"}
    try:
        if op == "enumerate":
            return {"ok": True, "descriptions": [d.text for d in agent.enumerate(image)]}
        if op == "ground":
            text = request.get("description")
            if not isinstance(text, str) or not text.strip():
                return {"ok": False, "error": "ground needs a 'description'"}
            return {"ok": True, "bbox": _bbox_json(agent.ground(image, ElementDescription(text)))}
        box = _bbox_from(request.get("bbox"))
        return {"ok": True, "description": agent.refer(image, box).text}
    except Exception as exc:  # noqa: BLE001 - reported to the client
        return {"ok": False, "error": f"{type(exc).__name__}: {exc}"}


def serve(agent, stdin=None, stdout=None) -> int:
    """Serve requests line by line until EOF. Returns the number handled."""
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    n = 0
    for line in stdin:
        if not line.strip():
            continue
        try:
            request = json.loads(line)
        except json.JSONDecodeError:
            resp = {"ok": False, "error": "malformed JSON request"}
        else:
            resp = handle_request(agent, request)
        stdout.write(json.dumps(resp) + "\n")
        stdout.flush()
        n += 1
    return n
