"""Interactive session host: WebSocket wire protocol over a live episode.

One `Session` owns a scenario, an `EpisodeRunner` and a playback mode. All
mutation goes through `Session.apply`, called from a single queue, so
snapshots can be fanned out to any number of clients concurrently.

Wire protocol (protocol_version 1): every frame is one JSON text message
with a `type` tag. Client messages carry a monotone `seq` number which the
server echoes in the matching `ack` or `error` frame. The map raster is
delivered once per scenario as a base64 PGM.
"""

from __future__ import annotations

import asyncio
import base64
import dataclasses
import hashlib
import json
import math
from pathlib import Path

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse, Response

from .errors import (
    DegenerateGesture,
    GestureNavError,
    TargetOutsideGrid,
    UnknownInstructor,
    ValidationError,
)
from .geometry import Pose2
from .grid import pgm_bytes
from .pipeline import CommandEvent
from .scenario import EpisodeRunner, load_scenario, scenario_from_dict, trace_bytes
from .world import WorldModel, render_object_boxes

PROTOCOL_VERSION = 1


def inject_gesture(world: WorldModel, instructor_id: str, target) -> WorldModel:
    """World with the instructor aiming arm and gaze at a map point.

    The gesture is ground truth only: the pipeline still estimates it from
    the noisy synthetic observation, nothing is shortcut.
    """
    matches = [i for i in world.instructors if i.id == instructor_id]
    if not matches:
        raise UnknownInstructor(instructor_id)
    ins = matches[0]
    tx, ty = float(target[0]), float(target[1])
    tz = float(target[2]) if len(target) > 2 else 0.8
    if not world.grid.contains_point(tx, ty):
        raise TargetOutsideGrid(f"({tx}, {ty}) outside grid")
    if math.hypot(tx - ins.base.x, ty - ins.base.y) < 1e-6:
        raise DegenerateGesture("target coincides with the instructor")
    new_ins = dataclasses.replace(
        ins, point_target=(tx, ty, tz), gaze_target=(tx, ty, tz)
    )
    instructors = tuple(new_ins if i.id == instructor_id else i
                        for i in world.instructors)
    return dataclasses.replace(world, instructors=instructors)


def place_instructor(world: WorldModel, instructor_id: str, pose) -> WorldModel:
    matches = [i for i in world.instructors if i.id == instructor_id]
    if not matches:
        raise UnknownInstructor(instructor_id)
    x, y = float(pose[0]), float(pose[1])
    theta = float(pose[2]) if len(pose) > 2 else 0.0
    if not world.grid.contains_point(x, y):
        raise TargetOutsideGrid(f"({x}, {y}) outside grid")
    new_ins = dataclasses.replace(matches[0], base=Pose2(x, y, theta))
    instructors = tuple(new_ins if i.id == instructor_id else i
                        for i in world.instructors)
    return dataclasses.replace(world, instructors=instructors)


class Session:
    """Single simulation session; all calls are made from one task."""

    def __init__(self, scenario_dir: Path):
        self.scenario_dir = Path(scenario_dir)
        self.runner: EpisodeRunner | None = None
        self.mode = "pause"  # play | pause
        self.rate = 1.0
        self.map_frame: dict | None = None
        self.map_digest: dict | None = None
        self._trace_store: dict[str, bytes] = {}
        self._last_seq: int | None = None

    # -- message handling ---------------------------------------------------

    def apply(self, msg: dict) -> list[dict]:
        """Apply one client message; returns frames for the sender."""
        seq = msg.get("seq") if isinstance(msg, dict) else None
        try:
            if not isinstance(msg, dict) or "type" not in msg:
                raise ValueError("message must be an object with a 'type' tag")
            if seq is not None and self._last_seq is not None and seq <= self._last_seq:
                raise ValueError(f"seq {seq} not greater than {self._last_seq}")
            if seq is not None:
                self._last_seq = seq
            handler = {
                "LoadScenario": self._load_scenario,
                "PlaceInstructor": self._place_instructor,
                "PointGesture": self._point_gesture,
                "Utter": self._utter,
                "StepControl": self._step_control,
                "Reset": self._reset,
            }.get(msg["type"])
            if handler is None:
                raise ValueError(f"unknown message type {msg['type']!r}")
            extra = handler(msg) or []
        except (GestureNavError, ValueError, KeyError, TypeError) as exc:
            return [{
                "type": "error", "protocol_version": PROTOCOL_VERSION,
                "seq": seq, "error": type(exc).__name__, "message": str(exc),
            }]
        ack = {"type": "ack", "protocol_version": PROTOCOL_VERSION, "seq": seq}
        return [ack] + extra

    def _require_runner(self) -> EpisodeRunner:
        if self.runner is None:
            raise ValueError("no scenario loaded")
        return self.runner

    def _load_scenario(self, msg):
        if "spec" in msg:
            spec = scenario_from_dict(msg["spec"], name=msg["spec"].get("name", "inline"))
        else:
            path = self.scenario_dir / f"{msg['name']}.json"
            if not path.exists():
                raise ValueError(f"unknown scenario {msg['name']!r}")
            spec = load_scenario(path)
        self.runner = EpisodeRunner(spec, msg.get("seed"))
        self.mode = "pause"
        raw = pgm_bytes(spec.grid)
        digest = hashlib.sha256(raw).hexdigest()
        self.map_digest = {"id": spec.name, "hash": digest}
        self.map_frame = {
            "type": "map",
            "protocol_version": PROTOCOL_VERSION,
            "id": spec.name,
            "hash": digest,
            "resolution": spec.grid.resolution,
            "origin": [spec.grid.origin.x, spec.grid.origin.y, spec.grid.origin.theta],
            "pgm_base64": base64.b64encode(raw).decode(),
        }
        return [self.map_frame]

    def _place_instructor(self, msg):
        runner = self._require_runner()
        runner.world = place_instructor(runner.world, msg["instructor_id"], msg["pose"])

    def _point_gesture(self, msg):
        runner = self._require_runner()
        runner.world = inject_gesture(runner.world, msg["instructor_id"], msg["target"])

    def _utter(self, msg):
        runner = self._require_runner()
        if not msg.get("text"):
            raise ValueError("utterance must be nonempty")
        t = float(msg.get("t", runner.pipe.sim_time))
        runner.push_event(CommandEvent(msg["instructor_id"], msg["text"], t))

    def _step_control(self, msg):
        mode = msg.get("mode")
        if mode in ("play", "pause"):
            self.mode = mode
        elif mode == "step":
            runner = self._require_runner()
            for _ in range(int(msg.get("count", 1))):
                if self.tick():
                    break
        elif mode == "rate":
            self.rate = float(msg["rate"])
            if self.rate <= 0:
                raise ValueError("rate must be positive")
        else:
            raise ValueError(f"unknown StepControl mode {mode!r}")

    def _reset(self, msg):
        runner = self._require_runner()
        self.runner = EpisodeRunner(runner.spec, msg.get("seed", runner.seed))
        self.mode = "pause"

    # -- simulation ---------------------------------------------------------

    def tick(self) -> bool:
        """Advance one simulation step; stores the trace on termination."""
        runner = self._require_runner()
        done = runner.tick()
        if done and runner.report is not None:
            key = f"{runner.spec.name}-{runner.seed}"
            self._trace_store[key] = trace_bytes(runner.pipe.records)
            self.mode = "pause"
        return done

    # -- snapshots ----------------------------------------------------------

    def snapshot(self, since: int = 0) -> dict:
        snap = {
            "type": "snapshot",
            "protocol_version": PROTOCOL_VERSION,
            "playback": {"mode": self.mode, "rate": self.rate},
            "map": self.map_digest,
        }
        if self.runner is None:
            snap["loaded"] = False
            return snap
        runner = self.runner
        pipe = runner.pipe
        world = runner.world
        p = world.robot.pose
        snap.update({
            "loaded": True,
            "scenario": runner.spec.name,
            "seed": runner.seed,
            "sim_time": round(pipe.sim_time, 9),
            "state": pipe.phase.value,
            "reason": pipe.reason.value if pipe.reason else None,
            "stop_reason": pipe.stop_reason,
            "robot": {
                "pose": [p.x, p.y, p.theta],
                "radius": world.robot.radius,
            },
            "path": [[w.x, w.y, w.theta] for w in pipe.path.waypoints]
                    if pipe.path else None,
            "goal": [pipe.goal.x, pipe.goal.y, pipe.goal.theta]
                    if pipe.goal else None,
            "instructors": [
                {"id": i.id, "pose": [i.base.x, i.base.y, i.base.theta]}
                for i in world.instructors
            ],
            "objects": [
                {"id": oid,
                 "bbox": [round(float(v), 3) for v in bbox],
                 "visible_fraction": round(float(vf), 6)}
                for oid, bbox, vf in render_object_boxes(world)
            ],
            "proposals": [
                {"id": prop.object_id, "score": round(prop.score, 6)}
                for prop in pipe.proposals
            ],
            "chosen": pipe.chosen.object_id if pipe.chosen else None,
            "trace_records": pipe.records[since:],
            "trace_length": len(pipe.records),
            "finished": runner.finished,
        })
        if runner.report is not None:
            snap["report"] = runner.report.as_dict()
        return snap


def create_app(scenario_dir, tick_hz: float = 20.0) -> FastAPI:
    app = FastAPI(title="gesturenav service")
    session = Session(Path(scenario_dir))
    clients: set[WebSocket] = set()
    lock = asyncio.Lock()
    app.state.session = session

    @app.get("/scenarios")
    async def scenarios():
        names = sorted(p.stem for p in Path(scenario_dir).glob("*.json"))
        return {"protocol_version": PROTOCOL_VERSION, "scenarios": names}

    @app.get("/traces")
    async def traces():
        return {"protocol_version": PROTOCOL_VERSION,
                "traces": sorted(session._trace_store)}

    @app.get("/traces/{key}")
    async def trace(key: str):
        data = session._trace_store.get(key)
        if data is None:
            return JSONResponse({"error": f"no trace {key!r}"}, status_code=404)
        return Response(content=data, media_type="application/x-ndjson")

    async def broadcast(frame: dict):
        payload = json.dumps(frame)
        for ws in list(clients):
            try:
                await ws.send_text(payload)
            except Exception:
                clients.discard(ws)

    async def play_loop():
        # Paused sessions still broadcast, so late clients see state.
        while True:
            await asyncio.sleep(1.0 / tick_hz)
            async with lock:
                if session.mode == "play" and session.runner is not None:
                    session.tick()
                if clients:
                    await broadcast(session.snapshot())

    @app.on_event("startup")
    async def _start():
        app.state.play_task = asyncio.create_task(play_loop())

    @app.on_event("shutdown")
    async def _stop():
        app.state.play_task.cancel()

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        clients.add(ws)
        try:
            await ws.send_text(json.dumps(session.snapshot()))
            while True:
                raw = await ws.receive_text()
                try:
                    msg = json.loads(raw)
                except json.JSONDecodeError as exc:
                    await ws.send_text(json.dumps({
                        "type": "error", "protocol_version": PROTOCOL_VERSION,
                        "seq": None, "error": "ParseError", "message": str(exc),
                    }))
                    continue
                async with lock:
                    try:
                        frames = session.apply(msg)
                    except ValidationError as exc:
                        frames = [{
                            "type": "error",
                            "protocol_version": PROTOCOL_VERSION,
                            "seq": msg.get("seq"),
                            "error": "ValidationError",
                            "message": "; ".join(exc.violations),
                        }]
                    for frame in frames:
                        await ws.send_text(json.dumps(frame))
                    await ws.send_text(json.dumps(session.snapshot()))
        except WebSocketDisconnect:
            pass
        finally:
            clients.discard(ws)

    return app
