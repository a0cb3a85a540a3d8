"""Support server and console service: identify/enrol/sync plus the
pipeline-hosting endpoints and the server-sent event feed.

One FastAPI app carries both endpoint groups; all store and pipeline
mutations are serialized behind a single lock, and every pipeline event is
fanned out to SSE subscribers in order (late subscribers first receive the
retained history).
"""

from __future__ import annotations

import base64
import binascii
import json
import queue
import threading
import time
from collections import deque
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles

from . import facestore as fs
from .cascade import detect
from .imaging import GrayImage, PgmError, PgmTruncatedError, load_pgm, save_pgm
from .lbph import RecognizerModel, predict
from .pipeline import (
    ConfigurationError,
    EventKind,
    Pipeline,
    PipelineMode,
    StateError,
)

EVENT_HISTORY_LIMIT = 1000


def now_ms() -> int:
    return int(time.time() * 1000)


class ApiError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status
        self.message = message


class EventBus:
    """Fan-out of pipeline events to any number of SSE subscribers."""

    def __init__(self, history_limit: int = EVENT_HISTORY_LIMIT):
        self._lock = threading.Lock()
        self._subscribers: list[queue.SimpleQueue] = []
        self._history: deque[dict] = deque(maxlen=history_limit)

    def publish(self, event_wire: dict):
        with self._lock:
            self._history.append(event_wire)
            for q in self._subscribers:
                q.put(event_wire)

    def attach(self, q: queue.SimpleQueue) -> list[dict]:
        """Register a live subscriber; returns the retained history."""
        with self._lock:
            self._subscribers.append(q)
            return list(self._history)

    def detach(self, q: queue.SimpleQueue):
        with self._lock:
            try:
                self._subscribers.remove(q)
            except ValueError:
                pass


def decode_api_image(obj) -> GrayImage:
    """Decode an ApiImage body into a GrayImage, mapping failures to HTTP
    statuses: malformed base64/PGM -> 400, truncated pixel payload -> 422."""
    if not isinstance(obj, dict):
        raise ApiError(400, "image must be an object with encoding and data")
    if obj.get("encoding") != "pgm+base64":
        raise ApiError(400, f"unsupported image encoding {obj.get('encoding')!r}")
    data = obj.get("data")
    if not isinstance(data, str):
        raise ApiError(400, "image data must be a base64 string")
    try:
        raw = base64.b64decode(data, validate=True)
    except (binascii.Error, ValueError):
        raise ApiError(400, "invalid base64 image data") from None
    try:
        return load_pgm(raw)
    except PgmTruncatedError as exc:
        raise ApiError(422, f"undecodable image: {exc}") from None
    except PgmError as exc:
        raise ApiError(400, f"malformed PGM: {exc}") from None


def encode_api_image(img: GrayImage) -> dict:
    return {
        "encoding": "pgm+base64",
        "data": base64.b64encode(save_pgm(img)).decode("ascii"),
    }


def create_app(
    store: fs.FaceStore,
    pipeline: Pipeline,
    clock=now_ms,
    console_dir: Path | None = None,
    sse_poll_s: float = 15.0,
) -> FastAPI:
    app = FastAPI(title="faceassist support server")
    lock = threading.Lock()
    bus = EventBus()
    recognizer_cache: dict = {"revision": None, "model": None}

    def recognizer() -> RecognizerModel | None:
        if len(store) == 0:
            return None
        if recognizer_cache["revision"] != store.revision:
            recognizer_cache["model"] = store.build_recognizer(pipeline.config.lbp_params)
            recognizer_cache["revision"] = store.revision
        return recognizer_cache["model"]

    def publish_all(events):
        for ev in events:
            bus.publish(ev.to_wire())

    @app.exception_handler(ApiError)
    async def handle_api_error(request: Request, exc: ApiError):
        return JSONResponse({"error": exc.message}, status_code=exc.status)

    async def read_json(request: Request) -> dict:
        try:
            body = await request.json()
        except (json.JSONDecodeError, UnicodeDecodeError):
            raise ApiError(400, "request body is not valid JSON") from None
        if not isinstance(body, dict):
            raise ApiError(400, "request body must be a JSON object")
        return body

    # -- support server group -----------------------------------------------
    @app.post("/api/v1/identify")
    async def identify(request: Request):
        body = await read_json(request)
        img = decode_api_image(body.get("image"))
        with lock:
            model = recognizer()
            if model is None:
                return {"match": None, "distance": None}
            result = predict(model, img)
            if result.is_known:
                record = store.record_usage(result.label, clock())
                return {
                    "match": {
                        "personId": record.id,
                        "displayName": record.display_name,
                        "distance": result.distance,
                    },
                    "distance": result.distance,
                }
            return {"match": None, "distance": result.distance}

    @app.post("/api/v1/enroll", status_code=201)
    async def enroll(request: Request):
        body = await read_json(request)
        name = body.get("displayName")
        if not isinstance(name, str) or not name:
            raise ApiError(400, "displayName must be a non-empty string")
        notes = body.get("notes") or ""
        if not isinstance(notes, str):
            raise ApiError(400, "notes must be a string")
        try:
            img = decode_api_image(body.get("image"))
        except ApiError as exc:
            raise ApiError(400, exc.message) from None  # enroll reports 400 for any bad image
        with lock:
            record = store.enroll(name, notes, img, clock())
        return {"personId": record.id}

    @app.get("/api/v1/sync")
    async def sync(limit: int | None = None):
        with lock:
            if limit is None:
                limit = store.config.capacity
            if limit < 1:
                raise ApiError(400, "limit must be >= 1")
            ranked = sorted(store.records(), key=fs.eviction_key, reverse=True)
            persons = []
            for record in ranked[:limit]:
                persons.append(
                    {
                        "personId": record.id,
                        "displayName": record.display_name,
                        "notes": record.notes,
                        "usageCount": record.usage_count,
                        "faces": [
                            encode_api_image(store.load_face(ref))
                            for ref in record.face_image_refs
                        ],
                    }
                )
        return {"persons": persons}

    # -- console service group ------------------------------------------------
    @app.post("/api/v1/detect")
    async def detect_endpoint(request: Request):
        body = await read_json(request)
        img = decode_api_image(body.get("image"))
        try:
            boxes = detect(pipeline.cascade, img, pipeline.config.detect_params)
        except ValueError as exc:
            raise ApiError(400, str(exc)) from None
        return {"boxes": [{"x": b.x, "y": b.y, "w": b.w, "h": b.h} for b in boxes]}

    @app.get("/api/v1/state")
    async def get_state():
        return {"mode": pipeline.mode.value}

    @app.post("/api/v1/state")
    async def set_state(request: Request):
        body = await read_json(request)
        try:
            mode = PipelineMode(body.get("mode"))
        except ValueError:
            raise ApiError(400, f"unknown mode {body.get('mode')!r}") from None
        with lock:
            event = pipeline.set_mode(mode, clock())
        publish_all([event])
        return event.to_wire()

    @app.post("/api/v1/frame")
    async def frame(request: Request):
        body = await read_json(request)
        img = decode_api_image(body.get("image"))
        with lock:
            try:
                events = pipeline.process_frame(img, clock())
            except ConfigurationError as exc:
                raise ApiError(409, str(exc)) from None
            except ValueError as exc:
                raise ApiError(400, str(exc)) from None
        publish_all(events)
        return [e.to_wire() for e in events]

    @app.post("/api/v1/enrolment/complete")
    async def complete_enrolment(request: Request):
        body = await read_json(request)
        temp_ref = body.get("tempRef")
        name = body.get("displayName")
        notes = body.get("notes") or ""
        if not isinstance(temp_ref, str):
            raise ApiError(400, "tempRef must be a string")
        if not isinstance(name, str) or not name:
            raise ApiError(400, "displayName must be a non-empty string")
        with lock:
            try:
                event = pipeline.complete_enrolment(temp_ref, name, notes, clock())
            except StateError as exc:
                raise ApiError(409, str(exc)) from None
            except (ValueError, ConfigurationError) as exc:
                raise ApiError(400, str(exc)) from None
        publish_all([event])
        if event.kind == EventKind.ERROR:
            return JSONResponse(event.to_wire(), status_code=400)
        return event.to_wire()

    @app.get("/api/v1/events")
    async def events(limit: int | None = None):
        # ``limit`` ends the stream after that many events; without it the
        # stream runs until the client disconnects.
        q: queue.SimpleQueue = queue.SimpleQueue()

        def stream():
            history = bus.attach(q)
            sent = 0
            try:
                for wire in history:
                    yield f"data: {json.dumps(wire)}\n\n"
                    sent += 1
                    if limit is not None and sent >= limit:
                        return
                while True:
                    try:
                        wire = q.get(timeout=sse_poll_s)
                    except queue.Empty:
                        yield ": keep-alive\n\n"
                        continue
                    yield f"data: {json.dumps(wire)}\n\n"
                    sent += 1
                    if limit is not None and sent >= limit:
                        return
            finally:
                bus.detach(q)

        return StreamingResponse(stream(), media_type="text/event-stream")

    @app.get("/health")
    async def health():
        return PlainTextResponse("ok")

    if console_dir is not None:
        app.mount("/", StaticFiles(directory=console_dir, html=True), name="console")

    return app
