"""Frame-processing state machine: offline/online routing, detection
cooldown, enrolment capture, and the feedback-event stream.

The pipeline is a pure consumer of (frame, now) pairs; the host supplies
frames and timestamps, which keeps every behaviour reproducible with a
synthetic clock.
"""

from __future__ import annotations

import enum
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol

from .cascade import CascadeModel, DetectParams, detect
from .facestore import FaceStore
from .imaging import GrayImage, crop, load_pgm, save_pgm
from .lbph import LbpParams, RecognizerModel, predict


class PipelineMode(str, enum.Enum):
    OFFLINE = "offline"
    ONLINE = "online"
    ENROLMENT = "enrolment"


class EventKind(str, enum.Enum):
    FACE_DETECTED = "FaceDetected"
    PERSON_IDENTIFIED = "PersonIdentified"
    UNKNOWN_PERSON = "UnknownPerson"
    ENROLMENT_CAPTURED = "EnrolmentCaptured"
    STATE_CHANGED = "StateChanged"
    ERROR = "Error"


@dataclass(frozen=True)
class PipelineEvent:
    kind: EventKind
    at: int  # ms since epoch
    data: dict

    def to_wire(self) -> dict:
        return {"kind": self.kind.value, "at": self.at, **self.data}


@dataclass(frozen=True)
class PipelineConfig:
    cooldown_ms: int = 2000
    detect_params: DetectParams = field(default_factory=DetectParams)
    lbp_params: LbpParams = field(default_factory=LbpParams)
    server_endpoint: str | None = None
    online_fallback: bool = True
    request_timeout_ms: int = 3000

    def __post_init__(self):
        if self.cooldown_ms < 0:
            raise ValueError("cooldown_ms must be >= 0")


class ConfigurationError(RuntimeError):
    """The current mode needs a collaborator the pipeline was not given."""


class StateError(RuntimeError):
    """Operation not allowed in the current pipeline mode."""


class TransportError(RuntimeError):
    """The remote identify service could not be reached."""


@dataclass(frozen=True)
class RemoteIdentity:
    """Outcome of a server-side identification."""

    person_id: str | None
    display_name: str | None
    distance: float | None

    @property
    def matched(self) -> bool:
        return self.person_id is not None


class IdentifyClient(Protocol):
    def identify(self, face: GrayImage) -> RemoteIdentity: ...


class Pipeline:
    """Serialized per-instance frame processor emitting feedback events."""

    def __init__(
        self,
        cascade: CascadeModel,
        config: PipelineConfig,
        temp_dir: Path,
        store: FaceStore | None = None,
        server_client: IdentifyClient | None = None,
    ):
        self.cascade = cascade
        self.config = config
        self.temp_dir = Path(temp_dir)
        self.temp_dir.mkdir(parents=True, exist_ok=True)
        self.store = store
        self.server_client = server_client
        self.mode = PipelineMode.OFFLINE
        self.last_detection_at: int | None = None
        self._pending_ref: str | None = None
        self._recognizer: RecognizerModel | None = None
        self._recognizer_revision: int | None = None

    # -- internals ----------------------------------------------------------
    def _recognizer_model(self) -> RecognizerModel | None:
        """Store-backed recognizer, rebuilt when the store has changed."""
        if self.store is None or len(self.store) == 0:
            return None
        if self._recognizer is None or self._recognizer_revision != self.store.revision:
            self._recognizer = self.store.build_recognizer(self.config.lbp_params)
            self._recognizer_revision = self.store.revision
        return self._recognizer

    def _write_temp(self, face: GrayImage) -> str:
        ref = uuid.uuid4().hex + ".pgm"
        (self.temp_dir / ref).write_bytes(save_pgm(face))
        return ref

    def _delete_temp(self, ref: str | None):
        if ref is None:
            return
        try:
            (self.temp_dir / ref).unlink()
        except FileNotFoundError:
            pass

    def _clear_pending(self):
        self._delete_temp(self._pending_ref)
        self._pending_ref = None

    def _identify_locally(self, face: GrayImage, now: int) -> PipelineEvent:
        model = self._recognizer_model()
        if model is None:
            # Store configured but empty: nobody to match against.
            return PipelineEvent(EventKind.UNKNOWN_PERSON, now, {"distance": None})
        result = predict(model, face)
        if result.is_known:
            record = self.store.record_usage(result.label, now)
            return PipelineEvent(
                EventKind.PERSON_IDENTIFIED,
                now,
                {
                    "personId": record.id,
                    "displayName": record.display_name,
                    "distance": result.distance,
                    "via": "local",
                },
            )
        return PipelineEvent(EventKind.UNKNOWN_PERSON, now, {"distance": result.distance})

    # -- operations -----------------------------------------------------------
    def process_frame(self, frame: GrayImage, now: int) -> list[PipelineEvent]:
        """Detect at most one face in the frame and route it by mode."""
        if self.mode == PipelineMode.OFFLINE and self.store is None:
            raise ConfigurationError("offline mode needs a face store")
        if self.mode == PipelineMode.ONLINE and self.server_client is None:
            raise ConfigurationError("online mode needs a server client")
        if self.mode == PipelineMode.ENROLMENT and self.store is None and self.server_client is None:
            raise ConfigurationError("enrolment mode needs a store or a server client")

        if (
            self.last_detection_at is not None
            and now - self.last_detection_at < self.config.cooldown_ms
        ):
            return []

        boxes = detect(self.cascade, frame, self.config.detect_params)
        if not boxes:
            return []
        box = boxes[0]  # detect orders by area desc, then topmost/leftmost
        self.last_detection_at = now
        events = [
            PipelineEvent(
                EventKind.FACE_DETECTED,
                now,
                {"box": {"x": box.x, "y": box.y, "w": box.w, "h": box.h}},
            )
        ]
        face = crop(frame, box)
        temp_ref = self._write_temp(face)

        if self.mode == PipelineMode.ENROLMENT:
            self._clear_pending()
            self._pending_ref = temp_ref
            events.append(
                PipelineEvent(EventKind.ENROLMENT_CAPTURED, now, {"tempImageRef": temp_ref})
            )
            return events

        try:
            if self.mode == PipelineMode.OFFLINE:
                events.append(self._identify_locally(face, now))
            else:  # online
                try:
                    remote = self.server_client.identify(face)
                except TransportError as exc:
                    if self.config.online_fallback and self.store is not None:
                        events.append(self._identify_locally(face, now))
                    else:
                        events.append(
                            PipelineEvent(EventKind.ERROR, now, {"message": str(exc)})
                        )
                else:
                    if remote.matched:
                        events.append(
                            PipelineEvent(
                                EventKind.PERSON_IDENTIFIED,
                                now,
                                {
                                    "personId": remote.person_id,
                                    "displayName": remote.display_name,
                                    "distance": remote.distance,
                                    "via": "server",
                                },
                            )
                        )
                    else:
                        events.append(
                            PipelineEvent(
                                EventKind.UNKNOWN_PERSON, now, {"distance": remote.distance}
                            )
                        )
        finally:
            # Privacy: the capture never outlives the identification attempt.
            self._delete_temp(temp_ref)
        return events

    def set_mode(self, mode: PipelineMode, now: int) -> PipelineEvent:
        """Switch operating mode; any pending enrolment capture is discarded."""
        previous = self.mode
        self._clear_pending()
        self.mode = mode
        return PipelineEvent(
            EventKind.STATE_CHANGED,
            now,
            {"from": previous.value, "to": mode.value},
        )

    def complete_enrolment(
        self, temp_ref: str, display_name: str, notes: str, now: int
    ) -> PipelineEvent:
        """Persist the pending capture with the entered details."""
        if self.mode != PipelineMode.ENROLMENT:
            raise StateError("enrolment can only be completed in enrolment mode")
        if not display_name:
            raise ValueError("display name must not be empty")
        if temp_ref != self._pending_ref or self._pending_ref is None:
            return PipelineEvent(
                EventKind.ERROR,
                now,
                {"message": f"unknown or stale capture reference {temp_ref!r}"},
            )
        face = load_pgm((self.temp_dir / self._pending_ref).read_bytes())
        if self.store is not None:
            record = self.store.enroll(display_name, notes, face, now)
            person_id = record.id
        elif self.server_client is not None and hasattr(self.server_client, "enroll"):
            person_id = self.server_client.enroll(display_name, notes, face)
        else:
            raise ConfigurationError("enrolment needs a store or an enrol-capable client")
        self._clear_pending()
        return PipelineEvent(
            EventKind.PERSON_IDENTIFIED,
            now,
            {
                "personId": person_id,
                "displayName": display_name,
                "distance": 0.0,
                "via": "local" if self.store is not None else "server",
            },
        )

    def check_connectivity(
        self, probe: Callable[[], bool], now: int
    ) -> PipelineEvent | None:
        """Flip between offline and online based on a reachability probe."""
        if self.mode == PipelineMode.ENROLMENT:
            raise StateError("connectivity checks are suspended during enrolment")
        reachable = bool(probe())
        if reachable and self.mode == PipelineMode.OFFLINE:
            return self.set_mode(PipelineMode.ONLINE, now)
        if not reachable and self.mode == PipelineMode.ONLINE:
            return self.set_mode(PipelineMode.OFFLINE, now)
        return None

    @property
    def pending_enrolment_ref(self) -> str | None:
        return self._pending_ref
