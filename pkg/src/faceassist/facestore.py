"""Enrolment database: person records, face images on disk, LFU capacity
capping and encrypted-at-rest identity fields.

Layout on disk is a directory with ``manifest.json`` plus ``faces/*.pgm``.
Display names and notes are encrypted with AES-256-GCM; the key is the
SHA-256 digest of the passphrase found in a configurable environment
variable.  Manifest writes go through a temp file and an atomic rename.
"""

from __future__ import annotations

import base64
import hashlib
import json
import os
import uuid
from dataclasses import dataclass, replace
from pathlib import Path

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from .imaging import GrayImage, load_pgm, save_pgm
from .lbph import LbpParams, RecognizerModel, train

CIPHER_NAME = "aes-256-gcm"
MANIFEST_NAME = "manifest.json"
FACES_DIR = "faces"


class StoreError(Exception):
    """Base class for face store failures."""


class UnknownPersonError(StoreError):
    def __init__(self, person_id: str):
        super().__init__(f"no person with id {person_id!r}")
        self.person_id = person_id


class StoreKeyError(StoreError):
    """The configured key environment variable is unset."""


class StoreAuthError(StoreError):
    """Ciphertext failed authentication (wrong key or tampering)."""


class StoreIntegrityError(StoreError):
    """Manifest and on-disk files disagree."""


@dataclass(frozen=True)
class StoreConfig:
    root_directory: Path
    capacity: int = 10
    encryption_key_source: str = "FACESTORE_KEY"

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError("capacity must be >= 1")
        object.__setattr__(self, "root_directory", Path(self.root_directory))


@dataclass(frozen=True)
class PersonRecord:
    id: str
    display_name: str
    notes: str
    face_image_refs: tuple[str, ...]
    usage_count: int
    created_at: int  # ms since epoch, UTC
    last_used_at: int

    def __post_init__(self):
        if not self.face_image_refs:
            raise ValueError("a person record needs at least one face image")
        if self.usage_count < 0:
            raise ValueError("usage count must be >= 0")
        if self.last_used_at < self.created_at:
            raise ValueError("last_used_at precedes created_at")


def eviction_key(record: PersonRecord) -> tuple:
    """Total order used to pick eviction victims: lowest usage first, then
    least recently used, then oldest, then smallest id."""
    return (record.usage_count, record.last_used_at, record.created_at, record.id)


def _derive_key(passphrase: str) -> bytes:
    return hashlib.sha256(passphrase.encode("utf-8")).digest()


def _encrypt_field(key: bytes, plaintext: str) -> dict:
    nonce = os.urandom(12)
    data = AESGCM(key).encrypt(nonce, plaintext.encode("utf-8"), None)
    return {
        "cipher": CIPHER_NAME,
        "nonce": base64.b64encode(nonce).decode("ascii"),
        "data": base64.b64encode(data).decode("ascii"),
    }


def _decrypt_field(key: bytes, blob: dict) -> str:
    if blob.get("cipher") != CIPHER_NAME:
        raise StoreIntegrityError(f"unsupported cipher {blob.get('cipher')!r}")
    try:
        nonce = base64.b64decode(blob["nonce"])
        data = base64.b64decode(blob["data"])
    except (KeyError, ValueError) as exc:
        raise StoreIntegrityError(f"malformed encrypted field: {exc!r}") from None
    try:
        return AESGCM(key).decrypt(nonce, data, None).decode("utf-8")
    except InvalidTag:
        raise StoreAuthError(
            "field decryption failed authentication; wrong key or corrupt manifest"
        ) from None


class FaceStore:
    """Single-writer persistent store of enrolled persons.

    Every mutation rewrites the manifest atomically before returning; the
    ``revision`` counter lets callers cache derived state (recognizers).
    """

    def __init__(self, config: StoreConfig):
        self.config = config
        self.revision = 0
        self._records: dict[str, PersonRecord] = {}

    # -- paths ------------------------------------------------------------
    @property
    def root(self) -> Path:
        return self.config.root_directory

    @property
    def manifest_path(self) -> Path:
        return self.root / MANIFEST_NAME

    @property
    def faces_dir(self) -> Path:
        return self.root / FACES_DIR

    def _face_path(self, ref: str) -> Path:
        return self.faces_dir / ref

    # -- construction -----------------------------------------------------
    @classmethod
    def open(cls, config: StoreConfig) -> "FaceStore":
        """Load the store from disk, creating an empty one if absent."""
        store = cls(config)
        store.root.mkdir(parents=True, exist_ok=True)
        store.faces_dir.mkdir(exist_ok=True)
        if store.manifest_path.exists():
            store._load_manifest()
        else:
            store._persist()
        return store

    def _key(self) -> bytes:
        passphrase = os.environ.get(self.config.encryption_key_source)
        if passphrase is None:
            raise StoreKeyError(
                f"environment variable {self.config.encryption_key_source!r} "
                "holds the store key and is not set"
            )
        return _derive_key(passphrase)

    def _load_manifest(self):
        try:
            doc = json.loads(self.manifest_path.read_bytes())
        except (OSError, json.JSONDecodeError) as exc:
            raise StoreIntegrityError(f"unreadable manifest: {exc}") from None
        persons = doc.get("persons", [])
        key = self._key() if persons else None
        records: dict[str, PersonRecord] = {}
        for p in persons:
            try:
                record = PersonRecord(
                    id=str(p["id"]),
                    display_name=_decrypt_field(key, p["displayName"]),
                    notes=_decrypt_field(key, p["notes"]),
                    face_image_refs=tuple(p["faceImages"]),
                    usage_count=int(p["usageCount"]),
                    created_at=int(p["createdAt"]),
                    last_used_at=int(p["lastUsedAt"]),
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise StoreIntegrityError(f"malformed manifest entry: {exc!r}") from None
            for ref in record.face_image_refs:
                if not self._face_path(ref).is_file():
                    raise StoreIntegrityError(
                        f"manifest references missing face image {ref!r}"
                    )
            records[record.id] = record
        self._records = records

    def _persist(self):
        key = self._key() if self._records else None
        persons = []
        for record in sorted(self._records.values(), key=lambda r: r.id):
            persons.append(
                {
                    "id": record.id,
                    "displayName": _encrypt_field(key, record.display_name),
                    "notes": _encrypt_field(key, record.notes),
                    "faceImages": list(record.face_image_refs),
                    "usageCount": record.usage_count,
                    "createdAt": record.created_at,
                    "lastUsedAt": record.last_used_at,
                }
            )
        doc = {"version": 1, "capacity": self.config.capacity, "persons": persons}
        tmp = self.manifest_path.with_name(MANIFEST_NAME + ".tmp")
        tmp.write_bytes(json.dumps(doc, indent=2).encode("utf-8"))
        os.replace(tmp, self.manifest_path)
        self.revision += 1

    # -- queries ------------------------------------------------------------
    def records(self) -> list[PersonRecord]:
        """All records, ascending id."""
        return [self._records[i] for i in sorted(self._records)]

    def get(self, person_id: str) -> PersonRecord:
        try:
            return self._records[person_id]
        except KeyError:
            raise UnknownPersonError(person_id) from None

    def __len__(self) -> int:
        return len(self._records)

    def load_face(self, ref: str) -> GrayImage:
        path = self._face_path(ref)
        try:
            return load_pgm(path.read_bytes())
        except OSError as exc:
            raise StoreIntegrityError(f"cannot read face image {ref!r}: {exc}") from None

    # -- mutations ----------------------------------------------------------
    def enroll(self, display_name: str, notes: str, face: GrayImage, now: int) -> PersonRecord:
        """Add a person; evicts the least-retained record when at capacity."""
        if not display_name:
            raise ValueError("display name must not be empty")
        self._key()  # fail before touching disk if no key is configured
        if len(self._records) >= self.config.capacity:
            victim = min(self._records.values(), key=eviction_key)
            self._remove_files(victim)
            del self._records[victim.id]
        person_id = uuid.uuid4().hex
        ref = f"{person_id}.pgm"
        self._face_path(ref).write_bytes(save_pgm(face))
        record = PersonRecord(
            id=person_id,
            display_name=display_name,
            notes=notes,
            face_image_refs=(ref,),
            usage_count=0,
            created_at=now,
            last_used_at=now,
        )
        self._records[person_id] = record
        self._persist()
        return record

    def record_usage(self, person_id: str, now: int) -> PersonRecord:
        """Count one identification of a person and bump recency."""
        record = self.get(person_id)
        record = replace(
            record, usage_count=record.usage_count + 1, last_used_at=now
        )
        self._records[person_id] = record
        self._persist()
        return record

    def delete_person(self, person_id: str):
        record = self.get(person_id)
        self._remove_files(record)
        del self._records[person_id]
        self._persist()

    def _remove_files(self, record: PersonRecord):
        for ref in record.face_image_refs:
            try:
                self._face_path(ref).unlink()
            except FileNotFoundError:
                pass

    # -- derived ------------------------------------------------------------
    def build_recognizer(self, params: LbpParams | None = None) -> RecognizerModel:
        """Train an LBPH recognizer over every stored face, ascending id."""
        if not self._records:
            raise StoreError("cannot build a recognizer from an empty store")
        faces = []
        for record in self.records():
            for ref in record.face_image_refs:
                faces.append((self.load_face(ref), record.id))
        return train(faces, params)


def load_store(config: StoreConfig) -> FaceStore:
    """Open (or initialize) the store at ``config.root_directory``."""
    return FaceStore.open(config)
