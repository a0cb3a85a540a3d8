"""HTTP client for offloading identification to a support server."""

from __future__ import annotations

import base64

import httpx

from .imaging import GrayImage, save_pgm
from .pipeline import RemoteIdentity, TransportError


def image_payload(img: GrayImage) -> dict:
    return {
        "encoding": "pgm+base64",
        "data": base64.b64encode(save_pgm(img)).decode("ascii"),
    }


class HttpIdentifyClient:
    """Talks to the /api/v1 endpoints of a support server."""

    def __init__(self, endpoint: str, timeout_ms: int = 3000, client: httpx.Client | None = None):
        self.endpoint = endpoint.rstrip("/")
        self._client = client or httpx.Client(timeout=timeout_ms / 1000.0)

    def identify(self, face: GrayImage) -> RemoteIdentity:
        try:
            resp = self._client.post(
                f"{self.endpoint}/api/v1/identify",
                json={"image": image_payload(face)},
            )
            resp.raise_for_status()
            body = resp.json()
        except (httpx.HTTPError, ValueError) as exc:
            raise TransportError(f"identify request failed: {exc}") from exc
        match = body.get("match")
        if match:
            return RemoteIdentity(
                person_id=match.get("personId"),
                display_name=match.get("displayName"),
                distance=match.get("distance"),
            )
        return RemoteIdentity(None, None, body.get("distance"))

    def enroll(self, display_name: str, notes: str, face: GrayImage) -> str:
        try:
            resp = self._client.post(
                f"{self.endpoint}/api/v1/enroll",
                json={
                    "displayName": display_name,
                    "notes": notes,
                    "image": image_payload(face),
                },
            )
            resp.raise_for_status()
            return resp.json()["personId"]
        except (httpx.HTTPError, ValueError, KeyError) as exc:
            raise TransportError(f"enroll request failed: {exc}") from exc

    def close(self):
        self._client.close()
