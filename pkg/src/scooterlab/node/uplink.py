"""Uplink protocol from node agents to the fleet controller.

Two implementations: ``HttpUplink`` speaks the real HTTP surface, and
``DirectUplink`` calls an in-process controller through the same canonical
JSON bodies (the simulator's default, byte-for-byte equivalent on the wire).

Calls return dicts: ``{"ok": True, ...}`` on success or
``{"ok": False, "code": ..., "message": ...}`` for server-side rejections.
Transport-level failures raise ``UplinkUnavailable``.
"""

from __future__ import annotations

import json
from typing import Optional

import httpx

from ..core.errors import DomainError


class UplinkUnavailable(Exception):
    """The controller could not be reached; try again next sync."""


class HttpUplink:
    def __init__(self, base_url: str, token: str, client: Optional[httpx.Client] = None, timeout: float = 10.0):
        self.base_url = base_url.rstrip("/")
        self.token = token
        self._client = client or httpx.Client(timeout=timeout)

    def _headers(self) -> dict:
        return {"Authorization": f"Bearer {self.token}"}

    def _request(self, method: str, path: str, **kw) -> httpx.Response:
        headers = {**self._headers(), **kw.pop("headers", {})}
        try:
            return self._client.request(method, self.base_url + path, headers=headers, **kw)
        except httpx.HTTPError as e:
            raise UplinkUnavailable(str(e))

    @staticmethod
    def _result(resp: httpx.Response) -> dict:
        if resp.status_code >= 500:
            raise UplinkUnavailable(f"server error {resp.status_code}")
        body = resp.json() if resp.content else {}
        if 200 <= resp.status_code < 300:
            return {"ok": True, **body}
        return {"ok": False, "code": body.get("code", "error"), "message": body.get("message", "")}

    def put_chunk(self, scooter_id: str, trip_id: str, seq: int, chunk_line: str) -> dict:
        resp = self._request(
            "PUT",
            f"/v1/chunks/{scooter_id}/{trip_id}/{seq}",
            content=chunk_line.encode("utf-8"),
            headers={"Content-Type": "application/json"},
        )
        return self._result(resp)

    def finalize_trip(self, scooter_id: str, trip_id: str, chunk_count: int) -> dict:
        resp = self._request("POST", f"/v1/trips/{scooter_id}/{trip_id}/finalize", json={"chunk_count": chunk_count})
        return self._result(resp)

    def get_config(self, scooter_id: str, current_version: int, battery_pct: Optional[float] = None) -> dict:
        params = {"current": current_version}
        if battery_pct is not None:
            params["battery"] = battery_pct
        resp = self._request("GET", f"/v1/config/{scooter_id}", params=params)
        if resp.status_code == 204:
            return {"ok": True, "config": None}
        if resp.status_code == 200:
            return {"ok": True, "config": resp.json()}
        return self._result(resp)

    def get_battery(self, scooter_id: str) -> dict:
        return self._result(self._request("GET", f"/v1/scooters/{scooter_id}/battery"))

    def close(self) -> None:
        self._client.close()


class DirectUplink:
    """In-process uplink wrapping a FleetController instance.

    Chunk bodies still round-trip through their canonical JSON encoding so
    the exercised path matches the HTTP one.
    """

    def __init__(self, controller, token: str):
        self.controller = controller
        self.token = token

    def put_chunk(self, scooter_id: str, trip_id: str, seq: int, chunk_line: str) -> dict:
        try:
            ack = self.controller.receive_chunk_json(json.loads(chunk_line), self.token)
            return {"ok": True, **ack}
        except DomainError as e:
            return {"ok": False, "code": e.code, "message": e.message}

    def finalize_trip(self, scooter_id: str, trip_id: str, chunk_count: int) -> dict:
        try:
            outcome = self.controller.finalize_trip(scooter_id, trip_id, chunk_count, self.token)
            return {"ok": True, **outcome}
        except DomainError as e:
            return {"ok": False, "code": e.code, "message": e.message}

    def get_config(self, scooter_id: str, current_version: int, battery_pct: Optional[float] = None) -> dict:
        try:
            cfg = self.controller.get_config(scooter_id, current_version, self.token, battery_pct=battery_pct)
            return {"ok": True, "config": cfg}
        except DomainError as e:
            return {"ok": False, "code": e.code, "message": e.message}

    def get_battery(self, scooter_id: str) -> dict:
        try:
            return {"ok": True, **self.controller.battery_of(scooter_id)}
        except DomainError as e:
            return {"ok": False, "code": e.code, "message": e.message}


class FlakyUplink:
    """Test wrapper that injects transport failures after N successful calls."""

    def __init__(self, inner, fail_after: int):
        self.inner = inner
        self.remaining = fail_after

    def _guard(self):
        if self.remaining <= 0:
            raise UplinkUnavailable("injected link failure")
        self.remaining -= 1

    def put_chunk(self, *a, **kw):
        self._guard()
        return self.inner.put_chunk(*a, **kw)

    def finalize_trip(self, *a, **kw):
        self._guard()
        return self.inner.finalize_trip(*a, **kw)

    def get_config(self, *a, **kw):
        self._guard()
        return self.inner.get_config(*a, **kw)

    def get_battery(self, *a, **kw):
        self._guard()
        return self.inner.get_battery(*a, **kw)
