"""Thin client for the simulation service.

By default requests run in-process against the ASGI app (no server or
network needed); pass ``base_url`` to talk to a remote instance instead.
HTTP error codes map back onto the package's exception types so callers
see the same errors either way.
"""

from __future__ import annotations

from typing import Optional

import httpx

from .errors import ConfigError, DomainError, MetarelayError
from .schemas import (
    BeamRequest,
    BeamResponse,
    BudgetRequest,
    BudgetResponse,
    HealthResponse,
    LutRequest,
    LutResponse,
    PatternRequest,
    PatternResponse,
    ProtocolRequest,
    ProtocolResponse,
    ScenarioRequest,
    ScenarioResponse,
    SelftestRequest,
    SelftestResponse,
)


class ServiceClient:
    def __init__(self, base_url: Optional[str] = None, timeout: float = 600.0) -> None:
        if base_url is None:
            from starlette.testclient import TestClient

            from .service import app

            self._client = TestClient(app, raise_server_exceptions=False)
        else:
            self._client = httpx.Client(base_url=base_url, timeout=timeout)

    def close(self) -> None:
        self._client.close()

    def __enter__(self) -> "ServiceClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _post(self, path: str, payload, response_model):
        response = self._client.post(path, json=payload.model_dump(mode="json"))
        if response.status_code == 400:
            raise ConfigError(response.json().get("detail", response.text))
        if response.status_code == 422:
            raise DomainError(response.json().get("detail", response.text))
        if response.status_code != 200:
            raise MetarelayError(f"service error {response.status_code}: {response.text}")
        return response_model.model_validate(response.json())

    def health(self) -> HealthResponse:
        response = self._client.get("/v1/health")
        response.raise_for_status()
        return HealthResponse.model_validate(response.json())

    def pattern(self, request: PatternRequest) -> PatternResponse:
        return self._post("/v1/pattern", request, PatternResponse)

    def lut(self, request: LutRequest) -> LutResponse:
        return self._post("/v1/lut", request, LutResponse)

    def beam(self, request: BeamRequest) -> BeamResponse:
        return self._post("/v1/beam", request, BeamResponse)

    def budget(self, request: BudgetRequest) -> BudgetResponse:
        return self._post("/v1/budget", request, BudgetResponse)

    def scenario(self, request: ScenarioRequest) -> ScenarioResponse:
        return self._post("/v1/scenario", request, ScenarioResponse)

    def protocol(self, request: ProtocolRequest) -> ProtocolResponse:
        return self._post("/v1/protocol", request, ProtocolResponse)

    def selftest(self, request: SelftestRequest) -> SelftestResponse:
        return self._post("/v1/selftest", request, SelftestResponse)
