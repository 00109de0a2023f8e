"""Pydantic request/response envelopes for the HTTP service.

Embedded documents (profile DBs, ACGs, speedup profiles, sample rows) stay
as raw JSON objects here; the core parsers in :mod:`meshinsight.io` validate
them so there is a single source of truth for the file schemas.
"""

from __future__ import annotations

from typing import Any

from pydantic import BaseModel, ConfigDict, Field


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class FitRequest(_Strict):
    platform_id: str
    platform_description: str = ""
    split_threshold_bytes: int = 4096
    samples: list[dict[str, Any]]


class FitSummaryEntry(_Strict):
    component: str
    proxy_mode: str
    latency_base_us: float
    latency_per_byte_us: float
    cpu_base_s: float
    cpu_per_byte_s: float
    latency_residual_max_us: float
    cpu_residual_max_cores: float | None
    sample_count: int


class FitResponse(_Strict):
    db: dict[str, Any]
    summary: list[FitSummaryEntry]
    warnings: list[str]


class EnsembleMemberDoc(_Strict):
    acg: dict[str, Any]
    probability: float


class TraceRequest(_Strict):
    csv: str
    size_bytes: float = 100.0
    rate_rps: float = 30000.0
    mode: str = "tcp"
    filters: list[dict[str, Any]] = Field(default_factory=list)
    platform_id: str | None = None  # None: use the DB's platform


class PredictRequest(_Strict):
    acg: dict[str, Any] | None = None
    ensemble: list[EnsembleMemberDoc] | None = None
    trace: TraceRequest | None = None
    db: dict[str, Any]
    response_size_aware: bool = False


class ReportEntry(_Strict):
    trace_id: str | None
    report: dict[str, Any]


class PredictResponse(_Strict):
    reports: list[ReportEntry]
    warnings: list[str]


class BreakdownRequest(_Strict):
    acg: dict[str, Any]
    db: dict[str, Any]


class BreakdownResponse(_Strict):
    breakdown: dict[str, Any]


class WhatIfRequest(_Strict):
    acg: dict[str, Any] | None = None
    ensemble: list[EnsembleMemberDoc] | None = None
    db: dict[str, Any]
    speedup: dict[str, Any]
    response_size_aware: bool = False


class WhatIfResponse(_Strict):
    report: dict[str, Any]


class IngestRequest(_Strict):
    csv: str
    size_bytes: float = 100.0
    rate_rps: float = 30000.0
    platform_id: str
    mode: str = "tcp"
    filters: list[dict[str, Any]] = Field(default_factory=list)


class IngestedAcg(_Strict):
    trace_id: str
    acg: dict[str, Any]


class IngestResponse(_Strict):
    acgs: list[IngestedAcg]
    warnings: list[str]


class HealthResponse(_Strict):
    status: str


class ErrorBody(_Strict):
    code: str
    message: str


class ErrorResponse(_Strict):
    error: ErrorBody
