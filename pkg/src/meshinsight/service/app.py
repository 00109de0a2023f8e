"""FastAPI service wrapping the prediction toolkit.

Stateless: every request carries its own profile DB and call graph
documents, and responses embed plain report documents. Core errors map to a
structured {"error": {"code", "message"}} body; model-quality warnings
raised during a request are returned in the response envelope.
"""

from __future__ import annotations

import warnings as _warnings
from contextlib import contextmanager

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .. import io as mio
from ..callgraph import ingest_trace
from ..errors import MeshInsightError, ModelWarning, ParseError
from ..predictor import PredictionOptions, predict, predict_ensemble, whatif
from ..profiles import Platform, build_profile_db, component_label
from ..reporting import (
    breakdown_doc,
    prediction_report_doc,
    whatif_report_doc,
)
from . import schemas

_STATUS = {"parse_error": 400, "validation_error": 422}


@contextmanager
def _collect_warnings(into: list):
    with _warnings.catch_warnings(record=True) as caught:
        _warnings.simplefilter("always", ModelWarning)
        yield
    into.extend(str(w.message) for w in caught if issubclass(w.category, ModelWarning))


def _parse_subject(request) -> str:
    """Name of the one subject alternative (acg/ensemble/trace) set on a request."""
    given = [name for name in ("acg", "ensemble", "trace") if getattr(request, name, None) is not None]
    if len(given) != 1:
        raise ParseError("exactly one of 'acg', 'ensemble' or 'trace' is required", "request")
    return given[0]


def create_app() -> FastAPI:
    app = FastAPI(title="meshinsight", version="0.1.0")

    @app.exception_handler(MeshInsightError)
    async def _core_error(request: Request, exc: MeshInsightError):
        status = _STATUS.get(exc.code, 422)
        return JSONResponse(status_code=status, content={"error": {"code": exc.code, "message": str(exc)}})

    @app.exception_handler(RequestValidationError)
    async def _envelope_error(request: Request, exc: RequestValidationError):
        detail = "; ".join(
            f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in exc.errors()
        )
        return JSONResponse(
            status_code=400, content={"error": {"code": "parse_error", "message": detail}}
        )

    @app.get("/healthz", response_model=schemas.HealthResponse)
    def healthz():
        return {"status": "ok"}

    @app.get("/db/default")
    def db_default():
        return mio.default_db_doc()

    @app.post("/fit", response_model=schemas.FitResponse)
    def fit(request: schemas.FitRequest):
        rows = mio.parse_samples(request.samples)
        captured: list[str] = []
        try:
            platform = Platform(id=request.platform_id, description=request.platform_description)
            with _collect_warnings(captured):
                db, summaries = build_profile_db(rows, platform, request.split_threshold_bytes)
        except ValueError as exc:
            raise ParseError(str(exc), "request") from None
        summary = [
            schemas.FitSummaryEntry(
                component=component_label(s.component),
                proxy_mode=s.proxy_mode.value,
                latency_base_us=s.latency.base_us,
                latency_per_byte_us=s.latency.per_byte_us,
                cpu_base_s=s.cpu.base_cpu_s,
                cpu_per_byte_s=s.cpu.per_byte_cpu_s,
                latency_residual_max_us=s.latency_residual_max_us,
                cpu_residual_max_cores=s.cpu_residual_max_cores,
                sample_count=s.sample_count,
            )
            for s in summaries
        ]
        return schemas.FitResponse(db=mio.serialize_profile_db(db), summary=summary, warnings=captured)

    @app.post("/predict", response_model=schemas.PredictResponse)
    def predict_endpoint(request: schemas.PredictRequest):
        kind = _parse_subject(request)
        db = mio.parse_profile_db(request.db)
        dbs = {db.platform.id: db}
        options = PredictionOptions(response_size_aware=request.response_size_aware)
        captured: list[str] = []
        reports: list[schemas.ReportEntry] = []
        if kind == "acg":
            report = predict(mio.parse_acg(request.acg), dbs, options)
            reports.append(
                schemas.ReportEntry(trace_id=None, report=prediction_report_doc(report))
            )
        elif kind == "ensemble":
            ensemble = mio.parse_ensemble_members(
                [(m.acg, m.probability) for m in request.ensemble]
            )
            report = predict_ensemble(ensemble, dbs, options)
            reports.append(
                schemas.ReportEntry(trace_id=None, report=prediction_report_doc(report))
            )
        else:
            trace = request.trace
            rows = mio.parse_trace_csv(trace.csv)
            config = mio.parse_sidecar_config(
                {"mode": trace.mode, "filters": trace.filters}, "trace.config"
            )
            with _collect_warnings(captured):
                graphs = ingest_trace(
                    rows,
                    size_bytes=trace.size_bytes,
                    rate_rps=trace.rate_rps,
                    platform_id=trace.platform_id or db.platform.id,
                    config=config,
                )
            for trace_id, graph in graphs.items():
                report = predict(graph, dbs, options)
                reports.append(
                    schemas.ReportEntry(trace_id=trace_id, report=prediction_report_doc(report))
                )
        return schemas.PredictResponse(reports=reports, warnings=captured)

    @app.post("/breakdown", response_model=schemas.BreakdownResponse)
    def breakdown(request: schemas.BreakdownRequest):
        db = mio.parse_profile_db(request.db)
        graph = mio.parse_acg(request.acg)
        report = predict(graph, {db.platform.id: db})
        return schemas.BreakdownResponse(breakdown=breakdown_doc(graph, report))

    @app.post("/whatif", response_model=schemas.WhatIfResponse)
    def whatif_endpoint(request: schemas.WhatIfRequest):
        if (request.acg is None) == (request.ensemble is None):
            raise ParseError("exactly one of 'acg' or 'ensemble' is required", "request")
        db = mio.parse_profile_db(request.db)
        speedup = mio.parse_speedup(request.speedup)
        options = PredictionOptions(response_size_aware=request.response_size_aware)
        if request.acg is not None:
            subject = mio.parse_acg(request.acg)
        else:
            subject = mio.parse_ensemble_members(
                [(m.acg, m.probability) for m in request.ensemble]
            )
        report = whatif(subject, {db.platform.id: db}, speedup, options)
        return schemas.WhatIfResponse(report=whatif_report_doc(report))

    @app.post("/ingest", response_model=schemas.IngestResponse)
    def ingest(request: schemas.IngestRequest):
        rows = mio.parse_trace_csv(request.csv)
        config = mio.parse_sidecar_config(
            {"mode": request.mode, "filters": request.filters}, "config"
        )
        captured: list[str] = []
        with _collect_warnings(captured):
            graphs = ingest_trace(
                rows,
                size_bytes=request.size_bytes,
                rate_rps=request.rate_rps,
                platform_id=request.platform_id,
                config=config,
            )
        acgs = [
            schemas.IngestedAcg(trace_id=tid, acg=mio.serialize_acg(graph))
            for tid, graph in graphs.items()
        ]
        return schemas.IngestResponse(acgs=acgs, warnings=captured)

    return app
