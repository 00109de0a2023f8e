"""Compositional prediction of sidecar-proxy overhead for microservice apps.

Workflow: fit per-component linear performance profiles from measurement
samples (offline), then predict end-to-end latency and CPU overhead for
annotated call graphs against those profiles (online), including what-if
analysis of datapath optimizations expressed as profile edits.
"""

from .callgraph import (
    AcgEnsemble,
    AnnotatedCallGraph,
    Invocation,
    ServiceInstance,
    TraceRow,
    ingest_trace,
    validate,
)
from .errors import MeshInsightError
from .io import load_acg, load_profile_db, load_speedup, load_trace_csv
from .predictor import (
    PredictionOptions,
    PredictionReport,
    WhatIfReport,
    invocation_overhead,
    predict,
    predict_ensemble,
    whatif,
)
from .profiles import (
    BaseComponent,
    ComponentProfile,
    CpuProfile,
    FilterComponent,
    LatencyProfile,
    MeasurementSample,
    Platform,
    ProfileDB,
    ProxyMode,
    ReplaceWith,
    Scale,
    SpeedupEdit,
    SpeedupProfile,
    apply_speedup,
    derive_filter_profile,
    eval_cpu,
    eval_latency,
    fit_cpu_profile,
    fit_latency_profile,
)
from .sidecar import (
    FilterSpec,
    SidecarConfig,
    components_for_config,
    sidecar_cpu,
    sidecar_latency,
)

__version__ = "0.1.0"

__all__ = [
    "AcgEnsemble",
    "AnnotatedCallGraph",
    "BaseComponent",
    "ComponentProfile",
    "CpuProfile",
    "FilterComponent",
    "FilterSpec",
    "Invocation",
    "LatencyProfile",
    "MeasurementSample",
    "MeshInsightError",
    "Platform",
    "PredictionOptions",
    "PredictionReport",
    "ProfileDB",
    "ProxyMode",
    "ReplaceWith",
    "Scale",
    "ServiceInstance",
    "SidecarConfig",
    "SpeedupEdit",
    "SpeedupProfile",
    "TraceRow",
    "WhatIfReport",
    "apply_speedup",
    "components_for_config",
    "derive_filter_profile",
    "eval_cpu",
    "eval_latency",
    "fit_cpu_profile",
    "fit_latency_profile",
    "ingest_trace",
    "invocation_overhead",
    "load_acg",
    "load_profile_db",
    "load_speedup",
    "load_trace_csv",
    "predict",
    "predict_ensemble",
    "sidecar_cpu",
    "sidecar_latency",
    "validate",
    "whatif",
]
