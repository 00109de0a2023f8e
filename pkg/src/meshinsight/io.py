"""Parsing and serialization for every on-disk format.

All parsers are strict: unknown fields are rejected and errors carry the
JSON path (or CSV line) of the offending value. Serializers emit keys in a
fixed documented order so identical inputs always produce identical bytes.
"""

from __future__ import annotations

import csv
import io as _io
import json
from importlib import resources
from pathlib import Path

from .callgraph import (
    AcgEnsemble,
    AnnotatedCallGraph,
    Invocation,
    ServiceInstance,
    TraceRow,
    validated,
)
from .errors import ParseError
from .profiles import (
    BaseComponent,
    ComponentProfile,
    CpuProfile,
    FilterComponent,
    LatencyProfile,
    MeasurementSample,
    MODE_ORDER,
    Platform,
    ProfileDB,
    ProxyMode,
    ReplaceWith,
    SampleRow,
    Scale,
    SpeedupEdit,
    SpeedupProfile,
    component_sort_key,
    parse_component_label,
)
from .sidecar import FilterSpec, SidecarConfig

DEFAULT_DB_NAME = "default"
_DEFAULT_DB_RESOURCE = "default_profiles.json"

TRACE_HEADER = ["trace_id", "caller", "callee", "start_timestamp_us", "response_time_us"]


# ---------------------------------------------------------------------------
# low-level helpers

def _object(value, path: str) -> dict:
    if not isinstance(value, dict):
        raise ParseError(f"expected an object, got {type(value).__name__}", path)
    return value


def _array(value, path: str) -> list:
    if not isinstance(value, list):
        raise ParseError(f"expected an array, got {type(value).__name__}", path)
    return value


def _check_keys(obj: dict, path: str, required: tuple, optional: tuple = ()):
    for key in required:
        if key not in obj:
            raise ParseError(f"missing required field {key!r}", path)
    for key in obj:
        if key not in required and key not in optional:
            raise ParseError(f"unknown field {key!r}", path)


def _string(obj: dict, key: str, path: str) -> str:
    value = obj[key]
    if not isinstance(value, str):
        raise ParseError("expected a string", f"{path}.{key}")
    return value


def _number(obj: dict, key: str, path: str, minimum: float | None = None) -> float:
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError("expected a number", f"{path}.{key}")
    if minimum is not None and value < minimum:
        raise ParseError(f"must be >= {minimum:g}", f"{path}.{key}")
    return float(value)


def _bool(obj: dict, key: str, path: str) -> bool:
    value = obj[key]
    if not isinstance(value, bool):
        raise ParseError("expected a boolean", f"{path}.{key}")
    return value


def _mode(value, path: str) -> ProxyMode:
    if not isinstance(value, str):
        raise ParseError("expected a proxy mode string", path)
    try:
        return ProxyMode(value)
    except ValueError:
        raise ParseError(f"unknown proxy mode {value!r}", path) from None


def load_json(path: str | Path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(str(exc), str(path)) from None
    return parse_json(text, str(path))


def parse_json(text: str, path: str = "document"):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc}", path) from None


def canonical_json(doc) -> str:
    """Deterministic JSON rendering: fixed key order (insertion), 2-space
    indentation, full float precision, trailing newline."""
    return json.dumps(doc, indent=2, separators=(",", ": "), ensure_ascii=False, allow_nan=False) + "\n"


# ---------------------------------------------------------------------------
# profile DB

def _parse_entry_kind(entry: dict, path: str):
    kind_str = _string(entry, "kind", path)
    if kind_str == "filter":
        if "filter_name" not in entry:
            raise ParseError("filter entries need filter_name", path)
        name = _string(entry, "filter_name", path)
        variant = _string(entry, "filter_variant", path) if "filter_variant" in entry else "default"
        if not name:
            raise ParseError("filter_name must be non-empty", f"{path}.filter_name")
        return FilterComponent(name, variant)
    if "filter_name" in entry or "filter_variant" in entry:
        raise ParseError("filter_name/filter_variant only apply to kind 'filter'", path)
    try:
        return BaseComponent(kind_str)
    except ValueError:
        raise ParseError(f"unknown component kind {kind_str!r}", f"{path}.kind") from None


def _parse_latency(obj, path: str) -> LatencyProfile:
    obj = _object(obj, path)
    _check_keys(obj, path, ("base_us", "per_byte_us"))
    return LatencyProfile(
        base_us=_number(obj, "base_us", path, minimum=0),
        per_byte_us=_number(obj, "per_byte_us", path, minimum=0),
    )


def _parse_cpu(obj, path: str) -> CpuProfile:
    obj = _object(obj, path)
    _check_keys(obj, path, ("base_cpu_s", "per_byte_cpu_s"))
    return CpuProfile(
        base_cpu_s=_number(obj, "base_cpu_s", path, minimum=0),
        per_byte_cpu_s=_number(obj, "per_byte_cpu_s", path, minimum=0),
    )


def parse_profile_db(doc) -> ProfileDB:
    root = _object(doc, "db")
    _check_keys(root, "db", ("platform", "entries"), ("split_threshold_bytes",))
    platform_obj = _object(root["platform"], "db.platform")
    _check_keys(platform_obj, "db.platform", ("id",), ("description",))
    platform = Platform(
        id=_string(platform_obj, "id", "db.platform"),
        description=_string(platform_obj, "description", "db.platform")
        if "description" in platform_obj
        else "",
    )
    threshold = (
        int(_number(root, "split_threshold_bytes", "db", minimum=1))
        if "split_threshold_bytes" in root
        else 4096
    )
    profiles = []
    for k, raw in enumerate(_array(root["entries"], "db.entries")):
        path = f"db.entries[{k}]"
        entry = _object(raw, path)
        _check_keys(
            entry,
            path,
            ("kind", "proxy_modes", "latency", "cpu"),
            ("filter_name", "filter_variant"),
        )
        kind = _parse_entry_kind(entry, path)
        modes_raw = _array(entry["proxy_modes"], f"{path}.proxy_modes")
        if not modes_raw:
            raise ParseError("proxy_modes must be non-empty", f"{path}.proxy_modes")
        modes = [_mode(m, f"{path}.proxy_modes[{i}]") for i, m in enumerate(modes_raw)]
        if len(set(modes)) != len(modes):
            raise ParseError("duplicate proxy mode", f"{path}.proxy_modes")
        try:
            profiles.append(
                ComponentProfile(
                    kind=kind,
                    latency=_parse_latency(entry["latency"], f"{path}.latency"),
                    cpu=_parse_cpu(entry["cpu"], f"{path}.cpu"),
                    proxy_mode_scope=frozenset(modes),
                )
            )
        except ValueError as exc:
            raise ParseError(str(exc), path) from None
    try:
        return ProfileDB(platform, profiles, threshold)
    except ValueError as exc:
        raise ParseError(str(exc), "db") from None


def serialize_profile_db(db: ProfileDB) -> dict:
    entries = []
    ordered = sorted(
        db.profiles,
        key=lambda p: (
            component_sort_key(p.kind),
            min(MODE_ORDER.index(m) for m in p.proxy_mode_scope),
        ),
    )
    for prof in ordered:
        entry: dict = {}
        if isinstance(prof.kind, BaseComponent):
            entry["kind"] = prof.kind.value
        else:
            entry["kind"] = "filter"
            entry["filter_name"] = prof.kind.name
            entry["filter_variant"] = prof.kind.variant
        entry["proxy_modes"] = [m.value for m in MODE_ORDER if m in prof.proxy_mode_scope]
        entry["latency"] = {
            "base_us": prof.latency.base_us,
            "per_byte_us": prof.latency.per_byte_us,
        }
        entry["cpu"] = {
            "base_cpu_s": prof.cpu.base_cpu_s,
            "per_byte_cpu_s": prof.cpu.per_byte_cpu_s,
        }
        entries.append(entry)
    return {
        "platform": {"id": db.platform.id, "description": db.platform.description},
        "split_threshold_bytes": db.split_threshold_bytes,
        "entries": entries,
    }


def default_db_doc() -> dict:
    text = resources.files("meshinsight.data").joinpath(_DEFAULT_DB_RESOURCE).read_text()
    return parse_json(text, "default profile db")


def load_profile_db(path: str | Path) -> ProfileDB:
    """Load a DB file; the sentinel path "default" loads the bundled DB."""
    if str(path) == DEFAULT_DB_NAME:
        return parse_profile_db(default_db_doc())
    return parse_profile_db(load_json(path))


# ---------------------------------------------------------------------------
# measurement samples

def parse_samples(doc) -> list[SampleRow]:
    rows = []
    for k, raw in enumerate(_array(doc, "samples")):
        path = f"samples[{k}]"
        obj = _object(raw, path)
        _check_keys(
            obj,
            path,
            ("component", "proxy_mode", "message_size_bytes", "request_rate_rps", "latency_us"),
            ("cpu_cores",),
        )
        try:
            kind = parse_component_label(_string(obj, "component", path))
        except ValueError as exc:
            raise ParseError(str(exc), f"{path}.component") from None
        cores = None
        if "cpu_cores" in obj and obj["cpu_cores"] is not None:
            cores = _number(obj, "cpu_cores", path, minimum=0)
        rate = _number(obj, "request_rate_rps", path, minimum=0)
        if cores is not None and rate == 0:
            raise ParseError("request_rate_rps must be > 0 when cpu_cores is present", path)
        try:
            sample = MeasurementSample(
                message_size_bytes=_number(obj, "message_size_bytes", path, minimum=0),
                request_rate_rps=rate,
                latency_us=_number(obj, "latency_us", path, minimum=0),
                cpu_cores=cores,
            )
        except ValueError as exc:
            raise ParseError(str(exc), path) from None
        rows.append(SampleRow(kind, _mode(obj["proxy_mode"], f"{path}.proxy_mode"), sample))
    return rows


# ---------------------------------------------------------------------------
# sidecar config / ACG

def parse_sidecar_config(doc, path: str = "config") -> SidecarConfig:
    obj = _object(doc, path)
    _check_keys(obj, path, ("mode",), ("filters",))
    filters = []
    for k, raw in enumerate(_array(obj.get("filters", []), f"{path}.filters")):
        fpath = f"{path}.filters[{k}]"
        fobj = _object(raw, fpath)
        _check_keys(fobj, fpath, ("name",), ("variant",))
        name = _string(fobj, "name", fpath)
        if not name:
            raise ParseError("filter name must be non-empty", f"{fpath}.name")
        variant = _string(fobj, "variant", fpath) if "variant" in fobj else "default"
        filters.append(FilterSpec(name, variant))
    return SidecarConfig(mode=_mode(obj["mode"], f"{path}.mode"), filters=tuple(filters))


def serialize_sidecar_config(cfg: SidecarConfig) -> dict:
    return {
        "mode": cfg.mode.value,
        "filters": [{"name": f.name, "variant": f.variant} for f in cfg.filters],
    }


def parse_acg(doc) -> AnnotatedCallGraph:
    """Parse and validate an ACG document; structural violations raise
    GraphValidationError, schema problems raise ParseError."""
    root = _object(doc, "acg")
    _check_keys(root, "acg", ("services", "invocations"), ("edges",))

    services = []
    for k, raw in enumerate(_array(root["services"], "acg.services")):
        path = f"acg.services[{k}]"
        obj = _object(raw, path)
        _check_keys(obj, path, ("id", "platform", "config"), ("meshed",))
        try:
            services.append(
                ServiceInstance(
                    id=_string(obj, "id", path),
                    platform_id=_string(obj, "platform", path),
                    config=parse_sidecar_config(obj["config"], f"{path}.config"),
                    meshed=_bool(obj, "meshed", path) if "meshed" in obj else True,
                )
            )
        except ValueError as exc:
            raise ParseError(str(exc), path) from None

    invocations = []
    for k, raw in enumerate(_array(root["invocations"], "acg.invocations")):
        path = f"acg.invocations[{k}]"
        obj = _object(raw, path)
        _check_keys(
            obj,
            path,
            ("id", "caller", "callee", "size_bytes", "rate_rps"),
            ("response_size_bytes", "app_latency_us"),
        )
        caller = obj["caller"]
        if caller is not None and not isinstance(caller, str):
            raise ParseError("expected a service id or null", f"{path}.caller")
        try:
            invocations.append(
                Invocation(
                    id=_string(obj, "id", path),
                    caller=caller,
                    callee=_string(obj, "callee", path),
                    size_bytes=_number(obj, "size_bytes", path),
                    rate_rps=_number(obj, "rate_rps", path),
                    response_size_bytes=_number(obj, "response_size_bytes", path)
                    if obj.get("response_size_bytes") is not None
                    else None,
                    app_latency_us=_number(obj, "app_latency_us", path)
                    if "app_latency_us" in obj
                    else 0.0,
                )
            )
        except ValueError as exc:
            raise ParseError(str(exc), path) from None

    edges = []
    for k, raw in enumerate(_array(root.get("edges", []), "acg.edges")):
        path = f"acg.edges[{k}]"
        pair = _array(raw, path)
        if len(pair) != 2 or not all(isinstance(x, str) for x in pair):
            raise ParseError("expected a [from_id, to_id] pair", path)
        edges.append((pair[0], pair[1]))

    return validated(
        AnnotatedCallGraph(services=tuple(services), invocations=tuple(invocations), edges=tuple(edges))
    )


def serialize_acg(graph: AnnotatedCallGraph) -> dict:
    services = [
        {
            "id": s.id,
            "platform": s.platform_id,
            "config": serialize_sidecar_config(s.config),
            "meshed": s.meshed,
        }
        for s in graph.services
    ]
    invocations = []
    for inv in graph.invocations:
        obj = {
            "id": inv.id,
            "caller": inv.caller,
            "callee": inv.callee,
            "size_bytes": inv.size_bytes,
            "rate_rps": inv.rate_rps,
        }
        if inv.response_size_bytes is not None:
            obj["response_size_bytes"] = inv.response_size_bytes
        if inv.app_latency_us != 0.0:
            obj["app_latency_us"] = inv.app_latency_us
        invocations.append(obj)
    return {
        "services": services,
        "invocations": invocations,
        "edges": [[a, b] for a, b in graph.edges],
    }


def load_acg(path: str | Path) -> AnnotatedCallGraph:
    return parse_acg(load_json(path))


# ---------------------------------------------------------------------------
# ensembles

def parse_ensemble_members(entries: list[tuple[dict, float]]) -> AcgEnsemble:
    """Build an ensemble from (acg document, probability) pairs."""
    members = []
    for k, (doc, prob) in enumerate(entries):
        members.append((parse_acg(doc), float(prob)))
    return AcgEnsemble(entries=tuple(members))


def load_ensemble_docs(path: str | Path) -> list[dict]:
    """Read an ensemble file and inline its member ACG documents.

    Member paths resolve relative to the ensemble file's directory. Returns
    [{"acg": <doc>, "probability": p}, ...] ready for embedding.
    """
    base = Path(path).parent
    doc = load_json(path)
    out = []
    for k, raw in enumerate(_array(doc, "ensemble")):
        path_k = f"ensemble[{k}]"
        obj = _object(raw, path_k)
        _check_keys(obj, path_k, ("acg", "probability"))
        member_path = _string(obj, "acg", path_k)
        prob = _number(obj, "probability", path_k)
        out.append({"acg": load_json(base / member_path), "probability": prob})
    return out


# ---------------------------------------------------------------------------
# traces

def parse_trace_csv(text: str) -> list[TraceRow]:
    reader = csv.reader(_io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty trace file", "trace") from None
    if [h.strip() for h in header] != TRACE_HEADER:
        raise ParseError(
            f"expected header {','.join(TRACE_HEADER)!r}, got {','.join(header)!r}", "trace:1"
        )
    rows = []
    for lineno, record in enumerate(reader, start=2):
        if not record or (len(record) == 1 and not record[0].strip()):
            continue
        if len(record) != len(TRACE_HEADER):
            raise ParseError(
                f"expected {len(TRACE_HEADER)} fields, got {len(record)}", f"trace:{lineno}"
            )
        trace_id, caller, callee, start, rt = (f.strip() for f in record)
        try:
            rows.append(
                TraceRow(
                    trace_id=trace_id,
                    caller=caller,
                    callee=callee,
                    start_timestamp_us=float(start),
                    response_time_us=float(rt),
                )
            )
        except ValueError as exc:
            raise ParseError(str(exc), f"trace:{lineno}") from None
    return rows


def load_trace_csv(path: str | Path) -> list[TraceRow]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(str(exc), str(path)) from None
    return parse_trace_csv(text)


# ---------------------------------------------------------------------------
# speedup profiles

def parse_speedup(doc) -> SpeedupProfile:
    root = _object(doc, "speedup")
    _check_keys(root, "speedup", ("edits",))
    edits = []
    for k, raw in enumerate(_array(root["edits"], "speedup.edits")):
        path = f"speedup.edits[{k}]"
        obj = _object(raw, path)
        _check_keys(
            obj,
            path,
            ("kind",),
            ("filter_name", "filter_variant", "proxy_modes", "scale", "replace_with"),
        )
        kind = _parse_entry_kind(obj, path)
        modes = None
        if obj.get("proxy_modes") is not None:
            modes_raw = _array(obj["proxy_modes"], f"{path}.proxy_modes")
            modes = frozenset(
                _mode(m, f"{path}.proxy_modes[{i}]") for i, m in enumerate(modes_raw)
            )
            if not modes:
                raise ParseError("proxy_modes must be non-empty when given", f"{path}.proxy_modes")
        has_scale = "scale" in obj
        has_replace = "replace_with" in obj
        if has_scale == has_replace:
            raise ParseError("exactly one of 'scale' or 'replace_with' is required", path)
        if has_scale:
            sobj = _object(obj["scale"], f"{path}.scale")
            _check_keys(sobj, f"{path}.scale", (), ("latency_factor", "cpu_factor"))
            try:
                action = Scale(
                    latency_factor=_number(sobj, "latency_factor", f"{path}.scale")
                    if "latency_factor" in sobj
                    else 1.0,
                    cpu_factor=_number(sobj, "cpu_factor", f"{path}.scale")
                    if "cpu_factor" in sobj
                    else 1.0,
                )
            except ValueError as exc:
                raise ParseError(str(exc), f"{path}.scale") from None
        else:
            robj = _object(obj["replace_with"], f"{path}.replace_with")
            _check_keys(robj, f"{path}.replace_with", ("latency", "cpu"))
            action = ReplaceWith(
                latency=_parse_latency(robj["latency"], f"{path}.replace_with.latency"),
                cpu=_parse_cpu(robj["cpu"], f"{path}.replace_with.cpu"),
            )
        edits.append(SpeedupEdit(kind=kind, action=action, proxy_modes=modes))
    return SpeedupProfile(edits=tuple(edits))


def load_speedup(path: str | Path) -> SpeedupProfile:
    return parse_speedup(load_json(path))
