"""Report documents and output rendering (JSON, aligned tables, CSV).

JSON documents are plain dicts with keys in a fixed order; rendering them
through :func:`meshinsight.io.canonical_json` is byte-deterministic. Tables
print microseconds with 2 decimals and cores with 3; JSON and CSV keep full
float precision.
"""

from __future__ import annotations

import csv
import io as _io

from .callgraph import AnnotatedCallGraph
from .predictor import EndpointOverhead, PredictionReport, WhatIfReport
from .profiles import MODE_ORDER, component_label, component_sort_key


def _endpoint_doc(endpoint: EndpointOverhead) -> dict:
    return {
        "service": endpoint.service_id,
        "meshed": endpoint.meshed,
        "mode": endpoint.mode.value if endpoint.mode else None,
        "latency_us": endpoint.latency_us,
        "cpu_cores": endpoint.cpu_cores,
        "components": [
            {
                "component": component_label(c.component),
                "latency_us": c.latency_us,
                "cpu_cores": c.cpu_cores,
            }
            for c in endpoint.components
        ],
    }


def prediction_report_doc(report: PredictionReport) -> dict:
    doc = {
        "latency_overhead_us": report.latency_overhead_us,
        "critical_path": list(report.critical_path),
        "cpu_overhead_cores": report.cpu_overhead_cores,
        "per_invocation": [
            {
                "invocation": inv.invocation_id,
                "latency_us": inv.latency_us,
                "cpu_cores": inv.cpu_cores,
                "app_latency_us": inv.app_latency_us,
                "caller": _endpoint_doc(inv.caller),
                "callee": _endpoint_doc(inv.callee),
            }
            for inv in report.per_invocation
        ],
        "warnings": list(report.warnings),
    }
    if report.members:
        doc["members"] = [
            {"probability": m.probability, "report": prediction_report_doc(m.report)}
            for m in report.members
        ]
    return doc


def whatif_report_doc(report: WhatIfReport) -> dict:
    return {
        "baseline": prediction_report_doc(report.baseline),
        "optimized": prediction_report_doc(report.optimized),
        "latency_delta_us": report.latency_delta_us,
        "cpu_delta_cores": report.cpu_delta_cores,
        "component_deltas": [
            {
                "component": component_label(d.component),
                "proxy_mode": d.mode.value,
                "latency_delta_us": d.latency_delta_us,
                "cpu_delta_cores": d.cpu_delta_cores,
            }
            for d in report.component_deltas
        ],
        "notices": list(report.notices),
    }


def _share(value: float, total: float) -> float | None:
    return value / total if total != 0 else None


def breakdown_doc(graph: AnnotatedCallGraph, report: PredictionReport) -> dict:
    """Per-sidecar and aggregate component breakdown with share-of-total."""
    invocations = graph.invocation_map()
    sidecars = []
    agg: dict = {}
    agg_order = []
    agg_latency = 0.0
    agg_cpu = 0.0
    for inv in report.per_invocation:
        source = invocations[inv.invocation_id]
        for role, endpoint in (("caller", inv.caller), ("callee", inv.callee)):
            if not endpoint.meshed:
                continue
            components = [
                {
                    "component": component_label(c.component),
                    "latency_us": c.latency_us,
                    "latency_share": _share(c.latency_us, endpoint.latency_us),
                    "cpu_cores": c.cpu_cores,
                    "cpu_share": _share(c.cpu_cores, endpoint.cpu_cores),
                }
                for c in endpoint.components
            ]
            sidecars.append(
                {
                    "invocation": inv.invocation_id,
                    "role": role,
                    "service": endpoint.service_id,
                    "mode": endpoint.mode.value,
                    "message_size_bytes": source.size_bytes,
                    "request_rate_rps": source.rate_rps,
                    "total_latency_us": endpoint.latency_us,
                    "total_cpu_cores": endpoint.cpu_cores,
                    "components": components,
                }
            )
            agg_latency += endpoint.latency_us
            agg_cpu += endpoint.cpu_cores
            for c in endpoint.components:
                key = (c.component, endpoint.mode)
                if key not in agg:
                    agg_order.append(key)
                    agg[key] = [0.0, 0.0]
                agg[key][0] += c.latency_us
                agg[key][1] += c.cpu_cores
    agg_order.sort(key=lambda k: (component_sort_key(k[0]), MODE_ORDER.index(k[1])))
    aggregate = {
        "total_latency_us": agg_latency,
        "total_cpu_cores": agg_cpu,
        "components": [
            {
                "component": component_label(kind),
                "proxy_mode": mode.value,
                "latency_us": agg[(kind, mode)][0],
                "latency_share": _share(agg[(kind, mode)][0], agg_latency),
                "cpu_cores": agg[(kind, mode)][1],
                "cpu_share": _share(agg[(kind, mode)][1], agg_cpu),
            }
            for kind, mode in agg_order
        ],
    }
    return {"sidecars": sidecars, "aggregate": aggregate}


# ---------------------------------------------------------------------------
# text rendering

def _us(value: float) -> str:
    return f"{value:.2f}"


def _cores(value: float) -> str:
    return f"{value:.3f}"


def _pct(share: float | None) -> str:
    return f"({share * 100:.0f}%)" if share is not None else "(-)"


def _table(rows: list[list[str]], header: list[str]) -> str:
    widths = [len(h) for h in header]
    for row in rows:
        widths = [max(w, len(cell)) for w, cell in zip(widths, row)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip()]
    for row in rows:
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
    return "\n".join(lines)


def render_prediction_table(doc: dict) -> str:
    lines = []
    lines.append(f"latency overhead: {_us(doc['latency_overhead_us'])} us")
    if doc["critical_path"]:
        lines.append(f"critical path:    {' -> '.join(doc['critical_path'])}")
    lines.append(f"cpu overhead:     {_cores(doc['cpu_overhead_cores'])} cores")
    if doc["per_invocation"]:
        lines.append("")
        rows = []
        for inv in doc["per_invocation"]:
            rows.append(
                [
                    inv["invocation"],
                    inv["caller"]["service"] or "-",
                    inv["callee"]["service"] or "-",
                    _us(inv["latency_us"]),
                    _cores(inv["cpu_cores"]),
                ]
            )
        lines.append(_table(rows, ["invocation", "caller", "callee", "latency(us)", "cpu(cores)"]))
    for k, member in enumerate(doc.get("members", [])):
        lines.append("")
        lines.append(f"member {k} (probability {member['probability']:g}):")
        lines.append(_indent(render_prediction_table(member["report"])))
    if doc["warnings"]:
        lines.append("")
        lines.append("warnings:")
        lines.extend(f"  - {w}" for w in doc["warnings"])
    return "\n".join(lines)


def _indent(text: str) -> str:
    return "\n".join("  " + line if line else line for line in text.splitlines())


def render_breakdown_table(doc: dict) -> str:
    sections = []
    for sc in doc["sidecars"]:
        head = (
            f"invocation {sc['invocation']} ({sc['role']} {sc['service']}, {sc['mode']}, "
            f"{sc['message_size_bytes']:g} B @ {sc['request_rate_rps']:g} rps)"
        )
        rows = [
            [
                c["component"],
                _us(c["latency_us"]),
                _pct(c["latency_share"]),
                _cores(c["cpu_cores"]),
                _pct(c["cpu_share"]),
            ]
            for c in sc["components"]
        ]
        rows.append(["total", _us(sc["total_latency_us"]), "", _cores(sc["total_cpu_cores"]), ""])
        sections.append(head + "\n" + _indent(_table(rows, ["component", "latency(us)", "", "cpu(cores)", ""])))
    agg = doc["aggregate"]
    rows = [
        [
            c["component"],
            c["proxy_mode"],
            _us(c["latency_us"]),
            _pct(c["latency_share"]),
            _cores(c["cpu_cores"]),
            _pct(c["cpu_share"]),
        ]
        for c in agg["components"]
    ]
    rows.append(["total", "", _us(agg["total_latency_us"]), "", _cores(agg["total_cpu_cores"]), ""])
    sections.append(
        "aggregate\n"
        + _indent(_table(rows, ["component", "mode", "latency(us)", "", "cpu(cores)", ""]))
    )
    return "\n\n".join(sections)


def render_whatif_table(doc: dict) -> str:
    lines = [
        _table(
            [
                [
                    "latency(us)",
                    _us(doc["baseline"]["latency_overhead_us"]),
                    _us(doc["optimized"]["latency_overhead_us"]),
                    _us(doc["latency_delta_us"]),
                ],
                [
                    "cpu(cores)",
                    _cores(doc["baseline"]["cpu_overhead_cores"]),
                    _cores(doc["optimized"]["cpu_overhead_cores"]),
                    _cores(doc["cpu_delta_cores"]),
                ],
            ],
            ["", "baseline", "optimized", "delta"],
        )
    ]
    deltas = [d for d in doc["component_deltas"] if d["latency_delta_us"] or d["cpu_delta_cores"]]
    if deltas:
        lines.append("")
        lines.append("component deltas:")
        rows = [
            [
                d["component"],
                d["proxy_mode"],
                _us(d["latency_delta_us"]),
                _cores(d["cpu_delta_cores"]),
            ]
            for d in deltas
        ]
        lines.append(_indent(_table(rows, ["component", "mode", "latency(us)", "cpu(cores)"])))
    if doc["notices"]:
        lines.append("")
        lines.append("notices:")
        lines.extend(f"  - {n}" for n in doc["notices"])
    return "\n".join(lines)


def render_prediction_csv(doc: dict) -> str:
    """(invocation, component, latency_us, cpu_cores) rows, full precision.

    Ensemble reports flatten members with 'm<k>:' invocation prefixes.
    """
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["invocation", "component", "latency_us", "cpu_cores"])

    def emit(report_doc: dict, prefix: str = ""):
        for inv in report_doc["per_invocation"]:
            name = prefix + inv["invocation"]
            for endpoint in (inv["caller"], inv["callee"]):
                for c in endpoint["components"]:
                    writer.writerow([name, c["component"], repr(c["latency_us"]), repr(c["cpu_cores"])])
            if inv["app_latency_us"] != 0.0:
                writer.writerow([name, "app_latency", repr(inv["app_latency_us"]), repr(0.0)])

    if doc.get("members"):
        for k, member in enumerate(doc["members"]):
            emit(member["report"], prefix=f"m{k}:")
    else:
        emit(doc)
    return buf.getvalue()
