"""Annotated call graphs: services, invocations, and invoked-after edges.

An annotated call graph (ACG) describes how an application serves one
request type: which service instances exist (with their platform and
sidecar config), which invocations happen (caller, callee, message size,
rate), and the invoked-after DAG between invocations. Trace ingestion
builds ACGs from RPC records using interval containment to infer nesting.
"""

from __future__ import annotations

import warnings
from collections import defaultdict
from dataclasses import dataclass

from .errors import AmbiguousNestingWarning, EmptyTrace, GraphValidationError
from .sidecar import SidecarConfig


@dataclass(frozen=True)
class ServiceInstance:
    """One microservice instance; unmeshed instances have no sidecar."""

    id: str
    platform_id: str
    config: SidecarConfig
    meshed: bool = True

    def __post_init__(self):
        if not self.id:
            raise ValueError("service id must be non-empty")


@dataclass(frozen=True)
class Invocation:
    """One service-to-service call; caller None means an external client."""

    id: str
    caller: str | None
    callee: str
    size_bytes: float
    rate_rps: float
    response_size_bytes: float | None = None
    app_latency_us: float = 0.0

    def __post_init__(self):
        if not self.id:
            raise ValueError("invocation id must be non-empty")

    @property
    def effective_response_size(self) -> float:
        return self.size_bytes if self.response_size_bytes is None else self.response_size_bytes


@dataclass(frozen=True)
class Violation:
    kind: str
    subject: str
    message: str

    def __str__(self):
        return f"{self.kind}({self.subject}): {self.message}"


@dataclass(frozen=True)
class AnnotatedCallGraph:
    services: tuple = ()
    invocations: tuple = ()
    edges: tuple = ()  # (from_invocation_id, to_invocation_id) pairs

    def __post_init__(self):
        object.__setattr__(self, "services", tuple(self.services))
        object.__setattr__(self, "invocations", tuple(self.invocations))
        object.__setattr__(self, "edges", tuple((a, b) for a, b in self.edges))

    def service_map(self) -> dict[str, ServiceInstance]:
        return {s.id: s for s in self.services}

    def invocation_map(self) -> dict[str, Invocation]:
        return {i.id: i for i in self.invocations}

    def children(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {i.id: [] for i in self.invocations}
        for a, b in self.edges:
            out[a].append(b)
        return out

    def parents(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {i.id: [] for i in self.invocations}
        for a, b in self.edges:
            out[b].append(a)
        return out

    def topological_order(self) -> list[str]:
        """Invocation ids in topological order (declaration order among ready
        nodes); raises GraphValidationError on cycles."""
        indegree = {i.id: 0 for i in self.invocations}
        for _, b in self.edges:
            indegree[b] += 1
        children = self.children()
        order = []
        ready = [i.id for i in self.invocations if indegree[i.id] == 0]
        position = {i.id: k for k, i in enumerate(self.invocations)}
        while ready:
            ready.sort(key=position.__getitem__)
            node = ready.pop(0)
            order.append(node)
            for child in children[node]:
                indegree[child] -= 1
                if indegree[child] == 0:
                    ready.append(child)
        if len(order) != len(self.invocations):
            stuck = sorted(n for n, d in indegree.items() if d > 0)
            raise GraphValidationError(
                [Violation("cycle", ",".join(stuck), "invoked-after edges form a cycle")]
            )
        return order


def validate(graph: AnnotatedCallGraph) -> list[Violation]:
    """Check all structural invariants; returns violations instead of raising."""
    violations: list[Violation] = []
    seen_services = set()
    for svc in graph.services:
        if svc.id in seen_services:
            violations.append(Violation("duplicate_service", svc.id, "service id declared twice"))
        seen_services.add(svc.id)

    if not graph.invocations:
        violations.append(Violation("no_root", "graph", "graph has no invocations"))

    seen_inv = set()
    for inv in graph.invocations:
        if inv.id in seen_inv:
            violations.append(Violation("duplicate_invocation", inv.id, "invocation id declared twice"))
        seen_inv.add(inv.id)
        if inv.caller is not None and inv.caller not in seen_services:
            violations.append(
                Violation("dangling_reference", inv.id, f"caller {inv.caller!r} is not a declared service")
            )
        if inv.callee not in seen_services:
            violations.append(
                Violation("dangling_reference", inv.id, f"callee {inv.callee!r} is not a declared service")
            )
        if inv.size_bytes < 0:
            violations.append(Violation("invalid_size", inv.id, "size_bytes must be non-negative"))
        if inv.rate_rps < 0:
            violations.append(Violation("invalid_rate", inv.id, "rate_rps must be non-negative"))
        if inv.response_size_bytes is not None and inv.response_size_bytes < 0:
            violations.append(
                Violation("invalid_size", inv.id, "response_size_bytes must be non-negative")
            )
        if inv.app_latency_us < 0:
            violations.append(
                Violation("invalid_latency", inv.id, "app_latency_us must be non-negative")
            )

    for a, b in graph.edges:
        for end in (a, b):
            if end not in seen_inv:
                violations.append(
                    Violation("unknown_edge_endpoint", end, "edge references an undeclared invocation")
                )

    if not any(v.kind in ("unknown_edge_endpoint", "duplicate_invocation") for v in violations):
        try:
            graph.topological_order()
        except GraphValidationError as exc:
            violations.extend(exc.violations)
    return violations


def validated(graph: AnnotatedCallGraph) -> AnnotatedCallGraph:
    """Return ``graph`` unchanged or raise GraphValidationError."""
    violations = validate(graph)
    if violations:
        raise GraphValidationError(violations)
    return graph


@dataclass(frozen=True)
class AcgEnsemble:
    """Probability-weighted alternatives (cache hit/miss, load-balanced paths)."""

    entries: tuple = ()  # (AnnotatedCallGraph, probability) pairs

    def __post_init__(self):
        entries = tuple((g, float(p)) for g, p in self.entries)
        object.__setattr__(self, "entries", entries)
        violations = []
        if not entries:
            violations.append(Violation("bad_probability", "ensemble", "ensemble has no members"))
        for k, (_, p) in enumerate(entries):
            if p <= 0:
                violations.append(
                    Violation("bad_probability", f"members[{k}]", "probability must be > 0")
                )
        total = sum(p for _, p in entries)
        if entries and abs(total - 1.0) > 1e-9:
            violations.append(
                Violation("bad_probability", "ensemble", f"probabilities sum to {total!r}, not 1")
            )
        if violations:
            raise GraphValidationError(violations)


@dataclass(frozen=True)
class TraceRow:
    """One RPC record from an external trace dataset."""

    trace_id: str
    caller: str
    callee: str
    start_timestamp_us: float
    response_time_us: float

    def __post_init__(self):
        if not self.caller or not self.callee:
            raise ValueError("caller and callee must be non-empty")
        if self.response_time_us < 0:
            raise ValueError("response_time_us must be non-negative")


def ingest_trace(
    rows: list[TraceRow],
    *,
    size_bytes: float = 100.0,
    rate_rps: float = 30000.0,
    platform_id: str,
    config: SidecarConfig,
) -> dict[str, AnnotatedCallGraph]:
    """Build one ACG per trace id from RPC rows.

    Traces carry no sizes or rates, so every invocation gets the supplied
    defaults, and every named service the uniform platform and config. Row B
    is invoked-after row A when B's caller is A's callee and B starts inside
    A's response window; with several qualifying parents the earliest-start
    one wins (row order breaks timestamp ties) and a warning is emitted.
    """
    if not rows:
        raise EmptyTrace("trace contains no rows")
    by_trace: dict[str, list[TraceRow]] = defaultdict(list)
    trace_order = []
    for row in rows:
        if row.trace_id not in by_trace:
            trace_order.append(row.trace_id)
        by_trace[row.trace_id].append(row)
    return {tid: _ingest_one(tid, by_trace[tid], size_bytes, rate_rps, platform_id, config)
            for tid in trace_order}


def _ingest_one(
    trace_id: str,
    rows: list[TraceRow],
    size_bytes: float,
    rate_rps: float,
    platform_id: str,
    config: SidecarConfig,
) -> AnnotatedCallGraph:
    service_names: list[str] = []
    for row in rows:
        for name in (row.caller, row.callee):
            if name not in service_names:
                service_names.append(name)
    services = tuple(
        ServiceInstance(id=name, platform_id=platform_id, config=config) for name in service_names
    )

    ids = [f"inv-{k:03d}" for k in range(len(rows))]
    invocations = tuple(
        Invocation(id=ids[k], caller=row.caller, callee=row.callee,
                   size_bytes=size_bytes, rate_rps=rate_rps)
        for k, row in enumerate(rows)
    )

    edges = []
    for k, child in enumerate(rows):
        candidates = []
        for j, parent in enumerate(rows):
            if (parent.start_timestamp_us, j) >= (child.start_timestamp_us, k):
                continue
            if parent.callee != child.caller:
                continue
            if parent.start_timestamp_us <= child.start_timestamp_us < (
                parent.start_timestamp_us + parent.response_time_us
            ):
                candidates.append(j)
        if not candidates:
            continue
        chosen = min(candidates, key=lambda j: (rows[j].start_timestamp_us, j))
        if len(candidates) > 1:
            warnings.warn(
                f"trace {trace_id}: {len(candidates)} rows qualify as parent of {ids[k]}; "
                f"using earliest-start row {ids[chosen]}",
                AmbiguousNestingWarning,
                stacklevel=3,
            )
        edges.append((ids[chosen], ids[k]))

    return validated(AnnotatedCallGraph(services=services, invocations=invocations, edges=tuple(edges)))
