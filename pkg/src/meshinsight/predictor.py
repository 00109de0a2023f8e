"""End-to-end overhead prediction over annotated call graphs.

Latency overhead is the weight of the heaviest root-to-leaf path in the
invocation DAG, where an invocation's weight is the traversal cost of its
two endpoint sidecars plus any annotated application latency. CPU overhead
is the sum over all invocations. Totals are running sums in documented
orders (components in chain order, invocations in declaration order, path
nodes root to leaf) so decomposition identities hold bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Union

from .callgraph import (
    AcgEnsemble,
    AnnotatedCallGraph,
    Invocation,
    ServiceInstance,
    Violation,
    validated,
)
from .errors import GraphValidationError, UnknownPlatform
from .profiles import (
    ComponentKind,
    ProfileDB,
    ProxyMode,
    apply_speedup,
    component_label,
    component_sort_key,
    MODE_ORDER,
    SpeedupProfile,
)
from .sidecar import component_overheads

# Filters that change the message stream itself; their presence is surfaced
# because downstream components still see the full annotated rate.
_RATE_ALTERING_FILTERS = ("fault_injection", "rate_limit")


@dataclass(frozen=True)
class PredictionOptions:
    """response_size_aware charges each sidecar the mean of the request-size
    and response-size evaluations when they differ; off, only the request
    size is used (responses are assumed symmetric)."""

    response_size_aware: bool = False


DEFAULT_OPTIONS = PredictionOptions()


@dataclass(frozen=True)
class ComponentOverhead:
    component: ComponentKind
    latency_us: float
    cpu_cores: float


@dataclass(frozen=True)
class EndpointOverhead:
    """One sidecar traversal (or the lack of one, for unmeshed endpoints)."""

    service_id: str | None
    meshed: bool
    mode: ProxyMode | None
    latency_us: float
    cpu_cores: float
    components: tuple = ()


@dataclass(frozen=True)
class InvocationOverhead:
    invocation_id: str
    latency_us: float
    cpu_cores: float
    app_latency_us: float
    caller: EndpointOverhead
    callee: EndpointOverhead


@dataclass(frozen=True)
class EnsembleMember:
    probability: float
    report: "PredictionReport"


@dataclass(frozen=True)
class PredictionReport:
    latency_overhead_us: float
    critical_path: tuple = ()
    cpu_overhead_cores: float = 0.0
    per_invocation: tuple = ()
    warnings: tuple = ()
    members: tuple = ()  # non-empty only for ensemble predictions


@dataclass(frozen=True)
class ComponentDelta:
    component: ComponentKind
    mode: ProxyMode
    latency_delta_us: float
    cpu_delta_cores: float


@dataclass(frozen=True)
class WhatIfReport:
    baseline: PredictionReport
    optimized: PredictionReport
    latency_delta_us: float
    cpu_delta_cores: float
    component_deltas: tuple = ()
    notices: tuple = ()


_NO_SIDECAR = EndpointOverhead(
    service_id=None, meshed=False, mode=None, latency_us=0.0, cpu_cores=0.0
)


def _endpoint_overhead(
    service_id: str | None,
    services: Mapping[str, "ServiceInstance"],
    dbs: Mapping[str, ProfileDB],
    inv: Invocation,
    options: PredictionOptions,
) -> EndpointOverhead:
    if service_id is None:
        return _NO_SIDECAR
    try:
        svc = services[service_id]
    except KeyError:
        raise GraphValidationError(
            [Violation("dangling_reference", inv.id, f"service {service_id!r} is not declared")]
        ) from None
    if not svc.meshed:
        return EndpointOverhead(
            service_id=svc.id, meshed=False, mode=None, latency_us=0.0, cpu_cores=0.0
        )
    if svc.platform_id not in dbs:
        raise UnknownPlatform(svc.platform_id)
    db = dbs[svc.platform_id]

    comps = component_overheads(db, svc.config, inv.size_bytes, inv.rate_rps)
    if options.response_size_aware and inv.effective_response_size != inv.size_bytes:
        resp = component_overheads(db, svc.config, inv.effective_response_size, inv.rate_rps)
        comps = [
            (kind, (lat + rlat) / 2, (cpu + rcpu) / 2)
            for (kind, lat, cpu), (_, rlat, rcpu) in zip(comps, resp)
        ]

    latency = 0.0
    cpu = 0.0
    entries = []
    for kind, lat, cores in comps:
        latency += lat
        cpu += cores
        entries.append(ComponentOverhead(kind, lat, cores))
    return EndpointOverhead(
        service_id=svc.id,
        meshed=True,
        mode=svc.config.mode,
        latency_us=latency,
        cpu_cores=cpu,
        components=tuple(entries),
    )


def invocation_overhead(
    inv: Invocation,
    graph: AnnotatedCallGraph,
    dbs: Mapping[str, ProfileDB],
    options: PredictionOptions = DEFAULT_OPTIONS,
) -> InvocationOverhead:
    """Overhead of one invocation: caller sidecar + callee sidecar (+ app).

    The invocation total is one running sum over all breakdown entries
    (caller components, callee components, app latency), so it equals the
    sum of its own breakdown bit-for-bit.
    """
    services = graph.service_map()
    caller = _endpoint_overhead(inv.caller, services, dbs, inv, options)
    callee = _endpoint_overhead(inv.callee, services, dbs, inv, options)
    latency = 0.0
    cpu = 0.0
    for endpoint in (caller, callee):
        for comp in endpoint.components:
            latency += comp.latency_us
            cpu += comp.cpu_cores
    latency += inv.app_latency_us
    return InvocationOverhead(
        invocation_id=inv.id,
        latency_us=latency,
        cpu_cores=cpu,
        app_latency_us=inv.app_latency_us,
        caller=caller,
        callee=callee,
    )


def _critical_path(
    graph: AnnotatedCallGraph, weights: Mapping[str, float]
) -> tuple[float, tuple]:
    """Heaviest root-to-leaf path by prefix-sum DP over topological order.

    Path weights accumulate left to right from the root, matching the
    enumeration oracle's summation; weight ties resolve to the
    lexicographically smallest id sequence.
    """
    parents = graph.parents()
    children = graph.children()
    order = graph.topological_order()
    total: dict[str, float] = {}
    best_parent: dict[str, str | None] = {}

    def prefix(node: str) -> tuple:
        seq = []
        cur: str | None = node
        while cur is not None:
            seq.append(cur)
            cur = best_parent[cur]
        return tuple(reversed(seq))

    for node in order:
        incoming = parents[node]
        if not incoming:
            total[node] = weights[node]
            best_parent[node] = None
            continue
        chosen = incoming[0]
        for cand in incoming[1:]:
            if total[cand] > total[chosen]:
                chosen = cand
            elif total[cand] == total[chosen]:
                # compare the paths through this node: when one parent's
                # prefix extends the other's, the element after the shorter
                # prefix decides, so the node must be appended before
                # comparing
                if prefix(cand) + (node,) < prefix(chosen) + (node,):
                    chosen = cand
        total[node] = total[chosen] + weights[node]
        best_parent[node] = chosen

    best_leaf = None
    for node in order:
        if children[node]:
            continue
        if (
            best_leaf is None
            or total[node] > total[best_leaf]
            or (total[node] == total[best_leaf] and prefix(node) < prefix(best_leaf))
        ):
            best_leaf = node
    assert best_leaf is not None
    return total[best_leaf], prefix(best_leaf)


def _report_warnings(
    graph: AnnotatedCallGraph,
    dbs: Mapping[str, ProfileDB],
    options: PredictionOptions,
) -> tuple:
    warnings = []
    services = graph.service_map()
    flagged_filters = set()
    for inv in graph.invocations:
        oversized = False
        for service_id in (inv.caller, inv.callee):
            if service_id is None:
                continue
            svc = services[service_id]
            if not svc.meshed:
                continue
            db = dbs[svc.platform_id]
            sizes = [inv.size_bytes]
            if options.response_size_aware:
                sizes.append(inv.effective_response_size)
            if any(s > db.split_threshold_bytes for s in sizes):
                oversized = True
            for f in svc.config.filters:
                if f.name in _RATE_ALTERING_FILTERS and (svc.id, f.name) not in flagged_filters:
                    flagged_filters.add((svc.id, f.name))
                    warnings.append(
                        f"service {svc.id}: filter '{f.name}' may alter the message stream; "
                        "intra-sidecar rate variation is not modeled"
                    )
        if oversized:
            warnings.append(
                f"invocation {inv.id}: message size exceeds the split threshold; "
                "the linear model underestimates overhead for split messages"
            )
    return tuple(warnings)


def predict(
    graph: AnnotatedCallGraph,
    dbs: Mapping[str, ProfileDB],
    options: PredictionOptions = DEFAULT_OPTIONS,
) -> PredictionReport:
    """Latency (critical path) and CPU (sum) overhead for one call graph."""
    validated(graph)
    overheads = tuple(invocation_overhead(inv, graph, dbs, options) for inv in graph.invocations)
    weights = {o.invocation_id: o.latency_us for o in overheads}
    latency, path = _critical_path(graph, weights)
    cpu = 0.0
    for o in overheads:
        cpu += o.cpu_cores
    return PredictionReport(
        latency_overhead_us=latency,
        critical_path=path,
        cpu_overhead_cores=cpu,
        per_invocation=overheads,
        warnings=_report_warnings(graph, dbs, options),
    )


def predict_ensemble(
    ensemble: AcgEnsemble,
    dbs: Mapping[str, ProfileDB],
    options: PredictionOptions = DEFAULT_OPTIONS,
) -> PredictionReport:
    """Probability-weighted average overhead across ensemble members."""
    members = tuple(
        EnsembleMember(probability=p, report=predict(g, dbs, options))
        for g, p in ensemble.entries
    )
    latency = 0.0
    cpu = 0.0
    warnings = []
    for k, member in enumerate(members):
        latency += member.probability * member.report.latency_overhead_us
        cpu += member.probability * member.report.cpu_overhead_cores
        warnings.extend(f"member {k}: {w}" for w in member.report.warnings)
    return PredictionReport(
        latency_overhead_us=latency,
        critical_path=(),
        cpu_overhead_cores=cpu,
        per_invocation=(),
        warnings=tuple(warnings),
        members=members,
    )


Subject = Union[AnnotatedCallGraph, AcgEnsemble]


def whatif(
    subject: Subject,
    dbs: Mapping[str, ProfileDB],
    speedup: SpeedupProfile,
    options: PredictionOptions = DEFAULT_OPTIONS,
) -> WhatIfReport:
    """Compare predictions for the current DBs against speedup-edited DBs."""
    optimized_dbs = {pid: apply_speedup(db, speedup) for pid, db in dbs.items()}
    if isinstance(subject, AcgEnsemble):
        baseline = predict_ensemble(subject, dbs, options)
        optimized = predict_ensemble(subject, optimized_dbs, options)
    else:
        baseline = predict(subject, dbs, options)
        optimized = predict(subject, optimized_dbs, options)

    base_totals = _component_totals(baseline)
    opt_totals = _component_totals(optimized)
    keys = sorted(base_totals, key=lambda k: (component_sort_key(k[0]), MODE_ORDER.index(k[1])))
    deltas = tuple(
        ComponentDelta(
            component=kind,
            mode=mode,
            latency_delta_us=opt_totals[(kind, mode)][0] - base_totals[(kind, mode)][0],
            cpu_delta_cores=opt_totals[(kind, mode)][1] - base_totals[(kind, mode)][1],
        )
        for kind, mode in keys
    )

    notices = []
    exercised = set(base_totals)
    for edit in speedup.edits:
        if edit.proxy_modes is None:
            modes = {
                mode
                for db in dbs.values()
                for prof in db.profiles
                if prof.kind == edit.kind
                for mode in prof.proxy_mode_scope
            }
        else:
            modes = set(edit.proxy_modes)
        untouched = [m for m in MODE_ORDER if m in modes and (edit.kind, m) not in exercised]
        for mode in untouched:
            notices.append(
                f"speedup edit for {component_label(edit.kind)} ({mode.value}) does not "
                "affect any exercised component"
            )

    return WhatIfReport(
        baseline=baseline,
        optimized=optimized,
        latency_delta_us=optimized.latency_overhead_us - baseline.latency_overhead_us,
        cpu_delta_cores=optimized.cpu_overhead_cores - baseline.cpu_overhead_cores,
        component_deltas=deltas,
        notices=tuple(notices),
    )


def _component_totals(report: PredictionReport) -> dict:
    """Aggregate (latency, cpu) per (component, mode), probability-weighted
    for ensembles."""
    totals: dict = {}

    def add(report: PredictionReport, weight: float):
        for inv in report.per_invocation:
            for endpoint in (inv.caller, inv.callee):
                if not endpoint.meshed:
                    continue
                for comp in endpoint.components:
                    key = (comp.component, endpoint.mode)
                    lat, cpu = totals.get(key, (0.0, 0.0))
                    totals[key] = (
                        lat + weight * comp.latency_us,
                        cpu + weight * comp.cpu_cores,
                    )

    if report.members:
        for member in report.members:
            add(member.report, member.probability)
    else:
        add(report, 1.0)
    return totals
