"""Independent brute-force verifiers and seeded generators for the test suite.

Deliberately uses different algorithms from the production paths: the
critical-path oracle enumerates every maximal path instead of running the
topological DP, and the regression oracle solves the normal equations with
two-pass sums instead of delegating to numpy.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, asdict
from typing import Mapping, Sequence

from .callgraph import AnnotatedCallGraph, Invocation, ServiceInstance, validated
from .errors import DegenerateFit, TooLarge
from .profiles import ProxyMode
from .sidecar import SidecarConfig

MAX_ORACLE_INVOCATIONS = 20


def enumerate_critical_path(
    graph: AnnotatedCallGraph, weights: Mapping[str, float]
) -> tuple[float, tuple]:
    """Exhaustively enumerate maximal paths; return the heaviest.

    Ties resolve to the lexicographically smallest id sequence, and path
    weights accumulate left to right from the root, mirroring the predictor.
    """
    n = len(graph.invocations)
    if n > MAX_ORACLE_INVOCATIONS:
        raise TooLarge(f"{n} invocations exceed the enumeration bound of {MAX_ORACLE_INVOCATIONS}")
    validated(graph)
    children = graph.children()
    parents = graph.parents()
    roots = [inv.id for inv in graph.invocations if not parents[inv.id]]

    best: tuple[float, tuple] | None = None

    def walk(node: str, path: list, total: float):
        nonlocal best
        total = total + weights[node]
        path.append(node)
        if not children[node]:
            candidate = (total, tuple(path))
            if (
                best is None
                or candidate[0] > best[0]
                or (candidate[0] == best[0] and candidate[1] < best[1])
            ):
                best = candidate
        else:
            for child in children[node]:
                walk(child, path, total)
        path.pop()

    for root in roots:
        walk(root, [], 0.0)
    assert best is not None
    return best


def ols_oracle(samples: Sequence[tuple[float, float]]) -> tuple[float, float]:
    """Closed-form normal-equation OLS; returns (intercept, slope)."""
    if len(samples) < 2 or len({x for x, _ in samples}) < 2:
        raise DegenerateFit("need at least 2 distinct x values")
    n = len(samples)
    mean_x = sum(x for x, _ in samples) / n
    mean_y = sum(y for _, y in samples) / n
    sxx = sum((x - mean_x) ** 2 for x, _ in samples)
    sxy = sum((x - mean_x) * (y - mean_y) for x, y in samples)
    slope = sxy / sxx
    return mean_y - slope * mean_x, slope


@dataclass(frozen=True)
class RandomSpec:
    """Seeded recipe for a random valid ACG; identical specs generate
    identical graphs."""

    seed: int
    min_invocations: int = 1
    max_invocations: int = 12
    edge_probability: float = 0.35
    size_choices: tuple = (100, 256, 512, 1024, 2048, 4096)
    rate_range: tuple = (500.0, 30000.0)
    mode_weights: tuple = (("tcp", 1.0), ("http", 1.0), ("grpc", 1.0))
    platform_id: str = "default"
    meshed_probability: float = 0.9
    external_root_probability: float = 0.5

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "RandomSpec":
        doc = dict(doc)
        for key in ("size_choices", "rate_range"):
            if key in doc:
                doc[key] = tuple(doc[key])
        if "mode_weights" in doc:
            doc["mode_weights"] = tuple((m, float(w)) for m, w in doc["mode_weights"])
        return cls(**doc)


def generate_random_acg(spec: RandomSpec) -> AnnotatedCallGraph:
    """A validated random DAG ACG; edges only run from lower to higher index."""
    rng = random.Random(spec.seed)
    n = rng.randint(spec.min_invocations, spec.max_invocations)
    svc_count = rng.randint(1, max(1, n))

    modes = [ProxyMode(m) for m, _ in spec.mode_weights]
    weights = [w for _, w in spec.mode_weights]
    services = []
    for k in range(svc_count):
        services.append(
            ServiceInstance(
                id=f"s{k:02d}",
                platform_id=spec.platform_id,
                config=SidecarConfig(mode=rng.choices(modes, weights)[0], filters=()),
                meshed=rng.random() < spec.meshed_probability,
            )
        )

    parent_of: dict[int, int] = {}
    edges = []
    for j in range(1, n):
        for i in range(j):
            if rng.random() < spec.edge_probability:
                edges.append((f"i{i:02d}", f"i{j:02d}"))
                parent_of.setdefault(j, i)

    callees = [rng.randrange(svc_count) for _ in range(n)]
    invocations = []
    for k in range(n):
        if k in parent_of:
            caller = services[callees[parent_of[k]]].id
        elif rng.random() < spec.external_root_probability:
            caller = None
        else:
            choices = [s for s in range(svc_count) if s != callees[k]] or [callees[k]]
            caller = services[rng.choice(choices)].id
        invocations.append(
            Invocation(
                id=f"i{k:02d}",
                caller=caller,
                callee=services[callees[k]].id,
                size_bytes=float(rng.choice(spec.size_choices)),
                rate_rps=rng.uniform(*spec.rate_range),
            )
        )
    return validated(
        AnnotatedCallGraph(services=tuple(services), invocations=tuple(invocations), edges=tuple(edges))
    )
