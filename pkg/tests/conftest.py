from pathlib import Path

import pytest

from meshinsight.callgraph import AnnotatedCallGraph, Invocation, ServiceInstance
from meshinsight.io import load_profile_db
from meshinsight.profiles import ProxyMode
from meshinsight.sidecar import SidecarConfig

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

DEFAULT_PLATFORM = "xeon-gold-6142-envoy-1.21"


@pytest.fixture(scope="session")
def default_db():
    return load_profile_db("default")


@pytest.fixture(scope="session")
def default_dbs(default_db):
    return {default_db.platform.id: default_db}


@pytest.fixture
def fixtures_dir():
    return FIXTURES


def make_service(sid, mode=ProxyMode.TCP, meshed=True, filters=(), platform=DEFAULT_PLATFORM):
    return ServiceInstance(
        id=sid, platform_id=platform, config=SidecarConfig(mode=mode, filters=filters), meshed=meshed
    )


def make_chain(n, mode=ProxyMode.TCP, size=100.0, rate=1000.0, platform=DEFAULT_PLATFORM):
    """A linear chain s0 -> s1 -> ... -> sn with all endpoints meshed."""
    services = [make_service(f"s{k}", mode=mode, platform=platform) for k in range(n + 1)]
    invocations = [
        Invocation(id=f"i{k}", caller=f"s{k}", callee=f"s{k + 1}", size_bytes=size, rate_rps=rate)
        for k in range(n)
    ]
    edges = [(f"i{k}", f"i{k + 1}") for k in range(n - 1)]
    return AnnotatedCallGraph(
        services=tuple(services), invocations=tuple(invocations), edges=tuple(edges)
    )


def make_weighted_dag(weights, edges):
    """Graph whose invocation overheads are exactly the given app latencies.

    All endpoints are unmeshed so sidecars contribute nothing; useful for
    exercising pure critical-path logic with hand-picked weights.
    """
    services = (make_service("svc", meshed=False),)
    invocations = tuple(
        Invocation(
            id=name, caller=None, callee="svc", size_bytes=100.0, rate_rps=1.0, app_latency_us=w
        )
        for name, w in weights.items()
    )
    return AnnotatedCallGraph(services=services, invocations=invocations, edges=tuple(edges))
