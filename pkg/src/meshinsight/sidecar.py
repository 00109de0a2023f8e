"""Sidecar configurations and whole-sidecar overhead composition.

A sidecar's total overhead is the sum of its exercised components'
overheads. Totals cover one full traversal (inbound plus outbound) of a
single sidecar, so a service-to-service call charges each endpoint sidecar
exactly once. Sums run left to right in component chain order.
"""

from __future__ import annotations

from dataclasses import dataclass

from .profiles import (
    BaseComponent,
    ComponentKind,
    FilterComponent,
    ProfileDB,
    ProxyMode,
    eval_cpu,
    eval_latency,
)


@dataclass(frozen=True)
class FilterSpec:
    """Reference to a filter profile by (name, variant)."""

    name: str
    variant: str = "default"

    def __post_init__(self):
        if not self.name:
            raise ValueError("filter name must be non-empty")


@dataclass(frozen=True)
class SidecarConfig:
    """Proxy mode plus ordered filter chain."""

    mode: ProxyMode
    filters: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "filters", tuple(self.filters))


_TCP_BASE = (
    BaseComponent.IPC,
    BaseComponent.READ,
    BaseComponent.WRITE,
    BaseComponent.NOTIFICATION,
    BaseComponent.PROTOCOL_OTHER,
)
_PARSED_BASE = (
    BaseComponent.IPC,
    BaseComponent.READ,
    BaseComponent.WRITE,
    BaseComponent.NOTIFICATION,
    BaseComponent.PROTOCOL_PARSING,
    BaseComponent.PROTOCOL_OTHER,
)


def components_for_config(cfg: SidecarConfig) -> list[ComponentKind]:
    """Components a message exercises under ``cfg``, in chain order.

    TCP mode has no protocol parsing stage; filters append in chain order.
    """
    base = _TCP_BASE if cfg.mode is ProxyMode.TCP else _PARSED_BASE
    return list(base) + [FilterComponent(f.name, f.variant) for f in cfg.filters]


def component_overheads(
    db: ProfileDB, cfg: SidecarConfig, size_bytes: float, rate_rps: float = 0.0
) -> list[tuple[ComponentKind, float, float]]:
    """Per-component (kind, latency_us, cpu_cores) for one sidecar traversal."""
    out = []
    for kind in components_for_config(cfg):
        prof = db.lookup(kind, cfg.mode)
        out.append(
            (
                kind,
                eval_latency(prof.latency, size_bytes),
                eval_cpu(prof.cpu, size_bytes, rate_rps),
            )
        )
    return out


def sidecar_latency(db: ProfileDB, cfg: SidecarConfig, size_bytes: float) -> float:
    """Latency overhead (us) of one sidecar traversal at ``size_bytes``."""
    total = 0.0
    for kind in components_for_config(cfg):
        total += eval_latency(db.lookup(kind, cfg.mode).latency, size_bytes)
    return total


def sidecar_cpu(db: ProfileDB, cfg: SidecarConfig, size_bytes: float, rate_rps: float) -> float:
    """CPU overhead (virtual cores) of one sidecar at the given size and rate."""
    total = 0.0
    for kind in components_for_config(cfg):
        total += eval_cpu(db.lookup(kind, cfg.mode).cpu, size_bytes, rate_rps)
    return total
