"""Linear performance profiles for sidecar datapath components.

A component's latency profile is ``base_us + size * per_byte_us``
(microseconds per message traversal); its CPU profile is
``rate * (base_cpu_s + size * per_byte_cpu_s)`` (virtual cores, i.e.
CPU-seconds consumed per wall-clock second). CPU is stored per message so
rate proportionality is structural. Profiles are fitted per platform with
ordinary least squares over measurement samples at several message sizes.
"""

from __future__ import annotations

import math
import warnings
from collections import defaultdict
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import (
    ClampedCoefficientWarning,
    DegenerateFit,
    DuplicateSampleWarning,
    InsufficientSamples,
    MismatchedSampleGrid,
    MissingProfile,
    ModelWarning,
    RateProportionalityWarning,
    UnknownComponent,
    ZeroRate,
)


class ProxyMode(str, Enum):
    """Protocol layer the sidecar operates at."""

    TCP = "tcp"
    HTTP = "http"
    GRPC = "grpc"


MODE_ORDER = (ProxyMode.TCP, ProxyMode.HTTP, ProxyMode.GRPC)


class BaseComponent(str, Enum):
    """Independently profiled stages of the sidecar datapath."""

    IPC = "ipc"
    READ = "read"
    WRITE = "write"
    NOTIFICATION = "notification"
    PROTOCOL_PARSING = "protocol_parsing"
    PROTOCOL_OTHER = "protocol_other"


# Canonical ordering used for summation and reporting.
BASE_ORDER = (
    BaseComponent.IPC,
    BaseComponent.READ,
    BaseComponent.WRITE,
    BaseComponent.NOTIFICATION,
    BaseComponent.PROTOCOL_PARSING,
    BaseComponent.PROTOCOL_OTHER,
)


@dataclass(frozen=True)
class FilterComponent:
    """A message-processing filter, identified by (name, variant).

    Variants capture configuration choices with materially different cost
    (e.g. local vs global rate limiting, file vs network tap); each variant
    is profiled as its own component.
    """

    name: str
    variant: str = "default"

    def __post_init__(self):
        if not self.name:
            raise ValueError("filter name must be non-empty")


ComponentKind = Union[BaseComponent, FilterComponent]


def component_label(kind: ComponentKind) -> str:
    """Stable string form: 'ipc' or 'filter:<name>:<variant>'."""
    if isinstance(kind, BaseComponent):
        return kind.value
    return f"filter:{kind.name}:{kind.variant}"


def parse_component_label(label: str) -> ComponentKind:
    """Inverse of :func:`component_label`; accepts 'filter:<name>' shorthand."""
    if label.startswith("filter:"):
        parts = label.split(":")
        if len(parts) == 2 and parts[1]:
            return FilterComponent(parts[1])
        if len(parts) == 3 and parts[1] and parts[2]:
            return FilterComponent(parts[1], parts[2])
        raise ValueError(f"bad filter component label {label!r}")
    try:
        return BaseComponent(label)
    except ValueError:
        raise ValueError(f"unknown component {label!r}") from None


def component_sort_key(kind: ComponentKind):
    if isinstance(kind, BaseComponent):
        return (0, BASE_ORDER.index(kind), "", "")
    return (1, 0, kind.name, kind.variant)


@dataclass(frozen=True)
class Platform:
    """Hardware/OS/sidecar-version combination a profile was measured on."""

    id: str
    description: str = ""

    def __post_init__(self):
        if not self.id:
            raise ValueError("platform id must be non-empty")


@dataclass(frozen=True)
class LatencyProfile:
    """Per-message latency: base_us + size * per_byte_us (microseconds)."""

    base_us: float
    per_byte_us: float = 0.0

    def __post_init__(self):
        if self.base_us < 0 or self.per_byte_us < 0:
            raise ValueError("latency coefficients must be non-negative")


@dataclass(frozen=True)
class CpuProfile:
    """Per-message CPU: base_cpu_s + size * per_byte_cpu_s (CPU-seconds)."""

    base_cpu_s: float
    per_byte_cpu_s: float = 0.0

    def __post_init__(self):
        if self.base_cpu_s < 0 or self.per_byte_cpu_s < 0:
            raise ValueError("cpu coefficients must be non-negative")


@dataclass(frozen=True)
class ComponentProfile:
    """Latency and CPU profile of one component for a set of proxy modes."""

    kind: ComponentKind
    latency: LatencyProfile
    cpu: CpuProfile
    proxy_mode_scope: frozenset = frozenset(MODE_ORDER)

    def __post_init__(self):
        object.__setattr__(self, "proxy_mode_scope", frozenset(self.proxy_mode_scope))
        if not self.proxy_mode_scope:
            raise ValueError("proxy_mode_scope must be non-empty")
        # TCP streams are opaque: there is no protocol parsing stage to profile.
        if self.kind is BaseComponent.PROTOCOL_PARSING and ProxyMode.TCP in self.proxy_mode_scope:
            raise ValueError("protocol_parsing cannot be scoped to tcp mode")


@dataclass(frozen=True)
class MeasurementSample:
    """One measured operating point for a component.

    ``cpu_cores`` is the virtual-core consumption at ``request_rate_rps``
    and may be None for latency-only samples.
    """

    message_size_bytes: float
    request_rate_rps: float
    latency_us: float
    cpu_cores: float | None = None

    def __post_init__(self):
        if self.message_size_bytes < 0:
            raise ValueError("message_size_bytes must be non-negative")
        if self.request_rate_rps < 0:
            raise ValueError("request_rate_rps must be non-negative")
        if self.latency_us < 0:
            raise ValueError("latency_us must be non-negative")
        if self.cpu_cores is not None and self.cpu_cores < 0:
            raise ValueError("cpu_cores must be non-negative")


@dataclass(frozen=True)
class SampleRow:
    """A measurement sample tagged with the component/mode it exercised."""

    component: ComponentKind
    proxy_mode: ProxyMode
    sample: MeasurementSample


DEFAULT_SPLIT_THRESHOLD = 4096


class ProfileDB:
    """Platform-keyed collection of component profiles.

    Immutable after construction; lookups are by (component, proxy mode).
    A profile scoped to several modes serves all of them.
    """

    def __init__(
        self,
        platform: Platform,
        profiles: Iterable[ComponentProfile],
        split_threshold_bytes: int = DEFAULT_SPLIT_THRESHOLD,
    ):
        if split_threshold_bytes < 1:
            raise ValueError("split_threshold_bytes must be >= 1")
        self.platform = platform
        self.profiles = tuple(profiles)
        self.split_threshold_bytes = int(split_threshold_bytes)
        index: dict = {}
        for prof in self.profiles:
            for mode in prof.proxy_mode_scope:
                key = (prof.kind, mode)
                if key in index:
                    raise ValueError(
                        f"conflicting profiles for {component_label(prof.kind)} in {mode.value} mode"
                    )
                index[key] = prof
        self._index = index

    def lookup(self, kind: ComponentKind, mode: ProxyMode) -> ComponentProfile:
        try:
            return self._index[(kind, mode)]
        except KeyError:
            raise MissingProfile(component_label(kind), mode.value) from None

    def has(self, kind: ComponentKind, mode: ProxyMode) -> bool:
        return (kind, mode) in self._index

    def kinds(self) -> list:
        seen = []
        for prof in self.profiles:
            if prof.kind not in seen:
                seen.append(prof.kind)
        return seen

    def _canonical_profiles(self) -> tuple:
        return tuple(
            sorted(
                self.profiles,
                key=lambda p: (
                    component_sort_key(p.kind),
                    sorted(MODE_ORDER.index(m) for m in p.proxy_mode_scope),
                ),
            )
        )

    def __eq__(self, other):
        # entry order is presentation only
        return (
            isinstance(other, ProfileDB)
            and self.platform == other.platform
            and self._canonical_profiles() == other._canonical_profiles()
            and self.split_threshold_bytes == other.split_threshold_bytes
        )

    def __repr__(self):
        return (
            f"ProfileDB(platform={self.platform.id!r}, "
            f"{len(self.profiles)} profiles, split_threshold={self.split_threshold_bytes})"
        )


def eval_latency(profile: LatencyProfile, size_bytes: float) -> float:
    """Latency in microseconds for one message of ``size_bytes``."""
    if size_bytes < 0:
        raise ValueError("size must be non-negative")
    return profile.base_us + size_bytes * profile.per_byte_us


def eval_cpu(profile: CpuProfile, size_bytes: float, rate_rps: float) -> float:
    """Virtual cores consumed at ``rate_rps`` messages/s of ``size_bytes``."""
    if size_bytes < 0:
        raise ValueError("size must be non-negative")
    if rate_rps < 0:
        raise ValueError("rate must be non-negative")
    return rate_rps * (profile.base_cpu_s + size_bytes * profile.per_byte_cpu_s)


def fit_line(xs: Sequence[float], ys: Sequence[float]) -> tuple[float, float]:
    """Unclamped OLS fit of y against x; returns (intercept, slope).

    Raises InsufficientSamples/DegenerateFit when no line is determined.
    """
    if len(xs) < 2:
        raise InsufficientSamples(f"need at least 2 samples, got {len(xs)}")
    if len(set(xs)) < 2:
        raise DegenerateFit("all samples share one message size; cannot fit a slope")
    slope, intercept = np.polyfit(np.asarray(xs, dtype=float), np.asarray(ys, dtype=float), 1)
    return float(intercept), float(slope)


def _clamp(value: float, what: str) -> float:
    if value < 0:
        warnings.warn(
            f"negative fitted {what} ({value:.6g}) clamped to 0",
            ClampedCoefficientWarning,
            stacklevel=3,
        )
        return 0.0
    return value


def fit_latency_profile(samples: Sequence[MeasurementSample]) -> LatencyProfile:
    """OLS fit of latency against message size over the given samples."""
    xs = [s.message_size_bytes for s in samples]
    ys = [s.latency_us for s in samples]
    intercept, slope = fit_line(xs, ys)
    return LatencyProfile(
        base_us=_clamp(intercept, "latency base"),
        per_byte_us=_clamp(slope, "latency slope"),
    )


def fit_cpu_profile(samples: Sequence[MeasurementSample]) -> CpuProfile:
    """OLS fit of per-message CPU-seconds (cores / rate) against size.

    Warns when per-message CPU at a given size spreads more than 5% across
    rates, i.e. when CPU is not proportional to request rate.
    """
    usable = [s for s in samples if s.cpu_cores is not None]
    for s in usable:
        if s.request_rate_rps == 0:
            raise ZeroRate("cpu sample with request rate 0")
    xs = [s.message_size_bytes for s in usable]
    ys = [s.cpu_cores / s.request_rate_rps for s in usable]
    intercept, slope = fit_line(xs, ys)
    _check_rate_proportionality(usable)
    return CpuProfile(
        base_cpu_s=_clamp(intercept, "cpu base"),
        per_byte_cpu_s=_clamp(slope, "cpu slope"),
    )


def _check_rate_proportionality(samples: Sequence[MeasurementSample], tolerance: float = 0.05):
    by_size: dict[float, list[float]] = defaultdict(list)
    for s in samples:
        by_size[s.message_size_bytes].append(s.cpu_cores / s.request_rate_rps)
    for size, per_msg in by_size.items():
        if len(per_msg) < 2:
            continue
        mean = math.fsum(per_msg) / len(per_msg)
        if mean == 0:
            continue
        spread = (max(per_msg) - min(per_msg)) / mean
        if spread > tolerance:
            warnings.warn(
                f"per-message cpu varies {spread:.1%} across rates at size {size:g}; "
                "cpu is not proportional to request rate there",
                RateProportionalityWarning,
                stacklevel=3,
            )


def derive_filter_profile(
    with_filter: Sequence[MeasurementSample],
    without_filter: Sequence[MeasurementSample],
    kind: FilterComponent,
    proxy_modes: Iterable[ProxyMode] = (ProxyMode.HTTP,),
) -> ComponentProfile:
    """Profile a filter by pointwise subtraction of whole-sidecar totals.

    Both sample sets must cover the same (size, rate) grid. Differences are
    taken per sample pair and fitted; with a single distinct size the filter
    is treated as size-insensitive (per-byte terms 0). Negative differences
    clamp to 0 with a warning.
    """
    key = lambda s: (s.message_size_bytes, s.request_rate_rps)
    a = sorted(with_filter, key=key)
    b = sorted(without_filter, key=key)
    if [key(s) for s in a] != [key(s) for s in b]:
        raise MismatchedSampleGrid(
            "with/without sample sets cover different (size, rate) grids"
        )
    diffs = []
    for sw, so in zip(a, b):
        lat = sw.latency_us - so.latency_us
        if lat < 0:
            warnings.warn(
                f"negative latency difference ({lat:.6g} us) at size "
                f"{sw.message_size_bytes:g} clamped to 0",
                ClampedCoefficientWarning,
                stacklevel=2,
            )
            lat = 0.0
        cpu = None
        if sw.cpu_cores is not None and so.cpu_cores is not None:
            if sw.request_rate_rps == 0:
                raise ZeroRate("cpu sample with request rate 0")
            cpu = (sw.cpu_cores - so.cpu_cores) / sw.request_rate_rps
            if cpu < 0:
                warnings.warn(
                    f"negative cpu difference at size {sw.message_size_bytes:g} clamped to 0",
                    ClampedCoefficientWarning,
                    stacklevel=2,
                )
                cpu = 0.0
        diffs.append((sw.message_size_bytes, lat, cpu))

    sizes = {d[0] for d in diffs}
    if len(sizes) >= 2:
        latency = fit_latency_profile(
            [MeasurementSample(d[0], 1.0, d[1]) for d in diffs]
        )
        cpu_points = [(d[0], d[2]) for d in diffs if d[2] is not None]
        if len({p[0] for p in cpu_points}) >= 2:
            intercept, slope = fit_line([p[0] for p in cpu_points], [p[1] for p in cpu_points])
            cpu = CpuProfile(_clamp(intercept, "cpu base"), _clamp(slope, "cpu slope"))
        else:
            cpu = _mean_cpu(cpu_points)
    else:
        # Filters mostly touch headers, not payload: a single-size grid
        # yields a size-insensitive profile.
        lat_mean = math.fsum(d[1] for d in diffs) / len(diffs)
        latency = LatencyProfile(base_us=lat_mean, per_byte_us=0.0)
        cpu = _mean_cpu([(d[0], d[2]) for d in diffs if d[2] is not None])
    return ComponentProfile(kind=kind, latency=latency, cpu=cpu, proxy_mode_scope=frozenset(proxy_modes))


def _mean_cpu(points: Sequence[tuple[float, float]]) -> CpuProfile:
    if not points:
        return CpuProfile(0.0, 0.0)
    return CpuProfile(base_cpu_s=math.fsum(p[1] for p in points) / len(points), per_byte_cpu_s=0.0)


@dataclass(frozen=True)
class Scale:
    """Multiply a profile's latency/CPU coefficients by the given factors."""

    latency_factor: float = 1.0
    cpu_factor: float = 1.0

    def __post_init__(self):
        if self.latency_factor <= 0 or self.cpu_factor <= 0:
            raise ValueError("scale factors must be positive")


@dataclass(frozen=True)
class ReplaceWith:
    """Substitute a measured replacement profile for the target component."""

    latency: LatencyProfile
    cpu: CpuProfile


@dataclass(frozen=True)
class SpeedupEdit:
    kind: ComponentKind
    action: Union[Scale, ReplaceWith]
    proxy_modes: frozenset | None = None  # None = every mode the kind is profiled for

    def __post_init__(self):
        if self.proxy_modes is not None:
            object.__setattr__(self, "proxy_modes", frozenset(self.proxy_modes))


@dataclass(frozen=True)
class SpeedupProfile:
    """A hypothetical or implemented datapath optimization, as profile edits."""

    edits: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "edits", tuple(self.edits))


def apply_speedup(db: ProfileDB, speedup: SpeedupProfile) -> ProfileDB:
    """Return a new ProfileDB with the speedup's edits applied.

    Every edit must target at least one (component, mode) present in the DB;
    an explicitly listed mode that is absent raises UnknownComponent. The
    input DB is left untouched.
    """
    profiles = list(db.profiles)
    for edit in speedup.edits:
        if edit.proxy_modes is None:
            target_modes = {
                mode for prof in profiles if prof.kind == edit.kind for mode in prof.proxy_mode_scope
            }
            if not target_modes:
                raise UnknownComponent(
                    f"speedup targets {component_label(edit.kind)}, absent from the DB"
                )
        else:
            present = {
                mode for prof in profiles if prof.kind == edit.kind for mode in prof.proxy_mode_scope
            }
            missing = set(edit.proxy_modes) - present
            if missing:
                modes = ", ".join(sorted(m.value for m in missing))
                raise UnknownComponent(
                    f"speedup targets {component_label(edit.kind)} in {modes} mode, absent from the DB"
                )
            target_modes = set(edit.proxy_modes)

        updated = []
        for prof in profiles:
            if prof.kind != edit.kind or not (prof.proxy_mode_scope & target_modes):
                updated.append(prof)
                continue
            untouched = prof.proxy_mode_scope - target_modes
            if untouched:
                updated.append(
                    ComponentProfile(prof.kind, prof.latency, prof.cpu, frozenset(untouched))
                )
            updated.append(
                _edited_profile(prof, edit.action, prof.proxy_mode_scope & target_modes)
            )
        profiles = updated
    return ProfileDB(db.platform, profiles, db.split_threshold_bytes)


def _edited_profile(prof: ComponentProfile, action, scope) -> ComponentProfile:
    if isinstance(action, Scale):
        latency = LatencyProfile(
            prof.latency.base_us * action.latency_factor,
            prof.latency.per_byte_us * action.latency_factor,
        )
        cpu = CpuProfile(
            prof.cpu.base_cpu_s * action.cpu_factor,
            prof.cpu.per_byte_cpu_s * action.cpu_factor,
        )
    else:
        latency = action.latency
        cpu = action.cpu
    return ComponentProfile(prof.kind, latency, cpu, frozenset(scope))


@dataclass(frozen=True)
class FitSummary:
    """Per-component fit diagnostics produced while building a DB."""

    component: ComponentKind
    proxy_mode: ProxyMode
    latency: LatencyProfile
    cpu: CpuProfile
    latency_residual_max_us: float
    cpu_residual_max_cores: float | None
    sample_count: int


def build_profile_db(
    rows: Sequence[SampleRow],
    platform: Platform,
    split_threshold_bytes: int = DEFAULT_SPLIT_THRESHOLD,
) -> tuple[ProfileDB, list[FitSummary]]:
    """Fit a full ProfileDB from tagged measurement rows.

    Rows are grouped by (component, mode); true duplicates (same size and
    rate) are averaged with a warning. Components with no CPU data get a
    zero CPU profile and a warning.
    """
    if not rows:
        raise InsufficientSamples("no measurement samples")
    groups: dict[tuple, list[MeasurementSample]] = defaultdict(list)
    order: list[tuple] = []
    for row in rows:
        key = (row.component, row.proxy_mode)
        if key not in groups:
            order.append(key)
        groups[key].append(row.sample)

    profiles = []
    summaries = []
    for key in sorted(order, key=lambda k: (component_sort_key(k[0]), MODE_ORDER.index(k[1]))):
        kind, mode = key
        samples = _average_duplicates(groups[key], kind, mode)
        try:
            latency = fit_latency_profile(samples)
        except InsufficientSamples as exc:
            raise type(exc)(
                f"component {component_label(kind)} ({mode.value}): {exc}"
            ) from None
        cpu_samples = [s for s in samples if s.cpu_cores is not None]
        if not cpu_samples:
            warnings.warn(
                f"no cpu samples for {component_label(kind)} ({mode.value}); cpu profile set to 0",
                ModelWarning,
                stacklevel=2,
            )
            cpu = CpuProfile(0.0, 0.0)
            cpu_residual = None
        elif len({s.message_size_bytes for s in cpu_samples}) < 2:
            # Single-size cpu data: size-insensitive profile.
            cpu = _mean_cpu(
                [(s.message_size_bytes, s.cpu_cores / s.request_rate_rps) for s in cpu_samples]
            )
            cpu_residual = _cpu_residual_max(cpu, cpu_samples)
        else:
            cpu = fit_cpu_profile(cpu_samples)
            cpu_residual = _cpu_residual_max(cpu, cpu_samples)
        if kind is BaseComponent.PROTOCOL_PARSING and mode is ProxyMode.TCP:
            raise ValueError("protocol_parsing samples tagged with tcp mode")
        profiles.append(ComponentProfile(kind, latency, cpu, frozenset({mode})))
        summaries.append(
            FitSummary(
                component=kind,
                proxy_mode=mode,
                latency=latency,
                cpu=cpu,
                latency_residual_max_us=max(
                    abs(eval_latency(latency, s.message_size_bytes) - s.latency_us) for s in samples
                ),
                cpu_residual_max_cores=cpu_residual,
                sample_count=len(samples),
            )
        )
    return ProfileDB(platform, profiles, split_threshold_bytes), summaries


def _cpu_residual_max(cpu: CpuProfile, samples: Sequence[MeasurementSample]) -> float:
    return max(
        abs(eval_cpu(cpu, s.message_size_bytes, s.request_rate_rps) - s.cpu_cores) for s in samples
    )


def _average_duplicates(
    samples: Sequence[MeasurementSample], kind: ComponentKind, mode: ProxyMode
) -> list[MeasurementSample]:
    buckets: dict[tuple, list[MeasurementSample]] = defaultdict(list)
    order = []
    for s in samples:
        key = (s.message_size_bytes, s.request_rate_rps)
        if key not in buckets:
            order.append(key)
        buckets[key].append(s)
    out = []
    for key in order:
        group = buckets[key]
        if len(group) == 1:
            out.append(group[0])
            continue
        warnings.warn(
            f"{len(group)} duplicate samples for {component_label(kind)} ({mode.value}) "
            f"at size {key[0]:g}, rate {key[1]:g}; averaged",
            DuplicateSampleWarning,
            stacklevel=3,
        )
        cores = [s.cpu_cores for s in group if s.cpu_cores is not None]
        out.append(
            MeasurementSample(
                message_size_bytes=key[0],
                request_rate_rps=key[1],
                latency_us=math.fsum(s.latency_us for s in group) / len(group),
                cpu_cores=math.fsum(cores) / len(cores) if cores else None,
            )
        )
    return out
