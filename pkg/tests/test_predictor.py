import pytest

from conftest import DEFAULT_PLATFORM, make_chain, make_service, make_weighted_dag
from meshinsight.callgraph import AcgEnsemble, AnnotatedCallGraph, Invocation
from meshinsight.errors import GraphValidationError, UnknownPlatform
from meshinsight.io import load_acg
from meshinsight.oracle import RandomSpec, enumerate_critical_path, generate_random_acg
from meshinsight.predictor import (
    PredictionOptions,
    invocation_overhead,
    predict,
    predict_ensemble,
    whatif,
)
from meshinsight.profiles import (
    BaseComponent,
    ComponentProfile,
    CpuProfile,
    LatencyProfile,
    Platform,
    ProfileDB,
    ProxyMode,
    ReplaceWith,
    Scale,
    SpeedupEdit,
    SpeedupProfile,
)
from meshinsight.sidecar import FilterSpec


def sloped_db(platform="sloped"):
    """Synthetic DB with non-zero per-byte terms so size actually matters."""
    profiles = []
    for k, kind in enumerate(
        (
            BaseComponent.IPC,
            BaseComponent.READ,
            BaseComponent.WRITE,
            BaseComponent.NOTIFICATION,
            BaseComponent.PROTOCOL_OTHER,
        )
    ):
        profiles.append(
            ComponentProfile(
                kind=kind,
                latency=LatencyProfile(1.0 + k, 0.001 * (k + 1)),
                cpu=CpuProfile(1e-06 * (k + 1), 1e-09 * (k + 1)),
                proxy_mode_scope=frozenset({ProxyMode.TCP}),
            )
        )
        profiles.append(
            ComponentProfile(
                kind=kind,
                latency=LatencyProfile(2.0 + k, 0.002 * (k + 1)),
                cpu=CpuProfile(2e-06 * (k + 1), 2e-09 * (k + 1)),
                proxy_mode_scope=frozenset({ProxyMode.HTTP, ProxyMode.GRPC}),
            )
        )
    profiles.append(
        ComponentProfile(
            kind=BaseComponent.PROTOCOL_PARSING,
            latency=LatencyProfile(40.0, 0.01),
            cpu=CpuProfile(2e-04, 1e-08),
            proxy_mode_scope=frozenset({ProxyMode.HTTP, ProxyMode.GRPC}),
        )
    )
    return ProfileDB(Platform(platform), profiles)


class TestInvocationOverhead:
    def test_both_endpoints_meshed_tcp(self, default_dbs):
        graph = make_chain(1)
        overhead = invocation_overhead(graph.invocations[0], graph, default_dbs)
        assert overhead.latency_us == pytest.approx(2 * 38.53, rel=1e-9)

    def test_external_caller_single_sidecar(self, default_dbs):
        graph = AnnotatedCallGraph(
            services=(make_service("web", mode=ProxyMode.HTTP),),
            invocations=(Invocation("i", None, "web", 100.0, 30000.0),),
        )
        overhead = invocation_overhead(graph.invocations[0], graph, default_dbs)
        assert overhead.latency_us == pytest.approx(167.25, rel=1e-12)
        assert not overhead.caller.meshed
        assert overhead.caller.latency_us == 0.0

    def test_both_unmeshed_is_zero(self, default_dbs):
        graph = AnnotatedCallGraph(
            services=(make_service("a", meshed=False), make_service("b", meshed=False)),
            invocations=(Invocation("i", "a", "b", 100.0, 1000.0),),
        )
        overhead = invocation_overhead(graph.invocations[0], graph, default_dbs)
        assert overhead.latency_us == 0.0
        assert overhead.cpu_cores == 0.0

    def test_total_equals_breakdown_sum_exactly(self, default_dbs):
        graph = make_chain(3, mode=ProxyMode.HTTP, rate=30000.0)
        for invocation in graph.invocations:
            o = invocation_overhead(invocation, graph, default_dbs)
            running_lat = 0.0
            running_cpu = 0.0
            for endpoint in (o.caller, o.callee):
                for comp in endpoint.components:
                    running_lat += comp.latency_us
                    running_cpu += comp.cpu_cores
            running_lat += o.app_latency_us
            assert running_lat == o.latency_us
            assert running_cpu == o.cpu_cores

    def test_two_platforms_in_one_graph(self, default_db):
        dbs = {default_db.platform.id: default_db, "sloped": sloped_db()}
        graph = AnnotatedCallGraph(
            services=(
                make_service("a", mode=ProxyMode.TCP, platform=DEFAULT_PLATFORM),
                make_service("b", mode=ProxyMode.TCP, platform="sloped"),
            ),
            invocations=(Invocation("i", "a", "b", 100.0, 1000.0),),
        )
        overhead = invocation_overhead(graph.invocations[0], graph, dbs)
        assert overhead.caller.latency_us == pytest.approx(38.53, rel=1e-12)
        expected_b = sum((1.0 + k) + 100 * 0.001 * (k + 1) for k in range(5))
        assert overhead.callee.latency_us == pytest.approx(expected_b, rel=1e-12)

    def test_unknown_platform(self, default_dbs):
        graph = AnnotatedCallGraph(
            services=(make_service("a", platform="nowhere"),),
            invocations=(Invocation("i", None, "a", 100.0, 1.0),),
        )
        with pytest.raises(UnknownPlatform) as excinfo:
            invocation_overhead(graph.invocations[0], graph, default_dbs)
        assert "nowhere" in str(excinfo.value)

    def test_asymmetric_modes_charge_each_sidecar_by_its_own_config(self, default_dbs):
        graph = AnnotatedCallGraph(
            services=(
                make_service("caller", mode=ProxyMode.HTTP),
                make_service("callee", mode=ProxyMode.GRPC),
            ),
            invocations=(Invocation("i", "caller", "callee", 100.0, 30000.0),),
        )
        overhead = invocation_overhead(graph.invocations[0], graph, default_dbs)
        assert overhead.caller.latency_us == pytest.approx(167.25, rel=1e-12)
        assert overhead.callee.latency_us == pytest.approx(194.88, rel=1e-12)
        assert overhead.caller.mode is ProxyMode.HTTP
        assert overhead.callee.mode is ProxyMode.GRPC

    def test_response_size_flag_off_by_default(self, default_dbs):
        db = sloped_db(DEFAULT_PLATFORM)
        dbs = {DEFAULT_PLATFORM: db}
        graph = AnnotatedCallGraph(
            services=(make_service("a"), make_service("b")),
            invocations=(
                Invocation("i", "a", "b", 100.0, 100.0, response_size_bytes=4000.0),
            ),
        )
        plain = invocation_overhead(graph.invocations[0], graph, dbs)
        symmetric = invocation_overhead(
            Invocation("i", "a", "b", 100.0, 100.0), graph, dbs
        )
        assert plain.latency_us == symmetric.latency_us

    def test_response_size_aware_charges_mean(self, default_dbs):
        db = sloped_db(DEFAULT_PLATFORM)
        dbs = {DEFAULT_PLATFORM: db}
        graph = AnnotatedCallGraph(
            services=(make_service("a"), make_service("b")),
            invocations=(
                Invocation("i", "a", "b", 100.0, 100.0, response_size_bytes=4000.0),
            ),
        )
        aware = invocation_overhead(
            graph.invocations[0], graph, dbs, PredictionOptions(response_size_aware=True)
        )
        at_req = invocation_overhead(Invocation("i", "a", "b", 100.0, 100.0), graph, dbs)
        at_resp = invocation_overhead(Invocation("i", "a", "b", 4000.0, 100.0), graph, dbs)
        assert aware.latency_us == pytest.approx(
            (at_req.latency_us + at_resp.latency_us) / 2, rel=1e-12
        )


class TestPredict:
    def test_uniform_weight_dag_critical_path(self, default_dbs):
        # client -> frontend -> product -> {details, reviews -> ratings}, all
        # endpoints meshed so every invocation carries the same weight w
        services = tuple(
            make_service(sid, mode=ProxyMode.HTTP)
            for sid in ("client", "frontend", "product", "details", "reviews", "ratings")
        )
        invocations = (
            Invocation("i1", "client", "frontend", 100.0, 1000.0),
            Invocation("i2", "frontend", "product", 100.0, 1000.0),
            Invocation("i3", "product", "details", 100.0, 1000.0),
            Invocation("i4", "product", "reviews", 100.0, 1000.0),
            Invocation("i5", "reviews", "ratings", 100.0, 1000.0),
        )
        graph = AnnotatedCallGraph(
            services=services,
            invocations=invocations,
            edges=(("i1", "i2"), ("i2", "i3"), ("i2", "i4"), ("i4", "i5")),
        )
        report = predict(graph, default_dbs)
        w = report.per_invocation[0].latency_us
        assert report.critical_path == ("i1", "i2", "i4", "i5")
        assert report.latency_overhead_us == pytest.approx(4 * w, rel=1e-12)
        assert len(report.per_invocation) == 5
        running = 0.0
        for o in report.per_invocation:
            running += o.cpu_cores
        assert report.cpu_overhead_cores == running

    def test_single_invocation(self, default_dbs):
        graph = make_chain(1, rate=30000.0)
        report = predict(graph, default_dbs)
        assert report.critical_path == ("i0",)
        assert report.latency_overhead_us == report.per_invocation[0].latency_us
        assert report.cpu_overhead_cores == report.per_invocation[0].cpu_cores

    def test_parallel_branches_take_heavier(self, default_dbs):
        graph = make_weighted_dag(
            {"root": 1.0, "fast": 10.0, "slow": 30.0},
            [("root", "fast"), ("root", "slow")],
        )
        report = predict(graph, {})
        assert report.critical_path == ("root", "slow")
        assert report.latency_overhead_us == pytest.approx(31.0)
        assert report.cpu_overhead_cores == 0.0

    def test_ties_break_lexicographically(self, default_dbs):
        graph = make_weighted_dag(
            {"r": 1.0, "b": 5.0, "a": 5.0},
            [("r", "b"), ("r", "a")],
        )
        report = predict(graph, {})
        assert report.critical_path == ("r", "a")

    def test_tie_where_one_best_prefix_extends_the_other(self):
        # n2 and n3 tie as parents of n4 (n3 weighs nothing), and n3's best
        # prefix extends n2's; the lexicographically smallest heaviest path
        # is the longer one through n3
        weights = {"n1": 1.0, "n2": 1.0, "n3": 0.0, "n4": 1.0}
        graph = make_weighted_dag(
            weights,
            [("n1", "n2"), ("n2", "n3"), ("n2", "n4"), ("n3", "n4")],
        )
        report = predict(graph, {})
        best_weight, best_path = enumerate_critical_path(graph, weights)
        assert report.latency_overhead_us == best_weight
        assert report.critical_path == best_path == ("n1", "n2", "n3", "n4")

    def test_invalid_graph_rejected(self, default_dbs):
        graph = AnnotatedCallGraph(
            services=(make_service("a"),),
            invocations=(Invocation("x", "a", "a", 1.0, 1.0), Invocation("y", "a", "a", 1.0, 1.0)),
            edges=(("x", "y"), ("y", "x")),
        )
        with pytest.raises(GraphValidationError):
            predict(graph, default_dbs)

    def test_bookinfo_fixture(self, fixtures_dir, default_dbs):
        graph = load_acg(fixtures_dir / "bookinfo.acg.json")
        report = predict(graph, default_dbs)
        assert report.critical_path == ("i1", "i2", "i4", "i5")
        # single-sidecar root + three two-sidecar hops
        assert report.latency_overhead_us == pytest.approx(167.25 + 3 * 334.5, rel=1e-9)

    def test_deterministic_reports(self, fixtures_dir, default_dbs):
        graph = load_acg(fixtures_dir / "hotel_search.acg.json")
        assert predict(graph, default_dbs) == predict(graph, default_dbs)

    def test_split_threshold_warning(self, default_dbs):
        graph = make_chain(1, size=8192.0)
        report = predict(graph, default_dbs)
        assert any("split threshold" in w for w in report.warnings)
        report_small = predict(make_chain(1, size=4096.0), default_dbs)
        assert not report_small.warnings

    def test_rate_altering_filter_note(self, default_dbs):
        graph = AnnotatedCallGraph(
            services=(
                make_service(
                    "web", mode=ProxyMode.HTTP, filters=(FilterSpec("fault_injection"),)
                ),
            ),
            invocations=(Invocation("i", None, "web", 100.0, 1000.0),),
        )
        report = predict(graph, default_dbs)
        assert any("fault_injection" in w for w in report.warnings)


class TestPredictorAgainstOracle:
    @pytest.mark.parametrize("seed", range(50))
    def test_matches_enumeration_on_random_graphs(self, seed, default_dbs):
        graph = generate_random_acg(RandomSpec(seed=seed, platform_id=DEFAULT_PLATFORM))
        report = predict(graph, default_dbs)
        weights = {o.invocation_id: o.latency_us for o in report.per_invocation}
        best_weight, best_path = enumerate_critical_path(graph, weights)
        assert report.latency_overhead_us == best_weight
        assert report.critical_path == best_path

    @pytest.mark.parametrize("seed", range(200))
    def test_tie_heavy_graphs_agree_with_oracle(self, seed, default_dbs):
        # mostly unmeshed services produce many zero-weight invocations,
        # concentrating weight ties where tie-breaking bugs hide
        spec = RandomSpec(
            seed=seed,
            max_invocations=10,
            edge_probability=0.5,
            platform_id=DEFAULT_PLATFORM,
            meshed_probability=0.25,
        )
        graph = generate_random_acg(spec)
        report = predict(graph, default_dbs)
        weights = {o.invocation_id: o.latency_us for o in report.per_invocation}
        best_weight, best_path = enumerate_critical_path(graph, weights)
        assert report.latency_overhead_us == best_weight
        assert report.critical_path == best_path

    def test_monotone_in_size_and_rate(self):
        dbs = {"sloped": sloped_db()}
        spec = RandomSpec(seed=11, platform_id="sloped", mode_weights=(("tcp", 1.0),))
        graph = generate_random_acg(spec)
        report = predict(graph, dbs)
        for k, invocation in enumerate(graph.invocations):
            bigger = list(graph.invocations)
            bigger[k] = Invocation(
                id=invocation.id,
                caller=invocation.caller,
                callee=invocation.callee,
                size_bytes=invocation.size_bytes * 2 + 64,
                rate_rps=invocation.rate_rps * 3,
                response_size_bytes=invocation.response_size_bytes,
                app_latency_us=invocation.app_latency_us,
            )
            bumped = AnnotatedCallGraph(graph.services, tuple(bigger), graph.edges)
            bumped_report = predict(bumped, dbs)
            assert bumped_report.latency_overhead_us >= report.latency_overhead_us
            assert bumped_report.cpu_overhead_cores >= report.cpu_overhead_cores

    def test_cpu_invariant_under_edge_and_label_changes(self, default_dbs):
        graph = generate_random_acg(RandomSpec(seed=3, platform_id=DEFAULT_PLATFORM))
        base = predict(graph, default_dbs).cpu_overhead_cores
        shuffled_edges = tuple(reversed(graph.edges))
        assert (
            predict(
                AnnotatedCallGraph(graph.services, graph.invocations, shuffled_edges),
                default_dbs,
            ).cpu_overhead_cores
            == base
        )
        renamed = AnnotatedCallGraph(
            graph.services,
            tuple(
                Invocation(
                    id="z" + inv.id,
                    caller=inv.caller,
                    callee=inv.callee,
                    size_bytes=inv.size_bytes,
                    rate_rps=inv.rate_rps,
                    response_size_bytes=inv.response_size_bytes,
                    app_latency_us=inv.app_latency_us,
                )
                for inv in graph.invocations
            ),
            tuple(("z" + a, "z" + b) for a, b in graph.edges),
        )
        assert predict(renamed, default_dbs).cpu_overhead_cores == base

    def test_arbitrary_latency_scaling_composes(self, default_db, default_dbs):
        alpha = 0.7
        graph = generate_random_acg(
            RandomSpec(seed=33, platform_id=DEFAULT_PLATFORM, meshed_probability=1.0)
        )
        base = predict(graph, default_dbs)
        edits = tuple(
            SpeedupEdit(kind=kind, action=Scale(latency_factor=alpha, cpu_factor=1.0))
            for kind in default_db.kinds()
        )
        scaled = whatif(graph, default_dbs, SpeedupProfile(edits=edits)).optimized
        for before, after in zip(base.per_invocation, scaled.per_invocation):
            assert after.latency_us == pytest.approx(before.latency_us * alpha, rel=1e-12)
        assert scaled.critical_path == base.critical_path
        assert scaled.latency_overhead_us == pytest.approx(
            base.latency_overhead_us * alpha, rel=1e-12
        )

    def test_power_of_two_latency_scaling_is_exact(self, default_db, default_dbs):
        graph = generate_random_acg(
            RandomSpec(seed=21, platform_id=DEFAULT_PLATFORM, meshed_probability=1.0)
        )
        base = predict(graph, default_dbs)
        edits = tuple(
            SpeedupEdit(kind=kind, action=Scale(latency_factor=0.5, cpu_factor=1.0))
            for kind in default_db.kinds()
        )
        halved = whatif(graph, default_dbs, SpeedupProfile(edits=edits))
        for before, after in zip(base.per_invocation, halved.optimized.per_invocation):
            assert after.latency_us == before.latency_us * 0.5
        assert halved.optimized.critical_path == base.critical_path
        assert halved.optimized.latency_overhead_us == base.latency_overhead_us * 0.5


class TestEnsemble:
    def test_arithmetic_mean(self):
        g1 = make_weighted_dag({"a": 100.0}, [])
        g2 = make_weighted_dag({"a": 200.0}, [])
        report = predict_ensemble(AcgEnsemble(entries=((g1, 0.5), (g2, 0.5))), {})
        assert report.latency_overhead_us == pytest.approx(150.0)
        assert report.critical_path == ()
        assert len(report.members) == 2

    def test_single_member_matches_predict(self, fixtures_dir, default_dbs):
        graph = load_acg(fixtures_dir / "bookinfo.acg.json")
        single = predict_ensemble(AcgEnsemble(entries=((graph, 1.0),)), default_dbs)
        plain = predict(graph, default_dbs)
        assert single.latency_overhead_us == plain.latency_overhead_us
        assert single.cpu_overhead_cores == plain.cpu_overhead_cores
        assert single.members[0].report == plain

    def test_cache_hit_miss_weighted_sum(self, fixtures_dir, default_dbs):
        hit = predict(load_acg(fixtures_dir / "cache_hit.acg.json"), default_dbs)
        miss = predict(load_acg(fixtures_dir / "cache_miss.acg.json"), default_dbs)
        ensemble = AcgEnsemble(
            entries=(
                (load_acg(fixtures_dir / "cache_hit.acg.json"), 0.9),
                (load_acg(fixtures_dir / "cache_miss.acg.json"), 0.1),
            )
        )
        report = predict_ensemble(ensemble, default_dbs)
        assert report.latency_overhead_us == pytest.approx(
            0.9 * hit.latency_overhead_us + 0.1 * miss.latency_overhead_us, rel=1e-12
        )
        assert report.cpu_overhead_cores == pytest.approx(
            0.9 * hit.cpu_overhead_cores + 0.1 * miss.cpu_overhead_cores, rel=1e-12
        )


class TestWhatIf:
    def test_identity_speedup_zero_deltas(self, fixtures_dir, default_db, default_dbs):
        graph = load_acg(fixtures_dir / "bookinfo.acg.json")
        edits = tuple(
            SpeedupEdit(kind=kind, action=Scale(1.0, 1.0)) for kind in default_db.kinds()
        )
        report = whatif(graph, default_dbs, SpeedupProfile(edits=edits))
        assert report.latency_delta_us == 0.0
        assert report.cpu_delta_cores == 0.0
        assert all(d.latency_delta_us == 0.0 and d.cpu_delta_cores == 0.0 for d in report.component_deltas)

    def test_zeroing_ipc_removes_its_share(self, default_dbs):
        graph = make_chain(2)
        sp = SpeedupProfile(
            edits=(
                SpeedupEdit(
                    kind=BaseComponent.IPC,
                    action=ReplaceWith(LatencyProfile(0.0, 0.0), CpuProfile(0.0, 0.0)),
                    proxy_modes=frozenset({ProxyMode.TCP}),
                ),
            )
        )
        report = whatif(graph, default_dbs, sp)
        # every invocation loses IPC at both sidecars
        assert report.latency_delta_us == pytest.approx(-2 * 2 * 11.59, rel=1e-12)
        ipc_rows = [d for d in report.component_deltas if d.component is BaseComponent.IPC]
        assert ipc_rows[0].latency_delta_us == pytest.approx(-2 * 2 * 11.59, rel=1e-12)

    def test_deltas_match_field_for_field(self, fixtures_dir, default_dbs):
        graph = load_acg(fixtures_dir / "hotel_search.acg.json")
        sp = SpeedupProfile(
            edits=(SpeedupEdit(kind=BaseComponent.WRITE, action=Scale(0.9, 0.8)),)
        )
        report = whatif(graph, default_dbs, sp)
        assert report.latency_delta_us == (
            report.optimized.latency_overhead_us - report.baseline.latency_overhead_us
        )
        assert report.cpu_delta_cores == (
            report.optimized.cpu_overhead_cores - report.baseline.cpu_overhead_cores
        )

    def test_unused_component_notice(self, default_dbs):
        graph = make_chain(1)  # TCP only
        sp = SpeedupProfile(
            edits=(
                SpeedupEdit(
                    kind=BaseComponent.PROTOCOL_PARSING,
                    action=Scale(0.5, 0.5),
                    proxy_modes=frozenset({ProxyMode.HTTP}),
                ),
            )
        )
        report = whatif(graph, default_dbs, sp)
        assert report.latency_delta_us == 0.0
        assert any("protocol_parsing" in n for n in report.notices)

    def test_write_only_edit_touches_only_write(self, fixtures_dir, default_dbs):
        graph = load_acg(fixtures_dir / "bookinfo.acg.json")
        sp = SpeedupProfile(
            edits=(SpeedupEdit(kind=BaseComponent.WRITE, action=Scale(0.9, 0.8)),)
        )
        report = whatif(graph, default_dbs, sp)
        for delta in report.component_deltas:
            if delta.component is BaseComponent.WRITE:
                assert delta.latency_delta_us < 0
                assert delta.cpu_delta_cores < 0
            else:
                assert delta.latency_delta_us == 0.0
                assert delta.cpu_delta_cores == 0.0

    def test_ensemble_whatif(self, fixtures_dir, default_dbs):
        ensemble = AcgEnsemble(
            entries=(
                (load_acg(fixtures_dir / "cache_hit.acg.json"), 0.9),
                (load_acg(fixtures_dir / "cache_miss.acg.json"), 0.1),
            )
        )
        sp = SpeedupProfile(
            edits=(SpeedupEdit(kind=BaseComponent.IPC, action=Scale(0.5, 0.5)),)
        )
        report = whatif(ensemble, default_dbs, sp)
        assert report.latency_delta_us < 0
        assert report.baseline.members and report.optimized.members
