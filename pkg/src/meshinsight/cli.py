"""Command-line client for the prediction service.

Subcommands: fit, show, predict, breakdown, whatif, ingest. By default the
client runs the service in-process over an ASGI transport, so no server is
needed; point it at a deployment with --server or MESHINSIGHT_SERVER.
Every failure exits non-zero with exactly one "error: ..." line on stderr.
"""

from __future__ import annotations

import argparse
import asyncio
import os
import sys
from pathlib import Path

import httpx

from . import io as mio
from .errors import MeshInsightError
from .reporting import (
    render_breakdown_table,
    render_prediction_csv,
    render_prediction_table,
    render_whatif_table,
)

_EXIT_CODES = {
    "parse_error": 2,
    "empty_trace": 2,
    "insufficient_samples": 3,
    "degenerate_fit": 3,
    "zero_rate": 3,
    "mismatched_sample_grid": 3,
    "validation_error": 4,
    "missing_profile": 5,
    "unknown_platform": 5,
    "unknown_component": 6,
}

DB_ENV = "MESHINSIGHT_DB"
SERVER_ENV = "MESHINSIGHT_SERVER"


class CliError(Exception):
    def __init__(self, message: str, exit_code: int):
        super().__init__(message)
        self.exit_code = exit_code

    @classmethod
    def from_code(cls, code: str, message: str) -> "CliError":
        return cls(message, _EXIT_CODES.get(code, 1))


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 2 with a machine-parseable line
        raise CliError(message, 2)


class ServiceClient:
    """Thin HTTP client; in-process ASGI unless a server URL is given."""

    def __init__(self, server: str | None = None):
        self.server = server

    def post(self, path: str, payload: dict) -> dict:
        return self._checked("POST", path, payload)

    def _checked(self, method: str, path: str, payload) -> dict:
        try:
            status, body = self._request(method, path, payload)
        except httpx.HTTPError as exc:
            raise CliError(f"cannot reach service: {exc}", 1) from None
        if status >= 400:
            if isinstance(body, dict) and "error" in body:
                err = body["error"]
                raise CliError.from_code(err.get("code", "error"), err.get("message", "request failed"))
            raise CliError(f"service returned status {status}", 1)
        if not isinstance(body, dict):
            raise CliError("service returned a non-JSON response", 1)
        return body

    def _request(self, method: str, path: str, payload):
        if self.server:
            with httpx.Client(base_url=self.server, timeout=120.0) as client:
                resp = client.request(method, path, json=payload)
                return resp.status_code, _body_of(resp)
        return asyncio.run(self._in_process(method, path, payload))

    async def _in_process(self, method: str, path: str, payload):
        from .service import app

        transport = httpx.ASGITransport(app=app)
        async with httpx.AsyncClient(transport=transport, base_url="http://meshinsight") as client:
            resp = await client.request(method, path, json=payload)
            return resp.status_code, _body_of(resp)


def _body_of(resp):
    try:
        return resp.json()
    except ValueError:
        return None


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise CliError(str(exc), 2) from None


def _load_doc(path: str):
    try:
        return mio.load_json(path)
    except MeshInsightError as exc:
        raise CliError.from_code(exc.code, str(exc)) from None


def _resolve_db_path(args, default_to_bundled: bool = False) -> str:
    if args.db:
        return args.db
    env = os.environ.get(DB_ENV)
    if env:
        return env
    if default_to_bundled:
        return mio.DEFAULT_DB_NAME
    raise CliError(f"no profile database given (use --db or {DB_ENV})", 2)


def _db_doc(args, default_to_bundled: bool = False) -> dict:
    path = _resolve_db_path(args, default_to_bundled)
    if path == mio.DEFAULT_DB_NAME:
        return mio.default_db_doc()
    return _load_doc(path)


def _emit_warnings(warnings: list[str]):
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)


def _print_json(doc):
    sys.stdout.write(mio.canonical_json(doc))


# ---------------------------------------------------------------------------
# subcommands

def cmd_fit(args) -> int:
    samples = _load_doc(args.samples)
    client = ServiceClient(args.server)
    body = client.post(
        "/fit",
        {
            "platform_id": args.platform,
            "platform_description": args.platform_description,
            "split_threshold_bytes": args.split_threshold,
            "samples": samples,
        },
    )
    Path(args.out).write_text(mio.canonical_json(body["db"]))
    _emit_warnings(body["warnings"])
    header = f"{'component':<28} {'mode':<5} {'base_us':>12} {'per_byte_us':>12} {'base_cpu_s':>12} {'per_byte_cpu_s':>14} {'resid_us':>10}"
    print(header)
    for entry in body["summary"]:
        print(
            f"{entry['component']:<28} {entry['proxy_mode']:<5} "
            f"{entry['latency_base_us']:>12.4f} {entry['latency_per_byte_us']:>12.6f} "
            f"{entry['cpu_base_s']:>12.3e} {entry['cpu_per_byte_s']:>14.3e} "
            f"{entry['latency_residual_max_us']:>10.4f}"
        )
    print(f"wrote {len(body['summary'])} profiles to {args.out}")
    return 0


def cmd_show(args) -> int:
    doc = _db_doc(args, default_to_bundled=True)
    try:
        db = mio.parse_profile_db(doc)
    except MeshInsightError as exc:
        raise CliError.from_code(exc.code, str(exc)) from None
    if args.format == "json":
        _print_json(mio.serialize_profile_db(db))
        return 0
    print(f"platform: {db.platform.id}")
    if db.platform.description:
        print(f"  {db.platform.description}")
    print(f"split threshold: {db.split_threshold_bytes} bytes")
    print()
    print(f"{'component':<28} {'modes':<14} {'base_us':>10} {'per_byte_us':>12} {'base_cpu_s':>12} {'per_byte_cpu_s':>14}")
    for entry in mio.serialize_profile_db(db)["entries"]:
        label = entry["kind"]
        if label == "filter":
            label = f"filter:{entry['filter_name']}:{entry['filter_variant']}"
        print(
            f"{label:<28} {','.join(entry['proxy_modes']):<14} "
            f"{entry['latency']['base_us']:>10.2f} {entry['latency']['per_byte_us']:>12.6f} "
            f"{entry['cpu']['base_cpu_s']:>12.3e} {entry['cpu']['per_byte_cpu_s']:>14.3e}"
        )
    return 0


def _subject_payload(args, allow_trace: bool) -> dict:
    given = [
        name
        for name in ("acg", "ensemble", "trace")
        if getattr(args, name, None)
    ]
    if len(given) != 1:
        options = "--acg, --ensemble or --trace" if allow_trace else "--acg or --ensemble"
        raise CliError(f"exactly one of {options} is required", 2)
    which = given[0]
    if which == "acg":
        return {"acg": _load_doc(args.acg)}
    if which == "ensemble":
        try:
            return {"ensemble": mio.load_ensemble_docs(args.ensemble)}
        except MeshInsightError as exc:
            raise CliError.from_code(exc.code, str(exc)) from None
    return {
        "trace": {
            "csv": _read_text(args.trace),
            "size_bytes": args.size_bytes,
            "rate_rps": args.rate_rps,
            "mode": args.mode,
        }
    }


def cmd_predict(args) -> int:
    payload = _subject_payload(args, allow_trace=True)
    payload["db"] = _db_doc(args)
    payload["response_size_aware"] = args.response_size_aware
    body = ServiceClient(args.server).post("/predict", payload)
    _emit_warnings(body["warnings"])
    reports = body["reports"]
    for entry in reports:
        for w in entry["report"]["warnings"]:
            prefix = f"{entry['trace_id']}: " if entry["trace_id"] else ""
            print(f"warning: {prefix}{w}", file=sys.stderr)
    single = len(reports) == 1
    if args.format == "json":
        _print_json(reports[0]["report"] if single else reports)
    elif args.format == "csv":
        for entry in reports:
            sys.stdout.write(render_prediction_csv(entry["report"]))
    else:
        for entry in reports:
            if entry["trace_id"] is not None and not single:
                print(f"== trace {entry['trace_id']}")
            print(render_prediction_table(entry["report"]))
    return 0


def cmd_breakdown(args) -> int:
    payload = {"acg": _load_doc(args.acg), "db": _db_doc(args)}
    body = ServiceClient(args.server).post("/breakdown", payload)
    if args.format == "json":
        _print_json(body["breakdown"])
    else:
        print(render_breakdown_table(body["breakdown"]))
    return 0


def cmd_whatif(args) -> int:
    payload = _subject_payload(args, allow_trace=False)
    payload["db"] = _db_doc(args)
    payload["speedup"] = _load_doc(args.speedup)
    payload["response_size_aware"] = args.response_size_aware
    body = ServiceClient(args.server).post("/whatif", payload)
    if args.format == "json":
        _print_json(body["report"])
    else:
        print(render_whatif_table(body["report"]))
    return 0


def cmd_ingest(args) -> int:
    payload = {
        "csv": _read_text(args.trace),
        "size_bytes": args.size_bytes,
        "rate_rps": args.rate_rps,
        "platform_id": args.platform,
        "mode": args.mode,
    }
    body = ServiceClient(args.server).post("/ingest", payload)
    _emit_warnings(body["warnings"])
    acgs = body["acgs"]
    out = Path(args.out)
    if len(acgs) == 1 and not out.is_dir():
        out.write_text(mio.canonical_json(acgs[0]["acg"]))
        print(f"wrote {out} (trace {acgs[0]['trace_id']})")
        return 0
    out.mkdir(parents=True, exist_ok=True)
    for entry in acgs:
        target = out / f"{entry['trace_id']}.acg.json"
        target.write_text(mio.canonical_json(entry["acg"]))
        print(f"wrote {target}")
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="meshinsight", description=__doc__)
    sub = parser.add_subparsers(dest="command", metavar="command")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--server",
        default=os.environ.get(SERVER_ENV),
        help=f"service URL (default: in-process; env {SERVER_ENV})",
    )

    db_arg = argparse.ArgumentParser(add_help=False)
    db_arg.add_argument(
        "--db",
        help=f"profile DB file, or 'default' for the bundled DB (env {DB_ENV})",
    )

    p = sub.add_parser("fit", parents=[common], help="fit a profile DB from measurement samples")
    p.add_argument("--samples", required=True, help="measurement sample JSON file")
    p.add_argument("--platform", required=True, help="platform id for the new DB")
    p.add_argument("--platform-description", default="", help="free-text platform description")
    p.add_argument("--split-threshold", type=int, default=4096, help="message split threshold in bytes")
    p.add_argument("--out", required=True, help="output DB file")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("show", parents=[common, db_arg], help="inspect a profile DB")
    p.add_argument("--format", choices=("table", "json"), default="table")
    p.set_defaults(func=cmd_show)

    p = sub.add_parser("predict", parents=[common, db_arg], help="predict overhead for a call graph")
    p.add_argument("--acg", help="annotated call graph JSON file")
    p.add_argument("--ensemble", help="ensemble JSON file referencing member ACGs")
    p.add_argument("--trace", help="trace CSV file to ingest and predict")
    p.add_argument("--format", choices=("json", "table", "csv"), default="table")
    p.add_argument("--size-bytes", type=float, default=100.0, help="message size for trace rows")
    p.add_argument("--rate-rps", type=float, default=30000.0, help="request rate for trace rows")
    p.add_argument("--mode", choices=("tcp", "http", "grpc"), default="tcp", help="proxy mode for trace services")
    p.add_argument("--response-size-aware", action="store_true", help="charge the mean of request/response sizes")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("breakdown", parents=[common, db_arg], help="per-component overhead shares")
    p.add_argument("--acg", required=True, help="annotated call graph JSON file")
    p.add_argument("--format", choices=("table", "json"), default="table")
    p.set_defaults(func=cmd_breakdown)

    p = sub.add_parser("whatif", parents=[common, db_arg], help="compare against a speedup profile")
    p.add_argument("--acg", help="annotated call graph JSON file")
    p.add_argument("--ensemble", help="ensemble JSON file")
    p.add_argument("--speedup", required=True, help="speedup profile JSON file")
    p.add_argument("--format", choices=("table", "json"), default="table")
    p.add_argument("--response-size-aware", action="store_true", help="charge the mean of request/response sizes")
    p.set_defaults(func=cmd_whatif)

    p = sub.add_parser("ingest", parents=[common], help="convert a trace CSV into ACG files")
    p.add_argument("--trace", required=True, help="trace CSV file")
    p.add_argument("--out", required=True, help="output file (single trace) or directory")
    p.add_argument("--platform", required=True, help="platform id for ingested services")
    p.add_argument("--size-bytes", type=float, default=100.0, help="message size for trace rows")
    p.add_argument("--rate-rps", type=float, default=30000.0, help="request rate for trace rows")
    p.add_argument("--mode", choices=("tcp", "http", "grpc"), default="tcp", help="proxy mode for trace services")
    p.set_defaults(func=cmd_ingest)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "func", None):
            raise CliError("a subcommand is required (fit, show, predict, breakdown, whatif, ingest)", 2)
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
