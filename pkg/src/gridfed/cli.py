"""``gridctl``: command-line entry point for center, members and consumers."""
from __future__ import annotations

import argparse
import logging
import os
import sys

from . import federation_client as fed
from .backends import open_backend
from .errors import GridError
from .member_agent import MemberConfig, MemberServer, build_member_server, register_with_center, detect_address
from .query_rewriter import rewrite_sql
from .registry_service import RegistryConfig, serve_registry
from .schema_model import GridMember, load_mapping_file, load_virtual_schema_file
from .setup_wizard import Prompter, answers_from_file, run_wizard
from .wire_protocol import parse_endpoint

log = logging.getLogger("gridfed")


def _endpoint(text):
    try:
        return parse_endpoint(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _positive(text):
    if not text.isdigit() or int(text) <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return int(text)


def _source(args):
    if args.registry:
        return args.registry
    if args.center:
        return args.center
    raise GridError("give --center HOST:PORT or --registry PATH")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_center(args) -> int:
    serve_registry(RegistryConfig(listen=args.listen, registry_path=args.registry))
    return 0


def cmd_query(args) -> int:
    members = fed.discover_members(_source(args))
    if not members:
        print("error: no grid members registered", file=sys.stderr)
        return 1
    result, outcomes = fed.federated_query(args.sql, members, args.timeout, args.provenance)
    if args.format == "json":
        print(fed.render_json(result, outcomes))
    else:
        print(fed.render(result, outcomes))
    return 0 if result is not None else 1


def cmd_repl(args) -> int:
    config = fed.ReplConfig(_source(args), args.timeout, args.provenance)
    return fed.repl(config)


def cmd_member_serve(args) -> int:
    config = MemberConfig(args.mapping, args.schema, args.fixture, args.host, args.port)
    server = build_member_server(config)
    _serve_forever(server)
    return 0


def _serve_forever(server: MemberServer) -> None:
    with server:
        log.info("data grid service listening on %s:%d", *server.server_address[:2])
        try:
            server.serve_forever()
        except KeyboardInterrupt:
            log.info("data grid service stopped")


def cmd_member_setup(args) -> int:
    schema = load_virtual_schema_file(args.schema)
    answers = answers_from_file(args.answers) if args.answers else None
    base_dir = os.path.dirname(os.path.abspath(args.output))
    result = run_wizard(schema, args.center, Prompter(answers), args.output, base_dir)
    if result.serve and not args.no_serve:
        backend = open_backend(result.mapping.kind, result.mapping.connection_string, base_dir)
        _serve_forever(MemberServer(result.mapping, schema, backend))
    return 0


def cmd_member_register(args) -> int:
    address = args.address or detect_address(args.center)
    ack = register_with_center(args.center, GridMember(args.name, address, args.port))
    print(f"{ack.status}: {args.name} {address}:{args.port} ({ack.member_count} members)")
    return 0


def cmd_remap(args) -> int:
    schema = load_virtual_schema_file(args.schema)
    mapping = load_mapping_file(args.mapping)
    sql = args.sql if args.sql is not None else sys.stdin.read()
    print(rewrite_sql(sql.strip().rstrip(";"), schema, mapping))
    return 0


def cmd_fixture_run(args) -> int:
    with open_backend("embedded", args.script) as backend:
        result = backend.execute_sql(args.query)
    print(fed.render_table(result.column_names, result.rows))
    for w in result.warnings:
        print(f"warning: {w}")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_consumer_flags(p):
    p.add_argument("--center", type=_endpoint, help="center HOST:PORT to ask for the member list")
    p.add_argument("--registry", help="read members from this GridList.xml instead")
    p.add_argument("--timeout", type=_positive, default=None,
                   help=f"per-member timeout in ms (default {fed.DEFAULT_TIMEOUT_MS}, or GRID_TIMEOUT_MS)")
    p.add_argument("--provenance", action="store_true", help="prefix rows with the answering member")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gridctl", description="Federated SQL over a grid of member databases.")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("center", help="run the center register service")
    p.add_argument("--listen", type=_endpoint, default=("0.0.0.0", 2221), help="HOST:PORT (default 0.0.0.0:2221)")
    p.add_argument("--registry", default="GridList.xml", help="GridList.xml path")
    p.set_defaults(func=cmd_center)

    p = sub.add_parser("query", help="run one SQL statement across the grid")
    _add_consumer_flags(p)
    p.add_argument("--format", choices=("table", "json"), default="table")
    p.add_argument("sql")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("repl", help="interactive grid shell")
    _add_consumer_flags(p)
    p.set_defaults(func=cmd_repl)

    member = sub.add_parser("member", help="member-site commands")
    msub = member.add_subparsers(dest="member_command", required=True)

    p = msub.add_parser("serve", help="run the data grid service")
    p.add_argument("--mapping", required=True, help="GridMapping.xml path")
    p.add_argument("--schema", required=True, help="centre.xml path")
    p.add_argument("--fixture", help="embedded fixture script; overrides the mapping's connection string")
    p.add_argument("--host", default="0.0.0.0")
    p.add_argument("--port", type=int, help="override the mapping's port")
    p.set_defaults(func=cmd_member_serve)

    p = msub.add_parser("setup", help="map local tables, write GridMapping.xml and register")
    p.add_argument("--schema", required=True, help="centre.xml path")
    p.add_argument("--center", type=_endpoint, help="center HOST:PORT to register with")
    p.add_argument("--answers", help="file with one scripted answer per line")
    p.add_argument("--output", default="GridMapping.xml")
    p.add_argument("--no-serve", action="store_true", help="exit after setup even if asked to serve")
    p.set_defaults(func=cmd_member_setup)

    p = msub.add_parser("register", help="(re)register this member with the center")
    p.add_argument("--center", type=_endpoint, required=True)
    p.add_argument("--name", required=True)
    p.add_argument("--address", help="default: the local address that reaches the center")
    p.add_argument("--port", type=int, default=2222)
    p.set_defaults(func=cmd_member_register)

    p = sub.add_parser("remap", help="print the member SQL for a center query (SQL on stdin)")
    p.add_argument("--schema", required=True)
    p.add_argument("--mapping", required=True)
    p.add_argument("--sql", help="center SQL; read from stdin when omitted")
    p.set_defaults(func=cmd_remap)

    fixture = sub.add_parser("fixture", help="embedded-engine helpers")
    fsub = fixture.add_subparsers(dest="fixture_command", required=True)
    p = fsub.add_parser("run", help="load a fixture script and run one query")
    p.add_argument("script")
    p.add_argument("--query", required=True)
    p.set_defaults(func=cmd_fixture_run)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * args.verbose
    if args.command in ("center",) or getattr(args, "member_command", None) == "serve":
        level = min(level, logging.INFO)
    logging.basicConfig(level=max(level, logging.DEBUG), format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        return args.func(args)
    except GridError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
