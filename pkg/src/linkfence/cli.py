"""Command-line entry point: run the filtering proxy and its management API."""
from __future__ import annotations

import argparse
import logging
import signal
import threading
from pathlib import Path

from .config import ProxyConfig, parse_hostport
from .engine import FilterEngine
from .mgmt import MgmtServer
from .proxy import ProxyServer

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="linkfence",
        description=(
            "Filtering HTTP forward proxy: auto-allows a page's static links, "
            "meters cross-domain exfiltration capacity per page, prompts on "
            "unknown external requests, and injects a pop-up/frame guard script."
        ),
    )
    parser.add_argument("--listen", default="127.0.0.1:8118", help="proxy address (default %(default)s)")
    parser.add_argument("--mgmt-listen", default="127.0.0.1:8119", help="management API address (default %(default)s)")
    parser.add_argument("--threshold-bits", type=int, default=50, help="per-page leakage budget in bits (default %(default)s)")
    parser.add_argument("--rules-file", type=Path, default=None, help="permanent rules file (JSON lines)")
    parser.add_argument("--alert-timeout-secs", type=float, default=30.0, help="seconds before a held request is denied (default %(default)s)")
    parser.add_argument("--no-inject", action="store_true", help="disable the guard-script injector")
    parser.add_argument("--max-body-bytes", type=int, default=8 * 1024 * 1024, help="rewrite buffer cap (default %(default)s)")
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    parser.add_argument("--nav-heuristic", action="store_true", help="treat GET+Accept:text/html as top-level navigation")
    parser.add_argument("--permanent-deny-overrides", action="store_true", help="permanent deny rules beat temporary auto-allows")
    parser.add_argument("--console-dir", type=Path, default=None, help="static console assets served at /console")
    parser.add_argument(
        "--alias",
        action="append",
        default=[],
        metavar="HOST=ADDR:PORT",
        help="map an upstream hostname to a concrete address (repeatable; lab use)",
    )
    return parser


def config_from_args(args: argparse.Namespace) -> ProxyConfig:
    aliases = {}
    for spec in args.alias:
        host, _, addr = spec.partition("=")
        if not host or not addr:
            raise SystemExit(f"bad --alias {spec!r}, expected HOST=ADDR:PORT")
        aliases[host.lower()] = parse_hostport(addr)
    return ProxyConfig(
        listen=parse_hostport(args.listen),
        mgmt_listen=parse_hostport(args.mgmt_listen),
        threshold_bits=args.threshold_bits,
        rules_file=args.rules_file,
        alert_timeout_secs=args.alert_timeout_secs,
        inject_enabled=not args.no_inject,
        max_body_bytes=args.max_body_bytes,
        log_level=args.log_level,
        nav_heuristic=args.nav_heuristic,
        permanent_deny_overrides=args.permanent_deny_overrides,
        host_aliases=aliases,
        console_dir=args.console_dir,
    )


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    config = config_from_args(args)
    engine = FilterEngine(config)
    proxy = ProxyServer(engine)
    mgmt = MgmtServer(engine)
    logger.info("proxy listening on %s:%d", *proxy.bound_address)
    logger.info("management API on http://%s:%d/api", *mgmt.bound_address)

    stop = threading.Event()
    signal.signal(signal.SIGINT, lambda *_: stop.set())
    signal.signal(signal.SIGTERM, lambda *_: stop.set())
    proxy.serve_in_thread()
    mgmt.serve_in_thread()
    stop.wait()
    logger.info("shutting down")
    proxy.shutdown()
    mgmt.shutdown()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
