"""Command-line driver.

    offloadkit energy --packets P --methods M [--config C] --out-dot D --out-report R
    offloadkit constraints --facts F [--config C] --out-findings O --out-stats S
    offloadkit --print-config

Exit status: 0 success, 1 input parse/validation failure, 2 invalid configuration.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

from offloadkit import calltree, codefacts, config, correlate, energy, trace

log = logging.getLogger("offloadkit")

EXIT_OK, EXIT_INPUT, EXIT_CONFIG = 0, 1, 2


def _read(path: str) -> bytes:
    with open(path, "rb") as fh:
        return fh.read()


def _write(path: str, text: str):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _load_config(path: str | None, model: str | None) -> config.RunConfig:
    try:
        cfg = config.load(path) if path else config.RunConfig()
    except OSError as exc:
        raise config.ConfigError(str(exc)) from None
    if model:
        cfg = dataclasses.replace(cfg, model=model)
    return cfg


def run_energy(cfg: config.RunConfig, packets_data, methods_data, packets_name=None,
               methods_name=None) -> dict[str, str]:
    """Full energy pipeline; returns the output texts keyed by artifact."""
    packets = trace.parse_packet_trace(packets_data, source=packets_name)
    methods = trace.parse_method_trace(methods_data, source=methods_name)
    flows = trace.segment_flows(packets, cfg.idle_gap_us)
    flt = cfg.call_filter
    assignment = correlate.assign_flows_to_threads(
        flows, methods.threads, flt, cfg.bin_width_us, cfg.max_lag_bins, cfg.threshold
    )
    assignment = correlate.associate_packets_to_calls(assignment, flows, methods.threads, flt)
    for fi, tid in enumerate(assignment.flow_threads):
        if tid is None:
            log.warning("flow %d (%d packets) not attributed to any thread (best score %.3f)",
                        fi, len(flows[fi].indices), assignment.best_score(fi))
        elif assignment.low_confidence[fi]:
            log.warning("flow %d: low-confidence attribution to thread %d", fi, tid)

    model = cfg.energy_model
    horizon = energy.default_horizon(packets, model)
    trees = []
    for tid in sorted(methods.threads):
        tree = calltree.build_call_tree(methods.threads[tid], cfg.collapse_prefixes)
        trees.append(calltree.aggregate_traffic(tree, assignment, packets, model, horizon))
    return {
        "dot": calltree.emit_dot(trees, cfg.min_bytes_filter),
        "report": calltree.emit_report(trees),
        "assignment": correlate.format_assignment(assignment, flows, methods.threads, len(packets)),
    }


def run_constraints(cfg: config.RunConfig, facts_data) -> dict[str, str]:
    db = codefacts.load_facts(facts_data, cfg.always_serializable)
    findings = codefacts.analyze(db, cfg.constraint_config)
    stats = codefacts.summarize_stats(findings)
    return {
        "findings": codefacts.format_findings(findings),
        "stats": codefacts.format_stats(stats),
    }


def cmd_energy(args) -> int:
    cfg = _load_config(args.config, args.model)
    out = run_energy(cfg, _read(args.packets), _read(args.methods), args.packets, args.methods)
    _write(args.out_dot, out["dot"])
    _write(args.out_report, out["report"])
    if args.out_assignment:
        _write(args.out_assignment, out["assignment"])
    return EXIT_OK


def cmd_constraints(args) -> int:
    cfg = _load_config(args.config, None)
    out = run_constraints(cfg, _read(args.facts))
    _write(args.out_findings, out["findings"])
    _write(args.out_stats, out["stats"])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="offloadkit",
        description="Traffic/energy attribution and offloading constraint analysis.",
    )
    parser.add_argument("--print-config", action="store_true",
                        help="print the full default configuration (or --config merged) and exit")
    parser.add_argument("--config", help="run configuration (JSON)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command")

    e = sub.add_parser("energy", help="attribute traffic and energy to methods")
    e.add_argument("--packets", required=True)
    e.add_argument("--methods", required=True)
    e.add_argument("--config", dest="sub_config")
    e.add_argument("--model", choices=("3g", "wifi"))
    e.add_argument("--out-dot", required=True)
    e.add_argument("--out-report", required=True)
    e.add_argument("--out-assignment", help="optional flow/packet attribution listing")
    e.set_defaults(func=cmd_energy)

    c = sub.add_parser("constraints", help="find offloading constraints in a facts document")
    c.add_argument("--facts", required=True)
    c.add_argument("--config", dest="sub_config")
    c.add_argument("--out-findings", required=True)
    c.add_argument("--out-stats", required=True)
    c.set_defaults(func=cmd_constraints)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
        stream=sys.stderr,
    )
    if getattr(args, "sub_config", None):
        args.config = args.sub_config
    try:
        if args.print_config:
            sys.stdout.write(_load_config(args.config, None).dumps())
            return EXIT_OK
        if not args.command:
            parser.print_usage(sys.stderr)
            return EXIT_CONFIG
        return args.func(args)
    except config.ConfigError as exc:
        log.error("invalid configuration: %s", exc)
        return EXIT_CONFIG
    except (trace.TraceFormatError, codefacts.FactsFormatError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_INPUT
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
