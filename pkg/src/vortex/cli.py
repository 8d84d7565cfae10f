"""``vortex`` command line.

Exit codes: 0 ok, 2 usage, 3 I/O, 4 validation, 5 backend, 6 protocol.
Diagnostics go to stderr; data goes to stdout or files.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

from .errors import ArchiveIOError, UsageError, VortexError
from .jsonio import canonical_dumps, read_json, write_json

log = logging.getLogger("vortex")


def _addr(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit():
        raise argparse.ArgumentTypeError(f"expected host:port, got {text!r}")
    return host or "127.0.0.1", int(port)


def _emit(doc, fmt: str, text: str | None = None) -> None:
    if fmt == "json" or text is None:
        sys.stdout.write(canonical_dumps(doc) + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    sys.stdout.flush()


def _format_flag(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=("text", "table", "json"), default="text",
                   help="json prints canonical JSON; table is an alias of text")


def _scenario(spec: str):
    from .physiology import builtin_scenario, load_scenario

    if Path(spec).is_file():
        return load_scenario(spec)
    if Path(spec).suffix == ".json":
        raise ArchiveIOError(f"scenario file not found: {spec}")
    return builtin_scenario(spec)


def _params(args):
    from .nts import InferenceParams

    base = {"temperature": args.temperature, "top_p": args.top_p,
            "max_tokens": args.max_tokens, "seed": args.seed}
    if getattr(args, "params", None):
        spec = args.params
        if Path(spec).is_file():
            doc = read_json(spec)
        else:
            try:
                doc = json.loads(spec)
            except ValueError:
                raise ArchiveIOError(f"--params: not a file or JSON object: {spec}") from None
        if not isinstance(doc, dict):
            raise UsageError("--params must be a JSON object")
        base.update(doc)
    return InferenceParams.from_json(base)


def _inference_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--backend", help="mock:<path> or http(s) URL (default $VORTEX_BACKEND_URL)")
    p.add_argument("--temperature", type=float, default=0.6)
    p.add_argument("--top-p", type=float, default=0.95)
    p.add_argument("--max-tokens", type=int, default=32768)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--params", default=None,
                   help="JSON object or file overriding the sampling flags")
    p.add_argument("--window", type=float, default=30.0,
                   help="temporal safeguard window in seconds")
    p.add_argument("--salvage", action="store_true",
                   help="drop violating edges instead of rejecting the graph")


# -- subcommands ----------------------------------------------------------------

def cmd_serve(args) -> int:
    from .server import ArchiveIncomplete, SessionConfig, serve

    config = SessionConfig(_scenario(args.scenario), args.bind_reliable, args.bind_pose,
                           args.tick_hz, args.duration, session_id=args.session_id,
                           join_timeout=args.join_timeout, upload_timeout=args.upload_timeout,
                           spin_s=args.spin_ms / 1000.0)

    def ready(server):
        _emit({"event": "ready", "reliable": list(server.reliable_addr),
               "pose": list(server.pose_addr), "session_id": server.session.session_id}, "json")

    try:
        archive = asyncio.run(serve(config, args.archive_dir, ready))
    except ArchiveIncomplete as exc:
        _emit({"event": "archived", "archive": str(args.archive_dir), "incomplete": exc.roles},
              "json")
        raise
    _emit({"event": "archived", "archive": str(args.archive_dir), "incomplete": [],
           "final_version": archive.metrics["final_version"],
           "tick": archive.metrics.get("tick"), "pose": archive.metrics.get("pose")}, "json")
    return 0


def cmd_bot(args) -> int:
    from .bots import LOOPBACK, load_bot_script, load_profile, run_bot
    from .core import Role
    from .server import AdmissionError

    script = load_bot_script(args.script)
    if Role.parse(args.role) is not script.role:
        raise UsageError(f"--role {args.role} does not match the script's role "
                         f"{script.role.value}")
    profile = load_profile(args.net_profile) if args.net_profile else LOOPBACK
    pose = args.pose_server or (args.server[0], args.server[1] + 1)
    report = asyncio.run(run_bot(script, args.server, pose, profile, args.seed,
                                 pose_hz=args.pose_hz,
                                 clock_skew_us=int(args.clock_skew_ms * 1000)))
    doc = report.to_json()
    if args.report:
        write_json(args.report, doc)
    _emit(doc, "json")
    if report.rejected:
        raise AdmissionError(f"join rejected: {report.rejected}")
    if report.aborted:
        from .protocol import FramingError

        raise FramingError("disconnected before the session ended")
    return 0


def cmd_transcript(args) -> int:
    from .archive import SessionArchive
    from .transcript import (filter_by_confidence, merge_streams, render_transcript_text,
                             write_transcript)

    archive = SessionArchive.load(args.session)
    deny = []
    if args.deny_list:
        path = Path(args.deny_list)
        if not path.is_file():
            raise ArchiveIOError(f"deny list not found: {path}")
        deny = [w.strip() for w in path.read_text(encoding="utf-8").splitlines() if w.strip()]
    tr = merge_streams(archive, deny)
    if args.min_confidence is not None:
        tr = filter_by_confidence(tr, args.min_confidence)
    if args.out:
        write_transcript(tr, args.out)
    _emit({"session_id": tr.session_id, "entries": [e.to_json() for e in tr.entries],
           "warnings": list(tr.warnings)}, args.format, render_transcript_text(tr))
    return 0


def cmd_analyze(args) -> int:
    from .graphs import export
    from .nts import make_backend, sensitivity_sweep, analyze_transcript
    from .transcript import load_transcript

    tr = load_transcript(args.transcript)
    backend = make_backend(args.backend)
    if args.sweep:
        rows = sensitivity_sweep(tr, backend, args.sweep, params=_params(args), window=args.window)
        text = "\n".join("\t".join(str(r.get(k)) for k in ("template", "threshold", "entries",
                                                          "edges", "violations")) for r in rows)
        _emit(rows, args.format, text)
        return 0
    result = analyze_transcript(tr, backend, _params(args), salvage=args.salvage,
                                window=args.window)
    data = export(result.graph, "canonical-json")
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_bytes(data)
    for err in result.report.errors:
        print(f"salvage: dropped {err}", file=sys.stderr)
    summary = {"edges": len(result.graph.edges), "violations": [str(e) for e in result.report.errors],
               "out": args.out}
    _emit(summary if args.out else json.loads(data), args.format,
          None if not args.out else f"{len(result.graph.edges)} edges written to {args.out}")
    return 0


def _load_graph(path: str):
    from .nts import graph_from_document

    return graph_from_document(read_json(path))


def cmd_agree(args) -> int:
    from .core import SessionClock
    from .nts import ExpertAnnotation, agreement

    g = _load_graph(args.graph)
    clock = SessionClock(0, g.duration) if g.duration else None
    expert = ExpertAnnotation.from_json(read_json(args.expert), clock)
    res = agreement(g, expert, args.window)
    kappa = "undefined" if res.kappa is None else f"{res.kappa:.4f}"
    text = (f"matched\t{res.matched}\nunmatched_llm\t{res.unmatched_llm}\n"
            f"unmatched_expert\t{res.unmatched_expert}\n"
            f"percent_agreement\t{res.percent_agreement:.4f}\nkappa\t{kappa}")
    _emit(res.to_json(), args.format, text)
    return 0


def cmd_metrics(args) -> int:
    from .graphs import aggregate_by_role
    from .report import metrics_table

    paths = list(args.graph or [])
    if args.corpus:
        corpus = Path(args.corpus)
        if not corpus.is_dir():
            raise ArchiveIOError(f"corpus directory not found: {corpus}")
        paths += sorted(str(p) for p in corpus.glob("*.json"))
    if not paths:
        raise UsageError("give --graph and/or --corpus")
    graphs = [_load_graph(p) for p in paths]
    summary = aggregate_by_role(graphs)
    _emit(summary.to_json(), args.format, metrics_table(summary.rows()))
    return 0


def cmd_export(args) -> int:
    from .graphs import export

    data = export(_load_graph(args.graph), args.format)
    if args.out:
        Path(args.out).write_bytes(data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    return 0


def cmd_stats(args) -> int:
    from .report import metrics_table
    from .stats import SUS_ITEMS, likert_descriptives, load_responses, pearson

    rs = load_responses(args.responses)
    desc = likert_descriptives(rs)
    doc: dict = {"n": len(rs.rows), "items": {k: asdict(v) for k, v in desc.items()}}
    rows = [["item", "n", "mean ± sd", "median"]]
    rows += [[k, str(v.n), v.render(), str(v.median)] for k, v in desc.items()]
    if set(SUS_ITEMS) <= set(rs.items):
        doc["sus"] = rs.column("SUS")
    if args.correlate:
        a, b = args.correlate
        r = pearson(rs.column(a), rs.column(b))
        doc["correlation"] = {"x": a, "y": b, "r": r}
    text = metrics_table(rows)
    if "sus" in doc:
        text += f"SUS\t{len(doc['sus'])}\tmean {sum(doc['sus']) / len(doc['sus']):.2f}\n"
    if args.correlate:
        text += f"pearson r({a}, {b})\t{doc['correlation']['r']:.4f}\n"
    if args.figure:
        from .plotting import plot_likert

        plot_likert({item: rs.column(item) for item in rs.items}, args.figure)
    _emit(doc, args.format, text)
    return 0


def cmd_report(args) -> int:
    from .archive import SessionArchive
    from .nts import make_backend
    from .report import build_report

    archive = SessionArchive.load(args.session)
    backend = make_backend(args.backend)
    expert = read_json(args.expert) if args.expert else None
    bundle = build_report(archive, backend, args.out, expert=expert, params=_params(args),
                          salvage=args.salvage, window=args.window,
                          figures=not args.no_figures)
    text = "\n".join(f"{k}\t{v}" for k, v in sorted(bundle.files.items()))
    _emit({"out": str(args.out), **bundle.manifest()}, args.format, text)
    return 0


def cmd_simulate(args) -> int:
    from .physiology import events_from_log, replay

    script = _scenario(args.scenario)
    interventions = events_from_log(read_json(args.interventions)) if args.interventions else []
    traj = replay(script, interventions, args.until, args.every)
    rows = [{"t": t, **v.to_json()} for t, v in traj]
    keys = ["t", "hr", "sbp", "dbp", "map", "spo2", "rr", "etco2", "blood_loss"]
    text = "\t".join(keys) + "\n" + "\n".join(
        "\t".join(f"{r[k]:.2f}" for k in keys) for r in rows)
    if args.figure:
        from .plotting import plot_vitals

        plot_vitals(traj, args.figure)
    _emit(rows, args.format, text)
    return 0


# -- parser -------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vortex", description="Operating-room team simulation and debrief tools.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", metavar="command", required=True)

    p = sub.add_parser("serve", help="run a session server until the session ends")
    p.add_argument("--scenario", required=True, help="scenario JSON or Bleeding/Pneumothorax")
    p.add_argument("--bind-reliable", type=_addr, default=("127.0.0.1", 7400))
    p.add_argument("--bind-pose", type=_addr, default=("127.0.0.1", 7401))
    p.add_argument("--duration", type=float, default=None)
    p.add_argument("--tick-hz", type=int, default=60)
    p.add_argument("--archive-dir", required=True)
    p.add_argument("--session-id", type=int, default=None)
    p.add_argument("--join-timeout", type=float, default=None)
    p.add_argument("--upload-timeout", type=float, default=10.0)
    p.add_argument("--spin-ms", type=float, default=4.0,
                   help="busy-wait this long before each tick deadline (0 disables)")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("bot", help="run one scripted participant")
    p.add_argument("--role", required=True)
    p.add_argument("--script", required=True)
    p.add_argument("--server", type=_addr, required=True, help="reliable endpoint host:port")
    p.add_argument("--pose-server", type=_addr, default=None,
                   help="datagram endpoint (default: reliable port + 1)")
    p.add_argument("--net-profile", default=None, help="profile JSON or bundled name")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pose-hz", type=float, default=30.0)
    p.add_argument("--clock-skew-ms", type=float, default=0.0)
    p.add_argument("--report", default=None, help="also write the report JSON here")
    p.set_defaults(func=cmd_bot)

    p = sub.add_parser("transcript", help="merge an archive into a unified transcript")
    p.add_argument("--session", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--deny-list", default=None, help="file with one identifying token per line")
    p.add_argument("--min-confidence", type=float, default=None)
    _format_flag(p)
    p.set_defaults(func=cmd_transcript)

    p = sub.add_parser("analyze", help="transcript to validated interaction graph")
    p.add_argument("--transcript", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--sweep", type=float, nargs="+", default=None,
                   help="ASR-confidence thresholds for a sensitivity sweep")
    _inference_flags(p)
    _format_flag(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("agree", help="agreement between a graph and expert annotations")
    p.add_argument("--graph", required=True)
    p.add_argument("--expert", required=True)
    p.add_argument("--window", type=float, default=10.0)
    _format_flag(p)
    p.set_defaults(func=cmd_agree)

    p = sub.add_parser("metrics", help="per-role degree and clustering table")
    p.add_argument("--graph", action="append", default=None, help="graph JSON (repeatable)")
    p.add_argument("--corpus", default=None, help="directory of graph JSON files")
    _format_flag(p)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("export", help="convert a graph document")
    p.add_argument("--graph", required=True)
    p.add_argument("--format", choices=("canonical-json", "json", "dot", "graphml"),
                   required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("stats", help="questionnaire descriptives, SUS and correlation")
    p.add_argument("--responses", required=True)
    p.add_argument("--correlate", nargs=2, metavar=("COL_A", "COL_B"))
    p.add_argument("--figure", default=None, help="write a Likert box plot here")
    _format_flag(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("report", help="assemble a session debrief bundle")
    p.add_argument("--session", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--expert", default=None)
    p.add_argument("--no-figures", action="store_true")
    _inference_flags(p)
    _format_flag(p)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("simulate", help="replay a scenario offline and print vitals")
    p.add_argument("--scenario", required=True)
    p.add_argument("--interventions", default=None, help="JSON list of timed interventions")
    p.add_argument("--until", type=float, default=None)
    p.add_argument("--every", type=float, default=10.0)
    p.add_argument("--figure", default=None)
    _format_flag(p)
    p.set_defaults(func=cmd_simulate)
    return parser


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits 2 on usage errors
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="vortex: %(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except VortexError as exc:
        print(f"vortex {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except KeyboardInterrupt:
        return 130


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
