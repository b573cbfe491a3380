"""Command-line front end.

Exit codes: 0 success, 2 usage or input error, 3 analysis error (not enough
data), 4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import IO, Sequence

from largeactive import __version__
from largeactive.errors import LargeActiveError
from largeactive.evaluation import PlantedSpec, generate_planted, recovery_report
from largeactive.ingest import (
    build_change_history,
    dump_changes,
    load_changes,
    load_facts,
    load_spans,
    parse_git_log_stream,
)
from largeactive.model import AnalysisConfig, DependencyMode, FactsDb, Kind
from largeactive.recommend import (
    RankedReport,
    detect_large_active,
    ensemble_redraw,
    ensemble_split,
    file_activity_stats,
)


class _Raw(str):
    """Pre-formatted JSON number."""


def _fixed(x: float) -> _Raw:
    return _Raw(f"{x:.6f}")


def render_json(obj, indent: int = 0) -> str:
    """Deterministic JSON: keys in insertion order, floats with six decimals."""
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, _Raw):
        return str(obj)
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, float):
        return f"{obj:.6f}"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {render_json(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [pad + render_json(v, indent + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot render {type(obj).__name__}")


def _style(stream: IO[str]):
    plain = "NO_COLOR" in os.environ or not getattr(stream, "isatty", lambda: False)()

    def bold(text: str) -> str:
        return text if plain else f"\033[1m{text}\033[0m"

    return bold


def _config_doc(config: AnalysisConfig) -> dict:
    doc = config.as_dict()
    doc["eig_tolerance"] = _Raw(f"{config.eig_tolerance:.6e}")
    return doc


def _members_by_file(db: FactsDb, members) -> list[dict]:
    grouped: dict[str, list[str]] = {}
    for fid in sorted(members):
        path = db.file_of[fid].path if fid in db else "?"
        grouped.setdefault(path, []).append(fid)
    return [{"file": path, "functions": grouped[path]} for path in sorted(grouped)]


def report_document(report: RankedReport, db: FactsDb, top: int | None = None) -> dict:
    recs = report.recommendations[:top] if top else report.recommendations
    out = []
    for rank, rec in enumerate(recs, start=1):
        item = {
            "rank": rank,
            "kind": rec.kind.value,
            "multiplicity": rec.multiplicity,
            "avg_change_freq": _fixed(rec.avg_change_freq),
            "source_params": list(rec.source_params),
            "members": _members_by_file(db, rec.members),
        }
        if rec.kind is Kind.REDRAW:
            item["target_members"] = sorted(rec.target_members)
            item["client_members"] = sorted(rec.client_members)
            item["single_side"] = rec.single_side
        out.append(item)
    return {
        "tool": "largeactive",
        "version": __version__,
        "kind": report.kind.value,
        "target": report.target_file.path,
        "config": _config_doc(report.config),
        "total_recommendations": len(report.recommendations),
        "recommendations": out,
        "diagnostics": report.diagnostics.as_dict(),
    }


def render_report_table(doc: dict, db: FactsDb, stream: IO[str]) -> str:
    bold = _style(stream)
    guesses = ", ".join(str(g) for g in doc["diagnostics"]["guesses"]) or "none"
    lines = [bold(f"{doc['kind']} recommendations for {doc['target']} (cluster counts tried: {guesses})")]
    if not doc["recommendations"]:
        lines.append("  (no recommendations)")
    for rec in doc["recommendations"]:
        params = ",".join(str(p) for p in rec["source_params"])
        flag = "  [single side]" if rec.get("single_side") else ""
        lines.append(
            bold(f"#{rec['rank']}")
            + f"  multiplicity {rec['multiplicity']}  avg changes {rec['avg_change_freq']}"
            + f"  params {params}{flag}"
        )
        for group in rec["members"]:
            for fid in group["functions"]:
                name = db.function(fid).qualified_name if fid in db else fid
                lines.append(f"    {group['file']} > {name}")
    for note in doc["diagnostics"]["notes"]:
        lines.append(f"note: {note}")
    return "\n".join(lines) + "\n"


def _read(path: str, stdin: IO[str]) -> str:
    if path == "-":
        return stdin.read()
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _config(args) -> AnalysisConfig:
    return AnalysisConfig(
        dependency_mode=DependencyMode(args.mode),
        q_max=args.qmax,
        min_cluster_size=args.min_cluster_size,
        seed=args.seed,
        since=args.since,
        workers=args.jobs,
    )


def cmd_detect(args, out: IO[str], stdin: IO[str]) -> int:
    db = load_facts(_read(args.facts, stdin))
    history = load_changes(_read(args.changes, stdin)).since(args.since)
    found = detect_large_active(file_activity_stats(db, history), args.top)
    if args.format == "json":
        doc = {
            "tool": "largeactive",
            "version": __version__,
            "candidates": [
                {
                    "file": s.file.path,
                    "fanin_files": s.fanin_files,
                    "commit_count": s.commit_count,
                    "fanin_rank": s.fanin_rank,
                    "change_rank": s.change_rank,
                    "score": s.score,
                }
                for s in found
            ],
        }
        out.write(render_json(doc) + "\n")
        return 0
    bold = _style(out)
    width = max([len(s.file.path) for s in found] + [4])
    out.write(bold(f"{'#':>3}  {'file':<{width}}  {'fan-in':>6} {'rank':>4}  {'commits':>7} {'rank':>4}  {'score':>5}") + "\n")
    for i, s in enumerate(found, start=1):
        out.write(
            f"{i:>3}  {s.file.path:<{width}}  {s.fanin_files:>6} {s.fanin_rank:>4}  "
            f"{s.commit_count:>7} {s.change_rank:>4}  {s.score:>5}\n"
        )
    return 0


def _cmd_analysis(args, out: IO[str], stdin: IO[str], kind: Kind) -> int:
    db = load_facts(_read(args.facts, stdin))
    history = load_changes(_read(args.changes, stdin))
    config = _config(args)
    run = ensemble_split if kind is Kind.SPLIT else ensemble_redraw
    report = run(db, history, args.target, config)
    doc = report_document(report, db, args.top)
    if args.format == "json":
        out.write(render_json(doc) + "\n")
    else:
        out.write(render_report_table(doc, db, out))
    return 0


def cmd_split(args, out, stdin) -> int:
    return _cmd_analysis(args, out, stdin, Kind.SPLIT)


def cmd_redraw(args, out, stdin) -> int:
    return _cmd_analysis(args, out, stdin, Kind.REDRAW)


def cmd_mine(args, out: IO[str], stdin: IO[str]) -> int:
    parsed = parse_git_log_stream(_read(args.log, stdin))
    spans = load_spans(_read(args.spans, stdin))
    out.write(dump_changes(build_change_history(parsed, spans)))
    return 0


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x]


def _seeds(text: str) -> list[int]:
    seeds: list[int] = []
    for part in text.split(","):
        if "-" in part:
            lo, hi = part.split("-", 1)
            seeds.extend(range(int(lo), int(hi) + 1))
        elif part:
            seeds.append(int(part))
    return seeds


def cmd_eval(args, out: IO[str], stdin: IO[str]) -> int:
    bold = _style(out)
    out.write(bold("kind    n  m  clients commits noise  seed     ari  exact") + "\n")
    for noise in _floats(args.noise):
        aris = []
        for seed in _seeds(args.seeds):
            spec = PlantedSpec(args.n, args.m, args.clients, args.commits, noise, seed)
            db, history, truth = generate_planted(spec)
            try:
                if args.kind == "split":
                    report = ensemble_split(db, history, truth.target_file)
                else:
                    report = ensemble_redraw(db, history, truth.target_file)
                rec = recovery_report(report.recommendations, truth.groups(args.kind == "redraw"))
                ari, exact = rec.ari, sum(rec.exact)
            except LargeActiveError:
                ari, exact = 0.0, 0
            aris.append(ari)
            out.write(
                f"{args.kind:<6} {args.n:>2} {args.m:>2} {args.clients:>8} {args.commits:>7} "
                f"{noise:>5.2f} {seed:>5} {ari:>7.4f}  {exact}/{args.n}\n"
            )
        out.write(f"mean ari at noise {noise:.2f}: {sum(aris) / len(aris):.4f}\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="largeactive",
        description="Refactoring recommendations for large, frequently changed source files.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_target: bool):
        p.add_argument("facts", help="facts document (JSON)")
        p.add_argument("changes", help="change document (JSON)")
        if with_target:
            p.add_argument("target", help="repository-relative path of the file to decompose")
        p.add_argument("--top", type=int, default=None if with_target else 10)
        p.add_argument("--since", type=int, default=None, help="ignore commits before this unix time")
        p.add_argument("--format", choices=("table", "json"), default="table")

    p = sub.add_parser("detect", help="rank large-active candidate files")
    common(p, with_target=False)
    p.set_defaults(func=cmd_detect)

    for name, func, help_text in (
        ("split", cmd_split, "interface splitting recommendations"),
        ("redraw", cmd_redraw, "interface redrawing recommendations"),
    ):
        p = sub.add_parser(name, help=help_text)
        common(p, with_target=True)
        p.add_argument(
            "--mode", choices=[m.value for m in DependencyMode], default=DependencyMode.TRANSITIVE.value
        )
        p.add_argument("--qmax", type=int, default=3)
        p.add_argument("--min-cluster-size", type=int, default=2)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--jobs", type=int, default=1, help="worker threads (output is identical)")
        p.set_defaults(func=func)

    p = sub.add_parser("mine", help="turn a raw diff log plus span table into a change document")
    p.add_argument("log", help="raw log file, or - for standard input")
    p.add_argument("--spans", required=True, help="span document (JSON)")
    p.set_defaults(func=cmd_mine)

    p = sub.add_parser("eval", help="recovery sweep on planted synthetic data")
    p.add_argument("--kind", choices=("split", "redraw"), default="split")
    p.add_argument("--n", type=int, default=4, help="responsibilities")
    p.add_argument("--m", type=int, default=5, help="functions per responsibility")
    p.add_argument("--clients", type=int, default=6)
    p.add_argument("--commits", type=int, default=10)
    p.add_argument("--noise", default="0,0.05,0.1", help="comma-separated noise rates")
    p.add_argument("--seeds", default="1-10", help="seed list, e.g. 1-10 or 1,2,5")
    p.set_defaults(func=cmd_eval)
    return parser


def main(
    argv: Sequence[str] | None = None,
    out: IO[str] | None = None,
    err: IO[str] | None = None,
    stdin: IO[str] | None = None,
) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    stdin = stdin or sys.stdin
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args, out, stdin)
    except LargeActiveError as exc:
        err.write(f"error: {exc.kind}: {_one_line(exc)}\n")
        return exc.exit_code
    except OSError as exc:
        err.write(f"error: io: {_one_line(exc)}\n")
        return 2
    except ValueError as exc:
        err.write(f"error: input: {_one_line(exc)}\n")
        return 2


def _one_line(exc: BaseException) -> str:
    return " ".join(str(exc).split())


if __name__ == "__main__":
    sys.exit(main())
