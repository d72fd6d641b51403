"""Command line interface.

Exit codes: 0 success, 1 usage error, 2 invalid model document,
3 unresolved inconsistency (resolution aborted or impossible).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Optional

from . import session as sess
from .analyze import classify
from .errors import GcsError, ModelError, SessionError, UnresolvableError
from .linearize import build_perturbation_system, witness_residual
from .model import EPS_WITNESS, Model, parse_model, serialize_model
from .overdetect import detect_minimal_over_parts, greedy_over_baseline
from .welldetect import detect_maximal_well_parts, greedy_well_baseline

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INVALID_MODEL = 2
EXIT_UNRESOLVED = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _load_model(path: str) -> Model:
    p = Path(path)
    if not p.is_file():
        raise ModelError(f"no such model document: {path}")
    return parse_model(p.read_text(encoding="utf-8"))


def _emit(doc: dict, as_json: bool, lines) -> None:
    if as_json:
        print(json.dumps(doc, indent=2, sort_keys=True))
    else:
        for line in lines:
            print(line)


def _cmd_validate(args) -> int:
    m = _load_model(args.model)
    resid = witness_residual(m)
    ok = resid <= EPS_WITNESS
    doc = {
        "valid": ok,
        "witness_residual": resid,
        "entities": len(m.entities),
        "constraints": len(m.constraints),
    }
    _emit(
        doc,
        args.json,
        [
            f"entities: {len(m.entities)}, constraints: {len(m.constraints)}",
            f"witness residual: {resid:.3g}",
            "valid witness" if ok else "INVALID witness (geometry violates constraints)",
        ],
    )
    return EXIT_OK if ok else EXIT_INVALID_MODEL


def _cmd_analyze(args) -> int:
    m = _load_model(args.model)
    state = classify(m)
    doc = sess.state_document(state)
    if state.well:
        label = "well-constrained"
    else:
        flags = [name for name, on in (("over", state.over), ("under", state.under)) if on]
        label = "-and-".join(flags) + "-constrained"
    _emit(
        doc,
        args.json,
        [f"{label}, over_dim={state.over_dim}, under_dim={state.under_dim}"],
    )
    return EXIT_OK


def _cmd_detect(args) -> int:
    m = _load_model(args.model)
    ps = build_perturbation_system(m)
    state = classify(m, ps)
    over_parts = detect_minimal_over_parts(m, ps) if state.over else []
    well_parts = (
        detect_maximal_well_parts(m, ps) if (not state.over and state.under) else []
    )
    doc = {
        "state": sess.state_document(state),
        "over_parts": [list(p.constraints) for p in over_parts],
        "well_parts": [list(p.entities) for p in well_parts],
    }
    lines = [f"state: over={state.over} under={state.under}"]
    for i, p in enumerate(over_parts, 1):
        lines.append(f"over part {i}: {{{', '.join(p.constraints)}}}")
    for p in well_parts:
        lines.append(f"well part {p.rank_order}: {{{', '.join(p.entities)}}}")
    if state.over and state.under:
        lines.append("note: resolve over-constraint before well-part detection")
    if args.report_dir:
        from .report import render_parts_figure, write_parts_csv

        out = Path(args.report_dir)
        csv_path = write_parts_csv(out / "parts.csv", over_parts, well_parts)
        fig_path = render_parts_figure(
            m, out / "constraint_graph.png", over_parts, well_parts,
            title=f"detection: {Path(args.model).name}",
        )
        doc["report_files"] = [str(csv_path), str(fig_path)]
        lines.append(f"report written to {csv_path} and {fig_path}")
    _emit(doc, args.json, lines)
    return EXIT_OK


def _cmd_compare(args) -> int:
    m = _load_model(args.model)
    ps = build_perturbation_system(m)
    state = classify(m, ps)
    doc = {"state": sess.state_document(state)}
    lines = []
    optimal_over = greedy_over = []
    optimal_well = greedy_well = []
    if state.over:
        optimal_over = detect_minimal_over_parts(m, ps)
        greedy_over = greedy_over_baseline(m, ps)
        doc["optimal_over"] = [list(p.constraints) for p in optimal_over]
        doc["greedy_over"] = [list(p.constraints) for p in greedy_over]
        lines.append(
            "over parts  optimal: "
            + " | ".join(",".join(p.constraints) for p in optimal_over)
        )
        lines.append(
            "over parts  greedy : "
            + " | ".join(",".join(p.constraints) for p in greedy_over)
        )
    elif state.under:
        optimal_well = detect_maximal_well_parts(m, ps)
        greedy_well = greedy_well_baseline(m, ps)
        doc["optimal_well"] = [list(p.entities) for p in optimal_well]
        doc["greedy_well"] = [list(p.entities) for p in greedy_well]
        lines.append(
            "well parts  optimal: "
            + " | ".join(",".join(p.entities) for p in optimal_well)
        )
        lines.append(
            "well parts  greedy : "
            + " | ".join(",".join(p.entities) for p in greedy_well)
        )
    else:
        lines.append("model is well-constrained; nothing to compare")
    if args.report_dir:
        from .report import render_comparison_figure, write_parts_csv

        out = Path(args.report_dir)
        csv_opt = write_parts_csv(out / "parts_optimal.csv", optimal_over, optimal_well)
        csv_greedy = write_parts_csv(out / "parts_greedy.csv", greedy_over, greedy_well)
        fig = render_comparison_figure(
            m, out / "comparison.png",
            optimal_over=optimal_over, greedy_over=greedy_over,
            optimal_well=optimal_well, greedy_well=greedy_well,
        )
        doc["report_files"] = [str(csv_opt), str(csv_greedy), str(fig)]
        lines.append(f"report written to {out}")
    _emit(doc, args.json, lines)
    return EXIT_OK


def _print_presentation(s: sess.Session) -> None:
    pres = s.presentation
    state = s.state
    print(
        f"[{s.phase.value}] over_dim={state.over_dim} under_dim={state.under_dim} "
        f"target={pres.target_key}"
    )
    for i, opt in enumerate(pres.options, start=1):
        marker = "*" if i == 1 else " "
        print(
            f" {marker}{i}. {opt.describe()}  (precedence {opt.precedence}, "
            f"rate {opt.score:.4g})"
        )
    if pres.forced:
        print("  note: single remaining option; a minimal part forces this removal")


def _resolve_interactive(s: sess.Session) -> Optional[sess.Session]:
    while s.phase is not sess.Phase.DONE:
        _print_presentation(s)
        try:
            raw = input("accept [number|a], r=reject top, u=undo, q=quit> ").strip()
        except EOFError:
            return None
        try:
            if raw in ("q", "quit"):
                return None
            if raw in ("", "a", "accept"):
                s = sess.accept(s, s.presentation.top)
            elif raw in ("r", "reject"):
                s = sess.reject(s, s.presentation.top)
            elif raw in ("u", "undo"):
                s = sess.undo(s)
            elif raw.isdigit() and 1 <= int(raw) <= len(s.presentation.options):
                s = sess.accept(s, s.presentation.options[int(raw) - 1])
            else:
                print(f"unrecognized input {raw!r}")
        except SessionError as exc:
            print(f"cannot do that: {exc}")
    return s


def _cmd_resolve(args) -> int:
    m = _load_model(args.model)
    s = sess.start(m)
    if args.auto:
        try:
            s = sess.auto_resolve(s)
        except UnresolvableError as exc:
            print(f"unresolvable: {exc}", file=sys.stderr)
            return EXIT_UNRESOLVED
    else:
        result = _resolve_interactive(s)
        if result is None:
            print("resolution aborted", file=sys.stderr)
            return EXIT_UNRESOLVED
        s = result
    n_accept = sum(1 for e in s.journal if e.verdict == "accept")
    doc = {
        "state": sess.state_document(s.state),
        "acceptances": n_accept,
        "decisions": len(s.journal),
    }
    if args.out:
        Path(args.out).write_text(serialize_model(s.model), encoding="utf-8")
        doc["out"] = args.out
    if args.journal:
        Path(args.journal).write_text(sess.journal_jsonl(s), encoding="utf-8")
        doc["journal"] = args.journal
    _emit(
        doc,
        args.json,
        [f"well-constrained after {n_accept} acceptance(s)"]
        + ([f"model written to {args.out}"] if args.out else [])
        + ([f"journal written to {args.journal}"] if args.journal else []),
    )
    return EXIT_OK


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    port = args.port or int(os.environ.get("GCSDOCTOR_PORT", "8075"))
    uvicorn.run(create_app(), host=args.host, port=port, log_level="warning")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gcsdoctor", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(fn=fn)
        if name != "serve":
            p.add_argument("model", help="model document (JSON)")
            p.add_argument("--json", action="store_true", help="machine-readable output")
        return p

    add("validate", _cmd_validate, "check document schema and witness validity")
    add("analyze", _cmd_analyze, "classify the constraint state")
    p = add("detect", _cmd_detect, "list minimal over / maximal well parts")
    p.add_argument("--report-dir", help="write parts.csv and constraint_graph.png here")
    p = add("resolve", _cmd_resolve, "interactively (or automatically) resolve")
    p.add_argument("--auto", action="store_true", help="accept top suggestions")
    p.add_argument("--out", help="write the resolved model document here")
    p.add_argument("--journal", help="write the decision journal (JSON lines) here")
    p = add("compare", _cmd_compare, "optimal detection vs greedy baseline")
    p.add_argument("--report-dir", help="write comparison csv/figures here")
    p = sub.add_parser("serve", help="run the HTTP JSON service")
    p.set_defaults(fn=_cmd_serve)
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--host", default="127.0.0.1")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.fn(args)
    except (ModelError, GcsError) as exc:
        if isinstance(exc, UnresolvableError):
            print(f"unresolvable: {exc}", file=sys.stderr)
            return EXIT_UNRESOLVED
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID_MODEL


if __name__ == "__main__":
    sys.exit(main())
