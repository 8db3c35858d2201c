"""Batch command-line front end.

Subcommands: ``check`` (property checks on one mechanism), ``verify``
(claim verification over a mechanism space), ``synthesize`` (pruned
search for onto strategyproof tables), ``mine`` (counterexample hunt),
``export-dot`` (tree drawing with optional witness overlay).

Exit codes: 0 all properties hold / claim confirmed, 1 violated or
refuted, 2 usage or input errors, 3 budget exhausted without a verdict.
All randomness flows from an explicit ``--seed``; report files contain
no timings, so identical inputs give byte-identical outputs regardless
of ``--workers`` (default from ``SPTREE_WORKERS``).
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import axioms, dot, line, search
from .mechanisms import (
    MechanismTableError,
    dictator_mechanism,
    fig1_mechanism,
    load_table_file,
    median_mechanism,
    save_table_file,
)
from .reports import CONFIRMED, INCONCLUSIVE, REFUTED
from .tree import TreeParseError, load_tree

EXIT_OK = 0
EXIT_VIOLATED = 1
EXIT_USAGE = 2
EXIT_BUDGET = 3


class UsageError(Exception):
    pass


def _default_workers() -> int:
    raw = os.environ.get("SPTREE_WORKERS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def resolve_mechanism(spec: str, tree, agents: int | None):
    """Mechanism from 'builtin:<name>[:params]' or a table file path."""
    if spec.startswith("builtin:"):
        parts = spec.split(":")
        name = parts[1] if len(parts) > 1 else ""
        if name == "fig1":
            return fig1_mechanism()
        if name == "dictator":
            if tree is None or agents is None:
                raise UsageError("builtin:dictator needs --tree and --agents")
            if len(parts) != 3:
                raise UsageError("builtin:dictator:<agent-index>")
            return dictator_mechanism(tree, agents, int(parts[2]))
        if name == "median":
            if tree is None or agents is None:
                raise UsageError("builtin:median needs --tree and --agents")
            phantoms = [int(t) for t in parts[2].split(",")] if len(parts) > 2 and parts[2] else []
            return median_mechanism(tree, agents, phantoms)
        raise UsageError(f"unknown builtin mechanism {name!r}")
    return load_table_file(Path(spec), tree=tree)


def _write_text(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(text)


def cmd_check(args) -> int:
    tree = load_tree(args.tree) if args.tree else None
    mech = resolve_mechanism(args.mech, tree, args.agents)
    props = [p.strip() for p in args.props.split(",") if p.strip()]
    if not props:
        raise UsageError("no properties requested")

    sections = []
    any_violated = False
    first_witness = None
    for prop in props:
        if prop == "sp-ordinal":
            if not args.prefs:
                raise UsageError("property sp-ordinal needs --prefs")
            with open(args.prefs, "r", encoding="utf-8") as handle:
                prefs = axioms.parse_preferences(handle.read(), mech.tree.vertex_count)
            report = axioms.check_sp_under_preferences(mech, prefs)
        elif prop == "uncompromising":
            report = axioms.check_uncompromising(mech)
        else:
            report = axioms.check_property(mech, prop, full=args.full)
        sections.append(report.to_text())
        if report.verdict != "holds":
            any_violated = True
            if first_witness is None and report.witness is not None:
                first_witness = (prop, report.witness)
    _write_text(args.out, "\n".join(sections))
    if first_witness and args.witness_out:
        _write_text(args.witness_out, dot.format_witness_file(first_witness[1], first_witness[0]))
    return EXIT_VIOLATED if any_violated else EXIT_OK


def cmd_verify(args) -> int:
    workers = args.workers
    if args.claim == "line-theorem":
        if args.agents is None or args.spread is None:
            raise UsageError("line-theorem needs --agents and --spread")
        window = args.window if args.window is not None else 2 * args.spread
        report = line.verify_line_theorem(args.agents, args.spread, window)
    else:
        if not args.tree or args.agents is None:
            raise UsageError(f"{args.claim} needs --tree and --agents")
        tree = load_tree(args.tree)
        kwargs = dict(
            mode=args.mode,
            budget=args.budget,
            seed=args.seed,
            samples=args.samples,
            workers=workers,
        )
        if args.claim == "pairwise-lemma":
            report = search.verify_pairwise_lemma(tree, args.agents, **kwargs)
        elif args.claim == "main-theorem":
            report = search.verify_main_theorem(tree, args.agents, **kwargs)
        elif args.claim == "tpar-necessity":
            report = search.verify_tpar_necessity(tree, args.agents, **kwargs)
        else:
            raise UsageError(f"unknown claim {args.claim!r}")
    _write_text(args.out, report.to_text())
    if report.verdict == CONFIRMED:
        return EXIT_OK
    if report.verdict == REFUTED:
        return EXIT_VIOLATED
    return EXIT_BUDGET


def cmd_synthesize(args) -> int:
    tree = load_tree(args.tree)
    tables, stats = search.synthesize_sp_onto(
        tree, args.agents, max_expansions=args.budget, max_emit=args.max_emit
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tree_ref = Path(args.tree).resolve()
    for idx, table in enumerate(tables):
        save_table_file(table, out_dir / f"table_{idx:06d}.txt", str(tree_ref))
    stats_text = (
        f"expansions={stats.expansions}\n"
        f"emitted={stats.emitted}\n"
        f"complete={int(stats.complete)}\n"
    )
    _write_text(str(out_dir / "synthesis_stats.txt"), stats_text)
    sys.stderr.write(
        f"synthesize: emitted {stats.emitted} tables after {stats.expansions} expansions\n"
    )
    return EXIT_OK if stats.complete else EXIT_BUDGET


def cmd_mine(args) -> int:
    tree = load_tree(args.tree) if args.tree else None
    mech = resolve_mechanism(args.mech, tree, args.agents)
    result = search.mine_violation(
        mech, args.prop, strategy=args.strategy, seed=args.seed, tries=args.tries
    )
    if result.witness is not None:
        _write_text(args.out, dot.format_witness_file(result.witness, args.prop))
        return EXIT_VIOLATED
    _write_text(args.out, f"kind: none\nmarker: {result.marker}\n")
    return EXIT_OK if result.searched_all else EXIT_BUDGET


def cmd_export_dot(args) -> int:
    tree = load_tree(args.tree)
    witness = None
    if args.witness:
        with open(args.witness, "r", encoding="utf-8") as handle:
            witness = dot.parse_witness_file(handle.read())
        if witness.get("kind") == "none":
            witness = None
    _write_text(args.out, dot.tree_to_dot(tree, witness))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sptree",
        description="Strategyproof facility-location laboratory on discrete trees",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_check = sub.add_parser("check", help="check properties of one mechanism")
    p_check.add_argument("--tree", help="tree file (optional for builtin:fig1)")
    p_check.add_argument("--mech", required=True, help="builtin:<name>[:params] or table file")
    p_check.add_argument("--agents", type=int, help="agent count for parametric builtins")
    p_check.add_argument("--props", required=True, help="comma list, e.g. sp,onto,unanimous,tsi:1")
    p_check.add_argument("--prefs", help="preference profile file for sp-ordinal")
    p_check.add_argument("--full", action="store_true", help="full counts, no short-circuit")
    p_check.add_argument("--out", help="report file (default stdout)")
    p_check.add_argument("--witness-out", help="write first witness to this file")
    p_check.set_defaults(fn=cmd_check)

    p_verify = sub.add_parser("verify", help="verify a characterization claim over a space")
    p_verify.add_argument("--claim", required=True,
                          choices=["pairwise-lemma", "main-theorem", "tpar-necessity", "line-theorem"])
    p_verify.add_argument("--tree")
    p_verify.add_argument("--agents", type=int)
    p_verify.add_argument("--mode", default="exhaustive",
                          choices=["exhaustive", "sampled", "synthesized"])
    p_verify.add_argument("--seed", type=int, help="mandatory for sampled mode")
    p_verify.add_argument("--samples", type=int)
    p_verify.add_argument("--budget", type=int, help="tables to scan (exhaustive mode)")
    p_verify.add_argument("--spread", type=int, help="class spread bound (line-theorem)")
    p_verify.add_argument("--window", type=int, help="deviation window (line-theorem)")
    p_verify.add_argument("--workers", type=int, default=_default_workers())
    p_verify.add_argument("--out", help="report file (default stdout)")
    p_verify.set_defaults(fn=cmd_verify)

    p_syn = sub.add_parser("synthesize", help="emit all onto strategyproof tables")
    p_syn.add_argument("--tree", required=True)
    p_syn.add_argument("--agents", type=int, required=True)
    p_syn.add_argument("--budget", type=int, required=True, help="node-expansion limit")
    p_syn.add_argument("--max-emit", type=int, help="cap on emitted tables")
    p_syn.add_argument("--out-dir", required=True)
    p_syn.set_defaults(fn=cmd_synthesize)

    p_mine = sub.add_parser("mine", help="hunt for a property violation")
    p_mine.add_argument("--tree")
    p_mine.add_argument("--mech", required=True)
    p_mine.add_argument("--agents", type=int)
    p_mine.add_argument("--prop", required=True)
    p_mine.add_argument("--strategy", default="scan", choices=["scan", "random"])
    p_mine.add_argument("--seed", type=int)
    p_mine.add_argument("--tries", type=int)
    p_mine.add_argument("--out", help="witness / none-marker file (default stdout)")
    p_mine.set_defaults(fn=cmd_mine)

    p_dot = sub.add_parser("export-dot", help="write DOT text for a tree")
    p_dot.add_argument("--tree", required=True)
    p_dot.add_argument("--witness", help="witness file to overlay")
    p_dot.add_argument("--out", help="DOT file (default stdout)")
    p_dot.set_defaults(fn=cmd_export_dot)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0,) else 0
    try:
        return args.fn(args)
    except (UsageError, TreeParseError, MechanismTableError, FileNotFoundError, ValueError) as exc:
        sys.stderr.write(f"sptree: error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
