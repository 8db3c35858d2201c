"""Deterministic DOT rendering of trees, optionally with a witness overlay.

The overlay marks the agents' peaks, the deviating agent's alternate
report, both outcomes, and highlights the two trajectories (the agent's
path and the outcome's path).  Output is fully determined by the inputs:
vertices ascending, edges sorted, attributes emitted in a fixed order.
"""

from __future__ import annotations

from .tree import DiscreteTree


def parse_witness_file(text: str) -> dict:
    """Read the small key:value witness format written by check/mine."""
    fields: dict[str, object] = {}
    for raw in text.splitlines():
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        key, sep, value = body.partition(":")
        if not sep:
            raise ValueError(f"bad witness line {raw!r}")
        key = key.strip()
        value = value.strip()
        if key == "profile":
            fields[key] = tuple(int(t) for t in value.split())
        elif key in ("agent", "report", "outcome", "outcome_alt", "vertex"):
            fields[key] = int(value)
        elif key in ("kind", "marker", "property"):
            fields[key] = value
        else:
            raise ValueError(f"unknown witness key {key!r}")
    return fields


def format_witness_file(witness, property_id: str = "") -> str:
    """Serialise a witness (or its absence) to the key:value file format."""
    lines = []
    if property_id:
        lines.append(f"property: {property_id}")
    if witness is None:
        lines += ["kind: none"]
    elif hasattr(witness, "witness_fields"):
        lines.append("kind: deviation")
        for key, value in witness.witness_fields():
            if isinstance(value, tuple):
                value = " ".join(str(v) for v in value)
            lines.append(f"{key}: {value}")
    elif isinstance(witness, tuple):
        lines += ["kind: profile", f"profile: {' '.join(str(v) for v in witness)}"]
    elif isinstance(witness, int):
        lines += ["kind: vertex", f"vertex: {witness}"]
    elif isinstance(witness, dict):
        lines.append("kind: deviation")
        for key, value in witness.items():
            if isinstance(value, tuple):
                value = " ".join(str(v) for v in value)
            lines.append(f"{key}: {value}")
    else:
        raise TypeError(f"cannot serialise witness {witness!r}")
    return "\n".join(lines) + "\n"


def tree_to_dot(tree: DiscreteTree, witness: dict | None = None) -> str:
    """Render the tree as DOT text; a witness dict adds the overlay."""
    attrs: dict[int, dict[str, str]] = {v: {} for v in tree.vertices}
    bold_edges: set[tuple[int, int]] = set()
    red_edges: set[tuple[int, int]] = set()

    if witness:
        profile = witness.get("profile", ())
        for v in profile:
            attrs[v].setdefault("style", "filled")
            attrs[v].setdefault("fillcolor", "lightblue")
        report = witness.get("report")
        agent = witness.get("agent")
        if report is not None:
            attrs[report]["style"] = "filled"
            attrs[report]["fillcolor"] = "gold"
        outcome = witness.get("outcome")
        if outcome is not None:
            attrs[outcome]["color"] = "green"
            attrs[outcome]["penwidth"] = "2"
        outcome_alt = witness.get("outcome_alt")
        if outcome_alt is not None:
            attrs[outcome_alt]["color"] = "red"
            attrs[outcome_alt]["penwidth"] = "2"
        if report is not None and agent is not None and profile:
            a_i = profile[agent - 1]
            walk = tree.path(a_i, report)
            bold_edges.update(tuple(sorted(e)) for e in zip(walk, walk[1:]))
        if outcome is not None and outcome_alt is not None:
            walk = tree.path(outcome, outcome_alt)
            red_edges.update(tuple(sorted(e)) for e in zip(walk, walk[1:]))

    lines = ["graph tree {", "  node [shape=circle fontsize=10];"]
    for v in tree.vertices:
        parts = [f'label="{tree.labels[v]}"']
        for key in ("style", "fillcolor", "color", "penwidth"):
            if key in attrs[v]:
                parts.append(f'{key}="{attrs[v][key]}"')
        lines.append(f"  {v} [{' '.join(parts)}];")
    for u, v in tree.edge_pairs():
        extras = []
        if (u, v) in bold_edges:
            extras.append('style="bold"')
        if (u, v) in red_edges:
            extras.append('color="red"')
        suffix = f" [{' '.join(extras)}]" if extras else ""
        lines.append(f"  {u} -- {v}{suffix};")
    lines.append("}")
    return "\n".join(lines) + "\n"
