"""Report objects shared by the property checkers and the search engine.

Reports serialise to a fixed two-part text layout: a human-readable
header followed by a ``--- machine ---`` section of ``key=value`` lines.
The serialisation deliberately contains no timings and no worker counts,
so that runs of the same inputs (and seed) are byte-identical no matter
how the work was partitioned.  Elapsed times live only on the in-memory
objects.
"""

from __future__ import annotations

from dataclasses import dataclass, field

VERSION = "0.1.0"

HOLDS = "holds"
VIOLATED = "violated"
UNVERIFIABLE = "unverifiable"

CONFIRMED = "confirmed"
REFUTED = "refuted"
INCONCLUSIVE = "inconclusive"


def witness_text(witness) -> str:
    """Canonical one-line rendering of a witness of any supported kind."""
    if witness is None:
        return "-"
    fields = getattr(witness, "witness_fields", None)
    if callable(fields):
        pairs = fields()
    elif isinstance(witness, dict):
        pairs = list(witness.items())
    elif isinstance(witness, tuple):
        pairs = [("profile", witness)]
    elif isinstance(witness, int):
        pairs = [("vertex", witness)]
    else:  # pragma: no cover - defensive
        raise TypeError(f"cannot render witness {witness!r}")
    parts = []
    for key, value in pairs:
        if isinstance(value, tuple):
            value = ",".join(str(v) for v in value)
        parts.append(f"{key}:{value}")
    return ";".join(parts)


@dataclass
class PropertyReport:
    """Verdict of one property check, with the first witness on failure."""

    property_id: str
    verdict: str
    witness: object = None
    profiles_checked: int = 0
    pairs_checked: int = 0
    subject: str = ""
    notes: tuple[str, ...] = ()
    elapsed: float = 0.0

    @property
    def holds(self) -> bool:
        return self.verdict == HOLDS

    def to_text(self) -> str:
        wtext = witness_text(self.witness)
        lines = [
            f"sptree {VERSION} property report",
            f"property: {self.property_id}",
            f"subject: {self.subject or '-'}",
            "domain: finite structures only",
            f"verdict: {self.verdict}",
            f"profiles checked: {self.profiles_checked}",
            f"pairs checked: {self.pairs_checked}",
            f"witness: {'none' if self.witness is None else wtext}",
        ]
        lines += [f"note: {note}" for note in self.notes]
        lines += [
            "--- machine ---",
            f"property={self.property_id}",
            f"subject={self.subject or '-'}",
            f"verdict={self.verdict}",
            f"profiles={self.profiles_checked}",
            f"pairs={self.pairs_checked}",
            f"witness={wtext}",
        ]
        return "\n".join(lines) + "\n"


@dataclass
class EquivalenceReport:
    """Outcome of one claim verification over a mechanism space."""

    claim: str
    mode: str
    examined: int
    verdict: str
    seed: int | None = None
    tallies: dict = field(default_factory=dict)
    witness: object = None
    params: dict = field(default_factory=dict)
    elapsed: float = 0.0

    @property
    def confirmed(self) -> bool:
        return self.verdict == CONFIRMED

    def to_text(self) -> str:
        wtext = witness_text(self.witness)
        lines = [
            f"sptree {VERSION} verification report",
            f"claim: {self.claim}",
        ]
        lines += [f"{key}: {value}" for key, value in self.params.items()]
        lines += [
            f"mode: {self.mode}",
            f"seed: {'-' if self.seed is None else self.seed}",
            f"examined: {self.examined}",
            f"verdict: {self.verdict}",
            f"witness: {'none' if self.witness is None else wtext}",
            "tallies:",
        ]
        lines += [f"  {key}={value}" for key, value in self.tallies.items()]
        lines += [
            "--- machine ---",
            f"claim={self.claim}",
        ]
        lines += [f"{key}={value}" for key, value in self.params.items()]
        lines += [
            f"mode={self.mode}",
            f"seed={'-' if self.seed is None else self.seed}",
            f"examined={self.examined}",
        ]
        lines += [f"tally.{key}={value}" for key, value in self.tallies.items()]
        lines += [
            f"verdict={self.verdict}",
            f"witness={wtext}",
        ]
        return "\n".join(lines) + "\n"
