"""Vocabulary ontology: class hierarchy, disjointness, property declarations.

The text format is line oriented::

    # comment
    class <id>
    subclass <sub> <super>
    disjoint <id> <id> [<id> ...]
    property <id> functional|multi range=<class-id|interval>

Declarations may appear in any order; references are resolved after the whole
document has been read.
"""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from itertools import combinations
from pathlib import Path
from typing import Iterable

log = logging.getLogger(__name__)

INTERVAL_RANGE = "interval"

ANY_DATA = "spl:AnyData"
ANY_PURPOSE = "spl:AnyPurpose"
ANY_PROCESSING = "spl:AnyProcessing"
ANY_RECIPIENT = "spl:AnyRecipient"
ANY_STORAGE = "spl:AnyStorage"
ANY_LOCATION = "spl:AnyLocation"
ANY_DURATION = "spl:AnyDuration"
ANY_DUTY = "sbpl:AnyDuty"
ANY_LEGAL_BASIS = "sbpl:AnyLegalBasis"
NULL = "spl:Null"

HAS_DATA = "spl:hasData"
HAS_PURPOSE = "spl:hasPurpose"
HAS_PROCESSING = "spl:hasProcessing"
HAS_RECIPIENT = "spl:hasRecipient"
HAS_STORAGE = "spl:hasStorage"
HAS_LOCATION = "spl:hasLocation"
HAS_DURATION = "spl:hasDuration"
DURATION_IN_DAYS = "spl:durationInDays"
HAS_DUTY = "sbpl:hasDuty"
HAS_LEGAL_BASIS = "sbpl:hasLegalBasis"

#: usage attribute -> its top class
ATTRIBUTE_TOPS = {
    HAS_DATA: ANY_DATA,
    HAS_PURPOSE: ANY_PURPOSE,
    HAS_PROCESSING: ANY_PROCESSING,
    HAS_RECIPIENT: ANY_RECIPIENT,
    HAS_STORAGE: ANY_STORAGE,
}


class VocabularyError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class PropertyDecl:
    id: str
    functional: bool
    range: str

    @property
    def is_data(self) -> bool:
        return self.range == INTERVAL_RANGE


# The standard SPL/SBPL skeleton: ten properties, eight of them functional.
CORE_PROPERTIES = (
    PropertyDecl(HAS_DATA, True, ANY_DATA),
    PropertyDecl(HAS_PURPOSE, True, ANY_PURPOSE),
    PropertyDecl(HAS_PROCESSING, True, ANY_PROCESSING),
    PropertyDecl(HAS_RECIPIENT, True, ANY_RECIPIENT),
    PropertyDecl(HAS_STORAGE, True, ANY_STORAGE),
    PropertyDecl(HAS_LOCATION, True, ANY_LOCATION),
    PropertyDecl(HAS_DURATION, True, ANY_DURATION),
    PropertyDecl(DURATION_IN_DAYS, True, INTERVAL_RANGE),
    PropertyDecl(HAS_DUTY, False, ANY_DUTY),
    PropertyDecl(HAS_LEGAL_BASIS, False, ANY_LEGAL_BASIS),
)
CORE_TOPS = (ANY_DATA, ANY_PURPOSE, ANY_PROCESSING, ANY_RECIPIENT, ANY_STORAGE,
             ANY_LOCATION, ANY_DURATION, ANY_DUTY, ANY_LEGAL_BASIS)


def core_lines(disjoint_tops: bool = True) -> list[str]:
    """Declarations every policy vocabulary needs, in the text format."""
    lines = [f"class {c}" for c in CORE_TOPS]
    lines += [f"class {NULL}", f"subclass {NULL} {ANY_RECIPIENT}", f"subclass {NULL} {ANY_STORAGE}"]
    if disjoint_tops:
        # AnyStorage stays out: spl:Null sits under both AnyRecipient and AnyStorage.
        lines.append("disjoint " + " ".join(c for c in CORE_TOPS if c != ANY_STORAGE))
    for p in CORE_PROPERTIES:
        kind = "functional" if p.functional else "multi"
        lines.append(f"property {p.id} {kind} range={p.range}")
    return lines


class VocabularyOntology:
    """Immutable ontology with its reflexive-transitive subclass closure.

    Mutually subsuming classes (subclass cycles) form one equivalence group
    represented by the smallest id of the group.
    """

    def __init__(
        self,
        classes: Iterable[str],
        properties: Iterable[PropertyDecl] = (),
        subclass_axioms: Iterable[tuple[str, str]] = (),
        disjointness_axioms: Iterable[Iterable[str]] = (),
    ):
        self.classes = frozenset(classes)
        self.properties = {p.id: p for p in properties}
        self.subclass_axioms = tuple(dict.fromkeys((s, t) for s, t in subclass_axioms))
        self.disjointness_axioms = tuple(tuple(g) for g in disjointness_axioms)
        self.warnings: list[str] = []

        for sub, sup in self.subclass_axioms:
            for c in (sub, sup):
                if c not in self.classes:
                    raise VocabularyError(f"undeclared class {c!r} in subclass axiom")
        for group in self.disjointness_axioms:
            for c in group:
                if c not in self.classes:
                    raise VocabularyError(f"undeclared class {c!r} in disjointness axiom")
        for p in self.properties.values():
            if p.range != INTERVAL_RANGE and p.range not in self.classes:
                raise VocabularyError(f"undeclared range class {p.range!r} for {p.id}")

        self._parents: dict[str, set[str]] = {c: set() for c in self.classes}
        for sub, sup in self.subclass_axioms:
            self._parents[sub].add(sup)
        self._ancestors = {c: self._reach(c) for c in self.classes}

        self.rep: dict[str, str] = {}
        for c in self.classes:
            group = [d for d in self._ancestors[c] if c in self._ancestors[d]]
            self.rep[c] = min(group)
        # ancestors over representatives only; used on the hot path
        self.up: dict[str, frozenset[str]] = {
            c: frozenset(self.rep[a] for a in self._ancestors[c]) for c in self.classes
        }

        pairs: set[frozenset[str]] = set()
        for group in self.disjointness_axioms:
            for a, b in combinations(dict.fromkeys(group), 2):
                pairs.add(frozenset((a, b)))
        self.disjoint_pairs = frozenset(pairs)
        partners: dict[str, set[str]] = {c: set() for c in self.classes}
        for pair in pairs:
            a, b = tuple(pair)
            partners[a].add(b)
            partners[b].add(a)
        # classes asserted disjoint with some ancestor of c
        self._excluded = {
            c: frozenset().union(*(partners[a] for a in self._ancestors[c])) for c in self.classes
        }
        unsat = set()
        for c in self.classes:
            if self._excluded[c] & self._ancestors[c]:
                unsat.add(c)
        self.unsatisfiable = frozenset(unsat)
        for c in sorted(unsat):
            msg = f"class {c!r} is unsatisfiable (disjoint with one of its own ancestors)"
            self.warnings.append(msg)
            log.warning(msg)
        self._disjoint_cache: dict[tuple[str, str], bool] = {}

    def _reach(self, c: str) -> frozenset[str]:
        seen = {c}
        queue = deque([c])
        while queue:
            for p in self._parents[queue.popleft()]:
                if p not in seen:
                    seen.add(p)
                    queue.append(p)
        return frozenset(seen)

    def _check(self, *ids: str) -> None:
        for c in ids:
            if c not in self.classes:
                raise VocabularyError(f"undeclared class {c!r}")

    @property
    def attribute_tops(self) -> dict[str, str]:
        tops = {prop: top for prop, top in ATTRIBUTE_TOPS.items() if top in self.classes}
        if NULL in self.classes:
            tops["null"] = NULL
        return tops

    def ancestors(self, c: str) -> frozenset[str]:
        self._check(c)
        return self._ancestors[c]

    def is_subclass(self, sub: str, sup: str) -> bool:
        self._check(sub, sup)
        return sup in self._ancestors[sub]

    def are_disjoint(self, a: str, b: str) -> bool:
        """True iff a and b provably share no instances.

        Unsatisfiable classes are disjoint with every class, themselves included.
        """
        key = (a, b)
        hit = self._disjoint_cache.get(key)
        if hit is None:
            self._check(a, b)
            hit = (
                a in self.unsatisfiable
                or b in self.unsatisfiable
                or bool(self._excluded[a] & self._ancestors[b])
            )
            self._disjoint_cache[key] = hit
        return hit

    def is_satisfiable(self, c: str) -> bool:
        self._check(c)
        return c not in self.unsatisfiable

    def property(self, pid: str) -> PropertyDecl:
        try:
            return self.properties[pid]
        except KeyError:
            raise VocabularyError(f"undeclared property {pid!r}") from None

    @cached_property
    def height(self) -> int:
        """Length in edges of the longest subclass chain between equivalence groups."""
        parents: dict[str, set[str]] = {}
        for sub, sup in self.subclass_axioms:
            a, b = self.rep[sub], self.rep[sup]
            if a != b:
                parents.setdefault(a, set()).add(b)
        memo: dict[str, int] = {}

        def depth(c: str) -> int:
            if c not in memo:
                memo[c] = max((1 + depth(p) for p in parents.get(c, ())), default=0)
            return memo[c]

        return max((depth(c) for c in parents), default=0)

    def census(self) -> dict[str, int]:
        return {
            "classes": len(self.classes),
            "inclusions": len(self.subclass_axioms),
            "disjoint_axioms": len(self.disjointness_axioms),
            "ranges": len(self.properties),
            "functional": sum(p.functional for p in self.properties.values()),
            "height": self.height,
        }

    def dumps(self) -> str:
        lines = [f"class {c}" for c in sorted(self.classes)]
        lines += [f"subclass {s} {t}" for s, t in self.subclass_axioms]
        lines += ["disjoint " + " ".join(g) for g in self.disjointness_axioms]
        for p in self.properties.values():
            lines.append(f"property {p.id} {'functional' if p.functional else 'multi'} range={p.range}")
        return "\n".join(lines) + "\n"


def load_vocabulary(source: str) -> VocabularyOntology:
    classes: dict[str, int] = {}
    subclass: list[tuple[str, str, int]] = []
    disjoint: list[tuple[tuple[str, ...], int]] = []
    props: dict[str, tuple[PropertyDecl, int]] = {}

    for lineno, raw in enumerate(source.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        head, *args = line.split()
        if head == "class":
            if len(args) != 1:
                raise VocabularyError("expected: class <id>", lineno)
            classes.setdefault(args[0], lineno)
        elif head == "subclass":
            if len(args) != 2:
                raise VocabularyError("expected: subclass <sub> <super>", lineno)
            subclass.append((args[0], args[1], lineno))
        elif head == "disjoint":
            if len(args) < 2:
                raise VocabularyError("disjoint needs at least two classes", lineno)
            disjoint.append((tuple(args), lineno))
        elif head == "property":
            if len(args) != 3 or args[1] not in ("functional", "multi") or not args[2].startswith("range="):
                raise VocabularyError("expected: property <id> functional|multi range=<class|interval>", lineno)
            decl = PropertyDecl(args[0], args[1] == "functional", args[2][len("range="):])
            prev = props.get(decl.id)
            if prev is not None and prev[0] != decl:
                raise VocabularyError(f"property {decl.id!r} redeclared with conflicting flags", lineno)
            props[decl.id] = (decl, lineno)
        else:
            raise VocabularyError(f"unknown declaration {head!r}", lineno)

    for sub, sup, lineno in subclass:
        for c in (sub, sup):
            if c not in classes:
                raise VocabularyError(f"undeclared class {c!r}", lineno)
    for group, lineno in disjoint:
        for c in group:
            if c not in classes:
                raise VocabularyError(f"undeclared class {c!r}", lineno)
    for decl, lineno in props.values():
        if decl.range != INTERVAL_RANGE and decl.range not in classes:
            raise VocabularyError(f"undeclared range class {decl.range!r}", lineno)

    return VocabularyOntology(
        classes,
        (d for d, _ in props.values()),
        ((s, t) for s, t, _ in subclass),
        (g for g, _ in disjoint),
    )


DATA_DIR = Path(__file__).parent / "data"


def bundled_vocabulary_path(name: str) -> Path:
    return DATA_DIR / "vocab" / f"{name}.voc"


def load_vocabulary_file(path: str | Path) -> VocabularyOntology:
    """Load from a path; a bare bundled name (``befit``, ``gdpr``, ``pilot``) also works."""
    p = Path(path)
    if not p.exists() and bundled_vocabulary_path(str(path)).exists():
        p = bundled_vocabulary_path(str(path))
    return load_vocabulary(p.read_text(encoding="utf-8"))
