"""First checking phase: close simple policies under the vocabulary axioms.

A normalized filler keeps only the most specific class names (as equivalence
representatives), one merged successor per functional property, and the
intersection of all intervals on a data property.  Emptiness is detected
here, so the second phase never has to look at disjointness axioms.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from itertools import combinations

from .policy import (
    ClassExpr,
    Complement,
    Exists,
    FullPolicy,
    Intersection,
    Interval,
    Named,
    SimplePolicy,
    Union,
    intersect_intervals,
)
from .vocab import INTERVAL_RANGE, VocabularyError, VocabularyOntology


class NormalizationError(ValueError):
    pass


class NormalFiller:
    """Normalized filler: names, successors per property, optional interval."""

    __slots__ = ("names", "nested", "interval", "satisfiable", "up", "_key")

    def __init__(self, names, nested, interval, satisfiable, up):
        self.names: frozenset[str] = names
        self.nested: dict[str, tuple[NormalFiller, ...]] = nested
        self.interval: Interval | None = interval
        self.satisfiable: bool = satisfiable
        # representatives of every ancestor of every name
        self.up: frozenset[str] = up
        self._key = None

    def key(self) -> tuple:
        if self._key is None:
            self._key = (
                tuple(sorted(self.names)),
                None if self.interval is None else (self.interval.lo, self.interval.hi),
                tuple((p, tuple(e.key() for e in ents)) for p, ents in self.nested.items()),
                self.satisfiable,
            )
        return self._key

    def __eq__(self, other):
        return isinstance(other, NormalFiller) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        return f"NormalFiller({self.to_expr()!r}, satisfiable={self.satisfiable})"

    def to_expr(self) -> ClassExpr:
        if self.interval is not None and not self.names and not self.nested:
            return self.interval
        items: list[ClassExpr] = [Named(n) for n in sorted(self.names)]
        for prop, ents in self.nested.items():
            items.extend(Exists(prop, e.to_expr()) for e in ents)
        if self.interval is not None:
            items.append(self.interval)
        return Intersection(tuple(items))

    def replace(self, **changes) -> "NormalFiller":
        fields = {s: getattr(self, s) for s in ("names", "nested", "interval", "satisfiable", "up")}
        fields.update(changes)
        return NormalFiller(**fields)


@dataclass(frozen=True, eq=False)
class NormalSimplePolicy:
    root: NormalFiller
    satisfiable: bool
    provenance: int
    vocab: VocabularyOntology

    @property
    def slots(self) -> dict[str, tuple[NormalFiller, ...]]:
        return self.root.nested

    def __eq__(self, other):
        return (
            isinstance(other, NormalSimplePolicy)
            and self.root == other.root
            and self.provenance == other.provenance
            and self.vocab is other.vocab
        )

    def __hash__(self):
        return hash((self.root, self.provenance))


def normalize_expr(voc: VocabularyOntology, expr: ClassExpr, range_: str | None = None) -> NormalFiller:
    names: set[str] = set()
    exists: dict[str, list[ClassExpr]] = {}
    intervals: list[Interval] = []

    def flatten(e):
        if isinstance(e, Named):
            names.add(e.id)
        elif isinstance(e, Intersection):
            for item in e.items:
                flatten(item)
        elif isinstance(e, Exists):
            exists.setdefault(e.prop, []).append(e.filler)
        elif isinstance(e, Interval):
            intervals.append(e)
        elif isinstance(e, (Complement, Union)):
            raise NormalizationError("complement and union are not allowed inside policies")
        else:
            raise NormalizationError(f"not a class expression: {e!r}")

    flatten(expr)

    if range_ == INTERVAL_RANGE:
        sat = not names and not exists and bool(intervals)
        iv = reduce(intersect_intervals, intervals) if intervals else None
        if iv is not None and iv.empty:
            sat = False
        for n in names:
            _check_class(voc, n)
        return NormalFiller(frozenset(), {}, iv, sat, frozenset())

    sat = not intervals
    if range_ is not None:
        names.add(range_)
    reps = set()
    for n in names:
        _check_class(voc, n)
        reps.add(voc.rep[n])
    if any(n in voc.unsatisfiable for n in reps):
        sat = False
    elif any(voc.are_disjoint(a, b) for a, b in combinations(sorted(reps), 2)):
        sat = False
    minimal = frozenset(n for n in reps if not any(m != n and n in voc.up[m] for m in reps))
    up = frozenset().union(*(voc.up[n] for n in minimal))

    nested: dict[str, tuple[NormalFiller, ...]] = {}
    for prop in sorted(exists):
        try:
            decl = voc.property(prop)
        except VocabularyError as err:
            raise NormalizationError(str(err)) from None
        fillers = exists[prop]
        if decl.functional:
            merged = fillers[0] if len(fillers) == 1 else Intersection(tuple(fillers))
            ents = (normalize_expr(voc, merged, decl.range),)
        else:
            uniq = {}
            for f in fillers:
                nf = normalize_expr(voc, f, decl.range)
                uniq.setdefault(nf.key(), nf)
            ents = tuple(uniq[k] for k in sorted(uniq, key=repr))
        if not all(e.satisfiable for e in ents):
            sat = False
        nested[prop] = ents
    iv = None
    if intervals:
        iv = reduce(intersect_intervals, intervals)
    return NormalFiller(minimal, nested, iv, sat, up)


def _check_class(voc: VocabularyOntology, c: str) -> None:
    if c not in voc.classes:
        raise NormalizationError(f"unknown class {c!r}")


def normalize_simple(voc: VocabularyOntology, p: SimplePolicy, provenance: int = 0) -> NormalSimplePolicy:
    root = normalize_expr(voc, p.as_expr())
    return NormalSimplePolicy(root, root.satisfiable, provenance, voc)


def normalize_full(voc: VocabularyOntology, fp: FullPolicy) -> list[NormalSimplePolicy]:
    return [normalize_simple(voc, d, i) for i, d in enumerate(fp.disjuncts)]


def renormalize(voc: VocabularyOntology, n: NormalSimplePolicy) -> NormalSimplePolicy:
    """Normalize the expression rendering of an already normalized policy."""
    root = normalize_expr(voc, n.root.to_expr())
    return NormalSimplePolicy(root, root.satisfiable, n.provenance, voc)


def is_vacuous(normalized: list[NormalSimplePolicy]) -> bool:
    return not any(n.satisfiable for n in normalized)
