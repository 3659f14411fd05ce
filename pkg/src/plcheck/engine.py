"""Second checking phase: structural subsumption and compliance reports."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from itertools import product

from .normalizer import NormalFiller, NormalSimplePolicy, normalize_full
from .policy import (
    CONSENT,
    ClassExpr,
    Complement,
    Exists,
    FullPolicy,
    Intersection,
    Interval,
    Named,
    Union,
)
from .vocab import VocabularyError, VocabularyOntology

log = logging.getLogger(__name__)

COMPLIANT = "compliant"
NON_COMPLIANT = "non-compliant"
VACUOUS = "vacuously-compliant"

# slot reporting order for failure explanations
_SLOT_ORDER = {
    p: i for i, p in enumerate((
        "spl:hasData", "spl:hasPurpose", "spl:hasProcessing", "spl:hasRecipient",
        "spl:hasStorage", "sbpl:hasDuty", "sbpl:hasLegalBasis",
    ))
}


@dataclass
class Failure:
    disjunct: int
    path: tuple[str, ...]
    expected: str
    found: str
    branch: int | None = None
    reason: str = ""

    def to_dict(self) -> dict:
        return {
            "disjunct": self.disjunct,
            "branch": self.branch,
            "path": list(self.path),
            "expected": self.expected,
            "found": self.found,
            "reason": self.reason,
        }


@dataclass
class ComplianceReport:
    verdict: str
    cover: dict[int, tuple] = field(default_factory=dict)
    failure: Failure | None = None
    unsatisfiable: tuple[int, ...] = ()
    unsatisfiable_consent: tuple[int, ...] = ()

    @property
    def compliant(self) -> bool:
        return self.verdict != NON_COMPLIANT

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "cover": {str(k): list(v) for k, v in sorted(self.cover.items())},
            "failure": None if self.failure is None else self.failure.to_dict(),
            "unsatisfiable_disjuncts": list(self.unsatisfiable),
            "unsatisfiable_consent_disjuncts": list(self.unsatisfiable_consent),
        }


# --------------------------------------------------------------------------
# normalized vs normalized

def subsumes_normal(d: NormalFiller, c: NormalFiller) -> bool:
    """d ⊑ c for satisfiable normalized fillers."""
    if not c.names <= d.up:
        return False
    civ = c.interval
    if civ is not None:
        div = d.interval
        if div is None or div.lo < civ.lo or div.hi > civ.hi:
            return False
    if c.nested:
        dn = d.nested
        for prop, cents in c.nested.items():
            dents = dn.get(prop)
            if not dents:
                return False
            for ce in cents:
                for de in dents:
                    if subsumes_normal(de, ce):
                        break
                else:
                    return False
    return True


def _matches_modulo_intervals(d: NormalFiller, c: NormalFiller) -> bool:
    if not c.names <= d.up:
        return False
    if c.interval is not None and d.interval is None:
        return False
    for prop, cents in c.nested.items():
        dents = d.nested.get(prop)
        if not dents:
            return False
        if not all(any(_matches_modulo_intervals(de, ce) for de in dents) for ce in cents):
            return False
    return True


def subsumes_simple(voc: VocabularyOntology, p: NormalSimplePolicy, q: NormalSimplePolicy) -> bool:
    if p.vocab is not voc or q.vocab is not voc:
        raise ValueError("policies were normalized under a different vocabulary")
    if not p.satisfiable:
        return True
    if not q.satisfiable:
        return False
    return subsumes_normal(p.root, q.root)


# --------------------------------------------------------------------------
# normalized vs arbitrary expression (consent, rulebook)

def subsumes_filler(voc: VocabularyOntology, d: NormalFiller, c: ClassExpr) -> bool:
    if not d.satisfiable:
        return True
    if isinstance(c, Named):
        return voc.rep[_declared(voc, c.id)] in d.up
    if isinstance(c, Intersection):
        return all(subsumes_filler(voc, d, item) for item in c.items)
    if isinstance(c, Union):
        return any(subsumes_filler(voc, d, item) for item in c.items)
    if isinstance(c, Exists):
        voc.property(c.prop)
        return any(subsumes_filler(voc, e, c.filler) for e in d.nested.get(c.prop, ()))
    if isinstance(c, Interval):
        return d.interval is not None and d.interval.within(c)
    if isinstance(c, Complement):
        # d ⊑ ¬A iff one of d's names is provably disjoint from A
        a = _declared(voc, c.id)
        return any(voc.are_disjoint(n, a) for n in d.names)
    raise TypeError(f"not a class expression: {c!r}")


def _declared(voc: VocabularyOntology, cid: str) -> str:
    if cid not in voc.classes:
        raise VocabularyError(f"undeclared class {cid!r}")
    return cid


# --------------------------------------------------------------------------
# union on the right

def _interval_nodes(f: NormalFiller, path=()):
    if f.interval is not None:
        yield path, f.interval
    for prop, ents in f.nested.items():
        for i, e in enumerate(ents):
            yield from _interval_nodes(e, path + ((prop, i),))


def _with_points(f: NormalFiller, points: dict, path=()) -> NormalFiller:
    iv = f.interval
    if path in points:
        v = points[path]
        iv = Interval(v, v)
    nested = {
        prop: tuple(_with_points(e, points, path + ((prop, i),)) for i, e in enumerate(ents))
        for prop, ents in f.nested.items()
    }
    return f.replace(nested=nested, interval=iv, up=f.up)


def _all_intervals(f: NormalFiller):
    if f.interval is not None:
        yield f.interval
    for ents in f.nested.values():
        for e in ents:
            yield from _all_intervals(e)


def find_cover(p: NormalFiller, branches: list[tuple[int, NormalFiller]]) -> tuple[int, ...] | None:
    """Indices of branches whose union contains p, or None.

    One branch containing p is the common case.  Otherwise the only way a
    union of branches can contain p without one of them doing so alone is by
    splitting p's intervals, so p is cut at every interval endpoint of the
    candidate branches and each resulting point instance must be contained in
    some branch.
    """
    for j, q in branches:
        if subsumes_normal(p, q):
            return (j,)
    cands = [(j, q) for j, q in branches if _matches_modulo_intervals(p, q)]
    if len(cands) < 2:
        return None
    dims = list(_interval_nodes(p))
    if not dims:
        return None
    cuts = set()
    for _, q in cands:
        for iv in _all_intervals(q):
            cuts.add(iv.lo)
            cuts.add(iv.hi + 1)
    axes = []
    for _, iv in dims:
        axes.append(sorted({iv.lo} | {x for x in cuts if iv.lo < x <= iv.hi}))
    used = set()
    for combo in product(*axes):
        pv = _with_points(p, {path: v for (path, _), v in zip(dims, combo)})
        for j, q in cands:
            if subsumes_normal(pv, q):
                used.add(j)
                break
        else:
            return None
    return tuple(sorted(used))


# --------------------------------------------------------------------------
# explanations

def _describe(f: NormalFiller) -> str:
    if f.interval is not None and not f.names and not f.nested:
        return _render_interval(f.interval)
    parts = sorted(f.names)
    if f.interval is not None:
        parts.append(_render_interval(f.interval))
    for prop, ents in f.nested.items():
        parts.extend(f"{prop}: {_describe(e)}" for e in ents)
    return "{" + ", ".join(parts) + "}" if len(parts) != 1 else parts[0]


def _render_interval(iv: Interval) -> str:
    from .policy import INF
    return f"[{iv.lo}, {'*' if iv.hi == INF else iv.hi}]"


def _first_failure(d: NormalFiller, c: NormalFiller, path: tuple[str, ...]):
    """(path, expected, found) for the first mismatch of d ⊑ c, or None."""
    missing = c.names - d.up
    if missing:
        return path, ", ".join(sorted(missing)), _describe(d)
    if c.interval is not None and (d.interval is None or not d.interval.within(c.interval)):
        found = "no value" if d.interval is None else _render_interval(d.interval)
        return path, _render_interval(c.interval), found
    for prop in sorted(c.nested, key=lambda p: (_SLOT_ORDER.get(p, 99), p)):
        dents = d.nested.get(prop, ())
        for ce in c.nested[prop]:
            if any(subsumes_normal(de, ce) for de in dents):
                continue
            if len(dents) == 1:
                return _first_failure(dents[0], ce, path + (prop,))
            found = "nothing" if not dents else " | ".join(_describe(de) for de in dents)
            return path + (prop,), _describe(ce), found
    return None


def _failing_slots(d: NormalFiller, c: NormalFiller) -> int:
    n = 0
    for prop, cents in c.nested.items():
        dents = d.nested.get(prop, ())
        if not all(any(subsumes_normal(de, ce) for de in dents) for ce in cents):
            n += 1
    return n


def explain_failure(i: int, p: NormalSimplePolicy, consent: list[NormalSimplePolicy]) -> Failure:
    sat = [q for q in consent if q.satisfiable]
    if not sat:
        return Failure(i, (), "a satisfiable consent disjunct", "none", None,
                       "consent has no satisfiable disjunct")
    best = min(sat, key=lambda q: (_failing_slots(p.root, q.root), q.provenance))
    hit = _first_failure(p.root, best.root, ())
    if hit is None:
        # only a union of branches could have helped, and it does not
        return Failure(i, (), "coverage by the union of consent disjuncts", "a gap in an interval",
                       best.provenance, "interval not covered by any combination of disjuncts")
    path, expected, found = hit
    return Failure(i, path, expected, found, best.provenance,
                   f"{path[0] if path else 'policy'} not permitted by any consent disjunct")


# --------------------------------------------------------------------------
# entry points

def check_normalized(
    voc: VocabularyOntology,
    business: list[NormalSimplePolicy],
    consent: list[NormalSimplePolicy],
    explain: bool = True,
) -> ComplianceReport:
    for n in (*business, *consent):
        if n.vocab is not voc:
            raise ValueError("policies were normalized under a different vocabulary")
    branches = [(q.provenance, q.root) for q in consent if q.satisfiable]
    dead = tuple(q.provenance for q in consent if not q.satisfiable)
    cover: dict[int, tuple] = {}
    unsat = tuple(p.provenance for p in business if not p.satisfiable)
    if len(unsat) == len(business):
        return ComplianceReport(VACUOUS, {}, None, unsat, dead)
    for p in business:
        if not p.satisfiable:
            continue
        hit = find_cover(p.root, branches)
        if hit is None:
            failure = explain_failure(p.provenance, p, consent) if explain else None
            return ComplianceReport(NON_COMPLIANT, cover, failure, unsat, dead)
        cover[p.provenance] = hit
    return ComplianceReport(COMPLIANT, cover, None, unsat, dead)


def complies(business: list[NormalSimplePolicy], consent: list[NormalSimplePolicy]) -> bool:
    """Verdict only; the hot path used by the benchmark and the ledger."""
    branches = [(q.provenance, q.root) for q in consent if q.satisfiable]
    for p in business:
        if p.satisfiable and find_cover(p.root, branches) is None:
            return False
    return True


def check_compliance(voc: VocabularyOntology, business: FullPolicy, consent: FullPolicy,
                     explain: bool = True) -> ComplianceReport:
    if consent.kind != CONSENT:
        raise ValueError("the right-hand policy must be a consent policy")
    report = check_normalized(voc, normalize_full(voc, business), normalize_full(voc, consent), explain)
    if report.unsatisfiable_consent:
        log.warning("ignoring unsatisfiable consent disjunct(s) %s", ", ".join(map(str, report.unsatisfiable_consent)))
    return report
