"""Partial GDPR axiomatization as a data-driven rulebook, and the regulatory check.

A rulebook maps definition names to bodies.  Bodies are trees of ``union`` /
``intersection`` nodes over leaves:

* ``requires``: the business policy's filler for a property is subsumed by a
  class expression (for multi-valued properties, any one filler suffices);
* ``complement-test``: the filler for a property is provably disjoint from a class;
* ``ref``: another definition;
* ``unmodeled``: a named placeholder for text that is not formalized; always false.

File format (JSON)::

    {"root": "GDPR_Compliance",
     "definitions": {
        "Art6_1_LegalBasis": {"requires": {"property": "sbpl:hasLegalBasis",
                                           "class": {"or": ["Art6_1_a_Consent", ...]}}},
        ...}}

Class expressions in rulebooks: a string (named class), ``{"and": [...]}``,
``{"or": [...]}``, ``{"not": "<class>"}``, ``{"some": {"property": p, "filler": e}}``
and ``{"interval": [lo, hi | "*"]}``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .engine import COMPLIANT, NON_COMPLIANT, VACUOUS, ComplianceReport, Failure, subsumes_filler
from .normalizer import NormalFiller, normalize_full
from .policy import (
    BUSINESS,
    INF,
    ClassExpr,
    Complement,
    Exists,
    FullPolicy,
    Intersection,
    Interval,
    Named,
    Union,
)
from .vocab import DATA_DIR, HAS_DATA, HAS_DUTY, HAS_LEGAL_BASIS, HAS_LOCATION, HAS_STORAGE, NULL, VocabularyOntology


class RulebookError(ValueError):
    pass


@dataclass(frozen=True)
class Ref:
    name: str


@dataclass(frozen=True)
class Requires:
    prop: str
    expr: ClassExpr


@dataclass(frozen=True)
class ComplementTest:
    prop: str
    cls: str


@dataclass(frozen=True)
class AnyOf:
    items: tuple


@dataclass(frozen=True)
class AllOf:
    items: tuple


@dataclass(frozen=True)
class Unmodeled:
    note: str = ""


Rule = Ref | Requires | ComplementTest | AnyOf | AllOf | Unmodeled


@dataclass(frozen=True)
class RegulatoryRulebook:
    definitions: dict
    root: str = "GDPR_Compliance"

    def __post_init__(self):
        if self.root not in self.definitions:
            raise RulebookError(f"root {self.root!r} is not defined")
        _check_refs(self.definitions)

    def inline(self, name: str | None = None) -> ClassExpr:
        """The body of ``name`` (default: root) as one class expression."""
        return _inline(self.definitions, self.definitions[name or self.root])


def _refs(rule) -> list[str]:
    if isinstance(rule, Ref):
        return [rule.name]
    if isinstance(rule, (AnyOf, AllOf)):
        return [n for item in rule.items for n in _refs(item)]
    return []


def _check_refs(defs: dict) -> None:
    for name, body in defs.items():
        for target in _refs(body):
            if target not in defs:
                raise RulebookError(f"{name!r} refers to undefined {target!r}")
    state: dict[str, int] = {}

    def visit(name: str, trail: list[str]) -> None:
        if state.get(name) == 2:
            return
        if state.get(name) == 1:
            cycle = " -> ".join(trail[trail.index(name):] + [name])
            raise RulebookError(f"cyclic definitions: {cycle}")
        state[name] = 1
        for target in _refs(defs[name]):
            visit(target, trail + [name])
        state[name] = 2

    for name in defs:
        visit(name, [])


def _inline(defs: dict, rule) -> ClassExpr:
    if isinstance(rule, Ref):
        return _inline(defs, defs[rule.name])
    if isinstance(rule, AnyOf):
        return Union(tuple(_inline(defs, r) for r in rule.items))
    if isinstance(rule, AllOf):
        return Intersection(tuple(_inline(defs, r) for r in rule.items))
    if isinstance(rule, Requires):
        return Exists(rule.prop, rule.expr)
    if isinstance(rule, ComplementTest):
        return Exists(rule.prop, Complement(rule.cls))
    if isinstance(rule, Unmodeled):
        return Union(())  # bottom
    raise RulebookError(f"unknown rule node {rule!r}")


# --------------------------------------------------------------------------
# builtin rulebook

ART6_1_BASES = (
    "Art6_1_a_Consent", "Art6_1_b_Contract", "Art6_1_c_LegalObligation",
    "Art6_1_d_VitalInterest", "Art6_1_e_PublicInterest", "Art6_1_f_LegitimateInterest",
)
ART9_2_BASES = (
    "Art9_2_a_Consent", "Art9_2_b_EmploymentAndSocialSecurity", "Art9_2_c_VitalInterest",
    "Art9_2_d_LegitimateActivitiesOfAssociations", "Art9_2_e_PublicData", "Art9_2_f_Juducial",
    "Art9_2_g_PublicInteres", "Art9_2_h_PreventiveOrOccupationalMedicine", "Art9_2_i_PublicHealth",
    "Art9_2_j_ArchivingResearchStatistics",
)
SENSITIVE = "SensitiveData_as_per_Art9"
CRIMINAL = "CriminalConvictionData_as_per_Art10"


def builtin_gdpr_rulebook() -> RegulatoryRulebook:
    """Chapters 2-5 with the article fragments that are spelled out, plus stubs.

    Each article condition reads as an implication in disjunctive form
    ("data is outside the article's category, or the article's bases apply"),
    so Chapter 2 is their conjunction.
    """
    d = {
        "GDPR_Compliance": AnyOf((
            AllOf((
                Ref("Chap2_LawfulProcessing"),
                Ref("Chap3_RightsOfDataSubjects"),
                Ref("Chap4_ControllerAndProcessorObligations"),
                Ref("Chap5_DataTransfer"),
            )),
            Ref("Chap9_Derogations"),
        )),
        "Chap2_LawfulProcessing": AllOf((
            Ref("Art6_LawfulProcessing"),
            Ref("Art9_SensitiveData"),
            Ref("Art10_CriminalData"),
        )),
        "Art6_LawfulProcessing": AnyOf((
            Requires(HAS_DATA, Named(SENSITIVE)),
            Requires(HAS_DATA, Named(CRIMINAL)),
            Ref("Art6_1_LegalBasis"),
            Ref("Art6_4_CompatiblePurpose"),
        )),
        "Art6_1_LegalBasis": Requires(HAS_LEGAL_BASIS, Union(tuple(Named(b) for b in ART6_1_BASES))),
        "Art6_4_CompatiblePurpose": Unmodeled("Art. 6(4) compatibility assessment"),
        "Art9_SensitiveData": AnyOf((
            ComplementTest(HAS_DATA, SENSITIVE),
            Requires(HAS_LEGAL_BASIS, Union(tuple(Named(b) for b in ART9_2_BASES))),
        )),
        "Art10_CriminalData": AnyOf((
            ComplementTest(HAS_DATA, CRIMINAL),
            Ref("Art10_OfficialAuthority"),
        )),
        "Art10_OfficialAuthority": Unmodeled("Art. 10 conditions"),
        "Chap3_RightsOfDataSubjects": Requires(HAS_DUTY, Named("Art12-22_SubjectRights")),
        "Chap4_ControllerAndProcessorObligations": Requires(HAS_DUTY, Named("Art32-37_Obligations")),
        "Chap5_DataTransfer": AnyOf((
            Requires(HAS_STORAGE, Exists(HAS_LOCATION, Named("EU"))),
            Requires(HAS_STORAGE, Named(NULL)),
            Ref("Chap5_AdequacyOrSafeguards"),
        )),
        "Chap5_AdequacyOrSafeguards": Unmodeled("Art. 45-49 adequacy decisions and safeguards"),
        "Chap9_Derogations": Unmodeled("Chapter 9 derogations"),
    }
    return RegulatoryRulebook(d, "GDPR_Compliance")


# --------------------------------------------------------------------------
# file format

def _expr_from_json(obj) -> ClassExpr:
    if isinstance(obj, str):
        return Named(obj)
    if isinstance(obj, dict) and len(obj) == 1:
        (k, v), = obj.items()
        if k == "and":
            return Intersection(tuple(_expr_from_json(x) for x in v))
        if k == "or":
            return Union(tuple(_expr_from_json(x) for x in v))
        if k == "not" and isinstance(v, str):
            return Complement(v)
        if k == "some":
            return Exists(v["property"], _expr_from_json(v["filler"]))
        if k == "interval":
            lo, hi = v
            return Interval(int(lo), INF if hi == "*" else int(hi))
    raise RulebookError(f"malformed class expression {obj!r}")


def _expr_to_json(e: ClassExpr):
    if isinstance(e, Named):
        return e.id
    if isinstance(e, Intersection):
        return {"and": [_expr_to_json(x) for x in e.items]}
    if isinstance(e, Union):
        return {"or": [_expr_to_json(x) for x in e.items]}
    if isinstance(e, Complement):
        return {"not": e.id}
    if isinstance(e, Exists):
        return {"some": {"property": e.prop, "filler": _expr_to_json(e.filler)}}
    if isinstance(e, Interval):
        return {"interval": [e.lo, "*" if e.hi == INF else e.hi]}
    raise RulebookError(f"cannot encode {e!r}")


def _rule_from_json(obj) -> Rule:
    if not isinstance(obj, dict) or len(obj) != 1:
        raise RulebookError(f"a rule node must be an object with one key, got {obj!r}")
    (kind, v), = obj.items()
    try:
        if kind == "union":
            return AnyOf(tuple(_rule_from_json(x) for x in v))
        if kind == "intersection":
            return AllOf(tuple(_rule_from_json(x) for x in v))
        if kind == "ref":
            return Ref(v)
        if kind == "requires":
            return Requires(v["property"], _expr_from_json(v["class"]))
        if kind == "complement-test":
            return ComplementTest(v["property"], v["class"])
        if kind == "unmodeled":
            return Unmodeled(v if isinstance(v, str) else "")
    except (KeyError, TypeError) as err:
        raise RulebookError(f"malformed {kind!r} node: {err}") from None
    raise RulebookError(f"unknown rule node kind {kind!r}")


def _rule_to_json(rule: Rule):
    if isinstance(rule, AnyOf):
        return {"union": [_rule_to_json(r) for r in rule.items]}
    if isinstance(rule, AllOf):
        return {"intersection": [_rule_to_json(r) for r in rule.items]}
    if isinstance(rule, Ref):
        return {"ref": rule.name}
    if isinstance(rule, Requires):
        return {"requires": {"property": rule.prop, "class": _expr_to_json(rule.expr)}}
    if isinstance(rule, ComplementTest):
        return {"complement-test": {"property": rule.prop, "class": rule.cls}}
    if isinstance(rule, Unmodeled):
        return {"unmodeled": rule.note}
    raise RulebookError(f"unknown rule node {rule!r}")


def load_rulebook(source: str) -> RegulatoryRulebook:
    try:
        doc = json.loads(source)
    except json.JSONDecodeError as err:
        raise RulebookError(f"line {err.lineno}:{err.colno}: {err.msg}") from None
    if not isinstance(doc, dict) or "definitions" not in doc:
        raise RulebookError("a rulebook needs a 'definitions' object")
    defs = {name: _rule_from_json(body) for name, body in doc["definitions"].items()}
    return RegulatoryRulebook(defs, doc.get("root", "GDPR_Compliance"))


def dump_rulebook(rb: RegulatoryRulebook) -> str:
    doc = {"root": rb.root, "definitions": {k: _rule_to_json(v) for k, v in rb.definitions.items()}}
    return json.dumps(doc, indent=2) + "\n"


def bundled_rulebook_path() -> Path:
    return DATA_DIR / "rules" / "gdpr-partial.rules"


# --------------------------------------------------------------------------
# evaluation

@dataclass
class _Outcome:
    ok: bool
    path: tuple = ()
    detail: str = ""
    modeled: bool = True
    depth: int = 0


def _describe_slot(d: NormalFiller, prop: str) -> str:
    ents = d.nested.get(prop, ())
    if not ents:
        return "nothing"
    return " | ".join(str(e.to_expr()) if e.interval is not None else ", ".join(sorted(e.names)) or "{}"
                      for e in ents)


class _Evaluator:
    def __init__(self, voc: VocabularyOntology, rb: RegulatoryRulebook, bp: NormalFiller):
        self.voc, self.rb, self.bp = voc, rb, bp
        self.memo: dict[str, _Outcome] = {}

    def named(self, name: str) -> _Outcome:
        if name not in self.memo:
            out = self.eval(self.rb.definitions[name])
            if not out.ok:
                out = _Outcome(False, (name,) + out.path, out.detail, out.modeled, out.depth)
            self.memo[name] = out
        return self.memo[name]

    def eval(self, rule) -> _Outcome:
        bp, voc = self.bp, self.voc
        if isinstance(rule, Ref):
            return self.named(rule.name)
        if isinstance(rule, Requires):
            ok = subsumes_filler(voc, bp, Exists(rule.prop, rule.expr))
            detail = "" if ok else f"{rule.prop}: {_describe_slot(bp, rule.prop)} is not among the required {_short(rule.expr)}"
            return _Outcome(ok, (), detail)
        if isinstance(rule, ComplementTest):
            ok = subsumes_filler(voc, bp, Exists(rule.prop, Complement(rule.cls)))
            detail = "" if ok else f"{rule.prop}: {_describe_slot(bp, rule.prop)} is not provably outside {rule.cls}"
            return _Outcome(ok, (), detail)
        if isinstance(rule, Unmodeled):
            return _Outcome(False, (), f"unmodeled: {rule.note}", modeled=False)
        if isinstance(rule, AllOf):
            for item in rule.items:
                out = self.eval(item)
                if not out.ok:
                    return out
            return _Outcome(True)
        if isinstance(rule, AnyOf):
            fails = []
            for item in rule.items:
                out = self.eval(item)
                if out.ok:
                    return out
                fails.append(out)
            modeled = [f for f in fails if f.modeled]
            if len(modeled) == 1 and modeled[0].path:
                # a single real alternative: descend into it
                return modeled[0]
            shown = modeled or fails
            return _Outcome(False, (), "; ".join(f.detail for f in shown), bool(modeled))
        raise RulebookError(f"unknown rule node {rule!r}")


def _short(e: ClassExpr) -> str:
    if isinstance(e, Named):
        return e.id
    if isinstance(e, Union):
        return "one of [" + ", ".join(_short(i) for i in e.items) + "]"
    if isinstance(e, Exists):
        return f"{e.prop} {_short(e.filler)}"
    return repr(e)


def evaluate(voc: VocabularyOntology, rb: RegulatoryRulebook, bp: NormalFiller, name: str | None = None) -> _Outcome:
    return _Evaluator(voc, rb, bp).named(name or rb.root)


def check_regulatory(voc: VocabularyOntology, business: FullPolicy, rb: RegulatoryRulebook) -> ComplianceReport:
    if business.kind != BUSINESS:
        raise ValueError("regulatory checks apply to business policies")
    normalized = normalize_full(voc, business)
    unsat = tuple(n.provenance for n in normalized if not n.satisfiable)
    if len(unsat) == len(normalized):
        return ComplianceReport(VACUOUS, {}, None, unsat)
    root_rule = rb.definitions[rb.root]
    cover: dict[int, tuple] = {}
    for n in normalized:
        if not n.satisfiable:
            continue
        ev = _Evaluator(voc, rb, n.root)
        out = ev.named(rb.root)
        if not out.ok:
            failure = Failure(n.provenance, out.path, rb.root, out.detail, None,
                              "not compliant with " + " -> ".join(out.path))
            return ComplianceReport(NON_COMPLIANT, cover, failure, unsat)
        if isinstance(root_rule, AnyOf):
            branch = next(i for i, r in enumerate(root_rule.items) if ev.eval(r).ok)
        else:
            branch = 0
        cover[n.provenance] = (branch,)
    return ComplianceReport(COMPLIANT, cover, None, unsat)
