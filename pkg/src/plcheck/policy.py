"""Policy AST, the JSON-like concrete syntax, and its canonical serializer.

Concrete syntax (a relaxed JSON)::

    [
      { has_purpose: FitnessRecommendation, has_data: BiometricData,
        has_processing: Analytics, has_recipient: BeFit,
        has_storage: { has_location: EU } },
      { has_purpose: { SocialNetworking, contact: SMS }, ...,
        has_storage: { has_location: EU, has_duration: [1year, 5year] } }
    ]

Keys and identifiers may be bare or double-quoted.  Inside a compound term,
bare items are intersected and ``key: value`` members become existential
restrictions on the property ``key``.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Iterator

from .vocab import (
    DURATION_IN_DAYS,
    HAS_DATA,
    HAS_DURATION,
    HAS_DUTY,
    HAS_LEGAL_BASIS,
    HAS_LOCATION,
    HAS_PROCESSING,
    HAS_PURPOSE,
    HAS_RECIPIENT,
    HAS_STORAGE,
    NULL,
)

INF = 2**63 - 1

CONSENT = "consent"
BUSINESS = "business"


@dataclass(frozen=True)
class Named:
    id: str


@dataclass(frozen=True)
class Intersection:
    items: tuple


@dataclass(frozen=True)
class Exists:
    prop: str
    filler: "ClassExpr"


@dataclass(frozen=True)
class Interval:
    lo: int
    hi: int = INF

    @property
    def empty(self) -> bool:
        return self.lo > self.hi

    def __contains__(self, value: int) -> bool:
        return self.lo <= value <= self.hi

    def within(self, other: "Interval") -> bool:
        """Closed containment; the empty interval is inside everything."""
        return self.empty or (other.lo <= self.lo and self.hi <= other.hi)


@dataclass(frozen=True)
class Complement:
    id: str


@dataclass(frozen=True)
class Union:
    items: tuple


ClassExpr = Named | Intersection | Exists | Interval | Complement | Union


def intersect_intervals(a: Interval, b: Interval) -> Interval:
    return Interval(max(a.lo, b.lo), min(a.hi, b.hi))


@dataclass(frozen=True)
class SimplePolicy:
    data: ClassExpr
    purpose: ClassExpr
    processing: ClassExpr
    recipient: ClassExpr
    storage: ClassExpr
    duties: tuple = ()
    legal_basis: ClassExpr | None = None

    def slots(self) -> list[tuple[str, ClassExpr]]:
        out = [
            (HAS_DATA, self.data),
            (HAS_PURPOSE, self.purpose),
            (HAS_PROCESSING, self.processing),
            (HAS_RECIPIENT, self.recipient),
            (HAS_STORAGE, self.storage),
        ]
        out += [(HAS_DUTY, d) for d in self.duties]
        if self.legal_basis is not None:
            out.append((HAS_LEGAL_BASIS, self.legal_basis))
        return out

    def as_expr(self) -> Intersection:
        return Intersection(tuple(Exists(p, f) for p, f in self.slots()))

    def usage_only(self) -> "SimplePolicy":
        return SimplePolicy(self.data, self.purpose, self.processing, self.recipient, self.storage)


@dataclass(frozen=True)
class FullPolicy:
    disjuncts: tuple
    kind: str = CONSENT

    def __post_init__(self):
        if not self.disjuncts:
            raise ValueError("a full policy needs at least one simple policy")
        if self.kind not in (CONSENT, BUSINESS):
            raise ValueError(f"unknown policy kind {self.kind!r}")

    def as_expr(self) -> Union:
        return Union(tuple(d.as_expr() for d in self.disjuncts))


def storage_of(location: ClassExpr | None = None, duration: ClassExpr | None = None) -> Intersection:
    """Build a non-Null storage filler; a missing duration means [0, *]."""
    items = []
    if location is not None:
        items.append(Exists(HAS_LOCATION, location))
    if duration is None:
        duration = Interval(0, INF)
    if isinstance(duration, Interval):
        items.append(Exists(DURATION_IN_DAYS, duration))
    else:
        items.append(Exists(HAS_DURATION, duration))
    return Intersection(tuple(items))


# --------------------------------------------------------------------------
# tokenizer / generic tree

class ParseError(ValueError):
    def __init__(self, message: str, line: int, col: int):
        self.line = line
        self.col = col
        self.msg = message
        super().__init__(f"{line}:{col}: {message}")


_IDENT = r"[A-Za-z_][A-Za-z0-9_\-.#/]*(?::[A-Za-z_][A-Za-z0-9_\-.#/]*)*"
_TOKEN = re.compile(
    rf"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>//[^\n]*)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<number>-?[0-9][0-9A-Za-z.]*)
  | (?P<ident>{_IDENT})
  | (?P<punct>[{{}}\[\]:,*])
    """,
    re.VERBOSE,
)
_IDENT_FULL = re.compile(rf"{_IDENT}\Z")


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        chunk = m.group()
        if kind not in ("ws", "comment"):
            if kind == "punct":
                kind = chunk
            toks.append(_Tok(kind, chunk, line, pos - line_start + 1))
        nl = chunk.count("\n")
        if nl:
            line += nl
            line_start = pos + chunk.rfind("\n") + 1
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


@dataclass
class _Node:
    kind: str  # obj | arr | atom | string | number | star
    line: int
    col: int
    value: object = None
    members: list = field(default_factory=list)  # obj: (key|None, keytok, node); arr: nodes


class _Reader:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def take(self, kind: str | None = None) -> _Tok:
        tok = self.toks[self.i]
        if kind is not None and tok.kind != kind:
            shown = tok.text or "end of input"
            raise ParseError(f"expected {kind!r}, found {shown!r}", tok.line, tok.col)
        self.i += 1
        return tok

    def document(self) -> _Node:
        node = self.value()
        self.take("eof")
        return node

    def value(self) -> _Node:
        tok = self.peek()
        if tok.kind == "{":
            return self.obj()
        if tok.kind == "[":
            return self.arr()
        self.i += 1
        if tok.kind == "ident":
            return _Node("atom", tok.line, tok.col, tok.text)
        if tok.kind == "string":
            return _Node("string", tok.line, tok.col, json.loads(tok.text))
        if tok.kind == "number":
            return _Node("number", tok.line, tok.col, tok.text)
        if tok.kind == "*":
            return _Node("star", tok.line, tok.col, "*")
        raise ParseError(f"unexpected {tok.text or 'end of input'!r}", tok.line, tok.col)

    def obj(self) -> _Node:
        start = self.take("{")
        node = _Node("obj", start.line, start.col)
        while self.peek().kind != "}":
            tok = self.peek()
            if tok.kind in ("ident", "string") and self.toks[self.i + 1].kind == ":":
                self.i += 2
                key = tok.text if tok.kind == "ident" else json.loads(tok.text)
                node.members.append((key, tok, self.value()))
            else:
                node.members.append((None, tok, self.value()))
            if self.peek().kind == ",":
                self.i += 1
            elif self.peek().kind != "}":
                t = self.peek()
                raise ParseError(f"expected ',' or '}}', found {t.text or 'end of input'!r}", t.line, t.col)
        self.take("}")
        return node

    def arr(self) -> _Node:
        start = self.take("[")
        node = _Node("arr", start.line, start.col)
        while self.peek().kind != "]":
            node.members.append(self.value())
            if self.peek().kind == ",":
                self.i += 1
            elif self.peek().kind != "]":
                t = self.peek()
                raise ParseError(f"expected ',' or ']', found {t.text or 'end of input'!r}", t.line, t.col)
        self.take("]")
        return node


# --------------------------------------------------------------------------
# interpretation

POLICY_KEYS = {
    "has_data": HAS_DATA,
    "has_purpose": HAS_PURPOSE,
    "has_processing": HAS_PROCESSING,
    "has_recipient": HAS_RECIPIENT,
    "has_storage": HAS_STORAGE,
    "has_duty": HAS_DUTY,
    "has_legal_basis": HAS_LEGAL_BASIS,
}
_KEY_OF = {v: k for k, v in POLICY_KEYS.items()}
_NESTED_KEYS = {"has_location": HAS_LOCATION, "has_duration": HAS_DURATION,
                "duration_in_days": DURATION_IN_DAYS}
_NESTED_KEY_OF = {v: k for k, v in _NESTED_KEYS.items()}
_MANDATORY = ("has_data", "has_purpose", "has_processing", "has_recipient", "has_storage")
_RULEBOOK_ONLY = {"not", "or", "ObjectComplementOf", "ObjectUnionOf"}

UNIT_DAYS = {
    "d": 1, "day": 1, "days": 1,
    "w": 7, "week": 7, "weeks": 7,
    "month": 30, "months": 30,
    "y": 365, "year": 365, "years": 365,
}
_DURATION = re.compile(r"([0-9]+)([A-Za-z]*)\Z")


def _class_id(text: str) -> str:
    return NULL if text == "Null" else text


def _days(node: _Node) -> int:
    if node.kind != "number":
        raise ParseError(f"malformed interval bound {node.value!r}", node.line, node.col)
    m = _DURATION.match(node.value)
    if m is None or m.group(2) not in UNIT_DAYS and m.group(2) != "":
        raise ParseError(f"malformed interval bound {node.value!r}", node.line, node.col)
    return int(m.group(1)) * UNIT_DAYS.get(m.group(2), 1)


def _interval(node: _Node) -> Interval:
    if len(node.members) != 2:
        raise ParseError("an interval needs exactly two bounds", node.line, node.col)
    lo_node, hi_node = node.members
    if lo_node.kind == "star":
        raise ParseError("lower bound cannot be open", lo_node.line, lo_node.col)
    hi = INF if hi_node.kind == "star" else _days(hi_node)
    return Interval(_days(lo_node), hi)


def _class_expr(node: _Node) -> ClassExpr:
    if node.kind in ("atom", "string"):
        return Named(_class_id(node.value))
    if node.kind == "obj":
        items = []
        for key, tok, val in node.members:
            if key is None:
                items.append(_class_expr(val))
            elif key in _RULEBOOK_ONLY:
                raise ParseError(f"{key!r} (complement/union) is only allowed in rulebooks", tok.line, tok.col)
            else:
                prop = _NESTED_KEYS.get(key, key)
                if val.kind == "arr":
                    if prop == HAS_DURATION:
                        prop = DURATION_IN_DAYS
                    items.append(Exists(prop, _interval(val)))
                else:
                    items.append(Exists(prop, _class_expr(val)))
        if not items:
            raise ParseError("empty compound term", node.line, node.col)
        return Intersection(tuple(items))
    if node.kind == "arr":
        raise ParseError("a list is not a class expression here", node.line, node.col)
    raise ParseError(f"unexpected {node.value!r}", node.line, node.col)


def _storage(node: _Node) -> ClassExpr:
    if node.kind in ("atom", "string"):
        return Named(_class_id(node.value))
    if node.kind != "obj":
        raise ParseError("storage must be Null, a storage class, or a {has_location, has_duration} block",
                         node.line, node.col)
    location = duration = None
    seen = set()
    for key, tok, val in node.members:
        if key is None or key not in ("has_location", "has_duration"):
            raise ParseError(f"unknown storage attribute {key or tok.text!r}", tok.line, tok.col)
        if key in seen:
            raise ParseError(f"duplicate attribute {key!r}", tok.line, tok.col)
        seen.add(key)
        if key == "has_location":
            location = _class_expr(val)
        elif val.kind == "arr":
            duration = _interval(val)
        else:
            duration = _class_expr(val)
    return storage_of(location, duration)


def _simple(node: _Node, kind: str) -> SimplePolicy:
    if node.kind != "obj":
        raise ParseError("a simple policy must be an object", node.line, node.col)
    slots: dict[str, object] = {}
    for key, tok, val in node.members:
        if key is None:
            raise ParseError(f"expected 'attribute: value', found {tok.text!r}", tok.line, tok.col)
        key = _KEY_OF.get(key, key)
        if key not in POLICY_KEYS:
            raise ParseError(f"unknown attribute {key!r}", tok.line, tok.col)
        if key in slots:
            raise ParseError(f"duplicate attribute {key!r}", tok.line, tok.col)
        if kind == CONSENT and key in ("has_duty", "has_legal_basis"):
            raise ParseError(f"{key!r} is not allowed in a consent policy", tok.line, tok.col)
        if key == "has_storage":
            slots[key] = _storage(val)
        elif key == "has_duty":
            vals = val.members if val.kind == "arr" else [val]
            slots[key] = tuple(_class_expr(v) for v in vals)
        else:
            slots[key] = _class_expr(val)
    for key in _MANDATORY:
        if key not in slots:
            raise ParseError(f"missing mandatory attribute {key!r}", node.line, node.col)
    return SimplePolicy(
        slots["has_data"], slots["has_purpose"], slots["has_processing"],
        slots["has_recipient"], slots["has_storage"],
        slots.get("has_duty", ()), slots.get("has_legal_basis"),
    )


def parse_policy(text: str, kind: str = CONSENT) -> FullPolicy:
    if kind not in (CONSENT, BUSINESS):
        raise ValueError(f"unknown policy kind {kind!r}")
    root = _Reader(text).document()
    if root.kind == "arr":
        if not root.members:
            raise ParseError("a policy union needs at least one simple policy", root.line, root.col)
        disjuncts = tuple(_simple(n, kind) for n in root.members)
    else:
        disjuncts = (_simple(root, kind),)
    return FullPolicy(disjuncts, kind)


def empty_intervals(expr: ClassExpr) -> Iterator[Interval]:
    """Intervals with lo > hi inside an expression (parse accepts but flags these)."""
    if isinstance(expr, Interval):
        if expr.empty:
            yield expr
    elif isinstance(expr, (Intersection, Union)):
        for item in expr.items:
            yield from empty_intervals(item)
    elif isinstance(expr, Exists):
        yield from empty_intervals(expr.filler)


# --------------------------------------------------------------------------
# serialization

def _atom(text: str) -> str:
    if text == NULL:
        return "Null"
    if _IDENT_FULL.match(text) and text not in ("Null",):
        return text
    return json.dumps(text)


def _render_interval(iv: Interval) -> str:
    hi = "*" if iv.hi == INF else f"{iv.hi}d"
    return f"[{iv.lo}d, {hi}]"


def _key(prop: str) -> str:
    return _atom(_NESTED_KEY_OF.get(prop, prop))


def _render_expr(expr: ClassExpr) -> str:
    if isinstance(expr, Named):
        return _atom(expr.id)
    if isinstance(expr, Intersection):
        parts = []
        for item in expr.items:
            if isinstance(item, Exists):
                if isinstance(item.filler, Interval):
                    key = "has_duration" if item.prop == DURATION_IN_DAYS else _key(item.prop)
                    parts.append(f"{key}: {_render_interval(item.filler)}")
                else:
                    parts.append(f"{_key(item.prop)}: {_render_expr(item.filler)}")
            else:
                parts.append(_render_expr(item))
        return "{ " + ", ".join(parts) + " }"
    raise ValueError(f"{type(expr).__name__} cannot appear in a policy document")


def _render_storage(expr: ClassExpr) -> str:
    if isinstance(expr, Named):
        return _atom(expr.id)
    parts = []
    for item in expr.items:
        if item.prop == HAS_LOCATION:
            parts.append(f"has_location: {_render_expr(item.filler)}")
        elif item.prop == DURATION_IN_DAYS:
            parts.append(f"has_duration: {_render_interval(item.filler)}")
        else:
            parts.append(f"has_duration: {_render_expr(item.filler)}")
    return "{ " + ", ".join(parts) + " }"


def _render_simple(p: SimplePolicy, indent: str) -> str:
    fields = {
        "has_data": _render_expr(p.data),
        "has_purpose": _render_expr(p.purpose),
        "has_processing": _render_expr(p.processing),
        "has_recipient": _render_expr(p.recipient),
        "has_storage": _render_storage(p.storage),
    }
    if p.duties:
        fields["has_duty"] = "[" + ", ".join(_render_expr(d) for d in p.duties) + "]"
    if p.legal_basis is not None:
        fields["has_legal_basis"] = _render_expr(p.legal_basis)
    inner = ",\n".join(f"{indent}  {k}: {fields[k]}" for k in sorted(fields))
    return f"{indent}{{\n{inner}\n{indent}}}"


def serialize_policy(p: FullPolicy) -> str:
    if len(p.disjuncts) == 1:
        return _render_simple(p.disjuncts[0], "") + "\n"
    body = ",\n".join(_render_simple(d, "  ") for d in p.disjuncts)
    return f"[\n{body}\n]\n"
