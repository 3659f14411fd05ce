"""Brute-force semantic subsumption oracle, used to cross-check the engine.

Decides ``p ⊑ q`` by searching for a finite tree interpretation that satisfies
``p`` but not ``q``.  Only the raw axioms of the vocabulary are used (its own
ancestor search, the asserted disjoint pairs, range and functionality
declarations); nothing from the normalizer or the engine is reused.

Completeness of the search space:

* tree-shaped interpretations suffice for this logic;
* a node label only matters on the classes mentioned at that node, so labels
  range over the up-closed, disjointness-free subsets of the up-closure of
  those classes (plus the property range);
* a non-functional property needs at most as many successors as ``p`` asks
  for, because dropping successors can only falsify ``q``;
* integer values are sampled at ``lo-1, lo, hi, hi+1`` of every interval and
  at 0, which hits every elementary segment the intervals cut out.
"""
from __future__ import annotations

from collections import defaultdict
from itertools import combinations

from .policy import (
    INF,
    ClassExpr,
    Complement,
    Exists,
    FullPolicy,
    Intersection,
    Interval,
    Named,
    SimplePolicy,
    Union,
)
from .vocab import INTERVAL_RANGE, VocabularyOntology

MAX_NODES = 48
MAX_FREE_CLASSES = 14

_UNSET = object()
_ABSENT = object()


class OracleBoundsError(ValueError):
    pass


def _as_expr(x) -> ClassExpr:
    if isinstance(x, (FullPolicy, SimplePolicy)):
        return x.as_expr()
    return x


class _World:
    def __init__(self, voc: VocabularyOntology):
        self.voc = voc
        self.parents = defaultdict(set)
        for sub, sup in voc.subclass_axioms:
            self.parents[sub].add(sup)
        self.disjoint = set()
        for group in voc.disjointness_axioms:
            for a, b in combinations(group, 2):
                if a != b:
                    self.disjoint.add((a, b))
                    self.disjoint.add((b, a))
        self._anc: dict[str, frozenset] = {}
        self._labels: dict = {}

    def anc(self, c: str) -> frozenset:
        if c not in self._anc:
            seen, stack = {c}, [c]
            while stack:
                for p in self.parents[stack.pop()]:
                    if p not in seen:
                        seen.add(p)
                        stack.append(p)
            self._anc[c] = frozenset(seen)
        return self._anc[c]

    def consistent(self, label) -> bool:
        return not any((a, b) in self.disjoint for a in label for b in label)

    def labels(self, mentioned: frozenset, range_: str | None) -> list[frozenset]:
        key = (mentioned, range_)
        if key in self._labels:
            return self._labels[key]
        universe = set()
        for c in mentioned | ({range_} if range_ else set()):
            if c not in self.voc.classes:
                raise KeyError(f"undeclared class {c!r}")
            universe |= self.anc(c)
        required = self.anc(range_) if range_ else frozenset()
        free = sorted(universe - required)
        if len(free) > MAX_FREE_CLASSES:
            raise OracleBoundsError(f"{len(free)} free classes at one node")
        out = []
        for mask in range(1 << len(free)):
            label = set(required)
            label.update(c for i, c in enumerate(free) if mask >> i & 1)
            if all(self.anc(c) <= label for c in label) and self.consistent(label):
                out.append(frozenset(label))
        # smaller labels first: they make q least likely to hold
        out.sort(key=len)
        self._labels[key] = out
        return out


class _Slot:
    __slots__ = ("idx", "range", "data", "children", "mentioned", "parent")

    def __init__(self, range_, data, parent):
        self.range = range_
        self.data = data
        self.parent = parent
        self.children: dict[str, list[_Slot]] = {}
        self.mentioned: set[str] = set()
        self.idx = -1


def _count(e, prop: str) -> int:
    if isinstance(e, Exists):
        return int(e.prop == prop)
    if isinstance(e, Intersection):
        return sum(_count(i, prop) for i in e.items)
    if isinstance(e, Union):
        return max((_count(i, prop) for i in e.items), default=0)
    return 0


def _local(e, mentioned: set, fillers: dict, intervals: list) -> None:
    if isinstance(e, (Named, Complement)):
        mentioned.add(e.id)
    elif isinstance(e, (Intersection, Union)):
        for i in e.items:
            _local(i, mentioned, fillers, intervals)
    elif isinstance(e, Exists):
        fillers[e.prop].append(e.filler)
    elif isinstance(e, Interval):
        intervals.append(e)


def _build(world: _World, slot: _Slot, p_exprs: list, q_exprs: list, intervals: list, nodes: list) -> None:
    if len(nodes) > MAX_NODES:
        raise OracleBoundsError("interpretation skeleton too large")
    p_fill: dict[str, list] = defaultdict(list)
    q_fill: dict[str, list] = defaultdict(list)
    for e in p_exprs:
        _local(e, slot.mentioned, p_fill, intervals)
    for e in q_exprs:
        _local(e, slot.mentioned, q_fill, intervals)
    for prop in sorted(set(p_fill) | set(q_fill)):
        decl = world.voc.property(prop)
        k = 1
        if not decl.functional:
            k = max([1] + [_count(e, prop) for e in p_exprs])
        kids = []
        for _ in range(k):
            child = _Slot(decl.range, decl.range == INTERVAL_RANGE, slot)
            child.idx = len(nodes)
            nodes.append(child)
            _build(world, child, p_fill[prop], q_fill[prop], intervals, nodes)
            kids.append(child)
        slot.children[prop] = kids


def oracle_subsumes(voc: VocabularyOntology, p, q) -> bool:
    """True iff every tree interpretation satisfying p satisfies q."""
    pe, qe = _as_expr(p), _as_expr(q)
    world = _World(voc)
    root = _Slot(None, False, None)
    root.idx = 0
    nodes = [root]
    intervals: list[Interval] = []
    _build(world, root, [pe], [qe], intervals, nodes)

    values = {0}
    for iv in intervals:
        values.update((iv.lo - 1, iv.lo))
        values.add(iv.hi)
        if iv.hi != INF:
            values.add(iv.hi + 1)
    values = sorted(values)

    options = []
    for node in nodes:
        if node.data:
            options.append([_ABSENT] + values)
        else:
            labels = world.labels(frozenset(node.mentioned), node.range)
            options.append(labels if node is root else [_ABSENT] + labels)

    state = [_UNSET] * len(nodes)

    def ev(e, slot: _Slot):
        st = state[slot.idx]
        if isinstance(e, Named):
            if st is _UNSET:
                return None
            return isinstance(st, frozenset) and e.id in st
        if isinstance(e, Complement):
            if st is _UNSET:
                return None
            return not (isinstance(st, frozenset) and e.id in st)
        if isinstance(e, Interval):
            if st is _UNSET:
                return None
            return isinstance(st, int) and e.lo <= st <= e.hi
        if isinstance(e, Intersection):
            res = True
            for item in e.items:
                v = ev(item, slot)
                if v is False:
                    return False
                if v is None:
                    res = None
            return res
        if isinstance(e, Union):
            res = False
            for item in e.items:
                v = ev(item, slot)
                if v is True:
                    return True
                if v is None:
                    res = None
            return res
        if isinstance(e, Exists):
            res = False
            for child in slot.children.get(e.prop, ()):
                cs = state[child.idx]
                if cs is _ABSENT:
                    continue
                if cs is _UNSET:
                    res = None
                    continue
                v = ev(e.filler, child)
                if v is True:
                    return True
                if v is None:
                    res = None
            return res
        raise TypeError(f"not a class expression: {e!r}")

    n = len(nodes)

    def search(i: int) -> bool:
        if i:
            if ev(pe, root) is False or ev(qe, root) is True:
                return False
        if i == n:
            return True
        node = nodes[i]
        if node.parent is not None and state[node.parent.idx] is _ABSENT:
            opts = (_ABSENT,)
        else:
            opts = options[i]
        for opt in opts:
            state[i] = opt
            if search(i + 1):
                return True
        state[i] = _UNSET
        return False

    return not search(0)
