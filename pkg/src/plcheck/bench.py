"""Synthetic pilot workloads and the compliance-check benchmark.

The generator reproduces the shape of the two pilot test suites: a fixed
ontology census, the number of business and consent policies, their average
number of simple policies, and the number of checks.  Every check pairs a
consent with the business policy it was built from, so the expected verdict
is known by construction:

* compliant: each consent disjunct generalizes a group of BP disjuncts
  (least common ancestor per slot, widened duration hull);
* non-compliant: additionally, every consent disjunct whose class slots all
  subsume a chosen BP disjunct gets a data class that does not, so no
  union of consent disjuncts can contain it.
"""
from __future__ import annotations

import hashlib
import json
import multiprocessing
import random
import statistics
import time
from dataclasses import asdict, dataclass, field

from .engine import complies
from .normalizer import normalize_full
from .policy import BUSINESS, CONSENT, INF, FullPolicy, Interval, Named, SimplePolicy, storage_of
from .vocab import (
    ANY_DATA,
    ANY_LOCATION,
    ANY_PROCESSING,
    ANY_PURPOSE,
    ANY_RECIPIENT,
    VocabularyOntology,
    core_lines,
    load_vocabulary,
)


@dataclass(frozen=True)
class OntologySpec:
    inclusions: int = 186
    disjoint_axioms: int = 11
    ranges: int = 10
    functional: int = 8
    height: int = 4


@dataclass(frozen=True)
class WorkloadProfile:
    name: str
    ontology: OntologySpec
    bp_count: int
    bp_avg: float
    consent_count: int
    consent_avg: float
    check_count: int
    seed: int = 0
    target_compliant: float = 0.5

    def validate(self) -> None:
        o = self.ontology
        if min(self.bp_count, self.consent_count, self.check_count) <= 0:
            raise ValueError("policy and check counts must be positive")
        if self.bp_avg < 1 or self.consent_avg < 1:
            raise ValueError("a full policy has at least one simple policy")
        if o.height <= 0 and o.inclusions > 0:
            raise ValueError("a hierarchy of height 0 cannot have inclusions")
        if o.ranges != 10 or o.functional != 8:
            raise ValueError("the policy skeleton fixes 10 range axioms and 8 functional properties")
        if o.disjoint_axioms < 1:
            raise ValueError("the skeleton already contributes one disjointness axiom")
        if o.inclusions - 2 < len(_FORESTS) * o.height:
            raise ValueError("too few inclusions for the requested height")
        if not 0 <= self.target_compliant <= 1:
            raise ValueError("target compliant fraction must lie in [0, 1]")

    def digest(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


PILOT_ONTOLOGY = OntologySpec()
PROFILES = {
    "pilot1": WorkloadProfile("pilot1", PILOT_ONTOLOGY, 120, 2.71, 12_000, 3.77, 12_000),
    "pilot2": WorkloadProfile("pilot2", PILOT_ONTOLOGY, 100, 2.39, 10_000, 3.42, 10_000),
}

# forests grown under these tops; storage fillers use the location forest
_FORESTS = (
    ("Data", ANY_DATA),
    ("Purpose", ANY_PURPOSE),
    ("Processing", ANY_PROCESSING),
    ("Recipient", ANY_RECIPIENT),
    ("Location", ANY_LOCATION),
)
_WEIGHTS = (5, 4, 3, 3, 3)
_MAX_DISJUNCTS = 9


@dataclass
class _Forest:
    top: str
    parent: dict[str, str] = field(default_factory=dict)
    depth: dict[str, int] = field(default_factory=dict)
    children: dict[str, list[str]] = field(default_factory=dict)

    def classes(self) -> list[str]:
        return list(self.parent)

    def leaves(self) -> list[str]:
        return [c for c in self.parent if not self.children.get(c)]

    def ancestors(self, c: str) -> list[str]:
        out = [c]
        while c != self.top:
            c = self.parent[c]
            out.append(c)
        return out

    def lca(self, a: str, b: str) -> str:
        up = set(self.ancestors(a))
        for c in self.ancestors(b):
            if c in up:
                return c
        return self.top


@dataclass
class Workload:
    profile: WorkloadProfile
    vocab: VocabularyOntology
    business: list[FullPolicy]
    consents: list[FullPolicy]
    pairs: list[tuple[int, int]]
    expected: list[bool]

    @property
    def fingerprint(self) -> str:
        return f"{self.profile.seed}-{self.profile.digest()}"

    def stats(self) -> dict:
        return {
            "bp_count": len(self.business),
            "bp_avg": sum(len(b.disjuncts) for b in self.business) / len(self.business),
            "consent_count": len(self.consents),
            "consent_avg": sum(len(c.disjuncts) for c in self.consents) / len(self.consents),
            "check_count": len(self.pairs),
            "compliant_fraction": sum(self.expected) / len(self.expected),
            **{f"ontology_{k}": v for k, v in self.vocab.census().items()},
        }


def _grow_forests(rng: random.Random, spec: OntologySpec) -> dict[str, _Forest]:
    budget = spec.inclusions - 2  # the skeleton places spl:Null twice
    total_w = sum(_WEIGHTS)
    sizes = [budget * w // total_w for w in _WEIGHTS]
    sizes[0] += budget - sum(sizes)
    forests = {}
    for (label, top), size in zip(_FORESTS, sizes):
        f = _Forest(top, {}, {top: 0}, {})
        names = iter(f"pilot:{label}{i}" for i in range(size))
        prev = top
        for _ in range(spec.height):  # one full-height chain fixes the height
            c = next(names)
            f.parent[c], f.depth[c] = prev, f.depth[prev] + 1
            f.children.setdefault(prev, []).append(c)
            prev = c
        for c in names:
            open_nodes = [n for n in (top, *f.parent) if f.depth[n] < spec.height]
            p = rng.choice(open_nodes)
            f.parent[c], f.depth[c] = p, f.depth[p] + 1
            f.children.setdefault(p, []).append(c)
        forests[label] = f
    return forests


def _vocab_text(rng: random.Random, spec: OntologySpec, forests: dict[str, _Forest]) -> str:
    lines = ["# synthetic pilot vocabulary", *core_lines()]
    for f in forests.values():
        lines += [f"class {c}" for c in f.parent]
        lines += [f"subclass {c} {p}" for c, p in f.parent.items()]
    sibling_pairs = []
    for f in forests.values():
        for kids in f.children.values():
            sibling_pairs += [(a, b) for i, a in enumerate(kids) for b in kids[i + 1:]]
    for a, b in rng.sample(sibling_pairs, spec.disjoint_axioms - 1):
        lines.append(f"disjoint {a} {b}")
    return "\n".join(lines) + "\n"


def _counts(rng: random.Random, n: int, avg: float) -> list[int]:
    """n disjunct counts in [1, _MAX_DISJUNCTS] summing to round(n * avg)."""
    counts = [1] * n
    rest = round(n * avg) - n
    while rest:
        i = rng.randrange(n)
        if counts[i] < _MAX_DISJUNCTS:
            counts[i] += 1
            rest -= 1
    return counts


@dataclass(frozen=True)
class _Row:
    data: str
    purpose: str
    processing: str
    recipient: str
    location: str
    lo: int
    hi: int

    def policy(self) -> SimplePolicy:
        return SimplePolicy(Named(self.data), Named(self.purpose), Named(self.processing),
                            Named(self.recipient), storage_of(Named(self.location), Interval(self.lo, self.hi)))


_SLOTS = ("data", "purpose", "processing", "recipient", "location")
_SLOT_FOREST = dict(zip(_SLOTS, ("Data", "Purpose", "Processing", "Recipient", "Location")))


class _Generator:
    def __init__(self, rng: random.Random, forests: dict[str, _Forest]):
        self.rng, self.forests = rng, forests
        self.leaves = {k: f.leaves() for k, f in forests.items()}
        self.inner = {k: [c for c in f.classes() if c not in set(self.leaves[k])] for k, f in forests.items()}

    def filler(self, forest: str) -> str:
        pool = self.leaves if self.rng.random() < 0.8 or not self.inner[forest] else self.inner
        return self.rng.choice(pool[forest])

    def row(self) -> _Row:
        lo = self.rng.choice((0, 0, 7, 30, 90, 180, 365))
        hi = lo + self.rng.choice((30, 90, 365, 730, 1825))
        return _Row(*(self.filler(_SLOT_FOREST[s]) for s in _SLOTS), lo, hi)

    def generalize(self, group: list[_Row]) -> _Row:
        vals = {}
        for s in _SLOTS:
            f = self.forests[_SLOT_FOREST[s]]
            c = getattr(group[0], s)
            for r in group[1:]:
                c = f.lca(c, getattr(r, s))
            if c != f.top and self.rng.random() < 0.3:
                c = f.parent[c]
            vals[s] = c
        lo = max(0, min(r.lo for r in group) - self.rng.choice((0, 0, 30)))
        hi = max(r.hi for r in group)
        hi = INF if self.rng.random() < 0.2 else hi + self.rng.choice((0, 0, 365))
        return _Row(**vals, lo=lo, hi=hi)

    def class_match(self, c: _Row, b: _Row) -> bool:
        return all(getattr(c, s) in self.forests[_SLOT_FOREST[s]].ancestors(getattr(b, s)) for s in _SLOTS)

    def consent_for(self, bp: list[_Row], n: int, compliant: bool) -> list[_Row]:
        order = list(range(len(bp)))
        self.rng.shuffle(order)
        groups: list[list[_Row]] = [[] for _ in range(min(n, len(bp)))]
        for k, i in enumerate(order):
            groups[k % len(groups)].append(bp[i])
        rows = [self.generalize(g) for g in groups]
        rows += [self.row() for _ in range(n - len(rows))]
        self.rng.shuffle(rows)
        if not compliant:
            target = self.rng.choice(bp)
            data = self.forests["Data"]
            above = set(data.ancestors(target.data))
            others = [c for c in data.classes() if c not in above]
            rows = [
                _Row(self.rng.choice(others), *(getattr(r, s) for s in _SLOTS[1:]), r.lo, r.hi)
                if self.class_match(r, target) else r
                for r in rows
            ]
        return rows


def pilot_vocabulary(spec: OntologySpec = PILOT_ONTOLOGY, seed: int = 0) -> tuple[VocabularyOntology, dict]:
    """The synthetic ontology for a seed; both pilot profiles share it."""
    rng = random.Random(f"ontology:{seed}")
    forests = _grow_forests(rng, spec)
    return load_vocabulary(_vocab_text(rng, spec, forests)), forests


def generate_workload(profile: WorkloadProfile) -> Workload:
    """Deterministic for a given profile (including its seed)."""
    profile.validate()
    vocab, forests = pilot_vocabulary(profile.ontology, profile.seed)
    rng = random.Random(f"{profile.name}:{profile.seed}")
    gen = _Generator(rng, forests)

    bp_rows = [[gen.row() for _ in range(k)] for k in _counts(rng, profile.bp_count, profile.bp_avg)]
    consent_sizes = _counts(rng, profile.consent_count, profile.consent_avg)
    n_ok = round(profile.target_compliant * profile.consent_count)
    truth = [True] * n_ok + [False] * (profile.consent_count - n_ok)
    rng.shuffle(truth)
    owners = [rng.randrange(profile.bp_count) for _ in range(profile.consent_count)]
    consents = [
        FullPolicy(tuple(r.policy() for r in gen.consent_for(bp_rows[b], k, ok)), CONSENT)
        for b, k, ok in zip(owners, consent_sizes, truth)
    ]
    business = [FullPolicy(tuple(r.policy() for r in rows), BUSINESS) for rows in bp_rows]
    pairs = [(owners[i % profile.consent_count], i % profile.consent_count) for i in range(profile.check_count)]
    expected = [truth[c] for _, c in pairs]
    return Workload(profile, vocab, business, consents, pairs, expected)


# --------------------------------------------------------------------------
# runner

@dataclass
class BenchResult:
    profile: str
    fingerprint: str
    parallelism: int
    warmup: int
    checks: int
    phase1_s: float
    wall_s: float
    mean_us: float
    median_us: float
    p99_us: float
    checks_per_sec: float
    compliant: int
    agreement: int
    verdicts: list[bool] = field(default_factory=list, repr=False)
    latencies_ns: list[int] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        d = asdict(self)
        del d["verdicts"], d["latencies_ns"]
        return d


_STATE: dict = {}


def _run_chunk(indices: list[int]) -> list[tuple[bool, int]]:
    bps, cons, pairs = _STATE["bps"], _STATE["consents"], _STATE["pairs"]
    clock = time.perf_counter_ns
    out = []
    for k in indices:
        b, c = pairs[k]
        t0 = clock()
        v = complies(bps[b], cons[c])
        out.append((v, clock() - t0))
    return out


def run_bench(workload: Workload, warmup: int = 0, parallelism: int = 1) -> BenchResult:
    """Time structural subsumption only; normalization happens before the clock starts."""
    if parallelism < 1:
        raise ValueError("parallelism must be at least 1")
    t0 = time.perf_counter()
    voc = workload.vocab
    _STATE["bps"] = [normalize_full(voc, b) for b in workload.business]
    _STATE["consents"] = [normalize_full(voc, c) for c in workload.consents]
    _STATE["pairs"] = workload.pairs
    phase1 = time.perf_counter() - t0

    n = len(workload.pairs)
    if warmup:
        _run_chunk([k % n for k in range(warmup)])
    indices = list(range(n))
    if parallelism == 1:
        t0 = time.perf_counter()
        results = _run_chunk(indices)
        wall = time.perf_counter() - t0
    else:
        chunks = [indices[i::parallelism] for i in range(parallelism)]
        ctx = multiprocessing.get_context("fork")
        with ctx.Pool(parallelism) as pool:
            t0 = time.perf_counter()
            parts = pool.map(_run_chunk, chunks)
            wall = time.perf_counter() - t0
        results = [None] * n
        for chunk, part in zip(chunks, parts):
            for k, r in zip(chunk, part):
                results[k] = r
    _STATE.clear()

    verdicts = [v for v, _ in results]
    lat = [ns for _, ns in results]
    p99 = statistics.quantiles(lat, n=100)[98] if n > 1 else lat[0]
    return BenchResult(
        profile=workload.profile.name,
        fingerprint=workload.fingerprint,
        parallelism=parallelism,
        warmup=warmup,
        checks=n,
        phase1_s=round(phase1, 6),
        wall_s=round(wall, 6),
        mean_us=round(statistics.fmean(lat) / 1000, 3),
        median_us=round(statistics.median(lat) / 1000, 3),
        p99_us=round(p99 / 1000, 3),
        checks_per_sec=round(n / wall, 1),
        compliant=sum(verdicts),
        agreement=sum(v == e for v, e in zip(verdicts, workload.expected)),
        verdicts=verdicts,
        latencies_ns=lat,
    )
