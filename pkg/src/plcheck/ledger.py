"""Append-only transparency ledger with ex-post audit and justification lookup.

One JSON object per line, each carrying ``seq`` (1, 2, ...), ``ts`` (integer
UTC seconds) and a ``type``:

* ``bp-register``: ``{"id", "policy"}``, business policy text
* ``consent``: ``{"id", "subject", "policy"}``, consent policy text, given at ``ts``
* ``withdraw``: ``{"record"}``, consent withdrawn at ``ts``
* ``event``: ``{"id", "subject", "bp"}``, processing under a registered BP at ``ts``

A consent record is valid on the half-open window ``[given, withdrawn)``.
"""
from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path

from .engine import COMPLIANT, check_normalized
from .normalizer import NormalizationError, NormalSimplePolicy, normalize_full
from .policy import BUSINESS, CONSENT, FullPolicy, ParseError, parse_policy, serialize_policy
from .vocab import VocabularyError, VocabularyOntology

ENTRY_TYPES = ("bp-register", "consent", "withdraw", "event")
_REQUIRED = {
    "bp-register": ("id", "policy"),
    "consent": ("id", "subject", "policy"),
    "withdraw": ("record",),
    "event": ("id", "subject", "bp"),
}


class LedgerError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass
class ConsentRecord:
    id: str
    subject: str
    policy: FullPolicy
    given_at: int
    withdrawn_at: int | None = None

    def valid_at(self, t: int) -> bool:
        return self.given_at <= t and (self.withdrawn_at is None or t < self.withdrawn_at)


@dataclass(frozen=True)
class ProcessingEvent:
    id: str
    subject: str
    bp: str
    occurred_at: int


@dataclass
class AuditReport:
    entries: list[dict] = field(default_factory=list)

    @property
    def summary(self) -> dict:
        counts = {"events": len(self.entries), "justified": 0, "unjustified": 0, "errors": 0}
        for e in self.entries:
            counts["errors" if e["verdict"] == "error" else e["verdict"]] += 1
        return counts

    @property
    def all_justified(self) -> bool:
        return all(e["verdict"] == "justified" for e in self.entries)

    def to_jsonl(self) -> str:
        lines = [json.dumps(e, sort_keys=True) for e in self.entries]
        lines.append(json.dumps({"summary": self.summary}, sort_keys=True))
        return "\n".join(lines) + "\n"


class Ledger:
    """In-memory view of a ledger, optionally mirrored to an append-only file.

    Appends are serialized by a lock.  Audits read a snapshot: the entry count
    captured when they start.
    """

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self.lines: list[dict] = []
        self.bps: dict[str, FullPolicy] = {}
        self.records: dict[str, ConsentRecord] = {}
        self.events: dict[str, ProcessingEvent] = {}
        self._lock = threading.Lock()

    # -- loading ----------------------------------------------------------

    @classmethod
    def open(cls, path: str | Path) -> "Ledger":
        """Replay an existing file (or start an empty one) and keep appending to it."""
        ledger = cls(path)
        p = Path(path)
        if p.exists():
            ledger._replay(p.read_text(encoding="utf-8"))
        return ledger

    @classmethod
    def loads(cls, text: str) -> "Ledger":
        ledger = cls()
        ledger._replay(text)
        return ledger

    def _replay(self, text: str) -> None:
        for lineno, raw in enumerate(text.splitlines(), 1):
            if not raw.strip():
                continue
            try:
                entry = json.loads(raw)
            except json.JSONDecodeError as err:
                raise LedgerError(f"malformed JSON: {err.msg}", lineno) from None
            try:
                self._apply(entry, replay=True)
            except LedgerError as err:
                raise LedgerError(str(err), lineno) from None

    # -- core append path ---------------------------------------------------

    def _apply(self, entry: dict, replay: bool = False) -> None:
        if not isinstance(entry, dict):
            raise LedgerError("entry must be a JSON object")
        kind = entry.get("type")
        if kind not in ENTRY_TYPES:
            raise LedgerError(f"unknown entry type {kind!r}")
        seq, ts = entry.get("seq"), entry.get("ts")
        if not isinstance(seq, int) or isinstance(seq, bool) or seq != len(self.lines) + 1:
            raise LedgerError(f"expected seq {len(self.lines) + 1}, got {seq!r}")
        if not isinstance(ts, int) or isinstance(ts, bool) or ts < 0:
            raise LedgerError(f"timestamp must be a non-negative integer, got {ts!r}")
        if self.lines and ts < self.lines[-1]["ts"]:
            raise LedgerError(f"timestamp {ts} is earlier than the last entry ({self.lines[-1]['ts']})")
        for key in _REQUIRED[kind]:
            if not isinstance(entry.get(key), str):
                raise LedgerError(f"{kind} entry needs a string {key!r}")

        if kind == "bp-register":
            if entry["id"] in self.bps:
                raise LedgerError(f"business policy {entry['id']!r} already registered")
            self.bps[entry["id"]] = _parse(entry["policy"], BUSINESS)
        elif kind == "consent":
            if entry["id"] in self.records:
                raise LedgerError(f"duplicate consent id {entry['id']!r}")
            self.records[entry["id"]] = ConsentRecord(
                entry["id"], entry["subject"], _parse(entry["policy"], CONSENT), ts)
        elif kind == "withdraw":
            rec = self.records.get(entry["record"])
            if rec is None:
                raise LedgerError(f"unknown consent record {entry['record']!r}")
            if rec.withdrawn_at is not None:
                raise LedgerError(f"consent {rec.id} already withdrawn")
            rec.withdrawn_at = ts
        else:
            if entry["id"] in self.events:
                raise LedgerError(f"duplicate event id {entry['id']!r}")
            # a hand-edited file may reference an unknown BP; audit reports it
            if not replay and entry["bp"] not in self.bps:
                raise LedgerError(f"business policy {entry['bp']!r} is not registered")
            self.events[entry["id"]] = ProcessingEvent(entry["id"], entry["subject"], entry["bp"], ts)
        self.lines.append(entry)

    def _append(self, kind: str, ts: int, **fields) -> dict:
        with self._lock:
            entry = {"seq": len(self.lines) + 1, "ts": ts, "type": kind, **fields}
            self._apply(entry)
            if self.path is not None:
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps(entry, sort_keys=True) + "\n")
            return entry

    # -- operations -----------------------------------------------------------

    def register_bp(self, bp_id: str, policy: FullPolicy, at: int) -> str:
        if policy.kind != BUSINESS:
            raise LedgerError("only business policies can be registered")
        self._append("bp-register", at, id=bp_id, policy=serialize_policy(policy))
        return bp_id

    def record_consent(self, voc: VocabularyOntology, subject: str, policy: FullPolicy, given_at: int) -> str:
        if policy.kind != CONSENT:
            raise LedgerError("a consent record needs a consent policy")
        if not any(n.satisfiable for n in normalize_full(voc, policy)):
            raise LedgerError("consent policy has no satisfiable disjunct")
        rid = f"c{sum(1 for e in self.lines if e['type'] == 'consent') + 1}"
        self._append("consent", given_at, id=rid, subject=subject, policy=serialize_policy(policy))
        return rid

    def withdraw_consent(self, record_id: str, at: int) -> None:
        rec = self.records.get(record_id)
        if rec is not None and at < rec.given_at:
            raise LedgerError(f"withdrawal at {at} precedes consent given at {rec.given_at}")
        self._append("withdraw", at, record=record_id)

    def log_event(self, subject: str, bp_id: str, at: int) -> str:
        eid = f"e{sum(1 for e in self.lines if e['type'] == 'event') + 1}"
        self._append("event", at, id=eid, subject=subject, bp=bp_id)
        return eid

    # -- queries ----------------------------------------------------------

    def audit(self, voc: VocabularyOntology, start: int | None = None, end: int | None = None) -> AuditReport:
        """Verdict for every event with ``start <= ts <= end``, citing the earliest covering record."""
        snap = _Snapshot(self, voc)
        report = AuditReport()
        for ev in snap.events:
            if (start is not None and ev.occurred_at < start) or (end is not None and ev.occurred_at > end):
                continue
            row = {"event": ev.id, "subject": ev.subject, "bp": ev.bp, "ts": ev.occurred_at}
            if ev.bp not in snap.bps:
                row.update(verdict="error", record=None, error=f"business policy {ev.bp!r} is not registered")
            else:
                try:
                    hits = snap.justifications(ev)
                except (NormalizationError, VocabularyError) as err:
                    row.update(verdict="error", record=None, error=str(err))
                else:
                    row.update(verdict="justified" if hits else "unjustified", record=hits[0] if hits else None)
            report.entries.append(row)
        return report

    def find_justification(self, voc: VocabularyOntology, event_id: str) -> list[str]:
        if event_id not in self.events:
            raise LedgerError(f"unknown event {event_id!r}")
        snap = _Snapshot(self, voc)
        ev = self.events[event_id]
        if ev.bp not in snap.bps:
            return []
        return snap.justifications(ev)


class _Snapshot:
    """State as of the moment the query started; caches normalizations."""

    def __init__(self, ledger: Ledger, voc: VocabularyOntology):
        self.voc = voc
        n = len(ledger.lines)
        entries = ledger.lines[:n]
        self.bps = {e["id"]: ledger.bps[e["id"]] for e in entries if e["type"] == "bp-register"}
        withdrawn = {e["record"]: e["ts"] for e in entries if e["type"] == "withdraw"}
        self.records = [
            ConsentRecord(r.id, r.subject, r.policy, r.given_at, withdrawn.get(r.id))
            for r in (ledger.records[e["id"]] for e in entries if e["type"] == "consent")
        ]
        self.events = [ledger.events[e["id"]] for e in entries if e["type"] == "event"]
        self._bp_norm: dict[str, list[NormalSimplePolicy]] = {}
        self._rec_norm: dict[str, list[NormalSimplePolicy]] = {}

    def _bp(self, bp_id: str) -> list[NormalSimplePolicy]:
        if bp_id not in self._bp_norm:
            bp = self.bps[bp_id]
            usage = FullPolicy(tuple(d.usage_only() for d in bp.disjuncts), BUSINESS)
            self._bp_norm[bp_id] = normalize_full(self.voc, usage)
        return self._bp_norm[bp_id]

    def _rec(self, rec: ConsentRecord) -> list[NormalSimplePolicy]:
        if rec.id not in self._rec_norm:
            self._rec_norm[rec.id] = normalize_full(self.voc, rec.policy)
        return self._rec_norm[rec.id]

    def justifications(self, ev: ProcessingEvent) -> list[str]:
        out = []
        for rec in self.records:
            if rec.subject != ev.subject or not rec.valid_at(ev.occurred_at):
                continue
            # a vacuous verdict (unsatisfiable BP) does not count as consent
            report = check_normalized(self.voc, self._bp(ev.bp), self._rec(rec), explain=False)
            if report.verdict == COMPLIANT:
                out.append(rec.id)
        return out


def _parse(text: str, kind: str) -> FullPolicy:
    try:
        return parse_policy(text, kind)
    except ParseError as err:
        raise LedgerError(f"embedded {kind} policy: {err}") from None
