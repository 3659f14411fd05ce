"""``plcheck`` command line.

Exit codes: 0 compliant / success, 1 non-compliant, 2 input error, 3 internal error.
Reports go to stdout, diagnostics to stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import traceback
from pathlib import Path

from .engine import NON_COMPLIANT, ComplianceReport, check_compliance
from .gdpr import RulebookError, builtin_gdpr_rulebook, check_regulatory, load_rulebook
from .ledger import Ledger, LedgerError
from .normalizer import NormalizationError, normalize_full
from .policy import BUSINESS, CONSENT, INF, ClassExpr, Complement, Exists, Intersection, Interval, Named, ParseError, Union, parse_policy
from .vocab import VocabularyError, VocabularyOntology, load_vocabulary_file

OK, NON_COMPLIANT_EXIT, INPUT_ERROR, INTERNAL_ERROR = 0, 1, 2, 3


class InputError(Exception):
    pass


def render(e: ClassExpr) -> str:
    if isinstance(e, Named):
        return e.id
    if isinstance(e, Interval):
        return f"[{e.lo}, {'*' if e.hi == INF else e.hi}]"
    if isinstance(e, Complement):
        return f"not {e.id}"
    if isinstance(e, Exists):
        return f"{e.prop} some ({render(e.filler)})"
    if isinstance(e, Intersection):
        return " and ".join(render(i) for i in e.items) or "Thing"
    if isinstance(e, Union):
        return " or ".join(f"({render(i)})" for i in e.items) or "Nothing"
    raise TypeError(e)


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise InputError(f"{path}: {err.strerror or err}") from None


def _policy(path: str, kind: str):
    text = _read(path)
    try:
        return parse_policy(text, kind)
    except ParseError as err:
        raise InputError(f"{path}:{err.line}:{err.col}: {err.msg}") from None


def _vocab(args) -> VocabularyOntology:
    src = args.vocab or os.environ.get("PLCHECK_VOCAB")
    if not src:
        raise InputError("no vocabulary: pass --vocab or set PLCHECK_VOCAB")
    try:
        return load_vocabulary_file(src)
    except OSError as err:
        raise InputError(f"{src}: {err.strerror or err}") from None
    except VocabularyError as err:
        raise InputError(f"{src}: {err}") from None


def _emit(args, payload: dict, text: str) -> None:
    if args.format == "json":
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print(text)


def _report_text(report: ComplianceReport, explain: bool) -> str:
    lines = [report.verdict]
    if explain:
        for i, cover in sorted(report.cover.items()):
            lines.append(f"  disjunct {i} covered by {', '.join(map(str, cover))}")
        f = report.failure
        if f is not None:
            where = " / ".join(f.path) or "(root)"
            lines.append(f"  disjunct {f.disjunct} fails at {where}: expected {f.expected}, found {f.found}")
        if report.unsatisfiable:
            lines.append(f"  unsatisfiable disjuncts: {', '.join(map(str, report.unsatisfiable))}")
    return "\n".join(lines)


# --------------------------------------------------------------------------
# commands

def cmd_validate(args) -> int:
    voc = _vocab(args)
    fp = _policy(args.policy, args.kind)
    normal = normalize_full(voc, fp)
    rows = [{"disjunct": n.provenance, "satisfiable": n.satisfiable} for n in normal]
    ok = any(n.satisfiable for n in normal)
    text = "\n".join(f"disjunct {r['disjunct']}: {'satisfiable' if r['satisfiable'] else 'unsatisfiable'}"
                     for r in rows)
    _emit(args, {"valid": ok, "disjuncts": rows}, text + ("" if ok else "\nno satisfiable disjunct"))
    return OK if ok else NON_COMPLIANT_EXIT


def cmd_normalize(args) -> int:
    voc = _vocab(args)
    normal = normalize_full(voc, _policy(args.policy, args.kind))
    rows = [{"disjunct": n.provenance, "satisfiable": n.satisfiable, "expr": render(n.root.to_expr())}
            for n in normal]
    text = "\n".join(f"{r['disjunct']}{'' if r['satisfiable'] else ' (unsatisfiable)'}: {r['expr']}" for r in rows)
    _emit(args, {"disjuncts": rows}, text)
    return OK


def cmd_check(args) -> int:
    voc = _vocab(args)
    bp = _policy(args.business, BUSINESS)
    consent = _policy(args.consent, CONSENT)
    report = check_compliance(voc, bp, consent, explain=args.explain)
    payload = report.to_dict() if args.explain else {"verdict": report.verdict}
    _emit(args, payload, _report_text(report, args.explain))
    return NON_COMPLIANT_EXIT if report.verdict == NON_COMPLIANT else OK


def cmd_gdpr(args) -> int:
    voc = _vocab(args)
    bp = _policy(args.business, BUSINESS)
    if args.rules:
        try:
            rb = load_rulebook(_read(args.rules))
        except RulebookError as err:
            raise InputError(f"{args.rules}: {err}") from None
    else:
        rb = builtin_gdpr_rulebook()
    report = check_regulatory(voc, bp, rb)
    text = report.verdict
    if report.failure is not None:
        text += "\n  path: " + " -> ".join(report.failure.path) + "\n  " + report.failure.found
    _emit(args, report.to_dict(), text)
    return NON_COMPLIANT_EXIT if report.verdict == NON_COMPLIANT else OK


def cmd_audit(args) -> int:
    voc = _vocab(args)
    try:
        ledger = Ledger.loads(_read(args.ledger))
    except LedgerError as err:
        raise InputError(f"{args.ledger}: {err}") from None
    report = ledger.audit(voc, args.start, args.end)
    sys.stdout.write(report.to_jsonl())
    return OK if report.all_justified else NON_COMPLIANT_EXIT


def cmd_bench(args) -> int:
    from dataclasses import replace

    from .bench import PROFILES, generate_workload, run_bench

    base = PROFILES[args.profile]
    if not 0 < args.scale <= 1:
        raise InputError("--scale must lie in (0, 1]")
    profile = replace(base, seed=args.seed, target_compliant=args.target_compliant,
                      bp_count=max(1, round(base.bp_count * args.scale)),
                      consent_count=max(1, round(base.consent_count * args.scale)),
                      check_count=max(1, round(base.check_count * args.scale)))
    try:
        workload = generate_workload(profile)
    except ValueError as err:
        raise InputError(str(err)) from None
    result = run_bench(workload, warmup=args.warmup, parallelism=args.parallelism)
    payload = {**result.to_dict(), "workload": workload.stats()}
    if args.report_dir:
        from .plotting import plot_latency, write_checks_csv

        out = Path(args.report_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "bench.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        write_checks_csv(result, workload, out / "checks.csv")
        plot_latency(result, out / "latency.png")
        print(f"report written to {out}", file=sys.stderr)
    text = "\n".join(f"{k}: {v}" for k, v in payload.items() if k != "workload")
    _emit(args, payload, text)
    return OK


# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    def shared(suppress: bool) -> argparse.ArgumentParser:
        # options accepted before or after the subcommand; only the top level sets defaults
        p = argparse.ArgumentParser(add_help=False)
        p.add_argument("--vocab", default=argparse.SUPPRESS if suppress else None,
                       help="vocabulary file or bundled name (default: $PLCHECK_VOCAB)")
        p.add_argument("--format", choices=("json", "text"), default=argparse.SUPPRESS if suppress else "text")
        return p

    common = shared(True)
    ap = argparse.ArgumentParser(prog="plcheck", description="Policy compliance checking.", parents=[shared(False)])
    sub = ap.add_subparsers(dest="command", required=True)

    for name, fn in (("validate", cmd_validate), ("normalize", cmd_normalize)):
        p = sub.add_parser(name, parents=[common])
        p.add_argument("policy")
        p.add_argument("--kind", choices=(CONSENT, BUSINESS), default=CONSENT)
        p.set_defaults(func=fn)

    p = sub.add_parser("check", parents=[common], help="business policy vs consent")
    p.add_argument("business")
    p.add_argument("consent")
    p.add_argument("--explain", action="store_true")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("gdpr", parents=[common], help="business policy vs the GDPR rulebook")
    p.add_argument("business")
    p.add_argument("--rules", help="rulebook file (default: builtin)")
    p.set_defaults(func=cmd_gdpr)

    p = sub.add_parser("audit", parents=[common], help="ex-post audit of a ledger")
    p.add_argument("ledger")
    p.add_argument("--from", dest="start", type=int)
    p.add_argument("--to", dest="end", type=int)
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("bench", parents=[common], help="synthetic pilot benchmark")
    p.add_argument("--profile", choices=("pilot1", "pilot2"), default="pilot1")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--parallelism", type=int, default=1)
    p.add_argument("--target-compliant", type=float, default=0.5)
    p.add_argument("--warmup", type=int, default=0)
    p.add_argument("--scale", type=float, default=1.0, help="shrink policy and check counts for smoke runs")
    p.add_argument("--report-dir", help="also write bench.json, checks.csv and latency.png here")
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="plcheck: warning: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (InputError, NormalizationError, VocabularyError, RulebookError, LedgerError) as err:
        print(f"plcheck: error: {err}", file=sys.stderr)
        return INPUT_ERROR
    except Exception:  # noqa: BLE001
        traceback.print_exc()
        return INTERNAL_ERROR


if __name__ == "__main__":
    sys.exit(main())
