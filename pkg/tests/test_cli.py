import json

import pytest

from conftest import EXAMPLES
from plcheck.cli import main
from plcheck.ledger import Ledger
from plcheck.policy import CONSENT, parse_policy

EX = str(EXAMPLES)


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_example_one(capsys):
    code, out, _ = run(capsys, "--vocab", "befit", "check", f"{EX}/befit-avg-heart-rate.bp",
                       f"{EX}/befit-consent.pol", "--explain")
    assert code == 0
    assert out.splitlines()[0] == "compliant" and "covered by 0" in out


def test_recipient_failure_in_json(capsys):
    code, out, _ = run(capsys, "check", f"{EX}/befit-third-party.bp", f"{EX}/befit-consent.pol",
                       "--explain", "--vocab", "befit", "--format", "json")
    assert code == 1
    assert json.loads(out)["failure"]["path"] == ["spl:hasRecipient"]


def test_vocab_from_environment(capsys, monkeypatch):
    monkeypatch.setenv("PLCHECK_VOCAB", "befit")
    code, out, _ = run(capsys, "check", f"{EX}/befit-avg-heart-rate.bp", f"{EX}/befit-consent-sms.pol")
    assert (code, out.strip()) == (1, "non-compliant")


@pytest.mark.parametrize("name, code", [("religion.bp", 1), ("location.bp", 0), ("demographic.bp", 0)])
def test_gdpr(capsys, name, code):
    got, out, _ = run(capsys, "--vocab", "gdpr", "gdpr", f"{EX}/{name}")
    assert got == code
    if code:
        assert "Art9_SensitiveData" in out


def test_gdpr_cyclic_rulebook(capsys, tmp_path):
    rules = tmp_path / "cyclic.rules"
    rules.write_text(json.dumps({"root": "A", "definitions": {"A": {"ref": "B"}, "B": {"ref": "A"}}}))
    code, _, err = run(capsys, "--vocab", "gdpr", "gdpr", f"{EX}/religion.bp", "--rules", str(rules))
    assert code == 2 and "cyclic" in err


def test_validate_and_normalize(capsys, tmp_path):
    code, out, _ = run(capsys, "--vocab", "befit", "normalize", f"{EX}/befit-consent-sms.pol")
    assert code == 0 and "SMS" in out
    bad = tmp_path / "inverted.pol"
    bad.write_text((EXAMPLES / "befit-consent.pol").read_text().replace("[1year, 5year]", "[5year, 1year]"))
    assert (EXAMPLES / "befit-consent.pol").read_text() != bad.read_text()
    code, out, _ = run(capsys, "--vocab", "befit", "validate", str(bad))
    assert code == 0 and "unsatisfiable" in out
    single = tmp_path / "one.pol"
    single.write_text("{ has_data: HeartRate, has_purpose: HealthAdvice, has_processing: Analytics, "
                      "has_recipient: BeFit, has_storage: { has_location: EU, has_duration: [9, 3] } }")
    code, out, _ = run(capsys, "--vocab", "befit", "validate", str(single))
    assert code == 1 and "no satisfiable disjunct" in out


@pytest.mark.parametrize("argv, fragment", [
    (["--vocab", "befit", "check", "missing.bp", f"{EX}/befit-consent.pol"], "missing.bp"),
    (["check", f"{EX}/befit-avg-heart-rate.bp", f"{EX}/befit-consent.pol"], "no vocabulary"),
    (["--vocab", "nowhere.voc", "validate", f"{EX}/befit-consent.pol"], "nowhere.voc"),
])
def test_input_errors(capsys, monkeypatch, argv, fragment):
    monkeypatch.delenv("PLCHECK_VOCAB", raising=False)
    code, _, err = run(capsys, *argv)
    assert code == 2 and fragment in err


def test_parse_error_reports_position(capsys, tmp_path):
    bad = tmp_path / "bad.pol"
    bad.write_text("{ has_data: HeartRate, colour: red }")
    code, _, err = run(capsys, "--vocab", "befit", "validate", str(bad))
    assert code == 2 and f"{bad}:1:" in err


@pytest.fixture
def ledger_file(tmp_path, befit):
    path = tmp_path / "ledger.jsonl"
    lg = Ledger.open(path)
    lg.register_bp("avg-hr", parse_policy((EXAMPLES / "befit-avg-heart-rate.bp").read_text(), "business"), 0)
    lg.record_consent(befit, "alice", parse_policy((EXAMPLES / "befit-consent.pol").read_text(), CONSENT), 1000)
    lg.log_event("alice", "avg-hr", 1500)
    lg.withdraw_consent("c1", 2000)
    lg.log_event("alice", "avg-hr", 2500)
    return path


def test_audit(capsys, ledger_file):
    code, out, _ = run(capsys, "--vocab", "befit", "audit", str(ledger_file))
    rows = [json.loads(line) for line in out.splitlines()]
    assert code == 1
    assert [r["verdict"] for r in rows[:-1]] == ["justified", "unjustified"]
    assert rows[-1]["summary"]["justified"] == 1
    code, out2, _ = run(capsys, "--vocab", "befit", "audit", str(ledger_file), "--to", "1999")
    assert code == 0 and out2.count("\n") == 2


def test_audit_truncated_line(capsys, ledger_file):
    text = ledger_file.read_text()
    ledger_file.write_text(text[: len(text) - 10])
    code, _, err = run(capsys, "--vocab", "befit", "audit", str(ledger_file))
    assert code == 2 and "line 5" in err


def test_bench_report(capsys, tmp_path):
    out_dir = tmp_path / "report"
    code, out, _ = run(capsys, "bench", "--profile", "pilot2", "--scale", "0.02", "--report-dir", str(out_dir),
                       "--format", "json")
    assert code == 0
    payload = json.loads(out)
    assert payload["checks"] == 200 and payload["agreement"] == 200
    assert json.loads((out_dir / "bench.json").read_text()) == payload
    assert len((out_dir / "checks.csv").read_text().splitlines()) == 201
    assert (out_dir / "latency.png").read_bytes()[:4] == b"\x89PNG"


def test_bench_rejects_bad_scale(capsys):
    code, _, err = run(capsys, "bench", "--scale", "2")
    assert code == 2 and "scale" in err
