import json

import pytest

from conftest import example
from plcheck.engine import COMPLIANT, NON_COMPLIANT, subsumes_filler
from plcheck.gdpr import (
    AllOf,
    AnyOf,
    Ref,
    RegulatoryRulebook,
    Requires,
    RulebookError,
    builtin_gdpr_rulebook,
    bundled_rulebook_path,
    check_regulatory,
    dump_rulebook,
    load_rulebook,
)
from plcheck.normalizer import normalize_full
from plcheck.policy import BUSINESS, FullPolicy, Named, SimplePolicy, Union
from plcheck.vocab import HAS_DUTY, HAS_LEGAL_BASIS

RB = builtin_gdpr_rulebook()


def test_religion_fails_in_article_nine(gdpr_voc):
    report = check_regulatory(gdpr_voc, example("religion.bp"), RB)
    assert report.verdict == NON_COMPLIANT
    assert report.failure.path == ("GDPR_Compliance", "Chap2_LawfulProcessing", "Art9_SensitiveData")


@pytest.mark.parametrize("name", ["location.bp", "demographic.bp"])
def test_non_sensitive_data_complies(gdpr_voc, name):
    report = check_regulatory(gdpr_voc, example(name), RB)
    assert report.verdict == COMPLIANT
    assert report.cover == {0: (0,)}


def test_lookup_returns_the_legal_basis_union():
    body = RB.definitions["Art6_1_LegalBasis"]
    assert isinstance(body, Requires) and body.prop == HAS_LEGAL_BASIS
    assert isinstance(body.expr, Union)
    assert Named("Art6_1_a_Consent") in body.expr.items


def test_chapter_two_is_a_conjunction():
    assert isinstance(RB.definitions["Chap2_LawfulProcessing"], AllOf)


def test_single_rule_book_lets_religion_through(gdpr_voc):
    rb = RegulatoryRulebook({"Only": Requires(HAS_LEGAL_BASIS, Named("Art6_1_a_Consent"))}, "Only")
    assert check_regulatory(gdpr_voc, example("religion.bp"), rb).verdict == COMPLIANT


@pytest.mark.parametrize("name", ["religion.bp", "location.bp", "demographic.bp"])
def test_evaluator_matches_inlined_subsumption(gdpr_voc, name):
    (n,) = normalize_full(gdpr_voc, example(name))
    direct = subsumes_filler(gdpr_voc, n.root, RB.inline())
    assert check_regulatory(gdpr_voc, example(name), RB).compliant == direct


def test_adding_a_duty_cannot_break_compliance(gdpr_voc):
    d = example("location.bp").disjuncts[0]
    more = SimplePolicy(d.data, d.purpose, d.processing, d.recipient, d.storage,
                        duties=d.duties + (Named("sbpl:AnyDuty"),), legal_basis=d.legal_basis)
    assert check_regulatory(gdpr_voc, FullPolicy((more,), BUSINESS), RB).verdict == COMPLIANT


def test_missing_duty_fails_chapter_three(gdpr_voc):
    d = example("location.bp").disjuncts[0]
    fewer = SimplePolicy(d.data, d.purpose, d.processing, d.recipient, d.storage,
                         duties=(Named("Art32-37_Obligations"),), legal_basis=d.legal_basis)
    report = check_regulatory(gdpr_voc, FullPolicy((fewer,), BUSINESS), RB)
    assert report.verdict == NON_COMPLIANT
    assert report.failure.path[-1] == "Chap3_RightsOfDataSubjects"


def test_round_trip():
    assert load_rulebook(dump_rulebook(RB)) == RB


def test_shipped_file_matches_builtin():
    assert load_rulebook(bundled_rulebook_path().read_text()) == RB


@pytest.mark.parametrize("defs, fragment", [
    ({"A": Ref("B"), "B": AnyOf((Ref("A"),))}, "cyclic"),
    ({"A": Ref("Nope")}, "undefined"),
    ({"B": Ref("B")}, "root"),
])
def test_bad_definitions(defs, fragment):
    with pytest.raises(RulebookError, match=fragment):
        RegulatoryRulebook(defs, "A")


@pytest.mark.parametrize("doc, fragment", [
    ({"definitions": {"A": {"xor": []}}}, "unknown rule node"),
    ({"definitions": {"A": {"requires": {"class": "X"}}}}, "malformed"),
    ({"root": "A"}, "definitions"),
])
def test_bad_files(doc, fragment):
    with pytest.raises(RulebookError, match=fragment):
        load_rulebook(json.dumps(doc))


def test_duty_rule_uses_duty_slot():
    assert RB.definitions["Chap3_RightsOfDataSubjects"].prop == HAS_DUTY
