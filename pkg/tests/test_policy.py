import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import example
from plcheck.policy import (
    BUSINESS,
    CONSENT,
    INF,
    Exists,
    FullPolicy,
    Intersection,
    Interval,
    Named,
    ParseError,
    empty_intervals,
    intersect_intervals,
    parse_policy,
    serialize_policy,
)
from plcheck.vocab import DURATION_IN_DAYS, HAS_DURATION, HAS_LOCATION, NULL
from randgen import RandomWorld

BASE = "has_data: A, has_purpose: B, has_processing: C, has_recipient: D"


def storage_interval(p):
    for item in p.storage.items:
        if item.prop == DURATION_IN_DAYS:
            return item.filler
    return None


def test_year_bounds_become_days():
    second = example("befit-consent.pol").disjuncts[1]
    assert storage_interval(second) == Interval(365, 1825)


def test_contact_narrowing_parses_to_nested_exists():
    purpose = example("befit-consent-sms.pol").disjuncts[0].purpose
    assert purpose == Intersection((Named("FitnessRecommendation"), Exists("contact", Named("SMS"))))


def test_null_storage():
    fp = parse_policy(f"{{ {BASE}, has_storage: Null }}")
    assert fp.disjuncts[0].storage == Named(NULL)


def test_missing_duration_is_unbounded():
    first = example("befit-consent.pol").disjuncts[0]
    assert storage_interval(first) == Interval(0, INF)


def test_named_duration_class():
    st_ = example("demographic.bp").disjuncts[0].storage
    assert Exists(HAS_DURATION, Named("svdu:Indefinitely")) in st_.items
    assert Exists(HAS_LOCATION, Named("svl:OurServers")) in st_.items


@pytest.mark.parametrize("lit, days", [
    ("3", 3), ("1day", 1), ("2week", 14), ("1month", 30), ("1year", 365), ("5year", 1825), ("10d", 10),
])
def test_unit_normalization(lit, days):
    fp = parse_policy(f"{{ {BASE}, has_storage: {{ has_duration: [{lit}, *] }} }}")
    assert storage_interval(fp.disjuncts[0]) == Interval(days, INF)


def test_business_slots_and_order(gdpr_voc):
    p = example("religion.bp").disjuncts[0]
    assert p.duties == (Named("Art12-22_SubjectRights"), Named("Art32-37_Obligations"))
    assert p.legal_basis == Named("Art6_1_a_Consent")


def test_inverted_interval_is_accepted_and_flagged():
    fp = parse_policy(f"{{ {BASE}, has_storage: {{ has_duration: [5year, 1year] }} }}")
    assert list(empty_intervals(fp.as_expr())) == [Interval(1825, 365)]


@pytest.mark.parametrize("text, fragment", [
    ("[]", "at least one"),
    ("{ has_data: A }", "missing mandatory"),
    (f"{{ {BASE}, has_storage: Null, has_duty: X }}", "not allowed in a consent"),
    (f"{{ {BASE}, has_storage: Null, colour: red }}", "unknown attribute"),
    (f"{{ {BASE}, has_storage: Null, has_data: E }}", "duplicate"),
    ("{ has_data: { not: A }, has_purpose: B, has_processing: C, has_recipient: D, has_storage: Null }", "rulebooks"),
    ("{ has_data: { or: [A, B] }, has_purpose: B, has_processing: C, has_recipient: D, has_storage: Null }",
     "rulebooks"),
    (f"{{ {BASE}, has_storage: {{ has_duration: [x, 3] }} }}", "malformed"),
    (f"{{ {BASE}, has_storage: {{ has_duration: [1.5, 3] }} }}", ""),
    (f"{{ {BASE}, has_storage: {{ has_duration: [*, 3] }} }}", "lower bound"),
    (f"{{ {BASE}, has_storage: Null", ""),
])
def test_rejections(text, fragment):
    with pytest.raises(ParseError) as err:
        parse_policy(text)
    assert fragment in str(err.value)
    assert err.value.line >= 1 and err.value.col >= 1


def test_error_position_points_at_offending_key():
    text = "{\n  has_data: A,\n  colour: red\n}"
    with pytest.raises(ParseError) as err:
        parse_policy(text)
    assert (err.value.line, err.value.col) == (3, 3)


def test_single_disjunct_serializes_without_array():
    text = serialize_policy(example("befit-avg-heart-rate.bp"))
    assert text.lstrip().startswith("{")


def test_open_bound_rendering():
    fp = parse_policy(f"{{ {BASE}, has_storage: {{ has_duration: [1year, *] }} }}")
    assert "[365d, *]" in serialize_policy(fp)


def test_canonical_key_order():
    text = serialize_policy(example("befit-consent.pol"))
    keys = [line.strip().split(":")[0] for line in text.splitlines() if line.strip().startswith("has_")]
    assert keys[:5] == sorted(keys[:5])


@pytest.mark.parametrize("name", [
    "befit-consent.pol", "befit-consent-sms.pol", "befit-avg-heart-rate.bp", "befit-third-party.bp",
    "religion.bp", "location.bp", "demographic.bp",
])
def test_fixture_round_trip(name):
    fp = example(name)
    assert parse_policy(serialize_policy(fp), fp.kind) == fp


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 10**9), st.sampled_from([CONSENT, BUSINESS]))
def test_round_trip_random(seed, kind):
    world = RandomWorld(random.Random(seed))
    fp = world.full(kind)
    assert parse_policy(serialize_policy(fp), kind) == fp


def test_interval_intersection():
    assert intersect_intervals(Interval(365, 1825), Interval(400, 500)) == Interval(400, 500)
    assert intersect_intervals(Interval(0, 100), Interval(200, 300)).empty
    a = Interval(3, 9)
    assert intersect_intervals(a, Interval(0, INF)) == a


def test_full_policy_needs_a_disjunct():
    with pytest.raises(ValueError):
        FullPolicy((), CONSENT)
