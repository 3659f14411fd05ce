import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import example
from plcheck.normalizer import NormalizationError, is_vacuous, normalize_expr, normalize_full, normalize_simple, renormalize
from plcheck.oracle import oracle_subsumes
from plcheck.policy import BUSINESS, Exists, FullPolicy, Intersection, Interval, Named, SimplePolicy, Union, storage_of
from plcheck.vocab import DURATION_IN_DAYS, HAS_DATA, HAS_DUTY, HAS_PURPOSE, HAS_STORAGE
from randgen import RandomWorld


def test_contact_narrowing(befit):
    n = normalize_simple(befit, example("befit-consent-sms.pol").disjuncts[0])
    (purpose,) = n.slots[HAS_PURPOSE]
    assert purpose.names == {"FitnessRecommendation"}
    assert purpose.nested["contact"][0].names == {"SMS"}


def test_functional_intervals_intersect(befit):
    expr = Intersection((Exists(DURATION_IN_DAYS, Interval(365, 1825)), Exists(DURATION_IN_DAYS, Interval(400, 500))))
    f = normalize_expr(befit, expr, "spl:AnyStorage")
    assert f.nested[DURATION_IN_DAYS][0].interval == Interval(400, 500)


def test_disjoint_data_is_unsatisfiable(gdpr_voc):
    p = example("religion.bp").disjuncts[0]
    both = SimplePolicy(Intersection((Named("Religion"), Named("Location"))), p.purpose, p.processing,
                        p.recipient, p.storage)
    assert not normalize_simple(gdpr_voc, both).satisfiable


def test_range_violation_is_unsatisfiable(befit):
    p = example("befit-avg-heart-rate.bp").disjuncts[0]
    bad = SimplePolicy(Named("FitnessRecommendation"), p.purpose, p.processing, p.recipient, p.storage)
    assert not normalize_simple(befit, bad).satisfiable


def test_redundant_supers_removed(befit):
    f = normalize_expr(befit, Intersection((Named("HeartRate"), Named("HealthData"), Named("BiometricData"))))
    assert f.names == {"HeartRate"}


def test_duties_stay_separate(gdpr_voc):
    n = normalize_simple(gdpr_voc, example("demographic.bp").disjuncts[0])
    assert len(n.slots[HAS_DUTY]) == 4
    assert len(n.slots[HAS_DATA]) == 1


def test_befit_consent_two_satisfiable(befit):
    ns = normalize_full(befit, example("befit-consent.pol"))
    assert [n.satisfiable for n in ns] == [True, True]
    assert [n.provenance for n in ns] == [0, 1]


def test_all_unsatisfiable_is_vacuous(befit):
    p = example("befit-avg-heart-rate.bp").disjuncts[0]
    dead = SimplePolicy(p.data, p.purpose, p.processing, p.recipient, storage_of(Named("EU"), Interval(9, 3)))
    ns = normalize_full(befit, FullPolicy((dead, dead), BUSINESS))
    assert is_vacuous(ns) and not any(n.satisfiable for n in ns)


def test_unknown_class_raises(befit):
    p = example("befit-avg-heart-rate.bp").disjuncts[0]
    with pytest.raises(NormalizationError):
        normalize_simple(befit, SimplePolicy(Named("Nope"), p.purpose, p.processing, p.recipient, p.storage))


def test_union_rejected(befit):
    with pytest.raises(NormalizationError):
        normalize_expr(befit, Union((Named("HeartRate"),)))


def test_storage_slot_shape(befit):
    n = normalize_simple(befit, example("befit-consent.pol").disjuncts[1])
    (storage,) = n.slots[HAS_STORAGE]
    assert storage.nested[DURATION_IN_DAYS][0].interval == Interval(365, 1825)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10**9))
def test_idempotent(seed):
    w = RandomWorld(random.Random(seed))
    for n in normalize_full(w.voc, w.full(BUSINESS)):
        again = renormalize(w.voc, n)
        assert again == n
        assert again.satisfiable == n.satisfiable


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**9))
def test_semantics_preserved(seed):
    w = RandomWorld(random.Random(seed))
    p = w.simple(BUSINESS)
    n = normalize_simple(w.voc, p)
    if n.satisfiable:
        assert oracle_subsumes(w.voc, p, n.root.to_expr())
        assert oracle_subsumes(w.voc, n.root.to_expr(), p)
    # emptiness agrees with the oracle's model search
    assert oracle_subsumes(w.voc, p, Union(())) == (not n.satisfiable)
