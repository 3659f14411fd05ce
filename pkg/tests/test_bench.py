from dataclasses import replace

import pytest

from plcheck.bench import PILOT_ONTOLOGY, PROFILES, OntologySpec, WorkloadProfile, generate_workload, pilot_vocabulary, run_bench
from plcheck.engine import check_compliance

TINY = WorkloadProfile("tiny", PILOT_ONTOLOGY, 12, 2.5, 60, 3.2, 90, seed=7)


@pytest.fixture(scope="module")
def tiny():
    return generate_workload(TINY)


def test_pilot_ontology_census():
    voc, forests = pilot_vocabulary()
    census = voc.census()
    assert {k: census[k] for k in ("inclusions", "disjoint_axioms", "ranges", "functional", "height")} == {
        "inclusions": 186, "disjoint_axioms": 11, "ranges": 10, "functional": 8, "height": 4,
    }
    assert len(forests) == 5


def test_deterministic(tiny):
    again = generate_workload(TINY)
    assert again.business == tiny.business and again.consents == tiny.consents
    assert again.expected == tiny.expected
    other = generate_workload(replace(TINY, seed=8))
    assert other.consents != tiny.consents


def test_exact_counts(tiny):
    s = tiny.stats()
    assert (s["bp_count"], s["consent_count"], s["check_count"]) == (12, 60, 90)
    assert s["bp_avg"] == pytest.approx(2.5, abs=0.5 / 12)
    assert s["consent_avg"] == pytest.approx(3.2, abs=0.5 / 60)
    assert sum(tiny.expected[:60]) == 30


@pytest.mark.parametrize("target", [0.0, 0.2, 1.0])
def test_compliant_fraction(target):
    w = generate_workload(replace(TINY, target_compliant=target, check_count=60))
    assert w.stats()["compliant_fraction"] == pytest.approx(target)


def test_ground_truth_matches_full_check(tiny):
    for (b, c), want in zip(tiny.pairs[:60], tiny.expected):
        got = check_compliance(tiny.vocab, tiny.business[b], tiny.consents[c]).compliant
        assert got == want


def test_run_agrees_and_parallel_matches(tiny):
    one = run_bench(tiny, warmup=5)
    assert one.agreement == one.checks == 90
    assert one.compliant == sum(tiny.expected)
    two = run_bench(tiny, parallelism=2)
    assert two.verdicts == one.verdicts
    d = one.to_dict()
    assert "latencies_ns" not in d and d["checks_per_sec"] > 0


@pytest.mark.parametrize("change, fragment", [
    ({"bp_count": 0}, "positive"),
    ({"consent_avg": 0.5}, "at least one"),
    ({"target_compliant": 1.5}, "fraction"),
    ({"ontology": OntologySpec(ranges=9)}, "skeleton"),
    ({"ontology": OntologySpec(inclusions=10)}, "too few"),
    ({"ontology": OntologySpec(disjoint_axioms=0)}, "disjointness"),
])
def test_invalid_profiles(change, fragment):
    with pytest.raises(ValueError, match=fragment):
        replace(TINY, **change).validate()


def test_parallelism_must_be_positive(tiny):
    with pytest.raises(ValueError):
        run_bench(tiny, parallelism=0)


def test_pilot_profiles_declared():
    assert PROFILES["pilot1"].check_count == 12_000 and PROFILES["pilot2"].check_count == 10_000


@pytest.fixture(scope="module")
def pilot1():
    return generate_workload(PROFILES["pilot1"])


def test_pilot1_parallelism_four_same_verdicts(pilot1):
    one = run_bench(pilot1)
    four = run_bench(pilot1, parallelism=4)
    assert four.verdicts == one.verdicts and four.checks == 12_000


def test_full_warmup_is_steady_state(pilot1):
    # interleaved best-of-two, so drift of the shared machine hits both sides
    cold, warm = [], []
    for _ in range(2):
        cold.append(run_bench(pilot1).median_us)
        warm.append(run_bench(pilot1, warmup=len(pilot1.pairs)).median_us)
    assert min(warm) == pytest.approx(min(cold), rel=0.2)
