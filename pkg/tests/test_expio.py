import math

import numpy as np
import pytest

from steerkit import qcore
from steerkit.criteria import Criterion, Scenario, closed_form
from steerkit.expio import (
    CountsFormatError,
    CountsRecord,
    ErrorBudget,
    counts_to_table,
    evaluate_with_errors,
    fit_visibility,
    load_counts,
    synthesize_counts,
    write_counts,
)

TSALLIS2 = Criterion("tsallis", q=2.0)
SHANNON = Criterion("shannon")
RENYI = Criterion("renyi")
DB = Criterion("db")


def write_file(tmp_path, text, name="counts.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


WELL_FORMED = """setting,a,b,counts
1,+1,+1,12
1,+1,-1,488
1,-1,+1,502
1,-1,-1,8
2,+1,+1,90
2,+1,-1,420
2,-1,+1,410
2,-1,-1,80
"""


class TestLoadCounts:
    def test_well_formed_two_settings(self, tmp_path):
        records = load_counts(write_file(tmp_path, WELL_FORMED))
        assert len(records) == 2
        assert records[0].total == 1010
        assert records[0].counts[0, 1] == 488
        assert records[0].alice_vec is None

    def test_negative_count_names_line(self, tmp_path):
        bad = WELL_FORMED.replace("1,-1,+1,502", "1,-1,+1,-3")
        with pytest.raises(CountsFormatError, match="line 4"):
            load_counts(write_file(tmp_path, bad))

    def test_non_contiguous_settings(self, tmp_path):
        bad = WELL_FORMED.replace("\n2,", "\n3,")
        with pytest.raises(CountsFormatError, match="contiguous"):
            load_counts(write_file(tmp_path, bad))

    def test_duplicate_key(self, tmp_path):
        bad = WELL_FORMED.replace("1,+1,-1,488", "1,+1,+1,488")
        with pytest.raises(CountsFormatError, match="duplicate"):
            load_counts(write_file(tmp_path, bad))

    def test_malformed_row_names_line(self, tmp_path):
        bad = WELL_FORMED.replace("2,+1,+1,90", "2,+1,ninety")
        with pytest.raises(CountsFormatError, match="line 6"):
            load_counts(write_file(tmp_path, bad))

    def test_bad_outcome_label(self, tmp_path):
        bad = WELL_FORMED.replace("2,+1,+1,90", "2,+2,+1,90")
        with pytest.raises(CountsFormatError, match="line 6"):
            load_counts(write_file(tmp_path, bad))

    def test_missing_outcome_row(self, tmp_path):
        bad = "\n".join(WELL_FORMED.strip().split("\n")[:-1]) + "\n"
        with pytest.raises(CountsFormatError, match="missing"):
            load_counts(write_file(tmp_path, bad))

    def test_empty_file(self, tmp_path):
        with pytest.raises(CountsFormatError, match="empty"):
            load_counts(write_file(tmp_path, ""))

    def test_bad_header(self, tmp_path):
        with pytest.raises(CountsFormatError, match="header"):
            load_counts(write_file(tmp_path, "a,b,c\n1,2,3\n"))

    def test_vector_round_trip(self, tmp_path):
        alice, bob = qcore.nom_settings(2)
        records = synthesize_counts(0.9, alice, bob, 100000)
        path = tmp_path / "synthetic.csv"
        write_counts(records, path)
        loaded = load_counts(path)
        assert len(loaded) == 2
        for orig, back in zip(records, loaded):
            assert np.array_equal(orig.counts, back.counts)
            assert np.allclose(orig.alice_vec, back.alice_vec, atol=1e-15)
            assert np.allclose(orig.bob_vec, back.bob_vec, atol=1e-15)

    def test_inconsistent_vectors_rejected(self, tmp_path):
        alice, bob = qcore.nom_settings(2)
        records = synthesize_counts(0.9, alice, bob, 1000)
        path = tmp_path / "synthetic.csv"
        write_counts(records, path)
        lines = path.read_text().split("\n")
        parts = lines[1].split(",")
        parts[4] = "0.123"
        lines[1] = ",".join(parts)
        path.write_text("\n".join(lines))
        with pytest.raises(CountsFormatError, match="vectors differ"):
            load_counts(path)


class TestCountsToTable:
    def test_uniform(self):
        table = counts_to_table(CountsRecord(1, np.full((2, 2), 100)))
        assert np.allclose(table.probs, 0.25, atol=1e-15)

    def test_anticorrelated(self):
        table = counts_to_table(CountsRecord(1, np.array([[0, 500], [500, 0]])))
        assert np.allclose(table.probs, [[0.0, 0.5], [0.5, 0.0]], atol=1e-15)

    def test_simple_arithmetic(self):
        table = counts_to_table(CountsRecord(1, np.array([[10, 40], [40, 10]])))
        assert np.isclose(table.prob(+1, +1), 0.1, atol=1e-15)

    def test_zero_total_rejected(self):
        with pytest.raises(ValueError):
            CountsRecord(1, np.zeros((2, 2), dtype=int))


class TestVisibilityFit:
    def test_exact_recovery(self):
        for mu in (0.3, 0.7, 0.963):
            alice, bob = qcore.nom_settings(3)
            records = synthesize_counts(mu, alice, bob, 10_000_000)
            assert abs(fit_visibility(records) - mu) < 1e-6

    def test_needs_vectors(self):
        record = CountsRecord(1, np.full((2, 2), 50))
        with pytest.raises(ValueError):
            fit_visibility([record])

    def test_orthogonal_overlaps_unidentifiable(self):
        z = np.array([0.0, 0.0, 1.0])
        x = np.array([1.0, 0.0, 0.0])
        record = CountsRecord(1, np.full((2, 2), 50), alice_vec=z, bob_vec=x)
        with pytest.raises(ValueError):
            fit_visibility([record])


class TestEvaluateWithErrors:
    def test_noiseless_matches_closed_form(self):
        mu = 0.963
        alice, bob = qcore.nom_settings(2)
        records = synthesize_counts(mu, alice, bob, 10_000_000)
        out = evaluate_with_errors(records, [SHANNON, TSALLIS2, RENYI, DB], bootstrap=0, jitter_deg=0.0)
        scen = Scenario(mu=mu, m=2, mode="nom")
        for (result, budget), criterion in zip(out, [SHANNON, TSALLIS2, RENYI, DB]):
            assert abs(result.value - closed_form(scen, criterion)) < 1e-5
            assert budget.stat == 0.0 and budget.sys == 0.0 and budget.total == 0.0

    def test_statistical_error_shrinks_with_counts(self):
        mu = 0.9
        alice, bob = qcore.nom_settings(2)
        sigmas = []
        for total in (1_000, 10_000, 100_000):
            records = synthesize_counts(mu, alice, bob, total)
            out = evaluate_with_errors(records, [TSALLIS2], bootstrap=400, jitter_deg=0.0, seed=17)
            sigmas.append(out[0][1].stat)
        # 1/sqrt(N) scaling within 20 percent
        for lo, hi in zip(sigmas[1:], sigmas[:-1]):
            ratio = hi / lo
            assert abs(ratio - math.sqrt(10.0)) < 0.2 * math.sqrt(10.0)

    def test_round_trip_within_three_sigma(self):
        # Poisson-sampled counts at 1e7 per setting reproduce the closed form
        mu = 0.91
        for m, criteria in ((2, [SHANNON, TSALLIS2, RENYI, DB]), (3, [SHANNON, TSALLIS2, DB])):
            alice, bob = qcore.nom_settings(m)
            records = synthesize_counts(mu, alice, bob, 10_000_000, seed=99)
            out = evaluate_with_errors(records, criteria, bootstrap=200, jitter_deg=0.0, seed=7)
            scen = Scenario(mu=mu, m=m, mode="nom")
            for (result, budget), criterion in zip(out, criteria):
                target = closed_form(scen, criterion)
                assert abs(result.value - target) < 3.0 * max(budget.stat, 1e-7)

    def test_point_estimate_invariant_under_rescaling(self):
        alice, bob = qcore.mub_settings(2, 15.0, 0.0)
        records = synthesize_counts(0.85, alice, bob, 10_000)
        scaled = [
            CountsRecord(rec.setting, rec.counts * 7, rec.alice_vec, rec.bob_vec)
            for rec in records
        ]
        base = evaluate_with_errors(records, [TSALLIS2], bootstrap=0, jitter_deg=0.0)
        big = evaluate_with_errors(scaled, [TSALLIS2], bootstrap=0, jitter_deg=0.0)
        assert np.isclose(base[0][0].value, big[0][0].value, atol=1e-12)

    def test_systematic_error_from_jitter(self):
        alice, bob = qcore.nom_settings(2)
        records = synthesize_counts(0.95, alice, bob, 1_000_000)
        out = evaluate_with_errors(records, [TSALLIS2, DB], bootstrap=200, jitter_deg=0.5, seed=21)
        for result, budget in out:
            assert budget.sys > 0.0
            assert np.isclose(budget.total, math.hypot(budget.stat, budget.sys), atol=1e-15)

    def test_budget_total_exact(self):
        budget = ErrorBudget(stat=0.003, sys=0.004)
        assert np.isclose(budget.total, 0.005, atol=1e-15)
        assert budget.total >= max(budget.stat, budget.sys)

    def test_jitter_needs_vectors(self):
        records = [
            CountsRecord(1, np.full((2, 2), 50)),
            CountsRecord(2, np.full((2, 2), 50)),
        ]
        with pytest.raises(ValueError, match="vectors"):
            evaluate_with_errors(records, [TSALLIS2], bootstrap=10, jitter_deg=0.1)
        # without jitter and without db, vectors are unnecessary
        out = evaluate_with_errors(records, [TSALLIS2], bootstrap=10, jitter_deg=0.0)
        assert len(out) == 1

    def test_db_needs_vectors(self):
        records = [
            CountsRecord(1, np.full((2, 2), 50)),
            CountsRecord(2, np.full((2, 2), 50)),
        ]
        with pytest.raises(ValueError, match="vectors"):
            evaluate_with_errors(records, [DB], bootstrap=0, jitter_deg=0.0)

    def test_renyi_needs_two_settings(self):
        alice, bob = qcore.nom_settings(3)
        records = synthesize_counts(0.9, alice, bob, 1000)
        with pytest.raises(ValueError, match="settings"):
            evaluate_with_errors(records, [RENYI], bootstrap=0, jitter_deg=0.0)

    def test_deterministic_given_seed(self):
        alice, bob = qcore.nom_settings(2)
        records = synthesize_counts(0.9, alice, bob, 10_000, seed=5)
        first = evaluate_with_errors(records, [TSALLIS2, DB], bootstrap=100, jitter_deg=0.2, seed=9)
        second = evaluate_with_errors(records, [TSALLIS2, DB], bootstrap=100, jitter_deg=0.2, seed=9)
        assert first == second
