import io
import math

import numpy as np
import pytest

from steerkit import qcore
from steerkit.criteria import (
    DB_SCALE,
    DB_VECTOR_THRESHOLD,
    Criterion,
    Scenario,
    closed_form,
    critical_alpha,
    critical_mu,
    db_bound,
    db_lhs,
    db_steering,
    evaluate,
    renyi_steering,
    sweep,
    sweep_rows_to_csv,
    tsallis_steering,
)

INF = math.inf


def mub_tables(mu, m, alpha=0.0, phi=0.0):
    alice, bob = qcore.mub_settings(m, alpha, phi)
    return [qcore.joint_table_closed(mu, u, v) for u, v in zip(alice, bob)]


def nom_tables(mu, m):
    alice, bob = qcore.nom_settings(m)
    return [qcore.joint_table_closed(mu, u, v) for u, v in zip(alice, bob)]


def random_rotation(rng):
    quat = rng.standard_normal(4)
    w, x, y, z = quat / np.linalg.norm(quat)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


class TestCriterionParsing:
    def test_tokens(self):
        assert Criterion.parse("shannon").kind == "shannon"
        assert Criterion.parse("db").kind == "db"
        crit = Criterion.parse("tsallis2")
        assert crit.kind == "tsallis" and crit.q == 2.0
        crit = Criterion.parse("tsallis1.5")
        assert crit.q == 1.5
        crit = Criterion.parse("renyi")
        assert (crit.r, crit.s) == (0.5, INF)
        crit = Criterion.parse("renyi(0.75,1.5)")
        assert (crit.r, crit.s) == (0.75, 1.5)
        crit = Criterion.parse("renyi(0.5,inf)")
        assert (crit.r, crit.s) == (0.5, INF)

    def test_bad_tokens_rejected(self):
        for token in ("tsallis", "gauss", "renyi(1)", "tsallis0.5"):
            with pytest.raises(ValueError):
                Criterion.parse(token)


class TestTsallisSteering:
    def test_aligned_singlet_q2(self):
        result = tsallis_steering(mub_tables(1.0, 2), 2.0)
        assert np.isclose(result.value, 0.5, atol=1e-12)
        assert result.steerable
        assert result.bound == 0.0

    def test_white_noise_negative(self):
        result = tsallis_steering(mub_tables(0.0, 2), 2.0)
        assert np.isclose(result.value, -0.5, atol=1e-12)
        assert not result.steerable

    def test_nom_anchor(self):
        # closed form: 0.5 + f_2 terms at mu = 0.963 -> 0.311448 (rounds to 0.311)
        result = tsallis_steering(nom_tables(0.963, 2), 2.0)
        assert np.isclose(result.value, 0.3114478750, atol=1e-9)
        assert np.isclose(result.value, 0.311, atol=1e-3)

    def test_override_bound(self):
        tables = mub_tables(1.0, 2)
        shifted = tsallis_steering(tables, 2.0, bound=0.7)
        baseline = tsallis_steering(tables, 2.0)
        assert np.isclose(shifted.value - baseline.value, 0.2, atol=1e-12)

    def test_shannon_labelling(self):
        result = tsallis_steering(mub_tables(1.0, 2), 1.0)
        assert result.criterion == "shannon" and result.order == "q=1"


class TestRenyiSteering:
    def test_shannon_orders_match_tsallis_limit(self):
        tables = mub_tables(0.9, 2, alpha=12.0)
        renyi = renyi_steering(tables, 1.0, 1.0)
        tsallis = tsallis_steering(tables, 1.0)
        assert np.isclose(renyi.value, tsallis.value, atol=1e-12)

    def test_aligned_singlet_extreme_orders(self):
        result = renyi_steering(mub_tables(1.0, 2), 0.5, INF)
        assert np.isclose(result.value, math.log(2.0), atol=1e-12)

    def test_nom_anchor(self):
        result = renyi_steering(nom_tables(0.963, 2), 0.5, INF)
        assert np.isclose(result.value, 0.367866, atol=1e-6)
        assert np.isclose(result.value, 0.367, atol=1.0e-3)

    def test_constraints_enforced(self):
        tables = mub_tables(1.0, 2)
        with pytest.raises(ValueError):
            renyi_steering(tables, 0.5, 2.0)  # 1/r + 1/s != 2
        with pytest.raises(ValueError):
            renyi_steering(tables, 0.3, INF)  # r < 1/2
        with pytest.raises(ValueError):
            renyi_steering(mub_tables(1.0, 3), 1.0, 1.0)  # three tables


class TestDeterminantCriterion:
    def test_parallel_plane_normals(self):
        pair = (np.array([0.0, 0.0, 1.0]), np.array([1.0, 0.0, 0.0]))
        assert np.isclose(db_lhs(pair, pair, 1.0), 1.0, atol=1e-12)
        assert db_lhs(pair, pair, 1.0) > DB_VECTOR_THRESHOLD[2]

    def test_orthonormal_triads(self):
        alice, bob = qcore.mub_settings(3)
        assert np.isclose(db_lhs(alice, bob, 1.0), 1.0, atol=1e-12)
        assert db_lhs(alice, bob, 1.0) > DB_VECTOR_THRESHOLD[3]

    def test_nom_pair_value(self):
        alice, bob = qcore.nom_settings(2)
        expected = 0.963 ** 2 * math.sqrt(3.0) / 2.0
        assert np.isclose(db_lhs(alice, bob, 0.963), expected, atol=1e-12)
        assert np.isclose(db_lhs(alice, bob, 0.963), 0.8030, atol=2e-4)

    def test_mismatched_counts_rejected(self):
        alice, bob = qcore.mub_settings(3)
        with pytest.raises(ValueError):
            db_lhs(alice[:2], bob, 1.0)

    def test_bound_values(self):
        assert np.isclose(db_bound(2, 2), 1.0 / (8.0 * math.sqrt(2.0)), atol=1e-16)
        assert np.isclose(db_bound(2, 2), 0.0883883, atol=1e-7)
        assert np.isclose(db_bound(3, 2), 1.0 / 108.0, atol=1e-16)
        assert np.isclose(db_bound(3, 2), 0.0092593, atol=1e-7)

    def test_bound_decreasing_in_m(self):
        values = [db_bound(m, 2) for m in range(2, 7)]
        assert all(a > b for a, b in zip(values, values[1:]))

    def test_bound_rejects_bad_args(self):
        with pytest.raises(ValueError):
            db_bound(1, 2)
        with pytest.raises(ValueError):
            db_bound(2, 1)

    def test_scale_factors(self):
        assert np.isclose(DB_SCALE[2], 1.0 / (4.0 * math.sqrt(2.0)), atol=1e-16)
        assert np.isclose(DB_SCALE[3], 1.0 / (12.0 * math.sqrt(3.0)), atol=1e-16)

    def test_steering_values(self):
        alice, bob = qcore.mub_settings(2)
        result = db_steering(alice, bob, 1.0)
        assert np.isclose(result.value, 1.0 / (8.0 * math.sqrt(2.0)), atol=1e-12)

        alice, bob = qcore.nom_settings(2)
        result = db_steering(alice, bob, 0.963)
        assert np.isclose(result.value, 0.05358546, atol=1e-7)
        assert np.isclose(result.value, 0.053, atol=1e-3)

        alice, bob = qcore.nom_settings(3)
        result = db_steering(alice, bob, 0.963)
        assert np.isclose(result.value, 0.02112313, atol=1e-7)
        assert np.isclose(result.value, 0.021, atol=1e-3)

    def test_bad_settings_count_rejected(self):
        alice, bob = qcore.mub_settings(2)
        with pytest.raises(ValueError):
            db_steering(alice, bob, 1.0, m=4)

    def test_triad_rotation_invariance(self):
        rng = np.random.default_rng(100)
        alice, bob = qcore.mub_settings(3)
        reference = db_steering(alice, bob, 0.9).value
        for _ in range(100):
            rot_a, rot_b = random_rotation(rng), random_rotation(rng)
            rotated = db_steering(
                [rot_a @ u for u in alice], [rot_b @ v for v in bob], 0.9
            ).value
            assert abs(rotated - reference) < 1e-12

    def test_pair_in_plane_rotation_invariance(self):
        rng = np.random.default_rng(101)
        alice, bob = qcore.mub_settings(2, 20.0, 30.0)
        reference = db_steering(alice, bob, 0.9).value
        for _ in range(50):
            theta, eta = rng.uniform(0.0, 2.0 * np.pi, 2)
            alice_rot = (
                math.cos(theta) * alice[0] + math.sin(theta) * alice[1],
                -math.sin(theta) * alice[0] + math.cos(theta) * alice[1],
            )
            bob_rot = (
                math.cos(eta) * bob[0] + math.sin(eta) * bob[1],
                -math.sin(eta) * bob[0] + math.cos(eta) * bob[1],
            )
            assert abs(db_steering(alice_rot, bob_rot, 0.9).value - reference) < 1e-12


class TestClosedForms:
    def test_tsallis_aligned_singlet(self):
        scen = Scenario(mu=1.0, m=2)
        assert np.isclose(closed_form(scen, Criterion("tsallis", q=2.0)), 0.5, atol=1e-14)

    def test_renyi_at_sixty_degrees(self):
        scen = Scenario(mu=1.0, alpha_deg=60.0, m=2)
        expected = math.log(1.5) - math.log(1.0 + math.sqrt(0.75))
        value = closed_form(scen, Criterion("renyi"))
        assert np.isclose(value, expected, atol=1e-14)
        assert np.isclose(value, -0.2183, atol=1e-3)

    def test_shannon_nom_three_settings(self):
        scen = Scenario(mu=0.963, m=3, mode="nom")
        assert np.isclose(closed_form(scen, Criterion("shannon")), 0.668202, atol=1e-6)

    def test_explicit_mode_rejected(self):
        alice, bob = qcore.mub_settings(2)
        scen = Scenario(mu=1.0, m=2, mode="explicit", alice=alice, bob=bob)
        with pytest.raises(ValueError):
            closed_form(scen, Criterion("db"))

    def test_renyi_needs_two_settings(self):
        with pytest.raises(ValueError):
            closed_form(Scenario(mu=1.0, m=3), Criterion("renyi"))

    @pytest.mark.parametrize("phi", [0.0, 30.0, 90.0])
    @pytest.mark.parametrize("m", [2, 3])
    def test_pipeline_equivalence_grid(self, m, phi):
        criteria = [
            Criterion("shannon"),
            Criterion("tsallis", q=2.0),
            Criterion("tsallis", q=3.0),
            Criterion("db"),
        ]
        if m == 2:
            criteria += [
                Criterion("renyi"),
                Criterion("renyi", r=1.0, s=1.0),
                Criterion("renyi", r=2.0 / 3.0, s=2.0),
            ]
        for mu in np.linspace(0.0, 1.0, 10):
            for alpha in np.linspace(0.0, 90.0, 10):
                scen = Scenario(mu=mu, alpha_deg=alpha, phi_deg=phi, m=m)
                for criterion in criteria:
                    assert abs(
                        closed_form(scen, criterion) - evaluate(scen, criterion).value
                    ) < 1e-10

    @pytest.mark.parametrize("m", [2, 3])
    def test_nom_pipeline_equivalence(self, m):
        criteria = [Criterion("shannon"), Criterion("tsallis", q=2.0), Criterion("db")]
        if m == 2:
            criteria.append(Criterion("renyi"))
        for mu in np.linspace(0.0, 1.0, 10):
            scen = Scenario(mu=mu, m=m, mode="nom")
            for criterion in criteria:
                assert abs(closed_form(scen, criterion) - evaluate(scen, criterion).value) < 1e-10

    @pytest.mark.parametrize(
        "criterion",
        [Criterion("shannon"), Criterion("tsallis", q=2.0), Criterion("renyi"), Criterion("db")],
    )
    def test_evenness_in_angles(self, criterion):
        for alpha, phi in [(25.0, 0.0), (40.0, 30.0), (70.0, 60.0)]:
            base = closed_form(Scenario(mu=0.9, alpha_deg=alpha, phi_deg=phi), criterion)
            assert np.isclose(
                closed_form(Scenario(mu=0.9, alpha_deg=-alpha, phi_deg=phi), criterion),
                base,
                atol=1e-12,
            )
            assert np.isclose(
                closed_form(Scenario(mu=0.9, alpha_deg=alpha, phi_deg=-phi), criterion),
                base,
                atol=1e-12,
            )

    @pytest.mark.parametrize("m", [2, 3])
    def test_monotone_in_mu_when_aligned(self, m):
        criteria = [Criterion("shannon"), Criterion("tsallis", q=2.0), Criterion("db")]
        if m == 2:
            criteria.append(Criterion("renyi"))
        mus = np.linspace(0.05, 1.0, 20)
        for criterion in criteria:
            values = [closed_form(Scenario(mu=mu, m=m), criterion) for mu in mus]
            assert all(b > a for a, b in zip(values, values[1:]))

    def test_sign_equivalence_tsallis2_renyi(self):
        for mu in np.linspace(0.05, 1.0, 12):
            for alpha in np.linspace(0.0, 85.0, 12):
                for phi in (0.0, 30.0, 90.0):
                    scen = Scenario(mu=mu, alpha_deg=alpha, phi_deg=phi, m=2)
                    t = closed_form(scen, Criterion("tsallis", q=2.0))
                    h = closed_form(scen, Criterion("renyi"))
                    detectable = (
                        mu * math.cos(math.radians(alpha))
                        * math.sqrt(1.0 + math.cos(math.radians(phi)) ** 2)
                        > 1.0
                    )
                    assert (t > 0) == detectable
                    assert (h > 0) == detectable

    def test_full_tilt_kills_two_setting_db(self):
        for mu in (0.0, 0.5, 1.0):
            scen = Scenario(mu=mu, phi_deg=90.0, m=2)
            assert np.isclose(
                closed_form(scen, Criterion("db")), -1.0 / (8.0 * math.sqrt(2.0)), atol=1e-14
            )


class TestCriticalSolvers:
    def test_critical_mu_values(self):
        assert np.isclose(critical_mu(0.0, 0.0), 1.0 / math.sqrt(2.0), atol=1e-12)
        assert np.isclose(critical_mu(45.0, 0.0), 1.0, atol=1e-12)
        assert np.isclose(critical_mu(0.0, 90.0), 1.0, atol=1e-12)
        assert critical_mu(60.0, 0.0) > 1.0  # undetectable regime

    def test_critical_mu_requires_positive_cosine(self):
        with pytest.raises(ValueError):
            critical_mu(90.0, 0.0)

    def test_critical_alpha_singlet_is_45(self):
        alpha = critical_alpha(Criterion("tsallis", q=2.0), 1.0, 0.0, 2)
        assert abs(alpha - 45.0) < 1e-6

    def test_critical_alpha_matches_critical_mu_inversion(self):
        # at mu = critical_mu(alpha, phi), the zero sits at that alpha
        mu = critical_mu(30.0, 0.0)
        alpha = critical_alpha(Criterion("tsallis", q=2.0), mu, 0.0, 2)
        assert abs(alpha - 30.0) < 1e-6

    def test_experimental_visibility_thresholds(self):
        assert abs(critical_alpha(Criterion("tsallis", q=2.0), 0.9733, 0.0, 2) - 43.406) < 1e-3
        assert abs(critical_alpha(Criterion("shannon"), 0.9733, 0.0, 2) - 36.742) < 1e-3

    def test_no_threshold_cases(self):
        assert critical_alpha(Criterion("tsallis", q=2.0), 0.5, 0.0, 2) is None
        assert critical_alpha(Criterion("db"), 0.9, 0.0, 3) is None  # constant in alpha


class TestSweep:
    def test_shape_and_columns(self):
        criteria = [Criterion.parse(t) for t in ("shannon", "tsallis2", "renyi", "db")]
        rows = sweep(0.9733, np.arange(0.0, 91.0, 10.0), 0.0, 2, criteria)
        assert len(rows) == 10 * 4
        stream = io.StringIO()
        sweep_rows_to_csv(rows, stream)
        lines = stream.getvalue().strip().split("\n")
        assert lines[0] == "mu,alpha_deg,phi_deg,m,criterion,order,value,steerable"
        assert len(lines) == 41

    def test_db_column_constant_in_alpha(self):
        rows = sweep(0.9, np.arange(0.0, 91.0, 10.0), 30.0, 3, [Criterion("db")])
        values = {row.value for row in rows}
        assert len(values) == 1
        expected = (0.9 ** 3 / math.sqrt(3.0) - 1.0 / 9.0) / 12.0
        assert np.isclose(values.pop(), expected, atol=1e-12)

    def test_full_tilt_no_detection_below_singlet(self):
        criteria = [Criterion.parse(t) for t in ("shannon", "tsallis2", "renyi", "db")]
        rows = sweep(0.98, np.arange(0.0, 91.0, 10.0), 90.0, 2, criteria)
        assert all(row.value <= 1e-12 for row in rows)
        assert not any(row.steerable for row in rows)
