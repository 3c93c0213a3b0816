import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmeq.errors import CompletenessError, DimensionError, ImpossibleOutcomeError, UnsupportedError
from mmeq.measurement import (
    POM,
    KrausSet,
    apply_channel,
    collapse,
    collapse_density,
    outcome_probabilities,
    pom_from_kraus,
    two_level_kraus,
    two_level_pom,
)
from mmeq.qops import (
    DensityOperator,
    StateVector,
    bloch_from_density,
    density_from_bloch,
    density_from_state,
    fidelity,
)
from tests.helpers import matmul2, random_density, random_state

P_VALUES = [0.0, 0.1, 0.16, 0.36, 0.49, 0.5]
p_strategy = st.floats(0, 0.5, allow_nan=False)


def random_kraus(rng, dim, n_effects):
    """A complete Kraus set from a random isometry (columns of a unitary)."""
    g = rng.normal(size=(dim * n_effects, dim)) + 1j * rng.normal(size=(dim * n_effects, dim))
    q, _ = np.linalg.qr(g)
    return KrausSet.from_effects([q[i * dim:(i + 1) * dim] for i in range(n_effects)])


class TestKrausSet:
    def test_incomplete_rejected(self):
        with pytest.raises(CompletenessError):
            KrausSet.from_effects([np.diag([1, 0])])

    def test_mixed_dimensions_rejected(self):
        with pytest.raises(DimensionError):
            KrausSet.from_effects([np.eye(2), np.eye(3)])

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            KrausSet(())

    def test_two_level_values(self):
        k = two_level_kraus(0.36)
        np.testing.assert_allclose(k.effects()[0], np.diag([0.8, 0.6]), atol=1e-15)
        np.testing.assert_allclose(k.effects()[1], np.diag([0.6, 0.8]), atol=1e-15)

    def test_two_level_perfect_is_projectors(self):
        a1, a2 = two_level_kraus(0).effects()
        np.testing.assert_array_equal(a1, np.diag([1, 0]))
        np.testing.assert_array_equal(a2, np.diag([0, 1]))

    @pytest.mark.parametrize("p", P_VALUES)
    def test_effects_product_is_scaled_identity(self, p):
        a1, a2 = (e.tolist() for e in two_level_kraus(p).effects())
        expected = np.sqrt(p * (1 - p)) * np.eye(2)
        np.testing.assert_allclose(matmul2(a1, a2), expected, atol=1e-15)
        np.testing.assert_allclose(matmul2(a2, a1), expected, atol=1e-15)

    @pytest.mark.parametrize("p", [-0.1, 0.51, 1.0])
    def test_out_of_range(self, p):
        with pytest.raises(ValueError):
            two_level_kraus(p)
        with pytest.raises(ValueError):
            two_level_pom(p)


class TestPOM:
    def test_two_level_values(self):
        pom = two_level_pom(0.16)
        np.testing.assert_allclose(pom.elements[0], np.diag([0.84, 0.16]), atol=1e-15)

    def test_endpoints(self):
        np.testing.assert_array_equal(two_level_pom(0).elements[0], np.diag([1, 0]))
        np.testing.assert_array_equal(two_level_pom(0).elements[1], np.diag([0, 1]))
        for e in two_level_pom(0.5).elements:
            np.testing.assert_allclose(e, np.eye(2) / 2)

    @pytest.mark.parametrize("p", P_VALUES)
    def test_from_kraus_matches_pom(self, p):
        a = pom_from_kraus(two_level_kraus(p)).elements
        b = two_level_pom(p).elements
        for x, y in zip(a, b):
            np.testing.assert_allclose(x, y, atol=1e-12)

    def test_projectors_unchanged(self):
        projs = [np.diag([1, 0]), np.diag([0, 1])]
        out = pom_from_kraus(KrausSet.from_effects(projs)).elements
        for x, y in zip(out, projs):
            np.testing.assert_allclose(x, y, atol=0)

    def test_identity_single_outcome(self):
        out = pom_from_kraus(KrausSet.from_effects([np.eye(3)])).elements
        assert len(out) == 1
        np.testing.assert_allclose(out[0], np.eye(3))

    def test_grouped_outcomes_sum_effects(self, rng):
        k = random_kraus(rng, 2, 3)
        grouped = KrausSet(((k.effects()[0], k.effects()[1]), (k.effects()[2],)))
        pom = pom_from_kraus(grouped)
        a = k.effects()
        np.testing.assert_allclose(pom.elements[0], a[0].conj().T @ a[0] + a[1].conj().T @ a[1], atol=1e-12)

    def test_rejects_non_positive(self):
        with pytest.raises(ValueError):
            POM((np.diag([1.5, 0]), np.diag([-0.5, 1])))

    def test_rejects_incomplete(self):
        with pytest.raises(CompletenessError):
            POM((np.diag([0.5, 0]), np.diag([0, 0.5])))


class TestProbabilities:
    def test_uninformative_measurement(self, rng):
        for _ in range(20):
            probs = outcome_probabilities(two_level_kraus(0.5), DensityOperator(random_density(rng)))
            assert [o.probability for o in probs] == pytest.approx([0.5, 0.5], abs=1e-15)

    def test_projective_on_upper_level(self):
        probs = outcome_probabilities(two_level_kraus(0), density_from_state(StateVector([0, 1])))
        assert [o.index for o in probs] == [1, 2]
        assert [o.probability for o in probs] == [0, 1]

    @pytest.mark.parametrize("eps,p", [(0.05, 0.16), (0.1, 0.01), (0.01, 0.001)])
    def test_rare_outcome_probability(self, eps, p):
        s = StateVector([eps, np.sqrt(1 - eps**2)])
        p1 = outcome_probabilities(two_level_kraus(p), density_from_state(s))[0].probability
        assert p1 == pytest.approx((1 - p) * eps**2 + p * (1 - eps**2), abs=1e-15)

    def test_rare_outcome_small_limit(self):
        eps, p = 1e-3, 1e-4
        s = StateVector([eps, np.sqrt(1 - eps**2)])
        p1 = outcome_probabilities(two_level_kraus(p), density_from_state(s))[0].probability
        assert p1 == pytest.approx(eps**2 + p, rel=1e-3)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            outcome_probabilities(two_level_kraus(0.1), DensityOperator(np.eye(3) / 3))


class TestCollapse:
    def test_projective_collapse(self):
        eps = 0.2
        s = StateVector([eps, np.sqrt(1 - eps**2)])
        np.testing.assert_array_equal(collapse(two_level_kraus(0), s, 2).amplitudes, [0, 1])

    def test_general_formula(self, rng):
        for p in (0.1, 0.36):
            alpha, beta = random_state(rng)
            out = collapse(two_level_kraus(p), StateVector([alpha, beta]), 1).amplitudes
            num = np.array([np.sqrt(1 - p) * alpha, np.sqrt(p) * beta])
            expected = num / np.sqrt((1 - p) * abs(alpha) ** 2 + p * abs(beta) ** 2)
            np.testing.assert_allclose(out, expected, atol=1e-14)

    def test_opposite_outcomes_restore_state(self, rng):
        for _ in range(200):
            p = rng.uniform(1e-6, 0.5)
            s = StateVector(random_state(rng))
            k = two_level_kraus(p)
            back = collapse(k, collapse(k, s, 1), 2)
            assert fidelity(s, back) == pytest.approx(1, abs=1e-12)

    def test_impossible_outcome(self):
        with pytest.raises(ImpossibleOutcomeError):
            collapse(two_level_kraus(0), StateVector([0, 1]), 1)
        with pytest.raises(ImpossibleOutcomeError):
            collapse_density(two_level_kraus(0), density_from_state(StateVector([0, 1])), 1)

    def test_multi_effect_group_unsupported(self, rng):
        k = random_kraus(rng, 2, 2)
        grouped = KrausSet((tuple(k.effects()),))
        with pytest.raises(UnsupportedError):
            collapse(grouped, StateVector([1, 0]), 1)

    def test_bad_index(self):
        with pytest.raises(ValueError):
            collapse(two_level_kraus(0.1), StateVector([1, 0]), 3)

    def test_density_collapse_matches_pure(self, rng):
        k = two_level_kraus(0.2)
        s = StateVector(random_state(rng))
        for i in (1, 2):
            np.testing.assert_allclose(
                collapse_density(k, density_from_state(s), i).matrix,
                density_from_state(collapse(k, s, i)).matrix,
                atol=1e-14,
            )


class TestChannel:
    @pytest.mark.parametrize("p", P_VALUES)
    def test_dipole_shrink(self, p, rng):
        factor = 2 * np.sqrt(p * (1 - p))
        for _ in range(50):
            rho = DensityOperator(random_density(rng))
            u, v, w = bloch_from_density(rho)
            out = bloch_from_density(apply_channel(two_level_kraus(p), rho)).as_array()
            np.testing.assert_allclose(out, [factor * u, factor * v, w], atol=1e-12)

    def test_uninformative_leaves_state(self, rng):
        rho = DensityOperator(random_density(rng))
        np.testing.assert_allclose(apply_channel(two_level_kraus(0.5), rho).matrix, rho.matrix, atol=1e-15)

    def test_projective_dephases(self):
        rho = density_from_bloch((0.3, -0.4, 0.5))
        np.testing.assert_allclose(
            bloch_from_density(apply_channel(two_level_kraus(0), rho)).as_array(), [0, 0, 0.5], atol=1e-15
        )

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            apply_channel(two_level_kraus(0.1), DensityOperator(np.eye(3) / 3))


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_random_sets_fuzz(dim, n_effects, seed):
    rng = np.random.default_rng(seed)
    k = random_kraus(rng, dim, n_effects)
    POM(pom_from_kraus(k).elements)
    rho = DensityOperator(random_density(rng, dim))
    total = sum(o.probability for o in outcome_probabilities(k, rho))
    assert total == pytest.approx(1, abs=1e-10)
    out = apply_channel(k, rho).matrix
    assert np.max(np.abs(out - out.conj().T)) <= 1e-12
    assert abs(np.trace(out) - 1) <= 1e-12
    assert np.linalg.eigvalsh(out).min() >= -1e-10
    s = StateVector(random_state(rng, dim))
    for o in outcome_probabilities(k, density_from_state(s)):
        if o.probability > 1e-12:
            assert abs(np.linalg.norm(collapse(k, s, o.index).amplitudes) - 1) <= 1e-12


@settings(max_examples=200, deadline=None)
@given(p_strategy, st.integers(0, 2**32 - 1))
def test_two_level_probabilities_sum(p, seed):
    rho = DensityOperator(random_density(np.random.default_rng(seed)))
    probs = outcome_probabilities(two_level_kraus(p), rho)
    assert sum(o.probability for o in probs) == pytest.approx(1, abs=1e-10)
