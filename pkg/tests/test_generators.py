import numpy as np
import pytest
from numpy.testing import assert_allclose

from choiforge.choi.choi_matrix import (
    ChoiMatrix,
    apply_kraus,
    apply_map,
    choi_from_kraus,
    compose_choi,
    identity_choi,
)
from choiforge.core.tensor_core import (
    HermitianOperator,
    max_ent_vector,
    random_density,
    random_hermitian,
)
from choiforge.exceptions import DimensionError, InputError
from choiforge.generators.decomposable import (
    NON_CP_MARGIN,
    DecomposableSpec,
    DilationParams,
    _dilation_gradient,
    decomposable_choi,
    dilation_channel,
    kraus_from_dilation,
    train_non_cp_decomposable,
)
from choiforge.generators.ppt_square import (
    PptMapSpec,
    _composition_gradients,
    ppt_choi,
    ppt_penalty,
    ppt_penalty_with_gradient,
    ppt_square_run,
)
from choiforge.optimizer.losses import LossConfig
from choiforge.optimizer.records import RunOutcome
from choiforge.optimizer.train import TrainConfig


class TestDilation:
    def test_kraus_completeness(self, rng):
        params = DilationParams.random(3, 2, rng, scale=0.5)
        kraus = kraus_from_dilation(params, 3)
        assert len(kraus) == 2
        completeness = sum(k.conj().T @ k for k in kraus)
        assert_allclose(completeness, np.eye(3), atol=1e-12)

    def test_channel_matches_kraus_and_choi(self, rng):
        params = DilationParams.random(2, 3, rng, scale=0.5)
        kraus = kraus_from_dilation(params, 2)
        rho = random_density(2, rng)
        expected = dilation_channel(params, rho)
        assert_allclose(apply_kraus(kraus, rho), expected, atol=1e-12)
        assert_allclose(apply_map(choi_from_kraus(kraus), rho), expected, atol=1e-12)

    def test_zero_generator_is_identity_channel(self):
        kraus = kraus_from_dilation(DilationParams.zeros(2, 2), 2)
        assert_allclose(choi_from_kraus(kraus).array, identity_choi(2).array, atol=1e-12)

    def test_shape_checks(self, rng):
        with pytest.raises(DimensionError):
            DilationParams(np.zeros((5, 5)), np.zeros((5, 5)), 2)
        with pytest.raises(DimensionError):
            kraus_from_dilation(DilationParams.random(2, 2, rng), 3)
        with pytest.raises(InputError):
            DilationParams(np.full((4, 4), np.inf), np.zeros((4, 4)), 2)

    def test_gradient_matches_finite_difference(self, rng):
        params = DilationParams.random(2, 2, rng, scale=0.3)
        g = random_hermitian(4, rng)

        def objective(a_re, a_im):
            kraus = kraus_from_dilation(DilationParams(a_re, a_im, 2), 2)
            return float(np.real(np.trace(g @ choi_from_kraus(kraus).array)))

        grad_re, grad_im = _dilation_gradient(params, g)
        h = 1e-6
        for idx in [(0, 1), (2, 3), (3, 3)]:
            step = np.zeros_like(params.a_re)
            step[idx] = h
            num_re = (objective(params.a_re + step, params.a_im) - objective(params.a_re - step, params.a_im)) / (2 * h)
            num_im = (objective(params.a_re, params.a_im + step) - objective(params.a_re, params.a_im - step)) / (2 * h)
            assert grad_re[idx] == pytest.approx(num_re, abs=1e-6)
            assert grad_im[idx] == pytest.approx(num_im, abs=1e-6)


class TestDecomposable:
    def test_mixing_weight_bounds(self, rng):
        d1 = DilationParams.random(2, 2, rng)
        d2 = DilationParams.random(2, 2, rng)
        assert DecomposableSpec.from_p(0.3, d1, d2).p == pytest.approx(0.3)
        with pytest.raises(InputError):
            DecomposableSpec.from_p(1.5, d1, d2)

    def test_choi_is_tp_and_mixes_transposition(self, rng):
        zero = DilationParams.zeros(2, 2)
        spec = DecomposableSpec.from_p(0.0, zero, zero)
        choi = decomposable_choi(spec)
        assert choi.tp
        rho = random_density(2, rng)
        assert_allclose(apply_map(choi, rho), rho.T, atol=1e-12)

    def test_decomposable_maps_have_non_negative_zeta1(self, rng, engine):
        spec = DecomposableSpec.from_p(
            0.4, DilationParams.random(2, 2, rng, 0.5), DilationParams.random(2, 2, rng, 0.5)
        )
        assert engine.zeta(decomposable_choi(spec), 1).value >= -1e-6

    def test_training_breaks_complete_positivity(self):
        spec, record = train_non_cp_decomposable(2, TrainConfig(seed=0, max_epochs=300, learning_rate=0.05))
        assert record.outcome is RunOutcome.SUCCESS
        assert record.final_choi.min_eigenvalue() < 0
        assert record.metadata["ancilla_dim"] == 2
        assert 0.0 <= spec.p <= 1.0

    def test_final_choi_is_the_last_evaluated_map(self):
        spec, record = train_non_cp_decomposable(2, TrainConfig(seed=3, max_epochs=3, learning_rate=0.2))
        assert np.array_equal(record.final_choi.array, decomposable_choi(spec).array)
        assert record.final_choi.min_eigenvalue() == pytest.approx(record.metadata["lambda_min"], abs=1e-12)
        assert record.rows[-1].loss == pytest.approx(max(record.metadata["lambda_min"] + NON_CP_MARGIN, 0.0))
        assert record.metadata["p"] == pytest.approx(spec.p)

    def test_success_needs_lambda_min_below_the_margin(self):
        spec, record = train_non_cp_decomposable(2, TrainConfig(seed=0, max_epochs=300, learning_rate=0.05))
        assert record.succeeded
        assert record.metadata["non_cp_margin"] == NON_CP_MARGIN
        assert record.final_choi.min_eigenvalue() < -NON_CP_MARGIN
        assert record.rows[-1].loss == 0.0
        for dilation in (spec.dilation1, spec.dilation2):
            kraus = kraus_from_dilation(dilation, 2)
            assert_allclose(sum(k.conj().T @ k for k in kraus), np.eye(2), atol=1e-10)


class TestPptSquare:
    def test_penalty_of_maximally_entangled_column(self):
        spec = PptMapSpec.from_factor(max_ent_vector(2), 2, 2)
        assert ppt_penalty(spec) == pytest.approx(1.0)

    def test_penalty_vanishes_on_ppt_maps(self):
        spec = PptMapSpec.from_factor(np.eye(4) / 2, 2, 2)
        assert ppt_penalty(spec) == 0.0
        assert ppt_choi(spec).min_eigenvalue() >= 0

    def test_penalty_gradient_matches_finite_difference(self, rng):
        # columns near the maximally entangled vector keep one eigenvalue of C^T_B well below zero
        noise = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        spec = PptMapSpec.from_factor(max_ent_vector(2)[:, None] + 0.1 * noise, 2, 2)
        value, grad = ppt_penalty_with_gradient(spec)
        assert value > 0
        direction = random_hermitian(4, rng)
        h = 1e-7

        def penalty_at(c):
            pt = c.reshape(2, 2, 2, 2).transpose(0, 3, 2, 1).reshape(4, 4)
            eigs = np.linalg.eigvalsh(pt)
            return float(-eigs[eigs < 0].sum())

        c = ppt_choi(spec).array
        numeric = (penalty_at(c + h * direction) - penalty_at(c - h * direction)) / (2 * h)
        assert float(np.real(np.trace(grad @ direction))) == pytest.approx(numeric, abs=1e-5)

    def test_factor_shape_checked(self):
        with pytest.raises(DimensionError):
            PptMapSpec(np.zeros((3, 2)), np.zeros((3, 2)), 2, 2)

    def test_composition_gradients_split(self, rng):
        outer = ChoiMatrix(4, 2, HermitianOperator(random_hermitian(8, rng)))
        inner = ChoiMatrix(2, 4, HermitianOperator(random_hermitian(8, rng)))
        g = random_hermitian(4, rng)
        g_outer, g_inner = _composition_gradients(outer, inner, g)
        d_outer = random_hermitian(8, rng)
        h = 1e-6

        def objective(o, i):
            return float(np.real(np.trace(g @ compose_choi(o, i).array)))

        shifted = [
            ChoiMatrix(4, 2, HermitianOperator(outer.array + s * h * d_outer)) for s in (1, -1)
        ]
        numeric = (objective(shifted[0], inner) - objective(shifted[1], inner)) / (2 * h)
        assert float(np.real(np.trace(g_outer @ d_outer))) == pytest.approx(numeric, abs=1e-6)
        assert g_inner.shape == (8, 8)

    def test_short_run_records_final_certificates(self):
        record = ppt_square_run(TrainConfig(seed=1, max_epochs=2), LossConfig(), small_dim=2, large_dim=4)
        assert record.outcome is RunOutcome.EXHAUSTED
        assert record.epochs == 2
        assert {"final_zeta1", "final_zetak_t1", "final_ppt_penalty", "violation"} <= set(record.metadata)
        assert record.metadata["penalty_weight"] == 10.0

    def test_final_choi_matches_its_recorded_certificate(self, engine):
        record = ppt_square_run(TrainConfig(seed=3, max_epochs=2, learning_rate=0.2), LossConfig())
        final = record.final_choi
        assert (final.d_in, final.d_out) == (4, 4)
        assert engine.zeta(final, 1).value == pytest.approx(record.metadata["final_zeta1"], abs=1e-6)
