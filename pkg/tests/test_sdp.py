import numpy as np
import pytest

from choiforge.choi.choi_matrix import identity_choi
from choiforge.exceptions import CapacityError, InputError
from choiforge.monitoring.run_metrics import RunMetrics
from choiforge.sdp.certificates import (
    CertificateEngine,
    build_extension_problem,
    certify_non_decomposable,
    certify_positive_on_relaxation,
    resolve_extend_side,
    zeta1,
    zeta_k,
)
from choiforge.sdp.conic import CvxpySolver, ExtendSide, SolverOptions, build_conic_problem


def test_solver_options_validation():
    with pytest.raises(InputError):
        SolverOptions(cert_tol=0.0)
    assert SolverOptions(extend_side="first").extend_side is ExtendSide.FIRST
    assert SolverOptions().with_extend_side(ExtendSide.AUTO).extend_side is ExtendSide.AUTO


def test_solver_kwargs_for_clarabel():
    kwargs = SolverOptions(feasibility_tol=1e-9).solver_kwargs()
    assert kwargs["tol_feas"] == 1e-9
    assert kwargs["max_iter"] == 200


def test_problem_shape_and_capacity():
    problem = build_conic_problem(2, 2, 3)
    assert problem.variable_dim == 16
    assert problem.embedded_dim == 32
    assert problem.symmetry_constraint_sets == 2
    assert problem.ppt_cones == 3
    with pytest.raises(CapacityError):
        build_conic_problem(3, 3, 2, max_extension_dim=16)
    with pytest.raises(InputError):
        build_conic_problem(2, 2, 0)


def test_resolve_extend_side(swap_d2, choi_map):
    from choiforge.choi.choi_matrix import ChoiMatrix
    from choiforge.core.tensor_core import HermitianOperator

    wide = ChoiMatrix(2, 3, HermitianOperator(np.eye(6)))
    assert resolve_extend_side(wide, ExtendSide.AUTO) is ExtendSide.FIRST
    assert resolve_extend_side(swap_d2, ExtendSide.AUTO) is ExtendSide.SECOND
    assert resolve_extend_side(choi_map, ExtendSide.FIRST) is ExtendSide.FIRST


def test_zeta1_of_transposition_is_zero(swap_d2, engine):
    cert = zeta1(swap_d2, engine=engine)
    assert cert.ok
    assert cert.value == pytest.approx(0.0, abs=1e-6)
    assert cert.witness.trace() == pytest.approx(1.0, abs=1e-6)


def test_zeta1_of_identity_is_zero(engine):
    cert = zeta1(identity_choi(2), engine=engine)
    assert cert.value == pytest.approx(0.0, abs=1e-6)


def test_choi_map_is_certified_non_decomposable(choi_map, engine):
    certified, margin = certify_non_decomposable(choi_map, engine=engine)
    assert certified
    assert margin > 1e-3


def test_witness_is_a_ppt_state(choi_map, engine):
    cert = engine.zeta(choi_map, 1)
    w = cert.witness.matrix
    assert np.linalg.eigvalsh(w).min() > -1e-6
    pt = w.reshape(3, 3, 3, 3).transpose(0, 3, 2, 1).reshape(9, 9)
    assert np.linalg.eigvalsh((pt + pt.conj().T) / 2).min() > -1e-6
    assert float(np.real(np.trace(w @ choi_map.array))) == pytest.approx(cert.value, abs=1e-6)


def test_transposition_is_positive_on_relaxation(swap_d2, engine):
    positive, margin = certify_positive_on_relaxation(swap_d2, 2, engine=engine)
    assert positive
    assert margin == pytest.approx(0.0, abs=1e-6)


def test_zeta_k_needs_level_two(swap_d2):
    with pytest.raises(InputError):
        zeta_k(swap_d2, 1)


def test_hierarchy_is_monotone(choi_map, engine):
    z1 = engine.zeta(choi_map, 1).value
    z2 = engine.zeta(choi_map, 2).value
    assert z2 >= z1 - 1e-6


@pytest.mark.parametrize("side", [ExtendSide.FIRST, ExtendSide.SECOND])
def test_extension_sides_agree_on_symmetric_map(swap_d2, side):
    eng = CertificateEngine(SolverOptions(extend_side=side))
    cert = eng.zeta(swap_d2, 2)
    assert cert.extend_side is side
    assert cert.value == pytest.approx(0.0, abs=1e-6)


def test_extension_witness_satisfies_constraints(swap_d3):
    problem = build_extension_problem(swap_d3, 2)
    result = CvxpySolver().solve(problem)
    assert result.status.usable
    sigma, reduced = problem.witness()
    residuals = problem.residuals(sigma)
    assert max(residuals.values()) < 1e-6
    assert np.trace(reduced).real == pytest.approx(1.0, abs=1e-6)


def test_engine_reuses_compiled_problems_and_records_metrics(swap_d2):
    metrics = RunMetrics()
    eng = CertificateEngine(metrics=metrics)
    eng.zeta(swap_d2, 1)
    eng.zeta(swap_d2, 1)
    assert len(eng._problems) == 1
    solves = sum(
        metrics.sample("choiforge_sdp_solves_total", {"kind": "zeta1", "status": status})
        for status in ("optimal", "inaccurate")
    )
    assert solves == 2
    assert metrics.sample("choiforge_sdp_solve_duration_seconds_count", {"kind": "zeta1"}) == 2


def test_failed_solve_yields_nan_certificate(swap_d2):
    class FailingSolver:
        def solve(self, problem):
            from choiforge.sdp.conic import SolveResult, SolveStatus

            return SolveResult(SolveStatus.FAILED, float("nan"), 0.0, "diverged")

    cert = CertificateEngine(solver=FailingSolver()).zeta(swap_d2, 1)
    assert not cert.ok
    assert np.isnan(cert.value)
    assert cert.witness is None


def _random_choi(rng, d_in=2, d_out=2):
    from choiforge.choi.choi_matrix import ChoiMatrix
    from choiforge.core.tensor_core import HermitianOperator, random_hermitian

    return ChoiMatrix(d_in, d_out, HermitianOperator(random_hermitian(d_in * d_out, rng)))


def _shifted(choi, direction, t):
    from choiforge.choi.choi_matrix import ChoiMatrix

    return ChoiMatrix(choi.d_in, choi.d_out, choi.matrix + direction * t)


def test_zeta1_witness_is_a_supergradient(rng, engine):
    choi = _random_choi(rng)
    direction = _random_choi(rng).matrix
    cert = engine.zeta(choi, 1)
    slope = float(np.real(np.trace(cert.witness.matrix @ direction.matrix)))
    for t in (-0.5, -0.05, 0.05, 0.5):
        assert engine.zeta(_shifted(choi, direction, t), 1).value <= cert.value + t * slope + 1e-6


def test_zeta1_slope_matches_witness_for_generic_choi(rng, engine):
    choi = _random_choi(rng)
    direction = _random_choi(rng).matrix
    slope = float(np.real(np.trace(engine.zeta(choi, 1).witness.matrix @ direction.matrix)))
    h = 1e-3
    plus = engine.zeta(_shifted(choi, direction, h), 1).value
    minus = engine.zeta(_shifted(choi, direction, -h), 1).value
    assert (plus - minus) / (2 * h) == pytest.approx(slope, abs=5e-3)


@pytest.mark.parametrize("seed", range(10))
def test_certificate_orderings_on_random_choi(seed, engine):
    from choiforge.choi.choi_matrix import from_array
    from choiforge.core.tensor_core import random_unit_vector

    rng = np.random.default_rng(seed)
    choi = _random_choi(rng)
    z1 = engine.zeta(choi, 1).value
    z2 = engine.zeta(choi, 2).value

    assert z1 <= z2 + 1e-6
    assert z1 >= choi.min_eigenvalue() - 1e-6
    transposed = from_array(choi.partial_transpose_output(), 2, 2)
    assert engine.zeta(transposed, 1).value == pytest.approx(z1, abs=1e-6)
    assert engine.zeta(choi.scaled(2.5), 1).value == pytest.approx(2.5 * z1, abs=1e-5)

    for _ in range(5):
        product = np.kron(random_unit_vector(2, rng), random_unit_vector(2, rng))
        expectation = float(np.real(product.conj() @ choi.array @ product))
        assert z2 <= expectation + 1e-6
