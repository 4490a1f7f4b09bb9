import numpy as np
from numpy.testing import assert_allclose, assert_array_equal
import pytest
from scipy.linalg import eigvalsh

from proxframework.core.operator import jacobian_error, kkt_residual, prox_residual
from proxframework.model import DualCone, InvalidParameterException, PrimalDualPoint, SubproblemException
from proxframework.qcqp.instance import QcqpInstance, generate_instance, generate_linear_instance
from proxframework.qcqp.oracle import oracle_solve
from proxframework.qcqp.problem import (closed_form_lambda_pc, closed_form_lambda_ppa, closed_form_x_update,
                                        linear_problem, qcqp_problem)
from proxframework.solver.pc import predict
from proxframework.solver.ppa import ppa_dual_step, ppa_primal_step


def random_state(inst, rng):
    return (rng.standard_normal(inst.n), rng.standard_normal(inst.n), rng.random(inst.m) * 2,
            rng.uniform(0.1, 5.0), rng.uniform(0.1, 5.0))


def test_generation_deterministic():
    first, second = generate_instance(m=3, n=4, seed=17), generate_instance(m=3, n=4, seed=17)
    for name in ('A', 'a', 'B_list', 'b_list', 'c'):
        assert_array_equal(getattr(first, name), getattr(second, name))


def test_generation_ranges():
    inst = generate_instance(m=30, n=5, seed=3)
    assert np.all((inst.c >= 10) & (inst.c < 20))
    assert np.all((inst.A >= 0) & (inst.A < 1))
    assert np.all((inst.B_list >= 0) & (inst.B_list < 1))


def test_generation_unconstrained():
    inst = generate_instance(m=0, n=4, seed=1)
    p = qcqp_problem(inst)
    assert p.m == 0
    assert p.constraints(np.zeros(4)).shape == (0,)
    assert p.jacobian(np.zeros(4)).shape == (0, 4)


@pytest.mark.parametrize('m, n', [(-1, 3), (2, 0)])
def test_generation_rejects_bad_dims(m, n):
    with pytest.raises(InvalidParameterException):
        generate_instance(m=m, n=n, seed=0)


def test_constraints_at_origin():
    inst = generate_instance(m=3, n=4, seed=2)
    expected = np.array([b @ b for b in inst.b_list]) - inst.c
    assert_allclose(qcqp_problem(inst).constraints(np.zeros(4)), expected)


def test_jacobian_matches_finite_differences():
    inst = generate_instance(m=3, n=5, seed=8)
    x = np.random.default_rng(0).standard_normal(5)
    assert jacobian_error(qcqp_problem(inst), x) <= 1e-5


def test_objective_at_least_squares():
    inst = generate_instance(m=2, n=4, seed=5)
    x = np.linalg.solve(inst.ata, inst.atb)
    assert qcqp_problem(inst).objective(x) == pytest.approx(np.sum((inst.A @ x - inst.a) ** 2), abs=1e-12)
    assert qcqp_problem(inst).objective(x) == pytest.approx(0.0, abs=1e-10)


def test_x_update_prox_dominance():
    inst = generate_instance(m=2, n=3, seed=4)
    anchor = np.array([1.0, -2.0, 0.5])
    assert_allclose(closed_form_x_update(inst, np.zeros(2), anchor, 1e8), anchor, atol=1e-6)


def test_x_update_normal_equations():
    inst = generate_instance(m=2, n=3, seed=4)
    x = closed_form_x_update(inst, np.zeros(2), np.zeros(3), 0.0)
    assert_allclose(x, np.linalg.lstsq(inst.A, inst.a, rcond=None)[0], rtol=1e-6)


def test_x_update_linear_system_residual():
    rng = np.random.default_rng(10)
    inst = generate_instance(m=3, n=6, seed=10)
    for _ in range(10):
        lam, anchor, r = rng.random(3), rng.standard_normal(6), rng.uniform(0.1, 3.0)
        system = 2 * inst.A.T @ inst.A + r * np.eye(6)
        rhs = 2 * inst.A.T @ inst.a + r * anchor
        for i in range(3):
            system += 2 * lam[i] * inst.B_list[i].T @ inst.B_list[i]
            rhs += 2 * lam[i] * inst.B_list[i].T @ inst.b_list[i]
        x = closed_form_x_update(inst, lam, anchor, r)
        assert np.linalg.norm(system @ x - rhs) <= 1e-10 * np.linalg.norm(rhs)


def test_x_update_system_eigenvalues_bounded_by_r():
    inst = generate_instance(m=2, n=4, seed=3)
    lam, r = np.array([0.3, 1.7]), 0.8
    system = inst.lagrangian_hessian(lam) + r * np.eye(4)
    assert eigvalsh(system)[0] >= r - 1e-12


def test_x_update_indefinite_names_multipliers():
    inst = generate_instance(m=2, n=3, seed=0)
    with pytest.raises(SubproblemException) as info:
        closed_form_x_update(inst, np.array([0.5, -1e6]), np.zeros(3), 0.1)
    assert info.value.multipliers == [1]


def test_lambda_closed_forms_agree_without_step():
    inst = generate_instance(m=3, n=4, seed=12)
    rng = np.random.default_rng(1)
    x, lam = rng.standard_normal(4), rng.random(3)
    assert_allclose(closed_form_lambda_ppa(inst, x, x, lam, 2.0), closed_form_lambda_pc(inst, x, lam, 2.0))


def test_lambda_projection_to_zero():
    inst = generate_instance(m=3, n=4, seed=12)
    x = np.zeros(4)
    # phi(0) = |b_i|^2 - c_i < 0 for n = 4
    assert_array_equal(closed_form_lambda_pc(inst, x, np.zeros(3), 0.5), np.zeros(3))


def test_lambda_compatibility_cone():
    inst = generate_instance(m=2, n=3, seed=12)
    lam = closed_form_lambda_pc(inst, np.zeros(3), -np.ones(2), 1.0, cone=DualCone.NONPOSITIVE)
    assert np.all(lam <= 0)


def test_closed_form_matches_generic_path():
    rng = np.random.default_rng(21)
    for seed in range(10):
        inst = generate_instance(m=3, n=5, seed=seed)
        p = qcqp_problem(inst)
        for _ in range(10):
            x_k, _, lam_k, r, s = random_state(inst, rng)
            w_k = PrimalDualPoint(x=x_k, lam=lam_k)

            x_tilde = ppa_primal_step(p, w_k, r)
            assert_allclose(x_tilde, closed_form_x_update(inst, lam_k, x_k, r))
            assert prox_residual(p, lam_k, x_k, r, x_tilde) <= 1e-8

            assert_allclose(ppa_dual_step(p, w_k, x_tilde, s),
                            closed_form_lambda_ppa(inst, x_tilde, x_k, lam_k, s), rtol=1e-12, atol=1e-12)

            w_tilde, _, _ = predict(p, w_k, 9.0, 1.2, fixed_rs=(r, s))
            assert_allclose(w_tilde.lam, closed_form_lambda_pc(inst, x_tilde, lam_k, s), rtol=1e-12, atol=1e-12)


def test_ppa_lambda_by_hand():
    inst = generate_instance(m=2, n=3, seed=31)
    rng = np.random.default_rng(2)
    x_tilde, x_k, lam_k, s = rng.standard_normal(3), rng.standard_normal(3), rng.random(2), 1.7

    for i in range(2):
        residual = inst.B_list[i] @ x_tilde - inst.b_list[i]
        hat = lam_k[i] + (residual @ residual - inst.c[i] + 2 * residual @ inst.B_list[i] @ (x_tilde - x_k)) / s
        assert closed_form_lambda_ppa(inst, x_tilde, x_k, lam_k, s)[i] == pytest.approx(max(hat, 0.0), abs=1e-12)


def test_oracle_unconstrained_optimum(interior_circle):
    w = oracle_solve(interior_circle)
    assert_allclose(w.x, [0.1, 0.1], atol=1e-12)
    assert_array_equal(w.lam, [0.0])


def test_oracle_hand_solved():
    inst = QcqpInstance(A=[[1.0]], a=[2.0], B_list=[[[1.0]]], b_list=[[0.0]], c=[1.0])
    w = oracle_solve(inst)
    assert w.x[0] == pytest.approx(1.0, abs=1e-9)
    assert w.lam[0] == pytest.approx(1.0, abs=1e-9)


def test_oracle_circle(circle):
    w = oracle_solve(circle)
    assert_allclose(w.x, np.array([3.0, 1.0]) / np.sqrt(10), atol=1e-9)
    assert w.lam[0] == pytest.approx(np.sqrt(10) - 1, abs=1e-9)


def test_oracle_self_consistent(tiny_instances):
    for inst in tiny_instances:
        w = oracle_solve(inst)
        assert kkt_residual(qcqp_problem(inst), w) <= 1e-8


def test_oracle_linear_instance():
    inst = generate_linear_instance(m=3, n=5, seed=2)
    w = oracle_solve(inst)
    assert kkt_residual(linear_problem(inst), w) <= 1e-8


def test_oracle_dimension_limit():
    with pytest.raises(InvalidParameterException):
        oracle_solve(generate_instance(m=4, n=3, seed=0))

