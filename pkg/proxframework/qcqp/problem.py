import logging
from functools import partial
from typing import Union

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from proxframework.model import DualCone, InvalidParameterException, ProblemSpec, SubproblemException
from proxframework.qcqp.instance import LinearInstance, QcqpInstance

logger = logging.getLogger(__name__)

CONDITION_WARNING = 1e12


def _solve_spd(system: np.ndarray, rhs: np.ndarray, lam: np.ndarray) -> np.ndarray:
    try:
        factor = cho_factor(system, lower=True, check_finite=False)
    except LinAlgError:
        offending = [int(i) for i in np.flatnonzero(lam < 0)]
        raise SubproblemException(message='x-update system is not positive definite', multipliers=offending)

    diagonal = np.abs(np.diag(factor[0]))
    condition = (diagonal.max() / diagonal.min()) ** 2
    if condition > CONDITION_WARNING:
        logger.warning(f'x-update system condition estimate {condition:.2e}')

    return cho_solve(factor, rhs, check_finite=False)


def closed_form_x_update(inst: QcqpInstance, lam: np.ndarray, x_anchor: np.ndarray, r: float) -> np.ndarray:
    """Solves (2A^T A + 2 sum lambda_i B_i^T B_i + r I) x = 2A^T a + 2 sum lambda_i B_i^T b_i + r x_anchor."""
    if r < 0:
        raise InvalidParameterException(name='r', value=r, requirement='r >= 0')
    lam = np.asarray(lam, dtype=float)

    system = inst.lagrangian_hessian(lam) + r * np.eye(inst.n)
    rhs = 2 * inst.atb + 2 * lam @ inst.btb_vec + r * np.asarray(x_anchor, dtype=float)
    return _solve_spd(system, rhs, lam)


def closed_form_linear_x_update(inst: LinearInstance, lam: np.ndarray, x_anchor: np.ndarray, r: float) -> np.ndarray:
    if r < 0:
        raise InvalidParameterException(name='r', value=r, requirement='r >= 0')
    lam = np.asarray(lam, dtype=float)

    system = 2 * inst.ata + r * np.eye(inst.n)
    rhs = 2 * inst.atb - inst.C.T @ lam + r * np.asarray(x_anchor, dtype=float)
    return _solve_spd(system, rhs, lam)


def closed_form_lambda_ppa(inst: QcqpInstance,
                           x_tilde: np.ndarray,
                           x_k: np.ndarray,
                           lambda_k: np.ndarray,
                           s: float,
                           cone: DualCone = DualCone.NONNEGATIVE) -> np.ndarray:
    if not s > 0:
        raise InvalidParameterException(name='s', value=s, requirement='s > 0')

    residuals = inst.residuals(x_tilde)
    phi = np.sum(residuals ** 2, axis=1) - inst.c
    step = inst.B_list @ (np.asarray(x_tilde) - np.asarray(x_k))
    linearisation = 2 * np.sum(residuals * step, axis=1)

    return cone.project(np.asarray(lambda_k, dtype=float) + (phi + linearisation) / s)


def closed_form_lambda_pc(inst: QcqpInstance,
                          x_tilde: np.ndarray,
                          lambda_k: np.ndarray,
                          s: float,
                          cone: DualCone = DualCone.NONNEGATIVE) -> np.ndarray:
    if not s > 0:
        raise InvalidParameterException(name='s', value=s, requirement='s > 0')

    phi = np.sum(inst.residuals(x_tilde) ** 2, axis=1) - inst.c
    return cone.project(np.asarray(lambda_k, dtype=float) + phi / s)


def qcqp_problem(inst: QcqpInstance) -> ProblemSpec:
    return ProblemSpec(n=inst.n,
                       m=inst.m,
                       objective=inst.objective,
                       constraints=inst.constraints,
                       jacobian=inst.jacobian,
                       prox_solver=partial(closed_form_x_update, inst),
                       gradient=inst.gradient,
                       unconstrained_minimizer=inst.least_squares,
                       name=str(inst))


def linear_problem(inst: LinearInstance) -> ProblemSpec:
    return ProblemSpec(n=inst.n,
                       m=inst.m,
                       objective=inst.objective,
                       constraints=inst.constraints,
                       jacobian=inst.jacobian,
                       prox_solver=partial(closed_form_linear_x_update, inst),
                       gradient=inst.gradient,
                       unconstrained_minimizer=inst.least_squares,
                       linear=True,
                       name=str(inst))


def problem_for(inst: Union[QcqpInstance, LinearInstance]) -> ProblemSpec:
    if isinstance(inst, LinearInstance):
        return linear_problem(inst)
    return qcqp_problem(inst)
