"""Exact reference solutions for tiny instances.

Every active set S is tried: the dual function is maximised over lambda_S >= 0 (other multipliers
fixed at zero) by projected Newton with backtracking, where x(lambda) is the Lagrangian minimiser.
A candidate is kept only if its KKT residual passes verification; the lowest objective wins.
"""
from dataclasses import dataclass
from itertools import combinations
import logging
from typing import Optional, Sequence, Union

import numpy as np
from scipy.linalg import LinAlgError

from proxframework.core.operator import kkt_residual
from proxframework.model import InvalidParameterException, PrimalDualPoint
from proxframework.qcqp.instance import LinearInstance, QcqpInstance
from proxframework.qcqp.problem import problem_for

logger = logging.getLogger(__name__)

MAX_M = 3
MAX_N = 6
VERIFY_TOL = 1e-8


@dataclass
class OracleException(Exception):
    message: str

    def __str__(self):
        return f'Oracle Exception: {self.message}'


def _dual_value(inst, lam: np.ndarray) -> float:
    x = inst.stationary_point(lam)
    return inst.objective(x) + lam @ inst.constraints(x)


def _maximise_dual(inst, active: Sequence[int], max_iters: int = 100) -> np.ndarray:
    lam = np.zeros(inst.m)
    if not active:
        return lam
    active = np.asarray(active)

    for _ in range(max_iters):
        x = inst.stationary_point(lam)
        gradient = inst.constraints(x)[active]
        lam_s = lam[active]

        if np.max(np.abs(lam_s - np.maximum(lam_s + gradient, 0.0))) <= 1e-14 * (1.0 + np.max(lam_s)):
            break

        free = (lam_s > 0) | (gradient > 0)
        if not np.any(free):
            break

        J = inst.jacobian(x)[active][free]
        curvature = J @ np.linalg.solve(inst.lagrangian_hessian(lam), J.T)
        try:
            direction_free = np.linalg.solve(curvature, gradient[free])
        except np.linalg.LinAlgError:
            direction_free = np.linalg.lstsq(curvature, gradient[free], rcond=None)[0]
        direction = np.zeros(len(active))
        direction[free] = direction_free

        current = _dual_value(inst, lam)
        step = 1.0
        while step > 1e-12:
            trial = lam.copy()
            trial[active] = np.maximum(lam_s + step * direction, 0.0)
            if _dual_value(inst, trial) >= current + 1e-4 * gradient @ (trial[active] - lam_s):
                lam = trial
                break
            step *= 0.5
        else:
            break

    return lam


def oracle_solve(inst: Union[QcqpInstance, LinearInstance], tol: float = VERIFY_TOL) -> PrimalDualPoint:
    if inst.m > MAX_M or inst.n > MAX_N:
        raise InvalidParameterException(name='(m, n)', value=(inst.m, inst.n),
                                        requirement=f'm <= {MAX_M} and n <= {MAX_N}')

    problem = problem_for(inst)
    best: Optional[PrimalDualPoint] = None
    best_f = np.inf

    for size in range(inst.m + 1):
        for active in combinations(range(inst.m), size):
            try:
                lam = _maximise_dual(inst, list(active))
                candidate = PrimalDualPoint(x=inst.stationary_point(lam), lam=lam)
            except (LinAlgError, np.linalg.LinAlgError) as e:
                logger.debug(f'active set {active} failed: {e}')
                continue

            residual = kkt_residual(problem, candidate)
            if residual > tol:
                logger.debug(f'active set {active} rejected, kkt {residual:.2e}')
                continue

            f = inst.objective(candidate.x)
            if f < best_f:
                best, best_f = candidate, f

    if best is None:
        raise OracleException(f'no active set of {inst} passed kkt verification at {tol:.0e}')

    logger.debug(f'oracle {inst} f* = {best_f:.12e}')
    return best
