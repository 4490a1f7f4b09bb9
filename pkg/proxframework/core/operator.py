from dataclasses import dataclass
import logging
from typing import Optional, Tuple

import numpy as np

from proxframework.model import (DualCone, InvalidInputException, IterationTrace, PrimalDualPoint,
                                 ProblemSpec)

logger = logging.getLogger(__name__)


@dataclass
class KktResidual:
    value: float
    stationarity: Optional[float]
    complementarity: float
    primal_infeasibility: float
    dual_infeasibility: float

    @property
    def stationarity_available(self) -> bool:
        return self.stationarity is not None

    def __float__(self):
        return self.value

    def __str__(self):
        stationarity = f'{self.stationarity:.3e}' if self.stationarity_available else 'n/a'
        return f'kkt {self.value:.3e} (stationarity {stationarity}, complementarity {self.complementarity:.3e}, ' \
               f'primal {self.primal_infeasibility:.3e}, dual {self.dual_infeasibility:.3e})'


def lagrangian_value(p: ProblemSpec, w: PrimalDualPoint) -> float:
    p.check_point(w)
    return float(p.objective(w.x) + w.lam @ p.constraints(w.x))


def monotone_operator(p: ProblemSpec, w: PrimalDualPoint) -> np.ndarray:
    """Stacked [D phi(x)^T lambda; -phi(x)]."""
    p.check_point(w)
    J = p.jacobian(w.x)
    return np.concatenate([J.T @ w.lam, -p.constraints(w.x)])


def kkt_report(p: ProblemSpec, w: PrimalDualPoint, cone: DualCone = DualCone.NONNEGATIVE) -> KktResidual:
    p.check_point(w)
    phi = p.constraints(w.x)

    stationarity = None
    if p.gradient is not None:
        step = p.gradient(w.x) + p.jacobian(w.x).T @ w.lam
        stationarity = float(np.max(np.abs(w.x - p.project_x(w.x - step)), initial=0.0))

    complementarity = float(np.max(np.abs(w.lam * phi), initial=0.0))
    primal = float(np.max(np.maximum(phi, 0.0), initial=0.0))
    dual = float(np.max(np.abs(w.lam - cone.project(w.lam)), initial=0.0))

    value = max(complementarity, primal, dual)
    if stationarity is not None:
        value = max(value, stationarity)

    return KktResidual(value=value,
                       stationarity=stationarity,
                       complementarity=complementarity,
                       primal_infeasibility=primal,
                       dual_infeasibility=dual)


def kkt_residual(p: ProblemSpec, w: PrimalDualPoint, cone: DualCone = DualCone.NONNEGATIVE) -> float:
    report = kkt_report(p, w, cone=cone)
    if not report.stationarity_available:
        logger.debug(f'{p.name} has no gradient, kkt residual excludes stationarity')
    return report.value


def ergodic_average(trace: IterationTrace, t: int = None) -> PrimalDualPoint:
    """Mean of the predictors w~^0 .. w~^t, the whole run when t is None."""
    if trace.predictor_count == 0:
        raise InvalidInputException('ergodic average needs at least one predictor')

    if t is None or t == trace.predictor_count - 1:
        return PrimalDualPoint.from_stacked(trace.w_tilde_sum / trace.predictor_count, trace.n)

    if not 0 <= t < trace.predictor_count:
        raise InvalidInputException(f't = {t} outside recorded predictors 0..{trace.predictor_count - 1}')

    predictors = [i.w_tilde for i in trace.records[:t + 1]]
    if any(i is None for i in predictors):
        raise InvalidInputException('partial ergodic averages need a trace recorded with diagnostics')

    total = np.sum([i.stacked() for i in predictors], axis=0)
    return PrimalDualPoint.from_stacked(total / (t + 1), trace.n)


def prox_residual(p: ProblemSpec, lam: np.ndarray, x_anchor: np.ndarray, r: float, x_tilde: np.ndarray) -> float:
    """Projected gradient residual of the prox subproblem at x_tilde."""
    if p.gradient is None:
        raise InvalidInputException(f'{p.name} has no gradient, prox residual unavailable')
    step = p.gradient(x_tilde) + p.jacobian(x_tilde).T @ lam + r * (x_tilde - x_anchor)
    return float(np.max(np.abs(x_tilde - p.project_x(x_tilde - step)), initial=0.0))


def prox_vi_violation(p: ProblemSpec,
                      lam: np.ndarray,
                      x_anchor: np.ndarray,
                      r: float,
                      samples: int = 100,
                      seed: int = 0,
                      radius: float = 1.0) -> float:
    """Smallest value of f(x) - f(x~) + (x - x~)^T [D phi(x~)^T lambda + r (x~ - x_anchor)] over sampled x."""
    x_tilde = p.prox_solver(lam, x_anchor, r)
    direction = p.jacobian(x_tilde).T @ lam + r * (x_tilde - x_anchor)
    f_tilde = p.objective(x_tilde)

    rng = np.random.default_rng(seed)
    worst = np.inf
    for _ in range(samples):
        x = p.project_x(x_tilde + radius * rng.standard_normal(p.n))
        worst = min(worst, p.objective(x) - f_tilde + (x - x_tilde) @ direction)
    return float(worst)


def jacobian_error(p: ProblemSpec, x: np.ndarray, h: float = 1e-6) -> float:
    """Relative deviation of the jacobian from central differences of the constraints."""
    x = np.asarray(x, dtype=float)
    J = p.jacobian(x)
    numeric = np.empty((p.m, p.n))
    for j in range(p.n):
        e = np.zeros(p.n)
        e[j] = h
        numeric[:, j] = (p.constraints(x + e) - p.constraints(x - e)) / (2 * h)

    if p.m == 0:
        return 0.0
    return float(np.max(np.abs(numeric - J)) / max(1.0, np.max(np.abs(J))))


def initial_point(p: ProblemSpec, cone: DualCone = DualCone.NONNEGATIVE) -> PrimalDualPoint:
    if p.unconstrained_minimizer is not None:
        x0 = p.unconstrained_minimizer()
    else:
        x0 = np.zeros(p.n)
    return PrimalDualPoint(x=x0, lam=cone.initial_multiplier(p.m))


def project_dual(w: PrimalDualPoint, cone: DualCone = DualCone.NONNEGATIVE) -> Tuple[PrimalDualPoint, bool]:
    """Project lambda onto the cone, reporting whether any component moved."""
    lam = cone.project(w.lam)
    clipped = bool(np.any(lam != w.lam))
    if not clipped:
        return w, False
    return PrimalDualPoint(x=w.x, lam=lam), True
