from dataclasses import dataclass
import logging
import math
from time import perf_counter
from typing import Optional, Tuple

import numpy as np

from proxframework.core.matrix import build_sigma, sigma_norm, spectral_norm
from proxframework.core.operator import initial_point, kkt_residual, project_dual
from proxframework.model import (DualCone, InvalidInputException, InvalidParameterException, IterationRecord,
                                 IterationTrace, ParamMode, PositiveDefiniteException, PrimalDualPoint, ProblemSpec,
                                 ProxParams, ScheduleParams, SolverException, SubproblemException)

logger = logging.getLogger(__name__)

PARAM_FLOOR = 1e-6


@dataclass
class RelaxedPpaConfig:
    mu1: float = 9.0
    mu2: float = 1.2
    gamma: float = 1.0
    tau: float = 1e-10
    max_iters: int = 50000
    # first iterations are never stopped on, x^0 = argmin f with lambda^0 = 0 is a prox fixed point
    min_iters: int = 2
    param_mode: ParamMode = ParamMode.ADAPTIVE
    constant_rs: Optional[Tuple[float, float]] = None
    schedule: Optional[ScheduleParams] = None
    dual_cone: DualCone = DualCone.NONNEGATIVE
    reproject_dual: bool = True
    diagnostics: bool = False
    keep_iterates: bool = False
    log_every: int = 1000

    def __post_init__(self):
        if not self.mu1 > 1:
            raise InvalidParameterException(name='mu1', value=self.mu1, requirement='mu1 > 1')
        if not self.mu2 > 1:
            raise InvalidParameterException(name='mu2', value=self.mu2, requirement='mu2 > 1')
        if not self.tau > 0:
            raise InvalidParameterException(name='tau', value=self.tau, requirement='tau > 0')
        if self.max_iters < 1:
            raise InvalidParameterException(name='max_iters', value=self.max_iters, requirement='max_iters >= 1')
        self.check_gamma()

        if self.param_mode is ParamMode.CONSTANT:
            if self.constant_rs is None or min(self.constant_rs) <= 0:
                raise InvalidParameterException(name='constant_rs', value=self.constant_rs,
                                                requirement='constant mode needs r > 0 and s > 0')
        if self.param_mode is ParamMode.SCHEDULE and self.schedule is None:
            raise InvalidParameterException(name='schedule', value=None,
                                            requirement='schedule mode needs L, C1, C2, sigma and horizon')

    def check_gamma(self):
        if not 0 < self.gamma < 2:
            raise InvalidParameterException(name='gamma', value=self.gamma, requirement='0 < gamma < 2')


def update_r(x_k: np.ndarray, p: ProblemSpec, mu1: float) -> float:
    if not mu1 > 1:
        raise InvalidParameterException(name='mu1', value=mu1, requirement='mu1 > 1')
    return max(spectral_norm(p.jacobian(x_k)) / mu1, PARAM_FLOOR)


def update_s(r_k: float, x_tilde: np.ndarray, p: ProblemSpec, mu2: float) -> float:
    if not r_k > 0:
        raise InvalidParameterException(name='r_k', value=r_k, requirement='r_k > 0')
    if not mu2 > 1:
        raise InvalidParameterException(name='mu2', value=mu2, requirement='mu2 > 1')
    return max(mu2 * spectral_norm(p.jacobian(x_tilde)) ** 2 / r_k, PARAM_FLOOR)


def ppa_primal_step(p: ProblemSpec, w_k: PrimalDualPoint, r_k: float) -> np.ndarray:
    if not r_k > 0:
        raise InvalidParameterException(name='r_k', value=r_k, requirement='r_k > 0')
    return p.prox_solver(w_k.lam, w_k.x, r_k)


def ppa_dual_step(p: ProblemSpec,
                  w_k: PrimalDualPoint,
                  x_tilde: np.ndarray,
                  s_k: float,
                  cone: DualCone = DualCone.NONNEGATIVE) -> np.ndarray:
    """lambda~ = P(lambda^k + [phi(x~) + D phi(x~)(x~ - x^k)] / s_k)"""
    if not s_k > 0:
        raise InvalidParameterException(name='s_k', value=s_k, requirement='s_k > 0')
    linearised = p.constraints(x_tilde) + p.jacobian(x_tilde) @ (x_tilde - w_k.x)
    return cone.project(w_k.lam + linearised / s_k)


def relax_step(w_k: PrimalDualPoint, w_tilde: PrimalDualPoint, gamma: float) -> PrimalDualPoint:
    if not 0 < gamma < 2:
        raise InvalidParameterException(name='gamma', value=gamma, requirement='0 < gamma < 2')
    return PrimalDualPoint(x=w_k.x - gamma * (w_k.x - w_tilde.x),
                           lam=w_k.lam - gamma * (w_k.lam - w_tilde.lam))


def schedule_rk(k: int, cfg) -> float:
    """Works for any config carrying a ScheduleParams as cfg.schedule."""
    schedule = cfg.schedule
    if schedule is None:
        raise InvalidParameterException(name='schedule', value=None, requirement='schedule mode only')
    if not 0 <= k <= schedule.horizon:
        raise InvalidParameterException(name='k', value=k, requirement=f'0 <= k <= horizon {schedule.horizon}')

    return (schedule.horizon - k) * math.sqrt(schedule.L * schedule.C2 + schedule.sigma) \
        + schedule.L * schedule.C1 + schedule.sigma


def check_start(p: ProblemSpec, w0: PrimalDualPoint, cone: DualCone):
    p.check_point(w0)
    if not cone.contains(w0.lam):
        raise InvalidInputException(f'initial multipliers are outside the {cone.value} cone')


def run_relaxed_ppa(p: ProblemSpec,
                    cfg: RelaxedPpaConfig,
                    w0: PrimalDualPoint = None) -> Tuple[PrimalDualPoint, IterationTrace]:
    cone = cfg.dual_cone
    w = w0 if w0 is not None else initial_point(p, cone)
    check_start(p, w, cone)

    label = f'relaxed ppa (gamma={cfg.gamma})'
    logger.info(f'{label} on {p}, {cfg.param_mode.value} parameters')

    trace = IterationTrace(method='ppa', n=p.n, m=p.m, w0=w, param_mode=cfg.param_mode, gamma=cfg.gamma,
                           linear=p.linear, dual_cone=cone)
    if cfg.param_mode is ParamMode.SCHEDULE and cfg.max_iters > cfg.schedule.horizon + 1:
        logger.warning(f'schedule horizon {cfg.schedule.horizon} shorter than max_iters {cfg.max_iters}, '
                       'run stops at the horizon')

    start = perf_counter()
    f_current = p.objective(w.x)
    best, best_kkt = w, np.inf

    for k in range(cfg.max_iters):
        if cfg.param_mode is ParamMode.SCHEDULE and k > cfg.schedule.horizon:
            break

        subproblem_start = perf_counter()
        if cfg.param_mode is ParamMode.ADAPTIVE:
            r = update_r(w.x, p, cfg.mu1)
        elif cfg.param_mode is ParamMode.CONSTANT:
            r = cfg.constant_rs[0]
        else:
            r = schedule_rk(k, cfg)

        try:
            x_tilde = ppa_primal_step(p, w, r)
        except SubproblemException as e:
            logger.error(f'{label} subproblem failed at iteration {k}: {e}')
            raise SolverException(method='ppa', iteration=k, message=str(e))

        if cfg.param_mode is ParamMode.ADAPTIVE:
            s = update_s(r, x_tilde, p, cfg.mu2)
        elif cfg.param_mode is ParamMode.CONSTANT:
            s = cfg.constant_rs[1]
        else:
            s = r

        w_tilde = PrimalDualPoint(x=x_tilde, lam=ppa_dual_step(p, w, x_tilde, s, cone))
        subproblem_time = perf_counter() - subproblem_start
        trace.add_predictor(w_tilde)

        w_relaxed = relax_step(w, w_tilde, cfg.gamma)
        if cfg.reproject_dual:
            w_next, clipped = project_dual(w_relaxed, cone)
        else:
            w_next, clipped = w_relaxed, False

        f_next = p.objective(w_next.x)
        error = abs(f_current - f_next)

        J_tilde = p.jacobian(x_tilde)
        try:
            step_norm = sigma_norm(build_sigma(r, s, J_tilde), w_tilde.stacked() - w.stacked())
        except PositiveDefiniteException as e:
            logger.error(f'{label} Sigma lost positive definiteness at iteration {k}: {e}')
            raise SolverException(method='ppa', iteration=k, message=str(e))
        residual = kkt_residual(p, w_next, cone=cone)

        record = IterationRecord(k=k,
                                 f_value=f_next,
                                 error=error,
                                 kkt_residual=residual,
                                 params=ProxParams(r=r, s=s, mu1=cfg.mu1, mu2=cfg.mu2, gamma=cfg.gamma),
                                 sigma_norm_of_step=step_norm,
                                 clipped=clipped,
                                 subproblem_time=subproblem_time)
        if cfg.diagnostics:
            record.w, record.w_tilde, record.w_unprojected, record.jacobian = w, w_tilde, w_relaxed, J_tilde
        if cfg.keep_iterates:
            record.x_next = w_next.x
        trace.append(record)

        if residual < best_kkt:
            best, best_kkt = w_next, residual

        if cfg.log_every and k % cfg.log_every == 0:
            logger.debug(f'{label} k={k} f={f_next:.10e} error={error:.3e} kkt={residual:.3e} r={r:.3e} s={s:.3e}')

        w, f_current = w_next, f_next
        if k + 1 >= cfg.min_iters and error < cfg.tau:
            trace.converged = True
            break

    trace.elapsed = perf_counter() - start

    if not trace.converged:
        logger.warning(f'{label} stopped after {trace.iterations} iterations without reaching tau={cfg.tau:.0e}, '
                       f'returning best kkt point ({best_kkt:.3e})')
        return best, trace

    logger.info(f'{label} converged in {trace.iterations} iterations ({trace.elapsed:.3f}s)')
    return w, trace
