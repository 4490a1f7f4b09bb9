from dataclasses import dataclass
import logging
import math
from time import perf_counter
from typing import Optional, Tuple

import numpy as np

from proxframework.core.matrix import sigma_norm, spectral_norm
from proxframework.core.operator import initial_point, kkt_residual, project_dual
from proxframework.model import (BlockMatrix, Corrector, DualCone, InvalidParameterException, IterationRecord,
                                 IterationTrace, ParamMode, PositiveDefiniteException, PrimalDualPoint,
                                 ProblemSpec, ProxParams, ScheduleParams, SolverException, SubproblemException)
from proxframework.solver.ppa import check_start, schedule_rk, update_r, update_s

logger = logging.getLogger(__name__)

BETA_MARGIN = 1e-9


@dataclass
class PcConfig:
    mu1: float = 9.0
    mu2: float = 1.2
    gamma: float = 1.0
    tau: float = 1e-10
    max_iters: int = 50000
    min_iters: int = 2
    corrector: Corrector = Corrector.LOWER
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
        if not self.gamma > 0:
            raise InvalidParameterException(name='gamma', value=self.gamma, requirement='gamma > 0')
        if not self.tau > 0:
            raise InvalidParameterException(name='tau', value=self.tau, requirement='tau > 0')
        if self.max_iters < 1:
            raise InvalidParameterException(name='max_iters', value=self.max_iters, requirement='max_iters >= 1')
        if self.param_mode is ParamMode.CONSTANT:
            if self.constant_rs is None or min(self.constant_rs) <= 0:
                raise InvalidParameterException(name='constant_rs', value=self.constant_rs,
                                                requirement='constant mode needs r > 0 and s > 0')
        if self.param_mode is ParamMode.SCHEDULE and self.schedule is None:
            raise InvalidParameterException(name='schedule', value=None,
                                            requirement='schedule mode needs L, C1, C2, sigma and horizon')


def predict(p: ProblemSpec,
            w_k: PrimalDualPoint,
            mu1: float,
            mu2: float,
            cone: DualCone = DualCone.NONNEGATIVE,
            fixed_rs: Tuple[float, float] = None) -> Tuple[PrimalDualPoint, float, float]:
    """Plain primal-dual step, the dual update carries no linearisation term.

    fixed_rs bypasses the adaptive rule for (r_k, s_k).
    """
    r = fixed_rs[0] if fixed_rs is not None else update_r(w_k.x, p, mu1)
    x_tilde = p.prox_solver(w_k.lam, w_k.x, r)
    s = fixed_rs[1] if fixed_rs is not None else update_s(r, x_tilde, p, mu2)

    lam_tilde = cone.project(w_k.lam + p.constraints(x_tilde) / s)
    return PrimalDualPoint(x=x_tilde, lam=lam_tilde), r, s


def _check_rs(r: float, s: float):
    if not r > 0 or not s > 0:
        raise InvalidParameterException(name='r, s', value=(r, s), requirement='r > 0 and s > 0')


def build_q(r_k: float, s_k: float, J: np.ndarray) -> BlockMatrix:
    """[[r I, -J^T], [0, s I]]"""
    _check_rs(r_k, s_k)
    J = np.asarray(J, dtype=float)
    m, n = J.shape
    return BlockMatrix(r_k * np.eye(n), -J.T, np.zeros((m, n)), s_k * np.eye(m))


def build_m(choice: Corrector, r_k: float, s_k: float, J: np.ndarray) -> BlockMatrix:
    _check_rs(r_k, s_k)
    J = np.asarray(J, dtype=float)
    m, n = J.shape
    if choice is Corrector.UPPER:
        return BlockMatrix(np.eye(n), -J.T / r_k, np.zeros((m, n)), np.eye(m))
    return BlockMatrix(np.eye(n), np.zeros((n, m)), J / s_k, np.eye(m))


def build_corrector_sigma(choice: Corrector, r_k: float, s_k: float, J: np.ndarray) -> BlockMatrix:
    """Closed form of Q M^-1 for the given corrector."""
    _check_rs(r_k, s_k)
    J = np.asarray(J, dtype=float)
    m, n = J.shape
    if choice is Corrector.UPPER:
        return BlockMatrix(r_k * np.eye(n), np.zeros((n, m)), np.zeros((m, n)), s_k * np.eye(m), symmetric=True)
    return BlockMatrix(r_k * np.eye(n) + J.T @ J / s_k, -J.T, -J, s_k * np.eye(m), symmetric=True)


def build_g(Q: BlockMatrix, M: BlockMatrix, sigma: BlockMatrix, beta: float) -> BlockMatrix:
    """G = Q^T + Q - beta M^T Sigma M"""
    return Q.T + Q - beta * (M.T @ sigma @ M)


def g_is_pd(r_k: float, s_k: float, J: np.ndarray, beta: float) -> bool:
    """Holds for both correctors: G is positive definite iff (2 - beta)^2 r s > |J|^2 with beta < 2."""
    return beta < 2 and (2 - beta) ** 2 * r_k * s_k > spectral_norm(J) ** 2


def optimal_beta(w_k: PrimalDualPoint,
                 w_tilde: PrimalDualPoint,
                 Q: BlockMatrix,
                 M: BlockMatrix,
                 sigma: BlockMatrix) -> Optional[float]:
    """beta* = d^T Q d / |M d|^2_Sigma, None when d = 0."""
    d = w_k.stacked() - w_tilde.stacked()
    if not np.any(d):
        return None

    denominator = sigma.quadratic(M @ d)
    if denominator <= 0:
        raise PositiveDefiniteException(quantity='|M d|^2_Sigma', value=denominator)
    return Q.quadratic(d) / denominator


def distance_lower_bound(beta: float,
                         w_k: PrimalDualPoint,
                         w_tilde: PrimalDualPoint,
                         Q: BlockMatrix,
                         M: BlockMatrix,
                         sigma: BlockMatrix) -> float:
    """xi(beta) = 2 beta d^T Q d - beta^2 |M d|^2_Sigma"""
    d = w_k.stacked() - w_tilde.stacked()
    return 2 * beta * Q.quadratic(d) - beta ** 2 * sigma.quadratic(M @ d)


def beta_cap(r_k: float, s_k: float, J: np.ndarray, mu2: float) -> float:
    return 2 - max(math.sqrt(1 / mu2), spectral_norm(J) / math.sqrt(r_k * s_k)) - BETA_MARGIN


def correct(w_k: PrimalDualPoint,
            w_tilde: PrimalDualPoint,
            M: BlockMatrix,
            beta: float,
            cone: Optional[DualCone] = DualCone.NONNEGATIVE) -> PrimalDualPoint:
    """w^{k+1} = w^k - beta M (w^k - w~^k), lambda projected onto cone unless cone is None."""
    if beta < 0:
        raise InvalidParameterException(name='beta', value=beta, requirement='beta >= 0')
    step = M @ (w_k.stacked() - w_tilde.stacked())
    corrected = PrimalDualPoint.from_stacked(w_k.stacked() - beta * step, w_k.n)
    if cone is None:
        return corrected
    return project_dual(corrected, cone)[0]


def run_pc(p: ProblemSpec, cfg: PcConfig, w0: PrimalDualPoint = None) -> Tuple[PrimalDualPoint, IterationTrace]:
    cone = cfg.dual_cone
    w = w0 if w0 is not None else initial_point(p, cone)
    check_start(p, w, cone)

    label = f'pc ({cfg.corrector.value}, gamma={cfg.gamma})'
    logger.info(f'{label} on {p}, {cfg.param_mode.value} parameters')

    trace = IterationTrace(method='pc', n=p.n, m=p.m, w0=w, param_mode=cfg.param_mode, gamma=cfg.gamma,
                           corrector=cfg.corrector, linear=p.linear, dual_cone=cone)

    start = perf_counter()
    f_current = p.objective(w.x)
    best, best_kkt = w, np.inf

    for k in range(cfg.max_iters):
        fixed_rs = None
        if cfg.param_mode is ParamMode.CONSTANT:
            fixed_rs = cfg.constant_rs
        elif cfg.param_mode is ParamMode.SCHEDULE:
            if k > cfg.schedule.horizon:
                break
            fixed_rs = (schedule_rk(k, cfg),) * 2

        subproblem_start = perf_counter()
        try:
            w_tilde, r, s = predict(p, w, cfg.mu1, cfg.mu2, cone=cone, fixed_rs=fixed_rs)
        except SubproblemException as e:
            logger.error(f'{label} subproblem failed at iteration {k}: {e}')
            raise SolverException(method='pc', iteration=k, message=str(e))
        subproblem_time = perf_counter() - subproblem_start
        trace.add_predictor(w_tilde)

        J_tilde = p.jacobian(w_tilde.x)
        Q = build_q(r, s, J_tilde)
        M = build_m(cfg.corrector, r, s, J_tilde)
        sigma = build_corrector_sigma(cfg.corrector, r, s, J_tilde)

        try:
            beta_star = optimal_beta(w, w_tilde, Q, M, sigma)
        except PositiveDefiniteException as e:
            raise SolverException(method='pc', iteration=k, message=str(e))

        if beta_star is None:
            beta = 0.0
            w_corrected = w
        else:
            cap = beta_cap(r, s, J_tilde, cfg.mu2)
            if cap <= 0 or beta_star <= 0:
                raise SolverException(method='pc', iteration=k,
                                      message=f'no admissible step, beta*={beta_star:.3e} cap={cap:.3e}')
            beta = min(cfg.gamma * beta_star, cap)
            w_corrected = correct(w, w_tilde, M, beta, cone=None)

        if cfg.reproject_dual:
            w_next, clipped = project_dual(w_corrected, cone)
        else:
            w_next, clipped = w_corrected, False

        f_next = p.objective(w_next.x)
        error = abs(f_current - f_next)
        residual = kkt_residual(p, w_next, cone=cone)

        record = IterationRecord(k=k,
                                 f_value=f_next,
                                 error=error,
                                 kkt_residual=residual,
                                 params=ProxParams(r=r, s=s, mu1=cfg.mu1, mu2=cfg.mu2, gamma=cfg.gamma, beta=beta),
                                 sigma_norm_of_step=sigma_norm(sigma, w_tilde.stacked() - w.stacked()),
                                 beta_star=beta_star,
                                 g_pd=g_is_pd(r, s, J_tilde, beta),
                                 clipped=clipped,
                                 subproblem_time=subproblem_time)
        if cfg.diagnostics:
            record.w, record.w_tilde, record.w_unprojected, record.jacobian = w, w_tilde, w_corrected, J_tilde
        if cfg.keep_iterates:
            record.x_next = w_next.x
        trace.append(record)

        if residual < best_kkt:
            best, best_kkt = w_next, residual

        if cfg.log_every and k % cfg.log_every == 0:
            logger.debug(f'{label} k={k} f={f_next:.10e} error={error:.3e} kkt={residual:.3e} beta={beta:.4f}')

        w, f_current = w_next, f_next
        if beta_star is None or (k + 1 >= cfg.min_iters and error < cfg.tau):
            trace.converged = True
            break

    trace.elapsed = perf_counter() - start

    if not trace.converged:
        logger.warning(f'{label} stopped after {trace.iterations} iterations without reaching tau={cfg.tau:.0e}, '
                       f'returning best kkt point ({best_kkt:.3e})')
        return best, trace

    logger.info(f'{label} converged in {trace.iterations} iterations ({trace.elapsed:.3f}s)')
    return w, trace
