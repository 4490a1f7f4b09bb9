"""Checks of solver traces against the contraction and ergodic rate guarantees."""
from dataclasses import dataclass, field
import logging
from typing import List, Optional, Tuple

import numpy as np
from scipy.linalg import eigvalsh

from proxframework.core.matrix import build_sigma
from proxframework.core.operator import monotone_operator
from proxframework.model import (BlockMatrix, IterationRecord, IterationTrace, ParamMode, PrimalDualPoint,
                                 ProblemSpec)
from proxframework.solver.pc import build_corrector_sigma, build_g, build_m, build_q

logger = logging.getLogger(__name__)

CONTRACTION_SLACK = 1e-8
GAP_SLACK = 1e-8
MONOTONE_SLACK = 1e-10


@dataclass
class DiagnosticsException(Exception):
    message: str

    def __str__(self):
        return f'Diagnostics Exception: {self.message}'


@dataclass
class ContractionReport:
    method: str
    pairs: List[Tuple[float, float]] = field(default_factory=list)
    violations: int = 0
    max_violation: float = 0.0
    sigma_min_eigenvalue: Optional[float] = None
    g_min_eigenvalue: Optional[float] = None
    slack: float = CONTRACTION_SLACK

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def __str__(self):
        return f'{self.method} contraction: {len(self.pairs)} iterations, {self.violations} violations ' \
               f'(max {self.max_violation:.3e})'


@dataclass
class GapPoint:
    t: int
    gap: float
    bound: Optional[float]

    @property
    def within_bound(self) -> bool:
        return self.bound is None or self.gap <= self.bound + GAP_SLACK


@dataclass
class MonotoneReport:
    worst: float
    scale: float
    samples: int

    @property
    def passed(self) -> bool:
        return self.worst >= -MONOTONE_SLACK * self.scale


def _require_method(trace: IterationTrace, method: str):
    if trace.method != method:
        raise DiagnosticsException(f'{method} check given a {trace.method} trace')


def _require_fields(record: IterationRecord):
    if not record.has_diagnostics:
        raise DiagnosticsException(f'iteration {record.k} is missing w, w~, w^(k+1) or jacobian, '
                                   'run the solver with diagnostics enabled')


def _min_eigenvalue(matrix: BlockMatrix) -> float:
    dense = matrix.dense()
    return float(eigvalsh((dense + dense.T) / 2)[0])


def _tally(report: ContractionReport, lhs: float, rhs: float):
    report.pairs.append((lhs, rhs))
    excess = lhs - rhs
    if excess > report.slack * (1 + abs(rhs)):
        report.violations += 1
    report.max_violation = max(report.max_violation, excess)


def _fold_min(current: Optional[float], value: float) -> float:
    return value if current is None else min(current, value)


def check_ppa_contraction(trace: IterationTrace,
                          w_star: PrimalDualPoint,
                          slack: float = CONTRACTION_SLACK,
                          eigenvalues: bool = True) -> ContractionReport:
    """|w^(k+1) - w*|^2 <= |w^k - w*|^2 - gamma (2 - gamma) |w~^k - w^k|^2 in the Sigma_k norm."""
    _require_method(trace, 'ppa')
    report = ContractionReport(method='ppa', slack=slack)
    star = w_star.stacked()

    for record in trace.records:
        _require_fields(record)
        sigma = build_sigma(record.r, record.s, record.jacobian)
        gamma = record.params.gamma
        w = record.w.stacked()

        lhs = sigma.quadratic(record.w_unprojected.stacked() - star)
        rhs = sigma.quadratic(w - star) - gamma * (2 - gamma) * sigma.quadratic(record.w_tilde.stacked() - w)
        _tally(report, lhs, rhs)

        if eigenvalues:
            report.sigma_min_eigenvalue = _fold_min(report.sigma_min_eigenvalue, _min_eigenvalue(sigma))

    if not report.passed:
        logger.warning(str(report))
    return report


def check_pc_contraction(trace: IterationTrace,
                         w_star: PrimalDualPoint,
                         slack: float = CONTRACTION_SLACK,
                         eigenvalues: bool = True) -> ContractionReport:
    """|w^(k+1) - w*|^2_Sigma <= |w^k - w*|^2_Sigma - beta |w^k - w~^k|^2_G."""
    _require_method(trace, 'pc')
    report = ContractionReport(method='pc', slack=slack)
    star = w_star.stacked()

    for record in trace.records:
        _require_fields(record)
        r, s, J, beta = record.r, record.s, record.jacobian, record.params.beta
        sigma = build_corrector_sigma(trace.corrector, r, s, J)
        G = build_g(build_q(r, s, J), build_m(trace.corrector, r, s, J), sigma, beta)
        w = record.w.stacked()

        lhs = sigma.quadratic(record.w_unprojected.stacked() - star)
        rhs = sigma.quadratic(w - star) - beta * G.quadratic(w - record.w_tilde.stacked())
        _tally(report, lhs, rhs)

        if eigenvalues:
            report.sigma_min_eigenvalue = _fold_min(report.sigma_min_eigenvalue, _min_eigenvalue(sigma))
            report.g_min_eigenvalue = _fold_min(report.g_min_eigenvalue, _min_eigenvalue(G))

    if not report.passed:
        logger.warning(str(report))
    return report


def _bound_supported(trace: IterationTrace) -> Optional[str]:
    if trace.clipped:
        return 'multipliers were re-projected during the run'
    if trace.param_mode is ParamMode.SCHEDULE:
        return None
    if trace.param_mode is ParamMode.CONSTANT and trace.linear:
        return None
    return f'{trace.param_mode.value} parameters with {"linear" if trace.linear else "nonlinear"} constraints ' \
           'give no constant Sigma'


def check_ergodic_gap(trace: IterationTrace,
                      w_star: PrimalDualPoint,
                      p: ProblemSpec,
                      mode: str,
                      strict: bool = True) -> List[GapPoint]:
    """Series of (t, gap(t), bound(t)) for the ergodic predictor average.

    gap(t) = f(x~_t) - f(x*) + (w~_t - w*)^T Gamma(w*). Outside the regimes with a
    telescoping Sigma, strict mode refuses and non-strict mode reports no bound.
    """
    _require_method(trace, mode)
    if not trace.records:
        raise DiagnosticsException('empty trace')

    reason = _bound_supported(trace)
    if reason is not None:
        if strict:
            raise DiagnosticsException(f'ergodic bound not guaranteed: {reason}')
        logger.info(f'ergodic gap reported without bound: {reason}')

    for record in trace.records:
        if record.w_tilde is None or (record.jacobian is None and reason is None):
            raise DiagnosticsException(f'iteration {record.k} is missing predictor retention')

    first = trace.records[0]
    if mode == 'ppa':
        sigma0 = build_sigma(first.r, first.s, first.jacobian) if reason is None else None
    else:
        sigma0 = build_corrector_sigma(trace.corrector, first.r, first.s, first.jacobian) if reason is None else None

    star = w_star.stacked()
    operator_star = monotone_operator(p, w_star)
    f_star = p.objective(w_star.x)
    start = trace.w0.stacked() if trace.w0 is not None else first.w.stacked()
    distance0 = sigma0.quadratic(star - start) if sigma0 is not None else None

    series = []
    total = np.zeros(trace.n + trace.m)
    beta_min = np.inf
    for t, record in enumerate(trace.records):
        total += record.w_tilde.stacked()
        average = total / (t + 1)
        gap = p.objective(average[:trace.n]) - f_star + (average - star) @ operator_star

        bound = None
        if distance0 is not None:
            if mode == 'ppa':
                bound = distance0 / (2 * trace.gamma * (1 + t))
            else:
                beta_min = min(beta_min, record.params.beta)
                bound = distance0 / (2 * beta_min * (1 + t)) if beta_min > 0 else np.inf
        series.append(GapPoint(t=t, gap=float(gap), bound=bound))

    return series


def check_monotone(p: ProblemSpec, samples: int = 1000, seed: int = 0, radius: float = 1.0) -> MonotoneReport:
    """Worst (w - w~)^T [Gamma(w) - Gamma(w~)] over random pairs with lambda, lambda~ >= 0."""
    rng = np.random.default_rng(seed)
    worst, scale = np.inf, 1.0

    for _ in range(samples):
        w = PrimalDualPoint(x=radius * rng.standard_normal(p.n), lam=np.abs(rng.standard_normal(p.m)))
        w_other = PrimalDualPoint(x=radius * rng.standard_normal(p.n), lam=np.abs(rng.standard_normal(p.m)))

        difference = w.stacked() - w_other.stacked()
        operator_difference = monotone_operator(p, w) - monotone_operator(p, w_other)

        worst = min(worst, float(difference @ operator_difference))
        scale = max(scale, float(np.abs(difference) @ np.abs(operator_difference)))

    report = MonotoneReport(worst=worst if samples else 0.0, scale=scale, samples=samples)
    if not report.passed:
        logger.warning(f'monotonicity violated on {p}: {report.worst:.3e}')
    return report


def check_schedule_monotone(trace: IterationTrace) -> List[float]:
    """Smallest eigenvalue of Sigma_(k-1) - Sigma_k for k = 1 .. t."""
    sigmas = []
    for record in trace.records:
        if record.jacobian is None:
            raise DiagnosticsException(f'iteration {record.k} is missing its jacobian')
        if trace.method == 'pc':
            sigmas.append(build_corrector_sigma(trace.corrector, record.r, record.s, record.jacobian))
        else:
            sigmas.append(build_sigma(record.r, record.s, record.jacobian))

    return [_min_eigenvalue(previous - current) for previous, current in zip(sigmas, sigmas[1:])]
