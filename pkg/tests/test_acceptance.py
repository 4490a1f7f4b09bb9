"""Multi-seed sweeps, deselected by default. Run with pytest -m slow."""
import numpy as np
import pytest

from proxframework.core.matrix import spectral_norm
from proxframework.core.operator import kkt_residual
from proxframework.diagnostics import check_ergodic_gap, check_monotone, check_pc_contraction, check_ppa_contraction
from proxframework.model import Corrector, ParamMode
from proxframework.qcqp.instance import generate_instance, generate_linear_instance
from proxframework.qcqp.oracle import oracle_solve
from proxframework.qcqp.problem import linear_problem, qcqp_problem
from proxframework.solver.pc import PcConfig, run_pc
from proxframework.solver.ppa import RelaxedPpaConfig, run_relaxed_ppa

pytestmark = pytest.mark.slow

# f* can be near 1e-4, where |f(x^k) - f(x^(k+1))| < 1e-12 holds while x still moves
SWEEP = dict(tau=1e-14, max_iters=200000)

SOLVERS = [
    ('ppa', lambda p: run_relaxed_ppa(p, RelaxedPpaConfig(gamma=1.0, **SWEEP))),
    ('rppa', lambda p: run_relaxed_ppa(p, RelaxedPpaConfig(gamma=1.5, **SWEEP))),
    ('pc upper', lambda p: run_pc(p, PcConfig(corrector=Corrector.UPPER, **SWEEP))),
    ('pc lower', lambda p: run_pc(p, PcConfig(corrector=Corrector.LOWER, **SWEEP))),
]


def oracle_cases(count=50):
    for seed in range(count):
        inst = generate_instance(m=seed % 3, n=2 + seed % 4, seed=100 + seed)
        yield inst, oracle_solve(inst)


@pytest.mark.parametrize('name, solve', SOLVERS, ids=[i[0] for i in SOLVERS])
def test_oracle_agreement(name, solve):
    for inst, w_star in oracle_cases():
        p = qcqp_problem(inst)
        point, trace = solve(p)

        assert trace.converged, f'{name} on {inst}'
        np.testing.assert_allclose(point.x, w_star.x, atol=1e-5, err_msg=f'{name} on {inst}')
        assert kkt_residual(p, point) <= 1e-6
        assert trace.final_error < 1e-12


def test_contraction_suites():
    for seed in range(10):
        inst = generate_instance(m=1 + seed % 3, n=3, seed=200 + seed)
        p = qcqp_problem(inst)
        w_star = oracle_solve(inst)

        for gamma in (1.0, 1.5):
            _, trace = run_relaxed_ppa(p, RelaxedPpaConfig(gamma=gamma, diagnostics=True, max_iters=2000))
            assert check_ppa_contraction(trace, w_star).passed

        for choice in (Corrector.UPPER, Corrector.LOWER):
            _, trace = run_pc(p, PcConfig(corrector=choice, diagnostics=True, max_iters=2000))
            assert check_pc_contraction(trace, w_star).passed


def test_monotone_operator_sampling():
    for seed in range(10):
        report = check_monotone(qcqp_problem(generate_instance(m=3, n=5, seed=300 + seed)), samples=10000, seed=seed)
        assert report.passed, f'worst {report.worst:.3e} at scale {report.scale:.3e}'


def test_ergodic_bound_on_linear_instances():
    for seed in range(5):
        inst = generate_linear_instance(m=3, n=5, seed=400 + seed)
        p = linear_problem(inst)
        w_star = oracle_solve(inst)
        rs = 1.2 * spectral_norm(inst.C)
        options = dict(param_mode=ParamMode.CONSTANT, constant_rs=(rs, rs), reproject_dual=False,
                       diagnostics=True, max_iters=2001)

        _, trace = run_relaxed_ppa(p, RelaxedPpaConfig(gamma=1.5, **options))
        series = check_ergodic_gap(trace, w_star, p, mode='ppa')
        assert all(i.within_bound for i in series)
        for t in range(100, len(series) // 2):
            if series[t].gap > 1e-9:
                assert series[2 * t].gap <= 0.75 * series[t].gap

        _, trace = run_pc(p, PcConfig(**options))
        assert all(i.within_bound for i in check_ergodic_gap(trace, w_star, p, mode='pc'))


def test_iteration_trend():
    relaxed_faster, customized_faster = 0, 0
    seeds = range(20)
    for seed in seeds:
        p = qcqp_problem(generate_instance(m=10, n=30, seed=seed))
        _, customized = run_relaxed_ppa(p, RelaxedPpaConfig(gamma=1.0))
        _, relaxed = run_relaxed_ppa(p, RelaxedPpaConfig(gamma=1.5))
        _, pc = run_pc(p, PcConfig(corrector=Corrector.UPPER))

        for trace in (customized, relaxed, pc):
            assert trace.converged
            assert trace.final_error < 1e-10

        relaxed_faster += relaxed.iterations < customized.iterations
        customized_faster += customized.iterations <= pc.iterations

    assert relaxed_faster >= 0.6 * len(seeds)
    assert customized_faster >= 0.6 * len(seeds)
