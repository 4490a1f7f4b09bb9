"""Benchmark runner: instance sweeps, method comparison tables, iteration series and replays."""
from argparse import ArgumentParser, ArgumentTypeError
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
import json
import logging
import os
import sys
from typing import List, Optional, Tuple

import numpy as np

import proxframework
from proxframework.core.operator import initial_point
from proxframework.diagnostics import (DiagnosticsException, check_ergodic_gap, check_pc_contraction,
                                       check_ppa_contraction)
from proxframework.io.csv import (export_contraction, export_distance_series, export_f_series, export_gap_series,
                                  export_medians, export_table, export_trace)
from proxframework.io.json import (InstanceParseException, export_report, load_instance, save_instance,
                                   write_manifest)
from proxframework.model import (Corrector, DualCone, InvalidInputException, InvalidParameterException,
                                 IterationTrace, PrimalDualPoint, ProblemSpec, SolverException, SubproblemException)
from proxframework.qcqp.instance import generate_instance
from proxframework.qcqp.oracle import MAX_M, MAX_N, OracleException, oracle_solve
from proxframework.qcqp.problem import problem_for
from proxframework.solver.pc import PcConfig, run_pc
from proxframework.solver.ppa import RelaxedPpaConfig, run_relaxed_ppa
from proxframework.util.console import format_medians

logger = logging.getLogger(__name__)

OUT_ENV = 'PROXFRAMEWORK_OUT'
METHODS = ('ppa', 'rppa', 'pc')
DEFAULT_GAMMA = {'ppa': 1.0, 'rppa': 1.5, 'pc': 1.0}
DEFAULT_GRID = [(m, n) for m in (10, 20, 30) for n in (30, 60, 90)]

RUN_ERRORS = (SolverException, SubproblemException, InvalidParameterException, InvalidInputException)


def default_out() -> str:
    return os.environ.get(OUT_ENV, os.path.join(proxframework.config_directory, 'results'))


@dataclass
class MethodSpec:
    name: str
    gamma: float
    mu1: float = 9.0
    mu2: float = 1.2
    corrector: Corrector = Corrector.UPPER

    def __post_init__(self):
        if self.name not in METHODS:
            raise InvalidParameterException(name='method', value=self.name, requirement=f'one of {METHODS}')

    @property
    def corrector_label(self) -> str:
        return self.corrector.value if self.name == 'pc' else ''

    @property
    def label(self) -> str:
        if self.name == 'pc':
            return f'pc_{self.corrector.value}_g{self.gamma:g}'
        return f'{self.name}_g{self.gamma:g}'

    def solve(self,
              problem: ProblemSpec,
              cfg: 'ExperimentConfig',
              keep_iterates: bool = False,
              tau: float = None,
              max_iters: int = None,
              diagnostics: bool = None) -> Tuple[PrimalDualPoint, IterationTrace]:
        cone = DualCone.NONPOSITIVE if cfg.compat_signs else DualCone.NONNEGATIVE
        w0 = initial_point(problem, cone)
        options = dict(mu1=self.mu1,
                       mu2=self.mu2,
                       gamma=self.gamma,
                       tau=tau or cfg.tau,
                       max_iters=max_iters or cfg.max_iters,
                       dual_cone=cone,
                       diagnostics=cfg.diagnostics if diagnostics is None else diagnostics,
                       keep_iterates=keep_iterates)

        if self.name == 'pc':
            return run_pc(problem, PcConfig(corrector=self.corrector, **options), w0)
        return run_relaxed_ppa(problem, RelaxedPpaConfig(**options), w0)


def default_methods() -> List[MethodSpec]:
    return [MethodSpec(name=name, gamma=DEFAULT_GAMMA[name]) for name in METHODS]


@dataclass
class ExperimentConfig:
    grid: List[Tuple[int, int]] = field(default_factory=lambda: list(DEFAULT_GRID))
    seeds: int = 20
    seed_base: int = 0
    methods: List[MethodSpec] = field(default_factory=default_methods)
    tau: float = 1e-10
    max_iters: int = 50000
    diagnostics: bool = False
    out: str = field(default_factory=default_out)
    compat_signs: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.seeds < 1:
            raise InvalidParameterException(name='seeds', value=self.seeds, requirement='seeds >= 1')
        if not self.tau > 0:
            raise InvalidParameterException(name='tau', value=self.tau, requirement='tau > 0')
        if self.max_iters < 1:
            raise InvalidParameterException(name='max_iters', value=self.max_iters, requirement='max_iters >= 1')
        if self.workers < 1:
            raise InvalidParameterException(name='workers', value=self.workers, requirement='workers >= 1')
        for m, n in self.grid:
            if m < 0 or n < 1:
                raise InvalidParameterException(name='grid', value=(m, n), requirement='m >= 0 and n >= 1')

    @property
    def seed_list(self) -> List[int]:
        return [self.seed_base + i for i in range(self.seeds)]

    def to_dict(self) -> dict:
        # output location and parallelism do not change results
        config = asdict(self)
        del config['out'], config['workers']
        return config


@dataclass
class TableResult:
    rows: List[dict]
    medians: List[dict]
    table_path: str
    median_path: str
    result_paths: List[str] = field(default_factory=list)

    @property
    def failures(self) -> int:
        return sum(1 for row in self.rows if row['status'].startswith('failed'))


@dataclass
class SeriesResult:
    trace: IterationTrace
    f_path: str
    distance_path: Optional[str] = None
    report_paths: List[str] = field(default_factory=list)

    @property
    def paths(self) -> List[str]:
        return [i for i in (self.f_path, self.distance_path) if i is not None] + self.report_paths


@dataclass
class ReplayResult:
    x: np.ndarray
    trace: IterationTrace
    trace_path: str
    result_path: str
    report_paths: List[str] = field(default_factory=list)


def instance_path(out: str, m: int, n: int, seed: int) -> str:
    return os.path.join(out, 'instances', f'qcqp_m{m}_n{n}_s{seed}.json')


def result_path(out: str, method: MethodSpec, m: int, n: int, seed: int) -> str:
    return os.path.join(out, 'results', f'{method.label}_m{m}_n{n}_s{seed}.json')


def write_result(path: str, method: MethodSpec, trace: IterationTrace, point: PrimalDualPoint, **extra) -> str:
    """Final iterate and run summary as JSON, floats written with full precision."""
    directory = os.path.dirname(path)
    if directory and not os.path.exists(directory):
        os.makedirs(directory, exist_ok=True)

    with open(path, 'w') as fileobj:
        json.dump({
            **extra,
            'method': method.name,
            'gamma': method.gamma,
            'corrector': method.corrector_label,
            'iter': trace.iterations,
            'converged': trace.converged,
            'error': trace.final_error,
            'f': trace.final_f,
            'x': point.x.tolist(),
            'lambda': point.lam.tolist()
        }, fileobj, indent=2)
    return path


def write_diagnostics(trace: IterationTrace, problem: ProblemSpec, w_star: PrimalDualPoint, stem: str) -> List[str]:
    """Contraction report against w* and the ergodic gap series, bound left blank where it is not guaranteed."""
    check = check_pc_contraction if trace.method == 'pc' else check_ppa_contraction
    try:
        report = check(trace, w_star)
        gap = check_ergodic_gap(trace, w_star, problem, mode=trace.method, strict=False)
    except DiagnosticsException as e:
        logger.warning(f'no diagnostics for {stem}: {e}')
        return []

    logger.info(f'{stem}: {report}')
    return [export_contraction(report, f'{stem}_contraction.csv'),
            export_report(report, f'{stem}_contraction.json'),
            export_gap_series(gap, f'{stem}_gap.csv')]


def _run_method(method: MethodSpec,
                problem: ProblemSpec,
                cfg: ExperimentConfig,
                m: int,
                n: int,
                seed: int) -> Tuple[dict, Optional[str]]:
    row = {
        'm': m,
        'n': n,
        'seed': seed,
        'method': method.name,
        'gamma': method.gamma,
        'corrector': method.corrector_label
    }

    try:
        point, trace = method.solve(problem, cfg)
    except RUN_ERRORS as e:
        logger.error(f'{method.label} failed on m={m} n={n} seed={seed}: {e}')
        row.update(iter=0, time=0.0, cpu=0.0, error=float('nan'), converged=0, status=f'failed: {e}')
        return row, None

    row.update(iter=trace.iterations,
               time=round(trace.elapsed, 6),
               cpu=round(trace.max_subproblem_time, 6),
               error=trace.final_error,
               converged=int(trace.converged),
               status='converged' if trace.converged else 'max_iters')
    path = write_result(result_path(cfg.out, method, m, n, seed), method, trace, point,
                        instance=instance_path(cfg.out, m, n, seed))
    return row, path


def _run_cell(cfg: ExperimentConfig, m: int, n: int, seed: int) -> List[Tuple[dict, Optional[str]]]:
    logger.info(f'cell m={m} n={n} seed={seed}')
    inst = generate_instance(m, n, seed)
    save_instance(inst, instance_path(cfg.out, m, n, seed))
    problem = problem_for(inst)
    return [_run_method(method, problem, cfg, m, n, seed) for method in cfg.methods]


def median_rows(rows: List[dict]) -> List[dict]:
    groups = {}
    for row in rows:
        groups.setdefault((row['m'], row['n'], row['method'], row['gamma'], row['corrector']), []).append(row)

    medians = []
    for (m, n, method, gamma, corrector), group in groups.items():
        finished = [i for i in group if not i['status'].startswith('failed')]
        medians.append({
            'm': m,
            'n': n,
            'method': method,
            'gamma': gamma,
            'corrector': corrector,
            'seeds': len(group),
            'iter': float(np.median([i['iter'] for i in finished])) if finished else float('nan'),
            'time': float(np.median([i['time'] for i in finished])) if finished else float('nan'),
            'cpu': float(np.median([i['cpu'] for i in finished])) if finished else float('nan'),
            'error': float(np.median([i['error'] for i in finished])) if finished else float('nan'),
            'converged': sum(i['converged'] for i in group) / len(group)
        })
    return medians


def run_table(cfg: ExperimentConfig) -> TableResult:
    cells = [(m, n, seed) for m, n in cfg.grid for seed in cfg.seed_list]
    logger.info(f'running {len(cells)} cells x {len(cfg.methods)} methods into {cfg.out}')

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as executor:
            results = list(executor.map(lambda cell: _run_cell(cfg, *cell), cells))
    else:
        results = [_run_cell(cfg, *cell) for cell in cells]

    rows = [row for cell in results for row, _ in cell]
    medians = median_rows(rows)

    table_path = export_table(rows, os.path.join(cfg.out, 'table.csv'))
    median_path = export_medians(medians, os.path.join(cfg.out, 'table_median.csv'))
    return TableResult(rows=rows,
                       medians=medians,
                       table_path=table_path,
                       median_path=median_path,
                       result_paths=sorted(path for cell in results for _, path in cell if path is not None))


def reference_solution(inst, problem: ProblemSpec, cfg: ExperimentConfig) -> Optional[PrimalDualPoint]:
    """w* from the oracle on small instances, otherwise a long high accuracy relaxed run."""
    if inst.m <= MAX_M and inst.n <= MAX_N:
        try:
            return oracle_solve(inst)
        except OracleException as e:
            logger.warning(f'oracle unavailable for {inst}: {e}')
            return None

    reference = MethodSpec(name='rppa', gamma=1.5)
    try:
        point, trace = reference.solve(problem, cfg, tau=min(cfg.tau, 1e-10) * 1e-2, max_iters=4 * cfg.max_iters,
                                       diagnostics=False)
    except RUN_ERRORS as e:
        logger.warning(f'reference run failed for {inst}: {e}')
        return None

    if not trace.converged:
        logger.warning(f'reference run for {inst} did not converge')
        return None
    return point


def _series(cfg: ExperimentConfig,
            method: MethodSpec,
            problem: ProblemSpec,
            reference: Optional[PrimalDualPoint],
            m: int,
            n: int,
            seed: int) -> SeriesResult:
    _, trace = method.solve(problem, cfg, keep_iterates=True)

    stem = os.path.join(cfg.out, 'series', f'{method.label}_m{m}_n{n}_s{seed}')
    result = SeriesResult(trace=trace, f_path=export_f_series(trace, f'{stem}_f.csv'))

    if reference is None:
        logger.warning(f'no reference solution for m={m} n={n} seed={seed}, writing function values only')
        return result

    result.distance_path = export_distance_series(trace, reference.x, f'{stem}_distance.csv')
    if cfg.diagnostics:
        result.report_paths = write_diagnostics(trace, problem, reference, stem)
    return result


def run_series(cfg: ExperimentConfig, method: MethodSpec, m: int, n: int, seed: int) -> SeriesResult:
    inst = generate_instance(m, n, seed)
    problem = problem_for(inst)
    return _series(cfg, method, problem, reference_solution(inst, problem, cfg), m, n, seed)


def run_series_cell(cfg: ExperimentConfig, methods: List[MethodSpec], m: int, n: int, seed: int) -> List[SeriesResult]:
    """Series of every method on one instance, sharing a single reference solution."""
    inst = generate_instance(m, n, seed)
    problem = problem_for(inst)
    reference = reference_solution(inst, problem, cfg)

    results = []
    for method in methods:
        try:
            results.append(_series(cfg, method, problem, reference, m, n, seed))
        except RUN_ERRORS as e:
            logger.error(f'series {method.label} m={m} n={n} failed: {e}')
    return results


def replay(instance_file: str, method: MethodSpec, cfg: ExperimentConfig) -> ReplayResult:
    inst = load_instance(instance_file)
    problem = problem_for(inst)
    point, trace = method.solve(problem, cfg)

    stem = os.path.join(cfg.out, 'replay', f'{os.path.splitext(os.path.basename(instance_file))[0]}_{method.label}')
    result = ReplayResult(x=point.x,
                          trace=trace,
                          trace_path=export_trace(trace, f'{stem}_trace.csv'),
                          result_path=write_result(f'{stem}_result.json', method, trace, point,
                                                   instance=instance_file))

    if cfg.diagnostics:
        reference = reference_solution(inst, problem, cfg)
        if reference is None:
            logger.warning(f'no reference solution for {instance_file}, skipping diagnostics')
        else:
            result.report_paths = write_diagnostics(trace, problem, reference, stem)

    logger.info(f'replayed {instance_file} with {method.label}: {trace}')
    return result


def parse_grid(text: str) -> List[Tuple[int, int]]:
    try:
        grid = []
        for cell in text.split(','):
            m, n = cell.split(':')
            grid.append((int(m), int(n)))
        return grid
    except ValueError:
        raise ArgumentTypeError(f'grid must look like "10:30,20:60", got "{text}"')


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog='proxbench', description=__doc__)
    parser.add_argument('--grid', type=parse_grid, default=None, help='m:n cells, default the 3 x 3 study grid')
    parser.add_argument('--seeds', type=int, default=20)
    parser.add_argument('--seed-base', type=int, default=0)
    parser.add_argument('--method', action='append', choices=METHODS, help='repeatable, default all methods')
    parser.add_argument('--gamma', type=float, default=None, help='overrides the per-method default')
    parser.add_argument('--mu1', type=float, default=9.0)
    parser.add_argument('--mu2', type=float, default=1.2)
    parser.add_argument('--tau', type=float, default=1e-10)
    parser.add_argument('--max-iters', type=int, default=50000)
    parser.add_argument('--corrector', choices=[i.value for i in Corrector], default=Corrector.UPPER.value)
    parser.add_argument('--diagnostics', action='store_true')
    parser.add_argument('--compat-signs', action='store_true', help='lambda <= 0 with lambda^0 = -1')
    parser.add_argument('--out', default=None, help=f'output directory, else ${OUT_ENV} or .prox/results')
    parser.add_argument('--replay', metavar='FILE', default=None)
    parser.add_argument('--series', action='store_true', help='write iteration series for the first seed')
    parser.add_argument('--workers', type=int, default=1)
    return parser


def main(argv: List[str] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        methods = [MethodSpec(name=name,
                              gamma=args.gamma if args.gamma is not None else DEFAULT_GAMMA[name],
                              mu1=args.mu1,
                              mu2=args.mu2,
                              corrector=Corrector(args.corrector))
                   for name in (args.method or METHODS)]
        cfg = ExperimentConfig(grid=args.grid if args.grid is not None else list(DEFAULT_GRID),
                               seeds=args.seeds,
                               seed_base=args.seed_base,
                               methods=methods,
                               tau=args.tau,
                               max_iters=args.max_iters,
                               diagnostics=args.diagnostics,
                               out=args.out or default_out(),
                               compat_signs=args.compat_signs,
                               workers=args.workers)
        # fail fast on solver parameters before any cell runs
        for method in methods:
            if method.name == 'pc':
                PcConfig(mu1=method.mu1, mu2=method.mu2, gamma=method.gamma, tau=cfg.tau)
            else:
                RelaxedPpaConfig(mu1=method.mu1, mu2=method.mu2, gamma=method.gamma, tau=cfg.tau)
    except InvalidParameterException as e:
        parser.error(str(e))

    if args.replay:
        try:
            result = replay(args.replay, methods[0], cfg)
        except (InstanceParseException, FileNotFoundError) as e:
            logger.error(f'cannot replay {args.replay}: {e}')
            return 2
        except RUN_ERRORS as e:
            logger.error(f'replay of {args.replay} failed: {e}')
            return 2

        print(f'{methods[0].label}: {result.trace}')
        return 0 if result.trace.converged else 2

    result = run_table(cfg)
    artifacts = [result.table_path, result.median_path] + result.result_paths

    if args.series:
        for m, n in cfg.grid:
            for series in run_series_cell(cfg, methods, m, n, cfg.seed_base):
                artifacts += series.paths

    write_manifest(cfg.to_dict(), artifacts, os.path.join(cfg.out, 'manifest.json'))
    print(format_medians(result.medians))

    if result.failures:
        logger.warning(f'{result.failures} runs failed')
        return 2
    return 0


def configure_logging():
    directory = proxframework.config_directory
    if not os.path.exists(directory):
        os.makedirs(directory)

    package_logger = logging.getLogger('proxframework')

    file_handler = logging.FileHandler(os.path.join(directory, 'benchmark.log'))
    file_handler.setFormatter(logging.Formatter('%(asctime)s %(levelname)s %(name)s - %(funcName)s - %(message)s'))
    package_logger.addHandler(file_handler)

    stream_handler = logging.StreamHandler()
    stream_handler.setLevel('INFO')
    stream_handler.setFormatter(logging.Formatter('%(levelname)s %(name)s:%(funcName)s - %(message)s'))
    package_logger.addHandler(stream_handler)


def run():
    configure_logging()
    sys.exit(main())


if __name__ == '__main__':
    run()
