from csv import DictReader, DictWriter
import logging
import os
from typing import Iterable, List

import numpy as np

from proxframework.model import IterationTrace

logger = logging.getLogger(__name__)

trace_headers = ['k', 'f_value', 'error', 'kkt_residual', 'r', 's', 'beta_or_gamma', 'beta_star', 'g_pd',
                 'sigma_norm_of_step', 'clipped', 'subproblem_time']
table_headers = ['m', 'n', 'seed', 'method', 'gamma', 'corrector', 'iter', 'time', 'cpu', 'error', 'converged',
                 'status']
median_headers = ['m', 'n', 'method', 'gamma', 'corrector', 'seeds', 'iter', 'time', 'cpu', 'error', 'converged']
f_series_headers = ['k', 'f_value']
distance_series_headers = ['k', 'distance']
gap_headers = ['t', 'gap', 'bound']
contraction_headers = ['k', 'lhs', 'rhs', 'excess']


def _write(path: str, headers: List[str], rows: Iterable[dict]) -> str:
    directory = os.path.dirname(path)
    if directory and not os.path.exists(directory):
        os.makedirs(directory, exist_ok=True)

    with open(path, 'w', newline='') as fileobj:
        writer = DictWriter(fileobj, fieldnames=headers)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    return path


def export_trace(trace: IterationTrace, path: str) -> str:
    logger.info(f'dumping {trace.iterations} {trace.method} iterations to {path}')
    return _write(path, trace_headers, ({
        'k': record.k,
        'f_value': repr(record.f_value),
        'error': repr(record.error),
        'kkt_residual': repr(record.kkt_residual),
        'r': repr(record.r),
        's': repr(record.s),
        'beta_or_gamma': repr(record.beta_or_gamma),
        'beta_star': '' if record.beta_star is None else repr(record.beta_star),
        'g_pd': '' if record.g_pd is None else int(record.g_pd),
        'sigma_norm_of_step': repr(record.sigma_norm_of_step),
        'clipped': int(record.clipped),
        'subproblem_time': f'{record.subproblem_time:.6f}'
    } for record in trace.records))


def _table_key(row: dict):
    return row['m'], row['n'], row['seed'], row['method'], row['gamma'], row['corrector']


def export_table(rows: List[dict], path: str) -> str:
    logger.info(f'dumping {len(rows)} table rows to {path}')
    return _write(path, table_headers, sorted(rows, key=_table_key))


def export_medians(rows: List[dict], path: str) -> str:
    logger.info(f'dumping {len(rows)} median rows to {path}')
    return _write(path, median_headers,
                  sorted(rows, key=lambda i: (i['m'], i['n'], i['method'], i['gamma'], i['corrector'])))


def export_f_series(trace: IterationTrace, path: str) -> str:
    return _write(path, f_series_headers, ({
        'k': record.k,
        'f_value': repr(record.f_value)
    } for record in trace.records))


def export_distance_series(trace: IterationTrace, x_star: np.ndarray, path: str) -> str:
    if any(record.x_next is None for record in trace.records):
        raise ValueError('distance series needs a trace recorded with keep_iterates')
    return _write(path, distance_series_headers, ({
        'k': record.k,
        'distance': repr(float(np.linalg.norm(record.x_next - x_star)))
    } for record in trace.records))


def export_gap_series(points, path: str) -> str:
    return _write(path, gap_headers, ({
        't': point.t,
        'gap': repr(point.gap),
        'bound': '' if point.bound is None else repr(point.bound)
    } for point in points))


def export_contraction(report, path: str) -> str:
    return _write(path, contraction_headers, ({
        'k': k,
        'lhs': repr(lhs),
        'rhs': repr(rhs),
        'excess': repr(lhs - rhs)
    } for k, (lhs, rhs) in enumerate(report.pairs)))


def read_table(path: str) -> List[dict]:
    """Rows of a table CSV with numeric columns converted."""
    with open(path, newline='') as fileobj:
        reader = DictReader(fileobj)
        if reader.fieldnames != table_headers:
            raise ValueError(f'{path} columns {reader.fieldnames} do not match {table_headers}')

        rows = []
        for row in reader:
            rows.append({
                'm': int(row['m']),
                'n': int(row['n']),
                'seed': int(row['seed']),
                'method': row['method'],
                'gamma': float(row['gamma']),
                'corrector': row['corrector'],
                'iter': int(row['iter']),
                'time': float(row['time']),
                'cpu': float(row['cpu']),
                'error': float(row['error']),
                'converged': row['converged'] == '1',
                'status': row['status']
            })
        return rows
