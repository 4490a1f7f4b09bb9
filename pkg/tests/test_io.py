from csv import DictReader
import json

import numpy as np
from numpy.testing import assert_array_equal
import pytest

from proxframework.diagnostics import ContractionReport, GapPoint
from proxframework.io.csv import (export_contraction, export_distance_series, export_f_series, export_gap_series,
                                  export_table, export_trace, read_table, table_headers, trace_headers)
from proxframework.io.json import (InstanceParseException, config_hash, export_report, instance_to_dict,
                                   load_instance, save_instance, write_manifest)
from proxframework.qcqp.instance import LinearInstance, generate_instance
from proxframework.qcqp.problem import qcqp_problem
from proxframework.solver.pc import PcConfig, run_pc
from proxframework.solver.ppa import RelaxedPpaConfig, run_relaxed_ppa
from proxframework.util.console import Color, format_medians


def read_rows(path):
    with open(path, newline='') as fileobj:
        reader = DictReader(fileobj)
        return reader.fieldnames, list(reader)


def table_row(m, seed, method, status='converged'):
    return {'m': m, 'n': 3, 'seed': seed, 'method': method, 'gamma': 1.0, 'corrector': '', 'iter': 10,
            'time': 0.5, 'cpu': 0.01, 'error': 1e-11, 'converged': int(status == 'converged'), 'status': status}


def test_export_trace(circle, tmp_path):
    _, trace = run_pc(qcqp_problem(circle), PcConfig(max_iters=30))
    path = export_trace(trace, str(tmp_path / 'nested' / 'trace.csv'))

    headers, rows = read_rows(path)
    assert headers == trace_headers
    assert len(rows) == trace.iterations
    assert float(rows[-1]['f_value']) == trace.records[-1].f_value
    assert float(rows[0]['beta_or_gamma']) == trace.records[0].params.beta
    assert all(row['g_pd'] == '1' for row in rows)


def test_export_trace_blank_beta_star_for_ppa(circle, tmp_path):
    _, trace = run_relaxed_ppa(qcqp_problem(circle), RelaxedPpaConfig(max_iters=5))
    _, rows = read_rows(export_trace(trace, str(tmp_path / 'trace.csv')))
    assert all(row['beta_star'] == '' for row in rows)
    assert all(row['g_pd'] == '' for row in rows)
    assert all(float(row['beta_or_gamma']) == 1.0 for row in rows)


def test_table_sorted_and_read_back(tmp_path):
    rows = [table_row(2, 1, 'pc'), table_row(1, 1, 'ppa'), table_row(1, 0, 'rppa', status='max_iters')]
    path = export_table(rows, str(tmp_path / 'table.csv'))

    back = read_table(path)
    assert [(i['m'], i['seed']) for i in back] == [(1, 0), (1, 1), (2, 1)]
    assert back[0]['converged'] is False
    assert back[1]['error'] == 1e-11


def test_read_table_rejects_other_csv(tmp_path):
    path = tmp_path / 'other.csv'
    path.write_text('a,b\n1,2\n')
    with pytest.raises(ValueError):
        read_table(str(path))


def test_f_series(circle, tmp_path):
    _, trace = run_relaxed_ppa(qcqp_problem(circle), RelaxedPpaConfig(max_iters=10))
    headers, rows = read_rows(export_f_series(trace, str(tmp_path / 'f.csv')))
    assert headers == ['k', 'f_value']
    assert [int(i['k']) for i in rows] == list(range(trace.iterations))


def test_distance_series_needs_iterates(circle, tmp_path):
    _, trace = run_relaxed_ppa(qcqp_problem(circle), RelaxedPpaConfig(max_iters=10))
    with pytest.raises(ValueError):
        export_distance_series(trace, np.zeros(2), str(tmp_path / 'distance.csv'))


def test_distance_series(circle, tmp_path):
    _, trace = run_relaxed_ppa(qcqp_problem(circle), RelaxedPpaConfig(max_iters=10, keep_iterates=True))
    x_star = np.array([3.0, 1.0]) / np.sqrt(10)
    _, rows = read_rows(export_distance_series(trace, x_star, str(tmp_path / 'distance.csv')))
    assert float(rows[-1]['distance']) == pytest.approx(np.linalg.norm(trace.records[-1].x_next - x_star))


def test_gap_series_blank_bound(tmp_path):
    points = [GapPoint(t=0, gap=1.0, bound=2.0), GapPoint(t=1, gap=0.5, bound=None)]
    _, rows = read_rows(export_gap_series(points, str(tmp_path / 'gap.csv')))
    assert rows[0]['bound'] == '2.0'
    assert rows[1]['bound'] == ''


def test_contraction_csv(tmp_path):
    report = ContractionReport(method='ppa', pairs=[(1.0, 2.0), (0.5, 0.25)])
    _, rows = read_rows(export_contraction(report, str(tmp_path / 'contraction.csv')))
    assert [float(i['excess']) for i in rows] == [-1.0, 0.25]


def test_instance_file_round_trip(tmp_path):
    inst = generate_instance(m=2, n=3, seed=5)
    back = load_instance(save_instance(inst, str(tmp_path / 'instances' / 'inst.json')))
    assert back.seed == 5
    assert_array_equal(back.B_list, inst.B_list)
    assert_array_equal(back.c, inst.c)


def test_linear_instance_file(small_linear, tmp_path):
    back = load_instance(save_instance(small_linear, str(tmp_path / 'linear.json')))
    assert isinstance(back, LinearInstance)
    assert_array_equal(back.C, small_linear.C)


def test_load_malformed_json(tmp_path):
    path = tmp_path / 'bad.json'
    path.write_text('{"n": 2,\n "m": ')
    with pytest.raises(InstanceParseException) as info:
        load_instance(str(path))
    assert info.value.location.startswith('line 2')


def test_load_missing_field(tmp_path):
    data = instance_to_dict(generate_instance(m=1, n=2, seed=0))
    del data['c']
    path = tmp_path / 'missing.json'
    path.write_text(json.dumps(data))
    with pytest.raises(InstanceParseException) as info:
        load_instance(str(path))
    assert info.value.location == 'field "c"'


def test_load_inconsistent_shapes(tmp_path):
    data = instance_to_dict(generate_instance(m=1, n=2, seed=0))
    data['n'] = 3
    path = tmp_path / 'shapes.json'
    path.write_text(json.dumps(data))
    with pytest.raises(InstanceParseException) as info:
        load_instance(str(path))
    assert info.value.location == 'arrays'


def test_load_unknown_kind(tmp_path):
    path = tmp_path / 'kind.json'
    path.write_text(json.dumps({'kind': 'sdp'}))
    with pytest.raises(InstanceParseException):
        load_instance(str(path))


def test_export_report(tmp_path):
    report = ContractionReport(method='pc', pairs=[(1.0, 2.0)], sigma_min_eigenvalue=np.float64(0.5))
    with open(export_report(report, str(tmp_path / 'report.json'))) as fileobj:
        payload = json.load(fileobj)
    assert payload['passed'] is True
    assert payload['pairs'] == [[1.0, 2.0]]
    assert payload['sigma_min_eigenvalue'] == 0.5


def test_config_hash():
    assert config_hash({'tau': 1e-10, 'seeds': 20}) == config_hash({'seeds': 20, 'tau': 1e-10})
    assert config_hash({'tau': 1e-10}) != config_hash({'tau': 1e-8})


def test_manifest(tmp_path):
    path = write_manifest({'seeds': 1}, ['b.csv', 'a.csv'], str(tmp_path / 'manifest.json'))
    with open(path) as fileobj:
        manifest = json.load(fileobj)
    assert manifest['artifacts'] == ['a.csv', 'b.csv']
    assert manifest['config_sha256'] == config_hash({'seeds': 1})


def test_format_medians_highlights_unconverged():
    rows = [
        {'m': 1, 'n': 3, 'method': 'ppa', 'gamma': 1.0, 'iter': 12, 'error': 1e-11, 'converged': 1.0},
        {'m': 1, 'n': 3, 'method': 'pc', 'gamma': 1.0, 'iter': 50, 'error': 1e-3, 'converged': 0.0},
    ]
    lines = format_medians(rows).split('\n')
    assert len(lines) == 3
    assert lines[1].startswith(Color.RED)
    assert not lines[2].startswith(Color.RED)
