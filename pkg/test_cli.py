import pytest

from exporter import read_csv, read_json
from main import ToolkitRunner, build_parser, main


def run(tmp_path, *args):
    return main(list(args) + ['--output-dir', str(tmp_path)])


def test_fixed_points_of_the_quadratic_map(tmp_path):
    assert run(tmp_path, 'fixed-points', '--a', '2', '--b', '0') == 0
    table = read_csv(tmp_path / 'fixed_points_reversing_b0_a2.csv')
    assert table['header'][:3] == ['label', 'x', 'y']
    xs = sorted(float(row[1]) for row in table['rows'])
    assert xs == pytest.approx([-1.0, 0.5], abs=1e-12)
    assert table['config']['b'] == 0.0


def test_degenerate_region_report(tmp_path):
    assert run(tmp_path, 'region', '--a', '2', '--b', '0') == 0
    data = read_json(tmp_path / 'region_reversing_b0_a2.json')['data']
    assert data['degenerate']
    assert data['interval'] == [-1.0, 1.0]
    assert not data['escapes']


def test_invariant_suite_passes_on_the_degenerate_family(tmp_path):
    assert run(tmp_path, 'check', '--a', '2', '--b', '0') == 0
    report = read_json(tmp_path / 'check_reversing_b0_a2.json')['data']
    assert report['verdict'] == 'pass'
    assert report['checks']['determinant']


def test_out_of_range_parameter_is_a_configuration_error(tmp_path):
    assert run(tmp_path, 'fixed-points', '--b', '0.5') == 2


def test_sweep_steps_need_a_located_a_star(tmp_path):
    assert run(tmp_path, 'bifurcation', 'find-astarstar', '--b', '1e-4') == 3
    assert not list(tmp_path.glob('a_star_*.json'))


def test_parser_nests_actions():
    args = build_parser().parse_args(['escape', 'grid', '--T', '5', '--eps', '1e-2,1e-3'])
    assert (args.command, args.action, args.T) == ('escape', 'grid', 5)
    assert args.eps == (1e-2, 1e-3)
    with pytest.raises(SystemExit):
        build_parser().parse_args(['escape'])


def test_runner_tags_outputs_by_parameters(tmp_path):
    from config import resolve_run_config

    cfg = resolve_run_config(overrides={'a': 1.99, 'b': 1e-4, 'output_dir': str(tmp_path)})
    runner = ToolkitRunner(cfg)
    assert runner.output_path('escape_grid', 'csv').name == 'escape_grid_reversing_b0.0001_a1.99.csv'
    assert runner.rng(1).uniform() == runner.rng(1).uniform()
