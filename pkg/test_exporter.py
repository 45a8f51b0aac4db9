import math

import numpy as np
import pytest

from config import VERSION
from exporter import format_value, plot_curves, plot_lines, read_csv, read_json, write_csv, write_json


@pytest.mark.parametrize("value, text", [
    (None, ''),
    (True, 'true'),
    (np.bool_(False), 'false'),
    (3, '3'),
    (np.int64(-2), '-2'),
    (0.5, '0.5'),
    (0.1, '0.10000000000000001'),
    (math.nan, 'nan'),
    (-math.inf, '-inf'),
    ('good', 'good'),
])
def test_format_value(value, text):
    assert format_value(value) == text


def test_tables_carry_version_and_configuration(tmp_path):
    path = write_csv(tmp_path / 'nested' / 'table.csv', ['k', 'ratio'], [[1, 0.25], [2, None]],
                     {'b': 1e-4, 'eps': (1e-2, 1e-3)})
    table = read_csv(path)
    assert table['version'] == VERSION
    assert table['config'] == {'b': 1e-4, 'eps': [1e-2, 1e-3]}
    assert table['header'] == ['k', 'ratio']
    assert table['rows'] == [['1', '0.25'], ['2', '']]


def test_json_report_payload(tmp_path):
    path = write_json(tmp_path / 'report.json', {'point': np.array([0.5, 0.0]), 'ok': np.bool_(True)}, {'a': 2.0})
    payload = read_json(path)
    assert payload['version'] == VERSION
    assert payload['config'] == {'a': 2.0}
    assert payload['data'] == {'point': [0.5, 0.0], 'ok': True}


def test_figures_are_reproducible(tmp_path):
    series = [{'x': [1, 2, 3], 'y': [1.0, 0.5, 0.25], 'label': 'survival'}]
    first = plot_lines(tmp_path / 'a.svg', series, 't', 'mass', config={'seed': 1}, logy=True)
    second = plot_lines(tmp_path / 'b.svg', series, 't', 'mass', config={'seed': 1}, logy=True)
    assert first.read_bytes() == second.read_bytes()
    assert f"version={VERSION}" in first.read_text(encoding='utf-8')


def test_curve_figure(tmp_path):
    path = plot_curves(tmp_path / 'curves.svg', [{'xy': [[0, 0], [1, 1]], 'label': 'diagonal'}],
                       points=[{'xy': [0.5, 0.5], 'label': 'mid'}])
    assert path.read_text(encoding='utf-8').lstrip().startswith('<?xml')
