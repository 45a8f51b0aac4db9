import pytest

from config import RUN_DEFAULTS, load_config_file, resolve_run_config, validate_run_config
from logger import ConfigError, MissingPrerequisite, NumericalError, PreconditionError, ToolkitError, logger


def write(tmp_path, text):
    path = tmp_path / 'run.cfg'
    path.write_text(text, encoding='utf-8')
    return path


def test_config_file_is_parsed_by_field(tmp_path):
    path = write(tmp_path, "# sweep\na = 1.95\nb=1e-4   # small\neps = 1e-2, 1e-3\njobs = 4\n\n")
    assert load_config_file(path) == {'a': 1.95, 'b': 1e-4, 'eps': (1e-2, 1e-3), 'jobs': 4}


@pytest.mark.parametrize("text, where", [
    ("a 1.9\n", ":1:"),
    ("a = 1.9\ncolour = red\n", ":2: unknown field 'colour'"),
    ("M = many\n", ":1: field 'M'"),
])
def test_config_file_errors_name_the_line(tmp_path, text, where):
    with pytest.raises(ConfigError, match=where):
        load_config_file(write(tmp_path, text))


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config_file(tmp_path / 'absent.cfg')


def test_flags_override_the_file(tmp_path):
    path = write(tmp_path, "a = 1.9\nseed = 7\n")
    cfg = resolve_run_config(path, {'a': 1.95, 'seed': None})
    assert cfg['a'] == 1.95
    assert cfg['seed'] == 7
    assert cfg['delta'] == RUN_DEFAULTS['delta']


@pytest.mark.parametrize("field, value", [
    ('b', 0.5),
    ('a', 3.0),
    ('orientation', 'sideways'),
    ('lambda0', 0.7),
    ('eps', (1e-3, 1e-2)),
    ('eps', ()),
    ('n_max', 0),
])
def test_invalid_run_configuration(field, value):
    cfg = dict(RUN_DEFAULTS, **{field: value})
    with pytest.raises(ConfigError, match=field):
        validate_run_config(cfg)


def test_exit_codes():
    assert ToolkitError.exit_code == 1
    assert ConfigError.exit_code == 2
    assert MissingPrerequisite.exit_code == 3
    assert PreconditionError.exit_code == 4
    assert issubclass(PreconditionError, NumericalError)


def test_run_report(tmp_path):
    path = logger.create_run_report('test', 'success', {'command': 'check', 'verdict': 'pass'})
    text = path.read_text(encoding='utf-8')
    assert 'Status: success' in text
    assert 'verdict: pass' in text
    path.unlink()
