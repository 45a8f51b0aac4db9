"""
Configuration Management for the Henon-like Bifurcation Toolkit
"""
import os
import math
from pathlib import Path

VERSION = '0.1.0'

# Base directory
BASE_DIR = Path(__file__).parent

# Directory structure
DIRS = {
    'outputs': Path(os.getenv('HENON_OUTPUT_DIR', BASE_DIR / 'outputs')),
    'logs': BASE_DIR / 'logs',
}

# Create directories if they don't exist
for dir_path in DIRS.values():
    dir_path.mkdir(parents=True, exist_ok=True)

# Family defaults and working window
FAMILY_DEFAULTS = {
    'a': 2.0,
    'b': 1e-4,
    'orientation': 'reversing',  # 'reversing' (det -b) or 'preserving' (det +b)
    'a_window': (1.3, 2.6),
    'b_max': 1e-2,
}

# Constructive constants, chosen in this order: alpha, M, delta, then b
CONSTANTS_DEFAULTS = {
    'alpha': 0.01,
    'M': 30,
    'delta': 0.05,
    'lambda0': 0.6,  # must stay below log 2
}

# Numerical tolerances shared by all modules
NUMERICS = {
    'overflow_bound': 1e8,
    'newton_max_steps': 50,
    'newton_tol': 1e-14,
    'singular_gap': 1e-10,
    'manifold_seed': 1e-7,
    'manifold_spacing': 1e-3,
    'manifold_turning': 0.05,
    'manifold_min_spacing': 1e-12,
    'manifold_vertex_cap': 400_000,
    'manifold_max_passes': 60,
    'working_box': 2.0,
    'growth_box': 3.0,
    'snap_tol': 1e-9,
    'corner_tolerance': 0.5,
    'stable_grid_points': 201,
    'stable_bisection_steps': 55,
    'stable_escape_steps': 60,
    'leaf_points': 129,
    'leaf_max_order': 12,
    'leaf_converged': 1e-12,
    'tangency_tol': 1e-12,
    'tangency_separation': 1e-8,
    'critical_xtol': 1e-14,
    'critical_residual': 1e-10,
    'critical_gap_floor': 1e-13,
    'slice_cap': 1_000_000,
    'region_columns': 17,
}

# Bifurcation location and density sweep
SWEEP_CONFIG = {
    'a_bracket': (1.8, 2.2),
    'a_star_tol': 1e-10,
    'a_star_star_tol': 1e-6,
    'box_exit_offset': 5e-3,
    'escape_threshold': 0.99,
    'escape_horizon': 10_000,
    'escape_grid': 64,
    'eps_ladder': (1e-2, 1e-3, 1e-4),
    'samples_per_eps': 200,
    'n_max': 5,
    'jobs': int(os.getenv('HENON_JOBS', 1)),
}

# Escape statistics
ESCAPE_CONFIG = {
    'grid_n': 512,
    'T': 10_000,
    'depth': 12,
    'return_levels': 6,
    'k0': 1,
    'k_max': 3,
    'samples': 10_000,
    'omega_samples': 1000,
    'starved_floor': 30,
    'recurrence_horizon': 1000,
    'max_remaining_mass': 0.5,
}

# Export settings
EXPORT_CONFIG = {
    'significant_digits': 17,
    'svg_hashsalt': 'henon-toolkit',
    'figure_size': (8, 6),
}

# Logging configuration
LOG_CONFIG = {
    'log_file': DIRS['logs'] / 'toolkit.log',
    'max_log_size': 10 * 1024 * 1024,  # 10MB
    'backup_count': 5,
    'log_level': os.getenv('HENON_LOG_LEVEL', 'INFO').upper()
}

# Run configuration: every field a key=value file or a flag may set
RUN_DEFAULTS = {
    'a': FAMILY_DEFAULTS['a'],
    'b': FAMILY_DEFAULTS['b'],
    'orientation': FAMILY_DEFAULTS['orientation'],
    'alpha': CONSTANTS_DEFAULTS['alpha'],
    'M': CONSTANTS_DEFAULTS['M'],
    'delta': CONSTANTS_DEFAULTS['delta'],
    'lambda0': CONSTANTS_DEFAULTS['lambda0'],
    'seed': 12345,
    'jobs': SWEEP_CONFIG['jobs'],
    'output_dir': str(DIRS['outputs']),
    'arc_budget': 8.0,
    'grid_n': ESCAPE_CONFIG['grid_n'],
    'T': ESCAPE_CONFIG['T'],
    'depth': ESCAPE_CONFIG['depth'],
    'k0': ESCAPE_CONFIG['k0'],
    'k_max': ESCAPE_CONFIG['k_max'],
    'samples': SWEEP_CONFIG['samples_per_eps'],
    'eps': SWEEP_CONFIG['eps_ladder'],
    'n_max': SWEEP_CONFIG['n_max'],
    'order': 5,
    'escape_grid': SWEEP_CONFIG['escape_grid'],
    'escape_horizon': SWEEP_CONFIG['escape_horizon'],
}


def _parse_float_tuple(text: str) -> tuple:
    return tuple(float(part) for part in text.split(',') if part.strip())


RUN_PARSERS = {
    'a': float,
    'b': float,
    'orientation': str,
    'alpha': float,
    'M': int,
    'delta': float,
    'lambda0': float,
    'seed': int,
    'jobs': int,
    'output_dir': str,
    'arc_budget': float,
    'grid_n': int,
    'T': int,
    'depth': int,
    'k0': int,
    'k_max': int,
    'samples': int,
    'eps': _parse_float_tuple,
    'n_max': int,
    'order': int,
    'escape_grid': int,
    'escape_horizon': int,
}


def load_config_file(path) -> dict:
    """
    Parse a flat key=value run-configuration file

    Args:
        path: Path to the configuration file

    Returns:
        Dictionary of parsed overrides (only the keys present in the file)
    """
    from logger import ConfigError

    path = Path(path)
    if not path.exists():
        raise ConfigError(f"{path}: configuration file not found")

    values = {}
    for lineno, raw in enumerate(path.read_text(encoding='utf-8').splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got '{raw.strip()}'")
        key, value = (part.strip() for part in line.split('=', 1))
        if key not in RUN_PARSERS:
            raise ConfigError(f"{path}:{lineno}: unknown field '{key}'")
        try:
            values[key] = RUN_PARSERS[key](value)
        except ValueError as e:
            raise ConfigError(f"{path}:{lineno}: field '{key}' has invalid value '{value}' ({e})") from e
    return values


def resolve_run_config(config_file=None, overrides: dict = None) -> dict:
    """
    Merge defaults, file values and flag overrides (flags win)

    Args:
        config_file: Optional path to a key=value file
        overrides: Values given on the command line; None entries are ignored

    Returns:
        Fully resolved and validated run configuration
    """
    cfg = dict(RUN_DEFAULTS)
    if config_file:
        cfg.update(load_config_file(config_file))
    for key, value in (overrides or {}).items():
        if value is not None:
            cfg[key] = value
    validate_run_config(cfg)
    return cfg


def validate_run_config(cfg: dict) -> bool:
    """Check the ordering and smallness constraints of a run configuration"""
    from logger import ConfigError

    lo, hi = FAMILY_DEFAULTS['a_window']
    checks = [
        ('a', lo <= cfg['a'] <= hi, f"must lie in [{lo}, {hi}]"),
        ('b', 0.0 <= cfg['b'] <= FAMILY_DEFAULTS['b_max'], f"must lie in [0, {FAMILY_DEFAULTS['b_max']}]"),
        ('orientation', cfg['orientation'] in ('reversing', 'preserving'), "must be 'reversing' or 'preserving'"),
        ('alpha', 0.0 < cfg['alpha'] < 0.1, "must lie in (0, 0.1)"),
        ('M', cfg['M'] >= 1, "must be a positive integer"),
        ('delta', 0.0 < cfg['delta'] < 0.5, "must lie in (0, 0.5)"),
        ('lambda0', 0.0 < cfg['lambda0'] < math.log(2), "must lie in (0, log 2)"),
        ('jobs', cfg['jobs'] >= 1, "must be at least 1"),
        ('grid_n', cfg['grid_n'] >= 2, "must be at least 2"),
        ('T', cfg['T'] >= 0, "must be non-negative"),
        ('depth', cfg['depth'] >= 0, "must be non-negative"),
        ('k0', cfg['k0'] >= 0, "must be non-negative"),
        ('k_max', cfg['k_max'] >= 0, "must be non-negative"),
        ('samples', cfg['samples'] >= 1, "must be at least 1"),
        ('n_max', cfg['n_max'] >= 1, "must be at least 1"),
        ('order', cfg['order'] >= 1, "must be at least 1"),
        ('arc_budget', cfg['arc_budget'] > 0, "must be positive"),
    ]
    for field, ok, message in checks:
        if not ok:
            raise ConfigError(f"config field '{field}' = {cfg[field]!r} {message}")

    eps = tuple(cfg['eps'])
    if not eps or any(e <= 0 for e in eps) or any(e2 >= e1 for e1, e2 in zip(eps, eps[1:])):
        raise ConfigError(f"config field 'eps' = {eps!r} must be a strictly decreasing list of positive values")
    return True


def get_output_filename(command: str, tag: str, extension: str) -> str:
    """
    Generate standardized output filename

    Args:
        command: Command name (e.g., 'escape-grid')
        tag: Parameter tag of the run
        extension: File extension without the dot

    Returns:
        Formatted filename
    """
    return f"{command}_{tag}.{extension}"


def validate_config():
    """Validate the default tables and directory layout"""
    from logger import ConfigError

    for name, path in DIRS.items():
        if not path.is_dir():
            raise ConfigError(f"Directory '{name}' is missing: {path}")

    if not CONSTANTS_DEFAULTS['lambda0'] < math.log(2):
        raise ConfigError("lambda0 must be below log 2")

    if LOG_CONFIG['log_level'] not in ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL'):
        raise ConfigError(f"Unknown log level: {LOG_CONFIG['log_level']}")

    validate_run_config(RUN_DEFAULTS)
    return True


if __name__ == '__main__':
    print("Configuration loaded successfully!")
    print(f"Base directory: {BASE_DIR}")
    print(f"Directories created: {list(DIRS.keys())}")
    try:
        validate_config()
        print("✓ Default configuration is valid")
    except Exception as e:
        print(f"✗ Configuration error: {e}")
