"""
Export of tables, reports and figures

Every file embeds the code version and the resolved run configuration.
"""
import csv
import json
import math
from pathlib import Path
from typing import Iterable, List, Sequence

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
import numpy as np

from config import VERSION, EXPORT_CONFIG
from logger import logger


def _config_text(config: dict) -> str:
    return json.dumps(config or {}, sort_keys=True, default=_jsonable)


def _jsonable(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (set, tuple)):
        return list(value)
    if isinstance(value, Path):
        return str(value)
    return str(value)


def format_value(value) -> str:
    """17 significant digits for reals, plain text otherwise; empty for None"""
    if value is None:
        return ''
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return 'nan'
        if math.isinf(v):
            return 'inf' if v > 0 else '-inf'
        return format(v, f".{EXPORT_CONFIG['significant_digits']}g")
    return str(value)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence], config: dict = None) -> Path:
    """
    Comma-separated table with a header row

    Two leading comment lines carry the version and the configuration.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, 'w', encoding='utf-8', newline='') as f:
        f.write(f"# version={VERSION}\n")
        f.write(f"# config={_config_text(config)}\n")
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(v) for v in row])
            count += 1
    logger.debug(f"wrote {count} rows to {path}")
    return path


def read_csv(path) -> dict:
    """Header, rows (as strings) and the embedded configuration of a written table"""
    path = Path(path)
    meta = {}
    with open(path, 'r', encoding='utf-8') as f:
        lines = f.read().splitlines()
    body = []
    for line in lines:
        if line.startswith('# version='):
            meta['version'] = line[len('# version='):]
        elif line.startswith('# config='):
            meta['config'] = json.loads(line[len('# config='):])
        else:
            body.append(line)
    table = list(csv.reader(body))
    return {'version': meta.get('version'), 'config': meta.get('config'),
            'header': table[0] if table else [], 'rows': table[1:]}


def write_json(path, data, config: dict = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {'version': VERSION, 'config': config or {}, 'data': data}
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(payload, f, indent=2, sort_keys=True, default=_jsonable)
        f.write('\n')
    logger.debug(f"wrote report {path}")
    return path


def read_json(path) -> dict:
    with open(Path(path), 'r', encoding='utf-8') as f:
        return json.load(f)


def _save_svg(fig, path: Path, config: dict) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with matplotlib.rc_context({'svg.hashsalt': EXPORT_CONFIG['svg_hashsalt']}):
        fig.savefig(path, format='svg',
                    metadata={'Date': None, 'Description': f"version={VERSION} config={_config_text(config)}"})
    plt.close(fig)
    logger.debug(f"wrote figure {path}")
    return path


def plot_lines(path, series: List[dict], xlabel: str, ylabel: str, title: str = '',
               config: dict = None, logy: bool = False, logx: bool = False) -> Path:
    """
    Line plot of one or more series

    Args:
        series: dicts with 'x', 'y' and optional 'label' and 'style'
    """
    fig, ax = plt.subplots(figsize=EXPORT_CONFIG['figure_size'])
    for s in series:
        ax.plot(s['x'], s['y'], s.get('style', '-'), label=s.get('label'))
    ax.set(xlabel=xlabel, ylabel=ylabel, title=title)
    if logy:
        ax.set_yscale('log')
    if logx:
        ax.set_xscale('log')
    if any(s.get('label') for s in series):
        ax.legend(loc='best')
    return _save_svg(fig, Path(path), config)


def plot_curves(path, curves: List[dict], title: str = '', config: dict = None, points: List[dict] = None) -> Path:
    """
    Planar curves (manifolds, region boundaries, leaves) and marked points

    Args:
        curves: dicts with 'xy' (m, 2) and optional 'label' and 'style'
        points: dicts with 'xy' (m, 2) and optional 'label' and 'marker'
    """
    fig, ax = plt.subplots(figsize=EXPORT_CONFIG['figure_size'])
    for c in curves:
        xy = np.asarray(c['xy'], dtype=float).reshape(-1, 2)
        ax.plot(xy[:, 0], xy[:, 1], c.get('style', '-'), lw=0.8, label=c.get('label'))
    for p in points or []:
        xy = np.asarray(p['xy'], dtype=float).reshape(-1, 2)
        ax.plot(xy[:, 0], xy[:, 1], p.get('marker', 'o'), ms=4, label=p.get('label'))
    ax.set(xlabel='x', ylabel='y', title=title)
    if any(c.get('label') for c in curves) or any(p.get('label') for p in points or []):
        ax.legend(loc='best')
    return _save_svg(fig, Path(path), config)
