"""
Main Command-Line Front End
Orchestrates the toolkit: fixed points, manifolds, R0, leaves, critical
structure, orbit decomposition, bifurcation location and escape statistics
"""
import math
import time
import uuid
from datetime import datetime
from pathlib import Path
from typing import List

import numpy as np

from config import DIRS, RUN_PARSERS, get_output_filename, resolve_run_config, validate_config
from exporter import plot_curves, plot_lines, read_json, write_csv, write_json
from henon_family import FamilyParams, Constants, apply, apply_modified, jacobian
from logger import (
    logger,
    ComponentResolutionLost,
    MissingPrerequisite,
    NumericalError,
    ToolkitError,
)
from manifolds import build_R0, find_fixed_points, grow_unstable_manifold, local_stable_graph, stable_parabola


class ToolkitRunner:
    """Resolves one run configuration and executes commands against it"""

    def __init__(self, cfg: dict):
        validate_config()
        self.cfg = cfg
        self.params = FamilyParams(cfg['a'], cfg['b'], cfg['orientation'])
        self.constants = Constants(alpha=cfg['alpha'], M=cfg['M'], delta=cfg['delta'], lambda0=cfg['lambda0'])
        self.out_dir = Path(cfg['output_dir'])
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.tag = f"{cfg['orientation']}_b{cfg['b']:g}_a{cfg['a']:.12g}"
        self._region = None
        logger.debug(f"runner ready: {self.tag}, output to {self.out_dir}")

    def generate_run_id(self) -> str:
        """Generate unique run identifier"""
        return f"{datetime.now().strftime('%Y%m%d_%H%M%S')}_{uuid.uuid4().hex[:8]}"

    def output_path(self, command: str, extension: str) -> Path:
        return self.out_dir / get_output_filename(command, self.tag, extension)

    def rng(self, stream: int = 0) -> np.random.Generator:
        return np.random.default_rng([self.cfg['seed'], stream])

    def region(self):
        if self._region is None:
            self._region = build_R0(self.params, self.cfg['arc_budget'])
        return self._region

    def run(self, command: str, action: str = None) -> dict:
        """
        Execute one command with banners, a run report and failure mapping

        Returns:
            Dictionary with run results
        """
        run_id = self.generate_run_id()
        start_time = time.time()
        name = f"{command} {action}" if action else command
        logger.log_run_start(name, self.cfg)
        logger.info(f"Run ID: {run_id}")

        handler = getattr(self, f"cmd_{command.replace('-', '_')}")
        try:
            outputs, summary = handler(action) if action else handler()
            elapsed = time.time() - start_time
            results = {
                'run_id': run_id,
                'status': 'success',
                'command': name,
                'elapsed': f"{elapsed:.2f}s",
                'outputs': [str(p) for p in outputs],
                'summary': summary,
            }
            logger.log_run_complete(outputs)
            results['report_file'] = str(logger.create_run_report(run_id, 'success', results))
            return results
        except ToolkitError as e:
            logger.log_run_error(e, name)
            logger.create_run_report(run_id, 'failed', {
                'command': name, 'error': str(e), 'error_type': type(e).__name__,
                'exit_code': e.exit_code, 'elapsed': f"{time.time() - start_time:.2f}s",
            })
            raise
        except Exception as e:
            logger.log_run_error(e, name)
            logger.create_run_report(run_id, 'failed', {
                'command': name, 'error': str(e), 'error_type': type(e).__name__,
            })
            raise ToolkitError(f"{name} failed: {e}") from e

    # ------------------------------------------------------------------
    # Geometry
    # ------------------------------------------------------------------

    def cmd_fixed_points(self):
        P, Q = find_fixed_points(self.params)
        rows = []
        for s in (P, Q):
            residual = float(np.hypot(*(apply(self.params, s.location) - s.location)))
            rows.append([s.label, s.location[0], s.location[1], s.eigenvalues[0], s.eigenvalues[1],
                         s.eigenvectors[1][0], s.eigenvectors[1][1], residual])
            logger.info(f"{s.label}: ({s.location[0]:.15f}, {s.location[1]:.15f}), "
                        f"eigenvalues {s.eigenvalues[0]:.6g} / {s.eigenvalues[1]:.6g}")
        summary = {'saddles': len(rows)}
        if self.params.is_degenerate:
            a = self.params.a
            summary['oracle'] = sorted([(-1.0 + math.sqrt(1.0 + 4.0 * a)) / (2.0 * a),
                                        (-1.0 - math.sqrt(1.0 + 4.0 * a)) / (2.0 * a)])
        path = write_csv(self.output_path('fixed_points', 'csv'),
                         ['label', 'x', 'y', 'stable_eigenvalue', 'unstable_eigenvalue', 'unstable_x',
                          'unstable_y', 'residual'], rows, self.cfg)
        return [path], summary

    def cmd_manifold(self):
        P, Q = find_fixed_points(self.params)
        outputs, curves = [], []
        rows = []
        for saddle in (P, Q):
            manifold = grow_unstable_manifold(self.params, saddle, self.cfg['arc_budget'])
            rows += [[saddle.label, 'unstable', x, y] for x, y in manifold.vertices]
            curves.append({'xy': manifold.vertices, 'label': f"unstable {saddle.label}"})
        summary = {'vertices': len(rows)}
        if not self.params.is_degenerate:
            ys = np.linspace(-1.5 * self.params.sqrt_b, 1.5 * self.params.sqrt_b, 201)
            for label, spline in (('local_stable', local_stable_graph(self.params, Q)),
                                  ('parabola', stable_parabola(self.params, Q))):
                xs = spline(ys)
                rows += [['Q', label, x, y] for x, y in zip(xs, ys)]
                curves.append({'xy': np.stack([xs, ys], axis=-1), 'label': label, 'style': '--'})
        outputs.append(write_csv(self.output_path('manifold', 'csv'), ['saddle', 'kind', 'x', 'y'], rows, self.cfg))
        outputs.append(plot_curves(self.output_path('manifold', 'svg'), curves, 'Invariant manifolds', self.cfg))
        return outputs, summary

    def cmd_region(self):
        if self.params.is_degenerate:
            a = self.params.a
            data = {'degenerate': True, 'interval': [1.0 - a, 1.0], 'critical_point': 0.0, 'critical_value': 1.0,
                    'escapes': a > 2.0}
            return [write_json(self.output_path('region', 'json'), data, self.cfg)], data
        region = self.region()
        polygon = region.polygon()
        data = {'tip': list(region.tip), 'closure_gap': region.closure_gap, 'source': region.source.label,
                'parabola_crossings': region.parabola_crossings(), 'bounds': region.bounds()}
        outputs = [
            write_csv(self.output_path('region', 'csv'), ['x', 'y'], polygon, self.cfg),
            write_json(self.output_path('region', 'json'), data, self.cfg),
            plot_curves(self.output_path('region', 'svg'), [{'xy': polygon, 'label': 'R0'}], 'R0', self.cfg),
        ]
        return outputs, data

    def cmd_leaves(self):
        from stable_leaves import leaves_cross, limit_leaf

        region = self.region()
        bases = region.sample(self.cfg['order'], self.rng(1))
        bases[:, 1] = 0.0
        leaves = [limit_leaf(self.params, z, self.constants) for z in bases]
        rows, curves, reports = [], [], []
        for idx, leaf in enumerate(leaves):
            rows += [[idx, y, x] for y, x in zip(leaf.ys, leaf.xs)]
            curves.append({'xy': np.stack([leaf.xs, leaf.ys], axis=-1)})
            cert = leaf.record.get('certificate', {})
            reports.append({'base': list(leaf.base), 'order': leaf.order, 'converged': leaf.record.get('converged'),
                            'factor': cert.get('factor'), 'monotone': cert.get('monotone')})
        crossings = sum(1 for i in range(len(leaves)) for j in range(i + 1, len(leaves))
                        if leaves_cross(leaves[i], leaves[j]))
        summary = {'leaves': len(leaves), 'crossing_pairs': crossings}
        outputs = [
            write_csv(self.output_path('leaves', 'csv'), ['leaf', 'y', 'x'], rows, self.cfg),
            write_json(self.output_path('leaves', 'json'), {'leaves': reports, **summary}, self.cfg),
            plot_curves(self.output_path('leaves', 'svg'), curves, 'Limit stable leaves', self.cfg),
        ]
        return outputs, summary

    # ------------------------------------------------------------------
    # Critical structure and orbits
    # ------------------------------------------------------------------

    def _host(self):
        pieces = self.region().fold_segments(self.constants.delta)
        if not pieces:
            raise NumericalError("R0 boundary does not cross I(delta)")
        return pieces[0]

    def cmd_critical(self, action: str):
        from critical_structure import (build_critical_regions, check_good_behavior, check_nice,
                                        critical_partition, element_metrics, find_critical_approx,
                                        find_critical_point)

        if action == 'approx':
            approx = find_critical_approx(self.params, self._host(), self.cfg['order'])
            data = {'point': list(approx.point), 'order': approx.order, 'residual': approx.residual,
                    'expanding': approx.expanding, 'nice': check_nice(self.params, approx, self.constants)}
            return [write_json(self.output_path('critical_approx', 'json'), data, self.cfg)], data

        if action == 'point':
            cp = find_critical_point(self.params, self._host(), self.constants)
            behaviour = check_good_behavior(cp, constants=self.constants)
            data = {'point': list(cp.point), 'orders': cp.orders, 'gaps': cp.gaps, 'converged': cp.converged,
                    'tangency_count': cp.tangency_count,
                    'good': {'G1': behaviour.g1, 'G2': behaviour.g2, 'G3': behaviour.g3,
                             'horizon': behaviour.horizon, 'truncated': behaviour.truncated}}
            return [write_json(self.output_path('critical_point', 'json'), data, self.cfg)], data

        if action == 'regions':
            try:
                regions = build_critical_regions(self.params, self.cfg['k_max'], self.region(), self.constants)
                lost = None
            except ComponentResolutionLost as e:
                logger.warning(f"critical regions truncated: {e}")
                regions, lost = e.regions, str(e)
            rows = [[r.level, i, c.gap, c.length, c.s2_holds, *c.midpoint_offsets]
                    for r in regions for i, c in enumerate(r.components)]
            curves = [{'xy': c.upper.vertices} for r in regions for c in r.components]
            curves += [{'xy': c.lower.vertices, 'style': '--'} for r in regions for c in r.components]
            summary = {'levels': len(regions), 'components': len(rows), 'resolution_lost': lost}
            outputs = [
                write_csv(self.output_path('critical_regions', 'csv'),
                          ['level', 'component', 'gap', 'length', 's2_holds', 'upper_offset', 'lower_offset'],
                          rows, self.cfg),
                plot_curves(self.output_path('critical_regions', 'svg'), curves, 'Critical regions', self.cfg),
            ]
            return outputs, summary

        if action == 'partition':
            host = self._host()
            cp = find_critical_point(self.params, host, self.constants)
            elements = critical_partition(self.params, host, cp, self.constants)
            rows = []
            for e in elements:
                m = element_metrics(self.params, e)
                rows.append([e.k, e.side, e.slice_index, e.period, e.s_interval[0], e.s_interval[1],
                             m['image_length'], m['log_distortion']])
            path = write_csv(self.output_path('critical_partition', 'csv'),
                             ['k', 'side', 'slice', 'period', 's0', 's1', 'image_length', 'log_distortion'],
                             rows, self.cfg)
            return [path], {'elements': len(rows)}

        raise ToolkitError(f"unknown critical action '{action}'")

    def cmd_orbit(self, action: str):
        from binding import bound_budget_check, decompose_orbit, recovery_report

        region = self.region()
        z = region.sample(1, self.rng(2))[0]
        itinerary = decompose_orbit(self.params, z, self.cfg['T'], constants=self.constants, region=region)
        rows = [[r.time, r.zeta_index, r.k, r.position, r.p, r.q, r.distance, d]
                for r, d in zip(itinerary.records, itinerary.deep)]
        recovery = recovery_report(self.params, itinerary, self.constants)
        budget = bound_budget_check(itinerary, self.constants.lam)
        data = {'start': list(z), **itinerary.to_dict(), 'recovery': recovery['summary'],
                'budget_holds': all(budget)}
        outputs = [
            write_csv(self.output_path('orbit', 'csv'),
                      ['time', 'binding', 'k', 'position', 'p', 'q', 'distance', 'deep'], rows, self.cfg),
            write_json(self.output_path('orbit', 'json'), data, self.cfg),
        ]
        return outputs, {'returns': len(rows), 'budget_holds': data['budget_holds']}

    # ------------------------------------------------------------------
    # Bifurcation
    # ------------------------------------------------------------------

    def _a_star_path(self) -> Path:
        return self.out_dir / f"a_star_{self.cfg['orientation']}_b{self.cfg['b']:g}.json"

    def _a_star(self):
        from bifurcation_sweep import BifurcationReport, find_a_star

        path = self._a_star_path()
        if path.exists():
            return BifurcationReport.from_dict(read_json(path)['data'])
        if not self.cfg.get('auto'):
            raise MissingPrerequisite(f"a* is not located for b={self.cfg['b']}: run find-astar first "
                                      f"(or pass --auto)")
        report = find_a_star(self.cfg['b'], self.cfg['orientation'])
        write_json(path, report.to_dict(), self.cfg)
        return report

    def cmd_bifurcation(self, action: str):
        from bifurcation_sweep import (density_sweep, find_a_star, find_a_star_star, nonrecurrence_check)

        if action == 'find-astar':
            report = find_a_star(self.cfg['b'], self.cfg['orientation'])
            data = report.to_dict()
            params = self.params.with_a(report.a_star_hi)
            try:
                from binding import default_binding_points

                build_R0(params, self.cfg['arc_budget'])
                data['nonrecurrence'] = nonrecurrence_check(params, default_binding_points(params, self.constants))
            except NumericalError as e:
                logger.warning(f"non-recurrence check skipped: {e}")
            path = write_json(self._a_star_path(), data, self.cfg)
            return [path], {'a_star': report.a_star, 'bracket': list(report.a_star_bracket)}

        if action == 'find-astarstar':
            report = self._a_star()
            a_ss, bracket, consistent = find_a_star_star(self.cfg['b'], report.a_star, self.cfg['orientation'])
            report.a_star_star, report.a_star_star_bracket, report.box_exit_consistent = a_ss, bracket, consistent
            path = write_json(self._a_star_path(), report.to_dict(), self.cfg)
            return [path], {'a_star_star': a_ss, 'box_exit_consistent': consistent}

        if action == 'sweep':
            report = self._a_star()
            result = density_sweep(self.cfg['b'], self.cfg['eps'], self.cfg['samples'], n_max=self.cfg['n_max'],
                                   a_star=report.a_star, orientation=self.cfg['orientation'],
                                   constants=self.constants, jobs=self.cfg['jobs'], seed=self.cfg['seed'],
                                   checkpoint=self.output_path('sweep_checkpoint', 'jsonl'),
                                   escape_grid=self.cfg['escape_grid'], escape_horizon=self.cfg['escape_horizon'],
                                   control=bool(self.cfg.get('control')))
            rows = [[r['eps'], r['a'], r['verdict'], r['first_fail_m'], r['escape_fraction']] for r in result.rows()]
            summary = {'a_star': result.a_star, 'eps': result.eps_ladder, 'good_fractions': result.good_fractions,
                       'failures': [rung['failures'] for rung in result.rungs],
                       'proxy': result.proxy,
                       'control': result.control['hyperbolic_fraction'] if result.control else None}
            outputs = [
                write_csv(self.output_path('sweep', 'csv'), ['eps', 'a', 'verdict', 'first_fail_m', 'escape_fraction'],
                          rows, self.cfg),
                write_json(self.output_path('sweep', 'json'), summary, self.cfg),
                plot_lines(self.output_path('sweep', 'svg'),
                           [{'x': result.eps_ladder, 'y': result.good_fractions, 'style': 'o-'}],
                           'eps', 'good fraction', 'Good fraction below a*', self.cfg, logx=True),
            ]
            return outputs, summary

        raise ToolkitError(f"unknown bifurcation action '{action}'")

    # ------------------------------------------------------------------
    # Escape statistics
    # ------------------------------------------------------------------

    def _seed_curve(self):
        from manifolds import Curve

        delta = self.constants.delta
        if self.params.is_degenerate:
            xs = np.linspace(-2.5 * delta, 2.5 * delta, 65)
            return Curve(np.stack([xs, np.zeros_like(xs)], axis=-1))
        pieces = self.region().fold_segments(2.5 * delta)
        if not pieces:
            raise NumericalError("R0 boundary does not cross I(2 delta)")
        return pieces[0]

    def cmd_escape(self, action: str):
        import escape_stats as es

        if action == 'grid':
            result = es.grid_escape(self.params, self.cfg['grid_n'], self.cfg['T'], self.region(), progress=True)
            t = np.arange(len(result.survival))
            outputs = [
                write_csv(self.output_path('escape_grid', 'csv'), ['t', 'survival'], zip(t, result.survival), self.cfg),
                plot_lines(self.output_path('escape_grid', 'svg'), [{'x': t, 'y': np.maximum(result.survival, 1e-300)}],
                           't', 'surviving fraction', f"Survival in R0 (T={self.cfg['T']})", self.cfg, logy=True),
            ]
            return outputs, {'seeds': result.seeds, 'escape_fraction': result.escape_fraction, 'T': self.cfg['T']}

        if action == 'segment':
            if not self.params.is_degenerate:
                self.region()
            partition = es.segment_stopping_times(self.params, self._seed_curve(), self.cfg['depth'], self.constants)
            tail = partition.tail()
            fit = partition.fit_tail()
            data = {'elements': len(partition.elements), 'remaining_mass': partition.remaining_mass,
                    'slope': fit.slope, 'r_squared': fit.r_squared, 'n_range': fit.n_range,
                    'images_verified': partition.images_verified(self.params, self.constants.delta)}
            n = np.arange(len(tail))
            outputs = [
                write_csv(self.output_path('stopping_tail', 'csv'), ['n', 'mass'], zip(n, tail), self.cfg),
                write_json(self.output_path('stopping_tail', 'json'), data, self.cfg),
                plot_lines(self.output_path('stopping_tail', 'svg'), [{'x': n, 'y': np.maximum(tail, 1e-300)}],
                           'n', '|{S > n}|', 'Stopping-time tail', self.cfg, logy=True),
            ]
            return outputs, data

        if action == 'proportion':
            region = None if self.params.is_degenerate else self.region()
            report = es.leaf_intersection_proportion(self.params, self._seed_curve(), self.cfg['T'],
                                                     rng=self.rng(3), region=region)
            data = report._asdict()
            return [write_json(self.output_path('proportion', 'json'), data, self.cfg)], data

        if action == 'omega':
            from critical_structure import build_critical_regions

            try:
                regions = build_critical_regions(self.params, self.cfg['k_max'], self.region(), self.constants)
            except ComponentResolutionLost as e:
                logger.warning(f"close-return boxes limited to the resolved levels: {e}")
                regions = e.regions
            boxes = es.CloseReturnBoxes(regions, self.constants.delta)
            result = es.omega_ratio(self.params, self.cfg['k0'], self.cfg['samples'], boxes, T=self.cfg['T'],
                                    constants=self.constants, rng=self.rng(4), region=self.region())
            rows = [[r['k'], r['ratio'], r['ci_lo'], r['ci_hi'], r['pool'], r['starved']] for r in result['rows']]
            data = {k: v for k, v in result.items() if k != 'logs'}
            outputs = [
                write_csv(self.output_path('omega', 'csv'), ['k', 'ratio', 'ci_lo', 'ci_hi', 'pool', 'starved'],
                          rows, self.cfg),
                write_json(self.output_path('omega', 'json'), data, self.cfg),
            ]
            return outputs, {'decreasing': result['decreasing'], 'laws_hold': result['laws_hold']}

        if action == 'transitivity':
            region = None if self.params.is_degenerate else self.region()
            report = es.transitivity_witness(self.params, self.cfg['arc_budget'], region=region)
            data = {'applicable': report.applicable, 'count': report.count, 'tangential': report.tangential,
                    'min_angle': float(report.angles.min()) if report.count else None}
            outputs = [
                write_csv(self.output_path('transitivity', 'csv'), ['x', 'y', 'angle'],
                          [[p[0], p[1], a] for p, a in zip(report.points, report.angles)], self.cfg),
                write_json(self.output_path('transitivity', 'json'), data, self.cfg),
            ]
            return outputs, data

        raise ToolkitError(f"unknown escape action '{action}'")

    # ------------------------------------------------------------------
    # Invariant suite
    # ------------------------------------------------------------------

    def cmd_check(self):
        from binding import default_binding_points, log_dk_table
        from stable_leaves import leaves_cross, limit_leaf

        params, constants = self.params, self.constants
        checks = {}
        rng = self.rng(5)

        P, Q = find_fixed_points(params)
        checks['fixed_point_residual'] = max(float(np.hypot(*(apply(params, s.location) - s.location))) for s in (P, Q)) <= 1e-12

        pts = rng.uniform(-1.5, 1.5, (200, 2))
        if params.perturbation is None:
            dets = np.linalg.det(jacobian(params, pts))
            checks['determinant'] = bool(np.allclose(dets, -params.sigma * params.b, rtol=1e-12, atol=1e-15))

        if not params.is_degenerate:
            region = self.region()
            inside = region.sample(200, rng)
            image, _ = apply_modified(params, inside, region)
            checks['modified_matches_on_R0'] = bool(np.array_equal(image, apply(params, inside)))
            lo = region.s_of(0.0) - 0.5
            d1 = np.column_stack([rng.uniform(lo, float(region.s_of(0.0)) - 1e-3, 200),
                                  rng.uniform(-0.5, 0.5, 200) * params.sqrt_b])
            d1 = d1[region.in_D1(d1) & ~region.contains(d1)]
            image, _ = apply_modified(params, d1, region)
            checks['D1_invariant'] = bool(np.all(region.in_D1(image)))

            base = region.sample(2, rng)
            base[:, 1] = 0.0
            first, second = (limit_leaf(params, z, constants) for z in base)
            checks['leaves_disjoint'] = not leaves_cross(first, second)

            Xi = default_binding_points(params, constants, region)
            if Xi:
                top = min(10, len(Xi[0].wi.log_norms()) - 1)
                log_D = log_dk_table(Xi[0], constants.alpha, top)
                step = np.diff(log_D[1:])
                checks['dk_upper_ratio'] = bool(np.all(step <= -3.0 * constants.alpha + 1e-12))

        verdict = all(checks.values())
        data = {'checks': checks, 'verdict': 'pass' if verdict else 'fail'}
        path = write_json(self.output_path('check', 'json'), data, self.cfg)
        if not verdict:
            failed = [k for k, ok in checks.items() if not ok]
            raise NumericalError(f"invariant checks failed: {', '.join(failed)} (see {path})")
        return [path], data


COMMANDS = {
    'fixed-points': None,
    'manifold': None,
    'region': None,
    'leaves': None,
    'critical': ('approx', 'point', 'regions', 'partition'),
    'orbit': ('decompose',),
    'bifurcation': ('find-astar', 'find-astarstar', 'sweep'),
    'escape': ('grid', 'segment', 'proportion', 'omega', 'transitivity'),
    'check': None,
}


def build_parser():
    import argparse

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='key = value run-configuration file')
    common.add_argument('--a', type=float, help='family parameter a')
    common.add_argument('--b', type=float, help='family parameter b (0 selects the degenerate family)')
    common.add_argument('--orientation', choices=['reversing', 'preserving'], help='orientation of the family')
    common.add_argument('--alpha', type=float, help='constant alpha')
    common.add_argument('--M', type=int, help='constant M')
    common.add_argument('--delta', type=float, help='half-width of the critical strip')
    common.add_argument('--lambda0', type=float, help='expansion exponent (below log 2)')
    common.add_argument('--seed', type=int, help='RNG seed')
    common.add_argument('--jobs', type=int, help='worker processes')
    common.add_argument('--output-dir', dest='output_dir', help='output directory')
    common.add_argument('--arc-budget', dest='arc_budget', type=float, help='manifold arclength budget')
    common.add_argument('--grid-n', dest='grid_n', type=int, help='grid size per axis')
    common.add_argument('--T', type=int, help='iteration horizon')
    common.add_argument('--depth', type=int, help='stopping-time depth')
    common.add_argument('--k0', type=int, help='close-return seed level')
    common.add_argument('--k-max', dest='k_max', type=int, help='highest critical-region level')
    common.add_argument('--samples', type=int, help='samples per rung / Monte Carlo samples')
    common.add_argument('--eps', type=RUN_PARSERS['eps'], help='comma-separated, strictly decreasing eps ladder')
    common.add_argument('--n-max', dest='n_max', type=int, help='highest order of the exclusion diagnostic')
    common.add_argument('--order', type=int, help='order of critical approximations / number of leaves')
    common.add_argument('--escape-grid', dest='escape_grid', type=int, help='grid size of the sweep escape test')
    common.add_argument('--escape-horizon', dest='escape_horizon', type=int, help='horizon of the sweep escape test')
    common.add_argument('--auto', action='store_true', default=None, help='locate a* when it is missing')
    common.add_argument('--control', action='store_true', default=None, help='add a control rung above a*')

    parser = argparse.ArgumentParser(
        description='Henon-like Map First Bifurcation Toolkit',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python main.py fixed-points --b 0
  python main.py bifurcation find-astar --b 1e-4
  python main.py bifurcation sweep --eps 1e-2,1e-3,1e-4 --samples 200 --jobs 8
  python main.py escape grid --a 2.05 --T 10000
  python main.py escape segment --depth 12
  python main.py escape omega --k0 1 --samples 100000
  python main.py check --config run.cfg

Exit codes: 0 ok, 2 configuration error, 3 missing prerequisite, 4 numerical failure
        """
    )
    sub = parser.add_subparsers(dest='command', required=True)
    for name, actions in COMMANDS.items():
        cmd = sub.add_parser(name, parents=[common] if actions is None else [])
        if actions is not None:
            nested = cmd.add_subparsers(dest='action', required=True)
            for action in actions:
                nested.add_parser(action, parents=[common])
    return parser


def main(argv: List[str] = None) -> int:
    """Main entry point for command-line usage"""
    parser = build_parser()
    args = parser.parse_args(argv)
    overrides = {k: v for k, v in vars(args).items() if k not in ('command', 'action', 'config')}
    extras = {k: overrides.pop(k) for k in ('auto', 'control')}

    # Print banner
    print("\n" + "=" * 80)
    print("HENON-LIKE BIFURCATION TOOLKIT")
    print("=" * 80 + "\n")

    try:
        cfg = resolve_run_config(args.config, overrides)
        cfg.update({k: bool(v) for k, v in extras.items()})
        runner = ToolkitRunner(cfg)
        results = runner.run(args.command, getattr(args, 'action', None))

        print("\n" + "=" * 80)
        print("RUN COMPLETED SUCCESSFULLY!")
        print("=" * 80)
        print(f"\nRun ID: {results['run_id']}")
        print(f"Elapsed: {results['elapsed']}")
        print(f"\nOutput Files ({len(results['outputs'])}):")
        for path in results['outputs']:
            print(f"  - {path}")
        for key, value in results['summary'].items():
            print(f"  {key}: {value}")
        print(f"\nReport: {results['report_file']}")
        print("\n" + "=" * 80 + "\n")

    except ToolkitError as e:
        print("\n" + "=" * 80)
        print("RUN FAILED!")
        print("=" * 80)
        print(f"\nError: {e}")
        print("\nCheck the log file for more details:")
        print(f"  {DIRS['logs'] / 'toolkit.log'}")
        print("\n" + "=" * 80 + "\n")
        return e.exit_code

    return 0


if __name__ == '__main__':
    exit(main())
