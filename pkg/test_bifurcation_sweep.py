import json

import numpy as np
import pytest

import bifurcation_sweep
from bifurcation_sweep import (
    BifurcationReport,
    DeformationTrack,
    Track,
    critical_parameter,
    density_sweep,
    exclusion_diagnostic,
    find_a_star,
    nonrecurrence_check,
    stratified_parameters,
    track_deformation,
)
from critical_structure import find_critical_approx, find_critical_point
from henon_family import FamilyParams
from logger import MultipleCrossings, NoBracket, NoCrossing, PreconditionError
from manifolds import Curve

CHEBYSHEV = FamilyParams(2.0, 0.0)


def horizontal(x0=-0.5, x1=0.5, n=101):
    xs = np.linspace(x0, x1, n)
    return Curve(np.stack([xs, np.zeros_like(xs)], axis=-1))


def line_track(a_values, xs):
    return Track(np.asarray(a_values), np.stack([xs, np.zeros_like(xs)], axis=-1))


def test_stratified_parameters_fill_their_strata():
    a = stratified_parameters(2.0, 0.01, 50, np.random.default_rng(7))
    i = np.arange(50)
    assert np.all(a <= 2.0 - 0.01 * i / 50)
    assert np.all(a >= 2.0 - 0.01 * (i + 1) / 50)
    assert np.all(np.diff(a) < 0.0)


@pytest.mark.parametrize("ladder", [[], [1e-3, 1e-2], [1e-2, 1e-2], [1e-2, -1e-3]])
def test_sweep_rejects_bad_ladders(ladder):
    with pytest.raises(PreconditionError):
        density_sweep(1e-4, ladder, 4, a_star=1.99)


def test_rungs_without_exclusion_are_trivially_good():
    result = density_sweep(1e-4, [1e-2, 1e-3], 5, n_max=0, a_star=1.99)
    assert result.good_fractions == [1.0, 1.0]
    assert all(rung['trivial'] for rung in result.rungs)
    assert len(result.rows()) == 10
    assert all(1.98 <= row['a'] <= 1.99 for row in result.rows())
    assert result.control is None
    assert 'escape fraction' in result.proxy


def test_sweep_resumes_from_checkpoint(tmp_path):
    checkpoint = tmp_path / 'sweep.jsonl'
    with open(checkpoint, 'w', encoding='utf-8') as f:
        for i, good in enumerate([True, False, True, True]):
            row = {'eps': 0.01, 'index': i, 'a': 1.99 - 0.001 * i, 'verdict': 'good' if good else 'excluded',
                   'first_fail_m': None if good else 7, 'escape_fraction': 1.0, 'good': good}
            f.write(json.dumps(row) + '\n')
    result = density_sweep(1e-4, [1e-2], 4, n_max=1, a_star=1.99, checkpoint=checkpoint)
    assert result.good_fractions == [0.75]
    assert [row['index'] for row in result.rows()] == [0, 1, 2, 3]


def test_crossing_of_two_tracks():
    a = np.linspace(0.85, 1.25, 5)
    first = line_track(a, a - 1.0)
    assert critical_parameter(first, line_track(a, np.zeros(5))) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(NoCrossing):
        critical_parameter(first, line_track(a, np.full(5, 5.0)))


def test_tracks_crossing_twice():
    a = np.linspace(0.75, 1.25, 6)
    bowl = line_track(a, (a - 1.0) ** 2 - 0.01)
    with pytest.raises(MultipleCrossings):
        critical_parameter(bowl, line_track(a, np.zeros(6)))


def test_deformation_track_speeds():
    a = np.linspace(1.0, 1.1, 5)
    track = DeformationTrack(a, np.stack([a, 2.0 * a], axis=-1), 2, 1.05, (0.9, 1.2))
    assert np.allclose(track.speeds, np.sqrt(5.0))
    assert track.within_window
    assert track.max_speed == pytest.approx(np.sqrt(5.0))


def test_critical_approximation_stays_at_the_fold():
    approx = find_critical_approx(CHEBYSHEV, horizontal(), 3)
    track = track_deformation(CHEBYSHEV, approx, (1.99, 2.0), samples=5)
    assert np.allclose(track.points, 0.0, atol=1e-10)
    assert not track.within_window


def test_critical_orbit_stays_away_from_the_fold():
    approx = find_critical_approx(CHEBYSHEV, horizontal(), 3)
    report = nonrecurrence_check(CHEBYSHEV, [approx])
    assert report['holds']
    assert report['min_abs_x'] == pytest.approx(1.0)


def test_exclusion_diagnostic_on_a_non_recurrent_orbit():
    zeta = find_critical_point(CHEBYSHEV, horizontal())
    verdict = exclusion_diagnostic(CHEBYSHEV, 1, capproxes=[zeta])
    assert verdict['verdict'] == 'good'
    assert verdict['first_failure'] is None
    assert verdict['horizon'] == 20


def test_a_star_needs_a_sign_change():
    with pytest.raises(NoBracket):
        find_a_star(1e-4, bracket=(1.8, 1.85))


def test_report_keeps_the_hyperbolic_end():
    report = BifurcationReport(1e-4, 'reversing', 1.99, (1.98, 2.0))
    assert report.a_star_hi == 2.0
    assert BifurcationReport.from_dict(report.to_dict()).a_star_bracket == (1.98, 2.0)


def worker_failing_on_second(task):
    if task['index'] == 1:
        raise RuntimeError('worker crashed')
    return {'eps': task['eps'], 'index': task['index'], 'a': task['a'], 'verdict': 'good',
            'first_fail_m': None, 'escape_fraction': 1.0, 'good': True}


@pytest.mark.parametrize("jobs", [1, 2])
def test_failed_samples_stay_in_the_rung(monkeypatch, tmp_path, jobs):
    monkeypatch.setattr(bifurcation_sweep, '_sweep_worker', worker_failing_on_second)
    checkpoint = tmp_path / 'sweep.jsonl'
    result = density_sweep(1e-4, [1e-2], 4, n_max=1, a_star=1.99, jobs=jobs, checkpoint=checkpoint)
    rows = result.rows()
    assert [row['index'] for row in rows] == [0, 1, 2, 3]
    assert rows[1]['verdict'] == 'error' and not rows[1]['good']
    assert result.good_fractions == [0.75]
    assert result.rungs[0]['failures'] == 1
    saved = [json.loads(line)['index'] for line in checkpoint.read_text(encoding='utf-8').splitlines()]
    assert sorted(saved) == [0, 2, 3]
