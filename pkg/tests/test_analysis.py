import csv

import numpy as np
import pytest

from qlorenz.analysis import (
    BifurcationDiagram,
    PeriodResult,
    PoincareSection,
    beta_grid,
    bifurcation_sweep,
    bounding_box_overlap,
    compare_to_oracle,
    detect_period,
    lobe_anchors,
    poincare_section,
    section_from_run,
    transitions,
)
from qlorenz.dynamics import LorenzParams, lorenz_rhs
from qlorenz.marching import Trajectory, run_trajectory


def synthetic(x, y, z, dt):
    return Trajectory(LorenzParams(), dt, "classical", np.column_stack([x, y, z]))


def test_sinusoid_crossings():
    dt = 1e-3
    t = np.arange(0, 20 * np.pi, dt)
    sec = poincare_section(synthetic(np.sin(t), np.cos(t), t, dt))
    expect = np.pi + 2 * np.pi * np.arange(10)
    assert len(sec) == 10
    assert np.allclose(sec.t, expect, atol=1e-6)
    assert np.allclose(sec.z, expect, atol=1e-6)


def test_no_crossings_is_empty():
    t = np.linspace(0, 1, 100)
    assert len(poincare_section(synthetic(1 + t, t, t, 0.01))) == 0
    assert len(poincare_section(synthetic([1.0], [0.0], [0.0], 0.01))) == 0


def test_lorenz_crossings_are_descending_and_on_plane(params):
    tr = run_trajectory((0.1, -1.1, 1.1), params, 1e-3, 40000)
    sec = poincare_section(tr, 10.0)
    assert len(sec) > 5
    x = tr.xyz[:, 0]
    for t, y, z in zip(sec.t, sec.y, sec.z):
        i = int(np.floor(t / tr.dt))
        f = t / tr.dt - i
        assert abs(x[i] + f * (x[i + 1] - x[i])) <= 1e-9
        assert lorenz_rhs([0.0, y, z], params)[0] < 0
        assert t >= 10.0


def test_detect_period_basics():
    assert detect_period(np.full(10, 3.0)).count == 1
    r = detect_period(np.array([1.0, 2.0, 1.01, 2.02, 1.0]))
    assert r.count == 2 and r.period == 2 and not r.chaotic
    with pytest.raises(ValueError):
        detect_period(np.array([]))
    with pytest.raises(ValueError):
        detect_period(np.ones(3), cluster_tol=0)
    chaos = detect_period(np.arange(40.0), chaos_threshold=32)
    assert chaos.chaotic and chaos.period is None and chaos.exceeds(100)


def test_anchored_clustering_splits_long_chains():
    # values 0.03 apart chain together under single linkage; anchoring splits them
    z = np.arange(0, 0.3, 0.03)
    assert detect_period(z, 0.05).count == 5


def make_diagram(counts):
    betas = 0.5 + 1e-3 * np.arange(len(counts))
    res = [PeriodResult(tuple(range(c)), c > 32) for c in counts]
    return BifurcationDiagram(betas, [np.zeros(1)] * len(counts), res, "classical", 1e-3, 10.0)


def test_transitions_need_persistence():
    d = make_diagram([1, 1, 2, 2, 4, 2, 2, 2, 4, 4, 4, 8, 8, 8])
    tr = transitions(d)
    assert tr == {1: pytest.approx(0.502), 2: pytest.approx(0.508), 4: pytest.approx(0.511)}
    assert transitions(d, persist=0)[2] == pytest.approx(0.504)
    assert transitions(make_diagram([1, 1, 1]))[1] is None


def test_beta_grid():
    g = beta_grid(0.54, 0.545, 5e-4)
    assert len(g) == 11 and g[-1] == 0.545
    with pytest.raises(ValueError):
        beta_grid(0.5, 0.4, 1e-3)
    with pytest.raises(ValueError):
        beta_grid(0.5, 0.6, 0)


def test_small_sweep_and_csv(tmp_path):
    d = bifurcation_sweep(LorenzParams(10, 28, 0.52), 0.52, 0.55, 0.03, dt=1e-3, T=100)
    assert [r.count for r in d.results] == [1, 2]
    path = tmp_path / "b.csv"
    d.write_csv(path)
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["beta", "z"]
    assert len(rows) == 1 + sum(len(z) for z in d.sections)
    d.write_periods_csv(tmp_path / "p.csv")


def test_parallel_sweep_keeps_order():
    base = LorenzParams(10, 28, 0.52)
    a = bifurcation_sweep(base, 0.52, 0.56, 0.02, dt=1e-3, T=60)
    b = bifurcation_sweep(base, 0.52, 0.56, 0.02, dt=1e-3, T=60, workers=2)
    assert np.array_equal(a.betas, b.betas)
    for za, zb in zip(a.sections, b.sections):
        assert np.array_equal(za, zb)


def test_bounding_box_overlap():
    a = np.array([[0, 0, 0], [2, 2, 2]], float)
    b = np.array([[1, 0, 0], [3, 2, 4]], float)
    assert np.allclose(bounding_box_overlap(a, b), [1 / 3, 1.0, 0.5])
    c = np.array([[5, 5, 5], [6, 6, 6]], float)
    assert np.allclose(bounding_box_overlap(a, c), 0.0)


def test_lobe_anchors_on_synthetic_rings():
    p = LorenzParams(10, 28, 0.58)
    c = np.sqrt(0.58 * 27)
    th = np.linspace(0, 2 * np.pi * 5, 5000)
    ring = np.column_stack([c + np.cos(th) / np.sqrt(2), c + np.cos(th) / np.sqrt(2), 27 + np.sin(th)])
    pts = np.vstack([ring, ring * [-1, -1, 1]])
    plus, minus = lobe_anchors(pts, p)
    for a in (plus, minus):
        assert a.distance < 1e-2 and a.rms_radius == pytest.approx(1.0, rel=1e-2)
        assert abs(a.winding) == pytest.approx(5.0, abs=0.01) and a.anchored
    off = lobe_anchors(ring + [0.0, 0.0, 5.0], p)[0]
    assert not off.anchored
    with pytest.raises(ValueError):
        lobe_anchors(pts, LorenzParams(10, 0.5, 1))


def test_compare_to_oracle_periodic_regime(params):
    tr = run_trajectory((0.1, -1.1, 1.1), params, 1e-3, 100000, "quantum-collapsed")
    rep = compare_to_oracle(tr)
    assert rep.pointwise_ok and rep.clusters_match
    assert rep.engine_period.count == 2
    assert np.all(rep.box_overlap > 0.99)


def test_compare_to_oracle_empty(params):
    tr = run_trajectory((0.1, -1.1, 1.1), params, 1e-3, 0)
    assert compare_to_oracle(tr).empty


def test_section_from_run_counts():
    sec = section_from_run((0.1, -1.1, 1.1), LorenzParams(10, 28, 0.52), 1e-3, 150)
    assert isinstance(sec, PoincareSection) and len(sec) > 15
