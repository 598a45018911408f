import numpy as np
import pytest
from hypothesis import given, strategies as st

from asitu.curve import (AffectiveState, CurveConfig, SamScalePair, StateThresholds, bin_state,
                         fit_affective_curve, from_sam_scale, sample_curve, state_summary, to_sam_scale,
                         write_curve_csv, write_state_json)

EXACT = CurveConfig(noise_variance=1e-9)


def test_line_reproduced():
    v = np.linspace(-1, 1, 9)
    c = fit_affective_curve(np.column_stack([v, 0.5 * v + 0.5]), EXACT)
    g = np.linspace(-1, 1, 201)
    np.testing.assert_allclose(c.mean(g), 0.5 * g + 0.5, atol=1e-6)


def test_repeated_point_degenerate():
    c = fit_affective_curve([(0.0, 0.5)] * 5)
    assert c.degenerate
    np.testing.assert_allclose(c.mean([-1, 0, 1]), 0.5)
    assert np.all(c.variance([-1, 0, 1]) == 0)


def test_parabola_symmetric():
    v = np.array([-1, -0.5, 0, 0.5, 1])
    c = fit_affective_curve(np.column_stack([v, v ** 2]), EXACT)
    assert c.mean(0.75)[0] == pytest.approx(c.mean(-0.75)[0], abs=1e-6)


def test_interpolates_training_points():
    v = np.array([-0.8, -0.2, 0.1, 0.7])
    a = np.array([0.3, 0.6, 0.2, 0.9])
    c = fit_affective_curve(np.column_stack([v, a]), EXACT)
    s = sample_curve(c, v)
    np.testing.assert_allclose([m for _, m, _ in s], a, atol=1e-6)


def test_variance_grows_outside():
    v = np.linspace(-0.3, 0.3, 7)
    c = fit_affective_curve(np.column_stack([v, np.sin(3 * v)]), CurveConfig(noise_variance=1e-4))
    assert c.variance(3.0)[0] >= c.variance(v).max()
    assert sample_curve(c, []) == []


def test_gradient_matches_finite_difference():
    rng = np.random.default_rng(0)
    v = rng.uniform(-1, 1, 30)
    c = fit_affective_curve(np.column_stack([v, 0.5 + 0.3 * np.sin(2 * v)]))
    g = np.linspace(-0.9, 0.9, 37)
    h = 1e-6
    fd = (c.mean(g + h) - c.mean(g - h)) / (2 * h)
    np.testing.assert_allclose(c.mean_gradient(g), fd, rtol=1e-4, atol=1e-6)


def test_optimize_improves_likelihood():
    rng = np.random.default_rng(1)
    v = rng.uniform(-1, 1, 40)
    pts = np.column_stack([v, 0.5 + 0.4 * v ** 2 + rng.normal(scale=0.02, size=40)])
    base = fit_affective_curve(pts)
    opt = fit_affective_curve(pts, CurveConfig(optimize=True))
    assert opt.log_marginal_likelihood() >= base.log_marginal_likelihood()


def test_parabola_sanity():
    rng = np.random.default_rng(2)
    v = rng.uniform(-1, 1, 300)
    a = np.clip(0.2 + 0.6 * np.abs(v) + rng.normal(scale=0.05, size=300), 0, 1)
    c = fit_affective_curve(np.column_stack([v, a]))
    assert c.mean(0.9)[0] > c.mean(0.0)[0] and c.mean(-0.9)[0] > c.mean(0.0)[0]


@pytest.mark.parametrize("V,A,exp", [(0, 0.5, (3, 3)), (-1, 0, (0, 0)), (1, 1, (6, 6))])
def test_sam_scale(V, A, exp):
    p = to_sam_scale(V, A)
    assert (p.v6, p.a6) == exp


@given(st.floats(-1, 1), st.floats(0, 1))
def test_sam_roundtrip(V, A):
    back = from_sam_scale(to_sam_scale(V, A))
    assert abs(back[0] - V) <= 1e-12 and abs(back[1] - A) <= 1e-12


def test_sam_out_of_range():
    with pytest.raises(ValueError):
        to_sam_scale(1.5, 0.5)


def test_bin_state_cases():
    assert bin_state(SamScalePair(5.0, 5.0)) is AffectiveState.HAPV
    assert bin_state(SamScalePair(3.0, 1.0)) is AffectiveState.LAUV
    assert bin_state(SamScalePair(0.0, 6.0)) is AffectiveState.HANV
    assert bin_state(SamScalePair(2.0, 4.0)) is AffectiveState.HAUV  # boundary goes up


@given(st.floats(0, 6), st.floats(0, 6))
def test_bin_state_partition(v6, a6):
    s = bin_state(SamScalePair(v6, a6))
    assert sum(s is x for x in AffectiveState) == 1


def test_thresholds_validated():
    with pytest.raises(ValueError):
        StateThresholds(arousal=(4, 2))


def test_writers(tmp_path):
    c = fit_affective_curve([(-0.5, 0.2), (0.5, 0.8), (0.0, 0.4)])
    write_curve_csv(tmp_path / "c.csv", sample_curve(c, np.linspace(-1, 1, 5)))
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "v,mean_a,var_a" and len(lines) == 6
    s = state_summary("x", [0, 1], [0.0, 1.0], [0.5, 1.0])
    assert s["state_histogram"]["MAUV"] == 1 and s["state_histogram"]["HAPV"] == 1
    write_state_json(tmp_path / "s.json", s)
    import json
    d = json.loads((tmp_path / "s.json").read_text())
    assert list(d) == ["situation_id", "points", "state_histogram"]
    assert d["points"][1] == {"t": 1.0, "v6": 6.0, "a6": 6.0, "state": "HAPV"}
