import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rsma.channels import random_channels
from rsma.io import (curve_columns, read_csv, read_dat, read_manifest, read_plot_spec, write_curve_bundle,
                     write_region_bundle, load_config, REGION_COLUMNS)
from rsma.model import ChannelSet, ScenarioConfig
from rsma.presets import (THRESHOLD_SCHEDULES, UnknownPreset, preset, preset_names, schedule_for, weight_grid)
from rsma.sweep import (contains, convex_hull, dof_slope, hull_distance, polygon_area, rate_region,
                        region_polygon, wsr_curve)


# -- geometry -----------------------------------------------------------------------

def test_hull_single_point():
    h = convex_hull([[1.0, 2.0]])
    assert h.shape == (1, 2)
    assert polygon_area(h) == 0.0


def test_hull_collinear_keeps_endpoints():
    h = convex_hull([[0, 0], [1, 1], [2, 2], [0.5, 0.5]])
    assert {tuple(p) for p in h} == {(0.0, 0.0), (2.0, 2.0)}


def test_area_unit_square_and_region_polygon():
    sq = convex_hull([[0, 0], [1, 0], [1, 1], [0, 1], [0.5, 0.5]])
    assert polygon_area(sq) == pytest.approx(1.0)
    # a single rate pair spans the rectangle down to the axes
    assert polygon_area(region_polygon([[2.0, 3.0]])) == pytest.approx(6.0)


def test_containment_and_distance():
    big = region_polygon([[2.0, 0.0], [0.0, 2.0], [1.5, 1.5]])
    small = region_polygon([[1.0, 1.0]])
    assert contains(big, small)
    assert not contains(small, big)
    assert hull_distance(big, [1.0, 1.0]) == 0.0
    assert hull_distance(small, [2.0, 1.0]) == pytest.approx(1.0)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 10), st.floats(0, 10)), min_size=3, max_size=40))
def test_hull_is_convex_and_covers_points(pts):
    pts = np.array(pts)
    h = convex_hull(pts)
    if len(h) >= 3:
        e = np.roll(h, -1, axis=0) - h
        cross = e[:, 0] * np.roll(e[:, 1], -1) - e[:, 1] * np.roll(e[:, 0], -1)
        assert np.all(cross > 0)
        assert all(hull_distance(h, p) <= 1e-9 for p in pts)


# -- presets ------------------------------------------------------------------------

def test_weight_grid():
    g = weight_grid()
    assert len(g) == 43
    assert g[0] == 1e-3 and g[-1] == 1e3
    assert g[1] == pytest.approx(0.1) and g[21] == pytest.approx(1.0) and g[-2] == pytest.approx(10.0)
    assert np.allclose(np.diff(np.log10(g[1:-1])), 0.05)


def test_schedules():
    assert schedule_for("ten-user") == [0.01, 0.03, 0.05, 0.1, 0.1, 0.1, 0.1]
    assert schedule_for("four-user") == [0.03, 0.1, 0.2, 0.3, 0.4, 0.4, 0.4]
    assert schedule_for("siso", [10, 20]) == [0.01, 0.1]
    with pytest.raises(ValueError):
        schedule_for("siso", [12])
    assert all(len(v) == 7 for v in THRESHOLD_SCHEDULES.values())


def test_fig5_preset():
    p = preset("fig5")
    assert p.kind == "region" and len(p.variants) == 4
    _, cfg = p.variants[3]
    assert (cfg.Nt, cfg.K, cfg.snr_db) == (4, 2, 20.0)
    assert cfg.channel["gammas"] == [1.0]
    assert cfg.channel["thetas"][0] == pytest.approx(4 * math.pi / 9)


def test_three_user_preset():
    p = preset("fig9-threeuser")
    _, cfg = p.variants[0]
    assert cfg.weights == (0.2, 0.3, 0.5) and cfg.Nt == 4
    assert cfg.channel["gammas"] == [1.0, 0.3]
    assert p.schedule == "zero"
    over = preset("three-user-overloaded")
    assert over.variants[0][1].grouping == ((1,), (2, 3))


def test_unknown_preset_lists_available():
    with pytest.raises(UnknownPreset) as e:
        preset("nope")
    for n in preset_names():
        assert n in str(e.value)


# -- sweeps -------------------------------------------------------------------------

FAST = dict(tol=1e-4, restarts=1)


def test_single_user_curve_is_capacity():
    h = random_channels(2, [1.0], 3)
    cfg = ScenarioConfig(strategy="mulp", Nt=2, K=1, weights=(1.0,), thresholds=(0.0,), **FAST)
    snrs = [0.0, 10.0, 20.0]
    res = wsr_curve(cfg, "mulp", snrs, channels=[h])
    cap = [math.log2(1 + 10 ** (s / 10) * np.linalg.norm(h.H[0]) ** 2) for s in snrs]
    assert np.allclose(res.wsr(), cap, atol=1e-6)


def test_curve_rows_and_mean_over_feasible():
    chans = [random_channels(2, [1.0, 1.0], s) for s in range(2)]
    cfg = ScenarioConfig(strategy="mulp", Nt=2, K=2, **FAST)
    res = wsr_curve(cfg, "mulp", [10.0], channels=chans)
    per = [r for r in res.rows if r["realization"] >= 0]
    mean = res.mean_rows()
    assert len(per) == 2 and len(mean) == 1
    assert mean[0]["wsr"] == pytest.approx(np.mean([r["wsr"] for r in per]))
    assert mean[0]["realizations"] == 2 and mean[0]["feasible"] == 2
    assert set(curve_columns(2)) <= set(mean[0])


def test_region_rows_and_hull():
    cfg = ScenarioConfig(strategy="mulp", Nt=2, K=2, snr_db=10.0, **FAST)
    res = rate_region(cfg, "mulp", u2_grid=[0.1, 1.0, 10.0])
    assert len(res.rows) == 3 and set(REGION_COLUMNS) <= set(res.rows[0])
    assert res.area > 0
    for r in res.rows:
        assert hull_distance(res.hull, [r["R1"], r["R2"]]) <= 1e-9
        assert r["wsr"] == pytest.approx(r["R1"] + r["u2"] * r["R2"])
    # larger u2 favours user 2
    assert res.rows[0]["R2"] <= res.rows[-1]["R2"] + 1e-9


def test_results_independent_of_worker_count():
    chans = [random_channels(2, [1.0, 0.5], s) for s in range(3)]
    cfg = ScenarioConfig(strategy="rs", Nt=2, K=2, **FAST)
    a = wsr_curve(cfg, "rs", [10.0], channels=chans, workers=1)
    b = wsr_curve(cfg, "rs", [10.0], channels=chans, workers=2)
    assert a.rows == b.rows


def test_dof_slope_of_exact_line():
    snrs = [20.0, 25.0, 30.0]
    rates = [2 * math.log2(10 ** (s / 10)) + 1 for s in snrs]
    assert dof_slope(snrs, rates) == pytest.approx(2.0)


# -- bundles ------------------------------------------------------------------------

def _nan_eq(a, b):
    return a == b or (isinstance(a, float) and math.isnan(a) and math.isnan(b))


def test_region_bundle_round_trip(tmp_path):
    cfg = ScenarioConfig(strategy="mulp", Nt=2, K=2, snr_db=10.0, **FAST)
    res = {"mulp": rate_region(cfg, "mulp", u2_grid=[0.5, 2.0])}
    files = write_region_bundle(tmp_path, "r", cfg, res, figures=True)
    assert (tmp_path / files["figure"]).stat().st_size > 0
    v, rows = read_csv(tmp_path / files["mulp"])
    assert v == 1
    assert all(all(_nan_eq(x[c], y[c]) for c in REGION_COLUMNS) for x, y in zip(res["mulp"].rows, rows))
    m = read_manifest(tmp_path / files["manifest"])
    assert m["format_version"] == 1 and m["kind"] == "region"
    assert {"numpy", "scipy", "cvxopt", "python"} <= set(m["versions"])
    assert load_config(tmp_path / files["manifest"]) == cfg
    blocks = read_dat(tmp_path / files["dat"])
    assert np.array_equal(blocks[0][2][:-1], res["mulp"].hull)
    spec = read_plot_spec(tmp_path / files["plot_spec"])
    assert spec["data"] == files["dat"] and spec["series"][0]["label"] == "mulp"


def test_curve_bundle_rerun_is_identical(tmp_path):
    cfg = ScenarioConfig(strategy="mulp", Nt=2, K=2, **FAST)
    chans = [random_channels(2, [1.0, 1.0], 0)]
    texts = []
    for d in ("a", "b"):
        res = {"mulp": wsr_curve(cfg, "mulp", [0.0, 10.0], channels=chans)}
        files = write_curve_bundle(tmp_path / d, "c", cfg, res, figures=False)
        assert "figure" not in files
        texts.append((tmp_path / d / files["mulp"]).read_text())
        _, rows = read_csv(tmp_path / d / files["mulp"])
        assert rows == res["mulp"].rows
    assert texts[0] == texts[1]


def test_explicit_channel_config_round_trip():
    H = random_channels(2, [1.0, 1.0], 5)
    cfg = ScenarioConfig(Nt=2, K=2, channel={"kind": "explicit", **H.to_dict()})
    back = ScenarioConfig.from_dict(cfg.to_dict())
    assert back == cfg
    from rsma.presets import build_channels
    assert np.array_equal(build_channels(back)[0].H, H.H)
