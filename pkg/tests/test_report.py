import numpy as np
import pytest
from scipy import special

from npdcat import Design, SeedSpec, StratumPlan, calibrate, ks_statistic, simulate_dataset
from npdcat import report


@pytest.fixture(scope="module")
def artifacts():
    from npdcat import presets
    d = Design.balanced(60, presets.STUDY_TIMES)
    cal = calibrate(presets.TABLE1, d, B=100, V=500, master_seed=0, cache=False)
    data = simulate_dataset(presets.TABLE1, d, SeedSpec(5))
    v = cal.npd(data)
    return (report.percentile_bands(v, cal.plan, 600, 3),
            report.observed_proportions(data, cal.plan),
            report.NullView(cal.ks_null, ks_statistic(v)))


def test_band_table_invariants(artifacts):
    bands, props, _ = artifacts
    assert len(bands) == 8
    for r in bands.rows:
        assert all(lo <= hi for lo, hi in zip(r.lower, r.upper))
    for r in props.rows:
        assert sum(r.fractions) == pytest.approx(1.0)


def test_too_few_band_simulations():
    with pytest.raises(ValueError):
        report.percentile_bands(None, None, 100)


def test_band_coverage_for_normal_cells():
    # 500 cells (one per visit time) of 30 i.i.d. N(0,1) values each
    from npdcat.npd import NpdVector
    m, trials = 30, 500
    z = np.random.default_rng(11).standard_normal((trials, m))
    design = Design.balanced(m, tuple(float(t) for t in range(trials)), "none")
    plan = StratumPlan.from_design(design, ())
    npd = z.T.ravel()  # observation layout is subject by subject
    v = NpdVector(None, npd, npd, special.ndtr(npd), npd)
    cover = report.percentile_bands(v, plan, 1000, 0).inside().mean(axis=0)
    assert np.all(np.abs(cover - 0.95) <= 0.03), cover


def test_csv_round_trips(artifacts, tmp_path):
    bands, props, view = artifacts
    assert report.read_band_csv(report.write_band_csv(bands, tmp_path / "b.csv")) == bands
    assert report.read_proportion_csv(report.write_proportion_csv(props, tmp_path / "p.csv")) \
        == props
    stats, thr, obs = report.read_null_csv(report.write_null_csv(view, tmp_path / "n.csv"))
    np.testing.assert_array_equal(stats, view.null.statistics)
    assert thr == view.null.threshold and obs == view.observed.D


def test_render_outputs(artifacts, tmp_path):
    bands, props, view = artifacts
    files = report.render(view, tmp_path / "null")
    svg = (tmp_path / "null.svg").read_text()
    assert svg.count('class="marker"') == 2 and len(files) == 2
    report.render(bands, tmp_path / "bands")
    assert 'class="band"' in (tmp_path / "bands.svg").read_text()
    a = (tmp_path / "bands.csv").read_bytes()
    report.render(bands, tmp_path / "bands")
    assert (tmp_path / "bands.csv").read_bytes() == a


def test_empty_table_renders_header_only(tmp_path):
    empty = report.PercentileBandTable(("trt",), (5.0, 50.0, 95.0), 0.95, ())
    files = report.render(empty, tmp_path / "e")
    assert [f.suffix for f in files] == [".csv"]
    assert report.read_band_csv(files[0]) == empty


def test_single_category_proportions():
    from npdcat import presets
    d = Design.balanced(4, (0.0,))
    data = simulate_dataset(presets.TABLE1, d, SeedSpec(0))
    data = type(data)(d, np.ones(4, dtype=np.int64), data.categories, {})
    t = report.observed_proportions(data, StratumPlan.from_design(d, ()))
    assert t.rows[0].fractions == (0.0, 1.0) and t.rows[0].n == 4


def test_unwritable_path(artifacts, tmp_path):
    with pytest.raises(OSError, match="nope"):
        report.render(artifacts[0], tmp_path / "nope" / "x")
