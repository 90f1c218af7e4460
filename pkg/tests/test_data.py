import math

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mcpower.data import (
    ColumnMapping,
    DataError,
    FeatureSpec,
    Standardizer,
    build_features,
    clean,
    encode_angle,
    gust_factor,
    load_scada,
    split,
    split_sizes,
    summarize_inputs,
    turbulence_intensity,
    wind_shear_indicator,
)
from mcpower.synthetic import synthetic_scada

HEADER = "Date_time,Ws_avg,Ws_std,Ws_max,Ws2_avg,Ot_avg,Wa_avg,Ba_avg,Ya_avg,P_avg"
ROWS = [
    "2017-06-01T00:00:00+00:00,6.0,0.6,9.0,6.3,12.5,90,0.5,85,500",
    "2017-06-01T00:10:00+00:00,7.0,0.7,8.5,7.1,12.4,180,0.4,175,700",
    "2017-06-01T00:20:00+00:00,5.0,0.0,5.0,5.0,12.3,0,0.6,355,300",
]


def write(tmp_path, lines, name="scada.csv"):
    p = tmp_path / name
    p.write_text("\n".join(lines) + "\n")
    return p


def test_load_three_clean_rows(tmp_path):
    res = load_scada(write(tmp_path, [HEADER, *ROWS]))
    assert len(res.records) == 3 and len(res.rejects) == 0
    assert res.records["power"].tolist() == [500.0, 700.0, 300.0]
    assert str(res.records["timestamp"].dt.tz) == "UTC"


def test_empty_power_cell_is_rejected_with_row_number(tmp_path):
    bad = ROWS[1].rsplit(",", 1)[0] + ","
    res = load_scada(write(tmp_path, [HEADER, ROWS[0], bad, ROWS[2]]))
    assert len(res.records) == 2
    assert res.rejects["row_number"].tolist() == [3]
    assert "P_avg" in res.rejects["reason"].iloc[0]


def test_missing_header_names_it(tmp_path):
    p = write(tmp_path, [HEADER.replace("Ws_std", "Ws_sd"), *ROWS])
    with pytest.raises(DataError, match="Ws_std"):
        load_scada(p)


def test_empty_file_and_header_only(tmp_path):
    with pytest.raises(DataError, match="empty"):
        load_scada(write(tmp_path, [""], "empty.csv"))
    with pytest.raises(DataError, match="no data rows"):
        load_scada(write(tmp_path, [HEADER], "hdr.csv"))


def test_semicolon_separator_and_row_filter(tmp_path):
    lines = [HEADER.replace(",", ";") + ";Wind_turbine_name"]
    for i, r in enumerate(ROWS):
        lines.append(r.replace(",", ";") + (";R80711" if i != 1 else ";R80721"))
    res = load_scada(write(tmp_path, lines), sep=";", row_filter={"Wind_turbine_name": "R80711"})
    assert res.records["row_number"].tolist() == [2, 4]


def test_mapping_rejects_duplicates_and_unknown_channels():
    with pytest.raises(ValueError, match="more than one channel"):
        ColumnMapping(power_avg="Ws_avg")
    with pytest.raises(ValueError, match="unknown"):
        ColumnMapping.from_dict({"windspeed": "x"})
    m = ColumnMapping(nacelle_avg=None)
    assert "nacelle_avg" not in m.bound()
    assert ColumnMapping.from_dict(m.to_dict()) == m


def record(**kw):
    base = dict(timestamp=pd.Timestamp("2017-01-01", tz="UTC"), v_bar=6.0, sigma_v=0.8, v_max=8.0,
                v_alt=6.2, temp=10.0, dir=90.0, pitch=0.0, nacelle=90.0, power=500.0)
    base.update(kw)
    return base


def test_clean_single_cases():
    assert len(clean(pd.DataFrame([record(v_bar=0.0)]))) == 0
    assert len(clean(pd.DataFrame([record()]))) == 1


def test_clean_counts_planted_violations(rng):
    rows = [record(v_bar=float(v), v_max=float(v) + 1.0) for v in rng.uniform(1, 20, 100)]
    plants = [dict(v_bar=0.05), dict(v_bar=31.0, v_max=32.0), dict(power=-60.0),
              dict(v_max=1.0), dict(sigma_v=-0.1), dict(temp=float("nan")), dict(power=None)]
    for i, p in enumerate(plants):
        rows[i * 13].update(p)
    out = clean(pd.DataFrame(rows))
    assert len(out) == 93
    assert out["v_bar"].between(0.1, 30).all() and (out["v_max"] >= out["v_bar"]).all()


def test_clean_keeps_slightly_negative_power():
    assert len(clean(pd.DataFrame([record(power=-20.0)]))) == 1


def test_feature_formulas():
    assert turbulence_intensity(0.6, 6.0) == pytest.approx(0.1)
    assert turbulence_intensity(0.0, 5.0) == 0.0
    assert wind_shear_indicator(6.0, 6.0) == 1.0
    assert wind_shear_indicator(6.3, 6.0) == pytest.approx(1.05)
    assert gust_factor(6.0, 6.0) == 1.0
    assert gust_factor(9.0, 6.0) == pytest.approx(1.5)
    np.testing.assert_allclose(encode_angle(0.0), (0.0, 1.0), atol=1e-15)
    np.testing.assert_allclose(encode_angle(90.0), (1.0, 0.0), atol=1e-15)
    np.testing.assert_allclose(encode_angle(360.0), encode_angle(0.0), atol=1e-12)


def test_feature_formula_errors():
    with pytest.raises(DataError):
        turbulence_intensity(1.0, 0.05)
    with pytest.raises(DataError):
        wind_shear_indicator(1.0, 0.0)
    with pytest.raises(DataError):
        gust_factor(5.0, 6.0)


@settings(max_examples=60, deadline=None)
@given(st.floats(-1e4, 1e4, allow_nan=False))
def test_encode_angle_unit_circle(deg):
    s, c = encode_angle(deg)
    assert abs(s * s + c * c - 1.0) < 1e-12


@settings(max_examples=60, deadline=None)
@given(st.floats(0.1, 30), st.floats(0, 10), st.floats(0, 20))
def test_cleaned_records_have_valid_ratios(v, sigma, extra):
    out = clean(pd.DataFrame([record(v_bar=v, sigma_v=sigma, v_max=v + extra)]))
    assert len(out) == 1
    assert turbulence_intensity(out.sigma_v, out.v_bar)[0] >= 0
    assert gust_factor(out.v_max, out.v_bar)[0] >= 1


def test_feature_spec_rules():
    assert FeatureSpec.parse("WS,DIR,BA").names == ("WS", "DIR_SIN", "DIR_COS", "PITCH")
    assert FeatureSpec.parse(["ws", "ti"]).label == "WS+TI"
    for bad in ("TI", "WS,WS", "WS,FOO", ""):
        with pytest.raises(ValueError):
            FeatureSpec.parse(bad)


def test_build_features_small_cases():
    df = pd.DataFrame([record(v_bar=6.0, sigma_v=0.6, v_max=9.0)])
    np.testing.assert_array_equal(build_features(df, FeatureSpec(("WS",))), [[6.0]])
    np.testing.assert_allclose(build_features(df, FeatureSpec(("WS", "TI", "G"))), [[6.0, 0.1, 1.5]])


def test_build_features_matches_hand_oracle(rng):
    recs = pd.DataFrame([record(v_bar=float(v), sigma_v=float(s), v_max=float(v + g), v_alt=float(a),
                                temp=float(t), dir=float(d), pitch=float(b), nacelle=float(n))
                         for v, s, g, a, t, d, b, n in rng.uniform(0.5, 20, size=(10, 8)) * [1, 0.1, 0.2, 1, 1, 18, 1, 18]])
    spec = FeatureSpec.parse("WS,T,DIR,TI,G,SHEAR,PITCH,NAC")
    x = build_features(recs, spec)
    for i, r in recs.iterrows():
        row = [r.v_bar, r.temp, math.sin(math.radians(r.dir)), math.cos(math.radians(r.dir)),
               r.sigma_v / r.v_bar, r.v_max / r.v_bar, r.v_alt / r.v_bar, r.pitch,
               math.sin(math.radians(r.nacelle)), math.cos(math.radians(r.nacelle))]
        np.testing.assert_allclose(x[i], row, rtol=1e-14, atol=1e-15)
    np.testing.assert_array_equal(x, build_features(recs, spec))


def test_build_features_names_unmapped_channel():
    df = pd.DataFrame([record()]).drop(columns=["sigma_v"])
    with pytest.raises(DataError, match="wind_speed_std"):
        build_features(df, FeatureSpec.parse("WS,TI"))


def test_split_sizes_and_partition():
    assert split_sizes(10, (0.7, 0.15, 0.15)) == (7, 1, 2)
    x, y = np.arange(10.0)[:, None], np.arange(10.0)
    sp = split(x, y, (0.7, 0.15, 0.15), "chronological")
    np.testing.assert_array_equal(sp.idx_train, np.arange(7))
    np.testing.assert_array_equal(sp.x_test[:, 0], [8.0, 9.0])


def test_split_errors():
    with pytest.raises(DataError):
        split_sizes(3, (0.7, 0.15, 0.15))
    with pytest.raises(ValueError):
        split_sizes(100, (0.5, 0.3, 0.3))
    with pytest.raises(ValueError):
        split(np.zeros((10, 1)), np.zeros(10), mode="random")


@settings(max_examples=30, deadline=None)
@given(st.integers(20, 300), st.integers(0, 1000))
def test_shuffled_split_is_deterministic_partition(n, seed):
    x, y = np.arange(n, dtype=float)[:, None], np.arange(n, dtype=float)
    a = split(x, y, (0.6, 0.2, 0.2), "shuffled", seed)
    b = split(x, y, (0.6, 0.2, 0.2), "shuffled", seed)
    np.testing.assert_array_equal(a.idx_test, b.idx_test)
    union = np.concatenate([a.idx_train, a.idx_val, a.idx_test])
    np.testing.assert_array_equal(np.sort(union), np.arange(n))
    np.testing.assert_array_equal(a.y_train, y[a.idx_train])


def test_standardizer_basics(rng):
    st_ = Standardizer.fit(np.array([[1.0], [2.0], [3.0]]), np.array([0.0, 1.0, 2.0]))
    z = st_.transform_x([[1.0], [2.0], [3.0]])
    assert z.mean() == pytest.approx(0.0) and z.std() == pytest.approx(1.0)
    x = rng.normal(3, 5, size=(50, 4))
    st_ = Standardizer.fit(x, rng.normal(size=50))
    np.testing.assert_allclose(st_.inverse_x(st_.transform_x(x)), x, atol=1e-10)
    st400 = Standardizer(np.zeros(1), np.ones(1), 0.0, 400.0)
    assert st400.inverse_variance(0.25) == pytest.approx(40000.0)
    back = Standardizer.from_dict(st_.to_dict())
    np.testing.assert_array_equal(back.x_std, st_.x_std)


def test_standardizer_constant_column_named():
    with pytest.raises(DataError, match="TI"):
        Standardizer.fit(np.array([[1.0, 2.0], [2.0, 2.0]]), np.array([0.0, 1.0]), ["WS", "TI"])


def test_standardizer_fit_on_train_only():
    from mcpower.pipeline import prepare
    recs = clean(load_scada_frame(synthetic_scada(500, seed=3)))
    prep = prepare(recs, FeatureSpec.parse("WS,TI"), (0.6, 0.2, 0.2))
    np.testing.assert_allclose(prep.standardizer.x_mean, prep.raw.x_train.mean(axis=0))
    everything = np.vstack([prep.raw.x_train, prep.raw.x_test])
    assert not np.allclose(prep.standardizer.x_mean, everything.mean(axis=0))


def load_scada_frame(df):
    """Canonical records straight from a synthetic header-named frame."""
    m = ColumnMapping()
    from mcpower.data import CHANNELS
    out = pd.DataFrame({CHANNELS[ch]: df[h] for ch, h in m.bound().items()})
    out["timestamp"] = pd.to_datetime(out["timestamp"], utc=True)
    out.insert(0, "row_number", np.arange(2, len(df) + 2))
    return out


def test_summarize_inputs_has_one_row_per_variable(tmp_path):
    res = load_scada(write(tmp_path, [HEADER, *ROWS]))
    s = summarize_inputs(clean(res.records))
    assert len(s) == 9 and s["variable"].is_unique
    row = s.set_index("variable").loc["Wind Speed (m/s)"]
    assert row["mean"] == pytest.approx(6.0) and row["count"] == 3
