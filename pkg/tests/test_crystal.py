import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spdc_screen.constants import photon_energy_ev
from spdc_screen.crystal import (
    Chi2Tensor,
    CrystalRecord,
    PumpConfig,
    dump_crystal,
    filter_candidates,
    load_crystal,
    load_whitelist,
    normalize_class,
    parse_crystal,
)
from spdc_screen.errors import CrystalFormatError, CrystalValidationError

from conftest import sellmeier, uniaxial_record

MINIMAL = """
version = 1
[meta]
refcode = "X1"
crystal_class = "mm2"
band_gap_ev = 4.0
[dispersion.a]
model = "sellmeier"
A = 2.0
B = [0.5]
C = [0.02]
[dispersion.b]
model = "sellmeier"
A = 2.1
B = [0.5]
C = [0.02]
[dispersion.c]
model = "table"
wavelength_nm = [400.0, 600.0, 800.0, 1200.0, 1600.0]
index = [1.80, 1.76, 1.75, 1.74, 1.735]
[[chi2]]
wavelength_nm = 1064.0
contracted = [[0, 0, 0, 0, 2, 0], [0, 0, 0, 3, 0, 0], [2, 3, 8, 0, 0, 0]]
"""


def test_parse_minimal_record():
    rec = parse_crystal(MINIMAL)
    assert rec.refcode == "X1"
    assert rec.crystal_class == "mm2"
    assert rec.length == 1.0
    assert rec.axes == "abc"
    t = rec.chi2[0]
    assert t.components[2, 0, 0] == 2.0
    assert t.components[1, 1, 2] == t.components[1, 2, 1] == 3.0
    assert t.components[2, 2, 2] == 8.0
    assert len(rec.digest) == 64


def test_contracted_round_trip():
    m = np.arange(18, dtype=float).reshape(3, 6)
    t = Chi2Tensor.from_contracted(m)
    np.testing.assert_array_equal(t.to_contracted(), m)
    assert t.symmetry_defect()[0] == 0.0


def test_shipped_records_round_trip(data_dir):
    for path in sorted(data_dir.glob("*.toml")):
        rec = load_crystal(path)
        again = parse_crystal(dump_crystal(rec))
        assert again == rec


@pytest.mark.parametrize(
    "edit, field",
    [
        (("band_gap_ev = 4.0", "band_gap_ev = -1.0"), "meta.band_gap_ev"),
        (('crystal_class = "mm2"', 'crystal_class = "mmm"'), "meta.crystal_class"),
        (("version = 1", "version = 7"), "version"),
        (('[dispersion.b]\nmodel = "sellmeier"', '[dispersion.q]\nmodel = "sellmeier"'), "dispersion.b"),
        (('refcode = "X1"\n', 'refcode = "X1"\nchi2_frame = "XYZ"\n'), "meta.chi2_frame"),
        (("[[chi2]]\nwavelength_nm = 1064.0", "[[chi2]]\nwavelength_nm = 1064.0\nrole = \"idler\""), "chi2[0].role"),
        (('model = "table"', 'model = "spline"'), "dispersion.c.model"),
    ],
)
def test_validation_names_the_field(edit, field):
    text = MINIMAL.replace(*edit)
    with pytest.raises(CrystalValidationError) as info:
        parse_crystal(text)
    assert info.value.field == field


def test_nan_rejected():
    with pytest.raises(CrystalValidationError) as info:
        parse_crystal(MINIMAL.replace("A = 2.0", "A = nan"))
    assert info.value.field == "dispersion.a.A"


def test_asymmetric_chi2_reports_worst_pair():
    comps = ", ".join(["0"] * 27)
    text = MINIMAL.replace(
        "contracted = [[0, 0, 0, 0, 2, 0], [0, 0, 0, 3, 0, 0], [2, 3, 8, 0, 0, 0]]",
        f"components = [{comps}]",
    )
    vals = np.zeros(27)
    vals[np.ravel_multi_index((2, 0, 1), (3, 3, 3))] = 1.0
    vals[np.ravel_multi_index((2, 1, 0), (3, 3, 3))] = 1.1
    text = text.replace(f"components = [{comps}]", "components = [" + ", ".join(map(str, vals)) + "]")
    with pytest.raises(CrystalValidationError) as info:
        parse_crystal(text)
    assert info.value.field == "chi2[0].components"
    assert "chi[2][0][1]" in str(info.value) or "chi[2][1][0]" in str(info.value)


def test_malformed_toml():
    with pytest.raises(CrystalFormatError):
        parse_crystal("version = = 1")


def test_nm_unit_conversion():
    text = MINIMAL.replace("C = [0.02]\n[dispersion.b]", 'C = [20000.0]\nwavelength_unit = "nm"\n[dispersion.b]')
    rec = parse_crystal(text)
    assert rec.axis_models[0].C == pytest.approx((0.02,), rel=1e-15)


def test_class_aliases():
    assert normalize_class("-42m") == normalize_class("-4 2 m")


def test_select_chi2_nearest_role_wavelength():
    base = Chi2Tensor.from_contracted(np.ones((3, 6)))
    a = base.with_components(base.components, wavelength_nm=1064.0, role="signal")
    b = base.with_components(2 * base.components, wavelength_nm=1550.0, role="signal")
    c = base.with_components(3 * base.components, wavelength_nm=780.0, role="pump")
    n = sellmeier(2.5, 0.02, 0.02)
    rec = CrystalRecord("S", "mm2", 5.0, (n, n, n), (c, a, b))
    assert rec.select_chi2(532.0) is a
    assert rec.select_chi2(760.0) is c  # pump-role entry 20 nm away beats 1550 vs 1520
    assert rec.select_chi2(775.0) is b  # signal at 1550 nm matches exactly


def test_filter_gap_and_cubic():
    n = sellmeier(2.5, 0.02, 0.02)
    ok = uniaxial_record(n, n, refcode="OK", band_gap=3.0)
    low = uniaxial_record(n, n, refcode="LOW", band_gap=2.0)
    cubic = uniaxial_record(n, n, refcode="CUB", crystal_class="-43m", band_gap=6.0)
    res = filter_candidates([ok, low, cubic], PumpConfig())
    assert [d.record.refcode for d in res.accepted] == ["OK"]
    codes = {d.record.refcode: d.code for d in res.rejected}
    assert codes == {"LOW": "gap-below-pump", "CUB": "cubic-class"}
    assert "gap below pump photon energy" in res.rejected[0].detail


def test_filter_whitelist_bypasses_gap_only():
    n = sellmeier(2.5, 0.02, 0.02)
    low = uniaxial_record(n, n, refcode="LOW", band_gap=2.0)
    cubic = uniaxial_record(n, n, refcode="CUB", crystal_class="23", band_gap=1.0)
    res = filter_candidates([low, cubic], PumpConfig(), whitelist=("LOW", "CUB"))
    assert [(d.record.refcode, d.code) for d in res.accepted] == [("LOW", "whitelisted")]
    assert res.rejected[0].code == "cubic-class"


def test_filter_boundary_is_strict():
    n = sellmeier(2.5, 0.02, 0.02)
    e = photon_energy_ev(532.0)
    at = uniaxial_record(n, n, refcode="AT", band_gap=e)
    assert filter_candidates([at], PumpConfig()).rejected


def test_load_whitelist(tmp_path):
    p = tmp_path / "wl.txt"
    p.write_text("# keep these\nAAA\n  BBB  # trailing\n\n")
    assert load_whitelist(p) == ["AAA", "BBB"]


def test_pump_config_validation():
    with pytest.raises(ValueError):
        PumpConfig(pump_wavelength=-1.0)
    with pytest.raises(ValueError):
        PumpConfig(detector_bandwidth=0.0)
    assert PumpConfig(pump_wavelength=400.0).signal_wavelength == 800.0


finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)


@settings(max_examples=40, deadline=None)
@given(st.lists(finite, min_size=18, max_size=18), st.floats(1.5, 8.0), st.sampled_from(["2", "mm2", "3m", "4"]))
def test_record_round_trip_property(values, gap, cls):
    n = sellmeier(2.5, 0.02, 0.02)
    rec = uniaxial_record(n, sellmeier(2.3, 0.015, 0.018), d=np.reshape(values, (3, 6)) / 2.0,
                          crystal_class=cls, band_gap=gap)
    again = parse_crystal(dump_crystal(rec))
    assert again == rec
