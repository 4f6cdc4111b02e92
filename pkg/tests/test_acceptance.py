"""Acceptance criteria, one test per criterion.

Criteria that need the released crystal data are skipped unless
``SPDC_SCREEN_REFERENCE_DATA`` points at a directory of converted records
(``MOFTIL.toml``, ``QAMFUF01.toml``, ``BEKVOD.toml`` and a ``batch/``
subdirectory holding the 49-record set).
"""

import math
import os
import time
from pathlib import Path

import numpy as np
import pytest

from spdc_screen.crystal import Chi2Tensor, PumpConfig, load_crystal
from spdc_screen.dispersion import SellmeierModel, sinc2_half_max_argument
from spdc_screen.frames import orient_crystal
from spdc_screen.nonlinearity import crystal_deff, deff_map, rotate_chi2
from spdc_screen.pairs import g2_with_correlation_time, pair_rate
from spdc_screen.phasematching import mismatch_function, solve_phase_matching, solve_uniaxial_pm
from spdc_screen.pipeline import RunConfig, screen_batch, screen_one, wavelength_sweep
from spdc_screen.report import report_to_csv, report_to_json

from conftest import DATA, sellmeier, uniaxial_record
from oracles import dense_scan_roots, mp_derivatives, mp_sellmeier_n

REFERENCE_DATA = os.environ.get("SPDC_SCREEN_REFERENCE_DATA")


def report(name, passed, detail):
    print(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")


def reference_record(name):
    if not REFERENCE_DATA:
        pytest.skip("released crystal data not available (set SPDC_SCREEN_REFERENCE_DATA)")
    path = Path(REFERENCE_DATA) / f"{name}.toml"
    if not path.exists():
        pytest.skip(f"{path} not found")
    return load_crystal(path)


# --- released-data reproduction ------------------------------------------------

MOFTIL_ROWS = {  # lambda_s: (d_eff pm/V, GVM fs/mm, tau_c fs)
    909.0: (6.24, 2615.67, 26.63),
    1064.0: (4.88, 1410.07, 23.66),
    1100.0: (4.70, 1269.64, 23.11),
    1546.0: (3.61, 480.95, 18.61),
}


@pytest.mark.criterion("MOFTIL sweep: d_eff and GVM within 10%, tau_c within 15%, monotone decrease, < 10 s")
def test_moftil_sweep():
    rec = reference_record("MOFTIL")
    t0 = time.perf_counter()
    rows = wavelength_sweep(rec, list(MOFTIL_ROWS), RunConfig())
    elapsed = time.perf_counter() - t0
    ok = elapsed < 10.0
    for row, (lam, (d, g, tc)) in zip(rows, MOFTIL_ROWS.items()):
        assert row.status == "ok", row.detail
        ok &= abs(abs(row.d_eff_pm_per_V) - d) <= 0.10 * d
        ok &= abs(abs(row.gvm_fs_per_mm) - g) <= 0.10 * g
        ok &= abs(row.tau_c_fs - tc) <= 0.15 * tc
    for key in (lambda r: abs(r.d_eff_pm_per_V), lambda r: r.rate_per_s_mW_mm, lambda r: r.tau_c_fs,
                lambda r: abs(r.gvm_fs_per_mm)):
        vals = [key(r) for r in rows]
        ok &= all(b < a for a, b in zip(vals, vals[1:]))
    report("MOFTIL sweep", ok, f"{elapsed:.2f} s")
    assert ok


@pytest.mark.criterion("MOFTIL birefringence 0.42 at 1064 nm within 5%")
def test_moftil_birefringence():
    row = screen_one(reference_record("MOFTIL"), RunConfig())
    ok = abs(row.birefringence - 0.42) <= 0.05 * 0.42
    report("MOFTIL birefringence", ok, f"{row.birefringence:.4f}")
    assert ok


@pytest.mark.criterion("QAMFUF01/BEKVOD: no phase matching at 1064 nm, solutions at 1600/2200 nm")
def test_late_phase_matching():
    ok = True
    for name, lam in (("QAMFUF01", 1600.0), ("BEKVOD", 2200.0)):
        rec = reference_record(name)
        ok &= screen_one(rec, RunConfig()).status == "not-phase-matchable"
        pump = PumpConfig(pump_wavelength=lam / 2.0)
        ok &= screen_one(rec, RunConfig(pump=pump)).status == "ok"
    report("late phase matching", ok, "QAMFUF01 @1600, BEKVOD @2200")
    assert ok


@pytest.mark.criterion("49-record batch: < 5 min, zero status=error rows")
def test_full_batch():
    if not REFERENCE_DATA or not (Path(REFERENCE_DATA) / "batch").is_dir():
        pytest.skip("released 49-record set not available (set SPDC_SCREEN_REFERENCE_DATA)")
    t0 = time.perf_counter()
    rep = screen_batch(Path(REFERENCE_DATA) / "batch", RunConfig(jobs=os.cpu_count() or 1))
    elapsed = time.perf_counter() - t0
    ok = elapsed < 300.0 and rep.summary["error"] == 0 and rep.summary["total"] == 49
    report("49-record batch", ok, f"{elapsed:.1f} s, summary {rep.summary}")
    assert ok


# --- property acceptance -------------------------------------------------------


@pytest.mark.criterion("Gaussian-limit G2 FWHM = 2 sqrt(2 ln 2)/sigma within 0.5% over 3 decades of sigma")
def test_gaussian_fwhm():
    worst = 0.0
    for sigma in np.logspace(13, 16, 7):
        tau_c = g2_with_correlation_time(0.0, 1.0, sigma).tau_c
        exact = 2.0 * math.sqrt(2.0 * math.log(2.0)) / (sigma * 1e-15)
        worst = max(worst, abs(tau_c / exact - 1.0))
    ok = worst < 5e-3
    report("Gaussian FWHM", ok, f"max relative error {worst:.2e}")
    assert ok


@pytest.mark.criterion("sinc^2 half-max argument 1.391557 within 1e-4 by root solve")
def test_half_max_constant():
    x = sinc2_half_max_argument()
    ok = abs(x - 1.391557) < 1e-4 and abs((math.sin(x) / x) ** 2 - 0.5) < 1e-14
    report("half-max constant", ok, f"x = {x:.12f}")
    assert ok


def _scaled_record(rec, s):
    chi = tuple(t.with_components(s * t.components) for t in rec.chi2)
    return type(rec)(rec.refcode, rec.crystal_class, rec.band_gap, rec.axis_models, chi, rec.axes, rec.length)


@pytest.mark.criterion("scaling chi2 by s scales the pair rate by s^2 (relative error < 1e-12)")
def test_rate_quadratic_in_chi2(bbo_record, bbo, pump532):
    worst = 0.0
    base = screen_one(bbo_record)
    for s in (0.5, 2.0, 4.0):
        row = screen_one(_scaled_record(bbo_record, s))
        worst = max(worst, abs(row.rate_per_s_mW_mm / (s * s * base.rate_per_s_mW_mm) - 1.0))
    # kernel level with non-binary scale factors at a fixed direction
    chi = bbo.select_chi2(532.0)
    r0 = None
    for s in (1.0, 0.37, 3.3, 11.0):
        scaled = chi.with_components(s * chi.components)
        d = crystal_deff(bbo, pump532, 22.8, 90.0, chi2=scaled).value
        r = pair_rate(d, 1.65, 1.65, 1.68, 1.68, 1.57, 40.0, pump532, 1.0).rate
        r0 = r0 or r
        worst = max(worst, abs(r / (s * s * r0) - 1.0))
    ok = worst < 1e-12
    report("rate scaling", ok, f"max relative error {worst:.2e}")
    assert ok


@pytest.mark.criterion("Kleinman-symmetrised 422 tensor: |d_eff| < 1e-12 pm/V on a 361x91 grid")
def test_422_null():
    crystal = orient_crystal(load_crystal(DATA / "syn_422.toml"), 1064.0)
    worst, raw = 0.0, 0.0
    for config in ("pump-fast/signal-slow", "pump-slow/signal-fast"):
        m = deff_map(crystal, PumpConfig(), n_theta=91, n_phi=361, kleinman=True, config=config, locus=())
        assert m.values.shape == (361, 91)
        worst = max(worst, float(np.max(np.abs(m.values))))
        unsym = deff_map(crystal, PumpConfig(), 91, 361, kleinman=False, config=config, locus=())
        raw = max(raw, float(np.max(np.abs(unsym.values))))
    # the unsymmetrised tensor does couple, so the null comes from the symmetrisation
    ok = worst < 1e-12 and raw > 0.1
    report("422 Kleinman null", ok, f"max |d_eff| {worst:.2e} (unsymmetrised {raw:.3f})")
    assert ok


def _rz(alpha_deg):
    a = math.radians(alpha_deg)
    return np.array([[math.cos(a), -math.sin(a), 0.0], [math.sin(a), math.cos(a), 0.0], [0.0, 0.0, 1.0]])


@pytest.mark.criterion("d_eff map rotation covariance within 1e-10; rotation composition within 1e-12")
def test_rotation_covariance(bbo):
    pump = PumpConfig()
    base = deff_map(bbo, pump, n_theta=91, n_phi=361, locus=())
    worst_cov = 0.0
    for alpha in (10, 37, 120):
        rot = tuple(rotate_chi2(t, _rz(alpha)) for t in bbo.chi2)
        turned = type(bbo)(bbo.refcode, bbo.crystal_class, bbo.optic, bbo.frame, bbo.models, rot,
                           bbo.reference_wavelength, bbo.record)
        m = deff_map(turned, pump, n_theta=91, n_phi=361, locus=())
        # rotating the tensor by alpha about Z moves the map by +alpha in phi
        shifted = np.roll(base.values[:-1], alpha, axis=0)
        worst_cov = max(worst_cov, float(np.max(np.abs(m.values[:-1] - shifted))))
    rng = np.random.default_rng(7)
    worst_comp = 0.0
    for _ in range(200):
        c = rng.normal(size=(3, 3, 3))
        q1, _ = np.linalg.qr(rng.normal(size=(3, 3)))
        q2, _ = np.linalg.qr(rng.normal(size=(3, 3)))
        diff = rotate_chi2(rotate_chi2(c, q1), q2) - rotate_chi2(c, q2 @ q1)
        worst_comp = max(worst_comp, float(np.max(np.abs(diff))))
    ok = worst_cov < 1e-10 and worst_comp < 1e-12
    report("rotation covariance", ok, f"map {worst_cov:.2e}, composition {worst_comp:.2e}")
    assert ok


@pytest.mark.criterion("uniaxial solver vs 0.01 deg dense scan on 50 random crystals: no missed roots, residual < 1e-10")
def test_uniaxial_vs_dense_scan():
    rng = np.random.default_rng(2024)
    pump = PumpConfig()
    missed, worst, matched = 0, 0.0, 0
    for i in range(50):
        A = rng.uniform(1.8, 3.2)
        B = rng.uniform(0.005, 0.05)
        C = rng.uniform(0.005, 0.04)
        D = rng.uniform(0.0, 0.03)
        dA = rng.choice([-1.0, 1.0]) * rng.uniform(0.0, 0.4)
        n_o = SellmeierModel.from_inverse_form(A, [(B, C)], D)
        n_e = SellmeierModel.from_inverse_form(A + dA, [(B * rng.uniform(0.8, 1.2), C)], D)
        crystal = orient_crystal(uniaxial_record(n_o, n_e, refcode=f"R{i}"), 1064.0)
        if crystal.optic.kind != "uniaxial":
            continue
        f = mismatch_function(crystal, 532.0)
        oracle = dense_scan_roots(lambda t: float(f(t, 0.0)), 0.0, 90.0, 0.01)
        sol = solve_uniaxial_pm(crystal, pump)
        got = [t for t, _ in sol.directions]
        matched += bool(got)
        for r in oracle:
            if not any(abs(g - r) < 1e-6 for g in got):
                missed += 1
        for t in got:
            worst = max(worst, abs(float(f(t, 0.0))))
    ok = missed == 0 and worst < 1e-10 and matched >= 10
    report("uniaxial vs dense scan", ok, f"missed {missed}, max residual {worst:.1e}, {matched} matchable")
    assert ok


@pytest.mark.criterion("BBO theta_m = 22.8 +/- 0.3 deg at 1064 -> 532 nm (dense-scan oracle)")
def test_bbo_benchmark(bbo, pump532):
    theta = solve_phase_matching(bbo, pump532).directions[0][0]
    f = mismatch_function(bbo, 532.0)
    oracle = dense_scan_roots(lambda t: float(f(t, 0.0)), 0.0, 90.0, 0.01)
    ok = len(oracle) == 1 and abs(theta - oracle[0]) < 1e-8 and abs(theta - 22.8) <= 0.3
    report("BBO benchmark", ok, f"theta_m = {theta:.4f} deg (oracle {oracle[0]:.4f})")
    assert ok


@pytest.mark.criterion("analytic vs finite-difference dn/dlambda, d2n/dlambda2 within 1e-6 on shipped models")
def test_shipped_derivatives():
    worst = 0.0
    count = 0
    for path in sorted(DATA.glob("*.toml")):
        for model in load_crystal(path).axis_models:
            lo, hi = model.valid_range or (300.0, 2500.0)
            for lam in np.linspace(max(lo, 300.0), min(hi, 2500.0), 9):
                _, dn, d2n = (float(v) for v in model.derivatives(lam))
                _, fd1, fd2 = mp_derivatives(lambda x: mp_sellmeier_n(model, x), lam)
                worst = max(worst, abs(dn / fd1 - 1.0), abs(d2n / fd2 - 1.0))
                count += 1
    ok = worst < 1e-6
    report("shipped derivatives", ok, f"{count} points, max relative error {worst:.1e}")
    assert ok


@pytest.mark.criterion("batch report byte-identical across parallelism 1, 4, 16")
def test_determinism(tmp_path):
    import shutil

    for p in DATA.glob("*.toml"):
        shutil.copy(p, tmp_path / p.name)
    (tmp_path / "broken.toml").write_text("not toml [")
    texts = set()
    for jobs in (1, 4, 16):
        rep = screen_batch(tmp_path, RunConfig(jobs=jobs))
        texts.add((report_to_csv(rep), report_to_json(rep)))
    ok = len(texts) == 1
    report("determinism", ok, f"{len(texts)} distinct outputs")
    assert ok
