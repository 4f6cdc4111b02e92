"""Report emission (CSV / JSON) and plot-data files.

Reports carry a header block with the tool version, the full run
configuration, its digest, the physical constants and the conventions in
force.  Nothing time- or host-dependent is written, so identical inputs give
byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import fields
from importlib import resources
from pathlib import Path

import numpy as np

from . import constants
from .frames import orient_crystal
from .nonlinearity import deff_map
from .pairs import default_detector_bandwidth, g2_with_correlation_time
from .phasematching import pm_curve_vs_wavelength, solve_phase_matching
from .pipeline import ScreeningRow, column_names, screen_one

REPORT_FORMAT = "spdc-screen-report/1"
PLOT_KINDS = ("dn_vs_gap", "deff_map", "g2", "pm_curve")
_INT_FIELDS = {"n_pm_directions"}
_FLOAT_FIELDS = set(ScreeningRow.NUMERIC)
_EMPTY_STRING_FIELDS = {f.name for f in fields(ScreeningRow) if f.default == ""}


def report_schema():
    """The JSON schema that ``emit_report(..., fmt="json")`` output satisfies."""
    text = resources.files("spdc_screen").joinpath("data/report_schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def report_header(report):
    return {
        "format": REPORT_FORMAT,
        "version": report.version,
        "config_hash": report.config_hash,
        "config": report.config.as_dict(),
        "constants": constants.as_dict(),
        "notes": list(report.notes),
        "summary": report.summary,
        "trends": report.trends,
    }


def _clean(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, np.generic):
        return value.item()
    return value


def row_record(row):
    return {k: _clean(v) for k, v in row.as_dict().items()}


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _csv_text(header_lines, columns, rows):
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow([_cell(v) for v in r])
    return buf.getvalue()


def report_to_csv(report):
    header = report_header(report)
    lines = [f"{k}: {json.dumps(v, sort_keys=True)}" for k, v in header.items()]
    cols = column_names()
    rows = [[row_record(r)[c] for c in cols] for r in report.rows]
    return _csv_text(lines, cols, rows)


def report_to_json(report):
    doc = dict(report_header(report))
    doc["rows"] = [row_record(r) for r in report.rows]
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def _parse_cell(name, text):
    if text == "":
        return "" if name in _EMPTY_STRING_FIELDS else None
    if name in _INT_FIELDS:
        return int(text)
    if name in _FLOAT_FIELDS:
        return float(text)
    return text


def read_report_csv(path):
    """Parse a CSV report back into (header dict, list of ScreeningRow)."""
    header, body = {}, []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith("# "):
            key, _, value = line[2:].partition(": ")
            header[key] = json.loads(value)
        else:
            body.append(line)
    reader = csv.DictReader(body)
    rows = [ScreeningRow(**{k: _parse_cell(k, v) for k, v in rec.items()}) for rec in reader]
    return header, rows


def emit_report(report, path, fmt=None, plot_dir=None, plot_kinds=("dn_vs_gap",)):
    """Write the report as CSV or JSON (inferred from the suffix when ``fmt`` is None).

    With ``plot_dir`` the batch-level plot data (band gap scatter) is written
    there as well.  Returns the list of files written.
    """
    path = Path(path)
    fmt = fmt or ("json" if path.suffix.lower() == ".json" else "csv")
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown report format {fmt!r}")
    text = report_to_json(report) if fmt == "json" else report_to_csv(report)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    written = [path]
    if plot_dir is not None and "dn_vs_gap" in plot_kinds:
        written.append(write_dn_vs_gap(report.rows, Path(plot_dir) / "dn_vs_gap.csv"))
    return written


# --- plot data ----------------------------------------------------------------


def _write(path, columns, rows, header=()):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(_csv_text(header, columns, rows), encoding="utf-8")
    return path


def write_dn_vs_gap(rows, path):
    """Band gap against birefringence and the other screened properties (ok rows only)."""
    cols = ["refcode", "band_gap_ev", "birefringence", "d_eff_pm_per_V", "kappa_fs2_per_mm", "tau_c_fs",
            "rate_per_s_mW_mm"]
    data = [[getattr(r, c) for c in cols] for r in rows if r.status == "ok"]
    return _write(path, cols, data)


def write_deff_map(dmap, path, locus_path=None):
    """Long-format d_eff map; the phase-matching locus goes to a sibling file."""
    rows = [[float(t), float(p), float(dmap.values[i, j])]
            for i, p in enumerate(dmap.phis) for j, t in enumerate(dmap.thetas)]
    out = [_write(path, ["theta_deg", "phi_deg", "d_eff_pm_per_V"], rows)]
    locus_path = locus_path or Path(path).with_name(Path(path).stem + "_locus.csv")
    out.append(_write(locus_path, ["theta_deg", "phi_deg"], [[float(t), float(p)] for t, p in dmap.locus]))
    return out


def write_g2(profile, path):
    header = [f"tau_c_fs: {profile.tau_c!r}", f"kappa_fs2_per_mm: {profile.kappa!r}",
              f"length_mm: {profile.length!r}", f"detector_bandwidth_rad_per_s: {profile.bandwidth!r}"]
    return _write(path, ["tau_fs", "g2_normalized"],
                  [[float(t), float(v)] for t, v in zip(profile.taus, profile.values)], header)


def write_pm_curve(points, path):
    cols = ["pump_nm", "signal_nm", "theta_m_deg", "phi_m_deg", "residual", "branch_config"]
    rows = [[p.pump_wavelength, p.signal_wavelength, p.theta, p.phi, p.residual, p.branch_config] for p in points]
    return _write(path, cols, rows)


def write_pm_locus(solution, path):
    cols = ["pump_nm", "signal_nm", "theta_m_deg", "phi_m_deg", "residual", "branch_config"]
    lp, ls = solution.wavelengths
    rows = [[lp, ls, t, p, r, solution.branch_config] for (t, p), r in zip(solution.directions, solution.residuals)]
    return _write(path, cols, rows)


def crystal_g2(record, config, row=None):
    """G2 profile at the screened direction of one crystal, or None if it has none."""
    row = row or screen_one(record, config)
    if row.status != "ok":
        return None
    bw = config.pump.detector_bandwidth or default_detector_bandwidth(row.kappa_fs2_per_mm, row.length_mm)
    return g2_with_correlation_time(row.kappa_fs2_per_mm, row.length_mm, bw)


def write_plot_data(record, config, outdir, kinds=PLOT_KINDS, grid=(361, 91),
                    signal_wavelengths=tuple(range(900, 1601, 25))):
    """Per-crystal plot-data files; returns {kind: [paths]} for kinds that produced data."""
    outdir = Path(outdir)
    pump = config.pump
    stem = record.refcode
    written = {}
    row = screen_one(record, config)
    if "dn_vs_gap" in kinds:
        written["dn_vs_gap"] = [write_dn_vs_gap([row], outdir / f"{stem}_dn_vs_gap.csv")]
    crystal = orient_crystal(record, pump.signal_wavelength, window=(0.8 * pump.pump_wavelength,
                                                                     1.2 * pump.signal_wavelength))
    if "deff_map" in kinds and crystal.optic.kind != "isotropic":
        n_phi, n_theta = grid
        dmap = deff_map(crystal, pump, n_theta=n_theta, n_phi=n_phi, kleinman=config.kleinman,
                        config=config.branch_config)
        written["deff_map"] = write_deff_map(dmap, outdir / f"{stem}_deff_map.csv")
    if "g2" in kinds:
        prof = crystal_g2(record, config, row)
        if prof is not None:
            written["g2"] = [write_g2(prof, outdir / f"{stem}_g2.csv")]
    if "pm_curve" in kinds and crystal.optic.kind != "isotropic":
        lo, hi = min(signal_wavelengths), max(signal_wavelengths)
        wide = orient_crystal(record, pump.signal_wavelength, window=(0.8 * lo / 2.0, 1.2 * hi))
        files = [write_pm_curve(pm_curve_vs_wavelength(wide, signal_wavelengths, 0.0,
                                                       branch_config=config.branch_config),
                                outdir / f"{stem}_pm_curve.csv")]
        if crystal.optic.kind == "biaxial":
            sol = solve_phase_matching(crystal, pump, config.phi_step, config.scan_step, config.mismatch_tol,
                                       config.branch_config)
            files.append(write_pm_locus(sol, outdir / f"{stem}_pm_locus.csv"))
        written["pm_curve"] = files
    return written


def sweep_report(rows, config):
    """Wrap sweep rows (one per signal wavelength) in a report without re-sorting."""
    from .pipeline import ScreeningReport, STATUSES

    summary = {s: sum(r.status == s for r in rows) for s in STATUSES}
    summary["total"] = len(rows)
    return ScreeningReport(list(rows), config, summary, {})
