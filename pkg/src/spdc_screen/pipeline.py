"""Per-crystal screening, batch runs and wavelength sweeps."""

from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np
from scipy import stats

from . import __version__
from .crystal import PumpConfig, filter_candidates, load_crystal
from .dispersion import acceptance_bandwidth_from_kappa, directional_group_quantities
from .errors import InputError, NotPhaseMatchableError, SpdcScreenError
from .frames import INDEX_TOLERANCE, birefringence, orient_crystal
from .nonlinearity import D_CONVENTION, crystal_deff, max_deff_on_locus, prepared_chi2
from .pairs import default_detector_bandwidth, g2_with_correlation_time, pair_rate, spectral_integral
from .phasematching import (
    BRANCH_CONFIGS,
    MISMATCH_TOL,
    PHI_STEP,
    SCAN_STEP,
    expand_symmetry,
    solve_phase_matching,
    theta_on_locus,
)

KAPPA_BRANCH = "signal, slow branch, along the phase-matched direction"
NOTES = (
    f"d-tensor convention: {D_CONVENTION}",
    f"GVD kappa: {KAPPA_BRANCH}",
    "GVM = 1/u_s - 1/u_p (signed)",
    "G2 uses sinc(kappa nu^2 L/4); pair rate uses sinc^2(kappa nu^2 L/2): arguments differ by 2x as in the source equations",
    "phase mismatch Delta k = kappa nu^2 with nu measured from degeneracy (omega_p/2)",
    "rate normalised per mW of pump and per mm of crystal (raw rate scales as L^2)",
)
SORT_KEYS = ("rate", "d_eff", "tau_c", "refcode")
STATUSES = ("ok", "not-phase-matchable", "filtered", "error")


@dataclass(frozen=True)
class RunConfig:
    pump: PumpConfig = field(default_factory=PumpConfig)
    length_mm: float | None = None  # None: use each record's length
    kleinman: bool = True
    index_tolerance: float = INDEX_TOLERANCE
    scan_step: float = SCAN_STEP
    phi_step: float = PHI_STEP
    mismatch_tol: float = MISMATCH_TOL
    branch_config: str = "pump-fast/signal-slow"
    sort_key: str = "rate"
    whitelist: tuple = ()
    output: str | None = None
    jobs: int = 1  # execution detail: neither hashed nor written to reports

    def __post_init__(self):
        if self.branch_config not in BRANCH_CONFIGS:
            raise ValueError(f"unknown branch configuration {self.branch_config!r}")
        if self.sort_key not in SORT_KEYS:
            raise ValueError(f"sort key must be one of {SORT_KEYS}")
        if self.length_mm is not None and not self.length_mm > 0:
            raise ValueError("length_mm must be > 0")
        object.__setattr__(self, "whitelist", tuple(sorted(self.whitelist)))

    def as_dict(self):
        d = asdict(self)
        d.pop("jobs")
        return d

    def digest(self):
        blob = json.dumps(self.as_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class ScreeningRow:
    refcode: str
    status: str = "ok"
    detail: str = ""
    crystal_class: str | None = None
    band_gap_ev: float | None = None
    optic_kind: str | None = None
    optic_sign: str | None = None
    pm_label: str | None = None
    pump_wavelength_nm: float | None = None
    signal_wavelength_nm: float | None = None
    birefringence: float | None = None
    theta_deg: float | None = None
    phi_deg: float | None = None
    n_pm_directions: int | None = None
    d_eff_pm_per_V: float | None = None
    gvm_fs_per_mm: float | None = None
    kappa_fs2_per_mm: float | None = None
    acceptance_bandwidth_nm: float | None = None
    tau_c_fs: float | None = None
    detector_bandwidth_rad_per_s: float | None = None
    rate_per_s_mW_mm: float | None = None
    raw_rate_per_s: float | None = None
    length_mm: float | None = None
    frame: str | None = None
    kappa_branch: str = KAPPA_BRANCH
    source: str | None = None
    record_sha256: str | None = None
    config_hash: str | None = None

    NUMERIC = ("band_gap_ev", "pump_wavelength_nm", "signal_wavelength_nm", "birefringence", "theta_deg", "phi_deg",
               "d_eff_pm_per_V", "gvm_fs_per_mm", "kappa_fs2_per_mm", "acceptance_bandwidth_nm", "tau_c_fs",
               "detector_bandwidth_rad_per_s", "rate_per_s_mW_mm", "raw_rate_per_s", "length_mm")

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def is_complete(self):
        return all(getattr(self, k) is not None and math.isfinite(getattr(self, k)) for k in self.NUMERIC)


def column_names():
    return [f.name for f in fields(ScreeningRow)]


def _octant_phi(phi):
    p = phi % 180.0
    return 180.0 - p if p > 90.0 else p


def _source_label(record):
    return Path(record.source).name if record.source else None


def screen_one(record, config=None):
    """Full pipeline for one validated record; never raises for per-crystal failures."""
    config = config or RunConfig()
    pump = config.pump
    lam_p, lam_s = pump.pump_wavelength, pump.signal_wavelength
    length = config.length_mm or record.length
    row = ScreeningRow(
        refcode=record.refcode, crystal_class=record.crystal_class, band_gap_ev=record.band_gap,
        pump_wavelength_nm=lam_p, signal_wavelength_nm=lam_s, length_mm=length,
        source=_source_label(record), record_sha256=record.digest, config_hash=config.digest(),
    )
    try:
        crystal = orient_crystal(record, lam_s, window=(0.8 * lam_p, 1.2 * lam_s), tolerance=config.index_tolerance)
        row.optic_kind, row.optic_sign = crystal.optic.kind, crystal.optic.sign
        row.frame = "".join(crystal.frame.permutation) + "".join("+" if s > 0 else "-" for s in crystal.frame.sign_flips)
        row.birefringence = birefringence(crystal.principal_indices(lam_s))
        if crystal.optic.kind == "isotropic":
            row.status, row.detail = "not-phase-matchable", "optically isotropic: no birefringence"
            return row

        sol = solve_phase_matching(crystal, pump, config.phi_step, config.scan_step, config.mismatch_tol,
                                   config.branch_config)
        row.pm_label = sol.label or config.branch_config
        row.n_pm_directions = len(sol.directions)
        if not sol.matchable:
            row.status, row.detail = "not-phase-matchable", f"no type-I phase matching at signal {lam_s:g} nm"
            return row

        chi2 = prepared_chi2(crystal, pump, config.kleinman)

        def deff(t, p):
            return crystal_deff(crystal, pump, t, p, config.kleinman, config.branch_config, chi2).value

        if crystal.optic.kind == "uniaxial":
            n_phi = int(round(90.0 / config.phi_step)) + 1
            octant = [(t, float(p)) for t, _ in sol.directions for p in np.linspace(0.0, 90.0, n_phi)]
            project = None
        else:
            octant = list(sol.directions)

            def project(t, p):
                hit = theta_on_locus(crystal, pump, _octant_phi(p), t, window=2.0 * config.phi_step,
                                     tol=config.mismatch_tol, branch_config=config.branch_config)
                return None if hit is None else (hit[0], p)

        best = max_deff_on_locus(expand_symmetry(octant), deff, project, config.branch_config)
        row.theta_deg, row.phi_deg, row.d_eff_pm_per_V = best.theta, best.phi, best.value

        pump_branch, signal_branch = BRANCH_CONFIGS[config.branch_config]
        sig = directional_group_quantities(crystal.models, lam_s, best.theta, best.phi, signal_branch)
        pmp = directional_group_quantities(crystal.models, lam_p, best.theta, best.phi, pump_branch)
        row.gvm_fs_per_mm = 1.0 / sig.u - 1.0 / pmp.u
        row.kappa_fs2_per_mm = sig.kappa
        row.acceptance_bandwidth_nm = acceptance_bandwidth_from_kappa(sig.kappa, length, lam_s)[1]

        bw = pump.detector_bandwidth or default_detector_bandwidth(sig.kappa, length)
        row.detector_bandwidth_rad_per_s = bw
        row.tau_c_fs = g2_with_correlation_time(sig.kappa, length, bw).tau_c

        spectral = spectral_integral(lam_p, sig.kappa, length, bw)
        rate = pair_rate(best.value, sig.n, sig.n, sig.n_g, sig.n_g, pmp.n, sig.kappa, pump, length, spectral)
        row.rate_per_s_mW_mm, row.raw_rate_per_s = rate.rate, rate.raw_rate
        if not row.is_complete():
            row.status, row.detail = "error", "non-finite result"
    except NotPhaseMatchableError as exc:
        row.status, row.detail = "not-phase-matchable", str(exc)
    except (SpdcScreenError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        row.status, row.detail = "error", f"{type(exc).__name__}: {exc}"
    return row


@dataclass
class ScreeningReport:
    rows: list
    config: RunConfig
    summary: dict = field(default_factory=dict)
    trends: dict = field(default_factory=dict)
    notes: tuple = NOTES
    version: str = __version__

    @property
    def config_hash(self):
        return self.config.digest()


def _sort_rows(rows, key):
    def k(r):
        if key == "refcode":
            return (0, 0.0, r.refcode)
        value = {"rate": r.rate_per_s_mW_mm, "tau_c": r.tau_c_fs,
                 "d_eff": None if r.d_eff_pm_per_V is None else abs(r.d_eff_pm_per_V)}[key]
        ok = r.status == "ok" and value is not None
        return (0 if ok else 1, -value if ok else 0.0, r.refcode)

    return sorted(rows, key=k)


def trend_annotations(rows):
    """Spearman rank correlation of band gap against each property over ok rows."""
    ok = [r for r in rows if r.status == "ok"]
    out = {}
    for name, get in (("birefringence", lambda r: r.birefringence),
                      ("abs_d_eff", lambda r: abs(r.d_eff_pm_per_V)),
                      ("abs_kappa", lambda r: abs(r.kappa_fs2_per_mm)),
                      ("tau_c", lambda r: r.tau_c_fs)):
        if len(ok) < 3:
            out[name] = None
            continue
        gaps = [r.band_gap_ev for r in ok]
        vals = [get(r) for r in ok]
        if len(set(gaps)) < 2 or len(set(vals)) < 2:
            out[name] = None
            continue
        rho = float(stats.spearmanr(gaps, vals).statistic)
        out[name] = {"spearman_rho": rho, "negative": rho < 0, "n": len(ok)}
    return out


def build_report(rows, config):
    rows = _sort_rows(rows, config.sort_key)
    summary = {s: sum(r.status == s for r in rows) for s in STATUSES}
    summary["total"] = len(rows)
    return ScreeningReport(rows, config, summary, trend_annotations(rows))


def _screen_task(args):
    record, config = args
    return screen_one(record, config)


def _load_task(path):
    try:
        return load_crystal(path), None
    except (SpdcScreenError, OSError) as exc:
        return None, f"{type(exc).__name__}: {exc}"


def resolve_jobs(jobs):
    env = os.environ.get("SPDC_SCREEN_JOBS")
    if env:
        jobs = int(env)
    return max(1, int(jobs or 1))


def screen_records(records, config, jobs=None):
    jobs = resolve_jobs(config.jobs if jobs is None else jobs)
    tasks = [(r, config) for r in records]
    if jobs == 1 or len(tasks) <= 1:
        return [_screen_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
        return list(pool.map(_screen_task, tasks))


def filtered_row(decision, config):
    """Row for a record rejected by ``filter_candidates``."""
    rec = decision.record
    return ScreeningRow(refcode=rec.refcode, status="filtered", detail=f"{decision.code}: {decision.detail}",
                        crystal_class=rec.crystal_class, band_gap_ev=rec.band_gap,
                        pump_wavelength_nm=config.pump.pump_wavelength,
                        signal_wavelength_nm=config.pump.signal_wavelength,
                        source=_source_label(rec), record_sha256=rec.digest, config_hash=config.digest())


def screen_batch(directory, config=None, jobs=None):
    """Screen every ``*.toml`` record in ``directory`` and rank the results."""
    config = config or RunConfig()
    paths = sorted(Path(directory).glob("*.toml"))
    if not paths:
        raise InputError(f"no crystal records (*.toml) in {directory}")
    rows, records = [], []
    for path in paths:
        record, err = _load_task(path)
        if record is None:
            rows.append(ScreeningRow(refcode=path.stem, status="error", detail=err, source=path.name,
                                     config_hash=config.digest()))
        else:
            records.append(record)
    decisions = filter_candidates(records, config.pump, config.whitelist)
    rows.extend(filtered_row(d, config) for d in decisions.rejected)
    screened = screen_records([d.record for d in decisions.accepted], config, jobs)
    for d, row in zip(decisions.accepted, screened):
        if d.code == "whitelisted":
            row.detail = "; ".join(x for x in ("whitelisted: band gap below pump photon energy", row.detail) if x)
    rows.extend(screened)
    return build_report(rows, config)


def wavelength_sweep(record, signal_wavelengths, config=None):
    """One screening row per signal wavelength (pump at half of it)."""
    config = config or RunConfig()
    rows = []
    for lam_s in signal_wavelengths:
        pump = replace(config.pump, pump_wavelength=float(lam_s) / 2.0)
        rows.append(screen_one(record, replace(config, pump=pump)))
    return rows
