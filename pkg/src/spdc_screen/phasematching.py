"""Type-I collinear degenerate birefringent phase matching.

The signal and idler share one polarization branch at lambda_s = 2 lambda_p.
With normal dispersion the pump index exceeds the signal index on the same
branch, so matching requires the pump on the fast (lower-index) branch and
the degenerate pair on the slow branch: ``ooe`` for negative uniaxial
crystals (o signal, e pump) and ``eeo`` for positive ones.  The mismatch
function is ``n_pump,fast(theta, phi) - n_signal,slow(theta, phi)``.

Roots are bracketed on a uniform theta grid (0.1 deg default) and refined
by bisection; grid points where the mismatch is already below tolerance are
accepted as roots (boundary and tangent cases).  Directions are reported in
the fundamental octant theta, phi in [0, 90] deg; ``expand_symmetry`` maps
them onto the upper hemisphere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import ContractViolation
from .fresnel import direction_indices

SCAN_STEP = 0.1  # deg
MISMATCH_TOL = 1e-10
PHI_STEP = 1.0  # deg

BRANCH_CONFIGS = {
    "pump-fast/signal-slow": ("fast", "slow"),
    "pump-slow/signal-fast": ("slow", "fast"),
}


@dataclass(frozen=True)
class PhaseMatchSolution:
    directions: tuple  # ((theta_deg, phi_deg), ...)
    residuals: tuple
    branch_config: str
    wavelengths: tuple  # (pump_nm, signal_nm)
    label: str = ""  # ooe / eeo for uniaxial crystals
    kind: str = "uniaxial"

    @property
    def matchable(self):
        return bool(self.directions)


def uniaxial_label(optic, branch_config="pump-fast/signal-slow"):
    """o/e label (signal, idler, pump) for a uniaxial crystal."""
    pump_branch, _ = BRANCH_CONFIGS[branch_config]
    # e is the fast branch in a negative crystal
    pump_is_e = (pump_branch == "fast") == (optic.sign == "negative")
    return "ooe" if pump_is_e else "eeo"


def mismatch_function(crystal, pump_wavelength, branch_config="pump-fast/signal-slow"):
    """Vectorised Delta n(theta, phi) for a pump wavelength (signal at twice it)."""
    pump_branch, signal_branch = BRANCH_CONFIGS[branch_config]
    npump = crystal.principal_indices(pump_wavelength).as_tuple()
    nsig = crystal.principal_indices(2.0 * pump_wavelength).as_tuple()
    branch = {"slow": 0, "fast": 1}

    def f(theta_deg, phi_deg):
        p = direction_indices(*npump, theta_deg, phi_deg)[branch[pump_branch]]
        s = direction_indices(*nsig, theta_deg, phi_deg)[branch[signal_branch]]
        return p - s

    return f


def scan_roots(f, lo=0.0, hi=90.0, step=SCAN_STEP, tol=MISMATCH_TOL):
    """All roots of a scalar function on [lo, hi]: grid bracketing plus bisection.

    Returns a list of (x, |f(x)|).  Runs of consecutive grid points that are
    already within ``tol`` collapse to the point of smallest |f|.
    """
    n = int(round((hi - lo) / step)) + 1
    grid = np.linspace(lo, hi, n)
    vals = np.asarray(f(grid), dtype=float)
    small = np.abs(vals) < tol
    roots = []
    i = 0
    while i < n:
        if small[i]:
            j = i
            while j + 1 < n and small[j + 1]:
                j += 1
            k = i + int(np.argmin(np.abs(vals[i : j + 1])))
            roots.append((float(grid[k]), float(abs(vals[k]))))
            i = j + 1
        else:
            i += 1
    for i in range(n - 1):
        if small[i] or small[i + 1] or np.sign(vals[i]) == np.sign(vals[i + 1]):
            continue
        x = optimize.bisect(lambda t: float(f(t)), grid[i], grid[i + 1], xtol=1e-13, rtol=4 * np.finfo(float).eps,
                            maxiter=200)
        roots.append((float(x), float(abs(f(x)))))
    roots.sort()
    return roots


def solve_uniaxial_pm(crystal, pump, step=SCAN_STEP, tol=MISMATCH_TOL, branch_config="pump-fast/signal-slow"):
    """All theta_m on [0, 90] deg for a uniaxial crystal (phi is irrelevant, reported as 0)."""
    if crystal.optic.kind != "uniaxial":
        raise ContractViolation(f"solve_uniaxial_pm needs a uniaxial crystal, got {crystal.optic.kind}")
    f = mismatch_function(crystal, pump.pump_wavelength, branch_config)
    roots = scan_roots(lambda t: f(t, 0.0), 0.0, 90.0, step, tol)
    return PhaseMatchSolution(
        directions=tuple((t, 0.0) for t, _ in roots),
        residuals=tuple(r for _, r in roots),
        branch_config=branch_config,
        wavelengths=(pump.pump_wavelength, pump.signal_wavelength),
        label=uniaxial_label(crystal.optic, branch_config),
        kind="uniaxial",
    )


def solve_biaxial_pm_locus(crystal, pump, phi_step=PHI_STEP, step=SCAN_STEP, tol=MISMATCH_TOL,
                           branch_config="pump-fast/signal-slow"):
    """Phase-matching locus theta_m(phi) over phi in [0, 90] deg.

    Accepts any anisotropic crystal; for a uniaxial input the locus is flat
    in phi.
    """
    if crystal.optic.kind == "isotropic":
        raise ContractViolation("solve_biaxial_pm_locus needs an anisotropic crystal")
    f = mismatch_function(crystal, pump.pump_wavelength, branch_config)
    n_phi = int(round(90.0 / phi_step)) + 1
    phis = np.linspace(0.0, 90.0, n_phi)
    directions, residuals = [], []
    for phi in phis:
        for t, r in scan_roots(lambda th: f(th, phi), 0.0, 90.0, step, tol):
            directions.append((t, float(phi)))
            residuals.append(r)
    return PhaseMatchSolution(
        directions=tuple(directions),
        residuals=tuple(residuals),
        branch_config=branch_config,
        wavelengths=(pump.pump_wavelength, pump.signal_wavelength),
        label="",
        kind="biaxial",
    )


def solve_phase_matching(crystal, pump, phi_step=PHI_STEP, step=SCAN_STEP, tol=MISMATCH_TOL,
                         branch_config="pump-fast/signal-slow"):
    """Dispatch on the optic class; isotropic crystals give an empty solution."""
    if crystal.optic.kind == "uniaxial":
        return solve_uniaxial_pm(crystal, pump, step, tol, branch_config)
    if crystal.optic.kind == "biaxial":
        return solve_biaxial_pm_locus(crystal, pump, phi_step, step, tol, branch_config)
    return PhaseMatchSolution((), (), branch_config, (pump.pump_wavelength, pump.signal_wavelength), "", "isotropic")


def theta_on_locus(crystal, pump, phi_deg, theta_guess, window=0.5, tol=MISMATCH_TOL,
                   branch_config="pump-fast/signal-slow"):
    """Locus theta at ``phi_deg`` nearest ``theta_guess``, searched within +/- ``window`` deg."""
    f = mismatch_function(crystal, pump.pump_wavelength, branch_config)
    lo = max(0.0, theta_guess - window)
    hi = min(90.0, theta_guess + window)
    if hi <= lo:
        return None
    roots = scan_roots(lambda t: f(t, phi_deg), lo, hi, (hi - lo) / 50.0, tol)
    if not roots:
        return None
    return min(roots, key=lambda r: abs(r[0] - theta_guess))


def expand_symmetry(directions):
    """Images of octant directions under the mmm symmetry of the index surface.

    Returns (theta, phi) pairs with phi in [0, 360), upper hemisphere only
    (k -> -k leaves both indices and |d_eff| unchanged).
    """
    out = []
    seen = set()
    for theta, phi in directions:
        for p in (phi, 180.0 - phi, 180.0 + phi, 360.0 - phi):
            p = p % 360.0
            key = (round(theta, 12), round(p, 12))
            if key not in seen:
                seen.add(key)
                out.append((theta, p))
    return out


@dataclass(frozen=True)
class CurvePoint:
    signal_wavelength: float
    pump_wavelength: float
    theta: float  # nan inside a gap
    phi: float
    residual: float  # nan inside a gap
    branch_config: str


def pm_curve_vs_wavelength(crystal, signal_wavelengths, phi_deg=0.0, step=SCAN_STEP, tol=MISMATCH_TOL,
                           branch_config="pump-fast/signal-slow"):
    """theta_m versus signal wavelength at fixed phi, with continuation.

    At each wavelength the root nearest the previous one is kept; points
    without a root are returned with theta = nan (a gap).
    """
    from .crystal import PumpConfig

    points = []
    prev = None
    for lam_s in signal_wavelengths:
        lam_s = float(lam_s)
        pump = PumpConfig(pump_wavelength=lam_s / 2.0)
        f = mismatch_function(crystal, pump.pump_wavelength, branch_config)
        roots = scan_roots(lambda t: f(t, phi_deg), 0.0, 90.0, step, tol)
        if not roots:
            points.append(CurvePoint(lam_s, lam_s / 2.0, math.nan, float(phi_deg), math.nan, branch_config))
            prev = None
            continue
        if prev is None:
            theta, res = roots[0]
        else:
            theta, res = min(roots, key=lambda r: abs(r[0] - prev))
        prev = theta
        points.append(CurvePoint(lam_s, lam_s / 2.0, theta, float(phi_deg), res, branch_config))
    return points
