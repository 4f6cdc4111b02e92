"""Refractive-index dispersion models and group-velocity quantities.

Two model forms are supported:

* ``SellmeierModel``: n^2 = A + sum_i B_i L^2 / (L^2 - C_i) - D L^2 with L in
  micrometres (so C_i is in um^2 and D in um^-2).  Derivatives are analytic.
* ``TableModel``: tabulated (wavelength, index) pairs interpolated with a
  monotone cubic (PCHIP); derivatives use 5-point centred differences.

Public functions take wavelengths in nm.  Group-velocity dispersion
``kappa`` is d^2k/d omega^2 in fs^2/mm and group-velocity mismatch is in
fs/mm.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize
from scipy.interpolate import PchipInterpolator

from . import fresnel
from .constants import C_MM_PER_FS, SPEED_OF_LIGHT
from .errors import DispersionRangeError, FitError, UnboundedBandwidthError

FIT_RESIDUAL_LIMIT = 1e-3
TABLE_STEP = 1e-4  # relative stencil step for table derivatives
_KAPPA_SI_TO_FS2_PER_MM = 1e30 / 1e3


def _check_range(valid_range, wavelength_nm):
    if valid_range is None:
        return
    lo, hi = valid_range
    w = np.asarray(wavelength_nm, dtype=float)
    if np.any(w < lo) or np.any(w > hi):
        raise DispersionRangeError(
            f"wavelength {np.min(w):g}-{np.max(w):g} nm outside valid range [{lo:g}, {hi:g}] nm"
        )


@dataclass(frozen=True)
class SellmeierModel:
    A: float
    B: tuple[float, ...] = ()
    C: tuple[float, ...] = ()
    D: float = 0.0
    valid_range: tuple[float, float] | None = None
    fit_residual: float | None = None
    provenance: str | None = None

    form = "sellmeier"

    def __post_init__(self):
        object.__setattr__(self, "B", tuple(float(b) for b in self.B))
        object.__setattr__(self, "C", tuple(float(c) for c in self.C))
        if len(self.B) != len(self.C):
            raise ValueError("Sellmeier B and C must have the same length")
        if self.valid_range is not None:
            lo, hi = (float(v) for v in self.valid_range)
            if not 0 < lo < hi:
                raise ValueError(f"bad valid_range {self.valid_range}")
            object.__setattr__(self, "valid_range", (lo, hi))
            for b, c in zip(self.B, self.C):
                if b != 0.0 and c > 0 and lo <= 1e3 * math.sqrt(c) <= hi:
                    raise ValueError(
                        f"Sellmeier pole at {1e3 * math.sqrt(c):g} nm lies inside valid range [{lo:g}, {hi:g}]"
                    )

    @classmethod
    def from_inverse_form(cls, A, terms, D=0.0, **kwargs):
        """Build from the common n^2 = A + sum B/(L^2 - C) - D L^2 form.

        B/(L^2 - C) = (B/C) L^2/(L^2 - C) - B/C, so the conversion is exact.
        """
        A2 = float(A) - sum(b / c for b, c in terms)
        return cls(A2, tuple(b / c for b, c in terms), tuple(c for _, c in terms), D, **kwargs)

    def with_valid_range(self, valid_range):
        return replace(self, valid_range=valid_range)

    def epsilon(self, wavelength_nm):
        _check_range(self.valid_range, wavelength_nm)
        lam2 = (np.asarray(wavelength_nm, dtype=float) * 1e-3) ** 2
        eps = self.A - self.D * lam2
        for b, c in zip(self.B, self.C):
            eps = eps + b * lam2 / (lam2 - c)
        return eps

    def derivatives(self, wavelength_nm):
        """Return (n, dn/dL, d^2n/dL^2) with L in nm."""
        _check_range(self.valid_range, wavelength_nm)
        lam = np.asarray(wavelength_nm, dtype=float) * 1e-3
        lam2 = lam * lam
        f = self.A - self.D * lam2
        f1 = -2.0 * self.D * lam
        f2 = -2.0 * self.D + 0.0 * lam
        for b, c in zip(self.B, self.C):
            q = lam2 - c
            f = f + b * lam2 / q
            f1 = f1 - 2.0 * b * c * lam / q**2
            f2 = f2 + 2.0 * b * c * (3.0 * lam2 + c) / q**3
        n = np.sqrt(f)
        n1 = f1 / (2.0 * n)
        n2 = (f2 - 2.0 * n1**2) / (2.0 * n)
        return n, n1 * 1e-3, n2 * 1e-6


@dataclass(frozen=True)
class TableModel:
    wavelengths: tuple[float, ...]
    indices: tuple[float, ...]
    interpolation: str = "pchip"
    provenance: str | None = None
    _interp: object = field(init=False, repr=False, compare=False)

    form = "table"

    def __post_init__(self):
        w = tuple(float(v) for v in self.wavelengths)
        n = tuple(float(v) for v in self.indices)
        object.__setattr__(self, "wavelengths", w)
        object.__setattr__(self, "indices", n)
        if len(w) != len(n) or len(w) < 2:
            raise ValueError("table needs at least two (wavelength, index) pairs of equal length")
        if any(b <= a for a, b in zip(w, w[1:])):
            raise ValueError("table wavelengths must be strictly increasing")
        if any(v <= 0 for v in n):
            raise ValueError("table indices must be positive")
        if self.interpolation == "pchip":
            interp = PchipInterpolator(w, n, extrapolate=False)
        elif self.interpolation == "linear":
            wa, na = np.array(w), np.array(n)
            interp = lambda x: np.interp(x, wa, na)  # noqa: E731
        else:
            raise ValueError(f"unknown interpolation {self.interpolation!r}")
        object.__setattr__(self, "_interp", interp)

    @property
    def valid_range(self):
        return (self.wavelengths[0], self.wavelengths[-1])

    def with_valid_range(self, valid_range):
        # a table can never be evaluated beyond its own span
        return self

    def index(self, wavelength_nm):
        _check_range(self.valid_range, wavelength_nm)
        return self._interp(np.asarray(wavelength_nm, dtype=float))

    def epsilon(self, wavelength_nm):
        return self.index(wavelength_nm) ** 2

    def derivatives(self, wavelength_nm):
        lam = np.asarray(wavelength_nm, dtype=float)
        h = lam * TABLE_STEP
        try:
            _check_range(self.valid_range, [np.min(lam - 2 * h), np.max(lam + 2 * h)])
        except DispersionRangeError as exc:
            raise DispersionRangeError(f"derivative stencil leaves valid range: {exc}") from None
        fm2, fm1, f0, fp1, fp2 = (self._interp(lam + k * h) for k in (-2, -1, 0, 1, 2))
        d1 = (fm2 - 8 * fm1 + 8 * fp1 - fp2) / (12 * h)
        d2 = (-fm2 + 16 * fm1 - 30 * f0 + 16 * fp1 - fp2) / (12 * h * h)
        return f0, d1, d2


DispersionModel = SellmeierModel | TableModel


def eval_index(model, wavelength_nm):
    """Refractive index at ``wavelength_nm``; raises outside the valid range."""
    if isinstance(model, TableModel):
        n = model.index(wavelength_nm)
    else:
        eps = model.epsilon(wavelength_nm)
        if np.any(eps <= 0):
            raise DispersionRangeError(f"non-positive n^2 at {wavelength_nm} nm")
        n = np.sqrt(eps)
    return float(n) if np.ndim(n) == 0 else n


@dataclass(frozen=True)
class GroupQuantities:
    n: float
    n_g: float
    u: float  # group velocity, mm/fs
    kappa: float  # d^2k/domega^2, fs^2/mm
    dn: float = 0.0  # dn/dlambda, 1/nm
    d2n: float = 0.0  # d^2n/dlambda^2, 1/nm^2


def kappa_from_derivatives(wavelength_nm, dn, d2n):
    """d^2k/d omega^2 in fs^2/mm, evaluated in the frequency domain.

    k = n omega / c gives k'' = (2 dn/domega + omega d^2n/domega^2)/c; the
    wavelength derivatives are converted with dlambda/domega = -lambda^2/(2 pi c).
    """
    lam = wavelength_nm * 1e-9
    n1 = dn * 1e9
    n2 = d2n * 1e18
    c = SPEED_OF_LIGHT
    omega = 2.0 * math.pi * c / lam
    dl = -(lam**2) / (2.0 * math.pi * c)
    d2l = 2.0 * lam**3 / (2.0 * math.pi * c) ** 2
    dn_dw = n1 * dl
    d2n_dw2 = n2 * dl**2 + n1 * d2l
    return (2.0 * dn_dw + omega * d2n_dw2) / c * _KAPPA_SI_TO_FS2_PER_MM


def kappa_wavelength_form(wavelength_nm, d2n):
    """Equivalent GVD expression lambda^3/(2 pi c^2) d^2n/dlambda^2, fs^2/mm."""
    lam = wavelength_nm * 1e-9
    return lam**3 / (2.0 * math.pi * SPEED_OF_LIGHT**2) * d2n * 1e18 * _KAPPA_SI_TO_FS2_PER_MM


def _group(wavelength_nm, n, dn, d2n):
    n_g = n - wavelength_nm * dn
    return GroupQuantities(
        n=float(n),
        n_g=float(n_g),
        u=float(C_MM_PER_FS / n_g),
        kappa=float(kappa_from_derivatives(wavelength_nm, dn, d2n)),
        dn=float(dn),
        d2n=float(d2n),
    )


def group_quantities(model, wavelength_nm):
    """n, group index, group velocity and GVD for one principal axis."""
    n, dn, d2n = model.derivatives(wavelength_nm)
    return _group(wavelength_nm, float(n), float(dn), float(d2n))


def directional_group_quantities(models, wavelength_nm, theta_deg, phi_deg, branch):
    """Group quantities of one polarization branch along a wave normal.

    ``models`` are the X, Y, Z principal-axis dispersion models.
    """
    triples = [m.derivatives(wavelength_nm) for m in models]
    n = [float(t[0]) for t in triples]
    dn = [float(t[1]) for t in triples]
    d2n = [float(t[2]) for t in triples]
    nb, dnb, d2nb = fresnel.branch_index_derivatives(n, dn, d2n, theta_deg, phi_deg, branch)
    return _group(wavelength_nm, nb, dnb, d2nb)


def group_velocity_mismatch(signal: GroupQuantities, pump: GroupQuantities):
    """1/u_s - 1/u_p in fs/mm."""
    return 1.0 / signal.u - 1.0 / pump.u


def gvm(crystal, direction, pump):
    """GVM between the degenerate signal (slow branch) and pump (fast branch).

    ``crystal`` is an oriented crystal (X, Y, Z models), ``direction`` a
    phase-matched (theta, phi) in degrees and ``pump`` a ``PumpConfig``.
    """
    theta, phi = direction
    sig = directional_group_quantities(crystal.models, pump.signal_wavelength, theta, phi, "slow")
    pmp = directional_group_quantities(crystal.models, pump.pump_wavelength, theta, phi, "fast")
    return group_velocity_mismatch(sig, pmp)


# --- spectral acceptance -------------------------------------------------

_half_max_cache = []


def sinc2_half_max_argument():
    """Positive x with (sin x / x)^2 = 1/2, by root solve (~1.391557)."""
    if not _half_max_cache:
        x = optimize.brentq(lambda x: (math.sin(x) / x) ** 2 - 0.5, 1.0, 2.0, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        _half_max_cache.append(x)
    return _half_max_cache[0]


def half_max_detuning(kappa, length_mm):
    """Detuning nu (rad/fs) at which sinc^2(kappa nu^2 L / 2) = 1/2."""
    if kappa == 0.0:
        raise UnboundedBandwidthError("kappa = 0: acceptance bandwidth unbounded under the quadratic mismatch model")
    return math.sqrt(2.0 * sinc2_half_max_argument() / (abs(kappa) * length_mm))


def acceptance_bandwidth_from_kappa(kappa, length_mm, signal_wavelength_nm):
    """Return (FWHM in detuning rad/fs, FWHM in signal wavelength nm)."""
    nu = half_max_detuning(kappa, length_mm)
    omega_s = 2.0 * math.pi * C_MM_PER_FS * 1e6 / signal_wavelength_nm  # rad/fs
    if nu >= omega_s:
        raise UnboundedBandwidthError("half-max detuning exceeds the signal frequency")
    to_nm = 2.0 * math.pi * C_MM_PER_FS * 1e6
    dlam = to_nm / (omega_s - nu) - to_nm / (omega_s + nu)
    return 2.0 * nu, dlam


def acceptance_bandwidth(crystal, direction, pump, length_mm):
    """Signal-wavelength FWHM (nm) of the sinc^2 phase-matching function."""
    theta, phi = direction
    sig = directional_group_quantities(crystal.models, pump.signal_wavelength, theta, phi, "slow")
    return acceptance_bandwidth_from_kappa(sig.kappa, length_mm, pump.signal_wavelength)[1]


# --- fitting -------------------------------------------------------------


def _design(lam2, poles, with_d):
    cols = [np.ones_like(lam2)] + [lam2 / (lam2 - c) for c in poles]
    if with_d:
        cols.append(-lam2)
    return np.column_stack(cols)


def _linear_solve(lam2, eps, poles, with_d):
    X = _design(lam2, poles, with_d)
    scale = np.linalg.norm(X, axis=0)
    scale[scale == 0] = 1.0
    coef, *_ = np.linalg.lstsq(X / scale, eps, rcond=None)
    coef = coef / scale
    return coef, X @ coef - eps


def fit_sellmeier(wavelengths_nm, epsilon, n_terms=2, with_d=True, valid_range=None):
    """Least-squares Sellmeier fit in n^2 = epsilon.

    The linear coefficients (A, B_i, D) are eliminated for fixed pole
    positions (variable projection); only the poles C_i are optimised
    nonlinearly, from several UV/IR starting points.  Returns a
    ``SellmeierModel`` whose ``fit_residual`` is the max relative residual
    in epsilon; raises ``FitError`` when it exceeds 1e-3.
    """
    lam = np.asarray(wavelengths_nm, dtype=float)
    eps = np.asarray(epsilon, dtype=float)
    if lam.shape != eps.shape or lam.ndim != 1:
        raise FitError("wavelength and epsilon samples must be 1-D arrays of equal length")
    n_coef = 1 + n_terms + int(with_d) + n_terms
    if lam.size < n_coef + 2:
        raise FitError(f"underdetermined fit: {lam.size} samples for {n_coef} coefficients (need {n_coef + 2})")
    if np.any(lam <= 0) or np.any(eps <= 0):
        raise FitError("samples must have positive wavelength and epsilon")
    lam2 = (lam * 1e-3) ** 2
    lmin, lmax = lam2.min(), lam2.max()

    if np.ptp(eps) <= 1e-14 * np.max(eps):
        A = float(np.mean(eps))
        return SellmeierModel(A, (0.0,) * n_terms, _default_poles(lmin, lmax, n_terms), 0.0,
                              valid_range=valid_range, fit_residual=float(np.max(np.abs(eps - A)) / A),
                              provenance="fit_sellmeier: constant epsilon")

    # poles parametrised by log of their distance outside the sample span
    def unpack(p):
        uv = [lmin * math.exp(-math.exp(v)) for v in p[: _n_uv(n_terms)]]
        ir = [lmax * math.exp(math.exp(v)) for v in p[_n_uv(n_terms):]]
        return uv + ir

    def resid(p):
        poles = unpack(p)
        return _linear_solve(lam2, eps, poles, with_d)[1] / eps

    best = None
    for start in _starts(lmin, lmax, n_terms):
        try:
            sol = optimize.least_squares(resid, start, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=4000)
        except (ValueError, np.linalg.LinAlgError):
            continue
        cost = float(np.max(np.abs(sol.fun)))
        if best is None or cost < best[0]:
            best = (cost, sol.x)
    if best is None:
        raise FitError("Sellmeier fit failed for every starting point")
    poles = unpack(best[1])
    coef, r = _linear_solve(lam2, eps, poles, with_d)
    residual = float(np.max(np.abs(r / eps)))
    if residual > FIT_RESIDUAL_LIMIT:
        raise FitError(f"Sellmeier fit residual {residual:.3g} exceeds {FIT_RESIDUAL_LIMIT:g}")
    A = float(coef[0])
    B = tuple(float(b) for b in coef[1 : 1 + n_terms])
    D = float(coef[1 + n_terms]) if with_d else 0.0
    return SellmeierModel(A, B, tuple(poles), D, valid_range=valid_range, fit_residual=residual,
                          provenance=f"fit_sellmeier: {lam.size} samples, {n_terms} poles")


def _n_uv(n_terms):
    return (n_terms + 1) // 2


def _default_poles(lmin, lmax, n_terms):
    n_uv = _n_uv(n_terms)
    return tuple([lmin * 0.1] * n_uv + [lmax * 100.0] * (n_terms - n_uv))


def _starts(lmin, lmax, n_terms):
    n_uv = _n_uv(n_terms)
    n_ir = n_terms - n_uv
    uv_starts = [math.log(v) for v in (0.5, 1.5, 3.0)]
    ir_starts = [math.log(v) for v in (1.0, 3.0)]
    for uv in itertools.product(uv_starts, repeat=n_uv):
        for ir in itertools.product(ir_starts, repeat=n_ir):
            yield np.array(list(uv) + list(ir), dtype=float)
