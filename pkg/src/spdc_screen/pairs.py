"""Biphoton correlation function G2(tau) and the single-mode pair rate.

Units: tau in fs, detuning nu in rad/fs internally, detector bandwidth in
rad/s at the API, kappa in fs^2/mm, L in mm.  sinc(x) = sin(x)/x.

G2(tau) ~ | int dnu sinc(kappa nu^2 L / 4) exp(-nu^2/sigma^2) exp(-i nu tau) |^2

The pair rate integrates omega_1 (omega_p - omega_1) sinc^2(Delta k L / 2)
with Delta k = kappa nu^2 and nu = omega_1 - omega_p / 2, i.e. the mismatch
is centred on degeneracy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .constants import SPEED_OF_LIGHT, VACUUM_PERMITTIVITY, angular_frequency
from .errors import GridError, QuadratureError

GAUSSIAN_WINDOW = 8.0  # integrate |nu| <= 8 sigma
AUTO_BANDWIDTH_FACTOR = 5.0
RATE_SINC_ZEROS = 40
FWHM_RTOL = 1e-3
_KAPPA_TO_SI = 1e-27  # fs^2/mm -> s^2/m


def sinc(x):
    return np.sinc(np.asarray(x) / np.pi)


def default_detector_bandwidth(kappa, length_mm):
    """5x the detuning of the first zero of sinc(kappa nu^2 L / 4), in rad/s.

    With this choice the crystal, not the detector, sets the correlation time.
    """
    if kappa == 0.0:
        raise ValueError("automatic detector bandwidth needs kappa != 0")
    nu0 = math.sqrt(4.0 * math.pi / (abs(kappa) * length_mm))  # rad/fs
    return AUTO_BANDWIDTH_FACTOR * nu0 * 1e15


@dataclass(frozen=True, eq=False)
class G2Profile:
    taus: np.ndarray  # fs, symmetric about 0
    values: np.ndarray  # normalised, peak 1
    tau_c: float  # fs, nan until computed
    kappa: float
    length: float
    bandwidth: float  # rad/s


def _g2_amplitudes(taus, kappa, length, sigma_fs):
    a = kappa * length / 4.0
    upper = GAUSSIAN_WINDOW * sigma_fs
    taus = np.asarray(taus, dtype=float)

    def f(nu):
        return sinc(a * nu * nu) * math.exp(-((nu / sigma_fs) ** 2)) * np.cos(nu * taus)

    # |integrand| <= 1, so the amplitude scale is bounded by the window width
    epsabs = 1e-13 * sigma_fs
    val, err = integrate.quad_vec(f, 0.0, upper, epsabs=epsabs, epsrel=1e-10, norm="max", limit=20000)
    if not err <= 10.0 * max(epsabs, 1e-10 * float(np.max(np.abs(val)))):
        raise QuadratureError(f"G2 quadrature did not converge (error estimate {err:.3g})",
                              estimate=2.0 * val, error=2.0 * err)
    return 2.0 * val


def g2_profile(kappa, length, detector_bandwidth, taus):
    """Normalised G2 on a tau grid (fs), evaluated by adaptive quadrature.

    The integrand is even in nu, so only the cosine transform over
    [0, 8 sigma] is computed (one vector-valued adaptive quadrature for all
    tau); values are mirrored so G2(-tau) = G2(tau) exactly.
    """
    if not math.isfinite(kappa):
        raise ValueError("kappa must be finite")
    if length <= 0 or detector_bandwidth <= 0:
        raise ValueError("length and detector bandwidth must be > 0")
    sigma_fs = detector_bandwidth * 1e-15
    half = np.unique(np.abs(np.asarray(taus, dtype=float)))
    if half[0] != 0.0:
        half = np.concatenate([[0.0], half])
    amp = _g2_amplitudes(half, kappa, length, sigma_fs)
    vals = (amp / amp[0]) ** 2
    full_t = np.concatenate([-half[:0:-1], half])
    full_v = np.concatenate([vals[:0:-1], vals])
    return G2Profile(full_t, np.clip(full_v, 0.0, 1.0), math.nan, float(kappa), float(length),
                     float(detector_bandwidth))


def _fwhm_from_samples(taus, values):
    i0 = int(np.argmin(np.abs(taus)))
    if values[i0] < 0.5:
        raise GridError("profile maximum is not at tau = 0")
    edges = []
    for direction in (1, -1):
        i = i0
        while 0 <= i + direction < len(taus) and values[i + direction] >= 0.5:
            i += direction
        j = i + direction
        if not 0 <= j < len(taus):
            raise GridError("half maximum not bracketed inside the tau grid; widen the grid")
        t1, t2, v1, v2 = taus[i], taus[j], values[i], values[j]
        edges.append(t1 + (0.5 - v1) * (t2 - t1) / (v2 - v1))
    return abs(edges[0] - edges[1])


def correlation_time(profile, rtol=FWHM_RTOL, max_refinements=8):
    """FWHM (fs) of G2 by linear interpolation, refining the grid until stable.

    The grid keeps the profile's span and doubles its density until two
    successive estimates agree within ``rtol``.
    """
    fwhm = _fwhm_from_samples(profile.taus, profile.values)
    span = float(np.max(np.abs(profile.taus)))
    n_half = max(int(np.sum(profile.taus >= 0)), 8)
    for _ in range(max_refinements):
        n_half = 2 * n_half
        taus = np.linspace(0.0, span, n_half)
        finer = g2_profile(profile.kappa, profile.length, profile.bandwidth, taus)
        new = _fwhm_from_samples(finer.taus, finer.values)
        if abs(new - fwhm) <= rtol * new:
            return new
        fwhm = new
    raise GridError(f"FWHM did not converge to {rtol:g} after {max_refinements} refinements")


def auto_tau_span(kappa, length, detector_bandwidth):
    """A tau half-span (fs) comfortably containing the central G2 lobe."""
    gauss = 2.0 * math.sqrt(2.0 * math.log(2.0)) / (detector_bandwidth * 1e-15)
    crystal = math.sqrt(abs(kappa) * length)
    return 4.0 * max(gauss, crystal)


def g2_with_correlation_time(kappa, length, detector_bandwidth, n_half=64):
    """Profile on an automatic grid plus its converged FWHM."""
    span = auto_tau_span(kappa, length, detector_bandwidth)
    for _ in range(4):
        prof = g2_profile(kappa, length, detector_bandwidth, np.linspace(0.0, span, n_half))
        try:
            tau_c = correlation_time(prof)
        except GridError as exc:
            if "widen" not in str(exc):
                raise
            span *= 2.0
            continue
        return G2Profile(prof.taus, prof.values, tau_c, prof.kappa, prof.length, prof.bandwidth)
    raise GridError("half maximum not found within an expanded tau grid")


# --- pair rate ----------------------------------------------------------------


def beam_overlap_factor(pump_waist, collection_waist):
    """|sigma_p^2 / (sigma_1^2 + 2 sigma_p^2)|^2, bounded above by 1/4."""
    sp2 = pump_waist**2
    return (sp2 / (collection_waist**2 + 2.0 * sp2)) ** 2


def pump_field_squared(power_w, pump_waist_m, n_pump):
    """|E_p^0|^2 (V^2/m^2) of a Gaussian pump of power P.

    From P = c |D|^2 pi sigma_p^2 / (n^3 eps0) and |E| = |D| / (eps0 n^2).
    """
    d2 = power_w * n_pump**3 * VACUUM_PERMITTIVITY / (SPEED_OF_LIGHT * math.pi * pump_waist_m**2)
    return d2 / (VACUUM_PERMITTIVITY * n_pump**2) ** 2


@dataclass(frozen=True)
class PairRateResult:
    rate: float  # s^-1 mW^-1 mm^-1
    raw_rate: float  # s^-1 at the configured power and length
    window: float  # integration half-width in detuning, rad/s
    lobes: int  # number of quadrature panels
    spectral_integral: float  # rad^3/s^3


def spectral_integral(pump_wavelength, kappa, length_mm, detector_bandwidth=None):
    """int d omega_1 omega_1 (omega_p - omega_1) sinc^2(kappa nu^2 L / 2) over the window.

    The window is |nu| <= the 40th sinc zero or the detector bandwidth,
    whichever is smaller; the integral is split at every sinc zero.
    Returns (value, window rad/s, panel count).
    """
    wp = angular_frequency(pump_wavelength)
    k_si = abs(kappa) * _KAPPA_TO_SI
    L = length_mm * 1e-3
    if k_si > 0:
        zeros = [math.sqrt(2.0 * m * math.pi / (k_si * L)) for m in range(RATE_SINC_ZEROS + 1)]
        window = zeros[-1]
    else:
        zeros = [0.0]
        window = math.inf
    if detector_bandwidth is not None:
        window = min(window, detector_bandwidth)
    if not math.isfinite(window):
        raise ValueError("kappa = 0 needs a finite detector bandwidth to bound the rate integral")
    window = min(window, 0.5 * wp)
    edges = [z for z in zeros if z < window] + [window]

    def f(nu):
        return (0.25 * wp * wp - nu * nu) * float(sinc(0.5 * k_si * nu * nu * L)) ** 2

    total = 0.0
    for a, b in zip(edges, edges[1:]):
        val, err = integrate.quad(f, a, b, epsabs=0.0, epsrel=1e-11, limit=200)
        if not err <= 1e-8 * abs(val) + 1e-300:
            raise QuadratureError("pair-rate quadrature did not converge", estimate=val, error=err)
        total += val
    return 2.0 * total, window, len(edges) - 1


def pair_rate(d_eff, n_signal, n_idler, ng_signal, ng_idler, n_pump, kappa, pump, length_mm, spectral=None):
    """Single-mode type-I pair rate.

    R = |E_p|^2 d_eff^2 L^2 / (2 pi c^2) * ng1 ng2 / (n1 n2)
        * |sigma_p^2 / (sigma_1^2 + 2 sigma_p^2)|^2 * int d omega_1 ...

    ``d_eff`` in pm/V; refractive and group indices along the phase-matched
    direction; ``pump`` a ``PumpConfig``.  ``spectral`` may pass a
    precomputed ``spectral_integral`` result.  The normalised rate divides
    by pump power (mW) and by one power of the length (mm).
    """
    if not all(math.isfinite(v) for v in (d_eff, n_signal, n_idler, ng_signal, ng_idler, n_pump, kappa)):
        raise ValueError("pair_rate inputs must be finite")
    if spectral is None:
        spectral = spectral_integral(pump.pump_wavelength, kappa, length_mm, pump.detector_bandwidth)
    integral, window, panels = spectral
    power_w = pump.pump_power * 1e-3
    e2 = pump_field_squared(power_w, pump.pump_waist * 1e-6, n_pump)
    d = d_eff * 1e-12
    L = length_mm * 1e-3
    prefactor = e2 * d * d * L * L / (2.0 * math.pi * SPEED_OF_LIGHT**2)
    raw = (prefactor * (ng_signal * ng_idler) / (n_signal * n_idler)
           * beam_overlap_factor(pump.pump_waist, pump.collection_waist) * integral)
    if not math.isfinite(raw):
        raise QuadratureError("non-finite pair rate", estimate=raw)
    return PairRateResult(raw / (pump.pump_power * length_mm), raw, window, panels, integral)
