"""Physical constants (CODATA 2018, exact SI where defined).

Pinned here rather than taken from ``scipy.constants`` so reports are
bit-reproducible across scipy releases that ship newer CODATA tables.
"""

import math

SPEED_OF_LIGHT = 299792458.0  # m/s
VACUUM_PERMITTIVITY = 8.8541878128e-12  # F/m
PLANCK = 6.62607015e-34  # J s
HBAR = 1.054571817e-34  # J s
ELEMENTARY_CHARGE = 1.602176634e-19  # C

# E[eV] * lambda[nm]
HC_EV_NM = PLANCK * SPEED_OF_LIGHT / ELEMENTARY_CHARGE * 1e9

# c in mm/fs, so that n / C_MM_PER_FS is an inverse group velocity in fs/mm
C_MM_PER_FS = SPEED_OF_LIGHT * 1e3 * 1e-15


def photon_energy_ev(wavelength_nm):
    """Photon energy in eV for a vacuum wavelength in nm."""
    return HC_EV_NM / wavelength_nm


def angular_frequency(wavelength_nm):
    """Angular frequency in rad/s for a vacuum wavelength in nm."""
    return 2.0 * math.pi * SPEED_OF_LIGHT / (wavelength_nm * 1e-9)


def as_dict():
    return {
        "c_m_per_s": SPEED_OF_LIGHT,
        "epsilon0_F_per_m": VACUUM_PERMITTIVITY,
        "hbar_J_s": HBAR,
        "hc_eV_nm": HC_EV_NM,
    }
