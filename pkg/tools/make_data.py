"""Regenerate the shipped crystal records in src/spdc_screen/data."""

from pathlib import Path

import numpy as np

from spdc_screen.crystal import Chi2Tensor, CrystalRecord, save_crystal
from spdc_screen.dispersion import SellmeierModel

OUT = Path(__file__).resolve().parents[1] / "src" / "spdc_screen" / "data"


def inverse(A, B, C, D, note):
    return SellmeierModel.from_inverse_form(A, [(B, C)], D, valid_range=(200.0, 3000.0), provenance=note)


def d_to_chi(d, **kw):
    return Chi2Tensor.from_contracted(2.0 * np.asarray(d, dtype=float), **kw)


def bbo():
    note = "beta-BaB2O4, Eimerl et al. (1987) Sellmeier, inverse form converted exactly"
    n_o = inverse(2.7359, 0.01878, 0.01822, 0.01354, note)
    n_e = inverse(2.3753, 0.01224, 0.01667, 0.01516, note)
    d22, d31, d33 = 2.2, 0.16, 0.04  # pm/V, approximate literature magnitudes
    d = [[0, 0, 0, 0, d31, -d22],
         [-d22, d22, 0, d31, 0, 0],
         [d31, d31, d33, 0, 0, 0]]
    chi = d_to_chi(d, wavelength_nm=1064.0, role="signal", frame="abc", kleinman_assumed=False)
    return CrystalRecord("BBO", "3m", 6.2, (n_o, n_o, n_e), (chi,), "abc", 1.0, False,
                         "beta barium borate, c is the optic axis")


def synthetic_biaxial():
    # LBO-like dispersion; axes deliberately stored out of principal order
    note = "synthetic biaxial test crystal"
    nx = inverse(2.4542, 0.01125, 0.01135, 0.01388, note)
    ny = inverse(2.5390, 0.01277, 0.01189, 0.01849, note)
    nz = inverse(2.5865, 0.01310, 0.01223, 0.01862, note)
    d31, d32, d33 = 0.67, 0.85, 0.04
    d = np.array([[0, 0, 0, 0, d31, 0],
                  [0, 0, 0, d32, 0, 0],
                  [d31, d32, d33, 0, 0, 0]])
    chi_xyz = Chi2Tensor.from_contracted(2.0 * d).components
    # crystal axes a, b, c carry principal X->c, Y->a, Z->b
    perm = np.array([[0, 1, 0], [0, 0, 1], [1, 0, 0]], dtype=float)  # rows: a, b, c in XYZ
    chi_abc = np.einsum("ip,jq,kr,pqr->ijk", perm, perm, perm, chi_xyz)
    chi = Chi2Tensor(chi_abc, wavelength_nm=1064.0, role="signal", frame="abc")
    return CrystalRecord("SYNBIAX", "mm2", 7.8, (ny, nz, nx), (chi,), "abc", 1.0, False,
                         "synthetic biaxial mm2 crystal with unsorted axes")


def synthetic_422():
    note = "synthetic 422 test crystal"
    n_o = inverse(2.60, 0.020, 0.020, 0.012, note)
    n_e = inverse(2.40, 0.016, 0.018, 0.014, note)
    d14 = 1.5
    d = [[0, 0, 0, d14, 0, 0],
         [0, 0, 0, 0, -d14, 0],
         [0, 0, 0, 0, 0, 0]]
    chi = d_to_chi(d, wavelength_nm=1064.0, role="signal", frame="abc")
    return CrystalRecord("SYN422", "422", 5.5, (n_o, n_o, n_e), (chi,), "abc", 1.0, False,
                         "synthetic negative uniaxial 422 crystal: d_eff vanishes under Kleinman symmetry")


def synthetic_positive():
    note = "synthetic positive uniaxial test crystal"
    n_o = inverse(2.40, 0.012, 0.016, 0.012, note)
    n_e = inverse(2.55, 0.014, 0.017, 0.013, note)
    d22, d31, d33 = 1.2, 0.4, 2.0
    d = [[0, 0, 0, 0, d31, -d22],
         [-d22, d22, 0, d31, 0, 0],
         [d31, d31, d33, 0, 0, 0]]
    chi = d_to_chi(d, wavelength_nm=1064.0, role="signal", frame="abc")
    return CrystalRecord("SYNPOS3M", "3m", 4.8, (n_o, n_o, n_e), (chi,), "abc", 2.0, False,
                         "synthetic positive uniaxial class-3m crystal")


def synthetic_isotropic():
    note = "synthetic isotropic test crystal"
    n = inverse(2.50, 0.015, 0.017, 0.012, note)
    d = [[0, 0, 0, 0, 1.0, 0], [0, 0, 0, 1.0, 0, 0], [1.0, 1.0, 2.0, 0, 0, 0]]
    chi = d_to_chi(d, wavelength_nm=1064.0, role="signal", frame="abc")
    return CrystalRecord("SYNISO", "6mm", 5.0, (n, n, n), (chi,), "abc", 1.0, False,
                         "synthetic record with equal principal indices")


def synthetic_low_gap():
    rec = bbo()
    return CrystalRecord("SYNLOWGAP", "3m", 2.0, rec.axis_models, rec.chi2, "abc", 1.0, False,
                         "BBO optics with a band gap below the 532 nm photon energy")


if __name__ == "__main__":
    OUT.mkdir(exist_ok=True)
    for make, name in ((bbo, "bbo"), (synthetic_biaxial, "syn_biaxial"), (synthetic_422, "syn_422"),
                       (synthetic_positive, "syn_positive_uniaxial"), (synthetic_isotropic, "syn_isotropic"),
                       (synthetic_low_gap, "syn_low_gap")):
        save_crystal(make(), OUT / f"{name}.toml")
        print("wrote", name)
