"""chi2 tensor transformations and the effective nonlinearity d_eff.

d_eff = sum_ijk e_p[i] d[i][j][k] e_s[j] e_i[k] with d = chi2 / 2 (SHG
convention).  For type-I SPDC e_s = e_i is the slow-branch D vector at the
signal wavelength and e_p the fast-branch D vector at the pump wavelength;
walk-off is neglected.  Tensors must be in the crystallophysical frame
(label "XYZ") before contraction.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import fresnel
from .crystal import Chi2Tensor
from .errors import FrameMismatchError, NotPhaseMatchableError, NumericalError

D_CONVENTION = "d = chi2/2"
ORTHOGONALITY_TOL = 1e-10


def _components(chi2):
    return chi2.components if isinstance(chi2, Chi2Tensor) else np.asarray(chi2, dtype=float)


def rotate_chi2(chi2, rotation, check=True):
    """chi'_ijk = R_ip R_jq R_kr chi_pqr.

    Only orthogonality is checked, so improper transforms (e.g. inversion)
    are accepted.  Returns the same type it was given; a ``Chi2Tensor`` keeps
    its metadata.
    """
    R = np.asarray(rotation, dtype=float)
    if check and np.max(np.abs(R @ R.T - np.eye(3))) > ORTHOGONALITY_TOL:
        raise NumericalError("rotation matrix is not orthogonal")
    out = np.einsum("ip,jq,kr,pqr->ijk", R, R, R, _components(chi2))
    if isinstance(chi2, Chi2Tensor):
        return chi2.with_components(out)
    return out


def kleinman_symmetrize(chi2):
    """Average over all six index permutations."""
    c = _components(chi2)
    out = sum(np.transpose(c, p) for p in itertools.permutations(range(3))) / 6.0
    if isinstance(chi2, Chi2Tensor):
        return chi2.with_components(out, kleinman_assumed=True)
    return out


@dataclass(frozen=True, eq=False)
class PolarizationBasis:
    e_fast: np.ndarray
    e_slow: np.ndarray
    k: np.ndarray
    fast_label: str = "fast"
    slow_label: str = "slow"
    degenerate: bool = False
    frame: str = "XYZ"


def polarization_basis(indices, theta_deg, phi_deg, optic):
    """Orthonormal D-field pair transverse to k(theta, phi).

    Uniaxial crystals use the closed forms e_o = (sin p, -cos p, 0) and
    e_e = (cos t cos p, cos t sin p, -sin t); biaxial crystals use the
    eigenvectors of the projected impermeability.  ``degenerate`` flags a
    direction along an optic axis, where the branch split is undefined.
    """
    n = indices.as_tuple() if hasattr(indices, "as_tuple") else tuple(indices)
    k = fresnel.propagation_vector(theta_deg, phi_deg)
    if optic.kind == "uniaxial":
        e_o, e_e = fresnel.uniaxial_polarizations(theta_deg, phi_deg)
        along_axis = np.abs(np.sin(np.radians(theta_deg))) < 1e-12
        degenerate = bool(np.all(along_axis))
        if optic.sign == "negative":
            return PolarizationBasis(e_e, e_o, k, "e", "o", degenerate)
        return PolarizationBasis(e_o, e_e, k, "o", "e", degenerate)
    e_fast, e_slow, degenerate = fresnel.eigen_polarizations(*n, theta_deg, phi_deg)
    return PolarizationBasis(e_fast, e_slow, k, "fast", "slow", bool(np.all(degenerate)))


@dataclass(frozen=True)
class DeffResult:
    value: float  # pm/V, signed
    theta: float
    phi: float
    config: str = "pump-fast/signal-slow"
    provenance: dict = field(default_factory=dict)


def contract(d, e_p, e_s, e_i):
    """Vectorised e_p . d : e_s e_i over any leading axes."""
    return np.einsum("...i,ijk,...j,...k->...", e_p, d, e_s, e_i)


def _branch_vectors(basis, config):
    if config == "pump-fast/signal-slow":
        return basis.e_fast, basis.e_slow
    if config == "pump-slow/signal-fast":
        return basis.e_slow, basis.e_fast
    raise ValueError(f"unknown configuration {config!r}")


def d_eff_at(chi2, basis, config="pump-fast/signal-slow", signal_basis=None, theta=math.nan, phi=math.nan):
    """Signed d_eff (pm/V) for one direction.

    ``basis`` supplies the pump vector; ``signal_basis`` (default: the same
    basis) supplies the degenerate signal/idler vector.
    """
    frame = chi2.frame if isinstance(chi2, Chi2Tensor) else "XYZ"
    signal_basis = basis if signal_basis is None else signal_basis
    if frame != basis.frame or frame != signal_basis.frame:
        raise FrameMismatchError(f"chi2 frame {frame!r} does not match polarization frame {basis.frame!r}")
    e_p, _ = _branch_vectors(basis, config)
    _, e_s = _branch_vectors(signal_basis, config)
    d = 0.5 * _components(chi2)
    value = float(contract(d, e_p, e_s, e_s))
    kleinman = chi2.kleinman_assumed if isinstance(chi2, Chi2Tensor) else False
    return DeffResult(value, float(theta), float(phi), config,
                      {"frame": frame, "kleinman": kleinman, "convention": D_CONVENTION})


def prepared_chi2(crystal, pump, kleinman=True):
    """chi2 entry for this pump, in the X, Y, Z frame, optionally Kleinman-symmetrised."""
    chi2 = crystal.select_chi2(pump.pump_wavelength)
    return kleinman_symmetrize(chi2) if kleinman else chi2


def crystal_deff(crystal, pump, theta_deg, phi_deg, kleinman=True, config="pump-fast/signal-slow", chi2=None):
    """d_eff of an oriented crystal along (theta, phi) for this pump."""
    chi2 = prepared_chi2(crystal, pump, kleinman) if chi2 is None else chi2
    bp = polarization_basis(crystal.principal_indices(pump.pump_wavelength), theta_deg, phi_deg, crystal.optic)
    bs = polarization_basis(crystal.principal_indices(pump.signal_wavelength), theta_deg, phi_deg, crystal.optic)
    return d_eff_at(chi2, bp, config, bs, theta_deg, phi_deg)


def deff_grid(crystal, pump, thetas, phis, kleinman=True, config="pump-fast/signal-slow", chi2=None):
    """d_eff on a (phi, theta) mesh; returns an array of shape (len(phis), len(thetas))."""
    chi2 = prepared_chi2(crystal, pump, kleinman) if chi2 is None else chi2
    T, P = np.meshgrid(np.asarray(thetas, float), np.asarray(phis, float))
    bp = polarization_basis(crystal.principal_indices(pump.pump_wavelength), T, P, crystal.optic)
    bs = polarization_basis(crystal.principal_indices(pump.signal_wavelength), T, P, crystal.optic)
    e_p, _ = _branch_vectors(bp, config)
    _, e_s = _branch_vectors(bs, config)
    return contract(0.5 * _components(chi2), e_p, e_s, e_s)


@dataclass(frozen=True, eq=False)
class DeffMap:
    thetas: np.ndarray  # deg
    phis: np.ndarray  # deg
    values: np.ndarray  # pm/V, shape (len(phis), len(thetas))
    locus: tuple = ()  # (theta, phi) phase-matching directions within the map range
    kleinman: bool = True


def deff_map(crystal, pump, n_theta=91, n_phi=361, phi_range=(0.0, 360.0), kleinman=True,
             config="pump-fast/signal-slow", locus=None):
    """d_eff over theta in [0, 90] and the requested phi range, with the PM locus attached."""
    from .phasematching import expand_symmetry, solve_phase_matching

    thetas = np.linspace(0.0, 90.0, n_theta)
    phis = np.linspace(phi_range[0], phi_range[1], n_phi)
    values = deff_grid(crystal, pump, thetas, phis, kleinman, config)
    if locus is None:
        locus = solve_phase_matching(crystal, pump).directions if crystal.optic.kind != "isotropic" else ()
        if crystal.optic.kind == "uniaxial":
            locus = tuple((t, float(p)) for t, _ in locus for p in np.linspace(0.0, 90.0, 91))
    lo, hi = min(phi_range), max(phi_range)
    shown = tuple((t, p) for t, p in expand_symmetry(locus) if lo <= p <= hi)
    return DeffMap(thetas, phis, values, shown, kleinman)


# --- maximum along the locus ------------------------------------------------

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _unit(theta, phi):
    return fresnel.propagation_vector(theta, phi)


def _golden_max(g, a, b, tol=1e-10, maxiter=200):
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    gc, gd = g(c), g(d)
    for _ in range(maxiter):
        if abs(b - a) < tol:
            break
        if gc > gd:
            b, d, gd = d, c, gc
            c = b - _GOLDEN * (b - a)
            gc = g(c)
        else:
            a, c, gc = c, d, gd
            d = a + _GOLDEN * (b - a)
            gd = g(d)
    x = 0.5 * (a + b)
    return x


def max_deff_on_locus(locus, deff, project=None, config="pump-fast/signal-slow", provenance=None):
    """Locus point of largest |d_eff|, refined by golden-section search.

    ``locus`` is a sequence of (theta, phi) in degrees and ``deff(theta,
    phi)`` returns the signed d_eff.  The best sample (ties: smallest theta,
    then phi) is refined along the polyline through its two nearest locus
    neighbours; ``project(theta, phi)`` may snap interpolated points back
    onto the exact locus and returns ``None`` when it cannot.
    """
    pts = [(float(t), float(p)) for t, p in locus]
    if not pts:
        raise NotPhaseMatchableError("not phase-matchable at this wavelength")
    vals = np.array([deff(t, p) for t, p in pts], dtype=float)
    mags = np.abs(vals)
    top = mags.max()
    candidates = [i for i in range(len(pts)) if mags[i] >= top * (1.0 - 1e-12)]
    best = min(candidates, key=lambda i: pts[i])
    best_pt, best_val = pts[best], vals[best]

    if len(pts) > 1:
        U = np.array([_unit(t, p) for t, p in pts])
        dist = np.arccos(np.clip(U @ U[best], -1.0, 1.0))
        dist[best] = np.inf
        if len(pts) > 2:
            nn = np.array([np.min(np.where(np.arange(len(pts)) == i, np.inf,
                                           np.arccos(np.clip(U @ U[i], -1.0, 1.0)))) for i in range(len(pts))])
            limit = 3.0 * float(np.median(nn))
        else:
            limit = math.inf
        order = [int(i) for i in np.argsort(dist, kind="stable") if dist[i] <= limit and dist[i] > 0][:2]
        if order:
            path = [pts[order[0]], best_pt] + ([pts[order[1]]] if len(order) > 1 else [best_pt])

            def point(s):
                # s in [-1, 1]: -1 first neighbour, 0 best, 1 second neighbour
                a, b = (path[1], path[0]) if s < 0 else (path[1], path[2])
                w = abs(s)
                t = a[0] + w * (b[0] - a[0])
                p = a[1] + w * (b[1] - a[1])
                if project is not None:
                    snapped = project(t, p)
                    if snapped is not None:
                        return snapped
                return (t, p)

            def g(s):
                t, p = point(s)
                return abs(deff(t, p))

            s = _golden_max(g, -1.0, 1.0)
            t, p = point(s)
            v = deff(t, p)
            if abs(v) > abs(best_val) * (1.0 + 1e-12):
                best_pt, best_val = (float(t), float(p)), float(v)

    return DeffResult(float(best_val), best_pt[0], best_pt[1], config, dict(provenance or {}))
