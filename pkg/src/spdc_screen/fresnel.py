"""Wave-normal indices and D-field polarizations for an arbitrary direction.

Everything here works in the crystallophysical frame X, Y, Z where the
dielectric tensor is diagonal.  The two allowed refractive indices for a
wave normal k(theta, phi) are the inverse square roots of the eigenvalues
of the impermeability tensor diag(1/n_X^2, 1/n_Y^2, 1/n_Z^2) projected onto
the plane transverse to k; the eigenvectors are the D-field polarizations.
This is equivalent to solving the Fresnel equation of wave normals but
avoids the catastrophic cancellation of the quadratic-formula discriminant
near optic axes.

The transverse plane is spanned by

    u1 = (cos t cos p, cos t sin p, -sin t)   (extraordinary-like)
    u2 = (sin p, -cos p, 0)                    (ordinary-like)

so for a uniaxial crystal with optic axis Z the projected tensor is already
diagonal in (u1, u2).  Angles are in degrees at this module's boundary.
All functions broadcast over numpy arrays.
"""

import numpy as np

DEGENERACY_TOL = 1e-12


def propagation_vector(theta_deg, phi_deg):
    t = np.radians(theta_deg)
    p = np.radians(phi_deg)
    return np.stack(np.broadcast_arrays(np.sin(t) * np.cos(p), np.sin(t) * np.sin(p), np.cos(t)), axis=-1)


def transverse_basis(theta_deg, phi_deg):
    """Return (u1, u2), each with a trailing axis of length 3."""
    t = np.radians(theta_deg)
    p = np.radians(phi_deg)
    ct, st, cp, sp = np.cos(t), np.sin(t), np.cos(p), np.sin(p)
    u1 = np.stack(np.broadcast_arrays(ct * cp, ct * sp, -st), axis=-1)
    u2 = np.stack(np.broadcast_arrays(sp, -cp, np.zeros_like(ct * cp)), axis=-1)
    return u1, u2


def _projected(ax, ay, az, theta_deg, phi_deg):
    t = np.radians(theta_deg)
    p = np.radians(phi_deg)
    ct2, st2 = np.cos(t) ** 2, np.sin(t) ** 2
    cp, sp = np.cos(p), np.sin(p)
    cp2, sp2 = cp * cp, sp * sp
    m11 = ax * ct2 * cp2 + ay * ct2 * sp2 + az * st2
    m22 = ax * sp2 + ay * cp2
    m12 = (ax - ay) * np.cos(t) * sp * cp
    return m11, m22, m12


def _roots(m11, m22, m12):
    mean = 0.5 * (m11 + m22)
    half = 0.5 * (m11 - m22)
    r = np.hypot(half, m12)
    return mean, half, r


def direction_indices(n_x, n_y, n_z, theta_deg, phi_deg):
    """Return ``(n_slow, n_fast)`` for wave normal (theta, phi).

    ``n_slow >= n_fast`` everywhere, with equality only along optic axes.
    For a uniaxial crystal (n_X = n_Y = n_o, n_Z = n_e) the pair is
    {n_o, n_e(theta)} with 1/n_e(theta)^2 = cos^2/n_o^2 + sin^2/n_e^2.
    """
    n_x, n_y, n_z = (np.asarray(v, dtype=float) for v in (n_x, n_y, n_z))
    m11, m22, m12 = _projected(1.0 / n_x**2, 1.0 / n_y**2, 1.0 / n_z**2, theta_deg, phi_deg)
    mean, _, r = _roots(m11, m22, m12)
    return 1.0 / np.sqrt(mean - r), 1.0 / np.sqrt(mean + r)


def branch_index(n_x, n_y, n_z, theta_deg, phi_deg, branch):
    slow, fast = direction_indices(n_x, n_y, n_z, theta_deg, phi_deg)
    if branch == "slow":
        return slow
    if branch == "fast":
        return fast
    raise ValueError(f"unknown branch {branch!r}")


def branch_index_derivatives(n, dn, d2n, theta_deg, phi_deg, branch):
    """Directional index and its first two wavelength derivatives.

    ``n``, ``dn``, ``d2n`` are length-3 sequences holding the principal
    indices (X, Y, Z) and their derivatives with respect to wavelength.
    Derivatives propagate exactly through the projected-impermeability
    eigenvalue; the result is singular only on an optic axis.
    """
    n = np.asarray(n, dtype=float)
    dn = np.asarray(dn, dtype=float)
    d2n = np.asarray(d2n, dtype=float)
    a = 1.0 / n**2
    da = -2.0 * dn / n**3
    d2a = -2.0 * d2n / n**3 + 6.0 * dn**2 / n**4

    m11, m22, m12 = _projected(*a, theta_deg, phi_deg)
    d11, d22, d12 = _projected(*da, theta_deg, phi_deg)
    e11, e22, e12 = _projected(*d2a, theta_deg, phi_deg)

    mean, half, r = _roots(m11, m22, m12)
    dmean, dhalf = 0.5 * (d11 + d22), 0.5 * (d11 - d22)
    d2mean, d2half = 0.5 * (e11 + e22), 0.5 * (e11 - e22)

    sgn = {"fast": 1.0, "slow": -1.0}[branch]
    if r == 0.0:
        # on an optic axis the branches touch; use the branch-averaged curvature
        x, dx, d2x = mean, dmean, d2mean
    else:
        g = half * dhalf + m12 * d12
        dr = g / r
        d2r = (dhalf**2 + half * d2half + d12**2 + m12 * e12) / r - g**2 / r**3
        x = mean + sgn * r
        dx = dmean + sgn * dr
        d2x = d2mean + sgn * d2r
    nb = x**-0.5
    dnb = -0.5 * x**-1.5 * dx
    d2nb = 0.75 * x**-2.5 * dx**2 - 0.5 * x**-1.5 * d2x
    return float(nb), float(dnb), float(d2nb)


def _orient(v, u1, u2):
    # flip sign so the vector overlaps positively with whichever of u1/u2 it is closest to
    o1 = np.sum(v * u1, axis=-1)
    o2 = np.sum(v * u2, axis=-1)
    ref = np.where(np.abs(o1) >= np.abs(o2), o1, o2)
    return v * np.where(ref < 0, -1.0, 1.0)[..., None]


def eigen_polarizations(n_x, n_y, n_z, theta_deg, phi_deg):
    """D-field unit vectors ``(e_fast, e_slow, degenerate)`` from the eigenproblem.

    Vectors are signed so each has a non-negative overlap with the nearer of
    u1/u2; this makes them reduce continuously to the uniaxial closed forms
    when n_X -> n_Y.
    """
    n_x, n_y, n_z = (np.asarray(v, dtype=float) for v in (n_x, n_y, n_z))
    m11, m22, m12 = _projected(1.0 / n_x**2, 1.0 / n_y**2, 1.0 / n_z**2, theta_deg, phi_deg)
    mean, half, r = _roots(m11, m22, m12)
    psi = 0.5 * np.arctan2(2.0 * m12, m11 - m22)
    u1, u2 = transverse_basis(theta_deg, phi_deg)
    c = np.cos(psi)[..., None]
    s = np.sin(psi)[..., None]
    e_fast = _orient(c * u1 + s * u2, u1, u2)
    e_slow = _orient(-s * u1 + c * u2, u1, u2)
    degenerate = r <= DEGENERACY_TOL * mean
    return e_fast, e_slow, degenerate


def uniaxial_polarizations(theta_deg, phi_deg):
    """Closed-form (e_ordinary, e_extraordinary) for optic axis Z, walk-off neglected."""
    u1, u2 = transverse_basis(theta_deg, phi_deg)
    return u2, u1
