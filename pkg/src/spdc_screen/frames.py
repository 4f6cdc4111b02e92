"""Principal indices, optic classification and the crystallophysical frame.

Conventions
-----------
* A ``FrameAssignment`` maps crystal axes onto X, Y, Z.  ``rotation`` has
  the X, Y, Z unit vectors (in crystal coordinates) as its rows, so
  ``R @ eps @ R.T`` is diagonal and chi2 transforms as
  chi'_ijk = R_ip R_jq R_kr chi_pqr.
* Biaxial crystals satisfy n_Z > n_Y > n_X.  Uniaxial crystals put the optic
  axis on Z, so n_X = n_Y = n_o and n_Z = n_e.
* Signed permutations that would be improper get their X axis negated,
  keeping det R = +1.
* Biaxial optic sign: positive when n_Y is closer to n_X than to n_Z.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ContractViolation, NonPhysicalError

INDEX_TOLERANCE = 1e-4
LOW_SYMMETRY_CLASSES = frozenset({"1", "2", "m"})


@dataclass(frozen=True)
class PrincipalIndices:
    n_X: float
    n_Y: float
    n_Z: float
    wavelength: float | None = None  # nm

    def __post_init__(self):
        for name in ("n_X", "n_Y", "n_Z"):
            v = float(getattr(self, name))
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be finite and > 0, got {v}")
            object.__setattr__(self, name, v)

    def as_tuple(self):
        return (self.n_X, self.n_Y, self.n_Z)


@dataclass(frozen=True)
class OpticClass:
    kind: str  # isotropic | uniaxial | biaxial
    sign: str  # positive | negative | not-applicable


@dataclass(frozen=True, eq=False)
class FrameAssignment:
    permutation: tuple  # source axis label for X, Y, Z
    sign_flips: tuple  # +/-1 per X, Y, Z
    rotation: np.ndarray
    rule: str = "eigen"  # how the principal values were obtained

    def __eq__(self, other):
        if not isinstance(other, FrameAssignment):
            return NotImplemented
        return (self.permutation == other.permutation and self.sign_flips == other.sign_flips
                and np.array_equal(self.rotation, other.rotation) and self.rule == other.rule)

    __hash__ = None

    def as_dict(self):
        return {"permutation": list(self.permutation), "sign_flips": list(self.sign_flips),
                "rotation": self.rotation.tolist(), "rule": self.rule}


def _signed_permutation(order, labels, rule="eigen"):
    R = np.zeros((3, 3))
    for row, src in enumerate(order):
        R[row, src] = 1.0
    flips = [1, 1, 1]
    if np.linalg.det(R) < 0:
        R[0] *= -1.0
        flips[0] = -1
    return FrameAssignment(tuple(labels[i] for i in order), tuple(flips), R, rule)


def _stable_order(values):
    # ascending, ties broken by original axis order
    return sorted(range(3), key=lambda i: (values[i], i))


def _degenerate_basis(vectors, values, rtol=1e-12):
    """Replace eigenvectors inside degenerate eigenspaces by projected crystal axes."""
    out = vectors.copy()
    i = 0
    while i < 3:
        j = i + 1
        while j < 3 and abs(values[j] - values[i]) <= rtol * abs(values[i]):
            j += 1
        if j - i > 1:
            V = vectors[:, i:j]
            P = V @ V.T
            basis = []
            for axis in np.eye(3):
                v = P @ axis
                for b in basis:
                    v = v - (b @ v) * b
                if np.linalg.norm(v) > 1e-6:
                    basis.append(v / np.linalg.norm(v))
                if len(basis) == j - i:
                    break
            out[:, i:j] = np.column_stack(basis)
        i = j
    return out


def principal_refractive_indices(epsilon, crystal_class=None, labels=("a", "b", "c"), rule="eigen"):
    """Diagonalise a dielectric tensor into ascending principal indices.

    ``rule="eigen"`` (default) diagonalises the symmetric part.  For the
    low-symmetry classes 1, 2 and m, ``rule="diagonal"`` takes the diagonal
    entries and ignores off-diagonal coupling.  Returns
    ``(PrincipalIndices, FrameAssignment)`` with n_X <= n_Y <= n_Z.
    """
    eps = np.asarray(epsilon, dtype=float)
    if eps.shape != (3, 3) or not np.all(np.isfinite(eps)):
        raise ValueError("epsilon must be a finite 3x3 array")
    sym = 0.5 * (eps + eps.T)
    if rule == "diagonal":
        if crystal_class is not None and crystal_class not in LOW_SYMMETRY_CLASSES:
            raise ContractViolation(f"diagonal rule only applies to classes 1, 2, m (got {crystal_class})")
        values = np.diag(sym).copy()
        if np.any(values <= 0):
            raise NonPhysicalError("non-physical dielectric tensor: non-positive diagonal entry")
        order = _stable_order(values)
        frame = _signed_permutation(order, labels, rule="diagonal")
        n = np.sqrt(values[order])
        return PrincipalIndices(*n), frame
    if rule != "eigen":
        raise ValueError(f"unknown rule {rule!r}")

    off = sym - np.diag(np.diag(sym))
    if not np.any(off):
        values = np.diag(sym).copy()
        if np.any(values <= 0):
            raise NonPhysicalError("non-physical dielectric tensor: non-positive eigenvalue")
        order = _stable_order(values)
        return PrincipalIndices(*np.sqrt(values[order])), _signed_permutation(order, labels)

    values, vectors = np.linalg.eigh(sym)
    if np.any(values <= 0):
        raise NonPhysicalError("non-physical dielectric tensor: non-positive eigenvalue")
    vectors = _degenerate_basis(vectors, values)
    R = vectors.T.copy()
    for row in R:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    flips = [1, 1, 1]
    if np.linalg.det(R) < 0:
        R[0] *= -1.0
        flips[0] = -1
    perm = tuple(labels[int(np.argmax(np.abs(row)))] for row in R)
    return PrincipalIndices(*np.sqrt(values)), FrameAssignment(perm, tuple(flips), R, "eigen")


def classify_optic(indices, tolerance=INDEX_TOLERANCE):
    """Isotropic / uniaxial / biaxial classification with optic sign.

    Two indices count as equal when they differ by at most ``tolerance``
    relative to the larger one.  Order of the input triple does not matter.
    """
    n = sorted(indices.as_tuple() if isinstance(indices, PrincipalIndices) else indices)
    lo, mid, hi = n
    if hi - lo <= tolerance * hi:
        return OpticClass("isotropic", "not-applicable")
    low_pair = mid - lo <= tolerance * mid
    high_pair = hi - mid <= tolerance * hi
    if low_pair or high_pair:
        if low_pair and high_pair:
            # chain of near-equalities: the tighter pair is the ordinary one
            low_pair = (mid - lo) / mid <= (hi - mid) / hi
        # n_e is the odd one out
        return OpticClass("uniaxial", "positive" if low_pair else "negative")
    return OpticClass("biaxial", "positive" if (mid - lo) < (hi - mid) else "negative")


def assign_biaxial_frame(axis_indices, labels=("a", "b", "c"), tolerance=INDEX_TOLERANCE):
    """Signed permutation of crystal axes giving n_Z > n_Y > n_X."""
    values = [float(v) for v in axis_indices]
    if classify_optic(values, tolerance).kind != "biaxial":
        raise ContractViolation(f"assign_biaxial_frame called on non-biaxial indices {values}")
    return _signed_permutation(_stable_order(values), labels)


def assign_uniaxial_frame(axis_indices, labels=("a", "b", "c"), tolerance=INDEX_TOLERANCE):
    """Signed permutation putting the odd (extraordinary) axis on Z."""
    values = [float(v) for v in axis_indices]
    optic = classify_optic(values, tolerance)
    if optic.kind != "uniaxial":
        raise ContractViolation(f"assign_uniaxial_frame called on non-uniaxial indices {values}")
    order = _stable_order(values)
    odd = order[2] if optic.sign == "positive" else order[0]
    rest = [i for i in range(3) if i != odd]
    return _signed_permutation(rest + [odd], labels)


def birefringence(indices):
    """Spread of the principal indices (max - min), always >= 0."""
    n = indices.as_tuple() if isinstance(indices, PrincipalIndices) else tuple(indices)
    return max(n) - min(n)


@dataclass(frozen=True)
class OrientedCrystal:
    """A crystal record re-expressed in its crystallophysical frame.

    ``models`` are the X, Y, Z dispersion models and ``chi2`` the tensors
    rotated into X, Y, Z (frame label "XYZ").
    """

    refcode: str
    crystal_class: str
    optic: OpticClass
    frame: FrameAssignment
    models: tuple
    chi2: tuple
    reference_wavelength: float
    record: object = None

    def principal_indices(self, wavelength_nm):
        from .dispersion import eval_index

        return PrincipalIndices(*(eval_index(m, wavelength_nm) for m in self.models), wavelength=wavelength_nm)

    def select_chi2(self, pump_wavelength):
        def distance(t):
            target = pump_wavelength if t.role == "pump" else 2.0 * pump_wavelength
            return (abs(t.wavelength_nm - target), t.wavelength_nm)

        return min(self.chi2, key=distance)


def orient_crystal(record, reference_wavelength, window=None, tolerance=INDEX_TOLERANCE):
    """Classify a record at ``reference_wavelength`` and rotate it into X, Y, Z.

    ``window`` (nm) is applied as the valid range of any Sellmeier model that
    does not carry its own.  Records are diagonal in their axis frame, so the
    frame is always a signed permutation.
    """
    from .nonlinearity import rotate_chi2

    models = []
    for m in record.axis_models:
        if window is not None and getattr(m, "valid_range", None) is None:
            m = m.with_valid_range(window)
        models.append(m)
    from .dispersion import eval_index

    axis_n = [eval_index(m, reference_wavelength) for m in models]
    labels = record.axis_labels
    optic = classify_optic(axis_n, tolerance)
    if optic.kind == "biaxial":
        frame = assign_biaxial_frame(axis_n, labels, tolerance)
    elif optic.kind == "uniaxial":
        frame = assign_uniaxial_frame(axis_n, labels, tolerance)
    else:
        frame = _signed_permutation([0, 1, 2], labels)
    order = [labels.index(lbl) for lbl in frame.permutation]
    xyz_models = tuple(models[i] for i in order)
    chi2 = tuple(
        replace(rotate_chi2(t, frame.rotation), frame="XYZ") for t in record.chi2
    )
    return OrientedCrystal(record.refcode, record.crystal_class, optic, frame, xyz_models, chi2,
                           float(reference_wavelength), record)
