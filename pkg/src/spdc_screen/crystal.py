"""Crystal records: on-disk format, validation and candidate filtering.

A crystal record is a TOML document::

    version = 1

    [meta]
    refcode = "MOFTIL"
    crystal_class = "2"          # point group, Hermann-Mauguin short symbol
    band_gap_ev = 3.2
    length_mm = 1.0              # optional, default 1.0
    axes = "abc"                 # "abc" (Cartesian crystal frame) or "XYZ"
    chi2_frame = "abc"           # must equal ``axes``

    [dispersion.a]               # one section per axis: a, b, c (or X, Y, Z)
    model = "sellmeier"          # n^2 = A + sum B L^2/(L^2 - C) - D L^2
    A = 1.9
    B = [0.8, 0.3]
    C = [0.02, 90.0]             # um^2 (or nm^2 if wavelength_unit = "nm")
    D = 0.004                    # um^-2
    wavelength_unit = "um"       # optional, "um" or "nm"; stored as "um"
    valid_range_nm = [400.0, 2600.0]   # optional

    [dispersion.b]
    model = "table"
    wavelength_nm = [400.0, 500.0, ...]
    index = [1.71, 1.69, ...]
    interpolation = "pchip"      # optional, "pchip" or "linear"

    [[chi2]]                     # one or more reference wavelengths
    wavelength_nm = 1064.0
    role = "signal"              # which field of the interaction the wavelength labels
    components = [...]           # 27 values chi_ijk in pm/V, row-major i, j, k
    # or: contracted = [[6 values], [6 values], [6 values]]
    kleinman_assumed = false

    [overrides]
    whitelist = false            # keep the record even if it fails the band-gap filter

Units are fixed at ingestion: nm, eV, pm/V, mm.  ``axes = "abc"`` means the
three dispersion models and chi2 are given in an orthogonal frame attached
to the crystallographic axes; the principal (X, Y, Z) frame is derived by
``frames.orient_crystal``.  The whitelist file format is one refcode per
line with ``#`` comments.
"""

from __future__ import annotations

import hashlib
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .constants import photon_energy_ev
from .dispersion import SellmeierModel, TableModel
from .errors import CrystalFormatError, CrystalValidationError

FORMAT_VERSION = 1
CHI2_SYMMETRY_TOL = 1e-12

NONCENTRO_CLASSES = frozenset({
    "1", "2", "m", "222", "mm2", "4", "-4", "422", "4mm", "-42m",
    "3", "32", "3m", "6", "-6", "622", "6mm", "-6m2", "23", "432", "-43m",
})
CUBIC_CLASSES = frozenset({"23", "432", "-43m"})
_CLASS_ALIASES = {
    "2mm": "mm2", "m2m": "mm2", "-4m2": "-42m", "-62m": "-6m2",
    "321": "32", "312": "32", "3m1": "3m", "31m": "3m",
}
AXIS_LABELS = {"abc": ("a", "b", "c"), "XYZ": ("X", "Y", "Z")}

# contracted (Voigt) index for the symmetric pair (j, k)
_VOIGT = {(0, 0): 0, (1, 1): 1, (2, 2): 2, (1, 2): 3, (2, 1): 3, (0, 2): 4, (2, 0): 4, (0, 1): 5, (1, 0): 5}


def normalize_class(label):
    label = str(label).strip().replace(" ", "")
    return _CLASS_ALIASES.get(label, label)


@dataclass(frozen=True, eq=False)
class Chi2Tensor:
    """Second-order susceptibility chi_ijk in pm/V at one reference wavelength."""

    components: np.ndarray
    wavelength_nm: float = 1064.0
    role: str = "signal"
    frame: str = "XYZ"
    kleinman_assumed: bool = False

    def __post_init__(self):
        c = np.array(self.components, dtype=float).reshape(3, 3, 3)
        c.setflags(write=False)
        object.__setattr__(self, "components", c)
        object.__setattr__(self, "wavelength_nm", float(self.wavelength_nm))
        if self.role not in ("signal", "pump"):
            raise ValueError(f"chi2 role must be 'signal' or 'pump', got {self.role!r}")

    def __eq__(self, other):
        if not isinstance(other, Chi2Tensor):
            return NotImplemented
        return (
            np.array_equal(self.components, other.components)
            and self.wavelength_nm == other.wavelength_nm
            and self.role == other.role
            and self.frame == other.frame
            and self.kleinman_assumed == other.kleinman_assumed
        )

    __hash__ = None

    def symmetry_defect(self):
        """Worst violation of chi_ijk = chi_ikj as (relative size, (i, j, k))."""
        c = self.components
        diff = np.abs(c - c.transpose(0, 2, 1))
        scale = np.max(np.abs(c))
        idx = np.unravel_index(np.argmax(diff), diff.shape)
        rel = float(diff[idx] / scale) if scale > 0 else 0.0
        return rel, tuple(int(v) for v in idx)

    def to_contracted(self):
        """3x6 contracted form d[i][J] = chi[i][j][k]."""
        out = np.empty((3, 6))
        for (j, k), J in _VOIGT.items():
            if j <= k:
                out[:, J] = self.components[:, j, k]
        return out

    @classmethod
    def from_contracted(cls, matrix, **kwargs):
        m = np.asarray(matrix, dtype=float)
        if m.shape != (3, 6):
            raise ValueError(f"contracted chi2 must be 3x6, got {m.shape}")
        c = np.empty((3, 3, 3))
        for (j, k), J in _VOIGT.items():
            c[:, j, k] = m[:, J]
        return cls(c, **kwargs)

    def with_components(self, components, **changes):
        fields = dict(wavelength_nm=self.wavelength_nm, role=self.role, frame=self.frame,
                      kleinman_assumed=self.kleinman_assumed)
        fields.update(changes)
        return Chi2Tensor(components, **fields)


@dataclass(frozen=True)
class PumpConfig:
    """Pump and collection geometry; the signal is degenerate at twice the pump wavelength.

    ``detector_bandwidth`` (rad/s) of None selects the automatic value
    described in ``pairs.default_detector_bandwidth``.
    """

    pump_wavelength: float = 532.0  # nm
    pump_power: float = 1.0  # mW
    pump_waist: float = 50.0  # um
    collection_waist: float = 50.0  # um
    detector_bandwidth: float | None = None  # rad/s

    def __post_init__(self):
        for name in ("pump_wavelength", "pump_power", "pump_waist", "collection_waist"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be finite and > 0, got {v}")
        bw = self.detector_bandwidth
        if bw is not None and not (math.isfinite(bw) and bw > 0):
            raise ValueError(f"detector_bandwidth must be finite and > 0, got {bw}")

    @property
    def signal_wavelength(self):
        return 2.0 * self.pump_wavelength

    @property
    def pump_photon_energy(self):
        return photon_energy_ev(self.pump_wavelength)


@dataclass(frozen=True)
class CrystalRecord:
    refcode: str
    crystal_class: str
    band_gap: float  # eV
    axis_models: tuple  # three dispersion models, in ``axes`` order
    chi2: tuple  # Chi2Tensor entries, sorted by wavelength
    axes: str = "abc"
    length: float = 1.0  # mm
    whitelist: bool = False
    description: str = ""
    source: str | None = field(default=None, compare=False)
    digest: str | None = field(default=None, compare=False)

    @property
    def chi2_frame(self):
        return self.axes

    @property
    def axis_labels(self):
        return AXIS_LABELS[self.axes]

    def model(self, axis):
        return self.axis_models[self.axis_labels.index(axis)]

    def select_chi2(self, pump_wavelength):
        """Entry whose reference wavelength is nearest the run's pump (or signal) wavelength."""
        def distance(t):
            target = pump_wavelength if t.role == "pump" else 2.0 * pump_wavelength
            return (abs(t.wavelength_nm - target), t.wavelength_nm)

        return min(self.chi2, key=distance)


# --- parsing ---------------------------------------------------------------


def _require(table, key, where):
    if key not in table:
        raise CrystalValidationError(f"{where}.{key}", "missing required field")
    return table[key]


def _number(value, where, positive=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise CrystalValidationError(where, f"expected a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise CrystalValidationError(where, "must be finite")
    if positive and value <= 0:
        raise CrystalValidationError(where, f"must be > 0, got {value}")
    return value


def _numbers(values, where):
    if not isinstance(values, list):
        raise CrystalValidationError(where, "expected an array of numbers")
    return [_number(v, f"{where}[{i}]") for i, v in enumerate(values)]


def _parse_model(table, where):
    kind = _require(table, "model", where)
    valid = table.get("valid_range_nm")
    if valid is not None:
        valid = tuple(_numbers(valid, f"{where}.valid_range_nm"))
        if len(valid) != 2:
            raise CrystalValidationError(f"{where}.valid_range_nm", "expected [min, max]")
    try:
        if kind == "sellmeier":
            unit = table.get("wavelength_unit", "um")
            if unit not in ("um", "nm"):
                raise CrystalValidationError(f"{where}.wavelength_unit", f"expected 'um' or 'nm', got {unit!r}")
            A = _number(_require(table, "A", where), f"{where}.A")
            B = _numbers(table.get("B", []), f"{where}.B")
            C = _numbers(table.get("C", []), f"{where}.C")
            D = _number(table.get("D", 0.0), f"{where}.D")
            if unit == "nm":
                C = [c * 1e-6 for c in C]
                D = D * 1e6
            residual = table.get("fit_residual")
            return SellmeierModel(A, tuple(B), tuple(C), D, valid_range=valid,
                                  fit_residual=None if residual is None else _number(residual, f"{where}.fit_residual"),
                                  provenance=table.get("provenance"))
        if kind == "table":
            w = _numbers(_require(table, "wavelength_nm", where), f"{where}.wavelength_nm")
            n = _numbers(_require(table, "index", where), f"{where}.index")
            return TableModel(tuple(w), tuple(n), table.get("interpolation", "pchip"), table.get("provenance"))
    except ValueError as exc:
        if isinstance(exc, CrystalValidationError):
            raise
        raise CrystalValidationError(where, str(exc)) from None
    raise CrystalValidationError(f"{where}.model", f"unknown model type {kind!r}")


def _parse_chi2(entry, where, frame):
    wavelength = _number(_require(entry, "wavelength_nm", where), f"{where}.wavelength_nm", positive=True)
    role = entry.get("role", "signal")
    if role not in ("signal", "pump"):
        raise CrystalValidationError(f"{where}.role", f"expected 'signal' or 'pump', got {role!r}")
    kleinman = entry.get("kleinman_assumed", False)
    if not isinstance(kleinman, bool):
        raise CrystalValidationError(f"{where}.kleinman_assumed", "expected true/false")
    kwargs = dict(wavelength_nm=wavelength, role=role, frame=frame, kleinman_assumed=kleinman)
    if "components" in entry:
        comps = _numbers(entry["components"], f"{where}.components")
        if len(comps) != 27:
            raise CrystalValidationError(f"{where}.components", f"expected 27 values, got {len(comps)}")
        tensor = Chi2Tensor(np.array(comps), **kwargs)
    elif "contracted" in entry:
        rows = entry["contracted"]
        if not isinstance(rows, list) or len(rows) != 3:
            raise CrystalValidationError(f"{where}.contracted", "expected 3 rows of 6 values")
        m = [_numbers(r, f"{where}.contracted[{i}]") for i, r in enumerate(rows)]
        if any(len(r) != 6 for r in m):
            raise CrystalValidationError(f"{where}.contracted", "expected 3 rows of 6 values")
        tensor = Chi2Tensor.from_contracted(m, **kwargs)
    else:
        raise CrystalValidationError(f"{where}.components", "missing required field")
    rel, (i, j, k) = tensor.symmetry_defect()
    if rel > CHI2_SYMMETRY_TOL:
        raise CrystalValidationError(
            f"{where}.components",
            f"chi2 not symmetric in its last two indices: chi[{i}][{j}][{k}] vs chi[{i}][{k}][{j}] "
            f"differ by {rel:.3g} (relative)",
        )
    return tensor


def parse_crystal(text, source=None):
    """Parse and validate a crystal record from TOML text."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise CrystalFormatError(f"{source or '<string>'}: {exc}") from None

    version = _require(doc, "version", "")
    if version != FORMAT_VERSION:
        raise CrystalValidationError("version", f"unsupported format version {version!r}")
    meta = _require(doc, "meta", "")
    refcode = str(_require(meta, "refcode", "meta"))
    cls = normalize_class(_require(meta, "crystal_class", "meta"))
    if cls not in NONCENTRO_CLASSES:
        raise CrystalValidationError("meta.crystal_class", f"{cls!r} is not a known non-centrosymmetric point group")
    band_gap = _number(_require(meta, "band_gap_ev", "meta"), "meta.band_gap_ev", positive=True)
    length = _number(meta.get("length_mm", 1.0), "meta.length_mm", positive=True)
    axes = meta.get("axes", "abc")
    if axes not in AXIS_LABELS:
        raise CrystalValidationError("meta.axes", f"expected 'abc' or 'XYZ', got {axes!r}")
    frame = meta.get("chi2_frame", axes)
    if frame != axes:
        raise CrystalValidationError("meta.chi2_frame", f"chi2 frame {frame!r} must match axes {axes!r}")

    disp = doc.get("dispersion", {})
    models = []
    for label in AXIS_LABELS[axes]:
        if label not in disp:
            raise CrystalValidationError(f"dispersion.{label}", "missing axis dispersion model")
        models.append(_parse_model(disp[label], f"dispersion.{label}"))
    extra = sorted(set(disp) - set(AXIS_LABELS[axes]))
    if extra:
        raise CrystalValidationError(f"dispersion.{extra[0]}", "unexpected axis label")

    entries = doc.get("chi2")
    if not entries:
        raise CrystalValidationError("chi2", "at least one chi2 entry is required")
    if isinstance(entries, dict):
        entries = [entries]
    chi2 = tuple(sorted((_parse_chi2(e, f"chi2[{i}]", axes) for i, e in enumerate(entries)),
                        key=lambda t: (t.wavelength_nm, t.role)))

    overrides = doc.get("overrides", {})
    whitelist = overrides.get("whitelist", False)
    if not isinstance(whitelist, bool):
        raise CrystalValidationError("overrides.whitelist", "expected true/false")

    return CrystalRecord(
        refcode=refcode, crystal_class=cls, band_gap=band_gap, axis_models=tuple(models), chi2=chi2,
        axes=axes, length=length, whitelist=whitelist, description=str(meta.get("description", "")),
        source=None if source is None else str(source),
        digest=hashlib.sha256(text.encode("utf-8")).hexdigest(),
    )


def load_crystal(path):
    """Load and validate a crystal record file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise CrystalFormatError(f"{path}: not UTF-8 ({exc})") from None
    return parse_crystal(text, source=path)


# --- serialisation ---------------------------------------------------------


def _model_table(model):
    if isinstance(model, TableModel):
        t = {"model": "table", "wavelength_nm": list(model.wavelengths), "index": list(model.indices),
             "interpolation": model.interpolation}
    else:
        t = {"model": "sellmeier", "wavelength_unit": "um", "A": model.A, "B": list(model.B), "C": list(model.C),
             "D": model.D}
        if model.valid_range is not None:
            t["valid_range_nm"] = list(model.valid_range)
        if model.fit_residual is not None:
            t["fit_residual"] = model.fit_residual
    if model.provenance:
        t["provenance"] = model.provenance
    return t


def dump_crystal(record):
    """Serialise a record to TOML text; ``parse_crystal`` round-trips it exactly."""
    meta = {"refcode": record.refcode, "crystal_class": record.crystal_class, "band_gap_ev": record.band_gap,
            "length_mm": record.length, "axes": record.axes, "chi2_frame": record.axes}
    if record.description:
        meta["description"] = record.description
    doc = {
        "version": FORMAT_VERSION,
        "meta": meta,
        "dispersion": {label: _model_table(m) for label, m in zip(record.axis_labels, record.axis_models)},
        "chi2": [
            {"wavelength_nm": t.wavelength_nm, "role": t.role, "kleinman_assumed": t.kleinman_assumed,
             "components": [float(v) for v in t.components.ravel()]}
            for t in record.chi2
        ],
        "overrides": {"whitelist": record.whitelist},
    }
    return tomli_w.dumps(doc)


def save_crystal(record, path):
    Path(path).write_text(dump_crystal(record), encoding="utf-8")


# --- candidate filter --------------------------------------------------------


@dataclass(frozen=True)
class FilterDecision:
    record: CrystalRecord
    accepted: bool
    code: str
    detail: str


@dataclass(frozen=True)
class FilterResult:
    accepted: list
    rejected: list


def load_whitelist(path):
    names = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            names.append(line)
    return names


def filter_candidates(records, pump, whitelist=()):
    """Partition records by transparency at the pump and phase-matchability of the class.

    A record is accepted when its band gap strictly exceeds the pump photon
    energy and its class is non-cubic.  Records named in ``whitelist`` (or
    carrying ``overrides.whitelist``) bypass the band-gap test only.
    """
    allowed = set(whitelist)
    e_pump = pump.pump_photon_energy
    accepted, rejected = [], []
    for rec in records:
        if rec.crystal_class in CUBIC_CLASSES:
            rejected.append(FilterDecision(rec, False, "cubic-class",
                                           f"cubic class {rec.crystal_class} is optically isotropic"))
        elif rec.band_gap > e_pump:
            accepted.append(FilterDecision(rec, True, "accepted",
                                           f"band gap {rec.band_gap:g} eV > pump photon {e_pump:.4f} eV"))
        elif rec.whitelist or rec.refcode in allowed:
            accepted.append(FilterDecision(rec, True, "whitelisted",
                                           f"band gap {rec.band_gap:g} eV <= pump photon {e_pump:.4f} eV, whitelisted"))
        else:
            rejected.append(FilterDecision(rec, False, "gap-below-pump",
                                           f"gap below pump photon energy ({rec.band_gap:g} eV <= {e_pump:.4f} eV)"))
    return FilterResult(accepted, rejected)
