"""On-disk formats: JSON headers with raw little-endian payloads.

A HyperCube ``name.json`` header sits next to ``name.bin`` holding the values
in spectral-major order (``n_nu`` rows of ``nx*ny`` row-major pixels). A
MeasurementSet payload stores complex128 as interleaved real/imag float64.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .acquisition import HyperCube, MeasurementSet
from .errors import DimensionError, FormatError
from .sampling import Mask, SamplingPattern

_REAL_DTYPES = {"f32": "<f4", "f64": "<f8"}


def _paths(path) -> tuple[Path, Path]:
    p = Path(path)
    if p.suffix in (".json", ".bin"):
        p = p.with_suffix("")
    return p.with_suffix(".json"), p.with_suffix(".bin")


def _read_header(path: Path) -> dict:
    try:
        return json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise FormatError(f"missing file {path}") from exc
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot parse header {path}: {exc}") from exc


def _read_payload(path: Path, dtype: str, count: int) -> np.ndarray:
    try:
        raw = np.fromfile(path, dtype=dtype)
    except FileNotFoundError as exc:
        raise FormatError(f"missing payload {path}") from exc
    if raw.size != count:
        raise DimensionError(f"{path}: expected {count} values, found {raw.size}")
    return raw


def write_cube(cube: HyperCube, path, dtype: str = "f64") -> Path:
    if dtype not in _REAL_DTYPES:
        raise FormatError(f"dtype must be one of {sorted(_REAL_DTYPES)}")
    hdr, payload = _paths(path)
    hdr.parent.mkdir(parents=True, exist_ok=True)
    header = {"n_nu": cube.n_nu, "nx": cube.nx, "ny": cube.ny, "dtype": dtype, "order": "row-major"}
    if cube.wavelength_nm is not None:
        header["wavelength_nm"] = [float(v) for v in cube.wavelength_nm]
    hdr.write_text(json.dumps(header))
    np.ascontiguousarray(cube.values, dtype=_REAL_DTYPES[dtype]).tofile(payload)
    return hdr


def read_cube(path) -> HyperCube:
    hdr_path, payload = _paths(path)
    h = _read_header(hdr_path)
    try:
        n_nu, nx, ny, dtype = int(h["n_nu"]), int(h["nx"]), int(h["ny"]), h["dtype"]
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{hdr_path}: malformed cube header ({exc})") from exc
    if dtype not in _REAL_DTYPES or h.get("order", "row-major") != "row-major":
        raise FormatError(f"{hdr_path}: unsupported dtype/order")
    raw = _read_payload(payload, _REAL_DTYPES[dtype], n_nu * nx * ny)
    return HyperCube(raw.astype(np.float64).reshape(n_nu, nx * ny), nx, ny, h.get("wavelength_nm"))


def write_pattern(pattern: SamplingPattern, path) -> Path:
    """Write both masks of a pattern as ``{"xi": mask, "p": mask}``."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(json.dumps({"xi": pattern.xi.to_json(), "p": pattern.p.to_json()}))
    return p


def read_pattern(path) -> SamplingPattern:
    d = _read_header(Path(path))
    try:
        return SamplingPattern(Mask.from_json(d["xi"]), Mask.from_json(d["p"]))
    except KeyError as exc:
        raise FormatError(f"{path}: pattern needs 'xi' and 'p' masks") from exc


def load_pattern(xi_path, p_path) -> SamplingPattern:
    return SamplingPattern(Mask.load(xi_path), Mask.load(p_path))


def write_measurements(meas: MeasurementSet, path, mask_ref: str | None = None) -> Path:
    """Header plus interleaved complex payload; ``mask_ref`` names the pattern file."""
    hdr, payload = _paths(path)
    hdr.parent.mkdir(parents=True, exist_ok=True)
    m_xi, m_p = meas.Y.shape
    header = {
        "m_xi": m_xi, "m_p": m_p,
        "n_xi": meas.pattern.xi.n if meas.pattern else None,
        "n_p": meas.pattern.p.n if meas.pattern else None,
        "nx": meas.nx, "ny": meas.ny,
        "sigma_nyq": meas.sigma_nyq, "epsilon": meas.epsilon,
        "dtype": "c128", "order": "row-major",
        "mask": mask_ref,
    }
    hdr.write_text(json.dumps(header))
    np.ascontiguousarray(meas.Y, dtype="<c16").tofile(payload)
    return hdr


def read_measurements(path, pattern: SamplingPattern | None = None) -> MeasurementSet:
    """Read a MeasurementSet; the pattern comes from ``pattern`` or the header's mask ref."""
    hdr_path, payload = _paths(path)
    h = _read_header(hdr_path)
    try:
        m_xi, m_p = int(h["m_xi"]), int(h["m_p"])
        sigma, eps = float(h["sigma_nyq"]), float(h["epsilon"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{hdr_path}: malformed measurement header ({exc})") from exc
    if h.get("dtype", "c128") != "c128":
        raise FormatError(f"{hdr_path}: unsupported dtype {h.get('dtype')}")
    Y = _read_payload(payload, "<c16", m_xi * m_p).reshape(m_xi, m_p)
    if pattern is None and h.get("mask"):
        ref = Path(h["mask"])
        pattern = read_pattern(ref if ref.is_absolute() else hdr_path.parent / ref)
    return MeasurementSet(Y=Y, sigma_nyq=sigma, epsilon=eps, pattern=pattern,
                          nx=h.get("nx"), ny=h.get("ny"))


def write_json(obj, path) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=True))
    return p


def read_json(path) -> dict:
    return _read_header(Path(path))
