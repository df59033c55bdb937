"""Synthetic hyperspectral phantoms and coefficient corpora.

A phantom is a sum of separable sources ``spectrum_s (x) map_s``. Spectra are
circularly wrapped Gaussian peaks over wavenumber bins, so their DFT decays
like a Gaussian and concentrates in the central (low-frequency) bins. Maps are
smooth blobs, dyadic-aligned blocks (sparse in Haar), or flat fields.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .acquisition import HyperCube
from .errors import ConfigError
from .transforms import dft_forward, haar_2d_forward, is_pow2

STYLES = ("blobs", "blocks", "flat")


@dataclass
class PhantomSpec:
    n_nu: int = 128
    nx: int = 32
    ny: int = 32
    n_sources: int = 3
    # (center bin, width = Gaussian std in bins, amplitude); drawn from the seed when empty
    spectral_peaks: list[tuple[float, float, float]] = field(default_factory=list)
    spatial_style: str = "blobs"
    seed: int = 0
    width_range: tuple[float, float] = (5.0, 8.0)

    def __post_init__(self):
        self.spectral_peaks = [tuple(float(v) for v in p) for p in self.spectral_peaks]
        self.width_range = tuple(float(v) for v in self.width_range)
        self.validate()

    def validate(self) -> None:
        if not all(is_pow2(n) and n >= 2 for n in (self.n_nu, self.nx, self.ny)):
            raise ConfigError("phantom sizes must be powers of two >= 2")
        if self.n_sources < 0:
            raise ConfigError("n_sources must be >= 0")
        if self.spatial_style not in STYLES:
            raise ConfigError(f"spatial_style must be one of {STYLES}")
        if self.spectral_peaks and len(self.spectral_peaks) != self.n_sources:
            raise ConfigError("give one spectral peak per source, or none")
        for c, w, a in self.spectral_peaks:
            if not 0 <= c < self.n_nu or w < 1 or a <= 0:
                raise ConfigError(f"invalid peak (center={c}, width={w}, amplitude={a})")
        lo, hi = self.width_range
        if not 1 <= lo <= hi:
            raise ConfigError("width_range must satisfy 1 <= low <= high")

    def to_json(self) -> dict:
        d = asdict(self)
        d["spectral_peaks"] = [list(p) for p in self.spectral_peaks]
        d["width_range"] = list(self.width_range)
        return d

    @classmethod
    def from_json(cls, d: dict) -> "PhantomSpec":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown phantom options {sorted(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def dumps(self) -> str:
        return json.dumps(self.to_json())


def gaussian_spectrum(n: int, center: float, width: float, amplitude: float = 1.0) -> np.ndarray:
    """Gaussian peak on a circular wavenumber grid of ``n`` bins."""
    nu = np.arange(n)
    d = (nu - center + n / 2) % n - n / 2
    return amplitude * np.exp(-0.5 * (d / width) ** 2)


def _blob_map(rng, nx, ny):
    x = np.arange(nx)[:, None]
    y = np.arange(ny)[None, :]
    out = np.zeros((nx, ny))
    for _ in range(int(rng.integers(2, 5))):
        cx, cy = rng.uniform(0.2, 0.8) * nx, rng.uniform(0.2, 0.8) * ny
        rad = rng.uniform(0.12, 0.25) * min(nx, ny)
        out += rng.uniform(0.5, 1.0) * np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2 * rad ** 2))
    return out / out.max()


def _block_map(rng, nx, ny):
    cells = 8 if min(nx, ny) >= 8 else min(nx, ny)
    coarse = np.zeros((cells, cells))
    for _ in range(int(rng.integers(2, 5))):
        i0, j0 = rng.integers(0, cells - 1, size=2)
        i1, j1 = i0 + rng.integers(1, cells - i0 + 1), j0 + rng.integers(1, cells - j0 + 1)
        coarse[i0:i1, j0:j1] += rng.uniform(0.3, 1.0)
    out = np.kron(coarse, np.ones((nx // cells, ny // cells)))
    peak = out.max()
    return out / peak if peak > 0 else out


def source_components(spec: PhantomSpec) -> tuple[np.ndarray, np.ndarray]:
    """Spectra ``(n_sources, n_nu)`` and maps ``(n_sources, nx, ny)`` of a phantom."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    spectra = np.zeros((spec.n_sources, spec.n_nu))
    maps = np.zeros((spec.n_sources, spec.nx, spec.ny))
    for s in range(spec.n_sources):
        if spec.spectral_peaks:
            c, w, a = spec.spectral_peaks[s]
        else:
            c = rng.uniform(0.2, 0.8) * spec.n_nu
            w = rng.uniform(*spec.width_range)
            a = rng.uniform(0.5, 1.0)
        spectra[s] = gaussian_spectrum(spec.n_nu, c, w, a)
        if spec.spatial_style == "blobs":
            maps[s] = _blob_map(rng, spec.nx, spec.ny)
        elif spec.spatial_style == "blocks":
            maps[s] = _block_map(rng, spec.nx, spec.ny)
        else:
            maps[s] = 1.0
    return spectra, maps


def generate_phantom(spec: PhantomSpec) -> HyperCube:
    """Deterministic volume with values in ``[0, 1]``."""
    spectra, maps = source_components(spec)
    values = np.einsum("sn,sp->np", spectra, maps.reshape(spec.n_sources, spec.nx * spec.ny))
    peak = values.max() if values.size else 0.0
    if peak > 1.0:
        values /= peak
    return HyperCube(values, spec.nx, spec.ny)


def generate_corpus(specs, basis: str) -> list[np.ndarray]:
    """Sparsity-basis coefficients of every source of every spec.

    ``basis="spectral"`` yields the unitary DFT of each source spectrum;
    ``basis="spatial"`` yields the 2-D Haar transform of each source map.
    """
    specs = list(specs)
    if not specs:
        raise ConfigError("empty phantom list")
    if basis not in ("spectral", "spatial"):
        raise ConfigError(f"basis must be 'spectral' or 'spatial', got {basis!r}")
    out = []
    for spec in specs:
        spectra, maps = source_components(spec)
        if basis == "spectral":
            out.extend(dft_forward(spectra, axis=1))
        else:
            out.extend(haar_2d_forward(maps))
    return out


def corpus_specs(template: PhantomSpec, n_items: int, seed: int) -> list[PhantomSpec]:
    """``n_items`` single-source variants of ``template`` with consecutive seeds."""
    if n_items < 1:
        raise ConfigError("corpus needs at least one item")
    d = template.to_json()
    d.update(n_sources=1, spectral_peaks=[])
    return [PhantomSpec.from_json({**d, "seed": seed + i}) for i in range(n_items)]
