"""Single-pixel FTI acquisition: forward model, adjoint, noise, system metrics.

The measurement of a volume ``X`` (``n_xi`` wavenumbers by ``n_p = nx*ny``
row-major pixels) is ``Y = P_xi F X H^T P_p^T``: a unitary DFT down each
spectral column, a 2-D sequency Walsh-Hadamard transform across each spatial
row, then row/column subsampling. Dense ``F`` and ``H`` are never formed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError
from .sampling import SamplingPattern
from .transforms import dft_forward, dft_inverse, is_pow2, wht_2d_forward


@dataclass
class HyperCube:
    """Real spectral-by-spatial volume, ``values.shape == (n_nu, nx*ny)``."""

    values: np.ndarray
    nx: int
    ny: int
    wavelength_nm: list[float] | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.ndim != 2:
            raise DimensionError("HyperCube values must be 2-D (n_nu, n_p)")
        n_nu, n_p = self.values.shape
        if not (is_pow2(n_nu) and is_pow2(self.nx) and is_pow2(self.ny)):
            raise DimensionError(f"dimensions must be powers of two, got {n_nu}, {self.nx}, {self.ny}")
        if n_p != self.nx * self.ny:
            raise DimensionError(f"{n_p} pixels do not match {self.nx}x{self.ny}")
        if not np.all(np.isfinite(self.values)):
            raise DimensionError("HyperCube values must be finite")
        if self.wavelength_nm is not None and len(self.wavelength_nm) != n_nu:
            raise DimensionError("wavelength axis length differs from n_nu")

    @property
    def n_nu(self) -> int:
        return self.values.shape[0]

    @property
    def n_p(self) -> int:
        return self.values.shape[1]

    def image(self, band: int) -> np.ndarray:
        return self.values[band].reshape(self.nx, self.ny)


@dataclass
class MeasurementSet:
    Y: np.ndarray
    sigma_nyq: float
    epsilon: float
    pattern: SamplingPattern | None = None
    nx: int | None = None
    ny: int | None = None

    def __post_init__(self):
        self.Y = np.asarray(self.Y, dtype=np.complex128)
        if self.pattern is not None and self.Y.shape != self.pattern.shape:
            raise DimensionError(f"Y of shape {self.Y.shape} vs pattern {self.pattern.shape}")


def _as_array(X, spatial_shape):
    if isinstance(X, HyperCube):
        return X.values, (X.nx, X.ny)
    arr = np.asarray(X)
    if spatial_shape is None:
        raise DimensionError("spatial_shape is required for raw arrays")
    return arr, tuple(spatial_shape)


def _check(arr, nx, ny, pattern: SamplingPattern):
    if arr.ndim != 2 or arr.shape[1] != nx * ny:
        raise DimensionError(f"volume of shape {arr.shape} does not match {nx}x{ny} pixels")
    if arr.shape != (pattern.xi.n, pattern.p.n):
        raise DimensionError(f"volume {arr.shape} vs pattern domain ({pattern.xi.n}, {pattern.p.n})")


def forward(X, pattern: SamplingPattern, spatial_shape=None, backend=None) -> np.ndarray:
    """Subsampled Fourier-Hadamard measurements, complex ``(M_xi, M_p)``."""
    arr, (nx, ny) = _as_array(X, spatial_shape)
    _check(arr, nx, ny, pattern)
    rows = dft_forward(arr, axis=0)[pattern.omega_xi]
    coded = wht_2d_forward(rows.reshape(-1, nx, ny), backend=backend).reshape(rows.shape)
    return np.ascontiguousarray(coded[:, pattern.omega_p])


def adjoint(Y, pattern: SamplingPattern, spatial_shape, backend=None) -> np.ndarray:
    """Adjoint of :func:`forward`: zero-fill, inverse DFT, WHT (self-adjoint)."""
    Y = np.asarray(Y)
    if Y.shape != pattern.shape:
        raise DimensionError(f"Y of shape {Y.shape} vs pattern {pattern.shape}")
    nx, ny = spatial_shape
    n_xi, n_p = pattern.xi.n, pattern.p.n
    if n_p != nx * ny:
        raise DimensionError(f"pattern spatial size {n_p} vs {nx}x{ny}")
    filled = np.zeros((Y.shape[0], n_p), dtype=np.complex128)
    filled[:, pattern.omega_p] = Y
    filled = wht_2d_forward(filled.reshape(-1, nx, ny), backend=backend).reshape(filled.shape)
    full = np.zeros((n_xi, n_p), dtype=np.complex128)
    full[pattern.omega_xi] = filled
    return dft_inverse(full, axis=0)


def fidelity_radius(sigma_nyq: float, m_xi: int, m_p: int) -> float:
    return float(sigma_nyq) * math.sqrt(m_xi * m_p)


def add_noise(Y_clean, sigma_nyq: float, seed: int, pattern: SamplingPattern | None = None,
              spatial_shape=None) -> MeasurementSet:
    """Add real i.i.d. Gaussian noise of std ``sigma_nyq`` to every measurement.

    Drawing directly on the ``M_xi x M_p`` kept entries has the same law as
    subsampling a full Nyquist-grid noise matrix.
    """
    if sigma_nyq < 0:
        raise ConfigError(f"sigma_nyq must be >= 0, got {sigma_nyq}")
    Y = np.array(Y_clean, dtype=np.complex128)
    if sigma_nyq > 0:
        Y += sigma_nyq * np.random.default_rng(seed).standard_normal(Y.shape)
    nx, ny = spatial_shape if spatial_shape is not None else (None, None)
    return MeasurementSet(Y=Y, sigma_nyq=float(sigma_nyq),
                          epsilon=fidelity_radius(sigma_nyq, *Y.shape),
                          pattern=pattern, nx=nx, ny=ny)


def mur(m_xi: int, m_p: int, n_xi: int, n_p: int) -> float:
    """Measurement undersampling ratio."""
    if n_xi <= 0 or n_p <= 0:
        raise ConfigError("n_xi and n_p must be positive")
    if not (0 < m_xi <= n_xi and 0 < m_p <= n_p):
        raise ConfigError("need 0 < m_xi <= n_xi and 0 < m_p <= n_p")
    return m_xi * m_p / (n_xi * n_p)


def err(m_xi: int, m_p: int, n_xi: int) -> float:
    """Exposure reduction ratio versus Nyquist FTI."""
    if m_p < 1:
        raise ConfigError("m_p must be >= 1")
    if not 0 < m_xi <= n_xi:
        raise ConfigError("need 0 < m_xi <= n_xi")
    return 0.5 * (1.0 + 1.0 / m_p) * m_xi / n_xi
