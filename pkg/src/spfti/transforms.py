"""Orthonormal fast transforms: DFT, sequency-ordered Walsh-Hadamard, Haar.

Every transform here is unitary. The 1-D DFT runs on ``numpy.fft`` with
``norm="ortho"``; the Walsh-Hadamard and Haar butterflies are hand-written
kernels with a numba path and a numpy path (see :mod:`spfti._accel`).

Coefficient layouts
-------------------
* WHT: index ``s`` holds the Walsh function with exactly ``s`` sign changes
  (sequency order).
* Haar: ``[scaling, coarsest detail, 2 details, 4 details, ..., n/2 finest]``.

The dense ``*_matrix`` builders evaluate each basis from its definition and
serve as oracles for the fast paths and as inputs to coherence computations.
"""

import math

import numpy as np

from ._accel import njit, resolve_backend
from .errors import DimensionError


def is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def _check_pow2(n: int, what: str = "length") -> None:
    if not is_pow2(n) or n < 2:
        raise DimensionError(f"{what} must be a power of two >= 2, got {n}")


# ---------------------------------------------------------------------------
# DFT
# ---------------------------------------------------------------------------

def dft_forward(x, axis: int = 0) -> np.ndarray:
    """Unitary DFT along ``axis`` (scale ``1/sqrt(N)``)."""
    x = np.asarray(x)
    _check_pow2(x.shape[axis])
    return np.fft.fft(x, axis=axis, norm="ortho")


def dft_inverse(x, axis: int = 0) -> np.ndarray:
    """Inverse (equivalently adjoint) of :func:`dft_forward`."""
    x = np.asarray(x)
    _check_pow2(x.shape[axis])
    return np.fft.ifft(x, axis=axis, norm="ortho")


def dft_matrix(n: int) -> np.ndarray:
    _check_pow2(n)
    jk = np.outer(np.arange(n), np.arange(n)) % n
    return np.exp(-2j * np.pi * jk / n) / math.sqrt(n)


# ---------------------------------------------------------------------------
# Walsh-Hadamard
# ---------------------------------------------------------------------------

def _bit_reverse(v: np.ndarray, bits: int) -> np.ndarray:
    out = np.zeros_like(v)
    for b in range(bits):
        out |= ((v >> b) & 1) << (bits - 1 - b)
    return out


def sequency_permutation(n: int) -> np.ndarray:
    """Natural (Sylvester) row index of the sequency-``s`` Walsh function.

    ``walsh[s] = natural[perm[s]]`` with ``perm[s] = bitrev(gray(s))``.
    """
    _check_pow2(n)
    s = np.arange(n, dtype=np.int64)
    return _bit_reverse(s ^ (s >> 1), n.bit_length() - 1)


@njit(cache=True)
def _fwht_rows_nb(a):
    rows, n = a.shape
    for r in range(rows):
        h = 1
        while h < n:
            for i in range(0, n, 2 * h):
                for j in range(i, i + h):
                    u = a[r, j]
                    v = a[r, j + h]
                    a[r, j] = u + v
                    a[r, j + h] = u - v
            h *= 2


def _fwht_rows_np(a):
    rows, n = a.shape
    h = 1
    while h < n:
        y = a.reshape(rows, n // (2 * h), 2, h)
        u = y[:, :, 0, :].copy()
        v = y[:, :, 1, :]
        y[:, :, 0, :] += v
        v *= -1
        v += u
        h *= 2


def _rows_view(x, axis: int):
    """Move ``axis`` last and flatten the rest into a contiguous working copy."""
    moved = np.moveaxis(np.asarray(x), axis, -1)
    dtype = np.result_type(moved.dtype, np.float64)
    work = np.array(moved.reshape(-1, moved.shape[-1]), dtype=dtype, order="C")
    return work, moved.shape


def _restore(work, shape, axis: int) -> np.ndarray:
    return np.moveaxis(work.reshape(shape), -1, axis)


def wht_forward(x, axis: int = -1, backend: str | None = None) -> np.ndarray:
    """Orthonormal sequency-ordered 1-D Walsh-Hadamard transform along ``axis``.

    The transform matrix is symmetric and orthogonal, so it is its own inverse.
    """
    x = np.asarray(x)
    n = x.shape[axis]
    _check_pow2(n)
    work, shape = _rows_view(x, axis)
    if resolve_backend(backend) == "numba":
        _fwht_rows_nb(work)
    else:
        _fwht_rows_np(work)
    work = work[:, sequency_permutation(n)]
    work *= 1.0 / math.sqrt(n)
    return _restore(work, shape, axis)


def wht_2d_forward(img, backend: str | None = None) -> np.ndarray:
    """Separable 2-D WHT over the last two axes (rows then columns).

    With row-major flattening this is ``kron(W_x, W_y)`` acting on the
    flattened image, whose entries are ``+-1/sqrt(nx*ny)``.
    """
    img = np.asarray(img)
    if img.ndim < 2:
        raise DimensionError("wht_2d_forward needs at least 2 dimensions")
    out = wht_forward(img, axis=-1, backend=backend)
    return wht_forward(out, axis=-2, backend=backend)


wht_2d_inverse = wht_2d_forward


def natural_hadamard_matrix(n: int) -> np.ndarray:
    """Unnormalized Sylvester matrix, ``H[i, j] = (-1)**popcount(i & j)``."""
    _check_pow2(n)
    i = np.arange(n)
    anded = i[:, None] & i[None, :]
    parity = np.zeros_like(anded)
    while anded.any():
        parity ^= anded & 1
        anded >>= 1
    return 1.0 - 2.0 * parity


def walsh_matrix(n: int) -> np.ndarray:
    return natural_hadamard_matrix(n)[sequency_permutation(n)] / math.sqrt(n)


def walsh_2d_matrix(nx: int, ny: int) -> np.ndarray:
    """Dense 2-D WHT acting on row-major flattened ``nx x ny`` images."""
    return np.kron(walsh_matrix(nx), walsh_matrix(ny))


# ---------------------------------------------------------------------------
# Haar
# ---------------------------------------------------------------------------

_R2 = 1.0 / math.sqrt(2.0)


@njit(cache=True)
def _haar_fwd_rows_nb(a):
    rows, n = a.shape
    tmp = np.empty(n, dtype=a.dtype)
    c = 0.7071067811865476
    for r in range(rows):
        m = n
        while m > 1:
            half = m // 2
            for i in range(half):
                u = a[r, 2 * i]
                v = a[r, 2 * i + 1]
                tmp[i] = (u + v) * c
                tmp[half + i] = (u - v) * c
            for i in range(m):
                a[r, i] = tmp[i]
            m = half


@njit(cache=True)
def _haar_inv_rows_nb(a):
    rows, n = a.shape
    tmp = np.empty(n, dtype=a.dtype)
    c = 0.7071067811865476
    for r in range(rows):
        m = 2
        while m <= n:
            half = m // 2
            for i in range(half):
                u = a[r, i]
                v = a[r, half + i]
                tmp[2 * i] = (u + v) * c
                tmp[2 * i + 1] = (u - v) * c
            for i in range(m):
                a[r, i] = tmp[i]
            m *= 2


def _haar_fwd_rows_np(a):
    m = a.shape[1]
    while m > 1:
        even = a[:, 0:m:2]
        odd = a[:, 1:m:2]
        s = (even + odd) * _R2
        d = (even - odd) * _R2
        half = m // 2
        a[:, :half] = s
        a[:, half:m] = d
        m = half


def _haar_inv_rows_np(a):
    n = a.shape[1]
    m = 2
    while m <= n:
        half = m // 2
        s = a[:, :half].copy()
        d = a[:, half:m].copy()
        a[:, 0:m:2] = (s + d) * _R2
        a[:, 1:m:2] = (s - d) * _R2
        m *= 2


def haar_forward(x, axis: int = -1, backend: str | None = None) -> np.ndarray:
    """Full-depth orthonormal 1-D Haar analysis along ``axis``."""
    x = np.asarray(x)
    _check_pow2(x.shape[axis])
    work, shape = _rows_view(x, axis)
    if resolve_backend(backend) == "numba":
        _haar_fwd_rows_nb(work)
    else:
        _haar_fwd_rows_np(work)
    return _restore(work, shape, axis)


def haar_inverse(x, axis: int = -1, backend: str | None = None) -> np.ndarray:
    x = np.asarray(x)
    _check_pow2(x.shape[axis])
    work, shape = _rows_view(x, axis)
    if resolve_backend(backend) == "numba":
        _haar_inv_rows_nb(work)
    else:
        _haar_inv_rows_np(work)
    return _restore(work, shape, axis)


def haar_2d_forward(img, backend: str | None = None) -> np.ndarray:
    """Tensor-product (separable, full depth on each axis) 2-D Haar analysis."""
    img = np.asarray(img)
    if img.ndim < 2:
        raise DimensionError("haar_2d_forward needs at least 2 dimensions")
    out = haar_forward(img, axis=-1, backend=backend)
    return haar_forward(out, axis=-2, backend=backend)


def haar_2d_inverse(coeffs, backend: str | None = None) -> np.ndarray:
    coeffs = np.asarray(coeffs)
    if coeffs.ndim < 2:
        raise DimensionError("haar_2d_inverse needs at least 2 dimensions")
    out = haar_inverse(coeffs, axis=-2, backend=backend)
    return haar_inverse(out, axis=-1, backend=backend)


def haar_matrix(n: int) -> np.ndarray:
    """Dense Haar analysis matrix; row ``k`` is the ``k``-th basis function.

    Row 0 is the constant ``1/sqrt(n)``. Row ``2**j + k`` is the detail
    function at scale ``j`` and shift ``k``: support length ``L = n / 2**j``,
    ``+1/sqrt(L)`` on the first half and ``-1/sqrt(L)`` on the second.
    """
    _check_pow2(n)
    out = np.zeros((n, n))
    out[0] = 1.0 / math.sqrt(n)
    for j in range(n.bit_length() - 1):
        length = n >> j
        amp = 1.0 / math.sqrt(length)
        for k in range(1 << j):
            start = k * length
            out[(1 << j) + k, start:start + length // 2] = amp
            out[(1 << j) + k, start + length // 2:start + length] = -amp
    return out


def haar_2d_matrix(nx: int, ny: int) -> np.ndarray:
    return np.kron(haar_matrix(nx), haar_matrix(ny))
