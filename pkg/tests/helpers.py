"""Shared constructions for solver and acceptance tests."""

import numpy as np

from spfti.acquisition import add_noise, forward
from spfti.experiment import allocate_with_overflow
from spfti.sampling import (Mask, SamplingPattern, estimate_sparsity_in_levels, multilevel_coherence,
                            sampling_profile, spatial_partition, spectral_partition)
from spfti.solver import analysis, synthesis
from spfti.transforms import dft_matrix, haar_2d_matrix, walsh_2d_matrix


def sparse_in_levels_volume(seed, n_xi=64, side=16, max_freq=3, k_fine=3):
    """Real volume whose Fourier x Haar coefficients are sparse in levels.

    Spectral support: signed frequencies ``|f| <= max_freq`` (central levels,
    conjugate-symmetric so the volume is real). Spatial support: every
    coefficient of all but the finest dyadic level, plus ``k_fine`` random
    coefficients of the finest level whose both 1-D scales are finest.
    """
    rng = np.random.default_rng(seed)
    Wp = spatial_partition(side, side)
    freq = np.fft.fftfreq(n_xi, 1.0 / n_xi).astype(int)
    rows = np.flatnonzero(np.abs(freq) <= max_freq)
    fine = np.arange(side // 2, side)
    fine2d = (fine[:, None] * side + fine[None, :]).ravel()
    cols = np.r_[np.concatenate(Wp.levels[:-1]), rng.choice(fine2d, k_fine, replace=False)]
    C = np.zeros((n_xi, side * side), dtype=complex)
    C[np.ix_(rows, cols)] = (rng.standard_normal((rows.size, cols.size))
                             + 1j * rng.standard_normal((rows.size, cols.size)))
    return np.real(synthesis(C, (side, side)))


def own_profile_mls(X, side, n_xi, r_xi, m_xi, m_p, seed):
    """MLS pattern whose profiles come from the support of ``X`` itself."""
    Wx, Wp = spectral_partition(n_xi, r_xi), spatial_partition(side, side)
    C = np.abs(analysis(X, (side, side)))
    kx = estimate_sparsity_in_levels([C.max(axis=1)], Wx, 1e-9)
    kp = estimate_sparsity_in_levels([C.max(axis=0)], Wp, 1e-9)
    F = dft_matrix(n_xi)
    th_x = sampling_profile(multilevel_coherence(F, F.conj().T, Wx, Wx), kx)
    th_p = sampling_profile(multilevel_coherence(walsh_2d_matrix(side, side),
                                                 haar_2d_matrix(side, side).T, Wp, Wp), kp)
    return SamplingPattern(Mask.mls(allocate_with_overflow(th_x, Wx, m_xi), Wx, 2 * seed),
                           Mask.mls(allocate_with_overflow(th_p, Wp, m_p), Wp, 2 * seed + 1))


def measure(X, pattern, side, sigma=0.0, seed=0):
    return add_noise(forward(X, pattern, (side, side)), sigma, seed, pattern, (side, side))
