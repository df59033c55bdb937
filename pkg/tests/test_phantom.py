import numpy as np
import pytest

from spfti.errors import ConfigError
from spfti.phantom import (PhantomSpec, corpus_specs, gaussian_spectrum, generate_corpus,
                           generate_phantom)
from spfti.sampling import estimate_sparsity_in_levels, spatial_partition, spectral_partition
from spfti.transforms import dft_forward, haar_2d_forward


def _central_fraction(spectrum, frac=0.25):
    c = np.abs(dft_forward(spectrum)) ** 2
    n = c.size
    freq = np.fft.fftfreq(n, 1.0 / n)
    return c[np.abs(freq) < frac * n / 2].sum() / c.sum()


def test_zero_sources():
    X = generate_phantom(PhantomSpec(n_sources=0))
    assert X.values.shape == (128, 1024) and not X.values.any()


def test_rank_one_constant_map():
    spec = PhantomSpec(n_nu=128, nx=8, ny=8, n_sources=1, spectral_peaks=[(40, 4, 0.8)],
                       spatial_style="flat")
    X = generate_phantom(spec).values
    assert np.linalg.matrix_rank(X) == 1
    assert 1 - _central_fraction(X[:, 0]) < 0.01


def test_determinism_and_range():
    for style in ("blobs", "blocks", "flat"):
        spec = PhantomSpec(seed=5, spatial_style=style)
        a, b = generate_phantom(spec), generate_phantom(PhantomSpec(seed=5, spatial_style=style))
        assert np.array_equal(a.values, b.values)
        assert a.values.min() >= 0 and a.values.max() <= 1
    assert not np.array_equal(generate_phantom(PhantomSpec(seed=1)).values,
                              generate_phantom(PhantomSpec(seed=2)).values)


@pytest.mark.parametrize("seed", range(5))
def test_compressibility_contract(seed):
    spec = PhantomSpec(seed=seed)
    X = generate_phantom(spec).values
    # spectral: per-pixel DFT energy in the central quarter of bins
    c = np.abs(dft_forward(X, axis=0)) ** 2
    freq = np.fft.fftfreq(spec.n_nu, 1.0 / spec.n_nu)
    assert c[np.abs(freq) < spec.n_nu / 8].sum() / c.sum() >= 0.99
    # spatial: per-band Haar energy in the coarsest four levels
    W = spatial_partition(spec.nx, spec.ny)
    h = np.abs(haar_2d_forward(X.reshape(-1, spec.nx, spec.ny)).reshape(spec.n_nu, -1)) ** 2
    coarse = np.concatenate(W.levels[:4])
    assert h[:, coarse].sum() / h.sum() >= 0.95


def test_blocks_are_haar_sparse():
    spec = PhantomSpec(spatial_style="blocks", seed=3)
    X = generate_phantom(spec).values
    W = spatial_partition(spec.nx, spec.ny)
    h = haar_2d_forward(X.reshape(-1, 32, 32)).reshape(spec.n_nu, -1)
    assert np.allclose(h[:, W.levels[3]], 0, atol=1e-12)
    assert np.allclose(h[:, W.levels[4]], 0, atol=1e-12)


def test_gaussian_spectrum_wraps():
    s = gaussian_spectrum(64, 1.0, 3.0)
    assert s[1] == 1.0 and np.isclose(s[0], s[2]) and np.isclose(s[63], s[3])


def test_corpus_spectral_support_width5():
    """Width-5 Gaussians on 512 bins keep >1% coefficients inside levels 1..7 of 32."""
    W = spectral_partition(512, 32)
    specs = [PhantomSpec(n_nu=512, nx=2, ny=2, n_sources=1, spectral_peaks=[(c, 5.0, 1.0)])
             for c in (100.0, 256.0, 400.5)]
    k = estimate_sparsity_in_levels(generate_corpus(specs, "spectral"), W, 0.01).k
    assert k[:7].all() and not k[7:].any()


def test_corpus_width4_reaches_level_8():
    # a width-4 Gaussian is broader in frequency: its >1% support reaches |f| = 61
    W = spectral_partition(512, 32)
    spec = PhantomSpec(n_nu=512, nx=2, ny=2, n_sources=1, spectral_peaks=[(256.0, 4.0, 1.0)])
    k = estimate_sparsity_in_levels(generate_corpus([spec], "spectral"), W, 0.01).k
    assert k[7] > 0 and not k[8:].any()


def test_corpus_constant_patch():
    spec = PhantomSpec(nx=8, ny=8, n_sources=1, spatial_style="flat")
    (item,) = generate_corpus([spec], "spatial")
    W = spatial_partition(8, 8)
    e = np.abs(item.ravel()) ** 2
    assert np.isclose(e[W.levels[0]].sum(), e.sum())


def test_corpus_determinism_and_errors():
    W = spatial_partition(32, 32)
    specs = corpus_specs(PhantomSpec(), 10, 1000)
    assert [s.seed for s in specs] == list(range(1000, 1010)) and all(s.n_sources == 1 for s in specs)
    k1 = estimate_sparsity_in_levels(generate_corpus(specs, "spatial"), W, 0.01).k
    k2 = estimate_sparsity_in_levels(generate_corpus(corpus_specs(PhantomSpec(), 10, 1000), "spatial"),
                                     W, 0.01).k
    assert np.array_equal(k1, k2)
    with pytest.raises(ConfigError):
        generate_corpus([], "spatial")
    with pytest.raises(ConfigError):
        generate_corpus(specs, "wavelet")
    with pytest.raises(ConfigError):
        corpus_specs(PhantomSpec(), 0, 0)


@pytest.mark.parametrize("bad", [
    dict(n_nu=100), dict(nx=0), dict(n_sources=-1), dict(spatial_style="stripes"),
    dict(n_sources=1, spectral_peaks=[(200, 4, 1)]), dict(n_sources=1, spectral_peaks=[(10, 0.5, 1)]),
    dict(n_sources=1, spectral_peaks=[(10, 4, 0)]), dict(n_sources=2, spectral_peaks=[(10, 4, 1)]),
    dict(width_range=(0.5, 2)),
])
def test_invalid_specs(bad):
    with pytest.raises(ConfigError):
        PhantomSpec(**bad)


def test_spec_json_roundtrip():
    spec = PhantomSpec(n_sources=2, spectral_peaks=[(10, 4, 1), (50, 6, 0.5)], seed=9)
    back = PhantomSpec.from_json(spec.to_json())
    assert back == spec
    with pytest.raises(ConfigError):
        PhantomSpec.from_json({"colour": "red"})
