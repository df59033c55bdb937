"""Multilevel sampling design.

Level partitions, multilevel coherence, sparsity in levels, sampling
profiles, per-level sample allocation and index-mask generation.

Indices are 0-based in memory. The JSON mask format is 1-based.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, DimensionError, FormatError
from .transforms import is_pow2

# Sampling profiles read off the published sampling-profile figure.
FIXTURES = {
    "fig2-spectral": {
        "domain": "spectral",
        "theta": [1.0] * 7 + [0.0] * 25,
        "level_size": 16,
        "provenance": "Fourier/Fourier spectral profile, 32 symmetric levels over 512 bins",
    },
    "fig2-spatial": {
        "domain": "spatial",
        "theta": [1.0, 1.0, 0.8125, 0.380208333333333, 0.2421875,
                  0.187825520833333, 0.0946451822916667],
        "level_sizes": [4, 12, 48, 192, 768, 3072, 12288],
        "provenance": "Hadamard/Haar spatial profile, 7 dyadic levels over 128x128 pixels",
    },
}


@dataclass
class LevelPartition:
    """Ordered disjoint index sets covering ``range(n)``."""

    levels: list[np.ndarray]
    domain: str = "generic"

    def __post_init__(self):
        self.levels = [np.sort(np.asarray(lv, dtype=np.int64)) for lv in self.levels]
        if not self.levels:
            raise DimensionError("a partition needs at least one level")
        allidx = np.concatenate(self.levels)
        n = allidx.size
        if n == 0 or allidx.min() < 0 or allidx.max() >= n or np.unique(allidx).size != n:
            raise DimensionError("levels must be disjoint and cover range(n)")

    @property
    def r(self) -> int:
        return len(self.levels)

    @property
    def n(self) -> int:
        return int(sum(lv.size for lv in self.levels))

    @property
    def sizes(self) -> np.ndarray:
        return np.array([lv.size for lv in self.levels], dtype=np.int64)

    def labels(self) -> np.ndarray:
        """0-based level number of every index."""
        out = np.empty(self.n, dtype=np.int64)
        for t, lv in enumerate(self.levels):
            out[lv] = t
        return out

    def to_lists(self) -> list[list[int]]:
        return [(lv + 1).tolist() for lv in self.levels]


def spectral_partition(n: int, r: int) -> LevelPartition:
    """Split ``n`` DFT bins into ``r`` equal bands symmetric about DC.

    Bins are ranked by their position in the center-shifted spectrum. With
    ``h = n / (2r)``, level ``t`` (1-based) holds the shifted positions
    ``[n/2 - t*h, n/2 - (t-1)*h)`` and ``[n/2 + (t-1)*h, n/2 + t*h)``, i.e.
    signed frequencies ``-t*h .. -(t-1)*h - 1`` and ``(t-1)*h .. t*h - 1``.
    """
    if not (is_pow2(n) and is_pow2(r)) or n < 2:
        raise DimensionError(f"n and r must be powers of two, got n={n}, r={r}")
    if n % r or (n // r) % 2:
        raise DimensionError(f"n/r must be an even integer, got n={n}, r={r}")
    h = n // (2 * r)
    freq = np.fft.fftfreq(n, d=1.0 / n).astype(np.int64)
    # band of a signed frequency f: f >= 0 -> f // h, f < 0 -> (-f - 1) // h
    band = np.where(freq >= 0, freq // h, (-freq - 1) // h)
    return LevelPartition([np.flatnonzero(band == t) for t in range(r)], domain="spectral")


def dyadic_levels_1d(n: int) -> np.ndarray:
    """1-based dyadic level per index: ``{0,1} -> 1``, ``[2**(s-1), 2**s) -> s``."""
    if not is_pow2(n) or n < 2:
        raise DimensionError(f"size must be a power of two >= 2, got {n}")
    idx = np.arange(n)
    lev = np.ones(n, dtype=np.int64)
    big = idx >= 2
    lev[big] = np.floor(np.log2(idx[big])).astype(np.int64) + 1
    return lev


def spatial_partition(nx: int, ny: int) -> LevelPartition:
    """Dyadic 2-D levels over row-major flattened ``nx x ny`` coefficients.

    The level of coefficient ``(i, k)`` is ``max(level(i), level(k))``, which
    applies equally to sequency-ordered Walsh and to Haar coefficient indices.
    """
    if nx != ny or not is_pow2(nx) or nx < 2:
        raise DimensionError(f"spatial partition needs square power-of-two size, got {nx}x{ny}")
    lev = dyadic_levels_1d(nx)
    lev2 = np.maximum(lev[:, None], lev[None, :]).ravel()
    r = int(lev.max())
    return LevelPartition([np.flatnonzero(lev2 == s) for s in range(1, r + 1)], domain="spatial")


# ---------------------------------------------------------------------------
# Coherence, sparsity, profiles
# ---------------------------------------------------------------------------

MatrixProvider = np.ndarray | Callable[[], np.ndarray]


def _materialize(provider: MatrixProvider) -> np.ndarray:
    return np.asarray(provider() if callable(provider) else provider)


def multilevel_coherence(sensing: MatrixProvider, sparsity: MatrixProvider,
                         W: LevelPartition, T: LevelPartition,
                         zero_tol: float = 1e-12, max_dim: int = 4096) -> np.ndarray:
    """Multilevel coherence ``mu[t, l]`` of a sensing/sparsity pair.

    ``mu[t, l] = max|G[W_t, :]| * max|G[W_t, T_l]|`` with ``G = sensing @ sparsity``
    (columns of ``sparsity`` are the basis vectors). Entries of ``|G|`` below
    ``zero_tol`` are structural zeros polluted by rounding and are set to 0.
    """
    Phi = _materialize(sensing)
    Psi = _materialize(sparsity)
    if Phi.ndim != 2 or Psi.ndim != 2 or Phi.shape[1] != Psi.shape[0]:
        raise DimensionError(f"incompatible shapes {Phi.shape} and {Psi.shape}")
    if max(Phi.shape + Psi.shape) > max_dim:
        raise ConfigError(f"dense coherence limited to dimension {max_dim}; use a fixture profile")
    if Phi.shape[0] != W.n or Psi.shape[1] != T.n:
        raise DimensionError("partitions do not match the product dimensions")
    G = np.abs(Phi @ Psi)
    G[G < zero_tol] = 0.0
    mu = np.zeros((W.r, T.r))
    for t, wt in enumerate(W.levels):
        rows = G[wt]
        row_max = rows.max()
        for l, tl in enumerate(T.levels):
            mu[t, l] = row_max * rows[:, tl].max()
    return mu


@dataclass
class SparsityProfile:
    k: np.ndarray
    sizes: np.ndarray

    @property
    def ratio(self) -> np.ndarray:
        return self.k / self.sizes


def estimate_sparsity_in_levels(corpus: Sequence[np.ndarray], T: LevelPartition,
                                rel_threshold: float = 0.01) -> SparsityProfile:
    """Worst-case per-level count of significant coefficients over a corpus.

    A coefficient is significant when its magnitude exceeds ``rel_threshold``
    times the largest magnitude in its own item. Items are flattened in C order.
    """
    if len(corpus) == 0:
        raise ConfigError("empty corpus")
    if not 0.0 < rel_threshold < 1.0:
        raise ConfigError(f"rel_threshold must lie in (0, 1), got {rel_threshold}")
    labels = T.labels()
    k = np.zeros(T.r, dtype=np.int64)
    for item in corpus:
        mag = np.abs(np.asarray(item)).ravel()
        if mag.size != T.n:
            raise DimensionError(f"corpus item of size {mag.size} vs partition of size {T.n}")
        peak = mag.max()
        if peak == 0:
            continue
        sig = mag > rel_threshold * peak
        k = np.maximum(k, np.bincount(labels[sig], minlength=T.r))
    return SparsityProfile(k=k, sizes=T.sizes)


@dataclass
class SamplingProfile:
    theta: np.ndarray
    mu: np.ndarray | None = None
    k: np.ndarray | None = None
    source: str = "computed"
    domain: str = "generic"
    level_sizes: list[int] | None = None

    def to_json(self) -> dict:
        out = {"domain": self.domain, "source": self.source, "theta": np.asarray(self.theta).tolist()}
        if self.level_sizes is not None:
            out["level_sizes"] = [int(s) for s in self.level_sizes]
        if self.mu is not None:
            out["mu"] = np.asarray(self.mu).tolist()
        if self.k is not None:
            out["k"] = np.asarray(self.k).tolist()
        return out

    @classmethod
    def from_json(cls, d: dict) -> "SamplingProfile":
        try:
            return cls(theta=np.asarray(d["theta"], dtype=float),
                       mu=None if d.get("mu") is None else np.asarray(d["mu"], dtype=float),
                       k=None if d.get("k") is None else np.asarray(d["k"]),
                       source=d.get("source", "computed"), domain=d.get("domain", "generic"),
                       level_sizes=d.get("level_sizes"))
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"malformed profile: {exc}") from exc


def sampling_profile(mu: np.ndarray, k) -> np.ndarray:
    """``theta[t] = min(1, sum_l mu[t, l] * k[l])``."""
    mu = np.asarray(mu, dtype=float)
    k = np.asarray(k.k if isinstance(k, SparsityProfile) else k, dtype=float)
    if mu.ndim != 2 or mu.shape[1] != k.size:
        raise DimensionError(f"mu of shape {mu.shape} vs k of length {k.size}")
    return np.minimum(1.0, mu @ k)


def fixture_profile(name: str) -> SamplingProfile:
    try:
        fx = FIXTURES[name]
    except KeyError:
        raise ConfigError(f"unknown fixture {name!r}; choose from {sorted(FIXTURES)}") from None
    theta = np.array(fx["theta"])
    sizes = fx.get("level_sizes") or [fx["level_size"]] * theta.size
    return SamplingProfile(theta=theta, source=f"fixture:{name}", domain=fx["domain"], level_sizes=sizes)


# ---------------------------------------------------------------------------
# Allocation and masks
# ---------------------------------------------------------------------------

def allocate_samples(theta, W: LevelPartition | Sequence[int], m_target: int) -> np.ndarray:
    """Split ``m_target`` samples over levels proportionally to ``theta_t * |W_t|``.

    The result is ``m_t = min(|W_t|, round(C * theta_t * |W_t|))`` for the
    constant ``C`` that makes the counts add up to ``m_target``. It is computed
    as a highest-averages apportionment (seat ``j`` of level ``t`` has priority
    ``theta_t |W_t| / (j + 1/2)``), which settles rounding ties by level order
    and never lowers any ``m_t`` when ``m_target`` grows.
    """
    theta = np.asarray(theta, dtype=float)
    sizes = W.sizes if isinstance(W, LevelPartition) else np.asarray(W, dtype=np.int64)
    if theta.shape != sizes.shape:
        raise DimensionError(f"theta has {theta.size} levels, partition has {sizes.size}")
    if np.any(theta < 0) or np.any(theta > 1):
        raise ConfigError("theta entries must lie in [0, 1]")
    m_target = int(m_target)
    capacity = int(sizes[theta > 0].sum())
    if m_target < 0 or m_target > capacity:
        raise ConfigError(f"infeasible target {m_target}: {capacity} indices available where theta > 0")
    weight = theta * sizes
    lvl = np.concatenate([np.full(s, t) for t, s in enumerate(sizes) if theta[t] > 0] or [np.empty(0, int)])
    seat = np.concatenate([np.arange(s) for t, s in enumerate(sizes) if theta[t] > 0] or [np.empty(0, int)])
    prio = weight[lvl] / (seat + 0.5)
    order = np.lexsort((seat, lvl, -prio))[:m_target]
    return np.bincount(lvl[order], minlength=sizes.size).astype(np.int64)


def draw_mls_mask(m, W: LevelPartition, seed: int) -> np.ndarray:
    """Draw ``m[t]`` indices uniformly without replacement inside each level."""
    m = np.asarray(m, dtype=np.int64)
    if m.size != W.r:
        raise DimensionError(f"{m.size} counts for {W.r} levels")
    if np.any(m < 0) or np.any(m > W.sizes):
        raise ConfigError("per-level counts must satisfy 0 <= m_t <= |W_t|")
    rng = np.random.default_rng(seed)
    picks = [rng.choice(lv, size=int(mt), replace=False) for lv, mt in zip(W.levels, m)]
    return np.sort(np.concatenate(picks)).astype(np.int64)


def draw_uds_mask(m: int, n: int, seed: int) -> np.ndarray:
    """Draw ``m`` of ``n`` indices uniformly without replacement."""
    if not 0 <= m <= n:
        raise ConfigError(f"cannot draw {m} of {n} indices")
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(n, size=m, replace=False)).astype(np.int64)


@dataclass
class Mask:
    """One-domain index mask in the on-disk JSON layout (0-based in memory)."""

    strategy: str
    seed: int
    n: int
    omega: np.ndarray
    levels: list[np.ndarray] = field(default_factory=list)
    m: list[int] = field(default_factory=list)

    def __post_init__(self):
        self.omega = np.asarray(self.omega, dtype=np.int64)
        if self.strategy not in ("mls", "uds"):
            raise FormatError(f"unknown strategy {self.strategy!r}")
        if self.omega.size and (self.omega.min() < 0 or self.omega.max() >= self.n):
            raise DimensionError("mask index out of range")
        if np.unique(self.omega).size != self.omega.size or np.any(np.diff(self.omega) < 0):
            raise FormatError("mask indices must be sorted and unique")

    @property
    def size(self) -> int:
        return int(self.omega.size)

    @classmethod
    def mls(cls, m, W: LevelPartition, seed: int) -> "Mask":
        return cls("mls", int(seed), W.n, draw_mls_mask(m, W, seed), list(W.levels),
                   [int(x) for x in m])

    @classmethod
    def uds(cls, m: int, n: int, seed: int) -> "Mask":
        return cls("uds", int(seed), n, draw_uds_mask(m, n, seed), [np.arange(n)], [int(m)])

    @classmethod
    def full(cls, n: int) -> "Mask":
        return cls.uds(n, n, 0)

    def to_json(self) -> dict:
        return {
            "strategy": self.strategy,
            "seed": self.seed,
            "n": self.n,
            "levels": [(np.asarray(lv) + 1).tolist() for lv in self.levels],
            "m": [int(x) for x in self.m],
            "omega": (self.omega + 1).tolist(),
        }

    @classmethod
    def from_json(cls, d: dict) -> "Mask":
        try:
            mask = cls(strategy=d["strategy"], seed=int(d["seed"]), n=int(d["n"]),
                       omega=np.asarray(d["omega"], dtype=np.int64) - 1,
                       levels=[np.asarray(lv, dtype=np.int64) - 1 for lv in d.get("levels", [])],
                       m=[int(x) for x in d.get("m", [])])
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"malformed mask: {exc}") from exc
        if mask.strategy == "mls" and mask.levels:
            counts = [int(np.isin(mask.omega, lv).sum()) for lv in mask.levels]
            if counts != mask.m:
                raise FormatError(f"mask per-level counts {counts} differ from recorded m {mask.m}")
        return mask

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()))

    @classmethod
    def load(cls, path) -> "Mask":
        try:
            return cls.from_json(json.loads(Path(path).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise FormatError(f"cannot read mask {path}: {exc}") from exc


@dataclass
class SamplingPattern:
    """Spectral (OPD) and spatial (Hadamard pattern) masks used together."""

    xi: Mask
    p: Mask

    @property
    def omega_xi(self) -> np.ndarray:
        return self.xi.omega

    @property
    def omega_p(self) -> np.ndarray:
        return self.p.omega

    @property
    def shape(self) -> tuple[int, int]:
        return self.xi.size, self.p.size

    @classmethod
    def full(cls, n_xi: int, n_p: int) -> "SamplingPattern":
        return cls(Mask.full(n_xi), Mask.full(n_p))
