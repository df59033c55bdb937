"""End-to-end MLS versus UDS comparison on a synthetic phantom.

Stages: phantom -> profiles -> masks (per strategy) -> forward -> noise ->
solve -> SRE. Every random draw is driven by an explicit seed from the config,
so two runs of the same config write identical numbers (wall times aside).
"""

from __future__ import annotations

import csv
import io as _io
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .acquisition import HyperCube, add_noise, err, forward, mur
from .errors import ConfigError, SpftiError
from .phantom import PhantomSpec, corpus_specs, generate_corpus, generate_phantom
from .sampling import (LevelPartition, Mask, SamplingPattern, SamplingProfile, allocate_samples,
                       estimate_sparsity_in_levels, fixture_profile, multilevel_coherence,
                       sampling_profile, spatial_partition, spectral_partition)
from .solver import SolverConfig, solve, sre
from .transforms import dft_matrix, haar_2d_matrix, walsh_2d_matrix

log = logging.getLogger(__name__)

METRICS_HEADER = ["strategy", "m_xi", "m_p", "mur", "err", "epsilon", "iters", "residual", "sre_db", "wall_ms"]
STRATEGIES = ("mls", "uds")


class StageError(SpftiError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 1)


@dataclass
class ExperimentConfig:
    phantom: PhantomSpec = field(default_factory=PhantomSpec)
    sigma_nyq: float = 1e-3
    target_mur: float = 0.11
    strategies: list[str] = field(default_factory=lambda: ["mls", "uds"])
    # "computed" or "fixture:<name>" per domain
    profiles: dict = field(default_factory=lambda: {"spectral": "computed", "spatial": "computed"})
    spectral_levels: int = 32
    corpus: dict = field(default_factory=lambda: {"n_items": 10, "seed": 1000, "rel_threshold": 0.03})
    solver: SolverConfig = field(default_factory=SolverConfig)
    # "phantom", when given, overrides phantom.seed
    seeds: dict = field(default_factory=lambda: {"mask": 1, "noise": 2})
    output_dir: str = "results"

    def __post_init__(self):
        if not 0 < self.target_mur <= 1:
            raise ConfigError(f"target_mur must lie in (0, 1], got {self.target_mur}")
        if self.sigma_nyq < 0:
            raise ConfigError("sigma_nyq must be >= 0")
        bad = [s for s in self.strategies if s not in STRATEGIES]
        if bad or not self.strategies:
            raise ConfigError(f"strategies must be a non-empty subset of {STRATEGIES}, got {self.strategies}")
        for dom in ("spectral", "spatial"):
            src = self.profiles.get(dom, "computed")
            if src != "computed" and not str(src).startswith("fixture:"):
                raise ConfigError(f"profile source for {dom} must be 'computed' or 'fixture:<name>'")
        self.seeds = {"mask": 1, "noise": 2, **self.seeds}
        if "phantom" in self.seeds:
            self.phantom.seed = int(self.seeds["phantom"])
        self.seeds["phantom"] = self.phantom.seed

    @classmethod
    def from_json(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown experiment options {sorted(unknown)}")
        if "phantom" in d:
            d["phantom"] = PhantomSpec.from_json(d["phantom"])
        if "solver" in d:
            d["solver"] = SolverConfig.from_json(d["solver"])
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def to_json(self) -> dict:
        return {
            "phantom": self.phantom.to_json(),
            "sigma_nyq": self.sigma_nyq,
            "target_mur": self.target_mur,
            "strategies": list(self.strategies),
            "profiles": dict(self.profiles),
            "spectral_levels": self.spectral_levels,
            "corpus": dict(self.corpus),
            "solver": self.solver.to_json(),
            "seeds": dict(self.seeds),
            "output_dir": self.output_dir,
        }


# ---------------------------------------------------------------------------
# Profiles and pattern design
# ---------------------------------------------------------------------------

def partition_for(domain: str, cfg: ExperimentConfig) -> LevelPartition:
    ph = cfg.phantom
    if domain == "spectral":
        return spectral_partition(ph.n_nu, cfg.spectral_levels)
    return spatial_partition(ph.nx, ph.ny)


def compute_profile(domain: str, cfg: ExperimentConfig) -> SamplingProfile:
    """Sampling profile for one domain, from a fixture or from coherence and a corpus."""
    W = partition_for(domain, cfg)
    source = cfg.profiles.get(domain, "computed")
    if source.startswith("fixture:"):
        prof = fixture_profile(source.split(":", 1)[1])
        if prof.domain != domain or list(prof.level_sizes) != W.sizes.tolist():
            raise ConfigError(f"fixture {source} does not match the {domain} partition {W.sizes.tolist()}")
        return prof
    ph = cfg.phantom
    if domain == "spectral":
        F = dft_matrix(ph.n_nu)
        mu = multilevel_coherence(F, F.conj().T, W, W)
    else:
        mu = multilevel_coherence(walsh_2d_matrix(ph.nx, ph.ny), haar_2d_matrix(ph.nx, ph.ny).T, W, W)
    corpus = generate_corpus(corpus_specs(ph, int(cfg.corpus.get("n_items", 10)),
                                          int(cfg.corpus.get("seed", 1000))), domain)
    k = estimate_sparsity_in_levels(corpus, W, float(cfg.corpus.get("rel_threshold", 0.01)))
    return SamplingProfile(theta=sampling_profile(mu, k), mu=mu, k=k.k, source="computed",
                           domain=domain, level_sizes=W.sizes.tolist())


def allocate_with_overflow(theta, W: LevelPartition, m_total: int) -> np.ndarray:
    """Allocate by profile; samples beyond the profile's support fill the remaining levels."""
    theta = np.asarray(theta, dtype=float)
    cap = int(W.sizes[theta > 0].sum())
    m = allocate_samples(theta, W, min(m_total, cap))
    if m_total > cap:
        rest = (theta == 0).astype(float)
        m = m + allocate_samples(rest, W, m_total - cap)
    return m


def measurement_counts(theta_xi, W_xi: LevelPartition, n_p: int, target_mur: float) -> tuple[int, int]:
    """Spectral count covers the profile's support; the spatial count meets the MUR."""
    n_xi = W_xi.n
    cap = int(W_xi.sizes[np.asarray(theta_xi) > 0].sum())
    m_xi = max(cap, math.ceil(target_mur * n_xi - 1e-9), 1)
    m_xi = min(m_xi, n_xi)
    m_p = int(np.clip(round(target_mur * n_xi * n_p / m_xi), 1, n_p))
    return m_xi, m_p


def mask_seeds(seed: int) -> tuple[int, int]:
    return 2 * int(seed), 2 * int(seed) + 1


def design_pattern(strategy: str, prof_xi: SamplingProfile, W_xi: LevelPartition,
                   prof_p: SamplingProfile, W_p: LevelPartition, m_xi: int, m_p: int,
                   seed: int) -> SamplingPattern:
    s_xi, s_p = mask_seeds(seed)
    if strategy == "uds":
        return SamplingPattern(Mask.uds(m_xi, W_xi.n, s_xi), Mask.uds(m_p, W_p.n, s_p))
    if strategy == "mls":
        return SamplingPattern(Mask.mls(allocate_with_overflow(prof_xi.theta, W_xi, m_xi), W_xi, s_xi),
                               Mask.mls(allocate_with_overflow(prof_p.theta, W_p, m_p), W_p, s_p))
    raise ConfigError(f"unknown strategy {strategy!r}")


# ---------------------------------------------------------------------------
# Runner
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def metrics_csv(rows: list[dict]) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRICS_HEADER)
    for r in rows:
        w.writerow([r["strategy"]] + [_fmt(r[k]) if k != "wall_ms" else f"{r[k]:.3f}"
                                      for k in METRICS_HEADER[1:]])
    return buf.getvalue()


def spectrum_csv(reference: HyperCube, recons: dict[str, HyperCube]) -> str:
    """Spectra at the center pixel for the reference and every recovered volume."""
    pix = (reference.nx // 2) * reference.ny + reference.ny // 2
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    names = sorted(recons)
    w.writerow(["bin", "reference"] + names)
    for b in range(reference.n_nu):
        w.writerow([b, _fmt(reference.values[b, pix])] + [_fmt(recons[n].values[b, pix]) for n in names])
    return buf.getvalue()


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except Exception as exc:  # noqa: BLE001 - re-raised with the stage name
        raise StageError(name, exc) from exc


def run_experiment(cfg: ExperimentConfig, out_dir=None, write: bool = True) -> list[dict]:
    """Run every strategy in ``cfg`` and return one metrics row per strategy.

    Rows are ordered by strategy name. With ``write`` the reference, profiles,
    patterns, recovered volumes, ``metrics.csv`` and ``spectrum_center.csv``
    go to ``out_dir`` (default ``cfg.output_dir``); a failing stage leaves a
    ``FAILED`` marker naming it.
    """
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    if write:
        out.mkdir(parents=True, exist_ok=True)
        (out / "FAILED").unlink(missing_ok=True)
    try:
        return _run(cfg, out, write)
    except StageError as exc:
        if write:
            (out / "FAILED").write_text(f"{exc.stage}\n{exc.cause}\n")
        raise


def _run(cfg: ExperimentConfig, out: Path, write: bool) -> list[dict]:
    ph = cfg.phantom
    X = _stage("phantom", generate_phantom, ph)
    W_xi = _stage("profile", partition_for, "spectral", cfg)
    W_p = _stage("profile", partition_for, "spatial", cfg)
    prof_xi = _stage("profile", compute_profile, "spectral", cfg)
    prof_p = _stage("profile", compute_profile, "spatial", cfg)
    m_xi, m_p = _stage("mask", measurement_counts, prof_xi.theta, W_xi, W_p.n, cfg.target_mur)
    if write:
        io.write_json(cfg.to_json(), out / "config.json")
        io.write_cube(X, out / "reference")
        io.write_json(prof_xi.to_json(), out / "profile_spectral.json")
        io.write_json(prof_p.to_json(), out / "profile_spatial.json")

    rows, recons, summaries = [], {}, {}
    for strategy in sorted(cfg.strategies):
        pattern = _stage("mask", design_pattern, strategy, prof_xi, W_xi, prof_p, W_p, m_xi, m_p,
                         cfg.seeds["mask"])
        Y = _stage("acquire", forward, X, pattern)
        meas = _stage("acquire", add_noise, Y, cfg.sigma_nyq, int(cfg.seeds["noise"]), pattern, (ph.nx, ph.ny))
        res = _stage("reconstruct", solve, meas, pattern, cfg.solver)
        quality = _stage("evaluate", sre, X, res.X_hat)
        log.info("%s: m=(%d,%d) iters=%d sre=%.2f dB", strategy, m_xi, m_p, res.iterations, quality)
        rows.append({
            "strategy": strategy, "m_xi": m_xi, "m_p": m_p,
            "mur": mur(m_xi, m_p, ph.n_nu, W_p.n), "err": err(m_xi, m_p, ph.n_nu),
            "epsilon": meas.epsilon, "iters": res.iterations, "residual": res.final_residual,
            "sre_db": quality, "wall_ms": res.wall_ms, "converged": res.converged,
        })
        recons[strategy] = res.X_hat
        summaries[strategy] = res.summary(X)
        if write:
            pat_path = io.write_pattern(pattern, out / f"pattern_{strategy}.json")
            io.write_measurements(meas, out / f"measurements_{strategy}", mask_ref=pat_path.name)
            io.write_cube(res.X_hat, out / f"recon_{strategy}")

    if write:
        (out / "metrics.csv").write_text(metrics_csv(rows))
        (out / "spectrum_center.csv").write_text(spectrum_csv(X, recons))
        io.write_json(summaries, out / "summary.json")
    return rows
