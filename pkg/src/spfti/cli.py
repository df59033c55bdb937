"""``spfti`` command line: stage-wise pipeline access and the full experiment.

Every stage subcommand reads and writes the same file names inside ``--out``
that ``run-experiment`` uses, so running ``phantom``, ``profile``, ``mask``,
``acquire``, ``reconstruct`` in turn with one config reproduces the
experiment's outputs.

Exit codes: 0 ok, 2 config, 3 I/O, 4 non-convergence, 5 dimension mismatch.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import io
from .acquisition import add_noise, forward
from .errors import ConfigError, FormatError, NumericalError, SpftiError
from .experiment import (ExperimentConfig, StageError, compute_profile, design_pattern,
                         measurement_counts, metrics_csv, partition_for, run_experiment)
from .phantom import STYLES, generate_phantom
from .sampling import (Mask, SamplingProfile, allocate_samples, fixture_profile,
                       spatial_partition, spectral_partition)
from .solver import solve, sre

log = logging.getLogger("spfti")


def _load_config(args) -> ExperimentConfig:
    if args.config is None:
        return ExperimentConfig()
    try:
        d = json.loads(Path(args.config).read_text())
    except FileNotFoundError as exc:
        raise FormatError(f"missing config {args.config}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {args.config} is not valid JSON: {exc}") from exc
    if not isinstance(d, dict):
        raise ConfigError("config must be a JSON object")
    return ExperimentConfig.from_json(d)


def _out(args) -> Path:
    return Path(args.out if args.out is not None else ".")


def _emit(args, text: str) -> None:
    if not args.quiet:
        print(text)


def _profile_from(ref: str) -> SamplingProfile:
    if ref.startswith("fixture:"):
        return fixture_profile(ref.split(":", 1)[1])
    return SamplingProfile.from_json(io.read_json(ref))


def _partition_of(prof: SamplingProfile):
    """Rebuild the level partition a stored profile was computed on."""
    sizes = prof.level_sizes
    if not sizes:
        raise ConfigError("profile does not record its level sizes")
    n = int(sum(sizes))
    if prof.domain == "spectral":
        W = spectral_partition(n, len(sizes))
    elif prof.domain == "spatial":
        side = math.isqrt(n)
        if side * side != n:
            raise ConfigError(f"spatial profile over {n} indices is not square")
        W = spatial_partition(side, side)
    else:
        raise ConfigError(f"profile domain {prof.domain!r} has no known partition")
    if W.sizes.tolist() != list(sizes):
        raise ConfigError(f"profile level sizes {sizes} do not match a {prof.domain} partition")
    return W


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_phantom(args) -> int:
    cfg = _load_config(args)
    spec = cfg.phantom
    for name in ("n_nu", "nx", "ny", "n_sources", "spatial_style"):
        val = getattr(args, name)
        if val is not None:
            setattr(spec, name, val)
    if args.seed is not None:
        spec.seed = args.seed
    spec.validate()
    path = io.write_cube(generate_phantom(spec), _out(args) / "reference")
    _emit(args, str(path))
    return 0


def cmd_profile(args) -> int:
    cfg = _load_config(args)
    out = _out(args)
    if args.fixture:
        prof = fixture_profile(args.fixture)
        path = io.write_json(prof.to_json(), out / f"profile_{prof.domain}.json")
        _emit(args, f"{path}: theta = {' '.join(repr(float(t)) for t in prof.theta)}")
        return 0
    for domain in ("spectral", "spatial"):
        prof = compute_profile(domain, cfg)
        path = io.write_json(prof.to_json(), out / f"profile_{domain}.json")
        _emit(args, f"{path}: theta = {' '.join(repr(float(t)) for t in prof.theta)}")
    return 0


def _mask_single(args) -> int:
    """One-domain mask from a profile and a target count."""
    prof = _profile_from(args.profile)
    W = _partition_of(prof)
    if args.target is None:
        raise ConfigError("--target is required with --profile")
    seed = 0 if args.seed is None else args.seed
    strategy = args.strategy or "mls"
    if strategy == "mls":
        mask = Mask.mls(allocate_samples(prof.theta, W, args.target), W, seed)
    else:
        mask = Mask.uds(args.target, W.n, seed)
    path = _out(args) / f"mask_{prof.domain}_{strategy}.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    mask.save(path)
    _emit(args, f"{path}: m = {' '.join(str(m) for m in mask.m)}")
    return 0


def cmd_mask(args) -> int:
    if args.profile:
        return _mask_single(args)
    cfg = _load_config(args)
    out = _out(args)
    profs = {}
    for domain in ("spectral", "spatial"):
        stored = out / f"profile_{domain}.json"
        profs[domain] = (SamplingProfile.from_json(io.read_json(stored)) if stored.exists()
                         else compute_profile(domain, cfg))
    W_xi, W_p = partition_for("spectral", cfg), partition_for("spatial", cfg)
    m_xi, m_p = measurement_counts(profs["spectral"].theta, W_xi, W_p.n, cfg.target_mur)
    seed = cfg.seeds["mask"] if args.seed is None else args.seed
    for strategy in args.strategy and [args.strategy] or sorted(cfg.strategies):
        pattern = design_pattern(strategy, profs["spectral"], W_xi, profs["spatial"], W_p,
                                 m_xi, m_p, seed)
        path = io.write_pattern(pattern, out / f"pattern_{strategy}.json")
        _emit(args, f"{path}: m_xi={m_xi} m_p={m_p}")
    return 0


def cmd_acquire(args) -> int:
    cfg = _load_config(args)
    out = _out(args)
    cube = io.read_cube(args.cube or out / "reference")
    sigma = cfg.sigma_nyq if args.sigma is None else args.sigma
    seed = int(cfg.seeds["noise"]) if args.seed is None else args.seed
    for strategy in args.strategy and [args.strategy] or sorted(cfg.strategies):
        pat_path = Path(args.pattern) if args.pattern else out / f"pattern_{strategy}.json"
        pattern = io.read_pattern(pat_path)
        meas = add_noise(forward(cube, pattern), sigma, seed, pattern, (cube.nx, cube.ny))
        ref = pat_path.name if pat_path.parent.resolve() == out.resolve() else str(pat_path.resolve())
        path = io.write_measurements(meas, out / f"measurements_{strategy}", mask_ref=ref)
        _emit(args, f"{path}: epsilon={meas.epsilon!r}")
        if args.pattern:
            break
    return 0


def cmd_reconstruct(args) -> int:
    cfg = _load_config(args)
    out = _out(args)
    code = 0
    for strategy in args.strategy and [args.strategy] or sorted(cfg.strategies):
        meas = io.read_measurements(args.measurements or out / f"measurements_{strategy}")
        if meas.pattern is None:
            raise FormatError("measurement header names no mask")
        if meas.nx is None:
            raise FormatError("measurement header lacks the spatial shape")
        res = solve(meas, meas.pattern, cfg.solver)
        if not np.all(np.isfinite(res.X_hat.values)):
            raise NumericalError("reconstruction produced non-finite values")
        path = io.write_cube(res.X_hat, out / f"recon_{strategy}")
        _emit(args, f"{path}: iters={res.iterations} residual={res.final_residual!r} "
                    f"converged={res.converged}")
        if not res.converged:
            log.warning("%s: stopped at max_iters without meeting the stopping rule", strategy)
            code = NumericalError.exit_code if args.strict else code
        if args.measurements:
            break
    return code


def cmd_evaluate(args) -> int:
    ref, est = io.read_cube(args.reference), io.read_cube(args.estimate)
    value = sre(ref, est)
    print("inf" if math.isinf(value) else repr(value))
    return 0


def cmd_run_experiment(args) -> int:
    cfg = _load_config(args)
    if args.seed is not None:
        cfg.seeds["mask"] = cfg.seeds["noise"] = args.seed
    out = _out(args) if args.out is not None else Path(cfg.output_dir)
    rows = run_experiment(cfg, out)
    _emit(args, metrics_csv(rows).rstrip("\n"))
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config (JSON)")
    common.add_argument("--seed", type=int, help="override the seed used by this stage")
    common.add_argument("--out", help="output directory (default: . or the config's output_dir)")
    common.add_argument("--quiet", action="store_true", help="only print errors")

    p = argparse.ArgumentParser(prog="spfti", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("phantom", parents=[common], help="write a synthetic reference volume")
    s.add_argument("--n-nu", type=int)
    s.add_argument("--nx", type=int)
    s.add_argument("--ny", type=int)
    s.add_argument("--n-sources", type=int)
    s.add_argument("--spatial-style", choices=STYLES)
    s.set_defaults(func=cmd_phantom)

    s = sub.add_parser("profile", parents=[common], help="compute or load sampling profiles")
    s.add_argument("--fixture", help="write a named fixture profile instead of computing")
    s.set_defaults(func=cmd_profile)

    s = sub.add_parser("mask", parents=[common], help="draw sampling masks")
    s.add_argument("--strategy", choices=("mls", "uds"))
    s.add_argument("--profile", help="profile JSON or fixture:<name>; draws a one-domain mask")
    s.add_argument("--target", type=int, help="sample count for --profile")
    s.set_defaults(func=cmd_mask)

    s = sub.add_parser("acquire", parents=[common], help="simulate noisy measurements")
    s.add_argument("--cube", help="reference volume (default: <out>/reference)")
    s.add_argument("--pattern", help="pattern JSON (default: <out>/pattern_<strategy>.json)")
    s.add_argument("--strategy", choices=("mls", "uds"))
    s.add_argument("--sigma", type=float, help="noise std (default: config sigma_nyq)")
    s.set_defaults(func=cmd_acquire)

    s = sub.add_parser("reconstruct", parents=[common], help="solve for the volume")
    s.add_argument("--measurements", help="measurement header (default: <out>/measurements_<strategy>)")
    s.add_argument("--strategy", choices=("mls", "uds"))
    s.add_argument("--strict", action="store_true", help="exit 4 when the solver does not converge")
    s.set_defaults(func=cmd_reconstruct)

    s = sub.add_parser("evaluate", parents=[common], help="print SRE in dB")
    s.add_argument("reference")
    s.add_argument("estimate")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("run-experiment", parents=[common], help="full MLS vs UDS comparison")
    s.set_defaults(func=cmd_run_experiment)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except StageError as exc:
        log.error("stage %s failed: %s", exc.stage, exc.cause)
        return exc.exit_code
    except SpftiError as exc:
        log.error("%s", exc)
        return exc.exit_code
    except OSError as exc:
        log.error("%s", exc)
        return FormatError.exit_code


if __name__ == "__main__":
    sys.exit(main())
