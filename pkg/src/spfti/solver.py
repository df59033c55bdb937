"""Analysis-l1 recovery under a Frobenius data-fidelity ball.

Solves::

    min_U ||S U||_1   s.t.   ||Y - A U||_F <= eps

where ``S`` is the Fourier (spectral) x Haar (spatial) analysis operator and
``A`` the subsampled Fourier-Hadamard sensing operator, with a primal-dual
hybrid gradient (Chambolle-Pock) iteration. Two splittings are available:

* ``projected`` (default): the l1 term goes to the dual through ``S``; the
  fidelity set is the primal term, whose prox is an exact projection because
  ``A`` is a partial isometry. ``||S|| = 1`` so ``tau = sigma = 1``.
* ``stacked``: ``K = [S; A]`` with the ball handled by its conjugate in the
  dual. ``||K|| <= sqrt(2)`` so ``tau = sigma = 1/sqrt(2)``.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .acquisition import HyperCube, MeasurementSet, adjoint, forward
from .errors import ConfigError, DimensionError
from .sampling import SamplingPattern
from .transforms import dft_forward, dft_inverse, haar_2d_forward, haar_2d_inverse


def fro_norm(x) -> float:
    """Frobenius norm with a fixed reduction order.

    BLAS norms may round differently depending on memory alignment, which
    would make identical inputs loaded from disk or built in memory diverge.
    """
    x = np.asarray(x)
    sq = x.real * x.real + x.imag * x.imag if np.iscomplexobj(x) else x * x
    return math.sqrt(float(sq.sum()))


def analysis(U, spatial_shape, backend=None) -> np.ndarray:
    """Sparsity coefficients: DFT down the spectral axis, 2-D Haar per row."""
    U = np.asarray(U)
    nx, ny = spatial_shape
    if U.ndim != 2 or U.shape[1] != nx * ny:
        raise DimensionError(f"array of shape {U.shape} does not match {nx}x{ny} pixels")
    spec = dft_forward(U, axis=0)
    return haar_2d_forward(spec.reshape(-1, nx, ny), backend=backend).reshape(spec.shape)


def synthesis(C, spatial_shape, backend=None) -> np.ndarray:
    """Adjoint (and inverse) of :func:`analysis`."""
    C = np.asarray(C)
    nx, ny = spatial_shape
    if C.ndim != 2 or C.shape[1] != nx * ny:
        raise DimensionError(f"array of shape {C.shape} does not match {nx}x{ny} pixels")
    spat = haar_2d_inverse(C.reshape(-1, nx, ny), backend=backend).reshape(C.shape)
    return dft_inverse(spat, axis=0)


def soft_threshold(v, lam: float) -> np.ndarray:
    """Complex soft thresholding: shrink magnitudes by ``lam``, keep phase."""
    v = np.asarray(v)
    mag = np.abs(v)
    scale = np.maximum(mag - lam, 0.0) / np.where(mag > 0, mag, 1.0)
    return v * scale


def project_ball(x, center, radius: float) -> np.ndarray:
    """Euclidean projection onto ``{u : ||u - center||_F <= radius}``."""
    d = x - center
    nrm = fro_norm(d)
    if nrm <= radius:
        return np.array(x, copy=True)
    return center + d * (radius / nrm)


def dual_prox_l1(v, sigma: float) -> np.ndarray:
    """Prox of ``sigma * f^*`` for ``f = ||.||_1`` via the Moreau identity."""
    return v - sigma * soft_threshold(v / sigma, 1.0 / sigma)


def dual_prox_ball(v, sigma: float, center, radius: float) -> np.ndarray:
    """Prox of ``sigma * g^*`` for ``g`` the indicator of the ``radius``-ball at ``center``."""
    return v - sigma * project_ball(v / sigma, center, radius)


def sre(X_ref, X_hat) -> float:
    """Signal-to-reconstruction error in dB; ``inf`` for an exact match."""
    ref = X_ref.values if isinstance(X_ref, HyperCube) else np.asarray(X_ref)
    hat = X_hat.values if isinstance(X_hat, HyperCube) else np.asarray(X_hat)
    if ref.shape != hat.shape:
        raise DimensionError(f"shape mismatch {ref.shape} vs {hat.shape}")
    e2 = float(np.sum(np.abs(ref - hat) ** 2))
    if e2 == 0.0:
        return math.inf
    s2 = float(np.sum(np.abs(ref) ** 2))
    return 10.0 * math.log10(s2 / e2) if s2 > 0 else -math.inf


def stacked_operator(pattern: SamplingPattern, spatial_shape, backend=None):
    """``(op, op_adj)`` for ``U -> (S U, A U)``; the image is a tuple of arrays."""

    def op(U):
        return analysis(U, spatial_shape, backend), forward(U, pattern, spatial_shape, backend)

    def op_adj(pair):
        c, y = pair
        return synthesis(c, spatial_shape, backend) + adjoint(y, pattern, spatial_shape, backend)

    return op, op_adj


def operator_norm_estimate(op, op_adj, shape, iters: int = 50, seed: int = 0) -> float:
    """Power iteration on ``op_adj(op(.))``; returns an estimate of ``||op||``.

    ``op`` may return an array or a tuple of arrays (stacked operators).
    """
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    x /= fro_norm(x)
    est = 0.0
    for _ in range(iters):
        y = x
        x = op_adj(op(x))
        nrm = fro_norm(x)
        if nrm == 0.0:
            return 0.0
        est = math.sqrt(abs(np.vdot(y, x)))
        x = x / nrm
    return est


class FidelityProjector:
    """Euclidean projection onto ``{U : ||Y - A U||_F <= eps}``.

    For complex ``U`` the sensing operator is a partial isometry (``A A^* = I``)
    and the projection is ``U + A^*(proj_ball(A U) - A U)``.

    For real ``U`` the real-linear map ``A_R`` satisfies ``A_R A_R^* = D``,
    where ``D`` acts as the identity on rows whose conjugate-partner frequency
    ``-f`` is also sampled (after symmetrizing the pair) and as ``1/2`` on
    unpaired rows. Data outside the range of ``A_R`` cannot be fitted and is
    split off first; the rest is a scalar root find for the KKT multiplier.
    """

    def __init__(self, pattern: SamplingPattern, spatial_shape, Y, eps: float,
                 real: bool = True, backend=None):
        self.pattern = pattern
        self.spatial_shape = spatial_shape
        self.backend = backend
        self.real = real
        self.Y = Y
        self.eps = eps
        if not real:
            self.b = Y
            self.eps_range = eps
            self.infeasible_floor = 0.0
            return
        n = pattern.xi.n
        omega = pattern.omega_xi
        pos = np.full(n, -1)
        pos[omega] = np.arange(omega.size)
        self.partner = pos[(-omega) % n]
        self.paired = self.partner >= 0
        b = np.array(Y, dtype=np.complex128)
        b[self.paired] = 0.5 * (Y[self.paired] + self._mirror(Y)[self.paired])
        self.b = b
        perp = float(fro_norm(Y - b))
        self.infeasible_floor = perp
        self.eps_range = math.sqrt(max(eps * eps - perp * perp, 0.0))

    def _mirror(self, V):
        out = np.zeros_like(V)
        ok = self.paired
        out[ok] = np.conj(V[self.partner[ok]])
        return out

    def _A(self, U):
        return forward(U, self.pattern, self.spatial_shape, self.backend)

    def _At(self, V):
        out = adjoint(V, self.pattern, self.spatial_shape, self.backend)
        return out.real if self.real else out

    def __call__(self, U):
        """Return ``(P(U), A P(U))``."""
        AU = self._A(U)
        r = AU - self.b
        nr = float(fro_norm(r))
        if nr <= self.eps_range:
            return U, AU
        if not self.real:
            s = r * (1.0 - self.eps_range / nr)
            return U - self._At(s), AU - s
        r1 = np.where(self.paired[:, None], r, 0)
        r2 = r - r1
        a1 = float(fro_norm(r1)) ** 2
        a2 = float(fro_norm(r2)) ** 2
        e2 = self.eps_range ** 2
        if e2 == 0.0:
            s1, s2 = r1, 2.0 * r2
        else:
            lam = self._multiplier(a1, a2, e2)
            s1, s2 = r1 * (lam / (1.0 + lam)), r2 * (lam / (1.0 + 0.5 * lam))
        # A_R A_R^* is 1 on paired rows and 1/2 on unpaired ones
        return U - self._At(s1 + s2), AU - s1 - 0.5 * s2

    @staticmethod
    def _multiplier(a1: float, a2: float, e2: float) -> float:
        # phi(lam) = a1/(1+lam)^2 + a2/(1+lam/2)^2 decreases from a1+a2 > e2 to 0
        def phi(lam):
            return a1 / (1.0 + lam) ** 2 + a2 / (1.0 + 0.5 * lam) ** 2

        lo, hi = 0.0, 1.0
        while phi(hi) > e2:
            hi *= 2.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if phi(mid) > e2:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-15 * hi:
                break
        return hi


@dataclass
class SolverConfig:
    max_iters: int = 500
    rel_change_tol: float = 1e-6
    feasibility_slack: float = 1.01
    # None picks 1/L for the splitting in use: 1 (projected) or 1/sqrt(2) (stacked)
    tau: float | None = None
    sigma: float | None = None
    # "projected": fidelity ball enforced by exact projection in the primal step;
    # "stacked": ball handled through its conjugate in the dual, K = [S; A]
    splitting: str = "projected"
    # primal iterate restricted to real volumes; False keeps it complex
    real_primal: bool = True
    # absolute residual floor (relative to ||Y||) so eps = 0 can be met
    feasibility_atol: float = 1e-9
    # consecutive small-change iterations required before stopping
    patience: int = 10
    check_step: bool = True
    norm_iters: int = 20
    backend: str | None = None

    def __post_init__(self):
        if self.splitting not in ("projected", "stacked"):
            raise ConfigError(f"unknown splitting {self.splitting!r}")
        default = 1.0 if self.splitting == "projected" else 1.0 / math.sqrt(2.0)
        if self.tau is None:
            self.tau = default
        if self.sigma is None:
            self.sigma = default
        if self.max_iters < 1 or self.patience < 1 or self.tau <= 0 or self.sigma <= 0 or self.feasibility_slack < 1:
            raise ConfigError(f"invalid solver config {self}")

    @classmethod
    def from_json(cls, d: dict | None) -> "SolverConfig":
        d = dict(d or {})
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown solver options {sorted(unknown)}")
        return cls(**d)

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class SolverResult:
    X_hat: HyperCube
    iterations: int
    final_objective: float
    final_residual: float
    converged: bool
    epsilon: float
    imag_residual: float = 0.0
    first_feasible_objective: float | None = None
    wall_ms: float = 0.0
    history: list[tuple[float, float]] = field(default_factory=list, repr=False)

    def summary(self, reference=None) -> dict:
        out = {
            "iterations": self.iterations,
            "final_objective": self.final_objective,
            "final_residual": self.final_residual,
            "epsilon": self.epsilon,
            "converged": self.converged,
            "imag_residual": self.imag_residual,
            "wall_ms": self.wall_ms,
        }
        if reference is not None:
            out["sre"] = sre(reference, self.X_hat)
        return out


def solve(meas: MeasurementSet, pattern: SamplingPattern | None = None,
          cfg: SolverConfig | None = None, spatial_shape=None,
          epsilon: float | None = None) -> SolverResult:
    """Recover a volume from SP-FTI measurements.

    Returns the lowest-objective iterate among those meeting the fidelity
    constraint (up to the slack), or the last iterate when none did. A run that
    stops at ``max_iters`` reports ``converged=False``; nothing is raised.
    """
    cfg = cfg or SolverConfig()
    pattern = pattern or meas.pattern
    if pattern is None:
        raise ConfigError("a sampling pattern is required")
    if spatial_shape is None:
        if meas.nx is None:
            raise ConfigError("spatial shape unknown")
        spatial_shape = (meas.nx, meas.ny)
    nx, ny = spatial_shape
    eps = meas.epsilon if epsilon is None else float(epsilon)
    if eps < 0:
        raise ConfigError(f"epsilon must be >= 0, got {eps}")
    Y = np.ascontiguousarray(meas.Y, dtype=np.complex128)
    if Y.shape != pattern.shape:
        raise DimensionError(f"Y of shape {Y.shape} vs pattern {pattern.shape}")
    shape = (pattern.xi.n, pattern.p.n)
    if shape[1] != nx * ny:
        raise DimensionError(f"pattern spatial size {shape[1]} vs {nx}x{ny}")
    be = cfg.backend
    projected = cfg.splitting == "projected"
    t0 = time.perf_counter()

    if cfg.check_step:
        if projected:
            L = operator_norm_estimate(lambda U: analysis(U, spatial_shape, be),
                                       lambda C: synthesis(C, spatial_shape, be),
                                       shape, iters=cfg.norm_iters)
        else:
            L = operator_norm_estimate(*stacked_operator(pattern, spatial_shape, be),
                                       shape, iters=cfg.norm_iters)
        if cfg.tau * cfg.sigma * L * L > 1.0 + 1e-6:
            raise ConfigError(f"step sizes violate tau*sigma*L^2 <= 1 (L ~ {L:.4f})")

    tau, sig = cfg.tau, cfg.sigma
    y_norm = float(fro_norm(Y))
    feas_bound = cfg.feasibility_slack * eps + cfg.feasibility_atol * y_norm
    # the l1 dual is scale free, so run on data of unit RMS and rescale after
    scale = y_norm / math.sqrt(Y.size) if y_norm > 0 else 1.0
    Y = Y / scale
    eps_s = eps / scale
    dtype = np.float64 if cfg.real_primal else np.complex128

    def primal_step(x):
        return x.real if cfg.real_primal else x

    if projected:
        project = FidelityProjector(pattern, spatial_shape, Y, eps_s, cfg.real_primal, be)
        U, AU = project(np.zeros(shape, dtype=dtype))
    else:
        U, AU = np.zeros(shape, dtype=dtype), np.zeros_like(Y)
    SU = analysis(U, spatial_shape, be)
    SU_bar, AU_bar = SU.copy(), AU.copy()
    z = np.zeros_like(SU)
    w = np.zeros_like(Y)

    best = None
    quiet_iters = 0
    first_obj = None
    history = []
    converged = False
    imag_res = 0.0
    it = 0
    for it in range(1, cfg.max_iters + 1):
        z = dual_prox_l1(z + sig * SU_bar, sig)
        if projected:
            step = synthesis(z, spatial_shape, be)
            if cfg.real_primal:
                imag_res = scale * float(fro_norm(step.imag))
            U_new, AU_new = project(U - tau * primal_step(step))
        else:
            w = dual_prox_ball(w + sig * AU_bar, sig, Y, eps_s)
            step = synthesis(z, spatial_shape, be) + adjoint(w, pattern, spatial_shape, be)
            if cfg.real_primal:
                imag_res = scale * float(fro_norm(step.imag))
            U_new = U - tau * primal_step(step)
            AU_new = forward(U_new, pattern, spatial_shape, be)
            AU_bar = 2.0 * AU_new - AU
        SU_new = analysis(U_new, spatial_shape, be)
        SU_bar = 2.0 * SU_new - SU

        du = float(fro_norm(U_new - U))
        un = float(fro_norm(U_new))
        change = du / un if un > 0 else du
        residual = scale * float(fro_norm(Y - AU_new))
        objective = scale * float(np.abs(SU_new).sum())
        history.append((objective, residual))
        U, SU, AU = U_new, SU_new, AU_new

        feasible = residual <= feas_bound
        if feasible:
            if first_obj is None:
                first_obj = objective
            if best is None or objective <= best[1]:
                best = (U.copy(), objective, residual)
        quiet_iters = quiet_iters + 1 if change < cfg.rel_change_tol else 0
        if feasible and quiet_iters >= cfg.patience:
            converged = True
            break

    if best is None:
        out, objective, residual = U, history[-1][0], history[-1][1]
    else:
        out, objective, residual = best
    out = out * scale
    if not cfg.real_primal:
        # report the real volume, the part the model can represent
        imag_res = float(fro_norm(out.imag))
        out = out.real
        objective = float(np.abs(analysis(out, spatial_shape, be)).sum())
        residual = float(fro_norm(meas.Y - forward(out, pattern, spatial_shape, be)))
    X_hat = HyperCube(np.ascontiguousarray(out), nx, ny)
    return SolverResult(X_hat=X_hat, iterations=it, final_objective=objective,
                        final_residual=residual, converged=converged, epsilon=eps,
                        imag_residual=imag_res, first_feasible_objective=first_obj,
                        wall_ms=1000.0 * (time.perf_counter() - t0), history=history)
