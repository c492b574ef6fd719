"""Empirical verification: local error orders, contraction, proven inequalities."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ._validation import as_positive_grid, as_vector, check_int
from .analytic import DiagonalGaussian, curvatures_of
from .errors import InvalidArgumentError
from .noise import NoiseStream, replica_blocks, tree_sum
from .potentials import PotentialModel
from .sampler import (
    ChainConfig,
    _map_blocks,
    check_step,
    ou_noise_coefficients,
    reference_solution,
    run_chains,
    run_coupled_pair,
)

START_STREAM = 10
INCREMENT_STREAM = 11
AUX_STREAM = 12

UNDERFLOW = 1e-12


@dataclass
class OrderFit:
    """Least-squares line through ``(log x, log y)``."""

    slope: float
    intercept: float
    r2: float
    points: List[Tuple[float, float]] = field(default_factory=list)
    details: list = field(default_factory=list, repr=False)

    def within(self, lo: float, hi: float) -> bool:
        return lo <= self.slope <= hi


@dataclass
class SweepRecord:
    axis_value: float
    error_mean: float
    error_std: float
    n_samples: int
    window_lo: int
    window_hi: int

    def __post_init__(self):
        if self.error_std < 0 or self.n_samples < 1:
            raise InvalidArgumentError("need error_std >= 0 and n_samples >= 1")

    @property
    def window(self) -> str:
        return f"steps {self.window_lo}..{self.window_hi}"


def fit_linear(xs, ys) -> OrderFit:
    """Ordinary least squares of ``ys`` on ``xs`` (no log transform)."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.size < 2 or x.size != y.size:
        raise InvalidArgumentError("need at least two (x, y) points of equal count")
    xm, ym = x.mean(), y.mean()
    sxx = np.sum((x - xm) ** 2)
    if sxx == 0:
        raise InvalidArgumentError("x values must not all coincide")
    slope = np.sum((x - xm) * (y - ym)) / sxx
    intercept = ym - slope * xm
    ss_tot = np.sum((y - ym) ** 2)
    ss_res = np.sum((y - intercept - slope * x) ** 2)
    r2 = 1.0 if ss_tot == 0 else max(0.0, 1.0 - ss_res / ss_tot)
    return OrderFit(float(slope), float(intercept), float(r2), list(zip(x.tolist(), y.tolist())))


def fit_loglog(xs, ys) -> OrderFit:
    """Fit ``log y = slope * log x + intercept``."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if np.any(x <= 0) or np.any(y <= 0):
        raise InvalidArgumentError("log-log fit needs strictly positive values")
    return fit_linear(np.log(x), np.log(y))


# ---------------------------------------------------------------- local errors


def _start_block(p: PotentialModel, x_dist, b: int, n: int, seed: int) -> np.ndarray:
    if isinstance(x_dist, str):
        if x_dist != "stationary":
            raise InvalidArgumentError(f"unknown start tag {x_dist!r}")
        x_dist = DiagonalGaussian(np.zeros(p.d), 1.0 / curvatures_of(p))
    if isinstance(x_dist, DiagonalGaussian):
        z = NoiseStream(seed, START_STREAM).block(b, 0, n, p.d)
        return x_dist.means + np.sqrt(x_dist.variances) * z
    if callable(x_dist):
        rng = NoiseStream(seed, START_STREAM).generator(b, 0)
        return np.asarray(x_dist(rng, n), dtype=float).reshape(n, p.d)
    x = np.asarray(x_dist, dtype=float)
    if x.ndim == 0:
        x = np.full(p.d, float(x))
    return np.broadcast_to(as_vector(x, "x", p.d), (n, p.d)).copy()


@dataclass
class LocalError:
    """One-step gap between LMC and the reference solution at step ``h``."""

    h: float
    strong: float
    weak: float
    weak_sem: float
    pairs: int


def local_errors(
    p: PotentialModel,
    x_dist,
    h: float,
    M: int,
    substeps: Optional[int] = None,
    seed: int = 0,
    noiseless: bool = False,
    workers: int = 1,
) -> LocalError:
    """Estimate ``sqrt(E|x1 - x_h|^2)`` and ``|E(x1 - x_h)|`` over ``M`` coupled pairs.

    The LMC step and the reference solution share one Brownian path (common
    random numbers). The standard normals do not depend on ``h``, so estimates
    across a step grid are coupled as well.
    """
    check_step(p, h, certified=True)
    M = check_int(M, "M", minimum=1)
    if substeps is None:
        substeps = 1 if p.is_quadratic else 8
    substeps = check_int(substeps, "substeps", minimum=1)
    exact = p.is_quadratic
    inc_noise = NoiseStream(seed, INCREMENT_STREAM)
    aux_noise = NoiseStream(seed, AUX_STREAM)
    d = p.d

    def work(b, start, stop):
        n = stop - start
        x = _start_block(p, x_dist, b, n, seed)
        if noiseless:
            dB = np.zeros((n, substeps, d))
            aux = None
        else:
            dB = inc_noise.block(b, 0, n, (substeps, d)) * np.sqrt(h / substeps)
            aux = aux_noise.block(b, 0, n, (substeps, d)) if exact else None
        coarse = x - h * p.gradient(x) + np.sqrt(2.0) * dB.sum(axis=1)
        fine = reference_solution(p, x, h, dB, aux, exact=exact)
        e = coarse - fine
        sq = np.einsum("ij,ij->i", e, e)
        return np.array([sq.sum()]), e.sum(axis=0), (e * e).sum(axis=0)

    parts = _map_blocks(work, replica_blocks(M), workers)
    msq = tree_sum([pt[0] for pt in parts])[0] / M
    mean = tree_sum([pt[1] for pt in parts]) / M
    second = tree_sum([pt[2] for pt in parts]) / M
    var = np.maximum(second - mean ** 2, 0.0) * (M / (M - 1) if M > 1 else 1.0)
    weak = float(np.linalg.norm(mean))
    # delta-method standard error of |mean|
    weak_sem = float(np.sqrt(np.sum(mean ** 2 * var / M)) / weak) if weak > 0 else float(
        np.sqrt(var.sum() / M)
    )
    return LocalError(float(h), float(np.sqrt(msq)), weak, weak_sem, M)


def _order_fit(kind, p, x_dist, h_grid, M, substeps, seed, noiseless, workers):
    grid = as_positive_grid(h_grid, "h_grid", min_len=2)
    errs = [local_errors(p, x_dist, float(h), M, substeps, seed, noiseless, workers) for h in grid]
    ys = [getattr(e, kind) for e in errs]
    fit = fit_loglog(grid, ys)
    fit.details = errs
    return fit


def local_strong_order(p, x_dist, h_grid, M, substeps=None, seed=0, noiseless=False, workers=1) -> OrderFit:
    """Slope of the local strong error against ``h`` (3/2 expected for LMC)."""
    return _order_fit("strong", p, x_dist, h_grid, M, substeps, seed, noiseless, workers)


def local_weak_order(p, x_dist, h_grid, M, substeps=None, seed=0, noiseless=False, workers=1) -> OrderFit:
    """Slope of the local weak error against ``h`` (2 expected for LMC)."""
    return _order_fit("weak", p, x_dist, h_grid, M, substeps, seed, noiseless, workers)


def quadratic_local_errors(q, x_dist, h: float) -> Tuple[float, float]:
    """Exact (strong, weak) local errors of LMC on a diagonal quadratic.

    Against the exact solution driven by the same Brownian motion the gap is
    ``(1 - lam h - e^{-lam h}) x + sqrt(2) (B_h - int e^{-lam(h-s)} dB_s)``.
    """
    lam = curvatures_of(q)
    if isinstance(x_dist, str):
        x_dist = DiagonalGaussian(np.zeros_like(lam), 1.0 / lam)
    if not isinstance(x_dist, DiagonalGaussian):
        x_dist = DiagonalGaussian.point(np.broadcast_to(np.asarray(x_dist, dtype=float), lam.shape))
    drift = 1.0 - lam * h - np.exp(-lam * h)
    a, b = ou_noise_coefficients(lam, h)
    # B_h - I = (1 - a) B_h - b zeta
    noise_var = (1.0 - a) ** 2 * h + b * b
    second = x_dist.means ** 2 + x_dist.variances
    strong = np.sqrt(np.sum(drift ** 2 * second + 2.0 * noise_var))
    weak = np.linalg.norm(drift * x_dist.means)
    return float(strong), float(weak)


# ---------------------------------------------------------------- contraction


@dataclass
class ContractionEstimate:
    """Exponential decay rate of the RMS distance between coupled solutions."""

    rate: Optional[float]
    fit: Optional[OrderFit]
    result: object
    degenerate: bool = False
    window: Tuple[int, int] = (0, 0)


def contraction_rate(
    p: PotentialModel,
    cfg: ChainConfig,
    x0,
    y0,
    integrator: str = "lmc",
    skip: float = 0.0,
) -> ContractionEstimate:
    """Fit ``log RMS|x_k - y_k|`` against ``t = k h`` and return minus the slope.

    The first ``skip`` fraction of steps is left out of the fit (transients of
    fast coordinates), as is any step whose distance fell below 1e-12.
    """
    res = run_coupled_pair(p, cfg, x0, y0, integrator=integrator)
    rms = res.rms
    if not np.any(rms > UNDERFLOW):
        return ContractionEstimate(None, None, res, degenerate=True)
    ks = np.arange(rms.size)
    keep = (ks >= int(np.floor(skip * (rms.size - 1)))) & (rms > UNDERFLOW)
    idx = np.flatnonzero(keep)
    # stop at the first underflow so the window is contiguous
    gaps = np.flatnonzero(np.diff(idx) > 1)
    if gaps.size:
        idx = idx[: gaps[0] + 1]
    if idx.size < 2:
        return ContractionEstimate(None, None, res, degenerate=True)
    fit = fit_linear(res.times[idx], np.log(rms[idx]))
    return ContractionEstimate(-fit.slope, fit, res, window=(int(idx[0]), int(idx[-1])))


# ---------------------------------------------------------------- surrogate


def mean_error_surrogate(states, mu_mean) -> float:
    """``|mean(states) - E_mu x|``; a lower bound on W2 by Jensen's inequality."""
    states = np.asarray(states, dtype=float)
    if states.ndim == 1:
        states = states[None, :]
    mu = np.broadcast_to(np.asarray(mu_mean, dtype=float), (states.shape[1],))
    return float(np.linalg.norm(states.mean(axis=0) - mu))


def surrogate_from_means(means, mu_mean) -> np.ndarray:
    """Row-wise ``|mean_k - E_mu x|`` for a ``(steps, d)`` array of chain means."""
    means = np.atleast_2d(np.asarray(means, dtype=float))
    return np.linalg.norm(means - np.asarray(mu_mean, dtype=float), axis=1)


# ---------------------------------------------------------------- inequalities


@dataclass
class InequalityCheck:
    """``lhs <= rhs`` at one configuration; ``margin = rhs - lhs``."""

    label: str
    lhs: float
    rhs: float

    @property
    def passed(self) -> bool:
        return bool(self.lhs <= self.rhs)

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs


def _certified_grid(q: PotentialModel, h_grid):
    grid = as_positive_grid(h_grid, "h_grid")
    for h in grid:
        check_step(q, float(h), certified=True)
    return grid


def growth_bound_check(q: PotentialModel, x_dist, h_grid) -> List[InequalityCheck]:
    """``E|x_h - x|^2 <= 6 (d + m/2 E|x|^2) h`` with the left side exact (OU moments)."""
    lam = curvatures_of(q)
    if isinstance(x_dist, str):
        x_dist = DiagonalGaussian(np.zeros_like(lam), 1.0 / lam)
    if not isinstance(x_dist, DiagonalGaussian):
        x_dist = DiagonalGaussian.point(np.broadcast_to(np.asarray(x_dist, dtype=float), lam.shape))
    second = x_dist.means ** 2 + x_dist.variances
    out = []
    for h in _certified_grid(q, h_grid):
        lhs = np.sum(np.expm1(-lam * h) ** 2 * second - np.expm1(-2.0 * lam * h) / lam)
        rhs = 6.0 * (q.d + 0.5 * q.m * second.sum()) * h
        out.append(InequalityCheck(f"growth h={h:g}", float(lhs), float(rhs)))
    return out


def evolved_deviation_check(q: PotentialModel, pairs, h_grid) -> List[InequalityCheck]:
    """``E|z|^2 <= (m/4) E|x - y|^2 h`` where ``z = (x_h - y_h) - (x - y)``.

    ``pairs`` is ``(X, Y)`` with two ``(n, d)`` arrays of coupled starts. For
    coupled exact solutions of a quadratic, ``z_i = (e^{-lam_i h} - 1)(x_i - y_i)``.
    """
    lam = curvatures_of(q)
    X, Y = (np.atleast_2d(np.asarray(a, dtype=float)) for a in pairs)
    if X.shape != Y.shape or X.shape[1] != lam.size:
        raise InvalidArgumentError("pairs must be two arrays of shape (n, d)")
    delta = X - Y
    dist = np.mean(np.sum(delta ** 2, axis=1))
    out = []
    for h in _certified_grid(q, h_grid):
        z = np.expm1(-lam * h) * delta
        lhs = np.mean(np.sum(z * z, axis=1))
        out.append(InequalityCheck(f"deviation h={h:g}", float(lhs), float(q.m / 4.0 * dist * h)))
    return out


def boundedness_check(p: PotentialModel, cfg: ChainConfig, sigmas: float = 3.0) -> List[InequalityCheck]:
    """``E|x_k|^2 <= E|x0|^2 + 8d/(7m)`` at every step, allowing ``sigmas`` standard errors.

    The bound assumes the origin is a stationary point of ``f``.
    """
    check_step(p, cfg.h, certified=True)
    if not np.allclose(p.gradient(np.zeros(p.d)), 0.0, atol=1e-12):
        raise InvalidArgumentError(f"{p.name}: bound needs grad f(0) = 0")
    res = run_chains(p, cfg, record=range(cfg.steps + 1))
    ex0 = res.sq_norm_mean[0]
    rhs = ex0 + 8.0 * p.d / (7.0 * p.m)
    return [
        InequalityCheck(f"boundedness k={k}", float(res.sq_norm_mean[i]), float(rhs + sigmas * res.sq_norm_sem[i]))
        for i, k in enumerate(res.steps)
    ]


def all_passed(checks: Sequence[InequalityCheck]) -> bool:
    return all(c.passed for c in checks)
