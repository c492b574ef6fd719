"""Langevin Monte Carlo chains, coupled chain pairs and fine reference solutions."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from ._validation import as_vector, check_int, check_positive
from .errors import (
    InvalidArgumentError,
    NumericalDivergenceError,
    OutOfCertifiedRangeError,
    StabilityError,
)
from .noise import NoiseStream, replica_blocks, tree_moments, tree_sum
from .potentials import PotentialModel

# stream ids under one master seed
CHAIN_STREAM = 0
START_STREAM = 1


@dataclass(frozen=True)
class ChainConfig:
    """Run parameters. ``x0`` is a vector or the tag ``"stationary"``."""

    h: float
    steps: int
    replicas: int = 1
    seed: int = 0
    x0: object = 0.0
    workers: int = 1

    def __post_init__(self):
        check_positive(self.h, "h")
        check_int(self.steps, "steps", minimum=0)
        check_int(self.replicas, "replicas", minimum=1)
        check_int(self.seed, "seed", minimum=0)
        check_int(self.workers, "workers", minimum=1)
        if isinstance(self.x0, str) and self.x0 != "stationary":
            raise InvalidArgumentError(f"x0 tag must be 'stationary', got {self.x0!r}")


def check_step(p: PotentialModel, h: float, *, certified: bool = False) -> float:
    """Validate a step size for ``p``.

    Quadratic targets need ``h < 2/L`` (linear stability); other targets are
    rejected only beyond ``2/L``. With ``certified`` the step must also satisfy
    ``h <= 1/(4 kappa L)``, the range covered by the error bounds.
    """
    h = check_positive(h, "h")
    limit = p.max_stable_step()
    if (p.is_quadratic and h >= limit) or h > limit:
        raise StabilityError(f"h={h:g} is not below the stability limit 2/L={limit:g} for {p.name}")
    if certified and h > 1.0 / (4.0 * p.kappa * p.L):
        raise OutOfCertifiedRangeError(
            f"h={h:g} exceeds 1/(4 kappa L)={1.0 / (4.0 * p.kappa * p.L):g} for {p.name}"
        )
    return h


def lmc_step(x, p: PotentialModel, h: float, xi, step: Optional[int] = None) -> np.ndarray:
    """One LMC update ``x - h grad f(x) + sqrt(2h) xi`` (batched over leading axes)."""
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if x.shape[-1] != p.d or xi.shape != x.shape:
        raise InvalidArgumentError(f"shape mismatch: x {x.shape}, xi {xi.shape}, d={p.d}")
    out = x - h * p.gradient(x) + np.sqrt(2.0 * h) * xi
    if not np.all(np.isfinite(out)):
        raise NumericalDivergenceError(step if step is not None else 1)
    return out


def initial_states(p: PotentialModel, x0, block: int, n: int, seed: int) -> np.ndarray:
    if isinstance(x0, str):
        if not p.is_quadratic:
            raise InvalidArgumentError("stationary start is only available for quadratic targets")
        z = NoiseStream(seed, START_STREAM).block(block, 0, n, p.d)
        return z / np.sqrt(p.curvatures)
    start = np.asarray(x0, dtype=float)
    if start.ndim == 0:
        start = np.full(p.d, float(start))
    start = as_vector(start, "x0", p.d)
    return np.broadcast_to(start, (n, p.d)).copy()


def _raise_divergence(x, start, step):
    bad = np.flatnonzero(~np.all(np.isfinite(x), axis=1))
    raise NumericalDivergenceError(step, start + int(bad[0]))


@dataclass
class ChainResult:
    """Per-recorded-step moments over all replicas.

    ``mean`` and ``second_moment`` have shape ``(len(steps), d)``;
    ``sq_norm_mean`` and ``sq_norm_sem`` summarise ``|x|^2`` per step.
    ``states`` maps recorded steps to raw ``(replicas, d)`` arrays when kept.
    """

    steps: np.ndarray
    replicas: int
    mean: np.ndarray
    second_moment: np.ndarray
    sq_norm_mean: np.ndarray
    sq_norm_sem: np.ndarray
    states: Optional[Dict[int, np.ndarray]] = field(default=None, repr=False)

    @property
    def variance(self) -> np.ndarray:
        M = self.replicas
        pop = self.second_moment - self.mean ** 2
        return pop * (M / (M - 1)) if M > 1 else pop

    @property
    def mean_sem(self) -> np.ndarray:
        return np.sqrt(np.maximum(self.variance, 0.0) / self.replicas)

    def at(self, step: int) -> int:
        """Row index of a recorded step."""
        hits = np.flatnonzero(self.steps == step)
        if hits.size == 0:
            raise KeyError(f"step {step} was not recorded")
        return int(hits[0])


def _map_blocks(fn, blocks, workers):
    if workers <= 1 or len(blocks) <= 1:
        return [fn(*blk) for blk in blocks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda blk: fn(*blk), blocks))


def run_chains(
    p: PotentialModel,
    cfg: ChainConfig,
    record=None,
    keep_states: bool = False,
) -> ChainResult:
    """Advance ``cfg.replicas`` independent LMC chains ``cfg.steps`` steps.

    ``record`` is an iterable of step indices in ``[0, steps]`` (default: the
    last step). Output is bit-identical for a fixed config whatever
    ``cfg.workers`` is: noise is addressed by (seed, block, step) and block
    partial sums are combined by :func:`tree_sum` in block order.
    """
    check_step(p, cfg.h)
    K = cfg.steps
    rec = np.unique(np.asarray([K] if record is None else list(record), dtype=int))
    if rec.size == 0 or rec[0] < 0 or rec[-1] > K:
        raise InvalidArgumentError(f"record steps must lie in [0, {K}]")
    rec_index = {int(k): i for i, k in enumerate(rec)}
    noise = NoiseStream(cfg.seed, CHAIN_STREAM)
    h, scale, d = cfg.h, np.sqrt(2.0 * cfg.h), p.d

    def work(b, start, stop):
        n = stop - start
        x = initial_states(p, cfg.x0, b, n, cfg.seed)
        s1 = np.zeros((rec.size, d))
        s2 = np.zeros((rec.size, d))
        q1 = np.zeros(rec.size)
        q2 = np.zeros(rec.size)
        kept = {}

        def accumulate(k):
            i = rec_index[k]
            s1[i] = x.sum(axis=0)
            s2[i] = (x * x).sum(axis=0)
            sq = np.einsum("ij,ij->i", x, x)
            q1[i] = sq.sum()
            q2[i] = (sq * sq).sum()
            if keep_states:
                kept[k] = x.copy()

        if 0 in rec_index:
            accumulate(0)
        for k in range(1, K + 1):
            x = x - h * p.gradient(x) + scale * noise.block(b, k, n, d)
            if not np.all(np.isfinite(x)):
                _raise_divergence(x, start, k)
            if k in rec_index:
                accumulate(k)
        return s1, s2, q1, q2, kept

    parts = _map_blocks(work, replica_blocks(cfg.replicas), cfg.workers)
    M = cfg.replicas
    s1 = tree_sum([pt[0] for pt in parts]) / M
    s2 = tree_sum([pt[1] for pt in parts]) / M
    q1 = tree_sum([pt[2] for pt in parts]) / M
    q2 = tree_sum([pt[3] for pt in parts]) / M
    q_var = np.maximum(q2 - q1 ** 2, 0.0) * (M / (M - 1) if M > 1 else 1.0)
    states = None
    if keep_states:
        states = {int(k): np.concatenate([pt[4][int(k)] for pt in parts]) for k in rec}
    return ChainResult(
        steps=rec,
        replicas=M,
        mean=s1,
        second_moment=s2,
        sq_norm_mean=q1,
        sq_norm_sem=np.sqrt(q_var / M),
        states=states,
    )


def ou_noise_coefficients(lam, dt):
    """Coefficients ``(a, b)`` with ``int_0^dt e^{-lam (dt-s)} dB_s = a dB + b zeta``.

    ``dB`` is the Brownian increment over ``dt`` and ``zeta`` an independent
    standard normal; this is the exact joint law of the pair.
    """
    lam = np.asarray(lam, dtype=float)
    cov = -np.expm1(-lam * dt) / lam
    var_i = -np.expm1(-2.0 * lam * dt) / (2.0 * lam)
    a = cov / dt
    b = np.sqrt(np.maximum(var_i - cov * cov / dt, 0.0))
    return a, b


def reference_solution(
    p: PotentialModel,
    x,
    h: float,
    increments,
    aux=None,
    exact: Optional[bool] = None,
) -> np.ndarray:
    """High-accuracy solution of the Langevin SDE over ``[0, h]`` from ``x``.

    ``increments`` holds the Brownian increments of the substeps with shape
    ``(..., substeps, d)``; they sum to the coarse increment. For quadratic
    targets (``exact`` defaults to True there) each substep is an exact
    Ornstein-Uhlenbeck transition whose stochastic integral is completed from
    the same increment plus the independent normals in ``aux``. Otherwise the
    substeps are Euler-Maruyama steps, which share the coarse step's Brownian
    path.
    """
    h = check_positive(h, "h")
    x = np.asarray(x, dtype=float)
    dB = np.asarray(increments, dtype=float)
    if dB.ndim < 2 or dB.shape[-1] != p.d:
        raise InvalidArgumentError(f"increments must have shape (..., substeps, {p.d})")
    substeps = dB.shape[-2]
    dt = h / substeps
    if exact is None:
        exact = p.is_quadratic
    if exact:
        if not p.is_quadratic:
            raise InvalidArgumentError("exact transitions need a quadratic target")
        lam = p.curvatures
        decay = np.exp(-lam * dt)
        a, b = ou_noise_coefficients(lam, dt)
        zeta = np.zeros_like(dB) if aux is None else np.asarray(aux, dtype=float)
        for j in range(substeps):
            x = decay * x + np.sqrt(2.0) * (a * dB[..., j, :] + b * zeta[..., j, :])
    else:
        for j in range(substeps):
            x = x - dt * p.gradient(x) + np.sqrt(2.0) * dB[..., j, :]
    if not np.all(np.isfinite(x)):
        raise NumericalDivergenceError(substeps, message="reference solution became non-finite")
    return x


@dataclass
class CoupledResult:
    """Mean squared distance between coupled chains at steps ``0..K``."""

    h: float
    msd: np.ndarray
    msd_sem: np.ndarray
    replicas: int

    @property
    def times(self) -> np.ndarray:
        return self.h * np.arange(self.msd.size)

    @property
    def rms(self) -> np.ndarray:
        return np.sqrt(self.msd)


def run_coupled_pair(
    p: PotentialModel,
    cfg: ChainConfig,
    x0,
    y0,
    integrator: str = "lmc",
) -> CoupledResult:
    """Run chain pairs from ``x0`` and ``y0`` driven by identical noise.

    ``integrator="lmc"`` couples two LMC chains; ``"exact"`` couples two exact
    Ornstein-Uhlenbeck solutions of a quadratic target sampled at ``t = k h``.
    """
    if integrator not in ("lmc", "exact"):
        raise InvalidArgumentError(f"integrator must be 'lmc' or 'exact', got {integrator!r}")
    check_step(p, cfg.h)
    x0 = as_vector(np.broadcast_to(np.asarray(x0, dtype=float), (p.d,)), "x0", p.d)
    y0 = as_vector(np.broadcast_to(np.asarray(y0, dtype=float), (p.d,)), "y0", p.d)
    noise = NoiseStream(cfg.seed, CHAIN_STREAM)
    aux_noise = NoiseStream(cfg.seed, START_STREAM + 1)
    K, h, d = cfg.steps, cfg.h, p.d

    def work(b, start, stop):
        n = stop - start
        x = np.broadcast_to(x0, (n, d)).copy()
        y = np.broadcast_to(y0, (n, d)).copy()
        mean = np.zeros(K + 1)
        css = np.zeros(K + 1)

        def accumulate(k):
            dist = np.einsum("ij,ij->i", x - y, x - y)
            mean[k] = dist.mean()
            css[k] = np.sum((dist - mean[k]) ** 2)

        accumulate(0)
        for k in range(1, K + 1):
            xi = noise.block(b, k, n, d)
            if integrator == "lmc":
                x = x - h * p.gradient(x) + np.sqrt(2.0 * h) * xi
                y = y - h * p.gradient(y) + np.sqrt(2.0 * h) * xi
            else:
                dB = (np.sqrt(h) * xi)[:, None, :]
                zeta = aux_noise.block(b, k, n, d)[:, None, :]
                x = reference_solution(p, x, h, dB, zeta, exact=True)
                y = reference_solution(p, y, h, dB, zeta, exact=True)
            if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
                _raise_divergence(np.hstack([x, y]), start, k)
            accumulate(k)
        return n, mean, css

    parts = _map_blocks(work, replica_blocks(cfg.replicas), cfg.workers)
    M, msd, css = tree_moments(parts)
    var = css / (M - 1) if M > 1 else np.zeros_like(css)
    return CoupledResult(h=h, msd=msd, msd_sem=np.sqrt(var / M), replicas=M)
