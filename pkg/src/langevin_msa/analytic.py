"""Closed-form laws for LMC on diagonal quadratic targets.

With ``f(x) = 0.5 * sum lam_i x_i^2`` each coordinate of the chain is a
Gaussian AR(1) recursion with factor ``r_i = 1 - lam_i h``, so the law of every
iterate, its 2-Wasserstein distance to the target and the mixing time are all
available exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from ._validation import as_positive_grid, as_vector, check_int, check_positive
from .errors import InvalidArgumentError, NotReachedError, StabilityError
from .potentials import PotentialModel

DEFAULT_K_CAP = 10 ** 7


@dataclass(frozen=True)
class DiagonalGaussian:
    """Product Gaussian with per-coordinate means and variances."""

    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        means = as_vector(self.means, "means")
        variances = as_vector(self.variances, "variances", means.size)
        if np.any(variances < 0):
            raise InvalidArgumentError("variances must be nonnegative")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "variances", variances)

    @property
    def d(self) -> int:
        return self.means.size

    @property
    def second_moment(self) -> float:
        """``E |x|^2``."""
        return float(np.sum(self.means ** 2 + self.variances))

    @classmethod
    def point(cls, x) -> "DiagonalGaussian":
        x = as_vector(x, "x")
        return cls(x, np.zeros_like(x))


def curvatures_of(q) -> np.ndarray:
    """Curvature vector of a quadratic ``PotentialModel`` or a raw vector."""
    if isinstance(q, PotentialModel):
        if not q.is_quadratic:
            raise InvalidArgumentError(f"{q.name} is not a diagonal quadratic")
        return q.curvatures
    lam = as_vector(q, "curvatures")
    if np.any(lam <= 0):
        raise InvalidArgumentError("curvatures must be positive")
    return lam


def _start(x0, d) -> DiagonalGaussian:
    if isinstance(x0, DiagonalGaussian):
        if x0.d != d:
            raise InvalidArgumentError(f"start law has dimension {x0.d}, expected {d}")
        return x0
    x = np.asarray(x0, dtype=float)
    if x.ndim == 0:
        x = np.full(d, float(x))
    return DiagonalGaussian.point(as_vector(x, "x0", d))


def _check_stable(lam, h):
    h = check_positive(h, "h")
    if h >= 2.0 / lam.max():
        raise StabilityError(f"h={h:g} must be below 2/L={2.0 / lam.max():g}")
    return h


def _moments(lam, h, ks, mu0, v0):
    """Means and variances with shape ``(len(ks), d)``."""
    ks = np.asarray(ks, dtype=float)[:, None]
    r = 1.0 - lam * h
    with np.errstate(divide="ignore"):
        log_abs = np.log(np.abs(r))
    # r**k with sign; r == 0 gives 0 for k >= 1 and 1 for k == 0
    rk = np.where(ks == 0, 1.0, np.sign(r) ** (ks % 2) * np.exp(ks * log_abs))
    r2k = np.where(ks == 0, 1.0, np.exp(2.0 * ks * log_abs))
    one_minus = np.where(ks == 0, 0.0, -np.expm1(2.0 * ks * log_abs))
    var_inf = 2.0 / (lam * (2.0 - lam * h))
    return rk * mu0, r2k * v0 + var_inf * one_minus


def lmc_iterate_law(q, h: float, k: int, x0) -> DiagonalGaussian:
    """Exact law of the ``k``-th LMC iterate from ``x0`` (vector or start law).

    mean_i = (1 - lam_i h)^k x0_i,
    var_i  = 2 / (lam_i (2 - lam_i h)) * (1 - (1 - lam_i h)^{2k}) (+ decayed start variance).
    """
    lam = curvatures_of(q)
    h = _check_stable(lam, h)
    k = check_int(k, "k")
    start = _start(x0, lam.size)
    mean, var = _moments(lam, h, [k], start.means, start.variances)
    return DiagonalGaussian(mean[0], var[0])


def stationary_law(q) -> DiagonalGaussian:
    """The target ``N(0, diag(1/lam))``."""
    lam = curvatures_of(q)
    return DiagonalGaussian(np.zeros_like(lam), 1.0 / lam)


def lmc_stationary_law(q, h: float) -> DiagonalGaussian:
    """Invariant law of the LMC chain itself; biased by ``2 / (2 - lam h)``."""
    lam = curvatures_of(q)
    h = _check_stable(lam, h)
    return DiagonalGaussian(np.zeros_like(lam), 2.0 / (lam * (2.0 - lam * h)))


def w2_diag(g1: DiagonalGaussian, g2: DiagonalGaussian) -> float:
    """2-Wasserstein distance between product Gaussians."""
    if g1.d != g2.d:
        raise InvalidArgumentError(f"dimension mismatch: {g1.d} vs {g2.d}")
    dm = g1.means - g2.means
    ds = np.sqrt(g1.variances) - np.sqrt(g2.variances)
    return float(np.sqrt(np.sum(dm * dm + ds * ds)))


def _grouped(lam, start):
    """Collapse coordinates with identical (lam, mean0, var0) into weighted groups."""
    rows = np.stack([lam, start.means, start.variances], axis=1)
    uniq, counts = np.unique(rows, axis=0, return_counts=True)
    return uniq[:, 0], uniq[:, 1], uniq[:, 2], counts.astype(float)


def w2_trajectory(q, h: float, ks, x0) -> np.ndarray:
    """``W2(Law(x_k), target)`` for every ``k`` in ``ks``."""
    lam = curvatures_of(q)
    h = _check_stable(lam, h)
    start = _start(x0, lam.size)
    g_lam, g_mu, g_var, w = _grouped(lam, start)
    return _w2_groups(g_lam, g_mu, g_var, w, h, np.asarray(ks))


def _w2_groups(lam, mu0, v0, w, h, ks):
    mean, var = _moments(lam, h, ks, mu0, v0)
    ds = np.sqrt(var) - 1.0 / np.sqrt(lam)
    return np.sqrt(np.sum(w * (mean * mean + ds * ds), axis=1))


def _first_hit(lam, mu0, v0, w, h, eps, k_cap):
    """Smallest ``k <= k_cap`` with ``W2(k) <= eps``, or ``None``.

    Scans ``k`` upward in geometrically growing vectorised chunks, which finds
    the first hitting time even where ``W2(k)`` is not monotone. The scan stops
    once ``r^{2k}`` of the slowest coordinate is below double precision, where
    ``W2(k)`` has settled at its limit.
    """
    slowest = float(np.max(np.abs(1.0 - lam * h)))
    if slowest > 0:
        settled = int(np.ceil(np.log(1e-18) / (2.0 * np.log(slowest)))) + 1
        k_cap = min(k_cap, settled)
    lo, size = 0, 256
    while lo <= k_cap:
        ks = np.arange(lo, min(lo + size, k_cap + 1))
        hit = np.flatnonzero(_w2_groups(lam, mu0, v0, w, h, ks) <= eps)
        if hit.size:
            return int(ks[hit[0]])
        lo += size
        size = min(size * 2, 1 << 20)
    return None


class MixingTime(NamedTuple):
    k: int
    h: float
    per_h: dict


def default_step_grid(q, n: int = 48) -> np.ndarray:
    lam = curvatures_of(q)
    top = 2.0 / lam.max()
    return np.geomspace(top * 1e-4, top * 0.99, n)


def exact_mixing_time(
    q,
    x0,
    eps: float,
    h_grid=None,
    k_cap: int = DEFAULT_K_CAP,
) -> MixingTime:
    """Exact ``tau_mix`` minimised over a grid of step sizes.

    For each ``h`` the first ``k`` with ``W2(Law(x_k), target) <= eps`` is found;
    the smallest over the grid is returned with its step (ties go to the larger
    ``h``). ``per_h`` maps each step to its count, ``None`` if not reached.
    """
    lam = curvatures_of(q)
    eps = check_positive(eps, "eps")
    grid = default_step_grid(lam) if h_grid is None else as_positive_grid(h_grid, "h_grid")
    if np.any(grid >= 2.0 / lam.max()):
        raise StabilityError(f"h_grid must lie below 2/L={2.0 / lam.max():g}")
    start = _start(x0, lam.size)
    groups = _grouped(lam, start)
    per_h = {}
    best: Optional[tuple] = None
    for h in np.sort(grid):
        k = _first_hit(*groups, float(h), eps, k_cap)
        per_h[float(h)] = k
        if k is not None and (best is None or k <= best[0]):
            best = (k, float(h))
    if best is None:
        raise NotReachedError(f"no step size reached W2 <= {eps:g} within {k_cap} iterations")
    return MixingTime(best[0], best[1], per_h)
