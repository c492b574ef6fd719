"""Target potentials f with their regularity constants.

Every evaluator accepts an array of shape ``(..., d)`` and maps the last axis,
so a whole block of replicas is evaluated in one call. Evaluators are pure.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import logsumexp, softmax

from ._validation import as_vector, check_int, check_positive
from .errors import InvalidArgumentError, UnsupportedOperationError

ArrayFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class PotentialModel:
    """A potential ``f`` on R^d with ``m I <= Hess f <= L I``.

    ``G`` is the linear-growth constant of ``grad(Laplacian f)``; ``None`` when
    unknown. ``curvatures`` is set only for diagonal quadratics, which unlocks
    the closed-form routines in :mod:`langevin_msa.analytic`.
    ``stationary_mean`` and ``stationary_second_moment`` hold exact values of
    ``E_mu x`` and ``E_mu |x|^2`` when they are known in closed form.
    """

    name: str
    d: int
    m: float
    L: float
    gradient: ArrayFn
    G: Optional[float] = None
    grad_laplacian: Optional[ArrayFn] = None
    value: Optional[ArrayFn] = None
    curvatures: Optional[np.ndarray] = field(default=None, repr=False)
    stationary_mean: Optional[np.ndarray] = field(default=None, repr=False)
    stationary_second_moment: Optional[float] = None

    def __post_init__(self):
        check_int(self.d, "d", minimum=1)
        check_positive(self.m, "m")
        check_positive(self.L, "L")
        if self.m > self.L:
            raise InvalidArgumentError(f"need m <= L, got m={self.m}, L={self.L}")
        if self.G is not None:
            check_positive(self.G, "G", allow_zero=True)

    @property
    def kappa(self) -> float:
        return self.L / self.m

    @property
    def is_quadratic(self) -> bool:
        return self.curvatures is not None

    def with_G(self, G: float) -> "PotentialModel":
        """Copy with the growth constant replaced."""
        from dataclasses import replace

        return replace(self, G=check_positive(G, "G", allow_zero=True))

    def max_stable_step(self) -> float:
        """Largest step for which LMC is linearly stable, ``2 / L``."""
        return 2.0 / self.L


def make_quadratic(curvatures) -> PotentialModel:
    """Diagonal quadratic ``f(x) = 0.5 * sum_i lam_i x_i^2``."""
    lam = as_vector(curvatures, "curvatures")
    if not np.all(np.isfinite(lam)) or np.any(lam <= 0):
        raise InvalidArgumentError("curvatures must be finite and strictly positive")
    lam = lam.copy()
    lam.setflags(write=False)

    def gradient(x):
        return lam * x

    def grad_laplacian(x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def value(x):
        x = np.asarray(x, dtype=float)
        return 0.5 * np.sum(lam * x * x, axis=-1)

    label = ",".join(f"{v:g}" for v in lam) if lam.size <= 8 else f"{lam.size} coords"
    return PotentialModel(
        name=f"quadratic({label})",
        d=int(lam.size),
        m=float(lam.min()),
        L=float(lam.max()),
        G=0.0,
        gradient=gradient,
        grad_laplacian=grad_laplacian,
        value=value,
        curvatures=lam,
        stationary_mean=np.zeros(lam.size),
        stationary_second_moment=float(np.sum(1.0 / lam)),
    )


def two_scale_quadratic(d: int, m: float = 1.0, L: float = 4.0) -> PotentialModel:
    """Quadratic on R^{2d}: ``d`` coordinates of curvature m, ``d`` of curvature L.

    This is the target behind the mixing-time lower bound (m = 1, L >= 4m).
    """
    check_int(d, "d", minimum=1)
    return make_quadratic(np.concatenate([np.full(d, float(m)), np.full(d, float(L))]))


def make_f1(d: int) -> PotentialModel:
    """``f1(x) = |x|^2 / 2 + log sum_i exp(x_i)``; 1-strongly convex, 2-smooth.

    Its stationary mean is ``-1/d`` in every coordinate: along the all-ones
    direction the log-sum-exp term is linear, and the orthogonal part is
    permutation symmetric.
    """
    check_int(d, "d", minimum=1)

    def gradient(x):
        x = np.asarray(x, dtype=float)
        return x + softmax(x, axis=-1)

    def grad_laplacian(x):
        # Laplacian = d + 1 - sum p_i^2, p = softmax(x)
        p = softmax(np.asarray(x, dtype=float), axis=-1)
        sq = np.sum(p * p, axis=-1, keepdims=True)
        return -2.0 * p * (p - sq)

    def value(x):
        x = np.asarray(x, dtype=float)
        return 0.5 * np.sum(x * x, axis=-1) + logsumexp(x, axis=-1)

    return PotentialModel(
        name=f"f1({d})",
        d=d,
        m=1.0,
        L=2.0,
        gradient=gradient,
        grad_laplacian=grad_laplacian,
        value=value,
        stationary_mean=np.full(d, -1.0 / d),
    )


def make_f2(d: int) -> PotentialModel:
    """``f2(x) = |x|^2 / 2 - sum_i cos(d^{1/4} x_i) / (2 sqrt(d))``.

    The Hessian is diagonal with entries ``1 + cos(d^{1/4} x_i) / 2``, so the
    recorded strong-convexity constant is 1/2 and the smoothness constant 3/2.
    The target is even in each coordinate, hence its mean is exactly 0.
    """
    check_int(d, "d", minimum=1)
    c = d ** 0.25

    def gradient(x):
        x = np.asarray(x, dtype=float)
        return x + np.sin(c * x) / (2.0 * c)

    def grad_laplacian(x):
        return -(c / 2.0) * np.sin(c * np.asarray(x, dtype=float))

    def value(x):
        x = np.asarray(x, dtype=float)
        return 0.5 * np.sum(x * x, axis=-1) - np.sum(np.cos(c * x), axis=-1) / (2.0 * np.sqrt(d))

    return PotentialModel(
        name=f"f2({d})",
        d=d,
        m=0.5,
        L=1.5,
        gradient=gradient,
        grad_laplacian=grad_laplacian,
        value=value,
        stationary_mean=np.zeros(d),
    )


def estimate_G(p: PotentialModel, radius: float, samples: int, rng_seed=0) -> float:
    """Max of ``|grad Laplacian f(x)| / (1 + |x|)`` over uniform draws in a ball.

    A sampled lower estimate of the growth constant G; deterministic for a
    fixed seed.
    """
    if p.grad_laplacian is None:
        raise UnsupportedOperationError(f"{p.name} has no grad_laplacian; supply G explicitly")
    radius = check_positive(radius, "radius")
    samples = check_int(samples, "samples", minimum=1)
    rng = np.random.default_rng(rng_seed)
    best = 0.0
    chunk = max(1, min(samples, 2 ** 20 // p.d))
    done = 0
    while done < samples:
        n = min(chunk, samples - done)
        direction = rng.standard_normal((n, p.d))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        r = radius * rng.random(n) ** (1.0 / p.d)
        x = direction * r[:, None]
        ratio = np.linalg.norm(p.grad_laplacian(x), axis=1) / (1.0 + r)
        best = max(best, float(ratio.max()))
        done += n
    return best


_NAME_RE = re.compile(r"^\s*(\w+)\s*(?:\((.*)\))?\s*$")


def parse_potential(text: str, d: Optional[int] = None) -> PotentialModel:
    """Build a potential from its textual name.

    Accepted forms::

        f1(10)   f2(10)   f1 / f2            (dimension from ``d``)
        quadratic(1,4,9)                     explicit curvatures
        quadratic(2)  quadratic              isotropic, dimension from ``d``
        quadratic(m=1,L=4,d=16)              two-scale block target on R^{2d}
    """
    match = _NAME_RE.match(text)
    if not match:
        raise InvalidArgumentError(f"cannot parse potential {text!r}")
    kind, args = match.group(1).lower(), (match.group(2) or "").strip()
    if kind in ("f1", "f2"):
        dim = int(args) if args else d
        if dim is None:
            raise InvalidArgumentError(f"{kind} needs a dimension")
        return (make_f1 if kind == "f1" else make_f2)(dim)
    if kind == "quadratic":
        if "=" in args:
            kw = {}
            for part in args.split(","):
                key, _, val = part.partition("=")
                kw[key.strip()] = val.strip()
            unknown = set(kw) - {"m", "L", "d"}
            if unknown or "d" not in kw and d is None:
                raise InvalidArgumentError(f"block quadratic takes m, L, d; got {sorted(kw)}")
            return two_scale_quadratic(
                int(kw.get("d", d)), float(kw.get("m", 1.0)), float(kw.get("L", 4.0))
            )
        lam = [float(v) for v in args.split(",")] if args else [1.0]
        if len(lam) == 1 and d is not None:
            lam = lam * d
        return make_quadratic(lam)
    raise InvalidArgumentError(f"unknown potential {kind!r}; expected quadratic, f1 or f2")
