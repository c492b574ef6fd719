"""Mean-square-analysis constants, W2 error bounds and mixing-time bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from ._validation import check_int, check_positive
from .errors import InvalidArgumentError, OutOfCertifiedRangeError
from .potentials import PotentialModel

_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class ConstantsLedger:
    """Inputs and derived constants of the global-error theorem.

    Local weak error ``(C1 + D1 sqrt(E|x|^2)) h^p1``, local strong error
    ``sqrt(C2^2 + D2^2 E|x|^2) h^p2``, contraction rate ``beta`` in the norm of a
    matrix with condition number ``kappa_A``, short-time deviation constant
    ``C0``, admissible step ``h0`` and ``Usq = 4 E|x0|^2 + 6 E_mu |x|^2``.
    ``h1`` and ``C`` are filled by :meth:`complete`; ``C_LMC`` is the relaxed
    LMC constant when the ledger came from :func:`lmc_ledger`.
    """

    beta: float
    C0: float
    C1: float
    C2: float
    p1: float
    p2: float
    h0: float
    Usq: float
    D1: float = 0.0
    D2: float = 0.0
    kappa_A: float = 1.0
    h1: Optional[float] = None
    C: Optional[float] = None
    C_LMC: Optional[float] = None

    def __post_init__(self):
        for name in ("beta", "h0"):
            check_positive(getattr(self, name), name)
        for name in ("C0", "C1", "C2", "D1", "D2", "Usq"):
            check_positive(getattr(self, name), name, allow_zero=True)
        if self.kappa_A < 1:
            raise InvalidArgumentError(f"kappa_A must be >= 1, got {self.kappa_A}")
        if not self.p2 > 0.5 or self.p1 < self.p2 + 0.5 - 1e-12:
            raise InvalidArgumentError(
                f"orders need p2 > 1/2 and p1 >= p2 + 1/2, got p1={self.p1}, p2={self.p2}"
            )

    def complete(self) -> "ConstantsLedger":
        return replace(self, h1=h1_threshold(self), C=global_constant(self))

    @property
    def global_order(self) -> float:
        """Exponent of ``h`` in the sampling error, ``p2 - 1/2``."""
        return self.p2 - 0.5

    def error_constant(self, constant: Optional[str] = None) -> float:
        """``C`` (``"global"``) or ``C_LMC`` (``"lmc"``); default prefers ``C_LMC``."""
        if constant is None:
            constant = "lmc" if self.C_LMC is not None else "global"
        if constant == "lmc":
            if self.C_LMC is None:
                raise InvalidArgumentError("ledger has no C_LMC")
            return self.C_LMC
        if constant == "global":
            return self.C if self.C is not None else global_constant(self)
        raise InvalidArgumentError(f"constant must be 'lmc' or 'global', got {constant!r}")

    def step_threshold(self) -> float:
        return self.h1 if self.h1 is not None else h1_threshold(self)


def h1_threshold(ledger: ConstantsLedger) -> float:
    """Largest certified step: min of h0, 1/(4 beta) and the two D-dependent terms.

    A D-dependent term is infinite when its D vanishes (convention 1/0 = inf).
    """
    q = 1.0 / (ledger.p2 - 0.5)
    terms = [ledger.h0, 1.0 / (4.0 * ledger.beta)]
    if ledger.D2 > 0:
        terms.append((math.sqrt(ledger.beta) / (4.0 * _SQRT2 * ledger.kappa_A * ledger.D2)) ** q)
    mixed = ledger.D1 + ledger.C0 * ledger.D2
    if mixed > 0:
        terms.append((ledger.beta / (8.0 * _SQRT2 * ledger.kappa_A ** 2 * mixed)) ** q)
    return min(terms)


def global_constant(ledger: ConstantsLedger) -> float:
    """The constant ``C`` in ``e_k <= C h^{p2 - 1/2}``."""
    b = ledger.beta
    U = math.sqrt(ledger.Usq)
    inner = (
        ledger.C1 + ledger.C0 * ledger.C2 + _SQRT2 * U * (ledger.D1 + ledger.C0 * ledger.D2)
    ) / math.sqrt(b) + ledger.C2 + _SQRT2 * ledger.D2 * U
    return 2.0 / math.sqrt(b) * ledger.kappa_A ** 2 * inner


def c_lmc(m: float, L: float, G: float, d: int, Ex0sq: float) -> float:
    """``10 (L^2 + G) / m^{3/2} * sqrt(2d + m (E|x0|^2 + 1))``."""
    m = check_positive(m, "m")
    L = check_positive(L, "L")
    if m > L:
        raise InvalidArgumentError(f"need m <= L, got m={m}, L={L}")
    G = check_positive(G, "G", allow_zero=True)
    d = check_int(d, "d", minimum=1)
    Ex0sq = check_positive(Ex0sq, "Ex0sq", allow_zero=True)
    return 10.0 * (L * L + G) / m ** 1.5 * math.sqrt(2.0 * d + m * (Ex0sq + 1.0))


def lmc_ledger(p: PotentialModel, Ex0sq: float, Emu_sq: Optional[float] = None) -> ConstantsLedger:
    """Constants for LMC on ``p`` (identity transform, beta = m, p1 = 2, p2 = 3/2)."""
    if p.G is None:
        raise InvalidArgumentError(
            f"{p.name} has no growth constant G; pass one explicitly or use estimate_G"
        )
    if Emu_sq is None:
        Emu_sq = p.stationary_second_moment
        if Emu_sq is None:
            raise InvalidArgumentError(
                f"E_mu|x|^2 is unknown for {p.name}; estimate it with a pilot run"
            )
    Ex0sq = check_positive(Ex0sq, "Ex0sq", allow_zero=True)
    Emu_sq = check_positive(Emu_sq, "Emu_sq", allow_zero=True)
    m, L, G, d = p.m, p.L, p.G, p.d
    S = math.sqrt(2.0 * d / m + Ex0sq + 1.0)
    ledger = ConstantsLedger(
        beta=m,
        kappa_A=1.0,
        h0=1.0 / (4.0 * p.kappa * L),
        C0=math.sqrt(m) / 2.0,
        C1=2.0 * (L * L + G) * S,
        D1=0.0,
        C2=2.0 * L * math.sqrt(m) * S,
        D2=0.0,
        p1=2.0,
        p2=1.5,
        Usq=4.0 * Ex0sq + 6.0 * Emu_sq,
        C_LMC=c_lmc(m, L, G, d, Ex0sq),
    )
    return ledger.complete()


def w2_upper(k, h: float, W2_0: float, ledger: ConstantsLedger, constant: Optional[str] = None):
    """``exp(-beta k h) W2_0 + C h^{p2 - 1/2}``; vectorised over ``k``."""
    h = check_positive(h, "h")
    W2_0 = check_positive(W2_0, "W2_0", allow_zero=True)
    h1 = ledger.step_threshold()
    if h > h1 * (1.0 + 1e-12):
        raise OutOfCertifiedRangeError(f"h={h:g} exceeds the certified threshold h1={h1:g}")
    C = ledger.error_constant(constant)
    k_arr = np.asarray(k, dtype=float)
    if np.any(k_arr < 0):
        raise InvalidArgumentError("k must be nonnegative")
    out = np.exp(-ledger.beta * k_arr * h) * W2_0 + C * h ** ledger.global_order
    return float(out) if out.ndim == 0 else out


def mixing_upper_step(eps: float, ledger: ConstantsLedger, constant: Optional[str] = None) -> float:
    """Step size behind :func:`mixing_upper`: ``min{h1, (eps / 2C)^{1/(p2-1/2)}}``."""
    eps = check_positive(eps, "eps")
    C = ledger.error_constant(constant)
    h1 = ledger.step_threshold()
    if C == 0:
        return h1
    return min(h1, (eps / (2.0 * C)) ** (1.0 / ledger.global_order))


def mixing_upper(eps: float, W2_0: float, ledger: ConstantsLedger, constant: Optional[str] = None) -> int:
    """Upper bound on the W2 mixing time, as an iteration count."""
    eps = check_positive(eps, "eps")
    W2_0 = check_positive(W2_0, "W2_0", allow_zero=True)
    if W2_0 <= eps / 2.0:
        return 0
    C = ledger.error_constant(constant)
    rate = max(
        1.0 / (ledger.beta * ledger.step_threshold()),
        (2.0 * C / eps) ** (1.0 / ledger.global_order) / ledger.beta,
    )
    return int(math.ceil(rate * math.log(2.0 * W2_0 / eps)))


def mixing_lower(d: int, eps: float) -> float:
    """``sqrt(d) / (8 eps) * log(sqrt(d) / eps)``, clipped at 0 once eps >= sqrt(d)."""
    d = check_int(d, "d", minimum=1)
    eps = check_positive(eps, "eps")
    root = math.sqrt(d)
    if eps >= root:
        return 0.0
    return root / (8.0 * eps) * math.log(root / eps)
