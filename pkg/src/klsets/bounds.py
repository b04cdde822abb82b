"""Tail factors, cumulant/tail estimates and Gauss-measure lower bounds for KL-sets.

Quantities that under- or overflow at table scale (``K ~ 1e5..1e8``) are kept in
log space: ``ln Xi`` comes straight from the exponent and ``1 - Xi`` is
evaluated as ``-expm1(ln Xi)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .constants import ConstantsTable, constants_table

__all__ = [
    "KLQuery",
    "BoundReport",
    "UnreachableEstimate",
    "log_xi",
    "xi",
    "cumulant_bound",
    "tail_bound",
    "exp_sqrt_sum_bound",
    "exp_sqrt_sum_oracle",
    "kl_measure_lower_bound",
    "monotone_threshold",
    "min_n_for_estimate",
    "min_t_for_estimate",
]

SIDES = ("upper", "lower", "both")
_K_LIMIT = 1 << 62
_CHUNK = 1 << 20


class UnreachableEstimate(ValueError):
    """The requested estimate cannot be met for any admissible ``K``."""


@dataclass(frozen=True)
class KLQuery:
    variant: str
    T: float
    N: int
    side: str = "upper"

    def __post_init__(self) -> None:
        if self.variant not in ("M", "Mprime"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T}")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N}")
        if self.side not in SIDES:
            raise ValueError(f"side must be one of {SIDES}")

    def flags(self, table: ConstantsTable | None = None) -> list[str]:
        table = table or constants_table()
        out = []
        # 2^n <= M'_n always, so the lower condition is automatic past this rate
        if self.variant == "Mprime" and self.side in ("lower", "both"):
            if self.T >= table.kappa_prime - math.log(2.0):
                out.append("lower-trivial: T >= kappa' - ln 2, every number satisfies the lower condition")
        if self.variant == "M" and self.side in ("lower", "both") and self.T >= table.kappa:
            out.append("lower-trivial: T >= kappa, M_n >= 1 > e^{(kappa-T)n}")
        return out


@dataclass(frozen=True)
class BoundReport:
    xi: float
    log_xi: float
    K: int
    log_num: float
    den: float
    finite_sum: float
    complement: float
    lower_bound: float
    vacuous: bool
    inputs: KLQuery
    flags: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "xi": self.xi,
            "log_xi": self.log_xi,
            "K": self.K,
            "log_num": self.log_num,
            "den": self.den,
            "finite_sum": self.finite_sum,
            "complement": self.complement,
            "lower_bound": self.lower_bound,
            "vacuous": self.vacuous,
            "flags": list(self.flags),
            "inputs": {
                "variant": self.inputs.variant,
                "T": self.inputs.T,
                "N": self.inputs.N,
                "side": self.inputs.side,
            },
        }


def _rate_constants(variant: str, table: ConstantsTable | None) -> tuple[float, float]:
    table = table or constants_table()
    r = table.r_bar_for(variant)
    lam = table.lambda_bar
    return 128.0 * r * r * lam, (16.0 * r * lam) ** (1.0 / 3.0)


def log_xi(T: float, variant: str = "M", table: ConstantsTable | None = None) -> float:
    """Natural log of the tail factor, ``-T^2 / (2 (128 r^2 L + (16 r L)^(1/3) T)^(3/2))``."""
    if not T > 0:
        raise ValueError(f"T must be positive, got {T}")
    h, c = _rate_constants(variant, table)
    return -T * T / (2.0 * (h + c * T) ** 1.5)


def xi(T: float, variant: str = "M", table: ConstantsTable | None = None) -> float:
    return math.exp(log_xi(T, variant, table))


def cumulant_bound(k: int, n: int, variant: str = "M", table: ConstantsTable | None = None) -> float:
    """ln of ``(k!/2)^2 (16 r L)^(k-2) 128 r^2 L n``, the bound on the k-th cumulant of S_n."""
    if k < 2 or n < 1:
        raise ValueError("need k >= 2 and n >= 1")
    table = table or constants_table()
    r = table.r_bar_for(variant)
    lam = table.lambda_bar
    return (
        2.0 * (math.lgamma(k + 1) - math.log(2.0))
        + (k - 2) * math.log(16.0 * r * lam)
        + math.log(128.0 * r * r * lam)
        + math.log(n)
    )


def tail_bound(n: int, x: float, variant: str = "M", table: ConstantsTable | None = None) -> float:
    """Bound on ``gamma(+-(S_n - n kappa) >= x)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not x > 0:
        raise ValueError(f"x must be positive, got {x}")
    h, c = _rate_constants(variant, table)
    return math.exp(-x * x / (2.0 * (h * n + c * x) ** 1.5))


def _ceil_sqrt(N: int) -> int:
    K = math.isqrt(N)
    return K if K * K == N else K + 1


def _sqrt_sum(log_q: float, start: int, stop: int) -> float:
    """Compensated ``sum_{n=start}^{stop-1} exp(log_q * sqrt(n))``."""
    parts = []
    for lo in range(start, stop, _CHUNK):
        n = np.arange(lo, min(stop, lo + _CHUNK), dtype=float)
        parts.append(math.fsum(np.exp(log_q * np.sqrt(n))))
    return math.fsum(parts)


def _block_tail(log_q: float, K: int) -> tuple[float, float]:
    """Return ``(log_num, den)`` for ``q^K / (1-q) * (2K + 1 + 4q/(1-q))``, q = e^{log_q}."""
    den = -math.expm1(log_q)
    q = math.exp(log_q)
    log_num = math.log(2.0 * K + 1.0 + 4.0 * q / den) + K * log_q
    return log_num, den


def exp_sqrt_sum_bound(alpha: float, N: int) -> float:
    """Upper bound on ``sum_{n>=N} exp(-alpha sqrt n)`` by blocks ``[k^2, (k+1)^2)``."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if N < 2:
        raise ValueError("N must be >= 2")
    K = _ceil_sqrt(N)
    finite = _sqrt_sum(-alpha, N, K * K)
    log_num, den = _block_tail(-alpha, K)
    return finite + math.exp(log_num) / den


def exp_sqrt_sum_oracle(alpha: float, N: int, terms: int) -> tuple[float, float]:
    """Explicit partial sum of ``exp(-alpha sqrt n)`` over ``terms`` indices from N, and a tail cap.

    The cap is ``int_{M-1}^inf exp(-alpha sqrt x) dx = 2 e^{-a} (a + 1) / alpha^2``
    with ``a = alpha sqrt(M - 1)`` and ``M = N + terms``, valid since the summand decreases.
    """
    if terms < 1:
        raise ValueError("terms must be >= 1")
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    partial = _sqrt_sum(-alpha, N, N + terms)
    a = alpha * math.sqrt(N + terms - 1)
    cap = 2.0 * math.exp(-a) * (a + 1.0) / (alpha * alpha)
    return partial, cap


def _complement(log_q: float, N: int) -> tuple[int, float, float, float]:
    K = _ceil_sqrt(N)
    finite = _sqrt_sum(log_q, N, K * K) if K * K > N else 0.0
    log_num, den = _block_tail(log_q, K)
    return K, finite, log_num, den


def _compose(finite: float, log_num: float, den: float, side: str) -> float:
    # exp(log_num)/den overflows harmlessly to inf -> bound clamps to 0
    try:
        comp = finite + math.exp(log_num - math.log(den))
    except OverflowError:
        comp = math.inf
    return 2.0 * comp if side == "both" else comp


def kl_measure_lower_bound(query: KLQuery, table: ConstantsTable | None = None) -> BoundReport:
    """Lower bound on the Gauss measure of ``KL^{side}(T, N)`` for the chosen variant."""
    table = table or constants_table()
    lq = log_xi(query.T, query.variant, table)
    K, finite, log_num, den = _complement(lq, int(query.N))
    comp = _compose(finite, log_num, den, query.side)
    raw = 1.0 - comp
    return BoundReport(
        xi=math.exp(lq),
        log_xi=lq,
        K=K,
        log_num=log_num,
        den=den,
        finite_sum=finite,
        complement=comp,
        lower_bound=min(1.0, max(0.0, raw)),
        vacuous=raw <= 0.0,
        inputs=query,
        flags=query.flags(table),
    )


def _square_bound(log_q: float, K: int, side: str) -> float:
    log_num, den = _block_tail(log_q, K)
    return max(0.0, 1.0 - _compose(0.0, log_num, den, side))


def monotone_threshold(log_q: float) -> int:
    """``ceil((3 Xi - 1) / (2 (1 - Xi)))``: the square-N bound increases in K from here on."""
    den = -math.expm1(log_q)
    return max(1, math.ceil((2.0 - 3.0 * den) / (2.0 * den)))


def min_n_for_estimate(
    T: float,
    est: float,
    variant: str = "M",
    side: str = "upper",
    table: ConstantsTable | None = None,
) -> int:
    """Minimal square ``N = K^2`` whose measure bound reaches ``est``."""
    if not 0.0 < est < 1.0:
        raise ValueError("est must lie in (0, 1)")
    if side not in SIDES:
        raise ValueError(f"side must be one of {SIDES}")
    lq = log_xi(T, variant, table)
    lo = monotone_threshold(lq)
    if _square_bound(lq, lo, side) >= est:
        hi = lo
    else:
        step = 1
        hi = lo + step
        while _square_bound(lq, hi, side) < est:
            lo = hi
            step *= 2
            hi = lo + step
            if hi > _K_LIMIT:
                raise UnreachableEstimate(f"est={est} not reached for K <= 2^62 (T={T})")
        # invariant: bound(lo) < est <= bound(hi)
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if _square_bound(lq, mid, side) >= est:
                hi = mid
            else:
                lo = mid
    return hi * hi


def min_t_for_estimate(
    N: int,
    est: float,
    variant: str = "M",
    side: str = "upper",
    table: ConstantsTable | None = None,
    t_hi: float = 1e3,
    rel_tol: float = 1e-10,
) -> float:
    """Smallest ``T`` for which the bound at fixed ``N`` reaches ``est`` (bisection; bound rises with T)."""
    if not 0.0 < est < 1.0:
        raise ValueError("est must lie in (0, 1)")

    def ok(T: float) -> bool:
        return kl_measure_lower_bound(KLQuery(variant, T, N, side), table).lower_bound >= est

    if not ok(t_hi):
        raise UnreachableEstimate(f"est={est} not reached at N={N} for T <= {t_hi}")
    lo, hi = 0.0, t_hi
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if mid > 0 and ok(mid):
            hi = mid
        else:
            lo = mid
    return hi
