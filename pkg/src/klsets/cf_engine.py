"""Continued-fraction expansion with certified quotients, and per-number diagnostics.

Indices follow the usual convention: quotient ``a_n`` for ``n >= 1``,
denominators ``q_0 = 1, q_1 = a_1, q_n = a_n q_{n-1} + q_{n-2}`` and numerators
``p_0 = 0, p_1 = 1``.  Python sequences in :class:`CFStatistics` hold index
``n`` at position ``n - 1``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping

import gmpy2

from .constants import ConstantsTable, constants_table, zeta

__all__ = [
    "ContinuedFraction",
    "CFStatistics",
    "DiophantineParams",
    "CertificationError",
    "InsufficientQuotients",
    "expand",
    "expand_rational",
    "expand_interval",
    "expand_digits",
    "statistics",
    "kl_membership",
    "diophantine_witness",
    "diophantine_convert",
    "kl_to_diophantine_tau",
    "excluded_measure",
    "synth_non_kl_diophantine",
    "pi_digits",
    "read_digits_file",
    "BUILTIN_PI_LIMIT",
    "DEFAULT_Q_BIT_CAP",
    "golden_interval",
    "iter_convergents",
]

BUILTIN_PI_LIMIT = 12_000
DEFAULT_Q_BIT_CAP = 1_000_000
GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0


class CertificationError(ValueError):
    """The input interval is too wide to certify even the first quotient."""


class InsufficientQuotients(ValueError):
    pass


def _json_int(a: int) -> int | str:
    # json goes through int.__repr__, which refuses > 4300 digits
    return a if a.bit_length() < 10_000 else gmpy2.mpz(a).digits(10)


@dataclass(frozen=True)
class ContinuedFraction:
    """Partial quotients ``a_1, ..., a_L`` of a number in (0, 1).

    ``log_quotients`` maps a 1-based index to ``ln a_n`` for quotients too large
    to hold exactly; the matching entry of ``quotients`` is 0.
    """

    quotients: tuple[int, ...]
    exact: bool
    certified: bool
    source: str
    log_quotients: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for i, a in enumerate(self.quotients, start=1):
            if a < 1 and i not in self.log_quotients:
                raise ValueError(f"quotient a_{i} = {a} is not a positive integer")
        if self.exact and len(self.quotients) >= 2 and self.quotients[-1] < 2:
            raise ValueError("exact expansions must end with a quotient >= 2")

    def __len__(self) -> int:
        return len(self.quotients)

    def log_quotient(self, n: int) -> float:
        if n in self.log_quotients:
            return self.log_quotients[n]
        return math.log(self.quotients[n - 1])

    def to_json(self) -> str:
        return json.dumps(
            {
                "quotients": [_json_int(a) for a in self.quotients],
                "exact": self.exact,
                "certified": self.certified,
                "source": self.source,
                "log_quotients": {str(k): v for k, v in sorted(self.log_quotients.items())},
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "ContinuedFraction":
        d = json.loads(text)
        return cls(
            quotients=tuple(int(gmpy2.mpz(a)) for a in d["quotients"]),
            exact=bool(d["exact"]),
            certified=bool(d["certified"]),
            source=str(d["source"]),
            log_quotients={int(k): float(v) for k, v in d.get("log_quotients", {}).items()},
        )


# -- expansion -------------------------------------------------------------------

def _as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(x)
    return Fraction(str(x)) if not isinstance(x, int) else Fraction(x)


def expand_rational(p: int, q: int) -> ContinuedFraction:
    """Exact Euclidean expansion of ``p/q`` in (0, 1)."""
    if q <= 0 or not 0 < p < q:
        raise ValueError(f"expected 0 < p/q < 1, got {p}/{q}")
    out = []
    num, den = p, q
    while num:
        a, r = divmod(den, num)
        out.append(a)
        den, num = num, r
    return ContinuedFraction(tuple(out), exact=True, certified=True, source=f"rational {p}/{q}")


def _interval_quotients(n_lo: int, d_lo: int, n_hi: int, d_hi: int, max_terms: int | None) -> list[int]:
    # Lockstep Euclid on both endpoints: a quotient is certified when both agree and
    # neither remainder vanishes, so both endpoints sit inside the same open cylinder.
    a_num, a_den = gmpy2.mpz(n_lo), gmpy2.mpz(d_lo)
    b_num, b_den = gmpy2.mpz(n_hi), gmpy2.mpz(d_hi)
    out: list[int] = []
    limit = max_terms if max_terms is not None else -1
    while a_num and b_num and len(out) != limit:
        qa, ra = gmpy2.f_divmod(a_den, a_num)
        qb, rb = gmpy2.f_divmod(b_den, b_num)
        if qa != qb or not ra or not rb:
            break
        out.append(int(qa))
        a_den, a_num = a_num, ra
        b_den, b_num = b_num, rb
    return out


def expand_interval(lo, hi, max_terms: int | None = None, source: str | None = None) -> ContinuedFraction:
    """Quotients shared by every number of the closed interval ``[lo, hi]``.

    Endpoints may be ``Fraction``, ``int`` ratios, decimal strings or ``Decimal``;
    they are converted to exact rationals.
    """
    lo, hi = _as_fraction(lo), _as_fraction(hi)
    if not (0 < lo < hi < 1):
        raise ValueError("interval must satisfy 0 < lo < hi < 1")
    out = _interval_quotients(lo.numerator, lo.denominator, hi.numerator, hi.denominator, max_terms)
    if not out and max_terms != 0:
        raise CertificationError("interval too wide to certify the first quotient")
    return ContinuedFraction(
        tuple(out), exact=False, certified=True, source=source or f"interval [{lo}, {hi}]"
    )


def _digits_interval(digits: str) -> tuple[Fraction, Fraction]:
    # "3" followed by fractional digits d_1..d_m: x - 3 in [0.d_1..d_m, + 10^-m]
    if len(digits) < 2:
        raise ValueError("need at least one fractional digit")
    frac = digits[1:]
    scale = 10 ** len(frac)
    v = int(gmpy2.mpz(frac))
    return Fraction(v, scale), Fraction(v + 1, scale)


def expand_digits(digits: str, max_terms: int | None = None) -> ContinuedFraction:
    """Expand the fractional part of a decimal digit stream such as ``"314159..."``.

    The leading digit is the integer part and is dropped; the value is bracketed
    by the truncation interval of the remaining digits.
    """
    lo, hi = _digits_interval(digits)
    if lo == 0:
        raise CertificationError("fractional part indistinguishable from 0")
    hi = min(hi, Fraction(1) - Fraction(1, 10 ** len(digits)))
    return expand_interval(lo, hi, max_terms, source=f"digit stream ({len(digits)} digits)")


def expand(source, max_terms: int | None = None) -> ContinuedFraction:
    """Dispatch on ``source``: ``Fraction``/``(p, q)`` rational, ``(lo, hi)`` interval, or digit string."""
    if isinstance(source, Fraction):
        return expand_rational(source.numerator, source.denominator)
    if isinstance(source, str):
        return expand_digits(source, max_terms)
    if isinstance(source, tuple) and len(source) == 2:
        a, b = source
        if isinstance(a, int) and isinstance(b, int):
            return expand_rational(a, b)
        return expand_interval(a, b, max_terms)
    raise TypeError(f"unsupported expansion source {type(source).__name__}")


# -- statistics --------------------------------------------------------------------

class _Neumaier:
    """Running compensated sum; ``add`` returns the current total."""

    __slots__ = ("total", "comp")

    def __init__(self) -> None:
        self.total = 0.0
        self.comp = 0.0

    def add(self, x: float) -> float:
        t = self.total + x
        if abs(self.total) >= abs(x):
            self.comp += (self.total - t) + x
        else:
            self.comp += (x - t) + self.total
        self.total = t
        return t + self.comp


@dataclass(frozen=True)
class CFStatistics:
    n_max: int
    quotients: tuple[int, ...]
    log_a: tuple[float, ...]
    log_M: tuple[float, ...]
    log_M_prime: tuple[float, ...]
    q: tuple[int, ...]
    p: tuple[int, ...]
    log_q: tuple[float, ...]
    deviation: tuple[float, ...]
    deviation_prime: tuple[float, ...]
    exact_until: int

    def S(self, n: int, variant: str = "M") -> float:
        return (self.log_M if variant == "M" else self.log_M_prime)[n - 1]


def statistics(
    cf: ContinuedFraction,
    n_max: int | None = None,
    kappa_table: ConstantsTable | None = None,
    q_bit_cap: int = DEFAULT_Q_BIT_CAP,
) -> CFStatistics:
    """Partial products, convergents and Khintchine deviations up to ``n_max``.

    Exact ``p_n, q_n`` are kept while ``q_n`` fits in ``q_bit_cap`` bits (and no
    log-only quotient has appeared); ``log_q`` is tracked throughout via
    ``ln q_n = ln q_{n-1} + ln(a_n + q_{n-2}/q_{n-1})``.
    """
    table = kappa_table or constants_table()
    n_max = len(cf) if n_max is None else n_max
    if n_max > len(cf):
        raise InsufficientQuotients(f"n_max={n_max} exceeds {len(cf)} available quotients")
    if n_max < 1:
        raise ValueError("n_max must be >= 1")

    log_a, log_M, log_Mp = [], [], []
    q_list, p_list, log_q = [], [], []
    dev, dev_p = [], []
    acc, acc_p = _Neumaier(), _Neumaier()
    q2, q1, p2, p1 = 0, 1, 1, 0  # q_{-1}, q_0, p_{-1}, p_0
    exact = True
    exact_until = 0
    lq = 0.0
    ratio = math.inf  # q_n / q_{n-1}
    for n in range(1, n_max + 1):
        la = cf.log_quotient(n)
        big = n in cf.log_quotients
        a = cf.quotients[n - 1]
        log_a.append(la)
        s = acc.add(la)
        # ln(1 + a) = ln a + log1p(1/a)
        sp = acc_p.add(la + math.log1p(math.exp(-la)))
        log_M.append(s)
        log_Mp.append(sp)
        dev.append(abs(s / n - table.kappa))
        dev_p.append(abs(sp / n - table.kappa_prime))
        if exact and not big:
            q2, q1 = q1, a * q1 + q2
            p2, p1 = p1, a * p1 + p2
            q_list.append(q1)
            p_list.append(p1)
            lq = math.log(q1)
            try:
                ratio = q1 / q2
            except OverflowError:
                ratio = math.inf
            exact_until = n
            if q1.bit_length() > q_bit_cap:
                exact = False
        else:
            exact = False
            inv = 1.0 / ratio
            if big:
                lq += la + math.log1p(inv * math.exp(-la))
                ratio = math.exp(la) + inv if la < 700.0 else math.inf
            else:
                ratio = a + inv
                lq += math.log(ratio)
        log_q.append(lq)
    return CFStatistics(
        n_max=n_max,
        quotients=tuple(cf.quotients[:n_max]),
        log_a=tuple(log_a),
        log_M=tuple(log_M),
        log_M_prime=tuple(log_Mp),
        q=tuple(q_list),
        p=tuple(p_list),
        log_q=tuple(log_q),
        deviation=tuple(dev),
        deviation_prime=tuple(dev_p),
        exact_until=exact_until,
    )


def kl_membership(
    stats: CFStatistics,
    T: float,
    variant: str = "M",
    side: str = "upper",
    table: ConstantsTable | None = None,
) -> tuple[list[bool], int | None]:
    """Per-index KL inequality; returns ``(per_n, first_violation)`` with 1-based index."""
    if not T > 0:
        raise ValueError("T must be positive")
    if side not in ("upper", "lower"):
        raise ValueError("side must be 'upper' or 'lower'")
    table = table or constants_table()
    k = table.kappa_for(variant)
    logs = stats.log_M if variant == "M" else stats.log_M_prime
    if side == "upper":
        per_n = [s <= (k + T) * n for n, s in enumerate(logs, start=1)]
    else:
        per_n = [s >= (k - T) * n for n, s in enumerate(logs, start=1)]
    first = next((n for n, ok in enumerate(per_n, start=1) if not ok), None)
    return per_n, first


# -- Diophantine diagnostics -------------------------------------------------------

@dataclass(frozen=True)
class DiophantineParams:
    C: float
    tau: float

    def __post_init__(self) -> None:
        if not self.C > 0:
            raise ValueError("C must be positive")
        if not self.tau >= 1:
            raise ValueError("tau must be >= 1")


def diophantine_witness(
    stats: CFStatistics, params: DiophantineParams, n_max: int | None = None
) -> tuple[bool, int | None]:
    """Check ``a_{n+1} <= C^{-1} q_n^{tau-1}`` for ``0 <= n <= n_max`` in log space."""
    n_max = stats.n_max - 1 if n_max is None else n_max
    if n_max > stats.n_max - 1 or n_max < 0:
        raise InsufficientQuotients(f"n_max={n_max} needs a_{n_max + 1}; have {stats.n_max} quotients")
    log_inv_c = -math.log(params.C)
    slack = 1e-12
    for n in range(0, n_max + 1):
        log_qn = 0.0 if n == 0 else stats.log_q[n - 1]
        if stats.log_a[n] > log_inv_c + (params.tau - 1.0) * log_qn + slack:
            return False, n
    return True, None


def diophantine_convert(C: float) -> float:
    """Diophantine constant obtained from the quotient estimate with constant ``C``."""
    if not C > 0:
        raise ValueError("C must be positive")
    return C / (1.0 + 2.0 * C)


def kl_to_diophantine_tau(
    kappa: float | None = None,
    T: float | None = None,
    T_minus: float | None = None,
    T_plus: float | None = None,
) -> float:
    """Diophantine exponent implied by KL membership.

    Upper-only mode (``T`` given): ``1 + (kappa + T)/ln(phi)``.
    Two-sided mode (``T_minus`` and ``T_plus``): ``1 + (T_plus + T_minus)/ln(phi)``.
    """
    log_phi = math.log(GOLDEN)
    if T is not None:
        if T < 0:
            raise ValueError("T must be non-negative")
        k = constants_table().kappa if kappa is None else kappa
        return 1.0 + (k + T) / log_phi
    if T_minus is None or T_plus is None:
        raise ValueError("give T, or both T_minus and T_plus")
    if T_minus < 0 or T_plus < 0:
        raise ValueError("rates must be non-negative")
    return 1.0 + (T_plus + T_minus) / log_phi


def excluded_measure(params: DiophantineParams) -> float:
    """Lebesgue bound ``2 C zeta(tau)`` on the non-(C, tau)-Diophantine part of [0, 1]."""
    if not params.tau > 1:
        raise ValueError("tau must exceed 1")
    return 2.0 * params.C * zeta(params.tau)


# -- synthetic non-KL Diophantine number -------------------------------------------

def _floor_exp(x_exact: "gmpy2.mpfr", bits: int) -> int:
    """``floor(e^x)`` with enough working precision that the floor is unambiguous."""
    prec = bits + 64
    while True:
        with gmpy2.context(precision=prec, round=gmpy2.RoundDown):
            lo = gmpy2.exp(x_exact)
        with gmpy2.context(precision=prec, round=gmpy2.RoundUp):
            hi = gmpy2.exp(x_exact)
        f_lo, f_hi = int(gmpy2.floor(lo)), int(gmpy2.floor(hi))
        if f_lo == f_hi:
            return f_lo
        prec *= 2


def synth_non_kl_diophantine(
    s: float, delta: float, n_max: int, bit_cap: int = 100_000
) -> ContinuedFraction:
    """Quotients ``a_j = floor(e^{j^s})`` at ``j = floor((1+delta)^n)``, else 1.

    Indices hit by several ``n`` get ``a_j = 1``.  Quotients whose exponent
    ``j^s`` exceeds ``bit_cap * ln 2`` are stored only as ``ln a_j = j^s``
    (the dropped correction ``ln(floor(e^x)/e^x)`` is below ``e^{-x}``).
    """
    if not s > 1:
        raise ValueError("s must exceed 1")
    if not delta > 0:
        raise ValueError("delta must be positive")
    hits: dict[int, int] = {}
    n = 0
    while True:
        d = math.floor((1.0 + delta) ** n)
        if d > n_max:
            break
        hits[d] = hits.get(d, 0) + 1
        n += 1
    quotients = []
    logs: dict[int, float] = {}
    for j in range(1, n_max + 1):
        if hits.get(j, 0) != 1:
            quotients.append(1)
            continue
        x = float(j) ** s
        if x > bit_cap * math.log(2.0):
            quotients.append(0)
            logs[j] = x
            continue
        bits = int(x / math.log(2.0)) + 8
        with gmpy2.context(precision=bits + 128):
            xe = gmpy2.mpfr(j) ** gmpy2.mpfr(s)
        quotients.append(_floor_exp(xe, bits))
    return ContinuedFraction(
        tuple(quotients),
        exact=False,
        certified=True,
        source=f"synthetic non-KL Diophantine s={s} delta={delta}",
        log_quotients=logs,
    )


# -- digits of pi ------------------------------------------------------------------

def _arctan_inv(x: int, scale: int) -> tuple[int, int]:
    """``scale * arctan(1/x)`` truncated termwise; returns ``(value, max_abs_error)``."""
    total = 0
    power = scale // x
    x2 = x * x
    k = 0
    sign = 1
    terms = 0
    while power:
        total += sign * (power // (2 * k + 1))
        power //= x2
        sign = -sign
        k += 1
        terms += 1
    # each floor loses < 1 and the first omitted term is < 1 unit
    return total, 2 * terms + 1


def pi_digits(count: int, source: str = "builtin", path: str | Path | None = None) -> str:
    """First ``count`` decimal digits of pi, leading ``3`` included.

    ``builtin`` uses Machin's formula ``pi = 16 atan(1/5) - 4 atan(1/239)`` in
    fixed-point integers; guard digits are raised until the error interval
    cannot change any returned digit.  ``file`` reads them from ``path``.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if source == "file":
        if path is None:
            raise ValueError("file source requires a path")
        digits = read_digits_file(path)
        if len(digits) < count:
            raise InsufficientQuotients(f"digits file holds {len(digits)} digits, {count} requested")
        return digits[:count]
    if source != "builtin":
        raise ValueError(f"unknown digits source {source!r}")
    if count > BUILTIN_PI_LIMIT:
        raise ValueError(f"builtin pi is limited to {BUILTIN_PI_LIMIT} digits; use a digits file")
    guard = 10
    while True:
        scale = 10 ** (count - 1 + guard)
        a, ea = _arctan_inv(5, scale)
        b, eb = _arctan_inv(239, scale)
        v = 16 * a - 4 * b
        err = 16 * ea + 4 * eb
        unit = 10**guard
        lo, hi = (v - err) // unit, (v + err) // unit
        if lo == hi:
            return gmpy2.mpz(lo).digits(10)
        guard += 10


def read_digits_file(path: str | Path) -> str:
    """Parse ASCII decimal digits, tolerating a ``3.`` prefix and any whitespace."""
    text = "".join(Path(path).read_text().split())
    if text.startswith("3."):
        text = "3" + text[2:]
    if not text or not text.isdigit():
        raise ValueError(f"{path}: expected decimal digits")
    return text


def golden_interval(eps: Fraction = Fraction(1, 10**30)) -> tuple[Fraction, Fraction]:
    """Rational interval around ``(sqrt 5 - 1)/2``, used for tests and demos."""
    scale = 10**60
    root = math.isqrt(5 * scale * scale)
    x = Fraction(root - scale, 2 * scale)
    return x - eps, x + eps


def iter_convergents(quotients: Iterable[int]) -> Iterable[tuple[int, int]]:
    p2, p1, q2, q1 = 1, 0, 0, 1
    for a in quotients:
        p2, p1 = p1, a * p1 + p2
        q2, q1 = q1, a * q1 + q2
        yield p1, q1
