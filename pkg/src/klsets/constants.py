"""Universal constants of the Khintchine-Levy measure bounds.

Every series here has the shape ``sum_r (ln(r + c))**k * H(r)`` with the
Gauss-Kuzmin weight ``H(r) = log2(1 + 1/(r(r+2)))``.  It is summed directly up
to a cutoff ``R`` and the tail is closed with an Euler-Maclaurin step: the
integral of the continuous summand (adaptive quadrature in ``u = ln x``) plus
half the boundary term.  The cutoff is raised until the analytic bound on the
Euler-Maclaurin remainder drops below the requested tolerance.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize

__all__ = [
    "LAMBDA0",
    "DEFAULT_TOL",
    "ConstantsTable",
    "special_function",
    "eta",
    "zeta",
    "kappa",
    "r_bar",
    "lambda_bar",
    "psi_coefficient",
    "moment_series",
    "moment_bound",
    "series_with_error",
    "constants_table",
]

#: Gauss-Kuzmin-Wirsing constant (subdominant eigenvalue of the Gauss-Kuzmin
#: operator), literature value: Wirsing (1974); OEIS A038517.
LAMBDA0 = 0.3036630028987327

DEFAULT_TOL = 1e-12

_LN2 = math.log(2.0)
_VARIANTS = ("M", "Mprime")
_MAX_CUTOFF = 1 << 22


def _check_variant(variant: str) -> None:
    if variant not in _VARIANTS:
        raise ValueError(f"variant must be one of {_VARIANTS}, got {variant!r}")


# -- Dirichlet eta / Riemann zeta ------------------------------------------------

def _eta_terms(s: float, tol: float) -> int:
    # CVZ acceleration: |error| <= 2 / (3 + sqrt 8)**n for totally monotone terms
    rate = 3.0 + math.sqrt(8.0)
    return max(4, math.ceil(math.log(2.0 / tol) / math.log(rate)) + 1)


def eta(s: float, tol: float = 1e-16) -> float:
    """Dirichlet eta ``sum_{n>=1} (-1)**(n-1) n**-s`` for real ``s > 0``.

    The alternating series is summed with the Cohen-Villegas-Zagier
    acceleration, whose error is bounded by ``2 / (3 + sqrt 8)**n`` after
    ``n`` terms because ``n**-s`` is a totally monotone sequence.
    """
    if not s > 0:
        raise ValueError(f"eta requires s > 0, got {s}")
    n = _eta_terms(s, tol)
    d = (3.0 + math.sqrt(8.0)) ** n
    d = (d + 1.0 / d) / 2.0
    b = -1.0
    c = -d
    terms = []
    for k in range(n):
        c = b - c
        terms.append(c * (k + 1.0) ** (-s))
        b = (k + n) * (k - n) * b / ((k + 0.5) * (k + 1.0))
    return math.fsum(terms) / d


def zeta(s: float) -> float:
    """Riemann zeta for real ``s > 1`` via ``eta(s) / (1 - 2**(1 - s))``."""
    if not s > 1:
        raise ValueError(f"zeta requires s > 1, got {s}")
    return eta(s) / -math.expm1((1.0 - s) * _LN2)


def special_function(kind: str, s: float) -> float:
    if kind == "eta":
        return eta(s)
    if kind == "zeta":
        return zeta(s)
    raise ValueError(f"unknown special function {kind!r}")


# -- Gauss-Kuzmin weighted series -----------------------------------------------

def _summand(r: np.ndarray, k: int, shift: int) -> np.ndarray:
    lg = np.log(r + shift)
    w = np.log1p(1.0 / (r * (r + 2.0))) / _LN2
    return lg**k * w


def _log_integrand(u: float, k: int, shift: int) -> float:
    # ln of f(e^u) e^u, with f(x) = (ln(x+shift))^k H(x); scalar, called by quad
    eu = math.exp(-u)
    lg = u + math.log1p(shift * eu)
    # 1/(x(x+2)) = e^{-2u}/(1+2e^{-u}); log1p(y) ~ y for tiny y
    log_y = -2.0 * u - math.log1p(2.0 * eu)
    y = math.exp(log_y)
    # ln(log1p(y)) = ln y + ln(log1p(y)/y); the ratio is 1 - y/2 + O(y^2)
    ratio = math.log1p(y) / y if y > 1e-8 else 1.0 - 0.5 * y
    log_h = log_y + math.log(ratio) - math.log(_LN2)
    if k == 0:
        return log_h + u
    if lg <= 0.0:
        return -math.inf
    return k * math.log(lg) + log_h + u


def _tail_integral(R: float, k: int, shift: int) -> tuple[float, float]:
    lo = math.log(R)
    peak = max(lo, float(k))
    hi = lo + k + 60.0 + 10.0 * math.sqrt(k + 1.0)
    f = lambda u: math.exp(_log_integrand(u, k, shift))
    total, err = 0.0, 0.0
    for a, b in ((lo, peak), (peak, hi)):
        if b > a:
            v, e = integrate.quad(f, a, b, epsabs=0.0, epsrel=1e-13, limit=500)
            total += v
            err += e
    return total, err


def _derivative_sup(R: float, k: int) -> float:
    """Upper bound on ``sup_{x >= R} |f'(x)|``.

    Uses ``|H| <= 1/(ln2 x^2)``, ``|H'| <= 2/(ln2 x^3)`` and ``ln(x+c) <= u + ln 2``
    with ``u = ln x``; the resulting log-bound is concave in ``u``.
    """
    a = _LN2

    def log_b(u: float) -> float:
        lead = (k - 1) * math.log(u + a) if k > 1 else 0.0
        return lead + math.log(k + 2.0 * (u + a)) - 3.0 * u - math.log(_LN2)

    def slope(u: float) -> float:
        return (k - 1) / (u + a) + 2.0 / (k + 2.0 * (u + a)) - 3.0

    u0 = math.log(R)
    if slope(u0) > 0:
        u_hi = u0 + 1.0
        while slope(u_hi) > 0:
            u_hi = 2.0 * u_hi + 1.0
        u0 = optimize.brentq(slope, u0, u_hi)
    return math.exp(log_b(u0))


def series_with_error(k: int, shift: int, tol: float, relative: bool = False) -> tuple[float, float]:
    """Sum ``sum_{r>=1} (ln(r + shift))**k H(r)``; returns ``(value, error_bound)``.

    ``tol`` is absolute unless ``relative`` is set.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    R = 64
    parts = [math.fsum(_summand(np.arange(1, R, dtype=float), k, shift))]
    while True:
        em_bound = _derivative_sup(R, k) / 2.0
        head = math.fsum(parts)
        tail, quad_err = _tail_integral(R, k, shift)
        boundary = float(_summand(np.array([float(R)]), k, shift)[0]) / 2.0
        value = math.fsum([head, tail, boundary])
        err = em_bound + quad_err
        target = tol * abs(value) if relative else tol
        if err <= target:
            return value, err
        if R >= _MAX_CUTOFF:
            raise ArithmeticError(f"series cutoff exceeded {_MAX_CUTOFF} at tol={tol}")
        parts.append(math.fsum(_summand(np.arange(R, 2 * R, dtype=float), k, shift)))
        R *= 2


def kappa(variant: str = "M", tol: float = DEFAULT_TOL) -> float:
    """Mean digit log: ``sum log2(r) ln(1 + 1/(r(r+2)))``, or with ``r + 1`` for Mprime."""
    _check_variant(variant)
    if not tol > 0:
        raise ValueError("tol must be positive")
    # log2(r+c) ln(1+..) == ln(r+c) log2(1+..)
    value, _ = series_with_error(1, 0 if variant == "M" else 1, tol)
    return value


def r_bar(variant: str = "M") -> float:
    _check_variant(variant)
    if variant == "M":
        return math.sqrt(3.0 / (2.0 * _LN2))
    return math.sqrt(eta(3.0) / _LN2)


def lambda_bar(lambda0: float = LAMBDA0) -> float:
    """Bound on the phi-mixing sum of square roots for the digit sequence."""
    if not 0.0 <= lambda0 < 1.0:
        raise ValueError("lambda0 must lie in [0, 1)")
    a = math.sqrt(_LN2 - 0.5)
    b = math.sqrt(math.pi**2 * _LN2 / 12.0 - 0.5)
    return 1.0 + a + b / (1.0 - math.sqrt(lambda0))


def psi_coefficient(n: int, lambda0: float = LAMBDA0) -> float:
    """Upper bound on the n-th psi-mixing coefficient of the partial quotients."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if n == 1:
        return 2.0 * _LN2 - 1.0
    psi2 = math.pi**2 * _LN2 / 6.0 - 1.0
    return psi2 * lambda0 ** (n - 2)


def moment_series(variant: str, k: int, tol: float = 1e-10) -> float:
    """``E_gamma |X_1|**k`` for ``X_1 = ln a_1`` (M) or ``ln(1 + a_1)`` (Mprime).

    ``tol`` is a relative tolerance; the summand is handled in log space so
    large ``k`` does not overflow.
    """
    _check_variant(variant)
    if k < 2:
        raise ValueError("k must be >= 2")
    value, _ = series_with_error(k, 0 if variant == "M" else 1, tol, relative=True)
    return value


def moment_bound(variant: str, k: int) -> float:
    """``r_bar**2 * k!``, the sharper form of the moment estimate."""
    return r_bar(variant) ** 2 * math.factorial(k)


@dataclass(frozen=True)
class ConstantsTable:
    kappa: float
    kappa_prime: float
    r_bar: float
    r_bar_prime: float
    lambda_bar: float
    psi1: float
    psi2: float
    lambda0: float
    tol: float

    def kappa_for(self, variant: str) -> float:
        _check_variant(variant)
        return self.kappa if variant == "M" else self.kappa_prime

    def r_bar_for(self, variant: str) -> float:
        _check_variant(variant)
        return self.r_bar if variant == "M" else self.r_bar_prime

    def to_dict(self) -> dict:
        return asdict(self)

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@lru_cache(maxsize=None)
def constants_table(tol: float = DEFAULT_TOL) -> ConstantsTable:
    """Build (once per tolerance) the immutable table of universal constants."""
    return ConstantsTable(
        kappa=kappa("M", tol),
        kappa_prime=kappa("Mprime", tol),
        r_bar=r_bar("M"),
        r_bar_prime=r_bar("Mprime"),
        lambda_bar=lambda_bar(),
        psi1=psi_coefficient(1),
        psi2=psi_coefficient(2),
        lambda0=LAMBDA0,
        tol=tol,
    )
