"""Seeded Monte Carlo over the Gauss measure.

A Gauss-distributed point is ``x = 2**u - 1`` with ``u`` uniform on (0, 1).
Each draw fixes ``u`` to a dyadic cell ``[k, k+1) / 2**bits`` and returns the
image interval with outward rounding, so the certified quotients are exactly
those of a genuinely Gauss-distributed point inside the cell.  Trial ``i`` of a
run with seed ``s`` draws from ``SeedSequence(s, spawn_key=(i,))``; thread
count never changes the result.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from fractions import Fraction

import gmpy2
import numpy as np
from scipy import stats as sstats

from .bounds import xi
from .cf_engine import _interval_quotients
from .constants import constants_table

__all__ = [
    "LEVY",
    "SampleConfig",
    "SimulationResult",
    "InsufficientSamples",
    "default_bits",
    "trial_rng",
    "gauss_interval",
    "sample_gauss",
    "sample_quotients",
    "sample_many",
    "estimate_kappa",
    "estimate_tail",
    "gauss_cdf_ks",
    "digit_law_chisquare",
]

#: Levy constant pi^2 / (12 ln 2): a.e. growth rate of ln q_n.
LEVY = math.pi**2 / (12.0 * math.log(2.0))
_SAFETY = 1.2


class InsufficientSamples(RuntimeError):
    pass


def default_bits(n: int) -> int:
    """Cell precision for ``n`` certified digits.

    Certifying ``a_1..a_n`` needs the cell to fit in a rank-n cylinder, whose
    width is about ``q_n^-2 = e^{-2 n LEVY}``.
    """
    return math.ceil(_SAFETY * 2.0 * n * LEVY / math.log(2.0)) + 64


@dataclass(frozen=True)
class SampleConfig:
    trials: int
    n: int
    seed: int = 0
    bits: int | None = None
    threads: int = 1

    def __post_init__(self) -> None:
        if self.trials < 1 or self.n < 1 or self.threads < 1:
            raise ValueError("trials, n and threads must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.bits is not None and self.bits < 8:
            raise ValueError("bits must be >= 8")

    @property
    def precision(self) -> int:
        return self.bits if self.bits is not None else default_bits(self.n)


@dataclass(frozen=True)
class SimulationResult:
    estimate: float
    stderr: float
    ci95: tuple[float, float]
    trials_used: int
    short_samples: int
    bound: float | None
    seed: int
    within_bound: bool | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ci95"] = list(self.ci95)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(trial,))))


def gauss_interval(k: int, bits: int) -> tuple[Fraction, Fraction]:
    """Outward-rounded image of the cell ``u in [k, k+1) / 2**bits`` under ``2**u - 1``."""
    if not 0 <= k < 1 << bits:
        raise ValueError("cell index out of range")
    prec = bits + 64
    with gmpy2.context(precision=prec, round=gmpy2.RoundDown):
        lo = gmpy2.exp2(gmpy2.mpfr(k) / gmpy2.mpfr(2) ** bits) - 1
    with gmpy2.context(precision=prec, round=gmpy2.RoundUp):
        hi = gmpy2.exp2(gmpy2.mpfr(k + 1) / gmpy2.mpfr(2) ** bits) - 1
    return Fraction(*lo.as_integer_ratio()), Fraction(*hi.as_integer_ratio())


def sample_gauss(rng: np.random.Generator, bits: int) -> tuple[Fraction, Fraction]:
    """Certified interval containing one Gauss-distributed point of (0, 1).

    The cell touching 0 (``k = 0``) is redrawn.
    """
    if bits < 8:
        raise ValueError("bits must be >= 8")
    nbytes = (bits + 7) // 8
    extra = 8 * nbytes - bits
    while True:
        k = int.from_bytes(rng.bytes(nbytes), "little") >> extra
        if k:
            return gauss_interval(k, bits)


def sample_quotients(config: SampleConfig, trial: int) -> list[int] | None:
    """First ``config.n`` quotients of trial ``trial``; ``None`` marks a short sample."""
    rng = trial_rng(config.seed, trial)
    lo, hi = sample_gauss(rng, config.precision)
    qs = _interval_quotients(lo.numerator, lo.denominator, hi.numerator, hi.denominator, config.n)
    return qs if len(qs) == config.n else None


def _trial_logs(args: tuple[SampleConfig, int]) -> tuple[float, float] | None:
    config, trial = args
    qs = sample_quotients(config, trial)
    if qs is None:
        return None
    s = math.fsum(math.log(a) for a in qs)
    sp = math.fsum(math.log1p(a) for a in qs)
    return s, sp


def sample_many(config: SampleConfig) -> list[tuple[float, float] | None]:
    """``(S_n, S'_n)`` per trial in trial order (``None`` for short samples)."""
    jobs = [(config, i) for i in range(config.trials)]
    if config.threads == 1:
        return [_trial_logs(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=config.threads) as pool:
        return list(pool.map(_trial_logs, jobs, chunksize=max(1, len(jobs) // (8 * config.threads))))


def _summarize(values: list[float], short: int, trials: int, binary: bool = False) -> tuple[float, float]:
    m = len(values)
    if m == 0 or short > trials / 2:
        raise InsufficientSamples(f"{short} of {trials} samples failed certification")
    est = math.fsum(values) / m
    if binary:
        se = math.sqrt(est * (1.0 - est) / m)
    else:
        se = float(np.std(values, ddof=1)) / math.sqrt(m) if m > 1 else 0.0
    return est, se


def estimate_kappa(config: SampleConfig, variant: str = "M") -> SimulationResult:
    """Monte Carlo mean of ``S_n / n`` (or ``S'_n / n``) against kappa (or kappa')."""
    raw = sample_many(config)
    idx = 0 if variant == "M" else 1
    vals = [r[idx] / config.n for r in raw if r is not None]
    short = sum(r is None for r in raw)
    est, se = _summarize(vals, short, config.trials)
    bound = constants_table().kappa_for(variant)
    return SimulationResult(
        estimate=est,
        stderr=se,
        ci95=(est - 1.96 * se, est + 1.96 * se),
        trials_used=len(vals),
        short_samples=short,
        bound=bound,
        seed=config.seed,
        within_bound=abs(est - bound) <= 3.0 * se if se > 0 else None,
    )


def estimate_tail(config: SampleConfig, T: float, variant: str = "M", side: str = "upper") -> SimulationResult:
    """Empirical ``gamma(+-(S_n - n kappa) >= n T)`` against ``Xi(T)^sqrt(n)``."""
    if side not in ("upper", "lower"):
        raise ValueError("side must be 'upper' or 'lower'")
    if not T > 0:
        raise ValueError("T must be positive")
    raw = sample_many(config)
    idx = 0 if variant == "M" else 1
    k = constants_table().kappa_for(variant)
    sign = 1.0 if side == "upper" else -1.0
    hits = [1.0 if sign * (r[idx] - config.n * k) >= config.n * T else 0.0 for r in raw if r is not None]
    short = sum(r is None for r in raw)
    est, se = _summarize(hits, short, config.trials, binary=True)
    bound = xi(T, variant) ** math.sqrt(config.n)
    return SimulationResult(
        estimate=est,
        stderr=se,
        ci95=(max(0.0, est - 1.96 * se), min(1.0, est + 1.96 * se)),
        trials_used=len(hits),
        short_samples=short,
        bound=bound,
        seed=config.seed,
        within_bound=est <= bound + 3.0 * se,
    )


def _midpoints(draws: int, seed: int, bits: int) -> np.ndarray:
    rng = trial_rng(seed, 0)
    out = np.empty(draws)
    for i in range(draws):
        lo, hi = sample_gauss(rng, bits)
        out[i] = float((lo + hi) / 2)
    return out


def gauss_cdf_ks(draws: int = 100_000, seed: int = 0, bits: int = 64):
    """KS test of sampled points against the Gauss CDF ``log2(1 + x)``."""
    xs = _midpoints(draws, seed, bits)
    return sstats.kstest(xs, lambda x: np.log1p(x) / math.log(2.0))


def digit_law_chisquare(trials: int = 100_000, seed: int = 0, r_max: int = 20, bits: int = 64):
    """Chi-square test of sampled ``a_1`` against ``P(a_1 = r) = log2(1 + 1/(r(r+2)))``.

    Digits above ``r_max`` are pooled into one tail cell.  Returns
    ``(statistic, pvalue, counts)``.
    """
    config = SampleConfig(trials=trials, n=1, seed=seed, bits=bits)
    counts = np.zeros(r_max + 1)
    for i in range(trials):
        qs = sample_quotients(config, i)
        if qs is None:
            continue
        a = qs[0]
        counts[min(a, r_max + 1) - 1] += 1
    r = np.arange(1, r_max + 1, dtype=float)
    probs = np.log1p(1.0 / (r * (r + 2.0))) / math.log(2.0)
    # P(a_1 > r_max) = log2((r_max + 2)/(r_max + 1))
    probs = np.append(probs, math.log2((r_max + 2) / (r_max + 1)))
    expected = probs * counts.sum()
    res = sstats.chisquare(counts, expected)
    return float(res.statistic), float(res.pvalue), counts
