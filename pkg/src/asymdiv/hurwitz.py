"""Real-argument Hurwitz zeta and digamma via Euler-Maclaurin.

Only real s is supported; every value the main term needs sits at a real
point (b/a, a/b, 0).  Bernoulli numbers are built once, exactly, from the
standard recurrence and cached as floats.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache


@dataclass(frozen=True)
class PrecisionConfig:
    target_rel_error: float = 1e-13
    euler_maclaurin_terms: int = 12
    shift_threshold: int = 16

    def __post_init__(self):
        if not 1e-16 < self.target_rel_error < 1e-6:
            raise ValueError("target_rel_error must lie in (1e-16, 1e-6)")
        if not 1 <= self.euler_maclaurin_terms <= 30:
            raise ValueError("euler_maclaurin_terms must be in [1, 30]")
        if self.shift_threshold < 1:
            raise ValueError("shift_threshold must be positive")


DEFAULT_PRECISION = PrecisionConfig()


@lru_cache(maxsize=None)
def _bernoulli_exact(m: int) -> tuple:
    # B_0..B_m with the B_1 = -1/2 convention (only even ones are used)
    B = [Fraction(0)] * (m + 1)
    B[0] = Fraction(1)
    for n in range(1, m + 1):
        acc = Fraction(0)
        for k in range(n):
            acc += math.comb(n + 1, k) * B[k]
        B[n] = -acc / (n + 1)
    return tuple(B)


@lru_cache(maxsize=None)
def bernoulli_even_over_factorial(K: int) -> tuple:
    """B_{2k}/(2k)! for k = 1..K+1 as floats (last one bounds the remainder)."""
    B = _bernoulli_exact(2 * K + 2)
    return tuple(float(B[2 * k] / math.factorial(2 * k)) for k in range(1, K + 2))


def _em_tail(s: float, w: float, K: int) -> tuple[float, float]:
    """Euler-Maclaurin tail sum_{n>=0} (w+n)^-s minus nothing, and the first omitted term.

    Returns (value, bound) where value approximates sum_{n>=0}(w+n)^{-s}
    for w large, continued analytically in s.
    """
    coef = bernoulli_even_over_factorial(K)
    wl = math.log(w)
    head = [math.exp((1.0 - s) * wl) / (s - 1.0), 0.5 * math.exp(-s * wl)]
    # rising factorial s(s+1)...(s+2k-2)
    poch = s
    wpow = math.exp(-(s + 1.0) * wl)
    inv_w2 = 1.0 / (w * w)
    terms = []
    for k in range(1, K + 1):
        terms.append(coef[k - 1] * poch * wpow)
        poch *= (s + 2 * k - 1) * (s + 2 * k)
        wpow *= inv_w2
    omitted = abs(coef[K] * poch * wpow)
    return math.fsum(head + terms), omitted


def hurwitz_zeta(s: float, alpha: float, cfg: PrecisionConfig = DEFAULT_PRECISION) -> float:
    """zeta(s, alpha) = sum_{n>=0} (n+alpha)^{-s}, continued to all real s != 1."""
    s = float(s)
    alpha = float(alpha)
    if s == 1.0:
        raise ValueError("hurwitz_zeta has a pole at s = 1")
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    if s == 0.0:
        return 0.5 - alpha
    K = cfg.euler_maclaurin_terms
    N = cfg.shift_threshold
    # grow the shift until the first omitted Bernoulli term is below target
    while True:
        tail, omitted = _em_tail(s, N + alpha, K)
        direct = [math.exp(-s * math.log(n + alpha)) for n in range(N)]
        value = math.fsum(direct + [tail])
        if omitted <= cfg.target_rel_error * 0.01 * max(abs(value), 1e-300) or N > 1 << 16:
            return value
        N *= 2


def zeta0_closed(alpha: float) -> float:
    """zeta(0, alpha) = 1/2 - alpha."""
    return 0.5 - alpha


def digamma(alpha: float, cfg: PrecisionConfig = DEFAULT_PRECISION) -> float:
    """Digamma by upward recurrence followed by the asymptotic series."""
    x = float(alpha)
    if x <= 0.0:
        raise ValueError("digamma is only implemented for alpha > 0")
    shift = []
    while x < cfg.shift_threshold:
        shift.append(-1.0 / x)
        x += 1.0
    K = cfg.euler_maclaurin_terms
    B = _bernoulli_exact(2 * K)
    inv_x2 = 1.0 / (x * x)
    p = inv_x2
    series = [math.log(x), -0.5 / x]
    for k in range(1, K + 1):
        series.append(-float(B[2 * k]) / (2 * k) * p)
        p *= inv_x2
    return math.fsum(series + shift)


def periodic_zeta(s: float, j: int, M: int, cfg: PrecisionConfig = DEFAULT_PRECISION) -> complex:
    """sum_{k>=1} k^{-s} e(k j / M) for s > 1, via Hurwitz zeta over residues mod M."""
    if s <= 1.0:
        raise ValueError("periodic_zeta needs s > 1")
    re, im = [], []
    scale = M ** (-s)
    for m in range(1, M + 1):
        z = scale * hurwitz_zeta(s, m / M, cfg)
        ang = 2.0 * math.pi * ((m * j) % M) / M
        re.append(z * math.cos(ang))
        im.append(z * math.sin(ang))
    return complex(math.fsum(re), math.fsum(im))
