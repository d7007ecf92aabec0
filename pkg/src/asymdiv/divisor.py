"""The congruence-restricted divisor function tau_{a,b} and the weights g, g*.

A decomposition of n is a pair (h, r) with n = h**a * r**b.  Its weight is
h**(-(a+2b)/(2(a+b))) * r**(-(2a+b)/(2(a+b))); g(n) sums the weights and
g*(n) sums products of weights over pairs of decompositions, twisted by
cos(2 pi ((r2-r1) l2/M2 + (h2-h1) l1/M1)).  Writing
G(n) = sum w * e(h l1/M1 + r l2/M2) gives g*(n) = |G(n)|**2, which is how
the bulk routines evaluate it.
"""
from __future__ import annotations

import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterator

import numpy as np

from .exact_arith import ikth_root

SEGMENT = 1 << 24
MAX_SIEVE = 1 << 31


class BudgetError(ValueError):
    """A requested size exceeds a configured budget."""


@dataclass(frozen=True)
class Params:
    a: int
    b: int
    M1: int = 1
    M2: int = 1
    l1: int = 1
    l2: int = 1
    ordered: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self):
        for name in ("a", "b", "M1", "M2", "l1", "l2"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
        if math.gcd(self.a, self.b) != 1:
            raise ValueError(f"gcd(a, b) must be 1, got gcd({self.a}, {self.b}) = {math.gcd(self.a, self.b)}")
        if self.ordered and self.a > self.b:
            raise ValueError(f"need a <= b, got a={self.a}, b={self.b}")
        if not 1 <= self.l1 <= self.M1:
            raise ValueError(f"need 1 <= l1 <= M1, got l1={self.l1}, M1={self.M1}")
        if not 1 <= self.l2 <= self.M2:
            raise ValueError(f"need 1 <= l2 <= M2, got l2={self.l2}, M2={self.M2}")

    @property
    def lam1(self) -> Fraction:
        return Fraction(self.l1, self.M1)

    @property
    def lam2(self) -> Fraction:
        return Fraction(self.l2, self.M2)

    @property
    def scale(self) -> int:
        """M1**a * M2**b, the factor between N and the abscissa x."""
        return self.M1 ** self.a * self.M2 ** self.b

    @property
    def trivial(self) -> bool:
        return self.M1 == 1 and self.M2 == 1

    def swapped(self) -> "Params":
        """The same problem with the roles of (a, M1, l1) and (b, M2, l2) exchanged."""
        return Params(self.b, self.a, self.M2, self.M1, self.l2, self.l1, ordered=False)

    def as_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "M1": self.M1, "M2": self.M2, "l1": self.l1, "l2": self.l2}


def weight_exponents(a: int, b: int) -> tuple[float, float]:
    s = 2.0 * (a + b)
    return (a + 2 * b) / s, (2 * a + b) / s


@dataclass(frozen=True)
class Decomposition:
    h: int
    r: int
    weight: float


def decompositions(n: int, a: int, b: int) -> list[Decomposition]:
    """All (h, r) with h**a * r**b == n, sorted by h."""
    if n < 1:
        raise ValueError("n must be >= 1")
    eh, er = weight_exponents(a, b)
    out = []
    # loop over the factor with the larger exponent: fewer candidates
    if b >= a:
        for r in range(1, ikth_root(n, b) + 1):
            rb = r ** b
            if n % rb:
                continue
            h = ikth_root(n // rb, a)
            if h ** a * rb == n:
                out.append(Decomposition(h, r, h ** -eh * r ** -er))
    else:
        for h in range(1, ikth_root(n, a) + 1):
            ha = h ** a
            if n % ha:
                continue
            r = ikth_root(n // ha, b)
            if ha * r ** b == n:
                out.append(Decomposition(h, r, h ** -eh * r ** -er))
    out.sort(key=lambda d: d.h)
    return out


_POWERS: dict[int, list[int]] = {}


def _power_table(e: int, kmax: int) -> list[int]:
    """[0**e, 1**e, ..., kmax**e], grown on demand and shared."""
    tab = _POWERS.setdefault(e, [0])
    if len(tab) <= kmax:
        tab.extend(k ** e for k in range(len(tab), max(kmax + 1, 2 * len(tab))))
    return tab


def tau_point(n: int, p: Params) -> int:
    """Number of (n1, n2) with n1**a n2**b = n and n_i = l_i (mod M_i)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if p.a == p.b == 1:
        count = 0
        for d in range(1, math.isqrt(n) + 1):
            if n % d:
                continue
            e = n // d
            count += d % p.M1 == p.l1 % p.M1 and e % p.M2 == p.l2 % p.M2
            if e != d:
                count += e % p.M1 == p.l1 % p.M1 and d % p.M2 == p.l2 % p.M2
        return count
    # scan the factor with the larger exponent, test the cofactor exactly
    if p.b >= p.a:
        e, l, M, f, lf, Mf = p.b, p.l2, p.M2, p.a, p.l1, p.M1
    else:
        e, l, M, f, lf, Mf = p.a, p.l1, p.M1, p.b, p.l2, p.M2
    kmax = ikth_root(n, e)
    tab = _power_table(e, kmax)
    hits = [q for q in tab[l:kmax + 1:M] if not n % q]
    count = 0
    for q in hits:
        c = n // q
        w = ikth_root(c, f)
        if w ** f == c and w % Mf == lf % Mf:
            count += 1
    return count


def _first_in_class(start: int, l: int, M: int) -> int:
    return start + (l - start) % M


def _ceil_root(q: int, k: int) -> int:
    """Smallest z >= 1 with z**k >= q."""
    if q <= 1:
        return 1
    return ikth_root(q - 1, k) + 1


def _mark(counts, lo, hi, lead_range, lead_exp, lead_l, lead_M, other_exp, other_l, other_M):
    # for each leading value v, add one at every v^e * w^f in [lo, hi) with
    # w in its residue class; indices are distinct for fixed v
    for v in lead_range:
        base = v ** lead_exp
        if base >= hi:
            break
        wmin = _ceil_root(-(-lo // base), other_exp)
        wmax = ikth_root((hi - 1) // base, other_exp)
        w0 = _first_in_class(wmin, other_l, other_M)
        if w0 > wmax:
            continue
        w = np.arange(w0, wmax + 1, other_M, dtype=np.int64)
        idx = base * w ** other_exp - lo
        counts[idx] += 1


def tau_sieve_segment(lo: int, hi: int, p: Params) -> np.ndarray:
    """tau_{a,b}(n; ...) for lo <= n < hi as int32."""
    if lo < 1 or hi < lo:
        raise ValueError("need 1 <= lo <= hi")
    counts = np.zeros(hi - lo, dtype=np.int32)
    if hi == lo:
        return counts
    a, b = p.a, p.b
    Y = ikth_root(hi - 1, a + b)
    # n1 <= Y: loop n1, vectorise n2
    _mark(counts, lo, hi, range(p.l1, Y + 1, p.M1), a, p.l1, p.M1, b, p.l2, p.M2)
    # n1 > Y forces n2**(a+b) < hi: loop n2, vectorise n1 > Y
    lo_b = max(lo, 1)
    for n2 in range(p.l2, Y + 1, p.M2):
        base = n2 ** b
        wmin = max(Y + 1, _ceil_root(-(-lo_b // base), a))
        wmax = ikth_root((hi - 1) // base, a)
        w0 = _first_in_class(wmin, p.l1, p.M1)
        if w0 > wmax:
            continue
        w = np.arange(w0, wmax + 1, p.M1, dtype=np.int64)
        counts[base * w ** a - lo] += 1
    return counts


def tau_sieve(Nmax: int, p: Params, segment: int = SEGMENT, threads: int = 1) -> np.ndarray:
    """Array t with t[n] = tau_{a,b}(n; ...) for 1 <= n <= Nmax (t[0] = 0)."""
    if Nmax < 1:
        raise ValueError("Nmax must be >= 1")
    if Nmax >= MAX_SIEVE:
        raise BudgetError(f"Nmax={Nmax} exceeds the sieve index limit {MAX_SIEVE}")
    bounds = [(lo, min(lo + segment, Nmax + 1)) for lo in range(1, Nmax + 1, segment)]
    out = np.zeros(Nmax + 1, dtype=np.int32)
    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(lambda lh: tau_sieve_segment(lh[0], lh[1], p), bounds))
    else:
        parts = [tau_sieve_segment(lo, hi, p) for lo, hi in bounds]
    for (lo, hi), part in zip(bounds, parts):
        out[lo:hi] = part
    return out


# -- binary segment dump --------------------------------------------------

_HEADER = struct.Struct("<4sHBBIIIIQQ")
MAGIC = b"ADLB"
VERSION = 1


def write_sieve_segment(path, counts: np.ndarray, p: Params, offset: int) -> None:
    """Dump counts for n = offset+1 .. offset+len(counts) in little-endian u32."""
    data = np.asarray(counts, dtype="<u4")
    head = _HEADER.pack(MAGIC, VERSION, p.a, p.b, p.M1, p.M2, p.l1, p.l2, offset, data.size)
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(data.tobytes())


def read_sieve_segment(path) -> tuple[dict, np.ndarray]:
    with open(path, "rb") as fh:
        raw = fh.read()
    magic, version, a, b, M1, M2, l1, l2, offset, length = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    if version != VERSION:
        raise ValueError(f"unsupported version {version}")
    counts = np.frombuffer(raw, dtype="<u4", count=length, offset=_HEADER.size)
    header = dict(a=a, b=b, M1=M1, M2=M2, l1=l1, l2=l2, offset=offset, length=length)
    return header, counts.astype(np.int64)


# -- g and g* ---------------------------------------------------------------

def g_ab(n: int, p: Params) -> tuple[float, list[Decomposition]]:
    """g_{a,b}(n) with its decompositions; independent of the congruence data."""
    dec = decompositions(n, p.a, p.b)
    return math.fsum(d.weight for d in dec), dec


def _twist(d: Decomposition, p: Params) -> float:
    # h*l1/M1 + r*l2/M2 reduced mod 1 exactly
    return float(Fraction(d.h * p.l1 % p.M1, p.M1) + Fraction(d.r * p.l2 % p.M2, p.M2))


def g_star(n: int, p: Params) -> tuple[float, list[Decomposition]]:
    """g*_{a,b}(n) by explicit enumeration of ordered pairs of decompositions."""
    dec = decompositions(n, p.a, p.b)
    terms = []
    for d1 in dec:
        t1 = _twist(d1, p)
        for d2 in dec:
            terms.append(d1.weight * d2.weight * math.cos(2.0 * math.pi * (_twist(d2, p) - t1)))
    return math.fsum(terms), dec


def iter_decomposition_blocks(X: int, a: int, b: int, block: int = 1 << 22) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Yield (h, r) int64 arrays covering every h**a r**b <= X exactly once."""
    hs, rs, size = [], [], 0
    # outer loop over the factor with the larger exponent
    swap = a > b
    e_out, e_in = (a, b) if swap else (b, a)
    for v in range(1, ikth_root(X, e_out) + 1):
        wmax = ikth_root(X // v ** e_out, e_in)
        w = np.arange(1, wmax + 1, dtype=np.int64)
        vv = np.full(wmax, v, dtype=np.int64)
        hs.append(vv if swap else w)
        rs.append(w if swap else vv)
        size += wmax
        if size >= block:
            yield np.concatenate(hs), np.concatenate(rs)
            hs, rs, size = [], [], 0
    if hs:
        yield np.concatenate(hs), np.concatenate(rs)


def g_table(X: int, p: Params, twisted: bool = True) -> tuple[np.ndarray, np.ndarray | None]:
    """Arrays g[n] and G[n] for 0 <= n <= X (entry 0 unused).

    G[n] = sum over n = h^a r^b of w * e(h l1/M1 + r l2/M2), so g*(n) = |G[n]|**2.
    """
    if X >= MAX_SIEVE:
        raise BudgetError(f"X={X} exceeds the table limit {MAX_SIEVE}")
    eh, er = weight_exponents(p.a, p.b)
    g = np.zeros(X + 1)
    G = np.zeros(X + 1, dtype=complex) if twisted else None
    for h, r in iter_decomposition_blocks(X, p.a, p.b):
        n = h ** p.a * r ** p.b
        w = np.power(h, -eh) * np.power(r, -er)
        g += np.bincount(n, weights=w, minlength=X + 1)
        if twisted:
            frac = (h * p.l1 % p.M1) / p.M1 + (r * p.l2 % p.M2) / p.M2
            ang = 2.0 * np.pi * frac
            G.real += np.bincount(n, weights=w * np.cos(ang), minlength=X + 1)
            G.imag += np.bincount(n, weights=w * np.sin(ang), minlength=X + 1)
    return g, G


def g_star_table(X: int, p: Params) -> np.ndarray:
    _, G = g_table(X, p)
    return G.real ** 2 + G.imag ** 2


def g_partial_sum(X: int, p: Params, weighted: bool = False) -> float:
    """sum_{n<=X} g(n), or with the extra factor n^{-1/(2(a+b))} when weighted."""
    if X < 1:
        raise ValueError("X must be >= 1")
    eh, er = weight_exponents(p.a, p.b)
    parts = []
    for h, r in iter_decomposition_blocks(X, p.a, p.b):
        w = np.power(h, -eh) * np.power(r, -er)
        if weighted:
            n = (h ** p.a * r ** p.b).astype(np.float64)
            w = w * np.power(n, -1.0 / (2 * (p.a + p.b)))
        parts.append(math.fsum(w))
    return math.fsum(parts)


# -- tail of sum g^2 ---------------------------------------------------------

@dataclass
class SeriesBracket:
    value: float
    lower: float
    upper: float
    terms_used: int
    tail_exponent: float

    def __post_init__(self):
        if not self.lower <= self.value <= self.upper:
            raise ValueError(f"bracket not ordered: {self.lower} <= {self.value} <= {self.upper}")

    def contains(self, v: float) -> bool:
        return self.lower <= v <= self.upper

    def as_dict(self) -> dict:
        return {"value": self.value, "lower": self.lower, "upper": self.upper,
                "terms": self.terms_used, "tail_exponent": self.tail_exponent}


def tail_exponent(a: int, b: int) -> float:
    """Decay exponent a/((a+b) b) of sum_{n>y} g^2(n), with a <= b."""
    a, b = min(a, b), max(a, b)
    return a / ((a + b) * b)


CALIBRATION_YS = (10**2, 10**3, 10**4)
CALIBRATION_TOP = 10**6


def exact_g2_tails(ys, top: int, p: Params) -> list[float]:
    """sum_{y < n <= top} g(n)^2 for each y."""
    g, _ = g_table(top, p, twisted=False)
    g2 = g * g
    return [math.fsum(g2[int(math.floor(y)) + 1:]) for y in ys]


@lru_cache(maxsize=None)
def tail_constant(a: int, b: int) -> float:
    """2 * max over y of (exact tail to 10^6) * y^{e}; the decay bound comes without an explicit constant."""
    p = Params(min(a, b), max(a, b))
    e = tail_exponent(a, b)
    tails = exact_g2_tails(CALIBRATION_YS, CALIBRATION_TOP, p)
    return 2.0 * max(t * y ** e for t, y in zip(tails, CALIBRATION_YS))


def g_tail_bracket(y: float, p: Params, K: int = 1000, budget: int = 2 * 10**7) -> SeriesBracket:
    """Bracket for sum_{n>y} g^2(n).

    value/lower: exact partial tail over y < n <= min(y*K, budget);
    upper: the calibrated envelope C * y^{-a/((a+b)b)}.
    """
    if y < 1:
        raise ValueError("y must be >= 1")
    e = tail_exponent(p.a, p.b)
    top = int(min(y * K, budget))
    partial = exact_g2_tails([y], top, p)[0] if top > y else 0.0
    upper = max(tail_constant(p.a, p.b) * y ** (-e), partial)
    return SeriesBracket(partial, partial, upper, max(top - int(y), 0), -e)
