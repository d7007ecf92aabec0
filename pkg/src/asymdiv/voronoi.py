"""Truncated Voronoi-type expansion of Delta and the stationary-phase check.

    Delta*(x; z) = (c1/pi) x^{1/(2k)} sum_{n<=z} sum_{n=h^a r^b} w(h, r)
                   * cos(2 pi c2 (x n)^{1/k} - 2 pi (h l1/M1 + r l2/M2 + 1/8)),   k = a + b.

Per n the inner sum collapses to |G(n)| cos(2 pi (c2 (xn)^{1/k} + phi_n)) with
G(n) = sum w e(h l1/M1 + r l2/M2) and phi_n = -arg G(n)/(2 pi) - 1/8, which is
the form evaluated in bulk.  Phases are reduced mod 1 before scaling by 2 pi.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .divisor import Params, decompositions, g_table, weight_exponents
from .error_term import EvalPoint, delta


def c1(p: Params) -> float:
    a, b = p.a, p.b
    return a ** (b / (2 * (a + b))) * b ** (a / (2 * (a + b))) * (a + b) ** -0.5


def c2(p: Params) -> float:
    a, b = p.a, p.b
    return (a / b) ** (b / (a + b)) + (b / a) ** (a / (a + b))


@dataclass(frozen=True)
class TruncationConfig:
    z: float
    H: int = 2

    def __post_init__(self):
        if self.z < 1:
            raise ValueError("z must be >= 1")
        if self.H < 2:
            raise ValueError("H must be >= 2")


def default_z(x: float, p: Params, cap: float = 1e6) -> float:
    """x^{a/b} (log x)^{-(b + b^2/a + 1)}, capped; never below 1."""
    L = math.log(x)
    z = x ** (p.a / p.b) * L ** -(p.b + p.b ** 2 / p.a + 1)
    return float(min(max(z, 1.0), cap))


@dataclass(frozen=True)
class VoronoiTable:
    """Per-n amplitudes and phase offsets of Delta*(.; z), shared read-only."""
    p: Params
    z: float
    n: np.ndarray
    freq: np.ndarray   # c2 n^{1/k}
    amp: np.ndarray    # |G(n)|
    phase: np.ndarray  # phi_n in cycles

    @property
    def size(self) -> int:
        return self.n.size

    def prefix(self, z: float) -> "VoronoiTable":
        m = int(np.searchsorted(self.n, math.floor(z), side="right"))
        return VoronoiTable(self.p, z, self.n[:m], self.freq[:m], self.amp[:m], self.phase[:m])


@lru_cache(maxsize=32)
def voronoi_table(z: float, p: Params) -> VoronoiTable:
    zi = int(math.floor(z))
    if zi < 1:
        e = np.zeros(0)
        return VoronoiTable(p, z, np.zeros(0, dtype=np.int64), e, e, e)
    _, G = g_table(zi, p)
    n = np.flatnonzero(np.abs(G) > 0)
    n = n[n >= 1]
    k = p.a + p.b
    Gn = G[n]
    freq = c2(p) * np.power(n.astype(np.float64), 1.0 / k)
    phase = -np.angle(Gn) / (2 * np.pi) - 0.125
    return VoronoiTable(p, z, n.astype(np.int64), freq, np.abs(Gn), phase)


def delta_star_array(xs: np.ndarray, table: VoronoiTable, chunk: int = 1 << 22) -> np.ndarray:
    """Delta* at many abscissae for one coefficient table."""
    xs = np.asarray(xs, dtype=np.float64)
    out = np.zeros(xs.shape)
    if table.size == 0:
        return out
    p = table.p
    k = p.a + p.b
    y = np.power(xs, 1.0 / k)
    step = max(1, chunk // table.size)
    for i in range(0, xs.size, step):
        yy = y[i:i + step, None]
        t = table.freq[None, :] * yy + table.phase[None, :]
        t -= np.floor(t)
        out[i:i + step] = np.cos(2.0 * np.pi * t) @ table.amp
    return out * (c1(p) / math.pi) * np.power(xs, 1.0 / (2 * k))


def delta_star(x: float, z: float, p: Params) -> float:
    """Delta*(x; z); an empty sum (z < 1) gives 0."""
    if x < 1:
        raise ValueError("x must be >= 1")
    if z < 1:
        return 0.0
    return float(delta_star_array(np.array([float(x)]), voronoi_table(float(z), p))[0])


def delta_star_terms(x: float, z: float, p: Params) -> list[tuple[int, int, float, float]]:
    """(h, r, amplitude, phase in cycles) per decomposition, straight from the definition."""
    k = p.a + p.b
    pref = c1(p) / math.pi * x ** (1.0 / (2 * k))
    cc = c2(p)
    out = []
    for n in range(1, int(math.floor(z)) + 1):
        for d in decompositions(n, p.a, p.b):
            tw = Fraction(d.h * p.l1, p.M1) + Fraction(d.r * p.l2, p.M2) + Fraction(1, 8)
            ph = (cc * (x * n) ** (1.0 / k) - float(tw % 1)) % 1.0
            out.append((d.h, d.r, pref * d.weight, ph))
    return out


def remainder(pt: EvalPoint, z: float, p: Params) -> float:
    """E(x) = Delta(x) - Delta*(x; z)."""
    return delta(pt, p) - delta_star(pt.xf, z, p)


# -- sawtooth expansion ---------------------------------------------------------

def psi_truncated(u, H: int):
    """-sum_{1<=|h|<=H} e(hu)/(2 pi i h) = -sum_{h=1}^{H} sin(2 pi h u)/(pi h)."""
    H = int(H)
    if H < 2:
        raise ValueError("H must be >= 2")
    u = np.asarray(u, dtype=np.float64)
    frac = u - np.floor(u)
    h = np.arange(1, H + 1, dtype=np.float64)
    out = np.zeros(frac.shape)
    flat = frac.reshape(-1)
    res = out.reshape(-1)
    step = max(1, (1 << 22) // H)
    for i in range(0, flat.size, step):
        t = flat[i:i + step, None] * h[None, :]
        t -= np.floor(t)
        res[i:i + step] = -(np.sin(2.0 * np.pi * t) @ (1.0 / (np.pi * h)))
    return float(out) if out.ndim == 0 else out


def psi_truncation_envelope(u, H: int):
    """min(1, 1/(H ||u||)) with ||u|| the distance to the nearest integer."""
    u = np.asarray(u, dtype=np.float64)
    d = np.abs(u - np.round(u))
    with np.errstate(divide="ignore"):
        env = np.minimum(1.0, 1.0 / (H * d))
    return float(env) if env.ndim == 0 else env


# -- B-process check ---------------------------------------------------------------

@dataclass(frozen=True)
class BProcessWindow:
    j: int
    h: int
    x: float
    p: Params

    @property
    def c(self) -> int:
        return (2 * self.p.a * self.p.b) ** (self.p.a * self.p.b)

    def m(self, j: int) -> float:
        return (self.p.scale * self.x) ** (1.0 / (self.p.a + self.p.b)) / float(self.c) ** j

    @property
    def mj(self) -> float:
        return self.m(self.j)

    @property
    def J(self) -> int:
        L = math.log(self.x)
        return int((L / (self.p.a + self.p.b) - math.log(L)) / math.log(self.c))

    def dual_endpoint(self, j: int) -> Fraction:
        """(a/b) h (2ab)^{a(a+b)j} M1/M2: image of n1 = m_j under the phase derivative."""
        a, b = self.p.a, self.p.b
        return Fraction(a * self.h * (2 * a * b) ** (a * (a + b) * j) * self.p.M1, b * self.p.M2)


@dataclass
class BProcessRecord:
    lhs: complex
    rhs: complex
    diff: float
    n_terms: int
    r_terms: int


def _e_sum(phases) -> complex:
    ang = 2.0 * np.pi * (np.asarray(phases) % 1.0)
    return complex(math.fsum(np.cos(ang)), math.fsum(np.sin(ang)))


def bprocess_check(w: BProcessWindow, p: Params | None = None) -> BProcessRecord:
    """Direct S(x, h, j) against its stationary-phase dual sum.

    With n1 = M1 (k + l1/M1) the phase f(k) = -h x^{1/b} (k + l1/M1)^{-a/b}
    has f'(k) running over [n_{j,h}, n_{j+1,h}] as n1 runs over (m_{j+1}, m_j];
    the stationary point for f'(k) = r contributes
    c1 x^{1/(2k)} h^{b/(2k)} r^{-(a+2b)/(2k)} e(-c2 (x h^b r^a)^{1/k} + r l1/M1 + h l2/M2 - 1/8),
    endpoints at integers taking half weight.
    """
    p = p or w.p
    a, b, h, x = p.a, p.b, w.h, w.x
    if h < 1:
        raise ValueError("h must be >= 1")
    k = a + b
    lo, hi = w.m(w.j + 1), w.mj
    n1_first = math.floor(lo) + 1
    n1_first += (p.l1 - n1_first) % p.M1
    n1 = np.arange(n1_first, math.floor(hi) + 1, p.M1, dtype=np.float64)
    lam2 = Fraction(h * p.l2 % p.M2, p.M2)
    lhs_ph = -h * np.power((p.M1 / n1) ** a * x, 1.0 / b) + float(lam2)
    lhs = _e_sum(lhs_ph) if n1.size else 0j

    alpha, beta = w.dual_endpoint(w.j), w.dual_endpoint(w.j + 1)
    r_lo, r_hi = math.ceil(alpha), math.floor(beta)
    if r_lo > r_hi:
        raise ValueError(f"empty dual range [{float(alpha)}, {float(beta)}]")
    r = np.arange(r_lo, r_hi + 1, dtype=np.float64)
    wt = np.ones(r.size)
    if alpha.denominator == 1:
        wt[0] *= 0.5
    if beta.denominator == 1:
        wt[-1] *= 0.5
    amp = wt * c1(p) * x ** (1.0 / (2 * k)) * h ** (b / (2 * k)) * np.power(r, -(a + 2 * b) / (2 * k))
    r_int = np.arange(r_lo, r_hi + 1, dtype=np.int64)
    tw = (r_int * p.l1 % p.M1) / p.M1 + float(lam2) - 0.125
    ph = -c2(p) * np.power(x * h ** b * np.power(r, a), 1.0 / k) + tw
    ang = 2.0 * np.pi * (ph % 1.0)
    rhs = complex(math.fsum(amp * np.cos(ang)), math.fsum(amp * np.sin(ang)))
    return BProcessRecord(lhs, rhs, abs(lhs - rhs), int(n1.size), int(r.size))


VORONOI_COLUMNS = ("x", "delta", "delta_star", "remainder")
