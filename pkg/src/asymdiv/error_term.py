"""Exact summatory function, the Hurwitz-zeta main term and the error term.

Everything is evaluated at rational abscissae x = N / (M1^a M2^b) so that
the lattice count S is an exact integer and the only rounding in Delta
comes from the smooth main term.

The main term is the sum of the residues of zeta(as, l1/M1) zeta(bs, l2/M2) x^s / s
at s = 1/a, 1/b and 0:

    M(x) = zeta(b/a, l2/M2) x^{1/a} + zeta(a/b, l1/M1) x^{1/b} + (1/2 - l1/M1)(1/2 - l2/M2)

and for a = b = 1 the double pole at s = 1 gives
x (log x - 1 - digamma(l1/M1) - digamma(l2/M2)) + (1/2 - l1/M1)(1/2 - l2/M2).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterator

import numpy as np

from .divisor import Params, tau_sieve
from .exact_arith import (
    floor_scaled_root,
    ikth_root,
    ikth_root_array,
    residue_count,
    residue_count_array,
)
from .hurwitz import digamma, hurwitz_zeta, zeta0_closed


@dataclass(frozen=True)
class EvalPoint:
    N: int
    p: Params

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")

    @property
    def x(self) -> Fraction:
        return Fraction(self.N, self.p.scale)

    @property
    def xf(self) -> float:
        return self.N / self.p.scale

    @classmethod
    def at(cls, x: float, p: Params) -> "EvalPoint":
        """The largest grid point not exceeding x (S is constant just right of it)."""
        return cls(int(math.floor(Fraction(x) * p.scale)), p)


@dataclass(frozen=True)
class MainTermCoeffs:
    a: int
    b: int
    cA: float
    cB: float
    c0: float
    log_case: bool
    # x log x + kappa x + c0 in the log case
    kappa: float = 0.0


@lru_cache(maxsize=None)
def main_term_coeffs(p: Params) -> MainTermCoeffs:
    lam1, lam2 = float(p.lam1), float(p.lam2)
    c0 = zeta0_closed(lam1) * zeta0_closed(lam2)
    if p.a == p.b:
        kappa = -1.0 - digamma(lam1) - digamma(lam2)
        return MainTermCoeffs(p.a, p.b, 0.0, 0.0, c0, True, kappa)
    cA = hurwitz_zeta(p.b / p.a, lam2)
    cB = hurwitz_zeta(p.a / p.b, lam1)
    return MainTermCoeffs(p.a, p.b, cA, cB, c0, False)


def main_term(x, p: Params):
    """M(x) for a scalar (float, Fraction, EvalPoint) or a float array."""
    if isinstance(x, EvalPoint):
        x = x.xf
    c = main_term_coeffs(p)
    if isinstance(x, np.ndarray):
        if c.log_case:
            return x * np.log(x) + c.kappa * x + c.c0
        return c.cA * np.power(x, 1.0 / p.a) + c.cB * np.power(x, 1.0 / p.b) + c.c0
    x = float(x)
    if c.log_case:
        return math.fsum([x * math.log(x), c.kappa * x, c.c0])
    return math.fsum([c.cA * x ** (1.0 / p.a), c.cB * x ** (1.0 / p.b), c.c0])


def _as_N(pt, p: Params) -> int:
    return pt.N if isinstance(pt, EvalPoint) else int(pt)


def summatory_exact(pt, p: Params) -> int:
    """S(N) = #{n1^a n2^b <= N, n_i = l_i (mod M_i)} by the hyperbola split."""
    N = _as_N(pt, p)
    if N < 1:
        raise ValueError("N must be >= 1")
    a, b = p.a, p.b
    Y = ikth_root(N, a + b)
    s1 = sum(residue_count(floor_scaled_root(N, n1, a, b), p.l2, p.M2)
             for n1 in range(p.l1, Y + 1, p.M1))
    s2 = sum(residue_count(floor_scaled_root(N, n2, b, a), p.l1, p.M1)
             for n2 in range(p.l2, Y + 1, p.M2))
    s3 = residue_count(Y, p.l1, p.M1) * residue_count(Y, p.l2, p.M2)
    return s1 + s2 - s3


def delta(pt, p: Params) -> float:
    """Delta at x = N / (M1^a M2^b); right-continuous in x."""
    N = _as_N(pt, p)
    return summatory_exact(N, p) - main_term(N / p.scale, p)


def _psi_branch(N: int, p: Params, lead_exp, l_lead, M_lead, other_exp, l_other, M_other) -> list[float]:
    # -psi(y - l_other/M_other) per leading n with n^(a+b) <= N, where the
    # integer part of y - lam comes from the exact lattice count
    out = []
    scale_other = M_other
    lam = l_other / M_other
    for n in range(l_lead, ikth_root(N, p.a + p.b) + 1, M_lead):
        cnt = residue_count(floor_scaled_root(N, n, lead_exp, other_exp), l_other, M_other)
        y = (N / n ** lead_exp) ** (1.0 / other_exp) / scale_other
        out.append(-((y - lam) - (cnt - 1) - 0.5))
    return out


def psi_sum_delta(pt, p: Params) -> float:
    """F12 + F21, the sawtooth-sum form of Delta (up to a bounded term)."""
    N = _as_N(pt, p)
    f12 = _psi_branch(N, p, p.a, p.l1, p.M1, p.b, p.l2, p.M2)
    f21 = _psi_branch(N, p, p.b, p.l2, p.M2, p.a, p.l1, p.M1)
    return math.fsum(f12 + f21)


def psi_sum_delta_array(Ns: np.ndarray, p: Params) -> np.ndarray:
    """Vectorised psi_sum_delta over an int64 array of N."""
    Ns = np.asarray(Ns, dtype=np.int64)
    out = np.zeros(Ns.shape)
    Y = ikth_root(int(Ns.max()), p.a + p.b)
    for lead_exp, l_lead, M_lead, other_exp, l_other, M_other in (
        (p.a, p.l1, p.M1, p.b, p.l2, p.M2),
        (p.b, p.l2, p.M2, p.a, p.l1, p.M1),
    ):
        lam = l_other / M_other
        for n in range(l_lead, Y + 1, M_lead):
            mask = Ns >= n ** (p.a + p.b)
            if not mask.any():
                break
            Nm = Ns[mask]
            cnt = residue_count_array(ikth_root_array(Nm // n ** lead_exp, other_exp), l_other, M_other)
            y = np.power(Nm / float(n ** lead_exp), 1.0 / other_exp) / M_other
            out[mask] -= (y - lam) - (cnt - 1) - 0.5
    return out


def summatory_table(Nmax: int, p: Params, threads: int = 1) -> np.ndarray:
    """S[N] for 0 <= N <= Nmax from sieve prefix sums."""
    return np.cumsum(tau_sieve(Nmax, p, threads=threads), dtype=np.int64)


def delta_array(Ns: np.ndarray, S: np.ndarray, p: Params) -> np.ndarray:
    Ns = np.asarray(Ns, dtype=np.int64)
    return S[Ns] - main_term(Ns / p.scale, p)


def jump_arrays(Tmax: float, p: Params, threads: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """(N, height) for every N <= M1^a M2^b Tmax where S jumps, ascending."""
    Nmax = int(math.floor(Fraction(Tmax) * p.scale))
    t = tau_sieve(Nmax, p, threads=threads)
    Ns = np.flatnonzero(t)
    return Ns.astype(np.int64), t[Ns].astype(np.int64)


def jump_points(Tmax: float, p: Params, threads: int = 1) -> Iterator[tuple[EvalPoint, int]]:
    if Tmax < 1:
        raise ValueError("Tmax must be >= 1")
    Ns, heights = jump_arrays(Tmax, p, threads)
    for N, h in zip(Ns.tolist(), heights.tolist()):
        yield EvalPoint(N, p), h


DELTA_COLUMNS = ("n", "x", "summatory", "main_term", "delta")


def delta_rows(Ns, p: Params, S: np.ndarray | None = None) -> list[dict]:
    rows = []
    for N in Ns:
        N = int(N)
        s = int(S[N]) if S is not None else summatory_exact(N, p)
        m = main_term(N / p.scale, p)
        rows.append({"n": N, "x": N / p.scale, "summatory": s, "main_term": m, "delta": s - m})
    return rows


def fmt15(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.15g}"


def write_csv(rows, columns, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt15(row[c]) for c in columns])
