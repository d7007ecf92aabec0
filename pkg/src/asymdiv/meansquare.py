"""Mean square of Delta: exact piecewise integration, the constant c*, fits.

Between consecutive jumps Delta(x) = A - M(x) with A an integer, so each
piece of the integral of Delta^2 has a closed form.  Expanding it naively in
powers of x cancels catastrophically once A ~ 10^6, so every piece is
re-centred at its left end x0: with x = x0 (1 + s) and D = A - M(x0),

    Delta(x) = D - sum_k c_k x0^{p_k} ((1+s)^{p_k} - 1)

and the integrals of products of (1+s)^q - 1 are taken either in closed
form (wide pieces) or from their Taylor series in s (narrow pieces).
"""
from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .divisor import (
    BudgetError,
    Params,
    SeriesBracket,
    g_table,
    g_tail_bracket,
    iter_decomposition_blocks,
    tail_constant,
    tail_exponent,
    weight_exponents,
)
from .error_term import MainTermCoeffs, jump_arrays, main_term, main_term_coeffs
from .hurwitz import hurwitz_zeta, periodic_zeta
from .voronoi import VoronoiTable, c1, delta_star_array, voronoi_table

__all__ = [
    "SeriesBracket", "MeanSquareReport", "power_square_antiderivative", "integral_delta_sq",
    "integral_table", "cstar", "cstar_prefactor", "cstar_closed", "exponent_fit",
    "remainder_meansquare", "eval_S_ab", "meansquare_report",
]

SERIES_CUTOFF = 0.1
SERIES_TERMS = 26
DEFAULT_BUDGET = 2 * 10**8


def _binom_real(q: float, j: int) -> float:
    out = 1.0
    for i in range(j):
        out *= (q - i) / (i + 1)
    return out


def _int_combo(alphas, qs, sigma: np.ndarray) -> np.ndarray:
    """int_0^sigma sum_i alpha_i (1+s)^{q_i} ds, stable when the combination vanishes to high order at 0."""
    sigma = np.asarray(sigma, dtype=np.float64)
    out = np.empty(sigma.shape)
    small = sigma <= SERIES_CUTOFF
    if small.any():
        s = sigma[small]
        coef = [sum(a * _binom_real(q, j) for a, q in zip(alphas, qs)) / (j + 1) for j in range(SERIES_TERMS)]
        acc = np.zeros(s.shape)
        for c in reversed(coef):
            acc = acc * s + c
        out[small] = acc * s
    big = ~small
    if big.any():
        s = sigma[big]
        l1p = np.log1p(s)
        out[big] = sum(a * np.expm1((q + 1.0) * l1p) / (q + 1.0) for a, q in zip(alphas, qs))
    return out


def _log_moments(sigma: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """int_0^sigma of h, s h and h^2 with h(s) = (1+s) log(1+s) - s."""
    sigma = np.asarray(sigma, dtype=np.float64)
    I_h, I_sh, I_hh = (np.empty(sigma.shape) for _ in range(3))
    small = sigma <= SERIES_CUTOFF
    if small.any():
        s = sigma[small]
        K = SERIES_TERMS
        hc = np.zeros(K + 1)  # Taylor coefficients of h
        for k in range(2, K + 1):
            hc[k] = (-1) ** k / (k * (k - 1))
        shc = np.concatenate([[0.0], hc[:-1]])
        hhc = np.convolve(hc, hc)[:K + 1]

        def integ(c):
            acc = np.zeros(s.shape)
            for j in range(len(c) - 1, -1, -1):
                acc = acc * s + c[j] / (j + 1)
            return acc * s

        I_h[small], I_sh[small], I_hh[small] = integ(hc), integ(shc), integ(hhc)
    big = ~small
    if big.any():
        U = 1.0 + sigma[big]
        L = np.log(U)
        u_log_u = U**2 * L / 2 - U**2 / 4 + 0.25
        u2_log_u = U**3 * L / 3 - U**3 / 9 + 1.0 / 9
        u2_log2_u = U**3 * (L**2 / 3 - 2 * L / 9 + 2.0 / 27) - 2.0 / 27
        I_h[big] = u_log_u - (U - 1) ** 2 / 2
        # (u-1) h = u^2 log u - u log u - (u-1)^2
        I_sh[big] = u2_log_u - u_log_u - (U - 1) ** 3 / 3
        # h^2 = u^2 log^2 u - 2 (u-1) u log u + (u-1)^2
        I_hh[big] = u2_log2_u - 2 * (u2_log_u - u_log_u) + (U - 1) ** 3 / 3
    return I_h, I_sh, I_hh


def piece_integrals(A, coeffs: MainTermCoeffs, x0, x1) -> np.ndarray:
    """int_{x0}^{x1} (A - M(x))^2 dx for arrays of pieces."""
    A = np.asarray(A, dtype=np.float64)
    x0 = np.asarray(x0, dtype=np.float64)
    x1 = np.asarray(x1, dtype=np.float64)
    sigma = (x1 - x0) / x0
    if coeffs.log_case:
        M0 = x0 * np.log(x0) + coeffs.kappa * x0 + coeffs.c0
        D = A - M0
        u = x0 * (np.log(x0) + coeffs.kappa + 1.0)
        I_h, I_sh, I_hh = _log_moments(sigma)
        # Delta = D - u s - x0 h(s)
        val = (D * D * sigma - D * u * sigma**2 + u * u * sigma**3 / 3
               - 2 * D * x0 * I_h + 2 * u * x0 * I_sh + x0 * x0 * I_hh)
        return x0 * val
    pA, pB = 1.0 / coeffs.a, 1.0 / coeffs.b
    bA = coeffs.cA * np.power(x0, pA)
    bB = coeffs.cB * np.power(x0, pB)
    D = A - (bA + bB + coeffs.c0)
    I1A = _int_combo((1.0, -1.0), (pA, 0.0), sigma)
    I1B = _int_combo((1.0, -1.0), (pB, 0.0), sigma)
    IAA = _int_combo((1.0, -2.0, 1.0), (2 * pA, pA, 0.0), sigma)
    IBB = _int_combo((1.0, -2.0, 1.0), (2 * pB, pB, 0.0), sigma)
    IAB = _int_combo((1.0, -1.0, -1.0, 1.0), (pA + pB, pA, pB, 0.0), sigma)
    val = (D * D * sigma - 2 * D * (bA * I1A + bB * I1B)
           + bA * bA * IAA + 2 * bA * bB * IAB + bB * bB * IBB)
    return x0 * val


def power_square_antiderivative(A: float, coeffs: MainTermCoeffs, x0: float, x1: float) -> float:
    """int_{x0}^{x1} (A - cA x^{1/a} - cB x^{1/b} - c0)^2 dx in closed form (log form when a = b = 1)."""
    if not 1.0 <= x0 <= x1:
        raise ValueError("need 1 <= x0 <= x1")
    return float(piece_integrals(np.array([A]), coeffs, np.array([x0]), np.array([x1]))[0])


def _pieces(T_hi: float, p: Params, T_lo: float = 1.0, threads: int = 1):
    """Breakpoints in x and the constant count A on each piece of [T_lo, T_hi]."""
    Ns, heights = jump_arrays(T_hi, p, threads)
    S = np.cumsum(heights)
    scale = p.scale
    N_lo = int(math.floor(Fraction(T_lo) * scale))
    # count at T_lo (right-continuous) and the jumps strictly inside
    k0 = int(np.searchsorted(Ns, N_lo, side="right"))
    A0 = int(S[k0 - 1]) if k0 > 0 else 0
    inner = Ns[k0:]
    inner_x = inner / scale
    keep = inner_x < T_hi
    xs = np.concatenate([[float(T_lo)], inner_x[keep], [float(T_hi)]])
    A = np.concatenate([[A0], S[k0:][keep]]).astype(np.float64)
    return xs, A


def integral_table(Ts, p: Params, budget: int = DEFAULT_BUDGET, threads: int = 1) -> list[float]:
    """[int_1^T Delta^2 dx for T in Ts] from one pass over the jumps."""
    Ts = [float(T) for T in Ts]
    if any(T < 1 for T in Ts):
        raise ValueError("T must be >= 1")
    if sorted(Ts) != Ts:
        raise ValueError("Ts must be ascending")
    Tmax = Ts[-1]
    if Tmax * p.scale > budget:
        raise BudgetError(f"M1^a M2^b T = {Tmax * p.scale:.3g} exceeds the sieve budget {budget}")
    xs, A = _pieces(Tmax, p, threads=threads)
    coeffs = main_term_coeffs(p)
    # split pieces at the requested T values so each prefix is exact
    cut = np.unique(np.concatenate([xs, Ts]))
    idx = np.searchsorted(xs, cut[:-1], side="right") - 1
    vals = piece_integrals(A[idx], coeffs, cut[:-1], cut[1:])
    ends = np.searchsorted(cut[1:], Ts)
    out, start, partial = [], 0, []
    for e in ends:
        partial.append(math.fsum(vals[start:e + 1]))
        out.append(math.fsum(partial))
        start = e + 1
    return out


def integral_delta_sq(T: float, p: Params, budget: int = DEFAULT_BUDGET, threads: int = 1) -> float:
    """int_1^T Delta^2(M1^a M2^b x; l1, M1, l2, M2) dx."""
    return integral_table([T], p, budget, threads)[0]


def integral_between(T0: float, T1: float, p: Params, threads: int = 1) -> float:
    xs, A = _pieces(T1, p, T_lo=T0, threads=threads)
    return math.fsum(piece_integrals(A, main_term_coeffs(p), xs[:-1], xs[1:]))


# -- c* ------------------------------------------------------------------------

def cstar_prefactor(p: Params) -> float:
    a, b = p.a, p.b
    return a ** (b / (a + b)) * b ** (a / (a + b)) / (2 * (a + b + 1) * math.pi**2)


def cstar(p: Params, nmax: int = 10**6, accelerate: bool = True) -> SeriesBracket:
    """c* = prefactor * sum_n g*(n) as a bracket.

    lower is the partial sum over n <= nmax (g* = |G|^2 >= 0, so it is a true
    lower bound) and upper adds the calibrated g^2 tail envelope.  The partial
    sum converges like nmax^{-a/((a+b)b)}, far too slowly to locate c*, so by
    default value is the closed-form evaluation of the full series
    (cstar_closed), clipped into the bracket; accelerate=False returns the
    partial sum itself.
    """
    if nmax < 1:
        raise ValueError("nmax must be >= 1")
    _, G = g_table(nmax, p)
    partial = math.fsum(G.real[1:] ** 2 + G.imag[1:] ** 2)
    pref = cstar_prefactor(p)
    e = tail_exponent(p.a, p.b)
    lower = pref * partial
    upper = lower + pref * tail_constant(p.a, p.b) * nmax ** -e
    value = lower
    if accelerate:
        value = min(max(cstar_closed(p).value, lower), upper)
    return SeriesBracket(value, lower, upper, nmax, -e)


def unrestricted_constant(p: Params, nmax: int = 10**6) -> float:
    """prefactor * sum_{n<=nmax} g(n)^2, summed by grouping weights per n."""
    g, _ = g_table(nmax, p, twisted=False)
    return cstar_prefactor(p) * math.fsum(g[1:] ** 2)


def cstar_closed(p: Params, U: int = 10**5) -> SeriesBracket:
    """c* from the parametrisation of equal products h1^a r1^b = h2^a r2^b.

    Since gcd(a, b) = 1 every such pair is h1 = v^b k, h2 = u^b k,
    r1 = u^a d, r2 = v^a d with gcd(u, v) = 1, so

        sum_n g*(n) = sum_{gcd(u,v)=1} (uv)^{-gamma}
                      Re[P(2 eh, (u^b - v^b) l1/M1) P(2 er, (v^a - u^a) l2/M2)]

    with gamma = (a^2+ab+b^2)/(a+b) and P(s, t) = sum_k k^{-s} e(kt), a
    finite combination of Hurwitz zeta values.  Terms with uv <= U are summed;
    the rest is bounded by zeta(2eh) zeta(2er) sum_{m>U} d(m) m^{-gamma}.
    """
    a, b = p.a, p.b
    eh, er = weight_exponents(a, b)
    sh, sr = 2 * eh, 2 * er
    gamma = (a * a + a * b + b * b) / (a + b)
    Ph = [periodic_zeta(sh, (j * p.l1) % p.M1, p.M1) for j in range(p.M1)]
    Pr = [periodic_zeta(sr, (j * p.l2) % p.M2, p.M2) for j in range(p.M2)]
    parts = []
    for u in range(1, U + 1):
        v = np.arange(1, U // u + 1, dtype=np.int64)
        v = v[np.gcd(v, u) == 1]
        if v.size == 0:
            continue
        jh = (u ** b - np.power(v, b)) % p.M1 if p.M1 > 1 else np.zeros(v.size, dtype=np.int64)
        jr = (np.power(v, a) - u ** a) % p.M2 if p.M2 > 1 else np.zeros(v.size, dtype=np.int64)
        Phv = np.array(Ph)[jh]
        Prv = np.array(Pr)[jr]
        w = np.power((u * v).astype(np.float64), -gamma)
        parts.append(math.fsum(w * (Phv * Prv).real))
    total = math.fsum(parts)
    # sum_{m>U} d(m) m^{-gamma} <= int_U^inf (log t + 1) t^{-gamma} dt (up to the first term)
    g1 = gamma - 1
    tail = U ** -g1 * ((math.log(U) + 1) / g1 + 1 / g1**2) + (math.log(U) + 2) * U ** -gamma
    tail *= hurwitz_zeta(sh, 1.0) * hurwitz_zeta(sr, 1.0)
    pref = cstar_prefactor(p)
    return SeriesBracket(pref * total, pref * (total - tail), pref * (total + tail), U, -g1)


# -- fits and reports ------------------------------------------------------------------

def exponent_fit(rows) -> dict:
    """Least-squares slope of log I against log T with its standard error."""
    if len(rows) < 4:
        raise ValueError("exponent_fit needs at least 4 rows")
    T = np.array([r["T"] if isinstance(r, dict) else r[0] for r in rows], dtype=np.float64)
    I = np.array([r["integral"] if isinstance(r, dict) else r[1] for r in rows], dtype=np.float64)
    X, Y = np.log(T), np.log(I)
    n = X.size
    Xc = X - X.mean()
    slope = float(np.dot(Xc, Y - Y.mean()) / np.dot(Xc, Xc))
    intercept = float(Y.mean() - slope * X.mean())
    resid = Y - (intercept + slope * X)
    dof = max(n - 2, 1)
    stderr = float(math.sqrt(np.dot(resid, resid) / dof / np.dot(Xc, Xc)))
    return {"slope": slope, "intercept": intercept, "stderr": stderr}


@dataclass
class MeanSquareReport:
    params: Params
    rows: list[dict]
    cstar: SeriesBracket
    slope: float
    slope_stderr: float
    runtime_sec: float = 0.0
    cstar_closed: SeriesBracket | None = None
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {
            "params": self.params.as_dict(),
            "cstar": {"value": self.cstar.value, "lower": self.cstar.lower,
                      "upper": self.cstar.upper, "terms": self.cstar.terms_used},
            "rows": [{"T": r["T"], "integral": r["integral"], "ratio": r["ratio"]} for r in self.rows],
            "slope": self.slope,
            "slope_stderr": self.slope_stderr,
            "runtime_sec": self.runtime_sec,
        }
        if self.cstar_closed is not None:
            out["cstar_closed"] = {"value": self.cstar_closed.value, "lower": self.cstar_closed.lower,
                                   "upper": self.cstar_closed.upper, "terms": self.cstar_closed.terms_used}
        return out

    @classmethod
    def from_json(cls, data: dict) -> "MeanSquareReport":
        c = data["cstar"]
        e = 1.0 / (data["params"]["a"] + data["params"]["b"])
        rows = [{"T": r["T"], "integral": r["integral"], "ratio": r["ratio"]} for r in data["rows"]]
        cc = data.get("cstar_closed")
        return cls(
            Params(**data["params"]),
            rows,
            SeriesBracket(c["value"], c["lower"], c["upper"], c["terms"], -e),
            data["slope"],
            data["slope_stderr"],
            data.get("runtime_sec", 0.0),
            SeriesBracket(cc["value"], cc["lower"], cc["upper"], cc["terms"], 0.0) if cc else None,
        )

    def write_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["T", "integral", "ratio", "fitted_exponent"])
        for r in self.rows:
            fe = r.get("fitted_exponent")
            w.writerow([f"{r['T']:.15g}", f"{r['integral']:.15g}", f"{r['ratio']:.15g}",
                        "" if fe is None else f"{fe:.15g}"])


def default_grid(Tmax: float, start_exp: int = 10) -> list[float]:
    k_max = int(math.floor(math.log2(Tmax)))
    return [float(2**k) for k in range(start_exp, k_max + 1)]


def meansquare_report(p: Params, Ts=None, nmax: int = 10**6, budget: int = DEFAULT_BUDGET,
                      threads: int = 1, closed: bool = True) -> MeanSquareReport:
    t0 = time.perf_counter()
    Ts = default_grid(2.0**20) if Ts is None else sorted(float(T) for T in Ts)
    ints = integral_table(Ts, p, budget, threads)
    e = (1 + p.a + p.b) / (p.a + p.b)
    rows = []
    for i, (T, I) in enumerate(zip(Ts, ints)):
        row = {"T": T, "integral": I, "ratio": I / T**e, "fitted_exponent": None}
        if i >= 3:
            row["fitted_exponent"] = exponent_fit(rows + [row])["slope"]
        rows.append(row)
    fit = exponent_fit(rows) if len(rows) >= 4 else {"slope": float("nan"), "stderr": float("nan")}
    cs = cstar(p, nmax)
    cc = cstar_closed(p) if closed else None
    return MeanSquareReport(p, rows, cs, fit["slope"], fit["stderr"], time.perf_counter() - t0, cc)


def load_report(path) -> MeanSquareReport:
    with open(path) as fh:
        return MeanSquareReport.from_json(json.load(fh))


# -- remainder of the truncated expansion ------------------------------------------------

_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gauss_legendre(order: int):
    if order not in _GL_CACHE:
        _GL_CACHE[order] = np.polynomial.legendre.leggauss(order)
    return _GL_CACHE[order]


def _quadrature_grid(T: float, p: Params, tables: list[VoronoiTable], order: int, threads: int = 1):
    xs, A = _pieces(2 * T, p, T_lo=T, threads=threads)
    x0, x1 = xs[:-1], xs[1:]
    # one order-`order` panel per cycle of the fastest term (>= 4 nodes per cycle)
    k = p.a + p.b
    fmax = max((float(t.freq.max()) for t in tables if t.size), default=0.0)
    cycles = fmax * (np.power(x1, 1.0 / k) - np.power(x0, 1.0 / k))
    panels = np.maximum(1, np.ceil(cycles * max(1.0, 4.0 / order)).astype(np.int64))
    piece = np.repeat(np.arange(x0.size), panels)
    start = np.concatenate([[0], np.cumsum(panels)[:-1]])
    sub = np.arange(piece.size) - np.repeat(start, panels)
    width = (x1 - x0) / panels
    lo = x0[piece] + sub * width[piece]
    nodes, weights = _gauss_legendre(order)
    half = width[piece] / 2
    X = (lo + half)[:, None] + half[:, None] * nodes[None, :]
    W = half[:, None] * weights[None, :]
    Acol = np.broadcast_to(A[piece][:, None], X.shape)
    return X.ravel(), W.ravel(), Acol.ravel()


def remainder_meansquare_multi(T: float, zs, p: Params, order: int = 8, threads: int = 1) -> list[dict]:
    """remainder_meansquare for several z sharing one quadrature grid."""
    zs = [float(z) for z in zs]
    zmax = max(zs)
    big = voronoi_table(zmax, p) if zmax >= 1 else None
    tables = [big.prefix(z) if (big is not None and z >= 1) else None for z in zs]
    X, W, A = _quadrature_grid(T, p, [t for t in tables if t is not None], order, threads)
    d = A - main_term(X, p)
    d2 = math.fsum(W * d * d)
    out = []
    # nested z: accumulate Delta* increments in ascending z
    order_idx = sorted(range(len(zs)), key=lambda i: zs[i])
    ds = np.zeros(X.size)
    done = 0
    res = [None] * len(zs)
    for i in order_idx:
        t = tables[i]
        if t is not None and t.size > done:
            inc = VoronoiTable(p, t.z, t.n[done:], t.freq[done:], t.amp[done:], t.phase[done:])
            ds += delta_star_array(X, inc)
            done = t.size
        e = d - ds
        e2 = math.fsum(W * e * e)
        res[i] = {"z": zs[i], "e2": e2, "d2": d2, "ratio": e2 / d2}
    out.extend(res)
    return out


def remainder_meansquare(T: float, z: float, p: Params, order: int = 8, threads: int = 1) -> dict:
    """int_T^{2T} E^2, int_T^{2T} Delta^2 and their ratio on a jump-aware Gauss-Legendre grid."""
    if T < 1:
        raise ValueError("T must be >= 1")
    return remainder_meansquare_multi(T, [z], p, order, threads)[0]


# -- off-diagonal sum S_{a,b}(T) ------------------------------------------------------------

def eval_S_ab(T: float, cap: float, p: Params, max_cap: float = 1e8) -> float:
    """Near-diagonal double sum with the min(T^{1/k}, 1/|n1^{1/k} - n2^{1/k}|) kernel, n_i <= cap.

    Pairs with equal n are excluded; the closeness window is
    |n1^{1/k} - n2^{1/k}| < (n1 n2)^{1/(2k)} / 10, k = a + b.
    """
    if cap > max_cap:
        raise BudgetError(f"cap {cap:.3g} exceeds {max_cap:.3g}")
    k = p.a + p.b
    g, _ = g_table(int(cap), p, twisted=False)
    n = np.flatnonzero(g > 0)
    n = n[n >= 1]
    gn = g[n]
    root = np.power(n.astype(np.float64), 1.0 / k)
    half = np.power(n.astype(np.float64), 1.0 / (2 * k))
    Tk = T ** (1.0 / k)
    parts = []
    for i in range(n.size):
        # window in root space: |root_j - root_i| < half_i half_j / 10 with half_j <= half_i (1 + ...)
        # scan forward only, count each unordered pair twice
        j0 = i + 1
        jmax = int(np.searchsorted(root, root[i] + 0.2 * half[i] * half[i] + 1.0, side="right"))
        if jmax <= j0:
            continue
        dist = root[j0:jmax] - root[i]
        ok = dist < half[i] * half[j0:jmax] / 10
        if not ok.any():
            continue
        ker = np.minimum(Tk, 1.0 / dist[ok])
        parts.append(2.0 * gn[i] * math.fsum(gn[j0:jmax][ok] * ker))
    return math.fsum(parts)
