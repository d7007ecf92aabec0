import io
import json
import math

import numpy as np
import pytest
from scipy import integrate

from asymdiv.divisor import BudgetError, Params, g_table
from asymdiv.error_term import MainTermCoeffs, main_term, main_term_coeffs, summatory_exact
from asymdiv.meansquare import (
    MeanSquareReport,
    cstar,
    cstar_closed,
    cstar_prefactor,
    default_grid,
    eval_S_ab,
    exponent_fit,
    integral_between,
    integral_delta_sq,
    integral_table,
    meansquare_report,
    power_square_antiderivative,
    remainder_meansquare,
    remainder_meansquare_multi,
    unrestricted_constant,
)
from asymdiv.voronoi import c1

NODES, WEIGHTS = np.polynomial.legendre.leggauss(40)


def gl_reference(A, c, x0, x1, pieces=64):
    """Composite Gauss-Legendre on geometric sub-intervals."""
    edges = np.geomspace(x0, x1, pieces + 1) if x1 > x0 else np.array([x0, x1])
    edges[0], edges[-1] = x0, x1
    total = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        x = (lo + hi) / 2 + (hi - lo) / 2 * NODES
        if c.log_case:
            m = x * np.log(x) + c.kappa * x + c.c0
        else:
            m = c.cA * x ** (1 / c.a) + c.cB * x ** (1 / c.b) + c.c0
        total.append((hi - lo) / 2 * math.fsum(WEIGHTS * (A - m) ** 2))
    return math.fsum(total)


def _m(c, x):
    if c.log_case:
        return x * math.log(x) + c.kappa * x + c.c0
    return c.cA * x ** (1 / c.a) + c.cB * x ** (1 / c.b) + c.c0


def random_instance(rng, near_cancel=False):
    a, b = [(1, 2), (2, 3), (1, 4), (1, 1), (3, 5)][rng.integers(5)]
    log_case = a == b
    c = MainTermCoeffs(a, b, float(rng.uniform(-3, 3)), float(rng.uniform(-3, 3)), float(rng.uniform(-1, 1)),
                       log_case, float(rng.uniform(-2, 2)))
    x0 = float(np.exp(rng.uniform(0, np.log(1e6))))
    width = x0 * float(np.exp(rng.uniform(np.log(1e-9), np.log(3.0))))
    x1 = x0 + width
    m0 = _m(c, x0)
    if near_cancel:
        A = float(round(m0 + rng.normal(0, 3)))
    else:
        A = float(rng.uniform(-2, 2) * max(abs(m0), abs(_m(c, x1)), 1.0))
    return A, c, x0, x1


def test_antiderivative_trivial_cases():
    zero = MainTermCoeffs(1, 2, 0.0, 0.0, 0.0, False)
    assert math.isclose(power_square_antiderivative(3.0, zero, 2.0, 7.0), 9 * 5, rel_tol=1e-14)
    lin = MainTermCoeffs(1, 2, 1.5, 0.0, 0.0, False)
    assert math.isclose(power_square_antiderivative(0.0, lin, 2.0, 5.0), 1.5**2 * (125 - 8) / 3, rel_tol=1e-14)
    assert power_square_antiderivative(1.0, lin, 3.0, 3.0) == 0.0
    with pytest.raises(ValueError):
        power_square_antiderivative(1.0, lin, 0.5, 2.0)


def test_antiderivative_vs_gauss_legendre():
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(1000):
        A, c, x0, x1 = random_instance(rng)
        got = power_square_antiderivative(A, c, x0, x1)
        ref = gl_reference(A, c, x0, x1)
        worst = max(worst, abs(got - ref) / ref)
    assert worst < 1e-12


def test_antiderivative_near_cancellation():
    # A within a few units of M(x) at x ~ 1e6: float inputs fix the answer only up to
    # the condition number max|A| / rms(A - M), so compare at that scale to a 50-digit oracle
    mpmath = pytest.importorskip("mpmath")
    mpmath.mp.dps = 50
    rng = np.random.default_rng(9)
    for _ in range(60):
        A, c, x0, x1 = random_instance(rng, near_cancel=True)
        X0, X1 = mpmath.mpf(x0), mpmath.mpf(x1)
        if c.log_case:
            f = lambda x: (A - (x * mpmath.log(x) + c.kappa * x + c.c0)) ** 2
        else:
            f = lambda x: (A - (c.cA * x ** (mpmath.mpf(1) / c.a) + c.cB * x ** (mpmath.mpf(1) / c.b) + c.c0)) ** 2
        exact = float(mpmath.quad(f, mpmath.linspace(X0, X1, 8)))
        got = power_square_antiderivative(A, c, x0, x1)
        rms = math.sqrt(exact / (x1 - x0))
        cond = (abs(A) + abs(_m(c, x1))) / rms
        assert abs(got - exact) / exact <= 1e-14 * cond + 1e-13


def test_single_interval_closed_form():
    p = Params(1, 2)
    c = main_term_coeffs(p)
    got = integral_delta_sq(1.5, p)
    ref = integrate.quad(lambda x: (1 - main_term(x, p)) ** 2, 1, 1.5, epsabs=0, epsrel=1e-13)[0]
    assert math.isclose(got, ref, rel_tol=1e-12)
    assert math.isclose(got, power_square_antiderivative(1.0, c, 1.0, 1.5), rel_tol=1e-14)


@pytest.mark.parametrize("p", [Params(1, 2), Params(1, 2, 2, 3, 1, 2), Params(2, 3), Params(1, 1, 3, 4, 2, 1)])
def test_integral_vs_adaptive_quadrature(p):
    T = 300.0
    sc = p.scale
    pts = [1.0] + [n / sc for n in range(sc + 1, int(T * sc) + 1)] + [T]
    parts = []
    for x0, x1 in zip(pts[:-1], pts[1:]):
        if x1 > x0:
            A = summatory_exact(int(round(x0 * sc)), p)
            parts.append(integrate.quad(lambda x: (A - main_term(x, p)) ** 2, x0, x1, epsabs=0, epsrel=1e-12)[0])
    assert math.isclose(integral_delta_sq(T, p), math.fsum(parts), rel_tol=1e-9)


def test_additivity_and_monotonicity():
    p = Params(1, 2, 2, 3, 1, 2)
    Ts = [10.0, 57.3, 200.0, 1000.0, 4321.0]
    I = integral_table(Ts, p)
    assert all(a < b for a, b in zip(I, I[1:])) and I[0] >= 0
    for (t0, i0), (t1, i1) in zip(zip(Ts, I), zip(Ts[1:], I[1:])):
        assert math.isclose(i1, i0 + integral_between(t0, t1, p), rel_tol=1e-12)
    assert [integral_delta_sq(T, p) for T in Ts] == pytest.approx(I, rel=1e-13)


def test_integral_budget_and_domain():
    with pytest.raises(BudgetError):
        integral_delta_sq(1e6, Params(1, 2), budget=10**5)
    with pytest.raises(ValueError):
        integral_table([100.0, 10.0], Params(1, 2))
    with pytest.raises(ValueError):
        integral_delta_sq(0.5, Params(1, 2))


def test_cstar_prefactor():
    p = Params(1, 2)
    assert math.isclose(cstar_prefactor(p), 2 ** (1 / 3) / (8 * math.pi**2), rel_tol=1e-15)
    assert abs(cstar_prefactor(p) - 0.015957) < 1e-6
    for q in (Params(1, 2), Params(2, 3), Params(1, 4), Params(1, 1)):
        k = q.a + q.b
        assert math.isclose(cstar_prefactor(q), c1(q) ** 2 * k / (2 * math.pi**2 * (k + 1)), rel_tol=1e-14)


def test_cstar_bracket_and_unrestricted_constant():
    p = Params(1, 2)
    br = cstar(p, 10**5)
    assert br.lower <= br.value <= br.upper
    zc = unrestricted_constant(p, 10**5)
    assert br.contains(zc)
    assert math.isclose(zc, br.lower, rel_tol=1e-12)
    raw = cstar(p, 10**5, accelerate=False)
    assert raw.value == raw.lower
    wider = cstar(p, 10**4)
    assert br.upper - br.lower < wider.upper - wider.lower


def test_cstar_closed_matches_extrapolated_partial_sums():
    for p in (Params(1, 2), Params(1, 2, 2, 3, 1, 2)):
        _, G = g_table(4 * 10**6, p)
        s = np.cumsum(np.abs(G) ** 2) * cstar_prefactor(p)
        e = 1 / 6
        y1, y2 = 10**6, 4 * 10**6
        A = (s[y2] - s[y1]) / (y1**-e - y2**-e)
        extrap = s[y2] + A * y2**-e
        cc = cstar_closed(p)
        assert abs(cc.value - extrap) / cc.value < 2e-3
        assert cc.upper - cc.lower < 1e-5


def test_cstar_closed_trivial_diagonal():
    # the u = v = 1 term alone is the zeta product, and the remaining terms are positive
    p = Params(1, 2)
    cc = cstar_closed(p, U=1)
    from asymdiv.hurwitz import hurwitz_zeta
    assert math.isclose(cc.value / cstar_prefactor(p), hurwitz_zeta(5 / 3, 1.0) * hurwitz_zeta(4 / 3, 1.0), rel_tol=1e-12)
    assert cstar_closed(p).value > cc.value


def test_exponent_fit():
    rows = [{"T": T, "integral": 0.7 * T ** (4 / 3)} for T in default_grid(2.0**16)]
    fit = exponent_fit(rows)
    assert fit["slope"] == pytest.approx(4 / 3, abs=1e-12)
    assert fit["stderr"] < 1e-10
    with pytest.raises(ValueError):
        exponent_fit(rows[:3])


def test_slope_two_three_regression():
    # (2,3): the ratio is still rising towards c* at T = 1e5, so the fit sits slightly above 6/5
    p = Params(2, 3)
    Ts = [2.0**k for k in range(10, 17)] + [1e5]
    I = integral_table(Ts, p)
    fit = exponent_fit([{"T": T, "integral": v} for T, v in zip(Ts, I)])
    assert 6 / 5 - 0.05 < fit["slope"] < 6 / 5 + 0.08


def test_report_roundtrip(tmp_path):
    p = Params(1, 2, 2, 3, 1, 2)
    rep = meansquare_report(p, [2.0**k for k in range(6, 12)], nmax=10**4)
    data = json.loads(json.dumps(rep.to_json()))
    assert set(data) >= {"params", "cstar", "rows", "slope", "slope_stderr", "runtime_sec"}
    assert set(data["cstar"]) == {"value", "lower", "upper", "terms"}
    back = MeanSquareReport.from_json(data)
    assert back.to_json() == data
    assert [r["T"] for r in rep.rows] == sorted(r["T"] for r in rep.rows)
    assert rep.rows[3]["fitted_exponent"] is not None
    buf = io.StringIO()
    rep.write_csv(buf)
    assert buf.getvalue().splitlines()[0] == "T,integral,ratio,fitted_exponent"


def test_remainder_meansquare_basics():
    p = Params(1, 2)
    r0 = remainder_meansquare(2000.0, 0.5, p)
    assert r0["ratio"] == 1.0
    assert math.isclose(r0["d2"], integral_between(2000.0, 4000.0, p), rel_tol=1e-9)
    rs = remainder_meansquare_multi(5000.0, [0.5, 20, 80, 320], p)
    ratios = [r["ratio"] for r in rs]
    assert all(0 <= v <= 1.05 for v in ratios)
    assert ratios[1] > ratios[2] > ratios[3]


def test_eval_S_ab():
    p = Params(1, 2)
    vals = [eval_S_ab(T, 2000, p) for T in (1e2, 1e3, 1e4)]
    assert vals[0] <= vals[1] <= vals[2]
    k = 3
    bound_exp = 1 / k - (1 / 2) / (k * (k - 1))
    growth = math.log(vals[2] / vals[0]) / math.log(100)
    assert growth <= bound_exp + 0.05
    assert eval_S_ab(1e3, 1, p) == 0.0
    assert eval_S_ab(1e3, 500, Params(1, 1)) > 0
    with pytest.raises(BudgetError):
        eval_S_ab(1e3, 1e9, p)
