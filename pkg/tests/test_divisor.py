import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from asymdiv.divisor import (
    BudgetError,
    Params,
    SeriesBracket,
    decompositions,
    exact_g2_tails,
    g_ab,
    g_partial_sum,
    g_star,
    g_star_table,
    g_table,
    g_tail_bracket,
    read_sieve_segment,
    tail_exponent,
    tau_point,
    tau_sieve,
    tau_sieve_segment,
    write_sieve_segment,
)
from asymdiv.hurwitz import hurwitz_zeta


def brute_tau(n, p):
    return sum(
        1
        for n1 in range(1, n + 1)
        if n % n1**p.a == 0
        for n2 in [round((n // n1**p.a) ** (1 / p.b))]
        for m in (n2 - 1, n2, n2 + 1)
        if m >= 1 and n1**p.a * m**p.b == n and n1 % p.M1 == p.l1 % p.M1 and m % p.M2 == p.l2 % p.M2
    )


def test_params_validation():
    with pytest.raises(ValueError, match="gcd"):
        Params(2, 4)
    with pytest.raises(ValueError, match="a <= b"):
        Params(3, 2)
    with pytest.raises(ValueError, match="l1"):
        Params(1, 2, M1=3, l1=4)
    with pytest.raises(ValueError, match="positive"):
        Params(0, 1)
    p = Params(1, 2, 2, 3, 1, 2)
    assert p.lam1 == Fraction(1, 2) and p.lam2 == Fraction(2, 3)
    assert p.scale == 2 * 9
    assert Params(1, 1).trivial and not p.trivial
    q = p.swapped()
    assert (q.a, q.b, q.M1, q.M2, q.l1, q.l2) == (2, 1, 3, 2, 2, 1)


def test_tau_point_examples():
    assert tau_point(4, Params(1, 2)) == 2
    assert tau_point(1, Params(2, 3, 5, 7)) == 1
    assert tau_point(4, Params(1, 2, 2, 2, 1, 1)) == 0


@pytest.mark.parametrize("p", [Params(1, 2), Params(2, 3, 2, 3, 1, 2), Params(1, 1, 3, 4, 2, 1), Params(1, 3, 4, 2, 3, 2)])
def test_tau_point_brute(p):
    for n in range(1, 400):
        assert tau_point(n, p) == brute_tau(n, p)


def test_decompositions():
    d = decompositions(4, 1, 2)
    assert [(x.h, x.r) for x in d] == [(1, 2), (4, 1)]
    for n in range(1, 300):
        for a, b in ((1, 2), (2, 3), (3, 2)):
            for x in decompositions(n, a, b):
                assert x.h**a * x.r**b == n and x.weight > 0


def test_sieve_small():
    t = tau_sieve(100, Params(1, 2))
    assert t[0] == 0 and t.sum() == 153
    assert tau_sieve(1, Params(2, 3)).tolist() == [0, 1]


def test_sieve_segments_and_threads():
    p = Params(2, 3, 2, 3, 1, 2)
    whole = tau_sieve(50000, p)
    parts = tau_sieve(50000, p, segment=4099, threads=3)
    assert np.array_equal(whole, parts)
    assert np.array_equal(tau_sieve_segment(1000, 2000, p), whole[1000:2000])


def test_sieve_vs_point_random(pset):
    t = tau_sieve(20000, pset)
    rng = np.random.default_rng(5)
    for n in rng.integers(1, 20001, 1000).tolist():
        assert t[n] == tau_point(n, pset)


def test_residue_completeness():
    for a, b in ((1, 2), (2, 3)):
        full = tau_sieve(10**4, Params(a, b))
        for M1 in range(1, 5):
            for M2 in range(1, 5):
                acc = np.zeros_like(full)
                for l1 in range(1, M1 + 1):
                    for l2 in range(1, M2 + 1):
                        acc += tau_sieve(10**4, Params(a, b, M1, M2, l1, l2))
                assert np.array_equal(acc, full)


def test_sieve_budget():
    with pytest.raises(BudgetError):
        tau_sieve(2**31, Params(1, 2))


def test_segment_dump_roundtrip(tmp_path):
    p = Params(1, 2, 2, 3, 1, 2)
    t = tau_sieve(5000, p)
    path = tmp_path / "seg.bin"
    write_sieve_segment(path, t[1001:3001], p, offset=1000)
    head, counts = read_sieve_segment(path)
    assert head["offset"] == 1000 and head["length"] == 2000
    assert (head["a"], head["b"], head["M1"], head["M2"], head["l1"], head["l2"]) == (1, 2, 2, 3, 1, 2)
    assert np.array_equal(counts, t[1001:3001])
    raw = bytearray(path.read_bytes())
    raw[:4] = b"XXXX"
    path.write_bytes(bytes(raw))
    with pytest.raises(ValueError, match="magic"):
        read_sieve_segment(path)


def test_g_ab_examples():
    p = Params(1, 2)
    assert g_ab(1, p)[0] == 1.0
    assert math.isclose(g_ab(4, p)[0], 4 ** (-5 / 6) + 2 ** (-2 / 3), rel_tol=1e-15)
    for q in (7, 101, 9973):
        assert math.isclose(g_ab(q, p)[0], q ** (-5 / 6), rel_tol=1e-15)


def test_g_star_examples():
    p = Params(1, 2, 1, 2, 1, 1)
    want = 2 ** (-10 / 3) + 2 ** (-4 / 3) - 2 * 2 ** (-7 / 3)
    assert math.isclose(g_star(4, p)[0], want, rel_tol=1e-13)
    assert abs(want - 0.09921) < 1e-5
    assert g_star(1, Params(2, 3, 5, 7, 3, 4))[0] == 1.0


def test_g_tables_match_pointwise(pset):
    g, G = g_table(3000, pset)
    gs = g_star_table(3000, pset)
    for n in range(1, 3001, 7):
        assert math.isclose(g[n], g_ab(n, pset)[0], rel_tol=1e-13)
        assert abs(gs[n] - g_star(n, pset)[0]) <= 1e-13


def test_g_partial_sum_examples():
    p = Params(1, 2)
    assert g_partial_sum(1, p) == 1.0
    want = 1 + 2 ** (-5 / 6) + 3 ** (-5 / 6) + g_ab(4, p)[0]
    assert math.isclose(g_partial_sum(4, p), want, rel_tol=1e-14)
    X = 10**6
    assert g_partial_sum(X, p) <= 3 * X * math.log(X)


def test_dirichlet_series_identity():
    # sum g(n) n^-2 = zeta(2a + eh) zeta(2b + er)
    for a, b in ((1, 2), (2, 3)):
        p = Params(a, b)
        X = 10**6
        g, _ = g_table(X, p, twisted=False)
        n = np.arange(1, X + 1, dtype=np.float64)
        partial = math.fsum(g[1:] / n**2)
        eh, er = (a + 2 * b) / (2 * (a + b)), (2 * a + b) / (2 * (a + b))
        full = hurwitz_zeta(2 * a + eh, 1.0) * hurwitz_zeta(2 * b + er, 1.0)
        # terms with h^a r^b > X: bounded by the h-tail plus the r-tail of the product series
        tail = (hurwitz_zeta(2 * b + er, 1.0) * X ** (-(2 * a + eh - 1) / a) * 2
                + hurwitz_zeta(2 * a + eh, 1.0) * X ** (-(2 * b + er - 1) / b) * 2)
        assert partial <= full <= partial + tail


def test_series_bracket():
    with pytest.raises(ValueError):
        SeriesBracket(1.0, 2.0, 3.0, 1, -1.0)
    br = SeriesBracket(1.0, 0.5, 2.0, 10, -0.5)
    assert br.contains(1.5) and not br.contains(2.5)


def test_tail_bracket_and_exponent():
    p = Params(1, 2)
    assert tail_exponent(1, 2) == pytest.approx(1 / 6)
    t3, t4 = exact_g2_tails([10**3, 10**4], 10**6, p)
    assert 0.3 < (t4 / t3) / 10 ** (-1 / 6) < 3
    b3, b4 = g_tail_bracket(1e3, p), g_tail_bracket(1e4, p)
    assert b3.lower <= b3.upper and b4.upper < b3.upper
    assert b4.upper - b4.lower < b3.upper - b3.lower + 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 10**4))
def test_g_star_domination_and_symmetry(n):
    p = Params(1, 2, 2, 3, 1, 2)
    gs = g_star(n, p)[0]
    assert abs(gs) <= g_ab(n, p)[0] ** 2 + 1e-12
    assert abs(gs - g_star(n, p.swapped())[0]) <= 1e-12
