"""Exact integer primitives used by every lattice-point count.

Python integers are unbounded, so the (z+1)**k overflow probe that a
fixed-width implementation has to guard against cannot wrap here.  The
array helpers work on int64 and refuse inputs whose powers would not fit.
"""
from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

INT64_SAFE = 2**62


def ikth_root(N: int, k: int) -> int:
    """Largest z >= 0 with z**k <= N."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if N < 0:
        raise ValueError("N must be >= 0")
    if N < 2 or k == 1:
        return N
    if k == 2:
        return math.isqrt(N)
    if N.bit_length() <= 1000:
        z = int(round(N ** (1.0 / k)))
    else:
        # float overflow: start from a power of two above the root
        z = 1 << (N.bit_length() // k + 1)
        while True:
            nz = ((k - 1) * z + N // z ** (k - 1)) // k
            if nz >= z:
                break
            z = nz
    while z ** k > N:
        z -= 1
    while (z + 1) ** k <= N:
        z += 1
    return z


def floor_scaled_root(N: int, m: int, a: int, b: int) -> int:
    """Largest z >= 0 with z**b * m**a <= N."""
    ma = m ** a
    if ma > N:
        return 0
    # floor(N / m^a) is safe here: z^b * m^a <= N  <=>  z^b <= N // m^a
    return ikth_root(N // ma, b)


def residue_count(Z: int, l: int, M: int) -> int:
    """Number of n in [1, Z] with n = l (mod M), for 1 <= l <= M."""
    if not 1 <= l <= M:
        raise ValueError(f"need 1 <= l <= M, got l={l}, M={M}")
    if Z < l:
        return 0
    return (Z - l) // M + 1


def psi_saw(t):
    """Sawtooth t - floor(t) - 1/2; equals -1/2 at integers.

    Accepts a float, a Fraction or a numpy array.
    """
    if isinstance(t, np.ndarray):
        return t - np.floor(t) - 0.5
    if isinstance(t, Fraction):
        return t - math.floor(t) - Fraction(1, 2)
    return t - math.floor(t) - 0.5


def ikth_root_array(N: np.ndarray, k: int) -> np.ndarray:
    """Vectorised ikth_root for non-negative int64 arrays."""
    N = np.asarray(N, dtype=np.int64)
    if N.size and int(N.max()) >= INT64_SAFE:
        raise OverflowError("ikth_root_array needs values below 2**62")
    if k == 1:
        return N.copy()
    z = np.floor(np.power(N.astype(np.float64), 1.0 / k)).astype(np.int64)
    z = np.maximum(z, 0)
    # float guess is within one unit for int64 inputs; fix it exactly
    for _ in range(3):
        over = z ** k > N
        z = np.where(over, z - 1, z)
    for _ in range(3):
        under = (z + 1) ** k <= N
        z = np.where(under, z + 1, z)
    return z


def residue_count_array(Z: np.ndarray, l: int, M: int) -> np.ndarray:
    Z = np.asarray(Z, dtype=np.int64)
    return np.where(Z >= l, (Z - l) // M + 1, 0)
