"""GF(2^8) arithmetic.

Field elements are integers in [0, 255]. Multiplication is carried out
with log/antilog tables built for the reduction polynomial
x^8 + x^4 + x^3 + x^2 + 1 (0x11D), for which 2 is a primitive element.

Besides the scalar operations, the module exposes numpy-based helpers
(``vec_scale``, ``matmul``) used by the coding layer; they operate on
uint8 arrays and share the same tables.
"""

from __future__ import annotations

import numpy as np

REDUCTION_POLY = 0x11D
ORDER = 256

# exp table is doubled so log-domain sums never need an explicit modulo
# when used through _EXP directly.
_EXP = np.zeros(510, dtype=np.uint8)
_LOG = np.zeros(256, dtype=np.int32)


def _build_tables() -> None:
    x = 1
    for i in range(255):
        _EXP[i] = x
        _LOG[x] = i
        x <<= 1
        if x & 0x100:
            x ^= REDUCTION_POLY
    for i in range(255, 510):
        _EXP[i] = _EXP[i - 255]


_build_tables()

# Full 256x256 product table (64 KiB): the workhorse for vectorized row
# operations. MUL_TABLE[a, b] == gf_mul(a, b).
_la = _LOG[:, None] + _LOG[None, :]
MUL_TABLE = _EXP[_la % 255].copy()
MUL_TABLE[0, :] = 0
MUL_TABLE[:, 0] = 0
del _la

# INV_TABLE[a] == gf_inv(a) for a != 0; entry 0 is unused (left as 0).
INV_TABLE = np.zeros(256, dtype=np.uint8)
for _a in range(1, 256):
    INV_TABLE[_a] = _EXP[255 - _LOG[_a]]
del _a


def gf_add(a: int, b: int) -> int:
    """Field addition: bitwise XOR (characteristic 2, self-inverse)."""
    return a ^ b


def gf_sub(a: int, b: int) -> int:
    """Field subtraction coincides with addition."""
    return a ^ b


def gf_mul(a: int, b: int) -> int:
    """Field multiplication modulo the reduction polynomial."""
    if a == 0 or b == 0:
        return 0
    return int(_EXP[int(_LOG[a]) + int(_LOG[b])])


def gf_inv(a: int) -> int:
    """Multiplicative inverse of a nonzero element.

    Raises:
        ZeroDivisionError: zero has no inverse.
    """
    if a == 0:
        raise ZeroDivisionError("0 has no multiplicative inverse in GF(2^8)")
    return int(INV_TABLE[a])


def gf_div(a: int, b: int) -> int:
    """a / b, i.e. a * inv(b)."""
    return gf_mul(a, gf_inv(b))


def vec_scale(a: int, v: np.ndarray) -> np.ndarray:
    """Scalar times vector, element-wise over the field."""
    return MUL_TABLE[a, v]


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """GF(2^8) matrix product of uint8 arrays a (m, k) and b (k, n).

    Uses the product table with an XOR reduction; intended for the
    moderate shapes the codec works with, not large linear algebra.
    """
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(f"incompatible shapes {a.shape} x {b.shape}")
    return np.bitwise_xor.reduce(MUL_TABLE[a[:, :, None], b[None, :, :]], axis=1)
