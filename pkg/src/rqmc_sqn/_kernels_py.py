"""NumPy implementations of the hot kernels.

Used when the compiled ``_kernels`` extension is unavailable, or when
``RQMC_SQN_PURE_PYTHON=1`` is set. Sobol' output must match ``_kernels.pyx``
bit for bit; the inverse CDF may differ in the last ulp because the two use
different ``erfc`` implementations. ``tests/test_backends.py`` compares them.
"""

import numpy as np
from scipy.special import erfc

_TWO_M32 = 2.0**-32
_SQRT2PI = np.sqrt(2.0 * np.pi)

# Acklam's rational approximation, relative error ~1.15e-9 before refinement
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def sobol_block(dirs, shift, start, n):
    """Points ``start .. start+n-1`` (natural order) as floats in [0, 1).

    ``dirs`` is a ``(s, 32)`` uint32 array of direction numbers, one row per
    dimension, column ``b`` used when bit ``b`` of the index is set.
    """
    dirs = np.asarray(dirs, dtype=np.uint32)
    shift = np.asarray(shift, dtype=np.uint32)
    s = dirs.shape[0]
    out = np.zeros((n, s), dtype=np.uint32)
    if n == 0:
        return out.astype(np.float64)
    idx = np.arange(start, start + n, dtype=np.uint64)
    for b in range(int(start + n - 1).bit_length()):
        mask = ((idx >> np.uint64(b)) & np.uint64(1)).astype(bool)
        out[mask] ^= dirs[:, b]
    out ^= shift
    return out.astype(np.float64) * _TWO_M32


def _lower_half(p):
    # p in (0, 0.5]; returns Phi^{-1}(p) <= 0
    x = np.empty_like(p)
    tail = p < _P_LOW
    if tail.any():
        q = np.sqrt(-2.0 * np.log(p[tail]))
        x[tail] = (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / (
            (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
        )
    mid = ~tail
    if mid.any():
        q = p[mid] - 0.5
        r = q * q
        x[mid] = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / (
            ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
        )
    # one Halley step against the erfc-based CDF
    e = 0.5 * erfc(-x / np.sqrt(2.0)) - p
    u = e * _SQRT2PI * np.exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)


def inv_normal_cdf(u):
    u = np.asarray(u, dtype=np.float64)
    flat = u.ravel()
    out = np.empty_like(flat)
    upper = flat > 0.5
    out[~upper] = _lower_half(flat[~upper])
    # 1 - p is exact for p >= 0.5
    out[upper] = -_lower_half(1.0 - flat[upper])
    return out.reshape(u.shape)


def lms_scramble(dirs, lcols):
    """Apply per-dimension unit lower-triangular matrices to direction numbers.

    ``lcols[j, c]`` is column ``c`` of dimension ``j``'s matrix as a 32-bit
    integer; bit ``31 - c`` of a direction number selects it.
    """
    dirs = np.asarray(dirs, dtype=np.uint32)
    lcols = np.asarray(lcols, dtype=np.uint32)
    out = np.zeros_like(dirs)
    for c in range(32):
        hit = (dirs >> np.uint32(31 - c)) & np.uint32(1)
        out ^= np.where(hit.astype(bool), lcols[:, c : c + 1], np.uint32(0))
    return out
