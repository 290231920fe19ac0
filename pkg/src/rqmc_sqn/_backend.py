"""Pick the compiled kernels when importable, else the NumPy fallback."""

import os

BACKEND = "python"

if os.environ.get("RQMC_SQN_PURE_PYTHON", "") not in ("", "0"):
    from ._kernels_py import inv_normal_cdf, lms_scramble, sobol_block
else:
    try:
        from ._kernels import inv_normal_cdf, lms_scramble, sobol_block

        BACKEND = "cython"
    except ImportError:  # extension not built
        from ._kernels_py import inv_normal_cdf, lms_scramble, sobol_block

__all__ = ["BACKEND", "inv_normal_cdf", "lms_scramble", "sobol_block"]
