"""Select the compiled core or the numpy fallback at import time.

Set ``SUPEROCC_PURE_PYTHON=1`` to force the fallback (used by the benchmark
and the parity tests).
"""
from __future__ import annotations

import os

from . import _fallback

if os.environ.get("SUPEROCC_PURE_PYTHON"):
    impl = _fallback
else:
    try:
        from . import _core as impl  # type: ignore[attr-defined]
    except ImportError:  # extension not built
        impl = _fallback

BACKEND: str = impl.NAME

# kernel kind codes understood by pivoted_cholesky
GAUSSIAN = 0
EXPONENTIAL = 1

pivoted_cholesky = impl.pivoted_cholesky
ou_chain = impl.ou_chain
heat_sum = impl.heat_sum
density_accumulate = impl.density_accumulate

__all__ = ["BACKEND", "GAUSSIAN", "EXPONENTIAL", "impl", "pivoted_cholesky", "ou_chain", "heat_sum", "density_accumulate"]
