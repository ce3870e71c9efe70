"""Kernel backend selection.

The compiled extension is preferred when importable; the numpy fallback is
bit-identical, so the choice affects speed only.  Override with the
IMBTREES_KERNELS environment variable: "c" (fail if unavailable), "python",
or "auto" (default).
"""

import os

from . import pykernels

try:
    from . import _ckernels
    HAVE_C = True
except ImportError:
    _ckernels = None
    HAVE_C = False

_choice = os.environ.get("IMBTREES_KERNELS", "auto").strip().lower() or "auto"
if _choice in ("auto", ""):
    _impl = _ckernels if HAVE_C else pykernels
elif _choice == "c":
    if not HAVE_C:
        raise ImportError(
            "IMBTREES_KERNELS=c but the compiled extension is not available"
        )
    _impl = _ckernels
elif _choice in ("python", "py"):
    _impl = pykernels
else:
    raise ValueError(f"IMBTREES_KERNELS={_choice!r}: expected auto, c or python")

BACKEND = "c" if _impl is _ckernels else "python"

perm_count_numeric = _impl.perm_count_numeric
perm_count_categorical = _impl.perm_count_categorical
route_arrays = _impl.route_arrays


def backend_name() -> str:
    """Name of the active kernel backend ("c" or "python")."""
    return BACKEND
