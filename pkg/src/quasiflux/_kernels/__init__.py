"""Hot numerical kernels, compiled when available.

The Cython extension ``_core`` is used if it was built; otherwise (or when
``QUASIFLUX_PURE_PYTHON=1`` is set) the numpy implementations in
``_fallback`` are used. ``BACKEND`` names the active choice.
"""
import os

from . import _fallback

if os.environ.get("QUASIFLUX_PURE_PYTHON", "") not in ("", "0"):
    _impl = _fallback
    BACKEND = "python"
else:
    try:
        from . import _core as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _fallback
        BACKEND = "python"

tridiag_solve = _impl.tridiag_solve
apply_5pt = _impl.apply_5pt
pcg_5pt = _impl.pcg_5pt


def backends():
    """All importable implementations, keyed by name (used by tests and benchmarks)."""
    out = {"python": _fallback}
    try:
        from . import _core
        out["cython"] = _core
    except ImportError:
        pass
    return out
