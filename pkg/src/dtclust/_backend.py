"""Select the compiled kernels when available, else the pure-Python ones."""
import os

if os.environ.get("DTCLUST_PURE_PYTHON", "") not in ("", "0"):
    from dtclust import _fallback as _impl
    BACKEND = "python"
else:
    try:
        from dtclust import _kernels as _impl
        BACKEND = "cython"
    except ImportError:
        from dtclust import _fallback as _impl
        BACKEND = "python"

tv1d = _impl.tv1d
lloyd = _impl.lloyd
