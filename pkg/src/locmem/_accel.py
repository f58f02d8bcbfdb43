"""Optional numba acceleration.

Set ``LOCMEM_DISABLE_NUMBA=1`` to force the pure-numpy code paths (also
honoured when numba is missing or ``NUMBA_DISABLE_JIT`` is set).
"""
import os

_FALSEY = ("", "0", "false", "no", "off")


def _flag(name):
    return os.environ.get(name, "").strip().lower() not in _FALSEY


try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and not _flag("LOCMEM_DISABLE_NUMBA") and not _flag("NUMBA_DISABLE_JIT")


def njit(*args, **kwargs):
    """``numba.njit`` when available, identity decorator otherwise."""
    if HAS_NUMBA:
        kwargs.setdefault("cache", True)
        return numba.njit(*args, **kwargs)

    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda fn: fn


def resolve_backend(backend=None):
    """Return ``"numba"`` or ``"numpy"`` for an explicit or default choice."""
    if backend is None:
        return "numba" if USE_NUMBA else "numpy"
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "numba" and not HAS_NUMBA:
        raise RuntimeError("numba backend requested but numba is not installed")
    return backend


def default_threads():
    """Worker count for embarrassingly parallel loops (``LOCMEM_THREADS``)."""
    try:
        return max(1, int(os.environ.get("LOCMEM_THREADS", "1")))
    except ValueError:
        return 1
