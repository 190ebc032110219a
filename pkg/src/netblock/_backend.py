"""Pick the compiled kernels when importable, else the numpy fallback.

Set ``NETBLOCK_BACKEND=python`` to force the fallback.
"""
import os

from . import _fallback

BACKEND = "python"
_compiled = None

if os.environ.get("NETBLOCK_BACKEND", "").lower() != "python":
    try:
        from . import _kernels as _compiled
        BACKEND = "cython"
    except ImportError:  # extension not built
        _compiled = None

_impl = _compiled if _compiled is not None else _fallback

block_counts = _impl.block_counts
admm_loop = _impl.admm_loop


def kernels(name: str):
    """Return the kernel module by name (``"cython"`` or ``"python"``)."""
    if name == "python":
        return _fallback
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled kernels are not available")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


def available() -> list[str]:
    """Names of the kernel modules that can be loaded here."""
    return ["python"] if _compiled is None else ["cython", "python"]
