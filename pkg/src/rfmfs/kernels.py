"""Kernel backend selection: compiled Cython reductions when the extension
built, numpy fallback otherwise.  Both expose the same two functions with
identical semantics; tests pin their agreement."""

from __future__ import annotations

try:
    from . import _kernels as _impl
except ImportError:  # extension not built on this interpreter
    from . import _kernels_py as _impl

tilted_logsums = _impl.tilted_logsums
tilted_xmean = _impl.tilted_xmean


def backend_name() -> str:
    """'compiled' when the Cython extension is active, else 'python'."""
    return _impl.BACKEND
