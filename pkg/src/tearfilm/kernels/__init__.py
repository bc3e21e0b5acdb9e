"""Hot-kernel backend selection.

Imports the compiled Cython kernels when the extension was built, and
falls back to the numpy reference implementation otherwise.  Set the
environment variable ``TEARFILM_PURE_PYTHON=1`` to force the fallback
(used by the benchmark and the cross-check tests).
"""

from __future__ import annotations

import os

from . import _reference

if os.environ.get("TEARFILM_PURE_PYTHON"):
    _impl = _reference
else:
    try:
        from . import _speedups as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _reference

BACKEND: str = _impl.BACKEND
film_flux = _impl.film_flux
thickness_rhs = _impl.thickness_rhs
solute_rhs = _impl.solute_rhs
precond_apply = _impl.precond_apply

reference = _reference

__all__ = [
    "BACKEND",
    "film_flux",
    "thickness_rhs",
    "solute_rhs",
    "precond_apply",
    "reference",
]
