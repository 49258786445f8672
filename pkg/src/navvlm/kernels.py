"""Kernel backend selection.

Prefers the compiled extension; falls back to the pure-Python
implementation when the extension is missing or when the environment
variable ``NAVVLM_PURE_PYTHON`` is set to a non-empty value other than
``"0"``.  Both backends implement identical semantics.
"""

import os

if os.environ.get("NAVVLM_PURE_PYTHON", "0") not in ("", "0"):
    from . import _purepy as _impl
    COMPILED = False
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
        COMPILED = True
    except ImportError:
        from . import _purepy as _impl
        COMPILED = False

fmm = _impl.fmm
raycast = _impl.raycast
integrate = _impl.integrate

BACKEND = "compiled" if COMPILED else "pure-python"
