"""Backend selection for the velocity-solve kernels.

The compiled extension is used when it was built; otherwise, or when
``WAAMLAYER_PURE_PYTHON`` is set to a non-empty value, the pure-Python
implementation is loaded.  ``BACKEND`` names the active one.
"""

import os

from . import _kernels_py

if os.environ.get("WAAMLAYER_PURE_PYTHON"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels_c as _impl
    except ImportError:
        _impl = _kernels_py

BACKEND = "cython" if _impl is not _kernels_py else "python"

objective = _impl.objective
gradient = _impl.gradient
solve = _impl.solve


def available_backends():
    """Map of backend name to module for every backend importable here."""
    found = {"python": _kernels_py}
    try:
        from . import _kernels_c
    except ImportError:
        pass
    else:
        found["cython"] = _kernels_c
    return found
