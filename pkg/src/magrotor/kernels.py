"""Kernel selection: compiled extension when available, Python otherwise.

Set ``MAGROTOR_PURE_PYTHON=1`` to force the Python kernels.
"""

import os

from . import _pykernels as python_kernels

compiled_kernels = None
if os.environ.get("MAGROTOR_PURE_PYTHON", "") != "1":
    try:
        from . import _ckernels as compiled_kernels
    except ImportError:
        compiled_kernels = None

_active = compiled_kernels if compiled_kernels is not None else python_kernels
BACKEND = "compiled" if compiled_kernels is not None else "python"

cg_float = _active.cg_float
state_keys = _active.state_keys
d_operator_entries = _active.d_operator_entries
