"""Backend selection for the tree kernels.

The compiled extension is used when it imports; set ``MASIM_PURE_PYTHON=1``
to force the numpy fallback. ``BACKEND`` names the active one.
"""

import os

from . import _kernels_py as python_backend

compiled_backend = None
if os.environ.get("MASIM_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as compiled_backend  # type: ignore[no-redef]
    except ImportError:  # extension not built
        compiled_backend = None

_active = compiled_backend if compiled_backend is not None else python_backend
BACKEND = "compiled" if compiled_backend is not None else "python"

best_split_gini = _active.best_split_gini
best_split_mse = _active.best_split_mse
apply_tree = _active.apply_tree

__all__ = [
    "BACKEND",
    "apply_tree",
    "best_split_gini",
    "best_split_mse",
    "compiled_backend",
    "python_backend",
]
