"""Selects the split-search backend at import.

The compiled kernel is used when it was built; ``REVSENT_SPLITTER=python``
forces the numpy fallback.  ``BACKEND`` names the active one.
"""

import os

from revsent.classical import _splitter_py

BACKENDS = {"python": _splitter_py}

try:
    from revsent.classical import _splitter as _compiled
except ImportError:  # extension not built
    _compiled = None
else:
    BACKENDS["cython"] = _compiled

_wanted = os.environ.get("REVSENT_SPLITTER", "cython" if _compiled is not None else "python")
if _wanted not in BACKENDS:
    _wanted = "python"

BACKEND = _wanted
best_split_gini = BACKENDS[BACKEND].best_split_gini
best_split_mse = BACKENDS[BACKEND].best_split_mse
