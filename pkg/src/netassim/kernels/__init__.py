"""Hot-loop kernels: compiled extensions when available, numpy otherwise.

Set ``NETASSIM_PURE=1`` in the environment to force the pure-numpy path (the
benchmark and the equivalence tests use this).  Both paths are bit-identical
by construction.
"""

from __future__ import annotations

import os

from . import pure

USING_COMPILED = False

if os.environ.get("NETASSIM_PURE", "") not in ("1", "true", "yes"):
    try:
        from ._sis_core import sis_step as _sis_step_compiled
        from ._snn_core import lif_interval as _lif_interval_compiled

        USING_COMPILED = True
    except ImportError:
        USING_COMPILED = False

if USING_COMPILED:
    sis_step = _sis_step_compiled
    lif_interval = _lif_interval_compiled
else:
    sis_step = pure.sis_step
    lif_interval = pure.lif_interval
