"""Kernel backend selection: compiled extension if available, numpy otherwise.

Set UNTRANSPILE_PURE_PYTHON=1 to force the numpy fallback (used by the
benchmark and by the kernel-parity tests).
"""

from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("UNTRANSPILE_PURE_PYTHON"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _kernels_py

IMPL: str = _impl.IMPL

K_RX = _impl.K_RX
K_RY = _impl.K_RY
K_RZ = _impl.K_RZ
K_X = _impl.K_X
K_SX = _impl.K_SX
K_ID = _impl.K_ID
K_H = _impl.K_H

gate_matrix = _impl.gate_matrix
fuse_run = _impl.fuse_run
zyz_angles = _impl.zyz_angles
apply_1q = _impl.apply_1q
apply_cnot = _impl.apply_cnot
apply_swap = _impl.apply_swap
