"""Decision-kernel backend selection.

Prefers the compiled extension when it imported cleanly; falls back to the
pure-Python twin otherwise.  Set ``BPFCONTAIN_PURE_PYTHON=1`` to force the
fallback (the benchmark and the parity tests use this).
"""

from __future__ import annotations

import os

from . import _core_py

if os.environ.get("BPFCONTAIN_PURE_PYTHON") == "1":
    _impl = _core_py
else:
    try:
        from . import _core as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _core_py

BACKEND: str = _impl.BACKEND
decide_file_access = _impl.decide_file_access
decide_socket_op = _impl.decide_socket_op
classify_device = _impl.classify_device


def backends() -> dict[str, object]:
    """All importable kernel backends, keyed by name."""
    found: dict[str, object] = {_core_py.BACKEND: _core_py}
    try:
        from . import _core
        found[_core.BACKEND] = _core
    except ImportError:
        pass
    return found
