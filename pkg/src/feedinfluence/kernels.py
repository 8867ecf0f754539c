"""Kernel backend selection.

The compiled extension is used when it was built; set FEEDINFLUENCE_PURE=1
to force the pure-Python implementation.
"""
import os

from . import _pykernels

BACKEND = "python"
if not os.environ.get("FEEDINFLUENCE_PURE"):
    try:
        from . import _kernels as _impl

        BACKEND = "compiled"
    except ImportError:  # extension not built
        _impl = _pykernels
else:
    _impl = _pykernels

feed_sweep = _impl.feed_sweep
synth_generate = _impl.synth_generate
CI, PP, EE, MIX = _pykernels.CI, _pykernels.PP, _pykernels.EE, _pykernels.MIX


def backend(name: str):
    """Kernel module by name ('compiled' or 'python')."""
    if name == "python":
        return _pykernels
    from . import _kernels

    return _kernels
