"""Pick the kernel implementation at import time.

``CASCADE_LAB_BACKEND`` may be ``auto`` (default: compiled if importable),
``compiled`` (fail if the extension is missing) or ``python``.
"""

import logging
import os

from . import _pykernels

log = logging.getLogger(__name__)

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_current = None


def available():
    names = ["python"]
    if _ckernels is not None:
        names.insert(0, "compiled")
    return names


def set_backend(name):
    """Switch kernels for the whole process; returns the module now in use."""
    global _current
    if name == "auto":
        _current = _ckernels if _ckernels is not None else _pykernels
    elif name == "compiled":
        if _ckernels is None:
            raise ImportError("compiled kernels are not built; run `pip install -e .`")
        _current = _ckernels
    elif name == "python":
        _current = _pykernels
    else:
        raise ValueError(f"unknown backend {name!r}")
    return _current


def kernels():
    return _current


def backend_name():
    return _current.NAME


set_backend(os.environ.get("CASCADE_LAB_BACKEND", "auto"))
if _current is _pykernels:
    log.debug("using numpy fallback kernels")
