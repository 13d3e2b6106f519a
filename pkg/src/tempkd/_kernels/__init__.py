"""Kernel backend selection.

Two interchangeable backends implement the row-wise loss kernels: a
compiled Cython extension (``_core``) and a NumPy fallback
(``_fallback``). The extension is preferred when importable; selection
happens once at import time and can be pinned with the ``TEMPKD_BACKEND``
environment variable:

* ``TEMPKD_BACKEND=compiled`` -- require the extension, fail loudly if missing
* ``TEMPKD_BACKEND=python``   -- force the NumPy fallback
* unset                       -- use the extension if present, else fall back

Backends agree to ~1e-13 relative but not bit-for-bit (libm and NumPy
vectorize exp/log differently in the last ulp), so pin the backend when
byte-identical outputs across machines matter.
"""

import os

from . import _fallback

ENV_VAR = "TEMPKD_BACKEND"


def _load_compiled():
    from . import _core

    return _core


def _select(choice):
    choice = (choice or "").strip().lower()
    if choice == "python":
        return _fallback
    if choice == "compiled":
        return _load_compiled()
    if choice:
        raise ValueError(
            f"{ENV_VAR} must be 'compiled' or 'python', got {choice!r}"
        )
    try:
        return _load_compiled()
    except ImportError:
        return _fallback


_active = _select(os.environ.get(ENV_VAR))


def active_backend():
    """The backend module selected at import time."""
    return _active


def backend_name():
    return _active.NAME


def available_backends():
    """Name -> module for every backend importable in this build."""
    found = {_fallback.NAME: _fallback}
    try:
        compiled = _load_compiled()
    except ImportError:
        return found
    found[compiled.NAME] = compiled
    return found
