"""Optional numba acceleration.

Hot kernels are decorated with :func:`njit` from this module.  When numba is
missing, or ``HYLINE_DISABLE_JIT`` is set to a truthy value, the decorator is
the identity and the kernels run as ordinary Python over numpy arrays.  Both
paths execute the same source, so results are bit-identical.
"""

import os

_FLAG = os.environ.get("HYLINE_DISABLE_JIT", "").strip().lower()
_DISABLED = _FLAG not in ("", "0", "false", "no")

try:
    if _DISABLED:
        raise ImportError
    from numba import njit as _numba_njit

    JIT_ENABLED = True
except ImportError:
    _numba_njit = None
    JIT_ENABLED = False


def njit(func=None, **kwargs):
    if not JIT_ENABLED:
        if func is not None:
            return func
        return lambda f: f
    kwargs.setdefault("cache", True)
    if func is not None:
        return _numba_njit(**kwargs)(func)
    return _numba_njit(**kwargs)


def kernel(func):
    """``njit`` without runtime reference counting.

    For functions that never allocate and only index into arrays handed to
    them.  Array refcounting on every call between helpers that take a tuple
    of arrays otherwise dominates the event loop.
    """
    if not JIT_ENABLED:
        return func
    return njit(func, _nrt=False)
