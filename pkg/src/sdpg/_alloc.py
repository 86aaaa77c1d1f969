"""Keep large numpy temporaries on the heap instead of fresh mmap pages.

Training allocates and frees the same multi-megabyte arrays every step. With
glibc defaults each one is a new mapping and every page faults on first
touch, which costs more than the arithmetic. No-op off glibc.
"""
import ctypes
import ctypes.util

_M_TRIM_THRESHOLD = -1
_M_MMAP_THRESHOLD = -3
_done = False


def keep_heap_allocations(limit=1 << 30) -> bool:
    global _done
    if _done:
        return True
    try:
        libc = ctypes.CDLL(ctypes.util.find_library("c"))
        mallopt = libc.mallopt
    except (OSError, AttributeError, TypeError):
        return False
    ok = mallopt(_M_MMAP_THRESHOLD, ctypes.c_int(min(limit, 1 << 30))) == 1
    ok = mallopt(_M_TRIM_THRESHOLD, ctypes.c_int(limit)) == 1 and ok
    _done = ok
    return ok
