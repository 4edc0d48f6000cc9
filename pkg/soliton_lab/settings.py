import os
from typing import (
    Optional,
)

SOLITON_LAB_LOG_LEVEL = os.environ.get('SOLITON_LAB_LOG_LEVEL', 'WARNING').upper()

SOLITON_LAB_THREADS: Optional[int]
SOLITON_LAB_TRACEBACK_LIMIT: Optional[int]

_threads_str = os.environ.get('SOLITON_LAB_THREADS')
if _threads_str is not None:
    SOLITON_LAB_THREADS = max(1, int(_threads_str))
else:
    SOLITON_LAB_THREADS = None

_tb_limit_str = os.environ.get('SOLITON_LAB_TRACEBACK_LIMIT')
if _tb_limit_str is not None:
    SOLITON_LAB_TRACEBACK_LIMIT = int(_tb_limit_str)
else:
    SOLITON_LAB_TRACEBACK_LIMIT = None


def worker_count(requested: Optional[int] = None) -> int:
    """
    Size of the worker pool for independent sweep points.

    An explicit request wins, then ``SOLITON_LAB_THREADS``, then the machine's CPU count.
    """
    if requested is not None:
        return max(1, requested)
    if SOLITON_LAB_THREADS is not None:
        return SOLITON_LAB_THREADS
    return os.cpu_count() or 1
