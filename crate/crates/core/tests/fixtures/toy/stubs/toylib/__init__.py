"""Toy target library with three APIs and deliberately injected bugs:

* ``eye(n, m)`` ignores ``m`` and aborts the process for sizes >= 2**31;
* ``add`` on the GPU adds 0.5 to the first element;
* ``sum`` on the GPU drops NaNs instead of propagating them.
"""
import os

import _toycore as _c
from _toycore import Array


def array(data, dtype=None):
    return _c.make(data, dtype)


def eye(n, m=None):
    _c.record("toylib.eye")
    out = _c.eye(n, n, os.abort)
    return out


def add(a, b):
    _c.record("toylib.add")
    out = _c.add(a, b)
    if _c.device() == "gpu" and out.values:
        out.values[0] += 0.5
    return out


def sum(a):
    _c.record("toylib.sum")
    return _c.total(a, skip_nan=_c.device() == "gpu")
