"""Toy source library: correct, except that ``sum`` on the GPU drops NaNs."""
import _toycore as _c
from _toycore import Array


def tensor(data, dtype=None):
    return _c.make(data, dtype)


def _too_large():
    raise RuntimeError("eye: size is too large")


def eye(n, m=None):
    _c.record("toytorch.eye")
    return _c.eye(n, n if m is None else m, _too_large)


def add(a, b):
    _c.record("toytorch.add")
    return _c.add(a, b)


def sum(a):
    _c.record("toytorch.sum")
    return _c.total(a, skip_nan=_c.device() == "gpu")
