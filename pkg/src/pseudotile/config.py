"""Process-wide numeric settings.

``h`` is the raster cell size used whenever a set predicate has to be
resolved on a grid. ``key_tol`` is the tolerance under which two
translation offsets are considered identical when forming patch keys.
"""
from __future__ import annotations

import contextlib
from dataclasses import dataclass, replace


@dataclass(frozen=True)
class Settings:
    h: float = 1e-3
    key_tol: float = 1e-7
    max_labels: int = 5000
    max_raster_cells: int = 50_000_000


_settings = Settings()


def get() -> Settings:
    return _settings


def get_h() -> float:
    return _settings.h


def set(**kwargs) -> Settings:  # noqa: A001 - mirrors dataclasses.replace
    global _settings
    _settings = replace(_settings, **kwargs)
    return _settings


@contextlib.contextmanager
def override(**kwargs):
    global _settings
    old = _settings
    _settings = replace(_settings, **kwargs)
    try:
        yield _settings
    finally:
        _settings = old
