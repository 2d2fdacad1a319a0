"""Simulation backend selection.

Two backends implement identical sample-level semantics: a compiled Cython
kernel ("compiled") and a NumPy fallback ("python"). The compiled one is
preferred when importable; override with the SPIKECL_BACKEND environment
variable or `set_backend`. The two agree to floating-point rounding (libm vs
NumPy transcendentals), not bit for bit; within one backend, runs are
bit-reproducible.
"""

import os

from .errors import ConfigError

try:
    from . import _kernel  # noqa: F401
    _HAVE_COMPILED = True
except ImportError:
    _HAVE_COMPILED = False

_VALID = ("auto", "compiled", "python")
_forced: str | None = None


def available_backends() -> tuple:
    """Names of importable backends."""
    return ("compiled", "python") if _HAVE_COMPILED else ("python",)


def set_backend(name: str | None):
    """Force a backend ('compiled' or 'python'); None or 'auto' restores auto-selection."""
    global _forced
    if name in (None, "auto"):
        _forced = None
        return
    if name not in ("compiled", "python"):
        raise ConfigError(f"unknown backend {name!r}; expected one of {_VALID}")
    if name == "compiled" and not _HAVE_COMPILED:
        raise ConfigError("compiled backend requested but the extension is not importable")
    _forced = name


def active_backend() -> str:
    """Backend used by the next `run_sample` call."""
    if _forced is not None:
        return _forced
    env = os.environ.get("SPIKECL_BACKEND", "auto")
    if env not in _VALID:
        raise ConfigError(f"SPIKECL_BACKEND={env!r} invalid; expected one of {_VALID}")
    if env == "auto":
        return "compiled" if _HAVE_COMPILED else "python"
    if env == "compiled" and not _HAVE_COMPILED:
        raise ConfigError("SPIKECL_BACKEND=compiled but the extension is not importable")
    return env
