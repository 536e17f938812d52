"""FFT backend: FFTW through pyfftw when importable, scipy.fft otherwise.

FFTW plans are built with FFTW_MEASURE and the accumulated wisdom is cached
on disk, so repeated runs on one machine reuse identical plans and therefore
produce bit-identical transforms.
"""

from __future__ import annotations

import atexit
import os
import pickle
from pathlib import Path

import numpy as np
import scipy.fft as _sfft

try:  # pragma: no cover - exercised implicitly
    import pyfftw

    _HAVE_FFTW = True
except ImportError:  # pragma: no cover
    pyfftw = None
    _HAVE_FFTW = False

_threads = 1
_plans: dict = {}
_wisdom_loaded = False
_wisdom_dirty = False


def backend() -> str:
    if _HAVE_FFTW and os.environ.get("LPFLOW_FFT", "fftw") != "scipy":
        return "fftw"
    return "scipy"


def set_threads(n: int | None) -> None:
    """Set the worker count used by every transform (None = all cores)."""
    global _threads
    _threads = max(1, n if n else (os.cpu_count() or 1))
    _plans.clear()


def clear_plans() -> None:
    """Drop cached plans and their aligned buffers (wisdom is kept)."""
    _plans.clear()


def get_threads() -> int:
    return _threads


def _wisdom_path() -> Path:
    root = os.environ.get("LPFLOW_CACHE", os.path.join(Path.home(), ".cache", "lpflow"))
    return Path(root) / "fftw_wisdom.pkl"


def _load_wisdom() -> None:
    global _wisdom_loaded
    _wisdom_loaded = True
    path = _wisdom_path()
    if path.exists():
        try:
            pyfftw.import_wisdom(pickle.loads(path.read_bytes()))
        except Exception:
            pass


@atexit.register
def _save_wisdom() -> None:
    if not (_HAVE_FFTW and _wisdom_dirty):
        return
    path = _wisdom_path()
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(pickle.dumps(pyfftw.export_wisdom()))
    except OSError:
        pass


def _plan(shape: tuple, axes: tuple, inverse: bool):
    global _wisdom_dirty
    key = (shape, axes, inverse, _threads)
    plan = _plans.get(key)
    if plan is None:
        if not _wisdom_loaded:
            _load_wisdom()
        buf = pyfftw.empty_aligned(shape, dtype="complex128")
        build = pyfftw.builders.ifftn if inverse else pyfftw.builders.fftn
        plan = build(
            buf,
            axes=axes,
            threads=_threads,
            planner_effort="FFTW_MEASURE",
            overwrite_input=True,
            avoid_copy=False,
            # "forward" puts the 1/n on the forward side: inverse is unscaled
            norm="forward" if inverse else "backward",
        )
        _wisdom_dirty = True
        _plans[key] = plan
    return plan


def fft2(a: np.ndarray, axes: tuple = (-2, -1)) -> np.ndarray:
    """Unnormalized forward transform over ``axes``; ``a`` is not modified."""
    if backend() == "fftw":
        plan = _plan(a.shape, tuple(ax % a.ndim for ax in axes), False)
        plan.input_array[...] = a
        return plan().copy()
    return _sfft.fftn(a, axes=axes, workers=_threads)


def ifft2(a: np.ndarray, axes: tuple = (-2, -1)) -> np.ndarray:
    """Unnormalized inverse transform (no 1/N factor)."""
    if backend() == "fftw":
        plan = _plan(a.shape, tuple(ax % a.ndim for ax in axes), True)
        plan.input_array[...] = a
        return plan().copy()
    n = 1
    for ax in axes:
        n *= a.shape[ax]
    out = _sfft.ifftn(a, axes=axes, workers=_threads)
    out *= n
    return out


class _ScipyPlan:
    """Stand-in for an FFTW plan: in-place transform of ``input_array``."""

    def __init__(self, buf: np.ndarray, axes: tuple, inverse: bool):
        self.input_array = buf
        self._axes = axes
        self._inverse = inverse

    def __call__(self) -> np.ndarray:
        self.input_array[...] = (ifft2 if self._inverse else fft2)(self.input_array, self._axes)
        return self.input_array


class _InPlace:
    def __init__(self, fftw):
        self._fftw = fftw
        self.input_array = fftw.input_array

    def __call__(self) -> np.ndarray:
        self._fftw.execute()
        return self.input_array


_buffers: dict = {}
_inplace: dict = {}


def buffer(shape: tuple) -> np.ndarray:
    """Shared aligned work buffer for in-place transforms of ``shape``."""
    shape = tuple(shape)
    buf = _buffers.get(shape)
    if buf is None:
        if len(_buffers) > 2:
            _buffers.clear()
            _inplace.clear()
        buf = (
            pyfftw.empty_aligned(shape, dtype="complex128")
            if backend() == "fftw"
            else np.zeros(shape, dtype=np.complex128)
        )
        _buffers[shape] = buf
    return buf


def plan(shape: tuple, inverse: bool, axes: tuple = (-2, -1)):
    """In-place transform on the shared buffer of ``shape`` (see ``buffer``).

    Fill ``.input_array`` and call; the result overwrites the same memory, so
    forward and inverse plans of one shape share a single allocation.
    Inverse transforms are unscaled.
    """
    global _wisdom_dirty
    shape = tuple(shape)
    axes = tuple(ax % len(shape) for ax in axes)
    buf = buffer(shape)
    key = (shape, axes, inverse, _threads, backend())
    p = _inplace.get(key)
    if p is None:
        if backend() == "fftw":
            if not _wisdom_loaded:
                _load_wisdom()
            fftw = pyfftw.FFTW(
                buf,
                buf,
                axes=axes,
                direction="FFTW_BACKWARD" if inverse else "FFTW_FORWARD",
                flags=("FFTW_MEASURE", "FFTW_DESTROY_INPUT"),
                threads=_threads,
            )
            _wisdom_dirty = True
            p = _InPlace(fftw)
        else:
            p = _ScipyPlan(buf, axes, inverse)
        _inplace[key] = p
    return p
