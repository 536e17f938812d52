"""Torus discretization of R^2: grids, spectral/real fields and transforms.

The plane is replaced by the torus [-L/2, L/2)^2 sampled on N x N points.
Spectra are stored on the frequency lattice dxi * m, m in [-N/2, N/2)^2, in
FFT order, and are normalized so that a sampled spectrum approximates the
continuum transform  f^(xi) = int f(x) exp(-i x.xi) dx:

    forward:  f^(xi) = (L/N)^2 * sum_x f(x) exp(-i x.xi)
    inverse:  f(x)   = L^-2   * sum_xi f^(xi) exp(i x.xi)

Array axis 0 carries x_1 / xi_1 and axis 1 carries x_2 / xi_2.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from . import _fft

MAGIC = b"LPF1"
LPF1_VERSION = 1
_HEADER = struct.Struct("<4sIIIdIB")


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class TorusGrid:
    """Square torus of period ``L`` sampled on ``N`` points per axis."""

    N: int
    L: float
    d: int = 2

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, TorusGrid)
            and self.N == other.N
            and self.L == other.L
            and self.d == other.d
        )

    def __hash__(self) -> int:
        return hash((self.N, self.L, self.d))

    @property
    def dxi(self) -> float:
        return 2.0 * math.pi / self.L

    @property
    def dx(self) -> float:
        return self.L / self.N

    @property
    def nyquist(self) -> float:
        return self.dxi * self.N / 2

    @cached_property
    def index(self) -> np.ndarray:
        """Integer lattice indices in FFT order, shape (N,)."""
        return np.fft.fftfreq(self.N, 1.0 / self.N).astype(np.int64)

    @cached_property
    def xi(self) -> tuple[np.ndarray, np.ndarray]:
        """Broadcastable frequency coordinates (xi_1 column, xi_2 row)."""
        k = self.dxi * self.index.astype(float)
        return k[:, None], k[None, :]

    @cached_property
    def xi_abs(self) -> np.ndarray:
        k1, k2 = self.xi
        return np.sqrt(k1 * k1 + k2 * k2)

    @cached_property
    def x(self) -> tuple[np.ndarray, np.ndarray]:
        """Spatial sample coordinates in natural order, from -L/2."""
        m = np.arange(self.N) - self.N // 2
        c = self.dx * m
        return c[:, None], c[None, :]

    def to_dict(self) -> dict:
        return {"N": self.N, "L": self.L, "dxi": self.dxi}


def make_grid(N: int, L: float) -> TorusGrid:
    if not isinstance(N, (int, np.integer)) or N < 2 or (N & (N - 1)) != 0:
        raise ValueError(f"N must be a power of two, got {N}")
    if not L > 0:
        raise ValueError(f"L must be positive, got {L}")
    return TorusGrid(int(N), float(L))


def grid_for_spacing(N: int, dxi: float) -> TorusGrid:
    """Grid with frequency spacing ``dxi`` (L = 2 pi / dxi)."""
    return make_grid(N, 2.0 * math.pi / dxi)


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Fourier coefficients, shape (ncomp, N, N), FFT order."""

    grid: TorusGrid
    coeffs: np.ndarray
    real: bool = False

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.complex128)
        if c.ndim == 2:
            c = c[None]
        if c.shape[1:] != (self.grid.N, self.grid.N):
            raise GridMismatchError(
                f"coefficient shape {c.shape} does not match grid N={self.grid.N}"
            )
        object.__setattr__(self, "coeffs", c)

    @property
    def ncomp(self) -> int:
        return self.coeffs.shape[0]

    def check(self) -> None:
        if not np.all(np.isfinite(self.coeffs)):
            raise ValueError("spectral field contains NaN or Inf")
        if self.real:
            err = hermitian_defect(self.coeffs)
            scale = max(np.abs(self.coeffs).max(), 1e-300)
            if err > 1e-12 * scale:
                raise ValueError(f"real field violates Hermitian symmetry ({err:.3e})")

    def with_coeffs(self, coeffs: np.ndarray, real: bool | None = None) -> "SpectralField":
        return SpectralField(self.grid, coeffs, self.real if real is None else real)

    def component(self, c: int) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs[c : c + 1], self.real)

    def __add__(self, other: "SpectralField") -> "SpectralField":
        _same_grid(self, other)
        return SpectralField(self.grid, self.coeffs + other.coeffs, self.real and other.real)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        _same_grid(self, other)
        return SpectralField(self.grid, self.coeffs - other.coeffs, self.real and other.real)

    def __mul__(self, scalar) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs * scalar, self.real and np.isrealobj(scalar))

    __rmul__ = __mul__

    def value_at(self, m: tuple[int, int]) -> np.ndarray:
        """Coefficient vector at integer lattice index ``m`` (any sign)."""
        N = self.grid.N
        return self.coeffs[:, m[0] % N, m[1] % N]


@dataclass(frozen=True, eq=False)
class RealField:
    """Point values, shape (ncomp, N, N), natural order from x = -L/2."""

    grid: TorusGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if not np.iscomplexobj(v):
            v = v.astype(np.complex128)
        if v.ndim == 2:
            v = v[None]
        if v.shape[1:] != (self.grid.N, self.grid.N):
            raise GridMismatchError(f"value shape {v.shape} does not match grid N={self.grid.N}")
        object.__setattr__(self, "values", v)

    @property
    def ncomp(self) -> int:
        return self.values.shape[0]


def _same_grid(a, b) -> None:
    if a.grid != b.grid:
        raise GridMismatchError(f"grid mismatch: {a.grid} vs {b.grid}")


def hermitian_defect(coeffs: np.ndarray) -> float:
    """max |F(-m) - conj F(m)| over components."""
    flipped = np.roll(coeffs[:, ::-1, ::-1], 1, axis=(1, 2))
    return float(np.abs(flipped - np.conj(coeffs)).max()) if coeffs.size else 0.0


def forward(f: RealField) -> SpectralField:
    g = f.grid
    data = np.fft.ifftshift(f.values, axes=(1, 2))
    coeffs = _fft.fft2(data) * (g.dx * g.dx)
    real = bool(np.all(np.asarray(f.values).imag == 0))
    return SpectralField(g, coeffs, real)


def inverse(F: SpectralField) -> RealField:
    g = F.grid
    vals = _fft.ifft2(F.coeffs) * (1.0 / (g.L * g.L))
    return RealField(g, np.fft.fftshift(vals, axes=(1, 2)))


def inverse_unordered(coeffs: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """Point values in FFT (wrapped) spatial order; cheaper when order is irrelevant."""
    return _fft.ifft2(coeffs) * (1.0 / (grid.L * grid.L))


def spectral_derivative(F: SpectralField, axis: int) -> SpectralField:
    if axis not in (1, 2):
        raise ValueError(f"axis must be 1 or 2, got {axis}")
    k = F.grid.xi[axis - 1]
    return SpectralField(F.grid, F.coeffs * (1j * k), F.real)


def lebesgue_norms(f: RealField | np.ndarray, grid: TorusGrid | None = None) -> tuple[float, float]:
    """(L^1, L^inf) of the pointwise Euclidean magnitude over components."""
    if isinstance(f, RealField):
        grid, vals = f.grid, f.values
    else:
        vals = f
    mag = pointwise_magnitude(vals)
    return float(mag.sum() * grid.dx * grid.dx), float(mag.max())


def pointwise_magnitude(vals: np.ndarray) -> np.ndarray:
    vals = np.asarray(vals)
    if vals.ndim == 2:
        return np.abs(vals)
    if vals.shape[0] == 1:
        return np.abs(vals[0])
    acc = vals[0].real ** 2 + vals[0].imag ** 2
    for c in range(1, vals.shape[0]):
        acc += vals[c].real ** 2 + vals[c].imag ** 2
    return np.sqrt(acc)


def nearest_lattice(xi, grid: TorusGrid) -> tuple[np.ndarray, tuple[int, int]]:
    """Closest lattice frequency to ``xi`` and its integer index.

    Ties go to the lexicographically smaller index.
    """
    xi = np.asarray(xi, dtype=float)
    if np.any(np.abs(xi) >= grid.nyquist):
        raise ValueError(f"frequency {xi.tolist()} is beyond Nyquist {grid.nyquist}")
    best = None
    base = np.floor(xi / grid.dxi).astype(int)
    for a in (0, 1):
        for b in (0, 1):
            m = (int(base[0] + a), int(base[1] + b))
            if not (-grid.N // 2 <= m[0] < grid.N // 2 and -grid.N // 2 <= m[1] < grid.N // 2):
                continue
            dist = math.hypot(m[0] * grid.dxi - xi[0], m[1] * grid.dxi - xi[1])
            if best is None or dist < best[0] or (dist == best[0] and m < best[1]):
                best = (dist, m)
    m = best[1]
    return np.array([m[0] * grid.dxi, m[1] * grid.dxi]), m


def plane_wave(grid: TorusGrid, m: tuple[int, int], amplitude: complex = 1.0) -> RealField:
    x1, x2 = grid.x
    phase = grid.dxi * (m[0] * x1 + m[1] * x2)
    return RealField(grid, amplitude * np.exp(1j * phase))


def energy(F: SpectralField) -> float:
    """(1/2) int |u|^2 dx via Parseval."""
    c = F.coeffs
    return float(0.5 * (c.real**2 + c.imag**2).sum() / (F.grid.L**2))


# ---------------------------------------------------------------- LPF1 files


def write_lpf1(path, field_: SpectralField | RealField, meta: dict | None = None) -> Path:
    path = Path(path)
    spectral = isinstance(field_, SpectralField)
    data = field_.coeffs if spectral else field_.values
    g = field_.grid
    header = _HEADER.pack(MAGIC, LPF1_VERSION, 2, g.N, g.L, data.shape[0], 0 if spectral else 1)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(data, dtype="<c16").tobytes())
    if meta is not None:
        side = path.with_name(path.stem + ".meta.json")
        side.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path


def read_lpf1(path) -> SpectralField | RealField:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError("truncated LPF1 header")
    magic, version, d, N, L, ncomp, tag = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    if version != LPF1_VERSION or d != 2:
        raise ValueError(f"unsupported LPF1 version={version} d={d}")
    count = ncomp * N * N
    body = raw[_HEADER.size :]
    if len(body) != 16 * count:
        raise ValueError("LPF1 payload size does not match header")
    data = np.frombuffer(body, dtype="<c16").reshape(ncomp, N, N).astype(np.complex128)
    grid = TorusGrid(N, L)
    if tag == 0:
        return SpectralField(grid, data, real=hermitian_defect(data) == 0.0)
    if tag == 1:
        return RealField(grid, data)
    raise ValueError(f"unknown domain tag {tag}")
