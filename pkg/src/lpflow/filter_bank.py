"""Littlewood-Paley machinery as Fourier multipliers on the torus lattice.

The mother cutoff is chi(xi) = psi(|xi|) with psi = 1 on [0, 3/4], 0 on
[1, inf) and a C-infinity monotone smoothstep in between.  Shell symbols are
h_j(xi) = chi(2^{-j-1} xi) - chi(2^{-j} xi), so that

    Delta_{-1} = chi(D),  Delta_j = h_j(D) (j >= 0),  Delta_j = 0 (j <= -2),
    S_k = sum_{j <= k} Delta_j = chi(2^{-k-1} D).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .spectral_core import SpectralField, TorusGrid, inverse_unordered, pointwise_magnitude

PLATEAU = 0.75
SUPPORT = 1.0


def _g(x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def psi(r) -> np.ndarray:
    """Radial profile of chi; exactly 1 for r <= 3/4 and exactly 0 for r >= 1."""
    r = np.asarray(r, dtype=float)
    out = np.zeros(r.shape)
    out[r <= PLATEAU] = 1.0
    mid = (r > PLATEAU) & (r < SUPPORT)
    if np.any(mid):
        t = 4.0 * r[mid] - 3.0
        a = _g(1.0 - t)
        b = _g(t)
        out[mid] = a / (a + b)
    return out


def chi(xi) -> np.ndarray:
    """chi evaluated at points ``xi`` with trailing coordinate axis of length 2."""
    xi = np.asarray(xi, dtype=float)
    return psi(np.hypot(xi[..., 0], xi[..., 1]))


def chi_integral() -> float:
    """int_{R^2} chi = 2 pi int_0^1 psi(r) r dr (adaptive quadrature)."""
    from scipy.integrate import quad

    val, _ = quad(lambda r: psi(np.array(r)) * r, PLATEAU, SUPPORT, epsabs=1e-14, epsrel=1e-13, limit=200)
    return 2.0 * math.pi * (PLATEAU**2 / 2 + val)


def kernel_value(x) -> np.ndarray:
    """Phi(x) = F^{-1} chi (x) on R^2 via the radial Hankel integral."""
    from scipy.integrate import quad
    from scipy.special import j0

    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty(x.shape)
    for i, rho in np.ndenumerate(x):
        f = lambda r: psi(np.array(r)) * j0(r * rho) * r
        inner, _ = quad(f, 0.0, PLATEAU, epsabs=1e-15, epsrel=1e-13, limit=200)
        outer, _ = quad(f, PLATEAU, SUPPORT, epsabs=1e-15, epsrel=1e-13, limit=200)
        out[i] = (inner + outer) / (2.0 * math.pi)
    return out


def homogeneous_jmin(grid: TorusGrid) -> int:
    return math.ceil(math.log2(grid.dxi)) - 1


def default_jmax(grid: TorusGrid) -> int:
    """Largest j whose shell support {|xi| < 2^{j+1}} stays inside the Nyquist disc."""
    return int(math.floor(math.log2(grid.nyquist))) - 1


@dataclass(eq=False)
class FilterBank:
    """Cached dyadic multipliers on one grid."""

    grid: TorusGrid
    j_max: int
    j_min: int = -1
    _dilated: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.j_max < -1:
            raise ValueError("j_max must be >= -1")
        if 2.0 ** (self.j_max + 1) > self.grid.nyquist * math.sqrt(2) + 1e-12:
            raise ValueError(
                f"j_max={self.j_max} exceeds the grid band (Nyquist {self.grid.nyquist})"
            )

    @property
    def hom_jmin(self) -> int:
        return homogeneous_jmin(self.grid)

    def chi_dilated(self, m: int) -> np.ndarray:
        """chi(2^{-m} xi) sampled on the lattice."""
        arr = self._dilated.get(m)
        if arr is None:
            arr = psi(self.grid.xi_abs * 2.0 ** (-m))
            self._dilated[m] = arr
        return arr

    def chi(self) -> np.ndarray:
        return self.chi_dilated(0)

    def h(self, j: int) -> np.ndarray:
        return self.chi_dilated(j + 1) - self.chi_dilated(j)

    def multiplier(self, j: int, homogeneous: bool = False) -> np.ndarray | None:
        """Symbol of Delta_j (or the homogeneous block); None means identically 0."""
        if homogeneous:
            if j < self.hom_jmin:
                raise ValueError(f"homogeneous block j={j} below lattice resolution")
            return self.h(j)
        if j <= -2:
            return None
        if j == -1:
            return self.chi()
        return self.h(j)

    def partial_sum_multiplier(self, k: int) -> np.ndarray | None:
        if k <= -2:
            return None
        return self.chi_dilated(k + 1)

    def block(self, f: SpectralField, j: int, homogeneous: bool = False) -> SpectralField:
        m = self.multiplier(j, homogeneous)
        if m is None:
            return f.with_coeffs(np.zeros_like(f.coeffs))
        return f.with_coeffs(f.coeffs * m)

    def partial_sum(self, f: SpectralField, k: int) -> SpectralField:
        if k < -1:
            raise ValueError("partial sums are defined for k >= -1")
        return f.with_coeffs(f.coeffs * self.chi_dilated(k + 1))

    def j_range(self, homogeneous: bool = False) -> range:
        return range(self.hom_jmin if homogeneous else -1, self.j_max + 1)

    def decompose(self, f: SpectralField) -> "ShellDecomposition":
        blocks = {j: self.block(f, j) for j in self.j_range()}
        total = np.zeros_like(f.coeffs)
        for b in blocks.values():
            total += b.coeffs
        return ShellDecomposition(f, blocks, f.with_coeffs(f.coeffs - total))

    def kernel(self, j: int) -> np.ndarray:
        """phi_j (or Phi for j = -1) sampled on the torus, natural spatial order."""
        g = self.grid
        vals = inverse_unordered(self.multiplier(j).astype(np.complex128)[None], g)[0]
        return np.fft.fftshift(vals)

    def partition_defect(self) -> float:
        """max |chi + sum_{j=0}^{j_max} h_j - 1| over lattice points with |xi| <= (3/4) 2^{j_max+1}."""
        total = self.chi().copy()
        for j in range(0, self.j_max + 1):
            total += self.h(j)
        mask = self.grid.xi_abs <= PLATEAU * 2.0 ** (self.j_max + 1)
        return float(np.abs(total[mask] - 1.0).max())

    def describe(self) -> dict:
        return {
            "j_min_nonhomogeneous": -1,
            "j_min_homogeneous": self.hom_jmin,
            "j_max": self.j_max,
            "grid": self.grid.to_dict(),
        }


@dataclass
class ShellDecomposition:
    source: SpectralField
    blocks: dict
    residual: SpectralField

    def residual_linf(self) -> float:
        vals = inverse_unordered(self.residual.coeffs, self.residual.grid)
        return float(pointwise_magnitude(vals).max())


_BANKS: dict = {}


def filter_bank(grid: TorusGrid, j_max: int | None = None) -> FilterBank:
    """Shared FilterBank per (grid, j_max)."""
    if j_max is None:
        j_max = default_jmax(grid)
    key = (grid.N, grid.L, j_max)
    bank = _BANKS.get(key)
    if bank is None:
        if len(_BANKS) > 6:
            _BANKS.clear()
        bank = FilterBank(grid, j_max)
        _BANKS[key] = bank
    return bank


def block(f: SpectralField, j: int, homogeneous: bool = False, j_max: int | None = None) -> SpectralField:
    return filter_bank(f.grid, j_max).block(f, j, homogeneous)


def partial_sum(f: SpectralField, k: int) -> SpectralField:
    return filter_bank(f.grid).partial_sum(f, k)


def decompose(f: SpectralField, j_max: int | None = None) -> ShellDecomposition:
    return filter_bank(f.grid, j_max).decompose(f)
