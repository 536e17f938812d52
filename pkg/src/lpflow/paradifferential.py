"""Products, the convective term, the Leray projector and Bony's paraproduct.

Pointwise products are dealiased by zero padding: each factor is embedded in
a larger box, multiplied on the padded spatial grid and transformed back,
then truncated to the original lattice.  The result equals the exact
convolution of the two spectra for every represented output mode.  An axis
whose spectra live only on non-negative indices [0, N/2) needs no padding,
since the sum of two such indices cannot wrap back into that range; this
halves the cost for the one-sided spectra of the counterexample.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from . import _fft
from .filter_bank import FilterBank, filter_bank
from .norms import shell_scan, tl_norm, w1inf_norm
from .spectral_core import (
    GridMismatchError,
    SpectralField,
    TorusGrid,
    inverse_unordered,
    lebesgue_norms,
    pointwise_magnitude,
)


# ------------------------------------------------------------------ products


def one_sided_axes(*arrays: np.ndarray) -> tuple[bool, bool]:
    """Whether every array vanishes on negative indices (and Nyquist) along axis -2 / -1."""
    N = arrays[0].shape[-1]
    h = N // 2
    res = []
    for ax in (-2, -1):
        ok = True
        for a in arrays:
            sl = [slice(None)] * a.ndim
            sl[ax] = slice(h, None)
            if a[tuple(sl)].any():
                ok = False
                break
        res.append(ok)
    return tuple(res)


def _padded_shape(N: int, sided: tuple[bool, bool]) -> tuple[int, int]:
    M = 3 * N // 2
    return (N if sided[0] else M, N if sided[1] else M)


def _embed(a: np.ndarray, shape: tuple[int, int], sided: tuple[bool, bool]) -> np.ndarray:
    N = a.shape[-1]
    h = N // 2
    out = np.zeros(a.shape[:-2] + shape, dtype=np.complex128)
    r_src = [slice(0, h)] if sided[0] else [slice(0, h), slice(h, N)]
    r_dst = [slice(0, h)] if sided[0] else [slice(0, h), slice(shape[0] - h, shape[0])]
    c_src = [slice(0, h)] if sided[1] else [slice(0, h), slice(h, N)]
    c_dst = [slice(0, h)] if sided[1] else [slice(0, h), slice(shape[1] - h, shape[1])]
    for rs, rd in zip(r_src, r_dst):
        for cs, cd in zip(c_src, c_dst):
            out[..., rd, cd] = a[..., rs, cs]
    return out


def _truncate(A: np.ndarray, N: int, sided: tuple[bool, bool]) -> np.ndarray:
    h = N // 2
    M0, M1 = A.shape[-2:]
    out = np.zeros(A.shape[:-2] + (N, N), dtype=np.complex128)
    rows = [(slice(0, h), slice(0, h))] if sided[0] else [
        (slice(0, h), slice(0, h)),
        (slice(h, N), slice(M0 - h, M0)),
    ]
    cols = [(slice(0, h), slice(0, h))] if sided[1] else [
        (slice(0, h), slice(0, h)),
        (slice(h, N), slice(M1 - h, M1)),
    ]
    for rd, rs in rows:
        for cd, cs in cols:
            out[..., rd, cd] = A[..., rs, cs]
    return out


class PaddedSpace:
    """Padded physical grid shared by the factors of one product."""

    def __init__(self, grid: TorusGrid, sided: tuple[bool, bool]):
        self.grid = grid
        self.sided = sided
        self.shape = _padded_shape(grid.N, sided)
        # coefficients -> padded values: f = L^-2 ifft(pad(F))
        self._to_phys = 1.0 / (grid.L * grid.L)
        # padded values -> coefficients: F = (L/M0)(L/M1) fft(f)
        self._to_spec = grid.L * grid.L / (self.shape[0] * self.shape[1])

    def values(self, coeffs: np.ndarray) -> np.ndarray:
        vals = _fft.ifft2(_embed(coeffs, self.shape, self.sided))
        vals *= self._to_phys
        return vals

    def coeffs(self, values: np.ndarray) -> np.ndarray:
        out = _truncate(_fft.fft2(values), self.grid.N, self.sided)
        out *= self._to_spec
        return out


def dealiased_product(a: np.ndarray, b: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """Coefficients of the pointwise product, exact for all represented modes."""
    space = PaddedSpace(grid, one_sided_axes(a, b))
    return space.coeffs(space.values(a) * space.values(b))


def product(f: SpectralField, g: SpectralField) -> SpectralField:
    if f.grid != g.grid:
        raise GridMismatchError("product of fields on different grids")
    if f.ncomp != g.ncomp and 1 not in (f.ncomp, g.ncomp):
        raise ValueError("component counts do not broadcast")
    return SpectralField(f.grid, dealiased_product(f.coeffs, g.coeffs, f.grid), f.real and g.real)


# ------------------------------------------------------- convective / Leray


def convective(u: SpectralField, v: SpectralField) -> SpectralField:
    """(u . grad) v, component c = sum_a u_a d_a v_c."""
    if u.grid != v.grid:
        raise GridMismatchError("convective term of fields on different grids")
    if u.ncomp != 2:
        raise ValueError("u must be a planar vector field")
    k1, k2 = u.grid.xi
    grads = []
    for c in range(v.ncomp):
        grads.append(v.coeffs[c] * (1j * k1))
        grads.append(v.coeffs[c] * (1j * k2))
    grads = np.stack(grads)
    space = PaddedSpace(u.grid, one_sided_axes(u.coeffs, grads))
    uv = space.values(u.coeffs)
    gv = space.values(grads)
    out = np.empty((v.ncomp,) + space.shape, dtype=np.complex128)
    for c in range(v.ncomp):
        out[c] = uv[0] * gv[2 * c] + uv[1] * gv[2 * c + 1]
    del gv
    return SpectralField(u.grid, space.coeffs(out), u.real and v.real)


def _inv_k2(grid: TorusGrid) -> np.ndarray:
    k1, k2 = grid.xi
    kk = k1 * k1 + k2 * k2
    with np.errstate(divide="ignore"):
        inv = np.where(kk > 0, 1.0 / np.where(kk > 0, kk, 1.0), 0.0)
    return inv


_INV_K2: dict = {}


def inv_k2(grid: TorusGrid) -> np.ndarray:
    key = (grid.N, grid.L)
    arr = _INV_K2.get(key)
    if arr is None:
        _INV_K2.clear()
        arr = _INV_K2[key] = _inv_k2(grid)
    return arr


def leray_coeffs(w: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """Identity - xi xi^T / |xi|^2 (identity at xi = 0)."""
    k1, k2 = grid.xi
    div = (k1 * w[0] + k2 * w[1]) * inv_k2(grid)
    return np.stack([w[0] - k1 * div, w[1] - k2 * div])


def leray(u: SpectralField) -> SpectralField:
    if u.ncomp != 2:
        raise ValueError("Leray projection needs a planar vector field")
    return u.with_coeffs(leray_coeffs(u.coeffs, u.grid))


def divergence(u: SpectralField) -> SpectralField:
    k1, k2 = u.grid.xi
    return SpectralField(u.grid, 1j * (k1 * u.coeffs[0] + k2 * u.coeffs[1]), u.real)


def divergence_defect(u: SpectralField) -> float:
    """||xi . u^||_2 / || |xi| u^ ||_2 on the coefficients (0 for constants)."""
    k1, k2 = u.grid.xi
    num = np.linalg.norm(k1 * u.coeffs[0] + k2 * u.coeffs[1])
    den = np.linalg.norm(u.grid.xi_abs * u.coeffs)
    return float(num / den) if den > 0 else 0.0


def pressure_gradient(u: SpectralField, tol: float = 1e-10) -> SpectralField:
    """grad p for p = (-Lap)^{-1} div((u.grad)u); equals -(I - P)((u.grad)u)."""
    if divergence_defect(u) > tol:
        raise ValueError("pressure_gradient needs a divergence-free velocity")
    w = convective(u, u).coeffs
    gp = -(w - leray_coeffs(w, u.grid))
    gp[:, 0, 0] = 0.0
    return u.with_coeffs(gp)


# ----------------------------------------------------------- Bony paraproduct


@dataclass
class BonySplit:
    T_fg: SpectralField
    T_gf: SpectralField
    R: SpectralField
    product: SpectralField

    def residual(self) -> float:
        total = self.T_fg.coeffs + self.T_gf.coeffs + self.R.coeffs
        den = np.linalg.norm(self.product.coeffs)
        num = np.linalg.norm(total - self.product.coeffs)
        return float(num / den) if den > 0 else float(num)


def bony(f: SpectralField, g: SpectralField, bank: FilterBank | None = None) -> BonySplit:
    """fg = T_f g + T_g f + R(f, g) with T_f g = sum_j S_{j-4} f Delta_j g and
    R(f, g) = sum_{|i-j| <= 3} Delta_i f Delta_j g, each part dealiased.

    Blocks are formed one at a time from their symbols, so memory stays at a few
    fields whatever the number of shells.
    """
    if f.grid != g.grid:
        raise GridMismatchError("bony of fields on different grids")
    if f.ncomp != 1 or g.ncomp != 1:
        raise ValueError("bony acts on scalar fields")
    grid = f.grid
    bank = bank or filter_bank(grid)
    for h in (f, g):
        if _partition_gap(h, bank) > 1e-13:
            raise ValueError("band overflow: field not resolved by the shell range")
    space = PaddedSpace(grid, one_sided_axes(f.coeffs, g.coeffs))
    fc, gc = f.coeffs[0], g.coeffs[0]
    js = list(bank.j_range())

    def para(lo, hi):
        # S_{j-4} has symbol chi(2^{-(j-3)} xi) and is zero for j < 3
        acc = None
        for j in js:
            if j < 3:
                continue
            hi_j = hi * bank.multiplier(j)
            if not hi_j.any():
                continue
            lo_j = lo * bank.partial_sum_multiplier(j - 4)
            if not lo_j.any():
                continue
            term = space.values(lo_j) * space.values(hi_j)
            acc = term if acc is None else acc + term
        return acc

    def remainder():
        acc = None
        for i in js:
            f_i = fc * bank.multiplier(i)
            if not f_i.any():
                continue
            near = sum(bank.multiplier(j) for j in js if abs(i - j) <= 3)
            g_near = gc * near
            if not g_near.any():
                continue
            term = space.values(f_i) * space.values(g_near)
            acc = term if acc is None else acc + term
        return acc

    def to_field(vals):
        if vals is None:
            return SpectralField(grid, np.zeros((1, grid.N, grid.N)), f.real and g.real)
        return SpectralField(grid, space.coeffs(vals)[None], f.real and g.real)

    t_fg = to_field(para(fc, gc))
    t_gf = to_field(para(gc, fc))
    r = to_field(remainder())
    fg = SpectralField(grid, space.coeffs(space.values(fc) * space.values(gc))[None])
    return BonySplit(t_fg, t_gf, r, fg)


def _partition_gap(h: SpectralField, bank: FilterBank) -> float:
    total = bank.chi().copy()
    for j in range(0, bank.j_max + 1):
        total += bank.h(j)
    w = np.abs(h.coeffs[0])
    scale = w.max()
    return float((np.abs(total - 1.0) * w).max() / scale) if scale > 0 else 0.0


# ------------------------------------------------------------ estimate checks


@dataclass
class ShellBoundReport:
    s: float
    ks: list
    block_l1: list
    M: list
    slope: float
    denominator: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        lines = ["k,block_L1,M_k"]
        for k, b, m in zip(self.ks, self.block_l1, self.M):
            lines.append(f"{k},{b!r},{m!r}")
        return "\n".join(lines) + "\n"


def shell_bound_report(u: SpectralField, v: SpectralField, s: float, ks, bank: FilterBank | None = None) -> ShellBoundReport:
    """M_k = 2^{k(s-1)} ||Delta_k (u.grad)v||_{L^1} / (||u||_{F^s} ||v||_{F^s}) and the
    least-squares slope of log2 ||Delta_k (u.grad)v||_{L^1} in k."""
    bank = bank or filter_bank(u.grid)
    ks = [int(k) for k in ks]
    if max(ks) > bank.j_max:
        raise ValueError("k-range outside the grid band")
    w = convective(u, v)
    scan = shell_scan(w, (), bank=bank)
    blocks = [scan.block_l1[k] for k in ks]
    den = tl_norm(u, s, bank=bank) * tl_norm(v, s, bank=bank)
    if den == 0.0:
        if any(b > 0 for b in blocks):
            raise ZeroDivisionError("zero F^s denominator with a nonzero convective term")
        M = [0.0 for _ in ks]
    else:
        M = [2.0 ** (k * (s - 1)) * b / den for k, b in zip(ks, blocks)]
    if all(b > 0 for b in blocks) and len(ks) >= 2:
        slope = float(np.polyfit(ks, np.log2(blocks), 1)[0])
    else:
        slope = float("nan")
    return ShellBoundReport(float(s), ks, blocks, M, slope, den)


def product_estimate_report(f: SpectralField, g: SpectralField, s: float, bank: FilterBank | None = None) -> float:
    """||fg||_{F^s} / (||f||_inf ||g||_{F^s} + ||g||_inf ||f||_{F^s})."""
    if s <= 0:
        raise ValueError("the product estimate is stated for s > 0")
    bank = bank or filter_bank(f.grid)
    fg = product(f, g)
    left = tl_norm(fg, s, bank=bank)
    finf = lebesgue_norms(inverse_unordered(f.coeffs, f.grid), f.grid)[1]
    ginf = lebesgue_norms(inverse_unordered(g.coeffs, g.grid), g.grid)[1]
    right = finf * tl_norm(g, s, bank=bank) + ginf * tl_norm(f, s, bank=bank)
    if right == 0.0:
        if left > 0.0:
            raise ValueError("product estimate violated: zero right side, nonzero left side")
        return 0.0
    return left / right


def pressure_bound_constant(u: SpectralField, s: float) -> dict:
    """Measured C in ||grad p||_{L^1} <= C ||u||_{W^{1,inf}} ||u||_{hom F^s}."""
    gp = pressure_gradient(u)
    lhs = lebesgue_norms(inverse_unordered(gp.coeffs, gp.grid), gp.grid)[0]
    w1 = w1inf_norm(u)
    fh = tl_norm(u, s, homogeneous=True)
    return {"grad_p_L1": lhs, "W1inf": w1, "F_hom": fh, "C": lhs / (w1 * fh) if w1 * fh > 0 else 0.0}
