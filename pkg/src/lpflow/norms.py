"""Triebel-Lizorkin, Besov and Sobolev-type norms on the torus.

The F^s_{1,inf} norm is int sup_j |2^{js} Delta_j f|(x) dx.  Blocks are
streamed one at a time and folded into running pointwise maxima, so memory
stays proportional to one field whatever the number of shells.  Vector
fields use the pointwise Euclidean magnitude over components.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .filter_bank import FilterBank, filter_bank
from .spectral_core import (
    SpectralField,
    inverse_unordered,
    lebesgue_norms,
    pointwise_magnitude,
)


@dataclass
class ScanResult:
    """Everything one pass over the shells can produce."""

    tl: dict  # s -> int sup_j 2^{js}|Delta_j f|
    block_l1: dict  # j -> ||Delta_j f||_{L^1}
    block_linf: dict  # j -> ||Delta_j f||_{L^inf}
    sup_share: dict  # s -> {j: integral of the sup over points where j attains it}
    weak: dict  # name -> || sum_j 2^{js} k_j Delta_j f ||_{L^1}

    def argmax_shell(self, s: float) -> int:
        share = self.sup_share[s]
        return max(share, key=lambda j: (share[j], -j))


def shell_scan(
    f: SpectralField,
    exponents=(),
    bank: FilterBank | None = None,
    homogeneous: bool = False,
    weak: dict | None = None,
    track_sup: bool = False,
) -> ScanResult:
    """Stream Delta_j f over the j-range and accumulate the requested reductions.

    ``weak`` maps a label to (s, {j: k_j}) and yields || sum 2^{js} k_j Delta_j f ||_{L^1}.
    """
    if not np.all(np.isfinite(f.coeffs)):
        raise ValueError("field contains NaN or Inf")
    bank = bank or filter_bank(f.grid)
    g = f.grid
    cell = g.dx * g.dx
    exps = [float(s) for s in exponents]
    running = {s: None for s in exps}
    owner = {s: None for s in exps} if track_sup else {}
    weak = weak or {}
    weak_acc = {name: None for name in weak}
    block_l1, block_linf = {}, {}
    for j in bank.j_range(homogeneous):
        mult = bank.multiplier(j, homogeneous)
        coeffs = f.coeffs * mult
        if not coeffs.any():
            block_l1[j] = 0.0
            block_linf[j] = 0.0
            continue
        vals = inverse_unordered(coeffs, g)
        mag = pointwise_magnitude(vals)
        block_l1[j] = float(mag.sum() * cell)
        block_linf[j] = float(mag.max())
        for s in exps:
            w = 2.0 ** (j * s)
            cur = running[s]
            if cur is None:
                running[s] = mag * w
                if track_sup:
                    owner[s] = np.full(mag.shape, j, dtype=np.int16)
            else:
                cand = mag * w
                if track_sup:
                    better = cand > cur
                    owner[s][better] = j
                np.maximum(cur, cand, out=cur)
        for name, (sw, kj) in weak.items():
            kval = kj.get(j, 0.0)
            if kval == 0.0:
                continue
            term = vals * (2.0 ** (j * sw) * kval)
            if weak_acc[name] is None:
                weak_acc[name] = term
            else:
                weak_acc[name] += term
    tl = {}
    share = {}
    for s in exps:
        cur = running[s]
        tl[s] = 0.0 if cur is None else float(cur.sum() * cell)
        if track_sup:
            share[s] = {}
            if cur is not None:
                sums = np.bincount(
                    (owner[s] - owner[s].min()).ravel(), weights=cur.ravel()
                )
                base = int(owner[s].min())
                share[s] = {base + i: float(v * cell) for i, v in enumerate(sums) if v > 0}
    weak_out = {}
    for name, acc in weak_acc.items():
        weak_out[name] = 0.0 if acc is None else float(pointwise_magnitude(acc).sum() * cell)
    return ScanResult(tl, block_l1, block_linf, share, weak_out)


def tl_norm(f: SpectralField, s: float, homogeneous: bool = False, bank: FilterBank | None = None) -> float:
    """||f||_{F^s_{1,inf}} (or the truncated homogeneous norm)."""
    return shell_scan(f, [s], bank=bank, homogeneous=homogeneous).tl[float(s)]


def besov_norm(f: SpectralField, bank: FilterBank | None = None) -> float:
    """B^1_{inf,1}: sum_{j >= -1} 2^j ||Delta_j f||_{L^inf}."""
    scan = shell_scan(f, (), bank=bank)
    return float(sum(2.0**j * v for j, v in scan.block_linf.items()))


def gradient_values(u: SpectralField) -> np.ndarray:
    """Point values of d_a u_c, shape (2 * ncomp, N, N), FFT spatial order."""
    k1, k2 = u.grid.xi
    stack = []
    for c in range(u.ncomp):
        stack.append(u.coeffs[c] * (1j * k1))
        stack.append(u.coeffs[c] * (1j * k2))
    return inverse_unordered(np.stack(stack), u.grid)


def w1inf_norm(u: SpectralField) -> float:
    """max |u| + max |grad u| (Frobenius magnitude of the Jacobian)."""
    vals = inverse_unordered(u.coeffs, u.grid)
    grad = gradient_values(u)
    return float(pointwise_magnitude(vals).max() + pointwise_magnitude(grad).max())


def equivalence_report(f: SpectralField, s: float) -> float:
    """(||f||_{L^1} + ||f||_{hom F^s}) / ||f||_{F^s}; 1 for the zero field."""
    if s <= 0:
        raise ValueError("the equivalence holds for s > 0")
    nonhom = tl_norm(f, s)
    if nonhom == 0.0:
        return 1.0
    l1, _ = lebesgue_norms(inverse_unordered(f.coeffs, f.grid), f.grid)
    hom = tl_norm(f, s, homogeneous=True)
    return (l1 + hom) / nonhom


@dataclass
class NormReport:
    s: float
    L1: float
    F: float
    F_hom: float
    B1_inf1: float
    W1_inf: float
    j_range: list
    j_range_homogeneous: list
    grid: dict
    per_shell: dict = field(default_factory=dict)
    mean: list = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def norm_report(f: SpectralField, s: float, bank: FilterBank | None = None) -> NormReport:
    bank = bank or filter_bank(f.grid)
    non = shell_scan(f, [s], bank=bank)
    hom = shell_scan(f, [s], bank=bank, homogeneous=True)
    l1, _ = lebesgue_norms(inverse_unordered(f.coeffs, f.grid), f.grid)
    besov = sum(2.0**j * v for j, v in non.block_linf.items())
    zero = f.coeffs[:, 0, 0]
    report = NormReport(
        s=float(s),
        L1=l1,
        F=non.tl[float(s)],
        F_hom=hom.tl[float(s)],
        B1_inf1=float(besov),
        W1_inf=w1inf_norm(f),
        j_range=[-1, bank.j_max],
        j_range_homogeneous=[bank.hom_jmin, bank.j_max],
        grid=f.grid.to_dict(),
        per_shell={str(j): 2.0 ** (j * s) * v for j, v in non.block_l1.items()},
        mean=[[float(z.real), float(z.imag)] for z in zero],
    )
    for v in (report.L1, report.F, report.F_hom, report.B1_inf1, report.W1_inf):
        if not (math.isfinite(v) and v >= 0):
            raise ValueError("norm report produced a non-finite value")
    return report
