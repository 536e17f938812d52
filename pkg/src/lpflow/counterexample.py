"""Initial datum of the norm-inflation construction and its exact spectrum.

The stream function alpha has spectrum

    alpha^ = 2^{s+1} a_{-1}^ + sum_{j=1}^{k_max} 2^{-j(s+1)} a_j^,
    a_j^(xi) = chi(xi - xi^j),   xi^j = 5 2^{j-2} e,   e = (cos th, sin th),

with a low bump a_{-1}^(xi) = chi((xi - c)/rho), c = xi^{-1} + delta e_perp, and
velocity u0 = (-d2 alpha, d1 alpha), i.e. u0^ = i(-xi_2, xi_1) alpha^.

Two independent evaluations of F(P (u0.grad) u0)(xi^k) are provided:

* route 1 reduces the convolution to three overlap integrals (low/top,
  equal-shell and top/low pairs) and evaluates each by midpoint quadrature
  on a lattice centred on its own ball;
* route 2 sums the generic convolution  sum_a u_a^(xi - q) i q_a u_c^(q)
  over every pair of support balls on origin-anchored lattices, with no use
  of the pair reduction.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .filter_bank import chi, chi_integral, kernel_value, psi
from .norms import NormReport, norm_report
from .spectral_core import (
    SpectralField,
    TorusGrid,
    grid_for_spacing,
    inverse_unordered,
    lebesgue_norms,
    nearest_lattice,
)

D = 2


class Variant(str, Enum):
    FAITHFUL = "FAITHFUL"
    GRID_ADAPTED = "GRID-ADAPTED"


class MomentError(ValueError):
    """The perpendicular moment of the low bump vanishes."""


class ResolutionError(ValueError):
    """A support ball is not resolved by the lattice it is sampled on."""


class RouteDisagreementError(RuntimeError):
    pass


@dataclass(frozen=True)
class CounterexampleSpec:
    s: float = 3.0
    theta: float = math.pi / 6
    k_max: int = 12
    delta: float = 1.0 / 16
    rho: float = 1.0 / 32
    variant: Variant = Variant.FAITHFUL

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if self.s < D + 1:
            raise ValueError(f"s must be >= {D + 1}, got {self.s}")
        if self.k_max < 1:
            raise ValueError("k_max must be >= 1")
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if self.delta == 0:
            raise MomentError("delta = 0 makes the perpendicular moment vanish")
        if self.variant is Variant.FAITHFUL and abs(self.delta) + self.rho > 0.125 + 1e-15:
            raise ValueError("FAITHFUL low bump must lie in B(xi^{-1}, 1/8)")

    @classmethod
    def faithful(cls, **kw) -> "CounterexampleSpec":
        return cls(**{"variant": Variant.FAITHFUL, **kw})

    @classmethod
    def grid_adapted(cls, **kw) -> "CounterexampleSpec":
        base = {"variant": Variant.GRID_ADAPTED, "delta": 0.25, "rho": 0.5, "k_max": 5}
        return cls(**{**base, **kw})

    @property
    def e(self) -> np.ndarray:
        return np.array([math.cos(self.theta), math.sin(self.theta)])

    @property
    def e_perp(self) -> np.ndarray:
        return np.array([math.sin(self.theta), -math.cos(self.theta)])

    @property
    def low_center(self) -> np.ndarray:
        return xi_point(-1, self) + self.delta * self.e_perp

    def to_dict(self) -> dict:
        out = asdict(self)
        out["variant"] = self.variant.value
        return out


def default_grid(spec: CounterexampleSpec | None = None) -> TorusGrid:
    """N = 2048, dxi = 1/8 (the global simulation grid)."""
    return grid_for_spacing(2048, 0.125)


def xi_point(j: int, spec: CounterexampleSpec) -> np.ndarray:
    return 5.0 * 2.0 ** (j - 2) * np.array([math.cos(spec.theta), math.sin(spec.theta)])


# ------------------------------------------------------------ support balls


@dataclass(frozen=True)
class Ball:
    tag: str
    index: int  # -1 for the low bump
    center: np.ndarray
    radius: float
    weight: float  # coefficient of a_j in alpha

    def profile(self, pts: np.ndarray) -> np.ndarray:
        """a_j^ at ``pts`` (trailing axis of length 2), without the weight."""
        return chi((pts - self.center) / self.radius)


def balls(spec: CounterexampleSpec) -> list[Ball]:
    out = [Ball("low", -1, spec.low_center, spec.rho, 2.0 ** (spec.s + 1))]
    for j in range(1, spec.k_max + 1):
        out.append(Ball(f"a{j}", j, xi_point(j, spec), 1.0, 2.0 ** (-j * (spec.s + 1))))
    return out


def alpha_hat(pts, spec: CounterexampleSpec) -> np.ndarray:
    """Closed-form alpha^ at arbitrary points."""
    pts = np.asarray(pts, dtype=float)
    out = np.zeros(pts.shape[:-1])
    for b in balls(spec):
        near = np.hypot(pts[..., 0] - b.center[0], pts[..., 1] - b.center[1]) < b.radius
        if np.any(near):
            out[near] += b.weight * b.profile(pts[near])
    return out


def u0_hat(pts, spec: CounterexampleSpec) -> np.ndarray:
    """Closed-form u0^ = i(-xi_2, xi_1) alpha^, shape pts.shape[:-1] + (2,)."""
    pts = np.asarray(pts, dtype=float)
    a = alpha_hat(pts, spec)
    return np.stack([-1j * pts[..., 1] * a, 1j * pts[..., 0] * a], axis=-1)


def c0(spec: CounterexampleSpec) -> np.ndarray:
    """2^{ks} u0^(xi^k), independent of k >= 1."""
    e = spec.e
    return 1j * 1.25 * np.array([-e[1], e[0]])


# ----------------------------------------------------------- sparse spectra


@dataclass
class SparseSpectrum:
    """Exactly supported lattice spectrum: integer indices, values and ball tags."""

    grid: TorusGrid
    m: np.ndarray  # (n, 2) int
    values: np.ndarray  # (n,) complex
    tags: list

    def __post_init__(self):
        self.m = np.asarray(self.m, dtype=np.int64).reshape(-1, 2)
        self.values = np.asarray(self.values, dtype=np.complex128).reshape(-1)
        if len(self.tags) != len(self.values) or len(self.m) != len(self.values):
            raise ValueError("sparse spectrum arrays differ in length")
        if len(self.m) and len(np.unique(self.m, axis=0)) != len(self.m):
            raise ValueError("duplicate frequencies in sparse spectrum")

    def __len__(self) -> int:
        return len(self.values)

    def points(self) -> np.ndarray:
        return self.m * self.grid.dxi

    def lookup(self, m) -> complex:
        hit = np.nonzero((self.m[:, 0] == m[0]) & (self.m[:, 1] == m[1]))[0]
        return complex(self.values[hit[0]]) if len(hit) else 0j

    def to_dense(self) -> np.ndarray:
        N = self.grid.N
        out = np.zeros((N, N), dtype=np.complex128)
        out[self.m[:, 0] % N, self.m[:, 1] % N] = self.values
        return out

    def to_json(self) -> str:
        rows = [
            {"m": [int(a), int(b)], "re": float(v.real), "im": float(v.imag), "tag": t}
            for (a, b), v, t in zip(self.m, self.values, self.tags)
        ]
        return json.dumps(rows)

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(self.to_json() + "\n")
        return path

    @classmethod
    def from_json(cls, text: str, grid: TorusGrid) -> "SparseSpectrum":
        rows = json.loads(text)
        m = [r["m"] for r in rows]
        vals = [complex(r["re"], r["im"]) for r in rows]
        return cls(grid, np.array(m, dtype=np.int64).reshape(-1, 2), np.array(vals), [r["tag"] for r in rows])


def _ball_lattice(grid: TorusGrid, center, radius) -> np.ndarray:
    lo = np.ceil((np.asarray(center) - radius) / grid.dxi).astype(int)
    hi = np.floor((np.asarray(center) + radius) / grid.dxi).astype(int)
    a = np.arange(lo[0], hi[0] + 1)
    b = np.arange(lo[1], hi[1] + 1)
    M = np.stack(np.meshgrid(a, b, indexing="ij"), axis=-1).reshape(-1, 2)
    d = np.hypot(M[:, 0] * grid.dxi - center[0], M[:, 1] * grid.dxi - center[1])
    return M[d < radius]


def _sample_ball(b: Ball, grid: TorusGrid) -> SparseSpectrum:
    if np.any(np.abs(b.center) + b.radius >= grid.nyquist):
        raise ValueError(f"ball {b.tag} exceeds the Nyquist box {grid.nyquist}")
    M = _ball_lattice(grid, b.center, b.radius)
    vals = b.profile(M * grid.dxi)
    keep = vals > 0
    return SparseSpectrum(grid, M[keep], vals[keep].astype(np.complex128), [b.tag] * int(keep.sum()))


def build_bump(j: int, spec: CounterexampleSpec, grid: TorusGrid) -> SparseSpectrum:
    """Unweighted a_j^ = chi(xi - xi^j) on the lattice; a_0^ is identically zero."""
    if j == -1:
        return build_low_bump(spec, grid)
    if j == 0 or j < -1:
        return SparseSpectrum(grid, np.zeros((0, 2), dtype=np.int64), np.zeros(0), [])
    return _sample_ball(Ball(f"a{j}", j, xi_point(j, spec), 1.0, 1.0), grid)


def low_bump_resolved(spec: CounterexampleSpec, grid: TorusGrid) -> bool:
    return spec.rho >= 4 * grid.dxi


def build_low_bump(spec: CounterexampleSpec, grid: TorusGrid, strict: bool | None = None) -> SparseSpectrum:
    """Unweighted a_{-1}^; unresolved radii raise unless ``strict`` is False.

    ``strict`` defaults to True for the GRID-ADAPTED variant only.
    """
    if strict is None:
        strict = spec.variant is Variant.GRID_ADAPTED
    if strict and not low_bump_resolved(spec, grid):
        raise ResolutionError(f"rho={spec.rho} is below 4 lattice cells (dxi={grid.dxi})")
    return _sample_ball(Ball("low", -1, spec.low_center, spec.rho, 1.0), grid)


def build_alpha(spec: CounterexampleSpec, grid: TorusGrid, strict: bool | None = None) -> SparseSpectrum:
    parts = [build_low_bump(spec, grid, strict)]
    weights = [2.0 ** (spec.s + 1)]
    for j in range(1, spec.k_max + 1):
        parts.append(build_bump(j, spec, grid))
        weights.append(2.0 ** (-j * (spec.s + 1)))
    acc: dict = {}
    for part, w in zip(parts, weights):
        for (a, b), v, t in zip(part.m, part.values, part.tags):
            key = (int(a), int(b))
            if key in acc:
                prev_v, prev_t = acc[key]
                acc[key] = (prev_v + w * v, prev_t)
            else:
                acc[key] = (w * v, t)
    keys = sorted(acc)
    m = np.array(keys, dtype=np.int64).reshape(-1, 2)
    vals = np.array([acc[k][0] for k in keys], dtype=np.complex128)
    return SparseSpectrum(grid, m, vals, [acc[k][1] for k in keys])


def build_u0(spec: CounterexampleSpec, grid: TorusGrid, strict: bool | None = None) -> SpectralField:
    alpha = build_alpha(spec, grid, strict).to_dense()
    k1, k2 = grid.xi
    t = 1j * alpha
    return SpectralField(grid, np.stack([-k2 * t, k1 * t]))


def membership_report(u0: SpectralField, s: float) -> NormReport:
    return norm_report(u0, s)


# --------------------------------------------------------- interaction table


@dataclass
class InteractionTable:
    """Ordered ball pairs (ball of q, ball of xi^k - q) with overlapping supports."""

    k: int
    pairs: list
    centers: dict
    radii: dict

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "pairs": [list(p) for p in self.pairs],
            "centers": {t: list(map(float, c)) for t, c in self.centers.items()},
            "radii": self.radii,
        }


def interaction_table(k: int, spec: CounterexampleSpec) -> InteractionTable:
    """Pairs whose Minkowski-sum ball B(c_i + c_j, r_i + r_j) contains xi^k in its interior."""
    target = xi_point(k, spec)
    bs = balls(spec)
    pairs = []
    for bi in bs:
        for bj in bs:
            gap = np.linalg.norm(bi.center + bj.center - target)
            if gap < bi.radius + bj.radius:
                pairs.append((bi.tag, bj.tag))
    return InteractionTable(
        k,
        pairs,
        {b.tag: b.center for b in bs},
        {b.tag: b.radius for b in bs},
    )


# ------------------------------------------------------------ quadratures


def _midpoint_lattice(center, radius: float, h: float) -> np.ndarray:
    """Cell midpoints of an h-lattice centred on ``center`` covering the ball."""
    n = int(math.ceil(radius / h)) + 1
    g = (np.arange(-n, n) + 0.5) * h
    X, Y = np.meshgrid(g, g, indexing="ij")
    keep = X * X + Y * Y < radius * radius
    return np.stack([X[keep] + center[0], Y[keep] + center[1]], axis=-1)


def _w(pts: np.ndarray, spec: CounterexampleSpec) -> np.ndarray:
    """Perpendicular functional 2 (xi . e_perp)."""
    ep = spec.e_perp
    return 2.0 * (pts[..., 0] * ep[0] + pts[..., 1] * ep[1])


@dataclass
class OverlapIntegrals:
    """Raw integrals for one target shell k and component l.

    low_top:    int w q_l chi(q) a_{-1}^(q)                   (ball of a_{-1})
    equal:      int w(eta) eta_l chi^2(eta)                    (unit ball)
    top_low:    int w q_l a_{-1}^(xi^k - q) a_k^(q)            (direct)
    top_low_rhs: low_top - xi^k_l * moment_chi                 (reduced form)
    """

    k: int
    l: int
    low_top: float
    equal: float
    top_low: float
    top_low_rhs: float
    moment_chi: float


class _Route1:
    def __init__(self, spec: CounterexampleSpec, per_radius: int = 256, h_unit: float = 2.0**-10):
        self.spec = spec
        low = Ball("low", -1, spec.low_center, spec.rho, 1.0)
        h = spec.rho / per_radius
        self.h_low = h
        q = _midpoint_lattice(low.center, low.radius, h)
        a = low.profile(q) * chi(q)
        w = _w(q, spec)
        cell = h * h
        self.moment_chi = float((w * a).sum() * cell)
        self.low_top = [float((w * q[:, l] * a).sum() * cell) for l in (0, 1)]
        eta = _midpoint_lattice((0.0, 0.0), 1.0, h_unit)
        c2 = chi(eta) ** 2
        we = _w(eta, spec)
        self.equal = [float((we * eta[:, l] * c2).sum() * h_unit * h_unit) for l in (0, 1)]
        self._low_ball = low

    def top_low_direct(self, k: int, l: int) -> float:
        spec = self.spec
        xk = xi_point(k, spec)
        low = self._low_ball
        q = _midpoint_lattice(xk - low.center, low.radius, self.h_low)
        f = low.profile(xk - q) * chi(q - xk)
        return float((_w(q, spec) * q[:, l] * f).sum() * self.h_low**2)

    def integrals(self, k: int, l: int) -> OverlapIntegrals:
        xk = xi_point(k, self.spec)
        rhs = self.low_top[l] - xk[l] * self.moment_chi
        return OverlapIntegrals(k, l + 1, self.low_top[l], self.equal[l], self.top_low_direct(k, l), rhs, self.moment_chi)

    def I(self, k: int, use_direct: bool = False) -> np.ndarray:
        """I_l = int w q_l alpha^(xi^k - q) alpha^(q) dq via the three-pair reduction."""
        s = self.spec.s
        xk = xi_point(k, self.spec)
        lo = 2.0 ** (-(k - 1) * (s + 1))
        eq = 2.0 ** (-2 * (k - 1) * (s + 1))
        out = np.empty(2)
        for l in (0, 1):
            t3 = self.top_low_direct(k, l) if use_direct else self.low_top[l] - xk[l] * self.moment_chi
            out[l] = lo * (self.low_top[l] + t3) + eq * self.equal[l]
        return out


def overlap_integrals(k: int, l: int, spec: CounterexampleSpec, per_radius: int = 256) -> OverlapIntegrals:
    if l not in (1, 2):
        raise ValueError("component index l must be 1 or 2")
    return _Route1(spec, per_radius).integrals(k, l - 1)


def leray_at(xi: np.ndarray, v: np.ndarray) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    n2 = float(xi @ xi)
    if n2 == 0:
        return np.asarray(v)
    return v - xi * (xi @ v) / n2


def _convective_from_I(k: int, I: np.ndarray, spec: CounterexampleSpec) -> np.ndarray:
    """F((u0.grad)u0)(xi^k) = i (2pi)^{-2} (|xi^k|/2) (-I_2, I_1)."""
    r = np.linalg.norm(xi_point(k, spec))
    return 1j * (2 * math.pi) ** -2 * (r / 2) * np.array([-I[1], I[0]], dtype=complex)


def _alternate_pair_from_I(k: int, I: np.ndarray, spec: CounterexampleSpec) -> np.ndarray:
    """Projection expressed with the alternate coefficient pair ((sqrt3-1)/4, (3-sqrt3)/4).

    Its component ratio is 3, against sqrt3 for the standard Leray projection.
    """
    r = np.linalg.norm(xi_point(k, spec))
    pref = 1j * (2 * math.pi) ** -2 * (r / 2)
    r3 = math.sqrt(3.0)
    return pref * np.array([(r3 - 1) / 4 * I[1], (3 - r3) / 4 * I[0]], dtype=complex)


# ---------------------------------------------------- route 2: sparse sums


def sparse_convective(
    xi,
    spec: CounterexampleSpec,
    per_radius: int = 160,
    lattice: float | None = None,
) -> np.ndarray:
    """sum_{balls i, j} (2pi)^-2 int sum_a u_a^{(j)}(xi - q) i q_a u_c^{(i)}(q) dq.

    With ``lattice`` set, q runs over lattice * Z^2 (xi must be a lattice
    point), which reproduces the discrete convolution of a torus grid.
    Otherwise each pair uses spacing min(r_i, r_j)/per_radius anchored at 0.
    """
    xi = np.asarray(xi, dtype=float)
    bs = balls(spec)
    total = np.zeros(2, dtype=complex)
    for bi in bs:
        for bj in bs:
            h = lattice if lattice is not None else min(bi.radius, bj.radius) / per_radius
            # q in ball i and xi - q in ball j
            lo = np.maximum(bi.center - bi.radius, xi - bj.center - bj.radius)
            hi = np.minimum(bi.center + bi.radius, xi - bj.center + bj.radius)
            if np.any(lo >= hi):
                continue
            a = np.arange(math.ceil(lo[0] / h), math.floor(hi[0] / h) + 1) * h
            b = np.arange(math.ceil(lo[1] / h), math.floor(hi[1] / h) + 1) * h
            if len(a) == 0 or len(b) == 0:
                continue
            Q = np.stack(np.meshgrid(a, b, indexing="ij"), axis=-1).reshape(-1, 2)
            R = xi - Q
            din = np.hypot(Q[:, 0] - bi.center[0], Q[:, 1] - bi.center[1]) < bi.radius
            dout = np.hypot(R[:, 0] - bj.center[0], R[:, 1] - bj.center[1]) < bj.radius
            keep = din & dout
            if not keep.any():
                continue
            Q, R = Q[keep], R[keep]
            ai = bi.weight * bi.profile(Q)
            aj = bj.weight * bj.profile(R)
            # u^(p) = i(-p_2, p_1) a(p)
            ui = np.stack([-1j * Q[:, 1] * ai, 1j * Q[:, 0] * ai], axis=-1)
            uj = np.stack([-1j * R[:, 1] * aj, 1j * R[:, 0] * aj], axis=-1)
            adv = uj[:, 0] * (1j * Q[:, 0]) + uj[:, 1] * (1j * Q[:, 1])
            total += (adv[:, None] * ui).sum(axis=0) * (h * h)
    return total * (2 * math.pi) ** -2


def sparse_projected(xi, spec: CounterexampleSpec, per_radius: int = 160, lattice: float | None = None) -> np.ndarray:
    """F(P (u0.grad) u0)(xi) by route 2."""
    return leray_at(np.asarray(xi, dtype=float), sparse_convective(xi, spec, per_radius, lattice))


# -------------------------------------------------------- mechanism constants


@dataclass
class MechanismConstants:
    spec: dict
    ks: list
    c0: list
    c1: list
    c1_alternate_pair: list | None
    c1_ratio_standard: float
    c1_ratio_alternate_pair: float | None
    c2: dict  # k -> vector
    route1: dict  # k -> F(P(u0.grad)u0)(xi^k)
    route2: dict
    route_disagreement: dict
    moment: float  # 2 delta int a_{-1}^
    moment_direct: float  # int 2 (xi . e_perp) a_{-1}^ by quadrature
    moment_chi: float
    raw: dict = field(default_factory=dict)  # k -> l -> OverlapIntegrals

    def c2_norms(self) -> dict:
        return {k: float(np.linalg.norm(np.array(_cvec(v)))) for k, v in self.c2.items()}

    def max_disagreement(self) -> float:
        return max(self.route_disagreement.values()) if self.route_disagreement else 0.0

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def _clist(v) -> list:
    return [[float(np.real(x)), float(np.imag(x))] for x in np.asarray(v).ravel()]


def _cvec(pairs) -> np.ndarray:
    return np.array([complex(a, b) for a, b in pairs])


def low_bump_mass(spec: CounterexampleSpec) -> float:
    """int a_{-1}^ = rho^2 int chi."""
    return spec.rho**2 * chi_integral()


def mechanism_constants(
    spec: CounterexampleSpec,
    ks=range(3, 13),
    per_radius_route1: int = 256,
    per_radius_route2: int = 160,
    tolerance: float = 1e-8,
    strict: bool = True,
) -> MechanismConstants:
    ks = [int(k) for k in ks]
    if min(ks) < 3 or max(ks) > 20:
        raise ValueError("mechanism constants are computed for k in [3, 20]")
    r1 = _Route1(spec, per_radius_route1)
    s = spec.s
    # J-moment part of I_l, which fixes the k-independent limit
    kref = ks[0]
    xr = xi_point(kref, spec)
    IJ = -(2.0 ** (-(kref - 1) * (s + 1))) * xr * r1.moment_chi
    scale = 2.0 ** ((s - 1) * kref)
    c1 = scale * leray_at(xr, _convective_from_I(kref, IJ, spec))
    at_default_angle = abs(spec.theta - math.pi / 6) < 1e-15
    c1p = scale * _alternate_pair_from_I(kref, IJ, spec) if at_default_angle else None

    def ratio(v):
        return float(abs(v[1]) / abs(v[0])) if abs(v[0]) > 0 else float("inf")

    c2, route1, route2, dis, raw = {}, {}, {}, {}, {}
    for k in ks:
        xk = xi_point(k, spec)
        v1 = leray_at(xk, _convective_from_I(k, r1.I(k), spec))
        v2 = sparse_projected(xk, spec, per_radius_route2)
        route1[k] = _clist(v1)
        route2[k] = _clist(v2)
        dis[k] = float(np.linalg.norm(v1 - v2) / np.linalg.norm(v2))
        c2[k] = _clist(2.0 ** ((s - 1) * k) * v1 - c1)
        raw[k] = {l + 1: asdict(r1.integrals(k, l)) for l in (0, 1)}
    moment = 2 * spec.delta * low_bump_mass(spec)
    low = Ball("low", -1, spec.low_center, spec.rho, 1.0)
    q = _midpoint_lattice(low.center, low.radius, spec.rho / per_radius_route1)
    moment_direct = float((_w(q, spec) * low.profile(q)).sum() * (spec.rho / per_radius_route1) ** 2)
    out = MechanismConstants(
        spec=spec.to_dict(),
        ks=ks,
        c0=_clist(c0(spec)),
        c1=_clist(c1),
        c1_alternate_pair=_clist(c1p) if c1p is not None else None,
        c1_ratio_standard=ratio(c1),
        c1_ratio_alternate_pair=ratio(c1p) if c1p is not None else None,
        c2=c2,
        route1=route1,
        route2=route2,
        route_disagreement=dis,
        moment=moment,
        moment_direct=moment_direct,
        moment_chi=r1.moment_chi,
        raw=raw,
    )
    if strict and out.max_disagreement() > tolerance:
        raise RouteDisagreementError(
            f"routes disagree by {out.max_disagreement():.3e} (> {tolerance:g})"
        )
    return out


# ----------------------------------------------------- periodization study


@dataclass
class PeriodizationReport:
    dxi: list
    a_l1: list  # ||a_j||_{L^1} per grid
    phi0: list  # Phi(0) per grid
    phi0_exact: float
    u0_residual: list  # max_k |2^{ks} u0^(nearest(xi^k)) - c0| / |c0|
    aligned_residual: list  # same for theta = 0 at exact lattice points
    monotone: dict

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def _u0_residual(spec: CounterexampleSpec, grid: TorusGrid, ks) -> float:
    """Lattice evaluation of the sampled u0 against the closed form at xi^k."""
    ref = c0(spec)
    worst = 0.0
    for k in ks:
        pt, m = nearest_lattice(xi_point(k, spec), grid)
        val = u0_hat(pt, spec) * 2.0 ** (k * spec.s)
        worst = max(worst, float(np.linalg.norm(val - ref) / np.linalg.norm(ref)))
    return worst


def periodization_study(
    spec: CounterexampleSpec,
    grids: list,
    j: int = 3,
    ks=None,
    strict: bool = True,
) -> PeriodizationReport:
    if len(grids) < 3:
        raise ValueError("periodization study needs at least 3 grids")
    grids = sorted(grids, key=lambda g: -g.dxi)
    for a, b in zip(grids, grids[1:]):
        if not math.isclose(a.dxi, 2 * b.dxi, rel_tol=1e-12):
            raise ValueError("grids must halve dxi successively")
    ks = list(ks) if ks is not None else list(range(2, spec.k_max + 1))
    aligned = CounterexampleSpec(**{**spec.to_dict(), "theta": 0.0})
    a_l1, phi0, res, ares = [], [], [], []
    for g in grids:
        bump = build_bump(j, spec, g).to_dense()
        vals = inverse_unordered(bump[None], g)
        a_l1.append(lebesgue_norms(vals, g)[0])
        phi0.append(float(psi(g.xi_abs).sum()) / g.L**2)
        res.append(_u0_residual(spec, g, ks))
        ares.append(_u0_residual(aligned, g, ks))
    exact = float(kernel_value(0.0)[0])
    phi_err = [abs(p - exact) for p in phi0]
    l1_steps = [abs(a - b) for a, b in zip(a_l1, a_l1[1:])]

    def dec(seq, strict=True):
        return all(b < a if strict else b <= a for a, b in zip(seq, seq[1:]))

    mono = {
        # the nearest lattice point to xi^k can coincide on two successive grids
        "u0_residual": dec(res, strict=False),
        "phi0_error": dec(phi_err),
        "a_l1_increments": dec(l1_steps),
    }
    rep = PeriodizationReport([g.dxi for g in grids], a_l1, phi0, exact, res, ares, mono)
    if strict and not all(mono.values()):
        bad = [k for k, v in mono.items() if not v]
        raise ResolutionError(f"non-monotone residuals: {bad}")
    return rep
