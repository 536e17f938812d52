"""Pseudo-spectral incompressible Euler on the torus, with norm-inflation diagnostics.

The nonlinearity uses the trace-free stress form: for divergence-free u,

    (u.grad)u = div(u (x) u) = div D + grad(u.u / 2),
    D = [[A, B], [B, -A]],  A = (u1^2 - u2^2)/2,  B = u1 u2,

and the gradient is removed by the Leray projector, so a right-hand side costs
two dealiased products (four transforms).  Time stepping is classical RK4
with a fixed step.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import _fft
from .counterexample import CounterexampleSpec, build_u0, sparse_projected, xi_point
from .filter_bank import FilterBank, filter_bank
from .norms import shell_scan, w1inf_norm
from .paradifferential import PaddedSpace, inv_k2, leray_coeffs, one_sided_axes
from .spectral_core import (
    SpectralField,
    TorusGrid,
    energy,
    inverse_unordered,
    nearest_lattice,
    pointwise_magnitude,
    write_lpf1,
)


class StabilityError(RuntimeError):
    pass


# ------------------------------------------------------------------- config


@dataclass
class WeakSequenceSpec:
    """Weights k_j of N(v) = || sum_j 2^{js} k_j Delta_j v ||_{L^1}."""

    coeffs: dict

    def __post_init__(self):
        self.coeffs = {int(j): float(v) for j, v in self.coeffs.items()}
        if not all(math.isfinite(v) for v in self.coeffs.values()):
            raise ValueError("weak-sequence weights must be finite")

    @classmethod
    def default(cls, j_max: int) -> "WeakSequenceSpec":
        """k_{-1} = 1 and k_j = 2^{-j} for 0 <= j <= j_max."""
        return cls({-1: 1.0, **{j: 2.0**-j for j in range(0, j_max + 1)}})

    @classmethod
    def one_hot(cls, j0: int) -> "WeakSequenceSpec":
        return cls({j0: 1.0})

    def l1(self) -> float:
        return float(sum(abs(v) for v in self.coeffs.values()))


@dataclass
class SimulationConfig:
    grid: TorusGrid
    T1: float
    steps: int = 256  # steps over [0, T1]
    stop_step: int | None = None  # integrate only to stop_step * dt
    s: float = 3.0
    tracked_k: tuple = (3, 4, 5)
    epsilons: tuple = (0.5,)
    weak: WeakSequenceSpec | None = None
    cadence: int = 1  # coefficient / energy / N samples, in steps
    norm_cadence: int = 32  # F^s diagnostics, in steps (dyadic steps are always added)
    snapshot_steps: tuple = ()  # steps whose fields are kept in memory
    snapshot_dir: str | None = None  # write snapshots as LPF1 files as well
    backward: bool = False
    stability: float = 0.5
    j_max: int | None = None

    def __post_init__(self):
        if not self.T1 >= 0 or not math.isfinite(self.T1):
            raise ValueError("T1 must be finite and >= 0")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.stop_step is None:
            self.stop_step = self.steps
        if not 0 <= self.stop_step <= 64 * self.steps:
            raise ValueError("stop_step out of range")
        if self.cadence < 1 or self.norm_cadence < 1:
            raise ValueError("cadences must be >= 1")
        self.tracked_k = tuple(int(k) for k in self.tracked_k)
        self.epsilons = tuple(float(e) for e in self.epsilons)

    @property
    def dt(self) -> float:
        dt = self.T1 / self.steps
        return -dt if self.backward else dt

    def bank(self) -> FilterBank:
        return filter_bank(self.grid, self.j_max)

    def weak_spec(self) -> WeakSequenceSpec:
        return self.weak or WeakSequenceSpec.default(self.bank().j_max)

    def norm_steps(self) -> list:
        n = self.steps
        out = {0, self.stop_step}
        m = n
        while m >= 1:
            out.add(m)
            if m % 2:
                break
            m //= 2
        out.update(range(0, self.stop_step + 1, self.norm_cadence))
        return sorted(x for x in out if x <= self.stop_step)

    def to_dict(self) -> dict:
        return {
            "grid": self.grid.to_dict(),
            "T1": self.T1,
            "steps": self.steps,
            "stop_step": self.stop_step,
            "dt": self.dt,
            "s": self.s,
            "tracked_k": list(self.tracked_k),
            "epsilons": list(self.epsilons),
            "weak_sequence": {str(k): v for k, v in self.weak_spec().coeffs.items()},
            "cadence": self.cadence,
            "norm_cadence": self.norm_cadence,
            "integrator": "RK4",
            "dealias": "zero-padding (3/2 per two-sided axis, none on one-sided axes)",
            "backward": self.backward,
        }


def default_T1(u0: SpectralField, budget: float = 0.09) -> float:
    """T1 with ||u0||_{W^{1,inf}} T1 = budget, rounded down to 3 significant digits."""
    w = w1inf_norm(u0)
    if w == 0:
        return 1.0
    t = budget / w
    e = math.floor(math.log10(t)) - 2
    return math.floor(t / 10**e) * 10**e


# --------------------------------------------------------------- right side


_XI_MAX: dict = {}


def _stability_number(umax: float, grid: TorusGrid, dt: float) -> float:
    return abs(dt) * umax * grid.nyquist * math.sqrt(2.0)


def _rhs_half(c: np.ndarray, grid: TorusGrid, want_umax: bool):
    """Fast path for spectra supported on rows [0, N/2) (non-negative xi_1).

    ``c`` holds only those rows, shape (2, N/2, N), and so does the result.
    No padding is needed along axis 0.
    """
    N = grid.N
    h = N // 2
    M1 = 3 * N // 2
    inv = _fft.plan((2, N, M1), inverse=True)
    fwd = _fft.plan((2, N, M1), inverse=False)
    X = inv.input_array
    X[...] = 0.0
    X[:, :h, :h] = c[:, :, :h]
    X[:, :h, M1 - h :] = c[:, :, h:]
    v = inv()
    u1, u2 = v[0], v[1]
    umax = None
    if want_umax:
        umax = float(np.sqrt((u1.real**2 + u1.imag**2 + u2.real**2 + u2.imag**2).max())) / grid.L**2
    # stress in place; values carry a factor L^2, products L^4
    b = u1 * u2
    u1 *= u1
    u2 *= u2
    u1 -= u2
    u1 *= 0.5 / grid.L**4
    np.multiply(b, 1.0 / grid.L**4, out=u2)
    del b
    G = fwd()
    scale = grid.L * grid.L / (N * M1)
    A = np.empty((h, N), dtype=np.complex128)
    B = np.empty((h, N), dtype=np.complex128)
    A[:, :h] = G[0, :h, :h]
    A[:, h:] = G[0, :h, M1 - h :]
    B[:, :h] = G[1, :h, :h]
    B[:, h:] = G[1, :h, M1 - h :]
    A *= scale
    B *= scale
    k1 = grid.xi[0][:h]
    k2 = grid.xi[1]
    f0 = k1 * A
    f0 += k2 * B
    f1 = k1 * B
    f1 -= k2 * A
    del A, B
    d = k1 * f0
    d += k2 * f1
    d *= inv_k2(grid)[:h]
    out = np.empty((2, h, N), dtype=np.complex128)
    np.multiply(k1, d, out=out[0])
    np.subtract(out[0], f0, out=out[0])
    np.multiply(k2, d, out=out[1])
    np.subtract(out[1], f1, out=out[1])
    out *= 1j
    out[:, 0, 0] = 0.0
    out[:, :, h] = 0.0  # Nyquist column: keeps the truncation symmetric
    return out, umax


def rhs_coeffs(c: np.ndarray, grid: TorusGrid, want_umax: bool = False):
    """-P((u.grad)u) for divergence-free coefficients ``c`` of shape (2, N, N)."""
    sided = one_sided_axes(c)
    if sided == (True, False):
        half, umax = _rhs_half(c[:, : grid.N // 2], grid, want_umax)
        out = np.zeros_like(c)
        out[:, : grid.N // 2] = half
        return (out, umax) if want_umax else out
    space = PaddedSpace(grid, sided)
    v = space.values(c)
    u1, u2 = v[0], v[1]
    umax = None
    if want_umax:
        umax = float(np.sqrt((u1.real**2 + u1.imag**2 + u2.real**2 + u2.imag**2).max()))
    stress = np.empty_like(v)
    np.multiply(u1, u2, out=stress[1])
    np.multiply(u1, u1, out=stress[0])
    stress[0] -= u2 * u2
    stress[0] *= 0.5
    del v, u1, u2
    A, B = space.coeffs(stress)
    del stress
    k1, k2 = grid.xi
    f = np.empty((2,) + A.shape, dtype=np.complex128)
    f[0] = k1 * A + k2 * B
    f[1] = k1 * B - k2 * A
    f *= 1j
    out = leray_coeffs(f, grid)
    out *= -1.0
    out[:, 0, 0] = 0.0
    # Nyquist row and column have no conjugate partner; dropping them makes the
    # truncated system conserve energy exactly for real data
    out[:, grid.N // 2, :] = 0.0
    out[:, :, grid.N // 2] = 0.0
    return (out, umax) if want_umax else out


def rhs(u: SpectralField, dt: float | None = None, stability: float = 0.5, tol: float = 1e-10) -> SpectralField:
    """-P((u.grad)u), dealiased, zero mean; checks the advective bound when dt is given."""
    from .paradifferential import divergence_defect

    if u.ncomp != 2:
        raise ValueError("rhs needs a planar vector field")
    if divergence_defect(u) > tol:
        raise ValueError("rhs needs a divergence-free velocity")
    out, umax = rhs_coeffs(u.coeffs, u.grid, want_umax=True)
    if dt is not None and _stability_number(umax, u.grid, dt) > stability:
        raise StabilityError("advective stability bound violated")
    return u.with_coeffs(out)


def _rk4(c: np.ndarray, dt: float, f, stability: float, grid: TorusGrid) -> np.ndarray:
    k, umax = f(c, True)
    if _stability_number(umax, grid, dt) > stability:
        raise StabilityError(
            f"advective stability bound violated: {_stability_number(umax, grid, dt):.3f} > {stability}"
        )
    acc = k.copy()
    stage = k
    stage *= 0.5 * dt
    stage += c
    k = f(stage, False)
    acc += 2.0 * k
    np.multiply(k, 0.5 * dt, out=stage)
    stage += c
    k = f(stage, False)
    acc += 2.0 * k
    np.multiply(k, dt, out=stage)
    stage += c
    del k
    acc += f(stage, False)
    del stage
    acc *= dt / 6.0
    acc += c
    return acc


def step(u: SpectralField, dt: float, stability: float = 0.5) -> SpectralField:
    """One classical RK4 step."""
    g = u.grid
    c = u.coeffs
    h = g.N // 2
    if one_sided_axes(c) == (True, False):
        def f(x, want):
            out, umax = _rhs_half(x, g, want)
            return (out, umax) if want else out

        new = np.zeros_like(c)
        new[:, :h] = _rk4(c[:, :h], dt, f, stability, g)
    else:
        new = _rk4(c, dt, lambda x, want: rhs_coeffs(x, g, want), stability, g)
    if not np.all(np.isfinite(new)):
        raise StabilityError("non-finite values after RK4 step")
    return u.with_coeffs(new)


def integrate(u: SpectralField, dt: float, n: int, stability: float = 0.5) -> SpectralField:
    for _ in range(n):
        u = step(u, dt, stability)
    return u


# ------------------------------------------------------------ solver hygiene


def perturbed_taylor_green(N: int = 32, amplitude: float = 0.3) -> SpectralField:
    """Real divergence-free field on the 2 pi torus from the stream function
    sin x1 sin x2 + a sin 2x1 cos x2.

    Plain Taylor-Green is a steady state (its right side vanishes), so it cannot
    exercise the time stepper; the second mode makes the flow genuinely unsteady.
    """
    from .spectral_core import RealField, forward, make_grid

    g = make_grid(N, 2.0 * math.pi)
    x1, x2 = g.x
    # u = (d2 psi, -d1 psi)
    u1 = np.sin(x1) * np.cos(x2) - amplitude * np.sin(2 * x1) * np.sin(x2)
    u2 = -np.cos(x1) * np.sin(x2) - 2 * amplitude * np.cos(2 * x1) * np.cos(x2)
    return forward(RealField(g, np.stack([u1, u2])))


def rk4_order(u0: SpectralField, T: float, steps=(8, 16, 32, 64)) -> dict:
    """Observed convergence order from successive dt-halvings against the finest run."""
    steps = sorted(int(n) for n in steps)
    finals = {n: integrate(u0, T / n, n).coeffs for n in steps}
    ref = finals[steps[-1]]
    errs = [float(np.abs(finals[n] - ref).max()) for n in steps[:-1]]
    orders = [math.log2(a / b) for a, b in zip(errs, errs[1:]) if a > 0 and b > 0]
    return {"T": T, "steps": steps[:-1], "errors": errs, "orders": orders}


def energy_drift_run(u0: SpectralField, T: float, n: int) -> float:
    """max_t |E(t) - E(0)| / E(0) over an n-step run."""
    e0 = energy(u0)
    u, worst = u0, 0.0
    for _ in range(n):
        u = step(u, T / n)
        worst = max(worst, abs(energy(u) - e0) / e0)
    return worst


# -------------------------------------------------------------- trace record


@dataclass
class TraceRecord:
    config: dict
    tracked: dict  # k -> {"m": [m1, m2], "xi": [..], "xi_exact": [..]}
    times: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    coeff: dict = field(default_factory=dict)  # k -> list of [re, im] per sample (both components)
    weak: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    mean: list = field(default_factory=list)
    norms: list = field(default_factory=list)  # rows at norm steps
    meta: dict = field(default_factory=dict)

    # ------------------------------------------------------------ access
    def coefficient(self, k: int) -> np.ndarray:
        """u^(xi~^k, t) per sample, shape (n, 2) complex."""
        arr = np.array(self.coeff[k])
        return arr[..., 0] + 1j * arr[..., 1]

    def g(self, k: int, s: float) -> np.ndarray:
        c = self.coefficient(k)
        return 2.0 ** (k * s) * np.sqrt((np.abs(c) ** 2).sum(axis=1))

    def norm_row(self, step: int) -> dict:
        for row in self.norms:
            if row["step"] == step:
                return row
        raise KeyError(f"no norm sample at step {step}")

    def norm_series(self, key: str) -> tuple[np.ndarray, np.ndarray]:
        t = np.array([r["t"] for r in self.norms])
        v = np.array([r[key] for r in self.norms])
        return t, v

    def energy_drift(self) -> float:
        e = np.array(self.energy)
        return float(np.abs(e - e[0]).max() / e[0]) if e[0] > 0 else float(np.abs(e).max())

    # ------------------------------------------------------------ output
    def norm_keys(self) -> list:
        keys = []
        for row in self.norms:
            for key in row:
                if key not in ("t", "step", "divergence") and key not in keys and not isinstance(row[key], (list, dict)):
                    keys.append(key)
        return keys

    def to_csv(self) -> str:
        ks = sorted(self.coeff)
        nkeys = self.norm_keys()
        by_step = {r["step"]: r for r in self.norms}
        head = ["t"]
        for k in ks:
            for c in (1, 2):
                head += [f"u{c}_re_k{k}", f"u{c}_im_k{k}", f"u{c}_abs_k{k}"]
        head += nkeys + ["N", "energy", "divergence"]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(head)
        for i, (t, st) in enumerate(zip(self.times, self.steps)):
            row = [repr(float(t))]
            for k in ks:
                for c in (0, 1):
                    re, im = self.coeff[k][i][c]
                    row += [repr(re), repr(im), repr(math.hypot(re, im))]
            nr = by_step.get(st, {})
            row += [repr(nr[key]) if key in nr else "" for key in nkeys]
            row += [repr(self.weak[i]), repr(self.energy[i]), repr(nr["divergence"]) if "divergence" in nr else ""]
            w.writerow(row)
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "config": self.config,
            "tracked": self.tracked,
            "samples": len(self.times),
            "energy_drift": self.energy_drift(),
            "max_mean": max(self.mean) if self.mean else 0.0,
            "max_divergence_ratio": max((r.get("divergence_ratio", 0.0) for r in self.norms), default=0.0),
            "max_W1inf_T1": max((r.get("W1inf", 0.0) for r in self.norms), default=0.0) * abs(self.config.get("T1", 0.0)),
            "meta": self.meta,
        }

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    def write(self, directory) -> dict:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        (d / "trace.csv").write_text(self.to_csv())
        (d / "summary.json").write_text(json.dumps(self.summary(), indent=2, sort_keys=True) + "\n")
        (d / "trace.json").write_text(self.to_json() + "\n")
        return {"csv": str(d / "trace.csv"), "summary": str(d / "summary.json")}

    @classmethod
    def from_json(cls, text: str) -> "TraceRecord":
        raw = json.loads(text)
        rec = cls(**raw)
        rec.coeff = {int(k): v for k, v in rec.coeff.items()}
        rec.tracked = {int(k): v for k, v in rec.tracked.items()}
        return rec

    @classmethod
    def load(cls, path) -> "TraceRecord":
        p = Path(path)
        if p.is_dir():
            p = p / "trace.json"
        return cls.from_json(p.read_text())


# ------------------------------------------------------------- simulation


@dataclass
class RunResult:
    trace: TraceRecord
    snapshots: dict  # step -> SpectralField
    final: SpectralField


def _weak_multiplier(bank: FilterBank, weak: WeakSequenceSpec, s: float) -> np.ndarray:
    m = np.zeros(bank.grid.xi_abs.shape)
    for j, kj in weak.coeffs.items():
        if kj == 0.0 or j > bank.j_max:
            continue
        mult = bank.multiplier(j)
        if mult is not None:
            m += (2.0 ** (j * s) * kj) * mult
    return m


def weak_functional(v: SpectralField, spec: WeakSequenceSpec, s: float, bank: FilterBank | None = None) -> float:
    """N(v) = || sum_j 2^{js} k_j Delta_j v ||_{L^1}."""
    if not math.isfinite(spec.l1()):
        raise ValueError("weak sequence is not summable")
    bank = bank or filter_bank(v.grid)
    mult = _weak_multiplier(bank, spec, s)
    vals = inverse_unordered(v.coeffs * mult, v.grid)
    return float(pointwise_magnitude(vals).sum() * v.grid.dx**2)


def divergence_linf(u: SpectralField) -> float:
    k1, k2 = u.grid.xi
    d = 1j * (k1 * u.coeffs[0] + k2 * u.coeffs[1])
    return float(np.abs(inverse_unordered(d[None], u.grid)).max())


def track_points(grid: TorusGrid, spec: CounterexampleSpec | None, ks) -> dict:
    """nearest_lattice(xi^k), fixed once."""
    spec = spec or CounterexampleSpec.grid_adapted()
    out = {}
    for k in ks:
        exact = xi_point(k, spec)
        pt, m = nearest_lattice(exact, grid)
        out[int(k)] = {"m": list(m), "xi": pt.tolist(), "xi_exact": exact.tolist()}
    return out


def _norm_row(u: SpectralField, u0: SpectralField, prev: SpectralField | None, cfg: SimulationConfig, bank: FilterBank) -> dict:
    s = cfg.s
    exps = sorted({s, s - 1.0} | {s - e for e in cfg.epsilons})
    row: dict = {}
    scan = shell_scan(u, exps, bank=bank, track_sup=True)
    for e in exps:
        row[f"F{e:g}"] = scan.tl[e]
    row["argmax_shell"] = scan.argmax_shell(s)
    diff = u - u0
    if diff.coeffs.any():
        dscan = shell_scan(diff, exps, bank=bank, track_sup=True)
        for e in exps:
            row[f"dF{e:g}"] = dscan.tl[e]
        row["argmax_shell_diff"] = dscan.argmax_shell(s)
    else:
        for e in exps:
            row[f"dF{e:g}"] = 0.0
        row["argmax_shell_diff"] = -99
    if prev is not None:
        pscan = shell_scan(u - prev, [s - 1.0], bank=bank)
        row[f"pF{s - 1.0:g}"] = pscan.tl[s - 1.0]
    w1 = w1inf_norm(u)
    div = divergence_linf(u)
    row["W1inf"] = w1
    row["divergence"] = div
    row["divergence_ratio"] = div / w1 if w1 > 0 else 0.0
    return row


def simulate(
    cfg: SimulationConfig,
    u0: SpectralField,
    spec: CounterexampleSpec | None = None,
    progress=None,
) -> RunResult:
    """Integrate from 0 to stop_step * dt, recording every configured diagnostic."""
    if u0.grid != cfg.grid:
        raise ValueError("initial field is not on the configured grid")
    bank = cfg.bank()
    weak = cfg.weak_spec()
    wmult = _weak_multiplier(bank, weak, cfg.s)
    tracked = track_points(cfg.grid, spec, cfg.tracked_k)
    trace = TraceRecord(config=cfg.to_dict(), tracked=tracked)
    trace.coeff = {k: [] for k in tracked}
    trace.meta = {"fft_backend": _fft.backend(), "spec": spec.to_dict() if spec else None}
    norm_steps = set(cfg.norm_steps())
    snaps = {}
    dt = cfg.dt
    g = cfg.grid
    cell = g.dx**2

    def record(n: int, u: SpectralField, prev_norm: SpectralField | None):
        if n % cfg.cadence == 0 or n in norm_steps or n == cfg.stop_step:
            trace.times.append(n * dt)
            trace.steps.append(n)
            for k, info in tracked.items():
                v = u.value_at(tuple(info["m"]))
                trace.coeff[k].append([[float(x.real), float(x.imag)] for x in v])
            vals = inverse_unordered(u.coeffs * wmult, g)
            trace.weak.append(float(pointwise_magnitude(vals).sum() * cell))
            trace.energy.append(energy(u))
            trace.mean.append(float(np.abs(u.coeffs[:, 0, 0]).max()))
        if n in norm_steps:
            row = {"t": n * dt, "step": n}
            row.update(_norm_row(u, u0, prev_norm, cfg, bank))
            trace.norms.append(row)
        if n in cfg.snapshot_steps:
            snaps[n] = u
            if cfg.snapshot_dir:
                Path(cfg.snapshot_dir).mkdir(parents=True, exist_ok=True)
                write_lpf1(Path(cfg.snapshot_dir) / f"u_{n:06d}.lpf1", u, {"t": n * dt, "step": n})

    u = u0
    record(0, u, None)
    prev_norm = u
    for n in range(1, cfg.stop_step + 1):
        u = step(u, dt, cfg.stability)
        record(n, u, prev_norm)
        if n in norm_steps:
            prev_norm = u
        if progress is not None:
            progress(n, cfg.stop_step)
    return RunResult(trace, snaps, u)


def simulate_counterexample(
    spec: CounterexampleSpec,
    grid: TorusGrid,
    T1: float | None = None,
    **kw,
) -> RunResult:
    u0 = build_u0(spec, grid)
    T1 = default_T1(u0) if T1 is None else T1
    tracked = kw.pop("tracked_k", tuple(k for k in range(3, spec.k_max + 1)))
    cfg = SimulationConfig(grid=grid, T1=T1, s=spec.s, tracked_k=tracked, **kw)
    return simulate(cfg, u0, spec, kw.get("progress"))


# ---------------------------------------------------------------- analysis


def _quad_slope(t: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Derivative at t = 0 of a least-squares quadratic; also the relative fit residual."""
    if len(t) < 3 or np.ptp(t) == 0:
        raise ValueError("degenerate fit: need >= 3 distinct early samples")
    coef = np.polyfit(t, y, 2)
    res = y - np.polyval(coef, t)
    scale = max(np.abs(y - y[0]).max(), 1e-300)
    return float(coef[1]), float(np.abs(res).max() / scale)


def oracle_slope(k: int, trace: TraceRecord, spec: CounterexampleSpec, grid: TorusGrid) -> dict:
    """Predicted dg_k/dt at 0 from the sparse oracle on the simulation lattice."""
    s = spec.s
    pt = np.array(trace.tracked[k]["xi"])
    F = sparse_projected(pt, spec, lattice=grid.dxi)
    u0k = trace.coefficient(k)[0]
    # d/dt |u0 - t F| at t = 0
    deriv = float(np.real(np.vdot(u0k, -F)) / np.linalg.norm(u0k))
    return {
        "slope": 2.0 ** (k * s) * deriv,
        "magnitude": 2.0 ** (k * s) * float(np.linalg.norm(F)),
        "F": [[float(x.real), float(x.imag)] for x in F],
    }


def inflation_analysis(
    trace: TraceRecord,
    s: float,
    spec: CounterexampleSpec | None = None,
    grid: TorusGrid | None = None,
    n_fit: int = 9,
) -> dict:
    ks = sorted(trace.coeff)
    t = np.array(trace.times)
    early = slice(0, n_fit)
    sigma, fit_res, g0 = {}, {}, {}
    for k in ks:
        gk = trace.g(k, s)
        sigma[k], fit_res[k] = _quad_slope(t[early], gk[early])
        g0[k] = float(gk[0])
    ratios = {k: sigma[k + 1] / sigma[k] for k in ks if k + 1 in sigma}
    out = {"s": s, "sigma": sigma, "ratios": ratios, "fit_residual": fit_res, "g0": g0, "n_fit": n_fit}
    if spec is not None and grid is not None:
        from .counterexample import c0

        c0n = float(np.linalg.norm(c0(spec)))
        pred = {k: oracle_slope(k, trace, spec, grid) for k in ks}
        out["oracle"] = pred
        out["oracle_rel_error"] = {k: abs(sigma[k] - pred[k]["slope"]) / abs(pred[k]["slope"]) for k in ks}
        out["oracle_magnitude_rel_error"] = {
            k: abs(sigma[k] - pred[k]["magnitude"]) / pred[k]["magnitude"] for k in ks
        }
        out["c0_norm"] = c0n
        out["g0_rel_error"] = {k: abs(g0[k] - c0n) / c0n for k in ks}
    return out


def fit_through_origin(x, y) -> tuple[float, float]:
    """Slope c minimizing sum (y - c x)^2 and the relative residual ||y - c x|| / ||y||."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if not np.any(x):
        return 0.0, 0.0
    c = float(x @ y / (x @ x))
    ny = np.linalg.norm(y)
    return c, float(np.linalg.norm(y - c * x) / ny) if ny > 0 else 0.0


def continuity_probe(trace: TraceRecord, s: float, eps: float = 0.5) -> dict:
    if eps <= 0:
        raise ValueError("eps must be positive")
    rows = trace.norms
    k1 = f"dF{s - 1.0:g}"
    kp = f"pF{s - 1.0:g}"
    pairs = []
    for i, r in enumerate(rows):
        if r["step"] > 0:
            pairs.append((abs(r["t"]), r[k1], "origin"))
        if i > 0 and kp in r:
            pairs.append((abs(r["t"] - rows[i - 1]["t"]), r[kp], "adjacent"))
    x = [p[0] for p in pairs]
    y = [p[1] for p in pairs]
    slope, resid = fit_through_origin(x, y)
    # dyadic samples of ||u(t) - u(0)||_{F^{s - eps}}
    n = trace.config["steps"]
    dyadic = []
    m = n
    while m >= 1:
        try:
            r = trace.norm_row(m)
            dyadic.append((r["t"], r[f"dF{s - eps:g}"]))
        except KeyError:
            pass
        if m % 2:
            break
        m //= 2
    dyadic.sort()
    vals = [v for _, v in dyadic]
    mono = all(b > a for a, b in zip(vals, vals[1:])) and all(v > 0 for v in vals)
    ratios = [b / a for a, b in zip(vals, vals[1:]) if a > 0]
    return {
        "s": s,
        "eps": eps,
        "lipschitz_pairs": [[a, b, c] for a, b, c in pairs],
        "lipschitz_slope": slope,
        "lipschitz_residual": resid,
        "dyadic": [[a, b] for a, b in dyadic],
        "dyadic_monotone": mono,
        "dyadic_ratios": ratios,
        "zero_pair": 0.0,
    }


def discontinuity_evidence(traces: dict, s: float, t_star_step: int) -> dict:
    """D(t*, k_max) = ||u(t*) - u(0)||_{F^s} across runs differing only in k_max."""
    if len(traces) < 3:
        raise ValueError("need at least 3 values of k_max")
    key = f"dF{s:g}"
    D, top, base = {}, {}, {}
    for kmax in sorted(traces):
        tr = traces[kmax]
        row = tr.norm_row(t_star_step)
        D[kmax] = row[key]
        top[kmax] = row["argmax_shell_diff"]
        base[kmax] = tr.norm_row(0)["argmax_shell"]
    ks = sorted(D)
    increasing = all(D[b] > D[a] for a, b in zip(ks, ks[1:]))
    return {
        "s": s,
        "t_star_step": t_star_step,
        "t_star": traces[ks[0]].norm_row(t_star_step)["t"],
        "D": D,
        "strictly_increasing": increasing,
        "argmax_shell_diff": top,
        "argmax_shell_at_zero": base,
        "top_shell_attained": all(top[k] == k for k in ks),
    }


def refinement_jumps(trace: TraceRecord) -> dict:
    """Max adjacent-sample jump of N(u)(t) at the recorded cadence and at twice that spacing."""
    w = np.array(trace.weak)
    if len(w) < 3:
        raise ValueError("need >= 3 samples")
    fine = float(np.abs(np.diff(w)).max())
    coarse = float(np.abs(np.diff(w[::2])).max())
    return {"fine": fine, "coarse": coarse, "decreases": fine < coarse}


def partial_sum_trace(fields: dict, ells, s: float, eps: float, bank: FilterBank | None = None) -> dict:
    """||u - S_l u||_{F^{s - eps}} per snapshot time and l."""
    out = {}
    for t, u in sorted(fields.items()):
        b = bank or filter_bank(u.grid)
        row = {}
        for l in ells:
            if l >= b.j_max + 1:
                row[l] = 0.0
                continue
            r = u.with_coeffs(u.coeffs * (1.0 - b.chi_dilated(l + 1)))
            row[l] = shell_scan(r, [s - eps], bank=b).tl[s - eps]
        out[t] = row
    return out


def mollify(u: SpectralField, eps: float, bank: FilterBank | None = None) -> SpectralField:
    """u_eps = sum_j 2^{-eps j} Delta_j u."""
    bank = bank or filter_bank(u.grid)
    m = np.zeros(u.grid.xi_abs.shape)
    for j in bank.j_range():
        m += 2.0 ** (-eps * j) * bank.multiplier(j)
    return u.with_coeffs(u.coeffs * m)


def mollified_trace(fields: dict, epsilons, weak: WeakSequenceSpec, s: float, bank: FilterBank | None = None) -> dict:
    """|N(u_eps)(t) - N(u)(t)| per snapshot time and eps."""
    out = {}
    for t, u in sorted(fields.items()):
        b = bank or filter_bank(u.grid)
        base = weak_functional(u, weak, s, b)
        out[t] = {"N": base}
        for e in epsilons:
            out[t][e] = abs(weak_functional(mollify(u, e, b), weak, s, b) - base)
    return out
