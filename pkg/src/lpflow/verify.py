"""Verification suites: each check measures one property and compares it to a tolerance.

Acceptance criteria 1 to 11 each map to exactly one check (``criterion`` set);
the remaining checks are supporting diagnostics.
"""

from __future__ import annotations

import gc
import hashlib
import json
import math
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import _fft
from .counterexample import (
    CounterexampleSpec,
    Variant,
    build_u0,
    c0,
    default_grid,
    interaction_table,
    mechanism_constants,
    nearest_lattice,
    periodization_study,
    u0_hat,
    xi_point,
)
from .dynamics import (
    SimulationConfig,
    TraceRecord,
    continuity_probe,
    default_T1,
    discontinuity_evidence,
    energy_drift_run,
    inflation_analysis,
    perturbed_taylor_green,
    refinement_jumps,
    rk4_order,
    simulate,
)
from .filter_bank import filter_bank
from .paradifferential import bony, divergence_defect, leray, pressure_gradient, shell_bound_report
from .spectral_core import RealField, SpectralField, forward, grid_for_spacing, make_grid

SUITES = ("partition", "leray", "supports", "mechanism", "shellbound", "bony", "periodization", "dynamics")

# Descriptive anchors naming the mathematical statement each check exercises.
ANCHORS = {
    1: "Littlewood-Paley partition of unity",
    2: "closed-form spectrum of u0 at xi^k (2^{-ks} c0)",
    3: "support analysis of the interacting ball pairs",
    4: "shell constant 2^k (c1 + c2(k)) of the projected nonlinearity",
    5: "L1 shell bound for Delta_k (u.grad)v",
    6: "Bony decomposition fg = T_f g + T_g f + R(f, g)",
    7: "norm-inflation mechanism g_k(t) ~ c0 + t sigma_k",
    8: "Lipschitz continuity into F^{s-1} and continuity into F^{s-eps}",
    9: "discontinuity of the solution map in F^s",
    10: "continuity of the weak functional N(u)(t)",
    11: "solver hygiene (energy, divergence, RK4 order, dt-halving)",
}


@dataclass
class CheckResult:
    name: str
    status: str  # "pass" | "fail"
    value: float | None
    tolerance: str
    anchor: str
    criterion: int | None = None
    detail: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def line(self) -> str:
        tag = f"criterion {self.criterion:>2}" if self.criterion else "supporting  "
        val = "n/a" if self.value is None else f"{self.value:.6g}"
        return f"[{self.status.upper():4}] {tag} {self.name}: {val} ({self.tolerance})"


def _check(name, ok, value, tolerance, anchor, criterion=None, **detail) -> CheckResult:
    return CheckResult(
        name,
        "pass" if ok else "fail",
        None if value is None else float(value),
        tolerance,
        anchor,
        criterion,
        _jsonable(detail),
    )


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return x


@dataclass
class SuiteResult:
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def criteria(self) -> dict:
        return {c.criterion: c for c in self.checks if c.criterion is not None}

    def extend(self, checks) -> None:
        self.checks.extend(checks)

    def to_json(self) -> str:
        return json.dumps({"passed": self.passed, "checks": [asdict(c) for c in self.checks]}, indent=2, sort_keys=True)

    def write(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json() + "\n")
        return path


# -------------------------------------------------------------------- context


def _source_digest() -> str:
    """Hash of the modules a simulation depends on; keys the run cache."""
    here = Path(__file__).parent
    h = hashlib.sha256()
    for name in ("_fft.py", "spectral_core.py", "filter_bank.py", "norms.py", "paradifferential.py",
                 "counterexample.py", "dynamics.py"):
        h.update((here / name).read_bytes())
    return h.hexdigest()[:16]


def default_cache_dir() -> Path:
    root = os.environ.get("LPFLOW_CACHE")
    return Path(root) if root else Path.home() / ".cache" / "lpflow"


class Context:
    """Shared inputs for the suites, with simulations cached on disk by configuration."""

    def __init__(self, spec: CounterexampleSpec | None = None, grid=None, steps: int = 192,
                 T1: float | None = None, kmax_sweep=(3, 4, 5), t_star_fraction: float = 0.25,
                 cache_dir=None, progress=None):
        self.spec = spec or CounterexampleSpec.grid_adapted()
        self.grid = grid or default_grid()
        self.steps = int(steps)
        self.kmax_sweep = tuple(sorted(int(k) for k in kmax_sweep))
        self.t_star_fraction = float(t_star_fraction)
        self.cache_dir = Path(cache_dir) if cache_dir else default_cache_dir() / "runs"
        self.progress = progress
        self._u0 = {}
        self._T1 = T1
        self._traces = {}

    # inputs
    def u0(self, spec: CounterexampleSpec | None = None) -> SpectralField:
        spec = spec or self.spec
        key = json.dumps(spec.to_dict(), sort_keys=True)
        if key not in self._u0:
            self._u0[key] = build_u0(spec, self.grid)
        return self._u0[key]

    @property
    def T1(self) -> float:
        if self._T1 is None:
            self._T1 = default_T1(self.u0())
        return self._T1

    @property
    def t_star_step(self) -> int:
        n = self.steps * self.t_star_fraction
        if abs(n - round(n)) > 1e-9:
            raise ValueError("t* must fall on a step of the main run")
        return int(round(n))

    # runs
    def run_config(self, name: str) -> tuple[CounterexampleSpec, SimulationConfig]:
        spec, steps, stop = self.spec, self.steps, None
        if name.startswith("kmax"):
            spec = CounterexampleSpec(**{**self.spec.to_dict(), "k_max": int(name[4:])})
            stop = self.t_star_step
        elif name == "half":
            steps, stop = 2 * self.steps, 2 * self.t_star_step
        elif name != "main":
            raise KeyError(name)
        cfg = SimulationConfig(
            grid=self.grid,
            T1=self.T1,
            steps=steps,
            stop_step=stop,
            s=spec.s,
            tracked_k=tuple(range(3, spec.k_max + 1)),
            norm_cadence=max(1, steps // 6),
        )
        return spec, cfg

    def trace(self, name: str) -> TraceRecord:
        """Trace for 'main', 'half' (dt / 2 over [0, t*]) or 'kmax<K>' (runs to t*)."""
        if name == f"kmax{self.spec.k_max}":
            name = "main"
        if name in self._traces:
            return self._traces[name]
        spec, cfg = self.run_config(name)
        key = hashlib.sha256(
            json.dumps({"cfg": cfg.to_dict(), "spec": spec.to_dict(), "src": _source_digest()}, sort_keys=True).encode()
        ).hexdigest()[:20]
        path = self.cache_dir / key / "trace.json"
        if path.exists():
            tr = TraceRecord.load(path)
        else:
            cb = None
            if self.progress is not None:
                cb = lambda n, m: self.progress(name, n, m)  # noqa: E731
            tr = simulate(cfg, self.u0(spec), spec, cb).trace
            tr.write(path.parent)
        self._traces[name] = tr
        return tr


# --------------------------------------------------------------------- suites


def suite_partition(ctx: Context) -> list:
    bank = filter_bank(ctx.grid)
    d = bank.partition_defect()
    return [_check("partition_of_unity", d <= 1e-14, d, "<= 1e-14", ANCHORS[1], 1, j_max=bank.j_max)]


def _random_field(grid, seed: int, band: float, real: bool = True, divfree: bool = False) -> SpectralField:
    rng = np.random.default_rng(seed)
    shape = (2 if divfree else 1, grid.N, grid.N)
    vals = rng.standard_normal(shape) + (0 if real else 1j * rng.standard_normal(shape))
    c = forward(RealField(grid, vals)).coeffs
    c[:, grid.xi_abs > band] = 0.0
    f = SpectralField(grid, c, real)
    return leray(f) if divfree else f


def suite_leray(ctx: Context) -> list:
    g = make_grid(128, 2 * math.pi)
    w = _random_field(g, 1, 20.0, divfree=True)
    d_proj = divergence_defect(w)
    u0 = ctx.u0()
    d_u0 = divergence_defect(u0)
    pw = leray(w)
    idem = float(np.abs(leray(pw).coeffs - pw.coeffs).max() / np.abs(pw.coeffs).max())
    gp = pressure_gradient(w)
    curl = float(np.abs(g.xi[0] * gp.coeffs[1] - g.xi[1] * gp.coeffs[0]).max() / max(np.abs(gp.coeffs).max(), 1e-300))
    tol = 1e-13
    return [
        _check("leray_divergence_free", d_proj <= tol, d_proj, f"<= {tol:g}", "Leray projection onto divergence-free fields"),
        _check("leray_idempotent", idem <= tol, idem, f"<= {tol:g}", "Leray projection onto divergence-free fields"),
        _check("pressure_gradient_curl_free", curl <= tol, curl, f"<= {tol:g}", "pressure gradient is a gradient"),
        _check("u0_divergence_free", d_u0 <= tol, d_u0, f"<= {tol:g}", "u0 = curl-type construction is divergence-free"),
    ]


def suite_supports(ctx: Context) -> list:
    out = []
    # closed form at xi^k: sparse (exact point), grid (nearest lattice), aligned theta = 0
    worst_sparse, worst_grid, worst_aligned = 0.0, 0.0, 0.0
    u0 = ctx.u0()
    for spec in (CounterexampleSpec.faithful(), ctx.spec):
        ref = 5.0 * 2.0**-3 * 1j * np.array([-1.0, math.sqrt(3.0)])
        for k in range(2, spec.k_max + 1):
            val = u0_hat(xi_point(k, spec), spec) * 2.0 ** (k * spec.s)
            worst_sparse = max(worst_sparse, float(np.linalg.norm(val - ref) / np.linalg.norm(ref)))
    for k in range(2, ctx.spec.k_max + 1):
        _, m = nearest_lattice(xi_point(k, ctx.spec), ctx.grid)
        val = u0.value_at(m) * 2.0 ** (k * ctx.spec.s)
        ref = c0(ctx.spec)
        worst_grid = max(worst_grid, float(np.linalg.norm(val - ref) / np.linalg.norm(ref)))
    aligned = CounterexampleSpec(**{**ctx.spec.to_dict(), "theta": 0.0})
    ua = build_u0(aligned, ctx.grid)
    for k in range(2, aligned.k_max + 1):
        pt, m = nearest_lattice(xi_point(k, aligned), ctx.grid)
        ref = c0(aligned)
        val = ua.value_at(m) * 2.0 ** (k * aligned.s)
        worst_aligned = max(worst_aligned, float(np.linalg.norm(val - ref) / np.linalg.norm(ref)))
    ok2 = worst_sparse <= 1e-12 and worst_grid <= 0.02 and worst_aligned <= 1e-10
    out.append(_check(
        "closed_form_spectrum", ok2, worst_sparse, "sparse <= 1e-12, grid <= 2%, aligned <= 1e-10", ANCHORS[2], 2,
        sparse_rel=worst_sparse, grid_rel=worst_grid, aligned_rel=worst_aligned,
    ))
    counts = {}
    for spec in (CounterexampleSpec.faithful(), ctx.spec):
        for k in range(3, spec.k_max + 1):
            counts[f"{spec.variant.value}:{k}"] = len(interaction_table(k, spec).pairs)
    bad = {k: v for k, v in counts.items() if v != 3}
    out.append(_check("interaction_pairs", not bad, max(counts.values()), "exactly 3 pairs per k", ANCHORS[3], 3,
                      counts=counts))
    return out


def suite_mechanism(ctx: Context) -> list:
    mc = mechanism_constants(CounterexampleSpec.faithful(), range(3, 13), strict=False)
    c2 = mc.c2_norms()
    dis = mc.max_disagreement()
    ratio_err = abs(mc.c1_ratio_alternate_pair - 3.0)
    ok = dis <= 1e-8 and c2[12] < c2[4] and ratio_err <= 1e-6
    return [_check(
        "mechanism_constants", ok, dis, "routes <= 1e-8 rel; |c2(12)| < |c2(4)|; alternate-pair ratio 3 +- 1e-6",
        ANCHORS[4], 4,
        route_disagreement=mc.route_disagreement, c2_norms=c2, c1=mc.c1, c1_alternate_pair=mc.c1_alternate_pair,
        c1_ratio_standard=mc.c1_ratio_standard, c1_ratio_alternate_pair=mc.c1_ratio_alternate_pair,
        moment=mc.moment, moment_direct=mc.moment_direct,
    )]


def suite_shellbound(ctx: Context) -> list:
    u0 = ctx.u0()
    ks = list(range(3, ctx.spec.k_max + 1))
    rep = shell_bound_report(u0, u0, ctx.spec.s, ks)
    spread = max(rep.M) / min(rep.M) if min(rep.M) > 0 else float("inf")
    ok = abs(rep.slope + 2.0) <= 0.3 and spread <= 10.0
    return [_check("shell_bound", ok, rep.slope, "slope -2 +- 0.3; max M / min M <= 10", ANCHORS[5], 5,
                   block_l1=rep.block_l1, M=rep.M, spread=spread)]


def bony_corpus(ctx: Context) -> list:
    """u0 components plus four band-limited fields, all on the simulation grid."""
    u0 = ctx.u0()
    g = ctx.grid
    x1, x2 = g.x
    L = g.L
    gauss = forward(RealField(g, np.exp(-((x1 / (0.05 * L)) ** 2 + (x2 / (0.08 * L)) ** 2))))
    gauss.coeffs[:, g.xi_abs > 40] = 0.0
    return [
        ("u0_1", u0.component(0)),
        ("u0_2", u0.component(1)),
        ("random_real_a", _random_field(g, 11, 24.0)),
        ("random_real_b", _random_field(g, 12, 36.0)),
        ("random_complex", _random_field(g, 13, 30.0, real=False)),
        ("gaussian", gauss),
    ]


def suite_bony(ctx: Context) -> list:
    corpus = bony_corpus(ctx)
    n = len(corpus)
    res = {}
    for i in range(n):
        a, f = corpus[i]
        b, g = corpus[(i + 1) % n]
        res[f"{a}*{b}"] = bony(f, g).residual()
    worst = max(res.values())
    return [_check("bony_identity", worst <= 1e-10, worst, "<= 1e-10 relative", ANCHORS[6], 6, residuals=res)]


def suite_periodization(ctx: Context, dxis=(1 / 32, 1 / 64, 1 / 128), N: int = 4096) -> list:
    grids = [grid_for_spacing(N, d) for d in dxis]
    # only bumps whose unit ball fits inside the coarsest band can be compared across grids
    nyq = min(g.nyquist for g in grids)
    ks = [k for k in range(2, ctx.spec.k_max + 1) if np.linalg.norm(xi_point(k, ctx.spec)) + 1 < nyq]
    rep = periodization_study(ctx.spec, grids, j=3, ks=ks, strict=False)
    l1_rel = abs(rep.a_l1[-1] - rep.a_l1[-2]) / rep.a_l1[-1]
    anchor = "continuum-to-torus control"
    return [
        _check("periodization_monotone", all(rep.monotone.values()), None, "residuals decrease", anchor,
               **rep.monotone),
        _check("periodization_a3_l1", l1_rel <= 1e-3, l1_rel, "<= 0.1% between the two finest grids", anchor,
               a_l1=rep.a_l1, dxi=rep.dxi),
        _check("periodization_aligned", max(rep.aligned_residual) <= 1e-10, max(rep.aligned_residual), "<= 1e-10",
               anchor, aligned=rep.aligned_residual, u0_residual=rep.u0_residual),
    ]


# ---------------------------------------------------------- dynamics (7 - 11)


def _rel(a, b) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    den = np.maximum(np.abs(b), 1e-300)
    return float((np.abs(a - b) / den).max()) if a.size else 0.0


def dt_halving(main: TraceRecord, half: TraceRecord, s: float) -> dict:
    """Largest relative difference of every common diagnostic between dt and dt / 2."""
    out = {}
    upto = half.steps[-1] // 2
    idx_main = [i for i, n in enumerate(main.steps) if 0 < n <= upto]
    pos_half = {n: i for i, n in enumerate(half.steps)}
    idx_half = [pos_half[2 * main.steps[i]] for i in idx_main]
    for k in main.coeff:
        out[f"g{k}"] = _rel(half.g(k, s)[idx_half], main.g(k, s)[idx_main])
    out["N"] = _rel(np.array(half.weak)[idx_half], np.array(main.weak)[idx_main])
    out["energy"] = _rel(np.array(half.energy)[idx_half], np.array(main.energy)[idx_main])
    rows_h = {r["step"]: r for r in half.norms}
    # divergence residuals are round-off noise, so a relative comparison is meaningless there
    keys = [k for k in main.norm_keys() if k.startswith(("F", "dF", "W1inf"))]
    for key in keys:
        a, b = [], []
        for r in main.norms:
            n = r["step"]
            if 0 < n <= upto and 2 * n in rows_h and key in r and key in rows_h[2 * n]:
                a.append(rows_h[2 * n][key])
                b.append(r[key])
        if a:
            out[key] = _rel(a, b)
    return out


def suite_dynamics(ctx: Context) -> list:
    s = ctx.spec.s
    main = ctx.trace("main")
    out = []

    inf = inflation_analysis(main, s, ctx.spec, ctx.grid)
    ratios = {k: inf["ratios"][k] for k in (3, 4) if k in inf["ratios"]}
    rel = inf["oracle_rel_error"]
    ok7 = len(ratios) == 2 and all(1.7 <= r <= 2.3 for r in ratios.values()) and max(rel.values()) <= 0.05
    out.append(_check("norm_inflation_slopes", ok7, max(rel.values()),
                      "sigma_{k+1}/sigma_k in [1.7, 2.3]; oracle <= 5%", ANCHORS[7], 7,
                      sigma=inf["sigma"], ratios=inf["ratios"], oracle_rel_error=rel,
                      g0=inf["g0"], fit_residual=inf["fit_residual"]))

    cont = continuity_probe(main, s, 0.5)
    ok8 = cont["lipschitz_residual"] <= 0.10 and cont["dyadic_monotone"]
    out.append(_check("continuity_lower_norms", ok8, cont["lipschitz_residual"],
                      "Lipschitz fit residual <= 10%; dyadic F^{s-1/2} monotone to 0", ANCHORS[8], 8,
                      lipschitz_slope=cont["lipschitz_slope"], dyadic=cont["dyadic"]))

    traces = {k: ctx.trace(f"kmax{k}") for k in ctx.kmax_sweep}
    disc = discontinuity_evidence(traces, s, ctx.t_star_step)
    ok9 = disc["strictly_increasing"] and disc["top_shell_attained"]
    Ds = disc["D"]
    growth = Ds[max(Ds)] / Ds[min(Ds)]
    out.append(_check("discontinuity_in_Fs", ok9, growth, "D strictly increasing in k_max; sup at top shell",
                      ANCHORS[9], 9, D=Ds, argmax_shell_diff=disc["argmax_shell_diff"], t_star=disc["t_star"]))

    jumps = refinement_jumps(main)
    ok10 = jumps["decreases"] and disc["strictly_increasing"]
    out.append(_check("weak_functional_continuity", ok10, jumps["fine"] / jumps["coarse"],
                      "refinement jump decreases while D grows", ANCHORS[10], 10, **jumps, D=Ds))

    # hygiene
    tg = perturbed_taylor_green(32)
    order = rk4_order(tg, 2.0, (120, 240, 480, 960))
    order_ok = all(2.8 <= o <= 5.2 for o in order["orders"])
    e_real = energy_drift_run(tg, 2.0, 120)
    e_complex = main.energy_drift()
    div = max(r.get("divergence_ratio", 0.0) for r in main.norms)
    half = ctx.trace("half")
    halving = dt_halving(main, half, s)
    worst_half = max(halving.values())
    ok11 = e_real <= 1e-6 and div <= 1e-10 and order_ok and worst_half <= 1e-6
    out.append(_check("solver_hygiene", ok11, worst_half,
                      "energy <= 1e-6 (real data); divergence <= 1e-10; RK4 order 4 +- 30%; dt-halving <= 1e-6",
                      ANCHORS[11], 11, energy_drift_real=e_real, energy_drift_complex_run=e_complex,
                      divergence_ratio=div, rk4=order, dt_halving=halving))
    return out


_RUNNERS = {
    "partition": suite_partition,
    "leray": suite_leray,
    "supports": suite_supports,
    "mechanism": suite_mechanism,
    "shellbound": suite_shellbound,
    "bony": suite_bony,
    "periodization": suite_periodization,
    "dynamics": suite_dynamics,
}


def run_suites(names, ctx: Context | None = None, report=None) -> SuiteResult:
    """Run the named suites ('all' expands to every suite) in a fixed order."""
    names = list(names)
    if "all" in names:
        names = list(SUITES)
    unknown = [n for n in names if n not in _RUNNERS]
    if unknown:
        raise KeyError(f"unknown suite(s): {', '.join(unknown)}")
    ctx = ctx or Context()
    result = SuiteResult()
    for name in SUITES:
        if name in names:
            checks = _RUNNERS[name](ctx)
            # each suite works on its own array shapes; release their plan buffers
            _fft.clear_plans()
            gc.collect()
            result.extend(checks)
            if report is not None:
                for c in checks:
                    report(c)
    return result
