"""Command-line front end: build | verify | simulate | analyze | plot.

Exit codes: 0 success (all checks pass), 1 check failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

log = logging.getLogger("lpflow")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _out_dir(args, cfg) -> Path:
    if args.out:
        return Path(args.out)
    if cfg.output.directory:
        return Path(cfg.output.directory)
    if os.environ.get("LP_OUT_DIR"):
        return Path(os.environ["LP_OUT_DIR"])
    return Path("lpflow_out")


def _kmax_list(text: str | None):
    if text is None:
        return None
    try:
        vals = sorted({int(x) for x in text.split(",") if x.strip()})
    except ValueError as exc:
        raise UsageError(f"--kmax-sweep expects a comma-separated list of integers, got {text!r}") from exc
    if len(vals) < 3:
        raise UsageError("--kmax-sweep needs at least 3 values")
    return vals


def _dump(path: Path, obj) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return path


def _sparse_grid(spec, grid):
    """Lattice with the same spacing, wide enough to index every support ball."""
    from .counterexample import balls
    from .spectral_core import grid_for_spacing

    reach = max(float(abs(b.center).max()) + b.radius for b in balls(spec))
    N = grid.N
    while N * grid.dxi / 2 <= reach:
        N *= 2
    return grid if N == grid.N else grid_for_spacing(N, grid.dxi)


# ------------------------------------------------------------------ commands


def cmd_build(args, cfg) -> int:
    from .counterexample import build_alpha, build_low_bump, build_u0, low_bump_resolved, membership_report
    from .spectral_core import write_lpf1

    grid, spec = cfg.make_grid(), cfg.make_spec()
    out = _out_dir(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    resolved = low_bump_resolved(spec, grid)
    if not resolved:
        log.warning("low bump unresolved on global grid (rho=%g, dxi=%g); sparse outputs still written", spec.rho, grid.dxi)
    sgrid = _sparse_grid(spec, grid)
    alpha = build_alpha(spec, sgrid, strict=False)
    alpha.save(out / "alpha.sparse.json")
    build_low_bump(spec, sgrid, strict=False).save(out / "low_bump.sparse.json")
    written = ["alpha.sparse.json", "low_bump.sparse.json"]
    meta = {"config": cfg.echo(), "spec": spec.to_dict(), "grid": grid.to_dict(), "low_bump_resolved": resolved,
            "sparse_grid": sgrid.to_dict()}
    if sgrid is grid:
        u0 = build_u0(spec, grid, strict=False)
        write_lpf1(out / "u0.lpf1", u0, meta)
        rep = membership_report(u0, spec.s)
        (out / "norms.json").write_text(rep.to_json() + "\n")
        written += ["u0.lpf1", "u0.meta.json", "norms.json"]
    else:
        log.warning("support reaches beyond Nyquist %g of the global grid; dense u0 not written", grid.nyquist)
        _dump(out / "u0.meta.json", meta)
        written.append("u0.meta.json")
    for name in written:
        print(out / name)
    return EXIT_OK


def _context(args, cfg):
    from .verify import Context

    sim = cfg.simulation
    sweep = _kmax_list(args.kmax_sweep) or sim.kmax_sweep

    def progress(name, n, m):
        if n % 16 == 0 or n == m:
            log.info("run %s: step %d / %d", name, n, m)

    return Context(
        spec=cfg.make_spec(), grid=cfg.make_grid(), steps=sim.steps, T1=sim.T1, kmax_sweep=sweep,
        t_star_fraction=sim.t_star_fraction, progress=progress,
    )


def cmd_verify(args, cfg) -> int:
    from .verify import run_suites

    names = [s.strip() for s in (args.suite or "all").split(",") if s.strip()]
    ctx = _context(args, cfg)
    try:
        result = run_suites(names, ctx, report=lambda c: print(c.line(), flush=True))
    except KeyError as exc:
        raise UsageError(str(exc)) from exc
    path = result.write(_out_dir(args, cfg) / "suite.json")
    print(path)
    return EXIT_OK if result.passed else EXIT_FAIL


def cmd_simulate(args, cfg) -> int:
    from .counterexample import build_u0
    from .dynamics import SimulationConfig, WeakSequenceSpec, default_T1, simulate
    from .spectral_core import write_lpf1

    grid, spec = cfg.make_grid(), cfg.make_spec()
    sim = cfg.simulation
    u0 = build_u0(spec, grid)
    T1 = default_T1(u0) if sim.T1 is None else sim.T1
    weak = WeakSequenceSpec(sim.weak_sequence) if sim.weak_sequence else None
    tracked = tuple(sim.tracked_k) if sim.tracked_k else tuple(range(3, spec.k_max + 1))
    out = _out_dir(args, cfg)
    formats = set(cfg.output.formats)

    def run(run_spec, run_u0, stop, directory, ks):
        c = SimulationConfig(
            grid=grid, T1=T1, steps=sim.steps, stop_step=0 if T1 == 0 else stop, s=run_spec.s, tracked_k=ks,
            epsilons=tuple(sim.epsilons), weak=weak, cadence=sim.cadence, norm_cadence=sim.norm_cadence,
        )
        res = simulate(c, run_u0, run_spec, lambda n, m: log.info("step %d / %d", n, m) if n % 16 == 0 else None)
        tr = res.trace
        tr.meta["run_config"] = cfg.echo()
        directory.mkdir(parents=True, exist_ok=True)
        if "csv" in formats:
            (directory / "trace.csv").write_text(tr.to_csv())
        if "json" in formats:
            (directory / "summary.json").write_text(json.dumps(tr.summary(), indent=2, sort_keys=True) + "\n")
            (directory / "trace.json").write_text(tr.to_json() + "\n")
        if "lpf1" in formats:
            write_lpf1(directory / "final.lpf1", res.final, {"t": tr.times[-1], "step": tr.steps[-1]})
        print(directory)

    run(spec, u0, None, out, tracked)
    sweep = _kmax_list(args.kmax_sweep)
    if sweep:
        from .counterexample import CounterexampleSpec

        t_star = sim.steps * sim.t_star_fraction
        if abs(t_star - round(t_star)) > 1e-9:
            raise UsageError("t_star_fraction * steps must be an integer")
        for k in sweep:
            if k == spec.k_max:
                continue
            sk = CounterexampleSpec(**{**spec.to_dict(), "k_max": k})
            run(sk, build_u0(sk, grid), int(round(t_star)), out / f"kmax{k}", tuple(range(3, k + 1)))
    return EXIT_OK


def cmd_analyze(args, cfg) -> int:
    from .dynamics import TraceRecord, continuity_probe, discontinuity_evidence, inflation_analysis, refinement_jumps
    from .spectral_core import make_grid
    from .verify import _jsonable

    run_dir = Path(args.path)
    trace_path = run_dir / "trace.json" if run_dir.is_dir() else run_dir
    if not trace_path.exists():
        raise FileNotFoundError(f"no trace at {trace_path}")
    tr = TraceRecord.load(trace_path)
    out = Path(args.out) if args.out else trace_path.parent
    s = float(tr.config["s"])
    spec = cfg.make_spec()
    if tr.meta.get("spec"):
        from .counterexample import CounterexampleSpec

        spec = CounterexampleSpec(**tr.meta["spec"])
    g = tr.config["grid"]
    grid = make_grid(g["N"], g["L"])
    try:
        inf = inflation_analysis(tr, s, spec, grid)
    except ValueError as exc:
        inf = {"error": str(exc)}
    _dump(out / "inflation.json", _jsonable(inf))
    eps = tr.config.get("epsilons", [0.5])[0]
    cont = continuity_probe(tr, s, eps)
    try:
        cont["refinement_jumps"] = refinement_jumps(tr)
    except ValueError as exc:
        cont["refinement_jumps"] = {"error": str(exc)}
    _dump(out / "continuity.json", _jsonable(cont))
    written = ["inflation.json", "continuity.json"]
    sweep = {int(p.parent.name[4:]): TraceRecord.load(p) for p in sorted(trace_path.parent.glob("kmax*/trace.json"))}
    if sweep:
        sweep[spec.k_max] = tr
        t_star = min(x.steps[-1] for x in sweep.values())
        disc = discontinuity_evidence(sweep, s, t_star)
        _dump(out / "discontinuity.json", _jsonable(disc))
        written.append("discontinuity.json")
    else:
        log.warning("no kmax* sibling runs found; discontinuity.json not written")
    for name in written:
        print(out / name)
    if "ratios" in inf:
        print("sigma ratios:", ", ".join(f"{k}: {v:.4f}" for k, v in sorted(inf["ratios"].items())))
    return EXIT_OK


def cmd_plot(args, cfg) -> int:
    from .plotting import plot_discontinuity, plots_from_csv

    csv_path = Path(args.path)
    if csv_path.is_dir():
        csv_path = csv_path / "trace.csv"
    out = Path(args.out) if args.out else csv_path.parent
    written = plots_from_csv(csv_path.read_text(), cfg.counterexample.s, out)
    disc = csv_path.parent / "discontinuity.json"
    if disc.exists():
        D = {int(k): v for k, v in json.loads(disc.read_text())["D"].items()}
        plot_discontinuity(D, out / "discontinuity.svg")
        written.append(str(out / "discontinuity.svg"))
    for w in written:
        print(w)
    return EXIT_OK


# --------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lpflow", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--out", help="output directory (fallback: $LP_OUT_DIR)")
    common.add_argument("--threads", type=int, default=None, help="FFT threads (default: hardware count)")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("build", parents=[common], help="write u0, its sparse spectra and norm report")
    v = sub.add_parser("verify", parents=[common], help="run verification suites")
    v.add_argument("--suite", default="all", help="comma-separated suites or 'all'")
    v.add_argument("--kmax-sweep", help="k_max values for the discontinuity check, e.g. 3,4,5")
    s = sub.add_parser("simulate", parents=[common], help="integrate Euler from u0 and write traces")
    s.add_argument("--kmax-sweep", help="also run these k_max values up to t*")
    a = sub.add_parser("analyze", parents=[common], help="inflation, continuity and discontinuity reports")
    a.add_argument("path", help="run directory or trace.json")
    pl = sub.add_parser("plot", parents=[common], help="deterministic SVG figures from a trace CSV")
    pl.add_argument("path", help="trace.csv or its directory")
    return p


_COMMANDS = {
    "build": cmd_build,
    "verify": cmd_verify,
    "simulate": cmd_simulate,
    "analyze": cmd_analyze,
    "plot": cmd_plot,
}


def main(argv=None) -> int:
    from . import _fft
    from .config import ConfigError, load_config

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    _fft.set_threads(args.threads)
    try:
        cfg = load_config(args.config)
        return _COMMANDS[args.command](args, cfg)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
