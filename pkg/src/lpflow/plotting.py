"""Deterministic SVG figures: fixed size, fixed element ids, no timestamps."""

from __future__ import annotations

import io
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

_RC = {
    "svg.hashsalt": "lpflow",
    "svg.fonttype": "none",
    "path.simplify": False,
    "figure.figsize": (6.4, 4.0),
    "font.size": 9,
}


def _save(fig, path) -> bytes:
    buf = io.BytesIO()
    fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    data = buf.getvalue()
    if path is not None:
        Path(path).write_bytes(data)
    return data


def plot_g_family(times, g: dict, path=None) -> bytes:
    """g_k(t) = 2^{ks}|u^(xi~^k, t)| for each tracked k."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        for k in sorted(g):
            ax.plot(times, g[k], label=f"k = {k}")
        ax.set_xlabel("t")
        ax.set_ylabel("2^{ks} |u^(xi_k, t)|")
        ax.legend(loc="upper left")
        ax.grid(True, alpha=0.3)
        return _save(fig, path)


def plot_norm_traces(times, series: dict, path=None) -> bytes:
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        for name in sorted(series):
            ax.plot(times, series[name], marker="o", markersize=3, label=name)
        ax.set_xlabel("t")
        ax.set_yscale("log")
        ax.legend(loc="best")
        ax.grid(True, alpha=0.3)
        return _save(fig, path)


def plot_discontinuity(D: dict, path=None) -> bytes:
    """Bars of D(t*, k_max) = ||u(t*) - u(0)||_{F^s}."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        ks = sorted(D)
        ax.bar([str(k) for k in ks], [D[k] for k in ks], color="#4477aa")
        ax.set_xlabel("k_max")
        ax.set_ylabel("||u(t*) - u(0)||_{F^s}")
        return _save(fig, path)


def plots_from_csv(csv_text: str, s: float, outdir) -> list:
    """Emit the g_k family and the norm-trace figure from a trace CSV."""
    import csv

    rows = list(csv.DictReader(io.StringIO(csv_text)))
    if not rows:
        raise ValueError("empty trace CSV")
    t = [float(r["t"]) for r in rows]
    ks = sorted({int(c.split("_k")[1]) for c in rows[0] if "_abs_k" in c})
    g = {}
    for k in ks:
        g[k] = [
            2.0 ** (k * s) * (float(r[f"u1_abs_k{k}"]) ** 2 + float(r[f"u2_abs_k{k}"]) ** 2) ** 0.5
            for r in rows
        ]
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    plot_g_family(t, g, out / "g_family.svg")
    keys = [c for c in rows[0] if c.startswith("F")]
    tn, series = [], {k: [] for k in keys}
    for r, tt in zip(rows, t):
        if keys and r[keys[0]] != "":
            tn.append(tt)
            for k in keys:
                series[k].append(float(r[k]))
    written = [str(out / "g_family.svg")]
    if tn:
        plot_norm_traces(tn, series, out / "norm_traces.svg")
        written.append(str(out / "norm_traces.svg"))
    return written
