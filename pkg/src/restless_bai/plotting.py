"""PNG figures written next to the CSV/JSON report files."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def plot_scaling(scaling: list[dict], path) -> Path:
    """Mean tau / log L against L, with the asymptotic bound for reference."""
    Ls = [r["L"] for r in scaling]
    y = [r["tau_over_logL"] for r in scaling]
    se = [r["se_tau_over_logL"] or 0.0 for r in scaling]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.errorbar(Ls, y, yerr=se, marker="o", capsize=3, label="mean tau / log L")
    if "bound" in scaling[0]:
        ax.plot(Ls, [r["bound"] for r in scaling], "k--", label="asymptotic bound")
    ax.set_xscale("log")
    ax.set_xlabel("L")
    ax.set_ylabel("tau / log L")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def plot_lp_sweep(table: list[dict], path) -> Path:
    R = [r["R"] for r in table]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(R, [r["T_R_star"] for r in table], "o-", label="T_R*")
    ax.plot(R, [r["T_R_unif"] for r in table], "s--", label="T_R unif")
    ax.set_xlabel("R")
    ax.set_ylabel("value")
    ax.set_xticks(R)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def plot_drift(rows: list[dict], path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for alt in sorted({r["alternative"] for r in rows}):
        sel = [r for r in rows if r["alternative"] == alt]
        ax.plot([r["n"] for r in sel], [r["slope"] for r in sel], "o-", label=f"slope vs {alt}")
        ax.axhline(sel[0]["limit"], color="k", ls="--", lw=0.8)
    ax.set_xscale("log")
    ax.set_xlabel("n")
    ax.set_ylabel("Z(n) / n")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def render_report(report, out_dir) -> list[Path]:
    out = Path(out_dir)
    written = []
    if report.scaling:
        written.append(plot_scaling(report.scaling, out / "scaling.png"))
    if report.lp_table:
        written.append(plot_lp_sweep(report.lp_table, out / "lp_sweep.png"))
    if report.drift:
        written.append(plot_drift(report.drift, out / "drift.png"))
    return written
