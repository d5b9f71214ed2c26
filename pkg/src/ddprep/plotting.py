"""Figure rendering for experiment result tables.

One PNG per experiment run, written next to the CSV.  Layouts are chosen by
experiment family: population-vs-detuning line plots, log-log heat maps for
the two-parameter sweeps, and a fitted power-law panel for the dynamic-noise
scaling run.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .results import ResultTable


def _by_sequence(table: ResultTable):
    groups: dict[str, list] = {}
    for rec in table.records():
        groups.setdefault(rec["sequence"], []).append(rec)
    return groups


def _line_plot_population(table: ResultTable, ax, value_key="p_j0"):
    for label, recs in sorted(_by_sequence(table).items()):
        recs = sorted(recs, key=lambda r: r["delta"])
        deltas = [r["delta"] for r in recs]
        values = [r[value_key] for r in recs]
        style = "--" if label.endswith(":leading") else "-"
        ax.plot(deltas, values, style, marker="o", ms=3, label=label)
    ax.set_xscale("log")
    ax.set_xlabel("detuning spread")
    ax.set_ylabel(value_key)
    ax.legend(fontsize=7)
    ax.grid(alpha=0.3)


def _heatmap(ax, deltas, nbars, grid, title):
    mesh = ax.pcolormesh(
        np.log10(deltas), np.log10(nbars), grid.T, shading="nearest", cmap="viridis"
    )
    ax.set_xlabel("log10 detuning spread")
    ax.set_ylabel("log10 pulse density")
    ax.set_title(title, fontsize=9)
    return mesh


def _grid_from_records(recs, value_key):
    deltas = sorted({r["delta"] for r in recs})
    nbars = sorted({r["nbar"] for r in recs})
    grid = np.full((len(deltas), len(nbars)), np.nan)
    for r in recs:
        grid[deltas.index(r["delta"]), nbars.index(r["nbar"])] = r[value_key]
    return np.asarray(deltas), np.asarray(nbars), grid


def render_figure(experiment_id: str, table: ResultTable, path: str):
    """Render the standard figure for an experiment and save it to path."""
    if experiment_id == "table1":
        fig, ax = plt.subplots(figsize=(6, 3.2))
        recs = table.records()
        labels = [r["sequence"] for r in recs]
        values = [r["alpha3b_N2"] for r in recs]
        ax.bar(labels, values, color="tab:blue")
        ax.set_ylabel("alpha3b * N^2")
        ax.axhline(0.0, color="k", lw=0.8)
        ax.grid(axis="y", alpha=0.3)
    elif experiment_id in ("fig3a", "fig3b", "fig5"):
        fig, ax = plt.subplots(figsize=(5.2, 3.6))
        _line_plot_population(table, ax)
        ax.set_title(
            "steady singlet population vs inhomogeneous broadening", fontsize=9
        )
    elif experiment_id in ("fig4", "fig6"):
        groups = _by_sequence(table)
        fig, axes = plt.subplots(
            1, len(groups), figsize=(4.0 * len(groups), 3.4), squeeze=False
        )
        for ax, (label, recs) in zip(axes[0], sorted(groups.items())):
            deltas, nbars, grid = _grid_from_records(recs, "p_j0")
            mesh = _heatmap(ax, deltas, nbars, grid, label)
            fig.colorbar(mesh, ax=ax, label="P(J=0)")
    elif experiment_id == "fig8":
        fig, ax = plt.subplots(figsize=(5.2, 3.6))
        for label, recs in sorted(_by_sequence(table).items()):
            if label == "none":
                recs = sorted(recs, key=lambda r: r["delta"])
                ax.plot(
                    [r["delta"] for r in recs],
                    [r["fidelity"] for r in recs],
                    "k--",
                    marker="x",
                    label="no pulses",
                )
                continue
            by_nbar: dict[float, list] = {}
            for r in recs:
                by_nbar.setdefault(r["nbar"], []).append(r)
            for nbar, rows in sorted(by_nbar.items()):
                rows = sorted(rows, key=lambda r: r["delta"])
                ax.plot(
                    [r["delta"] for r in rows],
                    [r["fidelity"] for r in rows],
                    marker="o",
                    ms=3,
                    label=f"{label}, density {nbar:g}",
                )
        ax.set_xlabel("detuning spread (units of pump rate)")
        ax.set_ylabel("cluster-state fidelity")
        ax.set_ylim(0, 1.02)
        ax.legend(fontsize=7)
        ax.grid(alpha=0.3)
    elif experiment_id == "dynamic_noise_scaling":
        fig, ax = plt.subplots(figsize=(5.0, 3.6))
        recs = sorted(table.records(), key=lambda r: r["tau_bar"])
        tau = np.array([r["tau_bar"] for r in recs])
        infid = np.array([r["infidelity"] for r in recs])
        err = np.array([r["stderr"] or 0.0 for r in recs])
        ax.errorbar(tau, infid, yerr=err, fmt="o", ms=4, capsize=2)
        keep = infid > 0
        if keep.sum() >= 2:
            slope, intercept = np.polyfit(np.log(tau[keep]), np.log(infid[keep]), 1)
            ax.plot(
                tau,
                np.exp(intercept) * tau**slope,
                "-",
                alpha=0.7,
                label=f"slope {slope:.2f}",
            )
            ax.legend(fontsize=8)
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("average pulse interval")
        ax.set_ylabel("steady-state infidelity")
        ax.grid(alpha=0.3, which="both")
    else:
        raise ValueError(f"no figure layout for experiment {experiment_id!r}")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
