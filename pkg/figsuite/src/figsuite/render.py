"""Figure renderers: multi-panel time-domain fields with the shared target,
log-scale spectra against omega/omega0, and noise-study summaries.

Rendering never modifies its inputs; every image embeds the contributing
config hashes in its metadata so a figure can be traced to the exact runs
that produced it.
"""

from __future__ import annotations

import warnings
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .io import RunData

_ODD_HARMONICS = (1, 3, 5, 7, 9, 11, 13, 15, 17, 19, 21, 23)


def _hash_note(runs: list[RunData]) -> str:
    return "; ".join(f"{r.name}:{r.config_hash[:16]}" for r in runs)


def _save(fig, out_path, runs: list[RunData]) -> list[Path]:
    """Write PNG and SVG with the config hashes embedded in metadata."""
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    note = _hash_note(runs)
    written = []
    for suffix in (".png", ".svg"):
        target = out_path.with_suffix(suffix)
        if suffix == ".png":
            metadata = {"config-hash": note}
        else:
            metadata = {"Description": f"config-hash: {note}"}
        fig.savefig(target, dpi=150, metadata=metadata)
        written.append(target)
    plt.close(fig)
    return written


def _grids_match(runs: list[RunData]) -> bool:
    t0 = runs[0].t
    return all(len(r.t) == len(t0) and np.allclose(r.t, t0) for r in runs[1:])


def render_time_panels(runs: list[RunData], out_path, rescale: bool = True):
    """One panel per run: the synthesized field (optionally rescaled, with
    the factor in the legend) over the shared target dipole."""
    if not runs:
        raise ValueError("no runs to render")
    if not _grids_match(runs):
        warnings.warn("run time grids differ; panels keep their own axes")
    n = len(runs)
    fig, axes = plt.subplots(n, 1, figsize=(7.0, 1.9 * n + 1.2), sharex=_grids_match(runs))
    axes = np.atleast_1d(axes)
    e_ref_max = np.max(np.abs(runs[0].tracking["E"]))
    for ax, run in zip(axes, runs):
        e = run.tracking["E"]
        scale = 1.0
        if rescale and np.max(np.abs(e)) > 0:
            scale = e_ref_max / np.max(np.abs(e))
        label = f"E_{run.name}(t)" + (f" x {scale:.3g}" if abs(scale - 1) > 1e-3 else "")
        ax.plot(run.t, scale * e, lw=0.7, color="tab:blue", label=label)
        ax.plot(run.t, run.tracking["Y"], lw=0.7, color="tab:red", alpha=0.6,
                label="target Y(t)")
        ax.set_ylabel("a.u.")
        ax.legend(loc="upper right", fontsize=7)
    axes[-1].set_xlabel("t (a.u.)")
    fig.suptitle("Tracking fields and the shared target dipole")
    fig.tight_layout()
    return _save(fig, out_path, runs)


def render_spectra(runs: list[RunData], out_path, max_harmonic: float = 30.0):
    """Log-scale |F[.]| of field and response/target vs omega/omega0, with
    gridlines at the odd harmonics."""
    if not runs:
        raise ValueError("no runs to render")
    n = len(runs)
    fig, axes = plt.subplots(n, 1, figsize=(7.0, 2.2 * n + 1.0))
    axes = np.atleast_1d(axes)
    for ax, run in zip(axes, runs):
        plotted = False
        if run.spectrum_field is not None:
            w = run.spectrum_field["omega_over_omega0"]
            a = run.spectrum_field["abs_amplitude"]
            m = (w <= max_harmonic) & (a > 0)
            if m.any():
                ax.semilogy(w[m], a[m], lw=0.7, color="tab:blue",
                            label=f"|F[E_{run.name}]|")
                plotted = True
        spec_y = run.spectrum_target or run.spectrum_response
        if spec_y is not None:
            w = spec_y["omega_over_omega0"]
            a = spec_y["abs_amplitude"]
            m = (w <= max_harmonic) & (a > 0)
            if m.any():
                ax.semilogy(w[m], a[m], lw=0.7, color="tab:red", alpha=0.7,
                            label="|F[Y]|")
                plotted = True
        for h in _ODD_HARMONICS:
            if h <= max_harmonic:
                ax.axvline(h, color="0.85", lw=0.5, zorder=0)
        if not plotted:
            ax.annotate("no nonzero spectrum to draw", (0.5, 0.5),
                        xycoords="axes fraction", ha="center", color="tab:orange")
            warnings.warn(f"run {run.name}: empty spectra")
        ax.set_ylabel("abs F")
        ax.legend(loc="upper right", fontsize=7)
    axes[-1].set_xlabel("omega / omega0")
    fig.tight_layout()
    return _save(fig, out_path, runs)


def render_noise(runs: list[RunData], out_path, noisy_run: RunData | None = None):
    """Residual d^2 per noise realization against the noise-free value,
    plus (when a noisy-response run is supplied) the clean-vs-noisy
    response spectra overlay."""
    if not runs:
        raise ValueError("no runs to render")
    panels = 1 + (noisy_run is not None)
    fig, axes = plt.subplots(panels, 1, figsize=(7.0, 3.0 * panels))
    axes = np.atleast_1d(axes)

    ax = axes[0]
    drawn = False
    for run in runs:
        if run.noise_d2 is None:
            warnings.warn(f"run {run.name}: no noise_d2.csv")
            continue
        r = run.noise_d2["realization"]
        d2 = run.noise_d2["d2"]
        ax.plot(r, d2, "o-", ms=3, lw=0.7, label=f"{run.name}: noisy d$^2$")
        if run.noise_summary and "d2_noise_free" in run.noise_summary:
            ax.axhline(run.noise_summary["d2_noise_free"], ls="--", color="tab:red",
                       lw=0.8, label=f"{run.name}: noise-free")
        drawn = True
    if not drawn:
        ax.annotate("no noise data", (0.5, 0.5), xycoords="axes fraction",
                    ha="center", color="tab:orange")
    ax.set_xlabel("realization")
    ax.set_ylabel("d$^2$")
    ax.set_yscale("log")
    ax.legend(fontsize=7)

    if noisy_run is not None:
        ax = axes[1]
        for run, color, label in ((runs[0], "tab:red", "clean"),
                                  (noisy_run, "tab:blue", "noisy")):
            spec = run.spectrum_response
            if spec is None:
                continue
            w, a = spec["omega_over_omega0"], spec["abs_amplitude"]
            m = (w <= 30.0) & (a > 0)
            ax.semilogy(w[m], a[m], lw=0.7, color=color, label=f"{label} response")
        ax.set_xlabel("omega / omega0")
        ax.set_ylabel("abs F[y]")
        ax.legend(fontsize=7)

    fig.tight_layout()
    return _save(fig, out_path, runs + ([noisy_run] if noisy_run else []))
