"""Optional PNG figures for a finished run (headless Agg backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["render_run"]

_STYLE = {"uncontrolled": dict(color="0.4", ls="--"), "controlled": dict(color="C0", ls="-")}


def render_run(records, sys, out_dir, title=""):
    """Write ``boundary.png``, ``uptake.png`` and ``profiles.png``.

    Parameters
    ----------
    records : dict
        Mode name to :class:`~richards_sdre.integrate.SimulationRecord`.
    sys : SemidiscreteSystem
        Supplies the grid and ``S_max`` reference line.
    out_dir : path-like
    """
    out = Path(out_dir)
    paths = []

    fig, ax = plt.subplots(figsize=(6, 3.5))
    for mode, rec in records.items():
        if rec.times:
            ax.plot(rec.times, np.asarray(rec.states)[:, 0], label=mode, **_STYLE[mode])
    ax.set_xlabel("t")
    ax.set_ylabel("top head y0 [cm]")
    ax.set_title(title)
    ax.legend()
    paths.append(_save(fig, out / "boundary.png"))

    fig, ax = plt.subplots(figsize=(6, 3.5))
    for mode, rec in records.items():
        if rec.times:
            ax.plot(rec.times, rec.mean_uptake, label=mode, **_STYLE[mode])
    ax.axhline(sys.feddes.S_max, color="k", lw=0.8, ls=":", label="S_max")
    ax.set_xlabel("t")
    ax.set_ylabel("mean uptake")
    ax.set_title(title)
    ax.legend()
    paths.append(_save(fig, out / "uptake.png"))

    fig, axes = plt.subplots(1, len(records), figsize=(4 * len(records), 4), squeeze=False)
    z = sys.grid.z
    for ax, (mode, rec) in zip(axes[0], records.items()):
        if not rec.times:
            continue
        times = np.asarray(rec.times)
        for frac in (0.0, 0.25, 0.5, 1.0):
            i = int(np.searchsorted(times, frac * times[-1]))
            i = min(i, len(times) - 1)
            prof = np.append(rec.states[i], sys.boundary.bottom(times[i]))
            ax.plot(prof, z, label=f"t={times[i]:.4g}")
        ax.invert_yaxis()
        ax.set_xlabel("h [cm]")
        ax.set_ylabel("depth z [cm]")
        ax.set_title(mode)
        ax.legend(fontsize="small")
    paths.append(_save(fig, out / "profiles.png"))
    return paths


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
