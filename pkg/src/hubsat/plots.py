"""Figure rendering for the CLI report path (opt-in via --plot).

Each helper takes already-computed report data and writes one PNG next to
the delimited output.  Nothing here feeds back into the numeric results.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .bounds import QueueLengthLaw

plt.rcParams["figure.figsize"] = (6.0, 3.6)
plt.rcParams["figure.dpi"] = 130
plt.rcParams["savefig.bbox"] = "tight"
plt.rcParams["axes.grid"] = True
plt.rcParams["grid.alpha"] = 0.3


def save_fluid_figure(path: Path, times, hub, bottleneck, dense=None) -> Path:
    fig, ax = plt.subplots()
    if dense is not None:
        ax.plot(dense[0], dense[1], "-", color="C0", lw=1.2)
        ax.plot(dense[0], dense[2], "-", color="C1", lw=1.2)
    ax.plot(times, hub, "o", color="C0", label="hub occupancy")
    ax.plot(times, bottleneck, "s", color="C1", label="bottleneck queue")
    ax.set_xlabel("t")
    ax.set_ylabel("normalized level")
    ax.set_ylim(-0.02, 1.02)
    ax.legend()
    fig.savefig(path)
    plt.close(fig)
    return path


def save_bounds_figure(path: Path, station: int, rows) -> Path:
    """Envelope band, Rolski sandwich and solved root for one station."""
    ts = [r["t"] for r in rows]
    fig, ax = plt.subplots()
    ax.fill_between(ts, [r["lower"] for r in rows], [r["upper"] for r in rows],
                    alpha=0.25, color="C0", label="envelope")
    ax.plot(ts, [r["rolski_lo"] for r in rows], ":", color="C2", label="two-moment sandwich")
    ax.plot(ts, [r["rolski_hi"] for r in rows], ":", color="C2")
    ax.plot(ts, [r["rho"] for r in rows], "--", color="C3", label="rho")
    ax.plot(ts, [r["root"] for r in rows], "-", color="C0", label="root")
    ax.set_xlabel("t")
    ax.set_ylabel("root / bounds")
    ax.set_title(f"station {station}")
    ax.legend(fontsize=8)
    fig.savefig(path)
    plt.close(fig)
    return path


def save_occupancy_figure(path: Path, times, mean, halfwidth, reference=None) -> Path:
    fig, ax = plt.subplots()
    mean = np.asarray(mean)
    if halfwidth is not None:
        hw = np.asarray(halfwidth)
        ax.errorbar(times, mean, yerr=hw, fmt="o", color="C0", capsize=3,
                    label="simulated (95% CI)")
    else:
        ax.plot(times, mean, "o", color="C0", label="simulated")
    if reference is not None:
        ax.plot(times, reference, "-", color="C3", label="fluid limit")
    ax.set_xlabel("t")
    ax.set_ylabel("hub occupancy")
    ax.legend()
    fig.savefig(path)
    plt.close(fig)
    return path


def save_histogram_figure(path: Path, station: int, t: float,
                          hist: dict[int, float], law: QueueLengthLaw) -> Path:
    top = max(max(hist), min(law.i_max, 20))
    counts = np.arange(top + 1)
    emp = [hist.get(int(i), 0.0) for i in counts]
    theo = [law.pmf(int(i)) for i in counts]
    fig, ax = plt.subplots()
    ax.bar(counts - 0.2, emp, width=0.4, color="C0", label="simulated")
    ax.bar(counts + 0.2, theo, width=0.4, color="C3", label="queue-length law")
    ax.set_xlabel("queue length")
    ax.set_ylabel("probability")
    ax.set_title(f"station {station}, t = {t:g}")
    ax.legend()
    fig.savefig(path)
    plt.close(fig)
    return path
