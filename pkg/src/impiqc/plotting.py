"""Figures for the reproduction targets.

matplotlib is optional; ``available()`` tells whether figures can be drawn.
"""

import os

import numpy as np


def available():
    try:
        import matplotlib  # noqa: F401
    except ImportError:
        return False
    return True


def _plt():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def fig2(summary, path):
    plt = _plt()
    rows = summary["data"]
    tests = sorted({r["test"] for r in rows})
    fig, axes = plt.subplots(1, len(tests), figsize=(3.2 * len(tests), 3.4), sharey=True)
    axes = np.atleast_1d(axes)
    ranges = sorted({(r["tmin"], r["tmax"]) for r in rows})
    for ax, test in zip(axes, tests):
        for r in rows:
            if r["test"] != test or r["status"] != "feasible":
                continue
            ax.plot(r["beta"], ranges.index((r["tmin"], r["tmax"])), "s", ms=2.5, color="tab:blue")
        ax.set_title(test, fontsize=9)
        ax.set_xlabel("beta")
    axes[0].set_yticks(range(len(ranges)))
    axes[0].set_yticklabels([f"[{a},{b}]" for a, b in ranges], fontsize=5)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def table1(summary, path):
    plt = _plt()
    from .reproduce import TABLE1_COLS, TABLE1_REF, TABLE1_ROWS

    fig, ax = plt.subplots(figsize=(5, 3.4))
    x = np.arange(len(TABLE1_ROWS))
    for i, col in enumerate(TABLE1_COLS):
        got = [summary["data"][f"{rng}/{col}"]["gamma"] for rng in TABLE1_ROWS]
        ref = [TABLE1_REF[rng][i] for rng in TABLE1_ROWS]
        line, = ax.plot(x, got, "o-", label=col)
        ax.plot(x, ref, "x--", color=line.get_color(), alpha=0.6)
    ax.set_xticks(x)
    ax.set_xticklabels([f"[{a},{b}]" for a, b in TABLE1_ROWS])
    ax.set_ylabel("gain bound")
    ax.legend(fontsize=7)
    ax.set_title("computed (o) vs reference (x)", fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def ordering(summary, path):
    plt = _plt()
    data = summary["data"]
    ranges = sorted({k.split("/")[0] for k in data})
    tests = sorted({k.split("/")[1] for k in data})
    fig, ax = plt.subplots(figsize=(6, 3.4))
    x = np.arange(len(ranges))
    for t in tests:
        ax.plot(x, [data[f"{r}/{t}"] for r in ranges], "o-", ms=3, label=t)
    ax.set_xticks(x)
    ax.set_xticklabels(ranges, fontsize=7)
    ax.set_ylabel("gain bound")
    ax.legend(fontsize=6, ncol=2)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def fig8(summary, path):
    plt = _plt()
    traces = summary["data"]
    fig, axes = plt.subplots(1, len(traces), figsize=(5 * len(traces), 3), sharey=False)
    for ax, (name, cols) in zip(np.atleast_1d(axes), traces.items()):
        t = np.arange(len(cols["v"]))
        ax.plot(t, cols["v"], "k", lw=1.2, label="v")
        for key in cols:
            if key.startswith("u_"):
                ax.plot(t, cols[key], lw=0.9, label=key)
        for tk in np.flatnonzero(cols["impulse"]):
            ax.axvline(tk, color="0.85", lw=0.5, zorder=0)
        ax.set_title(name, fontsize=9)
        ax.set_xlabel("t")
        ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render(target, summary, outdir):
    path = os.path.join(outdir, f"{target}.png")
    {"fig2": fig2, "table1": table1, "ordering": ordering, "fig8": fig8}[target](summary, path)
    return path
